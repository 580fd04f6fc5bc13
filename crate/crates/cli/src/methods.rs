//! The method catalog: every solver the CLI can dispatch, its
//! compatibility rules, and a uniform column-oriented output format.
//!
//! Compatibility rules (checked when a scenario is built, and reported per
//! method):
//!
//! * `EXACT` — collective-spin closed form; requires `omega0 = 0`.
//! * `ORACLE` — brute-force product-basis propagation; requires
//!   `n_bath <= guard` (guard defaults to 8; `--allow-large-oracle`
//!   raises it to 12). Violations are guard errors (exit 3).
//! * `NZ_P1`, `TCL_P1`, `NZ_P2`, `TCL_P2` — second-order master equations
//!   under the thermal-product (P1) and bath-resolving (P2) projectors; no
//!   extra requirements.
//! * `CLOSED_NZ2` — per-block closed-form NZ populations, summed over the
//!   thermal bath ensemble; requires `j1 = 1`, `omega0 = 0`, and the
//!   initial state `|1,1><1,1|`. Models only the m = 1 population (element
//!   (0,0)).
//! * `CLOSED_TCL_LARGEM` — same regime and output as `CLOSED_NZ2` but for
//!   the large-|m| TCL closed form; additionally requires an odd bath
//!   (an even bath hits the undefined block centered at m = 0).
//! * `APPENDIX_EXACT`, `APPENDIX_TCL_P1`, `APPENDIX_TCL_P2` — detuned
//!   spin-1/2 closed forms; require `j1 = 1/2` and `beta = 0`.

use spinstar::angular_momentum::{collective_spins, ln_degeneracy, ln_partition_function};
use spinstar::closed_forms::{
    appendix_exact, appendix_tcl_correlated, appendix_tcl_thermal, nz2_population,
    tcl_j1_largem, J1BlockParams,
};
use spinstar::exact_dynamics::{brute_force_evolve, exact_evolve, DensityMatrix};
use spinstar::master_equations::{assemble_reduced, nz_solve, tcl_solve};
use spinstar::{
    Complex64, GridSpec, HalfInt, LogFactorialTable, ModelSpec, ProjectorKind, TimeSeries,
};

use crate::config::{all_elements, Scenario};
use crate::error::CliError;

/// Default bath-size guard for the brute-force oracle.
pub const DEFAULT_ORACLE_GUARD: u32 = 8;
/// Largest guard the `--allow-large-oracle` flag unlocks.
pub const MAX_ORACLE_GUARD: u32 = 12;
/// Thermal blocks lighter than this (relative to the heaviest block) are
/// skipped when summing closed-form block solutions over the bath ensemble.
pub const CLOSED_FORM_WEIGHT_FLOOR: f64 = 1e-16;

/// A method/model incompatibility; guard violations exit differently from
/// plain config problems.
#[derive(Debug)]
pub enum Incompatibility {
    Config(String),
    Guard(String),
}

/// Every solver the CLI can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    Exact,
    Oracle,
    NzP1,
    TclP1,
    NzP2,
    TclP2,
    ClosedNz2,
    ClosedTclLargem,
    AppendixExact,
    AppendixTclP1,
    AppendixTclP2,
}

impl Method {
    pub const ALL: [Method; 11] = [
        Method::Exact,
        Method::Oracle,
        Method::NzP1,
        Method::TclP1,
        Method::NzP2,
        Method::TclP2,
        Method::ClosedNz2,
        Method::ClosedTclLargem,
        Method::AppendixExact,
        Method::AppendixTclP1,
        Method::AppendixTclP2,
    ];

    /// Canonical config-file name.
    pub fn name(self) -> &'static str {
        match self {
            Method::Exact => "EXACT",
            Method::Oracle => "ORACLE",
            Method::NzP1 => "NZ_P1",
            Method::TclP1 => "TCL_P1",
            Method::NzP2 => "NZ_P2",
            Method::TclP2 => "TCL_P2",
            Method::ClosedNz2 => "CLOSED_NZ2",
            Method::ClosedTclLargem => "CLOSED_TCL_LARGEM",
            Method::AppendixExact => "APPENDIX_EXACT",
            Method::AppendixTclP1 => "APPENDIX_TCL_P1",
            Method::AppendixTclP2 => "APPENDIX_TCL_P2",
        }
    }

    /// Inverse of [`Method::name`].
    pub fn parse(s: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == s)
    }

    /// Check this method against a scenario's model and initial state.
    pub fn check_compatible(
        self,
        scenario: &Scenario,
        oracle_guard: u32,
    ) -> Result<(), Incompatibility> {
        let model = &scenario.model;
        let fail = |msg: String| Err(Incompatibility::Config(msg));
        match self {
            Method::Exact => {
                if model.omega0 != 0.0 {
                    return fail(format!(
                        "requires omega0 = 0, got {} (use ORACLE for detuned exact dynamics)",
                        model.omega0
                    ));
                }
            }
            Method::Oracle => {
                let guard = oracle_guard.min(MAX_ORACLE_GUARD);
                if model.n_bath > guard {
                    return Err(Incompatibility::Guard(format!(
                        "brute-force oracle bath of {} spins exceeds the guard of {guard}",
                        model.n_bath
                    )));
                }
            }
            Method::NzP1 | Method::TclP1 | Method::NzP2 | Method::TclP2 => {}
            Method::ClosedNz2 | Method::ClosedTclLargem => {
                if model.j1 != HalfInt::from_int(1) {
                    return fail(format!("requires j1 = 1, got {}", model.j1));
                }
                if model.omega0 != 0.0 {
                    return fail(format!("requires omega0 = 0, got {}", model.omega0));
                }
                if !is_upper_projector(&scenario.initial) {
                    return fail("requires the initial state |1,1><1,1|".into());
                }
                if self == Method::ClosedTclLargem && model.n_bath % 2 == 0 {
                    return fail(format!(
                        "requires an odd bath (n_bath = {} has a block centered at m = 0 \
                         where the large-m form is undefined)",
                        model.n_bath
                    ));
                }
            }
            Method::AppendixExact | Method::AppendixTclP1 | Method::AppendixTclP2 => {
                if model.j1 != HalfInt::HALF || model.beta != 0.0 {
                    return fail(format!(
                        "requires j1 = 1/2 and beta = 0, got j1 = {}, beta = {}",
                        model.j1, model.beta
                    ));
                }
            }
        }
        Ok(())
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Is this density matrix exactly the projector onto the top basis state?
fn is_upper_projector(state: &DensityMatrix) -> bool {
    let mat = state.matrix();
    let dim = mat.dim();
    for r in 0..dim {
        for c in 0..dim {
            let want = if r == 0 && c == 0 { 1.0 } else { 0.0 };
            if (mat[(r, c)] - Complex64::new(want, 0.0)).norm() > 1e-14 {
                return false;
            }
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Output format
// ---------------------------------------------------------------------------

/// A solver's trajectory in column form: one complex column per modeled
/// density-matrix element, aligned with `times`.
#[derive(Clone, Debug)]
pub struct MethodOutput {
    pub method: Method,
    pub times: Vec<f64>,
    /// Modeled (row, col) elements, row-major order.
    pub elements: Vec<(usize, usize)>,
    /// `values[i][k]` is element `elements[k]` at `times[i]`.
    pub values: Vec<Vec<Complex64>>,
}

impl MethodOutput {
    fn from_time_series(method: Method, series: &TimeSeries) -> MethodOutput {
        let dim = series.states.first().map_or(0, |s| s.dim());
        let elements = all_elements(dim);
        let values = series
            .states
            .iter()
            .map(|state| {
                let m = state.matrix();
                elements.iter().map(|&(r, c)| m[(r, c)]).collect()
            })
            .collect();
        MethodOutput { method, times: series.times.clone(), elements, values }
    }

    /// Column index of an element, if this method models it.
    pub fn column_of(&self, element: (usize, usize)) -> Option<usize> {
        self.elements.iter().position(|&e| e == element)
    }

    /// Error out on any non-finite value (NaN/inf from a solver).
    pub fn ensure_finite(&self) -> Result<(), CliError> {
        for (i, row) in self.values.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                if !v.re.is_finite() || !v.im.is_finite() {
                    let (r, c) = self.elements[k];
                    return Err(CliError::Numerical(format!(
                        "{} produced a non-finite element ({r},{c}) at t = {}",
                        self.method, self.times[i]
                    )));
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Dispatch
// ---------------------------------------------------------------------------

/// Run one method over a grid. `oracle_guard` caps the brute-force bath
/// size (violations are guard errors). The output is checked to be finite.
pub fn run_method(
    method: Method,
    model: &ModelSpec,
    rho0: &DensityMatrix,
    grid: &GridSpec,
    oracle_guard: u32,
) -> Result<MethodOutput, CliError> {
    grid.validate()?;
    let times = grid.times();
    let output = match method {
        Method::Exact => {
            let series = exact_evolve(model, rho0, &times)?;
            MethodOutput::from_time_series(method, &series)
        }
        Method::Oracle => {
            let guard = oracle_guard.min(MAX_ORACLE_GUARD);
            if model.n_bath > guard {
                return Err(CliError::Guard(format!(
                    "brute-force oracle bath of {} spins exceeds the guard of {guard}",
                    model.n_bath
                )));
            }
            let series = brute_force_evolve(model, rho0, &times)?;
            MethodOutput::from_time_series(method, &series)
        }
        Method::NzP1 => {
            let series = nz_solve(model, ProjectorKind::ThermalProduct, rho0, grid)?;
            MethodOutput::from_time_series(method, &series)
        }
        Method::TclP1 => {
            let series = tcl_solve(model, ProjectorKind::ThermalProduct, rho0, grid)?;
            MethodOutput::from_time_series(method, &series)
        }
        Method::NzP2 => {
            let series = nz_solve(model, ProjectorKind::Correlated, rho0, grid)?;
            MethodOutput::from_time_series(method, &series)
        }
        Method::TclP2 => {
            let series = tcl_solve(model, ProjectorKind::Correlated, rho0, grid)?;
            MethodOutput::from_time_series(method, &series)
        }
        Method::ClosedNz2 => closed_block_sum(method, model, &times, |p, t| {
            Ok(nz2_population(p, t))
        })?,
        Method::ClosedTclLargem => closed_block_sum(method, model, &times, |p, t| {
            Ok(tcl_j1_largem(p, t)
                .map_err(|e| CliError::Numerical(e.to_string()))?
                .0)
        })?,
        Method::AppendixExact => {
            appendix_series(method, &times, |t| Ok(appendix_exact(model, rho0, t)?.into_matrix()))?
        }
        Method::AppendixTclP1 => appendix_series(method, &times, |t| {
            Ok(appendix_tcl_thermal(model, rho0, t)?.into_matrix())
        })?,
        Method::AppendixTclP2 => appendix_series(method, &times, |t| {
            Ok(assemble_reduced(&appendix_tcl_correlated(model, rho0, t)?))
        })?,
    };
    output.ensure_finite()?;
    Ok(output)
}

/// Sum a per-block closed-form population over the thermal bath ensemble.
///
/// The initial state |1,1><1,1| puts weight w_{j,m} = nu_j e^{-beta m} / Z
/// into the first slot of the block of sector (j, m), which is the block
/// centered at m + 1; each block then evolves independently with that
/// weight as its conserved constant. Blocks lighter than
/// [`CLOSED_FORM_WEIGHT_FLOOR`] relative to the heaviest are skipped.
fn closed_block_sum(
    method: Method,
    model: &ModelSpec,
    times: &[f64],
    block_population: impl Fn(&J1BlockParams, f64) -> Result<f64, CliError>,
) -> Result<MethodOutput, CliError> {
    let lnfac = LogFactorialTable::shared();
    let n = model.n_bath;
    let ln_z = ln_partition_function(n, model.beta);

    // Collect block weights in log space, then apply the relative floor.
    let mut blocks: Vec<(HalfInt, f64)> = Vec::new();
    let mut max_ln_w = f64::NEG_INFINITY;
    for j in collective_spins(n) {
        let ln_nu = ln_degeneracy(n, j, lnfac);
        for m in j.projections() {
            let ln_w = ln_nu - model.beta * m.value() - ln_z;
            max_ln_w = max_ln_w.max(ln_w);
            blocks.push((j, ln_w));
        }
    }
    let cutoff = max_ln_w + CLOSED_FORM_WEIGHT_FLOOR.ln();

    let mut params = Vec::new();
    let mut block_index = 0usize;
    for j in collective_spins(n) {
        for m in j.projections() {
            let (_, ln_w) = blocks[block_index];
            block_index += 1;
            if ln_w < cutoff {
                continue;
            }
            let center = HalfInt::from_twice(m.twice() + 2);
            let p = J1BlockParams::new(j, center, model.coupling, ln_w.exp())
                .map_err(|e| CliError::Numerical(e.to_string()))?;
            params.push(p);
        }
    }

    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        let mut total = 0.0;
        for p in &params {
            total += block_population(p, t)?;
        }
        values.push(vec![Complex64::new(total, 0.0)]);
    }
    Ok(MethodOutput {
        method,
        times: times.to_vec(),
        elements: vec![(0, 0)],
        values,
    })
}

/// Evaluate a closed-form reduced matrix at every grid time.
fn appendix_series(
    method: Method,
    times: &[f64],
    state_at: impl Fn(f64) -> Result<spinstar::ComplexMatrix, CliError>,
) -> Result<MethodOutput, CliError> {
    let mut elements = Vec::new();
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        let mat = state_at(t)?;
        if elements.is_empty() {
            elements = all_elements(mat.dim());
        }
        values.push(elements.iter().map(|&(r, c)| mat[(r, c)]).collect());
    }
    Ok(MethodOutput { method, times: times.to_vec(), elements, values })
}

impl From<spinstar::closed_forms::ClosedFormError> for CliError {
    fn from(err: spinstar::closed_forms::ClosedFormError) -> Self {
        CliError::Numerical(err.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model() -> ModelSpec {
        ModelSpec::resonant(HalfInt::from_int(1), 4, 0.25, 1.0)
    }

    fn upper(model: &ModelSpec) -> DensityMatrix {
        DensityMatrix::basis_projector(model.j1, model.j1).unwrap()
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(Method::parse(m.name()), Some(m), "{m}");
        }
        assert_eq!(Method::parse("nz_p1"), None, "names are case-sensitive");
    }

    #[test]
    fn exact_output_matches_solver_series() {
        let model = model();
        let rho0 = upper(&model);
        let grid = GridSpec::from_zero(1.0, 0.25);
        let out = run_method(Method::Exact, &model, &rho0, &grid, 8).unwrap();
        assert_eq!(out.times.len(), 5);
        assert_eq!(out.elements.len(), 9);
        let series = exact_evolve(&model, &rho0, &grid.times()).unwrap();
        let want = series.states[3].matrix()[(1, 1)];
        let col = out.column_of((1, 1)).unwrap();
        assert_eq!(out.values[3][col], want);
    }

    #[test]
    fn oracle_guard_is_enforced_at_run_time() {
        let model = ModelSpec::resonant(HalfInt::HALF, 9, 0.0, 1.0);
        let rho0 = upper(&model);
        let grid = GridSpec::from_zero(0.1, 0.05);
        let err = run_method(Method::Oracle, &model, &rho0, &grid, 8).unwrap_err();
        assert_eq!(err.exit_code(), 3, "guard violations exit with 3");
        assert!(run_method(Method::Oracle, &model, &rho0, &grid, 12).is_ok());
        // The unlocked guard still cannot exceed the hard cap.
        let model = ModelSpec::resonant(HalfInt::HALF, 13, 0.0, 1.0);
        let err = run_method(Method::Oracle, &model, &rho0, &grid, 100).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn closed_sums_start_at_unit_population_and_match_block_weights() {
        // At t = 0 every block holds its full weight in the first slot, so
        // the ensemble sum is the initial population 1 (up to the weight
        // floor).
        let model = model();
        let grid = GridSpec::from_zero(2.0, 0.5);
        let rho0 = upper(&model);
        for method in [Method::ClosedNz2, Method::ClosedTclLargem] {
            // n_bath = 4 is even; the large-m sum needs an odd bath.
            let model = if method == Method::ClosedTclLargem {
                ModelSpec::resonant(HalfInt::from_int(1), 5, 0.25, 1.0)
            } else {
                model
            };
            let out = run_method(method, &model, &rho0, &grid, 8).unwrap();
            assert_eq!(out.elements, vec![(0, 0)]);
            let p0 = out.values[0][0].re;
            assert!(
                (p0 - 1.0).abs() < 1e-12,
                "{method}: population at t=0 is {p0}, want 1"
            );
            // Populations stay in [0, 1].
            for (i, row) in out.values.iter().enumerate() {
                let p = row[0].re;
                assert!(
                    (-1e-12..=1.0 + 1e-12).contains(&p),
                    "{method}: population {p} out of range at t={}",
                    out.times[i]
                );
            }
        }
    }

    #[test]
    fn appendix_methods_produce_two_level_series() {
        let model = ModelSpec {
            j1: HalfInt::HALF,
            n_bath: 6,
            beta: 0.0,
            coupling: 1.0,
            omega0: 2.0,
        };
        let rho0 = upper(&model);
        let grid = GridSpec::from_zero(1.0, 0.25);
        for method in [Method::AppendixExact, Method::AppendixTclP1, Method::AppendixTclP2] {
            let out = run_method(method, &model, &rho0, &grid, 8).unwrap();
            assert_eq!(out.elements.len(), 4, "{method}");
            // Trace stays 1.
            for row in &out.values {
                let trace = row[0].re + row[3].re;
                assert!((trace - 1.0).abs() < 1e-10, "{method}: trace {trace}");
            }
        }
    }
}
