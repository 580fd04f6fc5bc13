//! Second-order Nakajima-Zwanzig (NZ) and time-convolutionless (TCL) master
//! equations for the spin-star model, under two projection superoperators:
//!
//! * the thermal-product projector P1, which projects the bath onto its
//!   thermal state — the reduced state is a single (2 j1 + 1)-dimensional
//!   matrix driven by the memory kernels Omega+-;
//! * the correlated projector P2, which resolves the bath by its conserved
//!   collective quantum numbers (j, m) — the state splits into sector
//!   matrices rho_jm coupled only to their m +- 1 neighbors within a j block.
//!
//! Both equations are treated in the interaction picture of
//! H0 = omega0 S_z + A S_z J_z, where the second-order generator has a common
//! four-term shape
//!
//! ```text
//!  d/dt rho = -(A^2/4) (Y + Y^dagger),
//!  Y = S+ W1 S- rho_a  -  S+ D_t rho_b D_t^* W2 S-
//!    - D_t^* W3 S- rho_c S+ D_t  +  rho_d S- S+ W4,
//! ```
//!
//! with D_t = exp(-i A t S_z) and W1..W4 diagonal in S_z. The NZ and TCL
//! variants differ only in what fills the W slots (instantaneous kernel
//! values against rho(t1), or coefficients integrated over the delay against
//! rho(t)) and which sector supplies each operand. The TCL coefficient
//! integrals are evaluated in closed form — a binomial expansion of the
//! cos^{N-1} bath correlation for P1, single complex exponentials for P2 —
//! so no numerical quadrature enters the TCL right-hand side.
//!
//! Solvers return their trajectories transformed back out of the interaction
//! picture: diagonal elements are untouched, off-diagonals acquire the phase
//! exp(-i omega0 (m_p - m_q) t) together with either the bath-averaged
//! dressing [cos((A dm t - i beta)/2)/cosh(beta/2)]^N (P1) or the sector
//! phase exp(-i A m (m_p - m_q) t) (P2).

use std::collections::BTreeMap;

use crate::angular_momentum::{
    collective_spins, ln_degeneracy, ln_partition_function, HalfInt, LogFactorialTable,
};
use crate::exact_dynamics::{
    ladder_up_amplitude, DensityMatrix, ExactDynamicsError, ModelSpec, TimeSeries,
};
use crate::numerics::{ln_cos_pow, rk4_solve, volterra_solve, Complex64, ComplexMatrix, GridSpec, NumericsError};
use thiserror::Error;

/// Relative initial-weight floor below which whole j blocks of the
/// correlated-projector state are dropped.
pub const DEFAULT_SECTOR_WEIGHT_FLOOR: f64 = 1e-14;

/// Sector-state normalization defect allowed (sum of traces vs 1).
pub const SECTOR_NORMALIZATION_TOL: f64 = 1e-10;

/// Frequencies with |mu t| below this use the series form of the phase
/// integral (e^{i mu t} - 1)/(i mu) to avoid cancellation.
const PHASE_INTEGRAL_SMALL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum MasterEquationError {
    #[error(transparent)]
    Model(#[from] ExactDynamicsError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error("sector state is invalid: {0}")]
    InvalidSectorState(String),
}

/// Which projection superoperator defines the relevant part of the state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProjectorKind {
    /// P1: bath projected onto its thermal state; one reduced matrix.
    ThermalProduct,
    /// P2: bath resolved by collective (j, m); coupled sector matrices.
    Correlated,
}

/// Sign selector for the two bath correlation kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KernelSign {
    Plus,
    Minus,
}

// ---------------------------------------------------------------------------
// Kernels
// ---------------------------------------------------------------------------

/// ln cosh(beta/2), overflow-safe for any beta.
fn ln_cosh_half(beta: f64) -> f64 {
    let x = beta.abs() / 2.0;
    // cosh x = e^x (1 + e^{-2x})/2.
    x + (-2.0 * x).exp().ln_1p() - std::f64::consts::LN_2
}

/// Thermal-product memory kernel
///
/// ```text
///  Omega+-(tau) = N cos^{N-1}((A tau + i beta)/2) e^{-i A tau / 2}
///                 e^{+-beta/2} / (2 cosh^N(beta/2)),
/// ```
///
/// multiplied by the detuning phase e^{i omega0 tau}, with tau = t - t1.
/// All magnitudes are combined in log space before exponentiating, so large
/// beta cannot overflow the cosine power or the normalization separately.
pub fn omega_kernel(model: &ModelSpec, sign: KernelSign, t: f64, t1: f64) -> Complex64 {
    let tau = t - t1;
    let n = model.n_bath;
    let a = model.coupling;
    let beta = model.beta;
    let z = Complex64::new(a * tau / 2.0, beta / 2.0);
    let (ln_mag_cos, ang_cos) = ln_cos_pow(n - 1, z);
    let sign_beta = match sign {
        KernelSign::Plus => beta / 2.0,
        KernelSign::Minus => -beta / 2.0,
    };
    let ln_mag = (n as f64).ln() + ln_mag_cos + sign_beta
        - std::f64::consts::LN_2
        - n as f64 * ln_cosh_half(beta);
    let ang = ang_cos - a * tau / 2.0 + model.omega0 * tau;
    Complex64::from_polar(ln_mag.exp(), ang)
}

/// Correlated-projector coefficient for sector (j, m):
///
/// ```text
///  Omega~+^m(tau) = [j(j+1) - m(m+1)] e^{i A m tau},
///  Omega~-^m(tau) = [j(j+1) - m(m-1)] e^{i A (m-1) tau},
/// ```
///
/// multiplied by e^{i omega0 tau}. Out-of-range m gives a vanishing
/// prefactor, not an error.
pub fn omega_tilde(
    j: HalfInt,
    m: HalfInt,
    sign: KernelSign,
    model: &ModelSpec,
    t: f64,
    t1: f64,
) -> Complex64 {
    let tau = t - t1;
    let a = model.coupling;
    let (b2, freq) = match sign {
        KernelSign::Plus => {
            let amp = ladder_up_amplitude(j, m);
            (amp * amp, a * m.value())
        }
        KernelSign::Minus => {
            let m1 = m - HalfInt::ONE;
            let amp = ladder_up_amplitude(j, m1);
            (amp * amp, a * m1.value())
        }
    };
    if b2 == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    b2 * Complex64::from_polar(1.0, (freq + model.omega0) * tau)
}

/// A labeled scalar kernel (t, t1) -> complex, for inspection and testing.
pub struct KernelFunction {
    pub label: String,
    evaluator: Box<dyn Fn(f64, f64) -> Complex64 + Send + Sync>,
}

impl KernelFunction {
    /// The thermal-product kernel Omega(sign).
    pub fn omega(model: ModelSpec, sign: KernelSign) -> Self {
        let label = match sign {
            KernelSign::Plus => "omega+",
            KernelSign::Minus => "omega-",
        };
        KernelFunction {
            label: label.into(),
            evaluator: Box::new(move |t, t1| omega_kernel(&model, sign, t, t1)),
        }
    }

    /// The correlated-projector coefficient for sector (j, m).
    pub fn omega_tilde(model: ModelSpec, j: HalfInt, m: HalfInt, sign: KernelSign) -> Self {
        let label = match sign {
            KernelSign::Plus => format!("omega~+ (j={j}, m={m})"),
            KernelSign::Minus => format!("omega~- (j={j}, m={m})"),
        };
        KernelFunction {
            label,
            evaluator: Box::new(move |t, t1| omega_tilde(j, m, sign, &model, t, t1)),
        }
    }

    pub fn eval(&self, t: f64, t1: f64) -> Complex64 {
        (self.evaluator)(t, t1)
    }
}

// ---------------------------------------------------------------------------
// Sector state (correlated projector)
// ---------------------------------------------------------------------------

/// State under the correlated projector: one (2 j1 + 1)-dimensional matrix
/// per bath sector (j, m), keyed by twice-values for exact ordering.
#[derive(Clone, Debug)]
pub struct SectorState {
    pub model: ModelSpec,
    /// (2j, 2m) -> sector matrix rho_jm.
    pub sectors: BTreeMap<(i32, i32), ComplexMatrix>,
    /// Initial weight discarded by the sector floor (0 when nothing dropped).
    pub dropped_weight: f64,
}

impl SectorState {
    /// Sum of sector traces (should be 1 - dropped_weight).
    pub fn total_trace(&self) -> Complex64 {
        self.sectors.values().map(|m| m.trace()).sum()
    }

    pub fn sector(&self, j: HalfInt, m: HalfInt) -> Option<&ComplexMatrix> {
        self.sectors.get(&(j.twice(), m.twice()))
    }

    /// Check normalization and per-sector Hermiticity.
    pub fn validate(&self) -> Result<(), MasterEquationError> {
        let tr = self.total_trace();
        let expect = 1.0 - self.dropped_weight;
        if (tr - Complex64::new(expect, 0.0)).norm() > SECTOR_NORMALIZATION_TOL {
            return Err(MasterEquationError::InvalidSectorState(format!(
                "sector traces sum to {tr}, expected {expect}"
            )));
        }
        for ((tj, tm), mat) in &self.sectors {
            let h = mat.hermiticity_error();
            if h > 1e-12 {
                return Err(MasterEquationError::InvalidSectorState(format!(
                    "sector (2j={tj}, 2m={tm}) Hermiticity defect {h:.3e}"
                )));
            }
        }
        Ok(())
    }
}

/// Sector-resolved trajectory (interaction picture).
#[derive(Clone, Debug)]
pub struct SectorSeries {
    pub model: ModelSpec,
    pub times: Vec<f64>,
    pub states: Vec<SectorState>,
}

/// Initial sector decomposition rho_jm(0) = (nu_j e^{-beta m} / Z) rho0 with
/// the default weight floor.
pub fn initial_sectors(model: &ModelSpec, rho0: &DensityMatrix) -> SectorState {
    initial_sectors_with_floor(model, rho0, DEFAULT_SECTOR_WEIGHT_FLOOR)
}

/// Initial sector decomposition with an explicit relative weight floor:
/// j blocks whose best weight is below `floor` times the global best are
/// dropped entirely, and the dropped mass is recorded.
///
/// Weights are assembled in log space, so large N and beta are safe.
pub fn initial_sectors_with_floor(
    model: &ModelSpec,
    rho0: &DensityMatrix,
    floor: f64,
) -> SectorState {
    let lnfac = LogFactorialTable::shared();
    let ln_z = ln_partition_function(model.n_bath, model.beta);
    // ln weight of sector (j, m) and the per-j maximum over m.
    let mut per_j: Vec<(HalfInt, f64, Vec<(i32, f64)>)> = Vec::new();
    let mut global_max = f64::NEG_INFINITY;
    for j in collective_spins(model.n_bath) {
        let ln_nu = ln_degeneracy(model.n_bath, j, lnfac);
        let mut rows = Vec::new();
        let mut j_max = f64::NEG_INFINITY;
        for m in j.projections() {
            let ln_w = ln_nu - model.beta * m.value() - ln_z;
            j_max = j_max.max(ln_w);
            rows.push((m.twice(), ln_w));
        }
        global_max = global_max.max(j_max);
        per_j.push((j, j_max, rows));
    }
    let cutoff = global_max + floor.ln();

    let mut sectors = BTreeMap::new();
    // Accumulate the dropped mass directly from the discarded weights: it is
    // far below the rounding noise of (1 - sum of kept weights).
    let mut dropped_weight = 0.0;
    for (j, j_max, rows) in per_j {
        if j_max < cutoff {
            for (_, ln_w) in rows {
                dropped_weight += ln_w.exp();
            }
            continue;
        }
        for (tm, ln_w) in rows {
            let mut mat = rho0.matrix().clone();
            mat.scale(Complex64::new(ln_w.exp(), 0.0));
            sectors.insert((j.twice(), tm), mat);
        }
    }
    SectorState { model: *model, sectors, dropped_weight }
}

/// Reassembled reduced state: rho_S = sum over (j, m) of rho_jm.
pub fn assemble_reduced(state: &SectorState) -> ComplexMatrix {
    let dim = state.model.dim();
    let mut out = ComplexMatrix::zeros(dim);
    for mat in state.sectors.values() {
        out.add_assign(mat);
    }
    out
}

// ---------------------------------------------------------------------------
// Back-transformations out of the interaction picture
// ---------------------------------------------------------------------------

/// P1 dressing of an interaction-picture matrix at time t. Off-diagonal
/// element (p, q) with projection difference dm = m_p - m_q acquires
///
/// ```text
///  e^{-i omega0 dm t} [cos((A dm t - i beta)/2) / cosh(beta/2)]^N;
/// ```
///
/// the bracket is the thermal bath average of e^{-i A m dm t} over sectors
/// (j, m) weighted by nu_j e^{-beta m}/Z, collapsed in closed form. Diagonal
/// elements pass through bit-identically.
pub fn back_transform_thermal(model: &ModelSpec, t: f64, state: &ComplexMatrix) -> ComplexMatrix {
    let dim = state.dim();
    let n = model.n_bath;
    let lch = ln_cosh_half(model.beta);
    ComplexMatrix::from_fn(dim, |p, q| {
        if p == q {
            return state[(p, q)];
        }
        let dm = (q as f64) - (p as f64); // m_p - m_q = q - p in this basis
        let z = Complex64::new(model.coupling * dm * t / 2.0, -model.beta / 2.0);
        let (ln_mag, ang) = ln_cos_pow(n, z);
        let dressing = Complex64::from_polar(
            (ln_mag - n as f64 * lch).exp(),
            ang - model.omega0 * dm * t,
        );
        dressing * state[(p, q)]
    })
}

/// P2 dressing: each sector (j, m) element (p, q) acquires the phase
/// e^{-i (omega0 + A m)(m_p - m_q) t}. Diagonals are untouched.
pub fn back_transform_sectors(state: &SectorState, t: f64) -> SectorState {
    let model = state.model;
    let mut sectors = BTreeMap::new();
    for (&(tj, tm), mat) in &state.sectors {
        let m_bath = tm as f64 / 2.0;
        let rate = model.omega0 + model.coupling * m_bath;
        let dressed = ComplexMatrix::from_fn(mat.dim(), |p, q| {
            if p == q {
                return mat[(p, q)];
            }
            let dm = (q as f64) - (p as f64);
            Complex64::from_polar(1.0, -rate * dm * t) * mat[(p, q)]
        });
        sectors.insert((tj, tm), dressed);
    }
    SectorState { model, sectors, dropped_weight: state.dropped_weight }
}

// ---------------------------------------------------------------------------
// Shared four-term generator
// ---------------------------------------------------------------------------

/// Apply the four-term second-order structure
///
/// ```text
///  Y = S+ W1 S- rho_a - S+ D rho_b D^* W2 S- - D^* W3 S- rho_c S+ D
///      + rho_d S- S+ W4
/// ```
///
/// and accumulate -(pref)(Y + Y^dagger) into `out`. All matrices are k x k,
/// flattened row-major; `lad[r]` is the ladder amplitude linking rows r and
/// r+1, `d[r]` the diagonal of D = e^{-i A t S_z}, and W1..W4 arbitrary
/// diagonals. Written elementwise for speed; verified against an explicit
/// operator-product construction in the unit tests.
#[allow(clippy::too_many_arguments)]
fn four_term_accumulate(
    k: usize,
    lad: &[f64],
    d: &[Complex64],
    w1: &[Complex64],
    w2: &[Complex64],
    w3: &[Complex64],
    w4: &[Complex64],
    rho_a: &[Complex64],
    rho_b: &[Complex64],
    rho_c: &[Complex64],
    rho_d: &[Complex64],
    pref: f64,
    out: &mut [Complex64],
) {
    let zero = Complex64::new(0.0, 0.0);
    let mut y = vec![zero; k * k];
    for r in 0..k {
        for c in 0..k {
            let mut v = zero;
            // T1: (S+ W1 S-) is diagonal with entry lad[r]^2 W1[r+1].
            if r + 1 < k {
                v += lad[r] * lad[r] * w1[r + 1] * rho_a[r * k + c];
            }
            // T2: -(S+ D) rho_b (D^* W2 S-).
            if r + 1 < k && c + 1 < k {
                v -= lad[r]
                    * d[r + 1]
                    * rho_b[(r + 1) * k + (c + 1)]
                    * d[c + 1].conj()
                    * w2[c + 1]
                    * lad[c];
            }
            // T3: -(D^* W3 S-) rho_c (S+ D).
            if r >= 1 && c >= 1 {
                v -= d[r].conj()
                    * w3[r]
                    * lad[r - 1]
                    * rho_c[(r - 1) * k + (c - 1)]
                    * lad[c - 1]
                    * d[c];
            }
            // T4: rho_d (S- S+ W4), diagonal entry lad[c-1]^2 W4[c].
            if c >= 1 {
                v += rho_d[r * k + c] * lad[c - 1] * lad[c - 1] * w4[c];
            }
            y[r * k + c] = v;
        }
    }
    // out -= pref (Y + Y^dagger).
    for r in 0..k {
        for c in 0..k {
            out[r * k + c] -= pref * (y[r * k + c] + y[c * k + r].conj());
        }
    }
}

/// Central-spin ladder amplitudes lad[r] linking rows r and r+1.
fn ladder_amps(model: &ModelSpec) -> Vec<f64> {
    let k = model.dim();
    (0..k.saturating_sub(1))
        .map(|r| {
            // Amplitude between m_{r+1} and m_r = m_{r+1} + 1.
            ladder_up_amplitude(model.j1, model.m_of_row(r + 1))
        })
        .collect()
}

/// Central-spin projections m_r as floats, descending.
fn m_values(model: &ModelSpec) -> Vec<f64> {
    (0..model.dim()).map(|r| model.m_of_row(r).value()).collect()
}

/// The phase integral E(mu, t) = int_0^t e^{i mu tau} d tau, with a series
/// guard near mu = 0 where the direct form cancels.
pub(crate) fn phase_integral(mu: f64, t: f64) -> Complex64 {
    if (mu * t).abs() < PHASE_INTEGRAL_SMALL {
        // t (1 + i mu t / 2 - (mu t)^2 / 6 + ...) truncated harmlessly.
        Complex64::new(t, 0.5 * mu * t * t)
    } else {
        (Complex64::from_polar(1.0, mu * t) - Complex64::new(1.0, 0.0))
            / Complex64::new(0.0, mu)
    }
}

// ---------------------------------------------------------------------------
// Thermal-product (P1) solvers
// ---------------------------------------------------------------------------

/// Closed-form integrals of the thermal kernel:
///
/// ```text
///  I+-(omega, t) = int_0^t Omega+-(tau) e^{i omega tau} d tau,
/// ```
///
/// through the binomial expansion of cos^{N-1}((A tau + i beta)/2) into
/// N single exponentials with log-space weights.
struct ThermalKernelIntegrals {
    /// Per expansion term: weight for (plus, minus) and oscillation rate.
    weights_plus: Vec<f64>,
    weights_minus: Vec<f64>,
    rates: Vec<f64>,
}

impl ThermalKernelIntegrals {
    fn new(model: &ModelSpec) -> Self {
        let n = model.n_bath;
        let a = model.coupling;
        let beta = model.beta;
        let lnfac = LogFactorialTable::shared();
        let lch = ln_cosh_half(beta);
        let mut weights_plus = Vec::with_capacity(n as usize);
        let mut weights_minus = Vec::with_capacity(n as usize);
        let mut rates = Vec::with_capacity(n as usize);
        for k in 0..n {
            // cos^{N-1}(x) = 2^{1-N} sum_k C(N-1, k) e^{i (N-1-2k) x} with
            // x = (A tau + i beta)/2; every magnitude is combined in log
            // space before the single exponentiation.
            let ln_binom = lnfac.ln_binomial((n - 1) as usize, k as i64);
            let pole = (n as f64 - 1.0) - 2.0 * k as f64;
            let ln_common = (n as f64).ln() + ln_binom - pole * beta / 2.0
                - (n as f64 - 1.0) * std::f64::consts::LN_2
                - std::f64::consts::LN_2
                - n as f64 * lch;
            weights_plus.push((ln_common + beta / 2.0).exp());
            weights_minus.push((ln_common - beta / 2.0).exp());
            // e^{i pole A tau / 2} e^{-i A tau / 2} = e^{i (pole - 1) A tau / 2}.
            rates.push((pole - 1.0) * a / 2.0);
        }
        ThermalKernelIntegrals { weights_plus, weights_minus, rates }
    }

    /// (I+(omega, t), I-(omega, t)).
    fn eval(&self, omega: f64, t: f64) -> (Complex64, Complex64) {
        let mut ip = Complex64::new(0.0, 0.0);
        let mut im = Complex64::new(0.0, 0.0);
        for ((wp, wm), rate) in self
            .weights_plus
            .iter()
            .zip(self.weights_minus.iter())
            .zip(self.rates.iter())
        {
            let e = phase_integral(rate + omega, t);
            ip += *wp * e;
            im += *wm * e;
        }
        (ip, im)
    }
}

/// NZ solve under the thermal-product projector (interaction picture),
/// returning the raw trajectory of reduced matrices.
fn nz_thermal_interaction(
    model: &ModelSpec,
    rho0: &DensityMatrix,
    grid: &GridSpec,
) -> Result<Vec<Vec<Complex64>>, MasterEquationError> {
    grid.validate().map_err(MasterEquationError::Numerics)?;
    let k = model.dim();
    let a = model.coupling;
    let lad = ladder_amps(model);
    let ms = m_values(model);
    let n_steps = grid.n_steps();

    // Delay-indexed tables: kernel values Omega+-(tau) e^{i omega0 tau} and
    // the delay phases e^{-i A tau m_r}; time-indexed table e^{-i A t m_r}.
    let mut w_plus_tau = Vec::with_capacity(n_steps + 1);
    let mut w_minus_tau = Vec::with_capacity(n_steps + 1);
    let mut d_t = Vec::with_capacity(n_steps + 1);
    for i in 0..=n_steps {
        let tau = grid.step * i as f64;
        let op = omega_kernel(model, KernelSign::Plus, tau, 0.0);
        let om = omega_kernel(model, KernelSign::Minus, tau, 0.0);
        let row_p: Vec<Complex64> = ms
            .iter()
            .map(|m| op * Complex64::from_polar(1.0, -a * tau * m))
            .collect();
        let row_m: Vec<Complex64> = ms
            .iter()
            .map(|m| om * Complex64::from_polar(1.0, -a * tau * m))
            .collect();
        w_plus_tau.push(row_p);
        w_minus_tau.push(row_m);
        let t = grid.time(i);
        d_t.push(
            ms.iter()
                .map(|m| Complex64::from_polar(1.0, -a * t * m))
                .collect::<Vec<_>>(),
        );
    }

    let pref = a * a / 4.0;
    let t0 = grid.t_start;
    let h = grid.step;
    let kernel = move |t: f64, t1: f64, y: &[Complex64], out: &mut [Complex64]| {
        let it = ((t - t0) / h).round() as usize;
        let it1 = ((t1 - t0) / h).round() as usize;
        let dtau = it - it1;
        out.iter_mut().for_each(|e| *e = Complex64::new(0.0, 0.0));
        four_term_accumulate(
            k,
            &lad,
            &d_t[it],
            &w_plus_tau[dtau],
            &w_minus_tau[dtau],
            &w_plus_tau[dtau],
            &w_minus_tau[dtau],
            y,
            y,
            y,
            y,
            pref,
            out,
        );
    };

    Ok(volterra_solve(kernel, rho0.matrix().as_slice(), grid)?)
}

/// TCL solve under the thermal-product projector (interaction picture).
fn tcl_thermal_interaction(
    model: &ModelSpec,
    rho0: &DensityMatrix,
    grid: &GridSpec,
) -> Result<Vec<Vec<Complex64>>, MasterEquationError> {
    grid.validate().map_err(MasterEquationError::Numerics)?;
    let k = model.dim();
    let a = model.coupling;
    let lad = ladder_amps(model);
    let ms = m_values(model);
    let integrals = ThermalKernelIntegrals::new(model);
    let pref = a * a / 4.0;

    // RK4 evaluates the same t twice (the two half-step stages); cache the
    // last coefficient set rather than recomputing the binomial sums.
    let mut cache_t = f64::NAN;
    let mut w_plus = vec![Complex64::new(0.0, 0.0); k];
    let mut w_minus = vec![Complex64::new(0.0, 0.0); k];
    let mut d = vec![Complex64::new(0.0, 0.0); k];

    let rhs = move |t: f64, y: &[Complex64], out: &mut [Complex64]| {
        if t != cache_t {
            for (r, m) in ms.iter().enumerate() {
                let (ip, im) = integrals.eval(model.omega0 - a * m, t);
                w_plus[r] = ip;
                w_minus[r] = im;
                d[r] = Complex64::from_polar(1.0, -a * t * m);
            }
            cache_t = t;
        }
        out.iter_mut().for_each(|e| *e = Complex64::new(0.0, 0.0));
        four_term_accumulate(
            k, &lad, &d, &w_plus, &w_minus, &w_plus, &w_minus, y, y, y, y, pref, out,
        );
    };

    Ok(rk4_solve(rhs, rho0.matrix().as_slice(), grid)?)
}

// ---------------------------------------------------------------------------
// Correlated (P2) solvers
// ---------------------------------------------------------------------------

/// Fixed layout of a sector system: which (j, m) blocks exist, where each
/// lives in the flat state vector, and who its m +- 1 neighbors are.
struct SectorLayout {
    keys: Vec<(i32, i32)>,
    /// Flat offset of each sector's k x k block.
    offsets: Vec<usize>,
    /// Index of the (j, m+1) neighbor, if kept.
    up: Vec<Option<usize>>,
    /// Index of the (j, m-1) neighbor, if kept.
    down: Vec<Option<usize>>,
    /// b^2(j, m) and b^2(j, m-1) per sector.
    b2_plus: Vec<f64>,
    b2_minus: Vec<f64>,
    /// Bath projection m per sector, as a float.
    m_bath: Vec<f64>,
    block: usize,
    len: usize,
}

impl SectorLayout {
    fn new(state: &SectorState) -> Self {
        let k = state.model.dim();
        let block = k * k;
        let keys: Vec<(i32, i32)> = state.sectors.keys().copied().collect();
        let pos: std::collections::HashMap<(i32, i32), usize> =
            keys.iter().enumerate().map(|(i, &key)| (key, i)).collect();
        let mut up = Vec::with_capacity(keys.len());
        let mut down = Vec::with_capacity(keys.len());
        let mut b2_plus = Vec::with_capacity(keys.len());
        let mut b2_minus = Vec::with_capacity(keys.len());
        let mut m_bath = Vec::with_capacity(keys.len());
        for &(tj, tm) in &keys {
            up.push(pos.get(&(tj, tm + 2)).copied());
            down.push(pos.get(&(tj, tm - 2)).copied());
            let j = HalfInt::from_twice(tj);
            let m = HalfInt::from_twice(tm);
            let bp = ladder_up_amplitude(j, m);
            let bm = ladder_up_amplitude(j, m - HalfInt::ONE);
            b2_plus.push(bp * bp);
            b2_minus.push(bm * bm);
            m_bath.push(m.value());
        }
        let offsets = (0..keys.len()).map(|i| i * block).collect();
        let len = keys.len() * block;
        SectorLayout { keys, offsets, up, down, b2_plus, b2_minus, m_bath, block, len }
    }

    fn flatten(&self, state: &SectorState) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.len];
        for (i, key) in self.keys.iter().enumerate() {
            let mat = &state.sectors[key];
            y[self.offsets[i]..self.offsets[i] + self.block].copy_from_slice(mat.as_slice());
        }
        y
    }

    fn unflatten(&self, model: &ModelSpec, dropped: f64, y: &[Complex64]) -> SectorState {
        let k = model.dim();
        let mut sectors = BTreeMap::new();
        for (i, &key) in self.keys.iter().enumerate() {
            let slice = &y[self.offsets[i]..self.offsets[i] + self.block];
            sectors.insert(key, ComplexMatrix::from_vec(k, slice.to_vec()));
        }
        SectorState { model: *model, sectors, dropped_weight: dropped }
    }
}

/// NZ solve of a sector system (interaction picture).
pub fn nz_solve_sectors(
    model: &ModelSpec,
    initial: &SectorState,
    grid: &GridSpec,
) -> Result<SectorSeries, MasterEquationError> {
    grid.validate().map_err(MasterEquationError::Numerics)?;
    let layout = SectorLayout::new(initial);
    let k = model.dim();
    let a = model.coupling;
    let lad = ladder_amps(model);
    let ms = m_values(model);
    let n_steps = grid.n_steps();
    let zero = Complex64::new(0.0, 0.0);

    // Delay-indexed phase tables. Sector coefficients factorize as
    // b^2 e^{i(omega0 + A m) tau} e^{-i A tau m_r}: one table over the bath
    // m range (extended by one unit for the m-1 coefficient), one over the
    // central projections, one scalar for the detuning.
    let tm_min = layout.keys.iter().map(|&(_, tm)| tm).min().unwrap_or(0) - 2;
    let tm_max = layout.keys.iter().map(|&(_, tm)| tm).max().unwrap_or(0);
    let tm_span = ((tm_max - tm_min) / 2 + 1) as usize;
    let mut bath_tau: Vec<Vec<Complex64>> = Vec::with_capacity(n_steps + 1);
    let mut central_tau: Vec<Vec<Complex64>> = Vec::with_capacity(n_steps + 1);
    let mut detune_tau: Vec<Complex64> = Vec::with_capacity(n_steps + 1);
    let mut d_t: Vec<Vec<Complex64>> = Vec::with_capacity(n_steps + 1);
    for i in 0..=n_steps {
        let tau = grid.step * i as f64;
        bath_tau.push(
            (0..tm_span)
                .map(|s| {
                    let m = (tm_min + 2 * s as i32) as f64 / 2.0;
                    Complex64::from_polar(1.0, a * m * tau)
                })
                .collect(),
        );
        central_tau.push(
            ms.iter()
                .map(|m| Complex64::from_polar(1.0, -a * tau * m))
                .collect(),
        );
        detune_tau.push(Complex64::from_polar(1.0, model.omega0 * tau));
        let t = grid.time(i);
        d_t.push(
            ms.iter()
                .map(|m| Complex64::from_polar(1.0, -a * t * m))
                .collect(),
        );
    }
    let bath_slot = |tm: i32| ((tm - tm_min) / 2) as usize;
    let slots_p: Vec<usize> = layout.keys.iter().map(|&(_, tm)| bath_slot(tm)).collect();
    let slots_m: Vec<usize> = layout.keys.iter().map(|&(_, tm)| bath_slot(tm - 2)).collect();

    let pref = a * a / 4.0;
    let t0 = grid.t_start;
    let h = grid.step;
    let n_sectors = layout.keys.len();
    let block = layout.block;

    let mut w_plus = vec![zero; k];
    let mut w_minus = vec![zero; k];
    let zeros_block = vec![zero; block];
    let y0 = layout.flatten(initial);

    let kernel = move |t: f64, t1: f64, y: &[Complex64], out: &mut [Complex64]| {
        let it = ((t - t0) / h).round() as usize;
        let it1 = ((t1 - t0) / h).round() as usize;
        let dtau = it - it1;
        let central = &central_tau[dtau];
        let bath = &bath_tau[dtau];
        let detune = detune_tau[dtau];
        let d = &d_t[it];
        out.iter_mut().for_each(|e| *e = zero);
        for s in 0..n_sectors {
            let cp = layout.b2_plus[s] * detune * bath[slots_p[s]];
            let cm = layout.b2_minus[s] * detune * bath[slots_m[s]];
            for r in 0..k {
                w_plus[r] = cp * central[r];
                w_minus[r] = cm * central[r];
            }
            let own = &y[layout.offsets[s]..layout.offsets[s] + block];
            let upper = match layout.up[s] {
                Some(u) => &y[layout.offsets[u]..layout.offsets[u] + block],
                None => &zeros_block[..],
            };
            let lower = match layout.down[s] {
                Some(l) => &y[layout.offsets[l]..layout.offsets[l] + block],
                None => &zeros_block[..],
            };
            four_term_accumulate(
                k,
                &lad,
                d,
                &w_plus,
                &w_plus,
                &w_minus,
                &w_minus,
                own,
                upper,
                lower,
                own,
                pref,
                &mut out[layout.offsets[s]..layout.offsets[s] + block],
            );
        }
    };

    let ys = volterra_solve(kernel, &y0, grid)?;
    let layout = SectorLayout::new(initial);
    let states = ys
        .iter()
        .map(|y| layout.unflatten(model, initial.dropped_weight, y))
        .collect();
    Ok(SectorSeries { model: *model, times: grid.times(), states })
}

/// TCL solve of a sector system (interaction picture). The time-integrated
/// coefficients are single phase integrals, evaluated in closed form at
/// every integrator stage.
pub fn tcl_solve_sectors(
    model: &ModelSpec,
    initial: &SectorState,
    grid: &GridSpec,
) -> Result<SectorSeries, MasterEquationError> {
    grid.validate().map_err(MasterEquationError::Numerics)?;
    let layout = SectorLayout::new(initial);
    let k = model.dim();
    let a = model.coupling;
    let lad = ladder_amps(model);
    let ms = m_values(model);
    let zero = Complex64::new(0.0, 0.0);
    let pref = a * a / 4.0;
    let n_sectors = layout.keys.len();
    let block = layout.block;

    let mut w_plus = vec![zero; k];
    let mut w_minus = vec![zero; k];
    let mut d = vec![zero; k];
    let zeros_block = vec![zero; block];
    let y0 = layout.flatten(initial);

    let rhs = move |t: f64, y: &[Complex64], out: &mut [Complex64]| {
        for (r, m) in ms.iter().enumerate() {
            d[r] = Complex64::from_polar(1.0, -a * t * m);
        }
        out.iter_mut().for_each(|e| *e = zero);
        for s in 0..n_sectors {
            let mb = layout.m_bath[s];
            for (r, m_r) in ms.iter().enumerate() {
                w_plus[r] = layout.b2_plus[s]
                    * phase_integral(model.omega0 + a * mb - a * m_r, t);
                w_minus[r] = layout.b2_minus[s]
                    * phase_integral(model.omega0 + a * (mb - 1.0) - a * m_r, t);
            }
            let own = &y[layout.offsets[s]..layout.offsets[s] + block];
            let upper = match layout.up[s] {
                Some(u) => &y[layout.offsets[u]..layout.offsets[u] + block],
                None => &zeros_block[..],
            };
            let lower = match layout.down[s] {
                Some(l) => &y[layout.offsets[l]..layout.offsets[l] + block],
                None => &zeros_block[..],
            };
            four_term_accumulate(
                k,
                &lad,
                &d,
                &w_plus,
                &w_plus,
                &w_minus,
                &w_minus,
                own,
                upper,
                lower,
                own,
                pref,
                &mut out[layout.offsets[s]..layout.offsets[s] + block],
            );
        }
    };

    let ys = rk4_solve(rhs, &y0, grid)?;
    let layout = SectorLayout::new(initial);
    let states = ys
        .iter()
        .map(|y| layout.unflatten(model, initial.dropped_weight, y))
        .collect();
    Ok(SectorSeries { model: *model, times: grid.times(), states })
}

// ---------------------------------------------------------------------------
// Public solver entry points
// ---------------------------------------------------------------------------

fn thermal_series_to_schroedinger(
    model: &ModelSpec,
    method: &str,
    grid: &GridSpec,
    ys: Vec<Vec<Complex64>>,
) -> TimeSeries {
    let k = model.dim();
    let times = grid.times();
    let states = times
        .iter()
        .zip(ys.into_iter())
        .map(|(&t, y)| {
            let interaction = ComplexMatrix::from_vec(k, y);
            DensityMatrix::unchecked(back_transform_thermal(model, t, &interaction))
        })
        .collect();
    TimeSeries { model: *model, method: method.into(), times, states }
}

fn sector_series_to_schroedinger(method: &str, series: SectorSeries) -> TimeSeries {
    let model = series.model;
    let states = series
        .times
        .iter()
        .zip(series.states.iter())
        .map(|(&t, s)| {
            let dressed = back_transform_sectors(s, t);
            DensityMatrix::unchecked(assemble_reduced(&dressed))
        })
        .collect();
    TimeSeries { model, method: method.into(), times: series.times, states }
}

/// Second-order Nakajima-Zwanzig solution, returned in the original
/// (Schroedinger) picture.
pub fn nz_solve(
    model: &ModelSpec,
    projector: ProjectorKind,
    rho0: &DensityMatrix,
    grid: &GridSpec,
) -> Result<TimeSeries, MasterEquationError> {
    model.validate()?;
    match projector {
        ProjectorKind::ThermalProduct => {
            let ys = nz_thermal_interaction(model, rho0, grid)?;
            Ok(thermal_series_to_schroedinger(model, "NZ_P1", grid, ys))
        }
        ProjectorKind::Correlated => {
            let initial = initial_sectors(model, rho0);
            let series = nz_solve_sectors(model, &initial, grid)?;
            Ok(sector_series_to_schroedinger("NZ_P2", series))
        }
    }
}

/// Second-order time-convolutionless solution, returned in the original
/// (Schroedinger) picture.
pub fn tcl_solve(
    model: &ModelSpec,
    projector: ProjectorKind,
    rho0: &DensityMatrix,
    grid: &GridSpec,
) -> Result<TimeSeries, MasterEquationError> {
    model.validate()?;
    match projector {
        ProjectorKind::ThermalProduct => {
            let ys = tcl_thermal_interaction(model, rho0, grid)?;
            Ok(thermal_series_to_schroedinger(model, "TCL_P1", grid, ys))
        }
        ProjectorKind::Correlated => {
            let initial = initial_sectors(model, rho0);
            let series = tcl_solve_sectors(model, &initial, grid)?;
            Ok(sector_series_to_schroedinger("TCL_P2", series))
        }
    }
}
