//! Comparison reports: per-method error statistics against a reference
//! trajectory, validity horizons, and power-law fits of horizon scalings.
//!
//! The validity horizon t* is the last grid time before the pointwise
//! error first exceeds the threshold epsilon; a trajectory that never
//! exceeds it has t* = t_end. Horizons are measured on populations
//! (diagonal elements) shared by both methods, falling back to all shared
//! elements when the intersection holds no diagonal.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::CliError;
use crate::methods::MethodOutput;

/// Error statistics for one tracked element.
#[derive(Clone, Debug, Serialize)]
pub struct ObservableStats {
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
}

/// One method's comparison against the reference.
#[derive(Clone, Debug, Serialize)]
pub struct MethodReport {
    pub method: String,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
    /// Validity horizon on populations at the report's epsilon.
    pub horizon: f64,
    /// Stats per shared element, keyed "r_c" (sorted).
    pub per_observable: BTreeMap<String, ObservableStats>,
}

/// Full comparison of several methods against one reference.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub reference: String,
    pub epsilon: f64,
    pub t_start: f64,
    pub t_end: f64,
    /// Keyed by method name (sorted, deterministic).
    pub methods: BTreeMap<String, MethodReport>,
}

/// Result of fitting t* = c * x^p to horizon-vs-parameter data.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PowerLawFit {
    pub exponent: f64,
    pub ln_prefactor: f64,
}

/// Compare one method against the reference on the same grid.
pub fn compare_pair(
    reference: &MethodOutput,
    other: &MethodOutput,
    epsilon: f64,
) -> Result<MethodReport, CliError> {
    if !same_grid(&reference.times, &other.times) {
        return Err(CliError::Numerical(format!(
            "mismatched grids: {} and {} sample different times",
            reference.method, other.method
        )));
    }
    // Shared elements, in the other method's order.
    let shared: Vec<(usize, usize)> = other
        .elements
        .iter()
        .copied()
        .filter(|&e| reference.column_of(e).is_some())
        .collect();
    if shared.is_empty() {
        return Err(CliError::Config(format!(
            "{} and {} model no common element",
            reference.method, other.method
        )));
    }

    let mut per_observable = BTreeMap::new();
    let mut overall_max = 0.0f64;
    let mut overall_sum = 0.0f64;
    for &element in &shared {
        let rc = reference.column_of(element).expect("shared element");
        let oc = other.column_of(element).expect("shared element");
        let mut max = 0.0f64;
        let mut sum = 0.0f64;
        for i in 0..reference.times.len() {
            let err = (reference.values[i][rc] - other.values[i][oc]).norm();
            max = max.max(err);
            sum += err;
        }
        overall_max = overall_max.max(max);
        overall_sum += sum;
        per_observable.insert(
            format!("{}_{}", element.0, element.1),
            ObservableStats {
                max_abs_error: max,
                mean_abs_error: sum / reference.times.len() as f64,
            },
        );
    }

    // Horizon on populations: diagonal shared elements, else all shared.
    let diag: Vec<(usize, usize)> = shared.iter().copied().filter(|&(r, c)| r == c).collect();
    let horizon_elements = if diag.is_empty() { shared.clone() } else { diag };
    let mut horizon = *reference.times.last().expect("nonempty grid");
    'scan: for i in 0..reference.times.len() {
        for &element in &horizon_elements {
            let rc = reference.column_of(element).expect("shared element");
            let oc = other.column_of(element).expect("shared element");
            let err = (reference.values[i][rc] - other.values[i][oc]).norm();
            if err > epsilon {
                horizon = if i == 0 {
                    reference.times[0]
                } else {
                    reference.times[i - 1]
                };
                break 'scan;
            }
        }
    }

    Ok(MethodReport {
        method: other.method.name().to_string(),
        max_abs_error: overall_max,
        mean_abs_error: overall_sum / (reference.times.len() * shared.len()) as f64,
        horizon,
        per_observable,
    })
}

/// Compare every output against the reference.
pub fn compare_outputs(
    reference: &MethodOutput,
    others: &[MethodOutput],
    epsilon: f64,
) -> Result<ComparisonReport, CliError> {
    let mut methods = BTreeMap::new();
    for other in others {
        let report = compare_pair(reference, other, epsilon)?;
        methods.insert(report.method.clone(), report);
    }
    Ok(ComparisonReport {
        reference: reference.method.name().to_string(),
        epsilon,
        t_start: *reference.times.first().expect("nonempty grid"),
        t_end: *reference.times.last().expect("nonempty grid"),
        methods,
    })
}

/// Per-time maximum absolute error over the elements both methods model.
pub fn error_series(
    reference: &MethodOutput,
    other: &MethodOutput,
) -> Result<Vec<f64>, CliError> {
    if !same_grid(&reference.times, &other.times) {
        return Err(CliError::Numerical(format!(
            "mismatched grids: {} and {} sample different times",
            reference.method, other.method
        )));
    }
    let shared: Vec<(usize, usize)> = other
        .elements
        .iter()
        .copied()
        .filter(|&e| reference.column_of(e).is_some())
        .collect();
    if shared.is_empty() {
        return Err(CliError::Config(format!(
            "{} and {} model no common element",
            reference.method, other.method
        )));
    }
    Ok((0..reference.times.len())
        .map(|i| {
            shared
                .iter()
                .map(|&e| {
                    let rc = reference.column_of(e).expect("shared element");
                    let oc = other.column_of(e).expect("shared element");
                    (reference.values[i][rc] - other.values[i][oc]).norm()
                })
                .fold(0.0f64, f64::max)
        })
        .collect())
}

fn same_grid(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(1.0))
}

/// Least-squares fit of ln y against ln x. Requires at least two distinct
/// positive x values and positive y values.
pub fn fit_power_law(xs: &[f64], ys: &[f64]) -> Result<PowerLawFit, CliError> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(CliError::Config(
            "power-law fit needs at least two (x, y) points".into(),
        ));
    }
    for (&x, &y) in xs.iter().zip(ys) {
        if !(x > 0.0) || !(y > 0.0) {
            return Err(CliError::Numerical(format!(
                "power-law fit needs positive data, got ({x}, {y})"
            )));
        }
    }
    if xs.iter().all(|&x| x == xs[0]) {
        return Err(CliError::Config(
            "power-law fit needs at least two distinct x values".into(),
        ));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    Ok(PowerLawFit { exponent, ln_prefactor: my - exponent * mx })
}
