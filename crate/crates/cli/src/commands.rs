//! Implementations of the CLI subcommands.
//!
//! Every command is deterministic: repeated invocations on the same config
//! produce byte-identical files (fixed column orders, sorted JSON maps,
//! no timestamps).
//!
//! Files written per command (into the output directory):
//!
//! ```text
//! run      <METHOD>.csv            full series, every element the method models
//!          <METHOD>_<r>_<c>.csv    one file per (method, tracked element)
//!          plot.gp                 gnuplot script overlaying the first observable
//!          run_summary.json        model/grid echo plus the file manifest
//! compare  everything `run` writes, plus
//!          compare_errors.csv      per-time max |error| vs the reference
//!          comparison.json         per-method error stats and horizons
//! sweep    sweep_horizons.csv      horizon t* per method per parameter value
//!          sweep_summary.json      horizons plus fitted power laws
//!          plot.gp                 horizon-vs-parameter overlay
//! preset   one subdirectory per variant with that variant's `run` output
//!          and its config.ini; preset.json lists the variants
//! ```
//!
//! `oracle-check` writes nothing; it prints one PASS/FAIL line per method
//! to stdout and fails with a numerical-error exit when any method strays
//! from the small-bath reference by more than the tolerance.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::Scenario;
use crate::csv::{format_value, model_metadata, render_series, write_file};
use crate::error::CliError;
use crate::gnuplot::{render_script, Curve};
use crate::methods::{run_method, Incompatibility, Method, MethodOutput};
use crate::presets::preset;
use crate::report::{compare_pair, error_series, fit_power_law, ComparisonReport, PowerLawFit};

// ---------------------------------------------------------------------------
// Shared plumbing
// ---------------------------------------------------------------------------

fn out_dir(scenario: &Scenario, overridden: Option<&Path>) -> Result<PathBuf, CliError> {
    overridden
        .map(Path::to_path_buf)
        .or_else(|| scenario.output.clone())
        .ok_or_else(|| {
            CliError::Config("no output directory: set 'output' in [run] or pass --out".into())
        })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Numerical(format!("json serialization: {e}")))?;
    text.push('\n');
    write_file(path, &text)
}

/// Run every method the scenario requests (plus `extra`, deduplicated),
/// keyed by method for reuse.
fn run_all(
    scenario: &Scenario,
    extra: Option<Method>,
    oracle_guard: u32,
) -> Result<BTreeMap<Method, MethodOutput>, CliError> {
    let mut outputs = BTreeMap::new();
    let wanted = extra.into_iter().chain(scenario.methods.iter().copied());
    for method in wanted {
        if outputs.contains_key(&method) {
            continue;
        }
        let output = run_method(
            method,
            &scenario.model,
            &scenario.initial,
            &scenario.grid,
            oracle_guard,
        )?;
        outputs.insert(method, output);
    }
    Ok(outputs)
}

/// Write a method's full series plus one file per tracked element it
/// models. Returns the relative file names, full series first.
fn write_method_series(
    dir: &Path,
    output: &MethodOutput,
    scenario: &Scenario,
) -> Result<Vec<String>, CliError> {
    let mut meta = model_metadata(&scenario.model);
    meta.push(("method".into(), output.method.name().into()));
    let mut files = Vec::new();

    let name = format!("{}.csv", output.method.name());
    write_file(&dir.join(&name), &render_series(output, &meta, &output.elements)?)?;
    files.push(name);

    for &obs in &scenario.observables {
        if output.column_of(obs).is_none() {
            // Reduced methods model fewer elements than the central
            // dimension allows; skip the files they cannot fill.
            continue;
        }
        let name = format!("{}_{}_{}.csv", output.method.name(), obs.0, obs.1);
        write_file(&dir.join(&name), &render_series(output, &meta, &[obs])?)?;
        files.push(name);
    }
    Ok(files)
}

/// Overlay of the first tracked observable that at least one method
/// models, pointing at the per-observable files.
fn series_plot(scenario: &Scenario, outputs: &[&MethodOutput]) -> String {
    let plotted = scenario
        .observables
        .iter()
        .copied()
        .find(|&obs| outputs.iter().any(|o| o.column_of(obs).is_some()))
        .or_else(|| outputs.first().and_then(|o| o.elements.first().copied()));
    let Some((r, c)) = plotted else {
        return render_script("t", "value", &[]);
    };
    let curves: Vec<Curve> = outputs
        .iter()
        .filter(|o| o.column_of((r, c)).is_some())
        .map(|o| Curve {
            file: format!("{}_{r}_{c}.csv", o.method.name()),
            column: 2,
            title: o.method.name().to_string(),
        })
        .collect();
    let ylabel = if r == c {
        format!("population rho[{r},{c}]")
    } else {
        format!("re rho[{r},{c}]")
    };
    render_script("t", &ylabel, &curves)
}

#[derive(Serialize)]
struct ModelEcho {
    j1: f64,
    n_bath: u32,
    beta: f64,
    coupling: f64,
    omega0: f64,
}

impl ModelEcho {
    fn of(model: &spinstar::ModelSpec) -> ModelEcho {
        ModelEcho {
            j1: model.j1.value(),
            n_bath: model.n_bath,
            beta: model.beta,
            coupling: model.coupling,
            omega0: model.omega0,
        }
    }
}

#[derive(Serialize)]
struct GridEcho {
    t_start: f64,
    t_end: f64,
    step: f64,
    points: usize,
}

impl GridEcho {
    fn of(grid: &spinstar::GridSpec) -> GridEcho {
        GridEcho {
            t_start: grid.t_start,
            t_end: grid.t_end,
            step: grid.step,
            points: grid.n_steps() + 1,
        }
    }
}

fn observable_labels(observables: &[(usize, usize)]) -> Vec<String> {
    observables.iter().map(|(r, c)| format!("{r}_{c}")).collect()
}

// ---------------------------------------------------------------------------
// run
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct RunSummary {
    command: &'static str,
    model: ModelEcho,
    grid: GridEcho,
    methods: Vec<String>,
    observables: Vec<String>,
    /// Relative file names written per method.
    files: BTreeMap<String, Vec<String>>,
}

/// Execute every requested method and write its series files.
pub fn cmd_run(
    scenario: &Scenario,
    out: Option<&Path>,
    oracle_guard: u32,
) -> Result<(), CliError> {
    let dir = out_dir(scenario, out)?;
    run_into(scenario, &dir, oracle_guard)
}

fn run_into(scenario: &Scenario, dir: &Path, oracle_guard: u32) -> Result<(), CliError> {
    let outputs = run_all(scenario, None, oracle_guard)?;
    let mut files = BTreeMap::new();
    for output in outputs.values() {
        files.insert(
            output.method.name().to_string(),
            write_method_series(dir, output, scenario)?,
        );
    }
    let ordered: Vec<&MethodOutput> = scenario.methods.iter().map(|m| &outputs[m]).collect();
    write_file(&dir.join("plot.gp"), &series_plot(scenario, &ordered))?;
    write_json(
        &dir.join("run_summary.json"),
        &RunSummary {
            command: "run",
            model: ModelEcho::of(&scenario.model),
            grid: GridEcho::of(&scenario.grid),
            methods: scenario.methods.iter().map(|m| m.name().to_string()).collect(),
            observables: observable_labels(&scenario.observables),
            files,
        },
    )
}

// ---------------------------------------------------------------------------
// compare
// ---------------------------------------------------------------------------

/// Run the scenario's methods plus the reference, write all series files,
/// a per-time error table and the comparison report.
pub fn cmd_compare(
    scenario: &Scenario,
    out: Option<&Path>,
    oracle_guard: u32,
) -> Result<(), CliError> {
    let dir = out_dir(scenario, out)?;
    let outputs = run_all(scenario, Some(scenario.reference), oracle_guard)?;
    for output in outputs.values() {
        write_method_series(&dir, output, scenario)?;
    }
    let reference = &outputs[&scenario.reference];

    // Per-method reports, in a name-sorted map for stable JSON.
    let mut methods = BTreeMap::new();
    for &m in &scenario.methods {
        let report = compare_pair(reference, &outputs[&m], scenario.epsilon)?;
        methods.insert(report.method.clone(), report);
    }
    let report = ComparisonReport {
        reference: scenario.reference.name().to_string(),
        epsilon: scenario.epsilon,
        t_start: scenario.grid.t_start,
        t_end: scenario.grid.t_end,
        methods,
    };

    // compare_errors.csv: t plus one max-|error| column per method, in the
    // scenario's method order.
    let mut meta = model_metadata(&scenario.model);
    meta.push(("reference".into(), scenario.reference.name().into()));
    meta.push(("epsilon".into(), format_value(scenario.epsilon)));
    let mut text = String::new();
    for (k, v) in &meta {
        text.push_str(&format!("# {k}={v}\n"));
    }
    text.push('t');
    for m in &scenario.methods {
        text.push(',');
        text.push_str(m.name());
    }
    text.push('\n');
    let columns: Vec<Vec<f64>> = scenario
        .methods
        .iter()
        .map(|m| error_series(reference, &outputs[m]))
        .collect::<Result<_, _>>()?;
    for (i, &t) in reference.times.iter().enumerate() {
        text.push_str(&format_value(t));
        for col in &columns {
            text.push(',');
            text.push_str(&format_value(col[i]));
        }
        text.push('\n');
    }
    write_file(&dir.join("compare_errors.csv"), &text)?;

    let ordered: Vec<&MethodOutput> = outputs.values().collect();
    write_file(&dir.join("plot.gp"), &series_plot(scenario, &ordered))?;
    write_json(&dir.join("comparison.json"), &report)
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct SweepMethodSummary {
    horizons: Vec<f64>,
    /// Present when every horizon is positive and the fit is well posed.
    fit: Option<PowerLawFit>,
}

#[derive(Serialize)]
struct SweepSummary {
    command: &'static str,
    param: String,
    values: Vec<f64>,
    reference: String,
    epsilon: f64,
    methods: BTreeMap<String, SweepMethodSummary>,
}

/// Re-run the comparison at each sweep value and report how the validity
/// horizon moves, with a power-law fit per method.
pub fn cmd_sweep(
    scenario: &Scenario,
    out: Option<&Path>,
    oracle_guard: u32,
) -> Result<(), CliError> {
    let sweep = scenario
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("sweep needs a [sweep] section in the config".into()))?;
    let dir = out_dir(scenario, out)?;

    let mut horizons: BTreeMap<Method, Vec<f64>> = BTreeMap::new();
    for &value in &sweep.values {
        let model = scenario.model_with(sweep.param, value)?;
        let varied = Scenario { model, ..scenario.clone() };
        for &m in varied.methods.iter().chain(std::iter::once(&varied.reference)) {
            m.check_compatible(&varied, oracle_guard).map_err(|e| match e {
                Incompatibility::Config(msg) => {
                    CliError::Config(format!("sweep {} = {value}: {msg}", sweep.param.name()))
                }
                Incompatibility::Guard(msg) => {
                    CliError::Guard(format!("sweep {} = {value}: {msg}", sweep.param.name()))
                }
            })?;
        }
        let outputs = run_all(&varied, Some(varied.reference), oracle_guard)?;
        let reference = &outputs[&varied.reference];
        for &m in &scenario.methods {
            let report = compare_pair(reference, &outputs[&m], scenario.epsilon)?;
            horizons.entry(m).or_default().push(report.horizon);
        }
    }

    // sweep_horizons.csv: value plus one horizon column per method.
    let mut text = String::new();
    text.push_str(&format!("# param={}\n", sweep.param.name()));
    text.push_str(&format!("# reference={}\n", scenario.reference.name()));
    text.push_str(&format!("# epsilon={}\n", format_value(scenario.epsilon)));
    text.push_str(sweep.param.name());
    for m in &scenario.methods {
        text.push(',');
        text.push_str(m.name());
    }
    text.push('\n');
    for (i, &value) in sweep.values.iter().enumerate() {
        text.push_str(&format_value(value));
        for m in &scenario.methods {
            text.push(',');
            text.push_str(&format_value(horizons[m][i]));
        }
        text.push('\n');
    }
    write_file(&dir.join("sweep_horizons.csv"), &text)?;

    let methods: BTreeMap<String, SweepMethodSummary> = scenario
        .methods
        .iter()
        .map(|m| {
            let hs = horizons[m].clone();
            let fit = fit_power_law(&sweep.values, &hs).ok();
            (m.name().to_string(), SweepMethodSummary { horizons: hs, fit })
        })
        .collect();
    let curves: Vec<Curve> = scenario
        .methods
        .iter()
        .enumerate()
        .map(|(k, m)| Curve {
            file: "sweep_horizons.csv".into(),
            column: k + 2,
            title: m.name().to_string(),
        })
        .collect();
    write_file(
        &dir.join("plot.gp"),
        &render_script(sweep.param.name(), "validity horizon t*", &curves),
    )?;
    write_json(
        &dir.join("sweep_summary.json"),
        &SweepSummary {
            command: "sweep",
            param: sweep.param.name().to_string(),
            values: sweep.values.clone(),
            reference: scenario.reference.name().to_string(),
            epsilon: scenario.epsilon,
            methods,
        },
    )
}

// ---------------------------------------------------------------------------
// preset
// ---------------------------------------------------------------------------

#[derive(Serialize)]
struct PresetSummary {
    name: String,
    summary: String,
    variants: Vec<String>,
}

/// Materialize a named preset: one subdirectory per variant holding its
/// config and the `run` outputs.
pub fn cmd_preset(name: &str, out: &Path, oracle_guard: u32) -> Result<(), CliError> {
    let preset = preset(name)?;
    let mut variants = Vec::new();
    for variant in &preset.variants {
        let scenario = Scenario::from_text(&variant.config, oracle_guard)?;
        let dir = out.join(&variant.label);
        write_file(&dir.join("config.ini"), &variant.config)?;
        run_into(&scenario, &dir, oracle_guard)?;
        variants.push(variant.label.clone());
    }
    write_json(
        &out.join("preset.json"),
        &PresetSummary {
            name: preset.name.to_string(),
            summary: preset.summary.to_string(),
            variants,
        },
    )
}

// ---------------------------------------------------------------------------
// oracle-check
// ---------------------------------------------------------------------------

/// Compare every requested method against the brute-force reference and
/// print one PASS/FAIL line each; any FAIL is a numerical-failure exit.
pub fn cmd_oracle_check(scenario: &Scenario, oracle_guard: u32) -> Result<(), CliError> {
    let reference = run_method(
        Method::Oracle,
        &scenario.model,
        &scenario.initial,
        &scenario.grid,
        oracle_guard,
    )?;
    let mut failures: Vec<&str> = Vec::new();
    for &m in &scenario.methods {
        if m == Method::Oracle {
            continue;
        }
        let output = run_method(m, &scenario.model, &scenario.initial, &scenario.grid, oracle_guard)?;
        let report = compare_pair(&reference, &output, scenario.epsilon)?;
        let ok = report.max_abs_error <= scenario.tolerance;
        println!(
            "oracle-check {}: max |error| = {:.3e} (tolerance {:.3e}) {}",
            m.name(),
            report.max_abs_error,
            scenario.tolerance,
            if ok { "PASS" } else { "FAIL" },
        );
        if !ok {
            failures.push(m.name());
        }
    }
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "oracle check failed for: {}",
            failures.join(", ")
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::methods::DEFAULT_ORACLE_GUARD;
    use std::fs;

    /// Small, fast scenario: every file-writing command finishes in well
    /// under a second at these sizes.
    const SMALL: &str = "\
[model]
j1 = 1/2
n_bath = 3
beta = 0.25
coupling = 1

[initial]
state = basis
m = 1/2

[grid]
t_start = 0
t_end = 0.5
step = 0.05

[run]
methods = EXACT, TCL_P1
observables = 0, 0
";

    fn scenario(text: &str) -> Scenario {
        Scenario::from_text(text, DEFAULT_ORACLE_GUARD).unwrap()
    }

    fn temp_dir(tag: &str) -> PathBuf {
        let dir = std::env::temp_dir().join(format!("spinstar-cmd-{tag}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&dir);
        dir
    }

    #[test]
    fn run_writes_the_declared_files_deterministically() {
        let s = scenario(SMALL);
        let dir = temp_dir("run");
        cmd_run(&s, Some(&dir), DEFAULT_ORACLE_GUARD).unwrap();
        for name in ["EXACT.csv", "EXACT_0_0.csv", "TCL_P1.csv", "TCL_P1_0_0.csv", "plot.gp", "run_summary.json"] {
            assert!(dir.join(name).is_file(), "cmd_run writes {name}");
        }
        let summary = fs::read_to_string(dir.join("run_summary.json")).unwrap();
        assert!(summary.contains("\"n_bath\": 3"));
        assert!(summary.ends_with('\n'));

        // Byte-identical rerun.
        let before = fs::read(dir.join("EXACT.csv")).unwrap();
        let json_before = fs::read(dir.join("run_summary.json")).unwrap();
        cmd_run(&s, Some(&dir), DEFAULT_ORACLE_GUARD).unwrap();
        assert_eq!(before, fs::read(dir.join("EXACT.csv")).unwrap(), "rerun is byte-identical");
        assert_eq!(json_before, fs::read(dir.join("run_summary.json")).unwrap());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn compare_reports_self_agreement_and_solver_error() {
        let s = scenario(SMALL);
        let dir = temp_dir("compare");
        cmd_compare(&s, Some(&dir), DEFAULT_ORACLE_GUARD).unwrap();
        let json = fs::read_to_string(dir.join("comparison.json")).unwrap();
        let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
        // EXACT compared against itself: zero error, full horizon.
        let exact = &parsed["methods"]["EXACT"];
        assert_eq!(exact["max_abs_error"], 0.0);
        assert_eq!(exact["horizon"], 0.5);
        // TCL_P1 differs but stays within epsilon on this short window.
        let tcl = &parsed["methods"]["TCL_P1"];
        assert!(tcl["max_abs_error"].as_f64().unwrap() > 0.0);
        assert_eq!(tcl["horizon"], 0.5);

        let errors = fs::read_to_string(dir.join("compare_errors.csv")).unwrap();
        let header = errors.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(header, "t,EXACT,TCL_P1");
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn sweep_fits_a_power_law_across_bath_sizes() {
        let text = format!("{SMALL}\n[sweep]\nparam = n_bath\nvalues = 2, 4, 8\n");
        let s = scenario(&text);
        let dir = temp_dir("sweep");
        cmd_sweep(&s, Some(&dir), DEFAULT_ORACLE_GUARD).unwrap();
        let csv = fs::read_to_string(dir.join("sweep_horizons.csv")).unwrap();
        let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
        assert_eq!(header, "n_bath,EXACT,TCL_P1");
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 4, "3 values + header");

        let json: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.join("sweep_summary.json")).unwrap())
                .unwrap();
        let exact = &json["methods"]["EXACT"]["horizons"];
        assert_eq!(exact.as_array().unwrap().len(), 3);
        // The self-comparison never exceeds epsilon, so no finite-horizon
        // power law exists: horizons sit at t_end for every value and the
        // fitted exponent is 0.
        let fit = &json["methods"]["EXACT"]["fit"];
        assert!(fit["exponent"].as_f64().unwrap().abs() < 1e-12);
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn sweep_requires_a_sweep_section() {
        let s = scenario(SMALL);
        let err = cmd_sweep(&s, Some(Path::new("/tmp/unused")), DEFAULT_ORACLE_GUARD).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn oracle_check_passes_the_solver_it_certifies_and_fails_others() {
        // EXACT agrees with the brute-force reference to near machine
        // precision; TCL_P1 does not survive a 1e-8 tolerance.
        let mut s = scenario(SMALL);
        s.methods = vec![Method::Exact];
        cmd_oracle_check(&s, DEFAULT_ORACLE_GUARD).unwrap();

        s.methods = vec![Method::Exact, Method::TclP1];
        let err = cmd_oracle_check(&s, DEFAULT_ORACLE_GUARD).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("TCL_P1"));
    }

    #[test]
    fn preset_materializes_every_variant() {
        // fig2 is the cheapest multi-variant preset: three exact-only runs.
        let dir = temp_dir("preset");
        cmd_preset("fig2", &dir, DEFAULT_ORACLE_GUARD).unwrap();
        for variant in ["fig2_beta0", "fig2_beta0.25", "fig2_beta0.5"] {
            let sub = dir.join(variant);
            for name in ["config.ini", "EXACT.csv", "EXACT_1_1.csv", "plot.gp", "run_summary.json"] {
                assert!(sub.join(name).is_file(), "preset writes {variant}/{name}");
            }
        }
        let listing = fs::read_to_string(dir.join("preset.json")).unwrap();
        assert!(listing.contains("fig2_beta0.5"));
        assert!(cmd_preset("fig99", &dir, DEFAULT_ORACLE_GUARD).is_err());
        fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn missing_output_directory_is_a_config_error() {
        let s = scenario(SMALL);
        let err = cmd_run(&s, None, DEFAULT_ORACLE_GUARD).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("--out"));
    }
}
