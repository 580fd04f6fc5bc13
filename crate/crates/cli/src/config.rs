//! Scenario config parsing: a small INI-style reader (grammar documented at
//! the crate root) and the validated [`Scenario`] it produces.
//!
//! Parsing happens in two stages so every error can cite a config line:
//! [`Ini::parse`] keeps the raw sections/keys with their 1-based line
//! numbers, and [`Scenario::from_ini`] interprets them, rejecting unknown
//! sections, unknown keys, duplicates and inconsistent values.

use std::collections::BTreeSet;
use std::path::PathBuf;

use spinstar::exact_dynamics::DensityMatrix;
use spinstar::{Complex64, ComplexMatrix, GridSpec, HalfInt, ModelSpec};

use crate::error::CliError;
use crate::methods::Method;

/// Default validity-horizon threshold on populations.
pub const DEFAULT_EPSILON: f64 = 0.05;
/// Default oracle-check acceptance tolerance.
pub const DEFAULT_ORACLE_TOLERANCE: f64 = 1e-8;
/// Largest accepted bath (the shared factorial tables comfortably cover
/// this; every study in the tool stays far below it).
pub const MAX_BATH_SPINS: u32 = 1000;

// ---------------------------------------------------------------------------
// Raw INI layer
// ---------------------------------------------------------------------------

/// One `key = value` assignment with its 1-based config line.
#[derive(Clone, Debug)]
pub struct IniEntry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

/// One `[name]` section in declaration order.
#[derive(Clone, Debug)]
pub struct IniSection {
    pub name: String,
    pub line: usize,
    pub entries: Vec<IniEntry>,
}

/// A parsed config file: sections in declaration order.
#[derive(Clone, Debug, Default)]
pub struct Ini {
    pub sections: Vec<IniSection>,
}

impl Ini {
    /// Parse config text; every reported error cites its 1-based line.
    pub fn parse(text: &str) -> Result<Ini, CliError> {
        let mut ini = Ini::default();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest.strip_suffix(']').ok_or_else(|| {
                    CliError::config_at(line_no, "section header must end with ']'")
                })?;
                let name = name.trim();
                if name.is_empty() {
                    return Err(CliError::config_at(line_no, "empty section name"));
                }
                if ini.sections.iter().any(|s| s.name == name) {
                    return Err(CliError::config_at(
                        line_no,
                        format!("duplicate section [{name}]"),
                    ));
                }
                ini.sections.push(IniSection {
                    name: name.to_string(),
                    line: line_no,
                    entries: Vec::new(),
                });
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::config_at(line_no, format!("expected 'key = value', got '{line}'"))
            })?;
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(CliError::config_at(
                    line_no,
                    format!("invalid key '{key}' (letters, digits and '_' only)"),
                ));
            }
            let section = ini.sections.last_mut().ok_or_else(|| {
                CliError::config_at(line_no, "assignment before any [section] header")
            })?;
            if section.entries.iter().any(|e| e.key == key) {
                return Err(CliError::config_at(
                    line_no,
                    format!("duplicate key '{key}' in [{}]", section.name),
                ));
            }
            section.entries.push(IniEntry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line: line_no,
            });
        }
        Ok(ini)
    }

    fn section(&self, name: &str) -> Option<&IniSection> {
        self.sections.iter().find(|s| s.name == name)
    }
}

/// Typed accessors over one section; every failure carries the line number.
struct SectionReader<'a> {
    section: &'a IniSection,
}

impl<'a> SectionReader<'a> {
    fn get(&self, key: &str) -> Option<&'a IniEntry> {
        self.section.entries.iter().find(|e| e.key == key)
    }

    fn require(&self, key: &str) -> Result<&'a IniEntry, CliError> {
        self.get(key).ok_or_else(|| {
            CliError::config_at(
                self.section.line,
                format!("[{}] is missing the '{key}' key", self.section.name),
            )
        })
    }

    fn f64(&self, key: &str) -> Result<f64, CliError> {
        let entry = self.require(key)?;
        parse_f64(entry)
    }

    fn f64_or(&self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.get(key) {
            Some(entry) => parse_f64(entry),
            None => Ok(default),
        }
    }

    fn u32(&self, key: &str) -> Result<u32, CliError> {
        let entry = self.require(key)?;
        entry.value.parse::<u32>().map_err(|_| {
            CliError::config_at(
                entry.line,
                format!("'{}' is not a nonnegative integer for '{key}'", entry.value),
            )
        })
    }

    /// Reject keys outside the allowed set, naming the first offender.
    fn check_keys(&self, allowed: &[&str]) -> Result<(), CliError> {
        for entry in &self.section.entries {
            if !allowed.contains(&entry.key.as_str()) {
                return Err(CliError::config_at(
                    entry.line,
                    format!(
                        "unknown key '{}' in [{}] (allowed: {})",
                        entry.key,
                        self.section.name,
                        allowed.join(", ")
                    ),
                ));
            }
        }
        Ok(())
    }
}

fn parse_f64(entry: &IniEntry) -> Result<f64, CliError> {
    let v: f64 = entry.value.parse().map_err(|_| {
        CliError::config_at(
            entry.line,
            format!("'{}' is not a number for '{}'", entry.value, entry.key),
        )
    })?;
    if !v.is_finite() {
        return Err(CliError::config_at(
            entry.line,
            format!("'{}' must be finite", entry.key),
        ));
    }
    Ok(v)
}

/// Parse a spin value: `1`, `1/2`, `3/2` or a decimal like `0.5`, as long as
/// twice the value is an integer.
fn parse_half_int(entry: &IniEntry) -> Result<HalfInt, CliError> {
    let bad = || {
        CliError::config_at(
            entry.line,
            format!(
                "'{}' is not a half-integer for '{}' (use 1, 1/2, 3/2, 0.5, ...)",
                entry.value, entry.key
            ),
        )
    };
    if let Some((num, den)) = entry.value.split_once('/') {
        if den.trim() != "2" {
            return Err(bad());
        }
        let twice: i32 = num.trim().parse().map_err(|_| bad())?;
        return Ok(HalfInt::from_twice(twice));
    }
    let v: f64 = entry.value.parse().map_err(|_| bad())?;
    let twice = 2.0 * v;
    if !twice.is_finite() || twice.fract() != 0.0 || twice.abs() > i32::MAX as f64 {
        return Err(bad());
    }
    Ok(HalfInt::from_twice(twice as i32))
}

// ---------------------------------------------------------------------------
// Scenario
// ---------------------------------------------------------------------------

/// Which model parameter a sweep varies.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepParam {
    BathSize,
    InverseTemperature,
    Coupling,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::BathSize => "n_bath",
            SweepParam::InverseTemperature => "beta",
            SweepParam::Coupling => "coupling",
        }
    }
}

/// A parameter sweep: the varied parameter and its values.
#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// A validated scenario: model, initial state, solvers to run, time grid,
/// tracked elements and reporting options.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub model: ModelSpec,
    pub initial: DensityMatrix,
    pub methods: Vec<Method>,
    pub grid: GridSpec,
    /// Tracked (row, col) elements, row-major order.
    pub observables: Vec<(usize, usize)>,
    /// Whether `observables` was given explicitly (controls per-observable
    /// file emission; the default tracks every element).
    pub observables_explicit: bool,
    /// Output directory for commands that write files.
    pub output: Option<PathBuf>,
    /// Horizon threshold on populations.
    pub epsilon: f64,
    /// Reference method for compare/sweep.
    pub reference: Method,
    /// Oracle-check acceptance tolerance.
    pub tolerance: f64,
    pub sweep: Option<SweepSpec>,
}

impl Scenario {
    /// Parse and validate a config file's text. `oracle_guard` is the
    /// current bath-size limit for the brute-force oracle (compatibility
    /// of the ORACLE method is checked against it).
    pub fn from_text(text: &str, oracle_guard: u32) -> Result<Scenario, CliError> {
        Scenario::from_ini(&Ini::parse(text)?, oracle_guard)
    }

    /// Interpret a parsed config.
    pub fn from_ini(ini: &Ini, oracle_guard: u32) -> Result<Scenario, CliError> {
        for section in &ini.sections {
            if !["model", "initial", "grid", "run", "sweep"].contains(&section.name.as_str()) {
                return Err(CliError::config_at(
                    section.line,
                    format!("unknown section [{}]", section.name),
                ));
            }
        }

        let model = read_model(ini)?;
        let initial = read_initial(ini, &model)?;
        let grid = read_grid(ini)?;
        let run = reader(ini, "run")?;
        run.check_keys(&[
            "methods",
            "observables",
            "output",
            "epsilon",
            "reference",
            "tolerance",
        ])?;

        let methods_entry = run.require("methods")?;
        let methods = parse_methods(methods_entry)?;

        let (observables, observables_explicit) = match run.get("observables") {
            Some(entry) => (parse_observables(entry, model.dim())?, true),
            None => (all_elements(model.dim()), false),
        };

        let output = run.get("output").map(|e| PathBuf::from(&e.value));

        let epsilon = run.f64_or("epsilon", DEFAULT_EPSILON)?;
        if !(epsilon > 0.0) {
            let line = run.get("epsilon").map_or(run.section.line, |e| e.line);
            return Err(CliError::config_at(line, "epsilon must be positive"));
        }

        let reference = match run.get("reference") {
            Some(entry) => Method::parse(&entry.value).ok_or_else(|| {
                CliError::config_at(
                    entry.line,
                    format!("unknown method '{}' for 'reference'", entry.value),
                )
            })?,
            None => Method::Exact,
        };

        let tolerance = run.f64_or("tolerance", DEFAULT_ORACLE_TOLERANCE)?;
        if !(tolerance > 0.0) {
            let line = run.get("tolerance").map_or(run.section.line, |e| e.line);
            return Err(CliError::config_at(line, "tolerance must be positive"));
        }

        let sweep = read_sweep(ini)?;

        let scenario = Scenario {
            model,
            initial,
            methods,
            grid,
            observables,
            observables_explicit,
            output,
            epsilon,
            reference,
            tolerance,
            sweep,
        };

        // Method/model compatibility, reported per method against the
        // [run] methods line. Oracle-size problems are guard violations
        // (exit 3), everything else is a config error (exit 1).
        let mut problems = Vec::new();
        for &method in &scenario.methods {
            match method.check_compatible(&scenario, oracle_guard) {
                Ok(()) => {}
                Err(crate::methods::Incompatibility::Guard(msg)) => {
                    return Err(CliError::Guard(format!("{}: {msg}", method.name())));
                }
                Err(crate::methods::Incompatibility::Config(msg)) => {
                    problems.push(format!("{}: {msg}", method.name()));
                }
            }
        }
        if !problems.is_empty() {
            return Err(CliError::config_at(
                methods_entry.line,
                format!("incompatible methods — {}", problems.join("; ")),
            ));
        }
        Ok(scenario)
    }

    /// The scenario's model with one parameter replaced by a sweep value.
    pub fn model_with(&self, param: SweepParam, value: f64) -> Result<ModelSpec, CliError> {
        let mut model = self.model;
        match param {
            SweepParam::BathSize => {
                if value <= 0.0 || value.fract() != 0.0 {
                    return Err(CliError::Config(format!(
                        "sweep value {value} is not a positive integer bath size"
                    )));
                }
                model.n_bath = value as u32;
            }
            SweepParam::InverseTemperature => model.beta = value,
            SweepParam::Coupling => model.coupling = value,
        }
        model
            .validate()
            .map_err(|e| CliError::Config(format!("sweep value {value}: {e}")))?;
        Ok(model)
    }
}

fn reader<'a>(ini: &'a Ini, name: &str) -> Result<SectionReader<'a>, CliError> {
    let section = ini
        .section(name)
        .ok_or_else(|| CliError::Config(format!("missing required section [{name}]")))?;
    Ok(SectionReader { section })
}

fn read_model(ini: &Ini) -> Result<ModelSpec, CliError> {
    let r = reader(ini, "model")?;
    r.check_keys(&["j1", "n_bath", "beta", "coupling", "omega0"])?;
    let model = ModelSpec {
        j1: parse_half_int(r.require("j1")?)?,
        n_bath: r.u32("n_bath")?,
        beta: r.f64("beta")?,
        coupling: r.f64("coupling")?,
        omega0: r.f64_or("omega0", 0.0)?,
    };
    if model.n_bath > MAX_BATH_SPINS {
        let entry = r.require("n_bath")?;
        return Err(CliError::config_at(
            entry.line,
            format!("n_bath = {} exceeds the supported maximum {MAX_BATH_SPINS}", model.n_bath),
        ));
    }
    model
        .validate()
        .map_err(|e| CliError::config_at(r.section.line, e))?;
    Ok(model)
}

fn read_initial(ini: &Ini, model: &ModelSpec) -> Result<DensityMatrix, CliError> {
    let r = reader(ini, "initial")?;
    let state = r.require("state")?;
    match state.value.as_str() {
        "basis" => {
            r.check_keys(&["state", "m"])?;
            let m = parse_half_int(r.require("m")?)?;
            DensityMatrix::basis_projector(model.j1, m)
                .map_err(|e| CliError::config_at(r.section.line, e))
        }
        "plus" => {
            r.check_keys(&["state"])?;
            if model.dim() != 2 {
                return Err(CliError::config_at(
                    state.line,
                    "state = plus requires a spin-1/2 central spin",
                ));
            }
            let mut mat = ComplexMatrix::zeros(2);
            for r_ in 0..2 {
                for c in 0..2 {
                    mat[(r_, c)] = Complex64::new(0.5, 0.0);
                }
            }
            DensityMatrix::checked(mat).map_err(|e| CliError::config_at(state.line, e))
        }
        "explicit" => read_explicit_state(&r, model),
        other => Err(CliError::config_at(
            state.line,
            format!("unknown initial state '{other}' (use basis, plus or explicit)"),
        )),
    }
}

/// Explicit matrix entries: keys `rho_<row>_<col> = re [im]`; the diagonal
/// and one triangle suffice, conjugate entries are derived, and entries
/// given on both sides must agree.
fn read_explicit_state(r: &SectionReader, model: &ModelSpec) -> Result<DensityMatrix, CliError> {
    let dim = model.dim();
    let mut mat = ComplexMatrix::zeros(dim);
    let mut given: BTreeSet<(usize, usize)> = BTreeSet::new();
    for entry in &r.section.entries {
        if entry.key == "state" {
            continue;
        }
        let coords: Option<(usize, usize)> = entry
            .key
            .strip_prefix("rho_")
            .and_then(|rest| rest.split_once('_'))
            .and_then(|(a, b)| Some((a.parse().ok()?, b.parse().ok()?)));
        let (row, col) = coords.ok_or_else(|| {
            CliError::config_at(
                entry.line,
                format!("unknown key '{}' (expected rho_<row>_<col>)", entry.key),
            )
        })?;
        if row >= dim || col >= dim {
            return Err(CliError::config_at(
                entry.line,
                format!("rho_{row}_{col} is outside the {dim}x{dim} matrix"),
            ));
        }
        let mut parts = entry.value.split_whitespace();
        let re: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| CliError::config_at(entry.line, "expected 're' or 're im'"))?;
        let im: f64 = match parts.next() {
            Some(s) => s
                .parse()
                .map_err(|_| CliError::config_at(entry.line, "imaginary part is not a number"))?,
            None => 0.0,
        };
        if parts.next().is_some() {
            return Err(CliError::config_at(
                entry.line,
                "too many fields (expected 're' or 're im')",
            ));
        }
        mat[(row, col)] = Complex64::new(re, im);
        given.insert((row, col));
    }
    if given.is_empty() {
        return Err(CliError::config_at(
            r.section.line,
            "state = explicit requires rho_<row>_<col> entries",
        ));
    }
    // Fill unspecified conjugate partners; verify specified ones agree.
    for &(row, col) in &given {
        if row == col {
            continue;
        }
        let mirror = (col, row);
        if given.contains(&mirror) {
            let diff = (mat[(row, col)] - mat[mirror].conj()).norm();
            if diff > 1e-12 {
                return Err(CliError::config_at(
                    r.section.line,
                    format!("rho_{row}_{col} and rho_{col}_{row} are not conjugates"),
                ));
            }
        } else {
            mat[mirror] = mat[(row, col)].conj();
        }
    }
    DensityMatrix::checked(mat).map_err(|e| CliError::config_at(r.section.line, e))
}

fn read_grid(ini: &Ini) -> Result<GridSpec, CliError> {
    let r = reader(ini, "grid")?;
    r.check_keys(&["t_start", "t_end", "step"])?;
    let grid = GridSpec {
        t_start: r.f64_or("t_start", 0.0)?,
        t_end: r.f64("t_end")?,
        step: r.f64("step")?,
    };
    grid.validate()
        .map_err(|e| CliError::config_at(r.section.line, e))?;
    Ok(grid)
}

fn parse_methods(entry: &IniEntry) -> Result<Vec<Method>, CliError> {
    let mut methods = Vec::new();
    for part in entry.value.split(',') {
        let name = part.trim();
        if name.is_empty() {
            continue;
        }
        let method = Method::parse(name).ok_or_else(|| {
            CliError::config_at(entry.line, format!("unknown method '{name}'"))
        })?;
        if methods.contains(&method) {
            return Err(CliError::config_at(
                entry.line,
                format!("method '{name}' listed twice"),
            ));
        }
        methods.push(method);
    }
    if methods.is_empty() {
        return Err(CliError::config_at(entry.line, "methods list is empty"));
    }
    Ok(methods)
}

fn parse_observables(entry: &IniEntry, dim: usize) -> Result<Vec<(usize, usize)>, CliError> {
    let mut obs = Vec::new();
    for part in entry.value.split(';') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let pair: Option<(usize, usize)> = part
            .split_once(',')
            .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
        let (row, col) = pair.ok_or_else(|| {
            CliError::config_at(
                entry.line,
                format!("bad observable '{part}' (expected 'row,col')"),
            )
        })?;
        if row >= dim || col >= dim {
            return Err(CliError::config_at(
                entry.line,
                format!("observable ({row},{col}) is outside the {dim}x{dim} matrix"),
            ));
        }
        if obs.contains(&(row, col)) {
            return Err(CliError::config_at(
                entry.line,
                format!("observable ({row},{col}) listed twice"),
            ));
        }
        obs.push((row, col));
    }
    if obs.is_empty() {
        return Err(CliError::config_at(entry.line, "observables list is empty"));
    }
    Ok(obs)
}

/// Every element of a `dim` x `dim` matrix in row-major order.
pub fn all_elements(dim: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::with_capacity(dim * dim);
    for row in 0..dim {
        for col in 0..dim {
            v.push((row, col));
        }
    }
    v
}

fn read_sweep(ini: &Ini) -> Result<Option<SweepSpec>, CliError> {
    let section = match ini.section("sweep") {
        Some(s) => s,
        None => return Ok(None),
    };
    let r = SectionReader { section };
    r.check_keys(&["param", "values"])?;
    let param_entry = r.require("param")?;
    let param = match param_entry.value.as_str() {
        "n_bath" => SweepParam::BathSize,
        "beta" => SweepParam::InverseTemperature,
        "coupling" => SweepParam::Coupling,
        other => {
            return Err(CliError::config_at(
                param_entry.line,
                format!("unknown sweep parameter '{other}' (use n_bath, beta or coupling)"),
            ))
        }
    };
    let values_entry = r.require("values")?;
    let mut values = Vec::new();
    for part in values_entry.value.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let v: f64 = part.parse().map_err(|_| {
            CliError::config_at(values_entry.line, format!("'{part}' is not a number"))
        })?;
        if values.contains(&v) {
            return Err(CliError::config_at(
                values_entry.line,
                format!("sweep value {part} listed twice"),
            ));
        }
        values.push(v);
    }
    if values.len() < 2 {
        return Err(CliError::config_at(
            values_entry.line,
            "a sweep needs at least two distinct values",
        ));
    }
    Ok(Some(SweepSpec { param, values }))
}
