//! Built-in figure presets.
//!
//! Each preset is a named bundle of one or more scenario variants,
//! expressed in the same INI config language the `run` command accepts,
//! so everything a preset does can also be reproduced from a hand-written
//! config file. Multi-variant presets (parameter families) get one
//! variant per parameter value, labelled like `fig1_N50`.
//!
//! The catalog:
//!
//! ```text
//! fig1   exact population of the m = 1 level, j1 = 3, bath sizes 50/100/200
//! fig2   exact population of the m = 1 level, j1 = 2, N = 101, beta 0/0.25/0.5
//! fig3   exact population of the m = 1 level, j1 = 1/2/3, N = 100
//! fig4   exact vs TCL_P1 vs NZ_P1 top-level population, j1 = 1, N = 101, beta = 0.25
//! fig5   as fig4 at beta = 0.5
//! fig6   as fig4 at N = 51
//! fig7   exact vs closed-form approximants, j1 = 1, N = 101, beta = 0.25
//! fig8   as fig7 at N = 51
//! fig9   long-time window [0, 30]: exact vs all j1 = 1 approximants, N = 101
//! fig10  resonant two-level populations: appendix methods, N = 101, omega0 = 51
//! fig11  resonant two-level coherence: appendix methods, plus-state start
//! ```

use crate::error::CliError;

/// One runnable scenario belonging to a preset.
#[derive(Clone, Debug)]
pub struct PresetVariant {
    /// Directory-safe label, e.g. `fig1_N50`.
    pub label: String,
    /// Full INI config text for this variant.
    pub config: String,
}

/// A named preset with its variants.
#[derive(Clone, Debug)]
pub struct Preset {
    pub name: &'static str,
    /// One-line description of what the preset plots.
    pub summary: &'static str,
    pub variants: Vec<PresetVariant>,
}

/// Names of all built-in presets, in catalog order.
pub const PRESET_NAMES: [&str; 11] = [
    "fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "fig11",
];

/// Look up a preset by name.
pub fn preset(name: &str) -> Result<Preset, CliError> {
    match name {
        "fig1" => Ok(Preset {
            name: "fig1",
            summary: "exact m = 1 population for j1 = 3 at three bath sizes",
            variants: [50u32, 100, 200]
                .iter()
                .map(|&n| PresetVariant {
                    label: format!("fig1_N{n}"),
                    config: exact_config(3.0, n, 0.25, 1, "2, 2"),
                })
                .collect(),
        }),
        "fig2" => Ok(Preset {
            name: "fig2",
            summary: "exact m = 1 population for j1 = 2 at three temperatures",
            variants: [0.0f64, 0.25, 0.5]
                .iter()
                .map(|&beta| PresetVariant {
                    label: format!("fig2_beta{beta}"),
                    config: exact_config(2.0, 101, beta, 1, "1, 1"),
                })
                .collect(),
        }),
        "fig3" => Ok(Preset {
            name: "fig3",
            summary: "exact m = 1 population for three central spins",
            variants: [1u32, 2, 3]
                .iter()
                .map(|&j| {
                    let row = j - 1;
                    PresetVariant {
                        label: format!("fig3_j{j}"),
                        config: exact_config(j as f64, 100, 0.25, 1, &format!("{row}, {row}")),
                    }
                })
                .collect(),
        }),
        "fig4" => Ok(single(
            "fig4",
            "top-level population: exact vs second-order solvers, N = 101",
            me_config(101, 0.25, "EXACT, TCL_P1, NZ_P1", 10.0),
        )),
        "fig5" => Ok(single(
            "fig5",
            "top-level population: exact vs second-order solvers, beta = 0.5",
            me_config(101, 0.5, "EXACT, TCL_P1, NZ_P1", 10.0),
        )),
        "fig6" => Ok(single(
            "fig6",
            "top-level population: exact vs second-order solvers, N = 51",
            me_config(51, 0.25, "EXACT, TCL_P1, NZ_P1", 10.0),
        )),
        "fig7" => Ok(single(
            "fig7",
            "top-level population: exact vs closed-form approximants, N = 101",
            me_config(101, 0.25, "EXACT, CLOSED_TCL_LARGEM, CLOSED_NZ2", 10.0),
        )),
        "fig8" => Ok(single(
            "fig8",
            "top-level population: exact vs closed-form approximants, N = 51",
            me_config(51, 0.25, "EXACT, CLOSED_TCL_LARGEM, CLOSED_NZ2", 10.0),
        )),
        "fig9" => Ok(single(
            "fig9",
            "long-time top-level population: exact vs all j1 = 1 approximants",
            me_config(
                101,
                0.25,
                "EXACT, NZ_P1, CLOSED_NZ2, CLOSED_TCL_LARGEM, TCL_P1",
                30.0,
            ),
        )),
        "fig10" => Ok(single(
            "fig10",
            "resonant two-level population: detuned closed forms, omega0 = 51",
            appendix_config("basis", "m = 1/2", "0, 0"),
        )),
        "fig11" => Ok(single(
            "fig11",
            "resonant two-level coherence: detuned closed forms, plus-state start",
            appendix_config("plus", "", "0, 1"),
        )),
        other => Err(CliError::Config(format!(
            "unknown preset '{other}'; available: {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}

fn single(name: &'static str, summary: &'static str, config: String) -> Preset {
    Preset {
        name,
        summary,
        variants: vec![PresetVariant { label: name.to_string(), config }],
    }
}

/// Exact-evolution family (fig1-fig3): one period-scale window, basis start
/// at m = 1.
fn exact_config(j1: f64, n_bath: u32, beta: f64, m: i32, observable: &str) -> String {
    format!(
        "[model]\n\
         j1 = {j1}\n\
         n_bath = {n_bath}\n\
         beta = {beta}\n\
         coupling = 1\n\
         \n\
         [initial]\n\
         state = basis\n\
         m = {m}\n\
         \n\
         [grid]\n\
         t_start = 0\n\
         t_end = 15\n\
         step = 0.01\n\
         \n\
         [run]\n\
         methods = EXACT\n\
         observables = {observable}\n"
    )
}

/// Approximation-comparison family (fig4-fig9): j1 = 1, top-level start,
/// top-level population observable.
fn me_config(n_bath: u32, beta: f64, methods: &str, t_end: f64) -> String {
    format!(
        "[model]\n\
         j1 = 1\n\
         n_bath = {n_bath}\n\
         beta = {beta}\n\
         coupling = 1\n\
         \n\
         [initial]\n\
         state = basis\n\
         m = 1\n\
         \n\
         [grid]\n\
         t_start = 0\n\
         t_end = {t_end}\n\
         step = 0.005\n\
         \n\
         [run]\n\
         methods = {methods}\n\
         observables = 0, 0\n"
    )
}

/// Detuned two-level family (fig10-fig11): j1 = 1/2, beta = 0, strong
/// level splitting.
fn appendix_config(state: &str, extra_initial: &str, observable: &str) -> String {
    let initial = if extra_initial.is_empty() {
        format!("state = {state}\n")
    } else {
        format!("state = {state}\n{extra_initial}\n")
    };
    format!(
        "[model]\n\
         j1 = 1/2\n\
         n_bath = 101\n\
         beta = 0\n\
         coupling = 1\n\
         omega0 = 51\n\
         \n\
         [initial]\n\
         {initial}\
         \n\
         [grid]\n\
         t_start = 0\n\
         t_end = 10\n\
         step = 0.005\n\
         \n\
         [run]\n\
         methods = APPENDIX_EXACT, APPENDIX_TCL_P1, APPENDIX_TCL_P2\n\
         observables = {observable}\n"
    )
}
