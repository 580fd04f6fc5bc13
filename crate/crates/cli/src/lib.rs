//! Scenario runner for spin-star central-spin dynamics.
//!
//! The library behind the `spinstar` binary: it parses scenario config
//! files, dispatches the solvers from the core crate, and writes CSV data
//! files, gnuplot scripts and JSON summaries. Everything here is
//! deterministic — running the same command twice produces byte-identical
//! outputs.
//!
//! # Config format
//!
//! Scenarios are flat INI-style text files. The grammar, line by line:
//!
//! ```text
//! file       = { line }
//! line       = blank | comment | section | assignment
//! comment    = ( "#" | ";" ) any text          (whole-line only)
//! section    = "[" name "]"
//! assignment = key "=" value                   (key: letters, digits, "_")
//! ```
//!
//! Values are trimmed; inline comments are not supported (a `#` inside a
//! value is part of the value). Keys must be unique within their section.
//! Parse and validation errors cite 1-based line numbers.
//!
//! Recognized sections and keys:
//!
//! ```text
//! [model]
//! j1       = 1          central spin: integer, "1/2"-style fraction, or decimal
//! n_bath   = 101        number of bath spins
//! beta     = 0.25       inverse bath temperature (>= 0)
//! coupling = 1.0        coupling constant A (> 0)
//! omega0   = 0.0        central-spin level splitting (optional, default 0)
//!
//! [initial]
//! state = basis         "basis" (projector |j1,m><j1,m|, needs m = ...),
//!                       "plus" (spin-1/2 |+><+|), or "explicit"
//! m     = 1             basis projector level (state = basis)
//! rho_0_0 = 0.5         explicit entries: "re" or "re im" (state = explicit);
//!                       give the diagonal and one triangle, the conjugate
//!                       triangle is filled in automatically
//!
//! [grid]
//! t_start = 0.0         optional, default 0
//! t_end   = 10.0
//! step    = 0.005
//!
//! [run]
//! methods     = EXACT, TCL_P1, NZ_P1
//! output      = out_dir            where run/compare/sweep write files
//! observables = 0,0; 0,1          optional (row, col) selectors; default all
//! epsilon     = 0.05               optional horizon threshold on populations
//! reference   = EXACT              compare/sweep reference method (default EXACT)
//! tolerance   = 1e-8               oracle-check acceptance tolerance
//!
//! [sweep]                          sweep command only
//! param  = n_bath                  one of n_bath | beta | coupling
//! values = 26, 51, 101, 201        at least two distinct values
//! ```
//!
//! Method names: `EXACT`, `ORACLE`, `NZ_P1`, `TCL_P1`, `NZ_P2`, `TCL_P2`,
//! `CLOSED_NZ2`, `CLOSED_TCL_LARGEM`, `APPENDIX_EXACT`, `APPENDIX_TCL_P1`,
//! `APPENDIX_TCL_P2`. Compatibility rules are listed in [`methods`].
//!
//! # CSV layout
//!
//! Every data file starts with `# key=value` metadata comment lines (model
//! parameters, grid, method), then a header row, then one row per grid
//! time. Values are printed with 17 significant digits (`%.16e`), `.` as
//! the decimal separator, fields separated by `,`, lines ending in LF.
//! Parsing a file back reproduces the in-memory values bit for bit.
//!
//! * Full series (`<METHOD>.csv`): header `t,re_0_0,im_0_0,re_0_1,...` —
//!   one `re_r_c,im_r_c` column pair per density-matrix element the method
//!   models, in row-major order. Matrix rows are ordered by descending
//!   magnetic quantum number (row 0 is m = j1). Methods that model only
//!   the m = j1 population carry just `re_0_0,im_0_0`.
//! * Per-observable files (`<METHOD>_r_c.csv`, one per tracked element the
//!   method models): header `t,re_r_c,im_r_c`.
//! * Sweep horizons (`sweep_horizons.csv`): header `<param>,<METHOD>,...`
//!   with one row per swept value.
//!
//! # Exit codes
//!
//! `0` success; `1` config error (parse or validation); `2` numerical
//! failure (solver breakdown, non-finite output, tolerance violation,
//! I/O failure); `3` guard violation (brute-force oracle bath too large).

pub mod commands;
pub mod config;
pub mod csv;
pub mod error;
pub mod gnuplot;
pub mod methods;
pub mod presets;
pub mod report;

pub use config::{Scenario, SweepParam, SweepSpec};
pub use error::CliError;
pub use methods::{Method, MethodOutput};
pub use report::{ComparisonReport, MethodReport, PowerLawFit};
