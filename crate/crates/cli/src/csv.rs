//! CSV emission and parsing.
//!
//! Layout (documented at the crate root): `# key=value` metadata comment
//! lines, one header row, then one data row per grid time. Numbers are
//! printed with 17 significant digits so an emitted file parses back to
//! bit-identical `f64` values; lines end in LF; fields are separated by
//! `,` with `.` as the decimal separator.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use spinstar::ModelSpec;

use crate::error::CliError;
use crate::methods::MethodOutput;

/// Format one value with 17 significant digits (round-trips exactly).
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

/// Column label for the real part of element (row, col).
pub fn re_label(row: usize, col: usize) -> String {
    format!("re_{row}_{col}")
}

/// Column label for the imaginary part of element (row, col).
pub fn im_label(row: usize, col: usize) -> String {
    format!("im_{row}_{col}")
}

/// Metadata lines shared by every file a scenario emits.
pub fn model_metadata(model: &ModelSpec) -> Vec<(String, String)> {
    vec![
        ("j1".into(), model.j1.to_string()),
        ("n_bath".into(), model.n_bath.to_string()),
        ("beta".into(), format_value(model.beta)),
        ("coupling".into(), format_value(model.coupling)),
        ("omega0".into(), format_value(model.omega0)),
    ]
}

/// Render a method's trajectory, restricted to the elements in `selection`
/// (every selected element must be modeled by the method).
pub fn render_series(
    output: &MethodOutput,
    metadata: &[(String, String)],
    selection: &[(usize, usize)],
) -> Result<String, CliError> {
    let mut columns = Vec::with_capacity(selection.len());
    for &element in selection {
        let col = output.column_of(element).ok_or_else(|| {
            CliError::Config(format!(
                "{} does not model element ({},{})",
                output.method, element.0, element.1
            ))
        })?;
        columns.push((element, col));
    }

    let mut text = String::new();
    for (key, value) in metadata {
        writeln!(text, "# {key}={value}").expect("string write");
    }
    text.push('t');
    for &((r, c), _) in &columns {
        write!(text, ",{},{}", re_label(r, c), im_label(r, c)).expect("string write");
    }
    text.push('\n');
    for (i, &t) in output.times.iter().enumerate() {
        text.push_str(&format_value(t));
        for &(_, col) in &columns {
            let v = output.values[i][col];
            write!(text, ",{},{}", format_value(v.re), format_value(v.im))
                .expect("string write");
        }
        text.push('\n');
    }
    Ok(text)
}

/// Write a rendered file (LF endings are already in the text).
pub fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, text.as_bytes())?;
    Ok(())
}

/// A parsed CSV data file.
#[derive(Clone, Debug, PartialEq)]
pub struct ParsedCsv {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    /// `rows[i][k]` is column `header[k]` in data row `i`.
    pub rows: Vec<Vec<f64>>,
}

/// Parse a file emitted by [`render_series`] (used for round-trip checks
/// and by consumers of the emitted data).
pub fn parse_csv(text: &str) -> Result<ParsedCsv, CliError> {
    let mut metadata = Vec::new();
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some((k, v)) = comment.split_once('=') {
                metadata.push((k.trim().to_string(), v.trim().to_string()));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        match &header {
            None => header = Some(line.split(',').map(|s| s.trim().to_string()).collect()),
            Some(h) => {
                let mut row = Vec::with_capacity(h.len());
                for field in line.split(',') {
                    let v: f64 = field.trim().parse().map_err(|_| {
                        CliError::Numerical(format!(
                            "csv line {line_no}: '{field}' is not a number"
                        ))
                    })?;
                    row.push(v);
                }
                if row.len() != h.len() {
                    return Err(CliError::Numerical(format!(
                        "csv line {line_no}: {} fields, header has {}",
                        row.len(),
                        h.len()
                    )));
                }
                rows.push(row);
            }
        }
    }
    let header = header
        .ok_or_else(|| CliError::Numerical("csv has no header row".into()))?;
    Ok(ParsedCsv { metadata, header, rows })
}
