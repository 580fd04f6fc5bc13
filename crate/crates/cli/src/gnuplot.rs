//! Emission of a gnuplot script that plots the CSV files a command wrote.
//!
//! The script references data files by relative name only, so the output
//! directory is relocatable. Comment lines starting with `#` are skipped
//! by gnuplot automatically; the header row is consumed by
//! `set key autotitle columnhead`, with explicit per-curve titles layered
//! on top.

/// One curve: a CSV file, the 1-based column to plot against column 1
/// (the time axis), and a legend title.
#[derive(Clone, Debug)]
pub struct Curve {
    pub file: String,
    pub column: usize,
    pub title: String,
}

/// Render a plotting script for the given curves.
pub fn render_script(xlabel: &str, ylabel: &str, curves: &[Curve]) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator \",\"\n");
    s.push_str("set key autotitle columnhead\n");
    s.push_str(&format!("set xlabel \"{xlabel}\"\n"));
    s.push_str(&format!("set ylabel \"{ylabel}\"\n"));
    s.push_str("set grid\n");
    let clauses: Vec<String> = curves
        .iter()
        .map(|c| {
            format!(
                "    \"{}\" using 1:{} with lines title \"{}\"",
                c.file, c.column, escape(&c.title)
            )
        })
        .collect();
    s.push_str("plot \\\n");
    s.push_str(&clauses.join(", \\\n"));
    s.push('\n');
    s
}

fn escape(title: &str) -> String {
    title.replace('"', "'")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_plots_each_curve_from_its_file() {
        let curves = vec![
            Curve { file: "EXACT.csv".into(), column: 2, title: "EXACT".into() },
            Curve { file: "TCL_P1.csv".into(), column: 2, title: "TCL_P1".into() },
        ];
        let script = render_script("t", "population", &curves);
        assert!(script.contains("set datafile separator \",\""));
        assert!(script.contains("set key autotitle columnhead"));
        assert!(script.contains("set xlabel \"t\""));
        assert!(script.contains("\"EXACT.csv\" using 1:2 with lines title \"EXACT\""));
        assert!(script.contains("\"TCL_P1.csv\" using 1:2"));
        assert!(script.ends_with('\n'));
        assert!(!script.contains('\r'), "script uses LF only");
    }
}
