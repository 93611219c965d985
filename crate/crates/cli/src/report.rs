//! Table rendering for evaluation and linear-probe reports.

use std::path::Path;

use btcxr_core::lineval::ProtocolReport;
use btcxr_core::metrics::EvalReport;
use btcxr_core::{Error, Result};

/// `value (lo,hi)` with four decimals everywhere.
///
/// ```
/// use btcxr_cli::format_metric_cell;
/// assert_eq!(format_metric_cell(0.13423, (0.13058, 0.13781)), "0.1342 (0.1306,0.1378)");
/// ```
pub fn format_metric_cell(value: f64, ci: (f64, f64)) -> String {
    format!("{} ({},{})", fixed4(value), fixed4(ci.0), fixed4(ci.1))
}

fn fixed4(x: f64) -> String {
    let s = format!("{x:.4}");
    // a tiny negative value rounds to "-0.0000"
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn percent(fraction: f64) -> String {
    let s = format!("{:.4}", fraction * 100.0);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    format!("{s}%")
}

pub enum LoadedReport {
    Eval(EvalReport),
    Protocol(ProtocolReport),
}

impl LoadedReport {
    pub fn parse(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        if v.get("metric_name").is_some() {
            Ok(LoadedReport::Eval(EvalReport::from_json(text)?))
        } else if v.get("fractions").is_some() {
            Ok(LoadedReport::Protocol(ProtocolReport::from_json(text)?))
        } else {
            Err(Error::InvalidArgument(
                "input is neither an evaluation report nor a linear-eval report".into(),
            ))
        }
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<(String, Vec<String>)>,
}

impl Table {
    fn new(first: &str, columns: &[String]) -> Self {
        let mut header = vec![first.to_string()];
        header.extend(columns.iter().cloned());
        Self { header, rows: Vec::new() }
    }

    fn cell(&mut self, row: &str, col: usize, text: String) {
        let width = self.header.len() - 1;
        let idx = match self.rows.iter().position(|(r, _)| r == row) {
            Some(i) => i,
            None => {
                self.rows.push((row.to_string(), vec![String::new(); width]));
                self.rows.len() - 1
            }
        };
        self.rows[idx].1[col] = text;
    }

    fn render(&self) -> String {
        let mut out = format!("| {} |\n", self.header.join(" | "));
        out.push_str(&format!("|{}\n", "---|".repeat(self.header.len())));
        for (name, cells) in &self.rows {
            let cells: Vec<&str> = cells.iter().map(|c| if c.is_empty() { "n/a" } else { c.as_str() }).collect();
            out.push_str(&format!("| {} | {} |\n", name, cells.join(" | ")));
        }
        out
    }
}

/// Column title for an input file: its stem.
pub fn column_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Markdown table with one column per report. Evaluation reports give one
/// row for the overall metric and one per class; linear-eval reports give
/// one row per training fraction with the min-max band across repeats.
pub fn render_table(reports: &[LoadedReport], columns: &[String]) -> Result<String> {
    match reports.first() {
        None => Err(Error::InvalidArgument("no reports given".into())),
        Some(LoadedReport::Eval(_)) => {
            let mut t = Table::new("class", columns);
            for (c, r) in reports.iter().enumerate() {
                let LoadedReport::Eval(r) = r else {
                    return Err(Error::InvalidArgument("cannot mix report kinds in one table".into()));
                };
                t.cell(&r.metric_name, c, format_metric_cell(r.overall, (r.overall_ci[0], r.overall_ci[1])));
                for m in &r.per_class {
                    t.cell(&m.name, c, format_metric_cell(m.value, (m.ci[0], m.ci[1])));
                }
                for name in &r.undefined_classes {
                    t.cell(name, c, "undefined".into());
                }
            }
            Ok(t.render())
        }
        Some(LoadedReport::Protocol(_)) => {
            let mut t = Table::new("fraction", columns);
            for (c, r) in reports.iter().enumerate() {
                let LoadedReport::Protocol(r) = r else {
                    return Err(Error::InvalidArgument("cannot mix report kinds in one table".into()));
                };
                for s in &r.summary {
                    let b = s.macro_auc;
                    t.cell(&percent(s.fraction), c, format_metric_cell(b.mean, (b.min, b.max)));
                }
            }
            Ok(t.render())
        }
    }
}
