//! Rendering of ranked allocations, key/value summaries and scatter data.

use swd_core::RankedAllocation;

use crate::config::{OutputFormat, Scatter};
use crate::error::CliError;

pub const REPORT_HEADER: [&str; 13] = [
    "rank",
    "allocation",
    "V",
    "V_exact",
    "efficiency",
    "distance",
    "imbalance",
    "NP",
    "CK",
    "PtAP",
    "h1_b_ztP",
    "minus_h2_b2",
    "outer_loading",
];

/// `(x1,x2,...)` of a per-sequence vector scaled to whole counts.
fn scaled(v: &[f64], scale: f64) -> String {
    let parts: Vec<String> = v
        .iter()
        .map(|x| format!("{}", (x * scale).round()))
        .collect();
    format!("({})", parts.join(","))
}

fn report_rows(
    rows: &[RankedAllocation],
    total: u64,
    clusters: usize,
    digits: usize,
) -> Vec<Vec<String>> {
    let f = |x: f64| format!("{x:.digits$}");
    rows.iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                (i + 1).to_string(),
                r.allocation.to_string(),
                f(r.v_approx),
                r.v_exact.map_or_else(String::new, f),
                f(r.efficiency),
                f(r.distance),
                f(r.imbalance),
                scaled(r.p.as_slice(), total as f64),
                scaled(r.k.as_slice(), clusters as f64),
                f(r.terms.quadratic),
                f(r.terms.linear),
                f(r.terms.imbalance_penalty),
                f(r.terms.outer_loading),
            ]
        })
        .collect()
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Fixed-width table: text columns left aligned, the rest right aligned.
fn table_text(header: &[&str], rows: &[Vec<String>], left: &[usize]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| {
                if left.contains(&i) {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header.to_vec());
    for r in rows {
        out.push_str(&line(r.iter().map(String::as_str).collect()));
    }
    out
}

/// Ranked allocations, best first. `total` and `clusters` scale `P` and `K`.
pub fn emit_report(
    rows: &[RankedAllocation],
    total: u64,
    clusters: usize,
    output: OutputFormat,
) -> Result<String, CliError> {
    if rows.is_empty() {
        return Err(CliError::Empty("no allocations to report".into()));
    }
    match output {
        OutputFormat::Csv => csv_text(&REPORT_HEADER, &report_rows(rows, total, clusters, 6)),
        OutputFormat::Table => Ok(table_text(
            &REPORT_HEADER,
            &report_rows(rows, total, clusters, 4),
            &[1, 7, 8],
        )),
    }
}

/// Two-column summary.
pub fn emit_pairs(pairs: &[(String, String)], output: OutputFormat) -> Result<String, CliError> {
    let rows: Vec<Vec<String>> = pairs
        .iter()
        .map(|(k, v)| vec![k.clone(), v.clone()])
        .collect();
    match output {
        OutputFormat::Csv => csv_text(&["quantity", "value"], &rows),
        OutputFormat::Table => Ok(table_text(&["quantity", "value"], &rows, &[0, 1])),
    }
}

/// Plot data: one `(x, V)` row per draw, always CSV.
pub fn emit_scatter(rows: &[RankedAllocation], scatter: Scatter) -> Result<String, CliError> {
    if rows.is_empty() {
        return Err(CliError::Empty("no allocations to plot".into()));
    }
    let data: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let x = match scatter {
                Scatter::Distance => r.distance,
                Scatter::Imbalance => r.imbalance,
            };
            vec![format!("{x}"), format!("{}", r.v_approx)]
        })
        .collect();
    csv_text(&[&scatter.to_string(), "V"], &data)
}
