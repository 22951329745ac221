//! Result tables and per-feature bar charts.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::gridsearch::GridResult;
use crate::grlpn::SolveReport;

/// One row of the method comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub dataset: String,
    pub method: String,
    pub test_error: Option<f64>,
    pub cv_error: f64,
    pub vio: Option<f64>,
    pub time_secs: f64,
    pub size: usize,
    pub c: f64,
}

impl TableRow {
    pub fn from_solve(dataset: &str, r: &SolveReport) -> Self {
        Self {
            dataset: dataset.to_string(),
            method: r.method.clone(),
            test_error: r.test_error,
            cv_error: r.cv_error,
            vio: Some(r.vio),
            time_secs: r.wall_time_secs,
            size: r.size,
            c: r.c_scaled,
        }
    }

    pub fn from_grid(dataset: &str, r: &GridResult) -> Self {
        Self {
            dataset: dataset.to_string(),
            method: "GS".to_string(),
            test_error: r.test_error,
            cv_error: r.cv_error,
            vio: None,
            time_secs: r.wall_time_secs,
            size: r.size,
            c: r.c_scaled,
        }
    }
}

fn pct(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{:.2}", 100.0 * v))
}

fn sci(x: Option<f64>) -> String {
    x.map_or("-".into(), |v| format!("{v:.2e}"))
}

/// Markdown table with columns dataset, method, E_t (%), E_C (%), Vio, time, size, C.
pub fn table_markdown(rows: &[TableRow]) -> String {
    let mut s = String::from(
        "| dataset | method | E_t (%) | E_C (%) | Vio | time (s) | size | C |\n\
         |---|---|---:|---:|---:|---:|---:|---:|\n",
    );
    for r in rows {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {} | {} | {:.2} | {} | {:.2e} |",
            r.dataset,
            r.method,
            pct(r.test_error),
            pct(Some(r.cv_error)),
            sci(r.vio),
            r.time_secs,
            r.size,
            r.c
        );
    }
    s
}

pub fn table_csv(rows: &[TableRow]) -> String {
    let mut s = String::from("dataset,method,test_error,cv_error,vio,time_secs,size,c\n");
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:e}"));
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{:e},{},{:e},{},{:e}",
            r.dataset,
            r.method,
            opt(r.test_error),
            r.cv_error,
            opt(r.vio),
            r.time_secs,
            r.size,
            r.c
        );
    }
    s
}

/// Grouped bar chart: `w̄_i` in blue next to `w_i` in red for each feature.
pub fn features_svg(w_bar: &[f64], w: &[f64]) -> String {
    let n = w_bar.len().max(w.len()).max(1);
    let (width, height, pad) = (80.0 * n as f64 + 60.0, 240.0, 30.0);
    let vmax = w_bar
        .iter()
        .chain(w)
        .fold(0.0f64, |m, x| m.max(x.abs()))
        .max(1e-12);
    let mid = height / 2.0;
    let scale = (mid - pad) / vmax;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        s,
        r##"<line x1="{pad}" y1="{mid}" x2="{}" y2="{mid}" stroke="#000"/>"##,
        width - pad
    );
    let bar = |s: &mut String, x: f64, val: f64, color: &str| {
        let h = (val * scale).abs();
        let y = if val >= 0.0 { mid - h } else { mid };
        let _ = writeln!(
            s,
            r#"<rect x="{x:.1}" y="{y:.1}" width="24" height="{h:.1}" fill="{color}"><title>{val:e}</title></rect>"#
        );
    };
    for i in 0..n {
        let x0 = pad + 80.0 * i as f64 + 10.0;
        bar(&mut s, x0, w_bar.get(i).copied().unwrap_or(0.0), "blue");
        bar(&mut s, x0 + 26.0, w.get(i).copied().unwrap_or(0.0), "red");
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" font-size="11" text-anchor="middle">{}</text>"#,
            x0 + 25.0,
            height - 8.0,
            i + 1
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> TableRow {
        TableRow {
            dataset: "toy".into(),
            method: "GRLPN".into(),
            test_error: Some(0.25),
            cv_error: 0.0,
            vio: Some(4.8e-3),
            time_secs: 1.5,
            size: 27,
            c: 0.16,
        }
    }

    #[test]
    fn markdown_has_header_and_row() {
        let t = table_markdown(&[row()]);
        assert!(t.starts_with("| dataset | method | E_t (%)"));
        assert!(t.contains("| toy | GRLPN | 25.00 | 0.00 | 4.80e-3 | 1.50 | 27 | 1.60e-1 |"));
    }

    #[test]
    fn csv_round_numbers() {
        let t = table_csv(&[row()]);
        assert_eq!(t.lines().count(), 2);
        assert!(t
            .lines()
            .nth(1)
            .unwrap()
            .starts_with("toy,GRLPN,2.5e-1,0e0"));
    }

    #[test]
    fn svg_has_two_bars_per_feature() {
        let s = features_svg(&[1.0, 0.5], &[0.8, -0.2]);
        assert_eq!(s.matches("<rect").count(), 4);
        assert!(s.contains("fill=\"blue\"") && s.contains("fill=\"red\""));
    }
}
