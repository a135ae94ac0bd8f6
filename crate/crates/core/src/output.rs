//! File formats: path tables, density tables and histograms as CSV, reports
//! and paths as JSON.
//!
//! CSV files use `,` separators, `.` decimals, a header row and `\n` line
//! endings. Floats are written in Rust's shortest round-trip form (plain for
//! moderate magnitudes, exponent form otherwise), so equal values always
//! produce equal bytes.

use std::io::Write;

use serde::Serialize;

use crate::dynamics::PathSample;
use crate::error::Result;
use crate::experiments::HistogramCell;

/// Shortest round-trip text for `x`.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e16).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// One row of a density table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityRow {
    pub point: Vec<f64>,
    pub value: f64,
    pub truncation_order: usize,
    pub tail_bound: f64,
}

/// Labels for the events of `path` recorded in `(after, upto]` (all up to
/// `upto` when `after` is `None`), plus `hit:<kind>` on the row that ends a
/// stopped path.
fn row_events(path: &PathSample, after: Option<f64>, upto: f64, last: bool) -> String {
    let mut labels: Vec<String> = path
        .events
        .iter()
        .filter(|e| after.is_none_or(|a| e.time > a) && e.time <= upto)
        .map(|e| e.kind.label())
        .collect();
    if last {
        if let Some(hit) = &path.hit {
            let kind = serde_json::to_value(hit.kind).ok().and_then(|v| v.as_str().map(String::from));
            labels.push(format!("hit:{}", kind.unwrap_or_default()));
        }
    }
    labels.join(";")
}

/// Writes paths as a long table `t, <coord>_1..<coord>_m, event`. With
/// `path_column` each row starts with the path index.
pub fn write_paths_csv<W: Write>(mut w: W, paths: &[PathSample], coord: &str, path_column: bool) -> Result<()> {
    let m = paths.first().map_or(0, |p| p.final_state().len());
    let mut header = Vec::new();
    if path_column {
        header.push("path".to_string());
    }
    header.push("t".into());
    header.extend((1..=m).map(|i| format!("{coord}_{i}")));
    header.push("event".into());
    writeln!(w, "{}", header.join(","))?;
    for (index, path) in paths.iter().enumerate() {
        let mut prev = None;
        for (k, (t, x)) in path.times.iter().zip(&path.states).enumerate() {
            if path_column {
                write!(w, "{index},")?;
            }
            write!(w, "{}", fmt_f64(*t))?;
            for v in x {
                write!(w, ",{}", fmt_f64(*v))?;
            }
            writeln!(w, ",{}", row_events(path, prev, *t, k + 1 == path.len()))?;
            prev = Some(*t);
        }
    }
    Ok(())
}

/// A single path as `{times, states, events, hit}`, several as an array.
pub fn write_paths_json<W: Write>(mut w: W, paths: &[PathSample]) -> Result<()> {
    if let [one] = paths {
        serde_json::to_writer_pretty(&mut w, one)?;
    } else {
        serde_json::to_writer_pretty(&mut w, paths)?;
    }
    writeln!(w)?;
    Ok(())
}

/// Density table with columns `lambda_1..lambda_m, value, truncation_order,
/// tail_bound`.
pub fn write_density_csv<W: Write>(mut w: W, rows: &[DensityRow]) -> Result<()> {
    let m = rows.first().map_or(1, |r| r.point.len());
    let mut header: Vec<String> = (1..=m).map(|i| format!("lambda_{i}")).collect();
    header.extend(["value", "truncation_order", "tail_bound"].map(String::from));
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        for v in &r.point {
            write!(w, "{},", fmt_f64(*v))?;
        }
        writeln!(w, "{},{},{}", fmt_f64(r.value), r.truncation_order, fmt_f64(r.tail_bound))?;
    }
    Ok(())
}

/// Histogram cells as `i, j, empirical, model`.
pub fn write_histogram_csv<W: Write>(mut w: W, cells: &[HistogramCell]) -> Result<()> {
    writeln!(w, "i,j,empirical,model")?;
    for c in cells {
        writeln!(w, "{},{},{},{}", c.i, c.j, fmt_f64(c.empirical), fmt_f64(c.model))?;
    }
    Ok(())
}

/// Pretty JSON followed by a newline.
pub fn write_json<W: Write, T: Serialize + ?Sized>(mut w: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Event, EventKind, Hit, HitKind};

    fn sample() -> PathSample {
        PathSample {
            times: vec![0.0, 0.5, 0.75],
            states: vec![vec![0.6, 0.2], vec![0.55, 0.25], vec![0.5, 0.4999]],
            events: vec![Event { time: 0.0, kind: EventKind::StartPush }, Event { time: 0.6, kind: EventKind::Reorder }],
            hit: Some(Hit { time: 0.75, kind: HitKind::Collision }),
        }
    }

    #[test]
    fn path_csv_layout() {
        let mut buf = Vec::new();
        write_paths_csv(&mut buf, &[sample()], "phi", false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "t,phi_1,phi_2,event\n0,0.6,0.2,start_push\n0.5,0.55,0.25,\n0.75,0.5,0.4999,reorder;hit:collision\n"
        );
        let mut buf = Vec::new();
        write_paths_csv(&mut buf, &[sample(), sample()], "lambda", true).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("path,t,lambda_1,lambda_2,event\n0,0,"));
        assert_eq!(text.lines().count(), 7);
        assert!(!text.contains('\r'));
    }

    #[test]
    fn float_text_round_trips() {
        for x in [0.0, 1.0, -2.5, 1e-20, 3.0e-5, 0.1 + 0.2, 1e17, f64::MIN_POSITIVE] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(fmt_f64(1e-20), "1e-20");
        assert_eq!(fmt_f64(0.25), "0.25");
    }

    #[test]
    fn path_json_keys() {
        let mut buf = Vec::new();
        write_paths_json(&mut buf, &[sample()]).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        for key in ["times", "states", "events", "hit"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        let mut buf = Vec::new();
        write_paths_json(&mut buf, &[sample(), sample()]).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v.as_array().unwrap().len(), 2);
    }

    #[test]
    fn density_and_histogram_csv() {
        let rows = [DensityRow { point: vec![0.7, 0.2], value: 1.25, truncation_order: 40, tail_bound: 1e-20 }];
        let mut buf = Vec::new();
        write_density_csv(&mut buf, &rows).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "lambda_1,lambda_2,value,truncation_order,tail_bound\n0.7,0.2,1.25,40,1e-20\n"
        );
        let mut buf = Vec::new();
        write_histogram_csv(&mut buf, &[HistogramCell { i: 1, j: 0, empirical: 0.5, model: 0.25 }]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "i,j,empirical,model\n1,0,0.5,0.25\n");
    }
}
