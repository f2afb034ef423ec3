//! Port input expressions: `<number>`, `step(t0,v)`, `sin(amp,omega)`,
//! `ramp(slope)` or `csv:<path>` (columns `t,value`, linear interpolation,
//! constant extrapolation).

use std::path::Path;

use crate::error::{PhsError, Result};
use crate::system::SignalFn;
use std::sync::Arc;

fn args(body: &str, name: &str, count: usize) -> Result<Vec<f64>> {
    let vals: Vec<f64> = body
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| PhsError::Parse(format!("{name}(...) expects {count} numbers, got '{body}'")))?;
    if vals.len() != count {
        return Err(PhsError::Parse(format!("{name}(...) expects {count} arguments")));
    }
    Ok(vals)
}

pub fn parse_signal(expr: &str) -> Result<SignalFn> {
    let expr = expr.trim();
    if let Some(path) = expr.strip_prefix("csv:") {
        return csv_signal(Path::new(path));
    }
    if let Ok(v) = expr.parse::<f64>() {
        return Ok(Arc::new(move |_| v));
    }
    let (name, body) = expr
        .strip_suffix(')')
        .and_then(|e| e.split_once('('))
        .ok_or_else(|| PhsError::Parse(format!("cannot parse input expression '{expr}'")))?;
    match name.trim() {
        "step" => {
            let a = args(body, "step", 2)?;
            let (t0, v) = (a[0], a[1]);
            Ok(Arc::new(move |t| if t >= t0 { v } else { 0.0 }))
        }
        "sin" => {
            let a = args(body, "sin", 2)?;
            let (amp, omega) = (a[0], a[1]);
            Ok(Arc::new(move |t| amp * (omega * t).sin()))
        }
        "ramp" => {
            let slope = args(body, "ramp", 1)?[0];
            Ok(Arc::new(move |t| slope * t))
        }
        other => Err(PhsError::Parse(format!("unknown input function '{other}'"))),
    }
}

fn csv_signal(path: &Path) -> Result<SignalFn> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| PhsError::Parse(format!("{}: {e}", path.display())))?;
    let mut samples: Vec<(f64, f64)> = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| PhsError::Parse(e.to_string()))?;
        let parse = |i: usize| rec.get(i).and_then(|s| s.trim().parse::<f64>().ok());
        match (parse(0), parse(1)) {
            (Some(t), Some(v)) => samples.push((t, v)),
            // a header line is allowed before any data
            _ if samples.is_empty() => continue,
            _ => return Err(PhsError::Parse(format!("{}: malformed row", path.display()))),
        }
    }
    if samples.is_empty() {
        return Err(PhsError::Parse(format!("{}: no samples", path.display())));
    }
    if samples.windows(2).any(|w| !(w[1].0 > w[0].0)) {
        return Err(PhsError::Parse(format!("{}: times must increase", path.display())));
    }
    Ok(Arc::new(move |t| interpolate(&samples, t)))
}

fn interpolate(samples: &[(f64, f64)], t: f64) -> f64 {
    let i = samples.partition_point(|s| s.0 <= t);
    if i == 0 {
        return samples[0].1;
    }
    if i == samples.len() {
        return samples[i - 1].1;
    }
    let ((t0, v0), (t1, v1)) = (samples[i - 1], samples[i]);
    v0 + (v1 - v0) * (t - t0) / (t1 - t0)
}

/// Splits `<channel>=<expr>`.
pub fn parse_assignment(s: &str) -> Result<(usize, String)> {
    let (ch, expr) = s
        .split_once('=')
        .ok_or_else(|| PhsError::Parse(format!("input '{s}' is not of the form <channel>=<expr>")))?;
    let ch = ch
        .trim()
        .parse::<usize>()
        .map_err(|_| PhsError::Parse(format!("bad channel index in '{s}'")))?;
    Ok((ch, expr.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expressions_evaluate() {
        assert_eq!(parse_signal("2.5").unwrap()(7.0), 2.5);
        let s = parse_signal("step(0.5, 3)").unwrap();
        assert_eq!((s(0.49), s(0.5)), (0.0, 3.0));
        assert_eq!(parse_signal("ramp(2)").unwrap()(1.5), 3.0);
        let w = parse_signal("sin(2,3)").unwrap();
        assert_eq!(w(0.25), 2.0 * 0.75_f64.sin());
        assert!(parse_signal("cos(1,2)").is_err());
        assert!(parse_signal("step(1)").is_err());
    }

    #[test]
    fn csv_signal_interpolates() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.csv");
        std::fs::write(&p, "t,u\n0,0\n1,2\n3,0\n").unwrap();
        let s = parse_signal(&format!("csv:{}", p.display())).unwrap();
        assert_eq!((s(-1.0), s(0.5), s(2.0), s(9.0)), (0.0, 1.0, 1.0, 0.0));
    }

    #[test]
    fn assignments() {
        assert_eq!(parse_assignment("1=step(0,1)").unwrap(), (1, "step(0,1)".to_string()));
        assert!(parse_assignment("x=1").is_err());
    }
}
