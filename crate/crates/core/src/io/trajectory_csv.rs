use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DVector;

use crate::dirac::Dims;
use crate::error::{PhsError, Result};
use crate::system::Trajectory;

fn header(dims: Dims) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for (prefix, count) in [("x", dims.n_s), ("fR", dims.n_r), ("eR", dims.n_r), ("fP", dims.n_p), ("eP", dims.n_p)] {
        h.extend((0..count).map(|i| format!("{prefix}_{i}")));
    }
    h
}

/// 17 significant digits: enough for a lossless round trip.
fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> PhsError {
    PhsError::Parse(e.to_string())
}

/// Writes `t, x_*, fR_*, eR_*, fP_*, eP_*`; interval columns hold the value
/// on the preceding interval and are blank in the first row.
pub fn write_trajectory<W: Write>(out: W, traj: &Trajectory) -> Result<()> {
    let dims = traj.dims();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(dims)).map_err(csv_err)?;
    for k in 0..traj.t.len() {
        let mut rec: Vec<String> = Vec::with_capacity(1 + dims.n_s + 2 * (dims.n_r + dims.n_p));
        rec.push(fmt(traj.t[k]));
        rec.extend(traj.x[k].iter().map(|&v| fmt(v)));
        for data in [&traj.f_r, &traj.e_r, &traj.f_p, &traj.e_p] {
            let width = data.first().map_or(0, |v| v.len());
            if k == 0 {
                rec.extend(std::iter::repeat_n(String::new(), width));
            } else {
                rec.extend(data[k - 1].iter().map(|&v| fmt(v)));
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_header(fields: &csv::StringRecord) -> Result<Dims> {
    let names: Vec<&str> = fields.iter().map(str::trim).collect();
    if names.first() != Some(&"t") {
        return Err(PhsError::Parse("first column must be 't'".into()));
    }
    let count = |prefix: &str| names.iter().filter(|n| n.strip_prefix(prefix).is_some_and(|r| r.starts_with('_'))).count();
    let dims = Dims::new(count("x"), count("fR"), count("fP"));
    if count("eR") != dims.n_r || count("eP") != dims.n_p {
        return Err(PhsError::Parse("flow and effort column counts differ".into()));
    }
    let expected = header(dims);
    if names != expected.iter().map(String::as_str).collect::<Vec<_>>() {
        return Err(PhsError::Parse(format!("unexpected header, expected {}", expected.join(","))));
    }
    Ok(dims)
}

pub fn read_trajectory<R: Read>(input: R) -> Result<Trajectory> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let dims = parse_header(r.headers().map_err(csv_err)?)?;
    let mut t = Vec::new();
    let mut x = Vec::new();
    let mut channels: [Vec<DVector<f64>>; 4] = Default::default();
    let widths = [dims.n_r, dims.n_r, dims.n_p, dims.n_p];
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let num = |i: usize| -> Result<f64> {
            let s = rec.get(i).unwrap_or("").trim();
            s.parse::<f64>()
                .map_err(|_| PhsError::Parse(format!("row {}: bad number '{s}' in column {i}", row + 1)))
        };
        t.push(num(0)?);
        x.push(DVector::from_iterator(dims.n_s, (1..=dims.n_s).map(&num).collect::<Result<Vec<_>>>()?));
        let mut col = 1 + dims.n_s;
        for (c, &w) in widths.iter().enumerate() {
            if row > 0 {
                let vals = (col..col + w).map(&num).collect::<Result<Vec<_>>>()?;
                channels[c].push(DVector::from_vec(vals));
            } else if (col..col + w).any(|i| !rec.get(i).unwrap_or("").trim().is_empty()) {
                return Err(PhsError::Parse("interval columns must be blank in the first row".into()));
            }
            col += w;
        }
    }
    let [f_r, e_r, f_p, e_p] = channels;
    Trajectory::new(t, x, f_r, e_r, f_p, e_p).map_err(|e| PhsError::Parse(e.to_string()))
}

pub fn write_trajectory_file(path: &Path, traj: &Trajectory) -> Result<()> {
    write_trajectory(std::io::BufWriter::new(std::fs::File::create(path)?), traj)
}

pub fn read_trajectory_file(path: &Path) -> Result<Trajectory> {
    read_trajectory(std::io::BufReader::new(std::fs::File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Trajectory {
        let t = vec![0.0, 0.1, 0.2];
        let x = vec![
            DVector::from_row_slice(&[1.0, -0.0]),
            DVector::from_row_slice(&[0.1 + 0.2, 1e-300]),
            DVector::from_row_slice(&[std::f64::consts::PI, -2.5e17]),
        ];
        let r = vec![DVector::from_row_slice(&[1.0 / 3.0]); 2];
        let p = vec![DVector::from_row_slice(&[f64::MIN_POSITIVE, -7.0]); 2];
        Trajectory::new(t, x, r.clone(), r, p.clone(), p).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let traj = sample();
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &traj).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,x_0,x_1,fR_0,eR_0,fP_0,fP_1,eP_0,eP_1\n"));
        assert!(text.lines().nth(1).unwrap().ends_with(",,,,,,"));
        let back = read_trajectory(buf.as_slice()).unwrap();
        assert_eq!(back, traj);
    }

    #[test]
    fn bad_header_is_a_parse_error() {
        let text = "t,x_0,fP_0\n0,1,\n1,2,3\n";
        assert!(matches!(read_trajectory(text.as_bytes()), Err(PhsError::Parse(_))));
    }
}
