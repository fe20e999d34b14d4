//! Deterministic report and trajectory serialization: JSON with floats in
//! full-precision scientific notation and CSV phase-space trajectories,
//! both byte-stable across runs on identical inputs.

use std::io;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::PhasePath;

/// JSON formatter printing every float as `{:.16e}` (17 significant
/// digits), enough to round-trip an f64 exactly and to make reports
/// byte-for-byte reproducible.
pub struct SciFormatter;

impl serde_json::ser::Formatter for SciFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }
}

/// Serialize a report as compact JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SciFormatter);
    value
        .serialize(&mut ser)
        .map_err(|e| Error::Schema { detail: format!("report serialization: {e}") })?;
    out.push(b'\n');
    String::from_utf8(out)
        .map_err(|e| Error::Schema { detail: format!("report encoding: {e}") })
}

/// Print a report to stdout.
pub fn print_json<T: Serialize>(value: &T) -> Result<()> {
    print!("{}", to_json(value)?);
    Ok(())
}

fn csv_header(n: usize, k: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("q_{i}")));
    cols.extend((1..=n).map(|i| format!("p_{i}")));
    cols.extend((1..=k).map(|i| format!("u_{i}")));
    cols.push("H".to_string());
    cols.join(",")
}

/// Render a phase-space trajectory as CSV: header
/// `t,q_1..q_n,p_1..p_n,u_1..u_k,H`, one row per sample, every value in
/// `{:.16e}`, LF line endings.
pub fn trajectory_csv(path: &PhasePath, n: usize, k: usize) -> String {
    let mut text = csv_header(n, k);
    text.push('\n');
    for s in 0..path.len() {
        let mut row = Vec::with_capacity(2 + 2 * n + k);
        row.push(format!("{:.16e}", path.times[s]));
        row.extend(path.q[s].iter().map(|v| format!("{v:.16e}")));
        row.extend(path.p[s].iter().map(|v| format!("{v:.16e}")));
        row.extend(path.u[s].iter().map(|v| format!("{v:.16e}")));
        row.push(format!("{:.16e}", path.h_values[s]));
        text.push_str(&row.join(","));
        text.push('\n');
    }
    text
}

/// Write a trajectory CSV to disk.
pub fn write_trajectory(file: &Path, path: &PhasePath, n: usize, k: usize) -> Result<()> {
    std::fs::write(file, trajectory_csv(path, n, k))?;
    Ok(())
}

fn parse_field(field: &str, line: usize) -> Result<f64> {
    field.trim().parse::<f64>().map_err(|_| Error::Schema {
        detail: format!("trajectory line {line}: {field:?} is not a number"),
    })
}

/// Read a trajectory CSV back, validating the header and the column count
/// of every row against the problem's dimensions.
pub fn read_trajectory(file: &Path, n: usize, k: usize) -> Result<PhasePath> {
    let text = std::fs::read_to_string(file)?;
    let expected_header = csv_header(n, k);
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header.trim_end() == expected_header => {}
        Some((_, header)) => {
            return Err(Error::Schema {
                detail: format!(
                    "trajectory header {:?} does not match expected {:?}",
                    header.trim_end(),
                    expected_header
                ),
            });
        }
        None => {
            return Err(Error::Schema { detail: "empty trajectory file".to_string() });
        }
    }
    let mut path = PhasePath {
        times: Vec::new(),
        q: Vec::new(),
        p: Vec::new(),
        u: Vec::new(),
        h_values: Vec::new(),
        wall_seconds: 0.0,
    };
    let columns = 2 + 2 * n + k;
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != columns {
            return Err(Error::Schema {
                detail: format!(
                    "trajectory line {}: {} columns, expected {columns}",
                    idx + 1,
                    fields.len()
                ),
            });
        }
        let mut vals = Vec::with_capacity(columns);
        for f in &fields {
            vals.push(parse_field(f, idx + 1)?);
        }
        path.times.push(vals[0]);
        path.q.push(vals[1..1 + n].to_vec());
        path.p.push(vals[1 + n..1 + 2 * n].to_vec());
        path.u.push(vals[1 + 2 * n..1 + 2 * n + k].to_vec());
        path.h_values.push(vals[columns - 1]);
    }
    if path.times.len() < 2 {
        return Err(Error::Schema {
            detail: format!("trajectory has {} samples, need at least 2", path.times.len()),
        });
    }
    for w in path.times.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Schema {
                detail: "trajectory times are not strictly increasing".to_string(),
            });
        }
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        a: f64,
        b: Option<f64>,
        label: String,
    }

    #[test]
    fn json_floats_round_trip_exactly() {
        let s = Sample { a: 0.1 + 0.2, b: None, label: "x".to_string() };
        let text = to_json(&s).unwrap();
        assert!(text.ends_with('\n'));
        assert!(text.contains("\"b\":null"));
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(parsed["a"].as_f64().unwrap(), 0.1 + 0.2);
    }

    #[test]
    fn csv_round_trips_a_trajectory() {
        let path = PhasePath {
            times: vec![0.0, 0.5, 1.0],
            q: vec![vec![0.0, 0.0], vec![0.5, 0.25], vec![1.0, 1.0]],
            p: vec![vec![1.0, 0.0], vec![1.0, 0.5], vec![1.0, 1.0]],
            u: vec![vec![1.0], vec![1.0], vec![1.0]],
            h_values: vec![0.5, 0.5, 0.5],
            wall_seconds: 1.0,
        };
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("traj.csv");
        write_trajectory(&file, &path, 2, 1).unwrap();
        let text = std::fs::read_to_string(&file).unwrap();
        assert!(text.starts_with("t,q_1,q_2,p_1,p_2,u_1,H\n"));
        assert!(!text.contains('\r'));
        let back = read_trajectory(&file, 2, 1).unwrap();
        assert_eq!(back.times, path.times);
        assert_eq!(back.q, path.q);
        assert_eq!(back.p, path.p);
        assert_eq!(back.u, path.u);
        assert_eq!(back.h_values, path.h_values);
        assert_eq!(back.wall_seconds, 0.0);
    }

    #[test]
    fn malformed_csv_is_rejected_as_schema() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("bad.csv");
        std::fs::write(&file, "t,q_1,p_1,u_1,H\n0.0,1.0,2.0\n").unwrap();
        let err = match read_trajectory(&file, 1, 1) {
            Err(e) => e,
            Ok(_) => panic!("short row accepted"),
        };
        assert_eq!(err.exit_code(), 2);
        std::fs::write(&file, "time,q_1,p_1,u_1,H\n").unwrap();
        let err = match read_trajectory(&file, 1, 1) {
            Err(e) => e,
            Ok(_) => panic!("bad header accepted"),
        };
        assert_eq!(err.exit_code(), 2);
    }
}
