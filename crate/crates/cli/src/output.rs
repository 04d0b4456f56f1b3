//! File emission: fixed float formatting with enough digits to round-trip
//! `f64` exactly, and atomic writes (temp file + rename) so readers never
//! observe a partially written artifact.

use jacobi_renorm::jacobi::JacobiWindow;
use std::fs;
use std::io;
use std::path::Path;

/// 17 significant digits: every finite `f64` parses back bit-identically.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write `contents` to `path` atomically.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp.{}", std::process::id()));
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

/// Render the coefficient table. One row per site `k` in the window; the
/// `p` column holds the coupling between sites `k - 1` and `k`, so the first
/// row leaves it empty.
pub fn coefficients_csv(j: &JacobiWindow) -> String {
    let mut out = String::from("k,p,q\n");
    for k in j.start()..=j.end() {
        let p = if k > j.start() {
            fmt_float(j.p_at(k))
        } else {
            String::new()
        };
        out.push_str(&format!("{k},{p},{}\n", fmt_float(j.q_at(k))));
    }
    out
}

/// Parse a coefficient table back into a window. Inverse of
/// [`coefficients_csv`] up to exact float round-trip.
pub fn read_coefficients_csv(path: &Path) -> Result<JacobiWindow, String> {
    let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("k,p,q") => {}
        other => {
            return Err(format!(
                "{}: expected header \"k,p,q\", found {other:?}",
                path.display()
            ))
        }
    }
    let mut start: Option<i64> = None;
    let mut q = Vec::new();
    let mut p = Vec::new();
    for (row, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(format!("row {row}: expected 3 fields, found {}", fields.len()));
        }
        let k: i64 = fields[0]
            .parse()
            .map_err(|e| format!("row {row}: bad index: {e}"))?;
        match start {
            None => {
                start = Some(k);
                if !fields[1].is_empty() {
                    return Err(format!("row {row}: first row must leave p empty"));
                }
            }
            Some(s) => {
                if k != s + q.len() as i64 {
                    return Err(format!("row {row}: non-contiguous site index {k}"));
                }
                p.push(
                    fields[1]
                        .parse()
                        .map_err(|e| format!("row {row}: bad coupling: {e}"))?,
                );
            }
        }
        q.push(
            fields[2]
                .parse()
                .map_err(|e| format!("row {row}: bad diagonal: {e}"))?,
        );
    }
    let start = start.ok_or_else(|| format!("{}: no data rows", path.display()))?;
    JacobiWindow::new(start, q, p).map_err(|e| format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trips_exactly() {
        let j = JacobiWindow::new(
            -2,
            vec![0.1, -0.25, 1.0 / 3.0, std::f64::consts::PI],
            vec![11.477225575051661, 0.5227744249483388, 2.0f64.sqrt()],
        )
        .unwrap();
        let dir = std::env::temp_dir().join(format!("coeffs-test-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("coefficients.csv");
        write_atomic(&path, &coefficients_csv(&j)).unwrap();
        let back = read_coefficients_csv(&path).unwrap();
        assert_eq!(back.start(), j.start());
        assert_eq!(back.q_slice(), j.q_slice());
        assert_eq!(back.p_slice(), j.p_slice());
        fs::remove_dir_all(&dir).ok();
    }
}
