//! Serialization helpers: non-finite floats as strings, 17-digit CSV
//! fields, atomic file writes.

use std::io::Write;
use std::path::Path;

use serde::Serializer;

use crate::error::Result;
use crate::special::fmt_sig17;

/// Serializes `±∞` and NaN as the strings `"inf"`, `"-inf"`, `"nan"`.
pub fn ser_f64<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        s.serialize_f64(*x)
    } else {
        s.serialize_str(&fmt_sig17(*x))
    }
}

pub fn ser_f64_vec<S: Serializer>(xs: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeSeq;
    let mut seq = s.serialize_seq(Some(xs.len()))?;
    for x in xs {
        if x.is_finite() {
            seq.serialize_element(x)?;
        } else {
            seq.serialize_element(&fmt_sig17(*x))?;
        }
    }
    seq.end()
}

/// CSV text with a header line and rows of 17-significant-digit numbers.
pub fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let fields: Vec<String> = row.iter().map(|&v| fmt_sig17(v)).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| crate::error::Error::Io(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_fields_round_trip() {
        let s = csv_string(&["y", "rate"], vec![vec![0.1, 1.0 / 3.0], vec![0.5, f64::INFINITY]]);
        let lines: Vec<&str> = s.lines().collect();
        assert_eq!(lines[0], "y,rate");
        let v: Vec<f64> = lines[1].split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(v, vec![0.1, 1.0 / 3.0]);
        assert!(lines[2].ends_with(",inf"));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.csv");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
    }
}
