//! Received-signal files.
//!
//! Text: a header line `N T`, then `N` lines of `T` whitespace-separated
//! `re,im` pairs. Lines starting with `#` are comments.
//!
//! Binary: `u32` LE `N`, `u32` LE `T`, then `N * T` pairs of `f64` LE
//! `(re, im)`, row-major by antenna.

use std::io::{BufRead, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{JacError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignalFormat {
    Text,
    Binary,
}

impl SignalFormat {
    /// `.bin` selects binary, anything else text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("bin") => SignalFormat::Binary,
            _ => SignalFormat::Text,
        }
    }
}

pub fn write_text<W: Write>(mut w: W, y: &DMatrix<Complex64>, comments: &[String]) -> Result<()> {
    for c in comments {
        writeln!(w, "# {c}")?;
    }
    writeln!(w, "{} {}", y.nrows(), y.ncols())?;
    for i in 0..y.nrows() {
        let row: Vec<String> = (0..y.ncols())
            .map(|t| format!("{:e},{:e}", y[(i, t)].re, y[(i, t)].im))
            .collect();
        writeln!(w, "{}", row.join(" "))?;
    }
    Ok(())
}

fn parse_dims(line: &str) -> Result<(usize, usize)> {
    let mut it = line.split_whitespace().map(|s| s.parse::<usize>());
    match (it.next(), it.next(), it.next()) {
        (Some(Ok(n)), Some(Ok(t)), None) if n > 0 && t > 0 => Ok((n, t)),
        _ => Err(JacError::Format(format!("bad header line {line:?}, expected `N T`"))),
    }
}

pub fn read_text<R: BufRead>(r: R) -> Result<DMatrix<Complex64>> {
    let mut lines = r
        .lines()
        .filter(|l| l.as_ref().map(|s| !s.trim().is_empty() && !s.trim_start().starts_with('#')).unwrap_or(true));
    let header = lines.next().ok_or_else(|| JacError::Format("empty signal file".into()))??;
    let (n, t) = parse_dims(&header)?;
    let mut data = DMatrix::<Complex64>::zeros(n, t);
    for i in 0..n {
        let line = lines
            .next()
            .ok_or_else(|| JacError::Format(format!("expected {n} rows, found {i}")))??;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != t {
            return Err(JacError::Format(format!("row {} has {} entries, expected {t}", i + 1, fields.len())));
        }
        for (j, f) in fields.iter().enumerate() {
            let (re, im) = f
                .split_once(',')
                .ok_or_else(|| JacError::Format(format!("entry {f:?} is not `re,im`")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| JacError::Format(format!("invalid number {s:?}")))
            };
            data[(i, j)] = Complex64::new(parse(re)?, parse(im)?);
        }
    }
    if lines.next().is_some() {
        return Err(JacError::Format(format!("more than {n} rows")));
    }
    Ok(data)
}

pub fn write_binary<W: Write>(mut w: W, y: &DMatrix<Complex64>) -> Result<()> {
    let dim = |v: usize| u32::try_from(v).map_err(|_| JacError::Format(format!("dimension {v} too large")));
    w.write_all(&dim(y.nrows())?.to_le_bytes())?;
    w.write_all(&dim(y.ncols())?.to_le_bytes())?;
    for i in 0..y.nrows() {
        for t in 0..y.ncols() {
            w.write_all(&y[(i, t)].re.to_le_bytes())?;
            w.write_all(&y[(i, t)].im.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_binary<R: Read>(mut r: R) -> Result<DMatrix<Complex64>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() < 8 {
        return Err(JacError::Format("binary header truncated".into()));
    }
    let n = u32::from_le_bytes(buf[0..4].try_into().unwrap()) as usize;
    let t = u32::from_le_bytes(buf[4..8].try_into().unwrap()) as usize;
    if n == 0 || t == 0 {
        return Err(JacError::Format(format!("invalid dimensions {n} x {t}")));
    }
    let expected = n
        .checked_mul(t)
        .and_then(|v| v.checked_mul(16))
        .and_then(|v| v.checked_add(8))
        .ok_or_else(|| JacError::Format("dimensions overflow".into()))?;
    if buf.len() != expected {
        return Err(JacError::Format(format!("expected {expected} bytes, found {}", buf.len())));
    }
    let f = |k: usize| f64::from_le_bytes(buf[8 + 8 * k..16 + 8 * k].try_into().unwrap());
    Ok(DMatrix::from_fn(n, t, |i, j| {
        let k = 2 * (i * t + j);
        Complex64::new(f(k), f(k + 1))
    }))
}

pub fn read_signal(path: &Path, format: SignalFormat) -> Result<DMatrix<Complex64>> {
    let file = std::fs::File::open(path)?;
    match format {
        SignalFormat::Text => read_text(std::io::BufReader::new(file)),
        SignalFormat::Binary => read_binary(std::io::BufReader::new(file)),
    }
}

pub fn write_signal(path: &Path, format: SignalFormat, y: &DMatrix<Complex64>, comments: &[String]) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    match format {
        SignalFormat::Text => write_text(&mut w, y, comments)?,
        SignalFormat::Binary => write_binary(&mut w, y)?,
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DMatrix<Complex64> {
        DMatrix::from_fn(3, 2, |i, t| Complex64::new(i as f64 * 0.1 + 1e-17, -(t as f64) / 3.0))
    }

    #[test]
    fn text_round_trip_is_exact() {
        let y = sample();
        let mut buf = Vec::new();
        write_text(&mut buf, &y, &["seed=1".into()]).unwrap();
        assert_eq!(read_text(buf.as_slice()).unwrap(), y);
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let y = sample();
        let mut buf = Vec::new();
        write_binary(&mut buf, &y).unwrap();
        assert_eq!(buf.len(), 8 + 6 * 16);
        assert_eq!(&buf[0..4], &3u32.to_le_bytes());
        assert_eq!(read_binary(buf.as_slice()).unwrap(), y);
    }

    #[test]
    fn malformed_inputs() {
        assert!(read_text("".as_bytes()).is_err());
        assert!(read_text("2 1\n1,0\n".as_bytes()).is_err());
        assert!(read_text("1 2\n1,0\n".as_bytes()).is_err());
        assert!(read_text("1 1\n1;0\n".as_bytes()).is_err());
        assert!(read_text("1 1\nx,0\n".as_bytes()).is_err());
        assert!(read_text("1 1\n1,0\n2,0\n".as_bytes()).is_err());
        assert!(read_binary([1u8, 0, 0, 0, 1, 0, 0, 0].as_slice()).is_err());
        assert!(read_binary([0u8; 3].as_slice()).is_err());
    }

    #[test]
    fn format_from_extension() {
        assert_eq!(SignalFormat::from_path(Path::new("a.bin")), SignalFormat::Binary);
        assert_eq!(SignalFormat::from_path(Path::new("a.txt")), SignalFormat::Text);
        assert_eq!(SignalFormat::from_path(Path::new("a")), SignalFormat::Text);
    }
}
