//! Complex matrix helpers and the plain-text matrix formats.

use crate::error::{Error, Result};
use crate::C64;
use nalgebra::DMatrix;

pub type CMat = DMatrix<C64>;

pub fn identity(d: usize) -> CMat {
    CMat::identity(d, d)
}

/// Operator 2-norm, i.e. the largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    if m.nrows() == 1 && m.ncols() == 1 {
        return m[(0, 0)].norm();
    }
    m.clone()
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn is_diagonal(m: &CMat) -> bool {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if i != j && m[(i, j)] != C64::new(0.0, 0.0) {
                return false;
            }
        }
    }
    true
}

/// Gershgorin bound on the spectral radius.
pub fn gershgorin_radius(m: &CMat) -> f64 {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn from_flat(d: usize, data: &[C64]) -> CMat {
    CMat::from_row_slice(d, d, data)
}

pub fn to_flat(m: &CMat) -> Vec<C64> {
    let d = m.nrows();
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            out.push(m[(i, j)]);
        }
    }
    out
}

/// Parses `a`, `bi`, `a+bi`, `a-bi`, `i`, `-i` (also with `j`).
pub fn parse_complex(s: &str) -> Result<C64> {
    let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
    if t.is_empty() {
        return Err(Error::Parse("empty complex literal".into()));
    }
    let bad = || Error::Parse(format!("bad complex literal `{s}`"));
    let num = |x: &str| x.parse::<f64>().map_err(|_| bad());
    if !(t.ends_with('i') || t.ends_with('j')) {
        return Ok(C64::new(num(&t)?, 0.0));
    }
    let body = &t[..t.len() - 1];
    let bytes = body.as_bytes();
    let mut split = None;
    for k in (1..bytes.len()).rev() {
        let c = bytes[k];
        if (c == b'+' || c == b'-') && !matches!(bytes[k - 1], b'e' | b'E') {
            split = Some(k);
            break;
        }
    }
    let (re, im) = match split {
        Some(k) => (num(&body[..k])?, &body[k..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        x => num(x)?,
    };
    Ok(C64::new(re, im))
}

pub fn format_complex(z: C64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else {
        format!("{}{:+}i", z.re, z.im)
    }
}

/// Reads a generator: first line `d` then `d` rows, or `diag` then entries.
pub fn parse_matrix(text: &str) -> Result<CMat> {
    let mut lines = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty());
    let head = lines
        .next()
        .ok_or_else(|| Error::Parse("empty generator file".into()))?;
    if let Some(rest) = head.strip_prefix("diag") {
        let mut vals = Vec::new();
        for tok in rest.split_whitespace().chain(lines.flat_map(|l| l.split_whitespace())) {
            vals.push(parse_complex(tok)?);
        }
        if vals.is_empty() {
            return Err(Error::Parse("diag generator without entries".into()));
        }
        let d = vals.len();
        let mut m = CMat::zeros(d, d);
        for (i, v) in vals.into_iter().enumerate() {
            m[(i, i)] = v;
        }
        return Ok(m);
    }
    let d: usize = head
        .parse()
        .map_err(|_| Error::Parse(format!("expected dimension, found `{head}`")))?;
    if d == 0 {
        return Err(Error::Parse("dimension must be positive".into()));
    }
    let mut m = CMat::zeros(d, d);
    for i in 0..d {
        let row = lines
            .next()
            .ok_or_else(|| Error::Parse(format!("missing row {}", i + 1)))?;
        let toks: Vec<&str> = row.split_whitespace().collect();
        if toks.len() != d {
            return Err(Error::Parse(format!(
                "row {} has {} entries, expected {d}",
                i + 1,
                toks.len()
            )));
        }
        for (j, tok) in toks.iter().enumerate() {
            m[(i, j)] = parse_complex(tok)?;
        }
    }
    Ok(m)
}

pub fn format_matrix(m: &CMat) -> String {
    let mut s = format!("{}\n", m.nrows());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| format_complex(m[(i, j)])).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_literals() {
        assert_eq!(parse_complex("1+2i").unwrap(), C64::new(1.0, 2.0));
        assert_eq!(parse_complex("-1.5-2i").unwrap(), C64::new(-1.5, -2.0));
        assert_eq!(parse_complex("2i").unwrap(), C64::new(0.0, 2.0));
        assert_eq!(parse_complex("-i").unwrap(), C64::new(0.0, -1.0));
        assert_eq!(parse_complex("3").unwrap(), C64::new(3.0, 0.0));
        assert_eq!(parse_complex("1e-3+2e-2i").unwrap(), C64::new(1e-3, 2e-2));
        assert!(parse_complex("x").is_err());
    }

    #[test]
    fn roundtrip_complex() {
        for z in [C64::new(1.25, -3.5), C64::new(-0.1, 0.0), C64::new(0.0, 7.0)] {
            assert_eq!(parse_complex(&format_complex(z)).unwrap(), z);
        }
    }

    #[test]
    fn matrix_files() {
        let m = parse_matrix("2\n0 1\n0 0\n").unwrap();
        assert_eq!(m[(0, 1)], C64::new(1.0, 0.0));
        let d = parse_matrix("diag -1 -2").unwrap();
        assert_eq!(d[(1, 1)], C64::new(-2.0, 0.0));
        assert!(is_diagonal(&d));
        assert_eq!(parse_matrix(&format_matrix(&m)).unwrap(), m);
        assert!(parse_matrix("2\n0 1\n").is_err());
    }

    #[test]
    fn norm_is_largest_singular_value() {
        let m = parse_matrix("2\n3 0\n0 -4i\n").unwrap();
        assert!((op_norm(&m) - 4.0).abs() < 1e-12);
    }
}
