//! Residual reports, tolerance tiers and refinement orders.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Strict,
    Default,
    Coarse,
}

impl Tier {
    pub fn tol(self) -> f64 {
        match self {
            Tier::Strict => 1e-8,
            Tier::Default => 1e-4,
            Tier::Coarse => 1e-2,
        }
    }
}

impl std::fmt::Display for Tier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Tier::Strict => "strict",
            Tier::Default => "default",
            Tier::Coarse => "coarse",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub check: String,
    pub max_residual: f64,
    /// `max_residual / max(1, scale)`.
    pub rel_residual: f64,
    /// Largest reference norm seen.
    pub scale: f64,
    pub argmax: Vec<f64>,
    pub points: usize,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refinement_order: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub parts: Vec<ResidualReport>,
}

impl ResidualReport {
    /// Report made of sub-reports; passes when all parts pass.
    pub fn combine(check: &str, parts: Vec<ResidualReport>) -> Self {
        let mut acc = Residuals::new();
        for p in &parts {
            acc.record(&p.argmax, p.max_residual, p.scale);
        }
        let mut r = acc.finish(check, parts.iter().map(|p| p.tolerance).fold(0.0, f64::max));
        r.pass = parts.iter().all(|p| p.pass);
        r.points = parts.iter().map(|p| p.points).sum();
        r.parts = parts;
        r
    }

    pub fn with_grid(mut self, g: impl ToString) -> Self {
        self.grid = Some(g.to_string());
        self
    }

    pub fn with_order(mut self, order: f64) -> Self {
        self.refinement_order = Some(order);
        self
    }

    pub fn note(mut self, s: impl Into<String>) -> Self {
        self.notes.push(s.into());
        self
    }

    /// Re-judges against a new tolerance on the relative residual.
    pub fn judged(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self.pass = self.rel_residual <= tol && self.rel_residual.is_finite();
        self
    }

    /// Judges the absolute residual instead of the scaled one.
    pub fn judged_abs(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self.pass = self.max_residual <= tol && self.max_residual.is_finite();
        self
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))
    }
}

/// Max-reduction of residuals over sample points.
#[derive(Debug, Clone, Default)]
pub struct Residuals {
    max: f64,
    arg: Vec<f64>,
    scale: f64,
    points: usize,
    nan: bool,
}

impl Residuals {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, at: &[f64], residual: f64, reference: f64) {
        self.points += 1;
        if !residual.is_finite() {
            self.nan = true;
            if self.max.is_finite() {
                self.max = f64::INFINITY;
                self.arg = at.to_vec();
            }
            return;
        }
        if residual > self.max || self.arg.is_empty() {
            self.max = residual;
            self.arg = at.to_vec();
        }
        if reference.is_finite() {
            self.scale = self.scale.max(reference);
        }
    }

    pub fn merge(&mut self, other: Residuals) {
        if other.max > self.max || (self.arg.is_empty() && !other.arg.is_empty()) {
            self.max = self.max.max(other.max);
            self.arg = other.arg;
        }
        self.scale = self.scale.max(other.scale);
        self.points += other.points;
        self.nan |= other.nan;
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn finish(self, check: &str, tol: f64) -> ResidualReport {
        let rel = self.max / self.scale.max(1.0);
        ResidualReport {
            check: check.to_string(),
            max_residual: self.max,
            rel_residual: rel,
            scale: self.scale,
            argmax: self.arg,
            points: self.points,
            tolerance: tol,
            pass: !self.nan && rel <= tol,
            grid: None,
            refinement_order: None,
            notes: Vec::new(),
            parts: Vec::new(),
        }
    }
}

/// Empirical order from errors at steps `h` and `h/ratio`.
pub fn refinement_order(coarse: f64, fine: f64, ratio: f64) -> f64 {
    if fine == 0.0 {
        return f64::INFINITY;
    }
    (coarse / fine).ln() / ratio.ln()
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.to_string()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn max_reduction_keeps_argmax() {
        let mut r = Residuals::new();
        r.record(&[1.0], 0.1, 2.0);
        r.record(&[2.0], 0.3, 1.0);
        r.record(&[3.0], 0.2, 5.0);
        let rep = r.finish("x", 0.1);
        assert_eq!(rep.argmax, vec![2.0]);
        assert!((rep.rel_residual - 0.06).abs() < 1e-15);
        assert!(rep.pass);
    }

    #[test]
    fn nan_fails() {
        let mut r = Residuals::new();
        r.record(&[1.0], f64::NAN, 1.0);
        assert!(!r.finish("x", 1.0).pass);
    }

    #[test]
    fn order_of_second_order_errors() {
        assert!((refinement_order(4e-4, 1e-4, 2.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn atomic_write_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.json");
        let rep = Residuals::new().finish("x", 1.0);
        write_atomic(&p, &rep.to_json().unwrap()).unwrap();
        let back: ResidualReport = serde_json::from_str(&std::fs::read_to_string(&p).unwrap()).unwrap();
        assert_eq!(back, rep);
    }
}
