//! Reciprocal Gamma and the two-parameter Mittag-Leffler function for scalar
//! and matrix arguments.

use crate::error::{Error, Result};
use crate::mat::{self, CMat};
use crate::C64;
use std::f64::consts::PI;

/// `1/Γ(x)`, exactly zero at the poles `0, -1, -2, …`.
pub fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return 0.0;
    }
    if x > 0.0 {
        if x == x.floor() && x <= 21.0 {
            let mut f = 1.0;
            for k in 2..x as u32 {
                f *= k as f64;
            }
            return 1.0 / f;
        }
        if x > 170.0 {
            return (-libm::lgamma(x)).exp();
        }
        return 1.0 / libm::tgamma(x);
    }
    // reflection
    let g = if 1.0 - x > 170.0 {
        libm::lgamma(1.0 - x).exp()
    } else {
        libm::tgamma(1.0 - x)
    };
    g * (PI * x).sin() / PI
}

pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// `ln |Γ(x)|`.
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// Beta function for positive arguments.
pub fn beta(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlParams {
    pub alpha: f64,
    pub beta: f64,
}

impl MlParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0) || !(beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
            return Err(Error::DomainError(format!(
                "Mittag-Leffler parameters need alpha>0, beta>0 (got {alpha}, {beta})"
            )));
        }
        Ok(Self { alpha, beta })
    }

    /// Series radius below which the power series is the first choice.
    pub fn r0(&self) -> f64 {
        5.0 + 10.0 * self.alpha
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlRegime {
    Series,
    Asymptotic,
    /// Power series in multiple-precision arithmetic.
    ExtendedSeries,
}

#[derive(Debug, Clone, Copy)]
pub struct MlValue {
    pub value: C64,
    /// Absolute error estimate.
    pub err: f64,
    pub regime: MlRegime,
    /// Set when neither regime reaches relative accuracy 1e-10.
    pub precision_loss: bool,
}

const CERT: f64 = 1e-10;

fn rel(err: f64, v: C64) -> f64 {
    err / v.norm().max(f64::MIN_POSITIVE)
}

fn ml_series(p: MlParams, z: C64) -> (C64, f64) {
    if z == C64::new(0.0, 0.0) {
        return (C64::new(rgamma(p.beta), 0.0), 0.0);
    }
    let lz = z.ln();
    let mut sum = C64::new(0.0, 0.0);
    let mut abs_sum = 0.0;
    let mut prev = f64::INFINITY;
    for n in 0..20_000usize {
        let nf = n as f64;
        let arg = p.alpha * nf + p.beta;
        let term = (lz * nf - ln_gamma(arg)).exp();
        let m = term.norm();
        sum += term;
        abs_sum += m;
        let decreasing = m <= prev;
        prev = m;
        if n > 2 && decreasing && m <= 1e-17 * sum.norm().max(abs_sum * 1e-300) {
            break;
        }
        if !m.is_finite() {
            return (sum, f64::INFINITY);
        }
    }
    (sum, 16.0 * f64::EPSILON * abs_sum + 1e-300)
}

fn ml_asymptotic(p: MlParams, z: C64) -> (C64, f64) {
    // E_{1,m} and E_{2,m} are finite sums of exponentials and powers
    let exact = (p.alpha == 1.0 || p.alpha == 2.0) && p.beta.fract() == 0.0;
    let r = z.norm();
    let th = z.arg();
    let ra = r.powf(1.0 / p.alpha);
    let mut sum = C64::new(0.0, 0.0);
    let mut neglected = 0.0f64;
    for k in -4i32..=4 {
        let phi = th + 2.0 * PI * k as f64;
        let zeta = C64::from_polar(ra, phi / p.alpha);
        let lim = p.alpha * PI;
        let mag = |z: C64| (z.ln() * (1.0 - p.beta) + z).exp().norm();
        if phi.abs() < lim * (1.0 - 1e-12) {
            sum += (zeta.ln() * (1.0 - p.beta) + zeta).exp();
        } else if (phi.abs() - lim).abs() <= lim * 1e-12 {
            sum += (zeta.ln() * (1.0 - p.beta) + zeta).exp() * 0.5;
        } else if phi.abs() < lim * 1.1 && !exact {
            // just past the boundary the dropped branch is exponentially small
            neglected = neglected.max(mag(zeta));
        }
    }
    sum /= p.alpha;
    // algebraic tail, cut at its smallest term
    let mut tail = C64::new(0.0, 0.0);
    let zinv = z.inv();
    let mut zp = C64::new(1.0, 0.0);
    let mut last = f64::INFINITY;
    for j in 1..400usize {
        zp *= zinv;
        let g = rgamma(p.beta - p.alpha * j as f64);
        let term = zp * g;
        let m = term.norm();
        if g != 0.0 && m > last {
            break;
        }
        tail += term;
        if g != 0.0 {
            last = m;
        }
        if g != 0.0 && m < 1e-18 * (sum.norm() + tail.norm()) {
            last = m;
            break;
        }
    }
    if last == f64::INFINITY {
        // every tail coefficient vanished
        last = 0.0;
    }
    let v = sum - tail;
    let err = last + neglected / p.alpha + 4.0 * f64::EPSILON * v.norm();
    (v, err)
}

/// `E_{α,β}(z) = Σ zⁿ/Γ(αn+β)`.
pub fn ml(p: MlParams, z: C64) -> MlValue {
    let series = |z| {
        let (v, e) = ml_series(p, z);
        MlValue { value: v, err: e, regime: MlRegime::Series, precision_loss: false }
    };
    let asym = |z| {
        let (v, e) = ml_asymptotic(p, z);
        MlValue { value: v, err: e, regime: MlRegime::Asymptotic, precision_loss: false }
    };
    let (first, second): (MlValue, Option<MlValue>) = if z.norm() <= p.r0() {
        let s = series(z);
        if rel(s.err, s.value) <= TARGET {
            (s, None)
        } else {
            (s, Some(asym(z)))
        }
    } else {
        let a = asym(z);
        if rel(a.err, a.value) <= TARGET {
            (a, None)
        } else {
            (a, Some(series(z)))
        }
    };
    let mut best = match second {
        Some(b) if b.err.is_finite() && (b.err < first.err || !first.err.is_finite()) => b,
        _ => first,
    };
    if !(rel(best.err, best.value) <= TARGET) && best.err > 1e-15 {
        if let Some((v, e)) = ml_series_mp(p, z) {
            if e < best.err || !best.err.is_finite() {
                best = MlValue { value: v, err: e, regime: MlRegime::ExtendedSeries, precision_loss: false };
            }
        }
    }
    best.precision_loss = !(rel(best.err, best.value) <= CERT) && best.err > 1e-14;
    best
}

/// Accuracy below which the extended series is tried.
const TARGET: f64 = 1e-13;

/// Largest working precision of the extended series, in bits.
const MP_MAX_BITS: u32 = 4096;

/// Power series in MPFR arithmetic, with the precision raised until the
/// cancellation is covered. `None` when even `MP_MAX_BITS` do not suffice.
fn ml_series_mp(p: MlParams, z: C64) -> Option<(C64, f64)> {
    let mut bits = 128u32;
    while bits <= MP_MAX_BITS {
        if let Some((v, abs_sum, tail)) = mp_series_at(p, z, bits) {
            let err = abs_sum * 2f64.powi(-(bits as i32) + 8) + tail;
            if err <= 1e-14 * v.norm() || err <= 1e-17 || (bits == MP_MAX_BITS && err.is_finite()) {
                return Some((v, err));
            }
            // precision needed for the observed cancellation, with margin
            let need = (abs_sum / v.norm().max(f64::MIN_POSITIVE)).log2().max(0.0) as u32 + 80;
            bits = need.max(2 * bits).min(MP_MAX_BITS.max(bits + 1));
        } else {
            return None;
        }
    }
    None
}

/// Returns the sum, the sum of term moduli and the size of the last term.
fn mp_series_at(p: MlParams, z: C64, bits: u32) -> Option<(C64, f64, f64)> {
    use rug::Float;
    let f = |x: f64| Float::with_val(bits, x);
    let (zr, zi) = (f(z.re), f(z.im));
    let (mut pr, mut pi) = (f(1.0), f(0.0));
    let (mut sr, mut si) = (f(0.0), f(0.0));
    let alpha = f(p.alpha);
    let beta = f(p.beta);
    let mut abs_sum = 0.0f64;
    let mut prev = f64::INFINITY;
    let eps = 2f64.powi(-(bits as i32));
    for n in 0..200_000u32 {
        let arg = Float::with_val(bits, &alpha * n) + &beta;
        let rg = arg.gamma().recip();
        let tr = Float::with_val(bits, &pr * &rg);
        let ti = Float::with_val(bits, &pi * &rg);
        let m = tr.to_f64().hypot(ti.to_f64());
        if !m.is_finite() {
            return None;
        }
        sr += &tr;
        si += &ti;
        abs_sum += m;
        let s = sr.to_f64().hypot(si.to_f64());
        if n > 2 && m <= prev && m <= eps * s.max(abs_sum * 1e-300) {
            return Some((C64::new(sr.to_f64(), si.to_f64()), abs_sum, m));
        }
        prev = m;
        // p ← p·z
        let nr = Float::with_val(bits, &pr * &zr) - Float::with_val(bits, &pi * &zi);
        let ni = Float::with_val(bits, &pr * &zi) + Float::with_val(bits, &pi * &zr);
        pr = nr;
        pi = ni;
    }
    None
}

/// Value only; convenience for closed-form families.
pub fn ml_value(alpha: f64, beta: f64, z: C64) -> C64 {
    ml(MlParams { alpha, beta }, z).value
}

/// Matrix Mittag-Leffler function.
///
/// Diagonal arguments go entrywise. Otherwise the power series is used when
/// the Gershgorin bound keeps its cancellation below 1e-10, and a Schur-Parlett
/// evaluation is used for larger spectra with separated eigenvalues.
pub fn ml_matrix(p: MlParams, m: &CMat) -> Result<CMat> {
    let d = m.nrows();
    if d != m.ncols() {
        return Err(Error::DomainError("matrix argument must be square".into()));
    }
    if mat::is_diagonal(m) {
        let mut out = CMat::zeros(d, d);
        for i in 0..d {
            let v = ml(p, m[(i, i)]);
            if v.precision_loss {
                return Err(Error::PrecisionLoss(format!("E_{{{},{}}}({})", p.alpha, p.beta, m[(i, i)])));
            }
            out[(i, i)] = v.value;
        }
        return Ok(out);
    }
    let r = mat::gershgorin_radius(m);
    let (bound, _) = ml_series(p, C64::new(r, 0.0));
    if bound.re * 1e-15 <= CERT {
        return ml_matrix_series(p, m);
    }
    ml_matrix_parlett(p, m)
}

fn ml_matrix_series(p: MlParams, m: &CMat) -> Result<CMat> {
    let d = m.nrows();
    let mut pw = mat::identity(d);
    let mut sum = pw.clone() * C64::new(rgamma(p.beta), 0.0);
    let mut prev = f64::INFINITY;
    for n in 1..5000usize {
        pw = &pw * m;
        let pn = pw.norm();
        if pn == 0.0 {
            return Ok(sum);
        }
        if !pn.is_finite() {
            return Err(Error::NonConvergent("matrix powers overflow".into()));
        }
        let c = (-ln_gamma(p.alpha * n as f64 + p.beta)).exp();
        let tn = pn * c;
        sum += &pw * C64::new(c, 0.0);
        if tn <= prev && tn <= 1e-17 * sum.norm() {
            return Ok(sum);
        }
        prev = tn;
    }
    Err(Error::NonConvergent("matrix Mittag-Leffler series".into()))
}

fn ml_matrix_parlett(p: MlParams, m: &CMat) -> Result<CMat> {
    let d = m.nrows();
    let schur = nalgebra::linalg::Schur::new(m.clone());
    let (q, t) = schur.unpack();
    let scale = 1.0 + (0..d).map(|i| t[(i, i)].norm()).fold(0.0, f64::max);
    for i in 0..d {
        for j in (i + 1)..d {
            if (t[(i, i)] - t[(j, j)]).norm() < 1e-6 * scale {
                return Err(Error::UncertifiedSpectrum(
                    "clustered eigenvalues outside the series regime".into(),
                ));
            }
        }
    }
    let mut f = CMat::zeros(d, d);
    for i in 0..d {
        let v = ml(p, t[(i, i)]);
        if v.precision_loss {
            return Err(Error::PrecisionLoss(format!("eigenvalue {}", t[(i, i)])));
        }
        f[(i, i)] = v.value;
    }
    for gap in 1..d {
        for i in 0..(d - gap) {
            let j = i + gap;
            let mut s = t[(i, j)] * (f[(j, j)] - f[(i, i)]);
            for k in (i + 1)..j {
                s += f[(i, k)] * t[(k, j)] - t[(i, k)] * f[(k, j)];
            }
            f[(i, j)] = s / (t[(j, j)] - t[(i, i)]);
        }
    }
    Ok(&q * f * q.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn reciprocal_gamma_poles() {
        assert_eq!(rgamma(0.0), 0.0);
        assert_eq!(rgamma(-3.0), 0.0);
        assert!((rgamma(0.5) - 1.0 / PI.sqrt()).abs() < 1e-15);
        // 1/Γ(-0.5) = -1/(2√π)
        assert!((rgamma(-0.5) + 0.5 / PI.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn exp_and_cosh() {
        let e = ml(MlParams::new(1.0, 1.0).unwrap(), c(1.0));
        assert!((e.value.re - std::f64::consts::E).abs() < 1e-14);
        let ch = ml(MlParams::new(2.0, 1.0).unwrap(), c(4.0));
        assert!((ch.value.re - 2f64.cosh()).abs() < 1e-13);
    }

    #[test]
    fn exp_wide_range() {
        let p = MlParams::new(1.0, 1.0).unwrap();
        for &x in &[-20.0, -7.5, -1.0, 0.3, 6.0, 14.0, 20.0] {
            let v = ml(p, c(x)).value;
            assert!(((v.re - x.exp()) / x.exp()).abs() < 1e-12, "x={x}");
        }
        let z = C64::new(3.0, 4.0);
        assert!((ml(p, z).value - z.exp()).norm() / z.exp().norm() < 1e-12);
    }

    #[test]
    fn half_order_against_erfc() {
        // E_{1/2,1}(z) = exp(z²) erfc(-z)
        let p = MlParams::new(0.5, 1.0).unwrap();
        for &x in &[-6.0f64, -3.0, -1.0, 0.5, 1.0, 2.0] {
            let want = (x * x).exp() * libm::erfc(-x);
            let got = ml(p, c(x));
            assert!((got.value.re - want).abs() <= 1e-9 * want.abs().max(1e-3), "x={x}: {} vs {want}", got.value.re);
        }
    }

    #[test]
    fn matrix_cases() {
        let p = MlParams::new(1.0, 1.0).unwrap();
        let n = mat::parse_matrix("2\n0 1\n0 0").unwrap();
        let e = ml_matrix(p, &n).unwrap();
        assert!((e[(0, 1)] - c(1.0)).norm() < 1e-15 && (e[(0, 0)] - c(1.0)).norm() < 1e-15);
        let z = CMat::zeros(2, 2);
        let q = MlParams::new(0.7, 2.5).unwrap();
        let v = ml_matrix(q, &z).unwrap();
        assert!((v[(1, 1)].re - rgamma(2.5)).abs() < 1e-15);
    }

    #[test]
    fn parlett_matches_diagonalization() {
        let p = MlParams::new(0.5, 0.5).unwrap();
        // V diag(-1,-30) V^{-1} with V = [[1,1],[0,1]]
        let a = mat::parse_matrix("2\n-1 29\n0 -30").unwrap();
        let f = ml_matrix_parlett(p, &a).unwrap();
        let l1 = ml(p, c(-1.0)).value;
        let l2 = ml(p, c(-30.0)).value;
        let want01 = (l2 - l1) * 29.0 / (-29.0);
        assert!((f[(0, 0)] - l1).norm() < 1e-9);
        assert!((f[(1, 1)] - l2).norm() < 1e-9);
        assert!((f[(0, 1)] - want01).norm() < 1e-8);
    }
}
