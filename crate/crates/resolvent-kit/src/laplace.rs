//! Numeric one- and two-variable Laplace transforms and the transform
//! identity checks, including the inversion identity
//! `a⁺ = −((c′)⁺ ∗₂ (a⊗a))` for `a∗c = 1`.
//!
//! Derivative lifts `(c′)^±` are never sampled: integration by parts moves
//! the derivative onto the exponential weight.

use crate::bivar::{self, BivarField, Source};
use crate::error::{Error, Result};
use crate::kernels::{conv1, Grid, Kernel};
use crate::quad::{self, Sampled};
use crate::report::{refinement_order, ResidualReport, Residuals};
use crate::special::rgamma;
use crate::C64;
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use std::fmt;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    pub value: C64,
    /// Bound on the neglected tail `∫_{T_max}^∞`.
    pub truncation: f64,
    pub t_max: f64,
}

/// `max(40/Re λ, 10·t)`.
pub fn default_t_max(l: C64, t: f64) -> f64 {
    (40.0 / l.re).max(10.0 * t)
}

fn check_abscissa(k: &Kernel, l: C64) -> Result<()> {
    let w = k.abscissa();
    if !(l.re > w) {
        return Err(Error::AbscissaViolation(format!(
            "Re λ = {} must exceed ω = {w} for {k}",
            l.re
        )));
    }
    Ok(())
}

/// `∫₀^{t_max} k(u) φ(u) du` for a pointwise kernel; panels are graded
/// dyadically towards the origin.
pub fn integrate_kernel(k: &Kernel, phi: &(dyn Fn(f64) -> C64 + Sync), t_max: f64, rate: f64) -> Result<C64> {
    let g = k.singularity_exponent();
    if g <= -1.0 {
        return Err(Error::NotIntegrable(k.to_string()));
    }
    if !k.is_evaluable() {
        return Err(Error::NonEvaluable(k.to_string()));
    }
    let (gx, gw) = quad::gl01(12);
    let panel = |a: f64, b: f64| -> Result<C64> {
        let mut s = ZERO;
        for (x, w) in gx.iter().zip(&gw) {
            let u = a + (b - a) * x;
            s += k.eval(u)? * phi(u) * (w * (b - a));
        }
        Ok(s)
    };
    let pw = (1.0 / rate.max(1.0)).min(t_max);
    let mut total = ZERO;
    let mut hi = pw;
    for _ in 0..60 {
        total += panel(hi / 2.0, hi)?;
        hi /= 2.0;
    }
    total += k.leading_coefficient() * phi(0.0) * hi.powf(g + 1.0) / (g + 1.0);
    let np = ((t_max - pw) / pw).ceil().max(0.0) as usize;
    let rest: Vec<C64> = (0..np)
        .into_par_iter()
        .map(|j| {
            let a = pw + j as f64 * pw;
            panel(a, (a + pw).min(t_max))
        })
        .collect::<Result<_>>()?;
    Ok(total + rest.into_iter().sum::<C64>())
}

fn tail_bound(k: &Kernel, re: f64, t_max: f64) -> f64 {
    let v = k.eval(t_max).map(|z| z.norm()).unwrap_or(f64::INFINITY);
    v * (-re * t_max).exp() / re.max(1e-300)
}

/// `∫₀^{T_max} e^{−λt} k(t) dt`.
pub fn laplace1(k: &Kernel, l: C64, t_max: Option<f64>) -> Result<Transform> {
    check_abscissa(k, l)?;
    let tm = t_max.unwrap_or_else(|| default_t_max(l - k.abscissa().max(0.0), 1.0));
    let value = integrate_kernel(k, &|u| (-l * u).exp(), tm, l.norm())?;
    Ok(Transform { value, truncation: tail_bound(k, l.re - k.abscissa().max(0.0), tm), t_max: tm })
}

/// `∫₀^{n h} s(t) φ(t) dt` by product integration with the power weight
/// kept exact; returns the flattened `d×d` block.
pub fn integrate_sampled(s: &Sampled, phi: &(dyn Fn(f64) -> C64 + Sync)) -> Result<Vec<C64>> {
    if s.gamma <= -1.0 {
        return Err(Error::NotIntegrable(format!("weight exponent {}", s.gamma)));
    }
    let dd = s.dd();
    let h = s.h;
    let g = s.gamma;
    let (gx, gw) = quad::gl01(20);
    let mut out = vec![ZERO; dd];
    for j in 0..s.n {
        let (mut wl, mut wr) = (ZERO, ZERO);
        if j == 0 {
            // t = h·y^{1/(γ+1)} absorbs the weight
            let e = 1.0 / (g + 1.0);
            for (y, w) in gx.iter().zip(&gw) {
                let x = y.powf(e);
                let f = phi(h * x) * (w * h.powf(g + 1.0) * e);
                wl += f * (1.0 - x);
                wr += f * x;
            }
        } else {
            for (x, w) in gx.iter().zip(&gw) {
                let t = (j as f64 + x) * h;
                let f = phi(t) * (w * h * t.powf(g));
                wl += f * (1.0 - x);
                wr += f * x;
            }
        }
        for k in 0..dd {
            out[k] += wl * s.psi(j)[k] + wr * s.psi(j + 1)[k];
        }
    }
    Ok(out)
}

/// Transform of sampled values over `(0, n h]`.
pub fn laplace1_sampled(s: &Sampled, l: C64) -> Result<Vec<C64>> {
    integrate_sampled(s, &|t| (-l * t).exp())
}

/// `(e^{−μu} − e^{−λu})/(λ−μ)`, the diagonal kernel of a sum lift.
fn phi_plus(l: C64, m: C64) -> impl Fn(f64) -> C64 + Sync {
    move |u: f64| {
        if (l - m).norm() < 1e-12 * (1.0 + l.norm()) {
            u * (-l * u).exp()
        } else {
            ((-m * u).exp() - (-l * u).exp()) / (l - m)
        }
    }
}

/// `(e^{−λu} + e^{−μu})/(λ+μ)`, the diagonal kernel of a difference lift.
fn phi_minus(l: C64, m: C64) -> impl Fn(f64) -> C64 + Sync {
    move |u: f64| ((-l * u).exp() + (-m * u).exp()) / (l + m)
}

fn source_kernel(s: &Source) -> Result<&Kernel> {
    match s {
        Source::Kernel(k) => Ok(k),
        Source::Sampled(_) => Err(Error::NonEvaluable("sampled source".into())),
    }
}

/// Double transform `∫∫ e^{−λt−μs} F(t,s) ds dt`, reduced to one-variable
/// integrals for sum, difference and tensor fields.
pub fn laplace2(f: &BivarField, l: C64, m: C64, t_max: Option<f64>) -> Result<Transform> {
    let rate = l.norm().max(m.norm());
    match f {
        BivarField::Tensor(a, b) => match (a, b) {
            (Source::Kernel(a), Source::Kernel(b)) => {
                let x = laplace1(a, l, t_max)?;
                let y = laplace1(b, m, t_max)?;
                Ok(Transform {
                    value: x.value * y.value,
                    truncation: x.truncation * y.value.norm() + y.truncation * x.value.norm(),
                    t_max: x.t_max.min(y.t_max),
                })
            }
            (a, b) => {
                let (sa, sb) = (sampled(a)?, sampled(b)?);
                let x = laplace1_sampled(sa, l)?;
                let y = laplace1_sampled(sb, m)?;
                Ok(Transform { value: x[0] * y[0], truncation: f64::NAN, t_max: sa.h * sa.n as f64 })
            }
        },
        BivarField::Plus(src) | BivarField::Minus(src) => {
            let minus = matches!(f, BivarField::Minus(_));
            if minus && !((l + m).re > 0.0) {
                return Err(Error::AbscissaViolation("Re(λ+μ) must be positive".into()));
            }
            let phi: Box<dyn Fn(f64) -> C64 + Sync> =
                if minus { Box::new(phi_minus(l, m)) } else { Box::new(phi_plus(l, m)) };
            match src {
                Source::Kernel(k) => {
                    check_abscissa(k, l)?;
                    check_abscissa(k, m)?;
                    let re = l.re.min(m.re) - k.abscissa().max(0.0);
                    let tm = t_max.unwrap_or_else(|| default_t_max(C64::new(re, 0.0), 1.0));
                    let value = integrate_kernel(k, phi.as_ref(), tm, rate)?;
                    Ok(Transform { value, truncation: tail_bound(k, re, tm) * tm, t_max: tm })
                }
                Source::Sampled(s) => {
                    let v = integrate_sampled(s, phi.as_ref())?;
                    Ok(Transform { value: v[0], truncation: f64::NAN, t_max: s.h * s.n as f64 })
                }
            }
        }
        BivarField::Tabulated2D(tab) => {
            // product trapezoid over the table
            let mut acc = ZERO;
            for i in 0..=tab.nt {
                for j in 0..=tab.ns {
                    let wi = if i == 0 || i == tab.nt { 0.5 } else { 1.0 };
                    let wj = if j == 0 || j == tab.ns { 0.5 } else { 1.0 };
                    let (t, s) = (i as f64 * tab.h, j as f64 * tab.h);
                    acc += tab.at(i, j)[0] * (-l * t - m * s).exp() * (wi * wj * tab.h * tab.h);
                }
            }
            Ok(Transform { value: acc, truncation: f64::NAN, t_max: tab.h * tab.nt.min(tab.ns) as f64 })
        }
    }
}

fn sampled(s: &Source) -> Result<&Sampled> {
    match s {
        Source::Sampled(s) => Ok(s),
        Source::Kernel(k) => Err(Error::NonEvaluable(format!("expected samples, got {k}"))),
    }
}

/// `L₂((c′)⁺)(λ,μ) = −∫ c(u) ∂ᵤφ₊(u) du`; valid whenever `c` is integrable.
pub fn laplace2_deriv_plus(c: &Kernel, l: C64, m: C64, t_max: Option<f64>) -> Result<C64> {
    check_abscissa(c, l)?;
    check_abscissa(c, m)?;
    let same = (l - m).norm() < 1e-12 * (1.0 + l.norm());
    let dphi = move |u: f64| {
        if same {
            (1.0 - l * u) * (-l * u).exp()
        } else {
            (l * (-l * u).exp() - m * (-m * u).exp()) / (l - m)
        }
    };
    let re = l.re.min(m.re) - c.abscissa().max(0.0);
    let tm = t_max.unwrap_or_else(|| default_t_max(C64::new(re, 0.0), 1.0));
    Ok(-integrate_kernel(c, &dphi, tm, l.norm().max(m.norm()))?)
}

/// `L₂((c′)⁻)(λ,μ) = −c(0⁺)φ₋(0) − ∫ c(u) ∂ᵤφ₋(u) du`; needs `c(0⁺)`.
pub fn laplace2_deriv_minus(c: &Kernel, l: C64, m: C64, t_max: Option<f64>) -> Result<C64> {
    check_abscissa(c, l)?;
    check_abscissa(c, m)?;
    if !((l + m).re > 0.0) {
        return Err(Error::AbscissaViolation("Re(λ+μ) must be positive".into()));
    }
    let c0 = c
        .value_at_zero()
        .ok_or_else(|| Error::HypothesisViolation(format!("{c} has no finite value at 0⁺")))?;
    let dphi = move |u: f64| -(l * (-l * u).exp() + m * (-m * u).exp()) / (l + m);
    let re = l.re.min(m.re) - c.abscissa().max(0.0);
    let tm = t_max.unwrap_or_else(|| default_t_max(C64::new(re, 0.0), 1.0));
    let i = integrate_kernel(c, &dphi, tm, l.norm().max(m.norm()))?;
    Ok(-c0 * 2.0 / (l + m) - i)
}

/// Gauss–Laguerre nodes and weights for `∫₀^∞ e^{−x} f(x) dx`.
pub fn gauss_laguerre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut j = DMatrix::<f64>::zeros(n, n);
    for k in 0..n {
        j[(k, k)] = (2 * k + 1) as f64;
        if k + 1 < n {
            j[(k, k + 1)] = (k + 1) as f64;
            j[(k + 1, k)] = (k + 1) as f64;
        }
    }
    let eig = SymmetricEigen::new(j);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Double transform of `F ∗₂ G` with the double convolution evaluated at
/// quadrature nodes by a graded tensor rule.
///
/// The outer integrals use `t = x²`, which makes `e^{−λt}(F∗₂G)(t,s) dt`
/// smooth in `x` when the convolution is a series in `t^{1/2}`; fields may
/// carry integrable power singularities at the edges.
pub fn laplace2_conv2(f: &BivarField, g: &BivarField, l: C64, m: C64) -> Result<C64> {
    let axis = |re: f64| -> (Vec<f64>, Vec<f64>) {
        // e^{−re·x²} < 1e−16 beyond x_max
        let xmax = (37.0 / re).sqrt();
        let (gx, gw) = quad::gl01(12);
        let panels = 2;
        let hx = xmax / panels as f64;
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for p in 0..panels {
            for (x, w) in gx.iter().zip(&gw) {
                let xi = (p as f64 + x) * hx;
                nodes.push(xi * xi);
                weights.push(2.0 * xi * w * hx);
            }
        }
        (nodes, weights)
    };
    if l.re <= 0.0 || m.re <= 0.0 {
        return Err(Error::AbscissaViolation(format!("need Re λ, Re μ > 0, got {l}, {m}")));
    }
    let (tx, tw) = axis(l.re);
    let (sx, sw) = axis(m.re);
    let mut jobs = Vec::new();
    for i in 0..tx.len() {
        for j in 0..sx.len() {
            jobs.push((i, j));
        }
    }
    let terms: Vec<C64> = jobs
        .par_iter()
        .map(|&(i, j)| -> Result<C64> {
            let (t, s) = (tx[i], sx[j]);
            let nt = t.sqrt().ceil().max(1.0) as usize;
            let ns = s.sqrt().ceil().max(1.0) as usize;
            let v = bivar::graded_conv2(f, g, t, s, nt, ns)?[0];
            Ok(v * (-l * t - m * s).exp() * (tw[i] * sw[j]))
        })
        .collect::<Result<_>>()?;
    Ok(terms.into_iter().sum())
}

/// Closed-form transform when available, numeric otherwise.
fn hat(k: &Kernel, l: C64) -> Result<C64> {
    match k.laplace(l) {
        Some(v) => Ok(v),
        None => Ok(laplace1(k, l, None)?.value),
    }
}

fn hat2(f: &BivarField, l: C64, m: C64) -> Result<C64> {
    match f {
        BivarField::Plus(s) => {
            let k = source_kernel(s)?;
            distinct(l, m)?;
            Ok((hat(k, l)? - hat(k, m)?) / (m - l))
        }
        BivarField::Minus(s) => {
            let k = source_kernel(s)?;
            Ok((hat(k, l)? + hat(k, m)?) / (l + m))
        }
        BivarField::Tensor(a, b) => Ok(hat(source_kernel(a)?, l)? * hat(source_kernel(b)?, m)?),
        BivarField::Tabulated2D(_) => Err(Error::NoClosedForm("tabulated field".into())),
    }
}

fn distinct(l: C64, m: C64) -> Result<()> {
    if (l - m).norm() <= 1e-14 * (1.0 + l.norm()) {
        return Err(Error::DegenerateRequest(format!("identity needs λ ≠ μ (both {l})")));
    }
    Ok(())
}

/// One transform identity, as `(numeric left side, closed right side)`.
#[derive(Debug, Clone, PartialEq)]
pub enum TransformCase {
    /// `L₂(f⁺) = (f̂(λ) − f̂(μ))/(μ − λ)`.
    SumLift(Kernel),
    /// `L₂(f⁻) = (f̂(λ) + f̂(μ))/(λ + μ)`.
    DifferenceLift(Kernel),
    /// `L₂(f⊗g) = f̂(λ)ĝ(μ)`.
    Tensor(Kernel, Kernel),
    /// `L₂(F∗₂G) = L₂(F)L₂(G)`.
    Product(BivarField, BivarField),
    /// `L₂((c′)⁺) = (λĉ(λ) − μĉ(μ))/(μ − λ)`.
    DerivSumLift(Kernel),
    /// `L₂((c′)⁻) = (λĉ(λ) + μĉ(μ))/(λ + μ) − 2c(0⁺)/(λ + μ)`.
    DerivDifferenceLift(Kernel),
}

impl fmt::Display for TransformCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransformCase::SumLift(k) => write!(f, "sum lift of {k}"),
            TransformCase::DifferenceLift(k) => write!(f, "difference lift of {k}"),
            TransformCase::Tensor(a, b) => write!(f, "tensor {a} x {b}"),
            TransformCase::Product(..) => write!(f, "double convolution product"),
            TransformCase::DerivSumLift(c) => write!(f, "sum lift of ({c})'"),
            TransformCase::DerivDifferenceLift(c) => write!(f, "difference lift of ({c})'"),
        }
    }
}

/// Evaluates both sides of one identity at `(λ, μ)`.
pub fn transform_identity(case: &TransformCase, l: C64, m: C64) -> Result<(C64, C64)> {
    match case {
        TransformCase::SumLift(k) => {
            distinct(l, m)?;
            let lhs = laplace2(&BivarField::plus(k.clone()), l, m, None)?.value;
            Ok((lhs, (hat(k, l)? - hat(k, m)?) / (m - l)))
        }
        TransformCase::DifferenceLift(k) => {
            let lhs = laplace2(&BivarField::minus(k.clone()), l, m, None)?.value;
            Ok((lhs, (hat(k, l)? + hat(k, m)?) / (l + m)))
        }
        TransformCase::Tensor(a, b) => {
            let lhs = laplace2(&BivarField::tensor(a.clone(), b.clone()), l, m, None)?.value;
            Ok((lhs, hat(a, l)? * hat(b, m)?))
        }
        TransformCase::Product(f, g) => {
            let rhs = hat2(f, l, m)? * hat2(g, l, m)?;
            Ok((laplace2_conv2(f, g, l, m)?, rhs))
        }
        TransformCase::DerivSumLift(c) => {
            distinct(l, m)?;
            let lhs = laplace2_deriv_plus(c, l, m, None)?;
            Ok((lhs, (l * hat(c, l)? - m * hat(c, m)?) / (m - l)))
        }
        TransformCase::DerivDifferenceLift(c) => {
            let lhs = laplace2_deriv_minus(c, l, m, None)?;
            let c0 = c.value_at_zero().unwrap_or(ZERO);
            Ok((lhs, (l * hat(c, l)? + m * hat(c, m)?) / (l + m) - c0 * 2.0 / (l + m)))
        }
    }
}

/// Residuals of every case at every `(λ, μ)`; degenerate points are skipped
/// with a note.
pub fn check_transform_suite(points: &[(C64, C64)], cases: &[(TransformCase, f64)]) -> ResidualReport {
    let parts = cases
        .iter()
        .map(|(case, tol)| {
            let mut acc = Residuals::new();
            let mut notes = Vec::new();
            let mut failed = None;
            for &(l, m) in points {
                match transform_identity(case, l, m) {
                    Ok((a, b)) => acc.record(&[l.re, l.im, m.re, m.im], (a - b).norm(), b.norm()),
                    Err(Error::DegenerateRequest(why)) => notes.push(format!("skipped: {why}")),
                    Err(e) => failed = Some(e.to_string()),
                }
            }
            let mut r = acc.finish(&case.to_string(), *tol).judged_abs(*tol);
            r.notes = notes;
            if let Some(e) = failed {
                r.pass = false;
                r.notes.push(format!("error: {e}"));
            }
            r
        })
        .collect();
    ResidualReport::combine("transform identities", parts)
}

/// Right side of the scalar inversion identity: `g_α(t+s)`; left side
/// `−((g_{−α})⁺ ∗₂ (g_α⊗g_α))(t,s)` on a grid with `n` cells over `max(t,s)`.
pub fn scalar_inversion(alpha: f64, t: f64, s: f64, n: usize) -> Result<(f64, f64)> {
    let tm = t.max(s);
    let h = tm / n as f64;
    let p = (t / h).round() as usize;
    let q = (s / h).round() as usize;
    if ((p as f64) * h - t).abs() > 1e-9 * tm || ((q as f64) * h - s).abs() > 1e-9 * tm {
        return Err(Error::GridMismatch(format!("({t},{s}) not on a grid of {n} cells")));
    }
    let a = Kernel::g(alpha).sample(h, p + q)?;
    let w = Kernel::g(-alpha).sample(h, p + q)?;
    let lhs = -bivar::plus_conv2(&w, &a, &a, p, q)?[0].re;
    let rhs = (t + s).powf(alpha - 1.0) * rgamma(alpha);
    Ok((lhs, rhs))
}

/// `a⁺ = −((c′)⁺∗₂(a⊗a))` (and `a⁻ = (c′)⁻∗₂(a⊗a)` when `c(0⁺) = 0`) on the
/// node pairs of `grid`, after checking `a∗c = 1`.
pub fn check_inversion(a: &Kernel, c: &Kernel, grid: &Grid, tol: f64, max_pairs: usize) -> Result<ResidualReport> {
    let ac = conv1(a, c, grid)?;
    let dev = (1..=grid.n).map(|i| (ac.at(i) - ONE).norm()).fold(0.0, f64::max);
    if dev > 1e-6 {
        return Err(Error::HypothesisViolation(format!("a∗c deviates from 1 by {dev:.3e}")));
    }
    let dc = c
        .derivative()
        .ok_or_else(|| Error::NoClosedForm(format!("derivative of {c}")))?;
    let h = grid.h();
    let n = grid.n;
    let asamp = a.sample(h, 2 * n)?;
    let wsamp = dc.sample(h, 2 * n)?;
    let pairs = bivar::pair_lattice(n, 2 * n, max_pairs);
    let plus: Vec<(f64, f64, f64, f64)> = pairs
        .par_iter()
        .map(|&(p, q)| -> Result<_> {
            let lhs = -bivar::plus_conv2(&wsamp, &asamp, &asamp, p, q)?[0];
            let rhs = asamp.at(p + q);
            Ok((p as f64 * h, q as f64 * h, (lhs - rhs).norm(), rhs.norm()))
        })
        .collect::<Result<_>>()?;
    let mut acc = Residuals::new();
    for (t, s, r, v) in plus {
        acc.record(&[t, s], r, v);
    }
    let mut parts = vec![acc.finish("sum-lift inversion", tol).with_grid(grid)];
    if c.value_at_zero().map(|z| z == ZERO).unwrap_or(false) && dc.is_integrable() {
        let minus: Vec<(f64, f64, f64, f64)> = pairs
            .par_iter()
            .filter(|&&(p, q)| p != q || a.value_at_zero().is_some())
            .map(|&(p, q)| -> Result<_> {
                let lhs = bivar::minus_conv2(&wsamp, &asamp, &asamp, p, q)?[0];
                let d = p.abs_diff(q);
                let rhs = if d == 0 { a.value_at_zero().unwrap_or(ZERO) } else { asamp.at(d) };
                Ok((p as f64 * h, q as f64 * h, (lhs - rhs).norm(), rhs.norm()))
            })
            .collect::<Result<_>>()?;
        let mut acc = Residuals::new();
        for (t, s, r, v) in minus {
            acc.record(&[t, s], r, v);
        }
        parts.push(acc.finish("difference-lift inversion", tol).with_grid(grid));
    }
    Ok(ResidualReport::combine("inversion", parts))
}

/// Relative errors of the scalar inversion identity at `pairs`, with the
/// order measured between `n/2` and `n`.
pub fn check_scalar_inversion(alpha: f64, pairs: &[(f64, f64)], n: usize, tol: f64) -> Result<ResidualReport> {
    let mut acc = Residuals::new();
    let mut worst_order = f64::INFINITY;
    for &(t, s) in pairs {
        let (l1, r) = scalar_inversion(alpha, t, s, n / 2)?;
        let (l2, _) = scalar_inversion(alpha, t, s, n)?;
        let (e1, e2) = ((l1 - r).abs() / r.abs(), (l2 - r).abs() / r.abs());
        acc.record(&[t, s], e2, 1.0);
        worst_order = worst_order.min(refinement_order(e1, e2, 2.0));
    }
    Ok(acc
        .finish("scalar inversion identity", tol)
        .judged_abs(tol)
        .with_grid(format!("n={n}"))
        .with_order(worst_order))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Kernel::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn one_variable_examples() {
        let v = laplace1(&Constant(1.0), c(2.0), Some(40.0)).unwrap();
        assert!((v.value - c(0.5)).norm() < 1e-10);
        let v = laplace1(&PowerLaw(0.5), c(1.0), None).unwrap();
        assert!((v.value - c(1.0)).norm() < 1e-10, "{:?}", v);
        let v = laplace1(&LevyHalf, c(1.0), None).unwrap();
        assert!((v.value - c((-1.0f64).exp())).norm() < 1e-10);
        assert!(matches!(
            laplace1(&Exponential(c(-1.0)), c(0.5), None),
            Err(Error::AbscissaViolation(_))
        ));
    }

    #[test]
    fn levy_transform_matches_closed_form() {
        for l in [1.0, 2.0, 4.0] {
            let v = laplace1(&LevyHalf, c(l), None).unwrap().value;
            assert!((v - c((-l.sqrt()).exp())).norm() < 1e-10);
        }
    }

    #[test]
    fn two_variable_examples() {
        let t = laplace2(&BivarField::tensor(Constant(1.0), Constant(1.0)), c(1.0), c(1.0), None).unwrap();
        assert!((t.value - c(1.0)).norm() < 1e-9);
        let p = laplace2(&BivarField::plus(Exponential(c(1.0))), c(1.0), c(2.0), None).unwrap();
        assert!((p.value - c(1.0 / 6.0)).norm() < 1e-10);
        let m = laplace2(&BivarField::minus(Exponential(c(1.0))), c(1.0), c(2.0), None).unwrap();
        assert!((m.value - c(5.0 / 18.0)).norm() < 1e-10);
    }

    #[test]
    fn derivative_lift_of_singular_kernel() {
        let v = laplace2_deriv_plus(&PowerLaw(0.5), c(1.0), c(4.0), None).unwrap();
        assert!((v - c(-1.0 / 3.0)).norm() < 1e-8, "{v}");
        let (a, b) = transform_identity(&TransformCase::DerivDifferenceLift(PowerLaw(2.0)), c(1.0), c(1.0)).unwrap();
        assert!((b - c(1.0)).norm() < 1e-14 && (a - b).norm() < 1e-8);
    }

    #[test]
    fn degenerate_points_are_rejected() {
        assert!(matches!(
            transform_identity(&TransformCase::SumLift(Constant(1.0)), c(1.0), c(1.0)),
            Err(Error::DegenerateRequest(_))
        ));
    }

    #[test]
    fn product_identity_on_constants() {
        let f = BivarField::tensor(Constant(1.0), Constant(1.0));
        let (a, b) = transform_identity(&TransformCase::Product(f.clone(), f), c(1.0), c(1.0)).unwrap();
        assert!((a - b).norm() < 1e-8, "{a} {b}");
    }

    #[test]
    fn laguerre_rule() {
        let (x, w) = gauss_laguerre(20);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(5)).sum();
        assert!((s - 120.0).abs() < 1e-9);
    }

    #[test]
    fn sampled_transform_of_power() {
        let s = PowerLaw(0.5).sample(0.05, 800).unwrap();
        let v = laplace1_sampled(&s, c(1.0)).unwrap()[0];
        assert!((v - c(1.0)).norm() < 1e-7, "{v}");
    }

    #[test]
    fn inversion_of_power_pair() {
        for (a, t, s) in [(0.5, 1.0, 2.0), (0.5, 2.0, 1.0), (0.5, 1.0, 1.0), (0.25, 1.0, 1.0)] {
            let (l, r) = scalar_inversion(a, t, s, 256).unwrap();
            let e = (t + s).powf(a - 1.0);
            assert!((l - r).abs() / r < 1e-3, "{a} {t} {s}: {l} {r}");
            assert!((r * crate::special::gamma(a) - e).abs() < 1e-12);
        }
        let rep = check_scalar_inversion(0.5, &[(1.0, 2.0), (2.0, 1.0), (1.0, 1.0)], 256, 1e-3).unwrap();
        assert!(rep.pass && rep.refinement_order.unwrap() >= 0.5, "{}", rep.to_json().unwrap());
        let rep = check_inversion(&PowerLaw(0.5), &PowerLaw(0.5), &Grid::new(1.0, 16).unwrap(), 0.1, 60).unwrap();
        assert!(rep.pass, "{}", rep.to_json().unwrap());
    }

    #[test]
    fn inversion_needs_unit_convolution() {
        let r = check_inversion(&PowerLaw(0.5), &PowerLaw(1.0), &Grid::new(1.0, 8).unwrap(), 1e-3, 10);
        assert!(matches!(r, Err(Error::HypothesisViolation(_))));
    }
}
