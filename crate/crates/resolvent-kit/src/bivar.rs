//! Two-variable calculus: `f⁺`, `f⁻`, `f⊗g`, translations and the double
//! convolution `(F∗₂G)(t,s) = ∫₀ᵗ∫₀ˢ F(t−u,s−v) G(u,v) dv du`.
//!
//! Sum and difference lifts are reduced to one-variable integrals: for
//! `F = w⁺`, `G = x⊗y` the inner cross-section
//! `H(σ) = ∫ x(r) y(σ−r) dr` over the rectangle is formed once and
//! the weight `w` is handled by 1-D product integration.

use crate::error::{Error, Result};
use crate::kernels::{Grid, Kernel};
use crate::quad::{self, check_step, conv_at, conv_psi0, conv_range, pair_moments, prod_dim, Sampled};
use crate::report::{ResidualReport, Residuals};
use crate::C64;
use rayon::prelude::*;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// A one-variable ingredient: a kernel descriptor or sampled values.
#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Kernel(Kernel),
    Sampled(Sampled),
}

impl From<Kernel> for Source {
    fn from(k: Kernel) -> Self {
        Source::Kernel(k)
    }
}

impl From<Sampled> for Source {
    fn from(s: Sampled) -> Self {
        Source::Sampled(s)
    }
}

impl Source {
    pub fn sample(&self, h: f64, n: usize) -> Result<Sampled> {
        match self {
            Source::Kernel(k) => k.sample(h, n),
            Source::Sampled(s) => {
                check_step(s.h, h)?;
                if s.n < n {
                    return Err(Error::IntervalExceeded(format!(
                        "samples cover {} nodes, {n} needed",
                        s.n
                    )));
                }
                Ok(s.truncate(n))
            }
        }
    }

    /// Value at `t ≥ 0`; sampled sources only at nodes.
    pub fn eval(&self, t: f64) -> Result<Vec<C64>> {
        match self {
            Source::Kernel(k) => {
                if t == 0.0 {
                    return k
                        .value_at_zero()
                        .map(|v| vec![v])
                        .ok_or_else(|| Error::DomainError(format!("{k} is unbounded at 0")));
                }
                Ok(vec![k.eval(t)?])
            }
            Source::Sampled(s) => {
                let x = t / s.h;
                let i = x.round();
                if (x - i).abs() > 1e-9 || i as usize > s.n {
                    return Err(Error::GridMismatch(format!("t = {t} is not a sample node")));
                }
                let i = i as usize;
                if i == 0 && s.gamma != 0.0 {
                    if s.gamma > 0.0 {
                        return Ok(vec![ZERO; s.dd()]);
                    }
                    return Err(Error::DomainError("samples are unbounded at 0".into()));
                }
                Ok(s.value(i).to_vec())
            }
        }
    }
}

/// Node values on `{0..=nt} × {0..=ns}` with step `h`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table2 {
    pub h: f64,
    pub d: usize,
    pub nt: usize,
    pub ns: usize,
    vals: Vec<C64>,
}

impl Table2 {
    pub fn new(h: f64, d: usize, nt: usize, ns: usize, vals: Vec<C64>) -> Result<Self> {
        if vals.len() != (nt + 1) * (ns + 1) * d * d {
            return Err(Error::GridMismatch("table size does not match its grid".into()));
        }
        Ok(Self { h, d, nt, ns, vals })
    }

    pub fn at(&self, i: usize, j: usize) -> &[C64] {
        let dd = self.d * self.d;
        let k = (i * (self.ns + 1) + j) * dd;
        &self.vals[k..k + dd]
    }

    /// Bilinear interpolation.
    pub fn eval(&self, t: f64, s: f64) -> Result<Vec<C64>> {
        let (x, y) = (t / self.h, s / self.h);
        if x < 0.0 || y < 0.0 || x > self.nt as f64 + 1e-9 || y > self.ns as f64 + 1e-9 {
            return Err(Error::IntervalExceeded(format!("({t},{s}) outside the table")));
        }
        let i = (x.floor() as usize).min(self.nt.saturating_sub(1));
        let j = (y.floor() as usize).min(self.ns.saturating_sub(1));
        let (fx, fy) = (x - i as f64, y - j as f64);
        let i1 = (i + 1).min(self.nt);
        let j1 = (j + 1).min(self.ns);
        let dd = self.d * self.d;
        Ok((0..dd)
            .map(|k| {
                self.at(i, j)[k] * (1.0 - fx) * (1.0 - fy)
                    + self.at(i1, j)[k] * fx * (1.0 - fy)
                    + self.at(i, j1)[k] * (1.0 - fx) * fy
                    + self.at(i1, j1)[k] * fx * fy
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BivarField {
    /// `f⁺(t,s) = f(t+s)`.
    Plus(Source),
    /// `f⁻(t,s) = f(|t−s|)`.
    Minus(Source),
    /// `(f⊗g)(t,s) = f(t)g(s)`.
    Tensor(Source, Source),
    Tabulated2D(Table2),
}

fn mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    let d = prod_dim(dim(a.len()), dim(b.len())).unwrap_or(1);
    let mut out = vec![ZERO; d * d];
    quad::mac(&mut out, d, C64::new(1.0, 0.0), a, b);
    out
}

fn dim(len: usize) -> usize {
    (len as f64).sqrt().round() as usize
}

impl BivarField {
    pub fn plus(f: impl Into<Source>) -> Self {
        BivarField::Plus(f.into())
    }

    pub fn minus(f: impl Into<Source>) -> Self {
        BivarField::Minus(f.into())
    }

    pub fn tensor(f: impl Into<Source>, g: impl Into<Source>) -> Self {
        BivarField::Tensor(f.into(), g.into())
    }

    /// Pointwise value from the defining formula.
    pub fn eval(&self, t: f64, s: f64) -> Result<Vec<C64>> {
        match self {
            BivarField::Plus(f) => f.eval(t + s),
            BivarField::Minus(f) => f.eval((t - s).abs()),
            BivarField::Tensor(f, g) => Ok(mul(&f.eval(t)?, &g.eval(s)?)),
            BivarField::Tabulated2D(tab) => tab.eval(t, s),
        }
    }
}

/// `(w⁺ ∗₂ (x⊗y))(p·h, q·h) = ∫₀ᵗ∫₀ˢ w(t+s−u−v) x(u) y(v) dv du`.
///
/// The `u`-integral is done first: `G(v) = ∫₀ᵗ x(u) w(t+v−u) du` behaves
/// like `v^{γw+1}` at `v = 0`, and `∫₀ˢ G(s−v) y(v) dv` is then a
/// one-variable convolution with both end weights integrated exactly. The
/// weight may be hyper-singular at the origin.
pub fn plus_conv2(w: &Sampled, x: &Sampled, y: &Sampled, p: usize, q: usize) -> Result<Vec<C64>> {
    plus_conv2_graded(w, x, y, p, q, None)
}

/// [`plus_conv2`] for factors whose smooth parts are smooth in `t^ν`
/// rather than in `t`: their leading terms are split off.
pub fn plus_conv2_graded(w: &Sampled, x: &Sampled, y: &Sampled, p: usize, q: usize, nu: Option<f64>) -> Result<Vec<C64>> {
    check_step(w.h, x.h)?;
    check_step(x.h, y.h)?;
    let d = prod_dim(w.d, prod_dim(x.d, y.d)?)?;
    if w.gamma <= -2.0 {
        return Err(Error::DivergentMoment(format!(
            "weight exponent {} is not integrable over a rectangle corner",
            w.gamma
        )));
    }
    if p == 0 || q == 0 {
        return Ok(vec![ZERO; d * d]);
    }
    if w.n < p + q {
        return Err(Error::IntervalExceeded(format!("weight sampled on {} nodes, {} needed", w.n, p + q)));
    }
    if x.n < p || y.n < q {
        return Err(Error::IntervalExceeded("samples too short for the rectangle".into()));
    }
    let (xs, ys) = match nu {
        Some(nu) if nu > 0.0 && nu < 1.0 => {
            let (x0, x1) = x.truncate(p).split_leading(nu);
            let (y0, y1) = y.truncate(q).split_leading(nu);
            (vec![x0, x1], vec![y0, y1])
        }
        _ => (vec![x.clone()], vec![y.clone()]),
    };
    let mut gs = Vec::new();
    for x in &xs {
        let g = tail_section(w, x, p, q)?;
        let e = w.gamma + 1.0;
        if e != 0.0 && e.abs() < 1.0 {
            let (lead, rest) = g.split_leading(e.abs());
            gs.push(lead);
            gs.push(rest);
        } else {
            gs.push(g);
        }
    }
    let mut out = vec![ZERO; d * d];
    for g in &gs {
        for y in &ys {
            for (o, v) in out.iter_mut().zip(conv_range(g, y, q, 0, q)?) {
                *o += v;
            }
        }
    }
    Ok(out)
}

/// `v ↦ ∫₀^{p·h} x(u) w(p·h+v−u) du` on nodes `v = 0..=q`.
pub fn tail_section(w: &Sampled, x: &Sampled, p: usize, q: usize) -> Result<Sampled> {
    let dx = x.d;
    let d = prod_dim(w.d, dx)?;
    let rows: Vec<Vec<C64>> = (1..=q)
        .into_par_iter()
        .map(|j| conv_range(x, w, p + j, 0, p))
        .collect::<Result<_>>()?;
    let flat: Vec<C64> = rows.into_iter().flatten().collect();
    let e = w.gamma + 1.0;
    let xt = x.value(p);
    let mut p0 = vec![ZERO; d * d];
    if e < 0.0 {
        // ∫_v^∞ c u^{γ} du = −c v^{γ+1}/(γ+1)
        quad::mac(&mut p0, d, C64::new(-1.0 / e, 0.0), xt, w.psi(0));
        Ok(Sampled::from_values(d, x.h, e, &flat, Some(&p0)))
    } else {
        p0 = conv_range(x, w, p, 0, p)?;
        Ok(Sampled::from_values(d, x.h, 0.0, &flat, Some(&p0)))
    }
}

/// The same integral through the cross-section `H(σ)` and one outer
/// convolution against `w`; used as an independent cross-check.
pub fn plus_conv2_cross(w: &Sampled, x: &Sampled, y: &Sampled, p: usize, q: usize) -> Result<Vec<C64>> {
    check_step(w.h, x.h)?;
    check_step(x.h, y.h)?;
    let d = prod_dim(w.d, prod_dim(x.d, y.d)?)?;
    if p == 0 || q == 0 {
        return Ok(vec![ZERO; d * d]);
    }
    let l = p + q;
    if w.n < l {
        return Err(Error::IntervalExceeded(format!(
            "weight sampled on {} nodes, {l} needed",
            w.n
        )));
    }
    let hs = cross_section(x, y, p, q)?;
    conv_range(&hs, w, l, 0, l)
}

/// `σ ↦ ∫_{max(0,σ−s)}^{min(t,σ)} x(r) y(σ−r) dr` on nodes `0..=p+q`.
pub fn cross_section(x: &Sampled, y: &Sampled, p: usize, q: usize) -> Result<Sampled> {
    let l = p + q;
    let d = prod_dim(x.d, y.d)?;
    let pm = pair_moments(x.gamma, y.gamma, x.h, l);
    let rows: Vec<Vec<C64>> = (1..=l)
        .map(|m| conv_at(x, y, m, m.saturating_sub(q), p.min(m), &pm))
        .collect::<Result<_>>()?;
    let flat: Vec<C64> = rows.into_iter().flatten().collect();
    let g = x.gamma + y.gamma + 1.0;
    if g >= 1.0 {
        // H is C¹ at the origin
        return Ok(Sampled::from_values(d, x.h, 0.0, &flat, Some(&vec![ZERO; d * d])));
    }
    Ok(Sampled::from_values(d, x.h, g, &flat, Some(&conv_psi0(x, y))))
}

fn binom_upto(a: f64, b: f64, m: f64, u: f64) -> (f64, f64) {
    // ∫₀ᵘ x^a (1 − x/m)^b (1−x) dx and ∫₀ᵘ x^{a+1} (1 − x/m)^b dx
    let mut c = 1.0;
    let (mut s1, mut s2) = (0.0, 0.0);
    for k in 0..600 {
        let e = a + k as f64;
        let i0 = u.powf(e + 1.0) / (e + 1.0);
        let i1 = u.powf(e + 2.0) / (e + 2.0);
        let (t1, t2) = (c * (i0 - i1), c * i1);
        s1 += t1;
        s2 += t2;
        if t1.abs() + t2.abs() <= 1e-17 * (s1.abs() + s2.abs()) {
            break;
        }
        c *= (k as f64 - b) / ((k as f64 + 1.0) * m);
    }
    (s1, s2)
}

/// `(∫ w(1−x), ∫ w x)` over `x ∈ [0,1]` for `w = (j+x)^a (j+x+k)^b`.
fn offset_cell(a: f64, b: f64, k: usize, j: usize) -> (f64, f64) {
    let (gx, gw) = quad::gl01(12);
    let gl = |lo: f64, hi: f64| {
        let (mut l, mut r) = (0.0, 0.0);
        for (x, w) in gx.iter().zip(&gw) {
            let xx = lo + (hi - lo) * x;
            let f = (j as f64 + xx).powf(a) * (j as f64 + xx + k as f64).powf(b) * w * (hi - lo);
            l += f * (1.0 - xx);
            r += f * xx;
        }
        (l, r)
    };
    if j >= 1 {
        return gl(0.0, 1.0);
    }
    if k == 0 {
        let c = a + b;
        if c <= -1.0 {
            return (f64::INFINITY, if c > -2.0 { 1.0 / (c + 2.0) } else { f64::INFINITY });
        }
        return (1.0 / ((c + 1.0) * (c + 2.0)), 1.0 / (c + 2.0));
    }
    if a <= -1.0 {
        return (f64::INFINITY, f64::INFINITY);
    }
    let kf = k as f64;
    if k >= 2 {
        let (s1, s2) = binom_upto(a, b, -kf, 1.0);
        return (s1 * kf.powf(b), s2 * kf.powf(b));
    }
    let (s1, s2) = binom_upto(a, b, -kf, 0.5);
    let (l, r) = gl(0.5, 1.0);
    (s1 + l, s2 + r)
}

/// `D(k) = ∫ x(u) y(u − kh) du` over the rectangle, for `k = −q..=p`.
fn correlation(x: &Sampled, y: &Sampled, p: usize, q: usize) -> Result<Vec<Vec<C64>>> {
    let d = prod_dim(x.d, y.d)?;
    let h = x.h;
    (0..=p + q)
        .into_par_iter()
        .map(|idx| {
            let k = idx as isize - q as isize;
            let mut out = vec![ZERO; d * d];
            // v from 0 over `cells` cells; x at v + k⁺, y at v + k⁻
            let (kp, km) = if k >= 0 { (k as usize, 0) } else { (0, (-k) as usize) };
            let cells = (p - kp).min(q - km);
            let (near, far) = if k >= 0 { (y.gamma, x.gamma) } else { (x.gamma, y.gamma) };
            let kk = kp.max(km);
            let scale = h.powf(near + far + 1.0);
            for j in 0..cells {
                let (wl, wr) = offset_cell(near, far, kk, j);
                for (w, jj) in [(wl, j), (wr, j + 1)] {
                    let (xa, ya) = (x.psi(jj + kp), y.psi(jj + km));
                    if w.is_infinite() {
                        if xa.iter().all(|z| *z == ZERO) || ya.iter().all(|z| *z == ZERO) {
                            continue;
                        }
                        return Err(Error::DivergentMoment(
                            "correlation of two strongly singular factors".into(),
                        ));
                    }
                    quad::mac(&mut out, d, C64::new(w * scale, 0.0), xa, ya);
                }
            }
            Ok(out)
        })
        .collect()
}

/// `(w⁻ ∗₂ (x⊗y))(p·h, q·h) = ∫₀ᵗ∫₀ˢ w(|t−u−s+v|) x(u) y(v) dv du`.
pub fn minus_conv2(w: &Sampled, x: &Sampled, y: &Sampled, p: usize, q: usize) -> Result<Vec<C64>> {
    check_step(w.h, x.h)?;
    check_step(x.h, y.h)?;
    let dxy = prod_dim(x.d, y.d)?;
    let d = prod_dim(w.d, dxy)?;
    if w.gamma <= -1.0 {
        return Err(Error::NotIntegrable(format!(
            "difference lift of a weight with exponent {}",
            w.gamma
        )));
    }
    if p == 0 || q == 0 {
        return Ok(vec![ZERO; d * d]);
    }
    if x.n < p || y.n < q || w.n < p.max(q) {
        return Err(Error::IntervalExceeded("samples too short for the rectangle".into()));
    }
    let dk = correlation(x, y, p, q)?;
    let at = |k: isize| &dk[(k + q as isize) as usize];
    let side = |len: usize, f: &dyn Fn(usize) -> isize| -> Result<Vec<C64>> {
        let psi: Vec<C64> = (0..=len).flat_map(|i| at(f(i)).clone()).collect();
        let ys = Sampled::from_psi(dxy, x.h, 0.0, psi);
        conv_range(w, &ys, len, 0, len)
    };
    let a = side(p, &|i| i as isize - q as isize)?;
    let b = side(q, &|i| p as isize - i as isize)?;
    Ok(a.iter().zip(&b).map(|(u, v)| u + v).collect())
}

/// `(f⁺ ∗₂ g⁺)(p·h, q·h) = ∫₀^{t+s} f(t+s−σ) g(σ) ℓ(σ) dσ` with
/// `ℓ(σ) = min(σ, t, s, t+s−σ)`.
pub fn plus_plus(f: &Sampled, g: &Sampled, p: usize, q: usize) -> Result<Vec<C64>> {
    check_step(f.h, g.h)?;
    let l = p + q;
    let d = prod_dim(f.d, g.d)?;
    if p == 0 || q == 0 {
        return Ok(vec![ZERO; d * d]);
    }
    if g.n < l || f.n < l {
        return Err(Error::IntervalExceeded("samples too short for t+s".into()));
    }
    let (lo, hi) = (p.min(q), p.max(q));
    let dd = g.dd();
    let mut psi = Vec::with_capacity((l + 1) * dd);
    for i in 0..=l {
        let len = i.min(lo).min(l - i).min(hi) as f64 * g.h;
        psi.extend(g.psi(i).iter().map(|z| z * len));
    }
    let gl = Sampled::from_psi(g.d, g.h, g.gamma, psi);
    conv_range(&gl, f, l, 0, l)
}

/// `((f1⊗g1) ∗₂ (f2⊗g2))(p·h, q·h) = (f1∗f2)(t)·(g1∗g2)(s)`; matrix factors
/// are assumed to commute.
pub fn tensor_tensor(f1: &Sampled, g1: &Sampled, f2: &Sampled, g2: &Sampled, p: usize, q: usize) -> Result<Vec<C64>> {
    let a = conv_range(f1, f2, p, 0, p)?;
    let b = conv_range(g1, g2, q, 0, q)?;
    Ok(mul(&a, &b))
}

/// `(F ∗₂ G)(p·h, q·h)` by the matching reduction.
pub fn conv2(f: &BivarField, g: &BivarField, p: usize, q: usize, h: f64) -> Result<Vec<C64>> {
    use BivarField::*;
    let l = p + q;
    match (f, g) {
        (Plus(w), Tensor(x, y)) | (Tensor(x, y), Plus(w)) => {
            plus_conv2(&w.sample(h, l)?, &x.sample(h, p)?, &y.sample(h, q)?, p, q)
        }
        (Minus(w), Tensor(x, y)) | (Tensor(x, y), Minus(w)) => {
            minus_conv2(&w.sample(h, p.max(q))?, &x.sample(h, p)?, &y.sample(h, q)?, p, q)
        }
        (Tensor(f1, g1), Tensor(f2, g2)) => tensor_tensor(
            &f1.sample(h, p)?,
            &g1.sample(h, q)?,
            &f2.sample(h, p)?,
            &g2.sample(h, q)?,
            p,
            q,
        ),
        (Plus(a), Plus(b)) => plus_plus(&a.sample(h, l)?, &b.sample(h, l)?, p, q),
        _ => naive_conv2(f, g, p as f64 * h, q as f64 * h, p.max(1), q.max(1)),
    }
}

/// Tensor Gauss–Legendre rule on `nt × ns` cells with pointwise evaluation.
/// Accurate for smooth integrands only.
pub fn naive_conv2(f: &BivarField, g: &BivarField, t: f64, s: f64, nt: usize, ns: usize) -> Result<Vec<C64>> {
    let (gx, gw) = quad::gl01(8);
    let (ht, hs) = (t / nt as f64, s / ns as f64);
    let parts: Vec<Vec<C64>> = (0..nt)
        .into_par_iter()
        .map(|i| {
            let mut acc: Vec<C64> = Vec::new();
            for j in 0..ns {
                for (xu, wu) in gx.iter().zip(&gw) {
                    for (xv, wv) in gx.iter().zip(&gw) {
                        let u = (i as f64 + xu) * ht;
                        let v = (j as f64 + xv) * hs;
                        let val = mul(&f.eval(t - u, s - v)?, &g.eval(u, v)?);
                        if acc.is_empty() {
                            acc = vec![ZERO; val.len()];
                        }
                        let w = wu * wv * ht * hs;
                        for (a, b) in acc.iter_mut().zip(&val) {
                            *a += b * w;
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut out = parts[0].clone();
    for p in &parts[1..] {
        for (a, b) in out.iter_mut().zip(p) {
            *a += b;
        }
    }
    Ok(out)
}

/// [`naive_conv2`] after the substitution `u = t·φ(x)`, `v = s·φ(y)` with
/// `φ(x) = 3x² − 2x³`, which flattens integrable power singularities at
/// both ends of each axis.
pub fn graded_conv2(f: &BivarField, g: &BivarField, t: f64, s: f64, nt: usize, ns: usize) -> Result<Vec<C64>> {
    let (gx, gw) = quad::gl01(8);
    let phi = |x: f64| x * x * (3.0 - 2.0 * x);
    let dphi = |x: f64| 6.0 * x * (1.0 - x);
    let (ht, hs) = (1.0 / nt as f64, 1.0 / ns as f64);
    let parts: Vec<Vec<C64>> = (0..nt)
        .into_par_iter()
        .map(|i| {
            let mut acc: Vec<C64> = Vec::new();
            for (xu, wu) in gx.iter().zip(&gw) {
                let x = (i as f64 + xu) * ht;
                let (u, du) = (t * phi(x), t * dphi(x) * wu * ht);
                for j in 0..ns {
                    for (xv, wv) in gx.iter().zip(&gw) {
                        let y = (j as f64 + xv) * hs;
                        let (v, dv) = (s * phi(y), s * dphi(y) * wv * hs);
                        let val = mul(&f.eval(t - u, s - v)?, &g.eval(u, v)?);
                        if acc.is_empty() {
                            acc = vec![ZERO; val.len()];
                        }
                        for (a, b) in acc.iter_mut().zip(&val) {
                            *a += b * (du * dv);
                        }
                    }
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut out = parts[0].clone();
    for p in &parts[1..] {
        for (a, b) in out.iter_mut().zip(p) {
            *a += b;
        }
    }
    Ok(out)
}

/// Node pairs `(i, j)`, `1 ≤ i, j ≤ n`, with `i + j ≤ sum_max`, thinned by
/// a common stride to at most `max_pairs`.
pub fn pair_lattice(n: usize, sum_max: usize, max_pairs: usize) -> Vec<(usize, usize)> {
    let all = |stride: usize| -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        let mut i = stride;
        while i <= n {
            let mut j = stride;
            while j <= n && i + j <= sum_max {
                v.push((i, j));
                j += stride;
            }
            i += stride;
        }
        v
    };
    let mut stride = 1;
    loop {
        let v = all(stride);
        if v.len() <= max_pairs || stride >= n {
            return v;
        }
        stride += 1;
    }
}

fn norm(v: &[C64]) -> f64 {
    crate::mat::op_norm(&crate::mat::from_flat(dim(v.len()), v))
}

fn diff(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Numeric convolution of two kernels, closed form when available.
fn conv_k(a: &Kernel, b: &Kernel, h: f64, n: usize) -> Result<Sampled> {
    crate::kernels::conv1(a, b, &Grid::with_step(h, n)?)
}

/// The three interaction rules of `∗` and `∗₂` with `⊗`, `(·)_t`, `(·)⁺`,
/// on node pairs of `grid` (at most `max_pairs`).
pub fn check_interaction_rules(
    f: &Kernel,
    g: &Kernel,
    h: &Kernel,
    j: &Kernel,
    grid: &Grid,
    tol: f64,
    max_pairs: usize,
) -> Result<ResidualReport> {
    let st = grid.h();
    let n = grid.n;
    let big = 2 * n;
    let pairs = pair_lattice(n, big, max_pairs);
    let (fs, gs, hs, js) = (f.sample(st, big)?, g.sample(st, big)?, h.sample(st, big)?, j.sample(st, big)?);
    let fh = conv_k(f, h, st, big)?;
    let gj = conv_k(g, j, st, big)?;
    let fg = conv_k(f, g, st, big)?;
    let hg = conv_k(h, g, st, big)?;
    let mf = fs.times_t();
    let mg = gs.times_t();

    let res: Vec<[(f64, f64); 3]> = pairs
        .par_iter()
        .map(|&(p, q)| -> Result<[(f64, f64); 3]> {
            let l = p + q;
            // (i)
            let lhs1 = tensor_tensor(&fs, &gs, &hs, &js, p, q)?;
            let rhs1 = mul(fh.value(p), gj.value(q));
            // (ii)
            let lhs2 = plus_conv2(&gs, &fs, &hs, p, q)?;
            let a = conv_range(&fg, &hs, l, p, l)?;
            let b = conv_range(&hg, &fs, l, 0, q)?;
            let rhs2 = diff(&a, &b);
            // (iii)
            let lhs3 = plus_plus(&fs, &gs, p, q)?;
            let (lo, hi) = (p.min(q), p.max(q));
            let t1 = conv_range(&mg, &fs, l, 0, lo)?;
            let t2 = conv_range(&gs, &fs, l, lo, hi)?;
            let t3 = conv_range(&gs, &mf, l, hi, l)?;
            let sl = lo as f64 * st;
            let rhs3: Vec<C64> = (0..t1.len()).map(|k| t1[k] + t2[k] * sl + t3[k]).collect();
            Ok([
                (norm(&diff(&lhs1, &rhs1)), norm(&rhs1)),
                (norm(&diff(&lhs2, &rhs2)), norm(&rhs2)),
                (norm(&diff(&lhs3, &rhs3)), norm(&rhs3)),
            ])
        })
        .collect::<Result<_>>()?;
    let names = ["tensor rule", "sum-lift translation rule", "sum-lift product rule"];
    let parts = (0..3)
        .map(|k| {
            let mut acc = Residuals::new();
            for (r, &(p, q)) in res.iter().zip(&pairs) {
                acc.record(&[p as f64 * st, q as f64 * st], r[k].0, r[k].1);
            }
            acc.finish(names[k], tol).with_grid(grid)
        })
        .collect();
    Ok(ResidualReport::combine("interaction rules", parts))
}

/// `∫₀^{t−τ} h(t−s)(g∗f)(s) ds + ∫₀^τ f(t−s)(g∗h)(s) ds
///  = (f∗g∗h)(t) − (g⁺∗₂(f⊗h))(t−τ, τ)` at `t = m·step`, `τ = k·step`.
pub fn check_split_identity(f: &Kernel, g: &Kernel, h: &Kernel, step: f64, m: usize, k: usize, tol: f64) -> Result<ResidualReport> {
    if k > m {
        return Err(Error::DomainError(format!("tau index {k} exceeds t index {m}")));
    }
    let (fs, gs, hs) = (f.sample(step, m)?, g.sample(step, m)?, h.sample(step, m)?);
    let gf = conv_k(g, f, step, m)?;
    let gh = conv_k(g, h, step, m)?;
    let l1 = conv_range(&gf, &hs, m, 0, m - k)?;
    let l2 = conv_range(&gh, &fs, m, 0, k)?;
    let lhs: Vec<C64> = l1.iter().zip(&l2).map(|(a, b)| a + b).collect();
    let fgh = Kernel::conv(Kernel::conv(f.clone(), g.clone()), h.clone());
    let full = if fgh.as_scaled_power().is_some() || fgh.is_evaluable() {
        vec![fgh.eval(m as f64 * step)?]
    } else {
        let fg = conv_k(f, g, step, m)?;
        quad::conv(&fg, &hs)?.value(m).to_vec()
    };
    let p2 = plus_conv2(&gs, &fs, &hs, m - k, k)?;
    let rhs = diff(&full, &p2);
    let mut acc = Residuals::new();
    acc.record(&[m as f64 * step, k as f64 * step], norm(&diff(&lhs, &rhs)), norm(&rhs));
    Ok(acc.finish("split identity", tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Kernel::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn tensor_example() {
        let one = BivarField::tensor(PowerLaw(1.0), PowerLaw(1.0));
        let v = conv2(&one, &one, 8, 12, 0.25).unwrap();
        assert!((v[0] - c(6.0)).norm() < 1e-13);
    }

    #[test]
    fn exponential_tensor_example() {
        let a = BivarField::tensor(Exponential(c(1.0)), Exponential(c(1.0)));
        let b = BivarField::tensor(Exponential(c(2.0)), Exponential(c(2.0)));
        let v = conv2(&a, &b, 64, 64, 1.0 / 64.0).unwrap();
        let want = ((-1.0f64).exp() - (-2.0f64).exp()).powi(2);
        assert!((v[0].re - want).abs() < 1e-5, "{}", v[0]);
    }

    #[test]
    fn plus_constant_example() {
        let f = BivarField::plus(PowerLaw(1.0));
        let g = BivarField::tensor(PowerLaw(1.0), PowerLaw(1.0));
        let v = conv2(&f, &g, 4, 8, 0.25).unwrap();
        assert!((v[0] - c(2.0)).norm() < 1e-13);
    }

    #[test]
    fn pointwise_lifts() {
        let f = BivarField::plus(Exponential(c(1.0)));
        assert!((f.eval(0.3, 0.4).unwrap()[0] - c((-0.7f64).exp())).norm() < 1e-15);
        let m = BivarField::minus(PowerLaw(2.0));
        assert!((m.eval(0.3, 1.0).unwrap()[0] - c(0.7)).norm() < 1e-15);
        let t = BivarField::tensor(PowerLaw(2.0), Constant(3.0));
        assert!((t.eval(0.5, 9.0).unwrap()[0] - c(1.5)).norm() < 1e-15);
    }

    #[test]
    fn minus_matches_naive() {
        // w(r) = r has a kink on the diagonal; naive rule uses many cells
        let h = 1.0 / 32.0;
        let f = BivarField::minus(PowerLaw(2.0));
        let g = BivarField::tensor(Exponential(c(1.0)), Constant(1.0));
        let fast = conv2(&f, &g, 32, 48, h).unwrap()[0];
        // ∫₀^{1.5} |v − c| dv = c²/2 + (1.5 − c)²/2 for c = u + 0.5
        let (x, w) = quad::gl01(40);
        let want: f64 = x
            .iter()
            .zip(&w)
            .map(|(u, wu)| {
                let cc = u + 0.5;
                wu * (cc * cc / 2.0 + (1.5 - cc).powi(2) / 2.0) * (-u).exp()
            })
            .sum();
        assert!((fast.re - want).abs() < 1e-4, "{} vs {want}", fast.re);
    }

    #[test]
    fn plus_plus_constants() {
        let h = 0.125;
        let one = Constant(1.0).sample(h, 40).unwrap();
        let v = plus_plus(&one, &one, 8, 16).unwrap();
        assert!((v[0] - c(2.0)).norm() < 1e-13);
    }

    #[test]
    fn polynomial_inputs_agree() {
        let one = Constant(1.0);
        let r = check_split_identity(&one, &one, &one, 0.5, 4, 2, 1e-12).unwrap();
        assert!(r.pass, "{r:?}");
        let r = check_split_identity(&one, &one, &one, 0.5, 4, 0, 1e-12).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(check_split_identity(&one, &one, &one, 0.5, 2, 3, 1.0).is_err());
    }

    #[test]
    fn lattice_is_thinned() {
        let v = pair_lattice(64, 64, 400);
        assert!(v.len() <= 400 && !v.is_empty());
        assert!(v.iter().all(|&(i, j)| i + j <= 64));
    }
}
