//! Product integration on uniform grids.
//!
//! A [`Sampled`] function lives on nodes `t_i = i·h`, `i = 1..n`, and is stored
//! as `X(t) = t^γ ψ(t)` with `ψ` assumed smooth. Convolution integrals
//! interpolate the product of the smooth parts linearly on each cell and
//! integrate the two power weights exactly.

use crate::error::{Error, Result};
use crate::mat::{self, CMat};
use crate::special::beta;
use crate::C64;
use rayon::prelude::*;
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Samples of a scalar or matrix valued function on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Sampled {
    /// Matrix dimension; 1 for scalars.
    pub d: usize,
    pub h: f64,
    pub n: usize,
    /// Power weight exponent.
    pub gamma: f64,
    vals: Vec<C64>,
    psi: Vec<C64>,
}

impl Sampled {
    /// Builds from `ψ` at nodes `0..=n` (node 0 holds the limit `X(t)/t^γ`).
    pub fn from_psi(d: usize, h: f64, gamma: f64, psi: Vec<C64>) -> Self {
        let dd = d * d;
        assert!(psi.len() % dd == 0 && psi.len() >= dd, "psi length");
        let n = psi.len() / dd - 1;
        let mut vals = vec![ZERO; psi.len()];
        for i in 0..=n {
            let w = node_weight(gamma, i, h);
            for k in 0..dd {
                vals[i * dd + k] = psi[i * dd + k] * w;
            }
        }
        Self { d, h, n, gamma, vals, psi }
    }

    /// Builds from values at nodes `1..=n`. Without `psi0` the first cell
    /// uses the ansatz `ψ(0) = ψ(h)`.
    pub fn from_values(d: usize, h: f64, gamma: f64, values: &[C64], psi0: Option<&[C64]>) -> Self {
        let dd = d * d;
        assert!(values.len() % dd == 0 && !values.is_empty(), "values length");
        let n = values.len() / dd;
        let mut psi = vec![ZERO; (n + 1) * dd];
        for i in 1..=n {
            let w = (i as f64 * h).powf(gamma);
            for k in 0..dd {
                psi[i * dd + k] = values[(i - 1) * dd + k] / w;
            }
        }
        match psi0 {
            Some(p) => psi[..dd].copy_from_slice(p),
            None => {
                let (a, b) = psi.split_at_mut(dd);
                a.copy_from_slice(&b[..dd]);
            }
        }
        Self::from_psi(d, h, gamma, psi)
    }

    pub fn from_mats(h: f64, gamma: f64, values: &[CMat], psi0: Option<&CMat>) -> Self {
        let d = values[0].nrows();
        let flat: Vec<C64> = values.iter().flat_map(mat::to_flat).collect();
        let p0 = psi0.map(mat::to_flat);
        Self::from_values(d, h, gamma, &flat, p0.as_deref())
    }

    pub fn dd(&self) -> usize {
        self.d * self.d
    }

    pub fn t(&self, i: usize) -> f64 {
        i as f64 * self.h
    }

    /// Value at node `i` (`i ≥ 1`; node 0 only when `γ ≥ 0`).
    pub fn value(&self, i: usize) -> &[C64] {
        let dd = self.dd();
        &self.vals[i * dd..(i + 1) * dd]
    }

    pub fn psi(&self, i: usize) -> &[C64] {
        let dd = self.dd();
        &self.psi[i * dd..(i + 1) * dd]
    }

    pub fn value_mat(&self, i: usize) -> CMat {
        mat::from_flat(self.d, self.value(i))
    }

    /// Scalar value at node `i` (first entry).
    pub fn at(&self, i: usize) -> C64 {
        self.value(i)[0]
    }

    /// Values at nodes `1..=n`, flattened.
    pub fn values(&self) -> &[C64] {
        &self.vals[self.dd()..]
    }

    pub fn psis(&self) -> &[C64] {
        &self.psi
    }

    /// Keeps nodes `0..=m`.
    pub fn truncate(&self, m: usize) -> Self {
        assert!(m <= self.n);
        let dd = self.dd();
        Self {
            d: self.d,
            h: self.h,
            n: m,
            gamma: self.gamma,
            vals: self.vals[..(m + 1) * dd].to_vec(),
            psi: self.psi[..(m + 1) * dd].to_vec(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= c);
        out.psi.iter_mut().for_each(|v| *v *= c);
        out
    }

    /// Pointwise `t·X(t)`.
    pub fn times_t(&self) -> Self {
        Self::from_psi(self.d, self.h, self.gamma + 1.0, self.psi.clone())
    }

    /// Re-expresses the samples with a different weight exponent.
    pub fn reweight(&self, gamma: f64) -> Self {
        if gamma == self.gamma {
            return self.clone();
        }
        let dd = self.dd();
        let mut psi = vec![ZERO; self.psi.len()];
        for i in 1..=self.n {
            let f = (self.t(i)).powf(self.gamma - gamma);
            for k in 0..dd {
                psi[i * dd + k] = self.psi[i * dd + k] * f;
            }
        }
        for k in 0..dd {
            psi[k] = if gamma < self.gamma { ZERO } else { psi[dd + k] };
        }
        Self::from_psi(self.d, self.h, gamma, psi)
    }

    /// Sum of two sampled functions on the same grid.
    pub fn add(&self, other: &Sampled) -> Result<Self> {
        check_step(self.h, other.h)?;
        let n = self.n.min(other.n);
        let g = self.gamma.min(other.gamma);
        let a = self.truncate(n).reweight(g);
        let b = other.truncate(n).reweight(g);
        let d = a.d.max(b.d);
        let dd = d * d;
        let mut psi = vec![ZERO; (n + 1) * dd];
        for i in 0..=n {
            for k in 0..dd {
                psi[i * dd + k] = pick(a.psi(i), k, d) + pick(b.psi(i), k, d);
            }
        }
        Ok(Self::from_psi(d, a.h, g, psi))
    }

    pub fn sub(&self, other: &Sampled) -> Result<Self> {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    /// Splits `X = t^γ ψ(0) + t^{γ+ν} χ`. The remainder uses the first-cell
    /// ansatz `χ(0) = χ(h)`.
    pub fn split_leading(&self, nu: f64) -> (Self, Self) {
        let dd = self.dd();
        let p0 = self.psi(0).to_vec();
        let lead = Self::from_psi(self.d, self.h, self.gamma, p0.repeat(self.n + 1));
        let mut rest = Vec::with_capacity(self.n * dd);
        for i in 1..=self.n {
            let w = self.t(i).powf(self.gamma);
            for k in 0..dd {
                rest.push((self.psi(i)[k] - p0[k]) * w);
            }
        }
        (lead, Self::from_values(self.d, self.h, self.gamma + nu, &rest, None))
    }

    /// Splits `X = Σ_{j≤m} c_j t^{γ+jν} + rest` with `c_0 = ψ(0)` and
    /// `c_1..c_m` interpolating `ψ` at the first `m` nodes. Falls back to
    /// [`Sampled::split_leading`] on short grids.
    pub fn split_series(&self, nu: f64, m: usize) -> (Vec<Self>, Self) {
        if m == 0 || self.n < 4 * m {
            let (lead, rest) = self.split_leading(nu);
            return (vec![lead], rest);
        }
        let dd = self.dd();
        let xs: Vec<f64> = (1..=m).map(|i| self.t(i).powf(nu)).collect();
        let v = nalgebra::DMatrix::from_fn(m, m, |i, j| xs[i].powi(j as i32 + 1));
        let Some(inv) = v.try_inverse() else {
            let (lead, rest) = self.split_leading(nu);
            return (vec![lead], rest);
        };
        let p0 = self.psi(0).to_vec();
        // coef[j][k]: coefficient of t^{(j+1)ν} in entry k
        let mut coef = vec![vec![C64::new(0.0, 0.0); dd]; m];
        for k in 0..dd {
            for j in 0..m {
                coef[j][k] = (0..m).map(|i| (self.psi(i + 1)[k] - p0[k]) * inv[(j, i)]).sum();
            }
        }
        let mut terms = vec![Self::from_psi(self.d, self.h, self.gamma, p0.repeat(self.n + 1))];
        for (j, c) in coef.iter().enumerate() {
            terms.push(Self::from_psi(self.d, self.h, self.gamma + (j + 1) as f64 * nu, c.repeat(self.n + 1)));
        }
        let mut rest = Vec::with_capacity(self.n * dd);
        for i in 1..=self.n {
            let t = self.t(i);
            let w = t.powf(self.gamma);
            for k in 0..dd {
                let fit: C64 = coef.iter().enumerate().map(|(j, c)| c[k] * t.powf((j + 1) as f64 * nu)).sum();
                rest.push((self.psi(i)[k] - p0[k] - fit) * w);
            }
        }
        let rest = Self::from_values(self.d, self.h, self.gamma + (m + 1) as f64 * nu, &rest, None);
        (terms, rest)
    }

    /// Largest operator norm over the nodes.
    pub fn max_norm(&self) -> f64 {
        (1..=self.n)
            .map(|i| mat::op_norm(&self.value_mat(i)))
            .fold(0.0, f64::max)
    }
}

fn node_weight(gamma: f64, i: usize, h: f64) -> f64 {
    if i == 0 {
        if gamma > 0.0 {
            0.0
        } else if gamma == 0.0 {
            1.0
        } else {
            f64::NAN
        }
    } else {
        (i as f64 * h).powf(gamma)
    }
}

fn pick(a: &[C64], k: usize, d: usize) -> C64 {
    if a.len() == 1 {
        if k % (d + 1) == 0 {
            a[0]
        } else {
            ZERO
        }
    } else {
        a[k]
    }
}

pub(crate) fn check_step(h1: f64, h2: f64) -> Result<()> {
    if (h1 - h2).abs() > 1e-12 * h1.abs().max(h2.abs()) {
        return Err(Error::GridMismatch(format!("steps {h1} and {h2} differ")));
    }
    Ok(())
}

/// Output dimension of a product of blocks of sizes `da²`, `db²`.
pub(crate) fn prod_dim(da: usize, db: usize) -> Result<usize> {
    if da == db || db == 1 {
        Ok(da)
    } else if da == 1 {
        Ok(db)
    } else {
        Err(Error::GridMismatch(format!("matrix sizes {da} and {db}")))
    }
}

/// `out += w · a · b` with scalar broadcasting.
#[inline]
pub(crate) fn mac(out: &mut [C64], d: usize, w: C64, a: &[C64], b: &[C64]) {
    if w == ZERO {
        return;
    }
    match (a.len(), b.len()) {
        (1, 1) => out[0] += w * a[0] * b[0],
        (1, _) => {
            let s = w * a[0];
            for k in 0..out.len() {
                out[k] += s * b[k];
            }
        }
        (_, 1) => {
            let s = w * b[0];
            for k in 0..out.len() {
                out[k] += s * a[k];
            }
        }
        _ => {
            for i in 0..d {
                for l in 0..d {
                    let ail = w * a[i * d + l];
                    if ail == ZERO {
                        continue;
                    }
                    for j in 0..d {
                        out[i * d + j] += ail * b[l * d + j];
                    }
                }
            }
        }
    }
}

fn gauss_legendre_01(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = 0.5 * (1.0 - z);
        w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

/// Gauss-Legendre nodes and weights on `[0,1]`.
pub fn gl01(n: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_legendre_01(n)
}

/// Cell weights for the power weight `ρ^γ` on cells `[jh,(j+1)h]`:
/// `near[j] = ∫ ρ^γ (1-x)`, `far[j] = ∫ ρ^γ x`, with `x` the local
/// coordinate measured from the end nearer the singular point.
#[derive(Debug, Clone)]
pub struct Moments {
    pub gamma: f64,
    pub near: Vec<f64>,
    pub far: Vec<f64>,
}

impl Moments {
    pub fn new(gamma: f64, h: f64, cells: usize) -> Self {
        let (gx, gw) = gauss_legendre_01(12);
        let scale = h.powf(gamma + 1.0);
        let mut near = Vec::with_capacity(cells);
        let mut far = Vec::with_capacity(cells);
        for j in 0..cells {
            if j == 0 {
                near.push(if gamma > -1.0 {
                    scale / ((gamma + 1.0) * (gamma + 2.0))
                } else {
                    f64::INFINITY
                });
                far.push(if gamma > -2.0 { scale / (gamma + 2.0) } else { f64::INFINITY });
            } else {
                let (mut a, mut b) = (0.0, 0.0);
                for (x, w) in gx.iter().zip(&gw) {
                    let f = (j as f64 + x).powf(gamma) * w;
                    a += f * (1.0 - x);
                    b += f * x;
                }
                near.push(a * scale);
                far.push(b * scale);
            }
        }
        Self { gamma, near, far }
    }
}

/// Weighted contribution with the divergence guard for hyper-singular cells.
#[inline]
fn guarded(out: &mut [C64], d: usize, w: f64, a: &[C64], b: &[C64]) -> Result<()> {
    if w.is_infinite() {
        if a.iter().all(|z| *z == ZERO) || b.iter().all(|z| *z == ZERO) {
            return Ok(());
        }
        return Err(Error::DivergentMoment(
            "non-integrable weight against a nonvanishing endpoint value".into(),
        ));
    }
    mac(out, d, C64::new(w, 0.0), a, b);
    Ok(())
}

/// Cell weights of the combined weight `r^a (m·h − r)^b` on `[jh,(j+1)h]`:
/// `(∫ w·(1−x), ∫ w·x)` with `x` the local coordinate from node `j`.
#[derive(Debug, Clone)]
pub struct PairMoments {
    pub a: f64,
    pub b: f64,
    pub h: f64,
    rows: Vec<(f64, f64)>,
    mmax: usize,
}

fn binom_series(a: f64, b: f64, m: f64) -> (f64, f64) {
    // ∫₀¹ x^a (1 − x/m)^b (1−x) dx and ∫₀¹ x^{a+1} (1 − x/m)^b dx
    let mut c = 1.0;
    let (mut s1, mut s2) = (0.0, 0.0);
    for k in 0..400 {
        let kf = k as f64;
        let t1 = c * (1.0 / (a + kf + 1.0) - 1.0 / (a + kf + 2.0));
        let t2 = c / (a + kf + 2.0);
        s1 += t1;
        s2 += t2;
        if t1.abs() + t2.abs() <= 1e-17 * (s1.abs() + s2.abs()) {
            break;
        }
        c *= (kf - b) / ((kf + 1.0) * m);
    }
    (if a > -1.0 { s1 } else { f64::INFINITY }, if a > -2.0 { s2 } else { f64::INFINITY })
}

impl PairMoments {
    pub fn new(a: f64, b: f64, h: f64, mmax: usize) -> Self {
        let (gx, gw) = gauss_legendre_01(12);
        let scale = h.powf(a + b + 1.0);
        let rows: Vec<(f64, f64)> = (1..=mmax)
            .into_par_iter()
            .flat_map_iter(|m| {
                let mf = m as f64;
                let (gx, gw) = (&gx, &gw);
                (0..m).map(move |j| {
                    let (wl, wr) = if m == 1 {
                        let wl = if b > -2.0 && a > -1.0 { beta(a + 1.0, b + 2.0) } else { f64::INFINITY };
                        let wr = if a > -2.0 && b > -1.0 { beta(a + 2.0, b + 1.0) } else { f64::INFINITY };
                        (wl, wr)
                    } else if j == 0 {
                        let (s1, s2) = binom_series(a, b, mf);
                        let f = mf.powf(b);
                        (s1 * f, s2 * f)
                    } else if j == m - 1 {
                        let (s1, s2) = binom_series(b, a, mf);
                        let f = mf.powf(a);
                        (s2 * f, s1 * f)
                    } else {
                        let (mut l, mut r) = (0.0, 0.0);
                        let jf = j as f64;
                        for (x, w) in gx.iter().zip(gw) {
                            let f = (jf + x).powf(a) * (mf - jf - x).powf(b) * w;
                            l += f * (1.0 - x);
                            r += f * x;
                        }
                        (l, r)
                    };
                    (wl * scale, wr * scale)
                })
            })
            .collect();
        Self { a, b, h, rows, mmax }
    }

    #[inline]
    pub fn get(&self, m: usize, j: usize) -> (f64, f64) {
        debug_assert!(m >= 1 && m <= self.mmax && j < m);
        self.rows[(m - 1) * m / 2 + j]
    }

    pub fn mmax(&self) -> usize {
        self.mmax
    }
}

/// `∫_{lo·h}^{hi·h} X(r) Y(m·h − r) dr`, X to the left in matrix products.
///
/// The smooth parts `ψ_X(r) ψ_Y(m·h − r)` are interpolated linearly on each
/// cell; the weight `r^{γx} (m·h − r)^{γy}` is integrated exactly.
pub fn conv_at(x: &Sampled, y: &Sampled, m: usize, lo: usize, hi: usize, pm: &PairMoments) -> Result<Vec<C64>> {
    let d = prod_dim(x.d, y.d)?;
    let mut out = vec![ZERO; d * d];
    if hi <= lo {
        return Ok(out);
    }
    if hi > m || hi > x.n || m - lo > y.n {
        return Err(Error::IntervalExceeded(format!(
            "integration range [{lo},{hi}] at node {m} exceeds samples ({}, {})",
            x.n, y.n
        )));
    }
    if m > pm.mmax() || pm.a != x.gamma || pm.b != y.gamma {
        return Err(Error::GridMismatch("moment table does not match the factors".into()));
    }
    for j in lo..hi {
        let (wl, wr) = pm.get(m, j);
        guarded(&mut out, d, wl, x.psi(j), y.psi(m - j))?;
        guarded(&mut out, d, wr, x.psi(j + 1), y.psi(m - j - 1))?;
    }
    Ok(out)
}

type MomentKey = (u64, u64, u64);

static MOMENT_CACHE: OnceLock<Mutex<HashMap<MomentKey, Arc<PairMoments>>>> = OnceLock::new();

/// Shared moment table covering rows `1..=mmax`.
pub fn pair_moments(a: f64, b: f64, h: f64, mmax: usize) -> Arc<PairMoments> {
    let key = (a.to_bits(), b.to_bits(), h.to_bits());
    let cache = MOMENT_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    let mut want = mmax.max(1);
    if let Some(pm) = map.get(&key) {
        if pm.mmax() >= mmax {
            return pm.clone();
        }
        // grow geometrically so sweeps over rising m rebuild O(log m) times
        want = want.max(2 * pm.mmax());
    }
    if map.len() > 64 {
        map.clear();
    }
    let pm = Arc::new(PairMoments::new(a, b, h, want));
    map.insert(key, pm.clone());
    pm
}

/// `conv_at` with a shared moment table.
pub fn conv_range(x: &Sampled, y: &Sampled, m: usize, lo: usize, hi: usize) -> Result<Vec<C64>> {
    check_step(x.h, y.h)?;
    let pm = pair_moments(x.gamma, y.gamma, x.h, m.max(1));
    conv_at(x, y, m, lo, hi, &pm)
}

/// Limit of `(X∗Y)(t)/t^{γx+γy+1}` at `0⁺`.
pub fn conv_psi0(x: &Sampled, y: &Sampled) -> Vec<C64> {
    let d = prod_dim(x.d, y.d).unwrap_or(x.d);
    let mut out = vec![ZERO; d * d];
    let b = beta(x.gamma + 1.0, y.gamma + 1.0);
    mac(&mut out, d, C64::new(b, 0.0), x.psi(0), y.psi(0));
    out
}

/// Full convolution `(X∗Y)(t_m)` for `m = 1..=min(nx, ny)`.
pub fn conv(x: &Sampled, y: &Sampled) -> Result<Sampled> {
    check_step(x.h, y.h)?;
    for s in [x, y] {
        if s.gamma <= -1.0 {
            return Err(Error::NotIntegrable(format!("weight exponent {}", s.gamma)));
        }
    }
    let n = x.n.min(y.n);
    let d = prod_dim(x.d, y.d)?;
    let pm = pair_moments(x.gamma, y.gamma, x.h, n);
    let rows: Vec<Vec<C64>> = (1..=n)
        .into_par_iter()
        .map(|m| conv_at(x, y, m, 0, m, &pm))
        .collect::<Result<_>>()?;
    let flat: Vec<C64> = rows.into_iter().flatten().collect();
    let g = x.gamma + y.gamma + 1.0;
    let p0 = conv_psi0(x, y);
    debug_assert_eq!(p0.len(), d * d);
    Ok(Sampled::from_values(d, x.h, g, &flat, Some(&p0)))
}

/// Number of `t^{jν}` terms fitted by [`conv_split`].
pub const SPLIT_TERMS: usize = 3;

/// `conv(x, y)` with the first terms of `ψ_y = Σ c_j t^{jν}` split off, for
/// `ψ_y` smooth in `t^ν` rather than in `t`.
pub fn conv_split(x: &Sampled, y: &Sampled, nu: f64) -> Result<Sampled> {
    let (terms, rest) = y.split_series(nu, SPLIT_TERMS);
    let mut acc = conv(x, &rest)?;
    for t in &terms {
        acc = acc.add(&conv(x, t)?)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn power(alpha: f64, h: f64, n: usize) -> Sampled {
        let c = crate::special::rgamma(alpha);
        Sampled::from_psi(1, h, alpha - 1.0, vec![C64::new(c, 0.0); n + 1])
    }

    #[test]
    fn gl_integrates_polynomials() {
        let (x, w) = gl01(12);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(7)).sum();
        assert!((s - 1.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn moments_sum_to_cell_integral() {
        let g = -0.5;
        let h = 0.1;
        let m = Moments::new(g, h, 5);
        for j in 0..5 {
            let a = j as f64 * h;
            let b = a + h;
            let exact = (b.powf(g + 1.0) - a.powf(g + 1.0)) / (g + 1.0);
            assert!((m.near[j] + m.far[j] - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn power_law_semigroup_numeric() {
        let (h, n) = (1.0 / 64.0, 64);
        let z = conv(&power(0.5, h, n), &power(0.5, h, n)).unwrap();
        for i in 1..=n {
            assert!((z.at(i).re - 1.0).abs() < 1e-12, "node {i}: {}", z.at(i));
        }
    }

    #[test]
    fn smooth_times_singular_is_second_order() {
        // (g_{1/2} ∗ e^{-t})(1) by a fine Gauss rule
        let want = {
            let (x, w) = gl01(40);
            // substitute r = 1 - u², removes the singularity
            x.iter().zip(&w).map(|(u, w)| 2.0 * w * (-(1.0 - u * u)).exp() / std::f64::consts::PI.sqrt()).sum::<f64>()
        };
        let mut errs = Vec::new();
        for n in [32usize, 64] {
            let h = 1.0 / n as f64;
            let e = Sampled::from_psi(1, h, 0.0, (0..=n).map(|i| C64::new((-(i as f64) * h).exp(), 0.0)).collect());
            let z = conv(&power(0.5, h, n), &e).unwrap();
            errs.push((z.at(n).re - want).abs());
        }
        assert!(errs[1] < 1e-4 && errs[0] / errs[1] > 3.0, "{errs:?}");
    }

    #[test]
    fn hyper_singular_guard() {
        let h = 0.1;
        let w = power(-0.5, h, 4);
        let x = Sampled::from_psi(1, h, 0.0, vec![C64::new(1.0, 0.0); 5]);
        assert!(matches!(conv_range(&x, &w, 4, 0, 4), Err(Error::DivergentMoment(_))));
    }

    #[test]
    fn add_mixes_weights() {
        let h = 0.25;
        let a = power(0.5, h, 4);
        let b = power(2.0, h, 4);
        let s = a.add(&b).unwrap();
        for i in 1..=4 {
            let t = i as f64 * h;
            let want = t.powf(-0.5) / std::f64::consts::PI.sqrt() + t;
            assert!((s.at(i).re - want).abs() < 1e-13);
        }
    }
}
