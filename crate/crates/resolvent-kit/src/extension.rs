//! Extension of local families from `(0, T]` to `(0, (n+1)T]`.
//!
//! Stage `j → j+1` keeps or convolves `S_j` on `(0, jT]` and builds the new
//! piece on `(jT, (j+1)T]` from `S_j`, `S_1` and a lifted weight.

use crate::bivar::{minus_conv2, plus_conv2_graded};
use crate::error::{Error, Result};
use crate::families::{Provenance, SampledFamily};
use crate::kernels::{conv1, solve_pair, Grid, Kernel, PairMode};
use crate::mat;
use crate::quad::{self, conv_range, Sampled};
use crate::C64;
use rayon::prelude::*;
use std::fmt;


#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum Method {
    General,
    Sharp,
    NojumpAa,
    NojumpA1a,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::General => "general",
            Method::Sharp => "sharp",
            Method::NojumpAa => "nojump_aa",
            Method::NojumpA1a => "nojump_a1a",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtensionPlan {
    pub method: Method,
    pub n: usize,
    /// Local endpoint; defaults to the input grid minus its last node.
    pub t: Option<f64>,
    pub b: Option<Kernel>,
    pub c: Option<Kernel>,
    /// Overrides `c′` when `c` has no derivative descriptor.
    pub c_prime: Option<Kernel>,
    /// Allowed deviation in the numeric hypothesis checks.
    pub hypothesis_tol: f64,
}

impl ExtensionPlan {
    pub fn new(method: Method, n: usize) -> Self {
        Self { method, n, t: None, b: None, c: None, c_prime: None, hypothesis_tol: 1e-6 }
    }

    pub fn with_b(mut self, b: Kernel) -> Self {
        self.b = Some(b);
        self
    }

    pub fn with_c(mut self, c: Kernel) -> Self {
        self.c = Some(c);
        self
    }

    pub fn with_c_prime(mut self, c: Kernel) -> Self {
        self.c_prime = Some(c);
        self
    }

    pub fn with_t(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }
}

/// `k_out` of each method, with `b` where needed.
pub fn output_kernel(method: Method, a: &Kernel, k: &Kernel, b: Option<&Kernel>, n: usize) -> Result<Kernel> {
    let n32 = n as u32;
    Ok(match method {
        Method::General => Kernel::conv(Kernel::pow(Kernel::conv(k.clone(), a.clone()), n32), k.clone()).simplify(),
        Method::Sharp => {
            let b = b.ok_or_else(|| Error::HypothesisViolation("sharp extension needs b".into()))?;
            Kernel::conv(Kernel::pow(b.clone(), n32), k.clone()).simplify()
        }
        Method::NojumpAa | Method::NojumpA1a => k.clone(),
    })
}

/// Largest deviation of `(f∗g)(t_i)` from `target(t_i)` on `grid`.
fn conv_deviation(f: &Kernel, g: &Kernel, target: &Sampled, grid: &Grid) -> Result<f64> {
    let fg = conv1(f, g, grid)?;
    Ok((1..=grid.n)
        .map(|i| (fg.at(i) - target.at(i)).norm() / target.at(i).norm().max(1.0))
        .fold(0.0, f64::max))
}

fn check_unit(a: &Kernel, c: &Kernel, grid: &Grid, tol: f64) -> Result<()> {
    let one = Kernel::one().sample_on(grid)?;
    let dev = conv_deviation(a, c, &one, grid)?;
    if !(dev <= tol) {
        return Err(Error::HypothesisViolation(format!("(a∗c) deviates from 1 by {dev:.3e}")));
    }
    Ok(())
}

fn derivative_of(c: &Kernel, plan: &ExtensionPlan) -> Result<Kernel> {
    match &plan.c_prime {
        Some(d) => Ok(d.clone()),
        None => c.derivative().ok_or_else(|| Error::NoClosedForm(format!("derivative of {c}"))),
    }
}

/// `ν` with `ψ_S` smooth in `t^ν`; `None` when `ψ_S` is smooth in `t`.
fn expansion_exponent(a: &Kernel) -> Option<f64> {
    match a.as_scaled_power() {
        Some((_, e)) if e > 0.0 && e < 1.0 => Some(e),
        _ => None,
    }
}

fn conv_fam(k: &Sampled, s: &Sampled, nu: Option<f64>) -> Result<Sampled> {
    match nu {
        Some(nu) => quad::conv_split(k, s, nu),
        None => quad::conv(k, s),
    }
}

struct Ctx {
    method: Method,
    p: usize,
    d: usize,
    nu: Option<f64>,
    a: Sampled,
    k: Sampled,
    w: Option<Sampled>,
    b: Option<Sampled>,
    /// `S_1` and `a∗S_1` on `p` nodes.
    s1: Sampled,
    as1: Option<Sampled>,
    a_k: Kernel,
    k_k: Kernel,
    b_k: Option<Kernel>,
    h: f64,
}

impl Ctx {
    fn flat(&self, s: &Sampled, m: usize) -> Vec<C64> {
        let dd = self.d * self.d;
        (1..=m)
            .flat_map(|i| {
                let v = s.value(i);
                if v.len() == dd {
                    v.to_vec()
                } else {
                    mat::to_flat(&(mat::identity(self.d) * v[0]))
                }
            })
            .collect()
    }

    /// One stage: `S_j` on `jP` nodes to `S_{j+1}` on `(j+1)P` nodes, values only.
    fn stage(&self, sj: &Sampled, j: usize) -> Result<Vec<C64>> {
        let p = self.p;
        let jp = j * p;
        let mut vals = match self.method {
            Method::General => {
                let ka = quad::conv(&self.k, &self.a)?.truncate(jp);
                self.flat(&conv_fam(&ka, sj, self.nu)?, jp)
            }
            Method::Sharp => {
                let b = self.b.as_ref().unwrap().truncate(jp);
                self.flat(&conv_fam(&b, sj, self.nu)?, jp)
            }
            Method::NojumpAa | Method::NojumpA1a => self.flat(sj, jp),
        };
        let upper = (j + 1) * p;
        let kj = match self.method {
            Method::General => {
                let kj = Kernel::conv(
                    Kernel::pow(Kernel::conv(self.k_k.clone(), self.a_k.clone()), (j - 1).max(1) as u32),
                    self.k_k.clone(),
                );
                Some(if j == 1 { self.k.truncate(upper) } else { kj.simplify().sample(self.h, upper)? })
            }
            Method::Sharp => {
                Some(Kernel::pow(self.b_k.clone().unwrap(), j as u32).simplify().sample(self.h, upper)?)
            }
            _ => None,
        };
        let asj = match self.method {
            Method::General => Some(conv_fam(&self.a.truncate(jp), sj, self.nu)?),
            _ => None,
        };
        let rows: Vec<Vec<C64>> = (1..=p)
            .into_par_iter()
            .map(|q| -> Result<Vec<C64>> {
                let m = jp + q;
                let dd = self.d * self.d;
                let mut out = vec![C64::new(0.0, 0.0); dd];
                let mut acc = |v: Vec<C64>, s: f64| {
                    for i in 0..dd {
                        out[i] += if v.len() == dd { v[i] } else if i % (self.d + 1) == 0 { v[0] } else { C64::new(0.0, 0.0) } * s;
                    }
                };
                match self.method {
                    Method::General => {
                        acc(plus_conv2_graded(&self.a, sj, &self.s1, jp, q, self.nu)?, 1.0);
                        acc(conv_range(asj.as_ref().unwrap(), &self.k, m, 0, jp)?, 1.0);
                        acc(conv_range(self.as1.as_ref().unwrap(), kj.as_ref().unwrap(), m, 0, q)?, 1.0);
                    }
                    Method::Sharp => {
                        acc(conv_range(sj, self.b.as_ref().unwrap(), m, 0, jp)?, 1.0);
                        acc(conv_range(&self.s1, kj.as_ref().unwrap(), m, 0, q)?, 1.0);
                        acc(plus_conv2_graded(self.w.as_ref().unwrap(), sj, &self.s1, jp, q, self.nu)?, -1.0);
                    }
                    Method::NojumpAa => {
                        acc(plus_conv2_graded(self.w.as_ref().unwrap(), sj, &self.s1, jp, q, self.nu)?, -1.0);
                    }
                    Method::NojumpA1a => {
                        let r = jp - q;
                        if r == 0 && sj.gamma < 0.0 {
                            return Err(Error::DomainError("reflection hits a singular origin".into()));
                        }
                        acc(sj.value(r).to_vec(), -1.0);
                        let w = self.w.as_ref().unwrap();
                        acc(minus_conv2(w, sj, &self.s1, jp, q)?, 1.0);
                        acc(plus_conv2_graded(w, sj, &self.s1, jp, q, self.nu)?, -1.0);
                    }
                }
                Ok(out)
            })
            .collect::<Result<_>>()?;
        vals.extend(rows.into_iter().flatten());
        debug_assert_eq!(vals.len(), upper * self.d * self.d);
        Ok(vals)
    }
}

/// Runs the recursion for `plan` and returns `S_{n+1}` on `(0, (n+1)T]`.
pub fn extend(fam: &SampledFamily, plan: &ExtensionPlan) -> Result<SampledFamily> {
    Ok(extend_stages(fam, plan)?.pop().expect("at least one stage"))
}

/// All stages `S_1, …, S_{n+1}`.
pub fn extend_stages(fam: &SampledFamily, plan: &ExtensionPlan) -> Result<Vec<SampledFamily>> {
    if plan.n == 0 {
        return Err(Error::DomainError("extension needs n ≥ 1".into()));
    }
    let h = fam.values.h;
    let n_in = fam.values.n;
    let p = match plan.t {
        None => n_in.saturating_sub(1),
        Some(t) => {
            let p = (t / h).round() as usize;
            if ((p as f64) * h - t).abs() > 1e-9 * t.max(h) {
                return Err(Error::GridMismatch(format!("T = {t} is not a multiple of h = {h}")));
            }
            p
        }
    };
    if p == 0 || p >= n_in {
        return Err(Error::GridMismatch(format!(
            "T must be a grid point strictly inside the input interval (0, {}]",
            fam.grid.t_end
        )));
    }
    let t_loc = p as f64 * h;
    let total = (plan.n + 1) * p;
    let local = Grid::with_step(h, p)?;
    let out_grid = Grid::with_step(h, total)?;
    let (a, k) = (fam.a.clone(), fam.k.clone());
    let d = fam.d();
    let mut b_k = None;
    let mut w = None;
    let mut nu = expansion_exponent(&a);
    match plan.method {
        Method::General => {}
        Method::Sharp => {
            let (b, c) = match (&plan.b, &plan.c) {
                (Some(b), Some(c)) => (b.clone(), c.clone()),
                _ => {
                    let sol = solve_pair(&a, &k, PairMode::Unit)?;
                    if !(sol.b_valid && sol.c_valid) {
                        return Err(Error::HypothesisViolation(sol.violations.join("; ")));
                    }
                    (plan.b.clone().unwrap_or(sol.b), plan.c.clone().unwrap_or(sol.c))
                }
            };
            let kt = k.sample_on(&out_grid)?;
            let dev = conv_deviation(&a, &b, &kt, &out_grid)?;
            if !(dev <= plan.hypothesis_tol) {
                return Err(Error::HypothesisViolation(format!("(a∗b) deviates from k by {dev:.3e}")));
            }
            check_unit(&a, &c, &out_grid, plan.hypothesis_tol)?;
            w = Some(derivative_of(&c, plan)?.sample(h, total)?);
            b_k = Some(b);
        }
        Method::NojumpAa => {
            if !a.same_as(&k) {
                return Err(Error::HypothesisViolation(format!("pair ({a}, {k}) is not of the form (a, a)")));
            }
            if let Some((_, e)) = a.as_scaled_power() {
                if !(e > 0.0 && e < 1.0) {
                    return Err(Error::HypothesisViolation(format!("a = g_α needs 0 < α < 1, got α = {e}")));
                }
            }
            let c = match &plan.c {
                Some(c) => c.clone(),
                None => solve_pair(&a, &Kernel::one(), PairMode::Unit)?.c,
            };
            check_unit(&a, &c, &out_grid, plan.hypothesis_tol)?;
            w = Some(derivative_of(&c, plan)?.sample(h, total)?);
        }
        Method::NojumpA1a => {
            let c = plan.c.clone().ok_or_else(|| {
                Error::NoShippedPair(
                    "no kernel pair of power-law type satisfies (a∗c) = 1 with c(0⁺) = 0; supply c (and c′) for your (a∗1, a) pair".into(),
                )
            })?;
            let a1 = Kernel::conv(k.clone(), Kernel::one());
            let dev = conv_deviation(&k, &Kernel::one(), &fam.a.sample_on(&out_grid)?, &out_grid)?;
            if !(a.same_as(&a1) || dev <= plan.hypothesis_tol) {
                return Err(Error::HypothesisViolation(format!("pair ({a}, {k}) is not of the form (a∗1, a)")));
            }
            match c.value_at_zero() {
                Some(z) if z.norm() <= plan.hypothesis_tol => {}
                _ => return Err(Error::HypothesisViolation(format!("c(0⁺) = 0 fails for {c}"))),
            }
            check_unit(&k, &c, &out_grid, plan.hypothesis_tol)?;
            w = Some(derivative_of(&c, plan)?.sample(h, total)?);
            nu = expansion_exponent(&k);
        }
    }
    let k_out = output_kernel(plan.method, &a, &k, b_k.as_ref(), plan.n)?;
    let s1 = fam.values.truncate(p);
    let a_s = a.sample(h, total)?;
    let as1 = match plan.method {
        Method::General => Some(conv_fam(&a_s.truncate(p), &s1, nu)?),
        _ => None,
    };
    let ctx = Ctx {
        method: plan.method,
        p,
        d,
        nu,
        a: a_s,
        k: k.sample(h, total)?,
        w,
        b: b_k.as_ref().map(|b| b.sample(h, total)).transpose()?,
        s1: s1.clone(),
        as1,
        a_k: a.clone(),
        k_k: k.clone(),
        b_k: b_k.clone(),
        h,
    };
    let first = SampledFamily { grid: local, values: s1.clone(), ..fam.clone() };
    let mut stages = vec![first];
    let mut sj = s1;
    for j in 1..=plan.n {
        let vals = ctx.stage(&sj, j)?;
        let kj = output_kernel(plan.method, &a, &k, b_k.as_ref(), j)?;
        let keep = matches!(plan.method, Method::NojumpAa | Method::NojumpA1a);
        let gamma = if keep { sj.gamma } else { kj.singularity_exponent() };
        let psi0 = if keep {
            sj.psi(0).to_vec()
        } else {
            mat::to_flat(&(mat::identity(d) * kj.leading_coefficient()))
        };
        let mut next = Sampled::from_values(d, h, gamma, &vals, Some(&psi0));
        if keep {
            // the first branch is a copy: keep the stored smooth parts exactly
            let jp = j * p;
            let dd = d * d;
            let mut psi = sj.psis().to_vec();
            psi.extend_from_slice(&next.psis()[(jp + 1) * dd..]);
            next = Sampled::from_psi(d, h, gamma, psi);
        }
        stages.push(SampledFamily {
            grid: Grid::with_step(h, (j + 1) * p)?,
            values: next.clone(),
            a: a.clone(),
            k: kj,
            generator: fam.generator.clone(),
            pair: if keep { fam.pair } else { None },
            provenance: Provenance::Extended { method: plan.method.to_string(), n: j, t: t_loc },
        });
        sj = next;
    }
    let last = stages.last_mut().unwrap();
    last.k = k_out;
    Ok(stages)
}

pub fn extend_general(fam: &SampledFamily, n: usize) -> Result<SampledFamily> {
    extend(fam, &ExtensionPlan::new(Method::General, n))
}

pub fn extend_sharp(fam: &SampledFamily, n: usize, b: Option<Kernel>, c: Option<Kernel>) -> Result<SampledFamily> {
    let mut plan = ExtensionPlan::new(Method::Sharp, n);
    plan.b = b;
    plan.c = c;
    extend(fam, &plan)
}

pub fn extend_nojump_aa(fam: &SampledFamily, n: usize, c: Option<Kernel>) -> Result<SampledFamily> {
    let mut plan = ExtensionPlan::new(Method::NojumpAa, n);
    plan.c = c;
    extend(fam, &plan)
}

pub fn extend_nojump_a1a(fam: &SampledFamily, n: usize, c: Kernel, c_prime: Option<Kernel>) -> Result<SampledFamily> {
    let mut plan = ExtensionPlan::new(Method::NojumpA1a, n).with_c(c);
    plan.c_prime = c_prime;
    extend(fam, &plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{default_probes, make_family, Generator, Pair};
    use crate::special::ml_value;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn nil() -> Generator {
        Generator::dense(mat::from_flat(2, &[c(0.0), c(1.0), c(0.0), c(0.0)])).unwrap()
    }

    #[test]
    fn general_semigroup_nilpotent() {
        let f = make_family(&Pair::Semigroup, &nil(), &Grid::new(1.0 + 1.0 / 32.0, 33).unwrap()).unwrap();
        let e = extend_general(&f, 1).unwrap();
        assert!(e.k.same_as(&Kernel::g(3.0)));
        assert_eq!(e.values.n, 64);
        let s = e.value(48);
        let want = mat::from_flat(2, &[c(1.125), c(0.5625), c(0.0), c(1.125)]);
        assert!((s - want).norm() < 1e-3, "{}", e.value(48));
    }

    #[test]
    fn sharp_fractional() {
        let f = make_family(&Pair::Frac { alpha: 0.5, beta: 0.0 }, &Generator::scalar(c(-1.0)), &Grid::new(1.0 + 1.0 / 64.0, 65).unwrap()).unwrap();
        let e = extend_sharp(&f, 1, None, None).unwrap();
        assert!(e.k.same_as(&Kernel::g(1.5)));
        let r = e.volterra_residual(&default_probes(1), 1e-2).unwrap();
        assert!(r.pass, "{}", r.to_json().unwrap());
        for i in [80usize, 100, 128] {
            let t = i as f64 / 64.0;
            let want = t.sqrt() * ml_value(0.5, 1.5, c(-t.sqrt()));
            assert!((e.values.at(i) - want).norm() < 1e-2 * want.norm(), "{i}");
        }
    }

    #[test]
    fn sharp_rejects_invalid_b() {
        let f = make_family(&Pair::FracAa { alpha: 0.5 }, &Generator::scalar(c(-1.0)), &Grid::new(1.0, 8).unwrap()).unwrap();
        assert!(matches!(extend_sharp(&f, 1, None, None), Err(Error::HypothesisViolation(_))));
    }

    #[test]
    fn nojump_identity_generator() {
        let f = make_family(&Pair::FracAa { alpha: 0.5 }, &Generator::scalar(c(0.0)), &Grid::new(1.0 + 1.0 / 64.0, 65).unwrap()).unwrap();
        let e = extend_nojump_aa(&f, 1, None).unwrap();
        assert_eq!(&e.values.values()[..64], &f.values.values()[..64]);
        let v = e.values.at(128);
        assert!((v - c(1.0 / (2.0 * std::f64::consts::PI).sqrt())).norm() < 3e-3, "{v}");
    }

    #[test]
    fn nojump_stage_two_keeps_stage_one() {
        let f = make_family(&Pair::FracAa { alpha: 0.5 }, &Generator::scalar(c(-1.0)), &Grid::new(1.0 + 1.0 / 16.0, 17).unwrap()).unwrap();
        let st = extend_stages(&f, &ExtensionPlan::new(Method::NojumpAa, 2)).unwrap();
        assert_eq!(st.len(), 3);
        assert_eq!(&st[2].values.values()[..32], st[1].values.values());
    }

    #[test]
    fn nojump_rejects_alpha_above_one() {
        let f = make_family(&Pair::FracAa { alpha: 1.5 }, &Generator::scalar(c(-1.0)), &Grid::new(1.0, 8).unwrap()).unwrap();
        assert!(matches!(extend_nojump_aa(&f, 1, None), Err(Error::HypothesisViolation(_))));
    }

    #[test]
    fn a1a_needs_c() {
        let f = make_family(&Pair::Semigroup, &Generator::scalar(c(-1.0)), &Grid::new(1.0, 8).unwrap()).unwrap();
        let plan = ExtensionPlan::new(Method::NojumpA1a, 1);
        assert!(matches!(extend(&f, &plan), Err(Error::NoShippedPair(_))));
    }

    #[test]
    fn output_kernels_follow_the_exponent_law() {
        for (al, be, n) in [(0.5, 0.0, 1usize), (0.5, 0.5, 2), (0.25, 1.0, 3)] {
            let (a, k) = (Kernel::g(al), Kernel::g(be + 1.0));
            let b = Kernel::g(be - al + 1.0);
            let out = output_kernel(Method::Sharp, &a, &k, Some(&b), n).unwrap();
            assert!(out.same_as(&Kernel::g(n as f64 * (be - al + 1.0) + be + 1.0)), "{out}");
        }
    }
}
