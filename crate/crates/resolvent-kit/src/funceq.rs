//! Functional equations of resolvent families, checked on sampled families.
//!
//! Each equation is evaluated in integrated form at node pairs `(t, s)` with
//! `t + s` inside the sampled interval; the residual is the operator norm of
//! `LHS − RHS`.

use crate::bivar::{pair_lattice, plus_conv2_graded};
use crate::error::{Error, Result};
use crate::families::{apply, initial_nodes, ResidualPath, SampledFamily};
use crate::kernels::{solve_pair, Kernel, PairMode};
use crate::mat::{self, CMat};
use crate::quad::{self, conv_range, Sampled};
use crate::report::{ResidualReport, Residuals};
use crate::special::gamma;
use crate::C64;
use rayon::prelude::*;
use std::fmt;

/// Upper bound on `(t, s)` pairs per check.
pub const MAX_PAIRS: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EquationCase {
    DefiningVolterra,
    LizamaPoblete,
    TranslationAk,
    TranslationAa,
    SharpBc,
    SemigroupAa,
    SuperdiffTk,
    Cauchy,
    CosineIntegrated,
    Dalembert,
    ConvolutedK,
    EpsSemigroup(f64),
    EpsResolvent(f64),
    /// Translation formula of the `(g_α, g_{β+1})` pair written with explicit
    /// power weights.
    RofTranslation,
}

impl EquationCase {
    pub const IDS: [&'static str; 14] = [
        "defining_volterra",
        "lizama_poblete",
        "translation_ak",
        "translation_aa",
        "sharp_bc",
        "semigroup_aa",
        "superdiff_tk",
        "cauchy",
        "cosine_integrated",
        "dalembert",
        "convoluted_k",
        "eps_semigroup",
        "eps_resolvent",
        "rof_translation",
    ];

    pub fn id(&self) -> &'static str {
        use EquationCase::*;
        match self {
            DefiningVolterra => "defining_volterra",
            LizamaPoblete => "lizama_poblete",
            TranslationAk => "translation_ak",
            TranslationAa => "translation_aa",
            SharpBc => "sharp_bc",
            SemigroupAa => "semigroup_aa",
            SuperdiffTk => "superdiff_tk",
            Cauchy => "cauchy",
            CosineIntegrated => "cosine_integrated",
            Dalembert => "dalembert",
            ConvolutedK => "convoluted_k",
            EpsSemigroup(_) => "eps_semigroup",
            EpsResolvent(_) => "eps_resolvent",
            RofTranslation => "rof_translation",
        }
    }

    /// Case from its id; the two ε equations take `eps`.
    pub fn parse(id: &str, eps: Option<f64>) -> Result<Self> {
        use EquationCase::*;
        let e = || eps.ok_or_else(|| Error::Parse(format!("equation `{id}` needs an epsilon")));
        Ok(match id {
            "defining_volterra" => DefiningVolterra,
            "lizama_poblete" => LizamaPoblete,
            "translation_ak" => TranslationAk,
            "translation_aa" => TranslationAa,
            "sharp_bc" => SharpBc,
            "semigroup_aa" => SemigroupAa,
            "superdiff_tk" => SuperdiffTk,
            "cauchy" => Cauchy,
            "cosine_integrated" => CosineIntegrated,
            "dalembert" => Dalembert,
            "convoluted_k" => ConvolutedK,
            "eps_semigroup" => EpsSemigroup(e()?),
            "eps_resolvent" => EpsResolvent(e()?),
            "rof_translation" => RofTranslation,
            _ => {
                return Err(Error::Parse(format!(
                    "unknown equation `{id}`; expected one of {}",
                    Self::IDS.join(", ")
                )))
            }
        })
    }

    /// Kernel requirement, in words.
    pub fn requirement(&self) -> &'static str {
        use EquationCase::*;
        match self {
            DefiningVolterra | LizamaPoblete => "any pair",
            TranslationAk => "integrable a",
            TranslationAa => "a = k",
            SharpBc => "a = g_α, k = g_{β+1} with 0 < α < 1, β − α > −1",
            SemigroupAa => "a = k = g_α with 0 < α < 1",
            SuperdiffTk => "a = g_α, k = g_{β+1} with 0 < α < 2, β − α > −2",
            Cauchy => "a = k = 1",
            CosineIntegrated | Dalembert => "a = t, k = 1",
            ConvolutedK => "a = 1, k twice differentiable at 0",
            EpsSemigroup(_) => "a = 1, k = (1−ε) + εt",
            EpsResolvent(_) => "a = (1−ε) + εt, k = 1",
            RofTranslation => "a = g_α, k = g_{β+1}",
        }
    }
}

impl fmt::Display for EquationCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EquationCase::EpsSemigroup(e) | EquationCase::EpsResolvent(e) => write!(f, "{}(eps={e})", self.id()),
            _ => f.write_str(self.id()),
        }
    }
}

fn invalid(case: &EquationCase, fam: &SampledFamily) -> Error {
    Error::ValidityViolation(format!(
        "{} needs {}; family has a = {}, k = {}",
        case.id(),
        case.requirement(),
        fam.a,
        fam.k
    ))
}

fn power_of(k: &Kernel) -> Option<f64> {
    match k.as_scaled_power() {
        Some((c, e)) if c == C64::new(1.0, 0.0) => Some(e),
        _ => None,
    }
}

/// Numerical kernel equality on the family's nodes.
fn samples_match(k: &Kernel, target: &Kernel, fam: &SampledFamily) -> bool {
    let n = fam.values.n;
    let (Ok(x), Ok(y)) = (k.sample(fam.values.h, n), target.sample(fam.values.h, n)) else {
        return false;
    };
    (1..=n).all(|i| (x.at(i) - y.at(i)).norm() <= 1e-12 * (1.0 + y.at(i).norm()))
}

/// Kernels that the per-pair formulas need, sampled on the family grid.
struct Parts {
    s: Sampled,
    n: usize,
    d: usize,
    h: f64,
    nu: Option<f64>,
    a: Option<Sampled>,
    k: Option<Sampled>,
    /// `a∗S`.
    f: Option<Sampled>,
    /// `1∗S`.
    i: Option<Sampled>,
    w1: Option<Sampled>,
    w2: Option<Sampled>,
    /// Further kernel samples and scalars per case.
    w3: Option<Sampled>,
    c0: C64,
    c1: C64,
}

impl Parts {
    fn new(fam: &SampledFamily) -> Self {
        let nu = match fam.a.as_scaled_power() {
            Some((_, e)) if e > 0.0 && e < 1.0 => Some(e),
            _ => None,
        };
        Self {
            s: fam.values.clone(),
            n: fam.values.n,
            d: fam.d(),
            h: fam.values.h,
            nu,
            a: None,
            k: None,
            f: None,
            i: None,
            w1: None,
            w2: None,
            w3: None,
            c0: C64::new(0.0, 0.0),
            c1: C64::new(0.0, 0.0),
        }
    }

    fn sample(&self, k: &Kernel) -> Result<Sampled> {
        k.sample(self.h, self.n)
    }

    /// `x ∗ S` with the leading term of `S` split off when `ψ_S` is smooth
    /// in `t^ν`.
    fn conv_s(&self, x: &Sampled) -> Result<Sampled> {
        match self.nu {
            Some(nu) => quad::conv_split(x, &self.s, nu),
            None => quad::conv(x, &self.s),
        }
    }

    fn m(&self, v: &[C64]) -> CMat {
        let dd = v.len();
        let d = (dd as f64).sqrt().round() as usize;
        if d == self.d {
            mat::from_flat(d, v)
        } else {
            mat::identity(self.d) * v[0]
        }
    }

    fn sv(&self, x: &Sampled, i: usize) -> CMat {
        if i == 0 {
            return self.m(x.psi(0));
        }
        self.m(x.value(i))
    }

    fn plus2(&self, w: &Sampled, x: &Sampled, y: &Sampled, i: usize, j: usize, nu: Option<f64>) -> Result<CMat> {
        Ok(self.m(&plus_conv2_graded(w, x, y, i, j, nu)?))
    }

    /// `∫₀ˢ w(s−r) X(t+r) dr`.
    fn left_shift(&self, w: &Sampled, x: &Sampled, i: usize, j: usize) -> Result<CMat> {
        let psi: Vec<C64> = (0..=j).flat_map(|r| x.value(i + r).to_vec()).collect();
        let xt = Sampled::from_psi(x.d, x.h, 0.0, psi);
        Ok(self.m(&conv_range(w, &xt, j, 0, j)?))
    }

    /// `∫₀ˢ w(t+s−r) X(r) dr`.
    fn right_shift(&self, w: &Sampled, x: &Sampled, i: usize, j: usize) -> Result<CMat> {
        Ok(self.m(&conv_range(x, w, i + j, 0, j)?))
    }
}

fn need(x: &Option<Sampled>) -> &Sampled {
    x.as_ref().expect("prepared sample")
}

/// Checks validity and precomputes what the pair formulas use.
fn prepare(case: &EquationCase, fam: &SampledFamily) -> Result<Parts> {
    use EquationCase::*;
    let mut p = Parts::new(fam);
    let bad = || invalid(case, fam);
    match *case {
        DefiningVolterra => {}
        LizamaPoblete => {
            p.k = Some(p.sample(&fam.k)?);
            p.f = Some(fam.a_conv_s(ResidualPath::Quadrature)?);
        }
        TranslationAk => {
            if !fam.a.is_integrable() {
                return Err(bad());
            }
            p.a = Some(p.sample(&fam.a)?);
            p.k = Some(p.sample(&fam.k)?);
            p.f = Some(fam.a_conv_s(ResidualPath::Quadrature)?);
        }
        TranslationAa => {
            if !fam.a.same_as(&fam.k) || !fam.a.is_integrable() {
                return Err(bad());
            }
            p.a = Some(p.sample(&fam.a)?);
        }
        SharpBc | SemigroupAa => {
            if *case == SemigroupAa && !fam.a.same_as(&fam.k) {
                return Err(bad());
            }
            let sol = solve_pair(&fam.a, &fam.k, PairMode::Unit).map_err(|_| bad())?;
            if *case == SharpBc {
                sol.require_valid().map_err(|e| Error::ValidityViolation(format!("{}: {e}", case.id())))?;
            } else if !sol.c_valid {
                return Err(Error::ValidityViolation(format!("{}: {}", case.id(), sol.violations.join("; "))));
            }
            let cp = sol.c.derivative().ok_or_else(bad)?;
            p.w1 = Some(p.sample(&cp)?);
            if *case == SharpBc {
                p.w2 = Some(p.sample(&sol.b)?);
            }
        }
        SuperdiffTk => {
            let sol = solve_pair(&fam.a, &fam.k, PairMode::Ramp).map_err(|_| bad())?;
            sol.require_valid().map_err(|e| Error::ValidityViolation(format!("{}: {e}", case.id())))?;
            let b = p.sample(&sol.b)?;
            let c = p.sample(&sol.c)?;
            p.i = Some(p.conv_s(&p.sample(&Kernel::one())?)?);
            p.w3 = Some(p.conv_s(&c)?);
            p.w1 = Some(c);
            p.w2 = Some(b);
        }
        Cauchy => {
            if !(fam.a.same_as(&Kernel::one()) && fam.k.same_as(&Kernel::one())) {
                return Err(bad());
            }
        }
        CosineIntegrated | Dalembert => {
            if !(fam.a.same_as(&Kernel::g(2.0)) && fam.k.same_as(&Kernel::one())) {
                return Err(bad());
            }
            if *case == Dalembert && fam.values.gamma != 0.0 {
                return Err(bad());
            }
            p.i = Some(p.conv_s(&p.sample(&Kernel::one())?)?);
        }
        ConvolutedK => {
            if !fam.a.same_as(&Kernel::one()) || !fam.k.is_c2() {
                return Err(bad());
            }
            let k1 = fam.k.derivative().ok_or_else(bad)?;
            let k2 = k1.derivative().ok_or_else(bad)?;
            p.c0 = fam.k.value_at_zero().ok_or_else(bad)?;
            p.c1 = k1.value_at_zero().ok_or_else(bad)?;
            p.w1 = Some(p.sample(&k1)?);
            p.w2 = Some(p.sample(&k2)?);
            p.i = Some(p.conv_s(&p.sample(&Kernel::one())?)?);
        }
        EpsSemigroup(e) | EpsResolvent(e) => {
            if !(0.0..=1.0).contains(&e) {
                return Err(Error::OutOfRange(format!("epsilon {e} outside [0, 1]")));
            }
            let lin = Kernel::Interpolant(e);
            let ok = match *case {
                EpsSemigroup(_) => fam.a.same_as(&Kernel::one()) && samples_match(&fam.k, &lin, fam),
                _ => fam.k.same_as(&Kernel::one()) && samples_match(&fam.a, &lin, fam),
            };
            if !ok {
                return Err(bad());
            }
            p.i = Some(p.conv_s(&p.sample(&Kernel::one())?)?);
        }
        RofTranslation => {
            let (alpha, kexp) = match (power_of(&fam.a), power_of(&fam.k)) {
                (Some(a), Some(k)) => (a, k),
                _ => return Err(bad()),
            };
            let beta = kexp - 1.0;
            if beta - alpha <= -1.0 {
                return Err(Error::ValidityViolation(format!(
                    "rof_translation: β − α > −1 fails (β − α = {})",
                    beta - alpha
                )));
            }
            let ones = |g: f64| Sampled::from_psi(1, p.h, g, vec![C64::new(1.0, 0.0); p.n + 1]);
            p.w1 = Some(ones(-1.0 - alpha));
            p.w2 = Some(ones(beta - alpha));
            p.c0 = C64::new(alpha * gamma(beta - alpha + 1.0) / gamma(1.0 - alpha), 0.0);
        }
    }
    Ok(p)
}

/// `(LHS, RHS)` at nodes `(i, j)`.
fn sides(case: &EquationCase, p: &Parts, i: usize, j: usize) -> Result<(CMat, CMat)> {
    use EquationCase::*;
    let s = &p.s;
    let st = |x: usize| p.sv(s, x);
    Ok(match *case {
        DefiningVolterra => unreachable!("handled per node"),
        LizamaPoblete => {
            let (f, k) = (need(&p.f), need(&p.k));
            let (ft, fs) = (p.sv(f, i), p.sv(f, j));
            (st(j) * &ft - st(i) * &fs, ft * k.at(j) - fs * k.at(i))
        }
        TranslationAk => {
            let (a, k, f) = (need(&p.a), need(&p.k), need(&p.f));
            let l = p.plus2(a, s, s, i, j, p.nu)?;
            let r = p.left_shift(k, f, i, j)? - p.right_shift(k, f, i, j)?;
            (l, r)
        }
        TranslationAa => {
            let a = need(&p.a);
            (p.plus2(a, s, s, i, j, p.nu)?, p.plus2(s, a, a, i, j, None)?)
        }
        SharpBc => {
            let (cp, b) = (need(&p.w1), need(&p.w2));
            let l = p.plus2(cp, s, s, i, j, p.nu)?;
            (l, p.right_shift(b, s, i, j)? - p.left_shift(b, s, i, j)?)
        }
        SemigroupAa => (st(i + j), -p.plus2(need(&p.w1), s, s, i, j, p.nu)?),
        SuperdiffTk => {
            let (c, b, cs, is) = (need(&p.w1), need(&p.w2), need(&p.w3), need(&p.i));
            let l = p.left_shift(b, is, i, j)? - p.right_shift(b, is, i, j)?;
            let r = p.sv(cs, i) * p.sv(is, j) + p.sv(is, i) * p.sv(cs, j) - p.plus2(c, s, s, i, j, p.nu)?;
            (l, r)
        }
        Cauchy => (st(j) * st(i), st(i + j)),
        CosineIntegrated => {
            let is = need(&p.i);
            (st(i) * p.sv(is, j) + p.sv(is, i) * st(j), p.sv(is, i + j))
        }
        Dalembert => (st(i + j) + st(i.abs_diff(j)), st(i) * st(j) * C64::new(2.0, 0.0)),
        ConvolutedK => {
            let (k1, k2, is) = (need(&p.w1), need(&p.w2), need(&p.i));
            let mut r = st(i + j) * p.c0 + p.sv(is, i + j) * p.c1 - p.sv(is, i) * k1.at(j) - p.sv(is, j) * k1.at(i);
            r += p.left_shift(k2, is, i, j)? - p.right_shift(k2, is, i, j)?;
            (st(i) * st(j), r)
        }
        EpsSemigroup(e) => {
            let is = need(&p.i);
            let r = st(i + j) * C64::new(1.0 - e, 0.0)
                + (p.sv(is, i + j) - p.sv(is, i) - p.sv(is, j)) * C64::new(e, 0.0);
            (st(i) * st(j), r)
        }
        EpsResolvent(e) => {
            let is = need(&p.i);
            let l = (st(i) * st(j) - st(i + j)) * C64::new(1.0 - e, 0.0);
            let r = (p.sv(is, i + j) - st(i) * p.sv(is, j) - p.sv(is, i) * st(j)) * C64::new(e, 0.0);
            (l, r)
        }
        RofTranslation => {
            let (wc, wb) = (need(&p.w1), need(&p.w2));
            let rhs = p.plus2(wc, s, s, i, j, p.nu)? * p.c0;
            let lhs = p.m(&conv_range(s, wb, i + j, i, i + j)?) - p.m(&conv_range(s, wb, i + j, 0, j)?);
            (lhs, rhs)
        }
    })
}

/// Max residual of `case` over the `(t, s)` lattice of `fam`.
///
/// Pairs with `t` or `s` among the first `n/32` nodes are reported in a note
/// and left out of the maximum, as in the Volterra residual.
pub fn check(case: &EquationCase, fam: &SampledFamily, probes: &[Vec<C64>], tol: f64) -> Result<ResidualReport> {
    let d = fam.d();
    if let Some(x) = probes.iter().find(|x| x.len() != d) {
        return Err(Error::GridMismatch(format!("probe of length {} for dimension {d}", x.len())));
    }
    if *case == EquationCase::DefiningVolterra {
        let r = fam.volterra_residual(probes, tol)?;
        return Ok(ResidualReport { check: case.to_string(), ..r });
    }
    let p = prepare(case, fam)?;
    let n = p.n;
    let pairs = pair_lattice(n, n, MAX_PAIRS);
    if pairs.is_empty() {
        return Err(Error::IntervalExceeded(format!("no node pairs with t + s inside {}", fam.grid)));
    }
    let rows: Vec<(usize, usize, f64, f64, f64)> = pairs
        .par_iter()
        .map(|&(i, j)| {
            let (l, r) = sides(case, &p, i, j)?;
            let diff = &l - &r;
            let flat = mat::to_flat(&diff);
            let probe = probes.iter().map(|x| mat::vec_norm(&apply(&flat, d, x))).fold(0.0, f64::max);
            let scale = mat::op_norm(&l).max(mat::op_norm(&r));
            Ok((i, j, mat::op_norm(&diff), probe, scale))
        })
        .collect::<Result<_>>()?;
    let i0 = initial_nodes(n);
    let mut main = Residuals::new();
    let mut early = Residuals::new();
    let mut probe_max = 0.0f64;
    for (i, j, r, pr, sc) in rows {
        let at = [i as f64 * p.h, j as f64 * p.h];
        if i.min(j) <= i0 && n > 2 * i0 {
            early.record(&at, r, sc);
        } else {
            main.record(&at, r, sc);
            probe_max = probe_max.max(pr);
        }
    }
    let early_max = early.max();
    let mut rep = if main_is_empty(&pairs, i0, n) {
        early.finish(&case.to_string(), tol)
    } else {
        main.finish(&case.to_string(), tol)
    };
    rep = rep.with_grid(fam.grid).note(format!("max probe residual {probe_max:.3e}"));
    if early_max > 0.0 && !main_is_empty(&pairs, i0, n) {
        rep = rep.note(format!("pairs within the first {i0} nodes: max residual {early_max:.3e}"));
    }
    if let Ok(trend) = normalization_trend(fam) {
        rep = rep.note(trend);
    }
    Ok(rep)
}

fn main_is_empty(pairs: &[(usize, usize)], i0: usize, n: usize) -> bool {
    !(n > 2 * i0) || pairs.iter().all(|&(i, j)| i.min(j) <= i0)
}

/// `‖S(t_i)/k(t_i) − I‖` at the three smallest nodes; the limit at `0⁺`
/// shows as a sequence that shrinks towards the origin.
pub fn normalization_trend(fam: &SampledFamily) -> Result<String> {
    let n = fam.values.n.min(3);
    let ks = fam.k.sample(fam.values.h, n)?;
    let d = fam.d();
    let errs: Vec<f64> = (1..=n)
        .map(|i| mat::op_norm(&(fam.value(i) / ks.at(i) - mat::identity(d))))
        .collect();
    let ok = errs.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-9) + 1e-14);
    let list: Vec<String> = errs.iter().map(|e| format!("{e:.3e}")).collect();
    Ok(format!(
        "normalization S/k − I at first nodes: {} ({})",
        list.join(", "),
        if ok { "shrinking towards 0" } else { "not shrinking towards 0" }
    ))
}

/// Residuals of `case` on `fam + ε·I` for each `ε`.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Violation {
    pub equation: String,
    pub eps: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Residual ratio between the last and first positive `ε`.
    pub ratio: Option<f64>,
    /// Every positive `ε` gave a residual of at least `ε/2`.
    pub detected: bool,
}

/// Negative control: the residual of a perturbed family.
pub fn detect_violation(case: &EquationCase, fam: &SampledFamily, probes: &[Vec<C64>], eps: &[f64]) -> Result<Violation> {
    let mut residuals = Vec::with_capacity(eps.len());
    for &e in eps {
        let pert = if e == 0.0 { fam.clone() } else { fam.perturbed(C64::new(e, 0.0))? };
        residuals.push(check(case, &pert, probes, f64::INFINITY)?.max_residual);
    }
    let pos: Vec<(f64, f64)> = eps.iter().copied().zip(residuals.iter().copied()).filter(|(e, _)| *e > 0.0).collect();
    let ratio = match (pos.first(), pos.last()) {
        (Some(a), Some(b)) if pos.len() > 1 && a.1 > 0.0 => Some(b.1 / a.1),
        _ => None,
    };
    let detected = !pos.is_empty() && pos.iter().all(|(e, r)| *r >= 0.5 * e);
    Ok(Violation { equation: case.to_string(), eps: eps.to_vec(), residuals, ratio, detected })
}

/// Sweep of the ε equations over `eps`, on the matching closed-form families.
///
/// Passes when every residual is within `tol`, consecutive residuals differ
/// by at most `tol`, the ε = 0 semigroup residual equals the Cauchy residual
/// and the ε = 1 one equals the convoluted residual with `k = t`.
pub fn eps_interpolation(
    generator: &crate::families::Generator,
    grid: &crate::kernels::Grid,
    eps: &[f64],
    tol: f64,
) -> Result<ResidualReport> {
    use crate::families::{eps_resolvent_family, eps_semigroup_family};
    let probes = crate::families::default_probes(generator.dim());
    let mut parts = Vec::new();
    let mut notes = Vec::new();
    for (name, build, mk) in [
        ("eps_semigroup", eps_semigroup_family as fn(_, _, _) -> _, EquationCase::EpsSemigroup as fn(f64) -> EquationCase),
        ("eps_resolvent", eps_resolvent_family as fn(_, _, _) -> _, EquationCase::EpsResolvent as fn(f64) -> EquationCase),
    ] {
        let mut rs = Vec::new();
        for &e in eps {
            let fam = build(e, generator, grid)?;
            let r = check(&mk(e), &fam, &probes, tol)?;
            if name == "eps_semigroup" && (e == 0.0 || e == 1.0) {
                let twin = if e == 0.0 { EquationCase::Cauchy } else { EquationCase::ConvolutedK };
                let t = check(&twin, &fam, &probes, tol)?;
                let gap = (t.max_residual - r.max_residual).abs();
                let same = gap <= 1e-12 * (1.0 + t.max_residual) + 1e-14;
                notes.push(format!("{name} at eps={e} vs {}: {:.3e} vs {:.3e}", twin.id(), r.max_residual, t.max_residual));
                parts.push(ResidualReport { pass: same, ..t });
            }
            rs.push(r.max_residual);
            parts.push(r);
        }
        let jump = rs.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
        notes.push(format!("{name}: largest change between consecutive eps {jump:.3e}"));
        if jump > tol {
            let mut acc = Residuals::new();
            acc.record(&[], jump, 1.0);
            parts.push(acc.finish(&format!("{name} continuity"), tol));
        }
    }
    let mut rep = ResidualReport::combine("eps interpolation", parts).with_grid(grid);
    for n in notes {
        rep = rep.note(n);
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::families::{default_probes, eps_resolvent_family, eps_semigroup_family, make_family, Generator, Pair};
    use crate::kernels::Grid;
    use crate::special::rgamma;

    fn nil_up() -> Generator {
        Generator::dense(mat::parse_matrix("2\n0 1\n0 0").unwrap()).unwrap()
    }

    fn nil_low() -> Generator {
        Generator::dense(mat::parse_matrix("2\n0 0\n1 0").unwrap()).unwrap()
    }

    fn scalar(z: f64) -> Generator {
        Generator::scalar(C64::new(z, 0.0))
    }

    fn run(case: EquationCase, fam: &SampledFamily, tol: f64) -> ResidualReport {
        check(&case, fam, &default_probes(fam.d()), tol).unwrap()
    }

    #[test]
    fn cauchy_nilpotent_exact() {
        let fam = make_family(&Pair::Semigroup, &nil_up(), &Grid::new(2.0, 64).unwrap()).unwrap();
        let r = run(EquationCase::Cauchy, &fam, 1e-14);
        assert!(r.pass, "{r:?}");
        assert!(r.points > 100);
    }

    #[test]
    fn dalembert_nilpotent_exact() {
        let fam = make_family(&Pair::Cosine, &nil_low(), &Grid::new(2.0, 64).unwrap()).unwrap();
        let r = run(EquationCase::Dalembert, &fam, 1e-14);
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn translation_ak_constant_family() {
        // A = 0: S ≡ 1 and both sides reduce to g_{2.5}(t+s) − g_{2.5}(t) − g_{2.5}(s)
        let fam = make_family(&Pair::Frac { alpha: 0.5, beta: 0.0 }, &scalar(0.0), &Grid::new(2.0, 64).unwrap()).unwrap();
        let p = prepare(&EquationCase::TranslationAk, &fam).unwrap();
        let (l, r) = sides(&EquationCase::TranslationAk, &p, 32, 32).unwrap();
        let g = |x: f64| x.powf(1.5) * rgamma(2.5);
        let exact = g(2.0) - 2.0 * g(1.0);
        assert!((exact - 0.6231866060).abs() < 1e-9);
        assert!((l[(0, 0)].re - exact).abs() < 1e-4, "{}", l[(0, 0)]);
        assert!((r[(0, 0)].re - exact).abs() < 1e-4, "{}", r[(0, 0)]);
    }

    #[test]
    fn lizama_poblete_on_frac() {
        let fam = make_family(&Pair::Frac { alpha: 0.5, beta: 0.0 }, &scalar(-1.0), &Grid::new(2.0, 128).unwrap()).unwrap();
        assert!(run(EquationCase::LizamaPoblete, &fam, 1e-3).pass);
    }

    #[test]
    fn semigroup_equivalence_family() {
        let g = Generator::diagonal(vec![C64::new(-1.0, 0.0), C64::new(-2.0, 0.0)]);
        let fam = make_family(&Pair::Semigroup, &g, &Grid::new(2.0, 128).unwrap()).unwrap();
        let tol = 1e-4;
        assert!(fam.volterra_residual(&default_probes(2), tol).unwrap().pass);
        assert!(run(EquationCase::TranslationAk, &fam, tol).pass);
        assert!(run(EquationCase::Cauchy, &fam, tol).pass);
    }

    #[test]
    fn semigroup_aa_and_sharp_on_fractional() {
        let grid = Grid::new(2.0, 128).unwrap();
        let aa = make_family(&Pair::FracAa { alpha: 0.5 }, &scalar(-1.0), &grid).unwrap();
        let r = run(EquationCase::SemigroupAa, &aa, 1e-2);
        assert!(r.pass, "{r:?}");
        let fr = make_family(&Pair::Frac { alpha: 0.5, beta: 0.5 }, &scalar(-1.0), &grid).unwrap();
        let r = run(EquationCase::SharpBc, &fr, 1e-2);
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn rof_formula_holds_below_one_and_diverges_above() {
        let grid = Grid::new(2.0, 64).unwrap();
        let fr = make_family(&Pair::Frac { alpha: 0.5, beta: 0.5 }, &scalar(-1.0), &grid).unwrap();
        assert!(run(EquationCase::RofTranslation, &fr, 1e-2).pass);
        let hi = make_family(&Pair::Frac { alpha: 1.5, beta: 1.0 }, &scalar(-1.0), &grid).unwrap();
        let e = check(&EquationCase::RofTranslation, &hi, &default_probes(1), 1e-2).unwrap_err();
        assert!(matches!(e, Error::DivergentMoment(_)), "{e:?}");
    }

    #[test]
    fn validity_is_enforced() {
        let fam = make_family(&Pair::Semigroup, &nil_up(), &Grid::new(1.0, 16).unwrap()).unwrap();
        let e = check(&EquationCase::Dalembert, &fam, &default_probes(2), 1e-8).unwrap_err();
        assert!(matches!(e, Error::ValidityViolation(_)));
        let e = check(&EquationCase::SharpBc, &fam, &default_probes(2), 1e-8).unwrap_err();
        assert!(matches!(e, Error::ValidityViolation(_)));
    }

    #[test]
    fn eps_families_satisfy_their_equations() {
        let grid = Grid::new(2.0, 128).unwrap();
        let g = scalar(-1.0);
        for e in [0.0, 0.3, 1.0] {
            let f = eps_semigroup_family(e, &g, &grid).unwrap();
            assert!(f.volterra_residual(&default_probes(1), 1e-4).unwrap().pass);
            assert!(run(EquationCase::EpsSemigroup(e), &f, 1e-4).pass);
            let f = eps_resolvent_family(e, &g, &grid).unwrap();
            assert!(f.volterra_residual(&default_probes(1), 1e-4).unwrap().pass, "{e}");
            let r = run(EquationCase::EpsResolvent(e), &f, 1e-4);
            assert!(r.pass, "{e} {r:?}");
        }
    }

    #[test]
    fn perturbation_is_detected() {
        let fam = make_family(&Pair::Semigroup, &nil_up(), &Grid::new(2.0, 64).unwrap()).unwrap();
        let v = detect_violation(&EquationCase::Cauchy, &fam, &default_probes(2), &[0.0, 1e-2]).unwrap();
        assert!(v.residuals[0] < 1e-14);
        assert!(v.residuals[1] >= 5e-3);
        assert!(v.detected);
    }

    #[test]
    fn case_ids_roundtrip() {
        for id in EquationCase::IDS {
            let c = EquationCase::parse(id, Some(0.5)).unwrap();
            assert_eq!(c.id(), id);
        }
        assert!(EquationCase::parse("nope", None).is_err());
        assert!(EquationCase::parse("eps_semigroup", None).is_err());
    }
}
