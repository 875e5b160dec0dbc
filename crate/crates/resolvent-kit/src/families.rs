//! Concrete resolvent families from finite generators and the defining
//! Volterra residual `A(a∗S)(t)x − S(t)x + k(t)x`.

use crate::error::{Error, Result};
use crate::kernels::{Grid, Kernel};
use crate::mat::{self, CMat};
use crate::quad::{self, Sampled};
use crate::report::{refinement_order, ResidualReport, Residuals};
use crate::special::{ml_matrix, rgamma, MlParams};
use crate::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Nodes `1..=initial_nodes(n)` are reported separately in residual sweeps:
/// the first `1/32` of the interval, at least two nodes.
pub fn initial_nodes(n: usize) -> usize {
    (n / 32).max(2)
}

pub const PROBE_SEED: u64 = 0x5EED;

#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorForm {
    Dense(CMat),
    Diagonal(Vec<C64>),
    /// `[[0, I], [A, 0]]` over the inner generator.
    Block(Box<Generator>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generator {
    pub form: GeneratorForm,
    pub name: String,
}

impl Generator {
    pub fn dense(m: CMat) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::DomainError(format!("generator must be square, got {}x{}", m.nrows(), m.ncols())));
        }
        Ok(Self { form: GeneratorForm::Dense(m), name: "dense".into() })
    }

    pub fn diagonal(v: Vec<C64>) -> Self {
        Self { form: GeneratorForm::Diagonal(v), name: "diag".into() }
    }

    pub fn scalar(z: C64) -> Self {
        Self::diagonal(vec![z])
    }

    pub fn block(inner: Generator) -> Self {
        Self { name: format!("block({})", inner.name), form: GeneratorForm::Block(Box::new(inner)) }
    }

    pub fn named(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn dim(&self) -> usize {
        match &self.form {
            GeneratorForm::Dense(m) => m.nrows(),
            GeneratorForm::Diagonal(v) => v.len(),
            GeneratorForm::Block(g) => 2 * g.dim(),
        }
    }

    pub fn matrix(&self) -> CMat {
        match &self.form {
            GeneratorForm::Dense(m) => m.clone(),
            GeneratorForm::Diagonal(v) => CMat::from_diagonal(&nalgebra::DVector::from_vec(v.clone())),
            GeneratorForm::Block(g) => {
                let d = g.dim();
                let a = g.matrix();
                let mut m = CMat::zeros(2 * d, 2 * d);
                for i in 0..d {
                    m[(i, d + i)] = C64::new(1.0, 0.0);
                    for j in 0..d {
                        m[(d + i, j)] = a[(i, j)];
                    }
                }
                m
            }
        }
    }

    /// Gershgorin bound on the spectral radius.
    pub fn spectral_bound(&self) -> f64 {
        mat::gershgorin_radius(&self.matrix())
    }

    pub fn is_nilpotent(&self) -> bool {
        let m = self.matrix();
        let mut p = m.clone();
        for _ in 1..m.nrows() {
            p = &p * &m;
        }
        p.iter().all(|z| *z == ZERO)
    }

    /// Plain-text generator file: `d` and rows, or `diag` and entries.
    pub fn parse(text: &str) -> Result<Self> {
        let head = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .find(|l| !l.is_empty())
            .unwrap_or("");
        let m = mat::parse_matrix(text)?;
        if head.starts_with("diag") {
            Ok(Self::diagonal((0..m.nrows()).map(|i| m[(i, i)]).collect()))
        } else {
            Self::dense(m)
        }
    }

    /// One-line form used in CSV metadata.
    pub fn to_line(&self) -> String {
        match &self.form {
            GeneratorForm::Dense(m) => {
                let e: Vec<String> = mat::to_flat(m).into_iter().map(mat::format_complex).collect();
                format!("dense {} {}", m.nrows(), e.join(" "))
            }
            GeneratorForm::Diagonal(v) => {
                let e: Vec<String> = v.iter().map(|z| mat::format_complex(*z)).collect();
                format!("diag {}", e.join(" "))
            }
            GeneratorForm::Block(g) => format!("block {}", g.to_line()),
        }
    }

    pub fn from_line(line: &str) -> Result<Self> {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("block ") {
            return Ok(Self::block(Self::from_line(rest)?));
        }
        if let Some(rest) = line.strip_prefix("diag") {
            let v = rest.split_whitespace().map(mat::parse_complex).collect::<Result<Vec<_>>>()?;
            return Ok(Self::diagonal(v));
        }
        if let Some(rest) = line.strip_prefix("dense ") {
            let mut it = rest.split_whitespace();
            let d: usize = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad generator line `{line}`")))?;
            let v = it.map(mat::parse_complex).collect::<Result<Vec<_>>>()?;
            if v.len() != d * d {
                return Err(Error::Parse(format!("generator line has {} entries, expected {}", v.len(), d * d)));
            }
            return Self::dense(mat::from_flat(d, &v));
        }
        Err(Error::Parse(format!("bad generator line `{line}`")))
    }
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}x{})", self.name, self.dim(), self.dim())
    }
}

/// Shipped kernel pairs with known families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Pair {
    /// `a = k = 1`.
    Semigroup,
    /// `a = g₂`, `k = 1`.
    Cosine,
    /// `(g_α, g_{β+1})`.
    Frac { alpha: f64, beta: f64 },
    /// `(g_α, g_α)`.
    FracAa { alpha: f64 },
    /// Diagonal family on sequences with entries `a_m`, `m = 1..=M`.
    Seq78 { alpha: f64, beta: f64, tau: f64, m: usize },
    /// `(b, b^{∗3})` with `b = g_β`, built from the `(b∗b, b∗b)` family.
    Block { beta: f64 },
}

/// `S(t) = t^p E_{α,β}(t^α A)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlForm {
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
}

impl Pair {
    pub fn kernels(&self) -> (Kernel, Kernel) {
        match *self {
            Pair::Semigroup => (Kernel::one(), Kernel::one()),
            Pair::Cosine => (Kernel::g(2.0), Kernel::one()),
            Pair::Frac { alpha, beta } | Pair::Seq78 { alpha, beta, .. } => (Kernel::g(alpha), Kernel::g(beta + 1.0)),
            Pair::FracAa { alpha } => (Kernel::g(alpha), Kernel::g(alpha)),
            Pair::Block { beta } => (Kernel::g(beta), Kernel::g(3.0 * beta)),
        }
    }

    pub fn ml_form(&self) -> Option<MlForm> {
        match *self {
            Pair::Semigroup => Some(MlForm { alpha: 1.0, beta: 1.0, p: 0.0 }),
            Pair::Cosine => Some(MlForm { alpha: 2.0, beta: 1.0, p: 0.0 }),
            Pair::Frac { alpha, beta } | Pair::Seq78 { alpha, beta, .. } => {
                Some(MlForm { alpha, beta: beta + 1.0, p: beta })
            }
            Pair::FracAa { alpha } => Some(MlForm { alpha, beta: alpha, p: alpha - 1.0 }),
            Pair::Block { .. } => None,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |s: String| Err(Error::UnknownPair(s));
        match *self {
            Pair::Frac { alpha, beta } | Pair::Seq78 { alpha, beta, .. } if !(alpha > 0.0 && alpha <= 2.0 && beta > -1.0) => {
                bad(format!("{self}: need 0 < α ≤ 2 and β > −1"))
            }
            Pair::FracAa { alpha } if !(alpha > 0.0 && alpha <= 2.0) => bad(format!("{self}: need 0 < α ≤ 2")),
            Pair::Seq78 { tau, m, .. } if !(tau > 0.0 && m >= 1) => bad(format!("{self}: need τ > 0 and M ≥ 1")),
            Pair::Block { beta } if !(beta > 0.0 && beta <= 1.0) => bad(format!("{self}: need 0 < β ≤ 1")),
            _ => Ok(()),
        }
    }

    /// `semigroup`, `cosine`, `frac(α,β)`, `frac_aa(α)`, `seq78(α,β,τ,M)`,
    /// `block(β)`.
    pub fn parse(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let (name, args) = match t.find('(') {
            Some(i) if t.ends_with(')') => (&t[..i], &t[i + 1..t.len() - 1]),
            Some(_) => return Err(Error::UnknownPair(s.into())),
            None => (t.as_str(), ""),
        };
        let nums: Vec<f64> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|a| a.parse::<f64>().map_err(|_| Error::UnknownPair(s.into())))
                .collect::<Result<_>>()?
        };
        let p = match (name, nums.as_slice()) {
            ("semigroup", []) => Pair::Semigroup,
            ("cosine", []) => Pair::Cosine,
            ("frac", [a, b]) => Pair::Frac { alpha: *a, beta: *b },
            ("frac_aa", [a]) => Pair::FracAa { alpha: *a },
            ("seq78", [a, b, tau, m]) if m.fract() == 0.0 && *m >= 1.0 => {
                Pair::Seq78 { alpha: *a, beta: *b, tau: *tau, m: *m as usize }
            }
            ("block", [b]) => Pair::Block { beta: *b },
            _ => return Err(Error::UnknownPair(s.into())),
        };
        p.validate()?;
        Ok(p)
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pair::Semigroup => write!(f, "semigroup"),
            Pair::Cosine => write!(f, "cosine"),
            Pair::Frac { alpha, beta } => write!(f, "frac({alpha},{beta})"),
            Pair::FracAa { alpha } => write!(f, "frac_aa({alpha})"),
            Pair::Seq78 { alpha, beta, tau, m } => write!(f, "seq78({alpha},{beta},{tau},{m})"),
            Pair::Block { beta } => write!(f, "block({beta})"),
        }
    }
}

impl std::str::FromStr for Pair {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Pair::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    ClosedForm,
    Extended { method: String, n: usize, t: f64 },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::ClosedForm => write!(f, "closed-form"),
            Provenance::Extended { method, n, t } => write!(f, "extended({method},{n},{t})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledFamily {
    pub grid: Grid,
    pub values: Sampled,
    pub a: Kernel,
    pub k: Kernel,
    pub generator: Generator,
    pub pair: Option<Pair>,
    pub provenance: Provenance,
}

/// `a_m = m/τ + i((e^m/m)² − (m/τ)²)^{1/2}`.
pub fn seq78_coefficient(m: usize, tau: f64) -> C64 {
    let mf = m as f64;
    let r = mf / tau;
    let e = mf.exp() / mf;
    // e² − r² = (e − r)(e + r) avoids overflow-free cancellation issues
    let rad = C64::new((e - r) * (e + r), 0.0);
    C64::new(r, 0.0) + C64::new(0.0, 1.0) * rad.sqrt()
}

pub fn seq78_generator(alpha: f64, tau: f64, m: usize) -> Generator {
    let v = (1..=m).map(|j| seq78_coefficient(j, tau).powf(alpha)).collect();
    Generator::diagonal(v).named(format!("seq78 M={m}"))
}

fn ml_at(p: MlParams, m: &CMat) -> Result<CMat> {
    ml_matrix(p, m).map_err(|e| match e {
        Error::PrecisionLoss(s) | Error::NonConvergent(s) => Error::UncertifiedSpectrum(s),
        e => e,
    })
}

fn ml_family(form: MlForm, a: &CMat, grid: &Grid) -> Result<Sampled> {
    let p = MlParams::new(form.alpha, form.beta)?;
    let d = a.nrows();
    let mut vals = Vec::with_capacity(grid.n);
    for i in 1..=grid.n {
        let t = grid.node(i);
        let e = ml_at(p, &(a * C64::new(t.powf(form.alpha), 0.0)))?;
        vals.push(e * C64::new(t.powf(form.p), 0.0));
    }
    let p0 = mat::identity(d) * C64::new(rgamma(form.beta), 0.0);
    Ok(Sampled::from_mats(grid.h(), form.p, &vals, Some(&p0)))
}

fn block_family(beta: f64, a: &CMat, grid: &Grid) -> Result<Sampled> {
    let d = a.nrows();
    let al = 2.0 * beta;
    let p3 = MlParams::new(al, 3.0 * beta)?;
    let p4 = MlParams::new(al, 4.0 * beta)?;
    let gamma = 3.0 * beta - 1.0;
    let mut psi = vec![ZERO; (grid.n + 1) * 4 * d * d];
    let dd = 4 * d * d;
    let put = |psi: &mut [C64], i: usize, r: usize, c: usize, v: C64| psi[i * dd + r * 2 * d + c] = v;
    for i in 0..=grid.n {
        let t = grid.node(i);
        let z = a * C64::new(t.powf(al), 0.0);
        let e3 = ml_at(p3, &z)?;
        let e4 = ml_at(p4, &z)?;
        let off = e4 * C64::new(t.powf(beta), 0.0);
        let low = a * &off;
        for r in 0..d {
            for c in 0..d {
                put(&mut psi, i, r, c, e3[(r, c)]);
                put(&mut psi, i, d + r, d + c, e3[(r, c)]);
                put(&mut psi, i, r, d + c, off[(r, c)]);
                put(&mut psi, i, d + r, c, low[(r, c)]);
            }
        }
    }
    Ok(Sampled::from_psi(2 * d, grid.h(), gamma, psi))
}

/// Samples the family of a shipped pair on `grid`.
pub fn make_family(pair: &Pair, generator: &Generator, grid: &Grid) -> Result<SampledFamily> {
    pair.validate()?;
    let (a, k) = pair.kernels();
    let (values, generator) = match *pair {
        Pair::Seq78 { alpha, tau, m, .. } => {
            let g = seq78_generator(alpha, tau, m);
            (ml_family(pair.ml_form().unwrap(), &g.matrix(), grid)?, g)
        }
        Pair::Block { beta } => (block_family(beta, &generator.matrix(), grid)?, Generator::block(generator.clone())),
        _ => (ml_family(pair.ml_form().unwrap(), &generator.matrix(), grid)?, generator.clone()),
    };
    Ok(SampledFamily { grid: *grid, values, a, k, generator, pair: Some(*pair), provenance: Provenance::ClosedForm })
}

/// Family of the pair `(1, (1−ε)+εt)`: `S(t) = (1−ε)e^{tA} + ε∫₀ᵗ e^{rA} dr`.
pub fn eps_semigroup_family(eps: f64, generator: &Generator, grid: &Grid) -> Result<SampledFamily> {
    check_eps(eps)?;
    let a = generator.matrix();
    let d = a.nrows();
    let p1 = MlParams::new(1.0, 1.0)?;
    let p2 = MlParams::new(1.0, 2.0)?;
    let mut vals = Vec::with_capacity(grid.n);
    for i in 1..=grid.n {
        let t = grid.node(i);
        let ta = &a * C64::new(t, 0.0);
        let e = ml_at(p1, &ta)? * C64::new(1.0 - eps, 0.0) + ml_at(p2, &ta)? * C64::new(eps * t, 0.0);
        vals.push(e);
    }
    let p0 = mat::identity(d) * C64::new(if eps == 1.0 { 1.0 } else { 1.0 - eps }, 0.0);
    let gamma = if eps == 1.0 { 1.0 } else { 0.0 };
    Ok(SampledFamily {
        grid: *grid,
        values: Sampled::from_mats(grid.h(), gamma, &vals, Some(&p0)),
        a: Kernel::one(),
        k: Kernel::Interpolant(eps),
        generator: generator.clone(),
        pair: None,
        provenance: Provenance::ClosedForm,
    })
}

/// Family of the pair `((1−ε)+εt, 1)`, from the first-order system
/// `S'' = (1−ε)A S' + εA S`, `S(0) = I`, `S'(0) = (1−ε)A`.
pub fn eps_resolvent_family(eps: f64, generator: &Generator, grid: &Grid) -> Result<SampledFamily> {
    check_eps(eps)?;
    let a = generator.matrix();
    let d = a.nrows();
    let mut m = CMat::zeros(2 * d, 2 * d);
    for i in 0..d {
        m[(i, d + i)] = C64::new(1.0, 0.0);
        for j in 0..d {
            m[(d + i, j)] = a[(i, j)] * eps;
            m[(d + i, d + j)] = a[(i, j)] * (1.0 - eps);
        }
    }
    let p1 = MlParams::new(1.0, 1.0)?;
    let start = &a * C64::new(1.0 - eps, 0.0);
    let mut vals = Vec::with_capacity(grid.n);
    for i in 1..=grid.n {
        let e = ml_at(p1, &(&m * C64::new(grid.node(i), 0.0)))?;
        let s = e.view((0, 0), (d, d)) + e.view((0, d), (d, d)) * &start;
        vals.push(s);
    }
    let p0 = mat::identity(d);
    Ok(SampledFamily {
        grid: *grid,
        values: Sampled::from_mats(grid.h(), 0.0, &vals, Some(&p0)),
        a: Kernel::Interpolant(eps),
        k: Kernel::one(),
        generator: generator.clone(),
        pair: None,
        provenance: Provenance::ClosedForm,
    })
}

fn check_eps(eps: f64) -> Result<()> {
    if (0.0..=1.0).contains(&eps) {
        Ok(())
    } else {
        Err(Error::OutOfRange(format!("epsilon {eps} outside [0, 1]")))
    }
}

/// Standard basis plus one seeded random unit vector.
pub fn default_probes(d: usize) -> Vec<Vec<C64>> {
    seeded_probes(d, PROBE_SEED)
}

pub fn seeded_probes(d: usize, seed: u64) -> Vec<Vec<C64>> {
    let mut out: Vec<Vec<C64>> = (0..d)
        .map(|i| {
            let mut v = vec![ZERO; d];
            v[i] = C64::new(1.0, 0.0);
            v
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v: Vec<C64> = (0..d)
        .map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let n = mat::vec_norm(&v);
    out.push(v.into_iter().map(|z| z / n).collect());
    out
}

pub(crate) fn apply(m: &[C64], d: usize, x: &[C64]) -> Vec<C64> {
    if m.len() == 1 {
        return x.iter().map(|v| m[0] * v).collect();
    }
    (0..d).map(|i| (0..d).map(|j| m[i * d + j] * x[j]).sum()).collect()
}

/// How `a∗S` is obtained in the residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualPath {
    /// Closed form for nilpotent generators of shipped Mittag-Leffler pairs,
    /// product integration otherwise.
    Auto,
    Quadrature,
    ClosedForm,
}

impl SampledFamily {
    pub fn d(&self) -> usize {
        self.values.d
    }

    pub fn value(&self, i: usize) -> CMat {
        self.values.value_mat(i)
    }

    /// Same family with `ε·I` added at every node.
    pub fn perturbed(&self, eps: C64) -> Result<Self> {
        let d = self.d();
        let id = Sampled::from_psi(d, self.values.h, 0.0, (0..=self.values.n).flat_map(|_| mat::to_flat(&(mat::identity(d) * eps))).collect());
        Ok(Self { values: self.values.add(&id)?, ..self.clone() })
    }

    /// `max_i ‖A S(t_i) − S(t_i) A‖`.
    pub fn commutation_residual(&self) -> f64 {
        let a = self.generator.matrix();
        (1..=self.values.n)
            .map(|i| {
                let s = self.value(i);
                mat::op_norm(&(&a * &s - &s * &a))
            })
            .fold(0.0, f64::max)
    }

    /// `‖S(t₁)/k(t₁) − I‖`.
    pub fn normalization_error(&self) -> Result<f64> {
        let k = self.k.sample(self.values.h, 1)?.at(1);
        let s = self.value(1) / k;
        Ok(mat::op_norm(&(s - mat::identity(self.d()))))
    }

    pub(crate) fn a_conv_s(&self, path: ResidualPath) -> Result<Sampled> {
        let closed = match (path, self.pair.and_then(|p| p.ml_form())) {
            (ResidualPath::Quadrature, _) => None,
            (ResidualPath::ClosedForm, None) => {
                return Err(Error::NoClosedForm(format!("a∗S for {}", self.provenance)));
            }
            (ResidualPath::ClosedForm, Some(f)) => Some(f),
            (ResidualPath::Auto, f) => f.filter(|_| self.generator.is_nilpotent() && self.provenance == Provenance::ClosedForm),
        };
        match closed {
            Some(f) => ml_family(MlForm { alpha: f.alpha, beta: f.beta + f.alpha, p: f.p + f.alpha }, &self.generator.matrix(), &self.grid),
            None => {
                let a = self.a.sample(self.values.h, self.values.n)?;
                match self.a.as_scaled_power() {
                    Some((_, nu)) if nu < 1.0 => quad::conv_split(&a, &self.values, nu),
                    _ => quad::conv(&a, &self.values),
                }
            }
        }
    }

    /// Defining Volterra residual over nodes and probes.
    pub fn volterra_residual(&self, probes: &[Vec<C64>], tol: f64) -> Result<ResidualReport> {
        self.volterra_residual_with(probes, tol, ResidualPath::Auto)
    }

    pub fn volterra_residual_with(&self, probes: &[Vec<C64>], tol: f64, path: ResidualPath) -> Result<ResidualReport> {
        let d = self.d();
        if let Some(p) = probes.iter().find(|p| p.len() != d) {
            return Err(Error::GridMismatch(format!("probe of length {} for dimension {d}", p.len())));
        }
        let n = self.values.n;
        let conv = self.a_conv_s(path)?;
        let ks = self.k.sample(self.values.h, n)?;
        let a = mat::to_flat(&self.generator.matrix());
        let per_node: Vec<(usize, f64, f64)> = (1..=n)
            .into_par_iter()
            .map(|i| {
                let mut worst = (0.0f64, 0.0f64);
                for x in probes {
                    let ax = apply(&a, d, &apply(conv.value(i), d, x));
                    let sx = apply(self.values.value(i), d, x);
                    let kx: C64 = ks.at(i);
                    let r: Vec<C64> = (0..d).map(|l| ax[l] - sx[l] + kx * x[l]).collect();
                    worst.0 = worst.0.max(mat::vec_norm(&r));
                    worst.1 = worst.1.max(mat::vec_norm(&sx));
                }
                (i, worst.0, worst.1)
            })
            .collect();
        let i0 = initial_nodes(n);
        let mut main = Residuals::new();
        let mut early = Residuals::new();
        for (i, r, s) in per_node {
            let t = self.values.t(i);
            if i <= i0 && n > 2 * i0 {
                early.record(&[t], r, s);
            } else {
                main.record(&[t], r, s);
            }
        }
        let mut rep = main.finish("volterra residual", tol).with_grid(self.grid);
        if early.max() > 0.0 {
            rep = rep.note(format!("initial nodes 1..={i0}: max residual {:.3e}", early.max()));
        }
        Ok(rep)
    }
}

/// Residual at `n` nodes with the order measured against `n/2` on the same
/// interval.
pub fn residual_study(pair: &Pair, generator: &Generator, t_end: f64, n: usize, tol: f64) -> Result<ResidualReport> {
    let fine = make_family(pair, generator, &Grid::new(t_end, n)?)?;
    let coarse = make_family(pair, generator, &Grid::new(t_end, n / 2)?)?;
    let probes = default_probes(fine.d());
    let rf = fine.volterra_residual_with(&probes, tol, ResidualPath::Quadrature)?;
    let rc = coarse.volterra_residual_with(&probes, tol, ResidualPath::Quadrature)?;
    let order = refinement_order(rc.max_residual, rf.max_residual, 2.0);
    Ok(rf.with_order(order))
}

/// Truncated family norm `max_m |S_m(t)|` of the sequence family.
pub fn seq78_norm(alpha: f64, beta: f64, tau: f64, m: usize, t: f64) -> Result<f64> {
    let p = MlParams::new(alpha, beta + 1.0)?;
    let mut best = 0.0f64;
    for j in 1..=m {
        let z = (seq78_coefficient(j, tau) * t).powf(alpha);
        let v = crate::special::ml(p, z);
        if v.precision_loss {
            return Err(Error::UncertifiedSpectrum(format!("E_{{{alpha},{}}}({z})", beta + 1.0)));
        }
        best = best.max((v.value * t.powf(beta)).norm());
    }
    Ok(best)
}

impl SampledFamily {
    /// CSV with `#` metadata lines: node index, t, then `d²` entries
    /// row-major.
    pub fn to_csv(&self) -> Result<String> {
        let mut head = String::new();
        let p0: Vec<String> = self.values.psi(0).iter().map(|z| mat::format_complex(*z)).collect();
        for (k, v) in [
            ("pair", self.pair.map(|p| p.to_string()).unwrap_or_else(|| "none".into())),
            ("a", self.a.to_string()),
            ("k", self.k.to_string()),
            ("grid", self.grid.to_string()),
            ("gamma", self.values.gamma.to_string()),
            ("psi0", p0.join(" ")),
            ("generator", self.generator.to_line()),
            ("provenance", self.provenance.to_string()),
        ] {
            head.push_str(&format!("# {k}={v}\n"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let d = self.d();
        let mut hdr = vec!["i".to_string(), "t".to_string()];
        for r in 0..d {
            for c in 0..d {
                hdr.push(format!("s{r}{c}"));
            }
        }
        w.write_record(&hdr).map_err(|e| Error::Io(e.to_string()))?;
        for i in 1..=self.values.n {
            let mut rec = vec![i.to_string(), self.values.t(i).to_string()];
            rec.extend(self.values.value(i).iter().map(|z| mat::format_complex(*z)));
            w.write_record(&rec).map_err(|e| Error::Io(e.to_string()))?;
        }
        let body = String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.to_string()))?)
            .map_err(|e| Error::Io(e.to_string()))?;
        Ok(head + &body)
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut meta = std::collections::HashMap::new();
        for l in text.lines().filter_map(|l| l.strip_prefix('#')) {
            if let Some((k, v)) = l.trim().split_once('=') {
                meta.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        let get = |k: &str| meta.get(k).cloned().ok_or_else(|| Error::Parse(format!("missing `{k}` metadata")));
        let grid = Grid::parse(&get("grid")?)?;
        let gamma: f64 = get("gamma")?.parse().map_err(|_| Error::Parse("bad gamma".into()))?;
        let generator = Generator::from_line(&get("generator")?)?;
        let pair = match get("pair")?.as_str() {
            "none" => None,
            p => Some(Pair::parse(p)?),
        };
        let provenance = match get("provenance")?.as_str() {
            "closed-form" => Provenance::ClosedForm,
            s => {
                let inner = s
                    .strip_prefix("extended(")
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| Error::Parse(format!("bad provenance `{s}`")))?;
                let f: Vec<&str> = inner.split(',').collect();
                if f.len() != 3 {
                    return Err(Error::Parse(format!("bad provenance `{s}`")));
                }
                Provenance::Extended {
                    method: f[0].into(),
                    n: f[1].parse().map_err(|_| Error::Parse("bad provenance n".into()))?,
                    t: f[2].parse().map_err(|_| Error::Parse("bad provenance T".into()))?,
                }
            }
        };
        let p0 = get("psi0")?.split_whitespace().map(mat::parse_complex).collect::<Result<Vec<_>>>()?;
        let body: String = text.lines().filter(|l| !l.starts_with('#')).collect::<Vec<_>>().join("\n");
        let mut r = csv::Reader::from_reader(body.as_bytes());
        let mut vals = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
            for f in rec.iter().skip(2) {
                vals.push(mat::parse_complex(f)?);
            }
        }
        let d = generator.dim();
        if vals.len() != grid.n * d * d || p0.len() != d * d {
            return Err(Error::Parse(format!("family CSV has {} entries, expected {}", vals.len(), grid.n * d * d)));
        }
        Ok(Self {
            grid,
            values: Sampled::from_values(d, grid.h(), gamma, &vals, Some(&p0)),
            a: Kernel::parse(&get("a")?)?,
            k: Kernel::parse(&get("k")?)?,
            generator,
            pair,
            provenance,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn nil_upper() -> Generator {
        Generator::dense(mat::from_flat(2, &[c(0.0), c(1.0), c(0.0), c(0.0)])).unwrap()
    }

    fn nil_lower() -> Generator {
        Generator::dense(mat::from_flat(2, &[c(0.0), c(0.0), c(1.0), c(0.0)])).unwrap()
    }

    #[test]
    fn semigroup_of_nilpotent() {
        let f = make_family(&Pair::Semigroup, &nil_upper(), &Grid::new(2.0, 4).unwrap()).unwrap();
        let s = f.value(4);
        assert!((s - mat::from_flat(2, &[c(1.0), c(2.0), c(0.0), c(1.0)])).norm() < 1e-14);
    }

    #[test]
    fn cosine_of_nilpotent() {
        let f = make_family(&Pair::Cosine, &nil_lower(), &Grid::new(3.0, 3).unwrap()).unwrap();
        let want = mat::identity(2) + nil_lower().matrix() * c(4.5);
        assert!((f.value(3) - want).norm() < 1e-13);
    }

    #[test]
    fn frac_aa_scalar_value() {
        let f = make_family(&Pair::FracAa { alpha: 0.5 }, &Generator::scalar(c(-1.0)), &Grid::new(1.0, 4).unwrap()).unwrap();
        // series oracle for E_{1/2,1/2}(−1)
        assert!((f.values.at(4) - c(0.1366060)).norm() < 1e-6);
    }

    #[test]
    fn nilpotent_residuals_cancel() {
        for (p, g) in [(Pair::Semigroup, nil_upper()), (Pair::Cosine, nil_lower())] {
            let f = make_family(&p, &g, &Grid::new(2.0, 32).unwrap()).unwrap();
            let r = f.volterra_residual(&default_probes(2), 1e-10).unwrap();
            assert!(r.pass && r.max_residual < 1e-12, "{p}: {}", r.max_residual);
        }
    }

    #[test]
    fn fractional_residual_converges() {
        let g = Generator::scalar(c(-1.0));
        let r = residual_study(&Pair::Frac { alpha: 0.5, beta: 0.0 }, &g, 1.0, 256, 1e-3).unwrap();
        assert!(r.pass, "{}", r.to_json().unwrap());
        assert!(r.refinement_order.unwrap() >= 1.0, "{:?}", r.refinement_order);
        let r = residual_study(&Pair::FracAa { alpha: 0.5 }, &g, 1.0, 256, 1e-3).unwrap();
        assert!(r.pass, "{}", r.to_json().unwrap());
        assert!(r.refinement_order.unwrap() >= 1.0, "{:?}", r.refinement_order);
    }

    #[test]
    fn perturbation_is_detected() {
        let f = make_family(&Pair::Frac { alpha: 0.5, beta: 0.0 }, &Generator::scalar(c(-1.0)), &Grid::new(1.0, 64).unwrap()).unwrap();
        let r = f.perturbed(c(0.01)).unwrap().volterra_residual(&default_probes(1), 1e-3).unwrap();
        assert!(r.max_residual >= 0.009 && !r.pass);
    }

    #[test]
    fn block_family_solves_its_equation() {
        let f = make_family(&Pair::Block { beta: 0.5 }, &Generator::scalar(c(-1.0)), &Grid::new(1.0, 128).unwrap()).unwrap();
        assert_eq!(f.d(), 2);
        let r = f.volterra_residual(&default_probes(2), 1e-2).unwrap();
        assert!(r.pass, "{}", r.to_json().unwrap());
        assert!(f.commutation_residual() < 1e-12);
    }

    #[test]
    fn seq78_boundary() {
        let n = |m, t| seq78_norm(0.5, 1.0, 1.0, m, t).unwrap();
        let (a, b) = (n(20, 0.9), n(40, 0.9));
        assert!((a - b).abs() <= 0.05 * a, "{a} {b}");
        assert!(n(40, 1.5) >= 2.0 * n(20, 1.5));
    }

    #[test]
    fn normalization_improves() {
        let g = Generator::scalar(c(-1.0));
        let e = |n| make_family(&Pair::Frac { alpha: 0.5, beta: 0.0 }, &g, &Grid::new(1.0, n).unwrap()).unwrap().normalization_error().unwrap();
        assert!(e(256) < e(16));
    }

    #[test]
    fn csv_roundtrip() {
        let f = make_family(&Pair::Frac { alpha: 0.5, beta: 0.0 }, &nil_upper(), &Grid::new(1.0, 8).unwrap()).unwrap();
        let back = SampledFamily::from_csv(&f.to_csv().unwrap()).unwrap();
        assert_eq!(back.grid, f.grid);
        assert!((back.value(5) - f.value(5)).norm() < 1e-14);
        assert_eq!(back.pair, f.pair);
    }

    #[test]
    fn pair_names() {
        for s in ["semigroup", "cosine", "frac(0.5,0)", "frac_aa(0.5)", "seq78(0.5,1,1,20)", "block(0.5)"] {
            assert_eq!(Pair::parse(s).unwrap().to_string(), s);
        }
        assert!(matches!(Pair::parse("heat"), Err(Error::UnknownPair(_))));
    }

    #[test]
    fn generator_lines() {
        let g = Generator::block(nil_upper());
        assert_eq!(Generator::from_line(&g.to_line()).unwrap().matrix(), g.matrix());
        assert_eq!(Generator::parse("diag -1 -2").unwrap().dim(), 2);
    }
}
