//! Acceptance bundles: named groups of checks with pinned tolerances.

use crate::bivar::{check_interaction_rules, check_split_identity, BivarField};
use crate::error::{Error, Result};
use crate::extension::{extend_general, extend_nojump_aa, extend_sharp};
use crate::families::{
    default_probes, make_family, residual_study, seq78_norm, Generator, Pair, SampledFamily,
};
use crate::funceq::{check, detect_violation, eps_interpolation, EquationCase};
use crate::kernels::{Grid, Kernel};
use crate::laplace::{check_scalar_inversion, check_transform_suite, TransformCase};
use crate::mat::{self, CMat};
use crate::report::{ResidualReport, Tier};
use crate::special::{ml_matrix, ml_value, MlParams};
use crate::C64;
use serde::Serialize;
use std::fmt;
use std::time::Instant;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteRow {
    pub criterion: usize,
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Seconds.
    pub runtime: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl SuiteRow {
    fn from_report(criterion: usize, name: &str, r: &ResidualReport) -> Self {
        let mut notes = r.notes.clone();
        if let Some(o) = r.refinement_order {
            notes.push(format!("refinement order {o:.2}"));
        }
        Self {
            criterion,
            name: name.into(),
            residual: r.max_residual,
            tolerance: r.tolerance,
            pass: r.pass,
            runtime: 0.0,
            notes,
        }
    }

    fn failed(criterion: usize, name: &str, tolerance: f64, e: &Error) -> Self {
        Self {
            criterion,
            name: name.into(),
            residual: f64::NAN,
            tolerance,
            pass: false,
            runtime: 0.0,
            notes: vec![format!("error: {e}")],
        }
    }

    fn note(mut self, s: impl Into<String>) -> Self {
        self.notes.push(s.into());
        self
    }
}

/// Rows of one criterion and their combined wall time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionRun {
    pub criterion: usize,
    pub rows: Vec<SuiteRow>,
    pub runtime: f64,
}

impl CriterionRun {
    pub fn pass(&self) -> bool {
        !self.rows.is_empty() && self.rows.iter().all(|r| r.pass)
    }

    /// Wall-time budget in seconds, where one is pinned.
    pub fn budget(&self) -> Option<f64> {
        budget(self.criterion)
    }

    pub fn within_budget(&self) -> bool {
        self.budget().map_or(true, |b| self.runtime <= b)
    }
}

pub fn budget(criterion: usize) -> Option<f64> {
    match criterion {
        1 | 3 => Some(10.0),
        2 => Some(5.0),
        4 => Some(30.0),
        5 | 6 => Some(60.0),
        10 => Some(600.0),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuiteName {
    PaperIdentities,
    Extensions,
    Funceqs,
    Families,
    All,
}

impl SuiteName {
    pub const NAMES: [&'static str; 5] = ["paper-identities", "extensions", "funceqs", "families", "all"];

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "paper-identities" => SuiteName::PaperIdentities,
            "extensions" => SuiteName::Extensions,
            "funceqs" => SuiteName::Funceqs,
            "families" => SuiteName::Families,
            "all" => SuiteName::All,
            _ => {
                return Err(Error::Parse(format!(
                    "unknown suite `{s}`; expected one of {}",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }

    pub fn criteria(self) -> &'static [usize] {
        match self {
            SuiteName::PaperIdentities => &[1, 2],
            SuiteName::Extensions => &[4, 5],
            SuiteName::Funceqs => &[6, 7],
            SuiteName::Families => &[3, 8, 9],
            SuiteName::All => &[1, 2, 3, 4, 5, 6, 7, 8, 9],
        }
    }
}

impl fmt::Display for SuiteName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let i = match self {
            SuiteName::PaperIdentities => 0,
            SuiteName::Extensions => 1,
            SuiteName::Funceqs => 2,
            SuiteName::Families => 3,
            SuiteName::All => 4,
        };
        f.write_str(Self::NAMES[i])
    }
}

/// Runs the criteria of `name`. Rows without a pinned tolerance use the tier.
pub fn run_suite(name: SuiteName, tier: Tier) -> Vec<CriterionRun> {
    let mut runs: Vec<CriterionRun> = name.criteria().iter().map(|&k| run_criterion(k)).collect();
    if name == SuiteName::PaperIdentities || name == SuiteName::All {
        runs.push(timed(0, || calculus_rows(tier)));
    }
    runs
}

/// One numbered criterion (1 to 9).
pub fn run_criterion(k: usize) -> CriterionRun {
    timed(k, || match k {
        1 => c1(),
        2 => c2(),
        3 => c3(),
        4 => c4(),
        5 => c5(),
        6 => c6(),
        7 => c7(),
        8 => c8(),
        9 => c9(),
        _ => vec![SuiteRow::failed(k, "criterion", 0.0, &Error::DomainError(format!("no criterion {k}")))],
    })
}

fn timed(k: usize, f: impl FnOnce() -> Vec<SuiteRow>) -> CriterionRun {
    let t0 = Instant::now();
    let rows = f();
    CriterionRun { criterion: k, rows, runtime: t0.elapsed().as_secs_f64() }
}

/// Times one row and turns errors into failing rows.
fn row(k: usize, name: &str, tol: f64, f: impl FnOnce() -> Result<SuiteRow>) -> SuiteRow {
    let t0 = Instant::now();
    let mut r = f().unwrap_or_else(|e| SuiteRow::failed(k, name, tol, &e));
    r.runtime = t0.elapsed().as_secs_f64();
    r
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

fn nil_upper() -> Generator {
    Generator::dense(mat::from_flat(2, &[re(0.0), re(1.0), re(0.0), re(0.0)]))
        .expect("square")
        .named("nilpotent upper")
}

fn nil_lower() -> Generator {
    Generator::dense(mat::from_flat(2, &[re(0.0), re(0.0), re(1.0), re(0.0)]))
        .expect("square")
        .named("nilpotent lower")
}

fn diag12() -> Generator {
    Generator::diagonal(vec![re(-1.0), re(-2.0)]).named("diag(-1,-2)")
}

fn minus_one() -> Generator {
    Generator::scalar(re(-1.0)).named("scalar -1")
}

fn c1() -> Vec<SuiteRow> {
    let tol = 1e-3;
    vec![row(1, "scalar inversion, alpha=0.5, n=256", tol, || {
        let r = check_scalar_inversion(0.5, &[(1.0, 2.0), (2.0, 1.0), (1.0, 1.0)], 256, tol)?;
        let order = r.refinement_order.unwrap_or(f64::NAN);
        let mut s = SuiteRow::from_report(1, "scalar inversion, alpha=0.5, n=256", &r);
        s.pass = r.pass && order >= 0.5;
        Ok(s.note("order must be at least 0.5"))
    })]
}

/// The six `(λ, μ)` sample points.
pub fn transform_points() -> Vec<(C64, C64)> {
    vec![
        (re(1.0), re(2.0)),
        (re(2.0), re(1.0)),
        (re(1.5), re(3.0)),
        (re(3.0), re(1.5)),
        (C64::new(2.0, 1.0), C64::new(3.0, -1.0)),
        (re(4.0), re(2.5)),
    ]
}

/// Every transform identity for kernel `k`; `c` is the kernel whose
/// derivative enters the derivative lifts.
pub fn transform_cases(k: &Kernel, c: &Kernel) -> Vec<TransformCase> {
    let e = Kernel::Exponential(re(0.5));
    vec![
        TransformCase::SumLift(k.clone()),
        TransformCase::DifferenceLift(k.clone()),
        TransformCase::Tensor(k.clone(), e.clone()),
        TransformCase::Product(BivarField::plus(k.clone()), BivarField::tensor(k.clone(), e)),
        TransformCase::DerivSumLift(c.clone()),
        TransformCase::DerivDifferenceLift(c.clone()),
    ]
}

fn c2() -> Vec<SuiteRow> {
    let groups = [
        ("transform identities, exponential kernel", Kernel::Exponential(re(1.0)), Kernel::Exponential(re(1.0)), 1e-6),
        ("transform identities, constant kernel", Kernel::Constant(1.0), Kernel::g(2.0), 1e-6),
        ("transform identities, g_0.5", Kernel::g(0.5), Kernel::g(1.5), 1e-4),
    ];
    let pts = transform_points();
    groups
        .iter()
        .map(|(name, k, c, tol)| {
            row(2, name, *tol, || {
                let cases: Vec<(TransformCase, f64)> = transform_cases(k, c).into_iter().map(|x| (x, *tol)).collect();
                let r = check_transform_suite(&pts, &cases);
                let mut s = SuiteRow::from_report(2, name, &r);
                s.notes.extend(r.parts.iter().filter(|p| !p.pass).map(|p| format!("failed: {}", p.check)));
                Ok(s)
            })
        })
        .collect()
}

fn c3() -> Vec<SuiteRow> {
    let mut rows = Vec::new();
    for (name, pair, g) in [
        ("volterra, semigroup, nilpotent", Pair::Semigroup, nil_upper()),
        ("volterra, cosine, nilpotent", Pair::Cosine, nil_lower()),
    ] {
        rows.push(row(3, name, 1e-10, || {
            let f = make_family(&pair, &g, &Grid::new(2.0, 64)?)?;
            let r = f.volterra_residual(&default_probes(2), 1e-10)?;
            Ok(SuiteRow::from_report(3, name, &r))
        }));
    }
    for (name, pair) in [
        ("volterra, frac(0.5,0), A=-1, n=256", Pair::Frac { alpha: 0.5, beta: 0.0 }),
        ("volterra, frac_aa(0.5), A=-1, n=256", Pair::FracAa { alpha: 0.5 }),
    ] {
        rows.push(row(3, name, 1e-3, || {
            let r = residual_study(&pair, &minus_one(), 1.0, 256, 1e-3)?;
            let mut s = SuiteRow::from_report(3, name, &r);
            s.pass = r.pass && r.refinement_order.is_some_and(|o| o >= 1.0);
            Ok(s.note("order must be at least 1"))
        }));
    }
    rows
}

/// Largest `‖S(t_i) − oracle(t_i)‖ / max(1, ‖oracle(t_i)‖)` over nodes in
/// `(lo, hi]`.
fn deviation(f: &SampledFamily, lo: usize, hi: usize, oracle: impl Fn(f64) -> Result<CMat>) -> Result<(f64, f64)> {
    let mut worst = (0.0f64, 0.0);
    for i in lo + 1..=hi {
        let t = f.values.t(i);
        let want = oracle(t)?;
        let e = mat::op_norm(&(f.value(i) - &want)) / mat::op_norm(&want).max(1.0);
        if e > worst.0 || e.is_nan() {
            worst = (e, t);
        }
    }
    Ok(worst)
}

/// Relative deviation of the no-jump extension from the closed form on
/// `(1, 2]`, with `n` cells per unit.
pub fn nojump_deviation(n: usize) -> Result<(f64, f64)> {
    let f = make_family(&Pair::FracAa { alpha: 0.5 }, &minus_one(), &Grid::with_step(1.0 / n as f64, n + 1)?)?;
    let e = extend_nojump_aa(&f, 1, None)?;
    if e.values.n < 2 * n {
        return Err(Error::IntervalExceeded(format!("extension reaches node {} only", e.values.n)));
    }
    let mut worst = (0.0f64, 0.0);
    for i in n + 1..=2 * n {
        let t = e.values.t(i);
        let want = t.powf(-0.5) * ml_value(0.5, 0.5, re(-t.sqrt()));
        let d = (e.values.at(i) - want).norm() / want.norm();
        if d > worst.0 || d.is_nan() {
            worst = (d, t);
        }
    }
    Ok(worst)
}

fn c4() -> Vec<SuiteRow> {
    [(128usize, 1e-2), (256, 3e-3)]
        .iter()
        .map(|&(n, tol)| {
            let name = format!("no-jump extension vs closed form on (1,2], n={n}");
            row(4, &name, tol, || {
                let (d, t) = nojump_deviation(n)?;
                Ok(SuiteRow {
                    criterion: 4,
                    name: name.clone(),
                    residual: d,
                    tolerance: tol,
                    pass: d <= tol,
                    runtime: 0.0,
                    notes: vec![format!("worst at t={t:.4}")],
                })
            })
        })
        .collect()
}

/// `(g₂∗S)(t) = t² E_{1,3}(tA)` for the semigroup of `A`.
fn g2_conv_semigroup(a: &CMat, t: f64) -> Result<CMat> {
    Ok(ml_matrix(MlParams::new(1.0, 3.0)?, &(a * re(t)))? * re(t * t))
}

fn c5() -> Vec<SuiteRow> {
    let n = 64;
    let mut rows = Vec::new();
    for (name, g, tol) in [
        ("general extension, semigroup, nilpotent", nil_upper(), 1e-6),
        ("general extension, semigroup, diag(-1,-2)", diag12(), 1e-3),
    ] {
        rows.push(row(5, name, tol, || {
            let f = make_family(&Pair::Semigroup, &g, &Grid::with_step(1.0 / n as f64, n + 1)?)?;
            let e = extend_general(&f, 1)?;
            let a = g.matrix();
            let (d, t) = deviation(&e, n, 2 * n, |t| g2_conv_semigroup(&a, t))?;
            let mut s = SuiteRow {
                criterion: 5,
                name: name.into(),
                residual: d,
                tolerance: tol,
                pass: d <= tol,
                runtime: 0.0,
                notes: vec![format!("worst at t={t:.4}"), format!("k_out = {}", e.k)],
            };
            if !e.k.same_as(&Kernel::g(3.0)) {
                s.pass = false;
                s.notes.push("k_out differs from g_3".into());
            }
            Ok(s)
        }));
    }
    let name = "sharp extension, frac(0.5,0), A=-1";
    rows.push(row(5, name, 1e-3, || {
        let n = 128;
        let f = make_family(&Pair::Frac { alpha: 0.5, beta: 0.0 }, &minus_one(), &Grid::with_step(1.0 / n as f64, n + 1)?)?;
        let e = extend_sharp(&f, 1, None, None)?;
        let r = e.volterra_residual(&default_probes(1), 1e-3)?;
        let mut s = SuiteRow::from_report(5, name, &r).note(format!("k_out = {}", e.k));
        if !e.k.same_as(&Kernel::g(1.5)) {
            s.pass = false;
            s.notes.push("k_out differs from g_1.5".into());
        }
        Ok(s)
    }));
    rows
}

fn funceq_row(k: usize, name: &str, case: EquationCase, pair: Pair, g: Generator, grid: (f64, usize), tol: f64) -> SuiteRow {
    row(k, name, tol, || {
        let f = make_family(&pair, &g, &Grid::new(grid.0, grid.1)?)?;
        let r = check(&case, &f, &default_probes(f.d()), tol)?;
        Ok(SuiteRow::from_report(k, name, &r))
    })
}

fn c6() -> Vec<SuiteRow> {
    let frac05 = Pair::Frac { alpha: 0.5, beta: 0.0 };
    let mut rows = vec![
        funceq_row(6, "cauchy, nilpotent", EquationCase::Cauchy, Pair::Semigroup, nil_upper(), (2.0, 64), 1e-12),
        funceq_row(6, "dalembert, nilpotent", EquationCase::Dalembert, Pair::Cosine, nil_lower(), (2.0, 64), 1e-12),
        funceq_row(6, "translation_ak, frac(0.5,0), A=-1", EquationCase::TranslationAk, frac05, minus_one(), (2.0, 128), 1e-3),
        funceq_row(
            6,
            "translation_ak, frac(0.5,0), A=0",
            EquationCase::TranslationAk,
            frac05,
            Generator::scalar(re(0.0)).named("scalar 0"),
            (2.0, 128),
            1e-3,
        ),
        funceq_row(
            6,
            "superdiff_tk, frac(1.5,0), A=-1, n=128",
            EquationCase::SuperdiffTk,
            Pair::Frac { alpha: 1.5, beta: 0.0 },
            minus_one(),
            (2.0, 128),
            1e-2,
        ),
    ];
    let name = "eps interpolation, eps in {0,0.25,0.5,0.75,1}";
    rows.push(row(6, name, 1e-4, || {
        let r = eps_interpolation(&diag12(), &Grid::new(2.0, 128)?, &[0.0, 0.25, 0.5, 0.75, 1.0], 1e-4)?;
        Ok(SuiteRow::from_report(6, name, &r))
    }));
    let eps = 1e-2;
    for (name, case, pair, g) in [
        ("negative control, cauchy", EquationCase::Cauchy, Pair::Semigroup, nil_upper()),
        ("negative control, dalembert", EquationCase::Dalembert, Pair::Cosine, nil_lower()),
        ("negative control, translation_aa", EquationCase::TranslationAa, Pair::FracAa { alpha: 0.5 }, minus_one()),
    ] {
        rows.push(row(6, name, 0.5 * eps, || {
            let f = make_family(&pair, &g, &Grid::new(2.0, 128)?)?;
            let v = detect_violation(&case, &f, &default_probes(f.d()), &[0.0, eps])?;
            Ok(SuiteRow {
                criterion: 6,
                name: name.into(),
                residual: v.residuals[1],
                tolerance: 0.5 * eps,
                pass: v.detected,
                runtime: 0.0,
                notes: vec![
                    format!("perturbation eps={eps}; residual must be at least the tolerance"),
                    format!("unperturbed residual {:.3e}", v.residuals[0]),
                ],
            })
        }));
    }
    rows
}

fn c7() -> Vec<SuiteRow> {
    let name = "rof_translation with alpha=1.5 is rejected";
    vec![row(7, name, 0.0, || {
        let f = make_family(&Pair::Frac { alpha: 1.5, beta: 1.0 }, &minus_one(), &Grid::new(2.0, 64)?)?;
        let outcome = check(&EquationCase::RofTranslation, &f, &default_probes(1), 1e-2);
        let (pass, note) = match outcome {
            Err(Error::DivergentMoment(m)) => (true, format!("divergent moment: {m}")),
            Err(e) => (false, format!("unexpected error: {e}")),
            Ok(r) => (false, format!("no divergence flagged, residual {:.3e}", r.max_residual)),
        };
        Ok(SuiteRow { criterion: 7, name: name.into(), residual: 0.0, tolerance: 0.0, pass, runtime: 0.0, notes: vec![note] })
    })]
}

fn c8() -> Vec<SuiteRow> {
    let norm = |m, t| seq78_norm(0.5, 1.0, 1.0, m, t);
    let mut rows = Vec::new();
    let name = "sequence family at t=0.9, M=20 vs 40";
    rows.push(row(8, name, 0.05, || {
        let (a, b) = (norm(20, 0.9)?, norm(40, 0.9)?);
        let rel = (b - a).abs() / a;
        Ok(SuiteRow {
            criterion: 8,
            name: name.into(),
            residual: rel,
            tolerance: 0.05,
            pass: rel <= 0.05,
            runtime: 0.0,
            notes: vec![format!("norms {a:.6e} (M=10: {:.6e}), {b:.6e}", norm(10, 0.9)?)],
        })
    }));
    let name = "sequence family at t=1.5, growth M=20 to 40";
    rows.push(row(8, name, 2.0, || {
        let (a, b) = (norm(20, 1.5)?, norm(40, 1.5)?);
        Ok(SuiteRow {
            criterion: 8,
            name: name.into(),
            residual: b / a,
            tolerance: 2.0,
            pass: b >= 2.0 * a,
            runtime: 0.0,
            notes: vec![format!("growth factor must be at least 2; norms {a:.6e}, {b:.6e}")],
        })
    }));
    rows
}

fn c9() -> Vec<SuiteRow> {
    let name = "block family, b=g_0.5, A=-1, n=128";
    vec![row(9, name, 1e-2, || {
        let f = make_family(&Pair::Block { beta: 0.5 }, &minus_one(), &Grid::new(1.0, 128)?)?;
        let r = f.volterra_residual(&default_probes(2), 1e-2)?;
        Ok(SuiteRow::from_report(9, name, &r).note(format!("commutation residual {:.3e}", f.commutation_residual())))
    })]
}

/// Interaction and split rules of the convolution calculus, judged at the
/// tier tolerance.
fn calculus_rows(tier: Tier) -> Vec<SuiteRow> {
    let tol = tier.tol();
    let mut rows = Vec::new();
    let name = "interaction rules";
    rows.push(row(0, name, tol, || {
        let r = check_interaction_rules(
            &Kernel::Exponential(re(1.0)),
            &Kernel::g(1.5),
            &Kernel::Constant(1.0),
            &Kernel::g(2.0),
            &Grid::new(1.0, 64)?,
            tol,
            200,
        )?;
        Ok(SuiteRow::from_report(0, name, &r))
    }));
    let name = "split identity";
    rows.push(row(0, name, tol, || {
        let r = check_split_identity(&Kernel::g(1.5), &Kernel::Exponential(re(1.0)), &Kernel::g(2.0), 1.0 / 64.0, 96, 40, tol)?;
        Ok(SuiteRow::from_report(0, name, &r))
    }));
    rows
}

/// Plain-text table: identity, residual, tolerance, verdict, runtime.
pub fn format_table(runs: &[CriterionRun]) -> String {
    let rows: Vec<&SuiteRow> = runs.iter().flat_map(|r| &r.rows).collect();
    let w = rows.iter().map(|r| r.name.len()).max().unwrap_or(8).max(8);
    let mut out = format!("{:<4} {:<w$} {:>11} {:>11} {:>7} {:>9}\n", "crit", "identity", "residual", "tolerance", "verdict", "runtime");
    for r in rows {
        let crit = if r.criterion == 0 { "-".to_string() } else { r.criterion.to_string() };
        out += &format!(
            "{:<4} {:<w$} {:>11.3e} {:>11.3e} {:>7} {:>8.2}s\n",
            crit,
            r.name,
            r.residual,
            r.tolerance,
            if r.pass { "pass" } else { "FAIL" },
            r.runtime
        );
    }
    for c in runs.iter().filter(|c| !c.within_budget()) {
        out += &format!("criterion {} took {:.1}s, over its {:.0}s budget\n", c.criterion, c.runtime, c.budget().unwrap_or(0.0));
    }
    out
}

/// Every row passes and every criterion stays within its time budget.
pub fn all_pass(runs: &[CriterionRun]) -> bool {
    runs.iter().all(|c| c.pass() && c.within_budget())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_roundtrip() {
        for n in SuiteName::NAMES {
            assert_eq!(SuiteName::parse(n).unwrap().to_string(), n);
        }
        assert!(SuiteName::parse("everything").is_err());
    }

    #[test]
    fn divergence_row_passes() {
        let r = run_criterion(7);
        assert!(r.pass(), "{:?}", r.rows);
    }

    #[test]
    fn sequence_rows_pass() {
        let r = run_criterion(8);
        assert!(r.pass(), "{:?}", r.rows);
    }

    #[test]
    fn table_marks_failures() {
        let run = CriterionRun {
            criterion: 1,
            rows: vec![SuiteRow::failed(1, "x", 1.0, &Error::Parse("y".into()))],
            runtime: 0.0,
        };
        let t = format_table(&[run]);
        assert!(t.contains("FAIL") && t.contains("identity"));
    }
}
