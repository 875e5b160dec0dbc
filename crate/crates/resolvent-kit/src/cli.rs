//! Command-line front end.
//!
//! Exit codes: 0 when every requested check passes, 1 when a check fails,
//! 2 on usage errors and on rejected inputs or hypotheses.

use crate::error::{Error, Result};
use crate::extension::{extend, ExtensionPlan, Method};
use crate::families::{
    eps_resolvent_family, eps_semigroup_family, make_family, seeded_probes, Generator, Pair, SampledFamily, PROBE_SEED,
};
use crate::funceq::{check, EquationCase};
use crate::kernels::{conv1, conv_power, Grid, Kernel};
use crate::mat;
use crate::report::{refinement_order, write_atomic, ResidualReport, Tier};
use crate::special::{ml, MlParams};
use crate::suite::{self, SuiteName};
use crate::C64;
use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "resolvent-kit", version, about = "Resolvent families of matrix generators: build, extend, verify")]
struct Cli {
    /// Tolerance tier, relative to max(1, max ‖S‖).
    #[arg(long, global = true, value_enum, default_value_t = Tier::Default)]
    tier: Tier,
    /// Seed of the random probe vector.
    #[arg(long, global = true, default_value_t = PROBE_SEED)]
    seed: u64,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Mittag-Leffler function E_{α,β}(z).
    Ml {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        beta: f64,
        /// Complex argument, e.g. `1`, `-2+0.5i`.
        #[arg(long, allow_hyphen_values = true)]
        z: String,
    },
    /// Kernel evaluation and convolution.
    #[command(subcommand)]
    Kernel(KernelCmd),
    /// Residual checks.
    #[command(subcommand)]
    Verify(VerifyCmd),
    /// Extends a local family to a longer interval.
    Extend(ExtendArgs),
    /// Convolution and transform identities (same as `verify identities`).
    Identities(ReportArg),
    /// Runs an acceptance bundle: paper-identities, extensions, funceqs, families, all.
    Suite {
        name: String,
        #[command(flatten)]
        report: ReportArg,
    },
}

#[derive(Debug, Subcommand)]
enum KernelCmd {
    /// Pointwise value.
    Eval {
        #[arg(long)]
        kernel: String,
        #[arg(long)]
        t: f64,
    },
    /// `(f∗g)(t_i)` on a grid.
    Conv {
        #[arg(long)]
        f: String,
        #[arg(long)]
        g: String,
        #[arg(long)]
        grid: String,
    },
    /// `f^{∗n}(t_i)` on a grid.
    Pow {
        #[arg(long)]
        kernel: String,
        #[arg(long)]
        n: u32,
        #[arg(long)]
        grid: String,
    },
}

#[derive(Debug, Subcommand)]
enum VerifyCmd {
    /// Defining Volterra equation `A(a∗S) = S − k`.
    Volterra {
        /// Family CSV dump.
        #[arg(long, conflicts_with_all = ["pair", "generator", "grid"])]
        family: Option<PathBuf>,
        #[command(flatten)]
        src: FamilyArgs,
        #[command(flatten)]
        report: ReportArg,
    },
    /// One functional equation.
    Funceq {
        #[arg(long)]
        equation: String,
        #[command(flatten)]
        src: FamilyArgs,
        /// Adds `ε·I` to every sample.
        #[arg(long)]
        perturb: Option<f64>,
        /// ε of the interpolation equations.
        #[arg(long)]
        eps: Option<f64>,
        #[command(flatten)]
        report: ReportArg,
    },
    /// Convolution and transform identities.
    Identities(ReportArg),
}

#[derive(Debug, Args)]
struct FamilyArgs {
    /// `semigroup`, `cosine`, `frac(α,β)`, `frac_aa(α)`, `seq78(α,β,τ,M)`, `block(β)`.
    #[arg(long)]
    pair: Option<String>,
    /// Generator file.
    #[arg(long)]
    generator: Option<PathBuf>,
    /// `T:n`.
    #[arg(long)]
    grid: Option<String>,
}

#[derive(Debug, Args)]
struct ReportArg {
    /// JSON report path, written atomically.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExtendArgs {
    #[arg(long, value_enum)]
    method: Method,
    /// Number of extension steps.
    #[arg(long, default_value_t = 1)]
    n: usize,
    /// Input pair; defaults to `frac_aa(α)` for nojump_aa and `frac(α,β)` otherwise.
    #[arg(long)]
    pair: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long)]
    generator: PathBuf,
    /// `T:n`: local interval (0, T] with n cells.
    #[arg(long)]
    grid: String,
    #[arg(long)]
    b: Option<String>,
    #[arg(long)]
    c: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Serialize)]
struct CheckReport {
    schema: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    equation: Option<String>,
    pair: String,
    grid: String,
    max_residual: f64,
    rel_residual: f64,
    argmax: Vec<f64>,
    tolerance: f64,
    pass: bool,
    refinement_order: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
}

impl CheckReport {
    fn new(equation: Option<String>, pair: String, r: &ResidualReport, order: Option<f64>) -> Self {
        Self {
            schema: 1,
            equation,
            pair,
            grid: r.grid.clone().unwrap_or_default(),
            max_residual: r.max_residual,
            rel_residual: r.rel_residual,
            argmax: r.argmax.clone(),
            tolerance: r.tolerance,
            pass: r.pass,
            refinement_order: order,
            notes: r.notes.clone(),
        }
    }
}

#[derive(Debug, Serialize)]
struct SuiteReport<'a> {
    schema: u32,
    suite: String,
    tier: Tier,
    pass: bool,
    criteria: &'a [suite::CriterionRun],
}

/// Runs one command line; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn dispatch(cli: &Cli) -> Result<bool> {
    match &cli.cmd {
        Cmd::Ml { alpha, beta, z } => {
            let z = mat::parse_complex(z)?;
            let v = ml(MlParams::new(*alpha, *beta)?, z);
            println!("{}", mat::format_complex(v.value));
            println!("error estimate {:.3e} ({:?})", v.err, v.regime);
            if v.precision_loss {
                eprintln!("warning: relative accuracy 1e-10 not reached");
            }
            Ok(true)
        }
        Cmd::Kernel(k) => kernel_cmd(k),
        Cmd::Verify(VerifyCmd::Volterra { family, src, report }) => {
            let (fam, label) = match family {
                Some(p) => {
                    let fam = SampledFamily::from_csv(&read(p)?)?;
                    let label = fam.pair.map(|p| p.to_string()).unwrap_or_else(|| "none".into());
                    (fam, label)
                }
                None => build_family(src)?,
            };
            let probes = seeded_probes(fam.d(), cli.seed);
            let r = fam.volterra_residual(&probes, cli.tier.tol())?.judged(cli.tier.tol());
            let rep = CheckReport::new(Some("defining_volterra".into()), label, &r, None);
            emit(&rep, &report.report)?;
            Ok(rep.pass)
        }
        Cmd::Verify(VerifyCmd::Funceq { equation, src, perturb, eps, report }) => {
            let case = EquationCase::parse(equation, *eps)?;
            let tol = cli.tier.tol();
            let grid = Grid::parse(src.grid.as_deref().ok_or_else(|| missing("--grid"))?)?;
            let run = |g: &Grid| -> Result<(ResidualReport, String)> {
                let (mut fam, label) = funceq_family(&case, src, g)?;
                if let Some(e) = perturb {
                    fam = fam.perturbed(C64::new(*e, 0.0))?;
                }
                let probes = seeded_probes(fam.d(), cli.seed);
                Ok((check(&case, &fam, &probes, tol)?.judged(tol), label))
            };
            let (r, label) = run(&grid)?;
            let order = if grid.n >= 16 && grid.n % 2 == 0 {
                let (rc, _) = run(&Grid::new(grid.t_end, grid.n / 2)?)?;
                Some(refinement_order(rc.max_residual, r.max_residual, 2.0)).filter(|o| o.is_finite())
            } else {
                None
            };
            let rep = CheckReport::new(Some(case.id().into()), label, &r, order);
            emit(&rep, &report.report)?;
            Ok(rep.pass)
        }
        Cmd::Verify(VerifyCmd::Identities(report)) | Cmd::Identities(report) => {
            run_suite(SuiteName::PaperIdentities, cli.tier, &report.report)
        }
        Cmd::Extend(args) => extend_cmd(args),
        Cmd::Suite { name, report } => run_suite(SuiteName::parse(name)?, cli.tier, &report.report),
    }
}

fn missing(flag: &str) -> Error {
    Error::Parse(format!("missing {flag}; expected --pair P --generator FILE --grid T:n"))
}

fn read(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))
}

fn load_generator(p: &Path) -> Result<Generator> {
    let name = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    Ok(Generator::parse(&read(p)?)?.named(name))
}

fn build_family(src: &FamilyArgs) -> Result<(SampledFamily, String)> {
    let pair = Pair::parse(src.pair.as_deref().ok_or_else(|| missing("--pair"))?)?;
    let gen = load_generator(src.generator.as_deref().ok_or_else(|| missing("--generator"))?)?;
    let grid = Grid::parse(src.grid.as_deref().ok_or_else(|| missing("--grid"))?)?;
    Ok((make_family(&pair, &gen, &grid)?, pair.to_string()))
}

/// The ε equations come with their own families; the rest use `--pair`.
fn funceq_family(case: &EquationCase, src: &FamilyArgs, grid: &Grid) -> Result<(SampledFamily, String)> {
    let gen = || load_generator(src.generator.as_deref().ok_or_else(|| missing("--generator"))?);
    match *case {
        EquationCase::EpsSemigroup(e) => Ok((eps_semigroup_family(e, &gen()?, grid)?, format!("eps_semigroup({e})"))),
        EquationCase::EpsResolvent(e) => Ok((eps_resolvent_family(e, &gen()?, grid)?, format!("eps_resolvent({e})"))),
        _ => {
            let pair = Pair::parse(src.pair.as_deref().ok_or_else(|| missing("--pair"))?)?;
            Ok((make_family(&pair, &gen()?, grid)?, pair.to_string()))
        }
    }
}

fn emit(rep: &impl Serialize, path: &Option<PathBuf>) -> Result<()> {
    let json = serde_json::to_string_pretty(rep).map_err(|e| Error::Io(e.to_string()))?;
    println!("{json}");
    if let Some(p) = path {
        write_atomic(p, &(json + "\n"))?;
    }
    Ok(())
}

fn run_suite(name: SuiteName, tier: Tier, report: &Option<PathBuf>) -> Result<bool> {
    let runs = suite::run_suite(name, tier);
    print!("{}", suite::format_table(&runs));
    let pass = suite::all_pass(&runs);
    println!("{}: {}", name, if pass { "pass" } else { "FAIL" });
    if let Some(p) = report {
        let rep = SuiteReport { schema: 1, suite: name.to_string(), tier, pass, criteria: &runs };
        let json = serde_json::to_string_pretty(&rep).map_err(|e| Error::Io(e.to_string()))?;
        write_atomic(p, &(json + "\n"))?;
    }
    Ok(pass)
}

fn kernel_cmd(k: &KernelCmd) -> Result<bool> {
    let table = |s: &crate::quad::Sampled, closed: &Kernel| {
        let exact = closed.is_evaluable();
        println!("t,value{}", if exact { ",closed_form" } else { "" });
        for i in 1..=s.n {
            let t = s.t(i);
            let v = mat::format_complex(s.at(i));
            match closed.eval(t) {
                Ok(c) if exact => println!("{t},{v},{}", mat::format_complex(c)),
                _ => println!("{t},{v}"),
            }
        }
    };
    match k {
        KernelCmd::Eval { kernel, t } => {
            println!("{}", mat::format_complex(Kernel::parse(kernel)?.eval(*t)?));
        }
        KernelCmd::Conv { f, g, grid } => {
            let (f, g) = (Kernel::parse(f)?, Kernel::parse(g)?);
            let s = conv1(&f, &g, &Grid::parse(grid)?)?;
            table(&s, &Kernel::conv(f, g).simplify());
        }
        KernelCmd::Pow { kernel, n, grid } => {
            let f = Kernel::parse(kernel)?;
            let s = conv_power(&f, *n, &Grid::parse(grid)?)?;
            table(&s, &Kernel::pow(f, *n).simplify());
        }
    }
    Ok(true)
}

fn extend_cmd(a: &ExtendArgs) -> Result<bool> {
    let pair = match (&a.pair, a.alpha) {
        (Some(p), _) => Pair::parse(p)?,
        (None, Some(alpha)) if a.method == Method::NojumpAa => Pair::FracAa { alpha },
        (None, Some(alpha)) => Pair::Frac { alpha, beta: a.beta },
        (None, None) => return Err(Error::Parse("extend needs --pair or --alpha".into())),
    };
    let gen = load_generator(&a.generator)?;
    let local = Grid::parse(&a.grid)?;
    // one node past T so that T lies strictly inside the input interval
    let input = Grid::with_step(local.h(), local.n + 1)?;
    let fam = make_family(&pair, &gen, &input)?;
    let mut plan = ExtensionPlan::new(a.method, a.n).with_t(local.t_end);
    if let Some(b) = &a.b {
        plan = plan.with_b(Kernel::parse(b)?);
    }
    if let Some(c) = &a.c {
        plan = plan.with_c(Kernel::parse(c)?);
    }
    let out = extend(&fam, &plan)?;
    write_atomic(&a.out, &out.to_csv()?)?;
    println!(
        "{} extension of {pair} over {} steps: {} nodes up to t = {}, k_out = {}",
        a.method,
        a.n,
        out.values.n,
        out.values.t(out.values.n),
        out.k
    );
    Ok(true)
}
