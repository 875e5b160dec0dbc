use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_resolvent-kit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn ml_prints_e() {
    let o = run(&["ml", "--alpha", "1", "--beta", "1", "--z", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("2.71828182845"), "{}", stdout(&o));
}

#[test]
fn ml_half_at_one() {
    let o = run(&["ml", "--alpha", "0.5", "--beta", "1", "--z", "1"]);
    let v: f64 = stdout(&o).lines().next().unwrap().trim().parse().unwrap();
    // e·erfc(−1)
    let want = std::f64::consts::E * libm::erfc(-1.0);
    assert!((v - want).abs() <= 1e-12, "{v} {want}");
}

#[test]
fn cauchy_on_nilpotent_passes() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "nilpotent2.txt", "2\n0 1\n0 0\n");
    let o = run(&["verify", "funceq", "--equation", "cauchy", "--pair", "semigroup", "--generator", &g, "--grid", "2:64"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(r["schema"], 1);
    assert_eq!(r["pass"], true);
}

#[test]
fn perturbed_family_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "nilpotent2.txt", "2\n0 1\n0 0\n");
    let o = run(&[
        "verify", "funceq", "--equation", "cauchy", "--pair", "semigroup", "--generator", &g, "--grid", "2:64", "--perturb",
        "0.01",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn extend_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "scalar_m1.txt", "1\n-1\n");
    let fam = dir.path().join("fam.csv");
    let fam = fam.to_str().unwrap();
    let o = run(&["extend", "--method", "nojump_aa", "--alpha", "0.5", "--n", "1", "--generator", &g, "--grid", "1:128", "--out", fam]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["verify", "volterra", "--family", fam]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn unknown_suite_is_a_usage_error() {
    assert_eq!(run(&["suite", "bogus"]).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(run(&["ml", "--alpha", "1"]).status.code(), Some(2));
}

#[test]
fn missing_generator_file_exits_two() {
    let o = run(&["verify", "volterra", "--pair", "semigroup", "--generator", "/nonexistent/g.txt", "--grid", "1:8"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn reports_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "scalar.txt", "1\n-1\n");
    let mut seen = Vec::new();
    for name in ["a.json", "b.json"] {
        let p = dir.path().join(name);
        let o = run(&[
            "verify", "funceq", "--tier", "coarse", "--equation", "translation_ak", "--pair", "frac(0.5,0)", "--generator", &g,
            "--grid", "2:64", "--report", p.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
        seen.push(std::fs::read(&p).unwrap());
    }
    assert_eq!(seen[0], seen[1]);
}

#[test]
fn kernel_subcommands() {
    let o = run(&["kernel", "eval", "--kernel", "g(1.5)", "--t", "1"]);
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 2.0 / std::f64::consts::PI.sqrt()).abs() <= 1e-14);

    let o = run(&["kernel", "pow", "--kernel", "g(0.5)", "--n", "2", "--grid", "1:4"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,value,closed_form"));
    for l in lines {
        let cols: Vec<f64> = l.split(',').map(|c| c.parse().unwrap()).collect();
        assert!((cols[1] - 1.0).abs() <= 1e-12 && (cols[2] - 1.0).abs() <= 1e-12, "{l}");
    }

    let o = run(&["kernel", "conv", "--f", "const(1)", "--g", "const(1)", "--grid", "2:4"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let last = stdout(&o).lines().last().unwrap().to_string();
    let cols: Vec<f64> = last.split(',').map(|c| c.parse().unwrap()).collect();
    assert!((cols[0] - 2.0).abs() < 1e-15 && (cols[1] - 2.0).abs() <= 1e-12, "{last}");
}

#[test]
fn suite_report_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("suite.json");
    let o = run(&["suite", "funceqs", "--report", p.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(&p).unwrap()).unwrap();
    assert_eq!(r["schema"], 1);
    assert_eq!(r["pass"], true);
}
