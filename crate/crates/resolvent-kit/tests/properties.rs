//! Property tests for the invariants of each module.

use proptest::prelude::*;
use resolvent_kit::bivar::{conv2, BivarField};
use resolvent_kit::extension::{extend_nojump_aa, extend_sharp, output_kernel, Method};
use resolvent_kit::families::{default_probes, make_family, Generator, Pair};
use resolvent_kit::funceq::{check, EquationCase};
use resolvent_kit::kernels::{conv1, solve_pair, Grid, Kernel, PairMode};
use resolvent_kit::mat;
use resolvent_kit::quad;
use resolvent_kit::special::{ml_matrix, ml_value, rgamma, MlParams};
use resolvent_kit::C64;
use statrs::function::gamma::gamma;

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// `(g_α ∗ e^{−λ·})(t)` by its power series.
fn power_exp_conv(alpha: f64, lambda: f64, t: f64) -> f64 {
    let mut s = 0.0;
    for j in 0..80 {
        s += (-lambda * t).powi(j) * t.powf(alpha) / gamma(alpha + j as f64 + 1.0);
    }
    s
}

fn small_cases() -> ProptestConfig {
    ProptestConfig { cases: 24, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(small_cases())]

    #[test]
    fn grid_nodes_increase_and_end_at_t(t in 0.1f64..10.0, n in 1usize..300) {
        let g = Grid::new(t, n).unwrap();
        let nodes = g.nodes();
        prop_assert_eq!(nodes.len(), n);
        prop_assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        prop_assert_eq!(nodes[n - 1], t);
    }

    #[test]
    fn power_law_values(alpha in 0.05f64..3.0, t in 0.01f64..5.0) {
        let v = Kernel::g(alpha).eval(t).unwrap();
        let want = t.powf(alpha - 1.0) / gamma(alpha);
        prop_assert!((v.re - want).abs() <= 1e-12 * want.abs().max(1.0));
        prop_assert!((Kernel::g(alpha).singularity_exponent() - (alpha - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn kernel_text_roundtrip(alpha in 0.1f64..2.0, eps in 0.0f64..1.0, n in 1u32..4) {
        for k in [
            Kernel::g(alpha),
            Kernel::Interpolant(eps),
            Kernel::conv(Kernel::g(alpha), Kernel::Exponential(c(1.0))),
            Kernel::pow(Kernel::g(alpha), n),
        ] {
            let back = Kernel::parse(&k.to_string()).unwrap();
            prop_assert!(back.same_as(&k), "{} -> {}", k, back);
        }
    }

    #[test]
    fn power_kernels_form_a_semigroup(a in 0.2f64..2.0, b in 0.2f64..2.0) {
        let h = 1.0 / 64.0;
        let x = Kernel::g(a).sample(h, 64).unwrap();
        let y = Kernel::g(b).sample(h, 64).unwrap();
        let z = quad::conv(&x, &y).unwrap();
        for i in [1usize, 7, 32, 64] {
            let t = i as f64 * h;
            let want = t.powf(a + b - 1.0) / gamma(a + b);
            prop_assert!((z.at(i).re - want).abs() <= 1e-9 * want.max(1.0), "{i}: {} vs {want}", z.at(i));
        }
    }

    #[test]
    fn numeric_convolution_commutes(a in 0.3f64..2.0, l in 0.0f64..3.0) {
        let h = 1.0 / 64.0;
        let x = Kernel::g(a).sample(h, 64).unwrap();
        let y = Kernel::Exponential(c(l)).sample(h, 64).unwrap();
        let xy = quad::conv(&x, &y).unwrap();
        let yx = quad::conv(&y, &x).unwrap();
        for i in 1..=64 {
            let want = power_exp_conv(a, l, i as f64 * h);
            let tol = 2e-4 * want.abs().max(1.0);
            prop_assert!((xy.at(i).re - want).abs() <= tol);
            prop_assert!((xy.at(i) - yx.at(i)).norm() <= 2.0 * tol);
        }
    }

    #[test]
    fn convolution_is_associative(a in 0.3f64..1.5, b in 0.3f64..1.5) {
        let g = Grid::new(1.0, 64).unwrap();
        let e = Kernel::Exponential(c(1.0));
        let left = Kernel::tabulated(conv1(&Kernel::g(a), &e, &g).unwrap()).unwrap();
        let lhs = conv1(&left, &Kernel::g(b), &g).unwrap();
        let right = Kernel::tabulated(conv1(&e, &Kernel::g(b), &g).unwrap()).unwrap();
        let rhs = conv1(&Kernel::g(a), &right, &g).unwrap();
        for i in [16usize, 40, 64] {
            let want = power_exp_conv(a + b, 1.0, i as f64 / 64.0);
            prop_assert!((lhs.at(i).re - want).abs() < 2e-3 * want.max(1.0), "{}", lhs.at(i));
            prop_assert!((rhs.at(i).re - want).abs() < 2e-3 * want.max(1.0), "{}", rhs.at(i));
        }
    }

    #[test]
    fn quadrature_is_second_order(a in 0.3f64..1.5, l in 0.5f64..3.0) {
        let err = |n: usize| {
            let h = 1.0 / n as f64;
            let x = Kernel::g(a).sample(h, n).unwrap();
            let y = Kernel::Exponential(c(l)).sample(h, n).unwrap();
            let z = quad::conv(&x, &y).unwrap();
            (1..=n).map(|i| (z.at(i).re - power_exp_conv(a, l, i as f64 * h)).abs()).fold(0.0, f64::max)
        };
        let (e1, e2) = (err(32), err(64));
        prop_assert!(e1 >= 3.0 * e2, "{e1} {e2}");
    }

    #[test]
    fn solved_pairs_convolve_to_one(alpha in 0.1f64..0.95) {
        let sol = solve_pair(&Kernel::g(alpha), &Kernel::g(alpha), PairMode::Unit).unwrap();
        prop_assume!(sol.c_valid);
        let ac = conv1(&Kernel::g(alpha), &sol.c, &Grid::new(2.0, 64).unwrap()).unwrap();
        for i in 1..=64 {
            prop_assert!((ac.at(i) - c(1.0)).norm() < 1e-8);
        }
    }

    #[test]
    fn lifts_match_their_formulas(t in 0.01f64..3.0, s in 0.01f64..3.0, a in 0.3f64..2.5) {
        let f = Kernel::g(a);
        let g = Kernel::Exponential(c(0.7));
        let ev = |x: f64, k: &Kernel| k.eval(x).unwrap();
        prop_assert_eq!(BivarField::plus(f.clone()).eval(t, s).unwrap()[0], ev(t + s, &f));
        prop_assume!((t - s).abs() > 1e-9);
        prop_assert_eq!(BivarField::minus(f.clone()).eval(t, s).unwrap()[0], ev((t - s).abs(), &f));
        prop_assert_eq!(BivarField::tensor(f.clone(), g.clone()).eval(t, s).unwrap()[0], ev(t, &f) * ev(s, &g));
    }

    #[test]
    fn double_convolution_commutes(a in 0.5f64..2.0, l in 0.0f64..2.0, p in 4usize..24, q in 4usize..24) {
        let f = BivarField::tensor(Kernel::g(a), Kernel::Exponential(c(l)));
        let g = BivarField::tensor(Kernel::Exponential(c(1.0)), Kernel::g(1.5));
        let h = 1.0 / 16.0;
        let fg = conv2(&f, &g, p, q, h).unwrap()[0];
        let gf = conv2(&g, &f, p, q, h).unwrap()[0];
        // separable oracle: (g_a∗e_1)(t)·(e_l∗g_1.5)(s)
        let want = power_exp_conv(a, 1.0, p as f64 * h) * power_exp_conv(1.5, l, q as f64 * h);
        prop_assert!((fg - gf).norm() <= 2e-4 * want.max(1.0));
        prop_assert!((fg.re - want).abs() <= 1e-3 * want.max(1.0), "{fg} {want}");
    }

    #[test]
    fn ml_one_one_is_exp(x in -20.0f64..20.0, y in -20.0f64..20.0) {
        let z = C64::new(x, y);
        prop_assume!(z.norm() <= 20.0);
        let v = ml_value(1.0, 1.0, z);
        prop_assert!((v - z.exp()).norm() <= 1e-12 * z.exp().norm().max(1.0), "{z}: {v}");
    }

    #[test]
    fn ml_recurrence(alpha in 0.2f64..2.0, beta in 0.2f64..2.0, r in 0.1f64..12.0, th in -3.1f64..3.1) {
        let z = C64::from_polar(r, th);
        let lhs = ml_value(alpha, beta, z);
        let rhs = z * ml_value(alpha, alpha + beta, z) + rgamma(beta);
        prop_assert!((lhs - rhs).norm() <= 1e-10 * lhs.norm().max(1.0), "{z}: {lhs} vs {rhs}");
    }

    #[test]
    fn ml_matrix_of_diagonalizable(l1 in -3.0f64..1.0, l2 in -3.0f64..1.0, s in 0.2f64..2.0) {
        prop_assume!((l1 - l2).abs() > 0.1);
        // M = P diag(l1, l2) P⁻¹ with P = [[1, s], [0, 1]]
        let m = mat::from_flat(2, &[c(l1), c(s * (l2 - l1)), c(0.0), c(l2)]);
        let p = MlParams::new(0.7, 1.3).unwrap();
        let e = ml_matrix(p, &m).unwrap();
        let (e1, e2) = (ml_value(0.7, 1.3, c(l1)), ml_value(0.7, 1.3, c(l2)));
        let want = mat::from_flat(2, &[e1, s * (e2 - e1), c(0.0), e2]);
        prop_assert!((&e - &want).norm() <= 1e-8, "{e} vs {want}");
    }

    #[test]
    fn families_commute_with_generator(l1 in -2.0f64..0.0, l2 in -2.0f64..0.0, s in 0.0f64..1.0) {
        let g = Generator::dense(mat::from_flat(2, &[c(l1), c(s), c(0.0), c(l2)])).unwrap();
        for pair in [Pair::Semigroup, Pair::Frac { alpha: 0.5, beta: 0.0 }, Pair::FracAa { alpha: 0.7 }] {
            let f = make_family(&pair, &g, &Grid::new(1.0, 32).unwrap()).unwrap();
            prop_assert!(f.commutation_residual() <= 1e-10, "{pair}");
        }
    }

    #[test]
    fn volterra_residual_refines(alpha in 0.3f64..1.0, a in -2.0f64..-0.2) {
        let g = Generator::scalar(c(a));
        let r = |n: usize| {
            let f = make_family(&Pair::Frac { alpha, beta: 0.0 }, &g, &Grid::new(1.0, n).unwrap()).unwrap();
            f.volterra_residual_with(&default_probes(1), 1.0, resolvent_kit::families::ResidualPath::Quadrature).unwrap().max_residual
        };
        let (e1, e2) = (r(64), r(128));
        prop_assert!(e2 <= 1e-3);
        prop_assert!(e2 <= 1e-12 || e1 / e2 >= 2.0, "{e1} {e2}");
    }

    #[test]
    fn sharp_output_kernels(alpha in 0.1f64..1.0, beta in 0.0f64..1.5, n in 1usize..4) {
        let (a, k) = (Kernel::g(alpha), Kernel::g(beta + 1.0));
        let b = Kernel::g(beta - alpha + 1.0);
        let out = output_kernel(Method::Sharp, &a, &k, Some(&b), n).unwrap();
        prop_assert!(is_power(&out, n as f64 * (beta - alpha + 1.0) + beta + 1.0), "{out}");
        let gen = output_kernel(Method::General, &a, &k, None, n).unwrap();
        prop_assert!(is_power(&gen, n as f64 * (alpha + beta + 1.0) + beta + 1.0), "{gen}");
    }

    #[test]
    fn nojump_keeps_the_input_samples(alpha in 0.2f64..1.0, a in -2.0f64..0.0) {
        let f = make_family(&Pair::FracAa { alpha }, &Generator::scalar(c(a)), &Grid::new(1.0 + 1.0 / 32.0, 33).unwrap()).unwrap();
        let e = extend_nojump_aa(&f, 1, None).unwrap();
        prop_assert_eq!(&e.values.values()[..32], &f.values.values()[..32]);
        prop_assert!(e.k.same_as(&Kernel::g(alpha)));
    }

    #[test]
    fn sharp_extension_agrees_with_global(a in -1.5f64..-0.2) {
        let g = Generator::scalar(c(a));
        let f = make_family(&Pair::Frac { alpha: 0.5, beta: 0.0 }, &g, &Grid::new(1.0 + 1.0 / 64.0, 65).unwrap()).unwrap();
        let e = extend_sharp(&f, 1, None, None).unwrap();
        // global (g_0.5, g_1.5) family: t^{1/2} E_{1/2,3/2}(a t^{1/2})
        for i in [80usize, 100, 128] {
            let t = i as f64 / 64.0;
            let want = t.sqrt() * ml_value(0.5, 1.5, c(a * t.sqrt()));
            prop_assert!((e.values.at(i) - want).norm() <= 1e-2 * want.norm(), "{i}");
        }
    }

    #[test]
    fn translation_and_cauchy_agree_on_semigroups(l1 in -2.0f64..0.0, l2 in -2.0f64..0.0) {
        let g = Generator::diagonal(vec![c(l1), c(l2)]);
        let f = make_family(&Pair::Semigroup, &g, &Grid::new(2.0, 256).unwrap()).unwrap();
        let probes = default_probes(2);
        let tol = 1e-4;
        prop_assert!(f.volterra_residual(&probes, tol).unwrap().pass);
        let t = check(&EquationCase::TranslationAk, &f, &probes, tol).unwrap();
        let cy = check(&EquationCase::Cauchy, &f, &probes, tol).unwrap();
        prop_assert!(t.pass && cy.pass, "{} {}", t.max_residual, cy.max_residual);
    }
}

fn is_power(k: &Kernel, e: f64) -> bool {
    matches!(k.as_scaled_power(), Some((s, x)) if (s - C64::new(1.0, 0.0)).norm() <= 1e-12 && (x - e).abs() <= 1e-12)
}

#[test]
fn divergent_double_integral_is_flagged() {
    for alpha in [1.0, 1.5, 2.0] {
        let f = make_family(&Pair::Frac { alpha, beta: alpha - 0.5 }, &Generator::scalar(c(-1.0)), &Grid::new(2.0, 32).unwrap()).unwrap();
        let e = check(&EquationCase::RofTranslation, &f, &default_probes(1), 1e-2).unwrap_err();
        assert!(matches!(e, resolvent_kit::Error::DivergentMoment(_)), "{alpha}: {e:?}");
    }
}

#[test]
fn superdiffusive_translation() {
    let f = make_family(&Pair::Frac { alpha: 1.5, beta: 0.0 }, &Generator::scalar(c(-1.0)), &Grid::new(2.0, 128).unwrap()).unwrap();
    let r = check(&EquationCase::SuperdiffTk, &f, &default_probes(1), 1e-2).unwrap();
    assert!(r.pass, "{}", r.max_residual);
}
