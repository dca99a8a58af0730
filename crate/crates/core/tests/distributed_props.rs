mod common;

use common::gauss_kronrod;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tds_core::charfun::Verdict;
use tds_core::distributed::{
    kernel_laplace, kernel_laplace_closed, kernel_laplace_series, series_threshold, DiscreteTerm, DistributedModel,
    DistributedTerm,
};

fn poly(g: &[f64], x: f64) -> f64 {
    g.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn quadrature(g: &[f64], a: f64, b: f64, s: Complex64) -> Complex64 {
    let integrand = |x: f64| poly(g, x) * (-s * x).exp();
    gauss_kronrod(&integrand, a, b, 1e-13 * (b - a), 24)
}

fn matrix(n: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-2.0f64..2.0, n), n)
}

fn model() -> impl Strategy<Value = DistributedModel> {
    (1usize..=3).prop_flat_map(|n| {
        (
            matrix(n),
            matrix(n),
            matrix(n),
            prop::collection::vec(-1.5f64..1.5, 1..=4),
            0.0f64..1.0,
            0.1f64..2.0,
        )
            .prop_map(|(a0, ad, ak, kernel, lower, width)| DistributedModel {
                a0,
                params: vec!["h".into()],
                discrete: vec![DiscreteTerm {
                    matrix: ad,
                    delay: "h".into(),
                }],
                distributed: vec![DistributedTerm {
                    matrix: ak,
                    lower: lower.into(),
                    upper: format!("{lower} + {width}*h").as_str().into(),
                    kernel,
                }],
                lower: None,
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn laplace_transform_matches_quadrature(
        g in prop::collection::vec(-2.0f64..2.0, 1..=7),
        a in 0.0f64..2.0,
        width in 0.05f64..3.0,
        re in 0.0f64..50.0,
        im in -50.0f64..50.0,
    ) {
        let b = a + width;
        let s = Complex64::new(re, im);
        let want = quadrature(&g, a, b, s);
        let got = kernel_laplace(&g, a, b, s);
        let err = (got - want).norm();
        prop_assert!(err <= 1e-8f64.max(1e-10 * want.norm()), "γ = {g:?} on [{a}, {b}] at {s}: {got} vs {want}");
    }

    #[test]
    fn branches_agree_at_the_switch(
        g in prop::collection::vec(-2.0f64..2.0, 1..=7),
        a in 0.0f64..1.0,
        width in 0.1f64..2.0,
        phase in -1.5f64..1.5,
        side in prop_oneof![Just(1.0 - 1e-9), Just(1.0), Just(1.0 + 1e-9)],
    ) {
        let b = a + width;
        let l = g.len() - 1;
        let s = Complex64::from_polar(side * series_threshold(l) / b, phase);
        let x = kernel_laplace_series(&g, a, b, s);
        let y = kernel_laplace_closed(&g, a, b, s);
        prop_assert!((x - y).norm() < 1e-10 * x.norm(), "{x} vs {y} at {s}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn polynomial_kernels_convert_to_retarded_systems(m in model()) {
        let (cf, _) = m.to_charfun().unwrap();
        prop_assert_eq!(cf.check_hypotheses().verdict, Verdict::Pass);
    }
}

/// `ẋ = -x + 0.5 ∫_1^2 ξ x(t - ξ) dξ` against its characteristic function by quadrature.
#[test]
fn scalar_ramp_kernel_matches_quadrature() {
    let model: DistributedModel = serde_json::from_str(
        r#"{
            "a0": [[-1.0]],
            "distributed": [{"matrix": [[0.5]], "lower": 1.0, "upper": 2.0, "kernel": [0.0, 1.0]}]
        }"#,
    )
    .unwrap();
    let (cf, report) = model.to_charfun().unwrap();
    let d = report.clearing_power as i32;
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..20 {
        let s = Complex64::new(rng.gen_range(-1.0..3.0), rng.gen_range(-20.0..20.0));
        let want = (s + 1.0 - 0.5 * quadrature(&[0.0, 1.0], 1.0, 2.0, s)) * s.powi(d);
        let got = cf.eval_at(s, &[]).unwrap();
        assert!((got - want).norm() <= 1e-10 * want.norm(), "{s}: {got} vs {want}");
    }
}

/// Two states with a quadratic kernel and a parameter-dependent window.
#[test]
fn two_state_model_matches_quadrature_determinant() {
    let model: DistributedModel = serde_json::from_str(
        r#"{
            "a0": [[0.0, 1.0], [-2.0, -0.3]],
            "params": ["h"],
            "discrete": [{"matrix": [[0.0, 0.0], [0.4, 0.0]], "delay": "h"}],
            "distributed": [{"matrix": [[0.2, 0.0], [-0.1, 0.3]], "lower": 0.5, "upper": "0.5 + h", "kernel": [1.0, -0.5, 0.25]}]
        }"#,
    )
    .unwrap();
    let (cf, report) = model.to_charfun().unwrap();
    let d = report.clearing_power as i32;
    let mut rng = StdRng::seed_from_u64(12);
    for _ in 0..20 {
        let h = rng.gen_range(0.1..2.0);
        let s = Complex64::new(rng.gen_range(-1.0..3.0), rng.gen_range(-20.0..20.0));
        let k = quadrature(&[1.0, -0.5, 0.25], 0.5, 0.5 + h, s);
        let e = (-s * h).exp();
        // s I - A0 - A1 e^{-sh} - A2 K(s)
        let m = [
            [s - 0.2 * k, Complex64::new(-1.0, 0.0)],
            [2.0 - 0.4 * e + 0.1 * k, s + 0.3 - 0.3 * k],
        ];
        let want = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * s.powi(d);
        let got = cf.eval_at(s, &[h]).unwrap();
        assert!((got - want).norm() <= 1e-10 * want.norm(), "s = {s}, h = {h}: {got} vs {want}");
    }
}
