use num_complex::Complex64;
use proptest::prelude::*;
use tds_core::charfun::CharFun;

/// Parameter-dependent coefficients and delays in `k`, `t1`, `t2`.
fn general_system() -> impl Strategy<Value = CharFun> {
    (
        prop::array::uniform5(-2.0f64..2.0),
        prop::array::uniform2(0.1f64..2.0),
    )
        .prop_map(|([a, b, c, d, e], [g, h])| {
            let text = format!(
                "s^2 + s*({a:.4}*k + {b:.4}*exp(-s*t1)) + {c:.4}*k*exp(-s*t1) \
                 + {d:.4} - {e:.4}*exp(-t2*({g:.4}*k + s)) + {h:.4}*k^2*exp(-s*(t1 + t2))"
            );
            CharFun::parse(&text, &["k", "t1", "t2"]).unwrap()
        })
}

/// `s^m + Σ_{i<m} s^i (a_i + b_i e^{-s t_{k_i}})`.
fn retarded_system() -> impl Strategy<Value = CharFun> {
    (1u32..=4)
        .prop_flat_map(|m| {
            prop::collection::vec((-1.0f64..3.0, -2.0f64..2.0, 0usize..2), m as usize)
                .prop_map(move |c| (m, c))
        })
        .prop_map(|(m, coeffs)| {
            let mut text = format!("s^{m}");
            for (i, (a, b, k)) in coeffs.iter().enumerate() {
                text.push_str(&format!(" + s^{i}*({a:.4} + {b:.4}*exp(-s*t{}))", k + 1));
            }
            CharFun::parse(&text, &["t1", "t2"]).unwrap()
        })
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.1f64..3.0, 3)
}

fn close(a: Complex64, b: Complex64, rel: f64) -> bool {
    (a - b).norm() <= rel * (1.0 + b.norm())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn conjugate_symmetry_is_exact(cf in general_system(), tau in point(), w in 0.0f64..50.0) {
        let plus = cf.eval_f(w, &tau).unwrap();
        let minus = cf.eval_f(-w, &tau).unwrap();
        prop_assert_eq!(minus.re.to_bits(), plus.re.to_bits());
        prop_assert_eq!(minus.im.to_bits(), (-plus.im).to_bits());
    }

    #[test]
    fn gradient_matches_finite_differences(cf in general_system(), tau in point(), w in 0.0f64..20.0) {
        let grad = cf.grad_f(w, &tau).unwrap();
        for (k, g) in grad.iter().enumerate() {
            let h = 1e-5 * (1.0 + tau[k]);
            let at = |t: f64| {
                let mut p = tau.clone();
                p[k] += t;
                cf.eval_f(w, &p).unwrap()
            };
            let c1 = (at(h) - at(-h)) / (2.0 * h);
            let c2 = (at(2.0 * h) - at(-2.0 * h)) / (4.0 * h);
            let fd = (4.0 * c1 - c2) / 3.0;
            prop_assert!(close(*g, fd, 1e-6), "∂f/∂τ{k} at ω = {w}: {g} vs {fd}");
        }
    }

    #[test]
    fn directional_derivative_matches_finite_differences(
        cf in general_system(),
        tau in point(),
        dir in prop::collection::vec(-1.0f64..1.0, 3),
        w in 0.0f64..20.0,
    ) {
        let theta = 0.05;
        let d = cf.directional_derivative(w, &tau, &dir, theta).unwrap();
        let h = 1e-5;
        let at = |t: f64| {
            let p: Vec<f64> = tau.iter().zip(&dir).map(|(x, v)| x + (theta + t) * v).collect();
            cf.eval_f(w, &p).unwrap()
        };
        let c1 = (at(h) - at(-h)) / (2.0 * h);
        let c2 = (at(2.0 * h) - at(-2.0 * h)) / (4.0 * h);
        let fd = (4.0 * c1 - c2) / 3.0;
        prop_assert!(close(d, fd, 1e-6), "{d} vs {fd}");
    }

    #[test]
    fn retarded_form_round_trip(
        cf in retarded_system(),
        tau0 in prop::collection::vec(2.0f64..3.0, 2),
        dir in prop::collection::vec(-1.0f64..1.0, 2),
        theta in 0.0f64..2.0,
        w in 0.0f64..30.0,
    ) {
        let rf = cf.to_retarded().unwrap();
        let tau: Vec<f64> = tau0.iter().zip(&dir).map(|(x, v)| x + theta * v).collect();
        let want = cf.eval_f(w, &tau).unwrap();
        let scale = 1.0 + want.norm();
        let direct = rf.eval(Complex64::new(0.0, w), &tau);
        prop_assert!((direct - want).norm() <= 1e-12 * scale, "{direct} vs {want}");
        let on_ray = rf.along_ray(&tau0, &dir).eval(w, theta);
        prop_assert!((on_ray - want).norm() <= 1e-12 * scale, "{on_ray} vs {want}");
    }
}
