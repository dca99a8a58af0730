use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use tds_core::charfun::CharFun;
use tds_core::polecount::count_unstable;

/// Monic real polynomial with roots kept away from the imaginary axis.
fn random_monic(rng: &mut StdRng) -> Vec<f64> {
    let degree = rng.gen_range(1..=6usize);
    let mut roots = Vec::new();
    while roots.len() < degree {
        let re = rng.gen_range(0.05..3.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        if degree - roots.len() >= 2 && rng.gen_bool(0.5) {
            let im = rng.gen_range(0.1..4.0);
            roots.push(Complex64::new(re, im));
            roots.push(Complex64::new(re, -im));
        } else {
            roots.push(Complex64::new(re, 0.0));
        }
    }
    // coefficients low to high
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for r in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, ci) in c.iter().enumerate() {
            next[i + 1] += ci;
            next[i] -= ci * r;
        }
        c = next;
    }
    c.iter().map(|z| z.re).collect()
}

fn companion_rhp_count(c: &[f64]) -> u32 {
    let n = c.len() - 1;
    let mut m = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        m[(i, i - 1)] = 1.0;
    }
    for i in 0..n {
        m[(i, n - 1)] = -c[i];
    }
    m.complex_eigenvalues().iter().filter(|z| z.re > 0.0).count() as u32
}

fn to_text(c: &[f64]) -> String {
    let n = c.len() - 1;
    let mut text = format!("s^{n}");
    for (i, ci) in c.iter().enumerate().take(n) {
        text.push_str(&format!(" + ({ci:e})*s^{i}"));
    }
    text
}

#[test]
fn delay_free_counts_match_companion_eigenvalues() {
    let mut rng = StdRng::seed_from_u64(2024);
    let (mut stable, mut unstable) = (0, 0);
    for _ in 0..100 {
        let c = random_monic(&mut rng);
        let want = companion_rhp_count(&c);
        let cf = CharFun::parse(&to_text(&c), &[]).unwrap();
        let report = count_unstable(&cf, &[]).unwrap();
        assert_eq!(report.nu, want, "{}", to_text(&c));
        assert!(report.residual < 0.1, "residual {} for {}", report.residual, to_text(&c));
        if want == 0 {
            stable += 1;
        } else {
            unstable += 1;
        }
    }
    assert!(stable >= 5 && unstable >= 5, "{stable} stable, {unstable} unstable");
}
