//! Unstable zero counting by the argument principle.
//!
//! The contour is the boundary of the right half-disk of radius Ω, traversed
//! counterclockwise: the arc from `-jΩ` through `Ω` to `jΩ`, then the
//! imaginary axis back down. Ω comes from a Cauchy bound, so every zero with
//! nonnegative real part lies strictly inside and `|f| ≥ 1` on the arc.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::charfun::{CharFun, CharFunError, Snapshot};
use crate::sweep::{self, SweepError};

#[derive(Debug, Error)]
pub enum PoleCountError {
    #[error(transparent)]
    CharFun(#[from] CharFunError),
    #[error("characteristic function vanishes on the imaginary axis: |f(j{omega})| = {value:e} (threshold {threshold:e}); the point sits on a stability crossing")]
    ZeroOnContour { omega: f64, value: f64, threshold: f64 },
    #[error("winding number did not resolve to an integer (residual {residual}, {unresolved} unresolved steps)")]
    NonIntegerWinding { residual: f64, unresolved: usize },
    #[error("contour radius is not finite")]
    NonFiniteRadius,
    #[error("delayed leading-power term: the radius bound does not apply")]
    Neutral,
    #[error(transparent)]
    Sweep(#[from] SweepError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoleCountConfig {
    pub min_samples: usize,
    pub max_depth: u32,
    /// Relative threshold (of `1 + Σ|α|`) below which `|f|` counts as zero.
    pub zero_tol: f64,
    pub max_residual: f64,
}

impl Default for PoleCountConfig {
    fn default() -> Self {
        PoleCountConfig {
            min_samples: 512,
            max_depth: 40,
            zero_tol: 1e-9,
            max_residual: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PoleCountReport {
    pub nu: u32,
    pub radius: f64,
    pub samples: usize,
    pub residual: f64,
    pub min_abs_f: f64,
    pub omega_min: f64,
}

fn radius_of(snap: &Snapshot) -> Result<f64, PoleCountError> {
    let sums = snap.coefficient_sums();
    let m = snap.m() as usize;
    if sums[m] > 0.0 {
        return Err(PoleCountError::Neutral);
    }
    let r = 1.0 + sums[..m].iter().copied().fold(0.0, f64::max);
    if r.is_finite() {
        Ok(r)
    } else {
        Err(PoleCountError::NonFiniteRadius)
    }
}

/// Radius Ω enclosing every zero with `Re s ≥ 0`.
pub fn rhp_radius_bound(cf: &CharFun, tau: &[f64]) -> Result<f64, PoleCountError> {
    radius_of(&cf.snapshot(tau)?)
}

pub fn count_unstable(cf: &CharFun, tau: &[f64]) -> Result<PoleCountReport, PoleCountError> {
    count_unstable_with(cf, tau, &PoleCountConfig::default())
}

/// Point on the contour at parameter `t ∈ [0, 2)`.
fn contour(radius: f64, t: f64) -> Complex64 {
    if t < 1.0 {
        Complex64::from_polar(radius, -FRAC_PI_2 + PI * t)
    } else {
        Complex64::new(0.0, radius * (1.0 - 2.0 * (t - 1.0)))
    }
}

fn coarse_step(fa: Complex64, fb: Complex64) -> bool {
    let d = (fb / fa).arg().abs();
    d >= FRAC_PI_2 || (fb - fa).norm() >= 0.5 * fa.norm().min(fb.norm())
}

/// Sum of phase increments over `[ta, tb]`, bisecting until each step is fine.
fn phase_over(
    snap: &Snapshot,
    radius: f64,
    (ta, fa): (f64, Complex64),
    (tb, fb): (f64, Complex64),
    max_depth: u32,
) -> (f64, usize, usize) {
    let mut total = 0.0;
    let mut evals = 0;
    let mut unresolved = 0;
    let mut stack = vec![(ta, fa, tb, fb, 0u32)];
    // left-to-right order keeps the sum deterministic
    while let Some((a, fa, b, fb, depth)) = stack.pop() {
        if !coarse_step(fa, fb) {
            total += (fb / fa).arg();
            continue;
        }
        if depth >= max_depth {
            unresolved += 1;
            total += (fb / fa).arg();
            continue;
        }
        let mid = 0.5 * (a + b);
        let fm = snap.eval(contour(radius, mid));
        evals += 1;
        stack.push((mid, fm, b, fb, depth + 1));
        stack.push((a, fa, mid, fm, depth + 1));
    }
    (total, evals, unresolved)
}

pub fn count_unstable_with(
    cf: &CharFun,
    tau: &[f64],
    cfg: &PoleCountConfig,
) -> Result<PoleCountReport, PoleCountError> {
    let snap = cf.snapshot(tau)?;
    let radius = radius_of(&snap)?;
    let scale = 1.0 + snap.coefficient_sums().iter().sum::<f64>();
    let threshold = cfg.zero_tol * scale;

    // |f| ≥ 1 on the arc, so only the axis can carry a zero
    let axis = sweep::min_modulus(&snap)?;
    if axis.value <= threshold {
        return Err(PoleCountError::ZeroOnContour {
            omega: axis.omega,
            value: axis.value,
            threshold,
        });
    }

    let rotations = 2.0 * radius * (snap.max_delay() + 1.0);
    let n = cfg
        .min_samples
        .max((16.0 * rotations / PI).ceil() as usize)
        .min(1 << 22);
    // n samples per segment, 2n in total
    let ts: Vec<f64> = (0..=2 * n).map(|i| i as f64 / n as f64).collect();
    let values: Vec<Complex64> = ts
        .par_iter()
        .map(|&t| {
            if t >= 2.0 {
                snap.eval(contour(radius, 0.0))
            } else {
                snap.eval(contour(radius, t))
            }
        })
        .collect();
    let pieces: Vec<(f64, usize, usize)> = (0..2 * n)
        .into_par_iter()
        .map(|i| {
            let tb = if i + 1 == 2 * n { 2.0 } else { ts[i + 1] };
            phase_over(
                &snap,
                radius,
                (ts[i], values[i]),
                (tb, values[i + 1]),
                cfg.max_depth,
            )
        })
        .collect();
    let mut total = 0.0;
    let mut evals = values.len();
    let mut unresolved = 0;
    for (phase, e, u) in pieces {
        total += phase;
        evals += e;
        unresolved += u;
    }
    let winding = total / TAU;
    let nearest = winding.round();
    let residual = (winding - nearest).abs();
    if unresolved > 0 || residual >= cfg.max_residual || nearest < 0.0 {
        return Err(PoleCountError::NonIntegerWinding {
            residual,
            unresolved,
        });
    }
    Ok(PoleCountReport {
        nu: nearest as u32,
        radius,
        samples: evals,
        residual,
        min_abs_f: axis.value.min(1.0),
        omega_min: axis.omega,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn radius_examples() {
        let cf = CharFun::parse("s + 2*exp(-s*t)", &["t"]).unwrap();
        assert_eq!(rhp_radius_bound(&cf, &[1.0]).unwrap(), 3.0);
        let cf = CharFun::parse("s^2 + 2*s*exp(-s*a) + exp(-s*a)", &["a"]).unwrap();
        assert_eq!(rhp_radius_bound(&cf, &[0.0]).unwrap(), 3.0);
    }

    #[test]
    fn double_stable_pole() {
        let cf = CharFun::parse("s^2 + 2*s*exp(-s*t1) + exp(-s*t2)", &["t1", "t2"]).unwrap();
        let r = count_unstable(&cf, &[0.0, 0.0]).unwrap();
        assert_eq!(r.nu, 0);
        assert!(r.residual < 0.05);
    }

    #[test]
    fn single_unstable_pole() {
        let cf = CharFun::parse("s - 2 + exp(-s*t)", &["t"]).unwrap();
        let r = count_unstable(&cf, &[0.0]).unwrap();
        assert_eq!(r.nu, 1);
    }

    #[test]
    fn crossed_pair_after_delay_margin() {
        // crossing at τ = π/4, ω = 2
        let cf = CharFun::parse("s + 2*exp(-s*t)", &["t"]).unwrap();
        assert_eq!(count_unstable(&cf, &[0.5]).unwrap().nu, 0);
        assert_eq!(count_unstable(&cf, &[1.0]).unwrap().nu, 2);
    }

    #[test]
    fn zero_on_axis_is_reported() {
        let cf = CharFun::parse("s + 2*exp(-s*t)", &["t"]).unwrap();
        let err = count_unstable(&cf, &[PI / 4.0]).unwrap_err();
        match err {
            PoleCountError::ZeroOnContour { omega, .. } => assert!((omega - 2.0).abs() < 1e-6),
            other => panic!("unexpected {other}"),
        }
        let cf = CharFun::parse("s^2 + s", &[]).unwrap();
        assert!(matches!(
            count_unstable(&cf, &[]),
            Err(PoleCountError::ZeroOnContour { .. })
        ));
    }

    #[test]
    fn large_delay_many_crossings() {
        // s + 0.5 + exp(-s τ): crossings at ω = √0.75, unstable pairs accumulate
        let cf = CharFun::parse("s + 0.5 + exp(-s*t)", &["t"]).unwrap();
        let w = 0.75f64.sqrt();
        let phase = PI - (w / 0.5).atan();
        let first = phase / w;
        let period = TAU / w;
        let t = first + 2.5 * period;
        // three crossings passed: 2 unstable zeros per crossing
        assert_eq!(count_unstable(&cf, &[t]).unwrap().nu, 6);
    }
}
