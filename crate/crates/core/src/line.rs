//! Stability equivalence along rays and curves.
//!
//! A step bound Δ̄ at `θ0` certifies that the number of unstable zeros does
//! not change on `[θ0, θ0 + Δ̄]`: it is the largest Δ with
//!
//! ```text
//! Δ ≤ min_ω |f(jω, τ(θ0))| / max_{β ∈ [θ0, θ0+Δ]} |∂f/∂θ (jω, τ(β))|
//! ```
//!
//! found by bisection. For constant-coefficient retarded systems on a ray the
//! denominator is replaced by `Σ_i ω |a_i f_i(jω)|`, which does not depend on
//! Δ. [`run_ray`] iterates `θ_{k+1} = θ_k + η Δ̄(θ_k)`.

use std::fmt;

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charfun::{CharFun, CharFunError, ParamPath, Ray, RayForm, Snapshot};
use crate::sweep::{self, SweepConfig, SweepError, SweepResult, TailBound};

#[derive(Debug, Error)]
pub enum LineError {
    #[error("f vanishes on the imaginary axis at the start point: min |f(jω)| = {value:e} at ω = {omega} (threshold {threshold:e})")]
    Precondition { value: f64, omega: f64, threshold: f64 },
    #[error(transparent)]
    CharFun(#[from] CharFunError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error("invalid ray task: {0}")]
    InvalidTask(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LineConfig {
    pub eta: f64,
    pub delta: f64,
    /// Divergence cap Θ; `None` means `100 (1 + ‖τ(θ0)‖∞)`.
    pub theta_max: Option<f64>,
    pub theta0: f64,
    /// Relative bisection tolerance.
    pub bisect_tol: f64,
    /// Chebyshev–Lobatto samples for the inner max over β.
    pub samples: usize,
    /// Safety factor on the sampled inner max.
    pub inflation: f64,
    pub max_steps: usize,
    /// Relative threshold (of `1 + Σ|α|`) for the `f ≠ 0` precondition.
    pub zero_tol: f64,
    /// Use the retarded closed form when the system allows it.
    pub fast_path: bool,
}

impl Default for LineConfig {
    fn default() -> Self {
        LineConfig {
            eta: 0.5,
            delta: 1e-4,
            theta_max: None,
            theta0: 0.0,
            bisect_tol: 1e-3,
            samples: 65,
            inflation: 1.1,
            max_steps: 100_000,
            zero_tol: 1e-9,
            fast_path: true,
        }
    }
}

impl LineConfig {
    pub fn validate(&self) -> Result<(), LineError> {
        let bad = |msg: String| Err(LineError::InvalidTask(msg));
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return bad(format!("η = {} must lie in (0, 1)", self.eta));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return bad(format!("δ = {} must be positive", self.delta));
        }
        if let Some(t) = self.theta_max {
            if !(t > 0.0) {
                return bad(format!("Θ = {t} must be positive"));
            }
            if !(self.theta0 < t) {
                return bad(format!("θ0 = {} must be below Θ = {t}", self.theta0));
            }
        }
        if !(self.theta0 >= 0.0 && self.theta0.is_finite()) {
            return bad(format!("θ0 = {} must be nonnegative", self.theta0));
        }
        if self.samples < 2 || !(self.inflation >= 1.0) || !(self.bisect_tol > 0.0 && self.bisect_tol < 1.0) {
            return bad("sampling parameters out of range".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Retarded,
    General,
}

/// Certified step length at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepBound {
    /// Δ̄; infinite when f does not depend on θ.
    pub delta: f64,
    /// Minimizer of the final ratio.
    pub omega: f64,
    pub min_abs_f: f64,
    pub omega_min_f: f64,
    /// `1 + Σ |α|` at the point.
    pub scale: f64,
    /// Δ̄ reached the supplied cap (domain edge).
    pub capped: bool,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Step {
    pub k: usize,
    pub theta: f64,
    pub delta: f64,
    pub omega_min: f64,
    pub min_abs_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Converged { theta_lim: f64 },
    Diverged { theta: f64 },
    /// The certified segment reaches the edge of the parameter domain.
    Boundary { theta: f64 },
    Failed { reason: String },
}

impl Verdict {
    pub fn name(&self) -> &'static str {
        match self {
            Verdict::Converged { .. } => "CONVERGED",
            Verdict::Diverged { .. } => "DIVERGED",
            Verdict::Boundary { .. } => "BOUNDARY",
            Verdict::Failed { .. } => "FAILED",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Converged { theta_lim } => write!(f, "CONVERGED θ_lim = {theta_lim}"),
            Verdict::Diverged { theta } => write!(f, "DIVERGED at θ = {theta}"),
            Verdict::Boundary { theta } => write!(f, "BOUNDARY at θ = {theta}"),
            Verdict::Failed { reason } => write!(f, "FAILED: {reason}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineTrace {
    pub start: Vec<f64>,
    pub direction: Vec<f64>,
    pub method: Method,
    pub config: LineConfig,
    pub theta_max: f64,
    pub steps: Vec<Step>,
    pub verdict: Verdict,
    /// Last point reached.
    pub theta_final: f64,
    /// Minimizing ω of |f| at the last evaluated point (candidate crossing frequency).
    pub omega_final: Option<f64>,
    pub min_abs_f_final: Option<f64>,
}

impl LineTrace {
    pub fn end_point(&self) -> Vec<f64> {
        self.start
            .iter()
            .zip(&self.direction)
            .map(|(x, d)| x + (self.theta_final - self.config.theta0) * d)
            .collect()
    }

    /// CSV with columns `k,theta,delta,omega_min,min_abs_f`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,theta,delta,omega_min,min_abs_f\n");
        for s in &self.steps {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                s.k, s.theta, s.delta, s.omega_min, s.min_abs_f
            ));
        }
        out
    }
}

fn scale_of(snap: &Snapshot) -> f64 {
    1.0 + snap.coefficient_sums().iter().sum::<f64>()
}

fn check_nonzero(snap: &Snapshot, zero_tol: f64) -> Result<SweepResult, LineError> {
    let modulus = sweep::min_modulus(snap)?;
    let threshold = zero_tol * scale_of(snap);
    if modulus.value <= threshold {
        return Err(LineError::Precondition {
            value: modulus.value,
            omega: modulus.omega,
            threshold,
        });
    }
    Ok(modulus)
}

/// Closed-form step bound for a constant-coefficient retarded system on a ray.
pub fn step_bound_retarded(ray: &RayForm, theta0: f64, zero_tol: f64) -> Result<StepBound, LineError> {
    let a = ray.coefficient_bounds();
    let scale = 1.0 + a.iter().sum::<f64>();
    let m = ray.m as usize;
    let modulus_tail = TailBound::modulus(a.clone())?;
    let modulus = sweep::global_min(
        &|w: f64| (ray.eval(w, theta0).norm(), 1.0),
        &modulus_tail,
        sweep::linear_span(&modulus_tail),
        max_ray_delay(ray, theta0),
        &SweepConfig::from_zero(),
    )?;
    let threshold = zero_tol * scale;
    if modulus.value <= threshold {
        return Err(LineError::Precondition {
            value: modulus.value,
            omega: modulus.omega,
            threshold,
        });
    }
    if ray.is_insensitive() {
        return Ok(StepBound {
            delta: f64::INFINITY,
            omega: modulus.omega,
            min_abs_f: modulus.value,
            omega_min_f: modulus.omega,
            scale,
            capped: false,
            method: Method::Retarded,
        });
    }
    let mut upper = ray.denominator_bound();
    upper.truncate(m + 1);
    let tail = TailBound::new(a, vec![upper], 1.0)?;
    let r = sweep::global_min(
        &|w: f64| (ray.eval(w, theta0).norm(), ray.denominator(w)),
        &tail,
        sweep::linear_span(&tail),
        max_ray_delay(ray, theta0),
        &SweepConfig::default(),
    )?;
    Ok(StepBound {
        delta: r.value,
        omega: r.omega,
        min_abs_f: modulus.value,
        omega_min_f: modulus.omega,
        scale,
        capped: false,
        method: Method::Retarded,
    })
}

fn max_ray_delay(ray: &RayForm, theta: f64) -> f64 {
    ray.parts
        .iter()
        .map(|p| p.delay0 + theta * p.rate)
        .fold(0.0, f64::max)
}

/// Chebyshev–Lobatto points on `[a, b]`.
fn lobatto(a: f64, b: f64, n: usize) -> Vec<f64> {
    if b <= a {
        return vec![a];
    }
    (0..n)
        .map(|j| {
            let x = (std::f64::consts::PI * j as f64 / (n - 1) as f64).cos();
            a + 0.5 * (b - a) * (1.0 - x)
        })
        .collect()
}

struct GeneralProblem<'a> {
    cf: &'a CharFun,
    path: &'a dyn ParamPath,
    theta0: f64,
    snap0: Snapshot,
    lower: Vec<f64>,
    cfg: &'a LineConfig,
}

impl GeneralProblem<'_> {
    /// `min_ω |f(jω, θ0)| / D_Δ(ω)`.
    fn rhs(&self, delta: f64) -> Result<SweepResult, LineError> {
        let betas = lobatto(self.theta0, self.theta0 + delta, self.cfg.samples);
        let mut frames = Vec::with_capacity(betas.len());
        let mut lo = self.path.point(self.theta0);
        let mut hi = lo.clone();
        let mut tangent_bound = vec![0.0f64; lo.len()];
        for &b in &betas {
            let tau = self.path.point(b);
            let tangent = self.path.tangent(b);
            for k in 0..tau.len() {
                lo[k] = lo[k].min(tau[k]);
                hi[k] = hi[k].max(tau[k]);
                tangent_bound[k] = tangent_bound[k].max(tangent[k].abs());
            }
            frames.push((self.cf.snapshot(&tau)?, tangent));
        }
        // |∂f/∂θ| ≤ Σ_t ω^i (|∇α·d| + ω |α| |∇β·d|) over the bounding box
        let m = self.cf.m() as usize;
        let mut upper = vec![0.0; m + 1];
        for b in self.cf.term_bounds(&lo, &hi)? {
            let da: f64 = b.dcoeff.iter().zip(&tangent_bound).map(|(x, d)| x * d).sum();
            let db: f64 = b.ddelay.iter().zip(&tangent_bound).map(|(x, d)| x * d).sum();
            upper[b.power as usize] += da;
            upper[b.power as usize + 1] += b.coeff * db;
        }
        let tail = TailBound::new(self.lower.clone(), vec![upper], 1.0)?;
        let delay_scale = frames
            .iter()
            .map(|(s, _)| s.max_delay())
            .fold(self.snap0.max_delay(), f64::max);
        let inflation = self.cfg.inflation;
        let f = |w: f64| {
            let n = self.snap0.eval(num_complex::Complex64::new(0.0, w)).norm();
            let mut scratch = Vec::new();
            let (mut sampled, mut grouped) = (0.0f64, 0.0f64);
            for (snap, tangent) in &frames {
                let (d, g) = snap.directional_pair(w, tangent, &mut scratch);
                sampled = sampled.max(d);
                grouped = grouped.max(g);
            }
            (n, (inflation * sampled).min(grouped))
        };
        Ok(sweep::global_min(
            &f,
            &tail,
            sweep::linear_span(&tail),
            delay_scale,
            &SweepConfig::default(),
        )?)
    }
}

/// Step bound by bisection on the circular inequality, for any smooth path.
///
/// `cap` limits Δ (e.g. the distance to the domain edge).
pub fn step_bound_general(
    cf: &CharFun,
    path: &dyn ParamPath,
    theta0: f64,
    cap: f64,
    cfg: &LineConfig,
) -> Result<StepBound, LineError> {
    let snap0 = cf.snapshot(&path.point(theta0))?;
    let modulus = check_nonzero(&snap0, cfg.zero_tol)?;
    let scale = scale_of(&snap0);
    let lower = snap0.coefficient_sums()[..cf.m() as usize].to_vec();
    let problem = GeneralProblem {
        cf,
        path,
        theta0,
        snap0,
        lower,
        cfg,
    };
    let bound = |delta: f64, omega: f64, capped: bool| StepBound {
        delta,
        omega,
        min_abs_f: modulus.value,
        omega_min_f: modulus.omega,
        scale,
        capped,
        method: Method::General,
    };

    let fp = largest_fixed_point(
        |delta| problem.rhs(delta).map(|r| (r.value, r.omega)),
        cap,
        cfg.bisect_tol,
    )?;
    debug!("general step: Δ = {}", fp.value);
    Ok(bound(fp.value, fp.omega, fp.capped))
}

pub(crate) struct FixedPoint {
    pub value: f64,
    pub omega: f64,
    pub capped: bool,
}

/// Largest `x ≤ cap` with `x ≤ rhs(x)` for a non-increasing `rhs`, to a
/// relative tolerance; `rhs` returns the ratio value and its minimizer.
pub(crate) fn largest_fixed_point<E>(
    mut rhs: impl FnMut(f64) -> Result<(f64, f64), E>,
    cap: f64,
    tol: f64,
) -> Result<FixedPoint, E> {
    let (first, first_omega) = rhs(0.0)?;
    let done = |value: f64, omega: f64, capped: bool| Ok(FixedPoint { value, omega, capped });
    let mut hi = first.min(cap);
    if !hi.is_finite() {
        // the derivative vanishes at the start; grow until the inequality breaks
        hi = 1.0;
        loop {
            let (v, w) = rhs(hi)?;
            if v < hi {
                break;
            }
            if hi >= 1e12 {
                return done(f64::INFINITY, w, false);
            }
            hi *= 2.0;
        }
    }
    let (at_hi, hi_omega) = rhs(hi)?;
    if at_hi >= hi {
        return done(hi, hi_omega, hi >= cap);
    }
    let (mut lo, mut lo_omega) = (0.0, first_omega);
    for _ in 0..200 {
        // the fixed point lies in [lo, lo (1 + tol)]
        if hi - lo <= tol * lo {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let (v, w) = rhs(mid)?;
        if v >= mid {
            lo = mid;
            lo_omega = w;
        } else {
            hi = mid;
        }
    }
    done(lo, lo_omega, false)
}

/// A ray task: start point, direction and iteration settings.
#[derive(Debug, Clone)]
pub struct RayTask {
    pub start: Vec<f64>,
    pub direction: Vec<f64>,
    pub config: LineConfig,
}

impl RayTask {
    pub fn new(start: Vec<f64>, direction: Vec<f64>) -> Self {
        RayTask {
            start,
            direction,
            config: LineConfig::default(),
        }
    }

    pub fn with_config(mut self, config: LineConfig) -> Self {
        self.config = config;
        self
    }
}

/// Largest θ (relative to the ray origin) keeping the ray inside the domain.
fn exit_theta(cf: &CharFun, origin: &[f64], dir: &[f64]) -> f64 {
    origin
        .iter()
        .zip(dir)
        .zip(cf.lower_bounds())
        .filter(|((_, d), _)| **d < 0.0)
        .map(|((x, d), l)| (x - l) / -d)
        .fold(f64::INFINITY, f64::min)
}

fn normalized(dir: &[f64]) -> Result<Vec<f64>, LineError> {
    let norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(LineError::InvalidTask("direction must be a nonzero finite vector".into()));
    }
    Ok(dir.iter().map(|d| d / norm).collect())
}

/// Iterates certified steps along a ray until convergence, divergence past Θ,
/// the domain edge, or failure. Errors in the task itself are returned as
/// `Err`; failures during iteration are recorded in the trace.
pub fn run_ray(cf: &CharFun, task: &RayTask) -> Result<LineTrace, LineError> {
    task.config.validate()?;
    cf.check_point(&task.start)?;
    if task.direction.len() != cf.n_params() {
        return Err(LineError::InvalidTask(format!(
            "direction has {} entries but the system has {} parameters",
            task.direction.len(),
            cf.n_params()
        )));
    }
    let dir = normalized(&task.direction)?;
    let cfg = &task.config;
    let theta0 = cfg.theta0;
    // the ray is parametrized so that τ(θ0) = start
    let origin: Vec<f64> = task.start.iter().zip(&dir).map(|(x, d)| x - theta0 * d).collect();
    let ray = Ray::new(origin.clone(), dir.clone());
    let inf_norm = task.start.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let theta_max = cfg.theta_max.unwrap_or(100.0 * (1.0 + inf_norm));
    if theta0 >= theta_max {
        return Err(LineError::InvalidTask(format!("θ0 = {theta0} must be below Θ = {theta_max}")));
    }
    let exit = theta0 + exit_theta(cf, &task.start, &dir);
    let retarded = if cfg.fast_path { cf.to_retarded().ok() } else { None };
    let method = if retarded.is_some() { Method::Retarded } else { Method::General };
    let ray_form = retarded.as_ref().map(|rf| rf.along_ray(&origin, &dir));

    let mut steps = Vec::new();
    let mut theta = theta0;
    let mut last: Option<StepBound> = None;
    let verdict = loop {
        if steps.len() >= cfg.max_steps {
            break Verdict::Failed {
                reason: format!("step budget of {} exhausted", cfg.max_steps),
            };
        }
        let cap = exit - theta;
        let bound = match &ray_form {
            Some(rf) => step_bound_retarded(rf, theta, cfg.zero_tol),
            None => step_bound_general(cf, &ray, theta, cap, cfg),
        };
        let bound = match bound {
            Ok(b) => b,
            Err(e) => {
                break Verdict::Failed {
                    reason: e.to_string(),
                }
            }
        };
        let delta = bound.delta;
        last = Some(bound.clone());
        if delta > 0.0 {
            steps.push(Step {
                k: steps.len(),
                theta,
                delta,
                omega_min: bound.omega,
                min_abs_f: bound.min_abs_f,
            });
        }
        if delta.is_infinite() {
            break Verdict::Diverged { theta: f64::INFINITY };
        }
        if delta >= cap {
            theta = exit;
            break Verdict::Boundary { theta };
        }
        let step = cfg.eta * delta;
        theta += step;
        if step <= cfg.delta {
            break Verdict::Converged { theta_lim: theta };
        }
        if theta >= theta_max {
            break Verdict::Diverged { theta };
        }
    };
    info!("ray {:?} from {:?}: {} after {} steps", dir, task.start, verdict, steps.len());
    Ok(LineTrace {
        start: task.start.clone(),
        direction: dir,
        method,
        config: cfg.clone(),
        theta_max,
        steps,
        theta_final: if theta.is_finite() { theta } else { theta_max },
        verdict,
        omega_final: last.as_ref().map(|b| b.omega_min_f),
        min_abs_f_final: last.as_ref().map(|b| b.min_abs_f),
    })
}

/// Iterates certified steps along an arbitrary smooth curve (general bound only).
pub fn run_path(cf: &CharFun, path: &dyn ParamPath, cfg: &LineConfig, theta_max: f64) -> LineTrace {
    let mut steps = Vec::new();
    let mut theta = cfg.theta0;
    let mut last: Option<StepBound> = None;
    let verdict = loop {
        if steps.len() >= cfg.max_steps {
            break Verdict::Failed {
                reason: format!("step budget of {} exhausted", cfg.max_steps),
            };
        }
        match step_bound_general(cf, path, theta, f64::INFINITY, cfg) {
            Ok(b) => {
                if b.delta > 0.0 {
                    steps.push(Step {
                        k: steps.len(),
                        theta,
                        delta: b.delta,
                        omega_min: b.omega,
                        min_abs_f: b.min_abs_f,
                    });
                }
                let delta = b.delta;
                last = Some(b);
                if delta.is_infinite() {
                    break Verdict::Diverged { theta: f64::INFINITY };
                }
                let step = cfg.eta * delta;
                theta += step;
                if step <= cfg.delta {
                    break Verdict::Converged { theta_lim: theta };
                }
                if theta >= theta_max {
                    break Verdict::Diverged { theta };
                }
            }
            Err(e) => {
                break Verdict::Failed {
                    reason: e.to_string(),
                }
            }
        }
    };
    LineTrace {
        start: path.point(cfg.theta0),
        direction: path.tangent(cfg.theta0),
        method: Method::General,
        config: cfg.clone(),
        theta_max,
        steps,
        theta_final: if theta.is_finite() { theta } else { theta_max },
        verdict,
        omega_final: last.as_ref().map(|b| b.omega_min_f),
        min_abs_f_final: last.as_ref().map(|b| b.min_abs_f),
    }
}

/// `count` directions evenly spaced in angle, starting along the first axis.
pub fn fan_directions(count: usize) -> Vec<Vec<f64>> {
    (0..count)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / count as f64;
            vec![a.cos(), a.sin()]
        })
        .collect()
}

/// Runs one ray per direction concurrently; results keep the input order.
pub fn run_fan(
    cf: &CharFun,
    start: &[f64],
    directions: &[Vec<f64>],
    config: &LineConfig,
) -> Vec<Result<LineTrace, LineError>> {
    directions
        .par_iter()
        .map(|d| run_ray(cf, &RayTask::new(start.to_vec(), d.clone()).with_config(config.clone())))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::charfun::Curve;

    fn example7() -> CharFun {
        CharFun::parse("s^2 + 2*s*exp(-s*t1) + exp(-s*t2)", &["t1", "t2"]).unwrap()
    }

    #[test]
    fn retarded_bound_along_first_axis() {
        let cf = example7();
        let ray = cf.to_retarded().unwrap().along_ray(&[0.0, 0.0], &[1.0, 0.0]);
        let b = step_bound_retarded(&ray, 0.0, 1e-9).unwrap();
        assert!((b.delta - 0.5).abs() < 1e-6, "{b:?}");
    }

    #[test]
    fn retarded_bound_along_second_axis() {
        let cf = example7();
        let ray = cf.to_retarded().unwrap().along_ray(&[0.0, 0.0], &[0.0, 1.0]);
        let b = step_bound_retarded(&ray, 0.0, 1e-9).unwrap();
        assert!((b.delta - 2.0).abs() < 1e-9, "{b:?}");
        assert!((b.omega - 1.0).abs() < 1e-6);
    }

    #[test]
    fn insensitive_ray_is_unbounded() {
        let cf = CharFun::parse("s^2 + 2*s + exp(-s*a)", &["a", "b"]).unwrap();
        let ray = cf.to_retarded().unwrap().along_ray(&[0.0, 0.0], &[0.0, 1.0]);
        let b = step_bound_retarded(&ray, 0.0, 1e-9).unwrap();
        assert!(b.delta.is_infinite());
        let trace = run_ray(&cf, &RayTask::new(vec![0.0, 0.0], vec![0.0, 1.0])).unwrap();
        assert_eq!(trace.verdict.name(), "DIVERGED");
    }

    #[test]
    fn general_bound_meets_retarded_value() {
        let cf = example7();
        let ray = Ray::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        let b = step_bound_general(&cf, &ray, 0.0, f64::INFINITY, &LineConfig::default()).unwrap();
        assert!(b.delta >= 0.5 * (1.0 - 1e-3), "{b:?}");
        assert!(b.delta <= 0.5 * (1.0 + 1e-6));
    }

    #[test]
    fn example5_general_bound_is_positive() {
        let cf = CharFun::parse(
            "s^2 + s*(k + exp(-s*t1)) + k*exp(-s*t1) + 1 - exp(-t2*(k+s))",
            &["t1", "t2", "k"],
        )
        .unwrap();
        let ray = Ray::new(vec![0.25, 8.0, 0.003], vec![1.0, 0.0, 0.0]);
        let b = step_bound_general(&cf, &ray, 0.0, f64::INFINITY, &LineConfig::default()).unwrap();
        assert!(b.delta > 0.0 && b.delta.is_finite(), "{b:?}");
    }

    #[test]
    fn parameter_free_direction_needs_one_round() {
        // k only scales a coefficient that is zero-weighted along this direction
        let cf = CharFun::parse("s^2 + s + k*exp(-s*t)", &["t", "k"]).unwrap();
        let ray = Ray::new(vec![1.0, 0.5], vec![0.0, 1.0]);
        let b = step_bound_general(&cf, &ray, 0.0, f64::INFINITY, &LineConfig::default()).unwrap();
        assert!(b.delta > 0.0);
    }

    #[test]
    fn example7_ray_converges_to_crossing() {
        let cf = example7();
        let task = RayTask::new(vec![0.0, 0.0], vec![1.0, 0.0]).with_config(LineConfig {
            theta_max: Some(50.0),
            ..LineConfig::default()
        });
        let trace = run_ray(&cf, &task).unwrap();
        let oracle = std::f64::consts::FRAC_PI_2 / (1.0 + 2f64.sqrt());
        match trace.verdict {
            Verdict::Converged { theta_lim } => {
                assert!(theta_lim <= oracle);
                assert!((theta_lim - oracle).abs() < 5e-3, "{theta_lim}");
            }
            ref v => panic!("{v}"),
        }
        assert!(trace.steps.windows(2).all(|w| w[0].theta < w[1].theta));
        assert!(trace.steps.iter().all(|s| s.delta > 0.0));
    }

    #[test]
    fn start_on_crossing_fails() {
        // s + 2 e^{-sτ} has an axis zero at τ = π/4
        let cf = CharFun::parse("s + 2*exp(-s*t)", &["t"]).unwrap();
        let task = RayTask::new(vec![std::f64::consts::FRAC_PI_4], vec![1.0]);
        let trace = run_ray(&cf, &task).unwrap();
        assert_eq!(trace.verdict.name(), "FAILED");
        assert!(trace.steps.is_empty());
    }

    #[test]
    fn leaving_the_orthant_stops_at_the_edge() {
        let cf = CharFun::parse("s + 2 + exp(-s*t)", &["t"]).unwrap();
        let task = RayTask::new(vec![1.0], vec![-1.0]);
        let trace = run_ray(&cf, &task).unwrap();
        assert_eq!(trace.verdict, Verdict::Boundary { theta: 1.0 });
    }

    #[test]
    fn invalid_settings_are_rejected() {
        let cf = example7();
        let bad = RayTask::new(vec![0.0, 0.0], vec![1.0, 0.0]).with_config(LineConfig {
            eta: 1.0,
            ..LineConfig::default()
        });
        assert!(run_ray(&cf, &bad).is_err());
        let bad = RayTask::new(vec![0.0, 0.0], vec![0.0, 0.0]);
        assert!(run_ray(&cf, &bad).is_err());
    }

    #[test]
    fn curve_matches_ray_when_straight() {
        let cf = example7();
        let curve = Curve::new(|t: f64| vec![t, 0.0], |_| vec![1.0, 0.0]);
        let a = step_bound_general(&cf, &curve, 0.1, f64::INFINITY, &LineConfig::default()).unwrap();
        let ray = Ray::new(vec![0.0, 0.0], vec![1.0, 0.0]);
        let b = step_bound_general(&cf, &ray, 0.1, f64::INFINITY, &LineConfig::default()).unwrap();
        assert_eq!(a.delta, b.delta);
    }

    #[test]
    fn trace_csv_has_header() {
        let cf = example7();
        let trace = run_ray(&cf, &RayTask::new(vec![0.0, 0.0], vec![0.0, 1.0])).unwrap();
        let csv = trace.to_csv();
        assert!(csv.starts_with("k,theta,delta,omega_min,min_abs_f\n"));
        assert_eq!(csv.lines().count(), trace.steps.len() + 1);
    }
}
