//! Global minimization of frequency ratios `N(ω)/D(ω)` over `ω ≥ 0`.
//!
//! A mixed linear/logarithmic grid locates candidate minima, which are then
//! polished by golden-section search. The high-frequency tail is closed by a
//! [`TailBound`]: a lower bound on the ratio that is nondecreasing beyond
//! `ω_tail`, so once it exceeds the best grid value nothing further out can
//! beat it. Ratios whose infimum is only approached as `ω → ∞` are reported
//! with `attained = false`.

use log::debug;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::charfun::{CharFun, CharFunError, Snapshot};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("unbounded sweep: tail bound {bound} at ω = {omega_cut} stays below best value {best}")]
    Unbounded { omega_cut: f64, best: f64, bound: f64 },
    #[error("ratio is not a number at ω = {omega}")]
    NotANumber { omega: f64 },
    #[error("invalid tail bound: {0}")]
    InvalidTail(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepConfig {
    /// First grid frequency.
    pub omega_min: f64,
    /// Points on the linear segment.
    pub linear_points: usize,
    /// Grid points per decade on the logarithmic segment.
    pub per_decade: usize,
    /// Decades past the linear segment sampled before the tail test; more
    /// are added one at a time while the tail bound stays below the best sample.
    pub decades: usize,
    /// Largest admissible cut-off frequency.
    pub omega_max: f64,
    /// Number of local minima refined by golden-section search.
    pub brackets: usize,
    pub max_refine_iter: usize,
    /// Relative saturation tolerance of the tail bound against its limit.
    pub saturation: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            omega_min: 1e-9,
            linear_points: 1024,
            per_decade: 128,
            decades: 0,
            omega_max: 1e12,
            brackets: 8,
            max_refine_iter: 200,
            saturation: 1e-9,
        }
    }
}

impl SweepConfig {
    /// Starts the grid at `ω = 0` (for plain modulus sweeps).
    pub fn from_zero() -> Self {
        SweepConfig {
            omega_min: 0.0,
            ..SweepConfig::default()
        }
    }
}

/// Lower bound on a ratio for large ω:
///
/// ```text
/// R(ω) = (ω^m − Σ_i A_i ω^i) / ‖(U_k(ω))_k‖_p
/// ```
///
/// where `A_i ≥ 0` bound the non-leading coefficient moduli and the `U_k`
/// are nonnegative polynomials of degree ≤ m dominating the denominator
/// components. Beyond the Cauchy bound `ω_tail = 1 + max A_i`, `R` is
/// positive and nondecreasing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailBound {
    pub lower: Vec<f64>,
    pub upper: Vec<Vec<f64>>,
    pub p: f64,
}

fn poly_real(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * x + v)
}

fn p_norm(values: impl Iterator<Item = f64>, p: f64) -> f64 {
    if p.is_infinite() {
        values.fold(0.0, f64::max)
    } else if p == 1.0 {
        values.sum()
    } else {
        let v: Vec<f64> = values.collect();
        let scale = v.iter().copied().fold(0.0, f64::max);
        if scale == 0.0 || !scale.is_finite() {
            return scale;
        }
        scale * v.iter().map(|x| (x / scale).powf(p)).sum::<f64>().powf(1.0 / p)
    }
}

impl TailBound {
    pub fn new(lower: Vec<f64>, upper: Vec<Vec<f64>>, p: f64) -> Result<Self, SweepError> {
        let m = lower.len();
        if m == 0 {
            return Err(SweepError::InvalidTail("leading power must be positive".into()));
        }
        if !(p >= 1.0) {
            return Err(SweepError::InvalidTail(format!("norm exponent {p} < 1")));
        }
        let finite_nonneg = |c: &f64| c.is_finite() && *c >= 0.0;
        if !lower.iter().all(finite_nonneg) || !upper.iter().flatten().all(finite_nonneg) {
            return Err(SweepError::InvalidTail(
                "coefficients must be finite and nonnegative".into(),
            ));
        }
        let mut upper = upper;
        for u in &mut upper {
            while u.len() > m + 1 && u.last() == Some(&0.0) {
                u.pop();
            }
            if u.len() > m + 1 {
                return Err(SweepError::InvalidTail(format!(
                    "denominator degree {} exceeds {m}",
                    u.len() - 1
                )));
            }
        }
        Ok(TailBound { lower, upper, p })
    }

    /// Bound for the plain modulus `|f(jω)|` (denominator ≡ 1).
    pub fn modulus(lower: Vec<f64>) -> Result<Self, SweepError> {
        TailBound::new(lower, vec![vec![1.0]], 1.0)
    }

    pub fn m(&self) -> usize {
        self.lower.len()
    }

    pub fn omega_tail(&self) -> f64 {
        1.0 + self.lower.iter().copied().fold(0.0, f64::max)
    }

    /// Lower bound on the ratio at `ω ≥ ω_tail`; `-∞` below it.
    pub fn eval(&self, omega: f64) -> f64 {
        if omega < self.omega_tail() {
            return f64::NEG_INFINITY;
        }
        let m = self.m() as i32;
        // both factors scaled by ω^{-m} so the bound stays finite for huge ω
        let num = 1.0
            - self
                .lower
                .iter()
                .enumerate()
                .map(|(i, a)| a * omega.powi(i as i32 - m))
                .sum::<f64>();
        let den = p_norm(
            self.upper.iter().map(|u| {
                u.iter()
                    .enumerate()
                    .map(|(j, c)| c * omega.powi(j as i32 - m))
                    .sum::<f64>()
            }),
            self.p,
        );
        if den == 0.0 {
            f64::INFINITY
        } else {
            num / den
        }
    }

    /// `lim_{ω→∞}` of the bound.
    pub fn limit(&self) -> f64 {
        let m = self.m();
        let lead = p_norm(
            self.upper.iter().map(|u| u.get(m).copied().unwrap_or(0.0)),
            self.p,
        );
        if lead == 0.0 {
            f64::INFINITY
        } else {
            1.0 / lead
        }
    }

    /// Numerator polynomial `ω^m − Σ A_i ω^i` at `ω` (unscaled).
    pub fn numerator(&self, omega: f64) -> f64 {
        omega.powi(self.m() as i32) - poly_real(&self.lower, omega)
    }
}

/// Upper bounds `A_i` on `Σ |α_t|` per power `i < m` over a parameter box.
pub fn quasipoly_lower(cf: &CharFun, lo: &[f64], hi: &[f64]) -> Result<Vec<f64>, CharFunError> {
    let mut a = vec![0.0; cf.m() as usize];
    for b in cf.term_bounds(lo, hi)? {
        if (b.power as usize) >= a.len() {
            return Err(CharFunError::Structure(
                "a delayed term carries the leading power (neutral structure)".into(),
            ));
        }
        a[b.power as usize] += b.coeff;
    }
    Ok(a)
}

/// End of the linear grid segment for a system with tail bound `tail`.
pub fn linear_span(tail: &TailBound) -> f64 {
    (10.0 * tail.m() as f64).max(2.0 * tail.omega_tail())
}

/// `min_{ω ≥ 0} |f(jω)|` for a frozen characteristic function.
pub fn min_modulus(snap: &Snapshot) -> Result<SweepResult, SweepError> {
    let sums = snap.coefficient_sums();
    if sums.len() > snap.m() as usize && sums[snap.m() as usize] > 0.0 {
        return Err(SweepError::InvalidTail(
            "a delayed term carries the leading power (neutral structure)".into(),
        ));
    }
    let tail = TailBound::modulus(sums[..snap.m() as usize].to_vec())?;
    let f = |w: f64| (snap.eval(Complex64::new(0.0, w)).norm(), 1.0);
    global_min(
        &f,
        &tail,
        linear_span(&tail),
        snap.max_delay(),
        &SweepConfig::from_zero(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    /// Minimizing frequency (the last grid point when tail-limited).
    pub omega: f64,
    /// Certified infimum estimate.
    pub value: f64,
    /// Best ratio actually evaluated.
    pub best_sample: f64,
    /// False when the infimum is approached only as `ω → ∞`.
    pub attained: bool,
    pub omega_tail: f64,
    pub omega_cut: f64,
    pub tail_at_cut: f64,
    pub tail_limit: f64,
    pub evaluations: usize,
}

fn ratio_of((n, d): (f64, f64)) -> f64 {
    if d > 0.0 {
        n / d
    } else if n > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

#[derive(Clone, Copy)]
struct Sample {
    omega: f64,
    value: f64,
}

fn better(a: Sample, b: Sample) -> bool {
    a.value < b.value || (a.value == b.value && a.omega < b.omega)
}

fn evaluate<F>(f: &F, omegas: &[f64]) -> Result<Vec<Sample>, SweepError>
where
    F: Fn(f64) -> (f64, f64) + Sync,
{
    let values: Vec<f64> = omegas.par_iter().map(|&w| ratio_of(f(w))).collect();
    omegas
        .iter()
        .zip(values)
        .map(|(&omega, value)| {
            if value.is_nan() {
                Err(SweepError::NotANumber { omega })
            } else {
                Ok(Sample { omega, value })
            }
        })
        .collect()
}

fn log_points(from: f64, decades: usize, per_decade: usize) -> Vec<f64> {
    let n = decades * per_decade;
    (1..=n)
        .map(|i| from * 10f64.powf(i as f64 / per_decade as f64))
        .collect()
}

fn golden<F>(f: &F, mut a: f64, mut b: f64, seed: Sample, max_iter: usize) -> (Sample, usize)
where
    F: Fn(f64) -> (f64, f64),
{
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut best = seed;
    let mut evals = 0;
    let mut probe = |w: f64, best: &mut Sample| {
        let v = ratio_of(f(w));
        evals += 1;
        let s = Sample { omega: w, value: v };
        if !v.is_nan() && better(s, *best) {
            *best = s;
        }
        v
    };
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = probe(c, &mut best);
    let mut fd = probe(d, &mut best);
    for _ in 0..max_iter {
        if (b - a) <= 4.0 * f64::EPSILON * b.abs().max(f64::MIN_POSITIVE) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = probe(c, &mut best);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = probe(d, &mut best);
        }
    }
    (best, evals)
}

/// Minimizes `N(ω)/D(ω)` for `ω ≥ omega_min`, where `f(ω) = (N, D)`.
///
/// `linear_span` is the end of the linearly spaced segment and
/// `delay_scale` (largest delay) raises its density so that oscillations of
/// period `2π/delay_scale` are resolved.
pub fn global_min<F>(
    f: &F,
    tail: &TailBound,
    linear_span: f64,
    delay_scale: f64,
    cfg: &SweepConfig,
) -> Result<SweepResult, SweepError>
where
    F: Fn(f64) -> (f64, f64) + Sync,
{
    let omega_tail = tail.omega_tail();
    let span = linear_span.max(cfg.omega_min * 2.0).max(1e-6);
    let oscillation = (16.0 * span * delay_scale.max(0.0) / std::f64::consts::TAU).ceil();
    let n_lin = (cfg.linear_points.max(2) as f64).max(oscillation).min(262_144.0) as usize;
    let mut omegas: Vec<f64> = (0..n_lin)
        .map(|i| cfg.omega_min + (span - cfg.omega_min) * i as f64 / (n_lin - 1) as f64)
        .collect();
    omegas.extend(log_points(span, cfg.decades, cfg.per_decade));
    let mut omega_cut = *omegas.last().expect("grid is nonempty");
    let mut samples = evaluate(f, &omegas)?;
    let mut evaluations = samples.len();

    // extend decade by decade until the monotone tail bound clears the best sample
    let limit = tail.limit();
    let mut best_idx = argmin(&samples);
    let mut bound = tail.eval(omega_cut);
    while bound < samples[best_idx].value {
        if omega_cut >= omega_tail && bound >= limit * (1.0 - cfg.saturation) {
            break;
        }
        if omega_cut >= cfg.omega_max {
            return Err(SweepError::Unbounded {
                omega_cut,
                best: samples[best_idx].value,
                bound,
            });
        }
        let more = log_points(omega_cut, 1, cfg.per_decade);
        omega_cut = *more.last().expect("decade is nonempty");
        let extra = evaluate(f, &more)?;
        evaluations += extra.len();
        samples.extend(extra);
        best_idx = argmin(&samples);
        bound = tail.eval(omega_cut);
    }

    // refine the deepest local minima of the grid
    let mut minima: Vec<usize> = (0..samples.len())
        .filter(|&i| {
            let v = samples[i].value;
            (i == 0 || v <= samples[i - 1].value) && (i + 1 == samples.len() || v <= samples[i + 1].value)
        })
        .collect();
    minima.sort_by(|&x, &y| {
        samples[x]
            .value
            .total_cmp(&samples[y].value)
            .then(samples[x].omega.total_cmp(&samples[y].omega))
    });
    minima.truncate(cfg.brackets);
    let refined: Vec<(Sample, usize)> = minima
        .par_iter()
        .map(|&i| {
            let a = samples[i.saturating_sub(1)].omega;
            let b = samples[(i + 1).min(samples.len() - 1)].omega;
            golden(f, a, b, samples[i], cfg.max_refine_iter)
        })
        .collect();
    let mut best = samples[best_idx];
    for (s, evals) in refined {
        evaluations += evals;
        if better(s, best) {
            best = s;
        }
    }

    let attained = bound >= best.value;
    let value = if attained { best.value } else { bound.max(0.0) };
    debug!(
        "sweep: {} evaluations, best {} at ω = {}, cut {} (bound {}, limit {})",
        evaluations, best.value, best.omega, omega_cut, bound, limit
    );
    Ok(SweepResult {
        omega: if attained { best.omega } else { omega_cut },
        value,
        best_sample: best.value,
        attained,
        omega_tail,
        omega_cut,
        tail_at_cut: bound,
        tail_limit: limit,
        evaluations,
    })
}

fn argmin(samples: &[Sample]) -> usize {
    let mut best = 0;
    for (i, s) in samples.iter().enumerate() {
        if better(*s, samples[best]) {
            best = i;
        }
    }
    best
}
