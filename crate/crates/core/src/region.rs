//! Stability equivalence regions grown from Hölder balls.
//!
//! [`region_bound_general`] and [`region_bound_retarded`] return a radius ε̄
//! such that the q-norm ball of that radius around a point keeps the number
//! of unstable zeros fixed. [`grow_region`] repeatedly places balls of radius
//! `η ε̄` on the boundary of the covered set, tracking coverage on a uniform
//! cell grid.

use std::collections::{BTreeMap, HashSet};

use log::{debug, info};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charfun::{CharFun, CharFunError, RetardedForm, Snapshot};
use crate::line::largest_fixed_point;
use crate::polecount::{self, PoleCountError};
use crate::sweep::{self, SweepConfig, SweepError, SweepResult, TailBound};

#[derive(Debug, Error)]
pub enum RegionError {
    #[error("invalid Hölder pair (p = {p}, q = {q}): 1/p + 1/q must equal 1 with p, q ≥ 1")]
    Holder { p: f64, q: f64 },
    #[error("f vanishes on the imaginary axis at the center: min |f(jω)| = {value:e} at ω = {omega}; start points on a stability crossing are rejected")]
    Precondition { value: f64, omega: f64 },
    #[error("region growth supports at most 3 parameters, got {0}")]
    DimensionCap(usize),
    #[error("invalid region settings: {0}")]
    Settings(String),
    #[error("the start point has a zero radius bound")]
    ZeroRadius,
    #[error(transparent)]
    CharFun(#[from] CharFunError),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error(transparent)]
    PoleCount(#[from] PoleCountError),
}

/// Conjugate exponents, `1/p + 1/q = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderPair {
    pub p: f64,
    pub q: f64,
}

fn conjugate(x: f64) -> f64 {
    if x == 1.0 {
        f64::INFINITY
    } else if x.is_infinite() {
        1.0
    } else {
        x / (x - 1.0)
    }
}

impl HolderPair {
    pub fn new(p: f64, q: f64) -> Result<Self, RegionError> {
        let ok = p >= 1.0
            && q >= 1.0
            && match (p.is_infinite(), q.is_infinite()) {
                (true, true) => false,
                (true, false) => q == 1.0,
                (false, true) => p == 1.0,
                (false, false) => (1.0 / p + 1.0 / q - 1.0).abs() <= 1e-12,
            };
        if ok {
            Ok(HolderPair { p, q })
        } else {
            Err(RegionError::Holder { p, q })
        }
    }

    pub fn from_p(p: f64) -> Result<Self, RegionError> {
        HolderPair::new(p, conjugate(p))
    }

    pub fn euclidean() -> Self {
        HolderPair { p: 2.0, q: 2.0 }
    }
}

/// `‖v‖_r`.
pub fn norm(v: &[f64], r: f64) -> f64 {
    if r.is_infinite() {
        v.iter().fold(0.0, |a, x| a.max(x.abs()))
    } else if r == 1.0 {
        v.iter().map(|x| x.abs()).sum()
    } else {
        let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        scale * v.iter().map(|x| (x.abs() / scale).powf(r)).sum::<f64>().powf(1.0 / r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
    pub q: f64,
}

impl Ball {
    pub fn contains(&self, x: &[f64]) -> bool {
        let d: Vec<f64> = x.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        norm(&d, self.q) <= self.radius * (1.0 + 1e-12)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionBound {
    pub epsilon: f64,
    pub omega: f64,
    pub min_abs_f: f64,
    pub attained: bool,
}

fn precondition(snap: &Snapshot, zero_tol: f64) -> Result<SweepResult, RegionError> {
    let modulus = sweep::min_modulus(snap)?;
    let scale = 1.0 + snap.coefficient_sums().iter().sum::<f64>();
    if modulus.value <= zero_tol * scale {
        return Err(RegionError::Precondition {
            value: modulus.value,
            omega: modulus.omega,
        });
    }
    Ok(modulus)
}

/// Closed-form radius for constant-coefficient retarded systems:
/// `min_ω |f(jω, τ0)| / ‖(ω |P_k(jω)|)_k‖_p`.
pub fn region_bound_retarded(
    rf: &RetardedForm,
    tau0: &[f64],
    hp: HolderPair,
) -> Result<RegionBound, RegionError> {
    let n = tau0.len();
    let a = rf.coefficient_bounds();
    let scale = 1.0 + a.iter().sum::<f64>();
    let modulus_tail = TailBound::modulus(a.clone())?;
    let max_delay = rf
        .groups
        .iter()
        .map(|g| match g.source {
            crate::charfun::DelaySource::Param(k) => tau0[k],
            crate::charfun::DelaySource::Fixed(d) => d,
        })
        .fold(0.0, f64::max);
    let modulus = sweep::global_min(
        &|w: f64| (rf.eval(Complex64::new(0.0, w), tau0).norm(), 1.0),
        &modulus_tail,
        sweep::linear_span(&modulus_tail),
        max_delay,
        &SweepConfig::from_zero(),
    )?;
    if modulus.value <= 1e-9 * scale {
        return Err(RegionError::Precondition {
            value: modulus.value,
            omega: modulus.omega,
        });
    }
    let upper: Vec<Vec<f64>> = rf
        .param_polys(n)
        .into_iter()
        .map(|c| std::iter::once(0.0).chain(c).collect())
        .collect();
    let tail = TailBound::new(a, upper, hp.p)?;
    let r = sweep::global_min(
        &|w: f64| {
            let num = rf.eval(Complex64::new(0.0, w), tau0).norm();
            (num, norm(&rf.gradient_components(w, n), hp.p))
        },
        &tail,
        sweep::linear_span(&tail),
        max_delay,
        &SweepConfig::default(),
    )?;
    Ok(RegionBound {
        epsilon: r.value,
        omega: r.omega,
        min_abs_f: modulus.value,
        attained: r.attained,
    })
}

/// Offsets with q-norm `eps`: the center, `±eps e_k` and `2^min(n,6)` sign corners.
fn ball_samples(n: usize, eps: f64, q: f64) -> Vec<Vec<f64>> {
    let mut out = vec![vec![0.0; n]];
    for k in 0..n {
        for sign in [1.0, -1.0] {
            let mut v = vec![0.0; n];
            v[k] = sign * eps;
            out.push(v);
        }
    }
    let corner = if q.is_infinite() {
        eps
    } else {
        eps / (n as f64).powf(1.0 / q)
    };
    let bits = n.min(6);
    if n > 1 {
        for mask in 0..(1usize << bits) {
            out.push(
                (0..n)
                    .map(|k| if mask >> (k % bits) & 1 == 1 { -corner } else { corner })
                    .collect(),
            );
        }
    }
    out
}

/// Settings shared by the general radius bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundConfig {
    pub inflation: f64,
    pub bisect_tol: f64,
    pub zero_tol: f64,
}

impl Default for BoundConfig {
    fn default() -> Self {
        BoundConfig {
            inflation: 1.1,
            bisect_tol: 1e-3,
            zero_tol: 1e-9,
        }
    }
}

/// Radius by bisection on the circular inequality, with the inner max of
/// `‖∇f‖_p` over the q-ball estimated from [`ball_samples`].
pub fn region_bound_general(
    cf: &CharFun,
    tau0: &[f64],
    hp: HolderPair,
    cfg: &BoundConfig,
) -> Result<RegionBound, RegionError> {
    let snap0 = cf.snapshot(tau0)?;
    let modulus = precondition(&snap0, cfg.zero_tol)?;
    let n = tau0.len();
    let m = cf.m() as usize;
    let lower = snap0.coefficient_sums()[..m].to_vec();
    let rhs = |eps: f64| -> Result<(f64, f64, bool), RegionError> {
        let mut frames = Vec::new();
        for offset in ball_samples(n, eps, hp.q) {
            let mut x: Vec<f64> = tau0.iter().zip(&offset).map(|(a, b)| a + b).collect();
            cf.clip(&mut x);
            frames.push(cf.snapshot(&x)?);
        }
        // componentwise bounds over the enclosing box
        let lo: Vec<f64> = tau0
            .iter()
            .zip(cf.lower_bounds())
            .map(|(x, l)| (x - eps).max(*l))
            .collect();
        let hi: Vec<f64> = tau0.iter().map(|x| x + eps).collect();
        let mut upper = vec![vec![0.0; m + 1]; n];
        for b in cf.term_bounds(&lo, &hi)? {
            for k in 0..n {
                upper[k][b.power as usize] += b.dcoeff[k];
                upper[k][b.power as usize + 1] += b.coeff * b.ddelay[k];
            }
        }
        let tail = TailBound::new(lower.clone(), upper, hp.p)?;
        let delay_scale = frames.iter().map(|s| s.max_delay()).fold(0.0, f64::max);
        let f = |w: f64| {
            let s = Complex64::new(0.0, w);
            let num = snap0.eval(s).norm();
            let (mut sampled, mut grouped) = (0.0f64, 0.0f64);
            for snap in &frames {
                let g: Vec<f64> = snap.grad(s).iter().map(|z| z.norm()).collect();
                sampled = sampled.max(norm(&g, hp.p));
                grouped = grouped.max(norm(&snap.gradient_group_bounds(s), hp.p));
            }
            (num, (cfg.inflation * sampled).min(grouped))
        };
        let r = sweep::global_min(
            &f,
            &tail,
            sweep::linear_span(&tail),
            delay_scale,
            &SweepConfig::default(),
        )?;
        Ok((r.value, r.omega, r.attained))
    };
    let mut attained = true;
    let fp = largest_fixed_point(
        |eps| {
            rhs(eps).map(|(v, w, a)| {
                attained = a;
                (v, w)
            })
        },
        f64::INFINITY,
        cfg.bisect_tol,
    )?;
    Ok(RegionBound {
        epsilon: fp.value,
        omega: fp.omega,
        min_abs_f: modulus.value,
        attained,
    })
}

/// Radius bound through the fast path when available.
pub fn region_bound(
    cf: &CharFun,
    retarded: Option<&RetardedForm>,
    tau: &[f64],
    hp: HolderPair,
    cfg: &BoundConfig,
) -> Result<RegionBound, RegionError> {
    cf.check_point(tau)?;
    match retarded {
        Some(rf) => region_bound_retarded(rf, tau, hp),
        None => region_bound_general(cf, tau, hp, cfg),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowConfig {
    pub hp: HolderPair,
    pub eta: f64,
    /// Cell size; `None` means an eighth of the radius bound at the start.
    pub h: Option<f64>,
    /// Per-parameter `[lower, upper]` extent; `None` means domain lower bound
    /// and `start + 10 (1 + |start|)`.
    pub extent: Option<Vec<(f64, f64)>>,
    pub max_generations: usize,
    pub max_balls: usize,
    pub max_cells: usize,
    /// Largest ball radius in cells; larger balls are shrunk to it.
    pub max_radius_cells: f64,
    pub bound: BoundConfig,
    pub fast_path: bool,
}

impl Default for GrowConfig {
    fn default() -> Self {
        GrowConfig {
            hp: HolderPair::euclidean(),
            eta: 0.5,
            h: None,
            extent: None,
            max_generations: 500,
            max_balls: 20_000,
            max_cells: 400_000,
            max_radius_cells: 32.0,
            bound: BoundConfig::default(),
            fast_path: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// No frontier sample added a cell.
    Exhausted,
    GenerationCap,
    BallCap,
    CellCap,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrontierSample {
    pub point: Vec<f64>,
    pub epsilon: f64,
    pub min_abs_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub point: Vec<f64>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionState {
    pub start: Vec<f64>,
    pub nu: u32,
    pub hp: HolderPair,
    pub eta: f64,
    pub h: f64,
    pub epsilon0: f64,
    pub extent: Vec<(f64, f64)>,
    pub balls: Vec<Ball>,
    pub generations: usize,
    /// Covered cells after each generation (generation 0 is the start ball).
    pub cells_per_generation: Vec<usize>,
    /// Smallest `min_ω |f|` among the samples evaluated in each generation.
    pub frontier_min_abs_f: Vec<f64>,
    /// Samples evaluated in the last generation.
    pub terminal_frontier: Vec<FrontierSample>,
    pub lower_cap_hit: Vec<bool>,
    pub upper_cap_hit: Vec<bool>,
    pub failures: Vec<Failure>,
    pub termination: Termination,
    /// Traced outline of the covered cells (two parameters only).
    pub polygon: Option<Vec<[f64; 2]>>,
    #[serde(skip)]
    cells: HashSet<Cell>,
}

type Cell = [i64; 3];

struct Grid {
    origin: Vec<f64>,
    h: f64,
    n: usize,
}

impl Grid {
    fn center(&self, c: &Cell) -> Vec<f64> {
        (0..self.n).map(|k| self.origin[k] + c[k] as f64 * self.h).collect()
    }

    fn cell_of(&self, x: &[f64]) -> Cell {
        let mut c = [0i64; 3];
        for k in 0..self.n {
            c[k] = ((x[k] - self.origin[k]) / self.h).round() as i64;
        }
        c
    }

    /// Cells whose centers lie in `ball` and inside `extent`.
    fn covered_by(&self, ball: &Ball, extent: &[(f64, f64)]) -> Vec<Cell> {
        let mut lo = [0i64; 3];
        let mut hi = [0i64; 3];
        for k in 0..self.n {
            let a = ball.center[k] - ball.radius;
            let b = ball.center[k] + ball.radius;
            lo[k] = ((a.max(extent[k].0) - self.origin[k]) / self.h).ceil() as i64;
            hi[k] = ((b.min(extent[k].1) - self.origin[k]) / self.h).floor() as i64;
            if lo[k] > hi[k] {
                return Vec::new();
            }
        }
        let mut out = Vec::new();
        let mut c = [0i64; 3];
        c[..self.n].copy_from_slice(&lo[..self.n]);
        loop {
            if ball.contains(&self.center(&c)) {
                out.push(c);
            }
            let mut k = 0;
            loop {
                if k == self.n {
                    return out;
                }
                if c[k] < hi[k] {
                    c[k] += 1;
                    break;
                }
                c[k] = lo[k];
                k += 1;
            }
        }
    }

    fn neighbours(&self, c: &Cell) -> Vec<Cell> {
        let mut out = Vec::with_capacity(27);
        let span = |k: usize| if k < self.n { -1..=1 } else { 0..=0 };
        for a in span(0) {
            for b in span(1) {
                for d in span(2) {
                    out.push([c[0] + a, c[1] + b, c[2] + d]);
                }
            }
        }
        out
    }
}

/// Directions on the unit sphere at roughly `spacing` resolution for a sphere of radius `r`.
fn sphere_directions(n: usize, r: f64, spacing: f64) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => {
            let count = ((std::f64::consts::TAU * r / spacing).ceil() as usize).clamp(8, 4096);
            (0..count)
                .map(|i| {
                    let a = std::f64::consts::TAU * i as f64 / count as f64;
                    vec![a.cos(), a.sin()]
                })
                .collect()
        }
        _ => {
            // Fibonacci lattice
            let area = 4.0 * std::f64::consts::PI * r * r;
            let count = ((area / (spacing * spacing)).ceil() as usize).clamp(16, 20_000);
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - 2.0 * (i as f64 + 0.5) / count as f64;
                    let rho = (1.0 - z * z).sqrt();
                    let a = golden * i as f64;
                    vec![rho * a.cos(), rho * a.sin(), z]
                })
                .collect()
        }
    }
}

fn boundary_points(ball: &Ball, h: f64) -> Vec<Vec<f64>> {
    let n = ball.center.len();
    sphere_directions(n, ball.radius, 0.5 * h)
        .into_iter()
        .map(|u| {
            let scale = ball.radius / norm(&u, ball.q);
            ball.center.iter().zip(&u).map(|(c, x)| c + scale * x).collect()
        })
        .collect()
}

enum Evaluated {
    Bound(RegionBound),
    Failed(String),
}

/// Grows a stability equivalence region from `start`.
pub fn grow_region(cf: &CharFun, start: &[f64], cfg: &GrowConfig) -> Result<RegionState, RegionError> {
    let n = cf.n_params();
    if n > 3 {
        return Err(RegionError::DimensionCap(n));
    }
    if n == 0 {
        return Err(RegionError::Settings("the system has no parameters".into()));
    }
    HolderPair::new(cfg.hp.p, cfg.hp.q)?;
    if !(cfg.eta > 0.0 && cfg.eta < 1.0) {
        return Err(RegionError::Settings(format!("η = {} must lie in (0, 1)", cfg.eta)));
    }
    cf.check_point(start)?;
    let retarded = if cfg.fast_path { cf.to_retarded().ok() } else { None };
    let nu = polecount::count_unstable(cf, start)?.nu;
    let first = region_bound(cf, retarded.as_ref(), start, cfg.hp, &cfg.bound)?;
    if !(first.epsilon > 0.0) {
        return Err(RegionError::ZeroRadius);
    }
    let h = match cfg.h {
        Some(h) if h > 0.0 && h.is_finite() => h,
        Some(h) => return Err(RegionError::Settings(format!("cell size {h} must be positive"))),
        None if first.epsilon.is_finite() => first.epsilon / 8.0,
        None => 0.1 * (1.0 + start.iter().fold(0.0f64, |a, x| a.max(x.abs()))),
    };
    let extent: Vec<(f64, f64)> = match &cfg.extent {
        Some(e) if e.len() == n => e.clone(),
        Some(e) => {
            return Err(RegionError::Settings(format!(
                "extent has {} entries for {n} parameters",
                e.len()
            )))
        }
        None => start
            .iter()
            .zip(cf.lower_bounds())
            .map(|(x, l)| (*l, x + 10.0 * (1.0 + x.abs())))
            .collect(),
    };
    let grid = Grid {
        origin: start.to_vec(),
        h,
        n,
    };
    let max_radius = cfg.max_radius_cells * h;
    let make_ball = |center: Vec<f64>, eps: f64| Ball {
        center,
        radius: (cfg.eta * eps).min(max_radius),
        q: cfg.hp.q,
    };

    let mut lower_cap_hit = vec![false; n];
    let mut upper_cap_hit = vec![false; n];
    let mut note_caps = |ball: &Ball| {
        for k in 0..n {
            if ball.center[k] - ball.radius <= extent[k].0 && extent[k].0 > cf.lower_bounds()[k] {
                lower_cap_hit[k] = true;
            }
            if ball.center[k] + ball.radius >= extent[k].1 {
                upper_cap_hit[k] = true;
            }
        }
    };

    let ball0 = make_ball(start.to_vec(), first.epsilon);
    note_caps(&ball0);
    let mut cells: HashSet<Cell> = grid.covered_by(&ball0, &extent).into_iter().collect();
    cells.insert(grid.cell_of(start));
    let mut balls = vec![ball0];
    let mut cells_per_generation = vec![cells.len()];
    let mut frontier_min_abs_f = vec![first.min_abs_f];
    let mut terminal_frontier = Vec::new();
    let mut failures = Vec::new();
    let mut newest = 0..1;
    let mut generations = 0;
    let termination = loop {
        if generations >= cfg.max_generations {
            break Termination::GenerationCap;
        }
        if balls.len() >= cfg.max_balls {
            break Termination::BallCap;
        }
        if cells.len() >= cfg.max_cells {
            break Termination::CellCap;
        }
        // one sample per uncovered-adjacent cell, in deterministic order
        let mut samples: BTreeMap<Cell, Vec<f64>> = BTreeMap::new();
        for ball in &balls[newest.clone()] {
            for x in boundary_points(ball, h) {
                let inside = x
                    .iter()
                    .zip(&extent)
                    .zip(cf.lower_bounds())
                    .all(|((v, (lo, hi)), l)| *v >= *lo && *v <= *hi && *v >= *l);
                if !inside {
                    continue;
                }
                let c = grid.cell_of(&x);
                if grid.neighbours(&c).iter().all(|nb| cells.contains(nb)) {
                    continue;
                }
                samples.entry(c).or_insert(x);
            }
        }
        if samples.is_empty() {
            break Termination::Exhausted;
        }
        generations += 1;
        let points: Vec<Vec<f64>> = samples.into_values().collect();
        let evaluated: Vec<Evaluated> = points
            .par_iter()
            .map(|x| match region_bound(cf, retarded.as_ref(), x, cfg.hp, &cfg.bound) {
                Ok(b) if b.epsilon > 0.0 => Evaluated::Bound(b),
                Ok(_) => Evaluated::Failed("zero radius".into()),
                Err(e) => Evaluated::Failed(e.to_string()),
            })
            .collect();
        // acceptance against the occupancy at the start of the generation
        let candidates: Vec<(Ball, Vec<Cell>)> = points
            .iter()
            .zip(&evaluated)
            .filter_map(|(x, e)| match e {
                Evaluated::Bound(b) => {
                    let ball = make_ball(x.clone(), b.epsilon);
                    let fresh: Vec<Cell> = grid
                        .covered_by(&ball, &extent)
                        .into_iter()
                        .filter(|c| !cells.contains(c))
                        .collect();
                    Some((ball, fresh))
                }
                Evaluated::Failed(_) => None,
            })
            .collect();
        terminal_frontier = points
            .iter()
            .zip(&evaluated)
            .filter_map(|(x, e)| match e {
                Evaluated::Bound(b) => Some(FrontierSample {
                    point: x.clone(),
                    epsilon: b.epsilon,
                    min_abs_f: b.min_abs_f,
                }),
                Evaluated::Failed(_) => None,
            })
            .collect();
        frontier_min_abs_f.push(
            terminal_frontier
                .iter()
                .map(|s| s.min_abs_f)
                .fold(f64::INFINITY, f64::min),
        );
        for (x, e) in points.iter().zip(&evaluated) {
            if let Evaluated::Failed(reason) = e {
                failures.push(Failure {
                    point: x.clone(),
                    reason: reason.clone(),
                });
            }
        }
        let before = balls.len();
        for (ball, fresh) in candidates {
            if fresh.is_empty() {
                continue;
            }
            note_caps(&ball);
            cells.extend(fresh);
            balls.push(ball);
        }
        cells_per_generation.push(cells.len());
        debug!(
            "generation {generations}: {} samples, {} new balls, {} cells",
            points.len(),
            balls.len() - before,
            cells.len()
        );
        if balls.len() == before {
            break Termination::Exhausted;
        }
        newest = before..balls.len();
    };
    info!(
        "region: {} balls, {} cells, {} generations ({:?})",
        balls.len(),
        cells.len(),
        generations,
        termination
    );
    let polygon = if n == 2 { Some(trace_outline(&grid, &cells)) } else { None };
    Ok(RegionState {
        start: start.to_vec(),
        nu,
        hp: cfg.hp,
        eta: cfg.eta,
        h,
        epsilon0: first.epsilon,
        extent,
        balls,
        generations,
        cells_per_generation,
        frontier_min_abs_f,
        terminal_frontier,
        lower_cap_hit,
        upper_cap_hit,
        failures,
        termination,
        polygon,
        cells,
    })
}

impl RegionState {
    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.balls.iter().any(|b| b.contains(x))
    }

    /// CSV of ball centers and radii.
    pub fn balls_csv(&self) -> String {
        let n = self.start.len();
        let mut out = String::new();
        for k in 0..n {
            out.push_str(&format!("x{k},"));
        }
        out.push_str("radius,q\n");
        for b in &self.balls {
            for x in &b.center {
                out.push_str(&format!("{x},"));
            }
            out.push_str(&format!("{},{}\n", b.radius, b.q));
        }
        out
    }
}

/// Longest closed outline of the union of covered cells, as cell corners.
fn trace_outline(grid: &Grid, cells: &HashSet<Cell>) -> Vec<[f64; 2]> {
    // directed boundary edges, counterclockwise around each covered cell
    let mut edges: BTreeMap<(i64, i64), Vec<(i64, i64)>> = BTreeMap::new();
    let mut sorted: Vec<&Cell> = cells.iter().collect();
    sorted.sort();
    for c in sorted {
        let (x, y) = (c[0], c[1]);
        // corners indexed by doubled coordinates: cell (x, y) spans x±1/2
        let sides = [
            ([x, y - 1], (x, y), (x + 1, y)),
            ([x + 1, y], (x + 1, y), (x + 1, y + 1)),
            ([x, y + 1], (x + 1, y + 1), (x, y + 1)),
            ([x - 1, y], (x, y + 1), (x, y)),
        ];
        for (nb, a, b) in sides {
            if !cells.contains(&[nb[0], nb[1], 0]) {
                edges.entry(a).or_default().push(b);
            }
        }
    }
    let mut best: Vec<(i64, i64)> = Vec::new();
    while let Some((&start, _)) = edges.iter().find(|(_, v)| !v.is_empty()) {
        let mut loop_pts = vec![start];
        let mut at = start;
        while let Some(next) = edges.get_mut(&at).and_then(|v| v.pop()) {
            if next == start {
                break;
            }
            loop_pts.push(next);
            at = next;
        }
        if loop_pts.len() > best.len() {
            best = loop_pts;
        }
    }
    best.into_iter()
        .map(|(i, j)| {
            [
                grid.origin[0] + (i as f64 - 0.5) * grid.h,
                grid.origin[1] + (j as f64 - 0.5) * grid.h,
            ]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example7() -> CharFun {
        CharFun::parse("s^2 + 2*s*exp(-s*t1) + exp(-s*t2)", &["t1", "t2"]).unwrap()
    }

    #[test]
    fn holder_pairs() {
        assert!(HolderPair::new(2.0, 2.0).is_ok());
        assert!(HolderPair::new(1.0, f64::INFINITY).is_ok());
        assert!(HolderPair::new(f64::INFINITY, 1.0).is_ok());
        assert!(HolderPair::new(3.0, 1.5).is_ok());
        assert!(HolderPair::new(2.0, 3.0).is_err());
        assert!(HolderPair::new(0.5, -1.0).is_err());
        assert_eq!(HolderPair::from_p(4.0).unwrap().q, 4.0 / 3.0);
    }

    #[test]
    fn ball_shapes() {
        let diamond = Ball { center: vec![0.0, 0.0], radius: 1.0, q: 1.0 };
        let disk = Ball { center: vec![0.0, 0.0], radius: 1.0, q: 2.0 };
        let square = Ball { center: vec![0.0, 0.0], radius: 1.0, q: f64::INFINITY };
        let p = [0.6, 0.6];
        assert!(!diamond.contains(&p));
        assert!(disk.contains(&p));
        assert!(square.contains(&p));
        let p = [0.9, 0.9];
        assert!(!disk.contains(&p));
        assert!(square.contains(&p));
        assert!(diamond.contains(&[0.5, 0.5]));
    }

    #[test]
    fn example7_closed_form_radius() {
        let rf = example7().to_retarded().unwrap();
        let b = region_bound_retarded(&rf, &[0.0, 0.0], HolderPair::euclidean()).unwrap();
        assert!((b.epsilon - 0.5).abs() < 1e-4, "{b:?}");
        assert!(!b.attained);
    }

    #[test]
    fn example7_box_radius_is_positive() {
        let rf = example7().to_retarded().unwrap();
        let b = region_bound_retarded(&rf, &[0.0, 0.0], HolderPair::new(f64::INFINITY, 1.0).unwrap()).unwrap();
        // inf (1 + ω²) / max(2ω², ω): dense grid plus the ω → ∞ limit 1/2
        let oracle = (1..200_000)
            .map(|i| {
                let w = i as f64 * 1e-4;
                (1.0 + w * w) / (2.0 * w * w).max(w)
            })
            .fold(0.5, f64::min);
        assert!(b.epsilon > 0.0);
        assert!(b.epsilon <= oracle + 1e-9 && b.epsilon >= oracle * (1.0 - 1e-3), "{} vs {oracle}", b.epsilon);
    }

    #[test]
    fn general_radius_matches_closed_form_for_example7() {
        let b = region_bound_general(&example7(), &[0.0, 0.0], HolderPair::euclidean(), &BoundConfig::default()).unwrap();
        assert!((b.epsilon - 0.5).abs() < 1e-3, "{b:?}");
        let b = region_bound_general(&example7(), &[0.0, 0.0], HolderPair::new(1.0, f64::INFINITY).unwrap(), &BoundConfig::default()).unwrap();
        assert!(b.epsilon > 0.0);
    }

    #[test]
    fn radius_at_crossing_is_an_error() {
        let cf = CharFun::parse("s + 2*exp(-s*t)", &["t"]).unwrap();
        let rf = cf.to_retarded().unwrap();
        let err = region_bound_retarded(&rf, &[std::f64::consts::FRAC_PI_4], HolderPair::euclidean());
        assert!(matches!(err, Err(RegionError::Precondition { .. })));
    }

    #[test]
    fn example12_general_radius_is_positive() {
        let cf = CharFun::parse("s^2 + s*k + 1 - exp(-tau*(s+k))", &["tau", "k"]).unwrap();
        let b = region_bound_general(&cf, &[5.0, 5.0], HolderPair::euclidean(), &BoundConfig::default()).unwrap();
        assert!(b.epsilon > 0.0, "{b:?}");
    }

    #[test]
    fn growth_is_monotone_and_sound() {
        let cf = example7();
        let state = grow_region(&cf, &[0.1, 0.3], &GrowConfig::default()).unwrap();
        assert_eq!(state.nu, 0);
        assert!(state.cells_per_generation.windows(2).all(|w| w[0] <= w[1]));
        assert!(state.balls.len() > 1);
        for b in state.balls.iter().step_by(7) {
            assert_eq!(polecount::count_unstable(&cf, &b.center).unwrap().nu, 0);
        }
        let poly = state.polygon.as_ref().unwrap();
        assert!(poly.len() >= 4);
    }

    #[test]
    fn tight_caps_leave_a_single_ball() {
        let cf = example7();
        let cfg = GrowConfig {
            eta: 0.01,
            extent: Some(vec![(0.0, 0.11), (0.0, 0.31)]),
            ..GrowConfig::default()
        };
        let state = grow_region(&cf, &[0.1, 0.3], &cfg).unwrap();
        assert!(state.balls.len() <= 3, "{}", state.balls.len());
    }

    #[test]
    fn dimension_cap() {
        let cf = CharFun::parse("s + exp(-s*a) + exp(-s*b) + exp(-s*c) + exp(-s*d)", &["a", "b", "c", "d"]).unwrap();
        assert!(matches!(
            grow_region(&cf, &[0.1; 4], &GrowConfig::default()),
            Err(RegionError::DimensionCap(4))
        ));
    }

    #[test]
    fn outline_of_a_square_block() {
        let grid = Grid { origin: vec![0.0, 0.0], h: 1.0, n: 2 };
        let cells: HashSet<Cell> = [[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0]].into_iter().collect();
        let poly = trace_outline(&grid, &cells);
        assert_eq!(poly.len(), 8);
        let xs: Vec<f64> = poly.iter().map(|p| p[0]).collect();
        assert_eq!(xs.iter().cloned().fold(f64::INFINITY, f64::min), -0.5);
        assert_eq!(xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.5);
    }
}
