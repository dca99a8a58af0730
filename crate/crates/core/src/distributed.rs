//! Distributed-delay state models with polynomial kernels.
//!
//! A model `ẋ = A0 x + Σ A1_i x(t - τ_i) + Σ A2_j ∫_{a_j}^{b_j} γ_j(ξ) x(t - ξ) dξ`
//! has characteristic function `det(sI - A0 - Σ A1_i e^{-sτ_i} - Σ A2_j I_j(s))`
//! with `I_j(s) = ∫ γ_j(ξ) e^{-sξ} dξ`. For polynomial `γ_j` every `I_j` is a
//! finite sum of `s^{-k} e^{-sξ}` terms, so multiplying the determinant by a
//! power of `s` gives a retarded quasi-polynomial.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::charfun::{CharFun, CharFunError, Descriptor, QpTerm};
use crate::expr::{self, Expr, LAPLACE};

/// Largest supported kernel degree.
pub const MAX_KERNEL_DEGREE: usize = 12;
/// Largest supported state dimension.
pub const MAX_ORDER: usize = 6;

#[derive(Debug, Error)]
pub enum DistributedError {
    #[error("the state matrix is empty")]
    Empty,
    #[error("{what} is {rows}x{cols}, expected {m}x{m}")]
    Dimension { what: String, rows: usize, cols: usize, m: usize },
    #[error("state dimension {0} exceeds the supported maximum {MAX_ORDER}")]
    OrderOverflow(usize),
    #[error("{what}: kernel degree {degree} exceeds the supported maximum {MAX_KERNEL_DEGREE}")]
    KernelDegree { what: String, degree: usize },
    #[error("{what}: value {value} is not finite")]
    NonFinite { what: String, value: f64 },
    #[error("{what}: limits must satisfy 0 <= lower < upper, got [{lower}, {upper}]")]
    Limits { what: String, lower: f64, upper: f64 },
    #[error("{what}: delay {value} must be positive")]
    Delay { what: String, value: f64 },
    #[error("{what}: cannot parse `{text}`: {source}")]
    Parse { what: String, text: String, source: expr::ParseError },
    #[error("{what}: `{text}` may only use declared parameters")]
    Unknown { what: String, text: String },
    #[error("{what}: {source}")]
    Eval { what: String, source: expr::EvalError },
    #[error(transparent)]
    CharFun(#[from] CharFunError),
}

/// A delay or integration limit: a number or a parameter expression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Expr(String),
}

impl From<f64> for Quantity {
    fn from(v: f64) -> Self {
        Quantity::Number(v)
    }
}

impl From<&str> for Quantity {
    fn from(v: &str) -> Self {
        Quantity::Expr(v.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteTerm {
    pub matrix: Vec<Vec<f64>>,
    pub delay: Quantity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributedTerm {
    pub matrix: Vec<Vec<f64>>,
    pub lower: Quantity,
    pub upper: Quantity,
    /// `γ(ξ) = Σ kernel[ℓ] ξ^ℓ`.
    pub kernel: Vec<f64>,
}

/// JSON model descriptor. Matrices are lists of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributedModel {
    pub a0: Vec<Vec<f64>>,
    #[serde(default)]
    pub params: Vec<String>,
    #[serde(default)]
    pub discrete: Vec<DiscreteTerm>,
    #[serde(default)]
    pub distributed: Vec<DistributedTerm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConversionReport {
    pub order: usize,
    pub leading_power: u32,
    /// Power of `s` the determinant was multiplied by.
    pub clearing_power: u32,
    /// Zeros at `s = 0` introduced by the clearing step.
    pub spurious_zeros_at_origin: u32,
    pub terms: usize,
    pub charfun: Descriptor,
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|k| k as f64).product()
}

/// `|s| b` below which the termwise Taylor series replaces the closed form
/// for the `ξ^ℓ` part of the kernel.
pub fn series_threshold(degree: usize) -> f64 {
    2.0 + 0.25 * degree as f64
}

/// `(b^n - a^n) / n` for `0 <= a < b`.
fn power_gap(a: f64, b: f64, n: i32) -> f64 {
    if a == 0.0 {
        return b.powi(n) / n as f64;
    }
    -b.powi(n) * (n as f64 * (a / b).ln()).exp_m1() / n as f64
}

/// `∫_a^b ξ^ℓ e^{-sξ} dξ` by the integrated Taylor series of `e^{-sξ}`.
fn moment_series(l: usize, a: f64, b: f64, s: Complex64) -> Complex64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut coef = Complex64::new(1.0, 0.0);
    let ratio = (s * b).norm();
    for k in 0..200 {
        let n = (l + k + 1) as i32;
        let term = coef * power_gap(a, b, n);
        sum += term;
        // remaining terms are dominated by a geometric tail once k > |sb|
        if k as f64 > ratio && term.norm() <= 1e-17 * sum.norm() {
            break;
        }
        coef *= -s / (k + 1) as f64;
    }
    sum
}

/// `e^{-sξ} ℓ!/s^{ℓ+1} Σ_{k≤ℓ} (sξ)^k/k!`.
fn antiderivative(l: usize, xi: f64, s: Complex64) -> Complex64 {
    let z = s * xi;
    let mut partial = Complex64::new(0.0, 0.0);
    let mut power = Complex64::new(1.0, 0.0);
    for k in 0..=l {
        partial += power;
        power *= z / (k + 1) as f64;
    }
    (-z).exp() * partial * factorial(l) / s.powu(l as u32 + 1)
}

fn moment_closed(l: usize, a: f64, b: f64, s: Complex64) -> Complex64 {
    antiderivative(l, a, s) - antiderivative(l, b, s)
}

/// `∫_a^b ξ^ℓ e^{-sξ} dξ`.
pub fn kernel_moment(l: usize, a: f64, b: f64, s: Complex64) -> Complex64 {
    if s.norm() * b < series_threshold(l) {
        moment_series(l, a, b, s)
    } else {
        moment_closed(l, a, b, s)
    }
}

/// `∫_a^b γ(ξ) e^{-sξ} dξ` with `γ(ξ) = Σ g[ℓ] ξ^ℓ`, for `0 <= a < b`.
pub fn kernel_laplace(g: &[f64], a: f64, b: f64, s: Complex64) -> Complex64 {
    g.iter()
        .enumerate()
        .filter(|(_, c)| **c != 0.0)
        .map(|(l, c)| *c * kernel_moment(l, a, b, s))
        .sum()
}

/// Closed form on both sides of the switch, for continuity checks.
pub fn kernel_laplace_closed(g: &[f64], a: f64, b: f64, s: Complex64) -> Complex64 {
    g.iter()
        .enumerate()
        .map(|(l, c)| *c * moment_closed(l, a, b, s))
        .sum()
}

/// Series on both sides of the switch, for continuity checks.
pub fn kernel_laplace_series(g: &[f64], a: f64, b: f64, s: Complex64) -> Complex64 {
    g.iter()
        .enumerate()
        .map(|(l, c)| *c * moment_series(l, a, b, s))
        .sum()
}

/// Laurent quasi-polynomial: `(power of s, delay atom counts) -> coefficient`.
#[derive(Debug, Clone, Default)]
struct Laurent {
    terms: BTreeMap<(i32, Vec<u32>), Expr>,
}

impl Laurent {
    fn push(&mut self, key: (i32, Vec<u32>), coeff: Expr) {
        if coeff.is_zero() {
            return;
        }
        match self.terms.remove(&key) {
            Some(old) => {
                let sum = Expr::add(old, coeff);
                if !sum.is_zero() {
                    self.terms.insert(key, sum);
                }
            }
            None => {
                self.terms.insert(key, coeff);
            }
        }
    }

    fn add(&mut self, other: &Laurent, sign: f64) {
        for (k, c) in &other.terms {
            self.push(k.clone(), Expr::mul(Expr::Const(sign), c.clone()));
        }
    }

    fn mul(&self, other: &Laurent) -> Laurent {
        let mut out = Laurent::default();
        for ((pa, da), ca) in &self.terms {
            for ((pb, db), cb) in &other.terms {
                let delay = da.iter().zip(db).map(|(x, y)| x + y).collect();
                out.push((pa + pb, delay), Expr::mul(ca.clone(), cb.clone()));
            }
        }
        out
    }
}

fn det(entries: &[Vec<Laurent>]) -> Laurent {
    let m = entries.len();
    if m == 1 {
        return entries[0][0].clone();
    }
    let mut out = Laurent::default();
    for col in 0..m {
        if entries[0][col].terms.is_empty() {
            continue;
        }
        let minor: Vec<Vec<Laurent>> = entries[1..]
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(c, _)| *c != col)
                    .map(|(_, e)| e.clone())
                    .collect()
            })
            .collect();
        let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
        out.add(&entries[0][col].mul(&det(&minor)), sign);
    }
    out
}

fn det_numeric(mut a: Vec<Vec<Complex64>>) -> Complex64 {
    let m = a.len();
    let mut d = Complex64::new(1.0, 0.0);
    for col in 0..m {
        let pivot = (col..m)
            .max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm()))
            .unwrap();
        if a[pivot][col].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if pivot != col {
            a.swap(pivot, col);
            d = -d;
        }
        d *= a[col][col];
        for r in col + 1..m {
            let factor = a[r][col] / a[col][col];
            for c in col..m {
                let v = a[col][c];
                a[r][c] -= factor * v;
            }
        }
    }
    d
}

impl DistributedModel {
    pub fn order(&self) -> usize {
        self.a0.len()
    }

    fn parse_quantity(&self, q: &Quantity, what: &str) -> Result<Expr, DistributedError> {
        match q {
            Quantity::Number(v) if v.is_finite() => Ok(Expr::Const(*v)),
            Quantity::Number(v) => Err(DistributedError::NonFinite {
                what: what.to_string(),
                value: *v,
            }),
            Quantity::Expr(text) => {
                let e = expr::parse(text).map_err(|source| DistributedError::Parse {
                    what: what.to_string(),
                    text: text.clone(),
                    source,
                })?;
                if e.variables().iter().any(|v| v == LAPLACE || !self.params.contains(v)) {
                    return Err(DistributedError::Unknown {
                        what: what.to_string(),
                        text: text.clone(),
                    });
                }
                Ok(e)
            }
        }
    }

    fn check_matrix(&self, a: &[Vec<f64>], what: &str) -> Result<(), DistributedError> {
        let m = self.order();
        let cols = a.iter().map(|r| r.len()).find(|&c| c != m).unwrap_or(m);
        if a.len() != m || cols != m {
            return Err(DistributedError::Dimension {
                what: what.to_string(),
                rows: a.len(),
                cols,
                m,
            });
        }
        if let Some(v) = a.iter().flatten().find(|v| !v.is_finite()) {
            return Err(DistributedError::NonFinite {
                what: what.to_string(),
                value: *v,
            });
        }
        Ok(())
    }

    /// Structural checks; numeric delays and limits are checked here, parameter
    /// expressions when evaluated.
    pub fn validate(&self) -> Result<(), DistributedError> {
        let m = self.order();
        if m == 0 {
            return Err(DistributedError::Empty);
        }
        if m > MAX_ORDER {
            return Err(DistributedError::OrderOverflow(m));
        }
        self.check_matrix(&self.a0, "a0")?;
        for (i, t) in self.discrete.iter().enumerate() {
            let what = format!("discrete[{i}]");
            self.check_matrix(&t.matrix, &what)?;
            if let Some(v) = self.parse_quantity(&t.delay, &what)?.as_const() {
                if v <= 0.0 {
                    return Err(DistributedError::Delay { what, value: v });
                }
            }
        }
        for (j, t) in self.distributed.iter().enumerate() {
            let what = format!("distributed[{j}]");
            self.check_matrix(&t.matrix, &what)?;
            if t.kernel.len() > MAX_KERNEL_DEGREE + 1 {
                return Err(DistributedError::KernelDegree {
                    what,
                    degree: t.kernel.len() - 1,
                });
            }
            if let Some(v) = t.kernel.iter().find(|v| !v.is_finite()) {
                return Err(DistributedError::NonFinite { what, value: *v });
            }
            let lo = self.parse_quantity(&t.lower, &what)?.as_const();
            let hi = self.parse_quantity(&t.upper, &what)?.as_const();
            if let (Some(lower), Some(upper)) = (lo, hi) {
                if !(lower >= 0.0 && lower < upper) {
                    return Err(DistributedError::Limits { what, lower, upper });
                }
            } else if lo.is_some_and(|v| v < 0.0) || hi.is_some_and(|v| v <= 0.0) {
                return Err(DistributedError::Limits {
                    what,
                    lower: lo.unwrap_or(f64::NAN),
                    upper: hi.unwrap_or(f64::NAN),
                });
            }
        }
        Ok(())
    }

    /// Symbolic conversion to a monic retarded quasi-polynomial.
    pub fn to_charfun(&self) -> Result<(CharFun, ConversionReport), DistributedError> {
        self.validate()?;
        let m = self.order();
        let mut atoms: Vec<Expr> = Vec::new();
        let mut atom_of = |e: Expr| -> Option<usize> {
            if e.is_zero() {
                return None;
            }
            match atoms.iter().position(|a| *a == e) {
                Some(i) => Some(i),
                None => {
                    atoms.push(e);
                    Some(atoms.len() - 1)
                }
            }
        };
        // (matrix, sign-free Laurent scalar) contributions
        let mut pieces: Vec<(&Vec<Vec<f64>>, Vec<(i32, Option<usize>, Expr)>)> = Vec::new();
        for (i, t) in self.discrete.iter().enumerate() {
            let d = self.parse_quantity(&t.delay, &format!("discrete[{i}]"))?;
            pieces.push((&t.matrix, vec![(0, atom_of(d), Expr::one())]));
        }
        for (j, t) in self.distributed.iter().enumerate() {
            let what = format!("distributed[{j}]");
            let a = self.parse_quantity(&t.lower, &what)?;
            let b = self.parse_quantity(&t.upper, &what)?;
            let (ia, ib) = (atom_of(a.clone()), atom_of(b.clone()));
            let mut monos = Vec::new();
            for (l, g) in t.kernel.iter().enumerate().filter(|(_, g)| **g != 0.0) {
                for k in 0..=l {
                    let scale = g * factorial(l) / factorial(k);
                    let power = k as i32 - l as i32 - 1;
                    let ak = Expr::powi(a.clone(), k as i32);
                    let bk = Expr::powi(b.clone(), k as i32);
                    monos.push((power, ia, Expr::mul(Expr::Const(scale), ak)));
                    monos.push((power, ib, Expr::mul(Expr::Const(-scale), bk)));
                }
            }
            pieces.push((&t.matrix, monos));
        }
        let n_atoms = atoms.len();
        let key = |power: i32, atom: Option<usize>| {
            let mut d = vec![0u32; n_atoms];
            if let Some(i) = atom {
                d[i] = 1;
            }
            (power, d)
        };
        let mut entries = vec![vec![Laurent::default(); m]; m];
        for (r, row) in entries.iter_mut().enumerate() {
            for (c, e) in row.iter_mut().enumerate() {
                if r == c {
                    e.push(key(1, None), Expr::one());
                }
                e.push(key(0, None), Expr::Const(-self.a0[r][c]));
                for (matrix, monos) in &pieces {
                    let v = matrix[r][c];
                    if v == 0.0 {
                        continue;
                    }
                    for (power, atom, coeff) in monos {
                        e.push(key(*power, *atom), Expr::mul(Expr::Const(-v), coeff.clone()));
                    }
                }
            }
        }
        let poly = det(&entries);
        let lowest = poly.terms.keys().map(|(p, _)| *p).min().unwrap_or(0);
        let clearing = (-lowest).max(0);
        let leading = m as i32 + clearing;
        let mut terms = Vec::new();
        for ((power, counts), coeff) in poly.terms {
            let power = power + clearing;
            let delay = counts
                .iter()
                .zip(&atoms)
                .filter(|(n, _)| **n > 0)
                .fold(Expr::zero(), |acc, (n, a)| {
                    Expr::add(acc, Expr::mul(Expr::Const(*n as f64), a.clone()))
                });
            if power == leading && delay.is_zero() {
                if coeff.as_const() != Some(1.0) {
                    return Err(CharFunError::Structure(format!("leading coefficient `{coeff}` is not 1")).into());
                }
                continue;
            }
            terms.push(QpTerm::new(power as u32, coeff, delay));
        }
        let mut cf = CharFun::new(leading as u32, self.params.clone(), terms)?;
        if let Some(lower) = &self.lower {
            cf = cf.with_lower_bounds(lower.clone())?;
        }
        let report = ConversionReport {
            order: m,
            leading_power: leading as u32,
            clearing_power: clearing as u32,
            spurious_zeros_at_origin: clearing as u32,
            terms: cf.terms().len(),
            charfun: cf.to_descriptor(),
        };
        Ok((cf, report))
    }

    /// `det(sI - A0 - Σ A1 e^{-sτ} - Σ A2 I(s))` evaluated directly.
    pub fn characteristic(&self, s: Complex64, tau: &[f64]) -> Result<Complex64, DistributedError> {
        self.validate()?;
        if tau.len() != self.params.len() {
            return Err(CharFunError::Dimension {
                expected: self.params.len(),
                got: tau.len(),
            }
            .into());
        }
        let lookup = |name: &str| self.params.iter().position(|p| p == name).map(|i| tau[i]);
        let value = |q: &Quantity, what: &str| -> Result<f64, DistributedError> {
            self.parse_quantity(q, what)?
                .eval_real(&lookup)
                .map_err(|source| DistributedError::Eval {
                    what: what.to_string(),
                    source,
                })
        };
        let m = self.order();
        let mut a: Vec<Vec<Complex64>> = (0..m)
            .map(|r| {
                (0..m)
                    .map(|c| Complex64::new(-self.a0[r][c], 0.0))
                    .collect()
            })
            .collect();
        for (r, row) in a.iter_mut().enumerate() {
            row[r] += s;
        }
        for (i, t) in self.discrete.iter().enumerate() {
            let what = format!("discrete[{i}]");
            let d = value(&t.delay, &what)?;
            if d < 0.0 {
                return Err(DistributedError::Delay { what, value: d });
            }
            let e = (-s * d).exp();
            for (r, row) in a.iter_mut().enumerate() {
                for (c, x) in row.iter_mut().enumerate() {
                    *x -= t.matrix[r][c] * e;
                }
            }
        }
        for (j, t) in self.distributed.iter().enumerate() {
            let what = format!("distributed[{j}]");
            let lower = value(&t.lower, &what)?;
            let upper = value(&t.upper, &what)?;
            if !(lower >= 0.0 && lower < upper) {
                return Err(DistributedError::Limits { what, lower, upper });
            }
            let k = kernel_laplace(&t.kernel, lower, upper, s);
            for (r, row) in a.iter_mut().enumerate() {
                for (c, x) in row.iter_mut().enumerate() {
                    *x -= t.matrix[r][c] * k;
                }
            }
        }
        Ok(det_numeric(a))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn constant_kernel_from_zero() {
        for s in [c(0.3, 2.0), c(5.0, -1.0), c(0.0, 40.0), c(1e-3, 0.0)] {
            let tau = 1.7;
            let want = (1.0 - (-s * tau).exp()) / s;
            let got = kernel_laplace(&[1.0], 0.0, tau, s);
            assert!((got - want).norm() <= 1e-12 * want.norm(), "{s}: {got} vs {want}");
        }
    }

    #[test]
    fn zeroth_moment_at_origin() {
        assert_eq!(kernel_laplace(&[1.0], 1.0, 2.0, c(0.0, 0.0)), c(1.0, 0.0));
        let first = kernel_laplace(&[0.0, 1.0], 1.0, 2.0, c(0.0, 0.0));
        assert!((first.re - 1.5).abs() < 1e-15);
    }

    #[test]
    fn linear_kernel_elementary() {
        // ∫_1^2 ξ e^{-sξ} dξ = [-(ξ/s + 1/s²) e^{-sξ}]_1^2
        for s in [c(0.7, 3.0), c(12.0, 0.5), c(0.0, 1.0)] {
            let f = |x: f64| -(x / s + 1.0 / (s * s)) * (-s * x).exp();
            let want = f(2.0) - f(1.0);
            let got = kernel_laplace(&[0.0, 1.0], 1.0, 2.0, s);
            assert!((got - want).norm() <= 1e-12 * want.norm());
        }
    }

    #[test]
    fn scalar_uniform_kernel_clears_to_expected_form() {
        let model = DistributedModel {
            a0: vec![vec![0.0]],
            params: vec!["tau".into()],
            discrete: vec![],
            distributed: vec![DistributedTerm {
                matrix: vec![vec![-1.0]],
                lower: 0.0.into(),
                upper: "tau".into(),
                kernel: vec![1.0],
            }],
            lower: None,
        };
        let (cf, report) = model.to_charfun().unwrap();
        assert_eq!(report.clearing_power, 1);
        assert_eq!(report.spurious_zeros_at_origin, 1);
        let want = CharFun::parse("s^2 + 1 - exp(-s*tau)", &["tau"]).unwrap();
        for w in [0.1, 1.0, 4.0] {
            for tau in [0.5, 2.0] {
                let d = cf.eval_f(w, &[tau]).unwrap() - want.eval_f(w, &[tau]).unwrap();
                assert!(d.norm() < 1e-13);
            }
        }
    }

    #[test]
    fn discrete_only_passes_through() {
        let model = DistributedModel {
            a0: vec![vec![0.0]],
            params: vec![],
            discrete: vec![DiscreteTerm {
                matrix: vec![vec![-1.0]],
                delay: 1.3.into(),
            }],
            distributed: vec![],
            lower: None,
        };
        let (cf, report) = model.to_charfun().unwrap();
        assert_eq!(report.clearing_power, 0);
        assert_eq!(cf.m(), 1);
        let s = c(0.0, 0.8);
        let want = s + (-s * 1.3).exp();
        assert!((cf.eval_f(0.8, &[]).unwrap() - want).norm() < 1e-14);
    }

    #[test]
    fn two_state_model_matches_direct_determinant() {
        let model = DistributedModel {
            a0: vec![vec![0.0, 1.0], vec![-2.0, -0.5]],
            params: vec!["h".into()],
            discrete: vec![DiscreteTerm {
                matrix: vec![vec![0.0, 0.0], vec![0.3, 0.0]],
                delay: "h".into(),
            }],
            distributed: vec![DistributedTerm {
                matrix: vec![vec![0.1, 0.0], vec![0.0, -0.4]],
                lower: 0.5.into(),
                upper: "0.5 + h".into(),
                kernel: vec![1.0, -0.5, 0.25],
            }],
            lower: None,
        };
        let (cf, report) = model.to_charfun().unwrap();
        assert_eq!(cf.check_hypotheses().verdict, crate::charfun::Verdict::Pass);
        let d = report.clearing_power as i32;
        for (s, h) in [(c(0.2, 1.5), 0.7), (c(1.0, -3.0), 1.9), (c(0.0, 7.0), 0.2)] {
            let direct = model.characteristic(s, &[h]).unwrap() * s.powi(d);
            let got = cf.eval_at(s, &[h]).unwrap();
            assert!((got - direct).norm() <= 1e-10 * direct.norm(), "{s}: {got} vs {direct}");
        }
    }

    #[test]
    fn rejects_bad_models() {
        let mut model = DistributedModel {
            a0: vec![vec![0.0]],
            params: vec![],
            discrete: vec![],
            distributed: vec![DistributedTerm {
                matrix: vec![vec![1.0]],
                lower: 2.0.into(),
                upper: 1.0.into(),
                kernel: vec![1.0],
            }],
            lower: None,
        };
        assert!(matches!(model.validate(), Err(DistributedError::Limits { .. })));
        model.distributed[0].lower = 0.0.into();
        model.distributed[0].kernel = vec![1.0; 20];
        assert!(matches!(model.validate(), Err(DistributedError::KernelDegree { .. })));
        model.distributed[0].kernel = vec![1.0];
        model.distributed[0].matrix = vec![vec![1.0, 2.0]];
        assert!(matches!(model.validate(), Err(DistributedError::Dimension { .. })));
        model.distributed[0].matrix = vec![vec![1.0]];
        model.distributed[0].upper = "k".into();
        assert!(matches!(model.validate(), Err(DistributedError::Unknown { .. })));
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"a0": [[0]], "params": ["t"],
            "distributed": [{"matrix": [[-1]], "lower": 0, "upper": "t", "kernel": [1]}]}"#;
        let model: DistributedModel = serde_json::from_str(text).unwrap();
        assert_eq!(model.distributed[0].upper, Quantity::Expr("t".into()));
        let back: DistributedModel = serde_json::from_str(&serde_json::to_string(&model).unwrap()).unwrap();
        assert_eq!(back, model);
        assert!(serde_json::from_str::<DistributedModel>(r#"{"a0": [[0]], "extra": 1}"#).is_err());
    }

    #[test]
    fn series_switch_is_continuous() {
        for l in 0..=6usize {
            let g: Vec<f64> = (0..=l).map(|i| if i == l { 1.0 } else { 0.0 }).collect();
            let t = series_threshold(l);
            for phase in [0.0, 0.3, PI / 2.0] {
                let s = Complex64::from_polar(t / 2.0, phase);
                let a = kernel_laplace_series(&g, 0.5, 2.0, s);
                let b = kernel_laplace_closed(&g, 0.5, 2.0, s);
                assert!((a - b).norm() <= 1e-10 * a.norm(), "ℓ={l}: {a} vs {b}");
            }
        }
    }
}
