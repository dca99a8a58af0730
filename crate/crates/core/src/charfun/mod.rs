//! Characteristic functions of retarded quasi-polynomial type,
//!
//! ```text
//! f(s, τ) = s^m + Σ_t s^{i_t} · α_t(τ) · exp(-s · β_t(τ))
//! ```
//!
//! with parameter-only coefficient expressions `α_t` and delay expressions
//! `β_t`. Numeric work goes through a [`Snapshot`], which freezes the
//! coefficients, delays and their parameter gradients at one point so that
//! frequency sweeps only pay for the complex exponentials.

mod hypotheses;
mod normalize;
mod retarded;

use std::fmt;
use std::ops::Deref;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{self, EvalError, Expr, Interval, ParseError, LAPLACE};

pub use hypotheses::{Finding, HypothesisReport, Verdict};
pub use retarded::{DelayGroup, DelaySource, NotRetarded, RayForm, RayPart, RetardedForm};

#[derive(Debug, Error)]
pub enum CharFunError {
    #[error("leading power m must be at least 1")]
    ZeroOrder,
    #[error("term {index}: power {power} exceeds the leading power {m}")]
    PowerAboveLeading { index: usize, power: u32, m: u32 },
    #[error("term {index}: {what} depends on the Laplace variable")]
    LaplaceInCoefficient { index: usize, what: &'static str },
    #[error("term {index}: unknown parameter `{name}`")]
    UnknownParam { index: usize, name: String },
    #[error("parameter `{0}` is declared twice")]
    DuplicateParam(String),
    #[error("`s` is reserved for the Laplace variable and cannot be a parameter")]
    ReservedParam,
    #[error("point has {got} entries but the system has {expected} parameters")]
    Dimension { expected: usize, got: usize },
    #[error("parameter `{name}` = {value} is not finite")]
    NonFinite { name: String, value: f64 },
    #[error("parameter `{name}` = {value} is below its lower bound {lower}")]
    OutOfDomain { name: String, value: f64, lower: f64 },
    #[error("term {index}: delay evaluates to {value} < 0")]
    NegativeDelay { index: usize, value: f64 },
    #[error("term {index}: {source}")]
    Eval { index: usize, source: EvalError },
    #[error("interval bound of term {index} is unbounded")]
    UnboundedBox { index: usize },
    #[error("cannot parse `{text}`: {source}")]
    Parse { text: String, source: ParseError },
    #[error("not a quasi-polynomial in s: {0}")]
    Structure(String),
}

/// A point in parameter space, aligned with [`CharFun::params`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParamPoint(pub Vec<f64>);

impl ParamPoint {
    pub fn new(values: Vec<f64>) -> Self {
        ParamPoint(values)
    }

    pub fn offset(&self, dir: &[f64], t: f64) -> ParamPoint {
        ParamPoint(self.0.iter().zip(dir).map(|(x, d)| x + t * d).collect())
    }
}

impl Deref for ParamPoint {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for ParamPoint {
    fn from(v: Vec<f64>) -> Self {
        ParamPoint(v)
    }
}

impl From<&[f64]> for ParamPoint {
    fn from(v: &[f64]) -> Self {
        ParamPoint(v.to_vec())
    }
}

/// One term `s^power · coeff(τ) · exp(-s · delay(τ))`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpTerm {
    pub power: u32,
    pub coeff: Expr,
    pub delay: Expr,
}

impl QpTerm {
    pub fn new(power: u32, coeff: Expr, delay: Expr) -> Self {
        QpTerm { power, coeff, delay }
    }

    pub fn parse(power: u32, coeff: &str, delay: &str) -> Result<Self, CharFunError> {
        Ok(QpTerm {
            power,
            coeff: parse_text(coeff)?,
            delay: parse_text(delay)?,
        })
    }
}

fn parse_text(text: &str) -> Result<Expr, CharFunError> {
    expr::parse(text).map_err(|source| CharFunError::Parse {
        text: text.to_string(),
        source,
    })
}

/// JSON system descriptor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Descriptor {
    pub m: u32,
    pub params: Vec<String>,
    pub terms: Vec<TermDescriptor>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermDescriptor {
    pub power: u32,
    pub coeff: String,
    pub delay: String,
}

/// Parameter-space curve `θ ↦ τ(θ)` with its tangent.
pub trait ParamPath: Send + Sync {
    fn point(&self, theta: f64) -> Vec<f64>;
    fn tangent(&self, theta: f64) -> Vec<f64>;
}

/// Straight ray `τ(θ) = origin + θ · dir`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ray {
    pub origin: Vec<f64>,
    pub dir: Vec<f64>,
}

impl Ray {
    pub fn new(origin: Vec<f64>, dir: Vec<f64>) -> Self {
        Ray { origin, dir }
    }
}

impl ParamPath for Ray {
    fn point(&self, theta: f64) -> Vec<f64> {
        self.origin
            .iter()
            .zip(&self.dir)
            .map(|(x, d)| x + theta * d)
            .collect()
    }

    fn tangent(&self, _theta: f64) -> Vec<f64> {
        self.dir.clone()
    }
}

/// Smooth curve given by two closures.
pub struct Curve<P, T> {
    point: P,
    tangent: T,
}

impl<P, T> Curve<P, T>
where
    P: Fn(f64) -> Vec<f64> + Send + Sync,
    T: Fn(f64) -> Vec<f64> + Send + Sync,
{
    pub fn new(point: P, tangent: T) -> Self {
        Curve { point, tangent }
    }
}

impl<P, T> ParamPath for Curve<P, T>
where
    P: Fn(f64) -> Vec<f64> + Send + Sync,
    T: Fn(f64) -> Vec<f64> + Send + Sync,
{
    fn point(&self, theta: f64) -> Vec<f64> {
        (self.point)(theta)
    }

    fn tangent(&self, theta: f64) -> Vec<f64> {
        (self.tangent)(theta)
    }
}

/// Quasi-polynomial characteristic function with a fixed parameter list.
#[derive(Debug, Clone)]
pub struct CharFun {
    m: u32,
    params: Vec<String>,
    terms: Vec<QpTerm>,
    lower: Vec<f64>,
    dcoeff: Vec<Vec<Expr>>,
    ddelay: Vec<Vec<Expr>>,
    // terms sharing a structurally identical delay expression
    groups: Vec<usize>,
    group_count: usize,
}

impl CharFun {
    pub fn new(m: u32, params: Vec<String>, terms: Vec<QpTerm>) -> Result<Self, CharFunError> {
        if m == 0 {
            return Err(CharFunError::ZeroOrder);
        }
        for (i, p) in params.iter().enumerate() {
            if p == LAPLACE {
                return Err(CharFunError::ReservedParam);
            }
            if params[..i].contains(p) {
                return Err(CharFunError::DuplicateParam(p.clone()));
            }
        }
        for (index, t) in terms.iter().enumerate() {
            if t.power > m {
                return Err(CharFunError::PowerAboveLeading {
                    index,
                    power: t.power,
                    m,
                });
            }
            for (what, e) in [("coefficient", &t.coeff), ("delay", &t.delay)] {
                if e.depends_on_laplace() {
                    return Err(CharFunError::LaplaceInCoefficient { index, what });
                }
                if let Some(name) = e.params().into_iter().find(|n| !params.contains(n)) {
                    return Err(CharFunError::UnknownParam { index, name });
                }
            }
        }
        let dcoeff = terms
            .iter()
            .map(|t| params.iter().map(|p| t.coeff.diff(p)).collect())
            .collect();
        let ddelay = terms
            .iter()
            .map(|t| params.iter().map(|p| t.delay.diff(p)).collect())
            .collect();
        let mut reps: Vec<&Expr> = Vec::new();
        let groups = terms
            .iter()
            .map(|t| match reps.iter().position(|d| **d == t.delay) {
                Some(g) => g,
                None => {
                    reps.push(&t.delay);
                    reps.len() - 1
                }
            })
            .collect();
        let group_count = reps.len();
        let n = params.len();
        Ok(CharFun {
            m,
            params,
            terms,
            lower: vec![0.0; n],
            dcoeff,
            ddelay,
            groups,
            group_count,
        })
    }

    /// Builds a characteristic function from a full expression in `s`,
    /// e.g. `s^2 + 2*s*exp(-s*t1) + exp(-s*t2)`.
    pub fn from_expr(e: &Expr, params: Vec<String>) -> Result<Self, CharFunError> {
        let (m, terms) = normalize::quasi_polynomial(e)?;
        CharFun::new(m, params, terms)
    }

    pub fn parse(text: &str, params: &[&str]) -> Result<Self, CharFunError> {
        let e = parse_text(text)?;
        CharFun::from_expr(&e, params.iter().map(|p| p.to_string()).collect())
    }

    pub fn from_descriptor(d: &Descriptor) -> Result<Self, CharFunError> {
        let terms = d
            .terms
            .iter()
            .map(|t| QpTerm::parse(t.power, &t.coeff, &t.delay))
            .collect::<Result<Vec<_>, _>>()?;
        let cf = CharFun::new(d.m, d.params.clone(), terms)?;
        match &d.lower {
            Some(lower) => cf.with_lower_bounds(lower.clone()),
            None => Ok(cf),
        }
    }

    pub fn to_descriptor(&self) -> Descriptor {
        Descriptor {
            m: self.m,
            params: self.params.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| TermDescriptor {
                    power: t.power,
                    coeff: t.coeff.to_string(),
                    delay: t.delay.to_string(),
                })
                .collect(),
            lower: if self.lower.iter().all(|&l| l == 0.0) {
                None
            } else {
                Some(self.lower.clone())
            },
        }
    }

    /// Restricts the parameter domain to `τ_k ≥ lower_k`.
    pub fn with_lower_bounds(mut self, lower: Vec<f64>) -> Result<Self, CharFunError> {
        if lower.len() != self.params.len() {
            return Err(CharFunError::Dimension {
                expected: self.params.len(),
                got: lower.len(),
            });
        }
        for (name, &l) in self.params.iter().zip(&lower) {
            if !l.is_finite() || l < 0.0 {
                return Err(CharFunError::OutOfDomain {
                    name: name.clone(),
                    value: l,
                    lower: 0.0,
                });
            }
        }
        self.lower = lower;
        Ok(self)
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn params(&self) -> &[String] {
        &self.params
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn terms(&self) -> &[QpTerm] {
        &self.terms
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p == name)
    }

    /// Largest delay group index plus one.
    pub fn group_count(&self) -> usize {
        self.group_count
    }

    pub fn check_point(&self, tau: &[f64]) -> Result<(), CharFunError> {
        if tau.len() != self.params.len() {
            return Err(CharFunError::Dimension {
                expected: self.params.len(),
                got: tau.len(),
            });
        }
        for ((name, &value), &lower) in self.params.iter().zip(tau).zip(&self.lower) {
            if !value.is_finite() {
                return Err(CharFunError::NonFinite {
                    name: name.clone(),
                    value,
                });
            }
            if value < lower {
                return Err(CharFunError::OutOfDomain {
                    name: name.clone(),
                    value,
                    lower,
                });
            }
        }
        Ok(())
    }

    /// Projects a point onto the admissible domain.
    pub fn clip(&self, tau: &mut [f64]) {
        for (x, &l) in tau.iter_mut().zip(&self.lower) {
            if *x < l {
                *x = l;
            }
        }
    }

    pub fn in_domain(&self, tau: &[f64]) -> bool {
        tau.len() == self.lower.len() && tau.iter().zip(&self.lower).all(|(x, l)| x >= l)
    }

    /// Freezes coefficients, delays and their gradients at `tau`.
    pub fn snapshot(&self, tau: &[f64]) -> Result<Snapshot, CharFunError> {
        self.check_point(tau)?;
        let lookup = |name: &str| self.param_index(name).map(|k| tau[k]);
        let n = self.params.len();
        let mut terms = Vec::with_capacity(self.terms.len());
        for (index, t) in self.terms.iter().enumerate() {
            let eval = |e: &Expr| {
                e.eval_real(&lookup)
                    .map_err(|source| CharFunError::Eval { index, source })
            };
            let coeff = eval(&t.coeff)?;
            let delay = eval(&t.delay)?;
            if delay < 0.0 {
                return Err(CharFunError::NegativeDelay {
                    index,
                    value: delay,
                });
            }
            let mut dcoeff = Vec::with_capacity(n);
            let mut ddelay = Vec::with_capacity(n);
            for k in 0..n {
                dcoeff.push(eval(&self.dcoeff[index][k])?);
                ddelay.push(eval(&self.ddelay[index][k])?);
            }
            terms.push(NumTerm {
                power: t.power,
                coeff,
                delay,
                dcoeff,
                ddelay,
                group: self.groups[index],
            });
        }
        Ok(Snapshot {
            m: self.m,
            n,
            groups: self.group_count,
            terms,
        })
    }

    /// `f(jω, τ)`.
    pub fn eval_f(&self, omega: f64, tau: &[f64]) -> Result<Complex64, CharFunError> {
        Ok(self.snapshot(tau)?.eval(Complex64::new(0.0, omega)))
    }

    /// `f(s, τ)` at an arbitrary complex `s`.
    pub fn eval_at(&self, s: Complex64, tau: &[f64]) -> Result<Complex64, CharFunError> {
        Ok(self.snapshot(tau)?.eval(s))
    }

    /// `∇_τ f(jω, τ)`.
    pub fn grad_f(&self, omega: f64, tau: &[f64]) -> Result<Vec<Complex64>, CharFunError> {
        Ok(self.snapshot(tau)?.grad(Complex64::new(0.0, omega)))
    }

    /// `⟨∇f(jω, τ0 + θ·dir), dir⟩`.
    pub fn directional_derivative(
        &self,
        omega: f64,
        tau0: &[f64],
        dir: &[f64],
        theta: f64,
    ) -> Result<Complex64, CharFunError> {
        let tau: Vec<f64> = tau0.iter().zip(dir).map(|(x, d)| x + theta * d).collect();
        Ok(self
            .snapshot(&tau)?
            .directional(Complex64::new(0.0, omega), dir))
    }

    /// `⟨∇f(jω, τ(θ)), τ'(θ)⟩` along a curve.
    pub fn path_derivative(
        &self,
        omega: f64,
        path: &dyn ParamPath,
        theta: f64,
    ) -> Result<Complex64, CharFunError> {
        let tau = path.point(theta);
        let tangent = path.tangent(theta);
        Ok(self
            .snapshot(&tau)?
            .directional(Complex64::new(0.0, omega), &tangent))
    }

    /// Interval magnitudes of every term's coefficient and gradients over
    /// the box `[lo, hi]`.
    pub fn term_bounds(&self, lo: &[f64], hi: &[f64]) -> Result<Vec<TermBound>, CharFunError> {
        let lookup = |name: &str| {
            self.param_index(name)
                .map(|k| Interval::new(lo[k].min(hi[k]), lo[k].max(hi[k])))
        };
        let mut out = Vec::with_capacity(self.terms.len());
        for (index, t) in self.terms.iter().enumerate() {
            let mag = |e: &Expr| -> Result<f64, CharFunError> {
                let iv = e
                    .eval_interval(&lookup)
                    .map_err(|source| CharFunError::Eval { index, source })?;
                if !iv.is_bounded() {
                    return Err(CharFunError::UnboundedBox { index });
                }
                // one ulp of slack for undirected rounding
                Ok(iv.mag() * (1.0 + 4.0 * f64::EPSILON))
            };
            out.push(TermBound {
                power: t.power,
                coeff: mag(&t.coeff)?,
                dcoeff: self.dcoeff[index].iter().map(&mag).collect::<Result<_, _>>()?,
                ddelay: self.ddelay[index].iter().map(&mag).collect::<Result<_, _>>()?,
            });
        }
        Ok(out)
    }

    pub fn to_retarded(&self) -> Result<RetardedForm, NotRetarded> {
        retarded::convert(self)
    }

    pub fn check_hypotheses(&self) -> HypothesisReport {
        hypotheses::check(self)
    }
}

impl fmt::Display for CharFun {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s^{}", self.m)?;
        for t in &self.terms {
            write!(f, " + s^{}*({})", t.power, t.coeff)?;
            if !t.delay.is_zero() {
                write!(f, "*exp(-s*({}))", t.delay)?;
            }
        }
        Ok(())
    }
}

/// Magnitude bounds of one term over a parameter box.
#[derive(Debug, Clone, PartialEq)]
pub struct TermBound {
    pub power: u32,
    pub coeff: f64,
    pub dcoeff: Vec<f64>,
    pub ddelay: Vec<f64>,
}

#[derive(Debug, Clone)]
struct NumTerm {
    power: u32,
    coeff: f64,
    delay: f64,
    dcoeff: Vec<f64>,
    ddelay: Vec<f64>,
    group: usize,
}

/// Numeric characteristic function frozen at one parameter point.
#[derive(Debug, Clone)]
pub struct Snapshot {
    m: u32,
    n: usize,
    groups: usize,
    terms: Vec<NumTerm>,
}

fn powers(s: Complex64, m: u32) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(m as usize + 2);
    let mut acc = Complex64::new(1.0, 0.0);
    for _ in 0..=m + 1 {
        out.push(acc);
        acc *= s;
    }
    out
}

#[inline]
fn shift(s: Complex64, delay: f64) -> Complex64 {
    if delay == 0.0 {
        Complex64::new(1.0, 0.0)
    } else if s.re == 0.0 {
        Complex64::cis(-s.im * delay)
    } else {
        (-s * delay).exp()
    }
}

impl Snapshot {
    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn n_params(&self) -> usize {
        self.n
    }

    /// `(power, coefficient, delay)` of every term.
    pub fn numeric_terms(&self) -> impl Iterator<Item = (u32, f64, f64)> + '_ {
        self.terms.iter().map(|t| (t.power, t.coeff, t.delay))
    }

    pub fn max_delay(&self) -> f64 {
        self.terms.iter().map(|t| t.delay).fold(0.0, f64::max)
    }

    /// Sum of |coefficients| per power, index = power.
    pub fn coefficient_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.m as usize + 1];
        for t in &self.terms {
            out[t.power as usize] += t.coeff.abs();
        }
        out
    }

    pub fn eval(&self, s: Complex64) -> Complex64 {
        let pw = powers(s, self.m);
        let mut acc = pw[self.m as usize];
        for t in &self.terms {
            if t.coeff != 0.0 {
                acc += pw[t.power as usize] * t.coeff * shift(s, t.delay);
            }
        }
        acc
    }

    pub fn grad(&self, s: Complex64) -> Vec<Complex64> {
        let pw = powers(s, self.m);
        let mut g = vec![Complex64::new(0.0, 0.0); self.n];
        for t in &self.terms {
            let base = pw[t.power as usize] * shift(s, t.delay);
            for (k, gk) in g.iter_mut().enumerate() {
                let c = Complex64::new(t.dcoeff[k], 0.0) - s * (t.coeff * t.ddelay[k]);
                if c != Complex64::new(0.0, 0.0) {
                    *gk += base * c;
                }
            }
        }
        g
    }

    pub fn directional(&self, s: Complex64, dir: &[f64]) -> Complex64 {
        let pw = powers(s, self.m);
        let mut acc = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            let da: f64 = t.dcoeff.iter().zip(dir).map(|(a, d)| a * d).sum();
            let db: f64 = t.ddelay.iter().zip(dir).map(|(a, d)| a * d).sum();
            let c = Complex64::new(da, 0.0) - s * (t.coeff * db);
            if c != Complex64::new(0.0, 0.0) {
                acc += pw[t.power as usize] * shift(s, t.delay) * c;
            }
        }
        acc
    }

    /// Upper bound on `|⟨∇f(s), dir⟩|` obtained by applying the triangle
    /// inequality across delay groups only, so no delay phase enters.
    pub fn directional_group_bound(&self, s: Complex64, dir: &[f64]) -> f64 {
        let pw = powers(s, self.m);
        let mut sums = vec![Complex64::new(0.0, 0.0); self.groups];
        let mut damp = vec![0.0f64; self.groups];
        for t in &self.terms {
            let da: f64 = t.dcoeff.iter().zip(dir).map(|(a, d)| a * d).sum();
            let db: f64 = t.ddelay.iter().zip(dir).map(|(a, d)| a * d).sum();
            let c = Complex64::new(da, 0.0) - s * (t.coeff * db);
            sums[t.group] += pw[t.power as usize] * c;
            damp[t.group] = (-s.re * t.delay).exp();
        }
        sums.iter().zip(&damp).map(|(z, d)| z.norm() * d).sum()
    }

    /// `|⟨∇f(jω), dir⟩|` and its group bound from one pass over the terms.
    pub fn directional_pair(&self, omega: f64, dir: &[f64], scratch: &mut Vec<Complex64>) -> (f64, f64) {
        let s = Complex64::new(0.0, omega);
        scratch.clear();
        scratch.resize(self.groups, Complex64::new(0.0, 0.0));
        let mut total = Complex64::new(0.0, 0.0);
        for t in &self.terms {
            let da: f64 = t.dcoeff.iter().zip(dir).map(|(a, d)| a * d).sum();
            let db: f64 = t.ddelay.iter().zip(dir).map(|(a, d)| a * d).sum();
            if da == 0.0 && (db == 0.0 || t.coeff == 0.0) {
                continue;
            }
            let c = s.powu(t.power) * (Complex64::new(da, 0.0) - s * (t.coeff * db));
            scratch[t.group] += c;
            total += c * shift(s, t.delay);
        }
        (total.norm(), scratch.iter().map(|z| z.norm()).sum())
    }

    /// Per-parameter group bounds on `|∂f/∂τ_k(s)|`.
    pub fn gradient_group_bounds(&self, s: Complex64) -> Vec<f64> {
        let pw = powers(s, self.m);
        let mut out = vec![0.0; self.n];
        let mut sums = vec![Complex64::new(0.0, 0.0); self.groups];
        let mut damp = vec![0.0f64; self.groups];
        for (k, slot) in out.iter_mut().enumerate() {
            sums.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
            for t in &self.terms {
                let c = Complex64::new(t.dcoeff[k], 0.0) - s * (t.coeff * t.ddelay[k]);
                sums[t.group] += pw[t.power as usize] * c;
                damp[t.group] = (-s.re * t.delay).exp();
            }
            *slot = sums.iter().zip(&damp).map(|(z, d)| z.norm() * d).sum();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn example7() -> CharFun {
        CharFun::parse("s^2 + 2*s*exp(-s*t1) + exp(-s*t2)", &["t1", "t2"]).unwrap()
    }

    fn example5() -> CharFun {
        CharFun::parse(
            "s^2 + s*(k + exp(-s*t1)) + k*exp(-s*t1) + 1 - exp(-t2*(k+s))",
            &["t1", "t2", "k"],
        )
        .unwrap()
    }

    fn example12() -> CharFun {
        CharFun::parse("s^2 + s*k + 1 - exp(-tau*(s+k))", &["tau", "k"]).unwrap()
    }

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() <= tol * (1.0 + b.norm())
    }

    #[test]
    fn example7_at_zero_frequency() {
        let cf = example7();
        for tau in [[0.0, 0.0], [0.3, 1.7], [2.0, 5.0]] {
            assert_eq!(cf.eval_f(0.0, &tau).unwrap(), Complex64::new(1.0, 0.0));
        }
    }

    #[test]
    fn example7_zero_delays() {
        let v = example7().eval_f(1.0, &[0.0, 0.0]).unwrap();
        assert!(close(v, Complex64::new(0.0, 2.0), 1e-15), "{v}");
    }

    #[test]
    fn example12_closed_form_at_origin() {
        let v = example12().eval_f(0.0, &[1.0, 1.0]).unwrap();
        assert!((v.re - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        assert!((v.re - 0.632_121).abs() < 1e-6);
    }

    #[test]
    fn example7_gradient_at_zero_delays() {
        let g = example7().grad_f(1.0, &[0.0, 0.0]).unwrap();
        assert!(close(g[0], Complex64::new(2.0, 0.0), 1e-15), "{}", g[0]);
        assert!(close(g[1], Complex64::new(0.0, -1.0), 1e-15), "{}", g[1]);
    }

    #[test]
    fn unused_parameter_has_zero_gradient() {
        let cf = CharFun::parse("s^2 + 2*s*exp(-s*t1) + exp(-s*t2)", &["t1", "t2", "unused"]).unwrap();
        let g = cf.grad_f(1.3, &[0.2, 0.7, 4.0]).unwrap();
        assert_eq!(g[2], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn directional_derivative_matches_gradient_components() {
        let cf = example7();
        let d = cf.directional_derivative(1.0, &[0.0, 0.0], &[1.0, 0.0], 0.0).unwrap();
        assert!(close(d, Complex64::new(2.0, 0.0), 1e-15));
        let tau = [0.4, 1.1];
        let g = cf.grad_f(2.3, &tau).unwrap();
        let d = cf.directional_derivative(2.3, &tau, &[0.0, 1.0], 0.0).unwrap();
        assert!(close(d, g[1], 1e-15));
    }

    #[test]
    fn curve_derivative_on_a_ray_matches_directional() {
        let cf = example7();
        let ray = Ray::new(vec![0.1, 0.2], vec![0.6, 0.8]);
        let a = cf.path_derivative(1.7, &ray, 0.9).unwrap();
        let b = cf.directional_derivative(1.7, &[0.1, 0.2], &[0.6, 0.8], 0.9).unwrap();
        assert!(close(a, b, 1e-15));
    }

    #[test]
    fn example5_gradient_matches_finite_differences() {
        let cf = example5();
        let tau = [0.37, 6.2, 0.41];
        for omega in [0.0, 0.2, 1.0, 3.5] {
            let g = cf.grad_f(omega, &tau).unwrap();
            for k in 0..3 {
                let h = 1e-6 * tau[k].abs().max(1.0);
                let mut up = tau;
                let mut dn = tau;
                up[k] += h;
                dn[k] -= h;
                let fd = (cf.eval_f(omega, &up).unwrap() - cf.eval_f(omega, &dn).unwrap()) / (2.0 * h);
                assert!(
                    (g[k] - fd).norm() <= 1e-6 * (1.0 + fd.norm()),
                    "k={k} ω={omega}: {} vs {fd}",
                    g[k]
                );
            }
        }
    }

    #[test]
    fn negative_delay_is_an_error() {
        let cf = CharFun::new(
            1,
            vec!["a".into(), "b".into()],
            vec![QpTerm::parse(0, "1", "a - b").unwrap()],
        )
        .unwrap();
        assert!(cf.eval_f(1.0, &[2.0, 1.0]).is_ok());
        assert!(matches!(
            cf.eval_f(1.0, &[1.0, 2.0]),
            Err(CharFunError::NegativeDelay { index: 0, .. })
        ));
    }

    #[test]
    fn domain_and_dimension_are_checked() {
        let cf = example7();
        assert!(matches!(cf.eval_f(1.0, &[0.0]), Err(CharFunError::Dimension { .. })));
        assert!(matches!(cf.eval_f(1.0, &[-0.1, 0.0]), Err(CharFunError::OutOfDomain { .. })));
        let cf = cf.with_lower_bounds(vec![0.5, 0.0]).unwrap();
        assert!(matches!(cf.eval_f(1.0, &[0.4, 0.0]), Err(CharFunError::OutOfDomain { .. })));
    }

    #[test]
    fn descriptor_round_trip_preserves_values() {
        let cf = example5();
        let json = serde_json::to_string(&cf.to_descriptor()).unwrap();
        let back = CharFun::from_descriptor(&serde_json::from_str(&json).unwrap()).unwrap();
        let tau = [0.25, 8.0, 0.003];
        for omega in [0.0, 0.7, 4.0] {
            let a = cf.eval_f(omega, &tau).unwrap();
            let b = back.eval_f(omega, &tau).unwrap();
            assert!(close(a, b, 1e-15));
        }
    }

    #[test]
    fn rejects_laplace_in_coefficients_and_unknown_params() {
        let bad = CharFun::new(2, vec!["t".into()], vec![QpTerm::parse(0, "s", "t").unwrap()]);
        assert!(matches!(bad, Err(CharFunError::LaplaceInCoefficient { .. })));
        let bad = CharFun::new(2, vec!["t".into()], vec![QpTerm::parse(0, "1", "u").unwrap()]);
        assert!(matches!(bad, Err(CharFunError::UnknownParam { .. })));
        let bad = CharFun::new(2, vec!["s".into()], vec![]);
        assert!(matches!(bad, Err(CharFunError::ReservedParam)));
    }

    #[test]
    fn group_bound_dominates_directional_derivative() {
        let cf = example5();
        let snap = cf.snapshot(&[0.25, 8.0, 0.003]).unwrap();
        let dir = [0.6, 0.0, 0.8];
        for k in 0..200 {
            let s = Complex64::new(0.0, k as f64 * 0.05);
            let d = snap.directional(s, &dir).norm();
            let b = snap.directional_group_bound(s, &dir);
            assert!(d <= b * (1.0 + 1e-12) + 1e-15, "{d} > {b}");
            let g = snap.grad(s);
            let gb = snap.gradient_group_bounds(s);
            for (x, y) in g.iter().zip(&gb) {
                assert!(x.norm() <= y * (1.0 + 1e-12) + 1e-15);
            }
        }
    }
}
