use num_complex::Complex64;
use thiserror::Error;

use crate::expr::Expr;

use super::CharFun;

/// Why a characteristic function has no constant-coefficient retarded form.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("term {term}: {reason}")]
pub struct NotRetarded {
    pub term: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DelaySource {
    /// The delay is the parameter with this index.
    Param(usize),
    /// A fixed positive delay.
    Fixed(f64),
}

/// All terms sharing one delay, summed into a polynomial (index = power).
#[derive(Debug, Clone, PartialEq)]
pub struct DelayGroup {
    pub source: DelaySource,
    pub poly: Vec<f64>,
}

/// `s^m + P_0(s) + Σ_i P_i(s) e^{-s τ_i}` with constant polynomial coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct RetardedForm {
    pub m: u32,
    pub base: Vec<f64>,
    pub groups: Vec<DelayGroup>,
}

/// A retarded form restricted to a ray: `f_i(s) = P_i(s) e^{-s τ_i⁰}` with rate `a_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RayPart {
    pub poly: Vec<f64>,
    pub delay0: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RayForm {
    pub m: u32,
    pub base: Vec<f64>,
    pub parts: Vec<RayPart>,
}

/// Horner evaluation of a real polynomial (index = power) at a complex point.
pub fn polyval(poly: &[f64], s: Complex64) -> Complex64 {
    poly.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

fn leading(m: u32, s: Complex64) -> Complex64 {
    s.powu(m)
}

pub(super) fn convert(cf: &CharFun) -> Result<RetardedForm, NotRetarded> {
    let m = cf.m();
    let mut base = vec![0.0; m as usize];
    let mut groups: Vec<DelayGroup> = Vec::new();
    for (term, t) in cf.terms().iter().enumerate() {
        let fail = |reason: &str| NotRetarded {
            term,
            reason: reason.to_string(),
        };
        if t.power >= m {
            return Err(fail("power reaches the leading power"));
        }
        let c = t
            .coeff
            .as_const()
            .ok_or_else(|| fail("coefficient depends on parameters"))?;
        let source = match &t.delay {
            Expr::Var(name) => DelaySource::Param(
                cf.param_index(name)
                    .ok_or_else(|| fail("delay names an unknown parameter"))?,
            ),
            Expr::Const(d) if *d == 0.0 => {
                base[t.power as usize] += c;
                continue;
            }
            Expr::Const(d) if *d > 0.0 && d.is_finite() => DelaySource::Fixed(*d),
            _ => return Err(fail("delay is not a single parameter or a fixed value")),
        };
        let slot = match groups.iter().position(|g| g.source == source) {
            Some(i) => i,
            None => {
                groups.push(DelayGroup {
                    source,
                    poly: vec![0.0; m as usize],
                });
                groups.len() - 1
            }
        };
        groups[slot].poly[t.power as usize] += c;
    }
    // parameter groups first, in parameter order, then fixed delays
    groups.sort_by(|a, b| match (a.source, b.source) {
        (DelaySource::Param(x), DelaySource::Param(y)) => x.cmp(&y),
        (DelaySource::Param(_), DelaySource::Fixed(_)) => std::cmp::Ordering::Less,
        (DelaySource::Fixed(_), DelaySource::Param(_)) => std::cmp::Ordering::Greater,
        (DelaySource::Fixed(x), DelaySource::Fixed(y)) => x.total_cmp(&y),
    });
    Ok(RetardedForm { m, base, groups })
}

impl RetardedForm {
    fn delay_at(&self, source: DelaySource, tau: &[f64]) -> f64 {
        match source {
            DelaySource::Param(k) => tau[k],
            DelaySource::Fixed(d) => d,
        }
    }

    pub fn eval(&self, s: Complex64, tau: &[f64]) -> Complex64 {
        let mut acc = leading(self.m, s) + polyval(&self.base, s);
        for g in &self.groups {
            acc += polyval(&g.poly, s) * (-s * self.delay_at(g.source, tau)).exp();
        }
        acc
    }

    /// Restricts to the ray `τ⁰ + θ·dir`.
    pub fn along_ray(&self, tau0: &[f64], dir: &[f64]) -> RayForm {
        RayForm {
            m: self.m,
            base: self.base.clone(),
            parts: self
                .groups
                .iter()
                .map(|g| RayPart {
                    poly: g.poly.clone(),
                    delay0: self.delay_at(g.source, tau0),
                    rate: match g.source {
                        DelaySource::Param(k) => dir[k],
                        DelaySource::Fixed(_) => 0.0,
                    },
                })
                .collect(),
        }
    }

    /// Per-parameter magnitudes `ω |P_k(jω)|` (zero for parameters without a delay group).
    pub fn gradient_components(&self, omega: f64, n_params: usize) -> Vec<f64> {
        let s = Complex64::new(0.0, omega);
        let mut out = vec![0.0; n_params];
        for g in &self.groups {
            if let DelaySource::Param(k) = g.source {
                out[k] = omega * polyval(&g.poly, s).norm();
            }
        }
        out
    }

    /// Per-power sums of |coefficients| (index = power, length m).
    pub fn coefficient_bounds(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.base.iter().map(|c| c.abs()).collect();
        for g in &self.groups {
            for (o, c) in out.iter_mut().zip(&g.poly) {
                *o += c.abs();
            }
        }
        out
    }

    /// `|c_{k,i}|` for each parameter group `k`; used to bound `ω|P_k(jω)|`.
    pub fn param_polys(&self, n_params: usize) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.m as usize]; n_params];
        for g in &self.groups {
            if let DelaySource::Param(k) = g.source {
                out[k] = g.poly.iter().map(|c| c.abs()).collect();
            }
        }
        out
    }
}

impl RayForm {
    /// `f(jω, τ⁰ + θ·dir)`.
    pub fn eval(&self, omega: f64, theta: f64) -> Complex64 {
        let s = Complex64::new(0.0, omega);
        let mut acc = leading(self.m, s) + polyval(&self.base, s);
        for p in &self.parts {
            acc += polyval(&p.poly, s) * Complex64::cis(-omega * (p.delay0 + theta * p.rate));
        }
        acc
    }

    /// `Σ_i ω |a_i f_i(jω)|`.
    pub fn denominator(&self, omega: f64) -> f64 {
        let s = Complex64::new(0.0, omega);
        self.parts
            .iter()
            .filter(|p| p.rate != 0.0)
            .map(|p| omega * p.rate.abs() * polyval(&p.poly, s).norm())
            .sum()
    }

    pub fn is_insensitive(&self) -> bool {
        self.parts
            .iter()
            .all(|p| p.rate == 0.0 || p.poly.iter().all(|&c| c == 0.0))
    }

    /// Per-power sums of |coefficients| (index = power, length m).
    pub fn coefficient_bounds(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.base.iter().map(|c| c.abs()).collect();
        for p in &self.parts {
            for (o, c) in out.iter_mut().zip(&p.poly) {
                *o += c.abs();
            }
        }
        out
    }

    /// Coefficients of a polynomial in ω dominating the denominator (index = power of ω).
    pub fn denominator_bound(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.m as usize + 1];
        for p in &self.parts {
            for (i, c) in p.poly.iter().enumerate() {
                out[i + 1] += p.rate.abs() * c.abs();
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example7() -> CharFun {
        CharFun::parse("s^2 + 2*s*exp(-s*t1) + exp(-s*t2)", &["t1", "t2"]).unwrap()
    }

    #[test]
    fn example7_ray_parts() {
        let rf = example7().to_retarded().unwrap();
        assert_eq!(rf.m, 2);
        let ray = rf.along_ray(&[0.0, 0.0], &[1.0, 0.0]);
        assert_eq!(ray.parts.len(), 2);
        assert_eq!(ray.parts[0].poly, vec![0.0, 2.0]);
        assert_eq!(ray.parts[0].rate, 1.0);
        assert_eq!(ray.parts[1].poly, vec![1.0, 0.0]);
        assert_eq!(ray.parts[1].rate, 0.0);
        // (1 + ω²) / (2ω²)
        for w in [0.5, 1.0, 3.0] {
            assert!((ray.eval(w, 0.0).norm() - (1.0 + w * w)).abs() < 1e-12);
            assert!((ray.denominator(w) - 2.0 * w * w).abs() < 1e-12);
        }
    }

    #[test]
    fn parameter_dependent_coefficient_is_not_retarded() {
        let cf = CharFun::parse(
            "s^2 + s*(k + exp(-s*t1)) + k*exp(-s*t1) + 1 - exp(-t2*(k+s))",
            &["t1", "t2", "k"],
        )
        .unwrap();
        assert!(cf.to_retarded().is_err());
    }

    #[test]
    fn polynomial_has_no_delay_groups() {
        let rf = CharFun::parse("s^3 + 2*s + 1", &[]).unwrap().to_retarded().unwrap();
        assert!(rf.groups.is_empty());
        assert_eq!(rf.base, vec![1.0, 2.0, 0.0]);
    }

    #[test]
    fn fixed_delays_have_zero_rate() {
        let cf = CharFun::parse("s + 0.5*exp(-2*s) + exp(-s*a)", &["a"]).unwrap();
        let rf = cf.to_retarded().unwrap();
        let ray = rf.along_ray(&[1.0], &[1.0]);
        assert_eq!(ray.parts[0].rate, 1.0);
        assert_eq!(ray.parts[1].rate, 0.0);
        assert_eq!(ray.parts[1].delay0, 2.0);
    }
}
