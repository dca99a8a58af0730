use std::ops;

/// Closed real interval `[lo, hi]`; endpoints may be infinite.
///
/// Rounding is not directed, so enclosures are exact only up to the last ulp.
/// Callers that need a strict bound inflate the result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "inverted interval [{lo}, {hi}]");
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    pub fn contains_zero(&self) -> bool {
        self.lo <= 0.0 && self.hi >= 0.0
    }

    /// Largest absolute value in the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    pub fn checked_div(self, rhs: Interval) -> Option<Interval> {
        if rhs.contains_zero() {
            return None;
        }
        Some(self * Interval::new(1.0 / rhs.hi, 1.0 / rhs.lo))
    }

    pub fn powi(self, n: i32) -> Option<Interval> {
        if n == 0 {
            return Some(Interval::point(1.0));
        }
        if n < 0 {
            return Interval::point(1.0).checked_div(self.powi(-n)?);
        }
        let a = self.lo.powi(n);
        let b = self.hi.powi(n);
        Some(if n % 2 == 1 || self.lo >= 0.0 {
            Interval::new(a, b)
        } else if self.hi <= 0.0 {
            Interval::new(b, a)
        } else {
            Interval::new(0.0, a.max(b))
        })
    }

    pub fn exp(self) -> Interval {
        Interval::new(self.lo.exp(), self.hi.exp())
    }
}

fn mul_endpoint(a: f64, b: f64) -> f64 {
    // 0 * inf is taken as 0: the infinite endpoint is a limit, not a value.
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

impl ops::Add for Interval {
    type Output = Interval;
    fn add(self, rhs: Interval) -> Interval {
        Interval::new(self.lo + rhs.lo, self.hi + rhs.hi)
    }
}

impl ops::Sub for Interval {
    type Output = Interval;
    fn sub(self, rhs: Interval) -> Interval {
        Interval::new(self.lo - rhs.hi, self.hi - rhs.lo)
    }
}

impl ops::Mul for Interval {
    type Output = Interval;
    fn mul(self, rhs: Interval) -> Interval {
        let c = [
            mul_endpoint(self.lo, rhs.lo),
            mul_endpoint(self.lo, rhs.hi),
            mul_endpoint(self.hi, rhs.lo),
            mul_endpoint(self.hi, rhs.hi),
        ];
        let lo = c.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = c.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::new(lo, hi)
    }
}

impl ops::Neg for Interval {
    type Output = Interval;
    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn even_power_straddling_zero() {
        let iv = Interval::new(-2.0, 1.0).powi(2).unwrap();
        assert_eq!(iv, Interval::new(0.0, 4.0));
    }

    #[test]
    fn half_line_products() {
        let pos = Interval::new(0.0, f64::INFINITY);
        let iv = pos * Interval::new(2.0, 3.0);
        assert_eq!(iv, pos);
        let iv = pos * pos;
        assert_eq!(iv, pos);
        assert!((pos - pos).contains_zero());
    }

    #[test]
    fn division_by_interval_containing_zero_fails() {
        assert!(Interval::point(1.0).checked_div(Interval::new(-1.0, 1.0)).is_none());
        let q = Interval::point(1.0).checked_div(Interval::new(2.0, 4.0)).unwrap();
        assert_eq!(q, Interval::new(0.25, 0.5));
    }
}
