use serde::Serialize;

use crate::expr::{Expr, Interval};

use super::CharFun;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Pass,
    Warn,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Finding {
    pub term: usize,
    pub issue: String,
}

/// Structural class check: monic retarded quasi-polynomial with delays
/// provably nonnegative and coefficients defined on the parameter domain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub verdict: Verdict,
    pub m: u32,
    pub params: Vec<String>,
    pub findings: Vec<Finding>,
}

pub(super) fn check(cf: &CharFun) -> HypothesisReport {
    let lookup = |name: &str| {
        cf.param_index(name)
            .map(|k| Interval::new(cf.lower_bounds()[k], f64::INFINITY))
    };
    let enclose = |e: &Expr| e.eval_interval(&lookup);
    let mut findings = Vec::new();
    for (term, t) in cf.terms().iter().enumerate() {
        if t.power >= cf.m() {
            findings.push(Finding {
                term,
                issue: format!(
                    "power {} is not below the leading power {} (neutral structure)",
                    t.power,
                    cf.m()
                ),
            });
        }
        match enclose(&t.delay) {
            Ok(iv) if iv.lo >= 0.0 => {}
            Ok(iv) => findings.push(Finding {
                term,
                issue: format!(
                    "delay `{}` is not provably nonnegative (enclosure [{}, {}])",
                    t.delay, iv.lo, iv.hi
                ),
            }),
            Err(e) => findings.push(Finding {
                term,
                issue: format!("delay `{}` may be undefined on the domain: {e}", t.delay),
            }),
        }
        if let Err(e) = enclose(&t.coeff) {
            findings.push(Finding {
                term,
                issue: format!("coefficient `{}` may be undefined on the domain: {e}", t.coeff),
            });
        }
    }
    HypothesisReport {
        verdict: if findings.is_empty() {
            Verdict::Pass
        } else {
            Verdict::Warn
        },
        m: cf.m(),
        params: cf.params().to_vec(),
        findings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn retarded_examples_pass() {
        let cf = CharFun::parse("s^2 + 2*s*exp(-s*t1) + exp(-s*t2)", &["t1", "t2"]).unwrap();
        assert_eq!(cf.check_hypotheses().verdict, Verdict::Pass);
        let cf = CharFun::parse("s^2 + s*k + 1 - exp(-tau*(s+k))", &["tau", "k"]).unwrap();
        let report = cf.check_hypotheses();
        assert_eq!(report.verdict, Verdict::Pass, "{report:?}");
    }

    #[test]
    fn neutral_term_warns() {
        let cf = CharFun::parse("s^2 + 0.5*s^2*exp(-s*a) + 1", &["a"]).unwrap();
        let report = cf.check_hypotheses();
        assert_eq!(report.verdict, Verdict::Warn);
        assert!(report.findings[0].issue.contains("neutral"));
    }

    #[test]
    fn signed_delay_and_singular_coefficient_warn() {
        let cf = CharFun::new(
            1,
            vec!["a".into(), "b".into()],
            vec![
                super::super::QpTerm::parse(0, "1", "a - b").unwrap(),
                super::super::QpTerm::parse(0, "1/a", "b").unwrap(),
            ],
        )
        .unwrap();
        let report = cf.check_hypotheses();
        assert_eq!(report.verdict, Verdict::Warn);
        let terms: Vec<usize> = report.findings.iter().map(|f| f.term).collect();
        assert_eq!(terms, vec![0, 1]);
        // a strictly positive lower bound removes the singularity
        let cf = cf.with_lower_bounds(vec![0.1, 0.0]).unwrap();
        assert_eq!(cf.check_hypotheses().findings.len(), 1);
    }
}
