use crate::expr::{Expr, LAPLACE};

use super::{CharFunError, QpTerm};

#[derive(Debug, Clone)]
struct Mono {
    power: i32,
    coeff: Expr,
    delay: Expr,
}

impl Mono {
    fn constant(coeff: Expr) -> Mono {
        Mono {
            power: 0,
            coeff,
            delay: Expr::zero(),
        }
    }

    fn times(&self, other: &Mono) -> Mono {
        Mono {
            power: self.power + other.power,
            coeff: Expr::mul(self.coeff.clone(), other.coeff.clone()),
            delay: Expr::add(self.delay.clone(), other.delay.clone()),
        }
    }

    fn inverse(&self) -> Mono {
        Mono {
            power: -self.power,
            coeff: Expr::div(Expr::one(), self.coeff.clone()),
            delay: Expr::neg(self.delay.clone()),
        }
    }
}

fn structure(msg: impl Into<String>) -> CharFunError {
    CharFunError::Structure(msg.into())
}

fn product(a: &[Mono], b: &[Mono]) -> Vec<Mono> {
    let mut out = Vec::with_capacity(a.len() * b.len());
    for x in a {
        for y in b {
            out.push(x.times(y));
        }
    }
    out
}

fn single(monos: Vec<Mono>, what: &str) -> Result<Mono, CharFunError> {
    let monos = merge(monos);
    match <[Mono; 1]>::try_from(monos) {
        Ok([m]) => Ok(m),
        Err(_) => Err(structure(format!("{what} must be a single monomial in s"))),
    }
}

fn expand(e: &Expr) -> Result<Vec<Mono>, CharFunError> {
    if !e.depends_on_laplace() {
        return Ok(vec![Mono::constant(e.clone())]);
    }
    Ok(match e {
        Expr::Const(_) => unreachable!(),
        Expr::Var(name) => {
            debug_assert_eq!(name, LAPLACE);
            vec![Mono {
                power: 1,
                coeff: Expr::one(),
                delay: Expr::zero(),
            }]
        }
        Expr::Neg(a) => expand(a)?
            .into_iter()
            .map(|m| Mono {
                coeff: Expr::neg(m.coeff),
                ..m
            })
            .collect(),
        Expr::Add(a, b) => {
            let mut out = expand(a)?;
            out.extend(expand(b)?);
            out
        }
        Expr::Sub(a, b) => {
            let mut out = expand(a)?;
            out.extend(expand(b)?.into_iter().map(|m| Mono {
                coeff: Expr::neg(m.coeff),
                ..m
            }));
            out
        }
        Expr::Mul(a, b) => product(&expand(a)?, &expand(b)?),
        Expr::Div(a, b) => {
            let den = single(expand(b)?, "a denominator containing s")?;
            product(&expand(a)?, &[den.inverse()])
        }
        Expr::Pow(a, n) => {
            let base = expand(a)?;
            let (base, n) = if *n < 0 {
                (vec![single(base, "a negative power base")?.inverse()], -n)
            } else {
                (base, *n)
            };
            let mut acc = vec![Mono::constant(Expr::one())];
            for _ in 0..n {
                acc = merge(product(&acc, &base));
            }
            acc
        }
        Expr::Exp(a) => {
            let mut offset = Expr::zero();
            let mut slope = Expr::zero();
            for m in merge(expand(a)?) {
                if !m.delay.is_zero() {
                    return Err(structure("nested exponentials in s"));
                }
                match m.power {
                    0 => offset = Expr::add(offset, m.coeff),
                    1 => slope = Expr::add(slope, m.coeff),
                    _ => return Err(structure(format!("exponent `{a}` is not affine in s"))),
                }
            }
            vec![Mono {
                power: 0,
                coeff: Expr::exp(offset),
                delay: Expr::neg(slope),
            }]
        }
    })
}

fn merge(monos: Vec<Mono>) -> Vec<Mono> {
    let mut out: Vec<(String, Mono)> = Vec::new();
    for m in monos {
        if m.coeff.is_zero() {
            continue;
        }
        let key = if m.delay.is_zero() {
            String::from("0")
        } else {
            m.delay.to_string()
        };
        match out
            .iter_mut()
            .find(|(k, o)| o.power == m.power && *k == key)
        {
            Some((_, o)) => o.coeff = Expr::add(o.coeff.clone(), m.coeff),
            None => out.push((key, m)),
        }
    }
    out.into_iter()
        .map(|(_, m)| m)
        .filter(|m| !m.coeff.is_zero())
        .collect()
}

/// Splits an expression into a monic leading power and quasi-polynomial terms.
pub(super) fn quasi_polynomial(e: &Expr) -> Result<(u32, Vec<QpTerm>), CharFunError> {
    let monos = merge(expand(e)?);
    if let Some(m) = monos.iter().find(|m| m.power < 0) {
        return Err(structure(format!("negative power s^{}", m.power)));
    }
    let m = monos
        .iter()
        .filter(|m| m.delay.is_zero())
        .map(|m| m.power)
        .max()
        .ok_or_else(|| structure("no delay-free term"))?;
    if m == 0 {
        return Err(structure("no positive power of s without delay"));
    }
    if let Some(top) = monos.iter().map(|m| m.power).max().filter(|&p| p > m) {
        return Err(structure(format!(
            "delayed term s^{top} exceeds the delay-free leading power s^{m}"
        )));
    }
    let lead = monos
        .iter()
        .find(|x| x.power == m && x.delay.is_zero())
        .expect("leading term exists");
    let scale = match lead.coeff.as_const() {
        Some(c) if c != 0.0 && c.is_finite() => c,
        _ => {
            return Err(structure(format!(
                "leading coefficient `{}` is not a nonzero constant",
                lead.coeff
            )))
        }
    };
    let terms = monos
        .into_iter()
        .filter(|x| !(x.power == m && x.delay.is_zero()))
        .map(|x| QpTerm {
            power: x.power as u32,
            coeff: if scale == 1.0 {
                x.coeff
            } else {
                Expr::div(x.coeff, Expr::Const(scale))
            },
            delay: x.delay,
        })
        .collect();
    Ok((m as u32, terms))
}
