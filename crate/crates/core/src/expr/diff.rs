use super::Expr;

pub(super) fn derivative(e: &Expr, x: &str) -> Expr {
    if !e.depends_on(x) {
        return Expr::zero();
    }
    match e {
        Expr::Const(_) => Expr::zero(),
        Expr::Var(name) => {
            if name == x {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Neg(a) => Expr::neg(derivative(a, x)),
        Expr::Add(a, b) => Expr::add(derivative(a, x), derivative(b, x)),
        Expr::Sub(a, b) => Expr::sub(derivative(a, x), derivative(b, x)),
        Expr::Mul(a, b) => Expr::add(
            Expr::mul(derivative(a, x), (**b).clone()),
            Expr::mul((**a).clone(), derivative(b, x)),
        ),
        Expr::Div(a, b) => {
            // (a'b - ab') / b^2
            let num = Expr::sub(
                Expr::mul(derivative(a, x), (**b).clone()),
                Expr::mul((**a).clone(), derivative(b, x)),
            );
            Expr::div(num, Expr::powi((**b).clone(), 2))
        }
        Expr::Pow(a, n) => Expr::mul(
            Expr::mul(Expr::Const(f64::from(*n)), Expr::powi((**a).clone(), n - 1)),
            derivative(a, x),
        ),
        Expr::Exp(a) => Expr::mul(e.clone(), derivative(a, x)),
    }
}
