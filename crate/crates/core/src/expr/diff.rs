use super::{add, cos, div, exp, mul, neg, pow, sin, sub, tan, BinaryOp, Expr, UnaryOp};

/// Exact symbolic derivative of `e` with respect to variable `v`.
pub fn differentiate(e: &Expr, v: &str) -> Expr {
    match e {
        Expr::Const(_) => Expr::Const(0.0),
        Expr::Var(name) => Expr::Const(if name == v { 1.0 } else { 0.0 }),
        Expr::Unary(op, a) => {
            let da = differentiate(a, v);
            if da.is_zero() {
                return Expr::Const(0.0);
            }
            let a = (**a).clone();
            match op {
                UnaryOp::Neg => neg(da),
                UnaryOp::Sin => mul(da, cos(a)),
                UnaryOp::Cos => mul(da, neg(sin(a))),
                UnaryOp::Exp => mul(da, exp(a)),
                UnaryOp::Tan => mul(da, add(Expr::Const(1.0), pow(tan(a), 2))),
            }
        }
        Expr::Binary(op, a, b) => {
            let da = differentiate(a, v);
            let db = differentiate(b, v);
            let (a, b) = ((**a).clone(), (**b).clone());
            match op {
                BinaryOp::Add => add(da, db),
                BinaryOp::Sub => sub(da, db),
                BinaryOp::Mul => add(mul(da, b.clone()), mul(a, db)),
                BinaryOp::Div => {
                    if db.is_zero() {
                        div(da, b)
                    } else {
                        sub(div(da, b.clone()), div(mul(a, db), pow(b, 2)))
                    }
                }
            }
        }
        Expr::Pow(a, k) => {
            let da = differentiate(a, v);
            if da.is_zero() || *k == 0 {
                return Expr::Const(0.0);
            }
            let outer = mul(Expr::Const(f64::from(*k)), pow((**a).clone(), k - 1));
            mul(outer, da)
        }
    }
}
