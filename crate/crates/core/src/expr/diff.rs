use super::simplify::{add, call, div, mul, neg, pow, sub};
use super::{Expr, Func, Node};

impl Expr {
    /// Partial derivative with respect to the symbol `var`.
    ///
    /// Uses the sum, product, quotient, chain and integer-power rules. The
    /// result is lightly simplified but otherwise not normalized.
    pub fn differentiate(&self, var: &str) -> Expr {
        if !self.contains_symbol(var) {
            return Expr::zero();
        }
        match self.node() {
            Node::Num(_) => Expr::zero(),
            Node::Sym(s) => {
                if &**s == var {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Neg(a) => neg(a.differentiate(var)),
            Node::Add(a, b) => add(a.differentiate(var), b.differentiate(var)),
            Node::Sub(a, b) => sub(a.differentiate(var), b.differentiate(var)),
            Node::Mul(a, b) => add(
                mul(a.differentiate(var), b.clone()),
                mul(a.clone(), b.differentiate(var)),
            ),
            Node::Div(a, b) => {
                let da = a.differentiate(var);
                let db = b.differentiate(var);
                if db.is_zero() {
                    div(da, b.clone())
                } else {
                    div(sub(mul(da, b.clone()), mul(a.clone(), db)), pow(b.clone(), 2))
                }
            }
            Node::Pow(a, n) => mul(
                mul(Expr::num(f64::from(*n)), pow(a.clone(), n - 1)),
                a.differentiate(var),
            ),
            Node::Call(func, a) => {
                let da = a.differentiate(var);
                let outer = match func {
                    Func::Sqrt => div(Expr::num(0.5), call(Func::Sqrt, a.clone())),
                    Func::Exp => call(Func::Exp, a.clone()),
                    Func::Log => div(Expr::one(), a.clone()),
                    Func::Sin => call(Func::Cos, a.clone()),
                    Func::Cos => neg(call(Func::Sin, a.clone())),
                };
                mul(outer, da)
            }
        }
    }
}
