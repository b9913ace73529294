//! Local rewriting: constant folding and removal of neutral elements.
//!
//! The smart constructors here are also what differentiation uses to keep
//! derivative trees from growing dead `0*x` and `1*x` branches.

use super::{Expr, Func, Node};

fn fold_call(func: Func, v: f64) -> Option<f64> {
    let out = match func {
        Func::Sqrt if v >= 0.0 => v.sqrt(),
        Func::Log if v > 0.0 => v.ln(),
        Func::Exp => v.exp(),
        Func::Sin => v.sin(),
        Func::Cos => v.cos(),
        _ => return None,
    };
    out.is_finite().then_some(out)
}

pub(crate) fn neg(a: Expr) -> Expr {
    match a.node() {
        Node::Num(v) if *v == 0.0 => Expr::zero(),
        Node::Num(v) => Expr::num(-v),
        Node::Neg(inner) => inner.clone(),
        Node::Mul(l, r) => match l.node() {
            Node::Num(c) => mul(Expr::num(-c), r.clone()),
            _ => Expr::from_node(Node::Neg(a)),
        },
        Node::Sub(x, y) => Expr::from_node(Node::Sub(y.clone(), x.clone())),
        _ => Expr::from_node(Node::Neg(a)),
    }
}

fn leading_negative(e: &Expr) -> bool {
    matches!(e.node(), Node::Num(c) if *c < 0.0)
}

pub(crate) fn add(a: Expr, b: Expr) -> Expr {
    match (a.node(), b.node()) {
        (Node::Num(x), Node::Num(y)) => Expr::num(x + y),
        (Node::Num(x), _) if *x == 0.0 => b,
        (_, Node::Num(y)) if *y == 0.0 => a,
        (_, Node::Num(y)) if *y < 0.0 => Expr::from_node(Node::Sub(a, Expr::num(-y))),
        (_, Node::Neg(y)) => sub(a, y.clone()),
        (Node::Neg(x), _) => sub(b, x.clone()),
        (_, Node::Mul(l, _)) if leading_negative(l) => sub(a, neg(b)),
        _ => Expr::from_node(Node::Add(a, b)),
    }
}

pub(crate) fn sub(a: Expr, b: Expr) -> Expr {
    match (a.node(), b.node()) {
        (Node::Num(x), Node::Num(y)) => Expr::num(x - y),
        (_, Node::Num(y)) if *y == 0.0 => a,
        (Node::Num(x), _) if *x == 0.0 => neg(b),
        (_, Node::Num(y)) if *y < 0.0 => Expr::from_node(Node::Add(a, Expr::num(-y))),
        (_, Node::Neg(y)) => add(a, y.clone()),
        (_, Node::Mul(l, _)) if leading_negative(l) => add(a, neg(b)),
        _ => Expr::from_node(Node::Sub(a, b)),
    }
}

pub(crate) fn mul(a: Expr, b: Expr) -> Expr {
    match (a.node(), b.node()) {
        (Node::Num(x), Node::Num(y)) => Expr::num(x * y),
        (Node::Num(x), _) | (_, Node::Num(x)) if *x == 0.0 => Expr::zero(),
        (Node::Num(x), _) if *x == 1.0 => b,
        (_, Node::Num(y)) if *y == 1.0 => a,
        (Node::Num(x), _) if *x == -1.0 => neg(b),
        (_, Node::Num(y)) if *y == -1.0 => neg(a),
        (Node::Neg(x), Node::Neg(y)) => mul(x.clone(), y.clone()),
        (Node::Neg(x), _) => neg(mul(x.clone(), b)),
        (_, Node::Neg(y)) => neg(mul(a, y.clone())),
        // Constants move to the front and merge with a leading constant.
        (_, Node::Num(_)) => mul(b, a),
        (Node::Num(x), Node::Mul(l, r)) => match l.node() {
            Node::Num(y) => mul(Expr::num(x * y), r.clone()),
            _ => Expr::from_node(Node::Mul(a, b)),
        },
        _ => Expr::from_node(Node::Mul(a, b)),
    }
}

pub(crate) fn div(a: Expr, b: Expr) -> Expr {
    match (a.node(), b.node()) {
        (Node::Num(x), Node::Num(y)) if *y != 0.0 => Expr::num(x / y),
        (Node::Num(x), _) if *x == 0.0 => Expr::zero(),
        (_, Node::Num(y)) if *y == 1.0 => a,
        (_, Node::Num(y)) if *y == -1.0 => neg(a),
        (Node::Neg(x), Node::Neg(y)) => div(x.clone(), y.clone()),
        (Node::Neg(x), _) => neg(div(x.clone(), b)),
        (_, Node::Neg(y)) => neg(div(a, y.clone())),
        _ => Expr::from_node(Node::Div(a, b)),
    }
}

pub(crate) fn pow(a: Expr, n: i32) -> Expr {
    if n == 0 {
        return Expr::one();
    }
    if n == 1 {
        return a;
    }
    match a.node() {
        Node::Num(v) => {
            let out = v.powi(n);
            if out.is_finite() && (*v != 0.0 || n > 0) {
                Expr::num(out)
            } else {
                Expr::from_node(Node::Pow(a, n))
            }
        }
        Node::Pow(base, m) => match m.checked_mul(n) {
            Some(mn) => pow(base.clone(), mn),
            None => Expr::from_node(Node::Pow(a, n)),
        },
        Node::Neg(inner) if n % 2 == 0 => pow(inner.clone(), n),
        Node::Mul(l, r) if n % 2 == 0 && leading_negative(l) => pow(mul(neg(l.clone()), r.clone()), n),
        Node::Neg(inner) => neg(pow(inner.clone(), n)),
        _ => Expr::from_node(Node::Pow(a, n)),
    }
}

pub(crate) fn call(func: Func, a: Expr) -> Expr {
    if let Some(v) = a.as_num().and_then(|v| fold_call(func, v)) {
        return Expr::num(v);
    }
    Expr::call(func, a)
}

impl Expr {
    /// Bottom-up constant folding and identity elimination.
    ///
    /// The result evaluates to the same value as `self` wherever `self` is
    /// defined; no canonical form is attempted.
    pub fn simplify(&self) -> Expr {
        match self.node() {
            Node::Num(_) | Node::Sym(_) => self.clone(),
            Node::Neg(a) => neg(a.simplify()),
            Node::Add(a, b) => add(a.simplify(), b.simplify()),
            Node::Sub(a, b) => sub(a.simplify(), b.simplify()),
            Node::Mul(a, b) => mul(a.simplify(), b.simplify()),
            Node::Div(a, b) => div(a.simplify(), b.simplify()),
            Node::Pow(a, n) => pow(a.simplify(), *n),
            Node::Call(f, a) => call(*f, a.simplify()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(text: &str) -> Expr {
        Expr::parse(text).unwrap()
    }

    #[test]
    fn multiplicative_identity() {
        assert_eq!(p("1*P").simplify(), Expr::sym("P"));
    }

    #[test]
    fn constant_folding() {
        assert_eq!(p("2+3").simplify(), Expr::num(5.0));
        assert_eq!(p("2*(3*x)").simplify(), p("6*x"));
        assert_eq!(p("2^3 - 1").simplify(), Expr::num(7.0));
        assert_eq!(p("exp(0)").simplify(), Expr::one());
    }

    #[test]
    fn identity_elimination() {
        assert_eq!(p("x+0").simplify(), Expr::sym("x"));
        assert_eq!(p("0+x").simplify(), Expr::sym("x"));
        assert_eq!(p("x*0").simplify(), Expr::zero());
        assert_eq!(p("x^0").simplify(), Expr::one());
        assert_eq!(p("x^1").simplify(), Expr::sym("x"));
        assert_eq!(p("--x").simplify(), Expr::sym("x"));
        assert_eq!(p("x/1").simplify(), Expr::sym("x"));
        assert_eq!(p("0/x").simplify(), Expr::zero());
        assert_eq!(p("x - -y").simplify(), p("x + y"));
        assert_eq!(p("(-x)*(-y)").simplify(), p("x*y"));
    }

    #[test]
    fn keeps_unfoldable_constants() {
        // 1/0 and log(-1) must stay symbolic so evaluation still reports them.
        assert_eq!(p("1/0").simplify(), p("1/0"));
        assert_eq!(p("log(-1)").simplify().to_string(), "log(-1)");
        assert_eq!(p("0^-1").simplify(), p("0^-1"));
    }
}
