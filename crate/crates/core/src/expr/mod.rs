//! Symbolic expressions over named variables and parameters.
//!
//! An [`Expr`] is an immutable, reference-counted tree. Cloning is cheap and
//! shares structure, so derivatives and matrices of derivatives can be built
//! without copying whole subtrees. Every operation on expressions is a pure
//! function; trees can be evaluated from any number of threads at once.
//!
//! Equality of two *formulas* is decided numerically (see [`equiv`]), not by
//! canonical forms. [`simplify`](Expr::simplify) only folds constants and
//! removes neutral elements.

mod diff;
pub mod equiv;
mod eval;
mod parse;
mod simplify;

use std::collections::BTreeSet;
use std::fmt;
use std::ops;
use std::sync::Arc;

pub use equiv::{compare, numerically_equivalent, sample_values, scaled_deviation, Comparison, DomainBox, Equivalence, EquivalenceError, Interval};
pub use eval::{Bindings, CompiledExpr, DomainErrorKind, EvalError};
pub use parse::{parse_expression, ParseError};
pub(crate) use simplify::{add, mul, neg, pow, sub};

/// Unary functions admitted by the grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Sqrt,
    Exp,
    Log,
    Sin,
    Cos,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sqrt => "sqrt",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sqrt" => Func::Sqrt,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            _ => return None,
        })
    }
}

/// One node of an expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Sym(Arc<str>),
    Neg(Expr),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    /// Integer powers only.
    Pow(Expr, i32),
    Call(Func, Expr),
}

/// Immutable symbolic expression.
#[derive(Clone, PartialEq)]
pub struct Expr(Arc<Node>);

impl Expr {
    pub fn from_node(node: Node) -> Expr {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn num(value: f64) -> Expr {
        Expr::from_node(Node::Num(value))
    }

    pub fn zero() -> Expr {
        Expr::num(0.0)
    }

    pub fn one() -> Expr {
        Expr::num(1.0)
    }

    pub fn sym(name: &str) -> Expr {
        Expr::from_node(Node::Sym(Arc::from(name)))
    }

    pub fn pow(&self, exponent: i32) -> Expr {
        Expr::from_node(Node::Pow(self.clone(), exponent))
    }

    pub fn call(func: Func, arg: Expr) -> Expr {
        Expr::from_node(Node::Call(func, arg))
    }

    /// Parses `text` without restricting which identifiers may appear.
    pub fn parse(text: &str) -> Result<Expr, ParseError> {
        parse_expression::<&str>(text, None)
    }

    /// The constant value, if this node is a literal.
    pub fn as_num(&self) -> Option<f64> {
        match self.node() {
            Node::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_num() == Some(0.0)
    }

    pub fn free_symbols(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<String>) {
        match self.node() {
            Node::Num(_) => {}
            Node::Sym(s) => {
                if !out.contains(&**s) {
                    out.insert(s.to_string());
                }
            }
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => a.collect_symbols(out),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.collect_symbols(out);
                b.collect_symbols(out);
            }
        }
    }

    pub fn contains_symbol(&self, name: &str) -> bool {
        match self.node() {
            Node::Num(_) => false,
            Node::Sym(s) => &**s == name,
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => a.contains_symbol(name),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.contains_symbol(name) || b.contains_symbol(name)
            }
        }
    }

    /// Number of nodes, counting shared subtrees once per occurrence.
    pub fn size(&self) -> usize {
        match self.node() {
            Node::Num(_) | Node::Sym(_) => 1,
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => 1 + a.size(),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => 1 + a.size() + b.size(),
        }
    }

    /// Replaces every occurrence of the symbol `name` by `value`.
    pub fn substitute(&self, name: &str, value: &Expr) -> Expr {
        if !self.contains_symbol(name) {
            return self.clone();
        }
        let node = match self.node() {
            Node::Sym(_) => return value.clone(),
            Node::Num(_) => unreachable!(),
            Node::Neg(a) => Node::Neg(a.substitute(name, value)),
            Node::Add(a, b) => Node::Add(a.substitute(name, value), b.substitute(name, value)),
            Node::Sub(a, b) => Node::Sub(a.substitute(name, value), b.substitute(name, value)),
            Node::Mul(a, b) => Node::Mul(a.substitute(name, value), b.substitute(name, value)),
            Node::Div(a, b) => Node::Div(a.substitute(name, value), b.substitute(name, value)),
            Node::Pow(a, n) => Node::Pow(a.substitute(name, value), *n),
            Node::Call(f, a) => Node::Call(*f, a.substitute(name, value)),
        };
        Expr::from_node(node)
    }

    fn precedence(&self) -> u8 {
        match self.node() {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) | Node::Div(..) => 2,
            Node::Neg(_) => 3,
            Node::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => 3,
            Node::Pow(..) => 4,
            Node::Num(_) | Node::Sym(_) | Node::Call(..) => 5,
        }
    }
}

impl From<f64> for Expr {
    fn from(value: f64) -> Expr {
        Expr::num(value)
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        write!(f, "{}", v)
    } else {
        write!(f, "{:?}", v)
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({})", e)
    } else {
        write!(f, "{}", e)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Num(v) => write_number(f, *v),
            Node::Sym(s) => f.write_str(s),
            Node::Neg(a) => {
                f.write_str("-")?;
                write_child(f, a, 3)
            }
            Node::Add(a, b) => {
                write_child(f, a, 1)?;
                f.write_str(" + ")?;
                write_child(f, b, 2)
            }
            Node::Sub(a, b) => {
                write_child(f, a, 1)?;
                f.write_str(" - ")?;
                write_child(f, b, 2)
            }
            Node::Mul(a, b) => {
                write_child(f, a, 2)?;
                f.write_str("*")?;
                write_child(f, b, 4)
            }
            Node::Div(a, b) => {
                write_child(f, a, 2)?;
                f.write_str("/")?;
                write_child(f, b, 4)
            }
            Node::Pow(a, n) => {
                write_child(f, a, 5)?;
                write!(f, "^{}", n)
            }
            Node::Call(func, a) => write!(f, "{}({})", func.name(), a),
        }
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({})", self)
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $variant:ident) => {
        impl ops::$trait<Expr> for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::from_node(Node::$variant(self, rhs))
            }
        }
        impl ops::$trait<&Expr> for &Expr {
            type Output = Expr;
            fn $method(self, rhs: &Expr) -> Expr {
                Expr::from_node(Node::$variant(self.clone(), rhs.clone()))
            }
        }
        impl ops::$trait<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::from_node(Node::$variant(self, Expr::num(rhs)))
            }
        }
        impl ops::$trait<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::from_node(Node::$variant(Expr::num(self), rhs))
            }
        }
    };
}

binary_op!(Add, add, Add);
binary_op!(Sub, sub, Sub);
binary_op!(Mul, mul, Mul);
binary_op!(Div, div, Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::from_node(Node::Neg(self))
    }
}

impl ops::Neg for &Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::from_node(Node::Neg(self.clone()))
    }
}
