//! Numeric evaluation, by tree walk or through a compiled stack program.

use std::collections::BTreeMap;
use std::fmt;

use thiserror::Error;

use super::{Expr, Func, Node};

/// Symbol name to value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Bindings(BTreeMap<String, f64>);

impl Bindings {
    pub fn new() -> Bindings {
        Bindings::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Bindings {
        self.insert(name, value);
        self
    }

    pub fn insert(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.0.contains_key(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<S: AsRef<str>> FromIterator<(S, f64)> for Bindings {
    fn from_iter<I: IntoIterator<Item = (S, f64)>>(iter: I) -> Bindings {
        let mut b = Bindings::new();
        for (k, v) in iter {
            b.insert(k.as_ref(), v);
        }
        b
    }
}

impl Extend<(String, f64)> for Bindings {
    fn extend<I: IntoIterator<Item = (String, f64)>>(&mut self, iter: I) {
        self.0.extend(iter);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainErrorKind {
    DivisionByZero,
    LogOfNonPositive,
    SqrtOfNegative,
}

impl fmt::Display for DomainErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainErrorKind::DivisionByZero => "division by zero",
            DomainErrorKind::LogOfNonPositive => "log of non-positive value",
            DomainErrorKind::SqrtOfNegative => "sqrt of negative value",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unbound symbol `{0}`")]
    UnboundSymbol(String),
    #[error("{kind} in `{subexpression}`")]
    Domain {
        kind: DomainErrorKind,
        subexpression: String,
    },
}

impl EvalError {
    fn domain(kind: DomainErrorKind, e: &Expr) -> EvalError {
        EvalError::Domain {
            kind,
            subexpression: e.to_string(),
        }
    }

    pub fn is_domain(&self) -> bool {
        matches!(self, EvalError::Domain { .. })
    }
}

fn apply_func(func: Func, v: f64) -> Result<f64, DomainErrorKind> {
    match func {
        Func::Sqrt if v < 0.0 => Err(DomainErrorKind::SqrtOfNegative),
        Func::Sqrt => Ok(v.sqrt()),
        Func::Log if v <= 0.0 => Err(DomainErrorKind::LogOfNonPositive),
        Func::Log => Ok(v.ln()),
        Func::Exp => Ok(v.exp()),
        Func::Sin => Ok(v.sin()),
        Func::Cos => Ok(v.cos()),
    }
}

fn apply_pow(base: f64, n: i32) -> Result<f64, DomainErrorKind> {
    if base == 0.0 && n < 0 {
        Err(DomainErrorKind::DivisionByZero)
    } else {
        Ok(base.powi(n))
    }
}

impl Expr {
    /// Evaluates with IEEE double semantics, rejecting division by zero and
    /// out-of-domain `log`/`sqrt` arguments.
    pub fn eval(&self, b: &Bindings) -> Result<f64, EvalError> {
        Ok(match self.node() {
            Node::Num(v) => *v,
            Node::Sym(s) => b.get(s).ok_or_else(|| EvalError::UnboundSymbol(s.to_string()))?,
            Node::Neg(a) => -a.eval(b)?,
            Node::Add(x, y) => x.eval(b)? + y.eval(b)?,
            Node::Sub(x, y) => x.eval(b)? - y.eval(b)?,
            Node::Mul(x, y) => x.eval(b)? * y.eval(b)?,
            Node::Div(x, y) => {
                let num = x.eval(b)?;
                let den = y.eval(b)?;
                if den == 0.0 {
                    return Err(EvalError::domain(DomainErrorKind::DivisionByZero, self));
                }
                num / den
            }
            Node::Pow(a, n) => apply_pow(a.eval(b)?, *n).map_err(|k| EvalError::domain(k, self))?,
            Node::Call(f, a) => apply_func(*f, a.eval(b)?).map_err(|k| EvalError::domain(k, self))?,
        })
    }

    /// Compiles into a stack program whose inputs are `slots`, in order.
    pub fn compile<S: AsRef<str>>(&self, slots: &[S]) -> Result<CompiledExpr, EvalError> {
        let mut prog = CompiledExpr {
            code: Vec::new(),
            sources: Vec::new(),
            max_depth: 0,
        };
        let mut depth = 0;
        prog.emit(self, slots, &mut depth)?;
        Ok(prog)
    }
}

#[derive(Debug, Clone, Copy)]
enum Op {
    Const(f64),
    Load(usize),
    Neg,
    Add,
    Sub,
    Mul,
    Div(usize),
    Pow(i32, usize),
    Call(Func, usize),
}

/// An expression flattened for repeated evaluation over a fixed symbol order.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    code: Vec<Op>,
    /// Subexpressions named in domain errors.
    sources: Vec<Expr>,
    max_depth: usize,
}

impl CompiledExpr {
    fn push(&mut self, op: Op, depth: &mut usize, delta: isize) {
        self.code.push(op);
        *depth = (*depth as isize + delta) as usize;
        self.max_depth = self.max_depth.max(*depth);
    }

    fn source(&mut self, e: &Expr) -> usize {
        self.sources.push(e.clone());
        self.sources.len() - 1
    }

    fn emit<S: AsRef<str>>(&mut self, e: &Expr, slots: &[S], depth: &mut usize) -> Result<(), EvalError> {
        match e.node() {
            Node::Num(v) => self.push(Op::Const(*v), depth, 1),
            Node::Sym(s) => {
                let idx = slots
                    .iter()
                    .position(|n| n.as_ref() == &**s)
                    .ok_or_else(|| EvalError::UnboundSymbol(s.to_string()))?;
                self.push(Op::Load(idx), depth, 1);
            }
            Node::Neg(a) => {
                self.emit(a, slots, depth)?;
                self.push(Op::Neg, depth, 0);
            }
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                self.emit(a, slots, depth)?;
                self.emit(b, slots, depth)?;
                let op = match e.node() {
                    Node::Add(..) => Op::Add,
                    Node::Sub(..) => Op::Sub,
                    Node::Mul(..) => Op::Mul,
                    _ => Op::Div(self.source(e)),
                };
                self.push(op, depth, -1);
            }
            Node::Pow(a, n) => {
                self.emit(a, slots, depth)?;
                let src = self.source(e);
                self.push(Op::Pow(*n, src), depth, 0);
            }
            Node::Call(f, a) => {
                self.emit(a, slots, depth)?;
                let src = self.source(e);
                self.push(Op::Call(*f, src), depth, 0);
            }
        }
        Ok(())
    }

    /// Evaluates with `values[i]` bound to the i-th compile slot.
    pub fn eval(&self, values: &[f64]) -> Result<f64, EvalError> {
        let mut stack: Vec<f64> = Vec::with_capacity(self.max_depth);
        for op in &self.code {
            match *op {
                Op::Const(v) => stack.push(v),
                Op::Load(i) => stack.push(values[i]),
                Op::Neg => {
                    let top = stack.last_mut().expect("stack underflow");
                    *top = -*top;
                }
                Op::Add | Op::Sub | Op::Mul | Op::Div(_) => {
                    let rhs = stack.pop().expect("stack underflow");
                    let lhs = stack.last_mut().expect("stack underflow");
                    match *op {
                        Op::Add => *lhs += rhs,
                        Op::Sub => *lhs -= rhs,
                        Op::Mul => *lhs *= rhs,
                        Op::Div(src) => {
                            if rhs == 0.0 {
                                return Err(EvalError::domain(DomainErrorKind::DivisionByZero, &self.sources[src]));
                            }
                            *lhs /= rhs;
                        }
                        _ => unreachable!(),
                    }
                }
                Op::Pow(n, src) => {
                    let top = stack.last_mut().expect("stack underflow");
                    *top = apply_pow(*top, n).map_err(|k| EvalError::domain(k, &self.sources[src]))?;
                }
                Op::Call(f, src) => {
                    let top = stack.last_mut().expect("stack underflow");
                    *top = apply_func(f, *top).map_err(|k| EvalError::domain(k, &self.sources[src]))?;
                }
            }
        }
        Ok(stack.pop().expect("empty program"))
    }
}
