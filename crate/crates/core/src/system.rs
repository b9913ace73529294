//! Autonomous first-order systems `x' = X(x)` and matrices of expressions.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::expr::{Bindings, CompiledExpr, DomainBox, EvalError, Expr, Func, Interval};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SystemError {
    #[error("a system needs at least 2 state variables, got {0}")]
    TooFewStates(usize),
    #[error("expected {expected} components, got {found}")]
    ComponentCount { expected: usize, found: usize },
    #[error("name `{0}` is declared more than once")]
    DuplicateName(String),
    #[error("`{0}` is not a valid symbol name")]
    InvalidName(String),
    #[error("component for `{state}` uses undeclared symbol `{symbol}`")]
    UndeclaredSymbol { state: String, symbol: String },
    #[error("parameter `{0}` is not declared")]
    UnknownParameter(String),
}

pub(crate) fn is_valid_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic())
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && Func::from_name(name).is_none()
}

/// `x' = X(x)` in a fixed chart of `R^n`, with named parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSystem {
    states: Vec<String>,
    params: Vec<(String, f64)>,
    components: Vec<Expr>,
}

impl OdeSystem {
    pub fn new(states: Vec<String>, params: Vec<(String, f64)>, components: Vec<Expr>) -> Result<OdeSystem, SystemError> {
        if states.len() < 2 {
            return Err(SystemError::TooFewStates(states.len()));
        }
        if components.len() != states.len() {
            return Err(SystemError::ComponentCount {
                expected: states.len(),
                found: components.len(),
            });
        }
        let mut declared = BTreeSet::new();
        for name in states.iter().chain(params.iter().map(|(n, _)| n)) {
            if !is_valid_name(name) {
                return Err(SystemError::InvalidName(name.clone()));
            }
            if !declared.insert(name.clone()) {
                return Err(SystemError::DuplicateName(name.clone()));
            }
        }
        for (state, c) in states.iter().zip(&components) {
            if let Some(symbol) = c.free_symbols().into_iter().find(|s| !declared.contains(s)) {
                return Err(SystemError::UndeclaredSymbol {
                    state: state.clone(),
                    symbol,
                });
            }
        }
        Ok(OdeSystem {
            states,
            params,
            components,
        })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn params(&self) -> &[(String, f64)] {
        &self.params
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn is_declared(&self, name: &str) -> bool {
        self.state_index(name).is_some() || self.params.iter().any(|(n, _)| n == name)
    }

    pub fn param_bindings(&self) -> Bindings {
        self.params.iter().map(|(n, v)| (n.as_str(), *v)).collect()
    }

    /// Replaces the value of one declared parameter.
    pub fn set_param(&mut self, name: &str, value: f64) -> Result<(), SystemError> {
        let slot = self
            .params
            .iter_mut()
            .find(|(n, _)| n == name)
            .ok_or_else(|| SystemError::UnknownParameter(name.to_string()))?;
        slot.1 = value;
        Ok(())
    }

    /// `domain` overlaid on the parameter values: parameters not in
    /// `domain` are pinned to their bound values.
    pub fn domain_with(&self, domain: &DomainBox) -> DomainBox {
        let mut out = DomainBox::new();
        for (n, v) in &self.params {
            out.insert(n, Interval::point(*v));
        }
        for (n, iv) in domain.iter() {
            out.insert(n, iv);
        }
        out
    }

    /// Components compiled over slots `states ++ params`.
    pub fn compile_field(&self) -> CompiledField {
        let slots: Vec<&str> = self
            .states
            .iter()
            .map(String::as_str)
            .chain(self.params.iter().map(|(n, _)| n.as_str()))
            .collect();
        let programs = self
            .components
            .iter()
            .map(|c| c.compile(&slots).expect("system symbols validated at construction"))
            .collect();
        CompiledField {
            programs,
            params: self.params.iter().map(|(_, v)| *v).collect(),
        }
    }

    /// Evaluates `X(x)` at a state vector.
    pub fn eval_field(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut b = self.param_bindings();
        for (n, v) in self.states.iter().zip(x) {
            b.insert(n, *v);
        }
        self.components.iter().map(|c| c.eval(&b)).collect()
    }
}

impl fmt::Display for OdeSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "vars: {}", self.states.join(" "))?;
        if !self.params.is_empty() {
            let ps: Vec<String> = self.params.iter().map(|(n, v)| format!("{}={:?}", n, v)).collect();
            writeln!(f, "params: {}", ps.join(" "))?;
        }
        for (s, c) in self.states.iter().zip(&self.components) {
            writeln!(f, "eq {}: {}", s, c)?;
        }
        Ok(())
    }
}

/// The vector field compiled for repeated numeric evaluation.
#[derive(Debug, Clone)]
pub struct CompiledField {
    programs: Vec<CompiledExpr>,
    params: Vec<f64>,
}

impl CompiledField {
    pub fn dim(&self) -> usize {
        self.programs.len()
    }

    /// Writes `X(x)` into `out`. `scratch` must hold `n + params` values.
    pub fn eval_into(&self, x: &[f64], scratch: &mut Vec<f64>, out: &mut [f64]) -> Result<(), EvalError> {
        scratch.clear();
        scratch.extend_from_slice(x);
        scratch.extend_from_slice(&self.params);
        for (o, p) in out.iter_mut().zip(&self.programs) {
            *o = p.eval(scratch)?;
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        let mut scratch = Vec::with_capacity(x.len() + self.params.len());
        let mut out = vec![0.0; self.programs.len()];
        self.eval_into(x, &mut scratch, &mut out)?;
        Ok(out)
    }
}

/// Dense row-major matrix of expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<Expr>,
}

impl ExprMatrix {
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Expr) -> ExprMatrix {
        let mut entries = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                entries.push(f(i, j));
            }
        }
        ExprMatrix { rows, cols, entries }
    }

    pub fn zeros(rows: usize, cols: usize) -> ExprMatrix {
        ExprMatrix::from_fn(rows, cols, |_, _| Expr::zero())
    }

    pub fn from_rows(rows: Vec<Vec<Expr>>) -> ExprMatrix {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        ExprMatrix {
            rows: r,
            cols: c,
            entries: rows.into_iter().flatten().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Zero-based entry access.
    pub fn get(&self, i: usize, j: usize) -> &Expr {
        assert!(i < self.rows && j < self.cols, "index ({}, {}) out of range", i, j);
        &self.entries[i * self.cols + j]
    }

    pub fn entries(&self) -> &[Expr] {
        &self.entries
    }

    pub fn map(&self, f: impl Fn(&Expr) -> Expr) -> ExprMatrix {
        ExprMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn transpose(&self) -> ExprMatrix {
        ExprMatrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn is_structurally_zero(&self) -> bool {
        self.entries.iter().all(Expr::is_zero)
    }

    pub fn eval(&self, b: &Bindings) -> Result<Vec<Vec<f64>>, EvalError> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j).eval(b)).collect())
            .collect()
    }
}

impl fmt::Display for ExprMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self.get(i, j).to_string()).collect();
            writeln!(f, "[{}]", row.join(", "))?;
        }
        Ok(())
    }
}
