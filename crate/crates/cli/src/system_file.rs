//! Plain-text system descriptions.
//!
//! ```text
//! # comments run to end of line
//! vars: P Q
//! params: r=0.5 a=0.3
//! params: h=1 k=0.1
//! eq P: P - P*(P + Q) + h*P*Q/(1 + k*P^2)
//! eq Q: -r*Q + a*P*(P + Q) - h*P*Q/(1 + k*P^2)
//! ```
//!
//! Lines may appear in any order. Variables keep their `vars:` order.

use jetgeom::expr::{parse_expression, ParseError};
use jetgeom::{OdeSystem, SystemError};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemFileError {
    #[error("no `vars:` line")]
    MissingVars,
    #[error("line {line}: second `vars:` line")]
    RepeatedVars { line: usize },
    #[error("line {line}: variable `{name}` declared twice")]
    DuplicateVariable { line: usize, name: String },
    #[error("line {line}: parameter `{name}` declared twice")]
    DuplicateParameter { line: usize, name: String },
    #[error("line {line}: malformed parameter `{text}` (expected name=number)")]
    MalformedParameter { line: usize, text: String },
    #[error("line {line}: equation for undeclared variable `{name}`")]
    EquationForUndeclared { line: usize, name: String },
    #[error("line {line}: second equation for `{name}`")]
    DuplicateEquation { line: usize, name: String },
    #[error("no equation for variable `{0}`")]
    MissingEquation(String),
    #[error("line {line}: undeclared identifier `{name}` in the equation for `{var}`")]
    UndeclaredIdentifier { line: usize, var: String, name: String },
    #[error("line {line}: {source}")]
    Expression { line: usize, source: ParseError },
    #[error("line {line}: unrecognized line `{text}`")]
    UnknownLine { line: usize, text: String },
    #[error(transparent)]
    System(#[from] SystemError),
}

struct Equation<'a> {
    line: usize,
    var: String,
    text: &'a str,
}

pub fn parse_system_file(text: &str) -> Result<OdeSystem, SystemFileError> {
    let mut vars: Option<Vec<String>> = None;
    let mut params: Vec<(String, f64)> = Vec::new();
    let mut equations: Vec<Equation> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix("vars:") {
            if vars.is_some() {
                return Err(SystemFileError::RepeatedVars { line });
            }
            let mut names: Vec<String> = Vec::new();
            for name in rest.split_whitespace() {
                if names.iter().any(|n| n == name) {
                    return Err(SystemFileError::DuplicateVariable {
                        line,
                        name: name.to_string(),
                    });
                }
                names.push(name.to_string());
            }
            vars = Some(names);
        } else if let Some(rest) = content.strip_prefix("params:") {
            for item in rest.split_whitespace() {
                let malformed = || SystemFileError::MalformedParameter {
                    line,
                    text: item.to_string(),
                };
                let (name, value) = item.split_once('=').ok_or_else(malformed)?;
                let value: f64 = value.parse().map_err(|_| malformed())?;
                if name.is_empty() || !value.is_finite() {
                    return Err(malformed());
                }
                if params.iter().any(|(n, _)| n == name) {
                    return Err(SystemFileError::DuplicateParameter {
                        line,
                        name: name.to_string(),
                    });
                }
                params.push((name.to_string(), value));
            }
        } else if let Some(rest) = content.strip_prefix("eq ") {
            let (var, expr) = rest.split_once(':').ok_or_else(|| SystemFileError::UnknownLine {
                line,
                text: content.to_string(),
            })?;
            equations.push(Equation {
                line,
                var: var.trim().to_string(),
                text: expr,
            });
        } else {
            return Err(SystemFileError::UnknownLine {
                line,
                text: content.to_string(),
            });
        }
    }

    let vars = vars.ok_or(SystemFileError::MissingVars)?;
    let mut slots: Vec<Option<&Equation>> = vec![None; vars.len()];
    for eq in &equations {
        let i = vars.iter().position(|v| *v == eq.var).ok_or_else(|| SystemFileError::EquationForUndeclared {
            line: eq.line,
            name: eq.var.clone(),
        })?;
        if slots[i].is_some() {
            return Err(SystemFileError::DuplicateEquation {
                line: eq.line,
                name: eq.var.clone(),
            });
        }
        slots[i] = Some(eq);
    }
    let known: Vec<&str> = vars.iter().map(String::as_str).chain(params.iter().map(|(n, _)| n.as_str())).collect();
    let mut components = Vec::with_capacity(vars.len());
    for (var, slot) in vars.iter().zip(&slots) {
        let eq = slot.ok_or_else(|| SystemFileError::MissingEquation(var.clone()))?;
        let expr = parse_expression(eq.text, Some(&known)).map_err(|e| match e {
            ParseError::UnknownIdentifier { name, .. } => SystemFileError::UndeclaredIdentifier {
                line: eq.line,
                var: var.clone(),
                name,
            },
            source => SystemFileError::Expression { line: eq.line, source },
        })?;
        components.push(expr);
    }
    Ok(OdeSystem::new(vars, params, components)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_in_any_order_with_comments() {
        let s = parse_system_file("eq y: -x  # spring\n\nvars: x y\neq x: w*y\nparams: w=2\n").unwrap();
        assert_eq!(s.states(), ["x", "y"]);
        assert_eq!(s.params(), [("w".to_string(), 2.0)]);
        assert_eq!(s.eval_field(&[1.0, 3.0]).unwrap(), vec![6.0, -1.0]);
    }

    #[test]
    fn missing_equation_names_the_variable() {
        let err = parse_system_file("vars: P Q\neq P: P\n").unwrap_err();
        assert_eq!(err, SystemFileError::MissingEquation("Q".into()));
        assert!(err.to_string().contains('Q'));
    }

    #[test]
    fn undeclared_identifier_names_the_symbol() {
        let err = parse_system_file("vars: x y\neq x: y\neq y: z*x\n").unwrap_err();
        assert_eq!(
            err,
            SystemFileError::UndeclaredIdentifier {
                line: 3,
                var: "y".into(),
                name: "z".into()
            }
        );
    }

    #[test]
    fn rejects_malformed_input() {
        assert!(matches!(parse_system_file("eq x: 1"), Err(SystemFileError::MissingVars)));
        assert!(matches!(parse_system_file("vars: x x"), Err(SystemFileError::DuplicateVariable { .. })));
        assert!(matches!(
            parse_system_file("vars: x y\nparams: a=one"),
            Err(SystemFileError::MalformedParameter { line: 2, .. })
        ));
        assert!(matches!(parse_system_file("vars: x y\nparams: a"), Err(SystemFileError::MalformedParameter { .. })));
        assert!(matches!(parse_system_file("vars: x y\nvars: z"), Err(SystemFileError::RepeatedVars { line: 2 })));
        assert!(matches!(
            parse_system_file("vars: x y\neq z: 1"),
            Err(SystemFileError::EquationForUndeclared { .. })
        ));
        assert!(matches!(
            parse_system_file("vars: x y\neq x: 1\neq x: 2"),
            Err(SystemFileError::DuplicateEquation { .. })
        ));
        assert!(matches!(parse_system_file("vars: x y\nfoo"), Err(SystemFileError::UnknownLine { .. })));
        assert!(matches!(
            parse_system_file("vars: x y\neq x: 1 +\neq y: 1"),
            Err(SystemFileError::Expression { line: 2, .. })
        ));
        assert!(matches!(parse_system_file("vars: x\neq x: 1"), Err(SystemFileError::System(_))));
    }
}
