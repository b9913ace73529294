//! Built-in biology models and their published closed forms.
//!
//! Each constructor returns the system together with a [`GoldenSet`]: the
//! hand-derived formulas for its geometric objects, keyed by object path.
//! [`golden_compare`] binds those formulas to the engine output.
//!
//! Paths are 1-based:
//!
//! | path | object |
//! |------|--------|
//! | `jacobian[i][j]` | `dX_i/dx^j` |
//! | `connection[i][j]` | nonlinear connection |
//! | `torsion[k][i][j]` | entry `(i, j)` of the slice `dN/dx^k` |
//! | `electromagnetic[i][j]` | electromagnetic form |
//! | `EYM` | Yang-Mills energy |
//! | `d(F)/dPQ` | derivative of the named helper `F` by `P` then `Q` |

use std::collections::BTreeMap;

use thiserror::Error;

use crate::expr::{compare, DomainBox, Equivalence, EquivalenceError, Expr, Interval};
use crate::geometry::{connection_from_jacobian, electromagnetic_from_connection, energy_from_form, jacobian, torsion_from_connection};
use crate::system::{ExprMatrix, OdeSystem};
use crate::verify::Check;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter `{name}` must be positive, got {value}")]
    NonPositiveParameter { name: String, value: f64 },
    #[error("cannot resolve golden path `{0}`")]
    UnresolvablePath(String),
    #[error("golden `{path}` uses `{symbol}`, which the system does not declare")]
    ForeignSymbol { path: String, symbol: String },
    #[error("unknown model `{0}` (expected cancer or hiv1)")]
    UnknownModel(String),
    #[error(transparent)]
    Sampling(#[from] EquivalenceError),
}

/// Closed-form expressions keyed by object path, in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GoldenSet {
    entries: Vec<(String, Expr)>,
    helpers: BTreeMap<String, Expr>,
}

impl GoldenSet {
    pub fn new() -> GoldenSet {
        GoldenSet::default()
    }

    /// Inserts or replaces the golden for `path`.
    pub fn insert(&mut self, path: impl Into<String>, expr: Expr) {
        let path = path.into();
        match self.entries.iter_mut().find(|(p, _)| *p == path) {
            Some(slot) => slot.1 = expr,
            None => self.entries.push((path, expr)),
        }
    }

    /// Names a helper function that `d(name)/d..` paths differentiate.
    pub fn insert_helper(&mut self, name: impl Into<String>, expr: Expr) {
        self.helpers.insert(name.into(), expr);
    }

    pub fn get(&self, path: &str) -> Option<&Expr> {
        self.entries.iter().find(|(p, _)| p == path).map(|(_, e)| e)
    }

    pub fn helper(&self, name: &str) -> Option<&Expr> {
        self.helpers.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Expr)> {
        self.entries.iter().map(|(p, e)| (p.as_str(), e))
    }

    pub fn paths(&self) -> Vec<&str> {
        self.entries.iter().map(|(p, _)| p.as_str()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Every golden and helper may only mention states and parameters.
    pub fn validate(&self, s: &OdeSystem) -> Result<(), ModelError> {
        let helpers = self.helpers.iter().map(|(n, e)| (n.as_str(), e));
        for (path, e) in self.iter().chain(helpers) {
            if let Some(sym) = e.free_symbols().into_iter().find(|x| !s.is_declared(x)) {
                return Err(ModelError::ForeignSymbol {
                    path: path.to_string(),
                    symbol: sym,
                });
            }
        }
        Ok(())
    }
}

fn ensure_positive(params: &[(&str, f64)]) -> Result<(), ModelError> {
    match params.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
        Some((name, value)) => Err(ModelError::NonPositiveParameter {
            name: name.to_string(),
            value: *value,
        }),
        None => Ok(()),
    }
}

fn build(states: &[&str], params: &[(&str, f64)], components: &[&str]) -> OdeSystem {
    OdeSystem::new(
        states.iter().map(|s| s.to_string()).collect(),
        params.iter().map(|(n, v)| (n.to_string(), *v)).collect(),
        components.iter().map(|c| Expr::parse(c).expect("built-in component parses")).collect(),
    )
    .expect("built-in system is well formed")
}

fn golden(text: &str) -> Expr {
    Expr::parse(text).expect("built-in golden parses")
}

/// Proliferating/quiescent cell populations with transition
/// `F = hPQ / (1 + kP^2)`.
pub fn cancer_model(r: f64, a: f64, h: f64, k: f64) -> Result<(OdeSystem, GoldenSet), ModelError> {
    let params = [("r", r), ("a", a), ("h", h), ("k", k)];
    ensure_positive(&params)?;
    let f = "h*P*Q/(1 + k*P^2)";
    let system = build(
        &["P", "Q"],
        &params,
        &[&format!("P - P*(P + Q) + {f}"), &format!("-r*Q + a*P*(P + Q) - {f}")],
    );

    let f_p = "h*Q*(1 - k*P^2)/(1 + k*P^2)^2";
    let f_q = "h*P/(1 + k*P^2)";
    let f_pp = "(-2*h*k*P*Q*(3 - k*P^2)/(1 + k*P^2)^3)";
    let f_pq = "h*(1 - k*P^2)/(1 + k*P^2)^2";
    let bracket = format!("(2*a + 1)*P + a*Q - {f_p} - {f_q}");
    let n12 = format!("1/2*({bracket})");
    let r1 = format!("a + 1/2*(1 - {f_pp} - {f_pq})");
    let r2 = format!("1/2*(a - {f_pq})");

    let mut g = GoldenSet::new();
    g.insert_helper("F", golden(f));
    g.insert("d(F)/dP", golden(f_p));
    g.insert("d(F)/dQ", golden(f_q));
    g.insert("d(F)/dPP", golden(f_pp));
    g.insert("d(F)/dPQ", golden(f_pq));
    g.insert("d(F)/dQQ", Expr::zero());
    g.insert("jacobian[1][1]", golden(&format!("1 - 2*P - Q + {f_p}")));
    g.insert("jacobian[1][2]", golden(&format!("-P + {f_q}")));
    g.insert("jacobian[2][1]", golden(&format!("2*a*P + a*Q - {f_p}")));
    g.insert("jacobian[2][2]", golden(&format!("-r + a*P - {f_q}")));
    g.insert("connection[1][1]", Expr::zero());
    g.insert("connection[2][2]", Expr::zero());
    g.insert("connection[1][2]", golden(&n12));
    g.insert("connection[2][1]", golden(&format!("-{n12}")));
    for k in 1..=2 {
        for i in 1..=2 {
            g.insert(format!("torsion[{k}][{i}][{i}]"), Expr::zero());
        }
    }
    g.insert("torsion[1][1][2]", golden(&r1));
    g.insert("torsion[1][2][1]", golden(&format!("-({r1})")));
    g.insert("torsion[2][1][2]", golden(&r2));
    g.insert("torsion[2][2][1]", golden(&format!("-{r2}")));
    g.insert("electromagnetic[1][1]", Expr::zero());
    g.insert("electromagnetic[2][2]", Expr::zero());
    g.insert("electromagnetic[2][1]", golden(&n12));
    g.insert("electromagnetic[1][2]", golden(&format!("-{n12}")));
    g.insert("EYM", golden(&format!("1/4*({bracket})^2")));
    Ok((system, g))
}

/// Uninfected T cells, infected cells `T_star` and virions `V`. The
/// parameter usually written as a Greek delta is named `delta`.
#[allow(clippy::too_many_arguments)]
pub fn hiv_model(s: f64, p: f64, d: f64, delta: f64, m: f64, k: f64, n: f64, c: f64) -> Result<(OdeSystem, GoldenSet), ModelError> {
    let params = [("s", s), ("p", p), ("d", d), ("delta", delta), ("m", m), ("k", k), ("n", n), ("c", c)];
    ensure_positive(&params)?;
    let system = build(
        &["T", "T_star", "V"],
        &params,
        &["s + (p - d)*T - p*T^2/m - k*V*T", "k*T*V - delta*T_star", "n*delta*T_star - c*V"],
    );

    let mut g = GoldenSet::new();
    let jac = [
        ["p - d - 2*p/m*T - k*V", "0", "-k*T"],
        ["k*V", "-delta", "k*T"],
        ["0", "n*delta", "-c"],
    ];
    // The connection is -1/2 of this matrix and the form is +1/2 of it.
    let m_entries = [["0", "-k*V", "-k*T"], ["k*V", "0", "k*T - n*delta"], ["k*T", "-k*T + n*delta", "0"]];
    let r1 = [["0", "0", "k/2"], ["0", "0", "-k/2"], ["-k/2", "k/2", "0"]];
    let r3 = [["0", "k/2", "0"], ["-k/2", "0", "0"], ["0", "0", "0"]];
    for i in 0..3 {
        for j in 0..3 {
            let (pi, pj) = (i + 1, j + 1);
            g.insert(format!("jacobian[{pi}][{pj}]"), golden(jac[i][j]));
            g.insert(format!("connection[{pi}][{pj}]"), golden(&format!("-1/2*({})", m_entries[i][j])));
            g.insert(format!("torsion[1][{pi}][{pj}]"), golden(r1[i][j]));
            g.insert(format!("torsion[2][{pi}][{pj}]"), Expr::zero());
            g.insert(format!("torsion[3][{pi}][{pj}]"), golden(r3[i][j]));
            g.insert(format!("electromagnetic[{pi}][{pj}]"), golden(&format!("1/2*({})", m_entries[i][j])));
        }
    }
    g.insert("EYM", golden("1/4*(k^2*(V^2 + T^2) + (k*T - n*delta)^2)"));
    Ok((system, g))
}

/// Names accepted by [`builtin`].
pub const MODEL_NAMES: [&str; 2] = ["cancer", "hiv1"];

/// Smoke-test instance of a built-in model with every parameter at 1.0.
pub fn builtin(name: &str) -> Result<(OdeSystem, GoldenSet), ModelError> {
    match name {
        "cancer" => cancer_model(1.0, 1.0, 1.0, 1.0),
        "hiv1" => hiv_model(1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0),
        other => Err(ModelError::UnknownModel(other.to_string())),
    }
}

/// `(P, Q)` in `[0.1, 5]^2`.
pub fn cancer_domain() -> DomainBox {
    DomainBox::new().with("P", 0.1, 5.0).with("Q", 0.1, 5.0)
}

/// `(T, T_star, V)` in `[0.1, 10]^3`.
pub fn hiv_domain() -> DomainBox {
    DomainBox::new().with("T", 0.1, 10.0).with("T_star", 0.1, 10.0).with("V", 0.1, 10.0)
}

/// State box used by the regression suites for a built-in model name.
pub fn default_domain(name: &str) -> Result<DomainBox, ModelError> {
    match name {
        "cancer" => Ok(cancer_domain()),
        "hiv1" => Ok(hiv_domain()),
        other => Err(ModelError::UnknownModel(other.to_string())),
    }
}

/// Adds `interval` for every parameter, so comparisons resample them at
/// each point instead of using the system's values.
pub fn with_parameter_ranges(s: &OdeSystem, domain: &DomainBox, interval: Interval) -> DomainBox {
    let mut d = domain.clone();
    for (name, _) in s.params() {
        d.insert(name, interval);
    }
    d
}

/// Engine-side objects that golden paths refer to.
#[derive(Debug, Clone)]
pub struct EngineObjects {
    pub states: Vec<String>,
    pub jacobian: ExprMatrix,
    pub connection: ExprMatrix,
    pub torsion: Vec<ExprMatrix>,
    pub electromagnetic: ExprMatrix,
    pub yang_mills_energy: Expr,
}

impl EngineObjects {
    pub fn new(s: &OdeSystem) -> EngineObjects {
        let jacobian = jacobian(s);
        let connection = connection_from_jacobian(&jacobian);
        let torsion = torsion_from_connection(s, &connection);
        let electromagnetic = electromagnetic_from_connection(&connection);
        let yang_mills_energy = energy_from_form(&electromagnetic);
        EngineObjects {
            states: s.states().to_vec(),
            jacobian,
            connection,
            torsion,
            electromagnetic,
            yang_mills_energy,
        }
    }

    /// Engine expression for `path`; helper derivatives need `golden` for
    /// the helper definition.
    pub fn resolve(&self, path: &str, golden: &GoldenSet) -> Result<Expr, ModelError> {
        let fail = || ModelError::UnresolvablePath(path.to_string());
        if path == "EYM" {
            return Ok(self.yang_mills_energy.clone());
        }
        if let Some(rest) = path.strip_prefix("d(") {
            let (name, vars) = rest.split_once(")/d").ok_or_else(fail)?;
            let mut e = golden.helper(name).ok_or_else(fail)?.clone();
            for var in split_states(vars, &self.states).ok_or_else(fail)? {
                e = e.differentiate(var);
            }
            return Ok(e);
        }
        let open = path.find('[').ok_or_else(fail)?;
        let (head, tail) = path.split_at(open);
        let idx = parse_indices(tail).ok_or_else(fail)?;
        let n = self.states.len();
        let in_range = |v: &[usize]| v.iter().all(|&i| (1..=n).contains(&i));
        if !in_range(&idx) {
            return Err(fail());
        }
        let m = match (head, idx.as_slice()) {
            ("jacobian", [i, j]) => self.jacobian.get(i - 1, j - 1),
            ("connection", [i, j]) => self.connection.get(i - 1, j - 1),
            ("electromagnetic", [i, j]) => self.electromagnetic.get(i - 1, j - 1),
            ("torsion", [k, i, j]) => self.torsion[k - 1].get(i - 1, j - 1),
            _ => return Err(fail()),
        };
        Ok(m.clone())
    }
}

fn parse_indices(tail: &str) -> Option<Vec<usize>> {
    let inner = tail.strip_prefix('[')?.strip_suffix(']')?;
    inner.split("][").map(|t| t.parse().ok()).collect()
}

/// Splits `PQ` into known state names, preferring the longest match.
fn split_states<'a>(mut vars: &str, states: &'a [String]) -> Option<Vec<&'a str>> {
    let mut out = Vec::new();
    while !vars.is_empty() {
        let best = states.iter().filter(|s| vars.starts_with(s.as_str())).max_by_key(|s| s.len())?;
        out.push(best.as_str());
        vars = &vars[best.len()..];
    }
    (!out.is_empty()).then_some(out)
}

/// Per-path verdicts of a golden comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldenReport {
    pub checks: Vec<Check>,
    pub max_deviation: f64,
    pub passed: bool,
}

impl GoldenReport {
    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

/// Compares every golden against the engine on `domain` (parameters not
/// covered by `domain` keep the system's values).
pub fn golden_compare(s: &OdeSystem, golden: &GoldenSet, domain: &DomainBox, cfg: &Equivalence) -> Result<GoldenReport, ModelError> {
    golden.validate(s)?;
    let engine = EngineObjects::new(s);
    let dom = s.domain_with(domain);
    let mut checks = Vec::with_capacity(golden.len());
    for (path, expected) in golden.iter() {
        let actual = engine.resolve(path, golden)?;
        let c = compare(&actual, expected, &dom, cfg)?;
        let mut check = Check::from_deviation(format!("golden:{}", path), c.max_deviation, cfg.tolerance);
        if !check.passed && !c.worst_point.is_empty() {
            let at: Vec<String> = c.worst_point.iter().map(|(k, v)| format!("{}={:.6}", k, v)).collect();
            check = check.with_detail(format!("worst at {}", at.join(", ")));
        }
        checks.push(check);
    }
    let max_deviation = checks.iter().map(|c| c.max_deviation).fold(0.0_f64, |m, d| if d.is_nan() { d } else { m.max(d) });
    let passed = checks.iter().all(|c| c.passed);
    Ok(GoldenReport {
        checks,
        max_deviation,
        passed,
    })
}
