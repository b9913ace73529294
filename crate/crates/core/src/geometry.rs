//! Geometric objects induced on the 1-jet space by a first-order system.
//!
//! With the Euclidean metric pair on time and space, the least-squares
//! Lagrangian of `x' = X(x)` determines:
//!
//! * the nonlinear connection `N = -(J - J^T)/2`, `J` the Jacobian of `X`;
//! * a generalized Cartan connection and a curvature tensor whose adapted
//!   components all vanish;
//! * torsion matrices `R_k = dN/dx^k`;
//! * the electromagnetic 2-form `F = -N`, satisfying the cyclic identity
//!   `d_k F_ij + d_i F_jk + d_j F_ki = 0`;
//! * the Yang-Mills energy `EYM = tr(F F^T)/2 = sum_{i<j} F_ij^2`.
//!
//! Everything here works in one fixed global chart of `R^n`.

use thiserror::Error;

use crate::expr::{add, mul, neg, pow, sample_values, sub, DomainBox, Equivalence, EquivalenceError, Expr};
use crate::system::{ExprMatrix, OdeSystem};
use crate::verify::{Check, MaxDeviation};

/// Absolute tolerance (times `1 + scale`) for polynomial identities.
pub const POLYNOMIAL_TOLERANCE: f64 = 1e-12;
/// Relative tolerance for rational-function identities.
pub const RATIONAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("degenerate domain box: {0}")]
    DegenerateDomain(String),
    #[error(transparent)]
    Sampling(#[from] EquivalenceError),
}

pub fn jacobian(s: &OdeSystem) -> ExprMatrix {
    let n = s.dim();
    ExprMatrix::from_fn(n, n, |i, j| s.components()[i].differentiate(&s.states()[j]).simplify())
}

/// `N(i,j) = -(J(i,j) - J(j,i)) / 2`, with a structurally zero diagonal.
pub fn connection_from_jacobian(j: &ExprMatrix) -> ExprMatrix {
    ExprMatrix::from_fn(j.rows(), j.cols(), |r, c| {
        if r == c {
            Expr::zero()
        } else {
            mul(Expr::num(-0.5), sub(j.get(r, c).clone(), j.get(c, r).clone()))
        }
    })
}

pub fn nonlinear_connection(s: &OdeSystem) -> ExprMatrix {
    connection_from_jacobian(&jacobian(s))
}

/// An object whose adapted components vanish identically in the Euclidean
/// setting. Kept explicit so reports list it alongside the others.
#[derive(Debug, Clone, PartialEq)]
pub struct VanishingObject {
    pub name: &'static str,
    /// Component count of the full object, for reporting.
    pub components: usize,
}

impl VanishingObject {
    pub fn note(&self) -> String {
        format!(
            "all {} adapted components of the {} vanish for the metric pair (T, 1), (R^n, delta_ij)",
            self.components, self.name
        )
    }

    pub fn check(&self) -> Check {
        Check::from_deviation(format!("{}-vanishes", self.name.replace(' ', "-")), 0.0, 0.0)
            .with_detail("identically zero")
    }
}

/// Adapted components `L(i; j, k)` and `C(i, (1); j, k)` of the Cartan connection.
pub fn cartan_connection(s: &OdeSystem) -> VanishingObject {
    let n = s.dim();
    VanishingObject {
        name: "cartan connection",
        components: 2 * n * n * n,
    }
}

/// Adapted components of the curvature d-tensor.
pub fn curvature(s: &OdeSystem) -> VanishingObject {
    let n = s.dim();
    VanishingObject {
        name: "curvature",
        components: n.pow(4),
    }
}

/// `R_k = dN/dx^k` for every state `x^k`; entry `(i, j)` of slice `k`.
pub fn torsion_from_connection(s: &OdeSystem, connection: &ExprMatrix) -> Vec<ExprMatrix> {
    s.states()
        .iter()
        .map(|x| connection.map(|e| e.differentiate(x).simplify()))
        .collect()
}

pub fn torsion(s: &OdeSystem) -> Vec<ExprMatrix> {
    torsion_from_connection(s, &nonlinear_connection(s))
}

pub fn electromagnetic_from_connection(connection: &ExprMatrix) -> ExprMatrix {
    connection.map(|e| neg(e.clone()))
}

pub fn electromagnetic_form(s: &OdeSystem) -> ExprMatrix {
    electromagnetic_from_connection(&nonlinear_connection(s))
}

/// `sum_{i<j} F(i,j)^2`.
pub fn energy_from_form(f: &ExprMatrix) -> Expr {
    let mut acc = Expr::zero();
    for i in 0..f.rows() {
        for j in (i + 1)..f.cols() {
            acc = add(acc, pow(f.get(i, j).clone(), 2));
        }
    }
    acc
}

/// `tr(F F^T) / 2`, built from the full matrix product.
pub fn energy_trace_form(f: &ExprMatrix) -> Expr {
    let ft = f.transpose();
    let mut trace = Expr::zero();
    for i in 0..f.rows() {
        for j in 0..f.cols() {
            trace = add(trace, mul(f.get(i, j).clone(), ft.get(j, i).clone()));
        }
    }
    mul(Expr::num(0.5), trace)
}

pub fn yang_mills_energy(s: &OdeSystem) -> Expr {
    energy_from_form(&electromagnetic_form(s))
}

fn state_domain(s: &OdeSystem, domain: &DomainBox) -> Result<DomainBox, GeometryError> {
    for x in s.states() {
        match domain.get(x) {
            None => return Err(GeometryError::DegenerateDomain(format!("no interval for state `{}`", x))),
            Some(iv) if !iv.is_valid() || iv.width() <= 0.0 => {
                return Err(GeometryError::DegenerateDomain(format!(
                    "interval [{}, {}] for state `{}`",
                    iv.lo, iv.hi, x
                )))
            }
            Some(_) => {}
        }
    }
    Ok(s.domain_with(domain))
}

/// Maximum over sample points and index triples of the scaled cyclic sum
/// `d_k F(i,j) + d_i F(j,k) + d_j F(k,i)`.
///
/// The covariant derivative here is the plain partial derivative. Each sum
/// is scaled by `1 + max |term|` at its point.
pub fn maxwell_check_form(
    s: &OdeSystem,
    f: &ExprMatrix,
    domain: &DomainBox,
    samples: usize,
    seed: u64,
) -> Result<Check, GeometryError> {
    let dom = state_domain(s, domain)?;
    let n = s.dim();
    // dF[k][i][j] flattened as k*n*n + i*n + j
    let mut derivs = Vec::with_capacity(n * n * n);
    for x in s.states() {
        for i in 0..n {
            for j in 0..n {
                derivs.push(f.get(i, j).differentiate(x).simplify());
            }
        }
    }
    let at = |vals: &[f64], k: usize, i: usize, j: usize| vals[k * n * n + i * n + j];
    let points = sample_values(&derivs, &dom, samples, seed)?;
    let mut worst = MaxDeviation::default();
    for vals in &points {
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let terms = [at(vals, k, i, j), at(vals, i, j, k), at(vals, j, k, i)];
                    let scale = terms.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
                    worst.record(terms.iter().sum(), scale);
                }
            }
        }
    }
    Ok(Check::from_deviation("maxwell", worst.0, RATIONAL_TOLERANCE)
        .with_detail(format!("{} triples at {} points", n * n * n, points.len())))
}

pub fn maxwell_check(s: &OdeSystem, domain: &DomainBox) -> Result<Check, GeometryError> {
    maxwell_check_form(s, &electromagnetic_form(s), domain, 32, 0)
}

/// All objects for one system, plus their verification records.
#[derive(Debug, Clone)]
pub struct GeometryReport {
    pub jacobian: ExprMatrix,
    pub connection: ExprMatrix,
    pub cartan: VanishingObject,
    pub torsion: Vec<ExprMatrix>,
    pub curvature: VanishingObject,
    pub electromagnetic: ExprMatrix,
    pub yang_mills_energy: Expr,
    pub yang_mills_trace: Expr,
    pub cartan_vanishes: Check,
    pub curvature_vanishes: Check,
    pub maxwell: Check,
    /// Antisymmetry, `F = -N`, energy cross-check and sign.
    pub invariants: Vec<Check>,
}

impl GeometryReport {
    /// Builds every object symbolically, then checks identities at
    /// `cfg.samples` points of `domain` (states must all be covered;
    /// parameters default to the system's values).
    pub fn compute(s: &OdeSystem, domain: &DomainBox, cfg: &Equivalence) -> Result<GeometryReport, GeometryError> {
        let jacobian = jacobian(s);
        let connection = connection_from_jacobian(&jacobian);
        let torsion = torsion_from_connection(s, &connection);
        let electromagnetic = electromagnetic_from_connection(&connection);
        let yang_mills_energy = energy_from_form(&electromagnetic);
        let yang_mills_trace = energy_trace_form(&electromagnetic);
        let cartan = cartan_connection(s);
        let curvature = curvature(s);
        let maxwell = maxwell_check_form(s, &electromagnetic, domain, cfg.samples, cfg.seed)?;
        let mut report = GeometryReport {
            cartan_vanishes: cartan.check(),
            curvature_vanishes: curvature.check(),
            jacobian,
            connection,
            cartan,
            torsion,
            curvature,
            electromagnetic,
            yang_mills_energy,
            yang_mills_trace,
            maxwell,
            invariants: Vec::new(),
        };
        report.invariants = report.invariant_checks(s, domain, cfg)?;
        Ok(report)
    }

    fn invariant_checks(&self, s: &OdeSystem, domain: &DomainBox, cfg: &Equivalence) -> Result<Vec<Check>, GeometryError> {
        let dom = state_domain(s, domain)?;
        let n = s.dim();
        let nn = n * n;
        // Layout: N, F, R_1..R_n, EYM (triangular), EYM (trace).
        let mut exprs: Vec<Expr> = Vec::with_capacity(nn * (n + 2) + 2);
        exprs.extend(self.connection.entries().iter().cloned());
        exprs.extend(self.electromagnetic.entries().iter().cloned());
        for slice in &self.torsion {
            exprs.extend(slice.entries().iter().cloned());
        }
        exprs.push(self.yang_mills_energy.clone());
        exprs.push(self.yang_mills_trace.clone());
        let points = sample_values(&exprs, &dom, cfg.samples, cfg.seed)?;

        let mut n_anti = MaxDeviation::default();
        let mut f_neg = MaxDeviation::default();
        let mut r_anti = MaxDeviation::default();
        let mut forms = MaxDeviation::default();
        let mut min_energy = f64::INFINITY;
        for v in &points {
            let nv = &v[..nn];
            let fv = &v[nn..2 * nn];
            let scale_n = nv.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            for i in 0..n {
                for j in 0..n {
                    n_anti.record(nv[i * n + j] + nv[j * n + i], scale_n);
                    f_neg.record(fv[i * n + j] + nv[i * n + j], scale_n);
                }
            }
            for k in 0..n {
                let rv = &v[(2 + k) * nn..(3 + k) * nn];
                let scale_r = rv.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
                for i in 0..n {
                    for j in 0..n {
                        r_anti.record(rv[i * n + j] + rv[j * n + i], scale_r);
                    }
                }
            }
            let tri = v[nn * (n + 2)];
            let tr = v[nn * (n + 2) + 1];
            forms.record(tri - tr, tri.abs().max(tr.abs()));
            min_energy = min_energy.min(tri);
        }
        let negativity = if min_energy < 0.0 { -min_energy } else { 0.0 };
        Ok(vec![
            Check::from_deviation("connection-antisymmetric", n_anti.0, POLYNOMIAL_TOLERANCE),
            Check::from_deviation("electromagnetic-equals-minus-connection", f_neg.0, POLYNOMIAL_TOLERANCE),
            Check::from_deviation("torsion-antisymmetric", r_anti.0, POLYNOMIAL_TOLERANCE),
            Check::from_deviation("energy-trace-equals-triangular-sum", forms.0, POLYNOMIAL_TOLERANCE),
            Check::from_deviation("energy-nonnegative", negativity, 0.0),
        ])
    }

    /// Every verification record, in report order.
    pub fn checks(&self) -> Vec<&Check> {
        let mut out = vec![&self.cartan_vanishes, &self.curvature_vanishes, &self.maxwell];
        out.extend(self.invariants.iter());
        out
    }

    pub fn all_passed(&self) -> bool {
        self.checks().iter().all(|c| c.passed)
    }
}
