//! The jet least-squares Lagrangian and its flow lines.
//!
//! `L(x, x1) = sum_i (x1_i - X_i(x))^2` vanishes exactly on solutions of
//! `x' = X(x)`, so those solutions are stationary for the action and satisfy
//! the Euler-Lagrange equations of `L`. With the Euclidean metric those
//! equations read
//!
//! ```text
//! x'' = (J - J^T) x' + J^T X
//! ```
//!
//! This module builds both sides symbolically, integrates flows with
//! fixed-step RK4, and checks integrated trajectories against the
//! Euler-Lagrange residual using central differences.

use std::fmt::Write as _;

use thiserror::Error;

use crate::expr::{add, mul, sample_values, sub, CompiledExpr, DomainBox, EquivalenceError, EvalError, Expr, Interval};
use crate::geometry::jacobian;
use crate::system::OdeSystem;
use crate::verify::{Check, MaxDeviation};

/// Velocity symbols are `x1_<state>`.
pub const VELOCITY_PREFIX: &str = "x1_";
/// Step used when the caller does not choose one.
pub const DEFAULT_STEP: f64 = 1e-3;
/// Geodesic residual bound, relative to `1 + max state norm`.
pub const GEODESIC_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VariationalError {
    #[error("velocity symbol `{0}` collides with an existing name")]
    VelocityCollision(String),
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid step: dt = {dt}, t_end = {t_end}")]
    InvalidStep { dt: f64, t_end: f64 },
    #[error("evaluation failed at t = {time} (state {state:?}): {source}")]
    Evaluation { time: f64, state: Vec<f64>, source: EvalError },
    #[error("non-finite state at t = {time}: {state:?}")]
    NonFinite { time: f64, state: Vec<f64> },
    #[error("at least 3 samples are needed, got {0}")]
    TooFewSamples(usize),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Sampling(#[from] EquivalenceError),
}

/// Position and velocity on the 1-jet space (time is implicit).
#[derive(Debug, Clone, PartialEq)]
pub struct JetPoint {
    pub x: Vec<f64>,
    pub x1: Vec<f64>,
}

/// Uniformly sampled solution curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub dt: f64,
    pub samples: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn time(&self, m: usize) -> f64 {
        self.t0 + m as f64 * self.dt
    }

    pub fn last(&self) -> &[f64] {
        self.samples.last().map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn max_state_norm(&self) -> f64 {
        self.samples.iter().map(|x| norm(x)).fold(0.0, f64::max)
    }

    /// `t,<name1>,...` followed by one row per sample, 17 significant digits.
    pub fn to_csv(&self, names: &[String]) -> String {
        let mut out = String::new();
        out.push('t');
        for n in names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (m, x) in self.samples.iter().enumerate() {
            let _ = write!(out, "{:.16e}", self.time(m));
            for v in x {
                let _ = write!(out, ",{:.16e}", v);
            }
            out.push('\n');
        }
        out
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn velocity_names(s: &OdeSystem) -> Result<Vec<String>, VariationalError> {
    s.states()
        .iter()
        .map(|x| {
            let v = format!("{}{}", VELOCITY_PREFIX, x);
            if s.is_declared(&v) {
                Err(VariationalError::VelocityCollision(v))
            } else {
                Ok(v)
            }
        })
        .collect()
}

/// `sum_i (x1_i - X_i)^2`, without a 1/2 prefactor.
pub fn least_squares_lagrangian(s: &OdeSystem) -> Result<Expr, VariationalError> {
    let vel = velocity_names(s)?;
    Ok(vel
        .iter()
        .zip(s.components())
        .fold(Expr::zero(), |acc, (v, x)| add(acc, sub(Expr::sym(v), x.clone()).pow(2))))
}

/// `x''_i = sum_j (J_ij - J_ji) x1_j + sum_j J_ji X_j`, as expressions in
/// states, velocities and parameters.
pub fn second_order_prolongation(s: &OdeSystem) -> Result<Vec<Expr>, VariationalError> {
    let vel = velocity_names(s)?;
    let j = jacobian(s);
    let n = s.dim();
    Ok((0..n)
        .map(|i| {
            let mut acc = Expr::zero();
            for k in 0..n {
                if i != k {
                    let helicity = sub(j.get(i, k).clone(), j.get(k, i).clone());
                    acc = add(acc, mul(helicity, Expr::sym(&vel[k])));
                }
                acc = add(acc, mul(j.get(k, i).clone(), s.components()[k].clone()));
            }
            acc
        })
        .collect())
}

fn slots(s: &OdeSystem, vel: &[String]) -> Vec<String> {
    s.states()
        .iter()
        .cloned()
        .chain(vel.iter().cloned())
        .chain(s.params().iter().map(|(n, _)| n.clone()))
        .collect()
}

/// Compiled Euler-Lagrange operator of the least-squares Lagrangian.
///
/// The total time derivative is expanded along `(x, x1, x2)`:
/// `d/dt dL/dx1_i = sum_k d2L/dx1_i dx^k x1_k + d2L/dx1_i dx1_k x2_k`.
#[derive(Debug, Clone)]
pub struct EulerLagrange {
    n: usize,
    params: Vec<f64>,
    dl_dx: Vec<CompiledExpr>,
    mixed: Vec<CompiledExpr>,
    hessian: Vec<CompiledExpr>,
}

impl EulerLagrange {
    pub fn new(s: &OdeSystem) -> Result<EulerLagrange, VariationalError> {
        let vel = velocity_names(s)?;
        let lagrangian = least_squares_lagrangian(s)?;
        let slots = slots(s, &vel);
        let n = s.dim();
        let compile = |e: Expr| e.simplify().compile(&slots).expect("all symbols are slots");
        let dl_dv: Vec<Expr> = vel.iter().map(|v| lagrangian.differentiate(v)).collect();
        let mut mixed = Vec::with_capacity(n * n);
        let mut hessian = Vec::with_capacity(n * n);
        for dv in &dl_dv {
            for k in 0..n {
                mixed.push(compile(dv.differentiate(&s.states()[k])));
                hessian.push(compile(dv.differentiate(&vel[k])));
            }
        }
        Ok(EulerLagrange {
            n,
            params: s.params().iter().map(|(_, v)| *v).collect(),
            dl_dx: s.states().iter().map(|x| compile(lagrangian.differentiate(x))).collect(),
            mixed,
            hessian,
        })
    }

    fn point(&self, x: &[f64], x1: &[f64], params: &[f64]) -> Result<Vec<f64>, VariationalError> {
        for v in [x, x1] {
            if v.len() != self.n {
                return Err(VariationalError::DimensionMismatch {
                    expected: self.n,
                    found: v.len(),
                });
            }
        }
        let mut pt = Vec::with_capacity(2 * self.n + self.params.len());
        pt.extend_from_slice(x);
        pt.extend_from_slice(x1);
        pt.extend_from_slice(params);
        Ok(pt)
    }

    /// `dL/dx^i - d/dt dL/dx1_i` for each `i`.
    pub fn residual(&self, x: &[f64], x1: &[f64], x2: &[f64]) -> Result<Vec<f64>, VariationalError> {
        let pt = self.point(x, x1, &self.params)?;
        if x2.len() != self.n {
            return Err(VariationalError::DimensionMismatch {
                expected: self.n,
                found: x2.len(),
            });
        }
        let n = self.n;
        (0..n)
            .map(|i| {
                let mut total = 0.0;
                for k in 0..n {
                    total += self.mixed[i * n + k].eval(&pt)? * x1[k] + self.hessian[i * n + k].eval(&pt)? * x2[k];
                }
                Ok(self.dl_dx[i].eval(&pt)? - total)
            })
            .collect()
    }

    /// Solves the Euler-Lagrange equations for `x2` at `(x, x1)`.
    pub fn acceleration(&self, x: &[f64], x1: &[f64]) -> Result<Vec<f64>, VariationalError> {
        self.acceleration_with(x, x1, &self.params)
    }

    /// [`acceleration`](Self::acceleration) with parameter values in
    /// declaration order instead of the system's own.
    pub fn acceleration_with(&self, x: &[f64], x1: &[f64], params: &[f64]) -> Result<Vec<f64>, VariationalError> {
        if params.len() != self.params.len() {
            return Err(VariationalError::DimensionMismatch {
                expected: self.params.len(),
                found: params.len(),
            });
        }
        let pt = self.point(x, x1, params)?;
        let n = self.n;
        let mut a = vec![vec![0.0; n + 1]; n];
        for (i, row) in a.iter_mut().enumerate() {
            let mut rhs = self.dl_dx[i].eval(&pt)?;
            for k in 0..n {
                rhs -= self.mixed[i * n + k].eval(&pt)? * x1[k];
                row[k] = self.hessian[i * n + k].eval(&pt)?;
            }
            row[n] = rhs;
        }
        solve_in_place(&mut a);
        Ok(a.iter().map(|row| row[n]).collect())
    }
}

/// Gaussian elimination with partial pivoting on an augmented `n x (n+1)`
/// matrix; the solution ends up in the last column.
fn solve_in_place(a: &mut [Vec<f64>]) {
    let n = a.len();
    for c in 0..n {
        let pivot = (c..n)
            .max_by(|&r1, &r2| a[r1][c].abs().total_cmp(&a[r2][c].abs()))
            .expect("non-empty");
        a.swap(c, pivot);
        for r in 0..n {
            if r != c {
                let factor = a[r][c] / a[c][c];
                for k in c..=n {
                    a[r][k] -= factor * a[c][k];
                }
            }
        }
    }
    for row in a.iter_mut().take(n) {
        let d = row[..n].iter().find(|v| **v != 0.0).copied().unwrap_or(f64::NAN);
        row[n] /= d;
    }
}

/// One-shot residual; build an [`EulerLagrange`] to evaluate many points.
pub fn euler_lagrange_residual(s: &OdeSystem, x: &[f64], x1: &[f64], x2: &[f64]) -> Result<Vec<f64>, VariationalError> {
    EulerLagrange::new(s)?.residual(x, x1, x2)
}

/// Compares the closed-form prolongation with the accelerations obtained by
/// solving the Euler-Lagrange equations, at seeded points where states come
/// from `domain` and velocities from `velocity_range`. Parameters covered
/// by `domain` are sampled too.
pub fn prolongation_cross_check(
    s: &OdeSystem,
    domain: &DomainBox,
    velocity_range: Interval,
    samples: usize,
    seed: u64,
) -> Result<Check, VariationalError> {
    let vel = velocity_names(s)?;
    let mut dom = s.domain_with(domain);
    for v in &vel {
        dom.insert(v, velocity_range);
    }
    let prolongation = second_order_prolongation(s)?;
    let el = EulerLagrange::new(s)?;
    let n = s.dim();
    // Sample the prolongation together with the raw coordinates.
    let mut exprs = prolongation.clone();
    exprs.extend(s.states().iter().map(|x| Expr::sym(x)));
    exprs.extend(vel.iter().map(|v| Expr::sym(v)));
    exprs.extend(s.params().iter().map(|(p, _)| Expr::sym(p)));
    let points = sample_values(&exprs, &dom, samples, seed)?;
    let mut worst = MaxDeviation::default();
    for v in &points {
        let (acc, rest) = v.split_at(n);
        let (x, rest) = rest.split_at(n);
        let (x1, params) = rest.split_at(n);
        let solved = el.acceleration_with(x, x1, params)?;
        for (a, b) in acc.iter().zip(&solved) {
            worst.record(a - b, a.abs().max(b.abs()));
        }
    }
    Ok(Check::from_deviation("prolongation-matches-euler-lagrange", worst.0, 1e-12))
}

/// Classical fixed-step RK4 from `t = 0`. Samples are taken at `m * dt` for
/// every grid time not past `t_end`.
pub fn integrate_flow(s: &OdeSystem, x0: &[f64], t_end: f64, dt: f64) -> Result<Trajectory, VariationalError> {
    let n = s.dim();
    if x0.len() != n {
        return Err(VariationalError::DimensionMismatch {
            expected: n,
            found: x0.len(),
        });
    }
    if !(dt > 0.0 && t_end > 0.0 && dt < t_end && dt.is_finite() && t_end.is_finite()) {
        return Err(VariationalError::InvalidStep { dt, t_end });
    }
    let steps = (t_end / dt + 1e-9).floor() as usize;
    let field = s.compile_field();
    let mut scratch = Vec::new();
    let mut k = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut tmp = vec![0.0; n];
    let mut samples = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    samples.push(x.clone());
    for m in 0..steps {
        let t = m as f64 * dt;
        let fail = |source: EvalError, state: &[f64]| VariationalError::Evaluation {
            time: t,
            state: state.to_vec(),
            source,
        };
        field.eval_into(&x, &mut scratch, &mut k[0]).map_err(|e| fail(e, &x))?;
        for stage in 1..4 {
            let h = if stage == 3 { dt } else { 0.5 * dt };
            for i in 0..n {
                tmp[i] = x[i] + h * k[stage - 1][i];
            }
            let (_, rest) = k.split_at_mut(stage);
            field.eval_into(&tmp, &mut scratch, &mut rest[0]).map_err(|e| fail(e, &tmp))?;
        }
        for i in 0..n {
            x[i] += dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(VariationalError::NonFinite {
                time: (m + 1) as f64 * dt,
                state: x,
            });
        }
        samples.push(x.clone());
    }
    Ok(Trajectory { t0: 0.0, dt, samples })
}

/// Result of checking a trajectory against the Euler-Lagrange equations.
#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicReport {
    pub check: Check,
    /// Euclidean norm of the residual at each interior sample (index `m`
    /// of the trajectory is entry `m - 1`).
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Trajectory index where the residual peaks.
    pub max_index: usize,
    pub max_state_norm: f64,
}

pub fn geodesic_check(s: &OdeSystem, traj: &Trajectory) -> Result<GeodesicReport, VariationalError> {
    geodesic_check_with(s, traj, GEODESIC_TOLERANCE)
}

/// Central-difference velocities and accelerations at interior samples,
/// fed to the Euler-Lagrange residual. Passes iff
/// `max |residual| <= tolerance * (1 + max state norm)`.
pub fn geodesic_check_with(s: &OdeSystem, traj: &Trajectory, tolerance: f64) -> Result<GeodesicReport, VariationalError> {
    let count = traj.samples.len();
    if count < 3 {
        return Err(VariationalError::TooFewSamples(count));
    }
    let n = s.dim();
    if let Some(bad) = traj.samples.iter().find(|x| x.len() != n) {
        return Err(VariationalError::DimensionMismatch {
            expected: n,
            found: bad.len(),
        });
    }
    let el = EulerLagrange::new(s)?;
    let dt = traj.dt;
    let mut residuals = Vec::with_capacity(count - 2);
    let mut x1 = vec![0.0; n];
    let mut x2 = vec![0.0; n];
    for m in 1..count - 1 {
        let (prev, cur, next) = (&traj.samples[m - 1], &traj.samples[m], &traj.samples[m + 1]);
        for i in 0..n {
            x1[i] = (next[i] - prev[i]) / (2.0 * dt);
            x2[i] = ((next[i] - cur[i]) - (cur[i] - prev[i])) / (dt * dt);
        }
        let r = el.residual(cur, &x1, &x2).map_err(|e| match e {
            VariationalError::Eval(source) => VariationalError::Evaluation {
                time: traj.time(m),
                state: cur.clone(),
                source,
            },
            other => other,
        })?;
        residuals.push(norm(&r));
    }
    let (max_pos, max_residual) = residuals
        .iter()
        .copied()
        .enumerate()
        .fold((0, 0.0_f64), |(bi, bv), (i, v)| if v > bv || v.is_nan() { (i, v) } else { (bi, bv) });
    let max_state_norm = traj.max_state_norm();
    let max_index = max_pos + 1;
    let check = Check::from_deviation("geodesic-residual", max_residual / (1.0 + max_state_norm), tolerance).with_detail(
        format!("max residual {:.3e} at sample {} (t = {})", max_residual, max_index, traj.time(max_index)),
    );
    Ok(GeodesicReport {
        check,
        residuals,
        max_residual,
        max_index,
        max_state_norm,
    })
}
