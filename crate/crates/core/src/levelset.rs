//! Level sets of the Yang-Mills energy.
//!
//! Two closed-form cases are handled exactly. For the HIV-1 flow the energy
//! surfaces are cylinders over the conic
//! `2k^2 T^2 + k^2 V^2 - 2kn delta T + n^2 delta^2 - 4C = 0`, classified by
//! the invariants of its matrix. The zero-energy curve of the cancer flow
//! is the graph of a rational function of `P`. Every other case goes
//! through marching squares on a 2D slice of state space.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use rayon::prelude::*;
use thiserror::Error;

use crate::expr::{Bindings, CompiledExpr, EvalError, Expr, Interval};
use crate::geometry::yang_mills_energy;
use crate::system::OdeSystem;
use crate::verify::Check;

/// Relative band around the critical level inside which the HIV-1 energy
/// surface is reported as a line.
pub const DEGENERACY_BAND: f64 = 1e-12;
/// Relative threshold below which a zero-curve denominator counts as a pole.
pub const POLE_THRESHOLD: f64 = 1e-12;
/// Smallest accepted marching-squares resolution.
pub const MIN_GRID: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LevelSetError {
    #[error("parameter `{name}` must be positive, got {value}")]
    NonPositiveParameter { name: &'static str, value: f64 },
    #[error("level must be a nonnegative number, got {0}")]
    InvalidLevel(f64),
    #[error("no P samples given")]
    EmptySamples,
    #[error("P sample {0} is not finite")]
    NonFiniteSample(f64),
    #[error("`{0}` is not a state of the system")]
    NotAState(String),
    #[error("contour axes must be distinct, got `{0}` twice")]
    SameAxes(String),
    #[error("state `{0}` is neither an axis nor fixed")]
    UnboundState(String),
    #[error("grid must have at least {MIN_GRID} cells per axis, got {0}")]
    GridTooSmall(usize),
    #[error("invalid box [{lo}, {hi}] for `{axis}`")]
    InvalidBox { axis: String, lo: f64, hi: f64 },
    #[error("symbol `{0}` is unbound")]
    UnboundSymbol(String),
}

pub type Point2 = (f64, f64);

#[derive(Debug, Clone, PartialEq)]
pub enum LevelSetResult {
    EmptySet,
    /// Straight line `point + t * direction` in state coordinates.
    Line { point: Vec<f64>, direction: Vec<f64> },
    /// Right elliptic cylinder with the free coordinate `axis`; the
    /// cross-section is `(T - center_t)^2 / a^2 + V^2 / b^2 = 1`.
    EllipticCylinder {
        center_t: f64,
        semi_axis_a: f64,
        semi_axis_b: f64,
        axis: String,
    },
    /// Samples `(P, Q(P))` of a graph, with the excluded pole abscissae.
    RationalCurve { points: Vec<Point2>, poles: Vec<f64> },
    /// Polylines on a 2D slice; closed loops repeat their first vertex.
    Contours { level: f64, polylines: Vec<Vec<Point2>> },
}

impl fmt::Display for LevelSetResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevelSetResult::EmptySet => write!(f, "EmptySet"),
            LevelSetResult::Line { point, direction } => write!(f, "Line through {:?} along {:?}", point, direction),
            LevelSetResult::EllipticCylinder {
                center_t,
                semi_axis_a,
                semi_axis_b,
                axis,
            } => write!(
                f,
                "EllipticCylinder center T={}, a={}, b={}, axis {}",
                center_t, semi_axis_a, semi_axis_b, axis
            ),
            LevelSetResult::RationalCurve { points, poles } => {
                write!(f, "RationalCurve with {} points, {} poles", points.len(), poles.len())
            }
            LevelSetResult::Contours { level, polylines } => {
                write!(f, "Contours at level {} with {} polylines", level, polylines.len())
            }
        }
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), LevelSetError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(LevelSetError::NonPositiveParameter { name, value })
    }
}

/// Invariants of the conic matrix
/// `[[2k^2, 0, -kn delta], [0, k^2, 0], [-kn delta, 0, n^2 delta^2 - 4C]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConicInvariants {
    /// Full determinant `k^4 (n^2 delta^2 - 8C)`.
    pub delta_c: f64,
    /// Leading 2x2 minor `2k^4`.
    pub delta: f64,
    /// Leading 2x2 trace `3k^2`.
    pub trace: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HivClassification {
    pub result: LevelSetResult,
    pub level: f64,
    /// `n^2 delta^2 / 8`.
    pub critical_level: f64,
    /// `n delta / (2k)`.
    pub center_t: f64,
    pub invariants: ConicInvariants,
    k: f64,
    n: f64,
    delta: f64,
}

impl HivClassification {
    /// Sign of `delta_c` with the same relative band as the classification.
    pub fn delta_c_sign(&self) -> i32 {
        // |C - C*| <= eps C*  is  |delta_c| <= eps k^4 n^2 delta^2.
        let scale = self.k.powi(4) * (self.n * self.delta).powi(2);
        if self.invariants.delta_c.abs() <= DEGENERACY_BAND * scale {
            0
        } else if self.invariants.delta_c > 0.0 {
            1
        } else {
            -1
        }
    }

    /// Point of the cylinder cross-section at angle `theta`, as
    /// `(T, T_star, V)` with `T_star = 0`.
    pub fn cylinder_point(&self, theta: f64) -> Option<[f64; 3]> {
        match self.result {
            LevelSetResult::EllipticCylinder {
                center_t,
                semi_axis_a,
                semi_axis_b,
                ..
            } => Some([center_t + semi_axis_a * theta.cos(), 0.0, semi_axis_b * theta.sin()]),
            _ => None,
        }
    }

    pub fn summary(&self) -> String {
        match &self.result {
            LevelSetResult::EmptySet => "EmptySet".to_string(),
            LevelSetResult::Line { .. } => format!("Line T={}, V=0", self.center_t),
            other => other.to_string(),
        }
    }

    /// Plain-text report with every derived quantity.
    pub fn report(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.summary());
        let _ = writeln!(out, "level C = {}", self.level);
        let _ = writeln!(out, "critical C* = {}", self.critical_level);
        let _ = writeln!(out, "Delta_C = {}", self.invariants.delta_c);
        let _ = writeln!(out, "delta = {}", self.invariants.delta);
        let _ = writeln!(out, "I = {}", self.invariants.trace);
        let _ = writeln!(out, "center T = {}", self.center_t);
        if let LevelSetResult::EllipticCylinder {
            semi_axis_a, semi_axis_b, ..
        } = self.result
        {
            let _ = writeln!(out, "a = {}", semi_axis_a);
            let _ = writeln!(out, "b = {}", semi_axis_b);
        }
        out
    }
}

/// Shape of `{EYM = C}` for the HIV-1 flow.
pub fn classify_hiv_level_set(k: f64, n: f64, delta: f64, c: f64) -> Result<HivClassification, LevelSetError> {
    positive("k", k)?;
    positive("n", n)?;
    positive("delta", delta)?;
    if !(c >= 0.0 && c.is_finite()) {
        return Err(LevelSetError::InvalidLevel(c));
    }
    let nd2 = (n * delta).powi(2);
    let critical_level = nd2 / 8.0;
    let center_t = n * delta / (2.0 * k);
    let invariants = ConicInvariants {
        delta_c: k.powi(4) * (nd2 - 8.0 * c),
        delta: 2.0 * k.powi(4),
        trace: 3.0 * k * k,
    };
    let result = if (c - critical_level).abs() <= DEGENERACY_BAND * critical_level {
        LevelSetResult::Line {
            point: vec![center_t, 0.0, 0.0],
            direction: vec![0.0, 1.0, 0.0],
        }
    } else if c < critical_level {
        LevelSetResult::EmptySet
    } else {
        let root = (8.0 * c - nd2).sqrt();
        LevelSetResult::EllipticCylinder {
            center_t,
            semi_axis_a: root / (2.0 * k),
            semi_axis_b: root / (k * std::f64::consts::SQRT_2),
            axis: "T_star".to_string(),
        }
    };
    Ok(HivClassification {
        result,
        level: c,
        critical_level,
        center_t,
        invariants,
        k,
        n,
        delta,
    })
}

/// Samples of the zero-energy curve
/// `Q = P(1+kP^2)[h - (2a+1)(1+kP^2)] / [a(1+kP^2)^2 - h(1-kP^2)]`.
pub fn cancer_zero_curve(a: f64, h: f64, k: f64, p_samples: &[f64]) -> Result<LevelSetResult, LevelSetError> {
    positive("a", a)?;
    positive("h", h)?;
    positive("k", k)?;
    if p_samples.is_empty() {
        return Err(LevelSetError::EmptySamples);
    }
    let mut points = Vec::with_capacity(p_samples.len());
    let mut poles = Vec::new();
    for &p in p_samples {
        if !p.is_finite() {
            return Err(LevelSetError::NonFiniteSample(p));
        }
        let d = 1.0 + k * p * p;
        let (lead, tail) = (a * d * d, h * (1.0 - k * p * p));
        let den = lead - tail;
        if den.abs() <= POLE_THRESHOLD * (1.0 + lead.abs() + tail.abs()) {
            poles.push(p);
            continue;
        }
        points.push((p, p * d * (h - (2.0 * a + 1.0) * d) / den));
    }
    Ok(LevelSetResult::RationalCurve { points, poles })
}

/// Allowed energy on the zero curve, relative to the squared bracket scale.
pub const ZERO_CURVE_TOLERANCE: f64 = 1e-18;

/// Re-evaluates the engine energy of the cancer system `s` at zero-curve
/// samples. Each value is divided by `(1 + |(2a+1)P| + |aQ| + |F_P| + |F_Q|)^2`,
/// the square of the bracket's term magnitudes.
pub fn cancer_zero_curve_check(s: &OdeSystem, points: &[Point2]) -> Result<Check, EvalError> {
    let param = |name: &str| s.params().iter().find(|(n, _)| n == name).map(|(_, v)| *v).unwrap_or(f64::NAN);
    let (a, h, k) = (param("a"), param("h"), param("k"));
    let slots: Vec<&str> = s.states().iter().map(String::as_str).collect();
    let mut bound = yang_mills_energy(s);
    for (name, v) in s.params() {
        bound = bound.substitute(name, &Expr::num(*v));
    }
    let energy = bound.compile(&slots)?;
    let mut worst = 0.0_f64;
    for &(p, q) in points {
        let d = 1.0 + k * p * p;
        let terms = [(2.0 * a + 1.0) * p, a * q, h * q * (1.0 - k * p * p) / (d * d), h * p / d];
        let scale = (1.0 + terms.iter().map(|t| t.abs()).sum::<f64>()).powi(2);
        let e = energy.eval(&[p, q])?;
        let dev = e.abs() / scale;
        if dev > worst || dev.is_nan() {
            worst = dev;
        }
    }
    Ok(Check::from_deviation("zero-curve-energy", worst, ZERO_CURVE_TOLERANCE)
        .with_detail(format!("{} points", points.len())))
}

/// Scalar field sampled on the nodes of a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    pub x: Interval,
    pub y: Interval,
    /// Cells per axis; there are `cells + 1` nodes per axis.
    pub cells: usize,
    /// Row-major node values, `values[j * (cells + 1) + i]` at `(x_i, y_j)`.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum EdgeKey {
    /// From node `(i, j)` to `(i + 1, j)`.
    H(usize, usize),
    /// From node `(i, j)` to `(i, j + 1)`.
    V(usize, usize),
}

impl ScalarGrid {
    /// Evaluates `f` at every node. Rows are computed in parallel; the
    /// result does not depend on the schedule.
    pub fn sample<F>(x: Interval, y: Interval, cells: usize, f: F) -> ScalarGrid
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        let nodes = cells + 1;
        let values = (0..nodes)
            .into_par_iter()
            .flat_map_iter(|j| {
                let yj = y.lo + y.width() * j as f64 / cells as f64;
                let f = &f;
                (0..nodes).map(move |i| f(x.lo + x.width() * i as f64 / cells as f64, yj))
            })
            .collect();
        ScalarGrid { x, y, cells, values }
    }

    fn node(&self, i: usize, j: usize) -> f64 {
        self.values[j * (self.cells + 1) + i]
    }

    fn coord(&self, i: usize, j: usize) -> Point2 {
        let c = self.cells as f64;
        (self.x.lo + self.x.width() * i as f64 / c, self.y.lo + self.y.width() * j as f64 / c)
    }

    fn edge_point(&self, key: EdgeKey, level: f64) -> Point2 {
        let ((i0, j0), (i1, j1)) = match key {
            EdgeKey::H(i, j) => ((i, j), (i + 1, j)),
            EdgeKey::V(i, j) => ((i, j), (i, j + 1)),
        };
        let (v0, v1) = (self.node(i0, j0), self.node(i1, j1));
        let t = (level - v0) / (v1 - v0);
        let (p0, p1) = (self.coord(i0, j0), self.coord(i1, j1));
        (p0.0 + t * (p1.0 - p0.0), p0.1 + t * (p1.1 - p0.1))
    }

    /// Marching-squares polylines of `{f = level}`.
    ///
    /// A node is inside when its value exceeds `level`. In the two saddle
    /// configurations the value at the cell center, the mean of the four
    /// corners, decides which corners are joined. Cells with a non-finite
    /// corner are skipped.
    pub fn contours(&self, level: f64) -> Vec<Vec<Point2>> {
        let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();
        for j in 0..self.cells {
            for i in 0..self.cells {
                let v = [self.node(i, j), self.node(i + 1, j), self.node(i + 1, j + 1), self.node(i, j + 1)];
                if v.iter().any(|x| !x.is_finite()) {
                    continue;
                }
                let bottom = EdgeKey::H(i, j);
                let right = EdgeKey::V(i + 1, j);
                let top = EdgeKey::H(i, j + 1);
                let left = EdgeKey::V(i, j);
                let above = v.map(|x| x > level);
                let case = above.iter().enumerate().fold(0u8, |m, (b, &a)| m | (u8::from(a) << b));
                let center_above = v.iter().sum::<f64>() / 4.0 > level;
                match case {
                    0 | 15 => {}
                    1 | 14 => segments.push((left, bottom)),
                    2 | 13 => segments.push((bottom, right)),
                    3 | 12 => segments.push((left, right)),
                    4 | 11 => segments.push((right, top)),
                    6 | 9 => segments.push((bottom, top)),
                    7 | 8 => segments.push((left, top)),
                    // Corners 0 and 2 inside.
                    5 => {
                        if center_above {
                            segments.push((bottom, right));
                            segments.push((top, left));
                        } else {
                            segments.push((left, bottom));
                            segments.push((right, top));
                        }
                    }
                    // Corners 1 and 3 inside.
                    10 => {
                        if center_above {
                            segments.push((left, bottom));
                            segments.push((right, top));
                        } else {
                            segments.push((bottom, right));
                            segments.push((top, left));
                        }
                    }
                    _ => unreachable!("four corner bits"),
                }
            }
        }
        self.join(&segments, level)
    }

    fn join(&self, segments: &[(EdgeKey, EdgeKey)], level: f64) -> Vec<Vec<Point2>> {
        let mut at: BTreeMap<EdgeKey, Vec<usize>> = BTreeMap::new();
        for (s, (a, b)) in segments.iter().enumerate() {
            at.entry(*a).or_default().push(s);
            at.entry(*b).or_default().push(s);
        }
        let mut used = vec![false; segments.len()];
        let mut out = Vec::new();
        let walk = |start: EdgeKey, first: usize, used: &mut Vec<bool>| {
            let mut line = vec![self.edge_point(start, level)];
            let mut key = start;
            let mut seg = Some(first);
            while let Some(s) = seg {
                used[s] = true;
                let (a, b) = segments[s];
                key = if a == key { b } else { a };
                line.push(self.edge_point(key, level));
                seg = at[&key].iter().copied().find(|&t| !used[t]);
            }
            line
        };
        // Open chains start at edges touched by a single segment.
        for s in 0..segments.len() {
            for end in [segments[s].0, segments[s].1] {
                if !used[s] && at[&end].len() == 1 {
                    out.push(walk(end, s, &mut used));
                }
            }
        }
        for s in 0..segments.len() {
            if !used[s] {
                out.push(walk(segments[s].0, s, &mut used));
            }
        }
        out
    }
}

/// Contours of an arbitrary scalar expression on the `axes` slice.
/// Symbols other than the two axes must be bound in `fixed`.
pub fn extract_contours_expr(
    f: &Expr,
    axes: (&str, &str),
    fixed: &Bindings,
    region: [Interval; 2],
    level: f64,
    grid: usize,
) -> Result<LevelSetResult, LevelSetError> {
    if axes.0 == axes.1 {
        return Err(LevelSetError::SameAxes(axes.0.to_string()));
    }
    if grid < MIN_GRID {
        return Err(LevelSetError::GridTooSmall(grid));
    }
    if !level.is_finite() {
        return Err(LevelSetError::InvalidLevel(level));
    }
    for (axis, iv) in [axes.0, axes.1].iter().zip(&region) {
        if !iv.is_valid() || iv.width() <= 0.0 {
            return Err(LevelSetError::InvalidBox {
                axis: axis.to_string(),
                lo: iv.lo,
                hi: iv.hi,
            });
        }
    }
    let mut slots = vec![axes.0.to_string(), axes.1.to_string()];
    let mut base = vec![0.0, 0.0];
    for (name, v) in fixed.iter() {
        if name != axes.0 && name != axes.1 {
            slots.push(name.to_string());
            base.push(v);
        }
    }
    let program: CompiledExpr = f.compile(&slots).map_err(|e| match e {
        EvalError::UnboundSymbol(s) => LevelSetError::UnboundSymbol(s),
        other => LevelSetError::UnboundSymbol(other.to_string()),
    })?;
    let grid = ScalarGrid::sample(region[0], region[1], grid, |x, y| {
        let mut pt = base.clone();
        pt[0] = x;
        pt[1] = y;
        program.eval(&pt).unwrap_or(f64::NAN)
    });
    Ok(LevelSetResult::Contours {
        level,
        polylines: grid.contours(level),
    })
}

/// Contours of the system's Yang-Mills energy on the slice spanned by two
/// states. Every other state must be bound in `fixed`; parameters default
/// to the system's values unless `fixed` overrides them.
pub fn extract_contours(
    s: &OdeSystem,
    axes: (&str, &str),
    fixed: &Bindings,
    region: [Interval; 2],
    level: f64,
    grid: usize,
) -> Result<LevelSetResult, LevelSetError> {
    if axes.0 == axes.1 {
        return Err(LevelSetError::SameAxes(axes.0.to_string()));
    }
    for axis in [axes.0, axes.1] {
        if s.state_index(axis).is_none() {
            return Err(LevelSetError::NotAState(axis.to_string()));
        }
    }
    if let Some(x) = s.states().iter().find(|x| *x != axes.0 && *x != axes.1 && !fixed.contains(x)) {
        return Err(LevelSetError::UnboundState(x.clone()));
    }
    if !(level >= 0.0) {
        return Err(LevelSetError::InvalidLevel(level));
    }
    let mut bindings = s.param_bindings();
    for (name, v) in fixed.iter() {
        bindings.insert(name, v);
    }
    extract_contours_expr(&yang_mills_energy(s), axes, &bindings, region, level, grid)
}

/// `polyline_id,<axis1>,<axis2>` rows with 17 significant digits.
pub fn contours_to_csv(axes: (&str, &str), polylines: &[Vec<Point2>]) -> String {
    let mut out = format!("polyline_id,{},{}\n", axes.0, axes.1);
    for (id, line) in polylines.iter().enumerate() {
        for (x, y) in line {
            let _ = writeln!(out, "{},{:.16e},{:.16e}", id, x, y);
        }
    }
    out
}
