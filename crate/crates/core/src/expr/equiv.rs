//! Probabilistic formula equality.
//!
//! Two expressions are considered equal when they agree to a relative
//! tolerance at a fixed number of seeded pseudo-random points of a box.
//! Points at which either side is singular are redrawn; if more than 90% of
//! the draws are singular the comparison fails.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{Bindings, Expr};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Interval {
        Interval { lo, hi }
    }

    pub fn point(v: f64) -> Interval {
        Interval { lo: v, hi: v }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_valid(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.gen_range(self.lo..=self.hi)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquivalenceError {
    #[error("domain box does not cover symbol `{0}`")]
    MissingSymbol(String),
    #[error("invalid interval for `{name}`: [{lo}, {hi}]")]
    InvalidInterval { name: String, lo: f64, hi: f64 },
    #[error("too many singular draws: {singular} of {draws}")]
    TooSingular { singular: usize, draws: usize },
}

/// Axis-aligned box of named intervals. Degenerate intervals pin a symbol.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DomainBox {
    intervals: BTreeMap<String, Interval>,
}

impl DomainBox {
    pub fn new() -> DomainBox {
        DomainBox::default()
    }

    pub fn with(mut self, name: &str, lo: f64, hi: f64) -> DomainBox {
        self.insert(name, Interval::new(lo, hi));
        self
    }

    pub fn insert(&mut self, name: &str, interval: Interval) {
        self.intervals.insert(name.to_string(), interval);
    }

    pub fn get(&self, name: &str) -> Option<Interval> {
        self.intervals.get(name).copied()
    }

    /// Symbols in sampling order.
    pub fn symbols(&self) -> Vec<&str> {
        self.intervals.keys().map(String::as_str).collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Interval)> {
        self.intervals.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Pins every binding to a point interval, overriding existing entries.
    pub fn pin(mut self, bindings: &Bindings) -> DomainBox {
        for (k, v) in bindings.iter() {
            self.insert(k, Interval::point(v));
        }
        self
    }

    pub fn validate(&self) -> Result<(), EquivalenceError> {
        for (name, iv) in &self.intervals {
            if !iv.is_valid() {
                return Err(EquivalenceError::InvalidInterval {
                    name: name.clone(),
                    lo: iv.lo,
                    hi: iv.hi,
                });
            }
        }
        Ok(())
    }

    pub fn require<'a, I: IntoIterator<Item = &'a String>>(&self, symbols: I) -> Result<(), EquivalenceError> {
        for s in symbols {
            if !self.intervals.contains_key(s) {
                return Err(EquivalenceError::MissingSymbol(s.clone()));
            }
        }
        Ok(())
    }

    pub fn to_bindings(&self, values: &[f64]) -> Bindings {
        self.intervals.keys().map(String::as_str).zip(values.iter().copied()).collect()
    }

    /// Draws points (in [`symbols`](Self::symbols) order) until `accept` has
    /// returned `Some` for `count` of them.
    ///
    /// Each rejected draw is replaced by a fresh one; after `10 * count`
    /// draws the attempt is abandoned, which means more than 90% of draws
    /// were rejected.
    pub fn sample_valid<T>(
        &self,
        count: usize,
        seed: u64,
        mut accept: impl FnMut(&[f64]) -> Option<T>,
    ) -> Result<Vec<T>, EquivalenceError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ivs: Vec<Interval> = self.intervals.values().copied().collect();
        let mut point = vec![0.0; ivs.len()];
        let mut out = Vec::with_capacity(count);
        let max_draws = count.saturating_mul(10).max(10);
        let mut draws = 0;
        while out.len() < count {
            if draws >= max_draws {
                return Err(EquivalenceError::TooSingular {
                    singular: draws - out.len(),
                    draws,
                });
            }
            draws += 1;
            for (slot, iv) in point.iter_mut().zip(&ivs) {
                *slot = iv.sample(&mut rng);
            }
            if let Some(v) = accept(&point) {
                out.push(v);
            }
        }
        Ok(out)
    }
}

/// Sampling protocol for [`compare`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equivalence {
    pub samples: usize,
    pub seed: u64,
    /// Allowed `|a - b| / (1 + max(|a|, |b|))`.
    pub tolerance: f64,
}

impl Default for Equivalence {
    fn default() -> Equivalence {
        Equivalence {
            samples: 32,
            seed: 0,
            tolerance: 1e-9,
        }
    }
}

impl Equivalence {
    pub fn with_samples(self, samples: usize) -> Equivalence {
        Equivalence { samples, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Equivalence {
        Equivalence { seed, ..self }
    }

    pub fn with_tolerance(self, tolerance: f64) -> Equivalence {
        Equivalence { tolerance, ..self }
    }
}

/// Outcome of a numeric comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Largest scaled deviation `|a - b| / (1 + max(|a|, |b|))`.
    pub max_deviation: f64,
    /// Point attaining `max_deviation`.
    pub worst_point: Bindings,
    pub samples: usize,
    pub singular_draws: usize,
    pub equivalent: bool,
}

/// Scaled deviation used throughout: `|a - b| / (1 + max(|a|, |b|))`.
pub fn scaled_deviation(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + a.abs().max(b.abs()))
}

pub fn compare(e1: &Expr, e2: &Expr, domain: &DomainBox, cfg: &Equivalence) -> Result<Comparison, EquivalenceError> {
    let mut symbols = e1.free_symbols();
    symbols.extend(e2.free_symbols());
    domain.require(&symbols)?;
    let slots = domain.symbols();
    let c1 = e1.compile(&slots).expect("symbols checked");
    let c2 = e2.compile(&slots).expect("symbols checked");
    let mut draws = 0usize;
    let result = domain.sample_valid(cfg.samples, cfg.seed, |pt| {
        draws += 1;
        let a = c1.eval(pt).ok().filter(|v| v.is_finite())?;
        let b = c2.eval(pt).ok().filter(|v| v.is_finite())?;
        Some((scaled_deviation(a, b), pt.to_vec()))
    });
    let points = match result {
        Ok(p) => p,
        Err(EquivalenceError::TooSingular { singular, draws }) => {
            return Ok(Comparison {
                max_deviation: f64::NAN,
                worst_point: Bindings::new(),
                samples: draws - singular,
                singular_draws: singular,
                equivalent: false,
            })
        }
        Err(e) => return Err(e),
    };
    let (max_deviation, worst) = points
        .iter()
        .fold((0.0_f64, None), |(m, w), (d, pt)| if *d > m || w.is_none() { (*d, Some(pt)) } else { (m, w) });
    Ok(Comparison {
        max_deviation,
        worst_point: worst.map(|p| domain.to_bindings(p)).unwrap_or_default(),
        samples: points.len(),
        singular_draws: draws - points.len(),
        equivalent: max_deviation <= cfg.tolerance,
    })
}

/// Values of `exprs` at `count` seeded points of `domain` where every
/// expression evaluates to a finite number.
pub fn sample_values(exprs: &[Expr], domain: &DomainBox, count: usize, seed: u64) -> Result<Vec<Vec<f64>>, EquivalenceError> {
    let mut symbols = std::collections::BTreeSet::new();
    for e in exprs {
        symbols.extend(e.free_symbols());
    }
    domain.require(&symbols)?;
    let slots = domain.symbols();
    let programs: Vec<_> = exprs.iter().map(|e| e.compile(&slots).expect("symbols checked")).collect();
    domain.sample_valid(count, seed, |pt| {
        programs
            .iter()
            .map(|p| p.eval(pt).ok().filter(|v| v.is_finite()))
            .collect::<Option<Vec<f64>>>()
    })
}

/// [`compare`] with the default protocol: 32 points, seed 0, tolerance 1e-9.
pub fn numerically_equivalent(e1: &Expr, e2: &Expr, domain: &DomainBox) -> Result<bool, EquivalenceError> {
    Ok(compare(e1, e2, domain, &Equivalence::default())?.equivalent)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(text: &str) -> Expr {
        Expr::parse(text).unwrap()
    }

    #[test]
    fn commutativity() {
        let dom = DomainBox::new().with("x", -1.0, 1.0).with("y", -1.0, 1.0);
        assert!(numerically_equivalent(&p("x+y"), &p("y+x"), &dom).unwrap());
    }

    #[test]
    fn constant_offset_is_detected() {
        let dom = DomainBox::new().with("x", -1.0, 1.0);
        assert!(!numerically_equivalent(&p("x"), &p("x+1e-3"), &dom).unwrap());
    }

    #[test]
    fn missing_symbol_is_an_error() {
        let dom = DomainBox::new().with("x", -1.0, 1.0);
        assert_eq!(
            numerically_equivalent(&p("x"), &p("y"), &dom),
            Err(EquivalenceError::MissingSymbol("y".into()))
        );
    }

    #[test]
    fn singular_points_are_redrawn() {
        // x/x is singular only at x = 0, which a continuous draw never hits
        // except through the pinned-interval path below.
        let dom = DomainBox::new().with("x", -1.0, 1.0);
        let c = compare(&p("x/x"), &p("1"), &dom, &Equivalence::default()).unwrap();
        assert!(c.equivalent);
        assert_eq!(c.samples, 32);

        let pinned = DomainBox::new().with("x", 0.0, 0.0);
        let c = compare(&p("x/x"), &p("1"), &pinned, &Equivalence::default()).unwrap();
        assert!(!c.equivalent);
        assert_eq!(c.samples, 0);
        assert_eq!(c.singular_draws, 320);
    }

    #[test]
    fn mostly_singular_domain_fails() {
        // log(x) exists on 5% of the box only.
        let dom = DomainBox::new().with("x", -19.0, 1.0);
        let c = compare(&p("log(x)"), &p("log(x)"), &dom, &Equivalence::default()).unwrap();
        assert!(!c.equivalent);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let dom = DomainBox::new().with("x", 0.1, 2.0);
        let a = compare(&p("x^2"), &p("x*x*(1+1e-12)"), &dom, &Equivalence::default()).unwrap();
        let b = compare(&p("x^2"), &p("x*x*(1+1e-12)"), &dom, &Equivalence::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_inverted_interval() {
        let dom = DomainBox::new().with("x", 1.0, 0.0);
        assert!(matches!(
            numerically_equivalent(&p("x"), &p("x"), &dom),
            Err(EquivalenceError::InvalidInterval { .. })
        ));
    }
}
