//! Seeded generators for random vector fields.
#![allow(dead_code)]

use jetgeom::{DomainBox, Expr, OdeSystem};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn state_names(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("x{}", i)).collect()
}

pub fn unit_box(n: usize) -> DomainBox {
    state_names(n).iter().fold(DomainBox::new(), |d, x| d.with(x, -1.0, 1.0))
}

/// Monomial `c * prod x_i^e_i`.
#[derive(Debug, Clone)]
pub struct Monomial {
    pub coeff: f64,
    pub exps: Vec<u32>,
}

impl Monomial {
    pub fn random(rng: &mut ChaCha8Rng, n: usize, max_degree: u32) -> Monomial {
        let mut exps = vec![0; n];
        let degree = rng.gen_range(0..=max_degree);
        for _ in 0..degree {
            exps[rng.gen_range(0..n)] += 1;
        }
        Monomial {
            coeff: rng.gen_range(-2.0..2.0),
            exps,
        }
    }

    pub fn text(&self, names: &[String]) -> String {
        let mut out = format!("({:?})", self.coeff);
        for (name, &e) in names.iter().zip(&self.exps) {
            if e > 0 {
                out.push_str(&format!("*{}^{}", name, e));
            }
        }
        out
    }

    /// Derivative by `x_j`, by the power rule.
    pub fn derivative(&self, j: usize) -> Option<Monomial> {
        let e = self.exps[j];
        if e == 0 {
            return None;
        }
        let mut exps = self.exps.clone();
        exps[j] -= 1;
        Some(Monomial {
            coeff: self.coeff * e as f64,
            exps,
        })
    }
}

pub fn poly_text(terms: &[Monomial], names: &[String]) -> String {
    if terms.is_empty() {
        return "0".into();
    }
    terms.iter().map(|m| m.text(names)).collect::<Vec<_>>().join(" + ")
}

fn random_poly(rng: &mut ChaCha8Rng, n: usize, max_degree: u32) -> Vec<Monomial> {
    let count = rng.gen_range(1..=3);
    (0..count).map(|_| Monomial::random(rng, n, max_degree)).collect()
}

/// Components `p + q / (1 + r^2)` with random polynomials of degree <= 2;
/// the denominator never vanishes.
pub fn random_rational_field(rng: &mut ChaCha8Rng, n: usize) -> OdeSystem {
    let names = state_names(n);
    let components: Vec<Expr> = (0..n)
        .map(|_| {
            let p = poly_text(&random_poly(rng, n, 2), &names);
            let q = poly_text(&random_poly(rng, n, 2), &names);
            let r = poly_text(&random_poly(rng, n, 2), &names);
            Expr::parse(&format!("{} + ({})/(1 + ({})^2)", p, q, r)).unwrap()
        })
        .collect();
    OdeSystem::new(names, vec![], components).unwrap()
}

/// Random potential of degree <= 4 and its gradient field, differentiated
/// monomial by monomial.
pub fn random_gradient_field(rng: &mut ChaCha8Rng, n: usize) -> (String, OdeSystem) {
    let names = state_names(n);
    let count = rng.gen_range(2..=6);
    let phi: Vec<Monomial> = (0..count).map(|_| Monomial::random(rng, n, 4)).collect();
    let components: Vec<Expr> = (0..n)
        .map(|j| {
            let d: Vec<Monomial> = phi.iter().filter_map(|m| m.derivative(j)).collect();
            Expr::parse(&poly_text(&d, &names)).unwrap()
        })
        .collect();
    (poly_text(&phi, &names), OdeSystem::new(names, vec![], components).unwrap())
}
