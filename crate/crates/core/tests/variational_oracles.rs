use jetgeom::models::builtin;
use jetgeom::variational::{
    euler_lagrange_residual, geodesic_check, integrate_flow, least_squares_lagrangian, second_order_prolongation, EulerLagrange,
    Trajectory,
};
use jetgeom::{Bindings, Expr, OdeSystem};
use proptest::prelude::*;

fn system(comps: &[&str]) -> OdeSystem {
    OdeSystem::new(
        vec!["x".into(), "y".into()],
        vec![],
        comps.iter().map(|c| Expr::parse(c).unwrap()).collect(),
    )
    .unwrap()
}

/// Field and Jacobian of `(y^2 - x, sin(x) + x*y)`, coded by hand.
fn field(p: [f64; 2]) -> [f64; 2] {
    [p[1] * p[1] - p[0], p[0].sin() + p[0] * p[1]]
}

fn field_jacobian(p: [f64; 2]) -> [[f64; 2]; 2] {
    [[-1.0, 2.0 * p[1]], [p[0].cos() + p[1], p[0]]]
}

const FIELD: [&str; 2] = ["y^2 - x", "sin(x) + x*y"];

fn lagrangian(p: [f64; 2], v: [f64; 2]) -> f64 {
    let x = field(p);
    (v[0] - x[0]).powi(2) + (v[1] - x[1]).powi(2)
}

/// Test curve that is not a solution, so the residual is nonzero.
fn curve(t: f64) -> [f64; 2] {
    [0.3 + t.sin(), (2.0 * t).cos()]
}

#[test]
fn residual_matches_discrete_action_gradient() {
    // For S = sum_m dt * L(x_m, (x_{m+1} - x_m) / dt), the gradient in an
    // interior x_m divided by dt tends to the Euler-Lagrange residual.
    let s = system(&FIELD);
    let el = EulerLagrange::new(&s).unwrap();
    let dt = 1e-3;
    let eps = 1e-6;
    for &t in &[0.2, 0.9, 1.7] {
        let xs: Vec<[f64; 2]> = (-1..=1).map(|k| curve(t + k as f64 * dt)).collect();
        let local = |mid: [f64; 2]| {
            let v_prev = [(mid[0] - xs[0][0]) / dt, (mid[1] - xs[0][1]) / dt];
            let v_mid = [(xs[2][0] - mid[0]) / dt, (xs[2][1] - mid[1]) / dt];
            dt * (lagrangian(xs[0], v_prev) + lagrangian(mid, v_mid))
        };
        let x1: Vec<f64> = (0..2).map(|i| (xs[2][i] - xs[0][i]) / (2.0 * dt)).collect();
        let x2: Vec<f64> = (0..2).map(|i| (xs[2][i] - 2.0 * xs[1][i] + xs[0][i]) / (dt * dt)).collect();
        let r = el.residual(&xs[1], &x1, &x2).unwrap();
        for i in 0..2 {
            let mut plus = xs[1];
            let mut minus = xs[1];
            plus[i] += eps;
            minus[i] -= eps;
            let grad = (local(plus) - local(minus)) / (2.0 * eps) / dt;
            let scale = 1.0 + r[i].abs();
            assert!((grad - r[i]).abs() <= 2e-2 * scale, "t={} i={}: {} vs {}", t, i, grad, r[i]);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn residual_matches_hand_formula(p in prop::array::uniform2(-2.0f64..2.0),
                                     v in prop::array::uniform2(-3.0f64..3.0),
                                     a in prop::array::uniform2(-3.0f64..3.0)) {
        // -2 [J^T (v - X) + a - J v]
        let (x, j) = (field(p), field_jacobian(p));
        let w = [v[0] - x[0], v[1] - x[1]];
        let expected: Vec<f64> = (0..2)
            .map(|i| -2.0 * (j[0][i] * w[0] + j[1][i] * w[1] + a[i] - (j[i][0] * v[0] + j[i][1] * v[1])))
            .collect();
        let r = euler_lagrange_residual(&system(&FIELD), &p, &v, &a).unwrap();
        for i in 0..2 {
            prop_assert!((r[i] - expected[i]).abs() <= 1e-12 * (1.0 + expected[i].abs()), "{:?} vs {:?}", r, expected);
        }
    }

    #[test]
    fn prolongation_zeroes_residual(p in prop::array::uniform2(-2.0f64..2.0), v in prop::array::uniform2(-3.0f64..3.0)) {
        let s = system(&FIELD);
        let acc: Vec<f64> = second_order_prolongation(&s)
            .unwrap()
            .iter()
            .map(|e| e.eval(&Bindings::new().with("x", p[0]).with("y", p[1]).with("x1_x", v[0]).with("x1_y", v[1])).unwrap())
            .collect();
        let r = euler_lagrange_residual(&s, &p, &v, &acc).unwrap();
        let scale = 1.0 + acc.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        prop_assert!(r.iter().all(|x| x.abs() <= 1e-12 * scale), "{:?}", r);
    }

    #[test]
    fn lagrangian_is_nonnegative_and_zero_on_flow(p in prop::array::uniform2(-2.0f64..2.0), v in prop::array::uniform2(-3.0f64..3.0)) {
        let s = system(&FIELD);
        let l = least_squares_lagrangian(&s).unwrap();
        let b = |v: [f64; 2]| Bindings::new().with("x", p[0]).with("y", p[1]).with("x1_x", v[0]).with("x1_y", v[1]);
        prop_assert!(l.eval(&b(v)).unwrap() >= 0.0);
        prop_assert!((l.eval(&b(v)).unwrap() - lagrangian(p, v)).abs() <= 1e-12 * (1.0 + lagrangian(p, v)));
        prop_assert_eq!(l.eval(&b(field(p))).unwrap(), 0.0);
    }

    #[test]
    fn rk4_is_deterministic_and_step_counted(dt_exp in 1u32..4, t_end in 0.5f64..2.0) {
        let s = system(&["-y", "x"]);
        let dt = 10f64.powi(-(dt_exp as i32));
        let a = integrate_flow(&s, &[1.0, 0.0], t_end, dt).unwrap();
        let b = integrate_flow(&s, &[1.0, 0.0], t_end, dt).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.samples.len(), (t_end / dt + 1e-9).floor() as usize + 1);
        // The rotation conserves the radius up to the local error.
        let last = a.last();
        prop_assert!(((last[0].powi(2) + last[1].powi(2)).sqrt() - 1.0).abs() <= 1e-2 * dt.powi(4) / 1e-4 + 1e-12);
    }
}

#[test]
fn harmonic_oscillator_matches_closed_form() {
    let s = system(&["-y", "x"]);
    let traj = integrate_flow(&s, &[1.0, 0.0], 2.0, 1e-3).unwrap();
    for (m, x) in traj.samples.iter().enumerate().step_by(250) {
        let t = traj.time(m);
        assert!((x[0] - t.cos()).abs() <= 1e-12 && (x[1] - t.sin()).abs() <= 1e-12, "t={}", t);
    }
}

#[test]
fn geodesic_residual_shrinks_with_the_step() {
    for name in ["cancer", "hiv1"] {
        let (s, _) = builtin(name).unwrap();
        let x0 = vec![1.2; s.dim()];
        let coarse = geodesic_check(&s, &integrate_flow(&s, &x0, 5.0, 1e-3).unwrap()).unwrap();
        let fine = geodesic_check(&s, &integrate_flow(&s, &x0, 5.0, 2.5e-4).unwrap()).unwrap();
        assert!(coarse.check.passed, "{}: {}", name, coarse.check);
        assert!(coarse.max_residual / fine.max_residual >= 10.0, "{}", name);
        assert_eq!(coarse.residuals.len(), 4999);
    }
}

#[test]
fn geodesic_check_rejects_a_perturbed_solution() {
    // Sampling a different curve than the flow violates the equations.
    let s = system(&["-y", "x"]);
    let samples = (0..=1000)
        .map(|m| {
            let t = m as f64 * 1e-3;
            vec![(1.1 * t).cos(), (1.1 * t).sin()]
        })
        .collect();
    let traj = Trajectory {
        t0: 0.0,
        dt: 1e-3,
        samples,
    };
    assert!(!geodesic_check(&s, &traj).unwrap().check.passed);
}
