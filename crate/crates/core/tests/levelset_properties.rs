use jetgeom::expr::Interval;
use jetgeom::geometry::yang_mills_energy;
use jetgeom::levelset::{
    cancer_zero_curve, cancer_zero_curve_check, classify_hiv_level_set, extract_contours, extract_contours_expr, LevelSetError,
    LevelSetResult, ScalarGrid,
};
use jetgeom::models::{cancer_model, hiv_model};
use jetgeom::{Bindings, Expr};
use proptest::prelude::*;

fn kind(r: &LevelSetResult) -> usize {
    match r {
        LevelSetResult::EmptySet => 0,
        LevelSetResult::Line { .. } => 1,
        LevelSetResult::EllipticCylinder { .. } => 2,
        _ => 3,
    }
}

/// Hand-coded energy of the HIV-1 flow, `(1/4)[(kV)^2 + (kT)^2 + (kT - n delta)^2]`.
fn hiv_energy(k: f64, n: f64, delta: f64, t: f64, v: f64) -> f64 {
    0.25 * ((k * v).powi(2) + (k * t).powi(2) + (k * t - n * delta).powi(2))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn trichotomy_is_exhaustive_and_exclusive(k in 0.05f64..5.0, n in 0.05f64..5.0, delta in 0.05f64..5.0, ratio in 0.0f64..3.0) {
        let c_star = (n * delta).powi(2) / 8.0;
        let cls = classify_hiv_level_set(k, n, delta, ratio * c_star).unwrap();
        let expected = if ratio < 1.0 { 0 } else if ratio == 1.0 { 1 } else { 2 };
        prop_assert_eq!(kind(&cls.result), expected);
        prop_assert_eq!(cls.delta_c_sign(), [1, 0, -1][expected]);
        prop_assert!((cls.critical_level - c_star).abs() <= 1e-15 * c_star);
        prop_assert_eq!(cls.invariants.delta, 2.0 * k.powi(4));
        prop_assert!(cls.invariants.delta > 0.0 && cls.invariants.trace > 0.0);
    }

    #[test]
    fn cylinder_lies_on_the_engine_level_set(k in 0.1f64..3.0, n in 0.1f64..3.0, delta in 0.1f64..3.0,
                                            excess in 0.01f64..4.0, theta in 0.0f64..6.3, t_star in 0.0f64..10.0) {
        let c = (n * delta).powi(2) / 8.0 * (1.0 + excess);
        let cls = classify_hiv_level_set(k, n, delta, c).unwrap();
        let LevelSetResult::EllipticCylinder { semi_axis_a, semi_axis_b, .. } = cls.result else {
            return Err(TestCaseError::fail("expected a cylinder"));
        };
        prop_assert!(semi_axis_a < semi_axis_b);
        let pt = cls.cylinder_point(theta).unwrap();
        prop_assert!((hiv_energy(k, n, delta, pt[0], pt[2]) - c).abs() <= 1e-12 * c);
        let (s, _) = hiv_model(1.0, 1.0, 1.0, delta, 1.0, k, n, 1.0).unwrap();
        let b = s.param_bindings().with("T", pt[0]).with("T_star", t_star).with("V", pt[2]);
        let engine = yang_mills_energy(&s).eval(&b).unwrap();
        prop_assert!((engine - c).abs() <= 1e-12 * c, "{} vs {}", engine, c);
    }

    #[test]
    fn zero_curve_annihilates_the_energy(a in 0.1f64..3.0, h in 0.1f64..3.0, k in 0.1f64..3.0) {
        let ps: Vec<f64> = (0..200).map(|m| 0.05 + m as f64 * 0.025).collect();
        let LevelSetResult::RationalCurve { points, poles } = cancer_zero_curve(a, h, k, &ps).unwrap() else {
            return Err(TestCaseError::fail("expected a curve"));
        };
        prop_assert_eq!(points.len() + poles.len(), ps.len());
        // Hand form of the only independent connection entry.
        for &(p, q) in &points {
            let d = 1.0 + k * p * p;
            let fp = h * q * (1.0 - k * p * p) / (d * d);
            let fq = h * p / d;
            let n12 = 0.5 * ((2.0 * a + 1.0) * p + a * q - fp - fq);
            let scale = 1.0 + ((2.0 * a + 1.0) * p).abs() + (a * q).abs() + fp.abs() + fq.abs();
            prop_assert!(n12.abs() <= 1e-12 * scale, "P={} Q={}: {}", p, q, n12);
        }
        let (s, _) = cancer_model(1.0, a, h, k).unwrap();
        let check = cancer_zero_curve_check(&s, &points).unwrap();
        prop_assert!(check.passed, "{}", check);
    }
}

#[test]
fn critical_level_gives_the_line() {
    let cls = classify_hiv_level_set(1.0, 1.0, 1.0, 0.125).unwrap();
    assert_eq!(
        cls.result,
        LevelSetResult::Line {
            point: vec![0.5, 0.0, 0.0],
            direction: vec![0.0, 1.0, 0.0]
        }
    );
    assert_eq!(hiv_energy(1.0, 1.0, 1.0, 0.5, 0.0), 0.125);
    assert!(matches!(classify_hiv_level_set(1.0, 1.0, 1.0, 0.1).unwrap().result, LevelSetResult::EmptySet));
    assert!(matches!(
        classify_hiv_level_set(0.0, 1.0, 1.0, 0.1),
        Err(LevelSetError::NonPositiveParameter { name: "k", .. })
    ));
}

#[test]
fn cancer_contours_stay_on_the_level() {
    let (s, _) = cancer_model(0.5, 0.3, 1.0, 0.1).unwrap();
    let e = yang_mills_energy(&s);
    let region = [Interval::new(0.1, 5.0), Interval::new(0.1, 5.0)];
    let cells = 128;
    let level = 1.0;
    let LevelSetResult::Contours { polylines, .. } = extract_contours(&s, ("P", "Q"), &Bindings::new(), region, level, cells).unwrap()
    else {
        panic!("expected contours");
    };
    assert!(!polylines.is_empty());
    let f = |p: f64, q: f64| e.eval(&s.param_bindings().with("P", p).with("Q", q)).unwrap();
    let h = region[0].width() / cells as f64;
    for &(p, q) in polylines.iter().flatten() {
        assert!(region[0].contains(p) && region[1].contains(q));
        // Linear interpolation on an edge of length h errs by at most
        // h^2/8 * max |f''| along it; sample the curvature nearby.
        let g = 1e-3;
        let curvature = (-2..=2)
            .map(|m| m as f64 * h / 2.0)
            .flat_map(|o| {
                let (pp, qq) = ((p + o).max(0.1 + g), (q + o).max(0.1 + g));
                [
                    (f(pp + g, q) - 2.0 * f(pp, q) + f(pp - g, q)) / (g * g),
                    (f(p, qq + g) - 2.0 * f(p, qq) + f(p, qq - g)) / (g * g),
                ]
            })
            .fold(0.0_f64, |m, x| m.max(x.abs()));
        let tol = 2.0 * h * h / 8.0 * curvature + 1e-9;
        assert!((f(p, q) - level).abs() <= tol, "({}, {}): {} vs tol {}", p, q, f(p, q), tol);
    }
}

#[test]
fn contours_do_not_depend_on_the_thread_count() {
    let (s, _) = cancer_model(1.0, 1.0, 1.0, 1.0).unwrap();
    let region = [Interval::new(0.1, 5.0), Interval::new(0.1, 5.0)];
    let run = || extract_contours(&s, ("P", "Q"), &Bindings::new(), region, 2.0, 96).unwrap();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(run);
    let many = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(run);
    assert_eq!(single, many);
    assert_eq!(run(), run());
}

#[test]
fn circle_contour_is_a_single_closed_loop() {
    let f = Expr::parse("x^2 + y^2").unwrap();
    let region = [Interval::new(-2.0, 2.0), Interval::new(-2.0, 2.0)];
    let LevelSetResult::Contours { polylines, .. } = extract_contours_expr(&f, ("x", "y"), &Bindings::new(), region, 1.0, 64).unwrap()
    else {
        panic!("expected contours");
    };
    assert_eq!(polylines.len(), 1);
    let line = &polylines[0];
    assert_eq!(line.first(), line.last());
    let h = 4.0 / 64.0;
    for &(x, y) in line {
        assert!(((x * x + y * y) - 1.0).abs() <= h * h / 4.0 + 1e-12);
    }
}

#[test]
fn constant_field_has_no_contours_off_level() {
    let grid = ScalarGrid::sample(Interval::new(0.0, 1.0), Interval::new(0.0, 1.0), 16, |_, _| 3.0);
    assert!(grid.contours(1.0).is_empty());
    assert!(grid.contours(5.0).is_empty());
    // No node is strictly above its own value, so there is no crossing.
    assert!(grid.contours(3.0).is_empty());
}

#[test]
fn open_chains_end_on_the_boundary() {
    let f = Expr::parse("x + 2*y").unwrap();
    let region = [Interval::new(0.0, 1.0), Interval::new(0.0, 1.0)];
    let LevelSetResult::Contours { polylines, .. } = extract_contours_expr(&f, ("x", "y"), &Bindings::new(), region, 1.3, 10).unwrap()
    else {
        panic!("expected contours");
    };
    assert_eq!(polylines.len(), 1);
    let line = &polylines[0];
    let on_edge = |(x, y): (f64, f64)| x.abs() < 1e-12 || (x - 1.0).abs() < 1e-12 || y.abs() < 1e-12 || (y - 1.0).abs() < 1e-12;
    assert!(on_edge(line[0]) && on_edge(*line.last().unwrap()));
    for &(x, y) in line {
        assert!((x + 2.0 * y - 1.3).abs() <= 1e-12);
    }
}
