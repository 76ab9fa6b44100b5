use std::f64::consts::PI;

use fmcf_core::barriers::{
    ball_extinction_time, ball_radius_at, choose_neckpinch_params, strip_bounds, strip_pinch_time, strip_profile, supersolution_margin,
    verify_strip_positivity, BallSpec, NeckpinchParams, StripSpec, POSITIVITY_SAMPLES,
};
use fmcf_core::curvature::{classical_curvature, graph_region_curvature, omega_bar, region_curvature_oracle, slab_curvature};
use fmcf_core::{ClosedCurve, Error, FracOrder, QuadConfig, Vec2};

fn half() -> FracOrder {
    FracOrder::new(0.5).unwrap()
}

fn cfg() -> QuadConfig {
    QuadConfig::default()
}

#[test]
fn strip_profile_values() {
    let a = StripSpec::new(0.1, 3.0).unwrap();
    assert_eq!(strip_profile(&a, 0.0), 0.1);
    let far = strip_profile(&a, 1e3);
    assert!(far < 1.1 && far > 1.1 - 1e-6);
    let flat = StripSpec::new(0.1, 0.0).unwrap();
    for t in [-5.0, 0.0, 0.3, 1e6] {
        assert_eq!(strip_profile(&flat, t), 0.1);
    }
    assert_eq!(strip_profile(&a, 0.7), strip_profile(&a, -0.7));
    assert!(StripSpec::new(-0.1, 1.0).is_err() && StripSpec::new(0.1, -1.0).is_err());
}

#[test]
fn strip_bounds_examples() {
    let flat = strip_bounds(&StripSpec::new(0.1, 0.0).unwrap());
    assert_eq!((flat.eta, flat.kappa_geom), (0.0, 0.0));
    let b = strip_bounds(&StripSpec::new(0.1, 0.05).unwrap());
    assert!((b.kappa_geom - 4.0 * 0.05 / PI).abs() < 1e-9, "{b:?}");
    let mut prev = 0.0;
    for d in [0.01, 0.05, 0.2, 1.0, 5.0] {
        let e = strip_bounds(&StripSpec::new(0.1, d).unwrap()).eta;
        assert!(e >= prev);
        prev = e;
    }
}

/// Strip curvature against the area-integral oracle at a few boundary points.
#[test]
fn strip_curvature_matches_region_oracle() {
    let spec = StripSpec::new(0.1, 0.05).unwrap();
    let region = spec.region();
    for t in [0.0, 1.0, 4.0] {
        let g = graph_region_curvature(&region, t, half(), &cfg()).unwrap();
        let f = move |x: f64| 0.1 + (2.0 / PI) * (0.05 * x * x).atan();
        let d = 4.0 * 0.05 * t / PI / (1.0 + (0.05 * t * t).powi(2));
        let x = Vec2::new(t, f(t));
        let nrm = Vec2::new(-d, 1.0).normalized();
        let o = region_curvature_oracle(move |p: Vec2| p.y.abs() < f(p.x), x, nrm, half(), &cfg()).unwrap();
        let tol = 3.0 * g.error_estimate.max(o.error_estimate).max(1e-3 * g.value.abs());
        assert!((g.value - o.value).abs() <= tol, "t = {t}: {g:?} vs {o:?}");
    }
}

#[test]
fn flat_strip_positivity_is_the_slab_value() {
    let spec = StripSpec::new(0.1, 0.0).unwrap();
    let r = verify_strip_positivity(&spec, half(), 16, &cfg()).unwrap();
    let slab = slab_curvature(0.1, 2, half()).unwrap();
    for sample in &r.samples {
        assert!((sample.value - slab).abs() <= 1e-3 * slab + sample.error_estimate, "{sample:?}");
    }
    assert!((r.min_value - slab).abs() <= 1e-3 * slab);
}

#[test]
fn arctan_strip_positive_while_waist_is_concave() {
    let spec = StripSpec::new(0.1, 0.05).unwrap();
    let r = verify_strip_positivity(&spec, half(), POSITIVITY_SAMPLES, &cfg()).unwrap();
    assert!(r.samples.len() >= POSITIVITY_SAMPLES);
    assert!(r.min_value - r.min_value_error > 0.0, "{} ± {}", r.min_value, r.min_value_error);
    assert!(r.c0_estimate > 0.0 && r.c0_estimate <= r.min_value);
    let waist = &r.samples[0];
    assert_eq!(waist.t, 0.0);
    assert!(waist.classical_curvature < 0.0);
    assert!((waist.classical_curvature + 4.0 * 0.05 / PI).abs() < 1e-12);
    // the discretized boundary gives the same concave waist
    let n = 2001;
    let nodes: Vec<Vec2> = (0..n)
        .map(|k| -10.0 + 20.0 * k as f64 / (n - 1) as f64)
        .map(|t| Vec2::new(t, -strip_profile(&spec, t)))
        .chain((0..n).map(|k| 10.0 - 20.0 * k as f64 / (n - 1) as f64).map(|t| Vec2::new(t, strip_profile(&spec, t))))
        .collect();
    let poly = ClosedCurve::new(nodes).unwrap();
    let top_mid = n + (n - 1) / 2;
    let k = classical_curvature(&poly, top_mid);
    assert!((k + 4.0 * 0.05 / PI).abs() < 1e-4, "{k}");
}

#[test]
fn positivity_minimum_decreases_with_width() {
    let mins: Vec<f64> = [0.05, 0.1, 0.2]
        .iter()
        .map(|&e| verify_strip_positivity(&StripSpec::new(e, 0.05).unwrap(), half(), 24, &cfg()).unwrap().min_value)
        .collect();
    assert!(mins[0] > mins[1] && mins[1] > mins[2], "{mins:?}");
}

#[test]
fn positivity_is_even_in_t() {
    let spec = StripSpec::new(0.1, 0.5).unwrap();
    let region = spec.region();
    for t in [0.3, 2.0, 7.5] {
        let a = graph_region_curvature(&region, t, half(), &cfg()).unwrap();
        let b = graph_region_curvature(&region, -t, half(), &cfg()).unwrap();
        assert!((a.value - b.value).abs() <= a.error_estimate + b.error_estimate, "{a:?} {b:?}");
    }
}

#[test]
fn positivity_rejects_bad_input() {
    let spec = StripSpec::new(0.1, 0.05).unwrap();
    assert!(verify_strip_positivity(&spec, half(), 2, &cfg()).is_err());
    assert!(verify_strip_positivity(&StripSpec::new(0.0, 0.05).unwrap(), half(), 8, &cfg()).is_err());
}

#[test]
fn ball_laws() {
    let s = half();
    let w = omega_bar(2, s, &cfg()).unwrap();
    let unit = BallSpec::planar(1.0).unwrap();
    let t1 = ball_extinction_time(&unit, s).unwrap();
    assert!((t1 - 1.0 / (w * 1.5)).abs() < 1e-12);
    let t2 = ball_extinction_time(&BallSpec::planar(2.0).unwrap(), s).unwrap();
    assert!((t2 / t1 - 2f64.powf(1.5)).abs() < 1e-12);
    assert_eq!(ball_radius_at(&unit, 0.0, s).unwrap(), 1.0);
    assert_eq!(ball_radius_at(&unit, t1, s).unwrap(), 0.0);
    assert_eq!(ball_radius_at(&unit, 2.0 * t1, s).unwrap(), 0.0);
    let mut prev = 1.0;
    for k in 1..100 {
        let t = t1 * k as f64 / 100.0;
        let r = ball_radius_at(&unit, t, s).unwrap();
        assert!(r < prev);
        assert!((r.powf(1.5) + w * 1.5 * t - 1.0).abs() < 1e-12);
        prev = r;
    }
    assert!(ball_radius_at(&unit, t1 * (1.0 - 1e-12), s).unwrap() < 1e-6);
    // higher dimensions use ω̄(n, s)
    let b3 = BallSpec::new(vec![0.0, 0.0, 0.0], 1.0).unwrap();
    let t3 = ball_extinction_time(&b3, s).unwrap();
    assert!((t3 - 1.0 / (omega_bar(3, s, &cfg()).unwrap() * 1.5)).abs() < 1e-12);
    assert!(BallSpec::planar(0.0).is_err());
}

#[test]
fn pinch_time_formula() {
    assert!((strip_pinch_time(0.1, 0.05).unwrap() - 4.0).abs() < 1e-12);
    assert!((strip_pinch_time(0.1, 0.1).unwrap() - 2.0).abs() < 1e-12);
    assert_eq!(strip_pinch_time(0.2, 0.2).unwrap(), strip_pinch_time(0.1, 0.1).unwrap());
    assert!(strip_pinch_time(0.0, 1.0).is_err() && strip_pinch_time(0.1, 0.0).is_err());
}

#[test]
fn chosen_neckpinch_params_satisfy_constraints() {
    let s = half();
    let p = choose_neckpinch_params(2, s, &cfg()).unwrap();
    assert!(p.kappa_speed < p.c0_estimate);
    let t_ball = ball_extinction_time(&p.lobe_ball(), s).unwrap();
    assert!(p.epsilon0 < 0.25 * p.kappa_speed * t_ball);
    // lobe circles strictly inside the strip, checked on sampled circle points
    let strip = p.strip();
    for k in 0..720 {
        let th = 2.0 * PI * k as f64 / 720.0;
        for sign in [-1.0, 1.0] {
            let q = Vec2::new(sign * p.lobe_offset + p.lobe_radius * th.cos(), p.lobe_radius * th.sin());
            assert!(q.y.abs() < strip_profile(&strip, q.x));
        }
    }
    p.check().unwrap();
    assert_eq!(p, choose_neckpinch_params(2, s, &cfg()).unwrap());
    assert!(supersolution_margin(&p, s, &cfg()).unwrap() > 0.0);
}

#[test]
fn supersolution_margin_arithmetic() {
    let s = half();
    let p = choose_neckpinch_params(2, s, &cfg()).unwrap();
    let c0 = p.c0_estimate;
    let with = |k: f64| NeckpinchParams { kappa_speed: k, ..p };
    assert!((supersolution_margin(&with(0.5 * c0), s, &cfg()).unwrap() - 0.5 * c0).abs() < 1e-9 * c0);
    assert!(supersolution_margin(&with(c0), s, &cfg()).unwrap().abs() < 1e-9 * c0);
    assert!((supersolution_margin(&with(0.0), s, &cfg()).unwrap() - c0).abs() < 1e-9 * c0);
}

#[test]
fn params_check_lists_violations() {
    let p = choose_neckpinch_params(2, half(), &cfg()).unwrap();
    let bad = NeckpinchParams { lobe_offset: p.lobe_radius, ..p };
    match bad.check() {
        Err(Error::Infeasible(msg)) => assert!(msg.contains("strip half-width"), "{msg}"),
        other => panic!("{other:?}"),
    }
}
