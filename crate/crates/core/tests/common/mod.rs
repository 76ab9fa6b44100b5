//! Curvature invariants shared by the property suite and the acceptance run.

use std::f64::consts::PI;

use fmcf_core::curvature::{curve_curvature, graph_region_curvature, region_curvature_oracle, slab_curvature, GraphRegion};
use fmcf_core::{ClosedCurve, FracOrder, QuadConfig, Vec2};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

/// Smooth star-shaped curve r(θ) = 1 + a cos(kθ + φ) + b sin(mθ).
#[derive(Debug, Clone)]
pub struct Star {
    pub a: f64,
    pub k: u32,
    pub phi: f64,
    pub b: f64,
    pub m: u32,
    pub n: usize,
}

impl Star {
    pub fn curve(&self) -> ClosedCurve {
        let nodes = (0..self.n)
            .map(|i| {
                let t = 2.0 * PI * i as f64 / self.n as f64;
                let r = 1.0 + self.a * (self.k as f64 * t + self.phi).cos() + self.b * (self.m as f64 * t).sin();
                Vec2::new(r * t.cos(), r * t.sin())
            })
            .collect();
        ClosedCurve::new(nodes).unwrap()
    }
}

pub fn star() -> impl Strategy<Value = Star> {
    (0.0..0.12f64, 2u32..5, 0.0..2.0 * PI, 0.0..0.06f64, 2u32..4, 128usize..300).prop_map(|(a, k, phi, b, m, n)| Star { a, k, phi, b, m, n })
}

pub fn order() -> impl Strategy<Value = f64> {
    0.1..0.9f64
}

pub const LAMBDAS: [f64; 3] = [0.5, 2.0, 10.0];

fn cfg() -> QuadConfig {
    QuadConfig::default()
}

fn node(c: &ClosedCurve, pick: f64) -> usize {
    ((pick * c.len() as f64) as usize).min(c.len() - 1)
}

/// H of P equals minus H of P reversed, within 2·(sum of both error estimates).
pub fn antisymmetry(shape: Star, s: f64, pick: f64) -> Result<(), TestCaseError> {
    let c = shape.curve();
    let i = node(&c, pick);
    let s = FracOrder::new(s).unwrap();
    let a = curve_curvature(&c, i, s, &cfg()).unwrap();
    let b = curve_curvature(&c.reversed(), c.len() - 1 - i, s, &cfg()).unwrap();
    prop_assert!((a.value + b.value).abs() <= 2.0 * (a.error_estimate + b.error_estimate), "{:?} {:?}", a, b);
    Ok(())
}

/// λ^s H(λP) = H(P) within the combined tolerance.
pub fn scaling(shape: Star, s: f64, pick: f64, lambda: f64) -> Result<(), TestCaseError> {
    let c = shape.curve();
    let i = node(&c, pick);
    let s = FracOrder::new(s).unwrap();
    let a = curve_curvature(&c, i, s, &cfg()).unwrap();
    let b = curve_curvature(&c.scaled(lambda), i, s, &cfg()).unwrap();
    let f = lambda.powf(s.get());
    prop_assert!((b.value * f - a.value).abs() <= a.error_estimate + f * b.error_estimate, "λ = {}: {:?} {:?}", lambda, a, b);
    Ok(())
}

/// Translation and rotation leave node curvatures unchanged within the combined tolerance.
pub fn rigid_motion(shape: Star, s: f64, shift: Vec2, angle: f64) -> Result<(), TestCaseError> {
    let c = shape.curve();
    let moved = c.rotated(angle).translated(shift);
    let s = FracOrder::new(s).unwrap();
    for i in (0..c.len()).step_by(c.len() / 5) {
        let a = curve_curvature(&c, i, s, &cfg()).unwrap();
        let b = curve_curvature(&moved, i, s, &cfg()).unwrap();
        prop_assert!((a.value - b.value).abs() <= a.error_estimate + b.error_estimate, "node {}: {:?} {:?}", i, a, b);
    }
    Ok(())
}

/// Unit disk inside the slab |y| < 1, tangent at (0, 1): H_disk ≥ H_slab there.
pub fn monotone_disk_in_slab(s: f64, n: usize) -> Result<(), TestCaseError> {
    let s = FracOrder::new(s).unwrap();
    let n = n - n % 4;
    let disk = ClosedCurve::circle(Vec2::ZERO, 1.0, n).unwrap();
    let h_disk = curve_curvature(&disk, n / 4, s, &cfg()).unwrap();
    let h_slab = slab_curvature(1.0, 2, s).unwrap();
    prop_assert!(h_disk.value + h_disk.error_estimate >= h_slab, "{:?} vs {}", h_disk, h_slab);
    Ok(())
}

/// {x² + y²/b² < 1} ⊆ unit disk, touching at (1, 0): H_ellipse ≥ H_disk there.
pub fn monotone_ellipse_in_disk(b: f64, s: f64) -> Result<(), TestCaseError> {
    let s = FracOrder::new(s).unwrap();
    let e = ClosedCurve::ellipse(Vec2::ZERO, 1.0, b, 512).unwrap();
    let d = ClosedCurve::circle(Vec2::ZERO, 1.0, 512).unwrap();
    let he = curve_curvature(&e, 0, s, &cfg()).unwrap();
    let hd = curve_curvature(&d, 0, s, &cfg()).unwrap();
    prop_assert!(he.value + he.error_estimate >= hd.value - hd.error_estimate, "{:?} vs {:?}", he, hd);
    Ok(())
}

/// Any half-plane has zero curvature, through the graph evaluator and the region oracle.
pub fn half_plane_zero(s: f64, t0: f64, angle: f64, c: f64) -> Result<(), TestCaseError> {
    let s = FracOrder::new(s).unwrap();
    let g = graph_region_curvature(&GraphRegion::half_plane(), t0, s, &cfg()).unwrap();
    prop_assert!(g.value.abs() <= cfg().abs_tol.max(g.error_estimate), "{:?}", g);
    let nrm = Vec2::new(angle.cos(), angle.sin());
    // the line through x itself: x = c·n is off {p·n = c} by rounding, which H^s amplifies
    let x = nrm * c;
    let r = region_curvature_oracle(move |p: Vec2| (p - x).dot(nrm) < 0.0, x, nrm, s, &cfg()).unwrap();
    prop_assert!(r.value.abs() <= cfg().abs_tol.max(r.error_estimate), "{:?}", r);
    Ok(())
}
