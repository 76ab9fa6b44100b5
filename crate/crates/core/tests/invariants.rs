mod common;

use std::f64::consts::PI;

use common::*;
use fmcf_core::Vec2;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn antisymmetry_under_reversal(shape in star(), s in order(), pick in 0.0..1.0f64) {
        antisymmetry(shape, s, pick)?;
    }

    #[test]
    fn scaling_law(shape in star(), s in order(), pick in 0.0..1.0f64, li in 0usize..3) {
        scaling(shape, s, pick, LAMBDAS[li])?;
    }

    #[test]
    fn rigid_motion_invariance(shape in star(), s in order(), dx in -5.0..5.0f64, dy in -5.0..5.0f64, angle in -PI..PI) {
        rigid_motion(shape, s, Vec2::new(dx, dy), angle)?;
    }

    #[test]
    fn disk_inside_slab_is_more_curved(s in order(), n in 128usize..1024) {
        monotone_disk_in_slab(s, n)?;
    }

    #[test]
    fn nested_ellipse_inside_disk_is_more_curved(b in 0.3..0.95f64, s in order()) {
        monotone_ellipse_in_disk(b, s)?;
    }

    #[test]
    fn half_plane_is_flat(s in order(), t0 in -50.0..50.0f64, angle in -PI..PI, c in -3.0..3.0f64) {
        half_plane_zero(s, t0, angle, c)?;
    }
}
