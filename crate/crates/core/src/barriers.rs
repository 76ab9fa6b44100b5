//! Barrier sets with known curvature behaviour: shrinking balls, the arctan strip, and the
//! moving strip used to force a neckpinch.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{graph_region_curvature, omega_bar, slab_curvature, FracOrder, GraphRegion, QuadConfig};
use crate::error::{Error, Result};

/// Strip `{|y| < ε + (2/π) arctan(δ t²)}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StripSpec {
    pub epsilon: f64,
    pub delta: f64,
}

impl StripSpec {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) || !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::Domain(format!("strip needs epsilon >= 0 and delta >= 0, got ({epsilon}, {delta})")));
        }
        Ok(StripSpec { epsilon, delta })
    }

    /// `[f, f', f'']` of the upper boundary at `t`.
    pub fn profile_derivatives(&self, t: f64) -> [f64; 3] {
        let d = self.delta;
        let w = d * t * t;
        let den = 1.0 + w * w;
        [
            self.epsilon + 2.0 / PI * w.atan(),
            4.0 * d * t / (PI * den),
            4.0 * d / PI * (1.0 - 3.0 * w * w) / (den * den),
        ]
    }

    /// Signed curvature of the upper boundary, positive where the strip is locally convex.
    pub fn boundary_curvature(&self, t: f64) -> f64 {
        let [_, d1, d2] = self.profile_derivatives(t);
        -d2 / (1.0 + d1 * d1).powf(1.5)
    }

    pub fn region(&self) -> GraphRegion {
        let spec = *self;
        GraphRegion::symmetric(Arc::new(move |t| spec.profile_derivatives(t)))
    }
}

pub fn strip_profile(spec: &StripSpec, t: f64) -> f64 {
    spec.profile_derivatives(t)[0]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripBounds {
    /// Largest tangential component `|f'| / sqrt(1 + f'^2)` of the boundary normal.
    pub eta: f64,
    /// Largest classical curvature magnitude of the boundary.
    pub kappa_geom: f64,
}

/// Exact suprema of slope and curvature over the boundary.
///
/// Both depend on `t` only through `w = sqrt(δ) t`, so a fixed grid in `w` followed by golden
/// section refinement covers every `δ`.
pub fn strip_bounds(spec: &StripSpec) -> StripBounds {
    if spec.delta == 0.0 {
        return StripBounds { eta: 0.0, kappa_geom: 0.0 };
    }
    let sd = spec.delta.sqrt();
    let slope = |w: f64| {
        let d = spec.profile_derivatives(w / sd)[1];
        d.abs() / (1.0 + d * d).sqrt()
    };
    let curv = |w: f64| spec.boundary_curvature(w / sd).abs();
    StripBounds { eta: maximize(slope, 0.0, 20.0), kappa_geom: maximize(curv, 0.0, 20.0) }
}

fn maximize<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    const N: usize = 4000;
    let step = (b - a) / N as f64;
    let (mut best_i, mut best) = (0, f(a));
    for i in 1..=N {
        let v = f(a + step * i as f64);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let mut lo = a + step * best_i.saturating_sub(1) as f64;
    let mut hi = (a + step * (best_i + 1) as f64).min(b);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if f(x1) < f(x2) {
            lo = x1;
        } else {
            hi = x2;
        }
    }
    best.max(f(0.5 * (lo + hi)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StripSample {
    pub t: f64,
    pub value: f64,
    pub error_estimate: f64,
    pub classical_curvature: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripPositivityReport {
    pub epsilon: f64,
    pub delta: f64,
    pub s: f64,
    pub t_max: f64,
    pub samples: Vec<StripSample>,
    pub min_value: f64,
    pub argmin_t: f64,
    /// Error estimate of the sample attaining `min_value`.
    pub min_value_error: f64,
    /// Curvature of the slab of half-width `ε + 1` the strip opens up to far from the waist.
    pub asymptotic_value: f64,
    /// `min(value - error)` over the samples, capped by `asymptotic_value` when `δ > 0`.
    pub c0_estimate: f64,
}

/// Far end of the sampled range: the boundary has reached 99% of its final opening there.
pub fn strip_sample_range(spec: &StripSpec) -> f64 {
    if spec.delta == 0.0 {
        1.0
    } else {
        ((0.99 * 0.5 * PI).tan() / spec.delta).sqrt()
    }
}

/// Samples the strip curvature on a geometric grid over `[0, T_max]`.
pub fn verify_strip_positivity(spec: &StripSpec, s: FracOrder, n_samples: usize, cfg: &QuadConfig) -> Result<StripPositivityReport> {
    if n_samples < 3 {
        return Err(Error::Domain(format!("need at least 3 samples, got {n_samples}")));
    }
    let StripSpec { epsilon, delta } = StripSpec::new(spec.epsilon, spec.delta)?;
    if epsilon == 0.0 {
        return Err(Error::Geometry("a strip with epsilon = 0 has a cusp at the waist".into()));
    }
    let t_max = strip_sample_range(spec);
    let t_min = 1e-3 * t_max;
    let ts: Vec<f64> = std::iter::once(0.0)
        .chain((0..n_samples - 1).map(|k| t_min * (t_max / t_min).powf(k as f64 / (n_samples - 2) as f64)))
        .collect();
    let region = spec.region();
    let samples = ts
        .par_iter()
        .map(|&t| {
            let r = graph_region_curvature(&region, t, s, cfg)?;
            Ok(StripSample { t, value: r.value, error_estimate: r.error_estimate, classical_curvature: spec.boundary_curvature(t) })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = samples.iter().min_by(|a, b| a.value.total_cmp(&b.value)).expect("non-empty");
    let lower = samples.iter().map(|p| p.value - p.error_estimate).fold(f64::INFINITY, f64::min);
    let asymptotic_value = slab_curvature(epsilon + if delta > 0.0 { 1.0 } else { 0.0 }, 2, s)?;
    let c0_estimate = if delta > 0.0 { lower.min(asymptotic_value) } else { lower };
    Ok(StripPositivityReport {
        epsilon,
        delta,
        s: s.get(),
        t_max,
        min_value: best.value,
        argmin_t: best.t,
        min_value_error: best.error_estimate,
        asymptotic_value,
        c0_estimate,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub r0: f64,
    pub n: usize,
}

impl BallSpec {
    pub fn new(center: Vec<f64>, r0: f64) -> Result<Self> {
        let n = center.len();
        if n < 2 {
            return Err(Error::Domain(format!("ball dimension must be at least 2, got {n}")));
        }
        if !(r0 > 0.0 && r0.is_finite()) {
            return Err(Error::Domain(format!("ball radius must be positive, got {r0}")));
        }
        Ok(BallSpec { center, r0, n })
    }

    pub fn planar(r0: f64) -> Result<Self> {
        BallSpec::new(vec![0.0, 0.0], r0)
    }
}

/// `T = R0^{s+1} / (ω̄ (s+1))`.
pub fn ball_extinction_time(spec: &BallSpec, s: FracOrder) -> Result<f64> {
    if !(spec.r0 > 0.0) {
        return Err(Error::Domain(format!("ball radius must be positive, got {}", spec.r0)));
    }
    let sv = s.get();
    Ok(spec.r0.powf(1.0 + sv) / (omega_bar(spec.n, s, &QuadConfig::default())? * (1.0 + sv)))
}

/// `R(t) = (R0^{s+1} - ω̄ (1+s) t)^{1/(s+1)}`, zero from the extinction time on.
pub fn ball_radius_at(spec: &BallSpec, t: f64, s: FracOrder) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!("time must be nonnegative, got {t}")));
    }
    let sv = s.get();
    let w = omega_bar(spec.n, s, &QuadConfig::default())?;
    let base = spec.r0.powf(1.0 + sv) - w * (1.0 + sv) * t;
    Ok(if base <= 0.0 { 0.0 } else { base.powf(1.0 / (1.0 + sv)) })
}

/// Closing time `2ε₀/κ` of the moving strip `ε(t) = ε₀ - κt`, as stated for the construction.
pub fn strip_pinch_time(epsilon0: f64, kappa_speed: f64) -> Result<f64> {
    if !(epsilon0 > 0.0 && kappa_speed > 0.0) {
        return Err(Error::Domain(format!("epsilon0 and kappa_speed must be positive, got ({epsilon0}, {kappa_speed})")));
    }
    Ok(2.0 * epsilon0 / kappa_speed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeckpinchParams {
    pub s: FracOrder,
    /// Inward speed of the moving strip.
    pub kappa_speed: f64,
    pub epsilon0: f64,
    pub delta: f64,
    pub lobe_radius: f64,
    /// Lobe centres sit at `(±L, 0)`.
    #[serde(rename = "L")]
    pub lobe_offset: f64,
    pub c0_estimate: f64,
    pub containment_margin: f64,
}

impl NeckpinchParams {
    pub fn strip(&self) -> StripSpec {
        StripSpec { epsilon: self.epsilon0, delta: self.delta }
    }

    pub fn lobe_ball(&self) -> BallSpec {
        BallSpec { center: vec![self.lobe_offset, 0.0], r0: self.lobe_radius, n: 2 }
    }

    /// Lists every violated constraint.
    pub fn check(&self) -> Result<()> {
        let mut violated = Vec::new();
        if !(self.kappa_speed > 0.0 && self.kappa_speed < self.c0_estimate) {
            violated.push(format!("kappa_speed {} must lie in (0, c0_estimate = {})", self.kappa_speed, self.c0_estimate));
        }
        let t_ball = ball_extinction_time(&self.lobe_ball(), self.s)?;
        let bound = 0.25 * self.kappa_speed * t_ball;
        if !(self.epsilon0 > 0.0 && self.epsilon0 < bound) {
            violated.push(format!("epsilon0 {} must lie in (0, kappa_speed * T_ball / 4 = {bound})", self.epsilon0));
        }
        let half_width = strip_profile(&self.strip(), self.lobe_offset - self.lobe_radius);
        if !(self.lobe_radius + self.containment_margin <= half_width) {
            violated.push(format!(
                "lobe radius {} plus margin {} exceeds the strip half-width {half_width} at L - lobe_radius",
                self.lobe_radius, self.containment_margin
            ));
        }
        if !(self.lobe_radius > 0.0 && self.lobe_radius <= 1.0) {
            violated.push(format!("lobe_radius {} must lie in (0, 1]", self.lobe_radius));
        }
        if violated.is_empty() {
            Ok(())
        } else {
            Err(Error::Infeasible(violated.join("; ")))
        }
    }
}

/// `c0_estimate - kappa_speed` for the strip at its initial width; negative means the moving
/// strip is not certified as a supersolution.
pub fn supersolution_margin(params: &NeckpinchParams, s: FracOrder, cfg: &QuadConfig) -> Result<f64> {
    let report = verify_strip_positivity(&params.strip(), s, POSITIVITY_SAMPLES, cfg)?;
    Ok(report.c0_estimate - params.kappa_speed)
}

/// Samples used whenever a strip positivity estimate feeds the neckpinch construction.
pub const POSITIVITY_SAMPLES: usize = 64;
/// Lobe radius of the dumbbell.
pub const LOBE_RADIUS: f64 = 0.9;
/// Opening parameters tried in order; the first giving a neck no longer than
/// `MAX_NECK_RATIO * lobe_radius` is used.
pub const DELTA_LADDER: [f64; 7] = [0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 4.0];
pub const MAX_NECK_RATIO: f64 = 2.5;

/// Picks a parameter set satisfying every [`NeckpinchParams`] constraint.
///
/// `δ` is the first ladder value keeping the neck short; `ε₀` starts at 0.1 and is lowered to
/// 90% of `¼ κ T_ball(lobe_radius)` until the bound holds with `κ = c0/2` recomputed each time.
pub fn choose_neckpinch_params(n: usize, s: FracOrder, cfg: &QuadConfig) -> Result<NeckpinchParams> {
    if n != 2 {
        return Err(Error::Domain(format!("the neckpinch construction is planar, got n = {n}")));
    }
    let r = LOBE_RADIUS;
    let margin = 0.05 * r;
    let t_ball = ball_extinction_time(&BallSpec::planar(r)?, s)?;
    let mut epsilon0 = 0.1;
    let mut c0 = f64::NAN;
    let mut delta = DELTA_LADDER[0];
    for _ in 0..20 {
        let opening = r + margin - epsilon0;
        if !(opening > 0.0 && opening < 1.0) {
            return Err(Error::Infeasible(format!("lobe radius {r} with margin cannot fit any strip with epsilon0 = {epsilon0}")));
        }
        let reach = |d: f64| ((0.5 * PI * opening * 1.0001).tan() / d).sqrt();
        delta = *DELTA_LADDER
            .iter()
            .find(|&&d| reach(d) + margin <= MAX_NECK_RATIO * r)
            .unwrap_or(DELTA_LADDER.last().expect("ladder"));
        c0 = verify_strip_positivity(&StripSpec::new(epsilon0, delta)?, s, POSITIVITY_SAMPLES, cfg)?.c0_estimate;
        if !(c0 > 0.0) {
            return Err(Error::Infeasible(format!("strip curvature estimate c0 = {c0} is not positive")));
        }
        let bound = 0.25 * 0.5 * c0 * t_ball;
        if epsilon0 < bound {
            let lobe_offset = r + margin + reach(delta);
            let params = NeckpinchParams {
                s,
                kappa_speed: 0.5 * c0,
                epsilon0,
                delta,
                lobe_radius: r,
                lobe_offset,
                c0_estimate: c0,
                containment_margin: margin,
            };
            params.check()?;
            return Ok(params);
        }
        epsilon0 = 0.9 * bound;
    }
    Err(Error::Infeasible(format!(
        "epsilon0 < kappa_speed * T_ball / 4 not reached (last epsilon0 = {epsilon0}, c0 = {c0}, delta = {delta})"
    )))
}
