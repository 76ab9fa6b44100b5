//! Fractional mean curvature of planar sets.
//!
//! For a set `E` with boundary point `x` the curvature is the principal value
//! `H(x) = PV ∫ (χ_{CE}(y) - χ_E(y)) / |x - y|^{n+s} dy`. Applying the divergence theorem to
//! `(y - x) / |y - x|^{n+s}`, whose divergence is `-s / |y - x|^{n+s}`, turns it into
//!
//! ```text
//! H(x) = (2/s) ∮_{∂E} (y - x)·ν(y) / |y - x|^{n+s} dσ(y)
//! ```
//!
//! whose integrand only has the integrable `|y - x|^{-s}` singularity on a C^{1,1} boundary.
//! [`curve_curvature`] evaluates this boundary form on polygonal fronts; the slow
//! [`region_curvature_oracle`] integrates the defining area integral directly and is kept as
//! an independent check of the reduction.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{ClosedCurve, HermiteEdge, Vec2};
use crate::quadrature::{gauss_legendre8, integrate, integrate_pieces, QuadOutcome};

/// Exponent `s ∈ (0, 1)` of the interaction kernel.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct FracOrder(f64);

impl FracOrder {
    /// Lower end of the range where the evaluators are considered accurate.
    pub const SUPPORTED_MIN: f64 = 0.05;
    /// Upper end of the range where the evaluators are considered accurate.
    pub const SUPPORTED_MAX: f64 = 0.95;

    pub fn new(s: f64) -> Result<Self> {
        if s > 0.0 && s < 1.0 {
            Ok(FracOrder(s))
        } else {
            Err(Error::Domain(format!("fractional order must lie in (0, 1), got {s}")))
        }
    }

    #[inline]
    pub fn get(self) -> f64 {
        self.0
    }

    /// True outside `[0.05, 0.95]`, where results carry a degraded-accuracy flag.
    pub fn is_degraded(self) -> bool {
        !(Self::SUPPORTED_MIN..=Self::SUPPORTED_MAX).contains(&self.0)
    }
}

impl TryFrom<f64> for FracOrder {
    type Error = Error;
    fn try_from(s: f64) -> Result<Self> {
        FracOrder::new(s)
    }
}

impl From<FracOrder> for f64 {
    fn from(s: FracOrder) -> f64 {
        s.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Near-field radius as a multiple of the local node spacing.
    pub near_field_radius_factor: f64,
    /// Radius beyond which unbounded integrals are replaced by a tail model.
    pub truncation_radius: f64,
    /// Bisection budget of one adaptive evaluation.
    pub max_subdivisions: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        QuadConfig {
            rel_tol: 1e-4,
            abs_tol: 1e-8,
            near_field_radius_factor: 4.0,
            truncation_radius: 64.0,
            max_subdivisions: 2000,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Domain("rel_tol and abs_tol must be positive".into()));
        }
        if !(self.truncation_radius > 0.0) {
            return Err(Error::Domain("truncation_radius must be positive".into()));
        }
        if !(self.near_field_radius_factor > 0.0) {
            return Err(Error::Domain("near_field_radius_factor must be positive".into()));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::Domain("max_subdivisions must be at least 1".into()));
        }
        Ok(())
    }

    /// Same configuration with tolerances tightened by `factor`.
    pub fn tightened(&self, factor: f64) -> QuadConfig {
        QuadConfig { rel_tol: self.rel_tol / factor, abs_tol: self.abs_tol / factor, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvatureResult {
    /// Curvature, units of length^-s.
    pub value: f64,
    /// Quadrature error plus the near-field and tail model errors.
    pub error_estimate: f64,
    /// Fraction of the absolute contributions coming from the local model around `x`.
    pub near_field_share: f64,
    /// Contribution of the region beyond the truncation radius (zero for closed curves).
    pub tail_correction: f64,
    /// Set when `s` is outside the supported numerical range.
    pub degraded: bool,
}

/// Signed curvature of the circle through node `i` and its neighbours.
///
/// Positive where the enclosed set is locally convex, exactly zero for collinear triples.
pub fn classical_curvature(curve: &ClosedCurve, i: usize) -> f64 {
    three_point_curvature(curve.prev(i), curve.node(i), curve.next(i))
}

pub(crate) fn three_point_curvature(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    let cr = (b - a).cross(c - b);
    if cr == 0.0 {
        return 0.0;
    }
    2.0 * cr / ((b - a).norm() * (c - b).norm() * (c - a).norm())
}

/// Contribution of the osculating parabola `y = -k t^2 / 2` inside the disk of radius `r0`.
///
/// The leading term is `2k r0^{1-s} / (s(1-s))`; the remaining factor is integrated exactly.
/// Returns `(value, leading_term)`.
pub fn parabola_near_field(k: f64, r0: f64, s: f64) -> (f64, f64) {
    if k == 0.0 {
        return (0.0, 0.0);
    }
    // tangential half-width tau with tau^2 (1 + k^2 tau^2 / 4) = r0^2
    let q = 0.25 * k * k;
    let tau2 = if q * r0 * r0 < 1e-8 {
        r0 * r0 * (1.0 - q * r0 * r0)
    } else {
        (-1.0 + (1.0 + 4.0 * q * r0 * r0).sqrt()) / (2.0 * q)
    };
    let tau = tau2.sqrt();
    let leading = 2.0 * k * tau.powf(1.0 - s) / (s * (1.0 - s));
    // t = tau v^{1/(1-s)} turns t^{-s} dt into a constant density
    let p = 1.0 / (1.0 - s);
    let factor = gauss_legendre8(
        |v| {
            let t = tau * v.powf(p);
            (1.0 + q * t * t).powf(-1.0 - 0.5 * s)
        },
        0.0,
        1.0,
    );
    let full_leading = 2.0 * k * r0.powf(1.0 - s) / (s * (1.0 - s));
    (leading * factor, full_leading)
}

/// Evaluator over a family of disjoint fronts whose enclosed regions form the set `E`.
///
/// Hermite interpolants of all edges are built once and shared by every node evaluation.
pub struct SetEvaluator<'a> {
    fronts: &'a [ClosedCurve],
    edges: Vec<HermiteEdge>,
    offsets: Vec<usize>,
}

impl<'a> SetEvaluator<'a> {
    pub fn new(fronts: &'a [ClosedCurve]) -> Self {
        let mut edges = Vec::with_capacity(fronts.iter().map(ClosedCurve::len).sum());
        let mut offsets = Vec::with_capacity(fronts.len() + 1);
        for f in fronts {
            offsets.push(edges.len());
            edges.extend(f.hermite_edges());
        }
        offsets.push(edges.len());
        SetEvaluator { fronts, edges, offsets }
    }

    pub fn fronts(&self) -> &[ClosedCurve] {
        self.fronts
    }

    /// Curvature of the whole set at node `i` of front `f`.
    pub fn at(&self, f: usize, i: usize, s: FracOrder, cfg: &QuadConfig) -> Result<CurvatureResult> {
        let curve = self.fronts.get(f).ok_or_else(|| Error::Domain(format!("front index {f} out of range")))?;
        let n = curve.len();
        if i >= n {
            return Err(Error::Domain(format!("node index {i} out of range for {n} nodes")));
        }
        let sv = s.get();
        let x = curve.node(i);
        if curve.turning_angle(i) > PI / 6.0 {
            log::warn!("evaluating curvature at a corner (turning angle {:.3} rad) of front {f}, node {i}", curve.turning_angle(i));
        }
        let h = curve.local_spacing(i);
        let k = classical_curvature(curve, i);
        let mut r0 = cfg.near_field_radius_factor * h;
        if k != 0.0 {
            r0 = r0.min(0.25 / k.abs());
        }
        let base = self.offsets[f];
        let edges = &self.edges[base..base + n];

        // walk forward and backward along the front to the edges that leave the near-field disk
        let inside = |p: Vec2| p.dist(x) < r0;
        let mut fwd = None;
        for step in 0..n {
            let e = (i + step) % n;
            if inside(curve.node(e + 1)) {
                continue;
            }
            fwd = Some((step, e, radius_crossing(&edges[e], x, r0, true)));
            break;
        }
        let mut bwd = None;
        for step in 1..=n {
            let e = (i + n - step) % n;
            if inside(curve.node(e)) {
                continue;
            }
            bwd = Some((step, e, radius_crossing(&edges[e], x, r0, false)));
            break;
        }
        let (Some((fs, fe, fu)), Some((bs, be, bu))) = (fwd, bwd) else {
            return Err(Error::Geometry(format!(
                "front {f} lies entirely inside the near-field radius {r0:.3e} of node {i}"
            )));
        };
        let mut pieces: Vec<(usize, f64, f64)> = Vec::with_capacity(self.edges.len());
        if fe == be && fs + bs == n + 1 {
            if fu >= bu {
                return Err(Error::Geometry(format!("front {f} is under-resolved around node {i}")));
            }
            pieces.push((base + fe, fu, bu));
        } else {
            if fs + bs > n {
                return Err(Error::Geometry(format!("front {f} is under-resolved around node {i}")));
            }
            pieces.push((base + fe, fu, 1.0));
            let mut e = (fe + 1) % n;
            while e != be {
                pieces.push((base + e, 0.0, 1.0));
                e = (e + 1) % n;
            }
            pieces.push((base + be, 0.0, bu));
        }
        for (g, _) in self.fronts.iter().enumerate().filter(|&(g, _)| g != f) {
            pieces.extend((self.offsets[g]..self.offsets[g + 1]).map(|e| (e, 0.0, 1.0)));
        }

        let (near, _) = parabola_near_field(k, r0, sv);
        let near_err = near_model_error(curve, i, k, r0, h, sv);
        let pref = 2.0 / sv;
        let budget = cfg.abs_tol.max(cfg.rel_tol * near.abs()) / pref;
        let q = integrate_pieces(
            |e, u| {
                let (c, dc) = self.edges[e].eval(u);
                let d = c - x;
                d.cross(dc) * d.norm2().powf(-1.0 - 0.5 * sv)
            },
            &pieces,
            budget.max(cfg.abs_tol / pref),
            cfg.rel_tol,
            cfg.max_subdivisions,
        );
        finish(near, near_err, &q, 0.0, 0.0, pref, s)
    }

    /// Curvature at every node of every front, evaluated in parallel.
    pub fn all(&self, s: FracOrder, cfg: &QuadConfig) -> Vec<Vec<Result<CurvatureResult>>> {
        (0..self.fronts.len())
            .map(|f| (0..self.fronts[f].len()).into_par_iter().map(|i| self.at(f, i, s, cfg)).collect())
            .collect()
    }
}

fn finish(near: f64, near_err: f64, q: &QuadOutcome, tail: f64, tail_err: f64, pref: f64, s: FracOrder) -> Result<CurvatureResult> {
    let value = near + pref * q.value;
    let denom = near.abs() + pref * q.abs_value;
    let result = CurvatureResult {
        value,
        error_estimate: near_err + pref * q.error + tail_err,
        near_field_share: if denom > 0.0 { (near.abs() / denom).clamp(0.0, 1.0) } else { 0.0 },
        tail_correction: tail,
        degraded: s.is_degraded(),
    };
    if q.converged {
        Ok(result)
    } else {
        Err(Error::Accuracy { partial: Box::new(result) })
    }
}

/// Model error of the parabola: quartic deviation plus the second difference of curvature.
fn near_model_error(curve: &ClosedCurve, i: usize, k: f64, r0: f64, h: f64, s: f64) -> f64 {
    let n = curve.len();
    let kp = classical_curvature(curve, (i + 1) % n);
    let km = classical_curvature(curve, (i + n - 1) % n);
    let d2k = (kp - 2.0 * k + km).abs() * (r0 / h).powi(2);
    let scale = 2.0 * r0.powf(1.0 - s) / (s * (1.0 - s));
    scale * (0.125 * k.abs().powi(3) * r0 * r0 + d2k / 12.0)
}

/// Parameter on a Hermite edge where the distance to `x` crosses `r0`.
///
/// `from_start` means the start of the edge is inside the disk and the end outside.
fn radius_crossing(edge: &HermiteEdge, x: Vec2, r0: f64, from_start: bool) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let m = 0.5 * (lo + hi);
        let inside = edge.point(m).dist(x) < r0;
        if inside == from_start {
            lo = m;
        } else {
            hi = m;
        }
    }
    0.5 * (lo + hi)
}

/// Fractional mean curvature of the region enclosed by `curve` at `node_index`.
pub fn curve_curvature(curve: &ClosedCurve, node_index: usize, s: FracOrder, cfg: &QuadConfig) -> Result<CurvatureResult> {
    cfg.validate()?;
    SetEvaluator::new(std::slice::from_ref(curve)).at(0, node_index, s, cfg)
}

/// Boundary of a set as the graph of a function: value, first and second derivative at `t`.
pub type ProfileFn = std::sync::Arc<dyn Fn(f64) -> [f64; 3] + Send + Sync>;

/// Set `{(t, y) : lower(t) < y < upper(t)}`; a missing sheet stands for ±∞.
///
/// Half-planes, slabs and the arctan strips are all of this form.
#[derive(Clone)]
pub struct GraphRegion {
    pub upper: Option<ProfileFn>,
    pub lower: Option<ProfileFn>,
}

impl GraphRegion {
    pub fn half_plane() -> Self {
        GraphRegion { upper: Some(std::sync::Arc::new(|_| [0.0, 0.0, 0.0])), lower: None }
    }

    /// `{|y| < a}`
    pub fn slab(a: f64) -> Self {
        GraphRegion {
            upper: Some(std::sync::Arc::new(move |_| [a, 0.0, 0.0])),
            lower: Some(std::sync::Arc::new(move |_| [-a, 0.0, 0.0])),
        }
    }

    /// `{|y| < f(t)}` for an even profile `f`.
    pub fn symmetric(profile: ProfileFn) -> Self {
        let lower = profile.clone();
        GraphRegion {
            upper: Some(profile),
            lower: Some(std::sync::Arc::new(move |t| {
                let [f, d, dd] = lower(t);
                [-f, -d, -dd]
            })),
        }
    }
}

const UPPER: usize = 0;
const LOWER: usize = 3;
const DIRECT: usize = 0;
const RIGHT_TAIL: usize = 1;
const LEFT_TAIL: usize = 2;

/// Curvature of a [`GraphRegion`] at the upper-sheet point with abscissa `t0`.
///
/// Integrates the boundary form on both sheets. The part farther than `truncation_radius`
/// along the sheets is integrated after the substitution `u = 1/(t - t0)` and reported as
/// `tail_correction`.
pub fn graph_region_curvature(region: &GraphRegion, t0: f64, s: FracOrder, cfg: &QuadConfig) -> Result<CurvatureResult> {
    cfg.validate()?;
    let upper = region
        .upper
        .as_ref()
        .ok_or_else(|| Error::Geometry("graph region has no upper sheet to evaluate on".into()))?;
    let sv = s.get();
    let [f0, d0, dd0] = upper(t0);
    let x = Vec2::new(t0, f0);
    let gap = match &region.lower {
        Some(l) => {
            let g = f0 - l(t0)[0];
            if !(g > 0.0) {
                return Err(Error::Geometry(format!("sheets touch or cross at t = {t0}")));
            }
            g
        }
        None => 1.0,
    };
    let k = -dd0 / (1.0 + d0 * d0).powf(1.5);
    let mut r0 = cfg.near_field_radius_factor * 0.01 * gap.min(1.0);
    if k != 0.0 {
        r0 = r0.min(0.25 / k.abs());
    }
    let reach = cfg.truncation_radius.max(4.0 * r0);

    // sheet point and outward normal scaled by the speed of the parametrisation t -> (t, f(t))
    let sheet_eval = |sheet: usize, t: f64| -> (Vec2, Vec2) {
        if sheet == UPPER {
            let [f, d, _] = upper(t);
            (Vec2::new(t, f), Vec2::new(-d, 1.0))
        } else {
            let [g, d, _] = region.lower.as_ref().expect("lower sheet")(t);
            (Vec2::new(t, g), Vec2::new(d, -1.0))
        }
    };
    let kernel = |c: Vec2, nrm: Vec2| {
        let d = c - x;
        d.dot(nrm) * d.norm2().powf(-1.0 - 0.5 * sv)
    };
    let integrand = |piece: usize, v: f64| -> f64 {
        let sheet = if piece >= LOWER { LOWER } else { UPPER };
        match piece - sheet {
            DIRECT => {
                let (c, nrm) = sheet_eval(sheet, v);
                kernel(c, nrm)
            }
            RIGHT_TAIL => {
                let (c, nrm) = sheet_eval(sheet, t0 + 1.0 / v);
                kernel(c, nrm) / (v * v)
            }
            _ => {
                let (c, nrm) = sheet_eval(sheet, t0 - 1.0 / v);
                kernel(c, nrm) / (v * v)
            }
        }
    };

    // excise the near-field disk on the upper sheet
    let crossing = |dir: f64| {
        let (mut lo, mut hi) = (0.0, r0);
        while sheet_eval(UPPER, t0 + dir * hi).0.dist(x) < r0 {
            hi *= 2.0;
        }
        for _ in 0..60 {
            let m = 0.5 * (lo + hi);
            if sheet_eval(UPPER, t0 + dir * m).0.dist(x) < r0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        0.5 * (lo + hi)
    };
    let tau_r = crossing(1.0);
    let tau_l = crossing(-1.0);

    let mut core = Vec::new();
    push_geometric(&mut core, UPPER + DIRECT, t0 + tau_r, t0 + reach, tau_r, 1.0);
    push_geometric(&mut core, UPPER + DIRECT, t0 - reach, t0 - tau_l, tau_l, -1.0);
    let mut tails = vec![(UPPER + RIGHT_TAIL, 0.0, 1.0 / reach), (UPPER + LEFT_TAIL, 0.0, 1.0 / reach)];
    if region.lower.is_some() {
        let w = gap.min(reach);
        push_geometric(&mut core, LOWER + DIRECT, t0, t0 + reach, w * 0.25, 1.0);
        push_geometric(&mut core, LOWER + DIRECT, t0 - reach, t0, w * 0.25, -1.0);
        tails.push((LOWER + RIGHT_TAIL, 0.0, 1.0 / reach));
        tails.push((LOWER + LEFT_TAIL, 0.0, 1.0 / reach));
    }

    let (near, _) = parabola_near_field(k, r0, sv);
    let pref = 2.0 / sv;
    let q_core = integrate_pieces(integrand, &core, cfg.abs_tol / pref, cfg.rel_tol, cfg.max_subdivisions);
    let q_tail = integrate_pieces(integrand, &tails, cfg.abs_tol / pref, cfg.rel_tol, cfg.max_subdivisions);

    // fourth-order deviation of the sheet from its osculating parabola
    let dk = {
        let h = r0;
        let kk = |t: f64| {
            let [_, d, dd] = upper(t);
            -dd / (1.0 + d * d).powf(1.5)
        };
        (kk(t0 + h) - 2.0 * k + kk(t0 - h)).abs()
    };
    let near_err = 2.0 * r0.powf(1.0 - sv) / (sv * (1.0 - sv)) * (0.125 * k.abs().powi(3) * r0 * r0 + dk / 12.0);
    let merged = QuadOutcome {
        value: q_core.value + q_tail.value,
        error: q_core.error + q_tail.error,
        abs_value: q_core.abs_value + q_tail.abs_value,
        subdivisions: q_core.subdivisions + q_tail.subdivisions,
        converged: q_core.converged && q_tail.converged,
    };
    finish(near, near_err, &merged, pref * q_tail.value, 0.0, pref, s)
}

/// Splits `[a, b]` into panels growing geometrically away from the end closest to the
/// singular scale `w` (`dir > 0`: away from `a`).
fn push_geometric(out: &mut Vec<(usize, f64, f64)>, piece: usize, a: f64, b: f64, w: f64, dir: f64) {
    if !(b > a) {
        return;
    }
    let len = b - a;
    let mut cuts = vec![0.0];
    let mut d = w.max(len * 1e-12);
    while d < len {
        cuts.push(d);
        d *= 2.0;
    }
    cuts.push(len);
    for win in cuts.windows(2) {
        let (lo, hi) = if dir > 0.0 { (a + win[0], a + win[1]) } else { (b - win[1], b - win[0]) };
        out.push((piece, lo, hi));
    }
}

/// Direct region quadrature of the defining integral; slow, used as an independent oracle.
///
/// The plane around `x` is swept in rings of radius `ρ`. On each ring the half circle on the
/// outer side of the tangent line is paired with its reflection across that line, so that
/// for a half-plane the pair cancels exactly; what remains is the signed angular measure
/// `A(ρ) = ∫ (χ_{CE} - χ_E) dθ`, which is `O(ρ)` for C^{1,1} boundaries. The radial integral
/// `∫ ρ^{-1-s} A(ρ) dρ` is computed with `ρ = u^{1/(1-s)}` up to `truncation_radius`, and the
/// rest from the model `A(ρ) ≈ α + β/ρ` fitted at the truncation radius.
pub fn region_curvature_oracle<F>(inside: F, x: Vec2, normal_at_x: Vec2, s: FracOrder, cfg: &QuadConfig) -> Result<CurvatureResult>
where
    F: Fn(Vec2) -> bool + Sync,
{
    cfg.validate()?;
    let sv = s.get();
    let nu = normal_at_x.normalized();
    let tan = nu.rot_ccw();
    let eta = 1e-7 * (1.0 + x.norm());
    if inside(x + nu * eta) || !inside(x - nu * eta) {
        return Err(Error::Geometry(format!(
            "indicator is not split by the tangent line at {x:?}: outside on the normal side and inside opposite are required"
        )));
    }
    let chi = |p: Vec2| if inside(p) { -1.0 } else { 1.0 };
    let angular = |rho: f64| ring_imbalance(&chi, x, tan, nu, rho);

    let rt = cfg.truncation_radius;
    let p = 1.0 / (1.0 - sv);
    let radial = |u: f64| {
        let rho = u.powf(p);
        angular(rho) / (rho * (1.0 - sv))
    };
    // below rho_min the ring offset is lost to rounding of x + ρe; A(ρ) is linear there
    let rho_min = 1e-5 * (1.0 + x.norm());
    let mut pieces = Vec::new();
    let mut hi = rt;
    while hi > 2.0 * rho_min {
        let lo = 0.5 * hi;
        pieces.push((0, lo.powf(1.0 - sv), hi.powf(1.0 - sv)));
        hi = lo;
    }
    pieces.push((0, rho_min.powf(1.0 - sv), hi.powf(1.0 - sv)));
    let q = integrate_pieces(|_, u| radial(u), &pieces, cfg.abs_tol, cfg.rel_tol, cfg.max_subdivisions * 4);
    let slope = angular(rho_min) / rho_min;
    let slope2 = angular(2.0 * rho_min) / (2.0 * rho_min);
    let inner_scale = rho_min.powf(1.0 - sv) / (1.0 - sv);
    let inner = slope * inner_scale;
    let inner_err = (slope2 - slope).abs() * inner_scale;

    let a1 = angular(rt);
    let a2 = angular(0.5 * rt);
    let beta = (a2 - a1) * rt;
    let alpha = a1 - beta / rt;
    let beta_term = beta * rt.powf(-1.0 - sv) / (1.0 + sv);
    let tail = alpha * rt.powf(-sv) / sv + beta_term;

    let value = q.value + inner + tail;
    let result = CurvatureResult {
        value,
        error_estimate: q.error + inner_err + 0.1 * beta_term.abs(),
        near_field_share: 0.0,
        tail_correction: tail,
        degraded: s.is_degraded(),
    };
    if q.converged {
        Ok(result)
    } else {
        Err(Error::Accuracy { partial: Box::new(result) })
    }
}

/// `∫_0^π [χ(x + ρ e⁺(θ)) + χ(x + ρ e⁻(θ))] dθ` with `e^±(θ) = cos θ t ± sin θ ν`.
fn ring_imbalance<C: Fn(Vec2) -> f64>(chi: &C, x: Vec2, tan: Vec2, nu: Vec2, rho: f64) -> f64 {
    static GRID: OnceLock<Vec<f64>> = OnceLock::new();
    let grid = GRID.get_or_init(|| {
        let mut g = Vec::new();
        // clustered at both ends, where the boundary leaves the tangent line
        for k in 0..=90 {
            let th = 0.5 * PI * 2f64.powf(-(k as f64) / 2.0);
            g.push(th);
            g.push(PI - th);
        }
        for j in 1..256 {
            g.push(PI * j as f64 / 256.0);
        }
        g.sort_by(f64::total_cmp);
        g.dedup();
        g
    });
    let mut total = 0.0;
    for sign in [1.0, -1.0] {
        let at = |th: f64| chi(x + (tan * th.cos() + nu * (sign * th.sin())) * rho);
        let mut prev_th = grid[0];
        let mut prev_v = at(prev_th);
        // the first sample is extended down to θ = 0
        let mut acc = prev_v * prev_th;
        let mut left = prev_th;
        for &th in &grid[1..] {
            let v = at(th);
            if v != prev_v {
                let (mut lo, mut hi) = (prev_th, th);
                for _ in 0..64 {
                    let m = 0.5 * (lo + hi);
                    if m <= lo || m >= hi {
                        break;
                    }
                    if at(m) == prev_v {
                        lo = m;
                    } else {
                        hi = m;
                    }
                }
                let jump = 0.5 * (lo + hi);
                acc += prev_v * (jump - left);
                left = jump;
            }
            prev_th = th;
            prev_v = v;
        }
        acc += prev_v * (PI - left);
        total += acc;
    }
    total
}

/// Surface measure of the unit sphere `S^{m}` in `R^{m+1}`.
pub(crate) fn sphere_measure(m: usize) -> f64 {
    let d = (m + 1) as f64;
    2.0 * PI.powf(0.5 * d) / statrs::function::gamma::gamma(0.5 * d)
}

fn omega_cache() -> &'static Mutex<HashMap<(usize, u64), f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, u64), f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Node counts of the polygon sequence used to extrapolate the disk curvature.
const OMEGA_NODE_COUNTS: [usize; 3] = [256, 512, 1024];

/// Curvature `ω̄(n, s)` of the unit ball at any boundary point, cached per `(n, s)`.
///
/// * `n = 2`: boundary evaluator on inscribed regular polygons with 256, 512 and 1024 nodes,
///   followed by Richardson extrapolation with the observed order.
/// * `n ≥ 3`: on the unit sphere with `x = e_n`, `(y - x)·ν(y) = 1 - cos θ` and
///   `|y - x| = 2 sin(θ/2)`, so the boundary form collapses to one polar integral,
///   `ω̄ = (2/s) |S^{n-2}| 2^{-s} ∫_0^{π/2} sin^{-s} φ cos^{n-2} φ dφ`, computed with
///   `φ = w^{1/(1-s)}` to remove the endpoint singularity.
///
/// The cache is keyed on `(n, s)` only; the first configuration used for a key wins.
pub fn omega_bar(n: usize, s: FracOrder, cfg: &QuadConfig) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("dimension must be at least 2, got {n}")));
    }
    let key = (n, s.get().to_bits());
    if let Some(&v) = omega_cache().lock().expect("omega cache poisoned").get(&key) {
        return Ok(v);
    }
    let value = if n == 2 { omega_bar_planar(s, cfg)? } else { omega_bar_sphere(n, s, cfg)? };
    Ok(*omega_cache().lock().expect("omega cache poisoned").entry(key).or_insert(value))
}

fn omega_bar_planar(s: FracOrder, cfg: &QuadConfig) -> Result<f64> {
    let fine = cfg.tightened(100.0);
    let mut v = [0.0; 3];
    for (slot, &nodes) in v.iter_mut().zip(OMEGA_NODE_COUNTS.iter()) {
        let c = ClosedCurve::circle(Vec2::ZERO, 1.0, nodes)?;
        *slot = curve_curvature(&c, 0, s, &fine)?.value;
    }
    Ok(richardson(v))
}

/// Extrapolates a sequence computed at step sizes `h, h/2, h/4`.
pub(crate) fn richardson(v: [f64; 3]) -> f64 {
    let d1 = v[1] - v[0];
    let d2 = v[2] - v[1];
    if d2 == 0.0 || d1 == 0.0 || d1.signum() != d2.signum() {
        return v[2];
    }
    let order = (d1 / d2).log2();
    if !(0.5..=8.0).contains(&order) {
        return v[2];
    }
    v[2] + d2 / (2f64.powf(order) - 1.0)
}

fn omega_bar_sphere(n: usize, s: FracOrder, cfg: &QuadConfig) -> Result<f64> {
    let sv = s.get();
    let p = 1.0 / (1.0 - sv);
    let wmax = (0.5 * PI).powf(1.0 - sv);
    // φ = w^p, dφ = p w^{p-1} dw, sin^{-s}φ ≈ φ^{-s} = w^{-sp}: p w^{p-1-sp} = p is constant
    let q = integrate(
        |w| {
            let phi = w.powf(p);
            let ratio = if phi < 1e-8 { 1.0 - phi * phi / 6.0 } else { phi.sin() / phi };
            p * ratio.powf(-sv) * phi.cos().powi(n as i32 - 2)
        },
        0.0,
        wmax,
        cfg.abs_tol * 1e-3,
        cfg.rel_tol * 1e-3,
        cfg.max_subdivisions,
    );
    if !q.converged {
        return Err(Error::Accuracy {
            partial: Box::new(CurvatureResult {
                value: q.value,
                error_estimate: q.error,
                near_field_share: 0.0,
                tail_correction: 0.0,
                degraded: s.is_degraded(),
            }),
        });
    }
    Ok(2.0 / sv * sphere_measure(n - 2) * 2f64.powf(-sv) * q.value)
}

/// `H` of the ball of radius `R`: `ω̄(n, s) R^{-s}`.
pub fn ball_curvature(radius: f64, n: usize, s: FracOrder) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("ball radius must be positive, got {radius}")));
    }
    Ok(omega_bar(n, s, &QuadConfig::default())? * radius.powf(-s.get()))
}

/// `C(n, s) = ∫_{R^{n-1}} (1 + |w|^2)^{-(n+s)/2} dw = π^{(n-1)/2} Γ((1+s)/2) / Γ((n+s)/2)`.
pub fn slab_constant(n: usize, s: FracOrder) -> f64 {
    use statrs::function::gamma::gamma;
    let sv = s.get();
    let nf = n as f64;
    PI.powf(0.5 * (nf - 1.0)) * gamma(0.5 * (1.0 + sv)) / gamma(0.5 * (nf + sv))
}

/// `H` of the slab `{|x_n| < a}` at a boundary point: `2 C(n, s) (2a)^{-s} / s`.
///
/// Only the opposite face contributes to the boundary form; integrating it fibre by fibre
/// gives the constant `C(n, s)`.
pub fn slab_curvature(a: f64, n: usize, s: FracOrder) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("slab half-width must be positive, got {a}")));
    }
    if n < 2 {
        return Err(Error::Domain(format!("dimension must be at least 2, got {n}")));
    }
    let sv = s.get();
    Ok(2.0 * slab_constant(n, s) * (2.0 * a).powf(-sv) / sv)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: f64) -> FracOrder {
        FracOrder::new(v).unwrap()
    }

    /// `(2^{1-s}/s) B(1/2, (1-s)/2)`: the disk curvature from the boundary form in closed form.
    fn disk_beta_formula(sv: f64) -> f64 {
        use statrs::function::gamma::gamma;
        2f64.powf(1.0 - sv) / sv * PI.sqrt() * gamma(0.5 * (1.0 - sv)) / gamma(1.0 - 0.5 * sv)
    }

    #[test]
    fn frac_order_range() {
        assert!(FracOrder::new(0.0).is_err());
        assert!(FracOrder::new(1.0).is_err());
        assert!(FracOrder::new(1.5).is_err());
        assert!(FracOrder::new(0.02).unwrap().is_degraded());
        assert!(!FracOrder::new(0.5).unwrap().is_degraded());
    }

    #[test]
    fn classical_curvature_of_polygon_circle() {
        for n in [32usize, 128, 512] {
            let c = ClosedCurve::circle(Vec2::ZERO, 1.0, n).unwrap();
            let k = classical_curvature(&c, 3);
            assert!((k - 1.0).abs() < 1.0 / (n * n) as f64 * 10.0, "{n}: {k}");
            assert!((classical_curvature(&c.reversed(), 3) + k).abs() < 1e-12);
        }
    }

    #[test]
    fn collinear_triple_has_zero_curvature() {
        assert_eq!(three_point_curvature(Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(2.0, 2.0)), 0.0);
    }

    #[test]
    fn parabola_leading_term_dominates_small_radius() {
        let (v, lead) = parabola_near_field(1.0, 1e-3, 0.5);
        assert!((v / lead - 1.0).abs() < 1e-5);
        assert_eq!(parabola_near_field(0.0, 0.1, 0.5).0, 0.0);
    }

    #[test]
    fn disk_polygon_matches_closed_form() {
        let c = ClosedCurve::circle(Vec2::ZERO, 1.0, 512).unwrap();
        for sv in [0.3, 0.5, 0.7] {
            let r = curve_curvature(&c, 0, s(sv), &QuadConfig::default()).unwrap();
            let exact = disk_beta_formula(sv);
            assert!((r.value / exact - 1.0).abs() < 1e-3, "s={sv}: {} vs {exact}", r.value);
            assert!(r.near_field_share > 0.0 && r.near_field_share < 1.0);
        }
    }

    #[test]
    fn reversed_orientation_negates() {
        let c = ClosedCurve::ellipse(Vec2::ZERO, 1.5, 1.0, 256).unwrap();
        let cfg = QuadConfig::default();
        let a = curve_curvature(&c, 10, s(0.4), &cfg).unwrap();
        let rev = c.reversed();
        let b = curve_curvature(&rev, 255 - 10, s(0.4), &cfg).unwrap();
        assert!((a.value + b.value).abs() <= 2.0 * (a.error_estimate + b.error_estimate), "{} {}", a.value, b.value);
    }

    #[test]
    fn half_plane_is_zero() {
        let r = graph_region_curvature(&GraphRegion::half_plane(), 0.3, s(0.5), &QuadConfig::default()).unwrap();
        assert!(r.value.abs() < 1e-8);
        let o = region_curvature_oracle(|p| p.y < 0.0, Vec2::ZERO, Vec2::new(0.0, 1.0), s(0.5), &QuadConfig::default()).unwrap();
        assert!(o.value.abs() < 1e-8, "{}", o.value);
    }

    #[test]
    fn slab_boundary_form_matches_closed_form() {
        let cfg = QuadConfig::default().tightened(10.0);
        for a in [0.05, 0.1, 0.2] {
            let r = graph_region_curvature(&GraphRegion::slab(a), 0.0, s(0.5), &cfg).unwrap();
            let exact = slab_curvature(a, 2, s(0.5)).unwrap();
            assert!((r.value / exact - 1.0).abs() < 1e-5, "a={a}: {} vs {exact}", r.value);
            assert!(r.tail_correction > 0.0);
        }
    }

    #[test]
    fn slab_constant_by_quadrature() {
        for sv in [0.2, 0.5, 0.8] {
            let q = integrate(|th: f64| th.cos().powf(sv), -0.5 * PI, 0.5 * PI, 1e-13, 1e-13, 500);
            assert!((q.value - slab_constant(2, s(sv))).abs() < 1e-9);
        }
        // n = 3: 2π ∫ r (1 + r^2)^{-(3+s)/2} dr = 2π / (1 + s)
        let c3 = slab_constant(3, s(0.5));
        assert!((c3 - 2.0 * PI / 1.5).abs() < 1e-12);
    }

    #[test]
    fn slab_scaling_and_domain() {
        let a = slab_curvature(0.3, 2, s(0.5)).unwrap();
        let b = slab_curvature(0.6, 2, s(0.5)).unwrap();
        assert!((b / a - 2f64.powf(-0.5)).abs() < 1e-14);
        assert!(slab_curvature(0.0, 2, s(0.5)).is_err());
        assert!(slab_curvature(1e9, 2, s(0.5)).unwrap() < 1e-3);
    }

    #[test]
    fn omega_bar_sphere_matches_beta_form() {
        use statrs::function::beta::beta;
        for n in [2usize, 3, 4] {
            for sv in [0.3, 0.5, 0.7] {
                let v = omega_bar_sphere(n, s(sv), &QuadConfig::default()).unwrap();
                let exact = 2.0 / sv * sphere_measure(n - 2) * 2f64.powf(-sv) * 0.5 * beta(0.5 * (1.0 - sv), 0.5 * (n as f64 - 1.0));
                assert!((v / exact - 1.0).abs() < 1e-8, "n={n} s={sv}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn omega_bar_rejects_dimension_one() {
        assert!(matches!(omega_bar(1, s(0.5), &QuadConfig::default()), Err(Error::Domain(_))));
    }

    #[test]
    fn ball_curvature_domain() {
        assert!(ball_curvature(0.0, 2, s(0.5)).is_err());
        assert!(ball_curvature(-1.0, 2, s(0.5)).is_err());
    }

    #[test]
    fn richardson_recovers_limit() {
        let f = |h: f64| 3.0 + 0.7 * h * h;
        let v = richardson([f(0.1), f(0.05), f(0.025)]);
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn oracle_rejects_inconsistent_indicator() {
        let r = region_curvature_oracle(|_| true, Vec2::ZERO, Vec2::new(0.0, 1.0), s(0.5), &QuadConfig::default());
        assert!(matches!(r, Err(Error::Geometry(_))));
    }
}
