//! Front tracking for the fractional mean curvature flow `∂_t x·ν = -H^s` of plane curves.
//!
//! Each step evaluates the curvature of the whole set at every node, moves nodes along their
//! normals with explicit Euler, restores any mirror symmetry of the input exactly, resamples by
//! arclength, and then looks for pinches and extinct fronts.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::curvature::{FracOrder, QuadConfig, SetEvaluator};
use crate::error::{Error, Result};
use crate::geom::{mirror_offset, segments_intersect, ClosedCurve, HermiteEdge, Mirror, Vec2, MIN_NODES};
use crate::quadrature::gauss_legendre8;

/// Finer node spacing in the band `|x| <= half_width`, blending back over `ramp`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Refinement {
    pub half_width: f64,
    pub ramp: f64,
    pub factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowConfig {
    pub cfl: f64,
    pub target_spacing: f64,
    /// Pinch threshold in multiples of the local target spacing.
    pub pinch_factor: f64,
    pub max_steps: usize,
    pub quad: QuadConfig,
    pub refinement: Option<Refinement>,
    /// Record every `snapshot_stride`-th step.
    pub snapshot_stride: usize,
    /// Times at which a snapshot is forced; steps are shortened to land on them.
    pub checkpoints: Vec<f64>,
    /// Retries of a step after a quadrature failure, each with half the time step.
    pub max_retries: usize,
    /// Multiple of `h^{1+s} / λ(π)` allowed per step, `λ` being the growth rate of a normal
    /// perturbation of a straight front at unit wavenumber scaled to the grid; Euler is
    /// stable below 2.
    pub stability_factor: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            cfl: 0.1,
            target_spacing: 2.0 * std::f64::consts::PI / 512.0,
            pinch_factor: 3.0,
            max_steps: 100_000,
            quad: QuadConfig::default(),
            refinement: None,
            snapshot_stride: 10,
            checkpoints: Vec::new(),
            max_retries: 5,
            stability_factor: 1.0,
        }
    }
}

impl FlowConfig {
    pub fn with_spacing(target_spacing: f64) -> Self {
        FlowConfig { target_spacing, ..FlowConfig::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl < 1.0) {
            return Err(Error::Domain(format!("cfl must lie in (0, 1), got {}", self.cfl)));
        }
        if !(self.target_spacing > 0.0 && self.target_spacing.is_finite()) {
            return Err(Error::Domain(format!("target_spacing must be positive, got {}", self.target_spacing)));
        }
        if !(self.pinch_factor >= 2.0) {
            return Err(Error::Domain(format!("pinch_factor must be at least 2, got {}", self.pinch_factor)));
        }
        if !(self.stability_factor > 0.0 && self.stability_factor < 2.0) {
            return Err(Error::Domain(format!("stability_factor must lie in (0, 2), got {}", self.stability_factor)));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Domain("snapshot_stride must be at least 1".into()));
        }
        if let Some(r) = &self.refinement {
            if !(r.half_width >= 0.0 && r.ramp >= 0.0 && r.factor >= 1.0) {
                return Err(Error::Domain("refinement needs half_width >= 0, ramp >= 0 and factor >= 1".into()));
            }
        }
        self.quad.validate()
    }

    /// Target spacing at `p`.
    pub fn local_spacing(&self, p: Vec2) -> f64 {
        let h = self.target_spacing;
        let Some(r) = &self.refinement else { return h };
        let fine = h / r.factor;
        let ax = p.x.abs();
        if ax <= r.half_width {
            fine
        } else if ax >= r.half_width + r.ramp {
            h
        } else {
            fine + (h - fine) * (ax - r.half_width) / r.ramp
        }
    }

    /// Fronts enclosing less than `(4 h)^2` are considered extinct.
    pub fn extinction_area(&self) -> f64 {
        (4.0 * self.target_spacing).powi(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub time: f64,
    pub fronts: Vec<ClosedCurve>,
    pub target_spacing: f64,
    pub step_count: usize,
    pub last_dt: f64,
    /// Curvature at every node of every front; empty when not evaluated.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub curvature: Vec<Vec<f64>>,
}

impl FlowState {
    pub fn new(fronts: Vec<ClosedCurve>, target_spacing: f64) -> Self {
        FlowState { time: 0.0, fronts, target_spacing, step_count: 0, last_dt: 0.0, curvature: Vec::new() }
    }

    pub fn total_area(&self) -> f64 {
        self.fronts.iter().map(ClosedCurve::area).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Pinch,
    Split,
    Extinction,
    AccuracyFailure,
    /// The run hit `max_steps` before any stop condition.
    Truncation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowEvent {
    pub kind: EventKind,
    pub time: f64,
    pub location: Vec2,
    pub details: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopCondition {
    pub max_time: f64,
    pub on_all_extinct: bool,
    pub on_first_pinch: bool,
}

impl StopCondition {
    pub fn until(max_time: f64) -> Self {
        StopCondition { max_time, on_all_extinct: true, on_first_pinch: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub snapshots: Vec<FlowState>,
    pub events: Vec<FlowEvent>,
}

/// Result of one accepted step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: FlowState,
    pub events: Vec<FlowEvent>,
    /// Curvature at the nodes of the input state.
    pub curvature: Vec<Vec<f64>>,
}

/// Mirror symmetries found in a set of fronts.
#[derive(Debug, Clone, Default)]
struct Symmetry {
    /// Per front: mirrors mapping it onto itself, with index offset.
    own: Vec<Vec<(Mirror, usize)>>,
    /// `(a, b, mirror, offset)`: front `b` is the image of front `a`.
    pairs: Vec<(usize, usize, Mirror, usize)>,
}

impl Symmetry {
    fn detect(fronts: &[ClosedCurve]) -> Self {
        let own = fronts
            .iter()
            .map(|f| {
                let tol = symmetry_tol(f.nodes());
                Mirror::ALL.iter().filter_map(|&m| f.self_mirror_offset(m, tol).map(|c| (m, c))).collect()
            })
            .collect();
        let mut pairs = Vec::new();
        let mut taken = vec![false; fronts.len()];
        for a in 0..fronts.len() {
            if taken[a] {
                continue;
            }
            for b in (a + 1)..fronts.len() {
                if taken[b] || fronts[a].len() != fronts[b].len() {
                    continue;
                }
                let tol = symmetry_tol(fronts[a].nodes()).max(symmetry_tol(fronts[b].nodes()));
                if let Some((m, c)) = Mirror::ALL
                    .iter()
                    .find_map(|&m| mirror_offset(fronts[a].nodes(), fronts[b].nodes(), m, tol).map(|c| (m, c)))
                {
                    pairs.push((a, b, m, c));
                    taken[b] = true;
                    break;
                }
            }
        }
        Symmetry { own, pairs }
    }

    fn secondary(&self, f: usize) -> Option<(usize, Mirror)> {
        self.pairs.iter().find(|p| p.1 == f).map(|p| (p.0, p.2))
    }

    /// Averages mirror partners so that every detected symmetry holds bit for bit.
    fn enforce(&self, nodes: &mut [Vec<Vec2>]) {
        for (f, mirrors) in self.own.iter().enumerate() {
            let n = nodes[f].len();
            for &(m, c) in mirrors {
                for i in 0..n {
                    let j = (c + n - i) % n;
                    if j < i {
                        continue;
                    }
                    let avg = (nodes[f][i] + m.apply(nodes[f][j])) * 0.5;
                    nodes[f][i] = avg;
                    nodes[f][j] = m.apply(avg);
                }
            }
        }
        for &(a, b, m, c) in &self.pairs {
            let n = nodes[a].len();
            for i in 0..n {
                let j = (c + n - i) % n;
                let avg = (nodes[a][i] + m.apply(nodes[b][j])) * 0.5;
                nodes[a][i] = avg;
                nodes[b][j] = m.apply(avg);
            }
        }
    }
}

fn symmetry_tol(nodes: &[Vec2]) -> f64 {
    let scale = nodes.iter().fold(0.0f64, |s, p| s.max(p.x.abs()).max(p.y.abs()));
    1e-9 * scale.max(1e-300)
}

/// Curvature at every node; quadrature failures are retried with doubled subdivision budgets.
///
/// Returns the values and the time-step reduction factor accumulated by the retries.
fn evaluate_all(
    fronts: &[ClosedCurve],
    s: FracOrder,
    cfg: &FlowConfig,
    time: f64,
    events: &mut Vec<FlowEvent>,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let eval = SetEvaluator::new(fronts);
    let mut quad = cfg.quad;
    let mut dt_scale = 1.0;
    for attempt in 0..=cfg.max_retries {
        let results = eval.all(s, &quad);
        let mut failure = None;
        let mut values = Vec::with_capacity(results.len());
        for (f, front) in results.into_iter().enumerate() {
            let mut row = Vec::with_capacity(front.len());
            for (i, r) in front.into_iter().enumerate() {
                match r {
                    Ok(c) => row.push(c.value),
                    Err(Error::Accuracy { partial }) => {
                        failure.get_or_insert((f, i, partial));
                        row.push(f64::NAN);
                    }
                    Err(e) => return Err(e),
                }
            }
            values.push(row);
        }
        let Some((f, i, partial)) = failure else { return Ok((values, dt_scale)) };
        events.push(FlowEvent {
            kind: EventKind::AccuracyFailure,
            time,
            location: fronts[f].node(i),
            details: format!(
                "front {f} node {i}: quadrature did not converge (value {:.6e}, error {:.3e}); attempt {} of {}",
                partial.value,
                partial.error_estimate,
                attempt + 1,
                cfg.max_retries + 1
            ),
        });
        if attempt == cfg.max_retries {
            return Err(Error::Accuracy { partial });
        }
        quad.max_subdivisions *= 2;
        dt_scale *= 0.5;
    }
    unreachable!("retry loop always returns")
}

/// Decay rate of the mode `cos(k t)` on a straight front is `λ k^{1+s}` with
/// `λ = 4 Γ(1-s) sin(πs/2) / (s (1+s))`.
pub fn perturbation_symbol(s: FracOrder) -> f64 {
    let sv = s.get();
    4.0 * statrs::function::gamma::gamma(1.0 - sv) * (0.5 * std::f64::consts::PI * sv).sin() / (sv * (1.0 + sv))
}

/// Step limited by `cfl · h_loc / |H|` and by the explicit Euler bound for the grid-scale mode.
fn stable_dt(fronts: &[ClosedCurve], curvature: &[Vec<f64>], s: FracOrder, cfg: &FlowConfig) -> f64 {
    let lambda = perturbation_symbol(s) * std::f64::consts::PI.powf(1.0 + s.get());
    let mut dt = f64::INFINITY;
    for (front, hs) in fronts.iter().zip(curvature) {
        for (i, (p, &h)) in front.nodes().iter().zip(hs).enumerate() {
            let target = cfg.local_spacing(*p);
            if h != 0.0 {
                dt = dt.min(cfg.cfl * target / h.abs());
            }
            let actual = front.local_spacing(i).min(target);
            dt = dt.min(cfg.stability_factor * actual.powf(1.0 + s.get()) / lambda);
        }
    }
    if dt.is_finite() {
        dt
    } else {
        cfg.cfl * cfg.target_spacing
    }
}

/// Moves, symmetrises and resamples with a given step; `None` when the result is not simple.
fn advance(fronts: &[ClosedCurve], curvature: &[Vec<f64>], dt: f64, cfg: &FlowConfig) -> Result<Option<Vec<ClosedCurve>>> {
    let sym = Symmetry::detect(fronts);
    let mut moved: Vec<Vec<Vec2>> = fronts
        .iter()
        .zip(curvature)
        .map(|(front, hs)| (0..front.len()).map(|i| front.node(i) - front.normal(i) * (dt * hs[i])).collect())
        .collect();
    sym.enforce(&mut moved);
    let moved: Vec<ClosedCurve> = moved.into_iter().map(ClosedCurve::new_unchecked).collect();
    let mut out: Vec<Option<ClosedCurve>> = vec![None; moved.len()];
    for f in 0..moved.len() {
        if sym.secondary(f).is_some() {
            continue;
        }
        let mirrors: Vec<Mirror> = sym.own[f].iter().map(|&(m, _)| m).collect();
        out[f] = Some(resample_with(&moved[f], cfg, &mirrors)?);
    }
    for &(a, b, m, _) in &sym.pairs {
        out[b] = out[a].as_ref().map(|c| c.mirrored(m));
    }
    let out: Vec<ClosedCurve> = out.into_iter().map(|c| c.expect("every front resampled")).collect();
    if out.iter().any(|c| !c.is_simple()) || fronts_cross(&out) {
        return Ok(None);
    }
    Ok(Some(out))
}

fn fronts_cross(fronts: &[ClosedCurve]) -> bool {
    for a in 0..fronts.len() {
        for b in (a + 1)..fronts.len() {
            let (fa, fb) = (&fronts[a], &fronts[b]);
            for i in 0..fa.len() {
                for j in 0..fb.len() {
                    if segments_intersect(fa.node(i), fa.next(i), fb.node(j), fb.next(j)) {
                        return true;
                    }
                }
            }
        }
    }
    false
}

/// One explicit Euler step of every front, followed by pinch handling and extinction.
pub fn flow_step(state: &FlowState, s: FracOrder, cfg: &FlowConfig) -> Result<StepOutcome> {
    step_capped(state, s, cfg, f64::INFINITY)
}

fn step_capped(state: &FlowState, s: FracOrder, cfg: &FlowConfig, dt_cap: f64) -> Result<StepOutcome> {
    cfg.validate()?;
    let mut events = Vec::new();
    let (curvature, dt_scale) = evaluate_all(&state.fronts, s, cfg, state.time, &mut events)?;
    let next = step_from(state, &curvature, dt_scale, s, cfg, dt_cap, &mut events)?;
    Ok(StepOutcome { state: next, events, curvature })
}

fn step_from(
    state: &FlowState,
    curvature: &[Vec<f64>],
    dt_scale: f64,
    s: FracOrder,
    cfg: &FlowConfig,
    dt_cap: f64,
    events: &mut Vec<FlowEvent>,
) -> Result<FlowState> {
    let mut dt = (stable_dt(&state.fronts, curvature, s, cfg) * dt_scale).min(dt_cap);
    let mut fronts = None;
    for _ in 0..=cfg.max_retries {
        if let Some(f) = advance(&state.fronts, curvature, dt, cfg)? {
            fronts = Some(f);
            break;
        }
        dt *= 0.5;
    }
    let Some(fronts) = fronts else {
        return Err(Error::Geometry(format!("step at t = {} keeps producing self-intersecting fronts", state.time)));
    };
    let time = state.time + dt;
    let mut next = Vec::with_capacity(fronts.len() + 1);
    let sym = Symmetry::detect(&fronts);
    let mut produced: Vec<Vec<ClosedCurve>> = Vec::with_capacity(fronts.len());
    for (f, front) in fronts.iter().enumerate() {
        if let Some((a, m)) = sym.secondary(f) {
            // mirror image of an earlier front: reuse its outcome
            let (ev, parts): (Vec<FlowEvent>, Vec<ClosedCurve>) = (
                Vec::new(),
                produced[a].iter().map(|c| c.mirrored(m)).collect(),
            );
            let mirrored_events: Vec<FlowEvent> = events_for_mirror(events, a, f, m);
            events.extend(ev);
            events.extend(mirrored_events);
            produced.push(parts);
            continue;
        }
        let (ev, parts) = split_front(front, f, time, cfg)?;
        events.extend(ev);
        produced.push(parts);
    }
    for parts in produced {
        for c in parts {
            if c.area() < cfg.extinction_area() {
                events.push(FlowEvent {
                    kind: EventKind::Extinction,
                    time,
                    location: c.centroid(),
                    details: format!("area {:.4e} below threshold {:.4e}", c.area(), cfg.extinction_area()),
                });
            } else {
                next.push(c);
            }
        }
    }
    Ok(FlowState { time, fronts: next, target_spacing: cfg.target_spacing, step_count: state.step_count + 1, last_dt: dt, curvature: Vec::new() })
}

/// Mirrors the pinch/split events recorded for front `a` onto its image front `b`.
fn events_for_mirror(events: &[FlowEvent], a: usize, b: usize, m: Mirror) -> Vec<FlowEvent> {
    let tag = format!("front {a}:");
    events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::Pinch | EventKind::Split) && e.details.starts_with(&tag))
        .map(|e| FlowEvent {
            kind: e.kind,
            time: e.time,
            location: m.apply(e.location),
            details: e.details.replacen(&tag, &format!("front {b}:"), 1),
        })
        .collect()
}

/// Detects a pinch in one front and splits it; fragments that cannot be resolved go extinct.
fn split_front(front: &ClosedCurve, id: usize, time: f64, cfg: &FlowConfig) -> Result<(Vec<FlowEvent>, Vec<ClosedCurve>)> {
    let Some((i, j)) = closest_pinch_pair(front, cfg) else { return Ok((Vec::new(), vec![front.clone()])) };
    let n = front.len();
    let (pi, pj) = (front.node(i), front.node(j));
    let mid = (pi + pj) * 0.5;
    let mut events = vec![FlowEvent {
        kind: EventKind::Pinch,
        time,
        location: mid,
        details: format!("front {id}: nodes {i} and {j} at distance {:.4e}", pi.dist(pj)),
    }];
    let first: Vec<Vec2> = ((i + 1)..j).map(|k| front.node(k)).collect();
    let second: Vec<Vec2> = ((j + 1)..n).chain(0..i).map(|k| front.node(k)).collect();
    let mut parts = Vec::new();
    let mirror_pair = Mirror::ALL.iter().copied().find(|&m| {
        first.len() == second.len() && mirror_offset(&first, &second, m, symmetry_tol(front.nodes())).is_some()
    });
    let fragments: Vec<(Vec<Vec2>, Option<Mirror>)> = match mirror_pair {
        Some(m) => vec![(first, Some(m))],
        None => vec![(first, None), (second, None)],
    };
    let mut kept = Vec::new();
    for (nodes, mirror) in fragments {
        let copies = if mirror.is_some() { 2 } else { 1 };
        if nodes.len() < MIN_NODES {
            for _ in 0..copies {
                events.push(extinct_fragment(&nodes, time, "fewer than 8 nodes after the cut"));
            }
            continue;
        }
        let raw = ClosedCurve::new_unchecked(nodes.clone());
        let mirrors: Vec<Mirror> =
            Mirror::ALL.iter().copied().filter(|&m| raw.self_mirror_offset(m, symmetry_tol(&nodes)).is_some()).collect();
        let resampled = {
            let mut moved = vec![nodes.clone()];
            let own = vec![mirrors.iter().filter_map(|&m| raw.self_mirror_offset(m, symmetry_tol(&nodes)).map(|c| (m, c))).collect()];
            Symmetry { own, pairs: Vec::new() }.enforce(&mut moved);
            resample_with(&ClosedCurve::new_unchecked(moved.pop().expect("one front")), cfg, &mirrors)
        };
        match resampled {
            Ok(c) => {
                if let Some(m) = mirror {
                    let image = c.mirrored(m);
                    kept.push(c);
                    kept.push(image);
                } else {
                    kept.push(c);
                }
            }
            Err(Error::TooSmall { .. }) => {
                for _ in 0..copies {
                    events.push(extinct_fragment(&nodes, time, "fragment shorter than four spacings"));
                }
            }
            Err(e) => return Err(e),
        }
    }
    parts.extend(kept);
    events.push(FlowEvent {
        kind: EventKind::Split,
        time,
        location: mid,
        details: format!("front {id}: split into {} fronts", parts.len()),
    });
    Ok((events, parts))
}

fn extinct_fragment(nodes: &[Vec2], time: f64, why: &str) -> FlowEvent {
    let c = nodes.iter().fold(Vec2::ZERO, |a, &p| a + p) * (1.0 / nodes.len().max(1) as f64);
    FlowEvent { kind: EventKind::Extinction, time, location: c, details: why.to_string() }
}

/// Closest pair of nodes that are far apart along the curve yet nearer than the pinch threshold.
///
/// Pairs whose cut would leave a piece below the extinction area are skipped: they are the
/// sides of a thin tip, not a neck.
fn closest_pinch_pair(front: &ClosedCurve, cfg: &FlowConfig) -> Option<(usize, usize)> {
    let n = front.len();
    let k = cfg.pinch_factor.ceil() as usize;
    let mut arc = Vec::with_capacity(n + 1);
    let mut cross = Vec::with_capacity(n + 1);
    arc.push(0.0);
    cross.push(0.0);
    for (i, l) in front.edge_lengths().enumerate() {
        arc.push(arc[i] + l);
        cross.push(cross[i] + front.node(i).cross(front.next(i)));
    }
    let perimeter = arc[n];
    let min_area = cfg.extinction_area();
    let mut best: Option<(f64, usize, usize)> = None;
    for i in 0..n {
        let pi = front.node(i);
        for j in (i + k + 1)..n {
            if n - (j - i) <= k {
                continue;
            }
            let pj = front.node(j);
            let d = pi.dist(pj);
            let threshold = cfg.pinch_factor * cfg.local_spacing((pi + pj) * 0.5);
            if d >= threshold {
                continue;
            }
            let along = (arc[j] - arc[i]).min(perimeter - (arc[j] - arc[i]));
            if along <= 2.0 * threshold {
                continue;
            }
            let piece = 0.5 * (cross[j] - cross[i] + pj.cross(pi));
            let rest = 0.5 * cross[n] - piece;
            if piece.abs() < min_area || rest.abs() < min_area {
                continue;
            }
            let ratio = d / threshold;
            if best.is_none_or(|(r, _, _)| ratio < r) {
                best = Some((ratio, i, j));
            }
        }
    }
    best.map(|(_, i, j)| (i, j))
}

/// Pinch detection and splitting of a single front, as used after every step.
pub fn detect_pinch_and_split(curve: &ClosedCurve, cfg: &FlowConfig) -> Result<(Vec<FlowEvent>, Vec<ClosedCurve>)> {
    cfg.validate()?;
    split_front(curve, 0, 0.0, cfg)
}

/// Redistributes nodes along the curve with density `1 / local_spacing`.
///
/// Exact mirror symmetries of the node set are kept: only a fundamental arc between mirror
/// axes is resampled and the rest is reflected.
pub fn resample(curve: &ClosedCurve, cfg: &FlowConfig) -> Result<ClosedCurve> {
    let mirrors: Vec<Mirror> = Mirror::ALL.iter().copied().filter(|&m| curve.is_exactly_mirror_symmetric(m)).collect();
    resample_with(curve, cfg, &mirrors)
}

/// Resampling at a uniform spacing `h`.
pub fn resample_uniform(curve: &ClosedCurve, h: f64) -> Result<ClosedCurve> {
    resample(curve, &FlowConfig::with_spacing(h))
}

fn resample_with(curve: &ClosedCurve, cfg: &FlowConfig, mirrors: &[Mirror]) -> Result<ClosedCurve> {
    let n = curve.len() as f64;
    let edges = curve.hermite_edges();
    let tol = symmetry_tol(curve.nodes());
    let offsets: Vec<(Mirror, f64)> = mirrors
        .iter()
        .filter_map(|&m| curve.self_mirror_offset(m, tol).map(|c| (m, c as f64)))
        .collect();
    let sampler = ArcSampler { edges: &edges, cfg };
    let nodes = match offsets.as_slice() {
        [] => {
            let (pts, _) = sampler.sample(0.0, n, 1, MIN_NODES)?;
            let mut pts = pts;
            pts.pop();
            pts
        }
        [(m, c)] => {
            let start = 0.5 * c;
            let (mut arc, _) = sampler.sample(start, start + 0.5 * n, 2, MIN_NODES / 2)?;
            let last = arc.len() - 1;
            arc[0] = m.snap(arc[0]);
            arc[last] = m.snap(arc[last]);
            let mut nodes = arc.clone();
            nodes.extend(arc[1..last].iter().rev().map(|&p| m.apply(p)));
            nodes
        }
        [(a, ca), (b, cb), ..] => {
            let start = 0.5 * ca;
            // first fixed point of b after start
            let mut end = 0.5 * cb;
            while end <= start {
                end += 0.5 * n;
            }
            while end > start + 0.5 * n {
                end -= 0.5 * n;
            }
            if ((end - start) - 0.25 * n).abs() > 1e-9 * n {
                return resample_with(curve, cfg, &[*a]);
            }
            let (mut quarter, _) = sampler.sample(start, end, 4, MIN_NODES / 4)?;
            let m = quarter.len() - 1;
            quarter[0] = a.snap(quarter[0]);
            quarter[m] = b.snap(quarter[m]);
            let mut half = quarter.clone();
            half.extend(quarter[..m].iter().rev().map(|&p| b.apply(p)));
            let len = half.len();
            let mut nodes = half.clone();
            nodes.extend(half[1..len - 1].iter().rev().map(|&p| a.apply(p)));
            nodes
        }
    };
    let out = ClosedCurve::new_unchecked(nodes);
    out.validate()?;
    Ok(out)
}

struct ArcSampler<'a> {
    edges: &'a [HermiteEdge],
    cfg: &'a FlowConfig,
}

impl ArcSampler<'_> {
    const SUB: usize = 4;

    /// Points at equal increments of `∫ ds / h_loc` on the parameter range `[t0, t1]` of the
    /// Hermite curve, endpoints included. `copies` is how many images of the arc make up the
    /// whole curve; `min_intervals` bounds the count from below.
    fn sample(&self, t0: f64, t1: f64, copies: usize, min_intervals: usize) -> Result<(Vec<Vec2>, f64)> {
        let n = self.edges.len();
        let at = |t: f64| -> (usize, f64) {
            let f = t.floor();
            ((f as i64).rem_euclid(n as i64) as usize, t - f)
        };
        // breakpoints of the parameter range: integers strictly inside plus the ends
        let mut cuts = vec![t0];
        let mut k = t0.floor() + 1.0;
        while k < t1 {
            cuts.push(k);
            k += 1.0;
        }
        cuts.push(t1);
        let mut segs: Vec<(usize, f64, f64, f64, f64)> = Vec::new();
        for w in cuts.windows(2) {
            let (e, u0) = at(w[0]);
            let u1 = u0 + (w[1] - w[0]);
            let edge = &self.edges[e];
            for q in 0..Self::SUB {
                let a = u0 + (u1 - u0) * q as f64 / Self::SUB as f64;
                let b = u0 + (u1 - u0) * (q + 1) as f64 / Self::SUB as f64;
                let dl = gauss_legendre8(|u| edge.derivative(u).norm(), a, b);
                let dw = gauss_legendre8(|u| edge.derivative(u).norm() / self.cfg.local_spacing(edge.point(u)), a, b);
                segs.push((e, a, b, dl, dw));
            }
        }
        let total_w: f64 = segs.iter().map(|s| s.4).sum();
        let total_l: f64 = segs.iter().map(|s| s.3).sum();
        if total_w * copies as f64 <= 4.0 {
            return Err(Error::TooSmall { length: total_l * copies as f64, spacing: total_l / total_w.max(1e-300) });
        }
        let m = (total_w.round() as usize).max(min_intervals);
        let mut pts = Vec::with_capacity(m + 1);
        let (e0, u0) = at(t0);
        pts.push(self.edges[e0].point(u0));
        let mut acc = 0.0;
        let mut idx = 0;
        for k in 1..m {
            let target = total_w * k as f64 / m as f64;
            while idx + 1 < segs.len() && acc + segs[idx].4 < target {
                acc += segs[idx].4;
                idx += 1;
            }
            let (e, a, b, _, dw) = segs[idx];
            let frac = if dw > 0.0 { ((target - acc) / dw).clamp(0.0, 1.0) } else { 0.5 };
            pts.push(self.edges[e].point(a + frac * (b - a)));
        }
        let last = segs.last().expect("non-empty arc");
        pts.push(self.edges[last.0].point(last.2));
        Ok((pts, total_l))
    }
}

/// True iff every node of `inner` lies inside `outer` or within `tol` of it.
pub fn inclusion_check(inner: &ClosedCurve, outer: &ClosedCurve, tol: f64) -> bool {
    inner.nodes().iter().all(|&p| outer.contains(p) || outer.distance_to(p) <= tol)
}

/// Runs the flow until a stop condition holds.
pub fn run_flow(initial: &[ClosedCurve], s: FracOrder, cfg: &FlowConfig, stop: &StopCondition) -> Result<Trajectory> {
    cfg.validate()?;
    if !(stop.max_time >= 0.0) {
        return Err(Error::Domain(format!("max_time must be nonnegative, got {}", stop.max_time)));
    }
    if initial.is_empty() {
        return Ok(Trajectory { snapshots: Vec::new(), events: Vec::new() });
    }
    for c in initial {
        c.validate()?;
    }
    if fronts_cross(initial) {
        return Err(Error::Geometry("initial fronts intersect each other".into()));
    }
    let mut checkpoints: Vec<f64> = cfg.checkpoints.iter().copied().filter(|&t| t > 0.0 && t < stop.max_time).collect();
    checkpoints.sort_by(f64::total_cmp);
    checkpoints.dedup();
    let mut next_checkpoint = 0;

    let mut state = FlowState::new(initial.to_vec(), cfg.target_spacing);
    let mut snapshots = Vec::new();
    let mut events = Vec::new();
    loop {
        if state.fronts.is_empty() {
            snapshots.push(state);
            break;
        }
        let (curvature, dt_scale) = evaluate_all(&state.fronts, s, cfg, state.time, &mut events)?;
        let at_checkpoint = next_checkpoint > 0 && checkpoints.get(next_checkpoint - 1) == Some(&state.time);
        let done = state.time >= stop.max_time;
        if state.step_count.is_multiple_of(cfg.snapshot_stride) || at_checkpoint || done {
            snapshots.push(FlowState { curvature: curvature.clone(), ..state.clone() });
        }
        if done {
            break;
        }
        if state.step_count >= cfg.max_steps {
            events.push(FlowEvent {
                kind: EventKind::Truncation,
                time: state.time,
                location: Vec2::ZERO,
                details: format!("stopped after max_steps = {}", cfg.max_steps),
            });
            if snapshots.last().map(|s| s.step_count) != Some(state.step_count) {
                snapshots.push(FlowState { curvature, ..state });
            }
            break;
        }
        let mut cap = stop.max_time - state.time;
        if let Some(&t) = checkpoints.get(next_checkpoint) {
            cap = cap.min(t - state.time);
        }
        let mut step_events = Vec::new();
        let mut next = step_from(&state, &curvature, dt_scale, s, cfg, cap, &mut step_events)?;
        if let Some(&t) = checkpoints.get(next_checkpoint) {
            if next.last_dt >= t - state.time {
                next.time = t;
                next_checkpoint += 1;
            }
        }
        if next.last_dt >= stop.max_time - state.time {
            next.time = stop.max_time;
        }
        let pinched = step_events.iter().any(|e| e.kind == EventKind::Pinch);
        events.extend(step_events);
        state = next;
        if pinched && stop.on_first_pinch {
            if state.fronts.is_empty() {
                snapshots.push(state);
            } else {
                let (curvature, _) = evaluate_all(&state.fronts, s, cfg, state.time, &mut events)?;
                snapshots.push(FlowState { curvature, ..state });
            }
            break;
        }
        if state.fronts.is_empty() && stop.on_all_extinct {
            snapshots.push(state);
            break;
        }
    }
    Ok(Trajectory { snapshots, events })
}

/// Total length of `{y : (x, y) ∈ E}` where `E` is the union of the enclosed regions.
pub fn vertical_section(fronts: &[ClosedCurve], x: f64) -> f64 {
    let mut ys = Vec::new();
    for f in fronts {
        for i in 0..f.len() {
            let (a, b) = (f.node(i), f.next(i));
            if (a.x > x) != (b.x > x) {
                ys.push(a.y + (x - a.x) / (b.x - a.x) * (b.y - a.y));
            }
        }
    }
    ys.sort_by(f64::total_cmp);
    ys.chunks(2).map(|c| if c.len() == 2 { c[1] - c[0] } else { 0.0 }).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSummary {
    pub time: f64,
    pub step: usize,
    pub front_count: usize,
    pub areas: Vec<f64>,
    pub total_area: f64,
    /// Width of the set along the y-axis.
    pub neck_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub snapshots: Vec<SnapshotSummary>,
    pub events: Vec<FlowEvent>,
}

pub fn summarize(traj: &Trajectory) -> TrajectorySummary {
    TrajectorySummary {
        snapshots: traj
            .snapshots
            .iter()
            .map(|s| SnapshotSummary {
                time: s.time,
                step: s.step_count,
                front_count: s.fronts.len(),
                areas: s.fronts.iter().map(ClosedCurve::area).collect(),
                total_area: s.total_area(),
                neck_width: vertical_section(&s.fronts, 0.0),
            })
            .collect(),
        events: traj.events.clone(),
    }
}

/// Column order of the trajectory CSV.
pub const CSV_COLUMNS: [&str; 6] = ["time", "front_id", "node_index", "x", "y", "H_s"];

pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
    w.write_record(CSV_COLUMNS).map_err(io)?;
    for snap in &traj.snapshots {
        for (f, front) in snap.fronts.iter().enumerate() {
            for (i, p) in front.nodes().iter().enumerate() {
                let h = snap.curvature.get(f).and_then(|r| r.get(i)).copied().unwrap_or(f64::NAN);
                w.write_record([snap.time.to_string(), f.to_string(), i.to_string(), p.x.to_string(), p.y.to_string(), h.to_string()])
                    .map_err(io)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: f64) -> FracOrder {
        FracOrder::new(v).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(FlowConfig::default().validate().is_ok());
        assert!(FlowConfig { cfl: 1.0, ..FlowConfig::default() }.validate().is_err());
        assert!(FlowConfig { pinch_factor: 1.5, ..FlowConfig::default() }.validate().is_err());
        assert!(FlowConfig { target_spacing: 0.0, ..FlowConfig::default() }.validate().is_err());
    }

    #[test]
    fn refinement_profile() {
        let cfg = FlowConfig {
            target_spacing: 0.1,
            refinement: Some(Refinement { half_width: 1.0, ramp: 1.0, factor: 4.0 }),
            ..FlowConfig::default()
        };
        assert_eq!(cfg.local_spacing(Vec2::new(0.5, 3.0)), 0.025);
        assert_eq!(cfg.local_spacing(Vec2::new(-2.5, 0.0)), 0.1);
        assert!((cfg.local_spacing(Vec2::new(1.5, 0.0)) - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn uniform_circle_is_a_fixed_point_of_resampling() {
        let c = ClosedCurve::circle(Vec2::ZERO, 1.0, 128).unwrap();
        let h = c.perimeter() / 128.0;
        let r = resample_uniform(&c, h).unwrap();
        assert_eq!(r.len(), 128);
        let mut worst: f64 = 0.0;
        for p in r.nodes() {
            let d = c.nodes().iter().map(|q| q.dist(*p)).fold(f64::INFINITY, f64::min);
            worst = worst.max(d);
        }
        assert!(worst < h / 10.0, "{worst}");
    }

    #[test]
    fn stretched_edge_is_subdivided() {
        let mut nodes: Vec<Vec2> = (0..40).map(|i| Vec2::new(i as f64 * 0.1, 0.0)).collect();
        nodes.push(Vec2::new(3.9, 0.3));
        nodes.extend((0..40).rev().map(|i| Vec2::new(i as f64 * 0.1, 0.6)));
        nodes.push(Vec2::new(0.0, 0.3));
        let c = ClosedCurve::new(nodes.into_iter().rev().collect()).unwrap();
        let r = resample_uniform(&c, 0.1).unwrap();
        for l in r.edge_lengths() {
            assert!((0.05..=0.2).contains(&l), "{l}");
        }
    }

    #[test]
    fn resampling_keeps_area_and_symmetry() {
        let c = ClosedCurve::circle(Vec2::ZERO, 1.0, 512).unwrap();
        let r = resample_uniform(&c, 2.0 * std::f64::consts::PI / 480.0).unwrap();
        assert!((r.area() / c.area() - 1.0).abs() < 1e-3);
        let mut sym = vec![c.nodes().to_vec()];
        Symmetry::detect(std::slice::from_ref(&c)).enforce(&mut sym);
        let exact = ClosedCurve::new(sym.pop().unwrap()).unwrap();
        assert!(exact.is_exactly_mirror_symmetric(Mirror::AcrossX));
        assert!(exact.is_exactly_mirror_symmetric(Mirror::AcrossY));
        let r = resample_uniform(&exact, 0.0137).unwrap();
        assert!(r.is_exactly_mirror_symmetric(Mirror::AcrossX));
        assert!(r.is_exactly_mirror_symmetric(Mirror::AcrossY));
    }

    #[test]
    fn too_small_curve() {
        let c = ClosedCurve::circle(Vec2::ZERO, 0.01, 16).unwrap();
        assert!(matches!(resample_uniform(&c, 0.1), Err(Error::TooSmall { .. })));
    }

    #[test]
    fn circle_has_no_pinch() {
        let c = ClosedCurve::circle(Vec2::ZERO, 1.0, 200).unwrap();
        let cfg = FlowConfig::with_spacing(c.perimeter() / 200.0);
        let (events, fronts) = detect_pinch_and_split(&c, &cfg).unwrap();
        assert!(events.is_empty());
        assert_eq!(fronts.len(), 1);
    }

    #[test]
    fn inclusion_of_circles() {
        let a = ClosedCurve::circle(Vec2::ZERO, 1.0, 64).unwrap();
        let b = ClosedCurve::circle(Vec2::ZERO, 2.0, 64).unwrap();
        assert!(inclusion_check(&a, &b, 0.0));
        assert!(!inclusion_check(&b, &a, 0.0));
    }

    #[test]
    fn empty_run() {
        let t = run_flow(&[], s(0.5), &FlowConfig::default(), &StopCondition::until(1.0)).unwrap();
        assert!(t.snapshots.is_empty() && t.events.is_empty());
    }

    #[test]
    fn vertical_section_of_circle() {
        let c = ClosedCurve::circle(Vec2::ZERO, 1.0, 1000).unwrap();
        assert!((vertical_section(&[c], 0.0) - 2.0).abs() < 1e-4);
    }

    #[test]
    fn one_step_moves_circle_uniformly() {
        let c = ClosedCurve::circle(Vec2::ZERO, 1.0, 256).unwrap();
        let cfg = FlowConfig::with_spacing(c.perimeter() / 256.0);
        let out = flow_step(&FlowState::new(vec![c], cfg.target_spacing), s(0.5), &cfg).unwrap();
        let f = &out.state.fronts[0];
        let radii: Vec<f64> = f.nodes().iter().map(|p| p.norm()).collect();
        let (lo, hi) = radii.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        assert!(hi - lo < 1e-6, "{lo} {hi}");
        let w = crate::curvature::omega_bar(2, s(0.5), &QuadConfig::default()).unwrap();
        assert!(((1.0 - hi) / out.state.last_dt / w - 1.0).abs() < 5e-3);
    }
}
