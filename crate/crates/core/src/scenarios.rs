//! Packaged experiments: the shrinking circle and the dumbbell neckpinch.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::barriers::{
    ball_extinction_time, ball_radius_at, choose_neckpinch_params, strip_pinch_time, strip_profile, BallSpec, NeckpinchParams,
    StripSpec,
};
use crate::curvature::{omega_bar, FracOrder};
use crate::error::{Error, Result};
use crate::flow::{inclusion_check, run_flow, vertical_section, EventKind, FlowConfig, FlowEvent, FlowState, Refinement, StopCondition, Trajectory};
use crate::geom::{mirror_offset, ClosedCurve, Mirror, Vec2};

/// The dumbbell neck follows the strip profile with waist `NECK_SHRINK · ε₀`.
pub const NECK_SHRINK: f64 = 0.8;
/// Node refinement in the neck relative to the target spacing.
pub const NECK_REFINEMENT: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Reproduced,
    NotReproduced,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeseriesRow {
    pub time: f64,
    pub min_neck_width: Option<f64>,
    pub lobe_inradius_left: Option<f64>,
    pub lobe_inradius_right: Option<f64>,
    pub total_area: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub parameters: BTreeMap<String, Value>,
    pub timeseries: Vec<TimeseriesRow>,
    pub events: Vec<FlowEvent>,
    pub checks: Vec<Check>,
    pub verdict: Verdict,
    pub reasons: Vec<String>,
}

impl ScenarioReport {
    fn conclude(name: &str, parameters: BTreeMap<String, Value>, timeseries: Vec<TimeseriesRow>, events: Vec<FlowEvent>, checks: Vec<Check>) -> Self {
        let truncated = events.iter().any(|e| e.kind == EventKind::Truncation);
        let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| format!("{}: {}", c.name, c.detail)).collect();
        let (verdict, reasons) = if !failed.is_empty() {
            (Verdict::NotReproduced, failed)
        } else if truncated {
            (Verdict::Inconclusive, vec!["run stopped at max_steps".to_string()])
        } else {
            (Verdict::Reproduced, checks.iter().map(|c| format!("{}: {}", c.name, c.detail)).collect())
        };
        ScenarioReport { name: name.to_string(), parameters, timeseries, events, checks, verdict, reasons }
    }

    pub fn write_timeseries_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(TIMESERIES_COLUMNS).map_err(io)?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.timeseries {
            w.write_record([r.time.to_string(), opt(r.min_neck_width), opt(r.lobe_inradius_left), opt(r.lobe_inradius_right), r.total_area.to_string()])
                .map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Column order of the scenario timeseries CSV.
pub const TIMESERIES_COLUMNS: [&str; 5] = ["time", "min_neck_width", "lobe_inradius_left", "lobe_inradius_right", "total_area"];

fn check(name: &str, passed: bool, detail: String) -> Check {
    Check { name: name.to_string(), passed, detail }
}

/// Flows an `N`-gon circle, `N = 2πR0 / target_spacing`, and compares with the exact law.
pub fn scenario_shrinking_circle(r0: f64, s: FracOrder, cfg: &FlowConfig) -> Result<ScenarioReport> {
    let ball = BallSpec::planar(r0)?;
    cfg.validate()?;
    let n = ((2.0 * PI * r0 / cfg.target_spacing).round() as usize).max(crate::geom::MIN_NODES);
    let circle = ClosedCurve::circle(Vec2::ZERO, r0, n)?;
    let t_exact = ball_extinction_time(&ball, s)?;
    let traj = run_flow(&[circle], s, cfg, &StopCondition::until(2.0 * t_exact))?;

    let mut worst = 0.0f64;
    let mut worst_time = 0.0;
    let mut timeseries = Vec::new();
    for snap in &traj.snapshots {
        timeseries.push(TimeseriesRow {
            time: snap.time,
            min_neck_width: None,
            lobe_inradius_left: None,
            lobe_inradius_right: None,
            total_area: snap.total_area(),
        });
        let exact = ball_radius_at(&ball, snap.time, s)?;
        if exact < 0.2 * r0 || snap.fronts.is_empty() {
            continue;
        }
        for p in snap.fronts.iter().flat_map(|f| f.nodes()) {
            let dev = (p.norm() / exact - 1.0).abs();
            if dev > worst {
                worst = dev;
                worst_time = snap.time;
            }
        }
    }
    let extinction = traj.events.iter().find(|e| e.kind == EventKind::Extinction).map(|e| e.time);
    let mut checks = vec![check(
        "radius_trajectory",
        worst <= 0.02,
        format!("worst node radius deviation {:.3}% at t = {worst_time:.5} (limit 2% while R >= 0.2 R0)", 100.0 * worst),
    )];
    checks.push(match extinction {
        Some(t) => {
            let rel = (t / t_exact - 1.0).abs();
            check("extinction_time", rel <= 0.03, format!("simulated {t:.6} vs exact {t_exact:.6}, deviation {:.3}% (limit 3%)", 100.0 * rel))
        }
        None => check("extinction_time", false, format!("no extinction before t = {:.6}", 2.0 * t_exact)),
    });
    let mut parameters = BTreeMap::new();
    parameters.insert("R0".into(), json!(r0));
    parameters.insert("s".into(), json!(s.get()));
    parameters.insert("nodes".into(), json!(n));
    parameters.insert("target_spacing".into(), json!(cfg.target_spacing));
    parameters.insert("omega_bar".into(), json!(omega_bar(2, s, &cfg.quad)?));
    parameters.insert("extinction_time_exact".into(), json!(t_exact));
    parameters.insert("extinction_time_simulated".into(), json!(extinction));
    parameters.insert("worst_radius_deviation".into(), json!(worst));
    Ok(ScenarioReport::conclude("shrinking-circle", parameters, timeseries, traj.events, checks))
}

/// Neck refinement band: where the neck is at most three waist half-widths tall, plus a ramp
/// of the same width.
pub fn neck_refinement(params: &NeckpinchParams) -> Refinement {
    let waist = NECK_SHRINK * params.epsilon0;
    let half_width = ((PI * waist).tan() / params.delta).sqrt();
    Refinement { half_width, ramp: half_width, factor: NECK_REFINEMENT }
}

/// Flow configuration for the neckpinch: spacing `σ ε₀` with the neck refined.
pub fn neckpinch_flow_config(params: &NeckpinchParams, base: &FlowConfig) -> FlowConfig {
    FlowConfig { target_spacing: NECK_SHRINK * params.epsilon0, refinement: Some(neck_refinement(params)), ..base.clone() }
}

/// Closed dumbbell curve inside the strip `E_{ε₀}`, mirror-symmetric in both axes.
///
/// The upper boundary is `g(x) = σε₀ + (2/π) arctan(δ x²)` out to the point `x_j` where the
/// circle centred at `(L, 0)` is tangent to it; that circle, of radius
/// `g(x_j) sqrt(1 + g'(x_j)²)`, closes the end. The node density follows the spacing of
/// [`neckpinch_flow_config`] for `target_spacing`.
pub fn build_dumbbell(params: &NeckpinchParams, target_spacing: f64) -> Result<ClosedCurve> {
    params.check()?;
    if !(target_spacing > 0.0) {
        return Err(Error::Domain(format!("target_spacing must be positive, got {target_spacing}")));
    }
    let neck = StripSpec::new(NECK_SHRINK * params.epsilon0, params.delta)?;
    let l = params.lobe_offset;
    let centre_of = |x: f64| {
        let [g, d, _] = neck.profile_derivatives(x);
        x + g * d
    };
    let (mut lo, mut hi) = (0.0, l);
    if !(centre_of(hi) > l) {
        return Err(Error::Infeasible("no end circle centred at (L, 0) is tangent to the neck profile".into()));
    }
    for _ in 0..200 {
        let m = 0.5 * (lo + hi);
        if centre_of(m) < l {
            lo = m;
        } else {
            hi = m;
        }
    }
    let xj = 0.5 * (lo + hi);
    let [gj, dj, _] = neck.profile_derivatives(xj);
    let rho = gj * (1.0 + dj * dj).sqrt();
    if rho < params.lobe_radius + params.containment_margin * 0.5 {
        return Err(Error::Infeasible(format!(
            "end circle radius {rho} does not contain the lobe ball of radius {} with margin",
            params.lobe_radius
        )));
    }
    let theta_j = gj.atan2(xj - l);

    let flow_cfg = FlowConfig { refinement: Some(neck_refinement(params)), ..FlowConfig::with_spacing(target_spacing) };
    // dense parametrisation of the upper-right quarter, from (0, g(0)) to (L + rho, 0)
    const DENSE: usize = 20_000;
    let point = |k: usize| -> Vec2 {
        if k <= DENSE {
            let x = xj * k as f64 / DENSE as f64;
            Vec2::new(x, strip_profile(&neck, x))
        } else {
            let th = theta_j * (1.0 - (k - DENSE) as f64 / DENSE as f64);
            Vec2::new(l + rho * th.cos(), rho * th.sin())
        }
    };
    let eval = |u: f64| -> Vec2 {
        if u <= DENSE as f64 {
            let x = xj * u / DENSE as f64;
            Vec2::new(x, strip_profile(&neck, x))
        } else {
            let th = theta_j * (1.0 - (u - DENSE as f64) / DENSE as f64);
            Vec2::new(l + rho * th.cos(), rho * th.sin())
        }
    };
    let mut cum = vec![0.0];
    for k in 0..2 * DENSE {
        let (a, b) = (point(k), point(k + 1));
        cum.push(cum[k] + a.dist(b) / flow_cfg.local_spacing((a + b) * 0.5));
    }
    let total = cum[2 * DENSE];
    let m = (total.round() as usize).max(2);
    let mut quarter = Vec::with_capacity(m + 1);
    quarter.push(Vec2::new(0.0, neck.epsilon));
    let mut k = 0;
    for q in 1..m {
        let target = total * q as f64 / m as f64;
        while cum[k + 1] < target {
            k += 1;
        }
        let frac = (target - cum[k]) / (cum[k + 1] - cum[k]);
        quarter.push(eval(k as f64 + frac));
    }
    quarter.push(Vec2::new(l + rho, 0.0));

    let mut half = quarter.clone();
    half.extend(quarter[..m].iter().rev().map(|&p| Mirror::AcrossX.apply(p)));
    let len = half.len();
    let mut nodes = half.clone();
    nodes.extend(half[1..len - 1].iter().rev().map(|&p| Mirror::AcrossY.apply(p)));
    nodes.reverse();
    let curve = ClosedCurve::new(nodes)?;

    let strip = params.strip();
    if let Some(p) = curve.nodes().iter().find(|p| p.y.abs() >= strip_profile(&strip, p.x)) {
        return Err(Error::Infeasible(format!("dumbbell node {p:?} is not inside the strip E_eps0")));
    }
    for c in [Vec2::new(-l, 0.0), Vec2::new(l, 0.0)] {
        if !curve.contains(c) || curve.distance_to(c) <= params.lobe_radius {
            return Err(Error::Infeasible(format!("dumbbell does not contain the lobe ball at {c:?}")));
        }
    }
    Ok(curve)
}

/// Polygon approximating the strip boundary over `|x| <= half_length`, closed by vertical ends.
pub fn strip_polygon(strip: &StripSpec, half_length: f64, n_per_side: usize) -> Result<ClosedCurve> {
    let xs: Vec<f64> = (0..=n_per_side).map(|k| -half_length + 2.0 * half_length * k as f64 / n_per_side as f64).collect();
    let mut nodes: Vec<Vec2> = xs.iter().map(|&x| Vec2::new(x, -strip_profile(strip, x))).collect();
    nodes.extend(xs.iter().rev().map(|&x| Vec2::new(x, strip_profile(strip, x))));
    ClosedCurve::new(nodes)
}

/// Part of a polygon with `x <= 0` (`left`) or `x >= 0`, by Sutherland-Hodgman clipping.
fn clip_half(nodes: &[Vec2], left: bool) -> Vec<Vec2> {
    let keep = |p: Vec2| if left { p.x <= 0.0 } else { p.x >= 0.0 };
    let mut out = Vec::new();
    for i in 0..nodes.len() {
        let a = nodes[i];
        let b = nodes[(i + 1) % nodes.len()];
        if keep(a) {
            out.push(a);
        }
        if keep(a) != keep(b) {
            let t = a.x / (a.x - b.x);
            out.push(Vec2::new(0.0, a.y + t * (b.y - a.y)));
        }
    }
    out
}

fn polygon_centroid(nodes: &[Vec2]) -> Option<Vec2> {
    let n = nodes.len();
    if n < 3 {
        return None;
    }
    let (mut a, mut c) = (0.0, Vec2::ZERO);
    for i in 0..n {
        let (p, q) = (nodes[i], nodes[(i + 1) % n]);
        let w = p.cross(q);
        a += w;
        c = c + (p + q) * w;
    }
    (a.abs() > 0.0).then(|| c * (1.0 / (3.0 * a)))
}

/// Largest circle centred at the lobe centroid `(L(t), 0)` that fits inside the set.
fn lobe_inradius(fronts: &[ClosedCurve], left: bool) -> Option<f64> {
    let mut best: Option<f64> = None;
    for f in fronts {
        let part = clip_half(f.nodes(), left);
        let Some(c) = polygon_centroid(&part) else { continue };
        let c = Vec2::new(c.x, 0.0);
        if f.contains(c) {
            let r = f.distance_to(c);
            best = Some(best.map_or(r, |b: f64| b.max(r)));
        }
    }
    best
}

/// Smallest vertical section of the set over the nodes in the refined neck band.
fn min_neck_width(fronts: &[ClosedCurve], band: f64) -> f64 {
    let mut xs: Vec<f64> = fronts.iter().flat_map(|f| f.nodes()).map(|p| p.x).filter(|x| x.abs() <= band).collect();
    xs.push(0.0);
    xs.iter().map(|&x| vertical_section(fronts, x)).fold(f64::INFINITY, f64::min)
}

fn neck_row(snap: &FlowState, band: f64) -> TimeseriesRow {
    TimeseriesRow {
        time: snap.time,
        min_neck_width: Some(min_neck_width(&snap.fronts, band)),
        lobe_inradius_left: lobe_inradius(&snap.fronts, true),
        lobe_inradius_right: lobe_inradius(&snap.fronts, false),
        total_area: snap.total_area(),
    }
}

/// Builds the dumbbell, flows it through the pinch and checks that it splits into two
/// mirror-image fronts that still contain the shrinking lobe balls.
///
/// The spacing of `cfg` is replaced by the one of [`neckpinch_flow_config`]. After the first
/// pinch the flow continues for a quarter of the pre-pinch time to catch further pinches.
pub fn scenario_neckpinch(s: FracOrder, cfg: &FlowConfig) -> Result<ScenarioReport> {
    let params = choose_neckpinch_params(2, s, &cfg.quad)?;
    let flow_cfg = FlowConfig { snapshot_stride: 1, ..neckpinch_flow_config(&params, cfg) };
    let curve = build_dumbbell(&params, flow_cfg.target_spacing)?;
    let t_bound = strip_pinch_time(params.epsilon0, params.kappa_speed)?;
    let t_ball = ball_extinction_time(&params.lobe_ball(), s)?;
    let band = neck_refinement(&params).half_width;

    let first = run_flow(std::slice::from_ref(&curve), s, &flow_cfg, &StopCondition { max_time: t_ball, on_all_extinct: true, on_first_pinch: true })?;
    let mut events = first.events.clone();
    let mut timeseries: Vec<TimeseriesRow> = first.snapshots.iter().map(|sn| neck_row(sn, band)).collect();
    let pinches: Vec<&FlowEvent> = first.events.iter().filter(|e| e.kind == EventKind::Pinch).collect();
    let at_pinch = first.snapshots.last().cloned();

    let mut checks = Vec::new();
    let mut parameters = BTreeMap::new();
    parameters.insert("neckpinch_params".into(), serde_json::to_value(params)?);
    parameters.insert("neck_shrink".into(), json!(NECK_SHRINK));
    parameters.insert("target_spacing".into(), json!(flow_cfg.target_spacing));
    parameters.insert("refinement".into(), serde_json::to_value(neck_refinement(&params))?);
    parameters.insert("initial_nodes".into(), json!(curve.len()));
    parameters.insert("strip_pinch_time".into(), json!(t_bound));
    parameters.insert("lobe_ball_extinction_time".into(), json!(t_ball));
    parameters.insert("initial_neck_width".into(), json!(vertical_section(std::slice::from_ref(&curve), 0.0)));

    let Some(pinch) = pinches.first() else {
        checks.push(check("single_pinch", false, format!("no pinch before the lobe ball extinction time {t_ball:.6}")));
        return Ok(ScenarioReport::conclude("neckpinch", parameters, timeseries, events, checks));
    };
    let t_pinch = pinch.time;
    let state = at_pinch.expect("a snapshot is recorded at the pinch");
    parameters.insert("pinch_time".into(), json!(t_pinch));

    // continue past the pinch to see whether anything else pinches
    let window = 0.25 * t_pinch;
    let mut later_pinches = 0;
    if !state.fronts.is_empty() {
        let tail_cfg = FlowConfig { snapshot_stride: 10, ..flow_cfg.clone() };
        let after = run_flow(&state.fronts, s, &tail_cfg, &StopCondition::until(window))?;
        later_pinches = after.events.iter().filter(|e| e.kind == EventKind::Pinch).count();
        for mut e in after.events {
            e.time += t_pinch;
            events.push(e);
        }
        timeseries.extend(after.snapshots.iter().skip(1).map(|sn| {
            let mut row = neck_row(sn, band);
            row.time += t_pinch;
            row
        }));
    }

    let in_neck = pinch.location.x.abs() <= band;
    checks.push(check(
        "single_pinch",
        pinches.len() == 1 && later_pinches == 0 && in_neck,
        format!(
            "{} pinch(es) before and {later_pinches} within {window:.3e} after the first; first at {:?} (neck band |x| <= {band:.4})",
            pinches.len(),
            pinch.location
        ),
    ));
    checks.push(check(
        "pinch_time",
        t_pinch <= t_bound && t_bound <= 0.5 * t_ball,
        format!("t_pinch = {t_pinch:.6e} <= 2 eps0 / kappa = {t_bound:.6e} <= T_ball / 2 = {:.6e}", 0.5 * t_ball),
    ));

    let radius = ball_radius_at(&params.lobe_ball(), t_pinch, s)?;
    let mut enclosed = Vec::new();
    for sign in [-1.0, 1.0] {
        let ball = ClosedCurve::circle(Vec2::new(sign * params.lobe_offset, 0.0), radius.max(1e-9), 256)?;
        enclosed.push(state.fronts.iter().any(|f| inclusion_check(&ball, f, 0.0)));
    }
    checks.push(check(
        "lobes_survive",
        state.fronts.len() == 2 && enclosed.iter().all(|&b| b) && radius > 0.0,
        format!("{} fronts at t_pinch; balls of radius {radius:.5} at (±L, 0) enclosed: {enclosed:?}", state.fronts.len()),
    ));
    let area = state.total_area();
    let threshold = 2.0 * flow_cfg.extinction_area();
    checks.push(check("area_at_pinch", area >= threshold, format!("total area {area:.5} vs twice the extinction area {threshold:.3e}")));
    let mirrored = state.fronts.len() == 2 && mirror_offset(state.fronts[0].nodes(), state.fronts[1].nodes(), Mirror::AcrossY, 0.0).is_some();
    checks.push(check("mirror_images", mirrored, format!("post-split fronts exact mirror images across the y-axis: {mirrored}")));

    let widths: Vec<f64> = first.snapshots.iter().filter(|sn| sn.fronts.len() == 1).map(|sn| min_neck_width(&sn.fronts, band)).collect();
    let tail = widths.len().min(5);
    let decreasing = widths.len() >= 2 && widths[widths.len() - tail..].windows(2).all(|w| w[1] < w[0]);
    checks.push(check(
        "neck_width_decreasing",
        decreasing,
        format!("last {tail} neck widths before the pinch strictly decreasing: {decreasing}"),
    ));

    let mut report = ScenarioReport::conclude("neckpinch", parameters, timeseries, events, checks);
    if report.verdict == Verdict::Reproduced && report.events.iter().any(|e| e.kind == EventKind::AccuracyFailure) {
        report.reasons.push("quadrature retries occurred during the run".into());
    }
    Ok(report)
}

/// Pinch and extinction events as (kind, time) pairs, for compact summaries.
pub fn event_times(traj: &Trajectory) -> Vec<(EventKind, f64)> {
    traj.events.iter().map(|e| (e.kind, e.time)).collect()
}
