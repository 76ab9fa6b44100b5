use std::path::PathBuf;

use fmcf_core::barriers::{ball_extinction_time, ball_radius_at, choose_neckpinch_params, supersolution_margin, verify_strip_positivity, BallSpec, StripSpec};
use fmcf_core::curvature::{graph_region_curvature, omega_bar, GraphRegion, SetEvaluator};
use fmcf_core::flow::{run_flow, summarize, write_trajectory_csv, EventKind, FlowConfig, StopCondition};
use fmcf_core::scenarios::{build_dumbbell, neckpinch_flow_config, scenario_neckpinch, scenario_shrinking_circle, Verdict};
use fmcf_core::{ClosedCurve, CurvatureResult, Vec2};
use serde_json::{json, Value};

use crate::config::{BarrierJob, CliConfig, Command, Geometry, ScenarioJob};
use crate::curvefile::{format_curves, read_curves};
use crate::{exit, CliError, FORMAT_VERSION};

/// What a successful run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: u8,
    /// One line for stdout.
    pub summary: String,
    pub artifacts: Vec<PathBuf>,
}

struct Writer<'a> {
    config: &'a CliConfig,
    echo: String,
    written: Vec<PathBuf>,
}

impl<'a> Writer<'a> {
    fn new(config: &'a CliConfig) -> Result<Self, CliError> {
        std::fs::create_dir_all(&config.out_dir).map_err(|e| CliError::Output(format!("cannot create {}: {e}", config.out_dir.display())))?;
        let echo = serde_json::to_string(config).map_err(|e| CliError::Output(e.to_string()))?;
        Ok(Writer { config, echo, written: Vec::new() })
    }

    fn put(&mut self, file: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.config.out_dir.join(file);
        std::fs::write(&path, bytes).map_err(|e| CliError::Output(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(path);
        Ok(())
    }

    fn header(&self) -> String {
        format!("# format_version {FORMAT_VERSION}\n# config {}\n", self.echo)
    }

    fn json(&mut self, file: &str, result: Value) -> Result<(), CliError> {
        let doc = json!({ "format_version": FORMAT_VERSION, "config": self.config, "result": result });
        let mut text = serde_json::to_string_pretty(&doc).map_err(|e| CliError::Output(e.to_string()))?;
        text.push('\n');
        self.put(file, text.as_bytes())
    }

    /// CSV with the format version and configuration as leading `#` lines.
    fn csv<F>(&mut self, file: &str, fill: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> Result<(), CliError>,
    {
        let mut buf = self.header().into_bytes();
        fill(&mut buf)?;
        self.put(file, &buf)
    }

    fn curves(&mut self, file: &str, fronts: &[ClosedCurve]) -> Result<(), CliError> {
        let text = self.header() + &format_curves(fronts);
        self.put(file, text.as_bytes())
    }

    fn finish(self, exit_code: u8, summary: String) -> Outcome {
        Outcome { exit_code, summary, artifacts: self.written }
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Output(e.to_string())
}

/// Closed fronts of `geometry`, with the flow configuration adapted to it.
fn closed_fronts(geometry: &Geometry, config: &CliConfig) -> Result<(Vec<ClosedCurve>, FlowConfig), CliError> {
    let flow = config.flow.clone();
    Ok(match geometry {
        Geometry::Circle { radius, nodes } => (vec![ClosedCurve::circle(Vec2::ZERO, *radius, *nodes)?], flow),
        Geometry::Ellipse { a, b, nodes } => (vec![ClosedCurve::ellipse(Vec2::ZERO, *a, *b, *nodes)?], flow),
        Geometry::Dumbbell => {
            let params = choose_neckpinch_params(2, config.s, &config.quad)?;
            let flow = neckpinch_flow_config(&params, &flow);
            (vec![build_dumbbell(&params, flow.target_spacing)?], flow)
        }
        Geometry::File { path } => (read_curves(path)?, flow),
        Geometry::HalfPlane | Geometry::Slab { .. } | Geometry::Strip { .. } => {
            return Err(CliError::Usage("shape: not a closed curve".into()));
        }
    })
}

fn graph_region(geometry: &Geometry) -> Result<Option<GraphRegion>, CliError> {
    Ok(match geometry {
        Geometry::HalfPlane => Some(GraphRegion::half_plane()),
        Geometry::Slab { half_width } => Some(GraphRegion::slab(*half_width)),
        Geometry::Strip { epsilon, delta } => Some(StripSpec::new(*epsilon, *delta)?.region()),
        _ => None,
    })
}

fn result_json(r: &CurvatureResult) -> Value {
    serde_json::to_value(r).unwrap_or(Value::Null)
}

fn curvature(config: &CliConfig, geometry: &Geometry, node: Option<usize>, t: f64) -> Result<Outcome, CliError> {
    let mut out = Writer::new(config)?;
    if let Some(region) = graph_region(geometry)? {
        let r = graph_region_curvature(&region, t, config.s, &config.quad)?;
        out.json("curvature.json", json!({ "t": t, "curvature": result_json(&r) }))?;
        return Ok(out.finish(exit::OK, format!("H_s = {:.10e} ± {:.3e} at t = {t}", r.value, r.error_estimate)));
    }
    let (fronts, _) = closed_fronts(geometry, config)?;
    let eval = SetEvaluator::new(&fronts);
    if let Some(i) = node {
        if i >= fronts[0].len() {
            return Err(CliError::Usage(format!("node: front 0 has {} nodes, got index {i}", fronts[0].len())));
        }
        let r = eval.at(0, i, config.s, &config.quad)?;
        let p = fronts[0].node(i);
        out.json("curvature.json", json!({ "front_id": 0, "node_index": i, "x": p.x, "y": p.y, "curvature": result_json(&r) }))?;
        return Ok(out.finish(exit::OK, format!("H_s = {:.10e} ± {:.3e} at node {i}", r.value, r.error_estimate)));
    }
    let all = eval.all(config.s, &config.quad);
    let mut rows = Vec::new();
    for (f, front) in all.into_iter().enumerate() {
        for (i, r) in front.into_iter().enumerate() {
            rows.push((f, i, fronts[f].node(i), r?));
        }
    }
    out.csv("curvature.csv", |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(crate::CURVATURE_COLUMNS).map_err(csv_err)?;
        for (f, i, p, r) in &rows {
            w.write_record([f.to_string(), i.to_string(), p.x.to_string(), p.y.to_string(), r.value.to_string(), r.error_estimate.to_string()])
                .map_err(csv_err)?;
        }
        w.flush().map_err(|e| CliError::Output(e.to_string()))
    })?;
    let values: Vec<f64> = rows.iter().map(|r| r.3.value).collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let worst_error = rows.iter().map(|r| r.3.error_estimate).fold(0.0, f64::max);
    let degraded = rows.iter().filter(|r| r.3.degraded).count();
    out.json(
        "curvature.json",
        json!({
            "fronts": fronts.len(),
            "nodes": rows.len(),
            "min": min,
            "max": max,
            "mean": values.iter().sum::<f64>() / values.len() as f64,
            "max_error_estimate": worst_error,
            "degraded_nodes": degraded,
        }),
    )?;
    Ok(out.finish(exit::OK, format!("{} nodes on {} front(s), H_s in [{min:.6e}, {max:.6e}], max error estimate {worst_error:.3e}", rows.len(), fronts.len())))
}

fn barrier(config: &CliConfig, job: &BarrierJob) -> Result<Outcome, CliError> {
    let mut out = Writer::new(config)?;
    let s = config.s;
    match job {
        BarrierJob::StripPositivity { epsilon, delta, samples } => {
            let report = verify_strip_positivity(&StripSpec::new(*epsilon, *delta)?, s, *samples, &config.quad)?;
            let lower = report.min_value - report.min_value_error;
            out.csv("barrier-strip-positivity.csv", |buf| {
                let mut w = csv::Writer::from_writer(buf);
                w.write_record(crate::STRIP_COLUMNS).map_err(csv_err)?;
                for x in &report.samples {
                    w.write_record([x.t.to_string(), x.value.to_string(), x.error_estimate.to_string(), x.classical_curvature.to_string()]).map_err(csv_err)?;
                }
                w.flush().map_err(|e| CliError::Output(e.to_string()))
            })?;
            let summary = format!(
                "min H_s = {:.6} ± {:.2e} at t = {:.4} over {} samples: {}",
                report.min_value,
                report.min_value_error,
                report.argmin_t,
                report.samples.len(),
                if lower > 0.0 { "positive" } else { "positivity not verified" }
            );
            out.json("barrier-strip-positivity.json", serde_json::to_value(&report)?)?;
            Ok(out.finish(if lower > 0.0 { exit::OK } else { exit::NOT_REPRODUCED }, summary))
        }
        BarrierJob::Ball { radius, t } => {
            let spec = BallSpec::planar(*radius)?;
            let w = omega_bar(2, s, &config.quad)?;
            let t_ext = ball_extinction_time(&spec, s)?;
            let r_t = t.map(|t| ball_radius_at(&spec, t, s)).transpose()?;
            out.json("barrier-ball.json", json!({ "omega_bar": w, "radius": radius, "extinction_time": t_ext, "t": t, "radius_at_t": r_t }))?;
            let tail = match (t, r_t) {
                (Some(t), Some(r)) => format!(", R({t}) = {r:.6}"),
                _ => String::new(),
            };
            Ok(out.finish(exit::OK, format!("ω̄ = {w:.7}, extinction time {t_ext:.6e}{tail}")))
        }
        BarrierJob::NeckpinchParams => {
            let params = choose_neckpinch_params(2, s, &config.quad)?;
            let margin = supersolution_margin(&params, s, &config.quad)?;
            let check = params.check().err().map(|e| e.to_string());
            let t_ball = ball_extinction_time(&params.lobe_ball(), s)?;
            let summary = format!(
                "ε₀ = {:.6}, δ = {}, κ = {:.5}, c0 = {:.5}, L = {:.5}, margin {margin:.5}",
                params.epsilon0, params.delta, params.kappa_speed, params.c0_estimate, params.lobe_offset
            );
            out.json(
                "barrier-neckpinch-params.json",
                json!({ "params": params, "supersolution_margin": margin, "lobe_extinction_time": t_ball, "constraint_violations": check }),
            )?;
            let code = if check.is_none() && margin > 0.0 { exit::OK } else { exit::NOT_REPRODUCED };
            Ok(out.finish(code, summary))
        }
    }
}

fn flow(config: &CliConfig, geometry: &Geometry, t_max: Option<f64>, stop_on_pinch: bool) -> Result<Outcome, CliError> {
    let mut out = Writer::new(config)?;
    let (fronts, cfg) = closed_fronts(geometry, config)?;
    let stop = StopCondition { max_time: t_max.unwrap_or(f64::INFINITY), on_all_extinct: true, on_first_pinch: stop_on_pinch };
    let traj = run_flow(&fronts, config.s, &cfg, &stop)?;
    out.csv("flow.csv", |buf| Ok(write_trajectory_csv(&traj, buf)?))?;
    let last = traj.snapshots.last();
    out.curves("flow-final.txt", last.map(|s| s.fronts.as_slice()).unwrap_or(&[]))?;
    let summary = summarize(&traj);
    let count = |k: EventKind| traj.events.iter().filter(|e| e.kind == k).count();
    let end_time = last.map(|s| s.time).unwrap_or(0.0);
    let line = format!(
        "{} snapshots to t = {end_time:.6e}, {} front(s) left; {} pinch, {} extinction, {} truncation event(s)",
        traj.snapshots.len(),
        last.map(|s| s.fronts.len()).unwrap_or(0),
        count(EventKind::Pinch),
        count(EventKind::Extinction),
        count(EventKind::Truncation)
    );
    out.json("flow.json", json!({ "effective_flow_config": cfg, "summary": summary }))?;
    Ok(out.finish(exit::OK, line))
}

fn scenario(config: &CliConfig, job: &ScenarioJob) -> Result<Outcome, CliError> {
    let mut out = Writer::new(config)?;
    let report = match job {
        ScenarioJob::ShrinkingCircle { radius } => scenario_shrinking_circle(*radius, config.s, &config.flow)?,
        ScenarioJob::Neckpinch => scenario_neckpinch(config.s, &config.flow)?,
    };
    let stem = format!("scenario-{}", report.name);
    out.csv(&format!("{stem}.csv"), |buf| Ok(report.write_timeseries_csv(buf)?))?;
    out.json(&format!("{stem}.json"), serde_json::to_value(&report)?)?;
    let (code, word) = match report.verdict {
        Verdict::Reproduced => (exit::OK, "reproduced"),
        Verdict::NotReproduced => (exit::NOT_REPRODUCED, "not_reproduced"),
        Verdict::Inconclusive => (exit::NUMERICAL, "inconclusive"),
    };
    let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let tail = if failed.is_empty() { String::new() } else { format!(" (failed: {})", failed.join(", ")) };
    Ok(out.finish(code, format!("{}: {word}, {}/{} checks passed{tail}", report.name, report.checks.len() - failed.len(), report.checks.len())))
}

/// Runs the configured command on a pool of `config.threads` workers.
pub fn execute(config: &CliConfig) -> Result<Outcome, CliError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(config.threads).build().map_err(|e| CliError::Numerical(format!("thread pool: {e}")))?;
    pool.install(|| match &config.command {
        Command::Curvature { geometry, node, t } => curvature(config, geometry, *node, *t),
        Command::Barrier { job } => barrier(config, job),
        Command::Flow { geometry, t_max, stop_on_pinch } => flow(config, geometry, *t_max, *stop_on_pinch),
        Command::Scenario { job } => scenario(config, job),
    })
}
