use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fmcf_core::barriers::{StripSpec, POSITIVITY_SAMPLES};
use fmcf_core::flow::FlowConfig;
use fmcf_core::geom::MIN_NODES;
use fmcf_core::{FracOrder, QuadConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Environment variable giving the default worker thread count.
pub const THREADS_ENV: &str = "FMCF_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fmcf", version, allow_negative_numbers = true, about = "Fractional mean curvature and fractional curvature flow of plane curves")]
struct Cli {
    /// TOML file supplying defaults for any option; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    quad: QuadArgs,
    #[command(flatten)]
    flow_config: FlowArgs,
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Fractional curvature of a shape or curve file.
    #[command(allow_negative_numbers = true)]
    Curvature {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[command(flatten)]
        args: CurvatureArgs,
    },
    /// Barrier computations: strip positivity, shrinking balls, neckpinch parameters.
    #[command(allow_negative_numbers = true)]
    Barrier(BarrierArgs),
    /// Evolve a closed geometry by fractional curvature flow.
    #[command(allow_negative_numbers = true)]
    Flow {
        #[command(flatten)]
        geometry: GeometryArgs,
        #[command(flatten)]
        args: FlowRunArgs,
    },
    /// Run a named scenario and report a verdict.
    #[command(allow_negative_numbers = true)]
    Scenario(ScenarioArgs),
}

macro_rules! overlay {
    ($t:ident { $($f:ident),* $(,)? }) => {
        impl $t {
            /// Fields set in `self` win over those of `base`.
            fn overlay(self, base: $t) -> $t {
                $t { $($f: self.$f.or(base.$f)),* }
            }
        }
    };
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct CommonArgs {
    /// Fractional order s in (0, 1).
    #[arg(long, global = true)]
    s: Option<f64>,
    /// Worker threads for curvature evaluation; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory receiving the output files.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
}
overlay!(CommonArgs { s, threads, out_dir });

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct QuadArgs {
    /// Relative tolerance of the adaptive quadrature.
    #[arg(long, global = true)]
    rel_tol: Option<f64>,
    /// Absolute tolerance of the adaptive quadrature.
    #[arg(long, global = true)]
    abs_tol: Option<f64>,
    /// Near-field radius in multiples of the local node spacing.
    #[arg(long, global = true)]
    near_field_radius_factor: Option<f64>,
    /// Radius beyond which unbounded regions use the tail model.
    #[arg(long, global = true)]
    truncation_radius: Option<f64>,
    /// Bisection budget of one adaptive evaluation.
    #[arg(long, global = true)]
    max_subdivisions: Option<usize>,
}
overlay!(QuadArgs { rel_tol, abs_tol, near_field_radius_factor, truncation_radius, max_subdivisions });

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowArgs {
    /// Fraction of the local spacing a node may move per step.
    #[arg(long, global = true)]
    cfl: Option<f64>,
    /// Node spacing of the front tracker.
    #[arg(long, global = true)]
    target_spacing: Option<f64>,
    /// Pinch threshold in multiples of the local spacing.
    #[arg(long, global = true)]
    pinch_factor: Option<f64>,
    /// Step budget of a run.
    #[arg(long, global = true)]
    max_steps: Option<usize>,
    /// Record every n-th step.
    #[arg(long, global = true)]
    snapshot_stride: Option<usize>,
    /// Halved-step retries after a quadrature failure.
    #[arg(long, global = true)]
    max_retries: Option<usize>,
    /// Time step cap as a fraction of the explicit stability limit, below 2.
    #[arg(long, global = true)]
    stability_factor: Option<f64>,
}
overlay!(FlowArgs { cfl, target_spacing, pinch_factor, max_steps, snapshot_stride, max_retries, stability_factor });

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShapeName {
    Circle,
    Ellipse,
    HalfPlane,
    Slab,
    Strip,
    Dumbbell,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryArgs {
    /// Builtin shape.
    #[arg(long, value_enum)]
    shape: Option<ShapeName>,
    /// Curve file with one `x y` pair per line; a blank line separates fronts.
    #[arg(long)]
    curve: Option<PathBuf>,
    /// Circle radius.
    #[arg(long)]
    radius: Option<f64>,
    /// Ellipse semi-axis along x.
    #[arg(long)]
    a: Option<f64>,
    /// Ellipse semi-axis along y.
    #[arg(long)]
    b: Option<f64>,
    /// Slab half-width.
    #[arg(long)]
    half_width: Option<f64>,
    /// Strip waist half-width.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Strip opening rate.
    #[arg(long)]
    delta: Option<f64>,
    /// Polygon node count; defaults to the perimeter over the target spacing.
    #[arg(long)]
    nodes: Option<usize>,
}
overlay!(GeometryArgs { shape, curve, radius, a, b, half_width, epsilon, delta, nodes });

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurvatureArgs {
    /// Report a single node of the first front.
    #[arg(long)]
    node: Option<usize>,
    /// Boundary abscissa for the unbounded shapes.
    #[arg(long)]
    t: Option<f64>,
}
overlay!(CurvatureArgs { node, t });

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BarrierName {
    StripPositivity,
    Ball,
    NeckpinchParams,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct BarrierArgs {
    #[arg(long, value_enum)]
    name: Option<BarrierName>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    /// Sample count of the positivity check.
    #[arg(long)]
    samples: Option<usize>,
    /// Initial ball radius.
    #[arg(long)]
    radius: Option<f64>,
    /// Time at which to report the ball radius.
    #[arg(long)]
    t: Option<f64>,
}
overlay!(BarrierArgs { name, epsilon, delta, samples, radius, t });

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowRunArgs {
    /// Final time; without it the run stops when every front is extinct.
    #[arg(long)]
    t_max: Option<f64>,
    /// Stop right after the first pinch.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    stop_on_pinch: Option<bool>,
}
overlay!(FlowRunArgs { t_max, stop_on_pinch });

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioName {
    ShrinkingCircle,
    Neckpinch,
}

#[derive(Debug, Default, Args, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioArgs {
    #[arg(long, value_enum)]
    name: Option<ScenarioName>,
    /// Initial radius of the shrinking circle.
    #[arg(long)]
    radius: Option<f64>,
}
overlay!(ScenarioArgs { name, radius });

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FileConfig {
    s: Option<f64>,
    threads: Option<usize>,
    out_dir: Option<PathBuf>,
    quad: QuadArgs,
    flow_config: FlowArgs,
    geometry: GeometryArgs,
    curvature: CurvatureArgs,
    barrier: BarrierArgs,
    flow: FlowRunArgs,
    scenario: ScenarioArgs,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Geometry {
    Circle { radius: f64, nodes: usize },
    Ellipse { a: f64, b: f64, nodes: usize },
    HalfPlane,
    Slab { half_width: f64 },
    Strip { epsilon: f64, delta: f64 },
    /// Neckpinch dumbbell; its parameters and spacing are chosen from `s`.
    Dumbbell,
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum BarrierJob {
    StripPositivity { epsilon: f64, delta: f64, samples: usize },
    Ball { radius: f64, t: Option<f64> },
    NeckpinchParams,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum ScenarioJob {
    ShrinkingCircle { radius: f64 },
    Neckpinch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum Command {
    Curvature { geometry: Geometry, node: Option<usize>, t: f64 },
    Barrier { job: BarrierJob },
    Flow { geometry: Geometry, t_max: Option<f64>, stop_on_pinch: bool },
    Scenario { job: ScenarioJob },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Curvature { .. } => "curvature",
            Command::Barrier { .. } => "barrier",
            Command::Flow { .. } => "flow",
            Command::Scenario { .. } => "scenario",
        }
    }
}

/// Fully resolved invocation, echoed into every artifact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliConfig {
    pub command: Command,
    pub s: FracOrder,
    /// 0 means one worker per core.
    pub threads: usize,
    pub out_dir: PathBuf,
    pub quad: QuadConfig,
    pub flow: FlowConfig,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn positive(key: &str, v: f64) -> Result<f64, CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(usage(format!("{key}: must be positive and finite, got {v}")))
    }
}

fn required<T>(key: &str, v: Option<T>, what: &str) -> Result<T, CliError> {
    v.ok_or_else(|| usage(format!("{key}: required for {what}")))
}

fn node_count(key: &str, given: Option<usize>, perimeter: f64, spacing: f64) -> Result<usize, CliError> {
    match given {
        Some(n) if n < MIN_NODES => Err(usage(format!("{key}: at least {MIN_NODES} nodes are needed, got {n}"))),
        Some(n) => Ok(n),
        None => Ok(((perimeter / spacing).round() as usize).max(MIN_NODES)),
    }
}

fn resolve_geometry(g: GeometryArgs, spacing: f64) -> Result<Geometry, CliError> {
    let shape = match (g.shape, g.curve) {
        (Some(_), Some(_)) => return Err(usage("geometry: give either shape or curve, not both")),
        (None, None) => return Err(usage("geometry: one of shape or curve is required")),
        (None, Some(path)) => return Ok(Geometry::File { path }),
        (Some(shape), None) => shape,
    };
    Ok(match shape {
        ShapeName::Circle => {
            let radius = positive("radius", g.radius.unwrap_or(1.0))?;
            Geometry::Circle { radius, nodes: node_count("nodes", g.nodes, std::f64::consts::TAU * radius, spacing)? }
        }
        ShapeName::Ellipse => {
            let a = positive("a", required("a", g.a, "shape ellipse")?)?;
            let b = positive("b", required("b", g.b, "shape ellipse")?)?;
            // Ramanujan's perimeter approximation
            let perimeter = std::f64::consts::PI * (3.0 * (a + b) - ((3.0 * a + b) * (a + 3.0 * b)).sqrt());
            Geometry::Ellipse { a, b, nodes: node_count("nodes", g.nodes, perimeter, spacing)? }
        }
        ShapeName::HalfPlane => Geometry::HalfPlane,
        ShapeName::Slab => Geometry::Slab { half_width: positive("half_width", required("half_width", g.half_width, "shape slab")?)? },
        ShapeName::Strip => {
            let epsilon = required("epsilon", g.epsilon, "shape strip")?;
            let delta = required("delta", g.delta, "shape strip")?;
            StripSpec::new(epsilon, delta).map_err(|e| usage(format!("epsilon/delta: {e}")))?;
            Geometry::Strip { epsilon, delta }
        }
        ShapeName::Dumbbell => Geometry::Dumbbell,
    })
}

fn resolve_quad(q: QuadArgs) -> Result<QuadConfig, CliError> {
    let d = QuadConfig::default();
    let quad = QuadConfig {
        rel_tol: q.rel_tol.unwrap_or(d.rel_tol),
        abs_tol: q.abs_tol.unwrap_or(d.abs_tol),
        near_field_radius_factor: q.near_field_radius_factor.unwrap_or(d.near_field_radius_factor),
        truncation_radius: q.truncation_radius.unwrap_or(d.truncation_radius),
        max_subdivisions: q.max_subdivisions.unwrap_or(d.max_subdivisions),
    };
    quad.validate().map_err(|e| usage(format!("quad: {e}")))?;
    Ok(quad)
}

fn resolve_flow(f: FlowArgs, quad: QuadConfig) -> Result<FlowConfig, CliError> {
    let d = FlowConfig::default();
    let flow = FlowConfig {
        cfl: f.cfl.unwrap_or(d.cfl),
        target_spacing: f.target_spacing.unwrap_or(d.target_spacing),
        pinch_factor: f.pinch_factor.unwrap_or(d.pinch_factor),
        max_steps: f.max_steps.unwrap_or(d.max_steps),
        snapshot_stride: f.snapshot_stride.unwrap_or(d.snapshot_stride),
        max_retries: f.max_retries.unwrap_or(d.max_retries),
        stability_factor: f.stability_factor.unwrap_or(d.stability_factor),
        quad,
        ..d
    };
    flow.validate().map_err(|e| usage(format!("flow_config: {e}")))?;
    Ok(flow)
}

fn load_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("config: cannot read {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| usage(format!("config {}: {}", path.display(), e.message())))
}

/// Parses `argv` (program name first), layering flags over the config file over defaults.
pub fn parse_config<I, T>(argv: I) -> Result<CliConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    parse_config_with_env(argv, |k| std::env::var(k).ok())
}

/// [`parse_config`] with an explicit environment lookup.
pub fn parse_config_with_env<I, T, E>(argv: I, env: E) -> Result<CliConfig, CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
    E: Fn(&str) -> Option<String>,
{
    let cli = Cli::try_parse_from(argv).map_err(CliError::Clap)?;
    let file = match &cli.config {
        Some(p) => load_file(p)?,
        None => FileConfig::default(),
    };
    let common = cli.common.overlay(CommonArgs { s: file.s, threads: file.threads, out_dir: file.out_dir });
    let s = FracOrder::new(common.s.unwrap_or(0.5)).map_err(|e| usage(format!("s: {e}")))?;
    let env_threads = match env(THREADS_ENV) {
        Some(v) => Some(v.trim().parse::<usize>().map_err(|_| usage(format!("{THREADS_ENV}: expected a thread count, got `{v}`")))?),
        None => None,
    };
    let threads = common.threads.or(env_threads).unwrap_or(0);
    let quad = resolve_quad(cli.quad.overlay(file.quad))?;
    let flow = resolve_flow(cli.flow_config.overlay(file.flow_config), quad)?;

    let command = match cli.command {
        Cmd::Curvature { geometry, args } => {
            let args = args.overlay(file.curvature);
            let t = args.t.unwrap_or(0.0);
            if !t.is_finite() {
                return Err(usage(format!("t: must be finite, got {t}")));
            }
            Command::Curvature { geometry: resolve_geometry(geometry.overlay(file.geometry), flow.target_spacing)?, node: args.node, t }
        }
        Cmd::Barrier(args) => {
            let args = args.overlay(file.barrier);
            let job = match required("name", args.name, "barrier")? {
                BarrierName::StripPositivity => {
                    let epsilon = required("epsilon", args.epsilon, "strip-positivity")?;
                    let delta = required("delta", args.delta, "strip-positivity")?;
                    StripSpec::new(epsilon, delta).map_err(|e| usage(format!("epsilon/delta: {e}")))?;
                    let samples = args.samples.unwrap_or(POSITIVITY_SAMPLES);
                    if samples < 2 {
                        return Err(usage(format!("samples: at least 2 are needed, got {samples}")));
                    }
                    BarrierJob::StripPositivity { epsilon, delta, samples }
                }
                BarrierName::Ball => {
                    let radius = positive("radius", args.radius.unwrap_or(1.0))?;
                    if let Some(t) = args.t {
                        if !(t >= 0.0 && t.is_finite()) {
                            return Err(usage(format!("t: must be nonnegative, got {t}")));
                        }
                    }
                    BarrierJob::Ball { radius, t: args.t }
                }
                BarrierName::NeckpinchParams => BarrierJob::NeckpinchParams,
            };
            Command::Barrier { job }
        }
        Cmd::Flow { geometry, args } => {
            let args = args.overlay(file.flow);
            let geometry = resolve_geometry(geometry.overlay(file.geometry), flow.target_spacing)?;
            if matches!(geometry, Geometry::HalfPlane | Geometry::Slab { .. } | Geometry::Strip { .. }) {
                return Err(usage("shape: flow needs a closed curve; half-plane, slab and strip are unbounded"));
            }
            if let Some(t) = args.t_max {
                if !(t >= 0.0 && t.is_finite()) {
                    return Err(usage(format!("t_max: must be nonnegative, got {t}")));
                }
            }
            Command::Flow { geometry, t_max: args.t_max, stop_on_pinch: args.stop_on_pinch.unwrap_or(false) }
        }
        Cmd::Scenario(args) => {
            let args = args.overlay(file.scenario);
            let job = match required("name", args.name, "scenario")? {
                ScenarioName::ShrinkingCircle => ScenarioJob::ShrinkingCircle { radius: positive("radius", args.radius.unwrap_or(1.0))? },
                ScenarioName::Neckpinch => ScenarioJob::Neckpinch,
            };
            Command::Scenario { job }
        }
    };
    Ok(CliConfig { command, s, threads, out_dir: common.out_dir.unwrap_or_else(|| PathBuf::from(".")), quad, flow })
}
