//! Headless command-line surface.

use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use robosetup_core::acm_gen::{generate_acm, AcmGenParams, DEFAULT_ALWAYS_THRESHOLD, DEFAULT_SAMPLE_COUNT};
use robosetup_core::bench::{run_benchmark, write_results, BenchConfig, StateSpec};
use robosetup_core::collision::PlanningSceneWorld;
use robosetup_core::confgen::{write_bundle, GenOptions, DEFAULT_SERVICE_PORT};
use robosetup_core::kinematics::RobotState;
use robosetup_core::planning::{Pipeline, PlanRequest, Target};

use crate::error::{AppError, ErrorKind};
use crate::ops;

#[derive(Debug, Parser)]
#[command(name = "robosetup", version, about = "Robot setup, planning and benchmarking toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and check a URDF; prints one line per finding.
    Validate(ValidateArgs),
    /// Generate the allowed collision matrix by sampling.
    Acm(AcmArgs),
    /// Write a configuration bundle for a robot and its semantic description.
    Genconfig(GenconfigArgs),
    /// Plan with a configuration bundle and write the trajectory as CSV.
    Plan(PlanArgs),
    /// Run a benchmark configuration and write per-run results as CSV.
    Bench(BenchArgs),
    /// Serve the HTTP API (and optional UI assets).
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub urdf: PathBuf,
    /// Directory that mesh paths are relative to (default: the URDF's directory).
    #[arg(long)]
    pub assets: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AcmArgs {
    pub urdf: PathBuf,
    #[arg(long)]
    pub assets: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SAMPLE_COUNT)]
    pub samples: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Collision fraction at or above which a pair counts as always colliding.
    #[arg(long, default_value_t = DEFAULT_ALWAYS_THRESHOLD)]
    pub threshold: f64,
    /// Worker threads (default: one per core). Results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output file (default: stdout).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GenconfigArgs {
    pub urdf: PathBuf,
    #[arg(long)]
    pub srdf: PathBuf,
    /// Bundle directory; files go under `<DIR>/config/`.
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long)]
    pub overwrite: bool,
    #[arg(long)]
    pub assets: Option<PathBuf>,
    /// ACM report (from `robosetup acm`) whose disabled pairs replace the SRDF's.
    #[arg(long)]
    pub acm: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub velocity_scaling: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Bundle directory written by `genconfig`.
    pub bundle: PathBuf,
    /// JSON plan request (group, start, goal, seed, ...). Overrides the goal flags.
    #[arg(long, conflicts_with_all = ["goal", "start"])]
    pub request: Option<PathBuf>,
    /// Goal: a named group state or `joint=value, ...`.
    #[arg(long, required_unless_present = "request")]
    pub goal: Option<String>,
    /// Start: a named group state or `joint=value, ...` (default: model defaults).
    #[arg(long)]
    pub start: Option<String>,
    /// Planning group (default: the bundle's demo group).
    #[arg(long)]
    pub group: Option<String>,
    /// Seed (default: the bundle's seed).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Scene JSON with world obstacles.
    #[arg(long)]
    pub world: Option<PathBuf>,
    /// Resampling period in seconds; 0 writes the profile breakpoints only.
    #[arg(long, default_value_t = 0.01)]
    pub period: f64,
    /// Output file (default: stdout).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    pub config: PathBuf,
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value_t = DEFAULT_SERVICE_PORT)]
    pub port: u16,
    #[arg(long, default_value_t = IpAddr::V4(Ipv4Addr::LOCALHOST))]
    pub host: IpAddr,
    /// Directory of built UI assets to serve under `/`.
    #[arg(long)]
    pub ui: Option<PathBuf>,
}

/// Runs one subcommand. Primary output goes to stdout or the named file;
/// summaries go to stderr.
pub fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Validate(a) => validate(&a),
        Command::Acm(a) => acm(&a),
        Command::Genconfig(a) => genconfig(&a),
        Command::Plan(a) => plan(&a),
        Command::Bench(a) => bench(&a),
        Command::Serve(a) => serve(&a),
    }
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), AppError> {
    match output {
        Some(p) => ops::write_text(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, AppError> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| AppError::invalid(format!("--threads: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn validate(a: &ValidateArgs) -> Result<(), AppError> {
    let (model, report) = ops::load_model(&a.urdf, a.assets.as_deref())?;
    println!("{report}");
    if report.has_errors() {
        return Err(AppError::from_report(format!("{} has errors", a.urdf.display()), report));
    }
    eprintln!(
        "{}: {} links, {} joints ({} active)",
        model.name(),
        model.links().len(),
        model.joints().len(),
        model.active_joints().len()
    );
    Ok(())
}

fn acm(a: &AcmArgs) -> Result<(), AppError> {
    let model = ops::load_valid_model(&a.urdf, a.assets.as_deref())?;
    let params = AcmGenParams {
        sample_count: a.samples,
        seed: a.seed,
        always_threshold: a.threshold,
        ..Default::default()
    };
    let report = with_threads(a.threads, || generate_acm(&model, &params))??;
    for (reason, n) in &report.disabled_by_reason {
        eprintln!("{}\t{n}", reason.as_str());
    }
    eprintln!("disabled\t{} of {} pairs", report.total_disabled(), report.pairs.len());
    emit(a.output.as_deref(), &report.to_deterministic_json())
}

fn genconfig(a: &GenconfigArgs) -> Result<(), AppError> {
    let model = ops::load_valid_model(&a.urdf, a.assets.as_deref())?;
    let mut semantic = ops::load_semantic(&a.srdf, &model)?;
    if let Some(p) = &a.acm {
        semantic.set_disabled_pairs(&ops::read_acm_report(p)?.acm);
    }
    let base = GenOptions {
        velocity_scaling: a.velocity_scaling,
        seed: a.seed,
        ..Default::default()
    };
    let opts = ops::gen_options(&base, Some(&a.urdf), a.assets.as_deref());
    let bundle = ops::bundle(&model, &semantic, &opts)?;
    let manifest = write_bundle(&bundle, &a.output, a.overwrite)?;
    for f in &manifest.files {
        println!("{}  {}", f.sha256, f.path);
    }
    eprintln!("bundle\t{}", manifest.bundle_sha256);
    Ok(())
}

fn parse_spec(text: &str) -> Result<StateSpec, AppError> {
    Ok(StateSpec::parse(text)?)
}

fn plan(a: &PlanArgs) -> Result<(), AppError> {
    if !(a.period >= 0.0 && a.period.is_finite()) {
        return Err(AppError::invalid(format!("--period must be non-negative, got {}", a.period)));
    }
    let (mut scene, pipeline, loaded) = ops::load_bundle(&a.bundle)?;
    if let Some(w) = &a.world {
        scene = scene.with_world(PlanningSceneWorld::from_json(&ops::read_text(w)?)?);
    }
    let req: PlanRequest = match &a.request {
        Some(p) => serde_json::from_str(&ops::read_text(p)?)
            .map_err(|e| AppError::invalid(format!("{}: {e}", p.display())).with_element(p.display().to_string()))?,
        None => {
            let group = a
                .group
                .clone()
                .or_else(|| loaded.demo_group().map(str::to_string))
                .ok_or_else(|| AppError::invalid("no --group given and the bundle names no demo group"))?;
            let start = match &a.start {
                Some(s) => parse_spec(s)?.resolve(&scene.semantic, &group)?,
                None => RobotState::new(),
            };
            let target = match parse_spec(a.goal.as_deref().unwrap_or_default())? {
                StateSpec::Named(n) => Target::Named(n),
                StateSpec::Values(v) => Target::State(v),
            };
            let goal = pipeline.goal(&scene, &group, &target)?;
            pipeline.request(&group, &start, goal, a.seed.unwrap_or(loaded.planning.seed))
        }
    };
    let response = pipeline.plan(&scene, &req)?;
    let traj = pipeline.timed(&scene, &response)?;
    eprintln!(
        "planned\t{} waypoints, {:.3} s, {} checks",
        response.path.len(),
        traj.duration(),
        response.checks_performed
    );
    let period = (a.period > 0.0).then_some(a.period);
    emit(a.output.as_deref(), &traj.to_csv(period))
}

fn bench(a: &BenchArgs) -> Result<(), AppError> {
    let config = BenchConfig::read(&a.config)?;
    let scene = config.load_scene()?;
    let pipeline = Pipeline::default();
    let rows = with_threads(a.threads, || run_benchmark(&config, &scene, &pipeline))??;
    let ok = rows.iter().filter(|r| r.success).count();
    eprintln!("rows\t{}, {ok} succeeded", rows.len());
    ops::write_text(&a.output, &write_results(&rows)?)
}

fn serve(a: &ServeArgs) -> Result<(), AppError> {
    let runtime = tokio::runtime::Runtime::new().map_err(|e| AppError::new(ErrorKind::Internal, e.to_string()))?;
    runtime.block_on(async {
        let addr = SocketAddr::new(a.host, a.port);
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| AppError::new(ErrorKind::Io, format!("cannot bind {addr}: {e}")))?;
        eprintln!("listening on http://{}", listener.local_addr().map(|a| a.to_string()).unwrap_or_default());
        let app = crate::service::router(crate::service::AppState::new(a.ui.clone()));
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| AppError::new(ErrorKind::Io, e.to_string()))
    })
}
