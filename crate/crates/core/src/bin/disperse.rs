use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::json;

use disperse::billiard::{billiard_map_n, random_phase_point, PhasePoint};
use disperse::genericity::{tangency_census, tangency_residuals, TangencyConstraintProblem};
use disperse::geometry::{validate_configuration, BilliardConfig, ScattererInstance, Tolerances};
use disperse::io::{self, RunManifest, TrajectorySidecar};
use disperse::linalg::vector;
use disperse::measure::{scaling_fit, singularity_tube_measure, PhaseWindow, ScalarFieldSpec, TestField};
use disperse::singularity::{derivative_blowup_exponent, sample_tangency_set, BlowupChart, QuasiRegularChart, TangencyRow};
use disperse::stats::log_grid;
use disperse::{rng, Error, Result};

/// Dispersing billiards: simulation, singularity blow-up, tube volumes and tangency counts.
#[derive(Parser)]
#[command(name = "disperse", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run seeded trajectories of the billiard map and write one CSV per trajectory.
    Simulate(SimulateArgs),
    /// Measure how the derivative of the map blows up near a tangent line.
    Blowup(BlowupArgs),
    /// Fit the tube-volume scaling law for a test field or a singularity set.
    Tube(TubeArgs),
    /// Count multi-tangency solutions by number of prescribed tangencies.
    Census(CensusArgs),
    /// Check a scene for disjointness, convexity and finite horizon.
    Validate(ValidateArgs),
}

/// Overrides for the scene's tolerances. Unset flags keep the scene value.
#[derive(Args, Clone, Debug, Default)]
struct ToleranceArgs {
    /// |R(q)| accepted as on the surface [default: 1e-10]
    #[arg(long)]
    on_surface: Option<f64>,
    /// Smallest admissible |grad R| [default: 1e-8]
    #[arg(long)]
    gradient_floor: Option<f64>,
    /// |cos phi| at or below which a hit counts as tangential [default: 1e-7]
    #[arg(long)]
    tangency_cos: Option<f64>,
    /// Newton stopping residual [default: 1e-12]
    #[arg(long)]
    newton_residual: Option<f64>,
    /// Newton iteration cap [default: 50]
    #[arg(long)]
    newton_max_iter: Option<usize>,
}

impl ToleranceArgs {
    fn apply(&self, t: &mut Tolerances) {
        if let Some(x) = self.on_surface {
            t.on_surface = x;
        }
        if let Some(x) = self.gradient_floor {
            t.gradient_floor = x;
        }
        if let Some(x) = self.tangency_cos {
            t.tangency_cos = x;
        }
        if let Some(x) = self.newton_residual {
            t.newton_residual = x;
        }
        if let Some(x) = self.newton_max_iter {
            t.newton_max_iter = x;
        }
    }
}

#[derive(Args)]
struct SceneArgs {
    /// Scene JSON file
    #[arg(long)]
    scene: PathBuf,
    #[command(flatten)]
    tolerances: ToleranceArgs,
}

#[derive(Args)]
struct Common {
    /// Master random seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[command(flatten)]
    common: Common,
    /// Reflections per trajectory
    #[arg(long, default_value_t = 100)]
    steps: usize,
    /// Number of trajectories
    #[arg(long, default_value_t = 1)]
    trajectories: usize,
    /// Stop a trajectory at its first tangential event
    #[arg(long)]
    abort_on_tangency: bool,
    /// Trajectories sampled by the pre-run scene validation
    #[arg(long, default_value_t = 200)]
    validation_samples: usize,
    /// Fixed start: base scatterer of the initial point (all trajectories share it)
    #[arg(long, requires_all = ["start_q", "start_v"])]
    start_base: Option<usize>,
    /// Fixed start: comma-separated position on the scatterer
    #[arg(long, value_delimiter = ',', requires = "start_base")]
    start_q: Option<Vec<f64>>,
    /// Fixed start: comma-separated outgoing velocity (normalized)
    #[arg(long, value_delimiter = ',', requires = "start_base")]
    start_v: Option<Vec<f64>>,
}

#[derive(Args)]
struct BlowupArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[command(flatten)]
    common: Common,
    /// Scatterer the tangent line grazes
    #[arg(long, default_value_t = 0)]
    scatterer: usize,
    /// Points of the log-spaced tau grid on [1e-7, 1e-3]
    #[arg(long, default_value_t = 12)]
    grid_points: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum FieldKind {
    Hyperplane,
    Circle,
    Crossing,
    NoZero,
}

#[derive(Args)]
struct TubeArgs {
    #[command(flatten)]
    common: Common,
    /// Test field (field mode)
    #[arg(long, conflicts_with = "scene")]
    field: Option<FieldKind>,
    /// Ambient dimension of the test field
    #[arg(long, default_value_t = 2)]
    dimension: usize,
    /// Scene JSON file (singularity mode, needs --window)
    #[arg(long, requires = "window")]
    scene: Option<PathBuf>,
    /// Window JSON: {"base","shift","q","v","half_widths"}
    #[arg(long, requires = "scene")]
    window: Option<PathBuf>,
    /// Number of backward steps applied to the singularity set
    #[arg(long, default_value_t = 0)]
    k: usize,
    /// Tangent-line attempts used to build the singularity cloud
    #[arg(long, default_value_t = 20000)]
    cloud_attempts: usize,
    /// Comma-separated tube radii [default: 7 log-spaced in [1e-3, 1e-1] (field) or 6 in [1e-3, 2e-2] (scene)]
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
    /// Monte Carlo samples per run
    #[arg(long, default_value_t = 1_000_000)]
    n: usize,
    #[command(flatten)]
    tolerances: ToleranceArgs,
}

#[derive(Args)]
struct CensusArgs {
    #[command(flatten)]
    scene: SceneArgs,
    #[command(flatten)]
    common: Common,
    /// Largest number of prescribed tangencies
    #[arg(long, default_value_t = 5)]
    j_max: usize,
    /// Random combinatorial types tried per j
    #[arg(long, default_value_t = 200)]
    trials: usize,
}

#[derive(Args)]
struct ValidateArgs {
    #[command(flatten)]
    scene: SceneArgs,
    /// Random trajectories used for the flight-time bounds
    #[arg(long, default_value_t = 200)]
    samples: usize,
    /// Random seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Deserialize)]
struct WindowFile {
    base: usize,
    #[serde(default)]
    shift: Option<Vec<i64>>,
    q: Vec<f64>,
    v: Vec<f64>,
    half_widths: Vec<f64>,
}

struct Loaded {
    cfg: BilliardConfig,
    path: String,
    sha: String,
}

fn load(args: &SceneArgs) -> Result<Loaded> {
    load_path(&args.scene, &args.tolerances)
}

fn load_path(path: &Path, tol: &ToleranceArgs) -> Result<Loaded> {
    let (mut cfg, sha) = io::load_scene(path)?;
    tol.apply(&mut cfg.tolerances);
    cfg.check()?;
    Ok(Loaded {
        cfg,
        path: path.display().to_string(),
        sha,
    })
}

/// Collects output files, writes them, and finishes with the manifest.
struct Outputs {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Outputs {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        }
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        io::write_file(&self.dir.join(name), bytes)?;
        self.files.push((name.to_string(), io::sha256_hex(bytes)));
        Ok(())
    }

    fn finish(
        self,
        command: &str,
        scene: Option<&Loaded>,
        seed: u64,
        tolerances: Tolerances,
        parameters: serde_json::Value,
        start: Instant,
    ) -> Result<()> {
        let manifest = RunManifest {
            command: command.into(),
            scene_path: scene.map(|s| s.path.clone()),
            scene_sha256: scene.map(|s| s.sha.clone()),
            seed,
            tolerances,
            parameters,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            outputs: self.files,
            wall_clock_seconds: start.elapsed().as_secs_f64(),
        };
        io::write_file(&self.dir.join("manifest.json"), &io::to_json(&manifest)?)
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let start = Instant::now();
    let scene = load(&a.scene)?;
    let cfg = &scene.cfg;
    let report = validate_configuration(cfg, a.validation_samples, a.common.seed);
    if !report.is_valid() {
        eprintln!("{}", String::from_utf8_lossy(&io::to_json(&report)?));
        return Err(Error::ValidationFailed(report.flags.join("; ")));
    }
    let fixed = match (a.start_base, &a.start_q, &a.start_v) {
        (Some(base), Some(q), Some(v)) => {
            if base >= cfg.scatterers.len() || q.len() != cfg.dimension || v.len() != cfg.dimension {
                return Err(Error::InvalidInput("start point does not match the scene".into()));
            }
            let inst = ScattererInstance::origin(base, cfg.dimension);
            let q = vector(q);
            let value = cfg.value(&inst, &q);
            if value.abs() > cfg.tolerances.on_surface.max(1e-9) {
                return Err(Error::InvalidStart { scatterer: base, value });
            }
            let v = vector(v).normalize();
            let n = cfg.gradient_direction(&inst, &q)?;
            if v.dot(&n) < 0.0 {
                return Err(Error::InvalidInput("start velocity points into the scatterer".into()));
            }
            Some(PhasePoint::new(inst, q, v))
        }
        _ => None,
    };
    let records: Vec<Result<_>> = (0..a.trajectories)
        .into_par_iter()
        .map(|i| {
            let x = match &fixed {
                Some(p) => p.clone(),
                None => random_phase_point(cfg, &mut rng::stream(a.common.seed, i as u64)),
            };
            billiard_map_n(cfg, &x, a.steps, a.abort_on_tangency)
        })
        .collect();
    let mut out = Outputs::new(&a.common.out);
    for (i, rec) in records.into_iter().enumerate() {
        let rec = rec?;
        out.put(&format!("trajectory_{i:05}.csv"), &io::trajectory_csv(cfg, &rec)?)?;
        let side = TrajectorySidecar {
            index: i,
            seed: a.common.seed,
            termination: rec.termination.clone(),
            n_events: rec.events.len(),
            tangencies: rec.events.iter().filter(|e| e.tangency).count(),
            constraint_residual: None,
        };
        out.put(&format!("trajectory_{i:05}.json"), &io::to_json(&side)?)?;
    }
    let params = json!({
        "steps": a.steps,
        "trajectories": a.trajectories,
        "abort_on_tangency": a.abort_on_tangency,
        "validation_samples": a.validation_samples,
        "start_base": a.start_base,
        "start_q": a.start_q,
        "start_v": a.start_v,
    });
    out.finish("simulate", Some(&scene), a.common.seed, cfg.tolerances.clone(), params, start)
}

fn blowup(a: BlowupArgs) -> Result<()> {
    let start = Instant::now();
    let scene = load(&a.scene)?;
    let cfg = &scene.cfg;
    if a.scatterer >= cfg.scatterers.len() {
        return Err(Error::InvalidInput(format!("no scatterer {}", a.scatterer)));
    }
    let inst = ScattererInstance::origin(a.scatterer, cfg.dimension);
    let sol = sample_tangency_set(cfg, &inst, 1, a.common.seed)?.remove(0);
    let chart = QuasiRegularChart::new(cfg, &sol)?;
    let grid = log_grid(1e-7, 1e-3, a.grid_points);
    let tau = derivative_blowup_exponent(cfg, &chart, &grid, BlowupChart::Tau)?;
    let upsilon = derivative_blowup_exponent(cfg, &chart, &grid, BlowupChart::Upsilon)?;
    let report = json!({
        "tangent_line": TangencyRow::from(&sol),
        "tau": tau,
        "upsilon": upsilon,
    });
    let mut out = Outputs::new(&a.common.out);
    out.put("blowup.json", &io::to_json(&report)?)?;
    let params = json!({ "scatterer": a.scatterer, "grid_points": a.grid_points });
    out.finish("blowup", Some(&scene), a.common.seed, cfg.tolerances.clone(), params, start)
}

fn tube(a: TubeArgs) -> Result<()> {
    let start = Instant::now();
    let mut out = Outputs::new(&a.common.out);
    let seed = a.common.seed;
    if let Some(kind) = a.field {
        let d = a.dimension;
        if d < 2 {
            return Err(Error::InvalidInput("test fields need dimension >= 2".into()));
        }
        let field = match kind {
            FieldKind::Hyperplane => TestField::Hyperplane { dimension: d },
            FieldKind::Circle => TestField::Circle { dimension: d },
            FieldKind::Crossing => TestField::Crossing { dimension: d },
            FieldKind::NoZero => TestField::NoZero { dimension: d },
        };
        let deltas = a.deltas.clone().unwrap_or_else(|| log_grid(1e-3, 1e-1, 7));
        let spec = ScalarFieldSpec::new(field);
        let report = scaling_fit(&spec, &deltas, a.n, seed)?;
        out.put("tube.json", &io::to_json(&report)?)?;
        let params = json!({ "field": field, "deltas": deltas, "n": a.n });
        let mut tol = Tolerances::default();
        a.tolerances.apply(&mut tol);
        return out.finish("tube", None, seed, tol, params, start);
    }
    let (Some(scene_path), Some(window_path)) = (&a.scene, &a.window) else {
        return Err(Error::InvalidInput("tube needs --field, or --scene with --window".into()));
    };
    let scene = load_path(scene_path, &a.tolerances)?;
    let cfg = &scene.cfg;
    let text = std::fs::read_to_string(window_path).map_err(|e| Error::Io(format!("{}: {e}", window_path.display())))?;
    let w: WindowFile = serde_json::from_str(&text)?;
    let d = cfg.dimension;
    if w.base >= cfg.scatterers.len() || w.q.len() != d || w.v.len() != d || w.half_widths.len() != 2 * d - 2 {
        return Err(Error::InvalidInput("window does not match the scene".into()));
    }
    let window = PhaseWindow {
        base: PhasePoint::new(
            ScattererInstance::new(w.base, &w.shift.unwrap_or_else(|| vec![0; d])),
            vector(&w.q),
            vector(&w.v).normalize(),
        ),
        half_widths: w.half_widths,
    };
    let deltas = a.deltas.clone().unwrap_or_else(|| log_grid(1e-3, 2e-2, 6));
    let report = singularity_tube_measure(cfg, a.k, &window, &deltas, a.n, a.cloud_attempts, seed)?;
    out.put("tube.json", &io::to_json(&report)?)?;
    let params = json!({
        "window": serde_json::from_str::<serde_json::Value>(&text)?,
        "k": a.k,
        "cloud_attempts": a.cloud_attempts,
        "deltas": deltas,
        "n": a.n,
    });
    out.finish("tube", Some(&scene), seed, cfg.tolerances.clone(), params, start)
}

fn census(a: CensusArgs) -> Result<()> {
    let start = Instant::now();
    let scene = load(&a.scene)?;
    let cfg = &scene.cfg;
    let result = tangency_census(cfg, a.j_max, a.trials, a.common.seed);
    let mut out = Outputs::new(&a.common.out);
    out.put("census.csv", &io::census_csv(&result.rows)?)?;
    for w in &result.witnesses {
        let problem = TangencyConstraintProblem::new(cfg, w.events.clone(), &w.line);
        let zero = vec![0.0; problem.unknowns()];
        let Ok(events) = problem.realize(&zero) else { continue };
        let residual = tangency_residuals(&problem, &zero).unwrap_or_default();
        let stem = format!("witness_j{}_t{:04}", w.j, w.trial);
        out.put(&format!("{stem}.csv"), &io::realized_csv(cfg, &events)?)?;
        let side = json!({
            "j": w.j,
            "trial": w.trial,
            "converged": w.converged,
            "residual_norm": w.residual_norm,
            "condition": w.condition,
            "constraint_residual": residual,
        });
        out.put(&format!("{stem}.json"), &io::to_json(&side)?)?;
    }
    let limit = 2 * cfg.dimension - 2;
    for row in result.rows.iter().filter(|r| r.j > limit && r.converged > 0) {
        eprintln!(
            "warning: {} converged solution(s) with j = {} > 2d-2 = {limit}; scene {} (sha256 {}), seed {}",
            row.converged, row.j, scene.path, scene.sha, a.common.seed
        );
    }
    let params = json!({ "j_max": a.j_max, "trials": a.trials });
    out.finish("census", Some(&scene), a.common.seed, cfg.tolerances.clone(), params, start)
}

fn validate(a: ValidateArgs) -> Result<()> {
    let scene = load(&a.scene)?;
    let report = validate_configuration(&scene.cfg, a.samples, a.seed);
    let text = String::from_utf8_lossy(&io::to_json(&report)?).into_owned();
    if report.is_valid() {
        print!("{text}");
        Ok(())
    } else {
        eprint!("{text}");
        Err(Error::ValidationFailed(report.flags.join("; ")))
    }
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("DISPERSE_THREADS") {
        let n: usize = v
            .parse()
            .map_err(|_| Error::InvalidInput(format!("DISPERSE_THREADS='{v}' is not a count")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidInput(e.to_string()))?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Blowup(a) => blowup(a),
        Command::Tube(a) => tube(a),
        Command::Census(a) => census(a),
        Command::Validate(a) => validate(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
