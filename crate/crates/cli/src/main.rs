//! `svdd` — anomaly detection with unsupervised bandwidth selection.
//!
//! Subcommands cover the full workflow: pick a kernel bandwidth from
//! unlabeled data (`bandwidth`, `profile`), fit and persist a model
//! (`train`), flag outliers (`score`, `grid`), generate synthetic benchmark
//! data (`simulate`), and run full simulation studies (`evaluate`).
//!
//! Exit codes: 0 success, 2 usage, 3 input/data problems, 4 numerical
//! failures, 5 non-convergence.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use svdd_core::datagen::{
    labeled_eval_set, multi_shape, random_polygon, sample_polygon_interior,
    sample_shape_interior, two_donuts_circle, PolygonSpec, ShapeKind, ShapeSpec,
};
use svdd_core::eval::grid_scoring_2d;
use svdd_core::io::{scored_csv, write_labeled_csv, write_matrix_csv};
use svdd_core::study::{run_study, StudySpec};
use svdd_core::svdd::{train_svdd, SvddModel, TrainConfig};
use svdd_core::trace::{select_bandwidth_trace, BandwidthSearchConfig};
use svdd_core::{Bandwidth, Error, Rect, Result, Standardizer};

#[derive(Parser)]
#[command(
    name = "svdd",
    version,
    about = "Support vector data description with unsupervised bandwidth selection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select a kernel bandwidth from unlabeled data and print it.
    Bandwidth(BandwidthArgs),
    /// Write the full bandwidth search profile (s, g, h, selected) as CSV.
    Profile(ProfileArgs),
    /// Train a model and write it as JSON.
    Train(TrainArgs),
    /// Score points with a trained model.
    Score(ScoreArgs),
    /// Generate synthetic benchmark data.
    Simulate(SimulateArgs),
    /// Run a simulation study from a spec file (JSON or YAML).
    Evaluate(EvaluateArgs),
    /// Score a 2-D lattice spanning the input data's bounding box.
    Grid(GridArgs),
}

/// Knobs shared by every command that runs the bandwidth search.
#[derive(Args)]
struct SearchArgs {
    /// Number of landmarks for the low-rank projection.
    #[arg(long, default_value_t = 5)]
    landmarks: usize,
    /// Coarse search grid size.
    #[arg(long, default_value_t = 50)]
    grid_size: usize,
    /// Lower bracket edge (derived from the data when omitted).
    #[arg(long)]
    s_min: Option<f64>,
    /// Upper bracket edge (derived from the data when omitted).
    #[arg(long)]
    s_max: Option<f64>,
    /// Seed for landmark selection and data subsampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SearchArgs {
    fn to_config(&self) -> BandwidthSearchConfig {
        BandwidthSearchConfig {
            landmark_count: self.landmarks,
            s_min: self.s_min,
            s_max: self.s_max,
            grid_size: self.grid_size,
            seed: self.seed,
            ..Default::default()
        }
    }
}

#[derive(Args)]
struct BandwidthArgs {
    /// Input CSV (a `label` column, if present, is ignored).
    #[arg(long)]
    input: PathBuf,
    /// Also write the search profile CSV here.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args)]
struct ProfileArgs {
    #[arg(long)]
    input: PathBuf,
    /// Profile CSV destination.
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    input: PathBuf,
    /// Model JSON destination.
    #[arg(long)]
    model: PathBuf,
    /// Kernel bandwidth: a number, or `auto` to select it from the data.
    #[arg(long, default_value = "auto")]
    s: String,
    /// Upper bound on the training outlier fraction.
    #[arg(long, default_value_t = 0.01)]
    f: f64,
    /// Optimality tolerance for the solver.
    #[arg(long, default_value_t = 1e-6)]
    kkt_tol: f64,
    /// Solver pair-update budget (default: 1000 per training point).
    #[arg(long)]
    max_passes: Option<usize>,
    /// Z-score features before training; the transform is stored in the
    /// model and applied when scoring.
    #[arg(long)]
    standardize: bool,
    #[command(flatten)]
    search: SearchArgs,
}

#[derive(Args)]
struct ScoreArgs {
    /// Trained model JSON.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Scored CSV destination (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SimKind {
    TwoDonutsCircle,
    Sphere,
    Cube,
    MultiSphere,
    MultiCube,
    Polygon,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scene family to generate.
    #[arg(long, value_enum)]
    kind: SimKind,
    /// Output CSV destination.
    #[arg(long)]
    output: PathBuf,
    /// Ambient dimension (sphere, cube, multi-*).
    #[arg(long, default_value_t = 2)]
    dim: usize,
    /// Points to sample (per shape for multi-*).
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Shape half-width / radius.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Relative thickness of the outlier shell.
    #[arg(long, default_value_t = 0.1)]
    shell_width: f64,
    /// Number of shapes (multi-*).
    #[arg(long, default_value_t = 5)]
    shapes: usize,
    /// Polygon vertex count.
    #[arg(long, default_value_t = 8)]
    vertices: usize,
    /// Emit a labeled evaluation set (half inliers, half shell outliers)
    /// instead of unlabeled training data.
    #[arg(long)]
    labeled: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Study spec file; `.yaml`/`.yml` parses as YAML, anything else as JSON.
    #[arg(long)]
    spec: PathBuf,
    /// Per-cell report CSV destination (stdout when omitted).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Grouped five-number-summary JSON destination.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Worker threads (default: all cores). Results are identical at any
    /// setting.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    model: PathBuf,
    /// 2-D CSV whose bounding box frames the lattice.
    #[arg(long)]
    input: PathBuf,
    /// Lattice CSV destination.
    #[arg(long)]
    output: PathBuf,
    /// Lattice points per axis (inclusive of both edges).
    #[arg(long, default_value_t = 200)]
    resolution: usize,
}

/// File reads/writes with the path baked into the error message.
fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

fn read_table_at(path: &Path) -> Result<svdd_core::io::Table> {
    svdd_core::io::read_table(&read_file(path)?)
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) => 2,
        Error::Data { .. }
        | Error::Io(_)
        | Error::InsufficientData(_)
        | Error::DimensionMismatch { .. }
        | Error::ModelFormat(_) => 3,
        Error::Numerical(_) | Error::Bracket(_) | Error::DegenerateGeometry(_) => 4,
        Error::NonConvergence { .. } => 5,
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Bandwidth(args) => cmd_bandwidth(args),
        Command::Profile(args) => cmd_profile(args),
        Command::Train(args) => cmd_train(args),
        Command::Score(args) => cmd_score(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Grid(args) => cmd_grid(args),
    }
}

fn cmd_bandwidth(args: BandwidthArgs) -> Result<()> {
    let table = read_table_at(&args.input)?;
    let selection = select_bandwidth_trace(&table.data, &args.search.to_config())?;
    if let Some(path) = &args.profile {
        write_file(path, &selection.profile.to_csv())?;
    }
    println!("{}", selection.bandwidth.get());
    Ok(())
}

fn cmd_profile(args: ProfileArgs) -> Result<()> {
    let table = read_table_at(&args.input)?;
    let selection = select_bandwidth_trace(&table.data, &args.search.to_config())?;
    write_file(&args.output, &selection.profile.to_csv())?;
    println!("{}", selection.bandwidth.get());
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let table = read_table_at(&args.input)?;
    let (data, standardizer) = if args.standardize {
        let st = Standardizer::fit(&table.data);
        (st.transform(&table.data)?, Some(st))
    } else {
        (table.data, None)
    };
    let s = match args.s.trim() {
        "auto" => select_bandwidth_trace(&data, &args.search.to_config())?.bandwidth,
        text => Bandwidth::new(text.parse::<f64>().map_err(|_| {
            Error::Usage(format!("--s must be a number or 'auto', got '{text}'"))
        })?)?,
    };
    let cfg = TrainConfig {
        f: args.f,
        kkt_tol: args.kkt_tol,
        max_passes: args.max_passes,
        seed: args.search.seed,
    };
    let mut model = train_svdd(&data, s, &cfg)?;
    if let Some(st) = standardizer {
        model = model.with_standardizer(st);
    }
    write_file(&args.model, &model.to_json())?;
    println!("bandwidth: {}", model.bandwidth());
    println!("r_squared: {}", model.r_squared());
    println!(
        "support_vectors: {} / {}",
        model.support_count(),
        model.n_training()
    );
    Ok(())
}

fn load_model(path: &Path) -> Result<SvddModel> {
    SvddModel::from_json(&read_file(path)?)
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let table = read_table_at(&args.input)?;
    let scores = model.score_batch(&table.data)?;
    let csv = scored_csv(&table, &scores)?;
    match &args.output {
        Some(path) => {
            write_file(path, &csv)?;
            let flagged = scores.iter().filter(|s| s.is_outlier).count();
            println!("flagged {flagged} of {} points as outliers", scores.len());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let text = match args.kind {
        SimKind::TwoDonutsCircle => {
            if args.labeled {
                return Err(Error::Usage(
                    "the fixed 2-D scene has no labeled variant".into(),
                ));
            }
            write_matrix_csv(&two_donuts_circle(args.seed))
        }
        SimKind::Sphere | SimKind::Cube => {
            let kind = if args.kind == SimKind::Sphere {
                ShapeKind::Sphere
            } else {
                ShapeKind::Cube
            };
            let shape = ShapeSpec {
                kind,
                dim: args.dim,
                scale: args.scale,
                center: vec![0.0; args.dim],
                shell_width: args.shell_width,
            };
            if args.labeled {
                write_labeled_csv(&labeled_eval_set(
                    std::slice::from_ref(&shape),
                    args.n,
                    args.seed,
                )?)
            } else {
                write_matrix_csv(&sample_shape_interior(&shape, args.n, args.seed)?)
            }
        }
        SimKind::MultiSphere | SimKind::MultiCube => {
            let kind = if args.kind == SimKind::MultiSphere {
                ShapeKind::Sphere
            } else {
                ShapeKind::Cube
            };
            let scene = multi_shape(
                kind,
                args.shapes,
                args.dim,
                args.n,
                if args.labeled { args.n } else { 2 },
                args.shell_width,
                args.seed,
            )?;
            if args.labeled {
                write_labeled_csv(&scene.eval)
            } else {
                write_matrix_csv(&scene.train)
            }
        }
        SimKind::Polygon => {
            if args.labeled {
                return Err(Error::Usage(
                    "polygon scenes have no labeled variant; evaluation uses a lattice".into(),
                ));
            }
            let poly = random_polygon(&PolygonSpec::new(args.vertices, args.seed))?;
            write_matrix_csv(&sample_polygon_interior(&poly, args.n, args.seed)?)
        }
    };
    write_file(&args.output, &text)?;
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let text = read_file(&args.spec)?;
    let is_yaml = args
        .spec
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.eq_ignore_ascii_case("yaml") || e.eq_ignore_ascii_case("yml"))
        .unwrap_or(false);
    let spec: StudySpec = if is_yaml {
        let parsed: StudySpec = serde_yaml::from_str(&text)
            .map_err(|e| Error::Usage(format!("unparseable study spec: {e}")))?;
        parsed.validate()?;
        parsed
    } else {
        StudySpec::from_json(&text)?
    };
    let report = match args.jobs {
        Some(jobs) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| Error::Usage(format!("cannot build a {jobs}-thread pool: {e}")))?;
            pool.install(|| run_study(&spec))?
        }
        None => run_study(&spec)?,
    };
    let csv = report.to_csv();
    match &args.report {
        Some(path) => write_file(path, &csv)?,
        None => print!("{csv}"),
    }
    if let Some(path) = &args.summary {
        write_file(path, &report.summary_json())?;
    }
    Ok(())
}

fn cmd_grid(args: GridArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let table = read_table_at(&args.input)?;
    let rect = Rect::bounding(&table.data)?;
    let grid = grid_scoring_2d(&model, &rect, args.resolution)?;
    write_file(&args.output, &grid.to_csv())?;
    Ok(())
}
