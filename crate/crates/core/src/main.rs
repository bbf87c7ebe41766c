use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{info, warn};

use glrr::clustering::{accuracy, contingency_table, format_contingency, ClusterAssignment, SpectralVariant};
use glrr::pipeline::io::{
    read_labels_csv, read_points, write_gmat, write_group_labels_csv, write_labels_csv, write_points,
};
use glrr::pipeline::run::write_cluster_artifacts;
use glrr::pipeline::{
    cluster_points, load_dataset, points_from_groups, run_pipeline, synth_grassmann, DatasetFormat,
    PipelineConfig, SpectralConfig, SyntheticSpec,
};
use glrr::solver::SolveStatus;
use glrr::{GlrrError, Result, SolverConfig};

#[derive(Parser)]
#[command(name = "glrr", version, about = "Low-rank representation clustering on the Grassmann manifold")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic subspace clusters as GMAT groups plus labels.csv.
    Synth {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        per_cluster: usize,
        #[arg(long)]
        d: usize,
        #[arg(long)]
        p: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Build Grassmann points from grouped samples.
    Points {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, default_value_t = 10)]
        p: usize,
        #[arg(long, default_value = "gmat-dir")]
        format: DatasetFormat,
        #[arg(long)]
        out: PathBuf,
    },
    /// Gram tensor, solver and spectral clustering on a points file.
    Cluster {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        lambda: f64,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "njw")]
        variant: VariantArg,
        #[arg(long)]
        max_iters: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Hungarian-matched accuracy of predicted labels against truth.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Full pipeline from a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum VariantArg {
    Njw,
    ShiMalik,
}

impl From<VariantArg> for SpectralVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Njw => SpectralVariant::Njw,
            VariantArg::ShiMalik => SpectralVariant::ShiMalik,
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| GlrrError::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn synth(spec: SyntheticSpec, out: &Path) -> Result<()> {
    let (points, truth) = synth_grassmann(&spec)?;
    create_dir(out)?;
    let mut rows = Vec::with_capacity(points.len());
    for (i, (pt, &label)) in points.iter().zip(truth.labels()).enumerate() {
        let id = format!("g{i:05}");
        write_gmat(&out.join(format!("{id}.gmat")), pt.basis())?;
        rows.push((id, label));
    }
    write_group_labels_csv(&out.join("labels.csv"), &rows)?;
    println!("wrote {} groups to {}", points.len(), out.display());
    Ok(())
}

fn points(input: &Path, p: usize, format: DatasetFormat, out: &Path) -> Result<()> {
    let groups = load_dataset(input, format)?;
    let pts = points_from_groups(&groups, p)?;
    let labels: Vec<usize> = groups.iter().map(|g| g.label).collect();
    write_points(out, &pts, Some(&labels))?;
    println!("wrote {} points on G({p},{}) to {}", pts.len(), pts[0].ambient_dim(), out.display());
    Ok(())
}

fn cluster(
    points_path: &Path,
    solver: SolverConfig,
    k: usize,
    spectral: SpectralConfig,
    out: &Path,
) -> Result<()> {
    let (pts, truth) = read_points(points_path)?;
    let run = cluster_points(&pts, &solver, k, &spectral)?;
    create_dir(out)?;
    write_cluster_artifacts(out, &run)?;
    if let Some(truth) = truth {
        write_labels_csv(&out.join("truth.csv"), &truth)?;
        let acc = accuracy(&run.labels, &ClusterAssignment::from_labels(truth))?;
        println!("accuracy {acc:.6}");
    }
    if run.solution.status == SolveStatus::MaxItersExceeded {
        warn!("solver hit the iteration cap");
    }
    println!(
        "{:?} after {} iterations; artifacts in {}",
        run.solution.status,
        run.solution.state.iteration,
        out.display()
    );
    Ok(())
}

fn eval(pred: &Path, truth: &Path) -> Result<()> {
    let pred = ClusterAssignment::from_labels(read_labels_csv(pred)?);
    let truth = ClusterAssignment::from_labels(read_labels_csv(truth)?);
    let acc = accuracy(&pred, &truth)?;
    println!("{acc:.6}");
    eprint!("{}", format_contingency(&contingency_table(&pred, &truth)?));
    Ok(())
}

fn run(config_path: &Path) -> Result<()> {
    let (config, text) = PipelineConfig::from_file(config_path)?;
    let report = run_pipeline(&config, &text)?;
    info!("report written to {}", report.run_dir.display());
    println!("accuracy {:.6}", report.accuracy);
    println!("run directory {}", report.run_dir.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth {
            k,
            per_cluster,
            d,
            p,
            noise,
            seed,
            out,
        } => synth(
            SyntheticSpec {
                k,
                per_cluster,
                d,
                p,
                noise,
                seed,
            },
            &out,
        ),
        Command::Points { input, p, format, out } => points(&input, p, format, &out),
        Command::Cluster {
            points,
            lambda,
            k,
            seed,
            variant,
            max_iters,
            out,
        } => {
            let mut solver = SolverConfig::with_lambda(lambda);
            if let Some(m) = max_iters {
                solver.max_iters = m;
            }
            let spectral = SpectralConfig {
                variant: variant.into(),
                seed,
            };
            if k < 2 {
                return Err(GlrrError::Validation(format!("k must be at least 2, got {k}")));
            }
            cluster(&points, solver, k, spectral, &out)
        }
        Command::Eval { pred, truth } => eval(&pred, &truth),
        Command::Run { config } => run(&config),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let threads = match std::env::var("GLRR_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) => n,
            Err(_) => {
                eprintln!("error: GLRR_THREADS must be a nonnegative integer, got `{v}`");
                return ExitCode::from(2);
            }
        },
        Err(_) => 0,
    };
    glrr::parallel::init_threads(threads);

    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
