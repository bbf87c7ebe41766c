//! End-to-end orchestration: groups → points → Gram tensor → solver →
//! affinity → spectral clustering → accuracy, with artifacts on disk.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use log::{info, warn};
use serde::Serialize;

use super::config::{DataSource, PipelineConfig, SpectralConfig};
use super::dataset::{load_dataset, mnist_subgroups, ImageSetGroup};
use super::io::{write_gmat, write_labels_csv, write_points};
use super::synth::synth_grassmann;
use crate::clustering::{accuracy, affinity_from_w, spectral_cluster, ClusterAssignment};
use crate::error::{GlrrError, Result};
use crate::gram::{build_gram, GramTensor};
use crate::manifold::GrassmannPoint;
use crate::parallel::map_indices;
use crate::solver::{solve, write_history_csv, Solution, SolveStatus, SolverConfig};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize)]
pub struct StageTiming {
    pub stage: &'static str,
    pub seconds: f64,
}

fn stage<T>(name: &'static str, timings: &mut Vec<StageTiming>, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f().map_err(|e| GlrrError::Stage {
        stage: name,
        source: Box::new(e),
    })?;
    let seconds = start.elapsed().as_secs_f64();
    info!("stage {name}: {seconds:.3} s");
    timings.push(StageTiming { stage: name, seconds });
    Ok(out)
}

/// Result of clustering a set of Grassmann points.
#[derive(Clone, Debug)]
pub struct ClusterRun {
    pub gram: GramTensor,
    pub eta_b: f64,
    pub solution: Solution,
    pub labels: ClusterAssignment,
    pub timings: Vec<StageTiming>,
}

pub fn cluster_points(
    points: &[GrassmannPoint],
    solver: &SolverConfig,
    k: usize,
    spectral: &SpectralConfig,
) -> Result<ClusterRun> {
    let mut timings = Vec::new();
    let gram = stage("gram", &mut timings, || build_gram(points))?;
    let eta_b = gram.eta_b();
    let solution = stage("solve", &mut timings, || solve(&gram, solver))?;
    let labels = stage("spectral", &mut timings, || {
        spectral_cluster(&affinity_from_w(&solution.w), k, spectral.seed, spectral.variant)
    })?;
    Ok(ClusterRun {
        gram,
        eta_b,
        solution,
        labels,
        timings,
    })
}

/// Dominant `p`-subspace of every group, computed in parallel.
pub fn points_from_groups(groups: &[ImageSetGroup], p: usize) -> Result<Vec<GrassmannPoint>> {
    map_indices(groups.len(), |i| {
        GrassmannPoint::from_samples(&groups[i].samples, p).map_err(|e| match e {
            GlrrError::RankDeficient { .. } | GlrrError::Shape(_) => {
                GlrrError::Validation(format!("group `{}`: {e}", groups[i].id))
            }
            other => other,
        })
    })
    .into_iter()
    .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub accuracy: f64,
    pub n_points: usize,
    pub k: usize,
    pub p: usize,
    pub lambda: f64,
    pub spectral: SpectralConfig,
    /// Seed that generated the data or the random subgroups, when any.
    pub data_seed: Option<u64>,
    pub solver_status: SolveStatus,
    pub iterations: usize,
    pub final_constraint_residual: f64,
    pub final_beta_delta_w: f64,
    pub eta_b: f64,
    pub timings: Vec<StageTiming>,
    pub artifacts: BTreeMap<&'static str, PathBuf>,
    pub run_dir: PathBuf,
}

fn fresh_run_dir(base: &Path, timestamped: bool) -> Result<PathBuf> {
    std::fs::create_dir_all(base).map_err(|e| GlrrError::io(base, e))?;
    if !timestamped {
        return Ok(base.to_path_buf());
    }
    let millis = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    for attempt in 0.. {
        let name = if attempt == 0 {
            format!("run-{millis}")
        } else {
            format!("run-{millis}-{attempt}")
        };
        let dir = base.join(name);
        match std::fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(GlrrError::io(&dir, e)),
        }
    }
    unreachable!()
}

/// Write W (GMAT), labels, and the solver history into `dir`.
pub fn write_cluster_artifacts(dir: &Path, run: &ClusterRun) -> Result<BTreeMap<&'static str, PathBuf>> {
    let mut artifacts = BTreeMap::new();
    let w_path = dir.join("w.gmat");
    write_gmat(&w_path, run.solution.w.matrix())?;
    artifacts.insert("w", w_path);

    let labels_path = dir.join("labels.csv");
    write_labels_csv(&labels_path, run.labels.labels())?;
    artifacts.insert("labels", labels_path);

    let history_path = dir.join("history.csv");
    let file = File::create(&history_path).map_err(|e| GlrrError::io(&history_path, e))?;
    write_history_csv(&run.solution.state.history, BufWriter::new(file))
        .map_err(|e| GlrrError::io(&history_path, e))?;
    artifacts.insert("history", history_path);
    Ok(artifacts)
}

fn write_report_csv(path: &Path, report: &Report) -> Result<()> {
    let io = |e| GlrrError::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "key,value").map_err(io)?;
    let rows = [
        ("schema_version", report.schema_version.to_string()),
        ("accuracy", format!("{:.17}", report.accuracy)),
        ("n_points", report.n_points.to_string()),
        ("k", report.k.to_string()),
        ("p", report.p.to_string()),
        ("lambda", report.lambda.to_string()),
        ("solver_status", format!("{:?}", report.solver_status)),
        ("iterations", report.iterations.to_string()),
        ("final_constraint_residual", format!("{:e}", report.final_constraint_residual)),
        ("eta_b", format!("{:e}", report.eta_b)),
    ];
    for (k, v) in rows {
        writeln!(out, "{k},{v}").map_err(io)?;
    }
    for t in &report.timings {
        writeln!(out, "time_{},{:.6}", t.stage, t.seconds).map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Full pipeline. `config_text` is copied verbatim into the run directory.
pub fn run_pipeline(config: &PipelineConfig, config_text: &str) -> Result<Report> {
    config.validate()?;
    let solver = config.solver_config();
    let p = config.resolved_p();
    let mut timings = Vec::new();

    let (points, truth, data_seed) = match &config.data {
        DataSource::Synthetic(spec) => {
            let (points, truth) = stage("synthesize", &mut timings, || synth_grassmann(spec))?;
            (points, truth, Some(spec.seed))
        }
        source => {
            let groups = stage("load", &mut timings, || match source {
                DataSource::Directory { path, format } => load_dataset(path, *format),
                DataSource::Mnist(m) => mnist_subgroups(m),
                DataSource::Synthetic(_) => unreachable!(),
            })?;
            let points = stage("points", &mut timings, || points_from_groups(&groups, p))?;
            let truth = ClusterAssignment::from_labels(groups.iter().map(|g| g.label).collect());
            let seed = match source {
                DataSource::Mnist(m) => Some(m.seed),
                _ => None,
            };
            (points, truth, seed)
        }
    };

    let run = cluster_points(&points, &solver, config.k, &config.spectral)?;
    timings.extend(run.timings.iter().cloned());
    if run.solution.status == SolveStatus::MaxItersExceeded {
        warn!("clustering used a solver iterate that did not meet the stopping rule");
    }
    let acc = stage("evaluate", &mut timings, || accuracy(&run.labels, &truth))?;

    let run_dir = fresh_run_dir(&config.output.dir, config.output.timestamped)?;
    let mut artifacts = write_cluster_artifacts(&run_dir, &run)?;
    let truth_path = run_dir.join("truth.csv");
    write_labels_csv(&truth_path, truth.labels())?;
    artifacts.insert("truth", truth_path);
    let points_path = run_dir.join("points.gmat");
    write_points(&points_path, &points, Some(truth.labels()))?;
    artifacts.insert("points", points_path);
    let config_path = run_dir.join("config.toml");
    std::fs::write(&config_path, config_text).map_err(|e| GlrrError::io(&config_path, e))?;
    artifacts.insert("config", config_path);

    let last = run.solution.state.history.last().copied();
    let mut report = Report {
        schema_version: REPORT_SCHEMA_VERSION,
        accuracy: acc,
        n_points: points.len(),
        k: config.k,
        p,
        lambda: solver.lambda,
        spectral: config.spectral.clone(),
        data_seed,
        solver_status: run.solution.status,
        iterations: run.solution.state.iteration,
        final_constraint_residual: last.map_or(f64::NAN, |r| r.constraint_residual),
        final_beta_delta_w: last.map_or(f64::NAN, |r| r.beta * r.delta_w),
        eta_b: run.eta_b,
        timings,
        artifacts,
        run_dir: run_dir.clone(),
    };
    let csv_path = run_dir.join("report.csv");
    let json_path = run_dir.join("report.json");
    report.artifacts.insert("report_csv", csv_path.clone());
    report.artifacts.insert("report_json", json_path.clone());
    write_report_csv(&csv_path, &report)?;
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| GlrrError::NumericalFailure(format!("report serialization: {e}")))?;
    std::fs::write(&json_path, json).map_err(|e| GlrrError::io(&json_path, e))?;
    Ok(report)
}
