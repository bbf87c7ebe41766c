//! Acceptance suite. Prints one line per criterion and exits nonzero when any
//! criterion fails. Run with `cargo test -p glrr --test acceptance`.

mod common;

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use common::{nuclear_norm, random_orthogonal, random_point, random_tangent, singular_values};
use glrr::clustering::accuracy;
use glrr::linalg::gaussian_matrix;
use glrr::pipeline::{cluster_points, run_pipeline, synth_grassmann, PipelineConfig, SpectralConfig, SyntheticSpec};
use glrr::solver::{gradient_f, solve, step, svt, CoefficientMatrix, SolveStatus, SolverConfig, SolverState};
use glrr::{build_gram, GramTensor};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

enum Verdict {
    Pass(String),
    Fail(String),
    Skip(String),
}

fn verdict(ok: bool, detail: String) -> Verdict {
    if ok {
        Verdict::Pass(detail)
    } else {
        Verdict::Fail(detail)
    }
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

/// Principal angles from `atan2(sin, cos)`, with cosines and sines taken as
/// singular values of `XᵀY` and `(I − XXᵀ)Y` by the Jacobi oracle.
fn oracle_angles(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Vec<f64> {
    let cos = singular_values(&(x.transpose() * y));
    let mut sin = singular_values(&(y - x * (x.transpose() * y)));
    sin.reverse();
    cos.iter().zip(&sin).map(|(c, s)| s.atan2(*c)).collect()
}

fn geometry_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let cap = std::f64::consts::FRAC_PI_2 - 0.1;
    let (mut roundtrip, mut horizontal, mut norm_gap) = (0.0f64, 0.0f64, 0.0f64);
    let mut pairs = 0;
    for (d, p) in [(10, 3), (40, 5)] {
        for _ in 0..200 {
            let x = random_point(&mut rng, d, p);
            let h = random_tangent(&mut rng, &x, cap);
            let y = match x.exp_map(&h) {
                Ok(y) => y,
                Err(e) => return Verdict::Fail(format!("exp_map failed on G({p},{d}): {e}")),
            };
            let back = match x.log_map(&y) {
                Ok(v) => v,
                Err(e) => return Verdict::Fail(format!("log_map failed on G({p},{d}): {e}")),
            };
            roundtrip = roundtrip.max((back.matrix() - h.matrix()).norm());
            horizontal = horizontal.max(back.horizontality_residual());
            let theta = oracle_angles(x.basis(), y.basis());
            let expected = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
            norm_gap = norm_gap.max((back.norm() - expected).abs());
            pairs += 1;
        }
    }
    let elapsed = start.elapsed();
    verdict(
        roundtrip < 1e-8 && horizontal < 1e-10 && norm_gap < 1e-8 && elapsed < Duration::from_secs(10),
        format!(
            "{pairs} pairs: roundtrip {roundtrip:.2e}, horizontality {horizontal:.2e}, norm vs angles {norm_gap:.2e}, {:.2} s",
            secs(elapsed)
        ),
    )
}

fn representative_invariance() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let pts: Vec<_> = (0..8).map(|_| random_point(&mut rng, 12, 3)).collect();
        let moved: Vec<_> = pts
            .iter()
            .map(|x| x.right_act(&random_orthogonal(&mut rng, 3)).unwrap())
            .collect();
        let (a, b) = match (build_gram(&pts), build_gram(&moved)) {
            (Ok(a), Ok(b)) => (a, b),
            (Err(e), _) | (_, Err(e)) => return Verdict::Fail(format!("gram failed: {e}")),
        };
        for (sa, sb) in a.slices().iter().zip(b.slices()) {
            worst = worst.max((sa - sb).amax());
        }
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-8 && elapsed < Duration::from_secs(30),
        format!("100 trials, N = 8: max entry change {worst:.2e}, {:.2} s", secs(elapsed)),
    )
}

/// First summation of the augmented Lagrangian, term by term.
fn smooth_part(w: &DMatrix<f64>, b: &GramTensor, y: &DVector<f64>, beta: f64) -> f64 {
    let n = w.nrows();
    let mut total = 0.0;
    for i in 0..n {
        let mut quad = 0.0;
        for j in 0..n {
            for k in 0..n {
                quad += w[(i, j)] * b.slice(i)[(j, k)] * w[(i, k)];
            }
        }
        let r = (0..n).map(|j| w[(i, j)]).sum::<f64>() - 1.0;
        total += 0.5 * quad + y[i] * r + 0.5 * beta * r * r;
    }
    total
}

fn gradient_check() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let n = 6;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let slices = (0..n)
            .map(|_| {
                let g = gaussian_matrix(&mut rng, n + 2, n);
                g.transpose() * g
            })
            .collect();
        let b = GramTensor::from_slices(slices).unwrap();
        let w = gaussian_matrix(&mut rng, n, n);
        let y = DVector::from_fn(n, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let beta = 10f64.powf(rng.random::<f64>() * 4.0 - 2.0);
        let g = gradient_f(&w, &b, &y, beta).unwrap();
        for i in 0..n {
            for j in 0..n {
                let h = 1e-6 * (1.0 + w[(i, j)].abs());
                let mut plus = w.clone();
                plus[(i, j)] += h;
                let mut minus = w.clone();
                minus[(i, j)] -= h;
                let fd = (smooth_part(&plus, &b, &y, beta) - smooth_part(&minus, &b, &y, beta)) / (2.0 * h);
                worst = worst.max((g[(i, j)] - fd).abs() / fd.abs().max(1.0));
            }
        }
    }
    verdict(worst <= 1e-5, format!("50 instances, N = 6: max relative error {worst:.2e}"))
}

fn svt_correctness() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1004);
    let diag = svt(&DMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 1.0, 0.2])), 0.5).unwrap();
    let diag_err = (diag - DMatrix::from_diagonal(&DVector::from_vec(vec![2.5, 0.5, 0.0]))).amax();

    let mut prox_violations = 0;
    for _ in 0..20 {
        let m = gaussian_matrix(&mut rng, 6, 5);
        let tau = rng.random::<f64>() * 2.0;
        let z = svt(&m, tau).unwrap();
        let value = |x: &DMatrix<f64>| tau * nuclear_norm(x) + 0.5 * (x - &m).norm_squared();
        let best = value(&z);
        for t in 0..1000 {
            let scale = 10f64.powi(-(t % 5) - 1);
            if value(&(&z + gaussian_matrix(&mut rng, 6, 5) * scale)) < best - 1e-12 {
                prox_violations += 1;
            }
        }
    }

    let mut expansion = f64::NEG_INFINITY;
    for _ in 0..100 {
        let a = gaussian_matrix(&mut rng, 5, 5);
        let b = &a + gaussian_matrix(&mut rng, 5, 5) * 10f64.powf(-3.0 * rng.random::<f64>());
        let tau = rng.random::<f64>() * 3.0;
        let gap = (svt(&a, tau).unwrap() - svt(&b, tau).unwrap()).norm() - (a - b).norm();
        expansion = expansion.max(gap);
    }
    verdict(
        diag_err < 1e-12 && prox_violations == 0 && expansion <= 1e-12,
        format!(
            "diagonal error {diag_err:.1e}, prox violations {prox_violations}/20000, worst expansion {expansion:.1e}"
        ),
    )
}

fn solver_contract() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    let mut problems: Vec<(String, GramTensor, SolverConfig)> = Vec::new();
    for trial in 0..4 {
        let (pts, _) = synth_grassmann(&SyntheticSpec {
            k: 2,
            per_cluster: 4,
            d: 20,
            p: 3,
            noise: 0.05,
            seed: 70 + trial,
        })
        .unwrap();
        problems.push((format!("synthetic {trial}"), build_gram(&pts).unwrap(), SolverConfig::with_lambda(0.3)));
    }
    let pts: Vec<_> = (0..6).map(|_| random_point(&mut rng, 10, 2)).collect();
    problems.push(("random points".into(), build_gram(&pts).unwrap(), SolverConfig::with_lambda(0.1)));
    problems.push(("zero tensor".into(), GramTensor::zeros(5), SolverConfig::with_lambda(0.01)));
    let fast = SolverConfig {
        beta0: 1e5,
        ..SolverConfig::with_lambda(0.3)
    };
    problems.push(("large initial beta".into(), GramTensor::zeros(4), fast));

    let mut converged = 0;
    let mut max_beta = 0.0f64;
    for (name, b, config) in &problems {
        let sol = match solve(b, config) {
            Ok(s) => s,
            Err(e) => return Verdict::Fail(format!("{name}: {e}")),
        };
        max_beta = sol
            .state
            .history
            .iter()
            .map(|r| r.beta)
            .fold(max_beta.max(sol.state.beta), f64::max);
        if sol.status != SolveStatus::Converged {
            continue;
        }
        converged += 1;
        let last = sol.state.history.last().unwrap();
        let row_residual = (sol.w.matrix() * DVector::from_element(b.n_points(), 1.0)).add_scalar(-1.0).norm();
        if last.beta * last.delta_w > 1e-4 || row_residual > 1e-4 {
            return Verdict::Fail(format!(
                "{name}: stopped with beta*dW {:.2e}, residual {row_residual:.2e}",
                last.beta * last.delta_w
            ));
        }
    }
    // From a stationary feasible point the ρ₀ growth must clamp at β_max.
    let n = 4;
    let config = SolverConfig::with_lambda(0.0);
    let mut state = SolverState::initial(n, &config);
    state.w = CoefficientMatrix(DMatrix::from_element(n, n, 1.0 / n as f64));
    state.beta = 9e5;
    let b = GramTensor::zeros(n);
    let capped = step(state, &b, b.eta_b(), &config).and_then(|s| step(s, &b, b.eta_b(), &config));
    let cap_beta = match capped {
        Ok(s) => s.beta,
        Err(e) => return Verdict::Fail(format!("cap probe: {e}")),
    };
    verdict(
        converged > 0 && max_beta <= 1e6 && cap_beta == 1e6,
        format!("{converged}/{} runs converged, all meet both tolerances; max beta {max_beta:.3e}; growth from 9e5 clamps to {cap_beta:e}", problems.len()),
    )
}

struct SyntheticRun {
    accuracy: f64,
    block_mass: f64,
    status: SolveStatus,
    iterations: usize,
    elapsed: Duration,
}

fn synthetic_run(noise: f64) -> glrr::Result<SyntheticRun> {
    let start = Instant::now();
    let (pts, truth) = synth_grassmann(&SyntheticSpec {
        k: 3,
        per_cluster: 10,
        d: 100,
        p: 10,
        noise,
        seed: 42,
    })?;
    let run = cluster_points(&pts, &SolverConfig::with_lambda(0.3), 3, &SpectralConfig::default())?;
    let acc = accuracy(&run.labels, &truth)?;
    let w = run.solution.w.matrix();
    let (mut inside, mut total) = (0.0, 0.0);
    for i in 0..w.nrows() {
        for j in 0..w.ncols() {
            total += w[(i, j)].abs();
            if truth.labels()[i] == truth.labels()[j] {
                inside += w[(i, j)].abs();
            }
        }
    }
    Ok(SyntheticRun {
        accuracy: acc,
        block_mass: inside / total,
        status: run.solution.status,
        iterations: run.solution.state.iteration,
        elapsed: start.elapsed(),
    })
}

fn end_to_end(noisy: &glrr::Result<SyntheticRun>, clean: &glrr::Result<SyntheticRun>) -> Verdict {
    match (noisy, clean) {
        (Ok(n), Ok(c)) => verdict(
            n.accuracy >= 0.95 && c.accuracy == 1.0 && n.elapsed.max(c.elapsed) < Duration::from_secs(60),
            format!(
                "sigma 0.03: accuracy {:.4} ({:?}, {} iters, {:.2} s); sigma 0: accuracy {:.4} ({:?}, {} iters, {:.2} s)",
                n.accuracy,
                n.status,
                n.iterations,
                secs(n.elapsed),
                c.accuracy,
                c.status,
                c.iterations,
                secs(c.elapsed)
            ),
        ),
        (Err(e), _) | (_, Err(e)) => Verdict::Fail(format!("run failed: {e}")),
    }
}

fn block_mass(noisy: &glrr::Result<SyntheticRun>) -> Verdict {
    match noisy {
        Ok(n) => verdict(n.block_mass >= 0.8, format!("in-block share of sum |W_ij| = {:.4}", n.block_mass)),
        Err(e) => Verdict::Fail(format!("run failed: {e}")),
    }
}

fn run_cli(config: &Path) -> Result<(String, PathBuf), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_glrr"))
        .arg("run")
        .arg("--config")
        .arg(config)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    let acc = stdout.lines().find_map(|l| l.strip_prefix("accuracy ")).map(str::to_string);
    let dir = stdout.lines().find_map(|l| l.strip_prefix("run directory ")).map(PathBuf::from);
    match (acc, dir) {
        (Some(a), Some(d)) => Ok((a, d)),
        _ => Err(format!("unexpected output: {stdout}")),
    }
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("run.toml");
    let text = "k = 3\nlambda = 0.3\n\n[data]\nkind = \"synthetic\"\nk = 3\nper_cluster = 10\nd = 100\np = 10\nnoise = 0.03\nseed = 42\n\n[spectral]\nseed = 7\n\n[output]\ndir = \"runs\"\n";
    std::fs::write(&config, text).unwrap();
    let (a, b) = match (run_cli(&config), run_cli(&config)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return Verdict::Fail(e),
    };
    let labels_a = std::fs::read(a.1.join("labels.csv"));
    let labels_b = std::fs::read(b.1.join("labels.csv"));
    let same_labels = matches!((&labels_a, &labels_b), (Ok(x), Ok(y)) if x == y);
    verdict(
        same_labels && a.0 == b.0 && a.1 != b.1,
        format!("labels.csv identical: {same_labels}; accuracy {} vs {}", a.0, b.0),
    )
}

fn mnist_dir() -> Option<PathBuf> {
    let dir = PathBuf::from(std::env::var_os("GLRR_MNIST_DIR")?);
    (dir.join("train-images-idx3-ubyte").is_file() && dir.join("train-labels-idx1-ubyte").is_file()).then_some(dir)
}

fn mnist() -> Verdict {
    let Some(dir) = mnist_dir() else {
        return Verdict::Skip(
            "set GLRR_MNIST_DIR to a directory with train-images-idx3-ubyte and train-labels-idx1-ubyte".into(),
        );
    };
    let start = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let text = format!(
        "preset = \"mnist\"\nk = 10\n\n[data]\nkind = \"mnist\"\nimages = {:?}\nlabels = {:?}\nper_group = 20\ngroups_per_class = 40\nseed = 0\n\n[spectral]\nvariant = \"shi-malik\"\n\n[output]\ndir = {:?}\n",
        dir.join("train-images-idx3-ubyte"),
        dir.join("train-labels-idx1-ubyte"),
        tmp.path().join("runs"),
    );
    let report = match PipelineConfig::from_toml(&text).and_then(|c| run_pipeline(&c, &text)) {
        Ok(r) => r,
        Err(e) => return Verdict::Fail(format!("pipeline failed: {e}")),
    };
    verdict(
        (report.accuracy - 0.9833).abs() <= 0.05,
        format!(
            "400 subgroups: accuracy {:.4} ({:?}, {} iters, {:.1} s)",
            report.accuracy,
            report.solver_status,
            report.iterations,
            secs(start.elapsed())
        ),
    )
}

fn main() {
    let noisy = synthetic_run(0.03);
    let clean = synthetic_run(0.0);
    let results = [
        ("geometry oracle", geometry_oracle()),
        ("representative invariance", representative_invariance()),
        ("gradient check", gradient_check()),
        ("SVT correctness", svt_correctness()),
        ("solver contract", solver_contract()),
        ("end-to-end synthetic clustering", end_to_end(&noisy, &clean)),
        ("block mass", block_mass(&noisy)),
        ("determinism", determinism()),
        ("MNIST reproduction", mnist()),
    ];
    let mut failed = 0;
    for (i, (name, v)) in results.iter().enumerate() {
        let (tag, detail) = match v {
            Verdict::Pass(d) => ("PASS", d),
            Verdict::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Verdict::Skip(d) => ("SKIP", d),
        };
        println!("criterion {} {tag} {name}: {detail}", i + 1);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
