//! From coefficient matrix to labels: symmetric affinity, normalized
//! spectral embedding, seeded k-means, and Hungarian-matched accuracy.

use nalgebra::DMatrix;
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GlrrError, Result};
use crate::linalg::sorted_symmetric_eigen;
use crate::parallel::map_indices;
use crate::solver::CoefficientMatrix;

pub const KMEANS_RESTARTS: usize = 20;
pub const KMEANS_MAX_ITERS: usize = 300;
pub const KMEANS_REL_TOL: f64 = 1e-9;
const MIN_DEGREE: f64 = 1e-12;

/// Symmetric, entrywise nonnegative similarity matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Affinity(DMatrix<f64>);

impl Affinity {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(GlrrError::Shape(format!("affinity must be square, got {:?}", a.shape())));
        }
        let n = a.nrows();
        for i in 0..n {
            for j in 0..n {
                let v = a[(i, j)];
                if !(v >= 0.0) || (v - a[(j, i)]).abs() > 1e-12 {
                    return Err(GlrrError::Validation(format!(
                        "affinity must be symmetric and nonnegative (entry {i},{j})"
                    )));
                }
            }
        }
        Ok(Affinity(a))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }
}

/// `(|W| + |Wᵀ|) / 2`.
pub fn affinity_from_w(w: &CoefficientMatrix) -> Affinity {
    let m = w.matrix();
    let n = m.nrows();
    Affinity(DMatrix::from_fn(n, n, |i, j| {
        // the same two operands in the same order for (i,j) and (j,i)
        let (lo, hi) = if i <= j { (m[(i, j)], m[(j, i)]) } else { (m[(j, i)], m[(i, j)]) };
        (lo.abs() + hi.abs()) / 2.0
    }))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClusterAssignment {
    labels: Vec<usize>,
    k: usize,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(GlrrError::Validation(format!("label {bad} out of range for k = {k}")));
        }
        Ok(ClusterAssignment { labels, k })
    }

    /// Labels may be any integers; `k` becomes `max + 1`.
    pub fn from_labels(labels: Vec<usize>) -> Self {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        ClusterAssignment { labels, k }
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralVariant {
    /// Symmetric normalized Laplacian, row-normalized embedding.
    #[default]
    Njw,
    /// Random-walk eigenvectors `D^{-1/2}u`, no row normalization.
    ShiMalik,
}

/// Normalized spectral clustering into `k` groups.
pub fn spectral_cluster(
    a: &Affinity,
    k: usize,
    seed: u64,
    variant: SpectralVariant,
) -> Result<ClusterAssignment> {
    let m = a.matrix();
    let n = m.nrows();
    if k < 2 || k > n {
        return Err(GlrrError::Validation(format!("need 2 ≤ k ≤ N, got k = {k}, N = {n}")));
    }
    if m.iter().all(|&v| v == 0.0) {
        return Err(GlrrError::DegenerateAffinity);
    }
    let inv_sqrt_deg: Vec<f64> = m
        .row_iter()
        .map(|r| 1.0 / r.sum().max(MIN_DEGREE).sqrt())
        .collect();
    let lap = DMatrix::from_fn(n, n, |i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta - inv_sqrt_deg[i] * m[(i, j)] * inv_sqrt_deg[j]
    });
    let lap = (&lap + lap.transpose()) * 0.5;
    let (_, vectors) = sorted_symmetric_eigen(&lap);
    let mut embedding = vectors.columns(0, k).into_owned();

    match variant {
        SpectralVariant::Njw => {
            for mut row in embedding.row_iter_mut() {
                let norm = row.norm();
                if norm > 0.0 {
                    row /= norm;
                }
            }
        }
        SpectralVariant::ShiMalik => {
            for (i, mut row) in embedding.row_iter_mut().enumerate() {
                row *= inv_sqrt_deg[i];
            }
        }
    }
    Ok(kmeans(&embedding, k, seed)?.assignment)
}

#[derive(Clone, Debug)]
pub struct KMeansResult {
    pub assignment: ClusterAssignment,
    pub centroids: DMatrix<f64>,
    pub inertia: f64,
}

fn sq_dist(points: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>, c: usize) -> f64 {
    points
        .row(i)
        .iter()
        .zip(centroids.row(c).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn plus_plus_init(points: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = points.nrows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut d2: Vec<f64> = (0..n)
        .map(|i| sq_dist(points, i, &points.rows(chosen[0], 1).into_owned(), 0))
        .collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in d2.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                pick = Some(i);
                if target < w {
                    break;
                }
                target -= w;
            }
            pick.expect("positive total weight")
        } else {
            // every point coincides with a center; take the first unused index
            (0..n).find(|i| !chosen.contains(i)).expect("k ≤ N")
        };
        chosen.push(next);
        let center = points.rows(next, 1).into_owned();
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(points, i, &center, 0));
        }
    }
    DMatrix::from_rows(&chosen.iter().map(|&i| points.row(i).into_owned()).collect::<Vec<_>>())
}

fn assign(points: &DMatrix<f64>, centroids: &DMatrix<f64>, labels: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (i, label) in labels.iter_mut().enumerate() {
        let (best, dist) = (0..centroids.nrows())
            .map(|c| (c, sq_dist(points, i, centroids, c)))
            .fold((0, f64::INFINITY), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
        *label = best;
        inertia += dist;
    }
    inertia
}

fn lloyd(points: &DMatrix<f64>, k: usize, seed: u64) -> KMeansResult {
    let (n, m) = points.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(points, k, &mut rng);
    let mut labels = vec![0usize; n];
    let mut inertia = assign(points, &centroids, &mut labels);

    for _ in 0..KMEANS_MAX_ITERS {
        let mut sums = DMatrix::<f64>::zeros(k, m);
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            let mut row = sums.row_mut(l);
            row += points.row(i);
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                let mut row = sums.row_mut(c);
                row /= counts[c] as f64;
            } else {
                // move an empty centroid onto the worst-served point
                let far = (0..n)
                    .map(|i| (i, sq_dist(points, i, &centroids, labels[i])))
                    .fold((0, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc })
                    .0;
                sums.set_row(c, &points.row(far));
            }
        }
        centroids = sums;
        let next = assign(points, &centroids, &mut labels);
        let change = (inertia - next).abs();
        inertia = next;
        if inertia == 0.0 || change <= KMEANS_REL_TOL * inertia {
            break;
        }
    }
    KMeansResult {
        assignment: ClusterAssignment { labels, k },
        centroids,
        inertia,
    }
}

/// k-means++ seeding plus Lloyd iterations, best inertia over
/// [`KMEANS_RESTARTS`] restarts seeded `seed, seed + 1, ...`.
pub fn kmeans(points: &DMatrix<f64>, k: usize, seed: u64) -> Result<KMeansResult> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(GlrrError::Validation(format!("need 1 ≤ k ≤ N, got k = {k}, N = {n}")));
    }
    let runs = map_indices(KMEANS_RESTARTS, |r| lloyd(points, k, seed.wrapping_add(r as u64)));
    let best = runs
        .into_iter()
        .reduce(|best, cur| if cur.inertia < best.inertia { cur } else { best })
        .expect("at least one restart");
    Ok(best)
}

/// `table[p][t]` counts points with predicted label `p` and true label `t`.
pub fn contingency_table(pred: &ClusterAssignment, truth: &ClusterAssignment) -> Result<Vec<Vec<usize>>> {
    if pred.len() != truth.len() {
        return Err(GlrrError::LengthMismatch(pred.len(), truth.len()));
    }
    let mut table = vec![vec![0usize; truth.k()]; pred.k()];
    for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
        table[p][t] += 1;
    }
    Ok(table)
}

pub fn format_contingency(table: &[Vec<usize>]) -> String {
    let mut out = String::from("pred\\true");
    if let Some(first) = table.first() {
        for t in 0..first.len() {
            out.push_str(&format!("\t{t}"));
        }
    }
    out.push('\n');
    for (p, row) in table.iter().enumerate() {
        out.push_str(&p.to_string());
        for v in row {
            out.push_str(&format!("\t{v}"));
        }
        out.push('\n');
    }
    out
}

/// Fraction of points labelled correctly under the best one-to-one matching
/// of predicted to true labels.
pub fn accuracy(pred: &ClusterAssignment, truth: &ClusterAssignment) -> Result<f64> {
    let table = contingency_table(pred, truth)?;
    if pred.is_empty() {
        return Err(GlrrError::Validation("cannot score an empty assignment".to_string()));
    }
    let size = pred.k().max(truth.k());
    let weights = Matrix::from_fn(size, size, |(p, t)| {
        table.get(p).and_then(|row| row.get(t)).copied().unwrap_or(0) as i64
    });
    let (matched, _) = kuhn_munkres(&weights);
    Ok(matched as f64 / pred.len() as f64)
}
