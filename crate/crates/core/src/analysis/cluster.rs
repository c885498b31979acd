use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::cardset::{CardDatabase, CardId};
use crate::cpr::EmbeddingModel;

const MAX_ITERATIONS: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansResult {
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Within-cluster sum of squared distances.
    pub wcss: f64,
    pub iterations: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(point, c);
        if d < best.0 {
            best = (d, j);
        }
    }
    best.1
}

/// Lloyd's algorithm from `k` distinct sampled points. An empty cluster keeps
/// its previous centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut impl Rng) -> Result<KMeansResult, AnalysisError> {
    if k == 0 || k > points.len() {
        return Err(AnalysisError::BadK { k, points: points.len() });
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(AnalysisError::Degenerate("points of different dimension"));
    }
    let mut centroids: Vec<Vec<f64>> = sample(rng, points.len(), k).iter().map(|i| points[i].clone()).collect();
    let mut assignment: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignment) {
            counts[a] += 1;
            sums[a].iter_mut().zip(p).for_each(|(s, v)| *s += v);
        }
        for ((c, s), &n) in centroids.iter_mut().zip(sums).zip(&counts) {
            if n > 0 {
                *c = s.into_iter().map(|v| v / n as f64).collect();
            }
        }
        let next: Vec<usize> = points.iter().map(|p| nearest(p, &centroids)).collect();
        if next == assignment {
            break;
        }
        assignment = next;
    }
    let wcss = points.iter().zip(&assignment).map(|(p, &a)| sq_dist(p, &centroids[a])).sum();
    Ok(KMeansResult { assignment, centroids, wcss, iterations })
}

/// Mean over non-empty clusters of the fraction held by the cluster's most
/// common label.
pub fn label_purity(assignment: &[usize], labels: &[usize]) -> f64 {
    let k = assignment.iter().max().map_or(0, |m| m + 1);
    let n_labels = labels.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0usize; n_labels]; k];
    for (&a, &l) in assignment.iter().zip(labels) {
        table[a][l] += 1;
    }
    let fractions: Vec<f64> = table
        .iter()
        .filter_map(|row| {
            let total: usize = row.iter().sum();
            (total > 0).then(|| *row.iter().max().expect("nonempty") as f64 / total as f64)
        })
        .collect();
    fractions.iter().sum::<f64>() / fractions.len().max(1) as f64
}

/// Clusters the mono-colored cards' embeddings with k = number of distinct
/// mono colors and reports [`label_purity`] against their colors.
pub fn color_cluster_purity(
    model: &EmbeddingModel,
    db: &CardDatabase,
    rng: &mut impl Rng,
) -> Result<f64, AnalysisError> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for card in db.cards() {
        if let Some(color) = card.colors.mono() {
            points.push(model.candidate_embedding(card.id)?.to_vec());
            labels.push(color.index());
        }
    }
    let k = labels.iter().collect::<BTreeSet<_>>().len();
    if k == 0 || points.len() < k {
        return Err(AnalysisError::TooFew { needed: k.max(1), got: points.len() });
    }
    let result = kmeans(&points, k, rng)?;
    Ok(label_purity(&result.assignment, &labels))
}

/// Top-two principal axes of a point set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub mean: Vec<f64>,
    pub axes: [Vec<f64>; 2],
    /// Variance along each axis.
    pub variance: [f64; 2],
    pub points: Vec<[f64; 2]>,
}

impl Projection {
    /// Coordinates of any vector in the projected plane.
    pub fn project(&self, v: &[f64]) -> [f64; 2] {
        let centered: Vec<f64> = v.iter().zip(&self.mean).map(|(x, m)| x - m).collect();
        [dot(&centered, &self.axes[0]), dot(&centered, &self.axes[1])]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, v)).collect()
}

fn remove_component(v: &mut [f64], axis: Option<&[f64]>) {
    if let Some(u) = axis {
        let p = dot(v, u);
        v.iter_mut().zip(u).for_each(|(x, q)| *x -= p * q);
    }
}

/// Leading unit eigenvector of a symmetric PSD matrix restricted to the
/// complement of `orthogonal_to`, by power iteration. Starts from the
/// largest column so the start lies in the range. The sign is fixed so the
/// largest-magnitude coordinate is positive.
fn leading_axis(m: &[Vec<f64>], orthogonal_to: Option<&[f64]>, tolerance: f64) -> Vec<f64> {
    let dim = m.len();
    let mut v = (0..dim)
        .map(|j| {
            let mut col: Vec<f64> = m.iter().map(|row| row[j]).collect();
            remove_component(&mut col, orthogonal_to);
            col
        })
        .max_by(|a, b| dot(a, a).total_cmp(&dot(b, b)))
        .expect("dim >= 1");
    if normalize(&mut v) <= tolerance {
        // nothing left in the complement: any unit vector in it will do
        for i in 0..dim {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            remove_component(&mut e, orthogonal_to);
            if normalize(&mut e) > 1e-6 {
                v = e;
                break;
            }
        }
    } else {
        for _ in 0..10_000 {
            let mut next = mat_vec(m, &v);
            remove_component(&mut next, orthogonal_to);
            if normalize(&mut next) <= tolerance {
                break;
            }
            let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            v = next;
            if delta < 1e-13 {
                break;
            }
        }
    }
    let lead = v.iter().copied().fold(0.0f64, |acc, x| if x.abs() > acc.abs() { x } else { acc });
    if lead < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

/// Centers the points and projects them onto their top-two principal axes.
pub fn project_2d(points: &[Vec<f64>]) -> Result<Projection, AnalysisError> {
    if points.len() < 2 {
        return Err(AnalysisError::TooFew { needed: 2, got: points.len() });
    }
    let dim = points[0].len();
    if dim < 2 {
        return Err(AnalysisError::Degenerate("need at least two dimensions"));
    }
    if points.iter().any(|p| p.len() != dim) {
        return Err(AnalysisError::Degenerate("points of different dimension"));
    }
    let n = points.len() as f64;
    let mean: Vec<f64> = (0..dim).map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n).collect();
    let centered: Vec<Vec<f64>> = points.iter().map(|p| p.iter().zip(&mean).map(|(x, m)| x - m).collect()).collect();
    if centered.iter().all(|p| p.iter().all(|&x| x == 0.0)) {
        return Err(AnalysisError::Degenerate("all points are equal"));
    }
    let mut cov = vec![vec![0.0; dim]; dim];
    for p in &centered {
        for i in 0..dim {
            for j in 0..dim {
                cov[i][j] += p[i] * p[j] / n;
            }
        }
    }
    let scale = cov.iter().flatten().fold(0.0f64, |a, &b| a.max(b.abs()));
    let tolerance = 1e-12 * scale;
    let first = leading_axis(&cov, None, tolerance);
    let lambda1 = dot(&first, &mat_vec(&cov, &first));
    let second = leading_axis(&cov, Some(&first), tolerance);
    let lambda2 = dot(&second, &mat_vec(&cov, &second)).max(0.0);
    let projected = centered.iter().map(|c| [dot(c, &first), dot(c, &second)]).collect();
    Ok(Projection { mean, axes: [first, second], variance: [lambda1, lambda2], points: projected })
}

/// Embeddings of every card, by id.
pub(crate) fn all_candidate_embeddings(model: &EmbeddingModel) -> Result<Vec<Vec<f64>>, AnalysisError> {
    (0..model.n_cards()).map(|i| Ok(model.candidate_embedding(CardId::from(i))?.to_vec())).collect()
}
