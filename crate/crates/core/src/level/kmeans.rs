//! K-means, K-medians and the distortion-ratio estimate of K.

use rand::Rng as _;

use crate::rng::Rng;

pub const RESTARTS: usize = 10;
const MAX_ITERS: usize = 100;
/// f(K) must fall below this for K > 1 to be considered.
pub const DISTORTION_THRESHOLD: f64 = 0.85;

#[derive(Clone, Debug, PartialEq)]
pub struct Clustering {
    pub labels: Vec<usize>,
    pub centers: Vec<Vec<f64>>,
    pub cost: f64,
}

impl Clustering {
    pub fn k(&self) -> usize {
        self.centers.len()
    }
}

#[derive(Clone, Copy)]
enum Metric {
    /// Squared Euclidean distance, mean centers.
    Means,
    /// Manhattan distance, coordinate-wise median centers.
    Medians,
}

impl Metric {
    fn dist(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Means => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum(),
            Metric::Medians => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        }
    }

    fn center(self, members: &[&Vec<f64>], dims: usize) -> Vec<f64> {
        (0..dims)
            .map(|d| {
                let mut v: Vec<f64> = members.iter().map(|p| p[d]).collect();
                match self {
                    Metric::Means => v.iter().sum::<f64>() / v.len() as f64,
                    Metric::Medians => {
                        v.sort_by(f64::total_cmp);
                        let n = v.len();
                        if n % 2 == 1 {
                            v[n / 2]
                        } else {
                            (v[n / 2 - 1] + v[n / 2]) / 2.0
                        }
                    }
                }
            })
            .collect()
    }
}

/// Scale every dimension to zero mean and unit variance. Constant dimensions become 0.
pub fn zscore(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let Some(dims) = points.first().map(Vec::len) else {
        return Vec::new();
    };
    let n = points.len() as f64;
    let mut out = points.to_vec();
    for d in 0..dims {
        let mean = points.iter().map(|p| p[d]).sum::<f64>() / n;
        let var = points.iter().map(|p| (p[d] - mean).powi(2)).sum::<f64>() / n;
        let sd = var.sqrt();
        for p in &mut out {
            p[d] = if sd > 1e-12 { (p[d] - mean) / sd } else { 0.0 };
        }
    }
    out
}

fn nearest(metric: Metric, p: &[f64], centers: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = metric.dist(p, c);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

fn seed_centers(metric: Metric, points: &[Vec<f64>], k: usize, rng: &mut Rng) -> Vec<Vec<f64>> {
    let mut centers = vec![points[rng.gen_range(0..points.len())].clone()];
    while centers.len() < k {
        let weights: Vec<f64> = points.iter().map(|p| nearest(metric, p, &centers).1).collect();
        let total: f64 = weights.iter().sum();
        let idx = if total <= 0.0 {
            rng.gen_range(0..points.len())
        } else {
            let mut r = rng.gen::<f64>() * total;
            let mut chosen = points.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                if r < *w {
                    chosen = i;
                    break;
                }
                r -= w;
            }
            chosen
        };
        centers.push(points[idx].clone());
    }
    centers
}

fn run(metric: Metric, points: &[Vec<f64>], k: usize, rng: &mut Rng) -> Clustering {
    let dims = points[0].len();
    let mut centers = seed_centers(metric, points, k, rng);
    let mut labels = vec![usize::MAX; points.len()];
    for _ in 0..MAX_ITERS {
        let next: Vec<usize> = points.iter().map(|p| nearest(metric, p, &centers).0).collect();
        if next == labels {
            break;
        }
        labels = next;
        for (c, center) in centers.iter_mut().enumerate() {
            let members: Vec<&Vec<f64>> = points.iter().zip(&labels).filter(|(_, &l)| l == c).map(|(p, _)| p).collect();
            if !members.is_empty() {
                *center = metric.center(&members, dims);
            }
        }
    }
    let cost = points.iter().zip(&labels).map(|(p, &l)| metric.dist(p, &centers[l])).sum();
    canonical(Clustering { labels, centers, cost })
}

/// Renumber clusters by first appearance and drop empty ones.
fn canonical(c: Clustering) -> Clustering {
    let mut map = vec![usize::MAX; c.centers.len()];
    let mut centers = Vec::new();
    let labels = c
        .labels
        .iter()
        .map(|&l| {
            if map[l] == usize::MAX {
                map[l] = centers.len();
                centers.push(c.centers[l].clone());
            }
            map[l]
        })
        .collect();
    Clustering {
        labels,
        centers,
        cost: c.cost,
    }
}

fn best_of(metric: Metric, points: &[Vec<f64>], k: usize, restarts: usize, rng: &mut Rng) -> Clustering {
    assert!(!points.is_empty(), "clustering needs at least one point");
    let k = k.clamp(1, points.len());
    let mut best: Option<Clustering> = None;
    for _ in 0..restarts.max(1) {
        let c = run(metric, points, k, rng);
        let better = match &best {
            None => true,
            Some(b) => c.cost < b.cost - 1e-12 || ((c.cost - b.cost).abs() <= 1e-12 && c.labels < b.labels),
        };
        if better {
            best = Some(c);
        }
    }
    best.expect("at least one restart")
}

pub fn kmeans(points: &[Vec<f64>], k: usize, rng: &mut Rng) -> Clustering {
    best_of(Metric::Means, points, k, RESTARTS, rng)
}

pub fn kmedians(points: &[Vec<f64>], k: usize, rng: &mut Rng) -> Clustering {
    best_of(Metric::Medians, points, k, RESTARTS, rng)
}

/// Pham, Dimov and Nguyen's f(K) for K = 1..=k_max given the clustering cost
/// S_K at each K, over `dims`-dimensional data.
pub fn distortion_ratios(dims: usize, k_max: usize, mut cost: impl FnMut(usize) -> f64) -> Vec<f64> {
    let mut f = vec![1.0];
    let mut alpha = 0.0;
    let mut prev = cost(1);
    for k in 2..=k_max {
        alpha = if k == 2 {
            1.0 - 3.0 / (4.0 * dims as f64)
        } else {
            alpha + (1.0 - alpha) / 6.0
        };
        let s = cost(k);
        f.push(if prev.abs() <= 1e-12 { 1.0 } else { s / (alpha * prev) });
        prev = s;
    }
    f
}

/// K with the lowest f(K) among those below the threshold, or 1 when none is.
pub fn pick_k(ratios: &[f64]) -> usize {
    let mut best = (1, f64::INFINITY);
    for (i, &f) in ratios.iter().enumerate().skip(1) {
        if f < DISTORTION_THRESHOLD && f < best.1 {
            best = (i + 1, f);
        }
    }
    best.0
}

pub fn estimate_k(points: &[Vec<f64>], k_max: usize, rng: &mut Rng) -> usize {
    let k_max = k_max.min(points.len());
    let dims = points.first().map_or(0, Vec::len);
    if k_max <= 1 || dims == 0 {
        return 1;
    }
    pick_k(&distortion_ratios(dims, k_max, |k| kmeans(points, k, rng).cost))
}

pub fn estimate_k_medians(points: &[Vec<f64>], k_max: usize, rng: &mut Rng) -> usize {
    let k_max = k_max.min(points.len());
    let dims = points.first().map_or(0, Vec::len);
    if k_max <= 1 || dims == 0 {
        return 1;
    }
    pick_k(&distortion_ratios(dims, k_max, |k| kmedians(points, k, rng).cost))
}
