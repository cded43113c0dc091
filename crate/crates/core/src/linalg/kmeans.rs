//! Seeded k-means: k-means++ seeding, Lloyd iterations, several restarts.

use rand::Rng;

use crate::rng::seeded;

#[derive(Debug, Clone, Copy)]
pub struct KMeansConfig {
    pub restarts: usize,
    pub max_iter: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig { restarts: 20, max_iter: 100 }
    }
}

#[derive(Debug, Clone)]
pub struct Clustering {
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; ties go to the lowest index.
pub fn nearest(point: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, center) in centroids.iter().enumerate() {
        let d = sq_dist(point, center);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Clusters the rows of a row-major `points` array of width `dim` into
/// exactly `k` non-empty clusters (`k <= number of rows`).
///
/// The best of `restarts` runs by within-cluster sum of squares wins, the
/// earliest run on ties. When a cluster empties, the point farthest from its
/// centroid (among clusters with at least two members) moves into it.
/// Labels are renumbered in order of first appearance.
pub fn kmeans(points: &[f64], dim: usize, k: usize, seed: u64, cfg: KMeansConfig) -> Clustering {
    let n = points.len().checked_div(dim).unwrap_or(0);
    assert!(k >= 1 && k <= n.max(1), "k-means needs 1 <= k <= n (k = {k}, n = {n})");
    let rows: Vec<&[f64]> = points.chunks(dim.max(1)).take(n).collect();
    if k == 1 || n == 0 {
        let mut centroid = vec![0.0; dim];
        for r in &rows {
            centroid.iter_mut().zip(r.iter()).for_each(|(c, x)| *c += x / n as f64);
        }
        let inertia = rows.iter().map(|r| sq_dist(r, &centroid)).sum();
        return Clustering { labels: vec![0; n], centroids: vec![centroid], inertia };
    }
    let mut rng = seeded(seed);
    let mut best: Option<Clustering> = None;
    for _ in 0..cfg.restarts.max(1) {
        let init = plus_plus(&rows, k, &mut rng);
        let run = lloyd(&rows, init, cfg.max_iter);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    relabel(best.unwrap())
}

fn plus_plus<R: Rng>(rows: &[&[f64]], k: usize, rng: &mut R) -> Vec<Vec<f64>> {
    let n = rows.len();
    let mut centers = vec![rows[rng.random_range(0..n)].to_vec()];
    let mut d2: Vec<f64> = rows.iter().map(|r| sq_dist(r, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let c = rows[pick].to_vec();
        for (d, r) in d2.iter_mut().zip(rows) {
            *d = d.min(sq_dist(r, &c));
        }
        centers.push(c);
    }
    centers
}

fn centroids_of(rows: &[&[f64]], labels: &[usize], k: usize, dim: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (r, &l) in rows.iter().zip(labels) {
        counts[l] += 1;
        sums[l].iter_mut().zip(r.iter()).for_each(|(s, x)| *s += x);
    }
    for (s, &c) in sums.iter_mut().zip(&counts) {
        if c > 0 {
            s.iter_mut().for_each(|x| *x /= c as f64);
        }
    }
    (sums, counts)
}

/// Moves far points into empty clusters until none is empty.
fn repair_empty(rows: &[&[f64]], labels: &mut [usize], k: usize) -> Vec<Vec<f64>> {
    let dim = rows.first().map_or(0, |r| r.len());
    loop {
        let (centroids, counts) = centroids_of(rows, labels, k, dim);
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return centroids;
        };
        let mut far = (usize::MAX, -1.0);
        for (i, r) in rows.iter().enumerate() {
            if counts[labels[i]] < 2 {
                continue;
            }
            let d = sq_dist(r, &centroids[labels[i]]);
            if d > far.1 {
                far = (i, d);
            }
        }
        labels[far.0] = empty;
    }
}

fn lloyd(rows: &[&[f64]], mut centroids: Vec<Vec<f64>>, max_iter: usize) -> Clustering {
    let k = centroids.len();
    let mut labels: Vec<usize> = rows.iter().map(|r| nearest(r, &centroids).0).collect();
    centroids = repair_empty(rows, &mut labels, k);
    for _ in 0..max_iter {
        let mut changed = false;
        for (i, r) in rows.iter().enumerate() {
            let (c, _) = nearest(r, &centroids);
            if c != labels[i] {
                labels[i] = c;
                changed = true;
            }
        }
        centroids = repair_empty(rows, &mut labels, k);
        if !changed {
            break;
        }
    }
    let inertia = rows.iter().zip(&labels).map(|(r, &l)| sq_dist(r, &centroids[l])).sum();
    Clustering { labels, centroids, inertia }
}

fn relabel(c: Clustering) -> Clustering {
    let k = c.centroids.len();
    let mut map = vec![usize::MAX; k];
    let mut next = 0;
    for &l in &c.labels {
        if map[l] == usize::MAX {
            map[l] = next;
            next += 1;
        }
    }
    let mut centroids = vec![Vec::new(); k];
    for (old, &new) in map.iter().enumerate() {
        centroids[new] = c.centroids[old].clone();
    }
    Clustering { labels: c.labels.iter().map(|&l| map[l]).collect(), centroids, inertia: c.inertia }
}
