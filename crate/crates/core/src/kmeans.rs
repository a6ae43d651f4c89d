//! Seeded Lloyd's K-means with k-means++ initialization.
//!
//! Points are passed as a flat row-major `f64` slice together with their
//! dimension. Initialization draws its randomness from a hash of the seed,
//! the selection step and the point's coordinates (not its position), so
//! permuting the input only permutes the assignments.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{mix64, unit_open_closed};

pub const DEFAULT_MAX_ITER: usize = 100;
pub const DEFAULT_REL_TOL: f64 = 1e-6;

// Below this many points the assignment step runs serially.
const PARALLEL_MIN_POINTS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansParams {
    pub clusters: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl KMeansParams {
    pub fn new(clusters: usize, seed: u64) -> Self {
        Self {
            clusters,
            seed,
            max_iter: DEFAULT_MAX_ITER,
            rel_tol: DEFAULT_REL_TOL,
        }
    }
}

/// Output of a clustering run.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterResult {
    pub dim: usize,
    /// `clusters x dim` cluster means, row-major.
    pub centroids: Vec<f64>,
    /// `clusters x dim` population variances of each cluster's members.
    pub variances: Vec<f64>,
    pub assignments: Vec<usize>,
    /// Sum of squared distances from each point to its assigned centroid.
    pub objective: f64,
    pub iterations: usize,
    /// Objective after every centroid update, in order.
    pub objective_trace: Vec<f64>,
}

impl ClusterResult {
    pub fn clusters(&self) -> usize {
        self.centroids.len() / self.dim
    }

    pub fn centroid(&self, j: usize) -> &[f64] {
        &self.centroids[j * self.dim..(j + 1) * self.dim]
    }

    pub fn variance(&self, j: usize) -> &[f64] {
        &self.variances[j * self.dim..(j + 1) * self.dim]
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Nearest centroid, lowest index on ties.
#[inline]
fn nearest(point: &[f64], centroids: &[f64], dim: usize) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (j, c) in centroids.chunks_exact(dim).enumerate() {
        let d = sq_dist(point, c);
        if d < best_d {
            best = j;
            best_d = d;
        }
    }
    (best, best_d)
}

fn validate(points: &[f64], dim: usize, clusters: usize) -> Result<usize> {
    if dim == 0 {
        return Err(Error::InvalidParameter(
            "dimension must be at least 1".into(),
        ));
    }
    if !points.len().is_multiple_of(dim) {
        return Err(Error::InvalidShape(format!(
            "{} values do not form rows of dimension {dim}",
            points.len()
        )));
    }
    let m = points.len() / dim;
    if clusters == 0 || clusters > m {
        return Err(Error::InvalidClusterCount {
            clusters,
            points: m,
        });
    }
    if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            row: pos / dim,
            col: pos % dim,
        });
    }
    Ok(m)
}

fn point_hash(point: &[f64]) -> u64 {
    point
        .iter()
        .fold(0x6A09_E667_F3BC_C908, |h, v| mix64(h ^ v.to_bits()))
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    Ordering::Equal
}

/// k-means++ seeding. Each step selects the point minimising
/// `-ln(u) / weight`, with `u` a hash-derived uniform: this picks a point
/// with probability proportional to its weight and is independent of the
/// input order.
fn init_plus_plus(points: &[f64], dim: usize, clusters: usize, seed: u64) -> Vec<f64> {
    let hashes: Vec<u64> = points.chunks_exact(dim).map(point_hash).collect();
    let mut weights = vec![1.0f64; hashes.len()];
    let mut centroids = Vec::with_capacity(clusters * dim);
    for step in 0..clusters {
        let step_key = mix64(seed ^ mix64(step as u64 + 1));
        let all_zero = weights.iter().all(|&w| w == 0.0);
        let mut best: Option<(usize, f64)> = None;
        for (i, &h) in hashes.iter().enumerate() {
            let w = if all_zero { 1.0 } else { weights[i] };
            if w == 0.0 {
                continue;
            }
            let u = unit_open_closed(mix64(h ^ step_key));
            let key = -u.ln() / w;
            let better = match best {
                None => true,
                Some((b, bk)) => match key.total_cmp(&bk) {
                    Ordering::Less => true,
                    Ordering::Greater => false,
                    Ordering::Equal => {
                        lex_cmp(
                            &points[i * dim..(i + 1) * dim],
                            &points[b * dim..(b + 1) * dim],
                        ) == Ordering::Less
                    }
                },
            };
            if better {
                best = Some((i, key));
            }
        }
        let (chosen, _) = best.expect("at least one point");
        let c = points[chosen * dim..(chosen + 1) * dim].to_vec();
        for (w, p) in weights.iter_mut().zip(points.chunks_exact(dim)) {
            let d = sq_dist(p, &c);
            if step == 0 || d < *w {
                *w = d;
            }
        }
        centroids.extend_from_slice(&c);
    }
    centroids
}

fn assign(points: &[f64], dim: usize, centroids: &[f64], out: &mut [usize], dists: &mut [f64]) {
    let work = |(p, (a, d)): (&[f64], (&mut usize, &mut f64))| {
        let (j, dd) = nearest(p, centroids, dim);
        *a = j;
        *d = dd;
    };
    if out.len() >= PARALLEL_MIN_POINTS {
        points
            .par_chunks_exact(dim)
            .zip(out.par_iter_mut().zip(dists.par_iter_mut()))
            .for_each(work);
    } else {
        points
            .chunks_exact(dim)
            .zip(out.iter_mut().zip(dists.iter_mut()))
            .for_each(work);
    }
}

/// Moves the farthest point of a multi-member cluster into each empty
/// cluster, until none is empty.
fn repair_empty(
    points: &[f64],
    dim: usize,
    centroids: &mut [f64],
    assignments: &mut [usize],
    dists: &mut [f64],
    clusters: usize,
) {
    let mut counts = vec![0usize; clusters];
    for &a in assignments.iter() {
        counts[a] += 1;
    }
    while let Some(empty) = counts.iter().position(|&n| n == 0) {
        let mut far: Option<usize> = None;
        for i in 0..assignments.len() {
            if counts[assignments[i]] < 2 {
                continue;
            }
            if far.is_none_or(|f| dists[i] > dists[f]) {
                far = Some(i);
            }
        }
        let i = far.expect("clusters <= points guarantees a donor");
        counts[assignments[i]] -= 1;
        counts[empty] += 1;
        assignments[i] = empty;
        dists[i] = 0.0;
        centroids[empty * dim..(empty + 1) * dim].copy_from_slice(&points[i * dim..(i + 1) * dim]);
    }
}

fn update_means(points: &[f64], dim: usize, assignments: &[usize], clusters: usize) -> Vec<f64> {
    let mut sums = vec![0.0f64; clusters * dim];
    let mut counts = vec![0usize; clusters];
    for (p, &a) in points.chunks_exact(dim).zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums[a * dim..(a + 1) * dim].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (j, &n) in counts.iter().enumerate() {
        for s in &mut sums[j * dim..(j + 1) * dim] {
            *s /= n as f64;
        }
    }
    sums
}

fn objective_of(points: &[f64], dim: usize, centroids: &[f64], assignments: &[usize]) -> f64 {
    points
        .chunks_exact(dim)
        .zip(assignments)
        .map(|(p, &a)| sq_dist(p, &centroids[a * dim..(a + 1) * dim]))
        .sum()
}

fn population_variances(
    points: &[f64],
    dim: usize,
    centroids: &[f64],
    assignments: &[usize],
    clusters: usize,
) -> Vec<f64> {
    let mut acc = vec![0.0f64; clusters * dim];
    let mut counts = vec![0usize; clusters];
    for (p, &a) in points.chunks_exact(dim).zip(assignments) {
        counts[a] += 1;
        let mu = &centroids[a * dim..(a + 1) * dim];
        for ((s, v), m) in acc[a * dim..(a + 1) * dim].iter_mut().zip(p).zip(mu) {
            *s += (v - m) * (v - m);
        }
    }
    for (j, &n) in counts.iter().enumerate() {
        for s in &mut acc[j * dim..(j + 1) * dim] {
            *s /= n as f64;
        }
    }
    acc
}

/// Lloyd's algorithm from k-means++ seeding.
///
/// Iterates until the relative objective improvement drops below
/// `params.rel_tol`, the assignments stop changing, or `params.max_iter`
/// updates have run. The returned centroids are the exact means of the
/// returned assignments, and no cluster is empty.
pub fn kmeans(points: &[f64], dim: usize, params: &KMeansParams) -> Result<ClusterResult> {
    let c = params.clusters;
    let m = validate(points, dim, c)?;

    let mut centroids = init_plus_plus(points, dim, c, params.seed);
    let mut assignments = vec![0usize; m];
    let mut dists = vec![0.0f64; m];
    assign(points, dim, &centroids, &mut assignments, &mut dists);
    repair_empty(points, dim, &mut centroids, &mut assignments, &mut dists, c);

    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < params.max_iter {
        iterations += 1;
        centroids = update_means(points, dim, &assignments, c);
        let obj = objective_of(points, dim, &centroids, &assignments);
        let prev = trace.last().copied();
        trace.push(obj);

        let before = assignments.clone();
        assign(points, dim, &centroids, &mut assignments, &mut dists);
        repair_empty(points, dim, &mut centroids, &mut assignments, &mut dists, c);
        if assignments == before {
            break;
        }
        if let Some(prev) = prev {
            if prev <= 0.0 || (prev - obj) / prev < params.rel_tol {
                break;
            }
        }
    }

    // Centroids are the means of the final assignment; when the loop ended on
    // unchanged assignments this reproduces the last update exactly.
    centroids = update_means(points, dim, &assignments, c);
    let objective = objective_of(points, dim, &centroids, &assignments);
    let variances = population_variances(points, dim, &centroids, &assignments, c);
    Ok(ClusterResult {
        dim,
        centroids,
        variances,
        assignments,
        objective,
        iterations,
        objective_trace: trace,
    })
}

/// Runs [`kmeans`] with seeds `seed, seed+1, ..` and keeps the lowest
/// objective. Ties go to the earliest restart.
pub fn kmeans_best_of(
    points: &[f64],
    dim: usize,
    params: &KMeansParams,
    restarts: usize,
) -> Result<ClusterResult> {
    if restarts == 0 {
        return Err(Error::InvalidParameter(
            "restarts must be at least 1".into(),
        ));
    }
    let mut best: Option<ClusterResult> = None;
    for r in 0..restarts {
        let run = kmeans(
            points,
            dim,
            &KMeansParams {
                seed: params.seed.wrapping_add(r as u64),
                ..*params
            },
        )?;
        if best.as_ref().is_none_or(|b| run.objective < b.objective) {
            best = Some(run);
        }
    }
    Ok(best.expect("restarts >= 1"))
}
