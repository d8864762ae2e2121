use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{cloud::PointCloud, surface::torus_point, Surface};
use crate::par::{self, Execution};
use crate::{Error, Point, Result};

/// Candidate-pool multiplier for farthest-point thinning.
pub const POOL_FACTOR: usize = 50;
const MIN_POOL: usize = 500;
/// Half-width of the shell, measured by the first-order distance `|F|/‖∇F‖`,
/// from which bounding-box samples are retracted onto the surface.
const CANDIDATE_SHELL: f64 = 0.02;
const MAX_DRAWS_PER_POINT: usize = 20_000;

/// `count` on-surface points: uniform bounding-box draws inside a thin shell
/// around the surface, retracted by the closest-point map. Approximately
/// area-uniform; no spacing control.
pub fn sample_dense(surface: Surface, count: usize, seed: u64) -> Result<Vec<Point>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bb = surface.bounding_box();
    let mut out = Vec::with_capacity(count);
    let budget = count.saturating_mul(MAX_DRAWS_PER_POINT).max(1_000_000);
    let mut draws = 0usize;
    while out.len() < count {
        draws += 1;
        if draws > budget {
            return Err(Error::Sampling(format!(
                "candidate pool exhausted after {draws} draws ({} of {count} accepted)",
                out.len()
            )));
        }
        let y = Point::from_fn(|i, _| rng.random_range(bb.min[i]..bb.max[i]));
        let g = surface.gradient(&y).norm();
        if g == 0.0 || surface.level(&y).abs() / g > CANDIDATE_SHELL {
            continue;
        }
        if let Ok(x) = surface.closest_point(&y) {
            if (x - y).norm() <= 2.0 * CANDIDATE_SHELL {
                out.push(x);
            }
        }
    }
    Ok(out)
}

/// Greedy farthest-point selection of `n` points from `pool`, starting from
/// the pool entry `start`.
///
/// Returns the selected indices in selection order and the covering radius
/// of the pool by the selection.
pub fn farthest_point_thinning(pool: &[Point], n: usize, start: usize, exec: Execution) -> (Vec<usize>, f64) {
    assert!(n <= pool.len() && start < pool.len());
    let mut dist = vec![f64::INFINITY; pool.len()];
    let mut chosen = Vec::with_capacity(n);
    let mut next = start;
    for _ in 0..n {
        chosen.push(next);
        let c = pool[next];
        par::for_each_chunk(exec, &mut dist, 4096, |k, chunk| {
            let base = k * 4096;
            for (j, d) in chunk.iter_mut().enumerate() {
                let dj = (pool[base + j] - c).norm_squared();
                if dj < *d {
                    *d = dj;
                }
            }
        });
        next = par::argmax(exec, pool.len(), |j| dist[j]).map(|(j, _)| j).unwrap_or(0);
    }
    let radius = dist.iter().cloned().fold(0.0, f64::max).sqrt();
    (chosen, radius)
}

/// Quasi-uniform on-surface cloud of exactly `n` points.
///
/// Draws a dense candidate pool of `max(50 n, 500)` points and thins it by
/// farthest-point selection. The fill distance is the covering radius of the
/// pool, so it is an estimate from below.
pub fn sample_quasi_uniform(surface: Surface, n: usize, seed: u64) -> Result<PointCloud> {
    sample_quasi_uniform_with(surface, n, seed, Execution::Parallel)
}

pub fn sample_quasi_uniform_with(surface: Surface, n: usize, seed: u64, exec: Execution) -> Result<PointCloud> {
    if n < 4 {
        return Err(Error::Sampling(format!("need at least 4 points, got {n}")));
    }
    let pool = sample_dense(surface, (POOL_FACTOR * n).max(MIN_POOL), seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let start = rng.random_range(0..pool.len());
    let (idx, radius) = farthest_point_thinning(&pool, n, start, exec);
    let points = idx.into_iter().map(|i| pool[i]).collect();
    PointCloud::with_fill(points, true, radius, seed)
}

/// Regular `(θ, φ)` grid on the torus, `n_theta × n_phi` points.
pub fn sample_torus_grid(n_theta: usize, n_phi: usize, eval_density: usize) -> Result<PointCloud> {
    if n_theta < 2 || n_phi < 2 {
        return Err(Error::Sampling("torus grid needs at least 2×2 nodes".into()));
    }
    let tau = std::f64::consts::TAU;
    let pi = std::f64::consts::PI;
    let mut points = Vec::with_capacity(n_theta * n_phi);
    for i in 0..n_theta {
        let theta = -pi + tau * i as f64 / n_theta as f64;
        for j in 0..n_phi {
            let phi = -pi + tau * j as f64 / n_phi as f64;
            points.push(torus_point(theta, phi));
        }
    }
    PointCloud::measured(points, Surface::Torus, true, 0, eval_density)
}

/// Torus grid with `n` nodes when `n` is a perfect square.
pub fn sample_torus_square_grid(n: usize, eval_density: usize) -> Result<PointCloud> {
    let k = (n as f64).sqrt().round() as usize;
    if k * k != n {
        return Err(Error::Sampling(format!("{n} is not a perfect square")));
    }
    sample_torus_grid(k, k, eval_density)
}

// Fractional lattice offset; distinct irrational-looking entries break the
// coordinate symmetries so band counts change one point at a time.
const LATTICE_OFFSET: [f64; 3] = [0.1234, 0.3771, 0.6519];

/// Lattice points `s (i, j, k) + s·offset` lying within distance `delta` of
/// the surface.
pub fn narrow_band_lattice(surface: Surface, delta: f64, spacing: f64) -> Vec<Point> {
    let bb = surface.bounding_box();
    let lo = bb.min.map(|v| v - delta);
    let hi = bb.max.map(|v| v + delta);
    let range = |axis: usize| {
        let a = ((lo[axis] / spacing) - LATTICE_OFFSET[axis]).floor() as i64;
        let b = ((hi[axis] / spacing) - LATTICE_OFFSET[axis]).ceil() as i64;
        a..=b
    };
    let mut out = Vec::new();
    for i in range(0) {
        for j in range(1) {
            for k in range(2) {
                let p = Point::new(
                    spacing * (i as f64 + LATTICE_OFFSET[0]),
                    spacing * (j as f64 + LATTICE_OFFSET[1]),
                    spacing * (k as f64 + LATTICE_OFFSET[2]),
                );
                let g = surface.gradient(&p).norm();
                if g == 0.0 || surface.level(&p).abs() / g > 2.0 * delta {
                    continue;
                }
                if let Ok(d) = surface.distance(&p) {
                    if d <= delta {
                        out.push(p);
                    }
                }
            }
        }
    }
    out
}

/// Off-surface lattice cloud for the narrow band `{dist(·, S) ≤ δ}`.
#[derive(Clone, Debug)]
pub struct NarrowBand {
    pub cloud: PointCloud,
    pub spacing: f64,
    /// `len − target`; zero when the target count was hit exactly.
    pub discrepancy: i64,
}

/// Regular lattice in the narrow band with spacing bisected to give exactly
/// `target_n` points when achievable.
pub fn sample_narrow_band(surface: Surface, delta: f64, target_n: usize) -> Result<NarrowBand> {
    if !(delta > 0.0) || target_n == 0 {
        return Err(Error::Banding(format!("invalid band δ = {delta}, n = {target_n}")));
    }
    let count = |s: f64| narrow_band_lattice(surface, delta, s).len();
    let target = target_n;

    // Bracket: count(lo) ≥ target > count(hi).
    let mut lo = delta;
    let mut guard = 0;
    while count(lo) < target {
        lo *= 0.5;
        guard += 1;
        if guard > 30 {
            return Err(Error::Banding("cannot reach the target count".into()));
        }
    }
    let mut hi = lo * 2.0;
    while count(hi) >= target {
        hi *= 2.0;
        guard += 1;
        if guard > 60 {
            return Err(Error::Banding("lattice count does not decrease".into()));
        }
    }

    let mut best = (lo, count(lo));
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let c = count(mid);
        if c.abs_diff(target) < best.1.abs_diff(target) {
            best = (mid, c);
        }
        if c == target {
            break;
        }
        if c > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let (spacing, n) = best;
    let discrepancy = n as i64 - target as i64;
    if discrepancy.unsigned_abs() as f64 > 0.1 * target as f64 {
        return Err(Error::Banding(format!(
            "closest count {n} is more than 10% away from {target}"
        )));
    }
    let points = narrow_band_lattice(surface, delta, spacing);
    // Lattice nodes are off the surface; h is measured against the surface.
    let cloud = PointCloud::measured(points, surface, false, 0, 20 * target.max(500))?;
    Ok(NarrowBand {
        cloud,
        spacing,
        discrepancy,
    })
}
