use serde::{Deserialize, Serialize};

use super::{sampling::sample_dense, Surface};
use crate::par::{self, Execution};
use crate::{Error, Point, Result};

/// Seed of the dense on-surface set used to estimate fill distances.
pub const FILL_EVAL_SEED: u64 = 0x00f1_11d5;

/// Ordered point set with its quasi-uniformity diagnostics.
#[derive(Clone, Debug)]
pub struct PointCloud {
    pub points: Vec<Point>,
    pub on_surface: bool,
    /// Fill distance (estimated from below on a dense on-surface set).
    pub h: f64,
    /// Separation distance, half the minimum pairwise distance.
    pub q: f64,
    /// Mesh ratio `h / q`.
    pub rho: f64,
    pub seed: u64,
}

/// JSON sidecar written next to a point-cloud CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CloudMetadata {
    pub surface: String,
    pub n: usize,
    pub seed: u64,
    pub h: f64,
    pub q: f64,
    pub rho: f64,
    pub on_surface: bool,
}

impl PointCloud {
    /// Wraps points whose fill distance is already known.
    pub fn with_fill(points: Vec<Point>, on_surface: bool, h: f64, seed: u64) -> Result<Self> {
        let q = separation_distance(&points, Execution::Parallel);
        if !(q > 0.0) {
            return Err(Error::Sampling("point cloud contains coincident points".into()));
        }
        Ok(Self {
            points,
            on_surface,
            h,
            q,
            rho: h / q,
            seed,
        })
    }

    /// Wraps points and estimates the fill distance against a dense
    /// on-surface set of `eval_density` points.
    pub fn measured(
        points: Vec<Point>,
        surface: Surface,
        on_surface: bool,
        seed: u64,
        eval_density: usize,
    ) -> Result<Self> {
        let stats = fill_and_separation(&points, surface, eval_density)?;
        if !(stats.q > 0.0) {
            return Err(Error::Sampling("point cloud contains coincident points".into()));
        }
        Ok(Self {
            points,
            on_surface,
            h: stats.h,
            q: stats.q,
            rho: stats.rho,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn metadata(&self, surface: Surface) -> CloudMetadata {
        CloudMetadata {
            surface: surface.name().to_string(),
            n: self.len(),
            seed: self.seed,
            h: self.h,
            q: self.q,
            rho: self.rho,
            on_surface: self.on_surface,
        }
    }
}

/// Fill distance, separation distance and mesh ratio of a point set.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FillStats {
    pub h: f64,
    pub q: f64,
    pub rho: f64,
}

/// `q` exactly; `h` as the largest distance from `eval_density` dense
/// on-surface points to the cloud.
pub fn fill_and_separation(points: &[Point], surface: Surface, eval_density: usize) -> Result<FillStats> {
    if points.is_empty() {
        return Err(Error::Sampling("empty point cloud".into()));
    }
    let eval = sample_dense(surface, eval_density, FILL_EVAL_SEED)?;
    let h = fill_distance(points, &eval, Execution::Parallel);
    let q = separation_distance(points, Execution::Parallel);
    Ok(FillStats { h, q, rho: h / q })
}

/// `max_y min_p ‖y − p‖` over evaluation points `y`.
pub fn fill_distance(points: &[Point], eval: &[Point], exec: Execution) -> f64 {
    par::map_range(exec, eval.len(), |i| nearest_distance(points, &eval[i]))
        .into_iter()
        .fold(0.0, f64::max)
}

/// Half the smallest pairwise distance.
pub fn separation_distance(points: &[Point], exec: Execution) -> f64 {
    let n = points.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let min_sq = par::map_range(exec, n - 1, |i| {
        points[i + 1..]
            .iter()
            .map(|p| (p - points[i]).norm_squared())
            .fold(f64::INFINITY, f64::min)
    })
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    0.5 * min_sq.sqrt()
}

fn nearest_distance(points: &[Point], y: &Point) -> f64 {
    points
        .iter()
        .map(|p| (p - y).norm_squared())
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}

/// Raw quantity of the collocation denseness condition for smoothness `m`:
/// `h_X^{2m−4} h_Z^{−2m}` when `h_Z ≤ 1`, else `h_X^{2m−4} h_Z^{−2m+4}`.
///
/// The constant multiplying it is unknown, so this is a diagnostic only.
pub fn denseness_indicator(h_x: f64, h_z: f64, m: u32) -> f64 {
    let m = m as i32;
    let zexp = if h_z <= 1.0 { -2 * m } else { -2 * m + 4 };
    h_x.powi(2 * m - 4) * h_z.powi(zexp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn antipodal_pair_on_the_sphere() {
        let pts = vec![Point::new(1.0, 0.0, 0.0), Point::new(-1.0, 0.0, 0.0)];
        let s = fill_and_separation(&pts, Surface::Sphere, 100_000).unwrap();
        assert!((s.q - 1.0).abs() < 1e-15);
        assert!((s.h - 2f64.sqrt()).abs() < 0.01, "h = {}", s.h);
        assert!(s.rho >= 1.0);
    }

    #[test]
    fn separation_of_a_single_point_is_infinite() {
        assert!(separation_distance(&[Point::zeros()], Execution::Sequential).is_infinite());
    }

    #[test]
    fn coincident_points_are_rejected() {
        let p = Point::new(1.0, 0.0, 0.0);
        assert!(PointCloud::with_fill(vec![p, p], true, 1.0, 0).is_err());
    }

    #[test]
    fn denseness_branches() {
        assert_eq!(denseness_indicator(0.5, 0.5, 4), 0.5f64.powi(4) * 0.5f64.powi(-8));
        assert_eq!(denseness_indicator(0.5, 2.0, 4), 0.5f64.powi(4) * 2f64.powi(-4));
    }
}
