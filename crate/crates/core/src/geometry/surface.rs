use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::{Error, Point, Result};

const SINGULAR_GRADIENT: f64 = 1e-12;
const RETRACTION_MAX_ITER: usize = 100;

const TORUS_TUBE: f64 = 1.0 / 3.0;
const ORTHOCIRCLE_EPS: f64 = 0.075;

/// Dupin cyclide parameters in the implicit form
/// `(|x|² + b² − d²)² − 4(a x − c d)² − 4 b² y² = 0`, `c = sqrt(a² − b²)`.
pub const CYCLIDE_A: f64 = 2.0;
pub const CYCLIDE_B: f64 = 1.9;
pub const CYCLIDE_D: f64 = 1.0;

fn cyclide_c() -> f64 {
    (CYCLIDE_A * CYCLIDE_A - CYCLIDE_B * CYCLIDE_B).sqrt()
}

/// Axis-aligned box.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Point,
    pub max: Point,
}

impl Aabb {
    pub fn extent(&self) -> Vector3<f64> {
        self.max - self.min
    }

    pub fn contains(&self, p: &Point) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// Closed catalog surfaces given as regular level sets `{F = 0}` with
/// analytic gradient and Hessian.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Surface {
    /// `|x|² − 1`.
    Sphere,
    /// Ring torus with radii 1 and 1/3: `(|x|² + 1 − 1/9)² − 4(x² + y²)`.
    Torus,
    /// `[(x²+y²−1)²+z²][(y²+z²−1)²+x²][(x²+z²−1)²+y²] − 0.075²(1 + 3|x|²)`.
    Orthocircle,
    /// Ring Dupin cyclide, see [`CYCLIDE_A`].
    DupinCyclide,
}

impl Surface {
    pub const ALL: [Surface; 4] = [
        Surface::Sphere,
        Surface::Torus,
        Surface::Orthocircle,
        Surface::DupinCyclide,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Surface::Sphere => "sphere",
            Surface::Torus => "torus",
            Surface::Orthocircle => "orthocircle",
            Surface::DupinCyclide => "dupin_cyclide",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.name() == name || (name == "cyclide" && *s == Surface::DupinCyclide))
            .ok_or_else(|| Error::Config(format!("unknown surface `{name}`")))
    }

    pub fn bounding_box(&self) -> Aabb {
        let b = |lo: [f64; 3], hi: [f64; 3]| Aabb {
            min: Point::from(lo),
            max: Point::from(hi),
        };
        match self {
            Surface::Sphere => b([-1.1; 3], [1.1; 3]),
            Surface::Torus => b([-1.45, -1.45, -0.45], [1.45, 1.45, 0.45]),
            Surface::Orthocircle => b([-1.35; 3], [1.35; 3]),
            Surface::DupinCyclide => b([-3.8, -3.1, -1.9], [2.6, 3.1, 1.9]),
        }
    }

    /// Level function `F`.
    pub fn level(&self, p: &Point) -> f64 {
        let (x, y) = (p.x, p.y);
        match self {
            Surface::Sphere => p.norm_squared() - 1.0,
            Surface::Torus => {
                let s = p.norm_squared() + 1.0 - TORUS_TUBE * TORUS_TUBE;
                s * s - 4.0 * (x * x + y * y)
            }
            Surface::Orthocircle => {
                let (a, b, c) = ortho_factors(p);
                a * b * c - ORTHOCIRCLE_EPS.powi(2) * (1.0 + 3.0 * p.norm_squared())
            }
            Surface::DupinCyclide => {
                let s = p.norm_squared() + CYCLIDE_B.powi(2) - CYCLIDE_D.powi(2);
                let l = CYCLIDE_A * x - cyclide_c() * CYCLIDE_D;
                s * s - 4.0 * l * l - 4.0 * CYCLIDE_B.powi(2) * y * y
            }
        }
    }

    pub fn gradient(&self, p: &Point) -> Vector3<f64> {
        let (x, y, _) = (p.x, p.y, p.z);
        match self {
            Surface::Sphere => 2.0 * p,
            Surface::Torus => {
                let s = p.norm_squared() + 1.0 - TORUS_TUBE * TORUS_TUBE;
                4.0 * s * p - 8.0 * Vector3::new(x, y, 0.0)
            }
            Surface::Orthocircle => {
                let (a, b, c) = ortho_factors(p);
                let [ga, gb, gc] = ortho_factor_gradients(p);
                b * c * ga + a * c * gb + a * b * gc - 6.0 * ORTHOCIRCLE_EPS.powi(2) * p
            }
            Surface::DupinCyclide => {
                let s = p.norm_squared() + CYCLIDE_B.powi(2) - CYCLIDE_D.powi(2);
                let l = CYCLIDE_A * x - cyclide_c() * CYCLIDE_D;
                4.0 * s * p - Vector3::new(8.0 * CYCLIDE_A * l, 8.0 * CYCLIDE_B.powi(2) * y, 0.0)
            }
        }
    }

    pub fn hessian(&self, p: &Point) -> Matrix3<f64> {
        let i3 = Matrix3::identity();
        match self {
            Surface::Sphere => 2.0 * i3,
            Surface::Torus => {
                let s = p.norm_squared() + 1.0 - TORUS_TUBE * TORUS_TUBE;
                8.0 * p * p.transpose() + 4.0 * s * i3 - Matrix3::from_diagonal(&Vector3::new(8.0, 8.0, 0.0))
            }
            Surface::Orthocircle => {
                let (a, b, c) = ortho_factors(p);
                let [ga, gb, gc] = ortho_factor_gradients(p);
                let [ha, hb, hc] = ortho_factor_hessians(p);
                let sym = |u: &Vector3<f64>, v: &Vector3<f64>| u * v.transpose() + v * u.transpose();
                b * c * ha + a * c * hb + a * b * hc + c * sym(&ga, &gb) + b * sym(&ga, &gc) + a * sym(&gb, &gc)
                    - 6.0 * ORTHOCIRCLE_EPS.powi(2) * i3
            }
            Surface::DupinCyclide => {
                let s = p.norm_squared() + CYCLIDE_B.powi(2) - CYCLIDE_D.powi(2);
                8.0 * p * p.transpose() + 4.0 * s * i3
                    - Matrix3::from_diagonal(&Vector3::new(8.0 * CYCLIDE_A.powi(2), 8.0 * CYCLIDE_B.powi(2), 0.0))
            }
        }
    }

    /// Unit normal `n = ∇F/‖∇F‖` and tangent projector `P = I − n nᵀ` at an
    /// on-surface point.
    pub fn normal_and_projection(&self, p: &Point) -> Result<(Vector3<f64>, Matrix3<f64>)> {
        let g = self.gradient(p);
        let n = unit_normal(p, &g)?;
        Ok((n, Matrix3::identity() - n * n.transpose()))
    }

    /// Jacobian of the normal field, `Jn[k][j] = ∂_j n_k = P·Hess F / ‖∇F‖`.
    pub fn normal_jacobian(&self, p: &Point) -> Result<Matrix3<f64>> {
        Ok(self.frame(p)?.jn)
    }

    /// Normal, projector and normal Jacobian in one evaluation.
    pub fn frame(&self, p: &Point) -> Result<Frame> {
        let g = self.gradient(p);
        let n = unit_normal(p, &g)?;
        let proj = Matrix3::identity() - n * n.transpose();
        let jn = proj * self.hessian(p) / g.norm();
        Ok(Frame { normal: n, proj, jn })
    }

    /// Euclidean closest point on the surface.
    ///
    /// Damped Newton on the Lagrange conditions `x − y + μ∇F(x) = 0`,
    /// `F(x) = 0`, started from a few normal-direction projection steps.
    pub fn closest_point(&self, y: &Point) -> Result<Point> {
        let fail = || Error::RetractionFailure { start: [y.x, y.y, y.z] };
        if !(y.x.is_finite() && y.y.is_finite() && y.z.is_finite()) {
            return Err(fail());
        }

        let mut x = *y;
        for _ in 0..30 {
            let f = self.level(&x);
            let g = self.gradient(&x);
            let g2 = g.norm_squared();
            if g2 < SINGULAR_GRADIENT * SINGULAR_GRADIENT {
                return Err(fail());
            }
            let step = g * (f / g2);
            if step.norm() < 1e-3 {
                break;
            }
            x -= step;
        }

        let residual = |x: &Point, mu: f64| -> Vector4<f64> {
            let r = x - y + mu * self.gradient(x);
            Vector4::new(r.x, r.y, r.z, self.level(x))
        };
        let g = self.gradient(&x);
        let mut mu = (y - x).dot(&g) / g.norm_squared();
        let mut res = residual(&x, mu);

        for _ in 0..RETRACTION_MAX_ITER {
            let g = self.gradient(&x);
            if self.converged(y, &x, &g, res[3]) {
                return Ok(x);
            }
            let h = self.hessian(&x);
            let top = Matrix3::identity() + mu * h;
            let mut jac = Matrix4::zeros();
            jac.fixed_view_mut::<3, 3>(0, 0).copy_from(&top);
            jac.fixed_view_mut::<3, 1>(0, 3).copy_from(&g);
            jac.fixed_view_mut::<1, 3>(3, 0).copy_from(&g.transpose());
            let delta = jac.lu().solve(&(-res)).ok_or_else(fail)?;

            let mut t = 1.0;
            let base = res.norm();
            let mut accepted = false;
            for _ in 0..40 {
                let xn = x + t * delta.fixed_rows::<3>(0);
                let mun = mu + t * delta[3];
                let rn = residual(&xn, mun);
                if rn.norm() < base || rn.norm() == 0.0 {
                    x = xn;
                    mu = mun;
                    res = rn;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                // Residual already at roundoff; polish with a plain projection.
                let g = self.gradient(&x);
                let xn = x - g * (self.level(&x) / g.norm_squared());
                if self.converged(y, &xn, &self.gradient(&xn), self.level(&xn)) {
                    return Ok(xn);
                }
                return Err(fail());
            }
        }
        Err(fail())
    }

    fn converged(&self, y: &Point, x: &Point, g: &Vector3<f64>, level: f64) -> bool {
        if level.abs() > 1e-12 {
            return false;
        }
        let n = g / g.norm();
        let d = y - x;
        (d - d.dot(&n) * n).norm() <= 1e-10
    }

    /// Distance from `y` to the surface through the closest point.
    pub fn distance(&self, y: &Point) -> Result<f64> {
        Ok((y - self.closest_point(y)?).norm())
    }
}

/// Local differential frame of a surface point.
#[derive(Clone, Copy, Debug)]
pub struct Frame {
    pub normal: Vector3<f64>,
    pub proj: Matrix3<f64>,
    pub jn: Matrix3<f64>,
}

fn unit_normal(p: &Point, g: &Vector3<f64>) -> Result<Vector3<f64>> {
    let norm = g.norm();
    if !(norm >= SINGULAR_GRADIENT) {
        return Err(Error::SingularGradient {
            point: [p.x, p.y, p.z],
            norm,
        });
    }
    Ok(g / norm)
}

fn ortho_factors(p: &Point) -> (f64, f64, f64) {
    let (x2, y2, z2) = (p.x * p.x, p.y * p.y, p.z * p.z);
    (
        (x2 + y2 - 1.0).powi(2) + z2,
        (y2 + z2 - 1.0).powi(2) + x2,
        (x2 + z2 - 1.0).powi(2) + y2,
    )
}

fn ortho_factor_gradients(p: &Point) -> [Vector3<f64>; 3] {
    let (x, y, z) = (p.x, p.y, p.z);
    let s = x * x + y * y - 1.0;
    let u = y * y + z * z - 1.0;
    let w = x * x + z * z - 1.0;
    [
        Vector3::new(4.0 * x * s, 4.0 * y * s, 2.0 * z),
        Vector3::new(2.0 * x, 4.0 * y * u, 4.0 * z * u),
        Vector3::new(4.0 * x * w, 2.0 * y, 4.0 * z * w),
    ]
}

fn ortho_factor_hessians(p: &Point) -> [Matrix3<f64>; 3] {
    let (x, y, z) = (p.x, p.y, p.z);
    let s = x * x + y * y - 1.0;
    let u = y * y + z * z - 1.0;
    let w = x * x + z * z - 1.0;
    [
        Matrix3::new(
            4.0 * s + 8.0 * x * x,
            8.0 * x * y,
            0.0,
            8.0 * x * y,
            4.0 * s + 8.0 * y * y,
            0.0,
            0.0,
            0.0,
            2.0,
        ),
        Matrix3::new(
            2.0,
            0.0,
            0.0,
            0.0,
            4.0 * u + 8.0 * y * y,
            8.0 * y * z,
            0.0,
            8.0 * y * z,
            4.0 * u + 8.0 * z * z,
        ),
        Matrix3::new(
            4.0 * w + 8.0 * x * x,
            0.0,
            8.0 * x * z,
            0.0,
            2.0,
            0.0,
            8.0 * x * z,
            0.0,
            4.0 * w + 8.0 * z * z,
        ),
    ]
}

/// Point on the torus from its angular parametrisation.
pub fn torus_point(theta: f64, phi: f64) -> Point {
    let rho = 1.0 + theta.cos() * TORUS_TUBE;
    Point::new(rho * phi.cos(), rho * phi.sin(), theta.sin() * TORUS_TUBE)
}
