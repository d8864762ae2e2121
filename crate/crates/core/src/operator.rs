//! The divergence-form surface operator `L u = −∇_S·(A ∇_S u) + b u`.
//!
//! Surface derivatives are taken through the tangential projector of the
//! analytic normal field: `∇_S u = P ∇u` and `∇_S·g = Σ_ij P_ij ∂_j g_i`.
//! Expanding `∂_j (A P ∇u)` with the product rule gives an expression in the
//! ambient gradient and Hessian of `u`, the normal Jacobian `Jn` and the
//! tensor Jacobian `∂_j A`. The result only depends on the restriction of `u`
//! to the surface, so kernel columns and exact solutions can be passed as
//! plain ambient functions.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{Frame, Surface};
use crate::kernels::SobolevKernel;
use crate::{Error, Point, Result};

/// Diffusion tensors supported by the solver. Both are time independent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiffusionTensor {
    /// `A = I`, giving the Laplace–Beltrami operator.
    #[default]
    Identity,
    /// `A(x) = P(x) diag(1 + x₁², 1, 1)`.
    Anisotropic,
}

impl DiffusionTensor {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "identity" => Ok(Self::Identity),
            "anisotropic" => Ok(Self::Anisotropic),
            other => Err(Error::Config(format!("unknown diffusion tensor `{other}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Identity => "identity",
            Self::Anisotropic => "anisotropic",
        }
    }

    /// `A(x)` and `[∂₁A, ∂₂A, ∂₃A](x)`.
    pub fn eval(&self, surface: Surface, x: &Point) -> Result<(Matrix3<f64>, [Matrix3<f64>; 3])> {
        match self {
            Self::Identity => Ok((Matrix3::identity(), [Matrix3::zeros(); 3])),
            Self::Anisotropic => {
                let f = surface.frame(x)?;
                Ok(anisotropic_parts(&f, x))
            }
        }
    }
}

fn anisotropic_parts(f: &Frame, x: &Point) -> (Matrix3<f64>, [Matrix3<f64>; 3]) {
    let d = Matrix3::from_diagonal(&Vector3::new(1.0 + x.x * x.x, 1.0, 1.0));
    let a = f.proj * d;
    let jac = std::array::from_fn(|j| {
        let dn = f.jn.column(j).into_owned();
        let dp = -(dn * f.normal.transpose() + f.normal * dn.transpose());
        let mut dd = Matrix3::zeros();
        if j == 0 {
            dd[(0, 0)] = 2.0 * x.x;
        }
        dp * d + f.proj * dd
    });
    (a, jac)
}

/// A C² function on R³ × time, with analytic gradient and Hessian in space.
pub trait AmbientFunction: Send + Sync {
    fn value(&self, x: &Point, t: f64) -> f64;
    fn gradient(&self, x: &Point, t: f64) -> Vector3<f64>;
    fn hessian(&self, x: &Point, t: f64) -> Matrix3<f64>;
    /// `∂_t`, when available.
    fn time_derivative(&self, _x: &Point, _t: f64) -> Option<f64> {
        None
    }
}

/// Scalar data `(x, t) ↦ f(x, t)`, used for forcing terms and initial data.
pub trait ScalarField: Send + Sync {
    fn eval(&self, x: &Point, t: f64) -> f64;
    /// Lets solvers cache `f(X)` once.
    fn is_time_independent(&self) -> bool {
        false
    }
}

/// Closure-backed [`ScalarField`].
pub struct FnField<F> {
    f: F,
    time_independent: bool,
}

impl<F: Fn(&Point, f64) -> f64 + Send + Sync> FnField<F> {
    pub fn new(f: F) -> Self {
        Self {
            f,
            time_independent: false,
        }
    }

    pub fn steady(f: F) -> Self {
        Self {
            f,
            time_independent: true,
        }
    }
}

impl<F: Fn(&Point, f64) -> f64 + Send + Sync> ScalarField for FnField<F> {
    fn eval(&self, x: &Point, t: f64) -> f64 {
        (self.f)(x, t)
    }

    fn is_time_independent(&self) -> bool {
        self.time_independent
    }
}

/// The zero field.
pub struct Zero;

impl ScalarField for Zero {
    fn eval(&self, _x: &Point, _t: f64) -> f64 {
        0.0
    }

    fn is_time_independent(&self) -> bool {
        true
    }
}

/// Kernel column `x ↦ Ψ(x, z)`.
#[derive(Clone, Copy, Debug)]
pub struct KernelColumn {
    pub kernel: SobolevKernel,
    pub center: Point,
}

impl AmbientFunction for KernelColumn {
    fn value(&self, x: &Point, _t: f64) -> f64 {
        self.kernel.value(x, &self.center)
    }

    fn gradient(&self, x: &Point, _t: f64) -> Vector3<f64> {
        self.kernel.eval_full(x, &self.center).gradient
    }

    fn hessian(&self, x: &Point, _t: f64) -> Matrix3<f64> {
        self.kernel.eval_full(x, &self.center).hessian
    }

    fn time_derivative(&self, _x: &Point, _t: f64) -> Option<f64> {
        Some(0.0)
    }
}

/// `u*(x, t) = exp(x₁ + 1/(1 + t))`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExpX1Solution;

impl AmbientFunction for ExpX1Solution {
    fn value(&self, x: &Point, t: f64) -> f64 {
        (x.x + 1.0 / (1.0 + t)).exp()
    }

    fn gradient(&self, x: &Point, t: f64) -> Vector3<f64> {
        Vector3::new(self.value(x, t), 0.0, 0.0)
    }

    fn hessian(&self, x: &Point, t: f64) -> Matrix3<f64> {
        let mut h = Matrix3::zeros();
        h[(0, 0)] = self.value(x, t);
        h
    }

    fn time_derivative(&self, x: &Point, t: f64) -> Option<f64> {
        Some(-self.value(x, t) / ((1.0 + t) * (1.0 + t)))
    }
}

impl ScalarField for ExpX1Solution {
    fn eval(&self, x: &Point, t: f64) -> f64 {
        self.value(x, t)
    }
}

/// Spatially constant function.
#[derive(Clone, Copy, Debug)]
pub struct Constant(pub f64);

impl AmbientFunction for Constant {
    fn value(&self, _x: &Point, _t: f64) -> f64 {
        self.0
    }

    fn gradient(&self, _x: &Point, _t: f64) -> Vector3<f64> {
        Vector3::zeros()
    }

    fn hessian(&self, _x: &Point, _t: f64) -> Matrix3<f64> {
        Matrix3::zeros()
    }

    fn time_derivative(&self, _x: &Point, _t: f64) -> Option<f64> {
        Some(0.0)
    }
}

/// Surface diffusion-reaction problem `u_t + L u = f`, `u(·, t₀) = g`.
#[derive(Clone)]
pub struct EllipticProblem {
    pub surface: Surface,
    pub tensor: DiffusionTensor,
    /// Reaction constant `b`.
    pub reaction: f64,
    pub forcing: Arc<dyn ScalarField>,
    /// Initial data, evaluated at `t₀`.
    pub initial: Arc<dyn ScalarField>,
    pub t_span: (f64, f64),
}

impl fmt::Debug for EllipticProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EllipticProblem")
            .field("surface", &self.surface)
            .field("tensor", &self.tensor)
            .field("reaction", &self.reaction)
            .field("t_span", &self.t_span)
            .finish_non_exhaustive()
    }
}

impl EllipticProblem {
    pub fn new(
        surface: Surface,
        tensor: DiffusionTensor,
        reaction: f64,
        forcing: Arc<dyn ScalarField>,
        initial: Arc<dyn ScalarField>,
        t_span: (f64, f64),
    ) -> Result<Self> {
        if !reaction.is_finite() {
            return Err(Error::Config(format!(
                "reaction constant must be finite, got {reaction}"
            )));
        }
        if !(t_span.0 < t_span.1) || !t_span.1.is_finite() {
            return Err(Error::Config(format!("invalid time span {t_span:?}")));
        }
        Ok(Self {
            surface,
            tensor,
            reaction,
            forcing,
            initial,
            t_span,
        })
    }

    /// Same geometry and coefficients with zero forcing and data; handy for
    /// operator-only work.
    pub fn homogeneous(surface: Surface, tensor: DiffusionTensor, reaction: f64) -> Result<Self> {
        Self::new(surface, tensor, reaction, Arc::new(Zero), Arc::new(Zero), (0.0, 1.0))
    }
}

/// Per-point geometric data needed to apply `L`, computed once per
/// collocation point and reused for every function applied there.
#[derive(Clone, Copy, Debug)]
pub struct OperatorFrame {
    pub normal: Vector3<f64>,
    pub proj: Matrix3<f64>,
    pub jn: Matrix3<f64>,
    pa: Matrix3<f64>,
    tensor_div: Vector3<f64>,
    tr_pa_jn: f64,
    pa_n: Vector3<f64>,
    reaction: f64,
}

impl OperatorFrame {
    pub fn new(problem: &EllipticProblem, x: &Point) -> Result<Self> {
        let f = problem.surface.frame(x)?;
        let (a, da) = match problem.tensor {
            DiffusionTensor::Identity => (Matrix3::identity(), [Matrix3::zeros(); 3]),
            DiffusionTensor::Anisotropic => anisotropic_parts(&f, x),
        };
        let pa = f.proj * a;
        let tensor_div = Vector3::from_fn(|k, _| (0..3).map(|j| (f.proj * da[j])[(j, k)]).sum());
        Ok(Self {
            normal: f.normal,
            proj: f.proj,
            jn: f.jn,
            pa,
            tensor_div,
            tr_pa_jn: (pa * f.jn).trace(),
            pa_n: pa * f.normal,
            reaction: problem.reaction,
        })
    }

    /// `L u` at the frame point from the value, gradient and Hessian of `u`.
    pub fn apply(&self, value: f64, grad: &Vector3<f64>, hess: &Matrix3<f64>) -> f64 {
        let w = self.proj * grad;
        let n_dot_grad = self.normal.dot(grad);
        let u = self.jn.transpose() * grad + hess * self.normal;
        let tr_pa_h = self.pa.component_mul(&hess.transpose()).sum();
        let div = w.dot(&self.tensor_div) + tr_pa_h - n_dot_grad * self.tr_pa_jn - u.dot(&self.pa_n);
        -div + self.reaction * value
    }
}

/// `∇_S u = P ∇u` at an on-surface point.
pub fn surface_gradient(surface: Surface, u: &dyn AmbientFunction, x: &Point, t: f64) -> Result<Vector3<f64>> {
    let (_, p) = surface.normal_and_projection(x)?;
    Ok(p * u.gradient(x, t))
}

/// `L u (x, t)` at an on-surface point `x`.
pub fn apply_elliptic_operator(problem: &EllipticProblem, u: &dyn AmbientFunction, x: &Point, t: f64) -> Result<f64> {
    let frame = OperatorFrame::new(problem, x)?;
    Ok(frame.apply(u.value(x, t), &u.gradient(x, t), &u.hessian(x, t)))
}

/// Forcing `f = ∂_t u* + L u*` that makes `u*` an exact solution.
#[derive(Clone)]
pub struct ManufacturedForcing {
    problem: EllipticProblem,
    exact: Arc<dyn AmbientFunction>,
}

impl ScalarField for ManufacturedForcing {
    fn eval(&self, x: &Point, t: f64) -> f64 {
        let dt = self.exact.time_derivative(x, t).unwrap_or(f64::NAN);
        match apply_elliptic_operator(&self.problem, self.exact.as_ref(), x, t) {
            Ok(l) => dt + l,
            Err(_) => f64::NAN,
        }
    }
}

/// Builds the forcing of a manufactured solution for `problem`'s operator.
pub fn manufactured_forcing(problem: &EllipticProblem, exact: Arc<dyn AmbientFunction>) -> Result<ManufacturedForcing> {
    let probe = Point::new(1.0, 0.0, 0.0);
    if exact.time_derivative(&probe, problem.t_span.0).is_none() {
        return Err(Error::Config("manufactured solution lacks a time derivative".into()));
    }
    Ok(ManufacturedForcing {
        problem: problem.clone(),
        exact,
    })
}

/// `exp(−3φ²)` with `φ` the azimuth about the torus axis.
#[derive(Clone, Copy, Debug, Default)]
pub struct AzimuthalPeak;

impl ScalarField for AzimuthalPeak {
    fn eval(&self, x: &Point, _t: f64) -> f64 {
        let phi = x.y.atan2(x.x);
        (-3.0 * phi * phi).exp()
    }

    fn is_time_independent(&self) -> bool {
        true
    }
}

/// `exp(−3‖x − c‖²)`.
#[derive(Clone, Copy, Debug)]
pub struct GaussianPeak {
    pub center: Point,
}

impl GaussianPeak {
    /// Source used on the orthocircle.
    pub fn orthocircle() -> Self {
        Self {
            center: Point::new(-0.01, 0.003, 1.15),
        }
    }
}

impl ScalarField for GaussianPeak {
    fn eval(&self, x: &Point, _t: f64) -> f64 {
        (-3.0 * (x - self.center).norm_squared()).exp()
    }

    fn is_time_independent(&self) -> bool {
        true
    }
}
