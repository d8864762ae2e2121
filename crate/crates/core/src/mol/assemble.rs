use std::sync::OnceLock;

use ndarray::{Array1, Array2, ArrayView1};

use crate::dense::{self, DenseMatrix, RankReport, RegularizedUpper, SpdFactor};
use crate::geometry::PointCloud;
use crate::kernels::SobolevKernel;
use crate::operator::{EllipticProblem, OperatorFrame, ScalarField};
use crate::par::{self, Execution};
use crate::{Error, Point, Result};

/// Collocation discretization of `u_t + L u = f` with trial centers `Z` and
/// collocation points `X`, reduced through `Ψ(X, Z) = Q R` to the mass-matrix
/// ODE `R λ' = C λ + Qᵀ f(X, t)`.
pub struct DiscreteSystem {
    pub problem: EllipticProblem,
    pub kernel: SobolevKernel,
    pub centers: PointCloud,
    pub collocation: PointCloud,
    /// `Ψ(X, Z)`.
    pub psi_xz: DenseMatrix,
    /// `L Ψ(X, Z)`, the operator applied to the first argument.
    pub lpsi_xz: DenseMatrix,
    pub q: DenseMatrix,
    pub r: DenseMatrix,
    pub rank: RankReport,
    /// `C = −Qᵀ L Ψ(X, Z)`.
    pub reduced: DenseMatrix,
    mass: RegularizedUpper,
    psi_zz: OnceLock<DenseMatrix>,
    steady_forcing: OnceLock<Array1<f64>>,
    exec: Execution,
}

impl std::fmt::Debug for DiscreteSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscreteSystem")
            .field("m", &self.kernel.smoothness())
            .field("n_centers", &self.n_centers())
            .field("n_collocation", &self.n_collocation())
            .field("rank", &self.rank)
            .finish_non_exhaustive()
    }
}

/// `[Ψ(y_i, z_j)]`.
pub fn kernel_matrix(kernel: &SobolevKernel, rows: &[Point], cols: &[Point], exec: Execution) -> DenseMatrix {
    let n = cols.len();
    let mut data = vec![0.0; rows.len() * n];
    par::for_each_chunk(exec, &mut data, n.max(1), |i, row| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = kernel.value(&rows[i], &cols[j]);
        }
    });
    Array2::from_shape_vec((rows.len(), n), data).expect("shape matches buffer")
}

pub fn assemble(
    problem: &EllipticProblem,
    centers: &PointCloud,
    collocation: &PointCloud,
    kernel: SobolevKernel,
) -> Result<DiscreteSystem> {
    assemble_with(problem, centers, collocation, kernel, Execution::Parallel)
}

pub fn assemble_with(
    problem: &EllipticProblem,
    centers: &PointCloud,
    collocation: &PointCloud,
    kernel: SobolevKernel,
    exec: Execution,
) -> Result<DiscreteSystem> {
    let (nz, nx) = (centers.len(), collocation.len());
    if nz == 0 || nx < nz {
        return Err(Error::Shape(format!("need n_X ≥ n_Z ≥ 1, got n_X = {nx}, n_Z = {nz}")));
    }
    let frames = par::map_range(exec, nx, |i| OperatorFrame::new(problem, &collocation.points[i]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let z = &centers.points;
    let mut psi = vec![0.0; nx * nz];
    let mut lpsi = vec![0.0; nx * nz];
    par::for_each_row_pair(exec, &mut psi, &mut lpsi, nz, |i, prow, lrow| {
        let x = &collocation.points[i];
        let frame = &frames[i];
        for j in 0..nz {
            let e = kernel.eval_full(x, &z[j]);
            prow[j] = e.value;
            lrow[j] = frame.apply(e.value, &e.gradient, &e.hessian);
        }
    });
    let psi_xz = Array2::from_shape_vec((nx, nz), psi).expect("shape matches buffer");
    let lpsi_xz = Array2::from_shape_vec((nx, nz), lpsi).expect("shape matches buffer");
    if lpsi_xz.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite operator entry in L Ψ(X, Z)".into()));
    }

    let qr = dense::reduced_qr(&psi_xz.view())?;
    let reduced = -qr.q.t().dot(&lpsi_xz);
    let mass = RegularizedUpper::new(&qr.r.view())?;
    let psi_zz = OnceLock::new();
    if centers.points == collocation.points {
        let _ = psi_zz.set(psi_xz.clone());
    }
    Ok(DiscreteSystem {
        problem: problem.clone(),
        kernel,
        centers: centers.clone(),
        collocation: collocation.clone(),
        psi_xz,
        lpsi_xz,
        q: qr.q,
        r: qr.r,
        rank: qr.rank,
        reduced,
        mass,
        psi_zz,
        steady_forcing: OnceLock::new(),
        exec,
    })
}

impl DiscreteSystem {
    pub fn n_centers(&self) -> usize {
        self.centers.len()
    }

    pub fn n_collocation(&self) -> usize {
        self.collocation.len()
    }

    pub fn execution(&self) -> Execution {
        self.exec
    }

    /// `Ψ(Z, Z)`, assembled on first use.
    pub fn psi_zz(&self) -> &DenseMatrix {
        self.psi_zz
            .get_or_init(|| kernel_matrix(&self.kernel, &self.centers.points, &self.centers.points, self.exec))
    }

    /// `R` with its tiny diagonal entries floored.
    pub fn mass(&self) -> &RegularizedUpper {
        &self.mass
    }

    /// `f(X, t)`.
    pub fn forcing_at(&self, t: f64) -> Array1<f64> {
        let f = &self.problem.forcing;
        let x = &self.collocation.points;
        Array1::from(par::map_range(self.exec, x.len(), |i| f.eval(&x[i], t)))
    }

    /// `Qᵀ f(X, t)`; computed once for time-independent forcing.
    pub fn projected_forcing(&self, t: f64) -> Result<Array1<f64>> {
        let project = |t: f64| -> Result<Array1<f64>> {
            let f = self.forcing_at(t);
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::Domain(format!("non-finite forcing at t = {t}")));
            }
            Ok(self.q.t().dot(&f))
        };
        if self.problem.forcing.is_time_independent() {
            if let Some(v) = self.steady_forcing.get() {
                return Ok(v.clone());
            }
            let v = project(t)?;
            let _ = self.steady_forcing.set(v.clone());
            return Ok(v);
        }
        project(t)
    }

    /// `κ(Ψ(X, Z))` from the full SVD.
    pub fn kernel_condition_number(&self) -> Result<f64> {
        dense::condition_number(&self.psi_xz.view())
    }

    /// `Ψ(Y, Z)` for evaluation points `Y`.
    pub fn evaluation_matrix(&self, points: &[Point]) -> DenseMatrix {
        kernel_matrix(&self.kernel, points, &self.centers.points, self.exec)
    }
}

/// Which fit produced the initial coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialFit {
    /// Interpolation on the centers, `Ψ(Z, Z) λ = g(Z)`.
    Interpolation,
    /// Least squares on the collocation points, `R λ = Qᵀ g(X)`.
    LeastSquares,
}

/// Trial-space interpolant of `g(·, t₀)`: solves `Ψ(Z, Z) λ = g(Z)`.
pub fn interpolate_initial(sys: &DiscreteSystem, g: &dyn ScalarField) -> Result<Array1<f64>> {
    let t0 = sys.problem.t_span.0;
    let z = &sys.centers.points;
    let rhs = Array1::from(par::map_range(sys.exec, z.len(), |i| g.eval(&z[i], t0)));
    if rhs.iter().all(|&v| v == 0.0) {
        return Ok(Array1::zeros(z.len()));
    }
    SpdFactor::new(&sys.psi_zz().view())?.solve(&rhs.view())
}

/// Interpolant of `g`, or the least-squares fit on `X` when `Ψ(Z, Z)` fails
/// to factor in floating point.
pub fn initial_coefficients(sys: &DiscreteSystem, g: &dyn ScalarField) -> Result<(Array1<f64>, InitialFit)> {
    match interpolate_initial(sys, g) {
        Ok(l) => Ok((l, InitialFit::Interpolation)),
        Err(Error::NotSpd(_)) => {
            let t0 = sys.problem.t_span.0;
            let x = &sys.collocation.points;
            let gx = Array1::from(par::map_range(sys.exec, x.len(), |i| g.eval(&x[i], t0)));
            let l = sys.mass.solve(&sys.q.t().dot(&gx).view())?;
            Ok((l, InitialFit::LeastSquares))
        }
        Err(e) => Err(e),
    }
}

/// `Ψ(Y, Z) λ`.
pub fn evaluate_solution(sys: &DiscreteSystem, lambda: &ArrayView1<f64>, points: &[Point]) -> Result<Array1<f64>> {
    if lambda.len() != sys.n_centers() {
        return Err(Error::Shape(format!(
            "coefficient vector has length {}, expected {}",
            lambda.len(),
            sys.n_centers()
        )));
    }
    let z = &sys.centers.points;
    let k = &sys.kernel;
    Ok(Array1::from(par::map_range(sys.exec, points.len(), |i| {
        z.iter()
            .zip(lambda.iter())
            .map(|(zj, &l)| k.value(&points[i], zj) * l)
            .sum()
    })))
}
