mod oracles;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, ArrayView1};
use num_complex::Complex64;
use rbfmol::dense;
use rbfmol::geometry::{sample_dense, sample_quasi_uniform, PointCloud, Surface};
use rbfmol::kernels::SobolevKernel;
use rbfmol::mol::{
    assemble, evaluate_solution, integrate, interpolate_initial, ode_matrix, pseudo_inverse_ode_matrix,
    spectrum_report, DiscreteSystem, IntegrateOptions, MolRhs, OdeRhs, OdeRoute, SpectrumOptions, StateStorage,
    StepMode,
};
use rbfmol::operator::{
    manufactured_forcing, DiffusionTensor, EllipticProblem, ExpX1Solution, FnField, KernelColumn, ScalarField, Zero,
};

use oracles::{fd_operator, jacobi_pinv, multiset_distance, to_dmatrix};

fn sphere(n: usize, seed: u64) -> PointCloud {
    sample_quasi_uniform(Surface::Sphere, n, seed).unwrap()
}

fn manufactured(surface: Surface, tensor: DiffusionTensor, b: f64, span: (f64, f64)) -> EllipticProblem {
    let base = EllipticProblem::homogeneous(surface, tensor, b).unwrap();
    let f = manufactured_forcing(&base, Arc::new(ExpX1Solution)).unwrap();
    EllipticProblem::new(surface, tensor, b, Arc::new(f), Arc::new(ExpX1Solution), span).unwrap()
}

fn example1(nz: usize, nx: Option<usize>, m: u32) -> DiscreteSystem {
    let z = sphere(nz, 1);
    let x = nx.map_or_else(|| z.clone(), |n| sphere(n, 2));
    let p = manufactured(Surface::Sphere, DiffusionTensor::Identity, 3.0, (0.0, 1.0));
    assemble(&p, &z, &x, SobolevKernel::new(m).unwrap()).unwrap()
}

fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn to_dvector(v: &Array1<f64>) -> DVector<f64> {
    DVector::from_iterator(v.len(), v.iter().copied())
}

#[test]
fn square_system_is_symmetric_and_factored() {
    let sys = example1(40, None, 4);
    let psi = to_dmatrix(&sys.psi_xz);
    assert!(max_abs(&(&psi - psi.transpose())) == 0.0);
    let qr = to_dmatrix(&sys.q) * to_dmatrix(&sys.r);
    assert!((qr - &psi).norm() <= 1e-12 * psi.norm());
    assert_eq!(sys.psi_zz(), &sys.psi_xz);
}

#[test]
fn entries_are_kernel_values() {
    let sys = example1(30, Some(50), 5);
    for (i, j) in [(0, 0), (7, 3), (49, 29), (21, 14)] {
        let e = sys.kernel.eval_full(&sys.collocation.points[i], &sys.centers.points[j]);
        assert_eq!(sys.psi_xz[[i, j]].to_bits(), e.value.to_bits());
    }
}

#[test]
fn oversampled_qr_reconstructs() {
    let sys = example1(60, Some(90), 6);
    let psi = to_dmatrix(&sys.psi_xz);
    let qr = to_dmatrix(&sys.q) * to_dmatrix(&sys.r);
    assert!((qr - &psi).norm() <= 1e-12 * psi.norm());
}

#[test]
fn operator_entries_match_finite_differences() {
    for (surface, tensor) in [
        (Surface::Sphere, DiffusionTensor::Identity),
        (Surface::DupinCyclide, DiffusionTensor::Anisotropic),
    ] {
        let z = sample_quasi_uniform(surface, 25, 3).unwrap();
        let x = sample_quasi_uniform(surface, 40, 4).unwrap();
        let problem = EllipticProblem::homogeneous(surface, tensor, 3.0).unwrap();
        let kernel = SobolevKernel::new(4).unwrap();
        let sys = assemble(&problem, &z, &x, kernel).unwrap();
        let scale = sys.lpsi_xz.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..20 {
            let (i, j) = ((7 * k + 3) % 40, (11 * k + 5) % 25);
            let column = KernelColumn {
                kernel,
                center: z.points[j],
            };
            let fd = fd_operator(&problem, &column, &x.points[i], 0.0, 1e-3);
            let err = (sys.lpsi_xz[[i, j]] - fd).abs();
            assert!(
                err <= 1e-5 * scale,
                "{surface:?} ({i}, {j}): {} vs {fd}",
                sys.lpsi_xz[[i, j]]
            );
        }
    }
}

#[test]
fn shape_error_when_undersampled() {
    let p = EllipticProblem::homogeneous(Surface::Sphere, DiffusionTensor::Identity, 1.0).unwrap();
    let r = assemble(&p, &sphere(20, 1), &sphere(10, 2), SobolevKernel::new(4).unwrap());
    assert!(matches!(r, Err(rbfmol::Error::Shape(_))));
}

#[test]
fn ode_matrix_matches_svd_pseudo_inverse() {
    let sys = example1(6, Some(12), 4);
    let psi = to_dmatrix(&sys.psi_xz);
    let tol = 12.0 * f64::EPSILON * oracles::jacobi_svd(&psi).1[0];
    let expected = -jacobi_pinv(&psi, tol) * to_dmatrix(&sys.lpsi_xz);
    let scale = max_abs(&expected);
    for m in [ode_matrix(&sys).unwrap(), pseudo_inverse_ode_matrix(&sys).unwrap()] {
        assert!(!m.degenerate);
        assert_eq!(m.rank, 6);
        let diff = max_abs(&(to_dmatrix(&m.matrix) - &expected));
        assert!(diff <= 1e-8 * scale, "{:?}: {diff:e} vs {scale:e}", m.route);
    }
}

#[test]
fn both_routes_solve_the_least_squares_problem() {
    let sys = example1(10, Some(18), 4);
    let lambda: Array1<f64> = (0..10).map(|k| (0.3 * k as f64).sin()).collect();
    let t = 0.4;
    let tri = MolRhs::new(&sys, OdeRoute::Triangular)
        .unwrap()
        .eval(t, &lambda.view())
        .unwrap();
    let pinv = MolRhs::new(&sys, OdeRoute::PseudoInverse)
        .unwrap()
        .eval(t, &lambda.view())
        .unwrap();

    let r = to_dmatrix(&sys.r);
    let c = to_dmatrix(&sys.reduced);
    let qf = to_dvector(&sys.projected_forcing(t).unwrap());
    let l = to_dvector(&lambda);
    let mass_residual = &r * to_dvector(&tri) - &c * &l - &qf;

    let psi = to_dmatrix(&sys.psi_xz);
    let target = -to_dmatrix(&sys.lpsi_xz) * &l + to_dvector(&sys.forcing_at(t));
    let normal_residual = psi.transpose() * (&psi * to_dvector(&pinv) - &target);

    let scale = (psi.transpose() * &target).amax();
    assert!(mass_residual.amax() <= 1e-8 * scale);
    assert!(normal_residual.amax() <= 1e-8 * scale);
    let gap = (to_dvector(&tri) - to_dvector(&pinv)).amax();
    assert!(gap <= 1e-8 * to_dvector(&tri).amax(), "{gap:e}");
}

#[test]
fn nodal_form_has_the_same_spectrum() {
    for (nz, nx) in [(12, 12), (16, 24), (20, 30)] {
        let sys = example1(nz, Some(nx), 4);
        let m = to_dmatrix(&ode_matrix(&sys).unwrap().matrix);
        let psi_zz = to_dmatrix(sys.psi_zz());
        let chol = psi_zz.clone().cholesky().unwrap();
        // (Ψ M Ψ⁻¹)ᵀ = Ψ⁻¹ Mᵀ Ψ
        let nodal = chol.solve(&(m.transpose() * &psi_zz)).transpose();
        let nodal_eigs: Vec<Complex64> = nodal
            .complex_eigenvalues()
            .iter()
            .map(|z| Complex64::new(z.re, z.im))
            .collect();
        let eigs = dense::eigenvalues_general(&ode_matrix(&sys).unwrap().matrix.view()).unwrap();
        let rho = eigs.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let d = multiset_distance(&eigs, &nodal_eigs);
        assert!(d <= 1e-6 * rho, "n_Z = {nz}: {d:e} (ρ = {rho:e})");
    }
}

#[test]
fn reaction_dominates_for_large_constant() {
    let b = 1e6;
    let z = sphere(6, 1);
    let p = EllipticProblem::homogeneous(Surface::Sphere, DiffusionTensor::Identity, b).unwrap();
    let sys = assemble(&p, &z, &z, SobolevKernel::new(4).unwrap()).unwrap();
    let m = ode_matrix(&sys).unwrap().matrix;
    for i in 0..6 {
        assert!((m[[i, i]] + b).abs() <= 1e-3 * b);
        for j in (0..6).filter(|&j| j != i) {
            assert!(m[[i, j]].abs() <= 1e-3 * b);
        }
    }
    let r = spectrum_report(&sys, &SpectrumOptions::default()).unwrap();
    for z in &r.eigenvalues {
        assert!((z - Complex64::new(-b, 0.0)).norm() <= 1e-3 * b, "{z}");
    }
    assert!(r.stable);
}

#[test]
fn spectrum_report_is_consistent() {
    for (nz, nx, m) in [(30, 30, 4), (30, 45, 6), (40, 40, 8)] {
        let sys = example1(nz, Some(nx), m);
        let opts = SpectrumOptions::default();
        let r = spectrum_report(&sys, &opts).unwrap();
        assert_eq!(r.eigenvalues.len(), nz);
        assert!(r.zero_count <= nz);
        assert_eq!(
            r.stable,
            r.max_real_part <= opts.stability_tolerance * r.spectral_radius.max(1.0)
        );
        let zeros = r
            .eigenvalues
            .iter()
            .filter(|z| z.norm() <= opts.zero_threshold * r.spectral_radius)
            .count();
        assert_eq!(zeros, r.zero_count);
        let expected = if nx == nz {
            OdeRoute::Triangular
        } else {
            OdeRoute::PseudoInverse
        };
        assert_eq!(r.route, expected);
        let side = r.sidecar();
        assert_eq!((side.n_z, side.n_x, side.m), (nz, nx, m));
    }
}

#[test]
fn interpolation_reproduces_trial_functions() {
    let sys = example1(50, Some(80), 4);
    let (kernel, center) = (sys.kernel, sys.centers.points[0]);
    let column = FnField::steady(move |p, _| kernel.value(p, &center));
    let l = interpolate_initial(&sys, &column).unwrap();
    for (k, v) in l.iter().enumerate() {
        let e = if k == 0 { 1.0 } else { 0.0 };
        assert!((v - e).abs() <= 1e-8, "{k}: {v}");
    }
    assert!(interpolate_initial(&sys, &Zero).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn interpolant_meets_the_data_at_the_centers() {
    let sys = example1(80, None, 5);
    let l = interpolate_initial(&sys, &ExpX1Solution).unwrap();
    let u = evaluate_solution(&sys, &l.view(), &sys.centers.points).unwrap();
    let kappa = sys.kernel_condition_number().unwrap();
    let g: Vec<f64> = sys.centers.points.iter().map(|z| ExpX1Solution.eval(z, 0.0)).collect();
    let g_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    let res = u.iter().zip(&g).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    assert!(res <= 1e-10 * kappa * g_norm, "{res:e}");
    let zero = evaluate_solution(&sys, &Array1::zeros(80).view(), &sys.centers.points).unwrap();
    assert!(zero.iter().all(|&v| v == 0.0));
}

#[test]
fn interpolant_converges_off_the_centers() {
    let sys = example1(100, None, 4);
    let l = interpolate_initial(&sys, &ExpX1Solution).unwrap();
    let held_out = sample_dense(Surface::Sphere, 500, 99).unwrap();
    let u = evaluate_solution(&sys, &l.view(), &held_out).unwrap();
    let err = held_out
        .iter()
        .zip(u.iter())
        .map(|(y, v)| (v - ExpX1Solution.eval(y, 0.0)).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-4, "{err:e}");
}

/// `Ψ(Z, Z) λ' = −L Ψ(Z, Z) λ + f(Z, t)` with a Cholesky solve per stage.
struct NodalSpd<'a> {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    lpsi: DMatrix<f64>,
    sys: &'a DiscreteSystem,
}

impl OdeRhs for NodalSpd<'_> {
    fn dim(&self) -> usize {
        self.lpsi.ncols()
    }
    fn eval(&self, t: f64, y: &ArrayView1<f64>) -> rbfmol::Result<Array1<f64>> {
        let f = to_dvector(&self.sys.forcing_at(t));
        let y = DVector::from_iterator(y.len(), y.iter().copied());
        let rhs = self.chol.solve(&(-&self.lpsi * y + f));
        Ok(rhs.iter().copied().collect())
    }
}

fn fixed(dt: f64) -> IntegrateOptions {
    IntegrateOptions {
        mode: StepMode::Fixed(dt),
        storage: StateStorage::Every,
        ..Default::default()
    }
}

#[test]
fn square_case_matches_direct_spd_integration() {
    let mut sys = example1(30, None, 4);
    sys.problem.t_span = (0.0, 0.5);
    let l0 = interpolate_initial(&sys, &ExpX1Solution).unwrap();
    let opts = fixed(0.01);
    let ours = integrate(&sys, &l0.view(), &opts).unwrap();
    let oracle_rhs = NodalSpd {
        chol: to_dmatrix(sys.psi_zz()).cholesky().unwrap(),
        lpsi: to_dmatrix(&sys.lpsi_xz),
        sys: &sys,
    };
    let oracle = rbfmol::mol::dopri5(&oracle_rhs, (0.0, 0.5), &l0.view(), &opts).unwrap();
    assert_eq!(ours.times.len(), oracle.times.len());
    assert_eq!(ours.accepted_steps, 50);
    let scale = ours
        .states
        .iter()
        .flat_map(|s| s.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()));
    for (a, b) in ours.states.iter().zip(&oracle.states) {
        let d = (a - b).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(d <= 1e-8 * scale, "{d:e} vs {scale:e}");
    }
}

#[test]
fn fixed_step_flow_is_linear() {
    let c = 3.7;
    let base = manufactured(Surface::Sphere, DiffusionTensor::Identity, 3.0, (0.0, 0.3));
    let z = sphere(25, 1);
    let x = sphere(40, 2);
    let kernel = SobolevKernel::new(5).unwrap();
    let forcing = base.forcing.clone();
    let scaled_forcing: Arc<dyn ScalarField> = Arc::new(FnField::new(move |p, t| c * forcing.eval(p, t)));
    let scaled = EllipticProblem {
        forcing: scaled_forcing,
        ..base.clone()
    };
    let sys = assemble(&base, &z, &x, kernel).unwrap();
    let sys_c = assemble(&scaled, &z, &x, kernel).unwrap();
    let l0 = interpolate_initial(&sys, &ExpX1Solution).unwrap();
    let opts = fixed(0.02);
    let a = integrate(&sys, &l0.view(), &opts).unwrap();
    let b = integrate(&sys_c, &(c * &l0).view(), &opts).unwrap();
    assert_eq!(a.times, b.times);
    for (ya, yb) in a.states.iter().zip(&b.states) {
        let scale = ya.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let d = (c * ya - yb).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(d <= 1e-12 * c * scale, "{d:e}");
    }
}

#[test]
fn oversampled_solve_is_accurate() {
    let sys = example1(120, Some(240), 5);
    let l0 = interpolate_initial(&sys, &ExpX1Solution).unwrap();
    let opts = IntegrateOptions {
        rtol: 1e-8,
        atol: 1e-10,
        ..Default::default()
    };
    let trace = integrate(&sys, &l0.view(), &opts).unwrap();
    assert_eq!(trace.route, OdeRoute::PseudoInverse);
    let eval = sample_dense(Surface::Sphere, 400, 7).unwrap();
    let u = evaluate_solution(&sys, &trace.final_state().view(), &eval).unwrap();
    let err = eval
        .iter()
        .zip(u.iter())
        .map(|(y, v)| (v - ExpX1Solution.eval(y, 1.0)).abs())
        .fold(0.0, f64::max);
    assert!(err <= 1e-3, "{err:e}");
    assert!(trace.times.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(trace.accepted_steps, trace.times.len() - 1);
}
