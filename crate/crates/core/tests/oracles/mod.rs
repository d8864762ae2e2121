//! Reference implementations used only as test oracles. None of them share
//! code paths with the library.
#![allow(dead_code)]

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64;
use rbfmol::geometry::Surface;
use rbfmol::operator::{AmbientFunction, EllipticProblem};
use rbfmol::Point;

/// `K_ν(x) = ∫₀^∞ exp(−x cosh t) cosh(ν t) dt` by the trapezoid rule.
pub fn bessel_k_integral(nu: f64, x: f64) -> f64 {
    let h = (0.05f64).min(1.0 / (5.0 * x.sqrt()));
    let f = |t: f64| (-x * t.cosh()).exp() * (nu * t).cosh();
    let mut sum = 0.5 * f(0.0);
    let mut k = 1;
    loop {
        let v = f(k as f64 * h);
        sum += v;
        if v < 1e-18 * sum {
            break;
        }
        k += 1;
    }
    sum * h
}

/// One-sided Jacobi SVD: `(U, σ, V)` with `A = U diag(σ) Vᵀ`, `σ` descending.
pub fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    assert!(m >= n);
    let mut u = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = u.column(p).norm_squared();
                let beta: f64 = u.column(q).norm_squared();
                let gamma: f64 = u.column(p).dot(&u.column(q));
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut u, &mut v] {
                    for i in 0..mat.nrows() {
                        let (x, y) = (mat[(i, p)], mat[(i, q)]);
                        mat[(i, p)] = c * x - s * y;
                        mat[(i, q)] = s * x + c * y;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| u.column(j).norm()).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut uo = DMatrix::zeros(m, n);
    let mut vo = DMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        s.push(norms[j]);
        if norms[j] > 0.0 {
            uo.set_column(k, &(u.column(j) / norms[j]));
        }
        vo.set_column(k, &v.column(j));
    }
    (uo, s, vo)
}

/// Pseudoinverse from [`jacobi_svd`] truncated at `tol · σ_max`.
pub fn jacobi_pinv(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let (u, s, v) = jacobi_svd(a);
    let mut out = DMatrix::zeros(a.ncols(), a.nrows());
    for (k, &sk) in s.iter().enumerate() {
        if sk > tol * s[0] {
            out += v.column(k) * u.column(k).transpose() / sk;
        }
    }
    out
}

/// Characteristic polynomial coefficients `[1, c₁, …, c_n]` of
/// `det(λ I − A) = λⁿ + c₁ λⁿ⁻¹ + … + c_n` by Faddeev–LeVerrier.
pub fn charpoly(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut coeffs = vec![1.0];
    let mut m = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        m = a * &m + DMatrix::identity(n, n) * coeffs[k - 1];
        let c = -(a * &m).trace() / k as f64;
        coeffs.push(c);
    }
    coeffs
}

/// Roots of a monic polynomial `[1, c₁, …, c_n]` by Aberth–Ehrlich iteration.
pub fn polynomial_roots(coeffs: &[f64]) -> Vec<Complex64> {
    let n = coeffs.len() - 1;
    let eval = |z: Complex64| {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in coeffs {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    };
    let radius = 1.0 + coeffs[1..].iter().fold(0.0f64, |a, c| a.max(c.abs()));
    let mut z: Vec<Complex64> = (0..n)
        .map(|k| Complex64::from_polar(0.5 * radius, 0.4 + std::f64::consts::TAU * k as f64 / n as f64))
        .collect();
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for i in 0..n {
            let (p, dp) = eval(z[i]);
            if p.norm() == 0.0 {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n).filter(|&j| j != i).map(|j| 1.0 / (z[i] - z[j])).sum();
            let w = ratio / (1.0 - ratio * repulsion);
            z[i] -= w;
            moved = moved.max(w.norm() / z[i].norm().max(1.0));
        }
        if moved < 1e-15 {
            break;
        }
    }
    z
}

/// Greedy matching distance between two eigenvalue multisets.
pub fn multiset_distance(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut left: Vec<Complex64> = b.to_vec();
    let mut worst = 0.0f64;
    for x in a {
        let (k, d) = left
            .iter()
            .enumerate()
            .map(|(k, y)| (k, (x - y).norm()))
            .min_by(|p, q| p.1.total_cmp(&q.1))
            .unwrap();
        worst = worst.max(d);
        left.swap_remove(k);
    }
    worst
}

/// Plain Cholesky; `None` unless every pivot is positive.
pub fn cholesky(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = a.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return None;
        }
        l[(j, j)] = d.sqrt();
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / l[(j, j)];
        }
    }
    Some(l)
}

/// Fourth-order central first-derivative weights, to be divided by `12h`.
const STENCIL: [(f64, f64); 4] = [(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)];

/// Orthonormal tangent pair at an on-surface point.
pub fn tangent_basis(surface: Surface, x: &Point) -> [Vector3<f64>; 2] {
    let n = surface.gradient(x).normalize();
    let seed = if n.x.abs() < 0.6 { Vector3::x() } else { Vector3::y() };
    let t1 = (seed - n * n.dot(&seed)).normalize();
    [t1, n.cross(&t1)]
}

/// Surface gradient by fourth-order central differences along retracted
/// tangent stencils.
pub fn fd_surface_gradient(surface: Surface, u: &dyn Fn(&Point) -> f64, x: &Point, h: f64) -> Vector3<f64> {
    let mut g = Vector3::zeros();
    for t in tangent_basis(surface, x) {
        for &(step, w) in &STENCIL {
            let p = surface.closest_point(&(x + step * h * t)).unwrap();
            g += t * (w * u(&p) / (12.0 * h));
        }
    }
    g
}

/// `L u(x, t)` from nested retracted finite differences: the flux
/// `A ∇_S u` is differenced along tangents and its surface divergence taken
/// as `Σ_k t_kᵀ ∂_{t_k} g`.
pub fn fd_operator(problem: &EllipticProblem, u: &dyn AmbientFunction, x: &Point, t: f64, h: f64) -> f64 {
    let s = problem.surface;
    let value = |p: &Point| u.value(p, t);
    let flux = |p: &Point| -> Vector3<f64> {
        let (a, _) = problem.tensor.eval(s, p).unwrap();
        a * fd_surface_gradient(s, &value, p, h)
    };
    let mut div = 0.0;
    for tk in tangent_basis(s, x) {
        for &(step, w) in &STENCIL {
            let p = s.closest_point(&(x + step * h * tk)).unwrap();
            div += w * tk.dot(&flux(&p)) / (12.0 * h);
        }
    }
    -div + problem.reaction * u.value(x, t)
}

/// Fourth-order central-difference gradient and Hessian of an ambient function.
pub fn fd_derivatives(f: &dyn Fn(&Point) -> f64, x: &Point, h: f64) -> (Vector3<f64>, Matrix3<f64>) {
    let e = |i: usize, s: f64| Vector3::ith(i, s * h);
    let g = Vector3::from_fn(|i, _| STENCIL.iter().map(|&(s, w)| w * f(&(x + e(i, s)))).sum::<f64>() / (12.0 * h));
    let hess = Matrix3::from_fn(|i, j| {
        let mut acc = 0.0;
        for &(si, wi) in &STENCIL {
            for &(sj, wj) in &STENCIL {
                acc += wi * wj * f(&(x + e(i, si) + e(j, sj)));
            }
        }
        acc / (144.0 * h * h)
    });
    (g, hess)
}

pub fn to_dmatrix(a: &ndarray::Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}
