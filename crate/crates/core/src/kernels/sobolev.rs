use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::bessel::k0_k1;
use crate::{Error, Point, Result};

/// Smallest supported smoothness order; keeps every profile used by the
/// Hessian (`Φ_{ν-2}`) finite at coincident points.
pub const MIN_SMOOTHNESS: u32 = 4;

/// Radial profile `Φ_ν(r) = r^ν K_ν(r)` with its limit `2^{ν-1} Γ(ν)` at `r = 0`.
pub fn matern_phi(nu: u32, r: f64) -> Result<f64> {
    if nu == 0 {
        return Err(Error::Domain("Φ_ν needs ν ≥ 1".into()));
    }
    if r.is_nan() || r < 0.0 {
        return Err(Error::Domain(format!("Φ_ν needs r ≥ 0, got {r}")));
    }
    Ok(phi_ladder(nu, r)[0])
}

/// `[Φ_ν(r), Φ_{ν-1}(r), Φ_{ν-2}(r)]` for `ν ≥ 3` from one recurrence sweep.
///
/// Uses `Φ_{n+1} = r² Φ_{n-1} + 2n Φ_n`, the `r^n`-scaled form of the upward
/// `K` recurrence, which never divides by `r`.
pub(crate) fn phi_ladder(nu: u32, r: f64) -> [f64; 3] {
    if r == 0.0 {
        let at = |n: u32| if n == 0 { f64::INFINITY } else { phi_at_zero(n) };
        return [at(nu), at(nu.saturating_sub(1)), at(nu.saturating_sub(2))];
    }
    let (k0, k1, scaled) = k0_k1(r);
    let r2 = r * r;
    // phi[n] for n = 0, 1, ... kept in a rolling window
    let mut window = [f64::NAN; 3];
    let mut prev = k0;
    let mut cur = r * k1;
    let push = |w: &mut [f64; 3], v: f64| {
        w[2] = w[1];
        w[1] = w[0];
        w[0] = v;
    };
    push(&mut window, prev);
    if nu >= 1 {
        push(&mut window, cur);
    }
    for n in 1..nu {
        let next = r2 * prev + 2.0 * n as f64 * cur;
        prev = cur;
        cur = next;
        push(&mut window, cur);
    }
    if scaled {
        let damp = (-r).exp();
        for w in &mut window {
            *w *= damp;
        }
    }
    window
}

fn phi_at_zero(n: u32) -> f64 {
    // 2^{n-1} (n-1)!
    (1..n).fold(2f64.powi(n as i32 - 1), |acc, k| acc * k as f64)
}

/// Value, gradient and Hessian of `x ↦ Ψ(x, z)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelEval {
    pub value: f64,
    pub gradient: Vector3<f64>,
    pub hessian: Matrix3<f64>,
}

/// The `H^{m+1/2}(R³)`-reproducing Whittle–Matérn–Sobolev kernel
/// `Ψ(x, z) = Φ_ν(‖x − z‖)` with Bessel order `ν = m + 1/2 − d/2 = m − 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpec", into = "KernelSpec")]
pub struct SobolevKernel {
    m: u32,
}

#[derive(Serialize, Deserialize)]
struct KernelSpec {
    m: u32,
}

impl TryFrom<KernelSpec> for SobolevKernel {
    type Error = Error;
    fn try_from(s: KernelSpec) -> Result<Self> {
        SobolevKernel::new(s.m)
    }
}

impl From<SobolevKernel> for KernelSpec {
    fn from(k: SobolevKernel) -> Self {
        KernelSpec { m: k.m }
    }
}

impl SobolevKernel {
    /// Ambient dimension; half-integer Bessel orders (even `d`) are not supported.
    pub const DIM: u32 = 3;

    pub fn new(m: u32) -> Result<Self> {
        if m < MIN_SMOOTHNESS {
            return Err(Error::Domain(format!(
                "kernel smoothness m = {m} is below the supported minimum {MIN_SMOOTHNESS}"
            )));
        }
        Ok(Self { m })
    }

    pub fn smoothness(&self) -> u32 {
        self.m
    }

    pub fn nu(&self) -> u32 {
        self.m - 1
    }

    pub fn value(&self, x: &Point, z: &Point) -> f64 {
        phi_ladder(self.nu(), (x - z).norm())[0]
    }

    /// `Ψ(x, x)`.
    pub fn diagonal(&self) -> f64 {
        phi_at_zero(self.nu())
    }

    pub fn eval_full(&self, x: &Point, z: &Point) -> KernelEval {
        let d = x - z;
        let [v, p1, p2] = phi_ladder(self.nu(), d.norm());
        KernelEval {
            value: v,
            gradient: -p1 * d,
            hessian: p2 * d * d.transpose() - p1 * Matrix3::identity(),
        }
    }
}
