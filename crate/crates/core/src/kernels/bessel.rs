//! Modified Bessel functions of the second kind, `K_n(r)`, for integer order.
//!
//! `K_0` and `K_1` come from their ascending series for `r < 2` and from
//! Steed's continued fraction (Temme's CF2) for `r >= 2`; higher orders follow
//! by upward recurrence, which is the stable direction for `K`.

use crate::{Error, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_LIMIT: f64 = 2.0;
const CF_MAX_ITER: usize = 10_000;

/// Value of `K_n(r)` plus an underflow marker.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BesselK {
    pub value: f64,
    /// Set when the true value is below the smallest normal double; `value`
    /// is then 0 or subnormal.
    pub underflow: bool,
}

/// `K_order(r)` for `r > 0`.
pub fn bessel_k(order: u32, r: f64) -> Result<BesselK> {
    if r.is_nan() || r <= 0.0 {
        return Err(Error::Domain(format!("K_{order}(r) requires r > 0, got {r}")));
    }
    if r.is_infinite() {
        return Ok(BesselK {
            value: 0.0,
            underflow: true,
        });
    }
    let (k0, k1, scaled) = k0_k1(r);
    let (mut prev, mut cur) = (k0, k1);
    if order == 0 {
        cur = k0;
    } else {
        for n in 1..order {
            let next = prev + (2.0 * n as f64 / r) * cur;
            prev = cur;
            cur = next;
        }
    }
    let value = if scaled { cur * (-r).exp() } else { cur };
    Ok(BesselK {
        value,
        underflow: value < f64::MIN_POSITIVE,
    })
}

/// `(K_0(r), K_1(r), scaled)`; when `scaled` both carry an extra factor `e^r`.
pub(crate) fn k0_k1(r: f64) -> (f64, f64, bool) {
    if r < SERIES_LIMIT {
        let (k0, k1) = k0_k1_series(r);
        (k0, k1, false)
    } else {
        let (k0, k1) = k0_k1_scaled_cf(r);
        (k0, k1, true)
    }
}

fn k0_k1_series(x: f64) -> (f64, f64) {
    let y = 0.25 * x * x;
    let log_half = (0.5 * x).ln();

    // t_k = y^k / (k!)^2, u_k = y^k / (k! (k+1)!)
    let mut t = 1.0;
    let mut u = 1.0;
    let mut psi_k1 = -EULER_GAMMA; // psi(k + 1)
    let mut i0 = 0.0;
    let mut i1_sum = 0.0;
    let mut k0_sum = 0.0;
    let mut k1_sum = 0.0;
    for k in 0..60 {
        let kf = k as f64;
        let psi_k2 = psi_k1 + 1.0 / (kf + 1.0);
        i0 += t;
        i1_sum += u;
        k0_sum += psi_k1 * t;
        k1_sum += (psi_k1 + psi_k2) * u;
        if t < 1e-18 * i0.abs() && k > 2 {
            break;
        }
        t *= y / ((kf + 1.0) * (kf + 1.0));
        u *= y / ((kf + 1.0) * (kf + 2.0));
        psi_k1 = psi_k2;
    }
    let i1 = 0.5 * x * i1_sum;
    let k0 = -log_half * i0 + k0_sum;
    let k1 = 1.0 / x + log_half * i1 - 0.25 * x * k1_sum;
    (k0, k1)
}

/// Steed's algorithm for `e^x K_0(x)` and `e^x K_1(x)`, accurate for `x >= 2`.
fn k0_k1_scaled_cf(x: f64) -> (f64, f64) {
    let a1 = 0.25;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut h = d;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..CF_MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    h *= a1;
    let k0 = (std::f64::consts::PI / (2.0 * x)).sqrt() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}
