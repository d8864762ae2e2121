use std::sync::OnceLock;

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use super::{DiscreteSystem, OdeRoute};
use crate::dense::{self, DenseMatrix};
use crate::{Error, Result};

/// Right-hand side of `y' = F(t, y)`.
pub trait OdeRhs {
    fn dim(&self) -> usize;
    fn eval(&self, t: f64, y: &ArrayView1<f64>) -> Result<Array1<f64>>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepMode {
    Adaptive,
    /// Uniform steps of the given size, no error control.
    Fixed(f64),
}

/// Which states the trace keeps besides the requested output times.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateStorage {
    /// Every accepted step up to this many unknowns, output times only above.
    #[default]
    Auto,
    Every,
    OutputsOnly,
}

const DENSE_STORAGE_LIMIT: usize = 1500;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegrateOptions {
    pub rtol: f64,
    pub atol: f64,
    pub mode: StepMode,
    /// Times at which the state is recorded; steps are shortened to land on them.
    pub output_times: Vec<f64>,
    /// Exhausting this budget ends the run like a step-size underflow.
    pub max_steps: usize,
    /// Largest adaptive step; `None` means a tenth of the time span.
    pub max_step: Option<f64>,
    pub storage: StateStorage,
    /// How `R` is inverted; see [`OdeRoute::resolve`].
    pub route: OdeRoute,
}

impl Default for IntegrateOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-3,
            atol: 1e-6,
            mode: StepMode::Adaptive,
            output_times: Vec::new(),
            max_steps: 100_000,
            max_step: None,
            storage: StateStorage::Auto,
            route: OdeRoute::Auto,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Completed,
    StiffnessAbort,
    NonfiniteAbort,
}

/// Accepted steps and recorded states of one integration.
#[derive(Clone, Debug)]
pub struct SolveTrace {
    /// `t₀` followed by the end time of every accepted step.
    pub times: Vec<f64>,
    pub step_sizes: Vec<f64>,
    /// States at `times` (empty unless dense storage was used).
    pub states: Vec<Array1<f64>>,
    /// States at `t₀`, the requested output times reached, and the final time.
    pub outputs: Vec<(f64, Array1<f64>)>,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub status: SolveStatus,
    /// The mass matrix is numerically singular.
    pub degenerate_mass: bool,
    /// Route used to invert the mass matrix; `Auto` for plain ODEs.
    pub route: OdeRoute,
}

impl SolveTrace {
    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trace starts at t0")
    }

    pub fn final_state(&self) -> &Array1<f64> {
        &self.outputs.last().expect("trace starts at t0").1
    }

    /// The recorded state at exactly `t`, if any.
    pub fn output_at(&self, t: f64) -> Option<&Array1<f64>> {
        self.outputs.iter().find(|(s, _)| *s == t).map(|(_, y)| y)
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// b5 − b4
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn scaled_max(v: &Array1<f64>, y: &Array1<f64>, y_new: Option<&Array1<f64>>, rtol: f64, atol: f64) -> f64 {
    let mut m = 0.0f64;
    for i in 0..v.len() {
        let mag = match y_new {
            Some(n) => y[i].abs().max(n[i].abs()),
            None => y[i].abs(),
        };
        let r = (v[i] / (atol + rtol * mag)).abs();
        if r.is_nan() {
            return f64::NAN;
        }
        m = m.max(r);
    }
    m
}

/// Starting step from the local Lipschitz estimate of the right-hand side.
fn initial_step(
    rhs: &dyn OdeRhs,
    t0: f64,
    y0: &Array1<f64>,
    f0: &Array1<f64>,
    opts: &IntegrateOptions,
    h_max: f64,
) -> Result<f64> {
    let d0 = scaled_max(y0, y0, None, opts.rtol, opts.atol);
    let d1 = scaled_max(f0, y0, None, opts.rtol, opts.atol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(h_max);
    let y1 = y0 + &(f0 * h0);
    let f1 = rhs.eval(t0 + h0, &y1.view())?;
    let d2 = scaled_max(&(&f1 - f0), y0, None, opts.rtol, opts.atol) / h0;
    let dm = d1.max(d2);
    let h1 = if dm <= 1e-15 || !dm.is_finite() {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / dm).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(h_max))
}

struct Recorder {
    dense: bool,
    trace: SolveTrace,
}

impl Recorder {
    fn step(&mut self, t: f64, h: f64, y: &Array1<f64>) {
        self.trace.times.push(t);
        self.trace.step_sizes.push(h);
        self.trace.accepted_steps += 1;
        if self.dense {
            self.trace.states.push(y.clone());
        }
    }

    fn output(&mut self, t: f64, y: &Array1<f64>) {
        if self.trace.outputs.last().map(|(s, _)| *s) != Some(t) {
            self.trace.outputs.push((t, y.clone()));
        }
    }

    fn finish(mut self, status: SolveStatus, t: f64, y: &Array1<f64>) -> SolveTrace {
        self.output(t, y);
        self.trace.status = status;
        self.trace
    }
}

/// Dormand–Prince 5(4) with first-same-as-last stages, propagating the
/// fifth-order solution.
pub fn dopri5(
    rhs: &dyn OdeRhs,
    t_span: (f64, f64),
    y0: &ArrayView1<f64>,
    opts: &IntegrateOptions,
) -> Result<SolveTrace> {
    let (t0, t_end) = t_span;
    if !(t0 < t_end) || !t_end.is_finite() {
        return Err(Error::Config(format!("invalid time span {t_span:?}")));
    }
    if y0.len() != rhs.dim() {
        return Err(Error::Shape(format!(
            "initial state has length {}, expected {}",
            y0.len(),
            rhs.dim()
        )));
    }
    if !(opts.rtol > 0.0) || !(opts.atol >= 0.0) {
        return Err(Error::Config(format!(
            "invalid tolerances rtol = {}, atol = {}",
            opts.rtol, opts.atol
        )));
    }
    let mut outputs: Vec<f64> = opts
        .output_times
        .iter()
        .copied()
        .filter(|&s| s > t0 && s < t_end)
        .collect();
    outputs.sort_by(f64::total_cmp);
    outputs.dedup();
    outputs.push(t_end);

    let dense = match opts.storage {
        StateStorage::Every => true,
        StateStorage::OutputsOnly => false,
        StateStorage::Auto => rhs.dim() <= DENSE_STORAGE_LIMIT,
    };
    let mut y = y0.to_owned();
    let mut rec = Recorder {
        dense,
        trace: SolveTrace {
            times: vec![t0],
            step_sizes: Vec::new(),
            states: if dense { vec![y.clone()] } else { Vec::new() },
            outputs: vec![(t0, y.clone())],
            accepted_steps: 0,
            rejected_steps: 0,
            status: SolveStatus::Completed,
            degenerate_mass: false,
            route: OdeRoute::Auto,
        },
    };
    if y.iter().any(|v| !v.is_finite()) {
        return Ok(rec.finish(SolveStatus::NonfiniteAbort, t0, &y));
    }

    let span = t_end - t0;
    let h_min = 1e-14 * span;
    let h_max = opts.max_step.unwrap_or(0.1 * span).min(span);
    let mut t = t0;
    let mut next_out = 0;
    let mut k: [Array1<f64>; 7] = std::array::from_fn(|_| Array1::zeros(0));
    k[0] = rhs.eval(t, &y.view())?;

    let (adaptive, mut h) = match opts.mode {
        StepMode::Adaptive => (true, initial_step(rhs, t0, &y, &k[0], opts, h_max)?),
        StepMode::Fixed(dt) => {
            if !(dt > 0.0) || !dt.is_finite() {
                return Err(Error::Config(format!("invalid fixed step {dt}")));
            }
            (false, dt)
        }
    };

    loop {
        if rec.trace.accepted_steps + rec.trace.rejected_steps >= opts.max_steps {
            return Ok(rec.finish(SolveStatus::StiffnessAbort, t, &y));
        }
        let target = outputs[next_out];
        let mut step = h;
        let landing = t + step >= target - 1e-12 * span.max(target.abs());
        if landing {
            step = target - t;
        }
        if adaptive && step < h_min && !landing {
            return Ok(rec.finish(SolveStatus::StiffnessAbort, t, &y));
        }

        for s in 1..7 {
            let mut ys = y.clone();
            for (j, a) in A[s].iter().enumerate().take(s) {
                if *a != 0.0 {
                    ys.scaled_add(step * a, &k[j]);
                }
            }
            k[s] = rhs.eval(t + C[s] * step, &ys.view())?;
            if s == 6 {
                // stage 7 is evaluated at the fifth-order solution
                let y_new = ys;
                let mut err_vec = Array1::zeros(y.len());
                for (j, e) in E.iter().enumerate() {
                    if *e != 0.0 {
                        err_vec.scaled_add(step * e, &k[j]);
                    }
                }
                let err = if adaptive {
                    scaled_max(&err_vec, &y, Some(&y_new), opts.rtol, opts.atol)
                } else {
                    0.0
                };
                if y_new.iter().any(|v| !v.is_finite()) || err.is_nan() {
                    if adaptive && err.is_nan() && y_new.iter().all(|v| v.is_finite()) {
                        rec.trace.rejected_steps += 1;
                        h = 0.2 * step;
                        break;
                    }
                    return Ok(rec.finish(SolveStatus::NonfiniteAbort, t, &y));
                }
                if err <= 1.0 {
                    t = if landing { target } else { t + step };
                    y = y_new;
                    k[0] = k[6].clone();
                    rec.step(t, step, &y);
                    if landing {
                        rec.output(t, &y);
                        next_out += 1;
                        if next_out == outputs.len() {
                            return Ok(rec.finish(SolveStatus::Completed, t, &y));
                        }
                    }
                    if adaptive {
                        let fac = if err == 0.0 {
                            5.0
                        } else {
                            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                        };
                        // a step shortened to land on an output time does not shrink the next one
                        h = if landing { h.max(step * fac) } else { step * fac };
                        h = h.min(h_max);
                    }
                } else {
                    rec.trace.rejected_steps += 1;
                    h = step * (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
                }
            }
        }
    }
}

/// `λ' = R⁻¹ (C λ + Qᵀ f(X, t))` of an assembled system, with `R⁻¹` either
/// a floored triangular solve or the truncated pseudoinverse.
pub struct MolRhs<'a> {
    sys: &'a DiscreteSystem,
    inverse: Option<Pinv>,
}

struct Pinv {
    pinv: DenseMatrix,
    matrix: DenseMatrix,
    rank: usize,
    steady: OnceLock<Array1<f64>>,
}

impl<'a> MolRhs<'a> {
    pub fn new(sys: &'a DiscreteSystem, route: OdeRoute) -> Result<Self> {
        let inverse = match route.resolve(sys) {
            OdeRoute::PseudoInverse => {
                let (pinv, rank) = dense::truncated_pseudo_inverse(&sys.r.view())?;
                let matrix = pinv.dot(&sys.reduced);
                Some(Pinv {
                    pinv,
                    matrix,
                    rank,
                    steady: OnceLock::new(),
                })
            }
            _ => None,
        };
        Ok(Self { sys, inverse })
    }

    pub fn route(&self) -> OdeRoute {
        match self.inverse {
            Some(_) => OdeRoute::PseudoInverse,
            None => OdeRoute::Triangular,
        }
    }

    /// Whether the inverted mass matrix is numerically singular.
    pub fn degenerate(&self) -> bool {
        match &self.inverse {
            Some(p) => p.rank < self.sys.n_centers(),
            None => !self.sys.rank.full_rank(),
        }
    }

    fn forcing(&self, p: &Pinv, t: f64) -> Result<Array1<f64>> {
        if !self.sys.problem.forcing.is_time_independent() {
            return Ok(p.pinv.dot(&self.sys.projected_forcing(t)?));
        }
        if let Some(v) = p.steady.get() {
            return Ok(v.clone());
        }
        let v = p.pinv.dot(&self.sys.projected_forcing(t)?);
        let _ = p.steady.set(v.clone());
        Ok(v)
    }
}

impl OdeRhs for MolRhs<'_> {
    fn dim(&self) -> usize {
        self.sys.n_centers()
    }

    fn eval(&self, t: f64, y: &ArrayView1<f64>) -> Result<Array1<f64>> {
        match &self.inverse {
            Some(p) => {
                let mut rhs = self.forcing(p, t)?;
                ndarray::linalg::general_mat_vec_mul(1.0, &p.matrix, y, 1.0, &mut rhs);
                Ok(rhs)
            }
            None => {
                let mut rhs = self.sys.projected_forcing(t)?;
                ndarray::linalg::general_mat_vec_mul(1.0, &self.sys.reduced, y, 1.0, &mut rhs);
                self.sys.mass().solve(&rhs.view())
            }
        }
    }
}

/// Integrates the mass-matrix ODE of `sys` over its problem's time span.
pub fn integrate(sys: &DiscreteSystem, lambda0: &ArrayView1<f64>, opts: &IntegrateOptions) -> Result<SolveTrace> {
    let rhs = MolRhs::new(sys, opts.route)?;
    let mut trace = dopri5(&rhs, sys.problem.t_span, lambda0, opts)?;
    trace.degenerate_mass = rhs.degenerate();
    trace.route = rhs.route();
    Ok(trace)
}
