use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use ndarray::Array1;
use rbfmol::geometry::{
    sample_dense, sample_narrow_band, sample_quasi_uniform, sample_torus_square_grid, CloudMetadata, PointCloud,
};
use rbfmol::io;
use rbfmol::kernels::SobolevKernel;
use rbfmol::mol::{
    assemble, initial_coefficients, integrate, spectrum_report, DiscreteSystem, InitialFit, IntegrateOptions, OdeRoute,
    SolveStatus, SolveTrace, SpectrumOptions, SpectrumReport, StepMode,
};
use rbfmol::operator::{
    manufactured_forcing, AmbientFunction, AzimuthalPeak, EllipticProblem, ExpX1Solution, GaussianPeak, ScalarField,
    Zero,
};
use rbfmol::Point;
use serde::Serialize;

use crate::config::{Layout, ScenarioConfig, Source};
use crate::plot::emit_plots;
use crate::{ExpError, ExpResult};

/// Density of the dense set used to estimate torus-grid fill distances.
const GRID_FILL_DENSITY: usize = 20;

/// Trial centers and collocation points of one run.
#[derive(Clone, Debug)]
pub struct Clouds {
    pub centers: PointCloud,
    pub collocation: PointCloud,
}

/// Samples `Z` and `X` as prescribed by the layout. `X = Z` for equal counts
/// on quasi-uniform and grid layouts.
pub fn sample_clouds(cfg: &ScenarioConfig) -> ExpResult<Clouds> {
    let centers = sample_centers(cfg)?;
    let collocation = if shares_centers(cfg) {
        centers.clone()
    } else {
        sample_collocation(cfg)?
    };
    Ok(Clouds { centers, collocation })
}

/// Whether the layout reuses the centers as collocation points.
pub fn shares_centers(cfg: &ScenarioConfig) -> bool {
    cfg.collocation_count() == cfg.n_z && cfg.layout != Layout::NarrowBand
}

pub fn sample_centers(cfg: &ScenarioConfig) -> ExpResult<PointCloud> {
    let s = cfg.surface;
    Ok(match cfg.layout {
        Layout::QuasiUniform => sample_quasi_uniform(s, cfg.n_z, cfg.seed)?,
        Layout::NarrowBand => sample_narrow_band(s, cfg.band_delta, cfg.n_z)?.cloud,
        Layout::TorusGrid => sample_torus_square_grid(cfg.n_z, GRID_FILL_DENSITY * cfg.n_z)?,
    })
}

/// Collocation points sampled independently of the centers.
pub fn sample_collocation(cfg: &ScenarioConfig) -> ExpResult<PointCloud> {
    let n_x = cfg.collocation_count();
    Ok(match cfg.layout {
        Layout::QuasiUniform | Layout::NarrowBand => sample_quasi_uniform(cfg.surface, n_x, cfg.seed + 1)?,
        Layout::TorusGrid => sample_torus_square_grid(n_x, GRID_FILL_DENSITY * n_x)?,
    })
}

/// Seeded evaluation cloud for errors and snapshots.
pub fn evaluation_points(cfg: &ScenarioConfig) -> ExpResult<Vec<Point>> {
    Ok(sample_dense(cfg.surface, cfg.eval_points, cfg.seed + 2)?)
}

type Exact = Option<Arc<dyn AmbientFunction>>;

/// The PDE of a configuration and its exact solution, when known.
pub fn build_problem(cfg: &ScenarioConfig) -> ExpResult<(EllipticProblem, Exact)> {
    let (s, a, b) = (cfg.surface, cfg.tensor, cfg.reaction);
    let span = (cfg.t_span[0], cfg.t_span[1]);
    let (forcing, initial, exact): (Arc<dyn ScalarField>, Arc<dyn ScalarField>, Exact) = match cfg.source {
        Source::ExpX1 => {
            let base = EllipticProblem::homogeneous(s, a, b)?;
            let f = manufactured_forcing(&base, Arc::new(ExpX1Solution))?;
            (Arc::new(f), Arc::new(ExpX1Solution), Some(Arc::new(ExpX1Solution)))
        }
        Source::AzimuthalPeak => (Arc::new(AzimuthalPeak), Arc::new(Zero), None),
        Source::GaussianPeak => (Arc::new(GaussianPeak::orthocircle()), Arc::new(Zero), None),
    };
    let problem = EllipticProblem::new(s, a, b, forcing, initial, span)?;
    Ok((problem, exact))
}

/// Step counts and status of a time integration.
#[derive(Clone, Debug, Serialize)]
pub struct SolveSummary {
    pub status: SolveStatus,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub final_time: f64,
    pub degenerate_mass: bool,
    pub route: OdeRoute,
    pub initial_fit: InitialFit,
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorSample {
    pub t: f64,
    pub linf_err: f64,
}

/// Shape of the solution at one output time.
#[derive(Clone, Debug, Serialize)]
pub struct SnapshotStats {
    pub t: f64,
    pub max_u: f64,
    pub argmax: [f64; 3],
    /// Fraction of evaluation points with `u > max_u / 2`, an area estimate
    /// of the half-maximum level set.
    pub above_half_fraction: f64,
}

/// Everything one run measured. Non-finite numbers are serialized as `null`
/// and explained by an entry of `failures`.
#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub config: ScenarioConfig,
    pub m: u32,
    pub n_z: usize,
    pub n_x: usize,
    pub centers: Option<CloudMetadata>,
    pub collocation: Option<CloudMetadata>,
    pub kappa: f64,
    pub spectrum: Option<SpectrumReport>,
    pub solve: Option<SolveSummary>,
    pub errors: Vec<ErrorSample>,
    /// Max error at the final time; NaN without an exact solution or after
    /// an aborted solve.
    pub final_error: f64,
    pub snapshots: Vec<SnapshotStats>,
    pub wall_time_s: f64,
    pub failures: Vec<String>,
}

impl RunReport {
    fn empty(cfg: &ScenarioConfig) -> Self {
        Self {
            config: cfg.clone(),
            m: cfg.m,
            n_z: cfg.n_z,
            n_x: cfg.collocation_count(),
            centers: None,
            collocation: None,
            kappa: f64::NAN,
            spectrum: None,
            solve: None,
            errors: Vec::new(),
            final_error: f64::NAN,
            snapshots: Vec::new(),
            wall_time_s: 0.0,
            failures: Vec::new(),
        }
    }

    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn accepted_steps(&self) -> Option<usize> {
        self.solve.as_ref().map(|s| s.accepted_steps)
    }
}

/// Output times `t₀ + k (T − t₀) / count`, `k = 1..=count`.
pub fn output_times(cfg: &ScenarioConfig) -> Vec<f64> {
    let [t0, t1] = cfg.t_span;
    let n = cfg.output_count;
    (1..=n)
        .map(|k| {
            if k == n {
                t1
            } else {
                t0 + (t1 - t0) * k as f64 / n as f64
            }
        })
        .collect()
}

/// Runs one configuration and writes its artifacts under `cfg.run_dir()`.
pub fn run_scenario(cfg: &ScenarioConfig) -> ExpResult<RunReport> {
    cfg.validate()?;
    if cfg.grid.is_some() {
        return Err(ExpError::Config(format!(
            "scenario `{}` is a grid; run it as a table",
            cfg.scenario
        )));
    }
    let dir = cfg.run_dir();
    let clouds = match sample_clouds(cfg) {
        Ok(c) => c,
        Err(ExpError::Core(e)) => {
            let mut report = RunReport::empty(cfg);
            report.failures.push(format!("sampling: {e}"));
            write_report(&dir, &report)?;
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    run_with_clouds(cfg, &clouds, &dir)
}

/// Runs one configuration on already sampled clouds, writing into `dir`.
pub fn run_with_clouds(cfg: &ScenarioConfig, clouds: &Clouds, dir: &Path) -> ExpResult<RunReport> {
    let start = Instant::now();
    std::fs::create_dir_all(dir)?;
    io::write_atomic(&dir.join("config.toml"), cfg.to_toml()?.as_bytes())?;
    let mut report = RunReport::empty(cfg);
    report.n_x = clouds.collocation.len();
    report.centers = Some(clouds.centers.metadata(cfg.surface));
    report.collocation = Some(clouds.collocation.metadata(cfg.surface));

    if let Err(e) = compute(cfg, clouds, dir, &mut report) {
        report.failures.push(e.to_string());
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    write_report(dir, &report)?;
    if let Err(e) = emit_plots(&[dir.to_path_buf()], dir) {
        eprintln!("plotting {} failed: {e}", dir.display());
    }
    Ok(report)
}

fn write_report(dir: &Path, report: &RunReport) -> ExpResult<()> {
    std::fs::create_dir_all(dir)?;
    io::write_json(&dir.join("report.json"), report)?;
    Ok(())
}

fn compute(cfg: &ScenarioConfig, clouds: &Clouds, dir: &Path, report: &mut RunReport) -> ExpResult<()> {
    let (problem, exact) = build_problem(cfg)?;
    let kernel = SobolevKernel::new(cfg.m)?;
    let sys = assemble(&problem, &clouds.centers, &clouds.collocation, kernel)?;
    match sys.kernel_condition_number() {
        Ok(k) => report.kappa = k,
        Err(e) => report.failures.push(format!("condition number: {e}")),
    }

    if cfg.mode.spectrum() {
        match spectrum_report(&sys, &SpectrumOptions::default()) {
            Ok(spec) => {
                io::write_eigenvalues_csv(&dir.join("spectrum.csv"), &spec.eigenvalues)?;
                io::write_json(&dir.join("spectrum.json"), &spec.sidecar())?;
                report.spectrum = Some(spec);
            }
            Err(e) => report.failures.push(format!("spectrum: {e}")),
        }
    }
    if cfg.mode.solve() {
        solve(cfg, &sys, exact.as_deref(), dir, report)?;
    }
    Ok(())
}

fn solve(
    cfg: &ScenarioConfig,
    sys: &DiscreteSystem,
    exact: Option<&dyn AmbientFunction>,
    dir: &Path,
    report: &mut RunReport,
) -> ExpResult<()> {
    let (lambda0, fit) = initial_coefficients(sys, sys.problem.initial.as_ref())?;
    let times = output_times(cfg);
    let opts = IntegrateOptions {
        rtol: cfg.rtol,
        atol: cfg.atol,
        mode: cfg.fixed_dt.map_or(StepMode::Adaptive, StepMode::Fixed),
        output_times: times.clone(),
        ..Default::default()
    };
    let trace = integrate(sys, &lambda0.view(), &opts)?;
    write_steps(&dir.join("steps.csv"), &trace)?;
    report.solve = Some(SolveSummary {
        status: trace.status,
        accepted_steps: trace.accepted_steps,
        rejected_steps: trace.rejected_steps,
        final_time: trace.final_time(),
        degenerate_mass: trace.degenerate_mass,
        route: trace.route,
        initial_fit: fit,
    });
    if trace.status != SolveStatus::Completed {
        report
            .failures
            .push(format!("{:?} at t = {}", trace.status, trace.final_time()));
    }

    let eval = evaluation_points(cfg)?;
    let basis = sys.evaluation_matrix(&eval);
    for (k, t) in times.iter().enumerate() {
        let Some(lambda) = trace.output_at(*t) else { continue };
        let u = basis.dot(lambda);
        if let Some(exact) = exact {
            report.errors.push(ErrorSample {
                t: *t,
                linf_err: max_error(&eval, &u, exact, *t),
            });
        }
        if cfg.snapshots {
            io::write_snapshot_csv(
                &dir.join(format!("snapshot_t{}.csv", k + 1)),
                &eval,
                u.as_slice().unwrap(),
            )?;
            report.snapshots.push(snapshot_stats(*t, &eval, &u));
        }
    }
    io::write_csv(
        &dir.join("errors.csv"),
        &["t", "linf_err"],
        report.errors.iter().map(|e| [e.t, e.linf_err]),
    )?;
    if trace.status == SolveStatus::Completed && exact.is_some() {
        report.final_error = report.errors.last().map_or(f64::NAN, |e| e.linf_err);
    }
    Ok(())
}

fn max_error(points: &[Point], u: &Array1<f64>, exact: &dyn AmbientFunction, t: f64) -> f64 {
    points
        .iter()
        .zip(u.iter())
        .map(|(p, v)| (v - exact.value(p, t)).abs())
        .fold(
            0.0,
            |a: f64, e| if e.is_nan() || a.is_nan() { f64::NAN } else { a.max(e) },
        )
}

fn snapshot_stats(t: f64, points: &[Point], u: &Array1<f64>) -> SnapshotStats {
    let (i, max_u) = u.iter().enumerate().fold(
        (0, f64::NEG_INFINITY),
        |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) },
    );
    let above = u.iter().filter(|&&v| v > 0.5 * max_u).count();
    SnapshotStats {
        t,
        max_u,
        argmax: [points[i].x, points[i].y, points[i].z],
        above_half_fraction: above as f64 / u.len() as f64,
    }
}

fn write_steps(path: &Path, trace: &SolveTrace) -> ExpResult<()> {
    let rows = trace
        .step_sizes
        .iter()
        .enumerate()
        .map(|(k, dt)| vec![(k + 1).to_string(), io::fmt_f64(trace.times[k + 1]), io::fmt_f64(*dt)]);
    io::write_records(path, &["step_index", "t", "dt"], rows)?;
    Ok(())
}

/// Writes `Z` and `X` with their JSON sidecars into `dir`.
pub fn write_points(cfg: &ScenarioConfig, clouds: &Clouds, dir: &Path) -> ExpResult<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    for (name, cloud) in [("centers", &clouds.centers), ("collocation", &clouds.collocation)] {
        let csv = dir.join(format!("{name}.csv"));
        let json = dir.join(format!("{name}.json"));
        io::write_points_csv(&csv, &cloud.points)?;
        io::write_json(&json, &cloud.metadata(cfg.surface))?;
        written.extend([csv, json]);
    }
    Ok(written)
}
