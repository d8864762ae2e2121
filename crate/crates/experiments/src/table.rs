use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use rbfmol::geometry::PointCloud;
use rbfmol::io;
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::plot::emit_plots;
use crate::run::{run_with_clouds, sample_centers, sample_collocation, shares_centers, Clouds, RunReport};
use crate::{ExpError, ExpResult, Outcome};

/// One `(m, n_Z, n_X)` entry of a table.
#[derive(Clone, Debug, Serialize)]
pub struct TableCell {
    pub m: u32,
    pub n_z: usize,
    pub n_x: usize,
    pub kappa: f64,
    pub err: f64,
    pub steps: Option<usize>,
    pub max_real_part: Option<f64>,
    pub stable: Option<bool>,
    /// Not run because `n_x < n_z`.
    pub skipped: bool,
    /// Why `kappa` or `err` is missing.
    pub cause: Option<String>,
}

impl TableCell {
    fn skipped(m: u32, n_z: usize, n_x: usize) -> Self {
        Self {
            m,
            n_z,
            n_x,
            kappa: f64::NAN,
            err: f64::NAN,
            steps: None,
            max_real_part: None,
            stable: None,
            skipped: true,
            cause: Some(format!("n_x = {n_x} < n_z = {n_z}")),
        }
    }

    fn from_report(r: &RunReport) -> Self {
        let mut cause = (!r.failures.is_empty()).then(|| r.failures.join("; "));
        if cause.is_none() && r.config.mode.solve() && r.final_error.is_nan() {
            cause = Some("no exact solution".into());
        }
        Self {
            m: r.m,
            n_z: r.n_z,
            n_x: r.n_x,
            kappa: r.kappa,
            err: r.final_error,
            steps: r.accepted_steps(),
            max_real_part: r.spectrum.as_ref().map(|s| s.max_real_part),
            stable: r.spectrum.as_ref().map(|s| s.stable),
            skipped: false,
            cause,
        }
    }

    /// A computed cell that recorded a failure.
    pub fn failed(&self) -> bool {
        !self.skipped && self.cause.is_some()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct TableReport {
    pub scenario: String,
    pub cells: Vec<TableCell>,
    pub wall_time_s: f64,
}

impl TableReport {
    pub fn cell(&self, m: u32, n_z: usize, n_x: usize) -> Option<&TableCell> {
        self.cells.iter().find(|c| (c.m, c.n_z, c.n_x) == (m, n_z, n_x))
    }

    pub fn outcome(&self) -> Outcome {
        if self.cells.iter().any(TableCell::failed) {
            Outcome::Partial
        } else {
            Outcome::Success
        }
    }
}

fn cell_dir(root: &Path, m: u32, n_z: usize, n_x: usize) -> PathBuf {
    root.join("cells").join(format!("m{m}_nz{n_z}_nx{n_x}"))
}

/// Runs every cell of `cfg.grid` on at most `cfg.jobs` threads and writes
/// `table.csv`, `table.json` and overlay plots into the scenario directory.
pub fn run_table(cfg: &ScenarioConfig) -> ExpResult<TableReport> {
    cfg.validate()?;
    let grid = cfg
        .grid
        .as_ref()
        .ok_or_else(|| ExpError::Config(format!("scenario `{}` has no grid", cfg.scenario)))?;
    let start = std::time::Instant::now();
    let root = cfg.run_dir();
    std::fs::create_dir_all(&root)?;
    io::write_atomic(&root.join("config.toml"), cfg.to_toml()?.as_bytes())?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| ExpError::Config(format!("thread pool: {e}")))?;
    let clouds = CloudCache::default();
    let cells: Vec<ExpResult<TableCell>> = pool.install(|| {
        grid.cells()
            .into_par_iter()
            .map(|(m, n_z, n_x)| {
                if n_x < n_z {
                    return Ok(TableCell::skipped(m, n_z, n_x));
                }
                let cell_cfg = cfg.cell(m, n_z, n_x);
                match clouds.get(&cell_cfg) {
                    Ok(c) => Ok(TableCell::from_report(&run_with_clouds(
                        &cell_cfg,
                        &c,
                        &cell_dir(&root, m, n_z, n_x),
                    )?)),
                    Err(ExpError::Core(e)) => Ok(TableCell {
                        cause: Some(format!("sampling: {e}")),
                        skipped: false,
                        ..TableCell::skipped(m, n_z, n_x)
                    }),
                    Err(e) => Err(e),
                }
            })
            .collect()
    });
    let cells = cells.into_iter().collect::<ExpResult<Vec<_>>>()?;
    let report = TableReport {
        scenario: cfg.scenario.clone(),
        cells,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    write_table(&root.join("table.csv"), cfg, &report)?;
    io::write_json(&root.join("table.json"), &report)?;

    let dirs: Vec<PathBuf> = report
        .cells
        .iter()
        .filter(|c| !c.skipped)
        .map(|c| cell_dir(&root, c.m, c.n_z, c.n_x))
        .collect();
    if let Err(e) = emit_plots(&dirs, &root) {
        eprintln!("plotting {} failed: {e}", root.display());
    }
    Ok(report)
}

/// Table layout: one row per `(n_z, n_x)`, a group of columns per `m`.
fn write_table(path: &Path, cfg: &ScenarioConfig, report: &TableReport) -> ExpResult<()> {
    let grid = cfg.grid.as_ref().expect("validated grid");
    let mut header = vec!["n_z".to_string(), "n_x".to_string()];
    let fields: Vec<&str> = match (cfg.mode.spectrum(), cfg.mode.solve()) {
        (true, true) => vec!["kappa", "err", "steps", "max_re", "stable"],
        (false, true) => vec!["kappa", "err", "steps"],
        _ => vec!["kappa", "max_re", "stable"],
    };
    for m in &grid.m {
        header.extend(fields.iter().map(|f| format!("{f}_m{m}")));
    }
    let mut rows: BTreeMap<(usize, usize), Vec<String>> = BTreeMap::new();
    for &n_z in &grid.n_z {
        for &n_x in &grid.n_x {
            let mut row = vec![n_z.to_string(), n_x.to_string()];
            for &m in &grid.m {
                let cell = report.cell(m, n_z, n_x);
                for f in &fields {
                    row.push(match (cell, *f) {
                        (None, _) => "NaN".into(),
                        (Some(c), "kappa") => io::fmt_f64(c.kappa),
                        (Some(c), "err") => io::fmt_f64(c.err),
                        (Some(c), "steps") => c.steps.map_or("NaN".into(), |s| s.to_string()),
                        (Some(c), "max_re") => io::fmt_f64(c.max_real_part.unwrap_or(f64::NAN)),
                        (Some(c), _) => c.stable.map_or("NaN".into(), |s| u8::from(s).to_string()),
                    });
                }
            }
            rows.insert((n_z, n_x), row);
        }
    }
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    io::write_records(path, &header, rows.into_values())?;
    Ok(())
}

/// Point clouds shared between cells: centers keyed by `n_z`, independent
/// collocation sets keyed by `n_x`.
#[derive(Default)]
struct CloudCache {
    centers: Mutex<BTreeMap<usize, PointCloud>>,
    collocation: Mutex<BTreeMap<usize, PointCloud>>,
}

impl CloudCache {
    fn get(&self, cfg: &ScenarioConfig) -> ExpResult<Clouds> {
        let centers = cached(&self.centers, cfg.n_z, || sample_centers(cfg))?;
        let collocation = if shares_centers(cfg) {
            centers.clone()
        } else {
            cached(&self.collocation, cfg.collocation_count(), || sample_collocation(cfg))?
        };
        Ok(Clouds { centers, collocation })
    }
}

fn cached(
    map: &Mutex<BTreeMap<usize, PointCloud>>,
    n: usize,
    make: impl FnOnce() -> ExpResult<PointCloud>,
) -> ExpResult<PointCloud> {
    if let Some(c) = map.lock().unwrap().get(&n) {
        return Ok(c.clone());
    }
    let c = make()?;
    map.lock().unwrap().insert(n, c.clone());
    Ok(c)
}
