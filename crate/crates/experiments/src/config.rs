use std::path::{Path, PathBuf};

use rbfmol::geometry::Surface;
use rbfmol::operator::DiffusionTensor;
use serde::{Deserialize, Serialize};

use crate::{ExpError, ExpResult};

/// How the trial centers are placed.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Farthest-point thinned on-surface clouds for both `Z` and `X`.
    #[default]
    QuasiUniform,
    /// Lattice centers in the band `dist(·, S) ≤ δ`, quasi-uniform `X`.
    NarrowBand,
    /// Regular `(θ, φ)` torus grids with square counts for both `Z` and `X`.
    TorusGrid,
}

/// Forcing and initial condition of the run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    /// Manufactured forcing of `u = exp(x₁ + 1/(1+t))`, errors are measured.
    #[default]
    ExpX1,
    /// `f = exp(−3φ²)` in the torus azimuth, zero initial condition.
    AzimuthalPeak,
    /// Gaussian bump on one orthocircle ring, zero initial condition.
    GaussianPeak,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SpectrumOnly,
    Solve,
    #[default]
    Both,
}

impl Mode {
    pub fn spectrum(self) -> bool {
        matches!(self, Mode::SpectrumOnly | Mode::Both)
    }

    pub fn solve(self) -> bool {
        matches!(self, Mode::Solve | Mode::Both)
    }
}

/// Cartesian grid of runs; cells with `n_x < n_z` are recorded as NaN.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub m: Vec<u32>,
    pub n_z: Vec<usize>,
    pub n_x: Vec<usize>,
}

impl Grid {
    pub fn cells(&self) -> Vec<(u32, usize, usize)> {
        let mut out = Vec::new();
        for &n_z in &self.n_z {
            for &n_x in &self.n_x {
                for &m in &self.m {
                    out.push((m, n_z, n_x));
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: String,
    pub surface: Surface,
    pub layout: Layout,
    pub m: u32,
    pub n_z: usize,
    /// Explicit collocation count; wins over `ratio`.
    pub n_x: Option<usize>,
    /// `n_x = round(ratio · n_z)` when `n_x` is absent.
    pub ratio: Option<f64>,
    pub seed: u64,
    pub tensor: DiffusionTensor,
    pub reaction: f64,
    pub source: Source,
    pub t_span: [f64; 2],
    pub rtol: f64,
    pub atol: f64,
    pub fixed_dt: Option<f64>,
    pub mode: Mode,
    /// Half-width of the center band for [`Layout::NarrowBand`].
    pub band_delta: f64,
    /// Size of the seeded evaluation cloud for errors and snapshots.
    pub eval_points: usize,
    /// Number of uniform output times in `(t₀, T]`.
    pub output_count: usize,
    /// Write `snapshot_t<k>.csv` at every output time.
    pub snapshots: bool,
    pub grid: Option<Grid>,
    pub out: PathBuf,
    pub jobs: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            scenario: "custom".into(),
            surface: Surface::Sphere,
            layout: Layout::QuasiUniform,
            m: 6,
            n_z: 658,
            n_x: None,
            ratio: None,
            seed: 1,
            tensor: DiffusionTensor::Identity,
            reaction: 3.0,
            source: Source::ExpX1,
            t_span: [0.0, 1.0],
            rtol: 1e-3,
            atol: 1e-6,
            fixed_dt: None,
            mode: Mode::Both,
            band_delta: 0.2,
            eval_points: 5000,
            output_count: 10,
            snapshots: false,
            grid: None,
            out: PathBuf::from("out"),
            jobs: 1,
        }
    }
}

impl ScenarioConfig {
    /// Collocation count implied by `n_x`, `ratio` and `n_z`.
    pub fn collocation_count(&self) -> usize {
        match (self.n_x, self.ratio) {
            (Some(n), _) => n,
            (None, Some(r)) => (r * self.n_z as f64).round() as usize,
            (None, None) => self.n_z,
        }
    }

    pub fn validate(&self) -> ExpResult<()> {
        let bad = |msg: String| Err(ExpError::Config(msg));
        if self.m < 4 {
            return bad(format!("m must be at least 4, got {}", self.m));
        }
        if self.n_z < 4 {
            return bad(format!("n_z must be at least 4, got {}", self.n_z));
        }
        if let Some(r) = self.ratio {
            if !(r >= 1.0) {
                return bad(format!("oversampling ratio must be ≥ 1, got {r}"));
            }
        }
        if self.grid.is_none() && self.collocation_count() < self.n_z {
            return bad(format!(
                "n_x = {} is below n_z = {}",
                self.collocation_count(),
                self.n_z
            ));
        }
        let [t0, t1] = self.t_span;
        if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
            return bad(format!("invalid time span [{t0}, {t1}]"));
        }
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if let Some(dt) = self.fixed_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("fixed step must be positive, got {dt}"));
            }
        }
        if !self.reaction.is_finite() {
            return bad("reaction coefficient must be finite".into());
        }
        if self.output_count == 0 || self.eval_points == 0 {
            return bad("output_count and eval_points must be positive".into());
        }
        if self.layout == Layout::TorusGrid && self.surface != Surface::Torus {
            return bad("torus-grid layout needs the torus surface".into());
        }
        if self.layout == Layout::NarrowBand && !(self.band_delta > 0.0) {
            return bad(format!("band half-width must be positive, got {}", self.band_delta));
        }
        if let Some(g) = &self.grid {
            if g.m.is_empty() || g.n_z.is_empty() || g.n_x.is_empty() {
                return bad("grid lists must be nonempty".into());
            }
            if g.m.iter().any(|&m| m < 4) {
                return bad("grid smoothness orders must be at least 4".into());
            }
        }
        Ok(())
    }

    /// Output directory of this scenario.
    pub fn run_dir(&self) -> PathBuf {
        self.out.join(&self.scenario)
    }

    pub fn to_toml(&self) -> ExpResult<String> {
        toml::to_string(self).map_err(|e| ExpError::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> ExpResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| ExpError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> ExpResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExpError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// The single-run configuration of one grid cell.
    pub fn cell(&self, m: u32, n_z: usize, n_x: usize) -> Self {
        Self {
            m,
            n_z,
            n_x: Some(n_x),
            ratio: None,
            grid: None,
            ..self.clone()
        }
    }
}

/// Names of the built-in scenarios.
pub const SCENARIOS: [&str; 7] = [
    "ex1-spectra",
    "ex1-table",
    "ex1-timing",
    "ex2-table",
    "ex3-grid",
    "ex4-torus",
    "ex4-orthocircle",
];

/// Built-in scenario presets.
pub fn preset(name: &str) -> ExpResult<ScenarioConfig> {
    let base = ScenarioConfig {
        scenario: name.to_string(),
        ..Default::default()
    };
    let table_rows = vec![658, 987, 1316, 2632];
    let cfg = match name {
        "ex1-spectra" => ScenarioConfig {
            mode: Mode::SpectrumOnly,
            grid: Some(Grid {
                m: (4..=8).collect(),
                n_z: vec![658],
                n_x: vec![658, 987],
            }),
            ..base
        },
        "ex1-table" => ScenarioConfig {
            grid: Some(Grid {
                m: (4..=8).collect(),
                n_z: vec![658],
                n_x: table_rows,
            }),
            ..base
        },
        "ex1-timing" => ScenarioConfig {
            mode: Mode::Solve,
            grid: Some(Grid {
                m: vec![4, 6, 8],
                n_z: vec![658],
                n_x: vec![658, 987],
            }),
            ..base
        },
        "ex2-table" => ScenarioConfig {
            layout: Layout::NarrowBand,
            grid: Some(Grid {
                m: (4..=8).collect(),
                n_z: vec![658],
                n_x: table_rows,
            }),
            ..base
        },
        "ex3-grid" => ScenarioConfig {
            surface: Surface::DupinCyclide,
            tensor: DiffusionTensor::Anisotropic,
            mode: Mode::Solve,
            eval_points: 8000,
            grid: Some(Grid {
                m: vec![6],
                n_z: vec![314, 744, 1320],
                n_x: vec![744, 1320, 2976, 5296],
            }),
            ..base
        },
        "ex4-torus" => ScenarioConfig {
            surface: Surface::Torus,
            layout: Layout::TorusGrid,
            n_z: 784,
            n_x: Some(1156),
            reaction: 0.0,
            source: Source::AzimuthalPeak,
            t_span: [0.0, 10.0],
            mode: Mode::Solve,
            snapshots: true,
            ..base
        },
        // 5532 collocation points; one published caption lists 5332.
        "ex4-orthocircle" => ScenarioConfig {
            surface: Surface::Orthocircle,
            m: 4,
            n_z: 3312,
            n_x: Some(5532),
            reaction: 0.0,
            source: Source::GaussianPeak,
            t_span: [0.0, 10.0],
            mode: Mode::Solve,
            snapshots: true,
            ..base
        },
        other => {
            return Err(ExpError::Config(format!(
                "unknown scenario `{other}`; expected one of {}",
                SCENARIOS.join(", ")
            )))
        }
    };
    Ok(cfg)
}
