use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::DiscreteSystem;
use crate::dense::{self, DenseMatrix};
use crate::Result;

/// How the ODE matrix is formed for eigenanalysis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OdeRoute {
    /// Triangular route for square systems, truncated pseudoinverse for
    /// oversampled ones.
    #[default]
    Auto,
    /// `R⁻¹ C` by triangular solves.
    Triangular,
    /// `R† C = −Ψ(X, Z)† L Ψ(X, Z)` with the numerical-rank truncation.
    PseudoInverse,
}

/// The ODE matrix `λ' = M λ + …` and how it was formed.
#[derive(Clone, Debug)]
pub struct OdeMatrix {
    pub matrix: DenseMatrix,
    pub route: OdeRoute,
    /// Numerical rank of `Ψ(X, Z)`.
    pub rank: usize,
    /// Whether `Ψ(X, Z)` is numerically rank deficient.
    pub degenerate: bool,
}

/// `M = R⁻¹ C` through triangular solves with the mass matrix.
pub fn ode_matrix(sys: &DiscreteSystem) -> Result<OdeMatrix> {
    let mass = sys.mass();
    Ok(OdeMatrix {
        matrix: mass.solve_matrix(&sys.reduced.view())?,
        route: OdeRoute::Triangular,
        rank: sys.n_centers() - sys.rank.deficient.len(),
        degenerate: !sys.rank.full_rank(),
    })
}

/// `M = R† C` with `R†` the truncated SVD pseudoinverse of `R`; equal to
/// `−Ψ(X, Z)† L Ψ(X, Z)` because `Q` has orthonormal columns.
pub fn pseudo_inverse_ode_matrix(sys: &DiscreteSystem) -> Result<OdeMatrix> {
    let (pinv, rank) = dense::truncated_pseudo_inverse(&sys.r.view())?;
    Ok(OdeMatrix {
        matrix: pinv.dot(&sys.reduced),
        route: OdeRoute::PseudoInverse,
        rank,
        degenerate: rank < sys.n_centers(),
    })
}

impl OdeRoute {
    /// The concrete route for `sys`: `Auto` picks triangular solves for
    /// square systems and the pseudoinverse for oversampled ones.
    pub fn resolve(self, sys: &DiscreteSystem) -> Self {
        match self {
            Self::Auto if sys.n_collocation() == sys.n_centers() => Self::Triangular,
            Self::Auto => Self::PseudoInverse,
            route => route,
        }
    }
}

/// Thresholds of the spectrum classification.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    /// Stable when `max Re λ ≤ tol · max(1, ρ)`.
    pub stability_tolerance: f64,
    /// Zero eigenvalues: `|λ| ≤ threshold · ρ`.
    pub zero_threshold: f64,
    pub route: OdeRoute,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self {
            stability_tolerance: 1e-6,
            zero_threshold: 1e-12,
            route: OdeRoute::Auto,
        }
    }
}

/// Eigenvalues of the ODE matrix with their stability classification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    #[serde(skip)]
    pub eigenvalues: Vec<Complex64>,
    pub n_z: usize,
    pub n_x: usize,
    pub m: u32,
    pub max_real_part: f64,
    pub spectral_radius: f64,
    pub zero_count: usize,
    pub stable: bool,
    pub stability_tolerance: f64,
    pub zero_threshold: f64,
    pub route: OdeRoute,
    pub rank: usize,
}

/// JSON sidecar of a spectrum CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSidecar {
    #[serde(rename = "n_Z")]
    pub n_z: usize,
    #[serde(rename = "n_X")]
    pub n_x: usize,
    pub m: u32,
    pub max_real_part: f64,
    pub spectral_radius: f64,
    pub zero_count: usize,
    pub stable: bool,
}

impl SpectrumReport {
    /// Classifies a computed spectrum.
    pub fn classify(
        eigenvalues: Vec<Complex64>,
        options: &SpectrumOptions,
        shape: (usize, usize, u32),
        route: OdeRoute,
        rank: usize,
    ) -> Self {
        let max_real_part = eigenvalues.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        let spectral_radius = eigenvalues.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let zero_tol = options.zero_threshold * spectral_radius;
        let zero_count = eigenvalues.iter().filter(|z| z.norm() <= zero_tol).count();
        let stable = max_real_part <= options.stability_tolerance * spectral_radius.max(1.0);
        Self {
            eigenvalues,
            n_z: shape.0,
            n_x: shape.1,
            m: shape.2,
            max_real_part,
            spectral_radius,
            zero_count,
            stable,
            stability_tolerance: options.stability_tolerance,
            zero_threshold: options.zero_threshold,
            route,
            rank,
        }
    }

    pub fn sidecar(&self) -> SpectrumSidecar {
        SpectrumSidecar {
            n_z: self.n_z,
            n_x: self.n_x,
            m: self.m,
            max_real_part: self.max_real_part,
            spectral_radius: self.spectral_radius,
            zero_count: self.zero_count,
            stable: self.stable,
        }
    }
}

/// Full spectrum of the ODE matrix.
pub fn spectrum_report(sys: &DiscreteSystem, options: &SpectrumOptions) -> Result<SpectrumReport> {
    let ode = match options.route.resolve(sys) {
        OdeRoute::PseudoInverse => pseudo_inverse_ode_matrix(sys)?,
        _ => ode_matrix(sys)?,
    };
    let eigenvalues = dense::eigenvalues_general(&ode.matrix.view())?;
    Ok(SpectrumReport::classify(
        eigenvalues,
        options,
        (sys.n_centers(), sys.n_collocation(), sys.kernel.smoothness()),
        ode.route,
        ode.rank,
    ))
}
