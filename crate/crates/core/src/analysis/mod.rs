//! Statistics that turn fields, ensembles and patches into verdicts.
//!
//! Math routines return numbers; pass/fail bounds live in [`Thresholds`].

mod clt;
mod cone;
mod frequencies;
mod gaussian;
pub mod stats;
mod volume;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::LatticeError;

pub use clt::{
    drift_and_covariance, gaussianity_report, limit_covariance, msd_curve, site_diffusion, site_drift,
    Covariance, DriftCovariance, GaussianityReport, IncrementCorrelation, KsRow, MsdRow,
};
pub use cone::{cone_scan, cone_statistic, sector_moment, Annulus, ConeScan, ConeValue};
pub use frequencies::{tile_frequencies, ClassSummary, PairCount, TileFrequencies, MIN_FREQUENCY_RADIUS};
pub use gaussian::{gaussian_fit, FitWindow, GaussianFitResult, GaussianFitter};
pub use volume::{
    band_factor, poincare_gap, poincare_table, volume_doubling, volume_growth, DoublingRow, EigenOptions,
    PoincareGap, VolumeDoubling,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("fit window n in [{n_min}, {n_max}] holds too few points")]
    WindowEmpty { n_min: usize, n_max: usize },
    #[error("field from {origin} at n = {n} leaked {leaked:e}, over budget")]
    LeakTainted { origin: usize, n: usize, leaked: f64 },
    #[error("cone-annulus region holds no tiles")]
    EmptyRegion,
    #[error("only {got} distinct starts, need {need}")]
    InsufficientStarts { got: usize, need: usize },
    #[error("only {got} samples, need {need}")]
    InsufficientSamples { got: usize, need: usize },
    #[error("no checkpoint at n = {0}")]
    MissingCheckpoint(usize),
    #[error("patch radius {radius} below {need}")]
    PatchTooSmall { radius: f64, need: f64 },
    #[error("empty sample for {0}")]
    EmptySample(&'static str),
    #[error("{0}")]
    InvalidArgument(String),
}

/// Pass/fail bounds for every check, with documented defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Geometry: edge-length and area tolerance.
    pub geometry_tolerance: f64,
    /// Geometry: minimum covered fraction of the sampled disk.
    pub min_coverage: f64,
    /// Tile frequencies: `|thick/thin − τ|` bound.
    pub thick_thin_tolerance: f64,
    /// Tile frequencies: relative spread of pair frequencies within a class.
    pub pair_frequency_tolerance: f64,
    /// Tile frequencies: residual KS discrepancy bound.
    pub residual_discrepancy: f64,
    /// Largest accepted `max/min` of `d_P/|c_x − c_y|`.
    pub bilipschitz_spread: f64,
    /// Volume doubling bound on `V(x, 2r)/V(x, r)`.
    pub max_doubling_ratio: f64,
    /// Allowed `max/min` of Poincaré constants across radii and centers.
    pub poincare_band: f64,
    /// Allowed ratio between Penrose and ℤ² Poincaré constants.
    pub poincare_vs_square: f64,
    /// Accepted interval for the on-diagonal exponent.
    pub alpha_range: (f64, f64),
    /// Accepted `|α̂ − 2|` on the ℤ² adapter.
    pub square_alpha_tolerance: f64,
    /// Minimum R² of the off-diagonal Gaussian fit.
    pub min_gaussian_r_squared: f64,
    /// Drift must lie within this many standard errors of zero.
    pub drift_standard_errors: f64,
    /// Accepted `|1 − λ_min/λ_max|` of the covariance.
    pub isotropy_tolerance: f64,
    /// Bound on the covariance correlation coefficient.
    pub max_correlation: f64,
    /// Non-degeneracy margin of the smallest eigenvalue, in standard errors.
    pub min_eigenvalue_standard_errors: f64,
    /// KS bound for `X_n/√n` against the fitted normal.
    pub max_ks: f64,
    /// Relative change of MSD/n between consecutive checkpoints.
    pub msd_plateau: f64,
    /// Bound on `|ρ|·√N` for disjoint increments.
    pub increment_correlation_scale: f64,
    /// Scaling-collapse sup distance bound.
    pub max_collapse: f64,
    /// Cone statistic: `min/mean` over directions.
    pub min_cone_fraction: f64,
    /// Minimum distinct start tiles for drift estimates.
    pub min_distinct_starts: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            geometry_tolerance: 1e-9,
            min_coverage: 0.995,
            thick_thin_tolerance: 0.01,
            pair_frequency_tolerance: 0.02,
            residual_discrepancy: 0.02,
            bilipschitz_spread: 10.0,
            max_doubling_ratio: 6.0,
            poincare_band: 3.0,
            poincare_vs_square: 3.0,
            alpha_range: (1.9, 2.1),
            square_alpha_tolerance: 0.05,
            min_gaussian_r_squared: 0.98,
            drift_standard_errors: 3.0,
            isotropy_tolerance: 0.05,
            max_correlation: 0.02,
            min_eigenvalue_standard_errors: 10.0,
            max_ks: 0.01,
            msd_plateau: 0.02,
            increment_correlation_scale: 3.0,
            max_collapse: 0.015,
            min_cone_fraction: 0.1,
            min_distinct_starts: 1000,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thresholds_round_trip_and_fill_defaults() {
        let t = Thresholds::default();
        let text = serde_json::to_string(&t).unwrap();
        assert_eq!(serde_json::from_str::<Thresholds>(&text).unwrap(), t);
        let partial: Thresholds = serde_json::from_str(r#"{"isotropy_tolerance": 0.0}"#).unwrap();
        assert_eq!(partial.isotropy_tolerance, 0.0);
        assert_eq!(partial.max_ks, 0.01);
        assert!(serde_json::from_str::<Thresholds>(r#"{"nonsense": 1}"#).is_err());
    }
}
