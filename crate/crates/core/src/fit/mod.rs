//! Weighted least-squares fits of sampled spectra: the generic asymmetric-line
//! fit with multi-start initialization, the quadratic-rational fit used by the
//! phase pipeline, and an angle-series consistency fit for the cavity constants.

mod fano;
mod lm;
mod rational;
mod series;

pub use fano::{
    bootstrap_errors, fit_fano, BootstrapErrors, FanoFitOptions, FanoFitResult, FanoParamErrors,
    Interval,
};
pub use rational::{fit_rational, Normalization, RationalCoeffs, RationalFitResult};
pub use series::{extract_angle_series, AngleSeries, AngleSeriesRow, ConsistencyFit};

use crate::spectrum::Spectrum;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FitError {
    #[error("need at least {need} unmasked points, have {have}")]
    TooFewPoints { have: usize, need: usize },
    #[error("degenerate weights: {0}")]
    DegenerateWeights(String),
    #[error("no start converged (tried {tried})")]
    NoConvergence { tried: usize },
    #[error("pole in fit range near x = {0}")]
    PoleInRange(f64),
    #[error("degenerate normalization: {0}")]
    DegenerateNormalization(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Unmasked points of a spectrum, unpacked for fitting.
pub(crate) struct Points {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl Points {
    pub fn from_spectrum(spectrum: &Spectrum, min_points: usize) -> Result<Points, FitError> {
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut sigma = Vec::new();
        for i in 0..spectrum.grid.len() {
            if spectrum.mask[i] {
                continue;
            }
            let s = spectrum.sigma[i];
            if !(s.is_finite() && s > 0.0) {
                return Err(FitError::DegenerateWeights(format!(
                    "sigma[{i}] = {s} on an unmasked point"
                )));
            }
            if !spectrum.counts[i].is_finite() {
                return Err(FitError::InvalidInput(format!("counts[{i}] is not finite")));
            }
            x.push(spectrum.grid[i]);
            y.push(spectrum.counts[i]);
            sigma.push(s);
        }
        if x.len() < min_points {
            return Err(FitError::TooFewPoints {
                have: x.len(),
                need: min_points,
            });
        }
        Ok(Points { x, y, sigma })
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    /// Extent of the unmasked grid (max - min); grids are strictly increasing.
    pub fn span(&self) -> f64 {
        self.x[self.x.len() - 1] - self.x[0]
    }
}
