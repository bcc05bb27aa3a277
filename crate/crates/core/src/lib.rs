//! Core library for interferometric line analysis of nuclear resonances in
//! thin-film cavities: forward reflectance model, synthetic counting spectra,
//! generic line fits, and retrieval of the resonant path's phase.

pub mod fit;
pub mod model;
pub mod phase;
pub mod spectrum;

pub use fit::{
    bootstrap_errors, extract_angle_series, fit_fano, fit_rational, AngleSeries, AngleSeriesRow,
    BootstrapErrors, ConsistencyFit, FanoFitOptions, FanoFitResult, FanoParamErrors, FitError,
    Interval, Normalization, RationalCoeffs, RationalFitResult,
};
pub use model::{ChannelDecomposition, LineshapeParams, ModelError, PhysicalModel};
pub use phase::{
    estimate_r0, fit_phase, reconstruct_rho_eg, xi_curve, xi_from_values, PhaseCurve, PhaseError,
    RhoEgEstimate, XiCurve,
};
pub use spectrum::{
    build_grid, synthesize, GridUnits, Spectrum, SpectrumError, SpectrumMeta, SynthesisOptions,
};
