//! Population extraction from spectra and rate calibration.

pub mod calibrate;
pub mod nnls;
pub mod simplex;
pub mod spectrum_fit;

pub use calibrate::{calibrate_rates, simulate_populations, CalibrationOptions, CalibrationReport, RowResidual};
pub use spectrum_fit::{fit_spectrum, synthesize, FitModel, FitOptions, FitReport, ParameterEstimate};

use crate::kinetics::KineticsError;
use crate::lineshape::LineshapeError;
use crate::scene::SceneError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("{energies} energies but {signals} signals")]
    LengthMismatch { energies: usize, signals: usize },
    #[error("spectrum has {0} points; at least 16 are needed")]
    TooFewPoints(usize),
    #[error("spectrum energies must be finite and strictly increasing, signals finite")]
    NonFinite,
    #[error("invalid fit start: {0}")]
    InvalidInit(&'static str),
    #[error("no calibration targets")]
    NoTargets,
    #[error("no catalog line {0}")]
    UnknownLine(usize),
    #[error(transparent)]
    Lineshape(#[from] LineshapeError),
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}
