use std::path::PathBuf;

use donorsim::fitting::FitError;
use donorsim::kinetics::KineticsError;
use donorsim::lineshape::LineshapeError;
use donorsim::scene::SceneError;
use donorsim::spectroscopy::SpectroscopyError;
use donorsim::spin_system::SpinError;

pub const EXIT_IO: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_PHYSICS: u8 = 3;
pub const EXIT_SOLVER: u8 = 4;
pub const EXIT_FIT: u8 = 5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("physics invariant violated at `{key}`: {message}")]
    Physics { key: String, message: String },
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("fit did not converge: {0}")]
    FitNotConverged(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn physics(key: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Physics {
            key: key.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Physics { .. } => EXIT_PHYSICS,
            CliError::Solver(_) => EXIT_SOLVER,
            CliError::FitNotConverged(_) => EXIT_FIT,
            CliError::Io { .. } => EXIT_IO,
        }
    }
}

fn physics_key(name: &str) -> String {
    format!("physics.{name}")
}

impl From<SpinError> for CliError {
    fn from(e: SpinError) -> Self {
        let msg = e.to_string();
        match e {
            SpinError::InvalidParameter { name, .. } => CliError::config(physics_key(name), msg),
            SpinError::InvalidStrength { .. } => CliError::config("physics.line_strengths", msg),
            SpinError::InterleavedDoublets { .. } | SpinError::DoubletOrder { .. } => {
                CliError::physics("physics.dx_offsets", msg)
            }
            SpinError::Unnormalized { .. } | SpinError::NegativePopulation => CliError::physics("populations", msg),
        }
    }
}

impl From<LineshapeError> for CliError {
    fn from(e: LineshapeError) -> Self {
        let msg = e.to_string();
        match e {
            LineshapeError::InvalidParameter { name, .. } => CliError::config(physics_key(name), msg),
            LineshapeError::NotUnimodal { .. } => CliError::physics("physics.tail_tau", msg),
            LineshapeError::UnknownPreset(_) => CliError::config("preset", msg),
        }
    }
}

impl From<KineticsError> for CliError {
    fn from(e: KineticsError) -> Self {
        let msg = e.to_string();
        match e {
            KineticsError::InvalidRate { name, .. } => CliError::config(physics_key(name), msg),
            KineticsError::NonUniqueSteadyState { .. } => CliError::physics("physics", msg),
            KineticsError::InvalidExcitation { .. } => CliError::physics("lasers", msg),
            KineticsError::UnnormalizedStart { .. } | KineticsError::InvalidStart => {
                CliError::physics("populations", msg)
            }
            KineticsError::InvalidTimeGrid => CliError::config("transient.duration", msg),
            KineticsError::SingularSystem | KineticsError::EnsembleMismatch { .. } => CliError::Solver(msg),
        }
    }
}

impl From<SceneError> for CliError {
    fn from(e: SceneError) -> Self {
        match e {
            SceneError::Spin(e) => e.into(),
            SceneError::Lineshape(e) => e.into(),
            SceneError::Kinetics(e) => e.into(),
            SceneError::EmptyEnsemble => CliError::config("physics.ensemble_size", e.to_string()),
            SceneError::InvalidDetection(_) => CliError::config("physics.detection_r", e.to_string()),
            SceneError::UnknownPreset(_) => CliError::config("preset", e.to_string()),
        }
    }
}

impl From<SpectroscopyError> for CliError {
    fn from(e: SpectroscopyError) -> Self {
        let msg = e.to_string();
        match e {
            SpectroscopyError::InvalidGrid | SpectroscopyError::GridDoesNotCoverCatalog { .. } => {
                CliError::config("scan", msg)
            }
            SpectroscopyError::InvalidLaser { role, .. } => CliError::config(format!("lasers.{role}_intensity"), msg),
            SpectroscopyError::Point { source, .. } => match CliError::from(source) {
                CliError::Solver(_) => CliError::Solver(msg),
                CliError::Physics { key, .. } => CliError::physics(key, msg),
                other => other,
            },
            SpectroscopyError::Kinetics(e) => e.into(),
            SpectroscopyError::Lineshape(e) => e.into(),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        let msg = e.to_string();
        match e {
            FitError::LengthMismatch { .. } | FitError::TooFewPoints(_) | FitError::NonFinite => {
                CliError::config("io.input", msg)
            }
            FitError::InvalidInit(_) => CliError::config("fit", msg),
            FitError::NoTargets => CliError::config("calibrate.rows", msg),
            FitError::UnknownLine(_) => CliError::config("lasers.pump", msg),
            FitError::Lineshape(e) => e.into(),
            FitError::Kinetics(e) => e.into(),
            FitError::Scene(e) => e.into(),
        }
    }
}
