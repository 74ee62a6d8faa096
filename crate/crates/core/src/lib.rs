//! Optical hyperpolarization of donor electron and nuclear spins.
//!
//! Every physics type is generic over the scalar (`f32` or `f64`); the
//! aliases below fix it to `f64`.

pub mod fitting;
pub mod kinetics;
pub mod linalg;
pub mod lineshape;
pub mod real;
pub mod reference;
pub mod scene;
pub mod spectroscopy;
pub mod spin_system;
pub mod units;

pub use real::Real;

pub type DonorParams = spin_system::DonorParams<f64>;
pub type DonorEigensystem = spin_system::DonorEigensystem<f64>;
pub type DxConfig = spin_system::DxConfig<f64>;
pub type TransitionLine = spin_system::TransitionLine<f64>;
pub type TransitionCatalog = spin_system::TransitionCatalog<f64>;
pub type PopulationVector = spin_system::PopulationVector<f64>;
pub type Polarization = spin_system::Polarization<f64>;
pub type LineshapeModel = lineshape::LineshapeModel<f64>;
pub type EnsembleClass = lineshape::EnsembleClass<f64>;
pub type CompositeProfile = lineshape::CompositeProfile<f64>;
pub type RateConfig = kinetics::RateConfig<f64>;
pub type KineticState = kinetics::KineticState<f64>;
pub type RateGenerator = kinetics::RateGenerator<f64>;
pub type OpticalDrive = kinetics::OpticalDrive<f64>;
pub type Trajectory = kinetics::Trajectory<f64>;
pub type Scene = scene::Scene<f64>;
pub type PreparedScene = scene::PreparedScene<f64>;
pub type LaserConfig = scene::LaserConfig<f64>;
pub type Spectrum = spectroscopy::Spectrum<f64>;
pub type TransientSeries = spectroscopy::TransientSeries<f64>;
pub type FitModel = fitting::FitModel<f64>;
pub type FitReport = fitting::FitReport<f64>;
pub type CalibrationReport = fitting::CalibrationReport<f64>;

/// Single-precision aliases.
pub mod f32 {
    pub type DonorParams = crate::spin_system::DonorParams<f32>;
    pub type LineshapeModel = crate::lineshape::LineshapeModel<f32>;
    pub type RateConfig = crate::kinetics::RateConfig<f32>;
    pub type KineticState = crate::kinetics::KineticState<f32>;
    pub type Scene = crate::scene::Scene<f32>;
    pub type Spectrum = crate::spectroscopy::Spectrum<f32>;
}
