//! Pump-probe PLE spectra, hole burning, transients and dark relaxation,
//! synthesized from the kinetics of every ensemble class.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kinetics::{
    aggregate, build_generator, integrate, steady_state, KineticState, KineticsError, OpticalDrive, RateConfig,
    RateGenerator, Trajectory,
};
use crate::lineshape::{composite_fwhm, LineshapeError, LineshapeModel};
use crate::real::{c, Real};
use crate::scene::{LaserConfig, LaserRole, PreparedScene};
use crate::spin_system::DonorEigensystem;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectroscopyError {
    #[error("probe grid must be strictly increasing and finite")]
    InvalidGrid,
    #[error("probe grid [{lo}, {hi}] MHz does not cover the catalog span [{line_lo}, {line_hi}] MHz")]
    GridDoesNotCoverCatalog { lo: f64, hi: f64, line_lo: f64, line_hi: f64 },
    #[error("laser `{role}` has invalid peak rate {value}")]
    InvalidLaser { role: &'static str, value: f64 },
    #[error("at probe energy {energy} MHz: {source}")]
    Point { energy: f64, source: KineticsError },
    #[error(transparent)]
    Kinetics(#[from] KineticsError),
    #[error(transparent)]
    Lineshape(#[from] LineshapeError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMetadata<T> {
    pub pump: Option<LaserConfig<T>>,
    pub probe_peak_rate: T,
    pub field_b_mt: T,
    pub ensemble_size: usize,
    pub lineshape: LineshapeModel<T>,
    /// FWHM of a single composite line, MHz.
    pub composite_fwhm: T,
    pub perturbative_probe: bool,
    pub above_gap_g: T,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Spectrum<T> {
    pub energies: Vec<T>,
    pub signals: Vec<T>,
    pub metadata: SpectrumMetadata<T>,
}

impl<T: Real> Spectrum<T> {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Linear interpolation of the signal (clamped at the ends).
    pub fn signal_at(&self, energy: T) -> T {
        let e = &self.energies;
        if energy <= e[0] {
            return self.signals[0];
        }
        if energy >= e[e.len() - 1] {
            return self.signals[e.len() - 1];
        }
        let i = e.partition_point(|&x| x <= energy);
        let (x0, x1) = (e[i - 1], e[i]);
        let t = (energy - x0) / (x1 - x0);
        self.signals[i - 1] * (T::one() - t) + self.signals[i] * t
    }

    pub fn max_signal(&self) -> T {
        self.signals.iter().copied().fold(T::zero(), T::max)
    }

    /// Trapezoidal area.
    pub fn area(&self) -> T {
        self.energies
            .windows(2)
            .zip(self.signals.windows(2))
            .map(|(e, s)| c::<T>(0.5) * (e[1] - e[0]) * (s[0] + s[1]))
            .sum()
    }

    /// CSV with header `energy_MHz,signal`, LF line endings.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "energy_MHz,signal")?;
        for (e, s) in self.energies.iter().zip(self.signals.iter()) {
            writeln!(out, "{},{}", e.as_f64(), s.as_f64())?;
        }
        Ok(())
    }
}

/// Evenly spaced probe grid covering the catalog with `margin` MHz on each
/// side.
pub fn probe_grid<T: Real>(scene: &PreparedScene<T>, points: usize, margin: T) -> Vec<T> {
    let (lo, hi) = scene.catalog.span();
    let (lo, hi) = (lo - margin, hi + margin);
    let n = points.max(2);
    let step = (hi - lo) / T::from_usize_lossy(n - 1);
    (0..n).map(|i| lo + step * T::from_usize_lossy(i)).collect()
}

fn check_laser<T: Real>(laser: &LaserConfig<T>) -> Result<(), SpectroscopyError> {
    if !laser.peak_rate.is_finite() || laser.peak_rate < T::zero() || !laser.energy.is_finite() {
        return Err(SpectroscopyError::InvalidLaser {
            role: match laser.role {
                LaserRole::Pump => "pump",
                LaserRole::Probe => "probe",
            },
            value: laser.peak_rate.as_f64(),
        });
    }
    Ok(())
}

/// Detected PLE signal per unit probe excitation of a donor state.
fn detection_factor<T: Real>(scene: &PreparedScene<T>) -> T {
    let eta = scene.rates().auger_fraction_eta;
    T::one() - eta + scene.scene.detection_r * eta
}

/// PLE spectrum for an optional pump and a scanned probe of the given peak
/// rate. Unless `perturbative_probe` is set, the probe enters the kinetics
/// of every scan point.
pub fn ple_spectrum<T: Real>(
    scene: &PreparedScene<T>,
    pump: Option<&LaserConfig<T>>,
    grid: &[T],
    probe_peak_rate: T,
    perturbative_probe: bool,
) -> Result<Spectrum<T>, SpectroscopyError> {
    if grid.is_empty() || grid.iter().any(|e| !e.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(SpectroscopyError::InvalidGrid);
    }
    let (line_lo, line_hi) = scene.catalog.span();
    if grid[0] > line_lo || grid[grid.len() - 1] < line_hi {
        return Err(SpectroscopyError::GridDoesNotCoverCatalog {
            lo: grid[0].as_f64(),
            hi: grid[grid.len() - 1].as_f64(),
            line_lo: line_lo.as_f64(),
            line_hi: line_hi.as_f64(),
        });
    }
    if let Some(p) = pump {
        check_laser(p)?;
    }
    let probe_template = LaserConfig {
        energy: T::zero(),
        peak_rate: probe_peak_rate,
        role: LaserRole::Probe,
    };
    check_laser(&probe_template)?;

    let pump_drives: Vec<OpticalDrive<T>> = scene
        .classes
        .iter()
        .map(|cls| pump.map_or(OpticalDrive::dark(), |p| scene.drive(cls, std::slice::from_ref(p))))
        .collect();
    let fixed_states: Option<Vec<KineticState<T>>> = if perturbative_probe {
        Some(
            pump_drives
                .iter()
                .map(|d| scene.generator(d).and_then(|g| steady_state(&g)))
                .collect::<Result<_, _>>()?,
        )
    } else {
        None
    };
    let detect = detection_factor(scene);

    let signals = grid
        .par_iter()
        .map(|&energy| {
            let probe = LaserConfig {
                energy,
                ..probe_template
            };
            let mut total = T::zero();
            for (k, cls) in scene.classes.iter().enumerate() {
                let probe_drive = scene.drive(cls, std::slice::from_ref(&probe));
                let state = match &fixed_states {
                    Some(states) => states[k],
                    None => {
                        let drive = pump_drives[k].combined(&probe_drive);
                        scene
                            .generator(&drive)
                            .and_then(|g| steady_state(&g))
                            .map_err(|source| SpectroscopyError::Point {
                                energy: energy.as_f64(),
                                source,
                            })?
                    }
                };
                let events: T = (0..4).map(|s| probe_drive.excitation[s] * state.0[s]).sum();
                total += cls.weight * events;
            }
            Ok(total * detect)
        })
        .collect::<Result<Vec<T>, SpectroscopyError>>()?;

    Ok(Spectrum {
        energies: grid.to_vec(),
        signals,
        metadata: SpectrumMetadata {
            pump: pump.copied(),
            probe_peak_rate,
            field_b_mt: scene.scene.donor.field_b,
            ensemble_size: scene.classes.len(),
            lineshape: scene.scene.lineshape,
            composite_fwhm: composite_fwhm(&scene.scene.lineshape)?,
            perturbative_probe,
            above_gap_g: scene.rates().above_gap_g,
        },
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HoleMetric<T> {
    /// `1 - signal / envelope`, clamped to [0, 1].
    pub depth: T,
    /// True when no envelope could be formed (single-class ensemble, a
    /// missing shoulder, or a vanishing envelope); depth is then 0.
    pub degenerate: bool,
}

/// Depth of a spectral hole at `pump_energy`, relative to a straight-line
/// envelope between the highest points within one composite linewidth on
/// either side.
pub fn hole_burning_metric<T: Real>(spec: &Spectrum<T>, pump_energy: T) -> HoleMetric<T> {
    let degenerate = HoleMetric {
        depth: T::zero(),
        degenerate: true,
    };
    if spec.metadata.ensemble_size <= 1 || spec.is_empty() {
        return degenerate;
    }
    let window = spec.metadata.composite_fwhm;
    let shoulder = |lo: T, hi: T| {
        spec.energies
            .iter()
            .zip(spec.signals.iter())
            .filter(|(e, _)| **e >= lo && **e <= hi)
            .fold(None, |best: Option<(T, T)>, (&e, &s)| match best {
                Some((_, bs)) if bs >= s => best,
                _ => Some((e, s)),
            })
    };
    let left = shoulder(pump_energy - window, pump_energy - window * c(1e-6));
    let right = shoulder(pump_energy + window * c(1e-6), pump_energy + window);
    let (Some((xl, yl)), Some((xr, yr))) = (left, right) else {
        return degenerate;
    };
    let t = (pump_energy - xl) / (xr - xl);
    let envelope = yl + (yr - yl) * t;
    if !(envelope > spec.max_signal() * T::tolerance()) {
        return degenerate;
    }
    let s = spec.signal_at(pump_energy);
    let depth = (T::one() - s / envelope).max(T::zero()).min(T::one());
    HoleMetric {
        depth,
        degenerate: false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransientStart {
    /// Equal donor populations, as left by above-gap light.
    #[serde(rename = "equalized")]
    Equalized,
    /// Steady state of the same optical configuration.
    #[serde(rename = "polarized")]
    Polarized,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransientSeries<T> {
    pub times: Vec<T>,
    /// Detected signal of the fixed probe.
    pub signal: Vec<T>,
    /// Ensemble-aggregate populations.
    pub populations: Vec<KineticState<T>>,
}

/// Both lasers switched on at `t = 0`; every class integrated from `start`.
pub fn transient_signal<T: Real>(
    scene: &PreparedScene<T>,
    probe: &LaserConfig<T>,
    pump: &LaserConfig<T>,
    times: &[T],
    start: TransientStart,
) -> Result<TransientSeries<T>, SpectroscopyError> {
    check_laser(probe)?;
    check_laser(pump)?;
    let lasers = [*pump, *probe];
    let detect = detection_factor(scene);
    let per_class: Vec<(OpticalDrive<T>, Trajectory<T>)> = scene
        .classes
        .par_iter()
        .map(|cls| {
            let gen = scene.generator(&scene.drive(cls, &lasers))?;
            let init = match start {
                TransientStart::Equalized => KineticState::equalized(),
                TransientStart::Polarized => steady_state(&gen)?,
            };
            let probe_drive = scene.drive(cls, std::slice::from_ref(probe));
            Ok((probe_drive, integrate(&gen, &init, times)?))
        })
        .collect::<Result<_, KineticsError>>()?;

    let mut signal = Vec::with_capacity(times.len());
    let mut populations = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        let states: Vec<KineticState<T>> = per_class.iter().map(|(_, tr)| tr.states[i]).collect();
        populations.push(aggregate(&scene.classes, &states));
        let mut total = T::zero();
        for ((drive, _), (cls, st)) in per_class.iter().zip(scene.classes.iter().zip(states.iter())) {
            let events: T = (0..4).map(|s| drive.excitation[s] * st.0[s]).sum();
            total += cls.weight * events;
        }
        signal.push(total * detect);
    }
    Ok(TransientSeries {
        times: times.to_vec(),
        signal,
        populations,
    })
}

/// Generator with every optical process off (no lasers, no above-gap light).
pub fn dark_generator<T: Real>(
    cfg: &RateConfig<T>,
    eigensystem: &DonorEigensystem<T>,
    nuclear_zeeman: T,
) -> Result<RateGenerator<T>, KineticsError> {
    build_generator(&OpticalDrive::dark(), &cfg.dark(), eigensystem, nuclear_zeeman)
}

/// Thermal state the dark generator relaxes to.
pub fn steady_dark_state<T: Real>(
    cfg: &RateConfig<T>,
    eigensystem: &DonorEigensystem<T>,
    nuclear_zeeman: T,
) -> Result<KineticState<T>, KineticsError> {
    steady_state(&dark_generator(cfg, eigensystem, nuclear_zeeman)?)
}

/// State after `duration` seconds in the dark.
pub fn dark_relaxation<T: Real>(
    start: &KineticState<T>,
    duration: T,
    cfg: &RateConfig<T>,
    eigensystem: &DonorEigensystem<T>,
    nuclear_zeeman: T,
) -> Result<KineticState<T>, KineticsError> {
    if duration == T::zero() {
        return Ok(*start);
    }
    let gen = dark_generator(cfg, eigensystem, nuclear_zeeman)?;
    Ok(integrate(&gen, start, &[duration])?.states[0])
}

/// Fraction of the initial nuclear-polarization offset from equilibrium
/// that has relaxed away.
pub fn recovered_fraction<T: Real>(start: &KineticState<T>, now: &KineticState<T>, equilibrium: &KineticState<T>) -> T {
    let d0 = start.nuclear_difference() - equilibrium.nuclear_difference();
    let d = now.nuclear_difference() - equilibrium.nuclear_difference();
    T::one() - d / d0
}
