//! Rate calibration against observed steady-state population rows.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::simplex::{nelder_mead, SimplexOptions};
use super::FitError;
use crate::kinetics::{ensemble_solve, RateConfig};
use crate::real::{c, Real};
use crate::reference::{ObservedRow, PumpPosition};
use crate::scene::{PreparedScene, Scene};

/// Pump energy for a tabulated pump position.
pub fn pump_energy<T: Real>(scene: &PreparedScene<T>, pump: PumpPosition) -> Result<T, FitError> {
    Ok(match pump {
        PumpPosition::Line(n) if (1..=12).contains(&n) => scene.line_peak_energy(n)?,
        PumpPosition::Line(n) => return Err(FitError::UnknownLine(n)),
        PumpPosition::Line6Detuned => scene.high_half_height_energy(6)?,
    })
}

/// Steady-state donor populations (percent of all neutral donors) under a
/// pump alone, at `intensity` times the reference pump rate; the weak probe
/// is treated as a perturbation.
pub fn simulate_populations<T: Real>(
    scene: &PreparedScene<T>,
    pump: PumpPosition,
    intensity: T,
) -> Result<[T; 4], FitError> {
    let mut laser = scene.scene.pump_at(pump_energy(scene, pump)?);
    laser.peak_rate *= intensity;
    let gens = scene.generators(&[laser])?;
    let sol = ensemble_solve(&scene.classes, &gens)?;
    let d0 = &sol.aggregate.0[..4];
    let total: T = d0.iter().copied().sum();
    let mut out = [T::zero(); 4];
    for (o, v) in out.iter_mut().zip(d0.iter()) {
        *o = c::<T>(100.0) * *v / total;
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationOptions {
    pub max_evaluations: usize,
    /// Simplex restarts from the best point found so far.
    pub restarts: usize,
    /// Rms (percentage points) regarded as a successful calibration.
    pub threshold: f64,
    /// Inclusive search box for W, R, continuum_beta, capture_rate_gamma_c.
    pub bounds: [(f64, f64); 4],
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            max_evaluations: 800,
            restarts: 2,
            threshold: 10.0,
            bounds: [(1e-6, 1e9); 4],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowResidual {
    pub pump: PumpPosition,
    pub target: [f64; 4],
    pub simulated: [f64; 4],
    pub rms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport<T> {
    pub rates: RateConfig<T>,
    /// Rms deviation over every population entry, percentage points.
    pub rms: f64,
    pub rows: Vec<RowResidual>,
    /// Fewer independent data than calibrated rates.
    pub under_determined: bool,
    pub meets_threshold: bool,
    pub evaluations: usize,
    pub converged: bool,
}

/// Parameters searched, in log space.
pub const CALIBRATED_RATES: [&str; 4] = ["W", "R", "continuum_beta", "capture_rate_gamma_c"];

fn with_log_rates<T: Real>(base: &RateConfig<T>, x: &[f64], bounds: &[(f64, f64); 4]) -> RateConfig<T> {
    let v = |i: usize| c::<T>(x[i].exp().clamp(bounds[i].0, bounds[i].1));
    RateConfig {
        w: v(0),
        r: v(1),
        continuum_beta: v(2),
        capture_rate_gamma_c: v(3),
        ..*base
    }
}

fn rows_rms(rows: &[RowResidual]) -> f64 {
    let n = rows.len() * 4;
    let ss: f64 = rows
        .iter()
        .flat_map(|r| r.target.iter().zip(r.simulated.iter()).map(|(a, b)| (a - b) * (a - b)))
        .sum();
    (ss / n as f64).sqrt()
}

/// Simulated rows for a rate configuration.
pub fn evaluate_rows<T: Real>(
    scene: &PreparedScene<T>,
    rates: &RateConfig<T>,
    targets: &[ObservedRow],
) -> Result<Vec<RowResidual>, FitError> {
    let mut sc = scene.clone();
    sc.scene.rates = *rates;
    targets
        .par_iter()
        .map(|row| {
            let sim = simulate_populations(&sc, row.pump, T::one())?.map(|v| v.as_f64());
            let ss: f64 = row.populations.iter().zip(sim.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok(RowResidual {
                pump: row.pump,
                target: row.populations,
                simulated: sim,
                rms: (ss / 4.0).sqrt(),
            })
        })
        .collect()
}

/// Searches `W`, `R`, `continuum_beta` and `capture_rate_gamma_c` (log
/// space, Nelder-Mead) to minimize the rms population deviation from the
/// target rows. Failing to reach the threshold is reported, not an error.
pub fn calibrate_rates<T: Real>(
    targets: &[ObservedRow],
    scene: &Scene<T>,
    options: &CalibrationOptions,
) -> Result<CalibrationReport<T>, FitError> {
    if targets.is_empty() {
        return Err(FitError::NoTargets);
    }
    let prepared = scene.prepare()?;
    let base = scene.rates;
    let bounds = options.bounds;
    if bounds.iter().any(|&(lo, hi)| !(lo > 0.0 && lo <= hi && hi.is_finite())) {
        return Err(FitError::InvalidInit("calibration bounds must satisfy 0 < lower <= upper < inf"));
    }
    let mut start = [base.w, base.r, base.continuum_beta, base.capture_rate_gamma_c].map(|v| v.as_f64());
    for (v, &(lo, hi)) in start.iter_mut().zip(bounds.iter()) {
        *v = v.clamp(lo, hi).ln();
    }

    let objective = |x: &[f64]| -> f64 {
        match evaluate_rows(&prepared, &with_log_rates(&base, x, &bounds), targets) {
            Ok(rows) => rows_rms(&rows),
            Err(_) => f64::INFINITY,
        }
    };
    let simplex = SimplexOptions {
        step: 1.0,
        max_evaluations: options.max_evaluations,
        f_tolerance: 1e-9,
        x_tolerance: 1e-6,
    };
    let mut best = nelder_mead(objective, &start, &simplex);
    let mut evaluations = best.evaluations;
    for _ in 0..options.restarts {
        let again = nelder_mead(objective, &best.x, &SimplexOptions { step: 0.3, ..simplex });
        evaluations += again.evaluations;
        let improved = again.value < best.value;
        if improved {
            best = again;
        }
        if !improved || best.value == 0.0 {
            break;
        }
    }

    let rates = with_log_rates(&base, &best.x, &bounds);
    let rows = evaluate_rows(&prepared, &rates, targets)?;
    let rms = rows_rms(&rows);
    Ok(CalibrationReport {
        rates,
        rms,
        rows,
        under_determined: 3 * targets.len() < CALIBRATED_RATES.len(),
        meets_threshold: rms <= options.threshold,
        evaluations,
        converged: best.converged,
    })
}
