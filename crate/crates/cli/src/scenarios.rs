//! The seven scenarios. Each returns its output files as bytes plus a few
//! summary numbers for the run record.

use std::fmt::Write as _;
use std::path::Path;

use clap::Subcommand;
use donorsim::fitting::calibrate::pump_energy;
use donorsim::fitting::{calibrate_rates, fit_spectrum, CalibrationOptions, FitModel, FitOptions};
use donorsim::kinetics::{ensemble_solve, integrate};
use donorsim::reference::observed_row;
use donorsim::scene::LaserRole;
use donorsim::spectroscopy::{
    dark_generator, hole_burning_metric, ple_spectrum, probe_grid, recovered_fraction, steady_dark_state,
    transient_signal,
};
use donorsim::spin_system::{polarizations, HyperfineState};
use donorsim::units::{convert_units, EnergyUnit};
use donorsim::{KineticState, LaserConfig, PreparedScene, Spectrum};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{Position, RunConfig};
use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Twelve-line transition table.
    Levels,
    /// Pump-probe PLE spectrum.
    Spectrum,
    /// Steady-state populations under the configured lasers.
    Steady,
    /// Populations and probe signal after the lasers switch on.
    Transient,
    /// Relaxation in the dark from the pumped steady state.
    Dark,
    /// Twelve-line fit of a spectrum.
    Fit,
    /// Rate calibration against the observed population rows.
    Calibrate,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Levels => "levels",
            Scenario::Spectrum => "spectrum",
            Scenario::Steady => "steady",
            Scenario::Transient => "transient",
            Scenario::Dark => "dark",
            Scenario::Fit => "fit",
            Scenario::Calibrate => "calibrate",
        }
    }
}

pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

#[derive(Default)]
pub struct Outcome {
    pub artifacts: Vec<Artifact>,
    pub summary: Map<String, Value>,
    /// Set when outputs were written but the run still failed (a fit that
    /// did not converge).
    pub failure: Option<CliError>,
}

impl Outcome {
    fn file(&mut self, name: &str, text: String) {
        self.artifacts.push(Artifact {
            name: name.to_string(),
            bytes: text.into_bytes(),
        });
    }

    fn note(&mut self, key: &str, value: impl Serialize) {
        self.summary
            .insert(key.to_string(), serde_json::to_value(value).expect("summary value"));
    }
}

pub fn run(scenario: Scenario, cfg: &RunConfig) -> Result<Outcome, CliError> {
    let prepared = cfg.scene().prepare()?;
    match scenario {
        Scenario::Levels => levels(cfg, &prepared),
        Scenario::Spectrum => spectrum(cfg, &prepared),
        Scenario::Steady => steady(cfg, &prepared),
        Scenario::Transient => transient(cfg, &prepared),
        Scenario::Dark => dark(cfg, &prepared),
        Scenario::Fit => fit(cfg, &prepared),
        Scenario::Calibrate => calibrate(cfg),
    }
}

const STATE_COLUMNS: &str = "upUp,upDown,downDown,downUp";

fn in_units(mhz: f64, unit: EnergyUnit) -> f64 {
    convert_units(mhz, EnergyUnit::MHz, unit)
}

fn laser(
    p: &PreparedScene,
    position: Option<Position>,
    energy: Option<f64>,
    intensity: f64,
    role: LaserRole,
) -> Result<Option<LaserConfig>, CliError> {
    let energy = match (energy, position) {
        (Some(e), _) => e,
        (None, Some(pos)) => pump_energy(p, pos.0)?,
        (None, None) => return Ok(None),
    };
    Ok(Some(LaserConfig {
        energy,
        peak_rate: intensity * p.rates().pump_peak_rate_p0,
        role,
    }))
}

fn pump(cfg: &RunConfig, p: &PreparedScene) -> Result<Option<LaserConfig>, CliError> {
    let l = &cfg.lasers;
    laser(p, l.pump, l.pump_energy, l.pump_intensity, LaserRole::Pump)
}

fn required_pump(cfg: &RunConfig, p: &PreparedScene, scenario: &str) -> Result<LaserConfig, CliError> {
    pump(cfg, p)?.ok_or_else(|| CliError::config("lasers.pump", format!("the {scenario} scenario needs a pump")))
}

/// The steady-state probe is included only when explicitly configured.
fn explicit_probe(cfg: &RunConfig, p: &PreparedScene) -> Result<Option<LaserConfig>, CliError> {
    let l = &cfg.lasers;
    laser(p, l.probe, l.probe_energy, l.probe_intensity, LaserRole::Probe)
}

fn pump_label(cfg: &RunConfig) -> String {
    match (cfg.lasers.pump_energy, cfg.lasers.pump) {
        (Some(e), _) => format!("{e}MHz"),
        (None, Some(p)) => p.to_string(),
        (None, None) => "none".to_string(),
    }
}

fn linspace(end: f64, points: usize) -> Vec<f64> {
    (0..points).map(|i| end * i as f64 / (points - 1) as f64).collect()
}

/// Total population conserved and nothing negative.
fn check_state(state: &KineticState, context: &str) -> Result<(), CliError> {
    let total = state.total();
    if !((total - 1.0).abs() <= 1e-9) || state.0.iter().any(|v| !(*v >= -1e-12)) {
        return Err(CliError::physics(
            "populations",
            format!("{context}: populations {:?} (sum {total})", state.0),
        ));
    }
    Ok(())
}

/// Percent of neutral donors, and the ionized percentage of all donors.
fn neutral_percent(state: &KineticState) -> ([f64; 4], f64) {
    let d0: f64 = state.0[..4].iter().sum();
    let mut pct = [0.0; 4];
    for (o, v) in pct.iter_mut().zip(state.0[..4].iter()) {
        *o = 100.0 * v / d0;
    }
    (pct, 100.0 * state.ionized())
}

fn polarization_pair(pct: &[f64; 4]) -> Result<(f64, f64), CliError> {
    let pol = polarizations(pct)?;
    Ok((pol.electron, pol.nuclear))
}

fn join_row(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

fn levels(cfg: &RunConfig, p: &PreparedScene) -> Result<Outcome, CliError> {
    let extra = !matches!(cfg.units, EnergyUnit::MHz | EnergyUnit::NeV);
    let mut csv = String::from("index,doublet,initial_state,energy_MHz,energy_neV");
    if extra {
        write!(csv, ",energy_{}", cfg.units).unwrap();
    }
    csv.push('\n');
    for line in &p.catalog.lines {
        write!(
            csv,
            "{},{},{},{},{}",
            line.index,
            line.doublet,
            line.initial_state.ascii(),
            line.energy,
            in_units(line.energy, EnergyUnit::NeV)
        )
        .unwrap();
        if extra {
            write!(csv, ",{}", in_units(line.energy, cfg.units)).unwrap();
        }
        csv.push('\n');
    }
    let mut out = Outcome::default();
    out.file("levels.csv", csv);
    for s in HyperfineState::ALL {
        out.note(&format!("donor_energy_{}_MHz", s.ascii()), p.eigensystem.energy(s));
    }
    out.note("min_line_gap_MHz", p.catalog.min_gap());
    Ok(out)
}

fn simulate_spectrum(cfg: &RunConfig, p: &PreparedScene) -> Result<(Spectrum, Option<LaserConfig>), CliError> {
    let pump = pump(cfg, p)?;
    let grid = probe_grid(p, cfg.scan.points, cfg.scan.margin);
    let probe_rate = cfg.lasers.probe_intensity * p.rates().pump_peak_rate_p0;
    let spec = ple_spectrum(p, pump.as_ref(), &grid, probe_rate, cfg.scan.perturbative_probe)?;
    let floor = -1e-12 * spec.max_signal();
    if spec.signals.iter().any(|s| !(s.is_finite() && *s >= floor)) {
        return Err(CliError::physics("spectrum", "negative or non-finite PLE signal"));
    }
    Ok((spec, pump))
}

fn spectrum_csv(spec: &Spectrum, unit: EnergyUnit) -> String {
    let mut csv = format!("energy_{unit},signal\n");
    for (e, s) in spec.energies.iter().zip(spec.signals.iter()) {
        writeln!(csv, "{},{}", in_units(*e, unit), s).unwrap();
    }
    csv
}

fn spectrum(cfg: &RunConfig, p: &PreparedScene) -> Result<Outcome, CliError> {
    let (spec, pump) = simulate_spectrum(cfg, p)?;
    let mut out = Outcome::default();
    out.file("spectrum.csv", spectrum_csv(&spec, cfg.units));
    out.note("area", spec.area());
    out.note("max_signal", spec.max_signal());
    out.note("composite_fwhm_MHz", spec.metadata.composite_fwhm);
    if let Some(pump) = pump {
        let hole = hole_burning_metric(&spec, pump.energy);
        out.note("pump_energy_MHz", pump.energy);
        out.note("hole_depth", hole.depth);
        out.note("hole_degenerate", hole.degenerate);
    }
    Ok(out)
}

fn steady(cfg: &RunConfig, p: &PreparedScene) -> Result<Outcome, CliError> {
    let lasers: Vec<LaserConfig> = [pump(cfg, p)?, explicit_probe(cfg, p)?].into_iter().flatten().collect();
    let gens = p.generators(&lasers)?;
    let sol = ensemble_solve(&p.classes, &gens)?;
    check_state(&sol.aggregate, "steady state")?;
    let (pct, ionized) = neutral_percent(&sol.aggregate);
    let (pe, pn) = polarization_pair(&pct)?;
    let mut csv = format!("pump,{STATE_COLUMNS},ionized,P_electron,P_nuclear\n");
    writeln!(csv, "{},{}", pump_label(cfg), join_row(&[pct[0], pct[1], pct[2], pct[3], ionized, pe, pn])).unwrap();
    let mut out = Outcome::default();
    out.file("populations.csv", csv);
    out.note("P_electron", pe);
    out.note("P_nuclear", pn);
    Ok(out)
}

fn transient(cfg: &RunConfig, p: &PreparedScene) -> Result<Outcome, CliError> {
    let pump = required_pump(cfg, p, "transient")?;
    let l = &cfg.lasers;
    let probe = laser(p, l.probe.or(l.pump), l.probe_energy, l.probe_intensity, LaserRole::Probe)?
        .unwrap_or(LaserConfig {
            role: LaserRole::Probe,
            peak_rate: l.probe_intensity * p.rates().pump_peak_rate_p0,
            ..pump
        });
    let times = linspace(cfg.transient.duration, cfg.transient.points);
    let series = transient_signal(p, &probe, &pump, &times, cfg.transient.start)?;
    let mut csv = format!("time_s,signal,{STATE_COLUMNS},ionizedUp,ionizedDown\n");
    for ((t, s), state) in series.times.iter().zip(series.signal.iter()).zip(series.populations.iter()) {
        check_state(state, &format!("t = {t} s"))?;
        writeln!(csv, "{t},{s},{}", join_row(&state.0)).unwrap();
    }
    let mut out = Outcome::default();
    out.file("transient.csv", csv);
    out.note("probe_energy_MHz", probe.energy);
    out.note("signal_first", series.signal[0]);
    out.note("signal_last", *series.signal.last().unwrap());
    Ok(out)
}

fn dark(cfg: &RunConfig, p: &PreparedScene) -> Result<Outcome, CliError> {
    let pump = required_pump(cfg, p, "dark")?;
    let gens = p.generators(&[pump])?;
    let start = ensemble_solve(&p.classes, &gens)?.aggregate;
    check_state(&start, "pumped start")?;
    let rates = p.rates();
    let nz = p.scene.donor.nuclear_zeeman();
    let gen = dark_generator(rates, &p.eigensystem, nz)?;
    let equilibrium = steady_dark_state(rates, &p.eigensystem, nz)?;
    let times = linspace(cfg.dark.duration, cfg.dark.points);
    let traj = integrate(&gen, &start, &times)?;
    let mut csv = format!("time_s,{STATE_COLUMNS},ionized,P_electron,P_nuclear,recovered\n");
    for (t, state) in traj.times.iter().zip(traj.states.iter()) {
        check_state(state, &format!("t = {t} s"))?;
        let (pct, ionized) = neutral_percent(state);
        let (pe, pn) = polarization_pair(&pct)?;
        let recovered = recovered_fraction(&start, state, &equilibrium);
        writeln!(
            csv,
            "{t},{}",
            join_row(&[pct[0], pct[1], pct[2], pct[3], ionized, pe, pn, recovered])
        )
        .unwrap();
    }
    let mut out = Outcome::default();
    out.file("dark.csv", csv);
    let last = traj.states.last().unwrap();
    out.note("recovered_final", recovered_fraction(&start, last, &equilibrium));
    Ok(out)
}

/// Reads a two-column spectrum CSV whose header is `energy_<unit>,signal`.
pub fn read_spectrum_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let bad = |line: usize, msg: &str| CliError::config("io.input", format!("{}:{line}: {msg}", path.display()));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty file"))?;
    let unit = header
        .trim()
        .strip_suffix(",signal")
        .and_then(|h| h.strip_prefix("energy_"))
        .ok_or_else(|| bad(1, "header must be energy_<unit>,signal"))?
        .parse::<EnergyUnit>()
        .map_err(|e| bad(1, &e.to_string()))?;
    let mut energies = Vec::new();
    let mut signals = Vec::new();
    for (i, l) in lines {
        let mut cols = l.split(',').map(str::trim);
        let (Some(e), Some(s), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(bad(i + 1, "expected two columns"));
        };
        let e: f64 = e.parse().map_err(|_| bad(i + 1, "energy is not a number"))?;
        let s: f64 = s.parse().map_err(|_| bad(i + 1, "signal is not a number"))?;
        energies.push(convert_units(e, unit, EnergyUnit::MHz));
        signals.push(s);
    }
    Ok((energies, signals))
}

/// `key=value` lines for the report and a header plus one row for the CSV.
fn key_values(pairs: &[(String, String)]) -> (String, String) {
    let mut report = String::new();
    for (k, v) in pairs {
        writeln!(report, "{k}={v}").unwrap();
    }
    let quote = |v: &str| {
        if v.contains([',', '"', '\n']) {
            format!("\"{}\"", v.replace('"', "\"\""))
        } else {
            v.to_string()
        }
    };
    let header: Vec<&str> = pairs.iter().map(|(k, _)| k.as_str()).collect();
    let row: Vec<String> = pairs.iter().map(|(_, v)| quote(v)).collect();
    (report, format!("{}\n{}\n", header.join(","), row.join(",")))
}

fn fit(cfg: &RunConfig, p: &PreparedScene) -> Result<Outcome, CliError> {
    let (energies, signals, source) = match &cfg.io.input {
        Some(path) => {
            let (e, s) = read_spectrum_csv(path)?;
            (e, s, path.display().to_string())
        }
        None => {
            let (spec, _) = simulate_spectrum(cfg, p)?;
            (spec.energies, spec.signals, "simulated".to_string())
        }
    };
    let mut model = FitModel::from_catalog(&p.catalog, p.scene.lineshape);
    model.refine_positions = cfg.fit.refine_positions;
    let options = FitOptions {
        max_iterations: cfg.fit.max_iterations,
        tolerance: cfg.fit.tolerance,
    };
    let rep = fit_spectrum(&energies, &signals, &model, &options)?;

    let mut pairs: Vec<(String, String)> = vec![
        ("source".into(), source),
        ("converged".into(), rep.converged.to_string()),
        ("iterations".into(), rep.iterations.to_string()),
        ("residual_rms".into(), rep.residual_rms.to_string()),
        ("baseline".into(), rep.baseline.to_string()),
        ("normalization_error".into(), rep.normalization_error.to_string()),
        ("overlap_warning".into(), rep.overlap_warning.to_string()),
    ];
    let nan = f64::NAN;
    let pops = rep.populations.unwrap_or([nan; 4]);
    for (s, v) in HyperfineState::ALL.iter().zip(pops.iter()) {
        pairs.push((format!("population_{}", s.ascii()), v.to_string()));
    }
    let (pe, pn) = rep.polarization.map_or((nan, nan), |p| (p.electron, p.nuclear));
    pairs.push(("P_electron".into(), pe.to_string()));
    pairs.push(("P_nuclear".into(), pn.to_string()));
    pairs.push((format!("gamma_hom_{}", cfg.units), in_units(rep.lineshape.gamma_hom, cfg.units).to_string()));
    pairs.push((
        format!("sigma_gauss_{}", cfg.units),
        in_units(rep.lineshape.sigma_gauss, cfg.units).to_string(),
    ));
    pairs.push((format!("tail_tau_{}", cfg.units), in_units(rep.lineshape.tail_tau, cfg.units).to_string()));
    for (i, a) in rep.amplitudes.iter().enumerate() {
        pairs.push((format!("amplitude_{}", i + 1), a.to_string()));
    }
    for (i, e) in rep.positions.iter().enumerate() {
        pairs.push((format!("position_{}_{}", i + 1, cfg.units), in_units(*e, cfg.units).to_string()));
    }
    let (report, csv) = key_values(&pairs);
    let mut out = Outcome::default();
    out.file("fit_report.txt", report);
    out.file("fit.csv", csv);
    out.note("P_electron", pe);
    out.note("P_nuclear", pn);
    out.note("residual_rms", rep.residual_rms);
    if !rep.converged {
        out.failure = Some(CliError::FitNotConverged(format!(
            "no convergence after {} iterations (fit.max_iterations)",
            rep.iterations
        )));
    } else if rep.normalization_error {
        out.failure = Some(CliError::FitNotConverged(
            "fitted amplitudes vanish; populations cannot be normalized".into(),
        ));
    }
    Ok(out)
}

fn calibrate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let targets: Vec<_> = cfg
        .calibrate
        .rows
        .iter()
        .map(|p| *observed_row(p.0).expect("validated"))
        .collect();
    let c = &cfg.calibrate;
    let options = CalibrationOptions {
        max_evaluations: c.max_evaluations,
        restarts: c.restarts,
        threshold: c.threshold,
        bounds: c.bounds.map(|[lo, hi]| (lo, hi)),
    };
    let rep = calibrate_rates(&targets, &cfg.scene(), &options)?;

    let mut fitted = cfg.clone();
    fitted.physics.w = rep.rates.w;
    fitted.physics.r = rep.rates.r;
    fitted.physics.continuum_beta = rep.rates.continuum_beta;
    fitted.physics.capture_rate_gamma_c = rep.rates.capture_rate_gamma_c;
    let pairs: Vec<(String, String)> = vec![
        ("W".into(), rep.rates.w.to_string()),
        ("R".into(), rep.rates.r.to_string()),
        ("continuum_beta".into(), rep.rates.continuum_beta.to_string()),
        ("capture_rate_gamma_c".into(), rep.rates.capture_rate_gamma_c.to_string()),
        ("rms_points".into(), rep.rms.to_string()),
        ("meets_threshold".into(), rep.meets_threshold.to_string()),
        ("converged".into(), rep.converged.to_string()),
        ("evaluations".into(), rep.evaluations.to_string()),
        ("under_determined".into(), rep.under_determined.to_string()),
    ];
    let (report, _) = key_values(&pairs);

    let mut csv = String::from("pump");
    for prefix in ["target", "simulated"] {
        for s in HyperfineState::ALL {
            write!(csv, ",{prefix}_{}", s.ascii()).unwrap();
        }
    }
    csv.push_str(",rms\n");
    for row in &rep.rows {
        let mut values = row.target.to_vec();
        values.extend_from_slice(&row.simulated);
        values.push(row.rms);
        writeln!(csv, "{},{}", row.pump.label(), join_row(&values)).unwrap();
    }

    let mut out = Outcome::default();
    out.file("calibration_report.txt", report);
    out.file("calibration.csv", csv);
    out.file(
        "calibrated_config.json",
        serde_json::to_string_pretty(&fitted).expect("config serializes") + "\n",
    );
    out.note("rms_points", rep.rms);
    if !rep.meets_threshold {
        out.failure = Some(CliError::FitNotConverged(format!(
            "calibration rms {:.3} points exceeds calibrate.threshold = {}",
            rep.rms, c.threshold
        )));
    }
    Ok(out)
}
