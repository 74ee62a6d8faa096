//! Run configuration: an optional JSON file layered over a named preset,
//! then `--set key=value` overrides and the command-line flags.
//!
//! Every key lives under a section (`physics.W`, `scan.points`, ...). A
//! file that names no `preset` must spell out every `physics` key; the
//! other sections always have defaults. Energies in the config are MHz.

use std::fmt;
use std::path::{Path, PathBuf};

use donorsim::kinetics::RateConfig;
use donorsim::lineshape::LineshapeModel;
use donorsim::reference::PumpPosition;
use donorsim::scene::{calibrated, Preset, PUMP_TO_PROBE_RATIO};
use donorsim::spectroscopy::TransientStart;
use donorsim::spin_system::{DonorParams, DxConfig};
use donorsim::units::EnergyUnit;
use donorsim::Scene;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};

use crate::error::CliError;

pub const DEFAULT_PRESET: Preset = Preset::Table1Calibrated;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub units: EnergyUnit,
    pub physics: Physics,
    pub lasers: Lasers,
    pub scan: Scan,
    pub transient: Transient,
    pub dark: Dark,
    pub fit: Fit,
    pub calibrate: Calibrate,
    pub io: Io,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Physics {
    /// MHz.
    #[serde(rename = "hyperfine_A")]
    pub hyperfine_a: f64,
    pub g_electron: f64,
    pub g_nuclear: f64,
    /// mT.
    #[serde(rename = "field_B")]
    pub field_b: f64,
    /// Donor spin temperature, K.
    #[serde(rename = "temperature_T")]
    pub temperature: f64,
    /// Doublet-center offsets (MHz) and slopes (MHz/mT).
    pub dx_offsets: [f64; 6],
    pub dx_slopes: [f64; 6],
    pub line_strengths: [f64; 12],
    pub gamma_hom: f64,
    pub sigma_gauss: f64,
    pub tail_tau: f64,
    pub saturation_s: f64,
    #[serde(rename = "pump_peak_rate_P0")]
    pub pump_peak_rate_p0: f64,
    #[serde(rename = "W")]
    pub w: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub auger_fraction_eta: f64,
    pub capture_rate_gamma_c: f64,
    pub continuum_beta: f64,
    #[serde(rename = "above_gap_G")]
    pub above_gap_g: f64,
    /// s.
    #[serde(rename = "nuclear_T1")]
    pub nuclear_t1: f64,
    /// K; null makes relaxation symmetric.
    #[serde(rename = "detailed_balance_T")]
    pub detailed_balance_t: Option<f64>,
    pub exciton_lifetime: f64,
    pub ensemble_size: usize,
    pub detection_r: f64,
}

/// A catalog line (`6`) or the detuned line-6 position (`"6'"`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Position(pub PumpPosition);

impl Serialize for Position {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            PumpPosition::Line(n) => s.serialize_u64(n as u64),
            PumpPosition::Line6Detuned => s.serialize_str("6'"),
        }
    }
}

impl<'de> Deserialize<'de> for Position {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Index(u64),
            Label(String),
        }
        let bad = || D::Error::custom("expected a line number 1-12 or \"6'\"");
        let n = match Raw::deserialize(d).map_err(|_| bad())? {
            Raw::Index(n) => n,
            Raw::Label(s) if s.trim() == "6'" => return Ok(Position(PumpPosition::Line6Detuned)),
            Raw::Label(s) => s.trim().parse().map_err(|_| bad())?,
        };
        if (1..=12).contains(&n) {
            Ok(Position(PumpPosition::Line(n as usize)))
        } else {
            Err(bad())
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.label())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lasers {
    pub pump: Option<Position>,
    /// MHz; overrides `pump` when set.
    pub pump_energy: Option<f64>,
    /// Relative to `physics.pump_peak_rate_P0`.
    pub pump_intensity: f64,
    /// Fixed probe of the transient scenario; defaults to the pump position.
    pub probe: Option<Position>,
    pub probe_energy: Option<f64>,
    pub probe_intensity: f64,
}

impl Default for Lasers {
    fn default() -> Self {
        Self {
            pump: Some(Position(PumpPosition::Line(6))),
            pump_energy: None,
            pump_intensity: 1.0,
            probe: None,
            probe_energy: None,
            probe_intensity: 1.0 / PUMP_TO_PROBE_RATIO,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scan {
    pub points: usize,
    /// MHz beyond the outermost lines.
    pub margin: f64,
    pub perturbative_probe: bool,
}

impl Default for Scan {
    fn default() -> Self {
        Self {
            points: 600,
            margin: 300.0,
            perturbative_probe: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Transient {
    /// s.
    pub duration: f64,
    pub points: usize,
    pub start: TransientStart,
}

impl Default for Transient {
    fn default() -> Self {
        Self {
            duration: 0.5,
            points: 501,
            start: TransientStart::Equalized,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dark {
    /// s.
    pub duration: f64,
    pub points: usize,
}

impl Default for Dark {
    fn default() -> Self {
        Self {
            duration: 2400.0,
            points: 41,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fit {
    pub refine_positions: bool,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for Fit {
    fn default() -> Self {
        Self {
            refine_positions: false,
            max_iterations: 200,
            tolerance: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibrate {
    pub rows: Vec<Position>,
    pub max_evaluations: usize,
    pub restarts: usize,
    /// Rms, percentage points.
    pub threshold: f64,
    /// W, R, continuum_beta, capture_rate_gamma_c.
    pub bounds: [[f64; 2]; 4],
}

impl Default for Calibrate {
    fn default() -> Self {
        Self {
            rows: (5..=8).map(|n| Position(PumpPosition::Line(n))).collect(),
            max_evaluations: 800,
            restarts: 2,
            threshold: 10.0,
            bounds: calibrated::BOUNDS.map(|(lo, hi)| [lo, hi]),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Io {
    /// Spectrum CSV for `fit`; without it a spectrum is simulated.
    pub input: Option<PathBuf>,
    pub output_dir: PathBuf,
}

impl Default for Io {
    fn default() -> Self {
        Self {
            input: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl Physics {
    pub fn from_scene(scene: &Scene) -> Self {
        let rates = &scene.rates;
        Self {
            hyperfine_a: scene.donor.hyperfine_a,
            g_electron: scene.donor.g_electron,
            g_nuclear: scene.donor.g_nuclear,
            field_b: scene.donor.field_b,
            temperature: scene.donor.temperature,
            dx_offsets: scene.dx.offsets,
            dx_slopes: scene.dx.slopes,
            line_strengths: scene.strengths,
            gamma_hom: scene.lineshape.gamma_hom,
            sigma_gauss: scene.lineshape.sigma_gauss,
            tail_tau: scene.lineshape.tail_tau,
            saturation_s: scene.lineshape.saturation_s,
            pump_peak_rate_p0: rates.pump_peak_rate_p0,
            w: rates.w,
            r: rates.r,
            auger_fraction_eta: rates.auger_fraction_eta,
            capture_rate_gamma_c: rates.capture_rate_gamma_c,
            continuum_beta: rates.continuum_beta,
            above_gap_g: rates.above_gap_g,
            nuclear_t1: rates.nuclear_t1,
            detailed_balance_t: rates.detailed_balance_t,
            exciton_lifetime: rates.exciton_lifetime,
            ensemble_size: scene.ensemble_size,
            detection_r: scene.detection_r,
        }
    }

    pub fn scene(&self) -> Scene {
        Scene {
            donor: DonorParams {
                hyperfine_a: self.hyperfine_a,
                g_electron: self.g_electron,
                g_nuclear: self.g_nuclear,
                field_b: self.field_b,
                temperature: self.temperature,
            },
            dx: DxConfig {
                offsets: self.dx_offsets,
                slopes: self.dx_slopes,
            },
            strengths: self.line_strengths,
            lineshape: LineshapeModel {
                gamma_hom: self.gamma_hom,
                sigma_gauss: self.sigma_gauss,
                tail_tau: self.tail_tau,
                saturation_s: self.saturation_s,
            },
            rates: RateConfig {
                pump_peak_rate_p0: self.pump_peak_rate_p0,
                w: self.w,
                r: self.r,
                auger_fraction_eta: self.auger_fraction_eta,
                capture_rate_gamma_c: self.capture_rate_gamma_c,
                continuum_beta: self.continuum_beta,
                above_gap_g: self.above_gap_g,
                nuclear_t1: self.nuclear_t1,
                detailed_balance_t: self.detailed_balance_t,
                exciton_lifetime: self.exciton_lifetime,
            },
            ensemble_size: self.ensemble_size,
            detection_r: self.detection_r,
        }
    }
}

impl RunConfig {
    pub fn for_preset(preset: Preset) -> Self {
        Self {
            preset: Some(preset.name().to_string()),
            units: EnergyUnit::MHz,
            physics: Physics::from_scene(&preset.scene()),
            lasers: Lasers::default(),
            scan: Scan::default(),
            transient: Transient::default(),
            dark: Dark::default(),
            fit: Fit::default(),
            calibrate: Calibrate::default(),
            io: Io::default(),
        }
    }

    pub fn scene(&self) -> Scene {
        self.physics.scene()
    }

    /// Range checks on everything outside `physics`, plus the scene's own
    /// validation. Runs before any computation.
    pub fn validate(&self) -> Result<(), CliError> {
        self.scene().validate()?;
        let finite_nonneg = |key: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(CliError::config(key, format!("{v} must be finite and >= 0")))
            }
        };
        let positive = |key: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(CliError::config(key, format!("{v} must be finite and > 0")))
            }
        };
        let at_least = |key: &str, v: usize, min: usize| {
            if v >= min {
                Ok(())
            } else {
                Err(CliError::config(key, format!("{v} must be >= {min}")))
            }
        };
        finite_nonneg("lasers.pump_intensity", self.lasers.pump_intensity)?;
        finite_nonneg("lasers.probe_intensity", self.lasers.probe_intensity)?;
        for (key, e) in [
            ("lasers.pump_energy", self.lasers.pump_energy),
            ("lasers.probe_energy", self.lasers.probe_energy),
        ] {
            if let Some(e) = e {
                if !e.is_finite() {
                    return Err(CliError::config(key, format!("{e} must be finite")));
                }
            }
        }
        at_least("scan.points", self.scan.points, 16)?;
        finite_nonneg("scan.margin", self.scan.margin)?;
        positive("transient.duration", self.transient.duration)?;
        at_least("transient.points", self.transient.points, 2)?;
        positive("dark.duration", self.dark.duration)?;
        at_least("dark.points", self.dark.points, 2)?;
        at_least("fit.max_iterations", self.fit.max_iterations, 1)?;
        positive("fit.tolerance", self.fit.tolerance)?;
        at_least("calibrate.rows", self.calibrate.rows.len(), 1)?;
        for p in &self.calibrate.rows {
            if donorsim::reference::observed_row(p.0).is_none() {
                return Err(CliError::config("calibrate.rows", format!("no observed row for pump position {p}")));
            }
        }
        at_least("calibrate.max_evaluations", self.calibrate.max_evaluations, 1)?;
        finite_nonneg("calibrate.threshold", self.calibrate.threshold)?;
        for [lo, hi] in self.calibrate.bounds {
            if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
                return Err(CliError::config(
                    "calibrate.bounds",
                    format!("[{lo}, {hi}] must satisfy 0 < lower <= upper < inf"),
                ));
            }
        }
        Ok(())
    }
}

/// Command-line inputs that shape the configuration.
#[derive(Clone, Debug, Default)]
pub struct Sources<'a> {
    pub file: Option<&'a Path>,
    pub sets: &'a [String],
    pub units: Option<EnergyUnit>,
    pub out: Option<&'a Path>,
}

/// Builds the fully resolved configuration.
pub fn resolve(src: &Sources) -> Result<RunConfig, CliError> {
    let mut user = match src.file {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| CliError::config(path.display().to_string(), format!("invalid JSON: {e}")))?;
            if !v.is_object() {
                return Err(CliError::config(path.display().to_string(), "top level must be an object"));
            }
            v
        }
        None => Value::Object(Map::new()),
    };
    for s in src.sets {
        apply_set(&mut user, s)?;
    }

    let preset = match user.get("preset") {
        None | Some(Value::Null) => None,
        Some(Value::String(name)) => {
            Some(Preset::from_name(name).map_err(|e| CliError::config("preset", e.to_string()))?)
        }
        Some(other) => return Err(CliError::config("preset", format!("expected a preset name, got {other}"))),
    };
    let template = serde_json::to_value(RunConfig::for_preset(preset.unwrap_or(DEFAULT_PRESET)))
        .expect("config serializes");
    check_known(&user, &template, "")?;
    if preset.is_none() && src.file.is_some() {
        require_physics(&user, &template)?;
    }

    let mut merged = template;
    overlay(&mut merged, &user);
    if preset.is_none() {
        merged["preset"] = Value::Null;
    }
    if let Some(u) = src.units {
        merged["units"] = serde_json::to_value(u).expect("unit serializes");
    }
    if let Some(out) = src.out {
        merged["io"]["output_dir"] = Value::String(out.display().to_string());
    }

    let cfg: RunConfig = serde_path_to_error::deserialize(merged).map_err(|e| {
        let key = e.path().to_string();
        CliError::config(key, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

/// Applies one `key=value` override. The value is read as JSON when it
/// parses, else as a bare string.
fn apply_set(user: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::config(assignment, "--set expects key=value"))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(CliError::config(assignment, "--set expects key=value"));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.trim().to_string()));
    let mut node = user;
    let parts: Vec<&str> = key.split('.').collect();
    for (depth, part) in parts.iter().enumerate() {
        let obj = node
            .as_object_mut()
            .ok_or_else(|| CliError::config(parts[..depth].join("."), "is not a section"))?;
        if depth + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!()
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn check_known(user: &Value, template: &Value, prefix: &str) -> Result<(), CliError> {
    let (Some(u), Some(t)) = (user.as_object(), template.as_object()) else {
        return Ok(());
    };
    for (k, v) in u {
        let path = join(prefix, k);
        let Some(tv) = t.get(k) else {
            return Err(CliError::config(path, "unknown key"));
        };
        if tv.is_object() {
            if !v.is_object() {
                return Err(CliError::config(path, "expected a section (JSON object)"));
            }
            check_known(v, tv, &path)?;
        }
    }
    Ok(())
}

fn require_physics(user: &Value, template: &Value) -> Result<(), CliError> {
    let given = user.get("physics").and_then(Value::as_object);
    let missing: Vec<String> = template["physics"]
        .as_object()
        .expect("physics section")
        .keys()
        .filter(|k| given.map_or(true, |g| !g.contains_key(*k)))
        .map(|k| format!("physics.{k}"))
        .collect();
    match missing.first() {
        None => Ok(()),
        Some(first) => Err(CliError::config(
            first.clone(),
            format!(
                "missing required key (no preset named; {} physics key(s) missing: {})",
                missing.len(),
                missing.join(", ")
            ),
        )),
    }
}

fn overlay(base: &mut Value, user: &Value) {
    match (base, user) {
        (Value::Object(b), Value::Object(u)) => {
            for (k, v) in u {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() => overlay(slot, v),
                    Some(slot) => *slot = v.clone(),
                    None => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, u) => *b = u.clone(),
    }
}
