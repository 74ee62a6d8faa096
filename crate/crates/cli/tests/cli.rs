use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use donorsim::reference::PumpPosition;
use donorsim::scene::calibrated;
use donorsim::units::MHZ_PER_NEV;
use serde_json::Value;
use sha2::{Digest, Sha256};

const FAST: [&str; 2] = ["--set", "physics.ensemble_size=16"];

fn donorsim(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_donorsim"));
    cmd.args(args).env_remove("DONORSIM_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn run_in(dir: &Path, scenario: &str, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec![scenario, "--out", out];
    args.extend_from_slice(extra);
    donorsim(&args, &[])
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn write_config(dir: &Path, json: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path
}

#[test]
fn levels_table_has_twelve_ordered_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(tmp.path(), "levels", &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = read(tmp.path(), "levels.csv");
    assert!(!text.contains('\r'));
    let (header, rows) = csv_rows(&text);
    assert_eq!(header, ["index", "doublet", "initial_state", "energy_MHz", "energy_neV"]);
    assert_eq!(rows.len(), 12);
    let mhz: Vec<f64> = rows.iter().map(|r| r[3].parse().unwrap()).collect();
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0], (i + 1).to_string());
        assert_eq!(r[1], (i / 2 + 1).to_string());
        let nev: f64 = r[4].parse().unwrap();
        assert!((nev * MHZ_PER_NEV - mhz[i]).abs() <= 1e-9 * mhz[i].abs().max(1.0));
    }
    assert!(mhz.windows(2).all(|w| w[1] > w[0]));
    // the two intra-doublet splittings average to A/2
    let split = |d: usize| mhz[2 * d + 1] - mhz[2 * d];
    assert!(((split(0) + split(1)) / 2.0 - 117.53 / 2.0).abs() < 1e-9);
}

#[test]
fn micro_ev_units_add_a_column() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(tmp.path(), "levels", &["--units", "ueV"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&read(tmp.path(), "levels.csv"));
    assert_eq!(header.last().unwrap(), "energy_ueV");
    let nev: f64 = rows[0][4].parse().unwrap();
    let uev: f64 = rows[0][5].parse().unwrap();
    assert!((uev * 1000.0 - nev).abs() < 1e-9 * nev.abs());
}

#[test]
fn steady_line6_matches_the_calibrated_preset() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(
        tmp.path(),
        "steady",
        &["--set", "preset=table1_calibrated", "--set", "lasers.pump=6"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&read(tmp.path(), "populations.csv"));
    let stored = calibrated::steady_row(PumpPosition::Line(6)).unwrap();
    let pe: f64 = rows[0][column(&header, "P_electron")].parse().unwrap();
    let pn: f64 = rows[0][column(&header, "P_nuclear")].parse().unwrap();
    assert!((pe - stored.polarization.0).abs() <= 0.005, "{pe}");
    assert!((pn - stored.polarization.1).abs() <= 0.005, "{pn}");
    for (i, name) in ["upUp", "upDown", "downDown", "downUp"].iter().enumerate() {
        let v: f64 = rows[0][column(&header, name)].parse().unwrap();
        assert!((v - stored.populations[i]).abs() <= 0.005, "{name} {v}");
    }
}

#[test]
fn missing_required_key_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let mut physics = serde_json::to_value(donorsim_config_physics()).unwrap();
    physics.as_object_mut().unwrap().remove("hyperfine_A");
    let cfg = write_config(tmp.path(), &serde_json::json!({ "physics": physics }).to_string());
    let out = tmp.path().join("out");
    let o = donorsim(&["levels", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("physics.hyperfine_A"), "{}", stderr(&o));
    assert!(!out.exists(), "nothing runs before validation");
}

/// Physics section of the calibrated preset, as a config file spells it.
fn donorsim_config_physics() -> Value {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(tmp.path(), "levels", &[]);
    assert!(o.status.success());
    let cfg: Value = serde_json::from_str(&read(tmp.path(), "resolved_config.json")).unwrap();
    cfg["physics"].clone()
}

#[test]
fn complete_file_without_preset_is_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &serde_json::json!({ "physics": donorsim_config_physics() }).to_string(),
    );
    let out = tmp.path().join("out");
    let o = donorsim(&["levels", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], &[]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn config_errors_name_the_key() {
    let tmp = tempfile::tempdir().unwrap();
    for (set, key) in [
        ("physics.bogus=1", "physics.bogus"),
        ("physics.W=-3", "physics.W"),
        ("physics.temperature_T=0", "physics.temperature_T"),
        ("lasers.pump_intensity=-1", "lasers.pump_intensity"),
        ("preset=nope", "preset"),
    ] {
        let o = run_in(tmp.path(), "steady", &["--set", set]);
        assert_eq!(o.status.code(), Some(2), "{set}");
        assert!(stderr(&o).contains(key), "{set}: {}", stderr(&o));
    }
    let cfg = write_config(tmp.path(), r#"{"preset": "ntype_default", "scan": {"points": 100, "step": 2}}"#);
    let o = donorsim(&["spectrum", "--config", cfg.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("scan.step"), "{}", stderr(&o));
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let o = donorsim(&["levels", "--out", "/nonexistent/never"], &[("DONORSIM_THREADS", "many")]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("DONORSIM_THREADS"));
}

#[test]
fn interleaved_doublets_violate_the_catalog_invariant() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(tmp.path(), "levels", &["--set", "physics.dx_offsets=[0,-800,0,0,0,0]"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("physics.dx_offsets"));
}

#[test]
fn fit_that_runs_out_of_iterations_exits_with_its_own_code() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(
        tmp.path(),
        "fit",
        &[FAST[0], FAST[1], "--set", "scan.points=120", "--set", "fit.max_iterations=1"],
    );
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
    assert!(read(tmp.path(), "fit_report.txt").contains("converged=false"));
    let record: Value = serde_json::from_str(&read(tmp.path(), "run_record.json")).unwrap();
    assert_eq!(record["exit_code"], 5);
}

#[test]
fn spectrum_is_deterministic_and_digested() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |dir: &Path| -> Vec<String> {
        ["spectrum", "--out", dir.to_str().unwrap(), FAST[0], FAST[1], "--set", "scan.points=200"]
            .iter()
            .map(|s| s.to_string())
            .collect()
    };
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let a_args = args(&a);
    let b_args = args(&b);
    let o = donorsim(&a_args.iter().map(String::as_str).collect::<Vec<_>>(), &[("DONORSIM_THREADS", "1")]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = donorsim(&b_args.iter().map(String::as_str).collect::<Vec<_>>(), &[("DONORSIM_THREADS", "3")]);
    assert!(o.status.success(), "{}", stderr(&o));

    let text = read(&a, "spectrum.csv");
    assert_eq!(text, read(&b, "spectrum.csv"));
    assert!(text.starts_with("energy_MHz,signal\n"));
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().count(), 201);

    let record: Value = serde_json::from_str(&read(&b, "run_record.json")).unwrap();
    assert_eq!(record["threads"], 3);
    assert_eq!(record["scenario"], "spectrum");
    assert_eq!(record["version"], env!("CARGO_PKG_VERSION"));
    assert!(record["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert_eq!(record["config"]["scan"]["points"], 200);
    let digest = record["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .find(|o| o["file"] == "spectrum.csv")
        .unwrap()["sha256"]
        .as_str()
        .unwrap()
        .to_string();
    assert_eq!(digest, hex::encode(Sha256::digest(text.as_bytes())));

    // the resolved config reproduces the run
    let c = tmp.path().join("c");
    let o = donorsim(
        &[
            "spectrum",
            "--config",
            a.join("resolved_config.json").to_str().unwrap(),
            "--out",
            c.to_str().unwrap(),
        ],
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(text, read(&c, "spectrum.csv"));
}

#[test]
fn spectrum_units_follow_the_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run_in(
        tmp.path(),
        "spectrum",
        &[FAST[0], FAST[1], "--set", "scan.points=50", "--units", "neV"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(read(tmp.path(), "spectrum.csv").starts_with("energy_neV,signal\n"));
}

#[test]
fn fit_reads_an_exported_spectrum() {
    let tmp = tempfile::tempdir().unwrap();
    let spec_dir = tmp.path().join("spec");
    let o = run_in(
        &spec_dir,
        "spectrum",
        &[FAST[0], FAST[1], "--set", "scan.points=300", "--set", "lasers.pump=null", "--units", "neV"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let input = spec_dir.join("spectrum.csv");
    let fit_dir = tmp.path().join("fit");
    let set_input = format!("io.input={}", input.display());
    let o = run_in(&fit_dir, "fit", &[FAST[0], FAST[1], "--set", &set_input]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = read(&fit_dir, "fit_report.txt");
    assert!(report.contains("converged=true"), "{report}");
    let (header, rows) = csv_rows(&read(&fit_dir, "fit.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(header.len(), rows[0].len());
    // probe-only light leaves the donors near equilibrium, so the nuclear
    // polarization is small
    let pn: f64 = rows[0][column(&header, "P_nuclear")].parse().unwrap();
    assert!(pn.abs() < 25.0, "{pn}");
}

#[test]
fn transient_and_dark_trajectories() {
    let tmp = tempfile::tempdir().unwrap();
    let t = tmp.path().join("t");
    let o = run_in(&t, "transient", &[FAST[0], FAST[1], "--set", "transient.points=51"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&read(&t, "transient.csv"));
    assert_eq!(header[..2], ["time_s", "signal"]);
    assert_eq!(rows.len(), 51);
    let dd = column(&header, "downDown");
    let first: f64 = rows[0][dd].parse().unwrap();
    let last: f64 = rows[50][dd].parse().unwrap();
    assert_eq!(first, 0.25);
    assert!(last > 0.8, "{last}");

    let d = tmp.path().join("d");
    let o = run_in(&d, "dark", &[FAST[0], FAST[1], "--set", "physics.R=0", "--set", "dark.points=5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&read(&d, "dark.csv"));
    let rec = column(&header, "recovered");
    let values: Vec<f64> = rows.iter().map(|r| r[rec].parse().unwrap()).collect();
    assert_eq!(values[0], 0.0);
    assert!(values.windows(2).all(|w| w[1] > w[0]), "{values:?}");

    let o = run_in(&d, "dark", &["--set", "lasers.pump=null"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("lasers.pump"));
}

#[test]
fn calibrate_writes_a_reusable_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cal = tmp.path().join("cal");
    let o = run_in(
        &cal,
        "calibrate",
        &[
            "--set",
            "physics.ensemble_size=4",
            "--set",
            "calibrate.max_evaluations=12",
            "--set",
            "calibrate.restarts=0",
            "--set",
            "calibrate.threshold=100",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let report = read(&cal, "calibration_report.txt");
    for key in ["W=", "R=", "continuum_beta=", "capture_rate_gamma_c=", "rms_points="] {
        assert!(report.lines().any(|l| l.starts_with(key)), "{key}");
    }
    let (_, rows) = csv_rows(&read(&cal, "calibration.csv"));
    assert_eq!(rows.len(), 4);

    let again = tmp.path().join("again");
    let cfg = cal.join("calibrated_config.json");
    let o = donorsim(
        &["steady", "--config", cfg.to_str().unwrap(), "--out", again.to_str().unwrap()],
        &[],
    );
    assert!(o.status.success(), "{}", stderr(&o));

    let strict = tmp.path().join("strict");
    let o = run_in(
        &strict,
        "calibrate",
        &[
            "--set",
            "physics.ensemble_size=4",
            "--set",
            "calibrate.max_evaluations=4",
            "--set",
            "calibrate.restarts=0",
            "--set",
            "calibrate.threshold=0.001",
        ],
    );
    assert_eq!(o.status.code(), Some(5), "{}", stderr(&o));
}
