use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use penning_cli::checks::{run_check, Anchors};
use penning_cli::commands::{run, Command as Sub};
use penning_cli::scenario::Scenario;
use penning::units::{Species, ATOMIC_MASS_UNIT};

const BASIC: &str = r#"
seed = 3

[trap]
species = "be9"
b_field = "3 T"
omega_z = "2.5 MHz"
"#;

fn penning(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_penning"))
        .args(args)
        .current_dir(dir)
        .env_remove("PENNING_OUT_DIR")
        .output()
        .unwrap()
}

fn scenario(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("scenario.toml");
    fs::write(&p, text).unwrap();
    p
}

fn text(o: &Output) -> String {
    format!("{}{}", String::from_utf8_lossy(&o.stdout), String::from_utf8_lossy(&o.stderr))
}

#[test]
fn modes_table_has_radial_frequencies() {
    let dir = tempfile::tempdir().unwrap();
    scenario(dir.path(), BASIC);
    let o = penning(&["modes", "scenario.toml", "--out", "res"], dir.path());
    assert!(o.status.success(), "{}", text(&o));
    let csv = fs::read_to_string(dir.path().join("res/modes.csv")).unwrap();
    assert!(csv.starts_with("quantity,rad_per_s,mhz\n"));
    let mhz = |q: &str| -> f64 {
        let line = csv.lines().find(|l| l.starts_with(q)).unwrap();
        line.rsplit(',').next().unwrap().parse().unwrap()
    };
    assert!((mhz("omega_plus") - 4.41).abs() < 0.01 * 4.41);
    assert!((mhz("omega_minus") - 0.71).abs() < 0.01 * 0.71);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("res/modes.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "modes");
    assert_eq!(manifest["seed"], 3);
    assert_eq!(manifest["outputs"][0]["file"], "modes.csv");
}

#[test]
fn raster_header_carries_repeats_and_dwell() {
    let sc = Scenario::from_str_in(BASIC, Path::new(".")).unwrap();
    let r = run(Sub::Raster, &sc).unwrap();
    let csv = String::from_utf8(r.outputs[0].bytes.clone()).unwrap();
    let header: Vec<&str> = csv.lines().take_while(|l| l.starts_with('#')).collect();
    let joined = header.join("\n");
    assert!(joined.contains("# repeats: 172"), "{joined}");
    assert!(joined.contains("# dwell_s: 5e-4"), "{joined}");
    assert!(joined.contains("# waypoints: 58"), "{joined}");
    assert_eq!(csv.lines().filter(|l| l.contains(",dwell,")).count(), 58);
}

#[test]
fn empty_scenario_lists_required_fields() {
    let dir = tempfile::tempdir().unwrap();
    scenario(dir.path(), "");
    let o = penning(&["modes", "scenario.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let t = text(&o);
    for f in ["trap.species", "trap.b_field", "trap.omega_z"] {
        assert!(t.contains(f), "{t}");
    }
}

#[test]
fn bad_values_report_line_and_field() {
    let dir = tempfile::tempdir().unwrap();
    scenario(dir.path(), "[trap]\nspecies = \"be9\"\nb_field = \"3 V\"\nomega_z = \"2.5 MHz\"\n");
    let o = penning(&["modes", "scenario.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let t = text(&o);
    assert!(t.contains("line 3") && t.contains("b_field"), "{t}");

    scenario(dir.path(), "[trap]\nspecies = \"be9\"\nb_field = \"3 T\"\nomega_z = \"2.5 MHz\"\nomegaz = 1\n");
    let o = penning(&["modes", "scenario.toml"], dir.path());
    assert_eq!(o.status.code(), Some(1), "{}", text(&o));
}

#[test]
fn unstable_trap_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    scenario(dir.path(), "[trap]\nspecies = \"be9\"\nb_field = \"3 T\"\nomega_z = \"4 MHz\"\n");
    let o = penning(&["modes", "scenario.toml"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", text(&o));
}

#[test]
fn help_and_unknown_flags() {
    let dir = tempfile::tempdir().unwrap();
    let o = penning(&["--help"], dir.path());
    assert!(o.status.success());
    let t = text(&o);
    for sub in [
        "modes", "solve", "null", "cool-doppler", "cool-sideband", "thermometry", "heating", "coherence", "transport",
        "raster", "isolation", "verify",
    ] {
        assert!(t.contains(sub), "{sub} missing from help");
        assert!(penning(&[sub, "--help"], dir.path()).status.success());
    }
    scenario(dir.path(), BASIC);
    let o = penning(&["modes", "scenario.toml", "--frobnicate"], dir.path());
    assert!(!o.status.success());
    assert!(text(&o).contains("--frobnicate"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    scenario(
        dir.path(),
        &format!("{BASIC}\n[heating]\nslope = \"0.49 /s\"\nspan = \"2 s\"\n\n[doppler]\nduration = \"30 us\"\nrepeats = 3\n"),
    );
    for cmd in ["heating", "cool-doppler"] {
        assert!(penning(&[cmd, "scenario.toml", "--out", "a"], dir.path()).status.success());
        assert!(penning(&[cmd, "scenario.toml", "--out", "b"], dir.path()).status.success());
    }
    let mut compared = 0;
    for entry in fs::read_dir(dir.path().join("a")).unwrap() {
        let name = entry.unwrap().file_name();
        if name.to_string_lossy().ends_with(".csv") {
            let a = fs::read(dir.path().join("a").join(&name)).unwrap();
            let b = fs::read(dir.path().join("b").join(&name)).unwrap();
            assert_eq!(a, b, "{name:?}");
            compared += 1;
        }
    }
    assert_eq!(compared, 4);
}

#[test]
fn different_seeds_differ() {
    let a = Scenario::from_str_in(&format!("{BASIC}\n[heating]\nslope = \"1 /s\"\n"), Path::new(".")).unwrap();
    let mut b = a.clone();
    b.seed = 4;
    assert_ne!(run(Sub::Heating, &a).unwrap().outputs, run(Sub::Heating, &b).unwrap().outputs);
}

#[test]
fn output_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    scenario(dir.path(), &format!("{BASIC}\n[output]\ndir = \"from-scenario\"\n"));
    let o = Command::new(env!("CARGO_BIN_EXE_penning"))
        .args(["modes", "scenario.toml"])
        .current_dir(dir.path())
        .env("PENNING_OUT_DIR", dir.path().join("from-env"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", text(&o));
    assert!(dir.path().join("from-env/modes.csv").exists());
    assert!(!dir.path().join("from-scenario").exists());

    let o = penning(&["modes", "scenario.toml"], dir.path());
    assert!(o.status.success());
    assert!(dir.path().join("from-scenario/modes.csv").exists());
}

#[test]
fn tampered_mass_fails_mode_check() {
    let good = Anchors::default();
    assert!(run_check(1, &good).passed);
    let bad = Anchors {
        species: Species { mass: 9.5 * ATOMIC_MASS_UNIT, ..good.species },
        ..good
    };
    assert!(!run_check(1, &bad).passed);
    assert!(!run_check(3, &bad).passed);
}

#[test]
fn verify_fails_on_tampered_scenario() {
    let dir = tempfile::tempdir().unwrap();
    scenario(dir.path(), &BASIC.replace("species = \"be9\"", "species = \"be9\"\nmass = \"9.5 u\""));
    let o = penning(&["verify", "paper-anchors", "--scenario", "scenario.toml"], dir.path());
    assert!(!o.status.success());
    let t = text(&o);
    assert!(t.lines().any(|l| l.starts_with("[FAIL]  1")), "{t}");
}

#[test]
fn reference_scenario_runs_every_subcommand() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/reference.toml");
    let sc = Scenario::load(&path).unwrap();
    for cmd in [
        Sub::Modes,
        Sub::Solve,
        Sub::Null,
        Sub::CoolDoppler,
        Sub::CoolSideband,
        Sub::Thermometry,
        Sub::Heating,
        Sub::Coherence,
        Sub::Transport,
        Sub::Raster,
        Sub::Isolation,
    ] {
        let r = run(cmd, &sc).unwrap_or_else(|e| panic!("{}: {e}", cmd.name()));
        assert!(!r.outputs.is_empty() && r.outputs.iter().all(|o| !o.bytes.is_empty()), "{}", cmd.name());
    }
}
