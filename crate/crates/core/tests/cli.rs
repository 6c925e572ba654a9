use std::fs;
use std::path::Path;
use std::process::Command;

use bistab::cli::config::parse_config;
use bistab::cli::output::format_float;
use bistab::cli::reproduce::grid_ghz;
use bistab::master::{transmission_sweep, CutoffPolicy};
use bistab::models::{fig2_params, Model};

fn bistab(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_bistab")).args(args).output().expect("binary runs");
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stdout).into_owned())
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

const SWEEP: &str = "model = \"jc\"\ncavity_cutoff = 30\n[params]\npreset = \"FIG2\"\n\
                     [sweep]\nstart = 10.596\nstop = 10.604\npoints = 5\n";

#[test]
fn sweep_csv_matches_master_module() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SWEEP);
    let out = dir.path().join("o");
    let (code, _) = bistab(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "freq_GHz,abs_a,n_photon,sigma_z,abs_sm,cutoff");

    let freqs = grid_ghz(10.596, 10.604, 5);
    let s = transmission_sweep(&fig2_params(), Model::Jc, &freqs, CutoffPolicy::Fixed(30)).unwrap();
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells[1], format_float(s.amp_a[i]));
        assert_eq!(cells[2], format_float(s.n_photon.as_ref().unwrap()[i]));
        assert_eq!(cells[5], "30");
    }
    assert!(!csv.contains('\r'));
}

#[test]
fn traj_is_byte_identical_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "t.toml",
        "model = \"jc\"\ncavity_cutoff = 20\n[params]\npreset = \"FIG2\"\n[trajectory]\nt_max = 4.0\n",
    );
    let run = |name: &str| {
        let out = dir.path().join(name);
        let (code, _) = bistab(&["traj", "--config", &cfg, "--seed", "7", "--out", out.to_str().unwrap()]);
        assert_eq!(code, 0);
        fs::read(out.join("trajectory.csv")).unwrap()
    };
    let (a, b) = (run("a"), run("b"));
    assert!(a.len() > 100);
    assert_eq!(a, b);
    let other = dir.path().join("c");
    bistab(&["traj", "--config", &cfg, "--seed", "8", "--out", other.to_str().unwrap()]);
    assert_ne!(a, fs::read(other.join("trajectory.csv")).unwrap());
}

#[test]
fn manifest_config_reparses_to_the_same_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", SWEEP);
    let out = dir.path().join("o");
    bistab(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let echoed = manifest["config"].as_str().unwrap();
    assert_eq!(parse_config(echoed).unwrap(), parse_config(SWEEP).unwrap());
    assert_eq!(manifest["files"][0], "sweep.csv");
    assert!(manifest["error"].is_null());
}

#[test]
fn qfunc_reports_two_peaks() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "q.toml", "model = \"jc\"\ncavity_cutoff = 60\n[params]\npreset = \"FIG2\"\n");
    let out = dir.path().join("o");
    let (code, stdout) = bistab(&["qfunc", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let modes: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("modes.json")).unwrap()).unwrap();
    assert_eq!(modes["peaks"].as_array().unwrap().len(), 2);
    assert!(stdout.contains("[PASS] q-function peaks"));
}

#[test]
fn config_errors_exit_with_two_and_record_the_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.toml", "model = \"jc\"\n[params]\npreset = \"D2\"\ngamma = -1.0\n");
    let out = dir.path().join("o");
    let (code, _) = bistab(&["steady", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 2);
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("params.gamma"));
    assert!(manifest.contains("\"kind\": \"config\""));

    let (code, _) = bistab(&["reproduce", "fig9", "--out", dir.path().join("r").to_str().unwrap()]);
    assert_eq!(code, 2);
}

#[test]
fn numerical_failures_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    // A step far beyond the stability guard.
    let cfg = write(
        dir.path(),
        "t.toml",
        "model = \"jc\"\ncavity_cutoff = 20\n[params]\npreset = \"FIG2\"\n[trajectory]\nt_max = 1.0\ndt = 0.5\n",
    );
    let out = dir.path().join("o");
    let (code, _) = bistab(&["traj", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code, 3);
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"kind\": \"numerical\""));
}

#[test]
fn shipped_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = parse_config(&fs::read_to_string(&path).unwrap());
            assert!(cfg.is_ok(), "{}: {:?}", path.display(), cfg.err());
            n += 1;
        }
    }
    assert!(n >= 4);
}
