//! CLI behavior: exit codes, output layout, and manifest completeness.

use std::fs;
use std::path::Path;
use std::process::Command;

use sha2::{Digest, Sha256};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rb-isac"))
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("scenario.cfg");
    fs::write(
        &path,
        "m_side=8\nn_side=8\nlink_length=0.5\ndoa_side=8\nsnapshots=32\n\
         monte_carlo_trials=5\namp_small_signal_gain_db=30\n",
    )
    .unwrap();
    path
}

#[test]
fn resonate_succeeds_and_writes_history() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("out");
    let status = bin()
        .args(["resonate", "--seed", "7"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let history = fs::read_to_string(out.join("resonance_history.csv")).unwrap();
    assert!(history.starts_with("iteration,p_bs_tx,p_bs_rx,p_ue_rx,p_ue_tx,mu_dl,mu_ul,gain_w,loss_w\n"));
    assert!(history.lines().count() > 2);
    assert!(out.join("gain_loss_db.csv").exists());
}

#[test]
fn manifest_lists_every_output_with_checksums() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("out");
    let status = bin()
        .args(["fieldmap", "--stage", "first", "--direction", "dl", "--seed", "3"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let listed: Vec<(String, String)> = manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|o| {
            (
                o["file"].as_str().unwrap().to_string(),
                o["sha256"].as_str().unwrap().to_string(),
            )
        })
        .collect();

    // Every file in the directory except the manifest itself is listed,
    // and every checksum matches the bytes on disk.
    let mut on_disk: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n != "manifest.json")
        .collect();
    on_disk.sort();
    let mut listed_names: Vec<String> = listed.iter().map(|(n, _)| n.clone()).collect();
    listed_names.sort();
    assert_eq!(on_disk, listed_names);

    for (name, want) in &listed {
        let bytes = fs::read(out.join(name)).unwrap();
        let got = format!("{:x}", Sha256::digest(&bytes));
        assert_eq!(&got, want, "checksum mismatch for {name}");
    }

    assert_eq!(manifest["master_seed"].as_u64().unwrap(), 3);
    assert!(manifest["config"]["m_side"].as_u64().unwrap() == 8);
    assert!(manifest["runtime_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn fieldmap_labels_follow_figure_panels() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    for (stage, dir, label) in [
        ("first", "dl", "fig6a"),
        ("first", "ul", "fig6b"),
        ("steady", "dl", "fig6c"),
        ("steady", "ul", "fig6d"),
    ] {
        let out = tmp.path().join(format!("out_{label}"));
        let status = bin()
            .args(["fieldmap", "--stage", stage, "--direction", dir, "--seed", "3"])
            .arg("--config")
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success(), "{label} failed");
        assert!(out.join(format!("{label}_fieldmap.csv")).exists());
        assert!(out.join(format!("{label}_fieldmap.txt")).exists());
        let head = fs::read_to_string(out.join(format!("{label}_fieldmap.csv"))).unwrap();
        assert!(head.starts_with("x,z,intensity\n"));
    }
}

#[test]
fn no_resonance_exits_2_but_writes_history() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("under.cfg");
    fs::write(
        &cfg_path,
        "m_side=4\nn_side=4\ndoa_side=4\namp_small_signal_gain_db=0\nmax_iterations=30\n",
    )
    .unwrap();
    let out = tmp.path().join("out");
    let status = bin()
        .args(["resonate"])
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    assert!(out.join("resonance_history.csv").exists());
}

#[test]
fn divergence_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg_path = tmp.path().join("bad.cfg");
    fs::write(
        &cfg_path,
        "m_side=2\nn_side=2\ndoa_side=2\nlink_length=0.5\npath_loss_exp=2000\n",
    )
    .unwrap();
    let status = bin()
        .args(["resonate"])
        .arg("--config")
        .arg(&cfg_path)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn config_errors_exit_4() {
    let tmp = tempfile::tempdir().unwrap();
    // Invariant violation.
    let bad = tmp.path().join("bad.cfg");
    fs::write(&bad, "beta_com=1.5\n").unwrap();
    let out = bin()
        .args(["resonate"])
        .arg("--config")
        .arg(&bad)
        .arg("--out")
        .arg(tmp.path().join("o1"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("beta_com"));

    // Unknown key with its line number.
    let unk = tmp.path().join("unk.cfg");
    fs::write(&unk, "f1=29e9\nnot_a_key=1\n").unwrap();
    let out = bin()
        .args(["resonate"])
        .arg("--config")
        .arg(&unk)
        .arg("--out")
        .arg(tmp.path().join("o2"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("not_a_key"), "stderr: {err}");
}

#[test]
fn small_profile_runs_quickly() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let status = bin()
        .args(["resonate", "--small", "--seed", "1"])
        .env("RBISAC_WORKERS", "2")
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["m_side"].as_u64().unwrap(), 8);
    assert_eq!(manifest["config"]["link_length"].as_f64().unwrap(), 0.5);
}

#[test]
fn doa_peak_file_reports_sub_array() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("out");
    let status = bin()
        .args(["doa", "--seed", "5"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let peak = fs::read_to_string(out.join("doa_peak.csv")).unwrap();
    assert!(peak.starts_with(
        "theta_deg,phi_deg,peak_value,azimuth_degenerate,sub_array_side,per_element_snr_db\n"
    ));
    let row = peak.lines().nth(1).unwrap();
    assert_eq!(row.split(',').nth(4).unwrap(), "8");
    let spectrum = fs::read_to_string(out.join("music_spectrum.csv")).unwrap();
    assert!(spectrum.starts_with("theta_deg,phi_deg,p_music\n"));
    // Full coarse grid: 90 x 360 rows behind the header.
    assert_eq!(spectrum.lines().count(), 1 + 90 * 360);
}

#[test]
fn rmse_snr_sweep_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("out");
    let status = bin()
        .args([
            "rmse", "--axis", "snr", "--from", "-5", "--to", "10", "--step", "5", "--trials",
            "3", "--seed", "9",
        ])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let csv = fs::read_to_string(out.join("rmse_snr.csv")).unwrap();
    assert!(csv.starts_with("snr_db,rmse_theta,rmse_phi,rmse_total,invalid_trials\n"));
    assert_eq!(csv.lines().count(), 1 + 4);
    assert!(csv.lines().nth(1).unwrap().starts_with("-5,"));
}

#[test]
fn usage_errors_exit_4_and_help_exits_0() {
    let out = bin().arg("bogus-subcommand").output().unwrap();
    assert_eq!(out.status.code(), Some(4));
    let help = bin().arg("--help").output().unwrap();
    assert_eq!(help.status.code(), Some(0));
}
