use std::fs;
use std::process::Command;

use relu_regions::persist::{Checkpoint, RegionDump};
use relu_regions::{init_network, InitScheme, NetSpec};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relu-regions"))
}

#[test]
fn estimate_prints_fifty() {
    let out = bin().args(["estimate", "--Q", "100", "--length", "2", "--c", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().trim(), "50");
}

#[test]
fn unknown_subcommand_exits_one_with_usage() {
    let out = bin().arg("transmogrify").output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("Usage"));
}

#[test]
fn missing_manifest_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["train", "no-such-manifest.json", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn regions_writes_consistent_dump_and_svg() {
    let dir = tempfile::tempdir().unwrap();
    let params = init_network(&NetSpec::planar(&[16, 16, 16], 2), InitScheme::uniform_fanin(4)).unwrap();
    let ck = dir.path().join("net.json");
    Checkpoint::from_params(&params, None).save(&ck).unwrap();
    let out = bin().arg("regions").arg(&ck).arg("--out-dir").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();

    let dump = RegionDump::load(&dir.path().join("net_regions.json")).unwrap();
    let svg = fs::read_to_string(dir.path().join("net_regions.svg")).unwrap();
    assert_eq!(summary["regions"].as_u64().unwrap() as usize, dump.regions.len());
    assert_eq!(svg.matches(r#"class="region""#).count(), dump.regions.len());
    assert_eq!(summary["within_upper_bound"], true);
    let decision = fs::read_to_string(dir.path().join("net_decision.svg")).unwrap();
    assert!(decision.contains(r#"class="decision""#));
    let area: f64 = dump
        .regions
        .iter()
        .map(|r| {
            let v = &r.vertices;
            (0..v.len())
                .map(|i| {
                    let (p, q) = (v[i], v[(i + 1) % v.len()]);
                    p[0] * q[1] - q[0] * p[1]
                })
                .sum::<f64>()
                / 2.0
        })
        .sum();
    assert!((area - 4.0).abs() < 4e-6);
}

#[test]
fn scan_reports_breakpoints_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let params = init_network(&NetSpec::planar(&[8, 8], 2), InitScheme::uniform_fanin(1)).unwrap();
    let ck = dir.path().join("net.json");
    Checkpoint::from_params(&params, None).save(&ck).unwrap();
    let out = bin()
        .arg("scan")
        .arg(&ck)
        .args(["--from=-1,-1", "--to=1,1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let scan: relu_regions::LineScan = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(scan.count, scan.breakpoints.len() + 1);
    let direct = relu_regions::regions::count_breakpoints_on_segment(&params, &[-1.0, -1.0], &[1.0, 1.0], 1e-10).unwrap();
    assert_eq!(scan, direct);
}

#[test]
fn density_emits_ratio_statistics() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["density", "--hidden", "8,8", "--seeds", "3", "--chords", "4", "--gradient-samples", "50"])
        .arg("--out-dir")
        .arg(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["density"]["ratio_mean"].as_f64().unwrap() > 0.0);
    assert_eq!(v["density"]["per_seed_counts"].as_array().unwrap().len(), 3);
    assert!(v["gradient"]["mean"].as_f64().unwrap() > 0.0);
    assert!(dir.path().join("density.json").exists());
}

#[test]
fn region_cap_env_aborts_enumeration() {
    let dir = tempfile::tempdir().unwrap();
    let params = init_network(&NetSpec::planar(&[16, 16], 2), InitScheme::uniform_fanin(0)).unwrap();
    let ck = dir.path().join("net.json");
    Checkpoint::from_params(&params, None).save(&ck).unwrap();
    let out = bin()
        .arg("regions")
        .arg(&ck)
        .arg("--out-dir")
        .arg(dir.path())
        .env("REGION_CAP", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
