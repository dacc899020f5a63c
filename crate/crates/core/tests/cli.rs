//! End-to-end runs of the `mc2n` binary.

use std::fs;
use std::path::Path;
use std::process::Command;

const SMALL: &str = "[grid]\nrings = 2\n[auction]\nwinners = 6\n[run]\nrepetitions = 2\n\
[rl]\ndemand = [1, 2]\ntau_max = [28.0, 28.0]\n";

fn mc2n(args: &[&str], config: &Path, out: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mc2n"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    fs::write(&config, SMALL).unwrap();
    for args in [&["auction", "sgroup"][..], &["route-analysis"], &["rl"]] {
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        assert!(mc2n(args, &config, &a).status.success(), "{args:?}");
        assert!(mc2n(args, &config, &b).status.success(), "{args:?}");
        let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(!names.is_empty());
        for name in names {
            assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
        }
        fs::remove_dir_all(&a).unwrap();
        fs::remove_dir_all(&b).unwrap();
    }
}

#[test]
fn bad_config_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("bad.toml");
    fs::write(&config, "[auction]\nwinners = -3\n").unwrap();
    let out = mc2n(&["auction", "ijbit"], &config, &dir.path().join("o"));
    assert!(!out.status.success());
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error:") && err.contains("auction.winners"), "{err}");
}

#[test]
fn empty_sweep_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    fs::write(&config, SMALL).unwrap();
    let out_dir = dir.path().join("o");
    let out = mc2n(&["sweep", "--axis", "route.p", "--values", ""], &config, &out_dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    assert_eq!(text, "axis_value,metric,mean,std\n");
}

#[test]
fn sweep_rows_follow_values() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    fs::write(&config, SMALL).unwrap();
    let out_dir = dir.path().join("o");
    let out = mc2n(&["sweep", "--axis", "route.p", "--values", "0.5,0.9"], &config, &out_dir);
    assert!(out.status.success());
    let text = fs::read_to_string(out_dir.join("sweep.csv")).unwrap();
    let labels: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert!(labels.iter().all(|&l| l == "0.5" || l == "0.9"));
    assert_eq!(labels.first(), Some(&"0.5"));
    assert_eq!(labels.last(), Some(&"0.9"));
}
