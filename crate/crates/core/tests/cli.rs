use std::process::Command;

use partwarp::cli::{Manifest, DEMO};
use partwarp::transfer::Demonstration;

fn partwarp() -> Command {
    Command::new(env!("CARGO_BIN_EXE_partwarp"))
}

#[test]
fn exit_codes() {
    assert_eq!(partwarp().arg("--help").output().unwrap().status.code(), Some(0));
    assert_eq!(partwarp().args(["gen", "mug_on_shelf"]).output().unwrap().status.code(), Some(2));
    assert_eq!(partwarp().args(["eval", "--bogus"]).output().unwrap().status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = partwarp()
        .args(["eval", "--set"])
        .arg(format!("dataset_dir={}", dir.path().display()))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest"));
}

#[test]
fn gen_writes_a_consistent_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, r#"{"seed": 2, "gen": {"train_count": 3, "points_per_part": 40}}"#).unwrap();
    let data = dir.path().join("data");
    let out = partwarp()
        .arg("--config")
        .arg(&config)
        .args(["--set", &format!("dataset_dir={}", data.display()), "gen", "bowl_on_mug", "--count", "5"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = Manifest::load(&data).unwrap();
    assert_eq!((manifest.train.len(), manifest.test.len()), (3, 2));
    assert_eq!(manifest.seed, 2);
    for pair in manifest.train.iter().chain(&manifest.test) {
        for f in [&pair.spec, &pair.object_a, &pair.object_b] {
            assert!(data.join(f).is_file(), "{}", f.display());
        }
    }
    let demo = Demonstration::load(&data.join(DEMO)).unwrap();
    assert_eq!((demo.object_a.category.as_str(), demo.object_b.category.as_str()), ("bowl", "mug"));
}
