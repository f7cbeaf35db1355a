use std::path::Path;
use std::process::{Command, Output};

fn ncml(dir: &Path, args: &[&str], seed_env: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ncml"));
    cmd.current_dir(dir).args(args).env_remove("NCML_SEED");
    if let Some(seed) = seed_env {
        cmd.env("NCML_SEED", seed);
    }
    cmd.output().unwrap()
}

fn swap_cfg() -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("configs/swap.cfg")
        .to_string_lossy()
        .into_owned()
}

#[test]
fn gen_data_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let a = ncml(dir.path(), &["gen-data", "--size", "1000", "--seed", "7"], None);
    let b = ncml(dir.path(), &["gen-data", "--size", "1000", "--seed", "7"], None);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert_eq!(text.lines().count(), 1001);
    let c = ncml(dir.path(), &["gen-data", "--size", "1000", "--seed", "8"], None);
    assert_ne!(text.as_bytes(), c.stdout.as_slice());
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let flag = ncml(dir.path(), &["gen-data", "--size", "50", "--seed", "11"], None);
    let env = ncml(dir.path(), &["gen-data", "--size", "50"], Some("11"));
    assert!(env.status.success());
    assert_eq!(flag.stdout, env.stdout);
}

#[test]
fn scripted_trial_prints_transmission_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = ncml(dir.path(), &["trial", "--config", &swap_cfg()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("scheme=nc n=3 eta=0.75"), "{text}");
    assert!(text.contains("scheme=arq n=4 eta=1"), "{text}");
    assert!(text.contains("phase=retx packets=0^1"), "{text}");
}

#[test]
fn empty_scheme_list_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("e.cfg"), "schemes =\n").unwrap();
    let out = ncml(dir.path(), &["sweep", "--config", "e.cfg"], None);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schemes"));
}

#[test]
fn malformed_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.cfg"), "receivers = 2\nforward_p = 1.5\n").unwrap();
    let out = ncml(dir.path(), &["sweep", "--config", "bad.cfg"], None);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("forward_p"));
}

#[test]
fn train_requires_an_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = ncml(dir.path(), &["train"], None);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ncml(dir.path(), &["fly"], None).status.code(), Some(2));
}

#[test]
fn trained_model_serves_the_trial_command() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("s.cfg"), "train_size = 300\nschemes = nc-ml\npackets = 4\n").unwrap();
    let train = ncml(dir.path(), &["train", "--config", "s.cfg", "--out", "m.json"], None);
    assert!(train.status.success(), "{}", String::from_utf8_lossy(&train.stderr));
    assert!(String::from_utf8_lossy(&train.stdout).contains("selected="));
    let trial = ncml(dir.path(), &["trial", "--config", "s.cfg", "--model", "m.json"], None);
    assert!(trial.status.success());
    assert!(String::from_utf8_lossy(&trial.stdout).contains("scheme=nc-ml n="));
}
