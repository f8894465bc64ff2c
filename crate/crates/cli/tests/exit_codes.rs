use std::process::Command;

fn fbd(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_fbd")).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

#[test]
fn gradcheck_succeeds() {
    let (code, stdout, _) = fbd(&["gradcheck"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("toy dims: kappa=8 tau=4 M=2"));
    assert_eq!(stdout.matches("PASS").count(), 4);
}

#[test]
fn missing_config_is_user_error() {
    let (code, _, stderr) = fbd(&["train", "--config", "/no/such/exp.toml"]);
    assert_eq!(code, 2);
    assert!(stderr.contains("/no/such/exp.toml"));
    assert_eq!(stderr.lines().count(), 1);
}

#[test]
fn missing_csv_is_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, "[dataset]\ncsv = \"absent.csv\"\ntarget_columns = [\"y\"]\n").unwrap();
    let (code, _, stderr) = fbd(&["train", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("absent.csv"), "{stderr}");
}

#[test]
fn bad_usage_is_user_error() {
    assert_eq!(fbd(&["train", "--variant", "nonsense"]).0, 2);
    assert_eq!(fbd(&["frobnicate"]).0, 2);
}

#[test]
fn empty_report_is_user_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, stderr) = fbd(&["report", dir.path().to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(stderr.contains("no metric records"));
}

#[test]
fn partial_failure_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "variants = [\"backbone\", \"dt\"]\nseeds = [0]\n[dataset.synth]\nlength = 200\n[window]\nkappa = 16\nhorizons = [4]\n[gp]\ninducing = 0\n[training]\nepochs = 1\n",
    )
    .unwrap();
    let out = dir.path().join("out");
    let (code, _, stderr) = fbd(&[
        "ablate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 1, "{stderr}");
    assert!(stderr.contains("1 of 2 sweep cells failed"));
    assert!(std::fs::read_to_string(out.join("results.md"))
        .unwrap()
        .contains("FAILED"));
}

#[test]
fn synth_then_train() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(
        &cfg,
        "[dataset.synth]\nlength = 200\n[window]\nkappa = 16\nhorizons = [4]\n[training]\nepochs = 1\n",
    )
    .unwrap();
    let out = dir.path().to_str().unwrap();
    let c = cfg.to_str().unwrap();
    assert_eq!(fbd(&["synth", "--config", c, "--out", out]).0, 0);
    assert!(dir.path().join("synth.csv").is_file());
    let (code, stdout, stderr) = fbd(&["train", "--config", c, "--out", out, "--variant", "rb", "--seed", "5"]);
    assert_eq!(code, 0, "{stderr}");
    assert!(stdout.contains("synth_rb_h4_s5.ckpt"));
}
