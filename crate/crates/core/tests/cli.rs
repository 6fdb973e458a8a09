//! End-to-end runs of the `fvmn` binary.

mod common;

use common::{expect_success, files_under, fvmn, quick_config, write_config};
use fvmn::macnet::MacnetTrace;
use fvmn::rollout::RolloutReport;
use tempfile::TempDir;

fn path(p: &std::path::Path) -> &str {
    p.to_str().unwrap()
}

/// Runs generate, train and rollout into `out` with `config`.
fn pipeline(config: &std::path::Path, out: &std::path::Path) {
    for cmd in ["generate", "train", "rollout"] {
        expect_success(&fvmn(&[cmd, "--config", path(config), "--out", path(out)]));
    }
}

#[test]
fn pipeline_is_complete_and_reproducible() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), &quick_config());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    pipeline(&config, &a);
    pipeline(&config, &b);

    let files = files_under(&a);
    assert_eq!(files, files_under(&b));
    let count = |prefix: &str| files.iter().filter(|f| f.starts_with(prefix)).count();
    // Six test steps plus the training pair: eight snapshots and a manifest.
    assert_eq!(count("data/"), 9);
    assert_eq!(count("model/"), 10);
    // Three reports, a summary and two error dumps per mode.
    assert_eq!(count("rollout/"), 10);
    for f in &files {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs between reruns");
    }
}

#[test]
fn rollout_modes_share_steps_and_the_first_step() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), &quick_config());
    let out = tmp.path().join("run");
    pipeline(&config, &out);
    let read = |name: &str| RolloutReport::from_csv(&std::fs::read_to_string(out.join("rollout").join(name)).unwrap()).unwrap();
    let multi = read("multi.csv");
    let single = read("single.csv");
    let frozen = read("constant-gradient.csv");
    let steps = |r: &RolloutReport| r.steps.iter().map(|s| s.step).collect::<Vec<_>>();
    assert_eq!(steps(&multi), (1..=6).collect::<Vec<_>>());
    assert_eq!(steps(&multi), steps(&single));
    assert_eq!(steps(&multi), steps(&frozen));
    // Both modes start from the same true state.
    assert_eq!(multi.steps[0].errors, single.steps[0].errors);
}

#[test]
fn checkpoint_header_records_the_parameter_count() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), &quick_config());
    let out = tmp.path().join("run");
    expect_success(&fvmn(&["generate", "--config", path(&config), "--out", path(&out)]));
    expect_success(&fvmn(&["train", "--config", path(&config), "--out", path(&out)]));
    let text = std::fs::read_to_string(out.join("model/t.ckpt")).unwrap();
    assert!(text.lines().take(10).any(|l| l == "# parameters = 10369"), "{}", &text[..300]);
}

#[test]
fn seed_flag_changes_the_trained_models() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), &quick_config());
    let out = tmp.path().join("run");
    expect_success(&fvmn(&["generate", "--config", path(&config), "--out", path(&out)]));
    let losses = |seed: &str| {
        expect_success(&fvmn(&["train", "--config", path(&config), "--out", path(&out), "--seed", seed]));
        std::fs::read_to_string(out.join("model/losses.csv")).unwrap()
    };
    let first = losses("5");
    assert_eq!(first, losses("5"));
    assert_ne!(first, losses("6"));
}

#[test]
fn unstable_timestep_exits_with_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = quick_config();
    cfg.grid.dt = 1e-2;
    let config = write_config(tmp.path(), &cfg);
    let out = fvmn(&["generate", "--config", path(&config), "--out", path(&tmp.path().join("run"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("limit 0.25"), "{err}");
}

#[test]
fn missing_manifest_exits_with_an_io_error() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), &quick_config());
    let out = fvmn(&["train", "--config", path(&config), "--out", path(&tmp.path().join("empty"))]);
    assert_eq!(out.status.code(), Some(4));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("manifest not found"), "{err}");
}

#[test]
fn missing_config_field_is_named() {
    let tmp = TempDir::new().unwrap();
    let text = quick_config().to_toml().replace("patience = 4\n", "");
    let config = tmp.path().join("broken.toml");
    std::fs::write(&config, text).unwrap();
    let out = fvmn(&["generate", "--config", path(&config), "--out", path(&tmp.path().join("run"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("patience"), "{err}");
}

#[test]
fn defaults_print_a_loadable_config() {
    let out = fvmn(&["defaults"]);
    expect_success(&out);
    let cfg = fvmn::experiment::ExperimentConfig::from_toml(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(cfg, fvmn::experiment::ExperimentConfig::desk());
}

#[test]
fn ungated_macnet_retrains_once() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = quick_config();
    cfg.macnet.max_ml_steps = cfg.macnet.horizon;
    let config = write_config(tmp.path(), &cfg);
    let out = tmp.path().join("run");
    expect_success(&fvmn(&["macnet", "--config", path(&config), "--out", path(&out), "--tolerance", "inf", "--emit-residuals"]));
    let trace = MacnetTrace::from_toml(&std::fs::read_to_string(out.join("macnet/trace.toml")).unwrap()).unwrap();
    assert!(trace.tolerance.is_infinite());
    assert_eq!(trace.retrains.len(), 1);
    assert_eq!(trace.phases.len(), 2);
    assert_eq!(trace.ml_steps(), 8);
    for f in ["audit.csv", "residuals.csv", "speedup.toml"] {
        assert!(out.join("macnet").join(f).is_file(), "{f}");
    }
}

#[test]
fn report_aggregates_every_stage() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), &quick_config());
    let out = tmp.path().join("run");
    pipeline(&config, &out);
    expect_success(&fvmn(&["ablate", "--config", path(&config), "--out", path(&out)]));
    expect_success(&fvmn(&["macnet", "--config", path(&config), "--out", path(&out)]));
    expect_success(&fvmn(&["report", "--out", path(&out)]));

    let hist = std::fs::read_to_string(out.join("report/target_histogram.csv")).unwrap();
    let total: usize = hist.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    // One training pair: every flame cell, 64 rows by 24 radii.
    assert_eq!(total, 64 * 24);
    let summary = std::fs::read_to_string(out.join("report/summary.md")).unwrap();
    for f in ["ablation.csv", "trace.toml", "summary.toml"] {
        assert!(summary.contains(f), "summary does not list {f}");
    }
}

#[test]
fn report_without_artifacts_fails_cleanly() {
    let tmp = TempDir::new().unwrap();
    let out = fvmn(&["report", "--out", path(&tmp.path().join("nothing"))]);
    assert_eq!(out.status.code(), Some(4));
}
