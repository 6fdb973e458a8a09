//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use fvmn::experiment::ExperimentConfig;
use fvmn::neural::Network;

pub const FD_STEP: f64 = 1e-6;
/// Gradient components below this magnitude are compared absolutely.
pub const FD_SCALE_FLOOR: f64 = 1e-3;

/// Worst `|analytic - numeric| / max(|analytic|, |numeric|, floor)` over
/// `components`, with central differences of the single-sample squared
/// error.
pub fn gradient_mismatch(net: &mut Network, x: &[f64], target: f64, components: &[usize]) -> f64 {
    let (_, grads) = net.sample_gradients(x, target).unwrap();
    let analytic = grads.flat();
    let base = net.params();
    let mut moved = base.clone();
    let mut worst: f64 = 0.0;
    for &p in components {
        moved[p] = base[p] + FD_STEP;
        net.set_params(&moved).unwrap();
        let up = (net.predict(x).unwrap() - target).powi(2);
        moved[p] = base[p] - FD_STEP;
        net.set_params(&moved).unwrap();
        let down = (net.predict(x).unwrap() - target).powi(2);
        moved[p] = base[p];
        let numeric = (up - down) / (2.0 * FD_STEP);
        let scale = analytic[p].abs().max(numeric.abs()).max(FD_SCALE_FLOOR);
        worst = worst.max((analytic[p] - numeric).abs() / scale);
    }
    net.set_params(&base).unwrap();
    worst
}

/// Desk problem with training and hybrid settings cut down for fast runs.
pub fn quick_config() -> ExperimentConfig {
    let mut cfg = ExperimentConfig::desk();
    cfg.series.spinup_steps = 10;
    cfg.series.test_steps = 6;
    cfg.rollout.horizon = 6;
    cfg.rollout.dump_steps = vec![1, 6];
    for t in [&mut cfg.train, &mut cfg.ablation.train, &mut cfg.macnet.train] {
        t.max_epochs = 8;
        t.patience = 4;
    }
    cfg.ablation.cases = vec!["a".into(), "h".into()];
    cfg.ablation.variant_case = "a".into();
    cfg.macnet.horizon = 10;
    cfg.macnet.max_ml_steps = 3;
    cfg
}

pub fn write_config(dir: &Path, cfg: &ExperimentConfig) -> std::path::PathBuf {
    let path = dir.join("experiment.toml");
    std::fs::write(&path, cfg.to_toml()).unwrap();
    path
}

/// Runs the `fvmn` binary with `args`, logging turned off.
pub fn fvmn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fvmn")).args(args).env("RUST_LOG", "off").output().expect("fvmn binary runs")
}

pub fn expect_success(out: &Output) {
    assert!(out.status.success(), "fvmn failed: {}", String::from_utf8_lossy(&out.stderr));
}

/// Sorted relative paths of every file under `root`.
pub fn files_under(root: &Path) -> Vec<String> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<String>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.push(path.strip_prefix(root).unwrap().to_string_lossy().into_owned());
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}
