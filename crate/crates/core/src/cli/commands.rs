use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::ablate::{run_ablation, AblationResult};
use crate::dataset::io::{write_dataset, DatasetProvenance};
use crate::dataset::{DatasetSplit, SampleTable};
use crate::error::{Error, Result};
use crate::experiment::ExperimentConfig;
use crate::macnet::{self, audit_to_csv, hybrid_error_audit, replay_trace, residuals_to_csv, validate_trace};
use crate::neural::param_count;
use crate::rollout::{
    constant_gradient_observed, error_field, frozen_gradient, multi_step_observed, single_step_observed, RolloutContext,
    RolloutMode, RolloutReport, RolloutSummary, SurrogateBundle,
};
use crate::solver::series::{read_series, write_series, MANIFEST_FILE};
use crate::solver::{continuity_residual, Snapshot, Variable};

pub const DATA_DIR: &str = "data";
pub const MODEL_DIR: &str = "model";
pub const ABLATION_DIR: &str = "ablation";
pub const ROLLOUT_DIR: &str = "rollout";
pub const MACNET_DIR: &str = "macnet";
pub const REPORT_DIR: &str = "report";
pub const CONFIG_ECHO: &str = "config.toml";
pub const TRAIN_REPORT_FILE: &str = "train_report.toml";
pub const LOSSES_FILE: &str = "losses.csv";
pub const T_DATASET_FILE: &str = "dataset_t.txt";
pub const ABLATION_FILE: &str = "ablation.csv";
pub const RANKING_FILE: &str = "ranking.txt";
pub const SUMMARY_FILE: &str = "summary.toml";
pub const TRACE_FILE: &str = "trace.toml";
pub const AUDIT_FILE: &str = "audit.csv";
pub const RESIDUALS_FILE: &str = "residuals.csv";
pub const SPEEDUP_FILE: &str = "speedup.toml";

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn rollout_file(mode: RolloutMode) -> String {
    format!("{}.csv", mode.as_str())
}

pub fn error_dump_file(mode: RolloutMode, step: usize) -> String {
    format!("errors_{}_step{step:03}.csv", mode.as_str())
}

/// Per-variable outcome of `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableTraining {
    pub variable: String,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    pub final_train_loss: f64,
    pub snapshot_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub spec: String,
    pub parameters: usize,
    pub samples: usize,
    pub train_config_hash: String,
    pub variables: Vec<VariableTraining>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedupAccounting {
    pub pure_cfd_seconds: f64,
    pub hybrid_seconds: f64,
    pub hybrid_cfd_seconds: f64,
    pub hybrid_ml_seconds: f64,
    pub hybrid_train_seconds: f64,
    /// Pure-solver time over hybrid time including training.
    pub speedup: f64,
    pub ml_fraction: f64,
}

/// An output directory bound to an effective config.
pub struct Workspace {
    pub config: ExperimentConfig,
    pub out: PathBuf,
}

impl Workspace {
    /// Creates `out` and echoes the config into it.
    pub fn create(config: ExperimentConfig, out: PathBuf) -> Result<Self> {
        config.validate()?;
        write_text(&out.join(CONFIG_ECHO), &config.to_toml())?;
        Ok(Workspace { config, out })
    }

    pub fn dir(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn manifest_path(&self) -> PathBuf {
        self.dir(DATA_DIR).join(MANIFEST_FILE)
    }

    /// Reads a series and checks it was generated for this config's grid
    /// and physics.
    pub fn load_series(&self, manifest: Option<&Path>) -> Result<Vec<Snapshot>> {
        let path = manifest.map_or_else(|| self.manifest_path(), Path::to_path_buf);
        let (m, series) = read_series(&path).map_err(|e| e.missing("manifest"))?;
        if m.grid != self.config.grid || m.params != self.config.physics {
            return Err(Error::Config(format!("{}: series was generated with a different grid or physics", path.display())));
        }
        let need = self.config.series.saved_steps() + 1;
        if series.len() < need {
            return Err(Error::Config(format!("{}: {} snapshots, config needs {need}", path.display(), series.len())));
        }
        Ok(series)
    }

    pub fn cmd_generate(&self) -> Result<PathBuf> {
        let cfg = &self.config;
        cfg.solver()?.check_stability(&cfg.initial_state())?;
        let series = cfg.generate_series()?;
        log::info!("generated {} snapshots on a {}x{} grid", series.len(), cfg.grid.m, cfg.grid.n);
        write_series(&self.dir(DATA_DIR), &cfg.grid, &cfg.physics, &series)
    }

    pub fn cmd_train(&self, manifest: Option<&Path>) -> Result<Vec<PathBuf>> {
        let cfg = &self.config;
        let series = self.load_series(manifest)?;
        let partition = cfg.partition()?;
        let opts = cfg.dataset_options();
        let window = &series[..=cfg.series.train_pairs];
        let table = SampleTable::build(window, &partition, &opts, cfg.grid.dt)?;
        let splits: Vec<DatasetSplit> = Variable::ALL
            .iter()
            .map(|&v| DatasetSplit::from_table(&table, v, opts.split_fraction, opts.seed))
            .collect::<Result<_>>()?;
        let spec = cfg.network.spec(opts.input_mode.width())?;
        let tcfg = cfg.train_config();
        let clock = Instant::now();
        let (bundle, reports) = SurrogateBundle::train_splits(&splits, opts.wall_policy, &spec, &tcfg, None)?;
        log::info!("trained six {spec} networks on {} samples in {:.1} s", table.len(), clock.elapsed().as_secs_f64());

        let dir = self.dir(MODEL_DIR);
        let mut paths = bundle.write(&dir, cfg.seed, &tcfg.hash())?;
        let prov = DatasetProvenance { m: cfg.grid.m, n: cfg.grid.n, m_star: cfg.dataset.m_star };
        let path = dir.join(T_DATASET_FILE);
        write_dataset(&path, &splits[Variable::T.index()], &prov)?;
        paths.push(path);

        let summary = TrainSummary {
            spec: spec.to_string(),
            parameters: param_count(&spec),
            samples: table.len(),
            train_config_hash: tcfg.hash(),
            variables: reports
                .iter()
                .zip(Variable::ALL)
                .map(|(r, v)| VariableTraining {
                    variable: v.name().to_string(),
                    stopped_epoch: r.stopped_epoch,
                    best_epoch: r.best_epoch,
                    best_validation_loss: r.best_validation_loss,
                    final_train_loss: r.train_loss.last().copied().unwrap_or(f64::NAN),
                    snapshot_id: r.snapshot_id.clone(),
                })
                .collect(),
        };
        let path = dir.join(TRAIN_REPORT_FILE);
        write_text(&path, &toml::to_string(&summary).expect("train summary serializes"))?;
        paths.push(path);

        let mut losses = String::from("variable,epoch,train_loss,validation_loss\n");
        for (r, v) in reports.iter().zip(Variable::ALL) {
            for (e, (t, vl)) in r.train_loss.iter().zip(&r.validation_loss).enumerate() {
                writeln!(losses, "{},{},{t:e},{vl:e}", v.name(), e + 1).unwrap();
            }
        }
        let path = dir.join(LOSSES_FILE);
        write_text(&path, &losses)?;
        paths.push(path);
        Ok(paths)
    }

    pub fn cmd_ablate(&self, manifest: Option<&Path>) -> Result<AblationResult> {
        let series = self.load_series(manifest)?;
        let result = run_ablation(&self.config, &series)?;
        let dir = self.dir(ABLATION_DIR);
        write_text(&dir.join(ABLATION_FILE), &result.to_csv())?;
        write_text(&dir.join(RANKING_FILE), &result.ranking_text())?;
        Ok(result)
    }

    pub fn cmd_rollout(&self, manifest: Option<&Path>, model: Option<&Path>, modes: &[RolloutMode]) -> Result<Vec<PathBuf>> {
        let cfg = &self.config;
        let series = self.load_series(manifest)?;
        let model_dir = model.map_or_else(|| self.dir(MODEL_DIR), Path::to_path_buf);
        let bundle = SurrogateBundle::read(&model_dir).map_err(|e| e.missing("model"))?;
        let solver = cfg.solver()?;
        let tp = cfg.series.train_pairs;
        let denominator = continuity_residual(&series[tp], &series[tp - 1], &cfg.grid, &cfg.physics)?;
        let ctx = RolloutContext {
            solver: &solver,
            partition: cfg.partition()?,
            truth: &series[tp..],
            denominator,
            record_timing: cfg.rollout.record_timing,
        };
        let h = cfg.rollout.horizon;
        let dir = self.dir(ROLLOUT_DIR);
        let mut paths = Vec::new();
        let mut reports = Vec::new();
        for &mode in modes {
            let mut dumps: Vec<(usize, Snapshot)> = Vec::new();
            let mut keep = |k: usize, s: &Snapshot| {
                if cfg.rollout.dump_steps.contains(&k) {
                    dumps.push((k, s.clone()));
                }
            };
            let report = match mode {
                RolloutMode::Multi => multi_step_observed(&bundle, &ctx, h, &mut keep)?,
                RolloutMode::Single => single_step_observed(&bundle, &ctx, h, &mut keep)?,
                RolloutMode::ConstantGradient => {
                    let g = frozen_gradient(&series[tp - 1], &series[tp], cfg.grid.dt)?;
                    constant_gradient_observed(&g, &ctx, h, &mut keep)?
                }
            };
            for (k, pred) in &dumps {
                let path = dir.join(error_dump_file(mode, *k));
                write_text(&path, &error_dump(pred, &ctx.truth[*k], &ctx)?)?;
                paths.push(path);
            }
            if let Some((ml, cfd)) = report.mean_timing() {
                log::info!("{} rollout: mean surrogate step {ml:.3} ms, solver step {cfd:.3} ms, ratio {:.3}", mode.as_str(), ml / cfd);
            }
            let path = dir.join(rollout_file(mode));
            write_text(&path, &report.to_csv())?;
            paths.push(path);
            reports.push(report);
        }
        let summary = RolloutSummary::from_reports(&reports)?;
        let path = dir.join(SUMMARY_FILE);
        write_text(&path, &summary.to_toml())?;
        paths.push(path);
        Ok(paths)
    }

    /// Runs MACnet from the spun-up state plus the pure solver reference.
    /// Returns the trace path.
    pub fn cmd_macnet(&self, emit_residuals: bool) -> Result<PathBuf> {
        let cfg = &self.config;
        let solver = cfg.solver()?;
        let start = cfg.spun_up_state()?;
        let problem = cfg.macnet_problem(&solver)?;
        let mc = cfg.macnet_config();
        let dir = self.dir(MACNET_DIR);
        let trace_path = dir.join(TRACE_FILE);

        let out = match macnet::run(&start, &mc, &problem) {
            Ok(out) => out,
            Err(failure) => {
                write_text(&trace_path, &failure.trace.to_toml())?;
                return Err(failure.error);
            }
        };
        write_text(&trace_path, &out.trace.to_toml())?;
        if emit_residuals {
            write_text(&dir.join(RESIDUALS_FILE), &residuals_to_csv(&out.trace))?;
        }

        let clock = Instant::now();
        let truth = solver.simulate(&start, mc.horizon)?;
        let pure = clock.elapsed().as_secs_f64();
        let audit = hybrid_error_audit(&out.trace, &out.states, &truth, &problem.partition)?;
        write_text(&dir.join(AUDIT_FILE), &audit_to_csv(&audit))?;

        let hybrid = out.timing.total_seconds();
        let acct = SpeedupAccounting {
            pure_cfd_seconds: pure,
            hybrid_seconds: hybrid,
            hybrid_cfd_seconds: out.timing.cfd_seconds,
            hybrid_ml_seconds: out.timing.ml_seconds,
            hybrid_train_seconds: out.timing.train_seconds,
            speedup: pure / hybrid,
            ml_fraction: out.trace.ml_fraction,
        };
        log::info!(
            "hybrid run: {} phases, surrogate fraction {:.3}, speedup {:.4} (pure {pure:.3} s, hybrid {hybrid:.3} s)",
            out.trace.phases.len(),
            acct.ml_fraction,
            acct.speedup
        );
        write_text(&dir.join(SPEEDUP_FILE), &toml::to_string(&acct).expect("accounting serializes"))?;

        validate_trace(&out.trace).map_err(|v| Error::Consistency(format!("trace validation failed: {}", v.join("; "))))?;
        replay_trace(&out.trace, &out.states, &solver)?;
        Ok(trace_path)
    }
}

/// Per-cell relative error of every variable, flame cells only.
fn error_dump(pred: &Snapshot, truth: &Snapshot, ctx: &RolloutContext<'_>) -> Result<String> {
    let fields: Vec<Vec<(usize, usize, f64, bool)>> =
        Variable::ALL.iter().map(|&v| error_field(pred, truth, v, &ctx.partition)).collect::<Result<_>>()?;
    let mut out = String::from("i,j");
    for v in Variable::ALL {
        write!(out, ",{}", v.name()).unwrap();
    }
    out.push('\n');
    for c in 0..fields[0].len() {
        let (i, j, _, _) = fields[0][c];
        write!(out, "{i},{j}").unwrap();
        for f in &fields {
            write!(out, ",{:e}", f[c].2).unwrap();
        }
        out.push('\n');
    }
    Ok(out)
}

/// Reads a rollout report written by `cmd_rollout`.
pub fn read_rollout(path: &Path) -> Result<RolloutReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RolloutReport::from_csv(&text).map_err(|e| Error::parse(path, e))
}
