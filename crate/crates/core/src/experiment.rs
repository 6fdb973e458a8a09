//! Experiment configuration and the desk-scale flame problem.
//!
//! The desk problem is a premixed fuel/oxidiser stream in a cooled tube with
//! a Poiseuille velocity profile. A hot, burned kernel placed in the tube
//! ignites the surrounding mixture; after a spin-up period the evolving flame
//! provides the ground-truth series.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{DatasetOptions, DomainPartition, InputMode, OutputMode, WallPolicy};
use crate::error::{Error, Result};
use crate::macnet::{MacnetConfig, MacnetProblem, RetrainPolicy};
use crate::neural::{Activation, NetworkSpec, OptimizerKind, TrainConfig};
use crate::solver::{Arrhenius, BoundaryMode, GridSpec, PhysicalParams, Snapshot, Solver};

/// Prescribed steady velocity field `v_x = u_max (1 - (r / R)^2)`, `v_r = 0`,
/// with `R` the outer wall radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowField {
    pub u_max: f64,
}

/// Fresh mixture plus a burned kernel with `tanh` edges. Lengths are in
/// cell units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub temperature: f64,
    pub fuel: f64,
    pub ox: f64,
    pub kernel_temperature: f64,
    pub kernel_center: f64,
    pub kernel_half_length: f64,
    pub kernel_radius: f64,
    pub edge_width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesConfig {
    /// Solver steps run before the first saved snapshot.
    pub spinup_steps: usize,
    /// Consecutive snapshot pairs used for training.
    pub train_pairs: usize,
    /// Steps after the training window kept as test truth.
    pub test_steps: usize,
}

impl SeriesConfig {
    /// Saved steps; the series holds one more snapshot than this.
    pub fn saved_steps(&self) -> usize {
        self.train_pairs + self.test_steps
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub m_star: usize,
    pub input_mode: InputMode,
    pub output_mode: OutputMode,
    pub wall_policy: WallPolicy,
    pub split_fraction: f64,
}

/// Architecture by sweep case (`"a"`-`"h"`) or `"custom"` with explicit
/// hidden widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkChoice {
    pub case: String,
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl NetworkChoice {
    pub fn case(case: char) -> Self {
        NetworkChoice { case: case.to_string(), hidden: Vec::new(), activation: Activation::Relu }
    }

    pub fn spec(&self, input_dim: usize) -> Result<NetworkSpec> {
        if self.case == "custom" {
            let spec = NetworkSpec::new(input_dim, &self.hidden, self.activation);
            spec.validate()?;
            return Ok(spec);
        }
        let mut chars = self.case.chars();
        match (chars.next(), chars.next()) {
            (Some(c), None) => NetworkSpec::sweep_case(c, input_dim),
            _ => Err(Error::Config(format!("network case must be a-h or \"custom\", got {:?}", self.case))),
        }
    }
}

/// Optimiser settings; the seed comes from the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
}

impl TrainSettings {
    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            optimizer: self.optimizer,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            min_delta: self.min_delta,
            seed,
        }
    }
}

impl From<&TrainConfig> for TrainSettings {
    fn from(c: &TrainConfig) -> Self {
        TrainSettings {
            learning_rate: c.learning_rate,
            optimizer: c.optimizer,
            beta1: c.beta1,
            beta2: c.beta2,
            epsilon: c.epsilon,
            batch_size: c.batch_size,
            max_epochs: c.max_epochs,
            patience: c.patience,
            min_delta: c.min_delta,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RolloutConfig {
    pub horizon: usize,
    /// Test steps (1-based) at which per-cell error fields are written.
    pub dump_steps: Vec<usize>,
    /// Measure per-step wall time. Timings make reports non-reproducible.
    pub record_timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AblationConfig {
    /// Sweep cases trained in the tier/derivative configuration.
    pub cases: Vec<String>,
    /// Case used for the four input/output variants.
    pub variant_case: String,
    pub train: TrainSettings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MacnetSettings {
    pub cfd_window: usize,
    /// Scaled-residual threshold; `inf` disables the gate.
    pub tolerance: f64,
    pub max_ml_steps: usize,
    pub retrain: RetrainPolicy,
    pub horizon: usize,
    pub train: TrainSettings,
}

/// Everything a run needs. Every field is required in the TOML form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub grid: GridSpec,
    pub physics: PhysicalParams,
    pub flow: FlowField,
    pub initial: InitialState,
    pub series: SeriesConfig,
    pub dataset: DatasetConfig,
    pub network: NetworkChoice,
    pub train: TrainSettings,
    pub rollout: RolloutConfig,
    pub ablation: AblationConfig,
    pub macnet: MacnetSettings,
}

impl ExperimentConfig {
    /// The desk problem on a 96 x 24 grid.
    pub fn desk() -> Self {
        let train = TrainSettings::from(&TrainConfig::default());
        ExperimentConfig {
            seed: 1,
            grid: GridSpec { m: 96, n: 24, dx: 1e-4, dr: 1e-4, dt: 1e-3 },
            physics: PhysicalParams {
                diffusivity: [8e-7, 1e-6, 6e-7, 6e-7],
                arrhenius: Arrhenius {
                    pre_exponential: 3e7,
                    temperature_exponent: 0.0,
                    activation_energy: 15000.0 * 8.314,
                    gas_constant: 8.314,
                },
                heat_release: 24000.0,
                ox_stoich: 0.5,
                reference_pressure: 101_325.0,
                molar_mass: 0.029,
                wall_temperature: 300.0,
                boundary: BoundaryMode::Channel,
            },
            flow: FlowField { u_max: 0.005 },
            initial: InitialState {
                temperature: 300.0,
                fuel: 0.05,
                ox: 0.2,
                kernel_temperature: 1500.0,
                kernel_center: 30.0,
                kernel_half_length: 5.0,
                kernel_radius: 12.0,
                edge_width: 1.5,
            },
            series: SeriesConfig { spinup_steps: 40, train_pairs: 1, test_steps: 10 },
            dataset: DatasetConfig {
                m_star: 16,
                input_mode: InputMode::Tier,
                output_mode: OutputMode::Derivative,
                wall_policy: WallPolicy::ZeroNeumann,
                split_fraction: 0.8,
            },
            network: NetworkChoice::case('c'),
            train: train.clone(),
            rollout: RolloutConfig { horizon: 10, dump_steps: vec![1, 10], record_timing: false },
            ablation: AblationConfig {
                cases: ["a", "b", "c", "d", "e", "f", "g", "h"].iter().map(|s| s.to_string()).collect(),
                variant_case: "c".into(),
                train: train.clone(),
            },
            macnet: MacnetSettings {
                cfd_window: 2,
                tolerance: 5.0,
                max_ml_steps: 10,
                retrain: RetrainPolicy::WarmStart,
                horizon: 40,
                train,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.physics.validate()?;
        DomainPartition::new(self.grid.m, self.dataset.m_star)?;
        if self.series.train_pairs < 1 {
            return Err(Error::Config("series.train_pairs must be at least 1".into()));
        }
        if self.rollout.horizon > self.series.test_steps {
            return Err(Error::Config(format!(
                "rollout.horizon = {} exceeds the {} saved test steps",
                self.rollout.horizon, self.series.test_steps
            )));
        }
        if let Some(s) = self.rollout.dump_steps.iter().find(|s| **s == 0 || **s > self.rollout.horizon) {
            return Err(Error::Config(format!("rollout.dump_steps entry {s} outside 1..={}", self.rollout.horizon)));
        }
        if !(self.dataset.split_fraction > 0.0 && self.dataset.split_fraction < 1.0) {
            return Err(Error::Config("dataset.split_fraction must lie in (0, 1)".into()));
        }
        let width = self.dataset.input_mode.width();
        self.network.spec(width)?;
        for c in self.ablation.cases.iter().chain(std::iter::once(&self.ablation.variant_case)) {
            NetworkChoice { case: c.clone(), ..self.network.clone() }.spec(width)?;
        }
        for t in [&self.train, &self.ablation.train, &self.macnet.train] {
            t.with_seed(self.seed).validate()?;
        }
        let mc = &self.macnet;
        if mc.cfd_window < 1 || mc.max_ml_steps < 1 {
            return Err(Error::Config("macnet.cfd_window and macnet.max_ml_steps must be at least 1".into()));
        }
        if !(mc.tolerance > 0.0) {
            return Err(Error::Config(format!("macnet.tolerance must be positive, got {}", mc.tolerance)));
        }
        if mc.horizon < mc.cfd_window {
            return Err(Error::Config("macnet.horizon must be at least macnet.cfd_window".into()));
        }
        Ok(())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("experiment config serializes")
    }

    pub fn from_toml(text: &str) -> std::result::Result<Self, toml::de::Error> {
        toml::from_str(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg = Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn partition(&self) -> Result<DomainPartition> {
        DomainPartition::new(self.grid.m, self.dataset.m_star)
    }

    pub fn dataset_options(&self) -> DatasetOptions {
        DatasetOptions {
            input_mode: self.dataset.input_mode,
            output_mode: self.dataset.output_mode,
            wall_policy: self.dataset.wall_policy,
            split_fraction: self.dataset.split_fraction,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        self.train.with_seed(self.seed)
    }

    pub fn macnet_config(&self) -> MacnetConfig {
        let mc = &self.macnet;
        MacnetConfig {
            cfd_window: mc.cfd_window,
            tolerance: mc.tolerance,
            max_ml_steps: mc.max_ml_steps,
            retrain: mc.retrain,
            horizon: mc.horizon,
            train: mc.train.with_seed(self.seed),
        }
    }

    pub fn macnet_problem<'a>(&self, solver: &'a Solver) -> Result<MacnetProblem<'a>> {
        Ok(MacnetProblem {
            solver,
            partition: self.partition()?,
            spec: self.network.spec(self.dataset.input_mode.width())?,
            dataset: self.dataset_options(),
        })
    }

    pub fn solver(&self) -> Result<Solver> {
        Solver::new(self.grid, self.physics)
    }

    /// State at time zero, before spin-up.
    pub fn initial_state(&self) -> Snapshot {
        initial_state(&self.grid, &self.physics, &self.flow, &self.initial)
    }

    /// State after the spin-up steps; the first snapshot of every series.
    pub fn spun_up_state(&self) -> Result<Snapshot> {
        let solver = self.solver()?;
        let mut state = self.initial_state();
        for k in 0..self.series.spinup_steps {
            state = solver.step(&state).map_err(|e| e.at_step(k + 1))?;
        }
        Ok(state)
    }

    /// Spin-up followed by the saved series of `saved_steps + 1` snapshots.
    pub fn generate_series(&self) -> Result<Vec<Snapshot>> {
        self.solver()?.simulate(&self.spun_up_state()?, self.series.saved_steps())
    }
}

/// Burned-kernel initial state on `grid`. Velocities follow the flow field;
/// the kernel's species are fully reacted.
pub fn initial_state(grid: &GridSpec, params: &PhysicalParams, flow: &FlowField, init: &InitialState) -> Snapshot {
    let wall = grid.n as f64 * grid.dr;
    let smooth = |d: f64| 0.5 * (1.0 + (d / init.edge_width).tanh());
    Snapshot::from_fn(grid.m, grid.n, 0.0, |i, j| {
        let r = grid.radius(j);
        let v_x = flow.u_max * (1.0 - (r / wall).powi(2));
        let x = i as f64 + 0.5;
        let rc = j as f64 + 0.5;
        let phi = smooth(init.kernel_half_length - (x - init.kernel_center).abs()) * smooth(init.kernel_radius - rc);
        let t = init.temperature + phi * (init.kernel_temperature - init.temperature);
        let burned = init.fuel * phi;
        [v_x, 0.0, t, init.fuel - burned, burned, init.ox - params.ox_stoich * burned]
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_config_is_valid_and_round_trips() {
        let cfg = ExperimentConfig::desk();
        cfg.validate().unwrap();
        let text = cfg.to_toml();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn missing_field_is_named() {
        let text = ExperimentConfig::desk().to_toml().replace("spinup_steps = 40\n", "");
        let err = ExperimentConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("spinup_steps"), "{err}");
    }

    #[test]
    fn desk_initial_state_is_stable_and_valid() {
        let cfg = ExperimentConfig::desk();
        let s = cfg.initial_state();
        s.validate().unwrap();
        let solver = cfg.solver().unwrap();
        let (cfl, diff) = solver.stability_numbers(&s);
        assert!(cfl <= 0.5 && diff <= 0.25, "cfl {cfl} diffusion {diff}");
        // Fresh mixture at the inlet up to the tanh tail, burned products
        // inside the kernel.
        assert!((s.get(0, 0, crate::solver::Variable::T) - 300.0).abs() < 1e-9);
        assert!(s.get(30, 0, crate::solver::Variable::T) > 1400.0);
    }

    #[test]
    fn custom_network_choice() {
        let c = NetworkChoice { case: "custom".into(), hidden: vec![8, 4], activation: Activation::Sigmoid };
        assert_eq!(c.spec(30).unwrap().hidden, vec![8, 4]);
        assert!(NetworkChoice { case: "cc".into(), ..c.clone() }.spec(30).is_err());
        assert!(NetworkChoice { hidden: vec![0], ..c }.spec(30).is_err());
    }
}
