//! Training samples from snapshot pairs: tier inputs, derivative targets,
//! domain partition and seeded train/validation splits.

pub mod io;
mod standardize;

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::{Snapshot, Variable, NUM_VARS};

pub use standardize::{sigma_floor, Standardizer};

/// Number of stencil entries per variable in a tier input.
pub const TIER_WIDTH: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    Inlet,
    Flame,
    Outlet,
}

/// Axial split into an inlet strip, the ML (flame) region and an outlet
/// strip, each strip `m_star` rows deep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainPartition {
    m: usize,
    m_star: usize,
}

impl DomainPartition {
    pub fn new(m: usize, m_star: usize) -> Result<Self> {
        if 2 * m_star >= m {
            return Err(Error::Config(format!("M* = {m_star} leaves no flame region in {m} axial cells")));
        }
        Ok(DomainPartition { m, m_star })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn m_star(&self) -> usize {
        self.m_star
    }

    pub fn region(&self, i: usize) -> Region {
        if i < self.m_star {
            Region::Inlet
        } else if i < self.m - self.m_star {
            Region::Flame
        } else {
            Region::Outlet
        }
    }

    pub fn is_flame(&self, i: usize) -> bool {
        self.region(i) == Region::Flame
    }

    pub fn flame_rows(&self) -> Range<usize> {
        self.m_star..self.m - self.m_star
    }

    /// Flame cells in row-major order for a grid with `n` radial cells.
    pub fn flame_cells(&self, n: usize) -> impl Iterator<Item = (usize, usize)> {
        self.flame_rows().flat_map(move |i| (0..n).map(move |j| (i, j)))
    }

    pub fn flame_cell_count(&self, n: usize) -> usize {
        (self.m - 2 * self.m_star) * n
    }
}

/// Substitution for the missing `j + 1` neighbour of the outer-wall row.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum WallPolicy {
    /// Repeat the centre value.
    #[default]
    ZeroNeumann,
    /// Wall temperature for `T`, zero for every other variable.
    WallValue { wall_temperature: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputMode {
    #[default]
    Tier,
    CenterOnly,
}

impl InputMode {
    pub fn width(self) -> usize {
        match self {
            InputMode::Tier => TIER_WIDTH * NUM_VARS,
            InputMode::CenterOnly => NUM_VARS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputMode {
    #[default]
    Derivative,
    Absolute,
}

impl std::str::FromStr for InputMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tier" => Ok(InputMode::Tier),
            "center-only" | "center" => Ok(InputMode::CenterOnly),
            other => Err(Error::Config(format!("unknown input mode {other:?} (expected tier | center-only)"))),
        }
    }
}

impl std::str::FromStr for OutputMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "derivative" => Ok(OutputMode::Derivative),
            "absolute" => Ok(OutputMode::Absolute),
            other => Err(Error::Config(format!("unknown output mode {other:?} (expected derivative | absolute)"))),
        }
    }
}

impl InputMode {
    pub fn as_str(self) -> &'static str {
        match self {
            InputMode::Tier => "tier",
            InputMode::CenterOnly => "center-only",
        }
    }
}

impl OutputMode {
    pub fn as_str(self) -> &'static str {
        match self {
            OutputMode::Derivative => "derivative",
            OutputMode::Absolute => "absolute",
        }
    }
}

fn require_flame(s: &Snapshot, i: usize, j: usize, partition: &DomainPartition) -> Result<()> {
    if partition.m() != s.m() {
        return Err(Error::Shape(format!("partition for {} rows, snapshot has {}", partition.m(), s.m())));
    }
    if j >= s.n() || !partition.is_flame(i) {
        return Err(Error::Domain(format!("cell ({i}, {j}) is outside the flame region")));
    }
    Ok(())
}

/// Writes the tier stencil of cell `(i, j)` into `out`: for each variable in
/// storage order `[centre, i-1, i+1, j-1, j+1]`.
///
/// The axis row reuses the centre for `j - 1`; the outer-wall row fills
/// `j + 1` according to `policy`. Axial neighbours always exist because the
/// flame region is strictly inside the grid.
pub fn tier_input_into(
    s: &Snapshot,
    i: usize,
    j: usize,
    partition: &DomainPartition,
    policy: WallPolicy,
    out: &mut [f64],
) -> Result<()> {
    require_flame(s, i, j, partition)?;
    if out.len() != TIER_WIDTH * NUM_VARS {
        return Err(Error::Shape(format!("tier buffer of length {}", out.len())));
    }
    let n = s.n();
    let center = s.cell(i, j);
    let west = s.cell(i - 1, j);
    let east = s.cell(i + 1, j);
    let south = if j == 0 { center } else { s.cell(i, j - 1) };
    for k in 0..NUM_VARS {
        let north = if j + 1 < n {
            s.cell(i, j + 1)[k]
        } else {
            match policy {
                WallPolicy::ZeroNeumann => center[k],
                WallPolicy::WallValue { wall_temperature } => {
                    if k == Variable::T.index() {
                        wall_temperature
                    } else {
                        0.0
                    }
                }
            }
        };
        let o = &mut out[k * TIER_WIDTH..(k + 1) * TIER_WIDTH];
        o[0] = center[k];
        o[1] = west[k];
        o[2] = east[k];
        o[3] = south[k];
        o[4] = north;
    }
    Ok(())
}

pub fn tier_input(s: &Snapshot, i: usize, j: usize, partition: &DomainPartition, policy: WallPolicy) -> Result<Vec<f64>> {
    let mut out = vec![0.0; TIER_WIDTH * NUM_VARS];
    tier_input_into(s, i, j, partition, policy, &mut out)?;
    Ok(out)
}

/// Fills `out` with the network input for `(i, j)` in the given mode.
pub fn input_into(
    s: &Snapshot,
    i: usize,
    j: usize,
    partition: &DomainPartition,
    mode: InputMode,
    policy: WallPolicy,
    out: &mut [f64],
) -> Result<()> {
    match mode {
        InputMode::Tier => tier_input_into(s, i, j, partition, policy, out),
        InputMode::CenterOnly => {
            require_flame(s, i, j, partition)?;
            if out.len() != NUM_VARS {
                return Err(Error::Shape(format!("centre buffer of length {}", out.len())));
            }
            out.copy_from_slice(s.cell(i, j));
            Ok(())
        }
    }
}

fn check_interval(t: &Snapshot, t1: &Snapshot, dt: f64) -> Result<()> {
    let gap = t1.time - t.time;
    if !((gap - dt).abs() <= 1e-9 * dt.abs()) {
        return Err(Error::Consistency(format!(
            "snapshots are {gap} apart, expected dt = {dt}"
        )));
    }
    Ok(())
}

/// `(x^{t+1} - x^t) / dt` for one cell and variable.
pub fn derivative_target(
    snap_t: &Snapshot,
    snap_t1: &Snapshot,
    i: usize,
    j: usize,
    var: Variable,
    dt: f64,
) -> Result<f64> {
    if !snap_t.same_shape(snap_t1) {
        return Err(Error::Shape("derivative between differently shaped snapshots".into()));
    }
    check_interval(snap_t, snap_t1, dt)?;
    Ok((snap_t1.get(i, j, var) - snap_t.get(i, j, var)) / dt)
}

/// One training example.
#[derive(Debug, Clone, PartialEq)]
pub struct TierSample {
    pub input: Vec<f64>,
    pub target: f64,
    pub cell: (usize, usize),
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetOptions {
    pub input_mode: InputMode,
    pub output_mode: OutputMode,
    pub wall_policy: WallPolicy,
    pub split_fraction: f64,
    pub seed: u64,
}

impl Default for DatasetOptions {
    fn default() -> Self {
        DatasetOptions {
            input_mode: InputMode::Tier,
            output_mode: OutputMode::Derivative,
            wall_policy: WallPolicy::ZeroNeumann,
            split_fraction: 0.8,
            seed: 0,
        }
    }
}

/// Inputs for every flame cell of every consecutive pair in a window, with
/// targets for all six variables.
#[derive(Debug, Clone)]
pub struct SampleTable {
    pub input_mode: InputMode,
    pub output_mode: OutputMode,
    width: usize,
    inputs: Vec<f64>,
    /// `targets[k * NUM_VARS + var]`
    targets: Vec<f64>,
    pub cells: Vec<(usize, usize)>,
    pub times: Vec<f64>,
}

impl SampleTable {
    pub fn build(window: &[Snapshot], partition: &DomainPartition, opts: &DatasetOptions, dt: f64) -> Result<Self> {
        if window.len() < 2 {
            return Err(Error::Config(format!("dataset window needs at least 2 snapshots, got {}", window.len())));
        }
        let n = window[0].n();
        let width = opts.input_mode.width();
        let per_pair = partition.flame_cell_count(n);
        let count = per_pair * (window.len() - 1);
        let mut inputs = vec![0.0; count * width];
        let mut targets = vec![0.0; count * NUM_VARS];
        let mut cells = Vec::with_capacity(count);
        let mut times = Vec::with_capacity(count);
        let mut k = 0;
        for pair in window.windows(2) {
            let (now, next) = (&pair[0], &pair[1]);
            if !now.same_shape(next) {
                return Err(Error::Shape("window mixes grid shapes".into()));
            }
            check_interval(now, next, dt)?;
            for (i, j) in partition.flame_cells(n) {
                input_into(now, i, j, partition, opts.input_mode, opts.wall_policy, &mut inputs[k * width..(k + 1) * width])?;
                let t = &mut targets[k * NUM_VARS..(k + 1) * NUM_VARS];
                for var in Variable::ALL {
                    t[var.index()] = match opts.output_mode {
                        OutputMode::Derivative => (next.get(i, j, var) - now.get(i, j, var)) / dt,
                        OutputMode::Absolute => next.get(i, j, var),
                    };
                }
                cells.push((i, j));
                times.push(now.time);
                k += 1;
            }
        }
        if let Some(bad) = inputs.iter().chain(&targets).position(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("non-finite value at flat index {bad} of the sample table")));
        }
        Ok(SampleTable { input_mode: opts.input_mode, output_mode: opts.output_mode, width, inputs, targets, cells, times })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn input(&self, k: usize) -> &[f64] {
        &self.inputs[k * self.width..(k + 1) * self.width]
    }

    pub fn target(&self, k: usize, var: Variable) -> f64 {
        self.targets[k * NUM_VARS + var.index()]
    }

    pub fn sample(&self, k: usize, var: Variable) -> TierSample {
        TierSample { input: self.input(k).to_vec(), target: self.target(k, var), cell: self.cells[k], time: self.times[k] }
    }

    /// Seeded shuffle of sample indices, split into `(train, validation)`.
    pub fn split_indices(&self, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
        if !(fraction > 0.0 && fraction < 1.0) {
            return Err(Error::Config(format!("split fraction must lie in (0, 1), got {fraction}")));
        }
        let mut order: Vec<usize> = (0..self.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let n_train = ((self.len() as f64) * fraction).round() as usize;
        let validation = order.split_off(n_train);
        Ok((order, validation))
    }
}

/// Shuffled train/validation samples for one output variable, with scalers
/// fitted on the training part.
#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub variable: Variable,
    pub input_mode: InputMode,
    pub output_mode: OutputMode,
    pub train: Vec<TierSample>,
    pub validation: Vec<TierSample>,
    pub split_fraction: f64,
    pub seed: u64,
    pub input_scaler: Standardizer,
    pub target_scaler: Standardizer,
}

impl DatasetSplit {
    pub fn from_table(table: &SampleTable, variable: Variable, fraction: f64, seed: u64) -> Result<Self> {
        let (train_idx, val_idx) = table.split_indices(fraction, seed)?;
        let train: Vec<TierSample> = train_idx.iter().map(|&k| table.sample(k, variable)).collect();
        let validation: Vec<TierSample> = val_idx.iter().map(|&k| table.sample(k, variable)).collect();
        let input_scaler = Standardizer::fit(train.iter().map(|s| s.input.as_slice()))?;
        let targets: Vec<f64> = train.iter().map(|s| s.target).collect();
        let target_scaler = Standardizer::fit_scalar(&targets)?;
        Ok(DatasetSplit {
            variable,
            input_mode: table.input_mode,
            output_mode: table.output_mode,
            train,
            validation,
            split_fraction: fraction,
            seed,
            input_scaler,
            target_scaler,
        })
    }

    pub fn total(&self) -> usize {
        self.train.len() + self.validation.len()
    }
}

/// Extracts the samples for `variable` from `window` and splits them.
pub fn build_dataset(
    window: &[Snapshot],
    partition: &DomainPartition,
    variable: Variable,
    opts: &DatasetOptions,
    dt: f64,
) -> Result<DatasetSplit> {
    let table = SampleTable::build(window, partition, opts, dt)?;
    DatasetSplit::from_table(&table, variable, opts.split_fraction, opts.seed)
}
