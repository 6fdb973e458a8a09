//! Desk-scale axisymmetric finite-volume solver.
//!
//! The state holds six variables per cell: a prescribed steady velocity
//! field `(v_x, v_r)` and four transported scalars (temperature and three
//! species fractions) that follow a single-step Arrhenius reaction
//! `fuel + nu * ox -> prod`. Scalars are advanced with explicit Euler over a
//! flux balance: first-order upwind convection, central diffusion, and face
//! areas carrying the cylindrical metric.
//!
//! Cell `(i, j)` has axial index `i` and radial index `j`; its centre sits at
//! `r_j = (j + 0.5) dr`, so the axis is the `j = -0.5` face and no cell centre
//! touches `r = 0`.

mod residual;
pub mod series;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use residual::continuity_residual;

/// Number of variables stored per cell.
pub const NUM_VARS: usize = 6;

/// Field variables in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Vx,
    Vr,
    T,
    Fuel,
    Prod,
    Ox,
}

impl Variable {
    pub const ALL: [Variable; NUM_VARS] =
        [Variable::Vx, Variable::Vr, Variable::T, Variable::Fuel, Variable::Prod, Variable::Ox];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(k: usize) -> Option<Variable> {
        Self::ALL.get(k).copied()
    }

    /// Column name used in snapshot files.
    pub fn name(self) -> &'static str {
        match self {
            Variable::Vx => "v_x",
            Variable::Vr => "v_r",
            Variable::T => "T",
            Variable::Fuel => "X_fuel",
            Variable::Prod => "X_prod",
            Variable::Ox => "X_ox",
        }
    }

    pub fn parse(name: &str) -> Option<Variable> {
        Self::ALL.into_iter().find(|v| v.name() == name || v.slug() == name)
    }

    /// Lower-case identifier used in file names and config values.
    pub fn slug(self) -> &'static str {
        match self {
            Variable::Vx => "v_x",
            Variable::Vr => "v_r",
            Variable::T => "t",
            Variable::Fuel => "fuel",
            Variable::Prod => "prod",
            Variable::Ox => "ox",
        }
    }

    pub fn is_species(self) -> bool {
        matches!(self, Variable::Fuel | Variable::Prod | Variable::Ox)
    }
}

/// Uniform structured grid and timestep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Axial cell count.
    pub m: usize,
    /// Radial cell count.
    pub n: usize,
    pub dx: f64,
    pub dr: f64,
    pub dt: f64,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m < 3 || self.n < 3 {
            return Err(Error::Config(format!("grid must be at least 3x3, got {}x{}", self.m, self.n)));
        }
        for (name, v) in [("dx", self.dx), ("dr", self.dr), ("dt", self.dt)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    pub fn cells(&self) -> usize {
        self.m * self.n
    }

    /// Radial coordinate of the centre of radial row `j`.
    pub fn radius(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.dr
    }

    /// Radial coordinate of the face between rows `j - 1` and `j`.
    pub fn face_radius(&self, j: usize) -> f64 {
        j as f64 * self.dr
    }

    /// Control volume per radian.
    pub fn volume(&self, j: usize) -> f64 {
        self.radius(j) * self.dr * self.dx
    }
}

/// Rate constant `K = A T^b exp(-Ea / (R T))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arrhenius {
    pub pre_exponential: f64,
    pub temperature_exponent: f64,
    pub activation_energy: f64,
    pub gas_constant: f64,
}

impl Arrhenius {
    pub fn rate_constant(&self, temperature: f64) -> f64 {
        self.pre_exponential
            * temperature.powf(self.temperature_exponent)
            * (-self.activation_energy / (self.gas_constant * temperature)).exp()
    }
}

/// How the solver treats the outer faces of the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    /// Fixed inlet row, zero-gradient outlet, isothermal outer wall.
    #[default]
    Channel,
    /// Every outer face carries zero flux.
    Closed,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// Diffusivity of `[T, fuel, prod, ox]`.
    pub diffusivity: [f64; 4],
    pub arrhenius: Arrhenius,
    /// Temperature rise per unit of reacted fuel fraction.
    pub heat_release: f64,
    /// Oxidiser consumed per unit of fuel.
    pub ox_stoich: f64,
    pub reference_pressure: f64,
    pub molar_mass: f64,
    pub wall_temperature: f64,
    #[serde(default)]
    pub boundary: BoundaryMode,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<()> {
        if self.diffusivity.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::Config("diffusivities must be finite and nonnegative".into()));
        }
        let a = &self.arrhenius;
        if !(a.pre_exponential.is_finite() && a.pre_exponential >= 0.0) {
            return Err(Error::Config("pre-exponential factor must be nonnegative".into()));
        }
        if !(a.gas_constant.is_finite() && a.gas_constant > 0.0) {
            return Err(Error::Config("gas constant must be positive".into()));
        }
        if !(a.activation_energy.is_finite() && a.temperature_exponent.is_finite()) {
            return Err(Error::Config("Arrhenius exponents must be finite".into()));
        }
        if !(self.reference_pressure > 0.0 && self.molar_mass > 0.0 && self.wall_temperature > 0.0)
        {
            return Err(Error::Config(
                "reference pressure, molar mass and wall temperature must be positive".into(),
            ));
        }
        if !(self.heat_release.is_finite() && self.ox_stoich.is_finite() && self.ox_stoich >= 0.0) {
            return Err(Error::Config("heat release and stoichiometry must be finite".into()));
        }
        Ok(())
    }

    /// Ideal-gas density at the reference pressure.
    pub fn density(&self, temperature: f64) -> f64 {
        self.reference_pressure * self.molar_mass / (self.arrhenius.gas_constant * temperature)
    }

    pub fn max_diffusivity(&self) -> f64 {
        self.diffusivity.iter().copied().fold(0.0, f64::max)
    }
}

/// Fuel consumption rate `K(T) * Y_fuel * Y_ox`.
pub fn reaction_rate(temperature: f64, fuel: f64, ox: f64, arrhenius: &Arrhenius) -> Result<f64> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(Error::Domain(format!("temperature must be positive and finite, got {temperature}")));
    }
    if !(fuel.is_finite() && ox.is_finite()) || fuel < 0.0 || ox < 0.0 {
        return Err(Error::Domain(format!("species fractions must be nonnegative, got fuel={fuel}, ox={ox}")));
    }
    if fuel == 0.0 || ox == 0.0 || arrhenius.pre_exponential == 0.0 {
        return Ok(0.0);
    }
    Ok(arrhenius.rate_constant(temperature) * fuel * ox)
}

/// All field variables on the grid at one instant, cell-major
/// (`values[(i * n + j) * 6 + k]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub time: f64,
    m: usize,
    n: usize,
    values: Vec<f64>,
}

impl Snapshot {
    pub fn zeros(m: usize, n: usize, time: f64) -> Self {
        Snapshot { time, m, n, values: vec![0.0; m * n * NUM_VARS] }
    }

    pub fn from_values(m: usize, n: usize, time: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != m * n * NUM_VARS {
            return Err(Error::Shape(format!(
                "expected {} values for a {m}x{n} grid, got {}",
                m * n * NUM_VARS,
                values.len()
            )));
        }
        Ok(Snapshot { time, m, n, values })
    }

    /// Builds a snapshot by evaluating `f(i, j)` for every cell.
    pub fn from_fn(m: usize, n: usize, time: f64, mut f: impl FnMut(usize, usize) -> [f64; NUM_VARS]) -> Self {
        let mut s = Snapshot::zeros(m, n, time);
        for i in 0..m {
            for j in 0..n {
                s.cell_mut(i, j).copy_from_slice(&f(i, j));
            }
        }
        s
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.m && j < self.n);
        (i * self.n + j) * NUM_VARS
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, var: Variable) -> f64 {
        self.values[self.offset(i, j) + var.index()]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, var: Variable, value: f64) {
        let o = self.offset(i, j);
        self.values[o + var.index()] = value;
    }

    #[inline]
    pub fn cell(&self, i: usize, j: usize) -> &[f64] {
        let o = self.offset(i, j);
        &self.values[o..o + NUM_VARS]
    }

    #[inline]
    pub fn cell_mut(&mut self, i: usize, j: usize) -> &mut [f64] {
        let o = self.offset(i, j);
        &mut self.values[o..o + NUM_VARS]
    }

    pub fn same_shape(&self, other: &Snapshot) -> bool {
        self.m == other.m && self.n == other.n
    }

    pub fn check_grid(&self, grid: &GridSpec) -> Result<()> {
        if self.m != grid.m || self.n != grid.n {
            return Err(Error::Shape(format!(
                "snapshot is {}x{}, grid is {}x{}",
                self.m, self.n, grid.m, grid.n
            )));
        }
        Ok(())
    }

    /// Checks the physical invariants: finite values, positive temperature,
    /// species fractions in `[0, 1]`.
    pub fn validate(&self) -> Result<()> {
        for i in 0..self.m {
            for j in 0..self.n {
                for var in Variable::ALL {
                    let v = self.get(i, j, var);
                    if !v.is_finite() {
                        return Err(Error::Blowup { i, j, variable: var.name() });
                    }
                    if var == Variable::T && v <= 0.0 {
                        return Err(Error::Domain(format!("temperature {v} at ({i}, {j}) is not positive")));
                    }
                    if var.is_species() && !(0.0..=1.0).contains(&v) {
                        return Err(Error::Domain(format!(
                            "{} = {v} at ({i}, {j}) outside [0, 1]",
                            var.name()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// `sum_cells volume * value` for one variable.
    pub fn volume_integral(&self, grid: &GridSpec, var: Variable) -> f64 {
        let mut total = 0.0;
        for i in 0..self.m {
            for j in 0..self.n {
                total += grid.volume(j) * self.get(i, j, var);
            }
        }
        total
    }

    pub fn max_abs(&self, var: Variable) -> f64 {
        self.values[var.index()..].iter().step_by(NUM_VARS).fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Transported scalars in the order of [`PhysicalParams::diffusivity`].
const SCALARS: [Variable; 4] = [Variable::T, Variable::Fuel, Variable::Prod, Variable::Ox];

/// Explicit finite-volume stepper for a fixed grid and parameter set.
#[derive(Debug, Clone)]
pub struct Solver {
    grid: GridSpec,
    params: PhysicalParams,
}

impl Solver {
    /// Validates the configuration, including the diffusion-number bound.
    pub fn new(grid: GridSpec, params: PhysicalParams) -> Result<Self> {
        grid.validate()?;
        params.validate()?;
        let diffusion = diffusion_number(&grid, &params);
        if diffusion > 0.25 {
            return Err(Error::Unstable { cfl: 0.0, diffusion });
        }
        Ok(Solver { grid, params })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn params(&self) -> &PhysicalParams {
        &self.params
    }

    /// Convective and diffusive stability numbers for `state`.
    pub fn stability_numbers(&self, state: &Snapshot) -> (f64, f64) {
        let g = &self.grid;
        let vx = state.max_abs(Variable::Vx);
        let vr = state.max_abs(Variable::Vr);
        let cfl = (vx * g.dt / g.dx).max(vr * g.dt / g.dr);
        (cfl, diffusion_number(g, &self.params))
    }

    pub fn check_stability(&self, state: &Snapshot) -> Result<()> {
        let (cfl, diffusion) = self.stability_numbers(state);
        if !(cfl <= 0.5 && diffusion <= 0.25) {
            return Err(Error::Unstable { cfl, diffusion });
        }
        Ok(())
    }

    /// Advances every cell by one timestep.
    pub fn step(&self, state: &Snapshot) -> Result<Snapshot> {
        self.step_rows(state, |_| true)
    }

    /// Advances only axial rows selected by `update_row`; other cells are
    /// copied. Fluxes into updated cells read the current values of their
    /// neighbours whether those are updated or not.
    pub fn step_rows(&self, state: &Snapshot, update_row: impl Fn(usize) -> bool) -> Result<Snapshot> {
        state.check_grid(&self.grid)?;
        self.check_stability(state)?;
        let g = &self.grid;
        let p = &self.params;
        let (m, n) = (g.m, g.n);
        let channel = p.boundary == BoundaryMode::Channel;

        // Axial faces: index (i, j) is the west face of cell i, i in 0..=m.
        // Radial faces: index (i, j) is the south face of cell j, j in 0..=n.
        let mut axial = vec![[0.0; 4]; (m + 1) * n];
        let mut radial = vec![[0.0; 4]; m * (n + 1)];

        for j in 0..n {
            let area = g.radius(j) * g.dr;
            for i in 1..m {
                let lo = state.cell(i - 1, j);
                let hi = state.cell(i, j);
                let v = 0.5 * (lo[Variable::Vx.index()] + hi[Variable::Vx.index()]);
                let f = &mut axial[i * n + j];
                for (s, var) in SCALARS.iter().enumerate() {
                    let k = var.index();
                    let up = if v > 0.0 { lo[k] } else { hi[k] };
                    f[s] = area * (v * up - p.diffusivity[s] * (hi[k] - lo[k]) / g.dx);
                }
            }
            if channel {
                let c = state.cell(m - 1, j);
                let v = c[Variable::Vx.index()];
                let f = &mut axial[m * n + j];
                for (s, var) in SCALARS.iter().enumerate() {
                    f[s] = area * v * c[var.index()];
                }
            }
        }

        for i in 0..m {
            for j in 1..n {
                let area = g.face_radius(j) * g.dx;
                let lo = state.cell(i, j - 1);
                let hi = state.cell(i, j);
                let v = 0.5 * (lo[Variable::Vr.index()] + hi[Variable::Vr.index()]);
                let f = &mut radial[i * (n + 1) + j];
                for (s, var) in SCALARS.iter().enumerate() {
                    let k = var.index();
                    let up = if v > 0.0 { lo[k] } else { hi[k] };
                    f[s] = area * (v * up - p.diffusivity[s] * (hi[k] - lo[k]) / g.dr);
                }
            }
            if channel {
                // Ghost cell mirrors the wall temperature across the face.
                let area = g.face_radius(n) * g.dx;
                let t = state.get(i, n - 1, Variable::T);
                radial[i * (n + 1) + n][0] =
                    -area * p.diffusivity[0] * 2.0 * (p.wall_temperature - t) / g.dr;
            }
        }

        let mut next = state.clone();
        next.time = state.time + g.dt;
        let mut clamped = 0.0;
        for i in 0..m {
            if !update_row(i) || (channel && i == 0) {
                continue;
            }
            for j in 0..n {
                let cell = state.cell(i, j);
                let temp = cell[Variable::T.index()];
                let fuel = cell[Variable::Fuel.index()];
                let ox = cell[Variable::Ox.index()];
                let rate = match reaction_rate(temp, fuel.max(0.0), ox.max(0.0), &p.arrhenius) {
                    Ok(r) => r,
                    Err(_) => return Err(Error::Blowup { i, j, variable: Variable::T.name() }),
                };
                let source = [p.heat_release * rate, -rate, rate, -p.ox_stoich * rate];
                let scale = g.dt / g.volume(j);
                let (w, e) = (axial[i * n + j], axial[(i + 1) * n + j]);
                let (s_, nf) = (radial[i * (n + 1) + j], radial[i * (n + 1) + j + 1]);
                let out = next.cell_mut(i, j);
                for (s, var) in SCALARS.iter().enumerate() {
                    let k = var.index();
                    let mut v = cell[k] + scale * (w[s] - e[s] + s_[s] - nf[s]) + g.dt * source[s];
                    if !v.is_finite() {
                        return Err(Error::Blowup { i, j, variable: var.name() });
                    }
                    if var.is_species() && v < 0.0 {
                        clamped -= v * g.volume(j);
                        v = 0.0;
                    }
                    out[k] = v;
                }
            }
        }
        if clamped > 0.0 {
            log::debug!("t = {:.6}: clamped {clamped:e} of negative species mass", next.time);
        }
        Ok(next)
    }

    /// Returns `n_steps + 1` snapshots starting with `initial`.
    pub fn simulate(&self, initial: &Snapshot, n_steps: usize) -> Result<Vec<Snapshot>> {
        if n_steps == 0 {
            return Err(Error::Config("simulate needs at least one step".into()));
        }
        let mut series = Vec::with_capacity(n_steps + 1);
        series.push(initial.clone());
        for k in 0..n_steps {
            let next = self.step(&series[k]).map_err(|e| e.at_step(k + 1))?;
            series.push(next);
        }
        Ok(series)
    }
}

fn diffusion_number(grid: &GridSpec, params: &PhysicalParams) -> f64 {
    params.max_diffusivity() * grid.dt * (1.0 / (grid.dx * grid.dx) + 1.0 / (grid.dr * grid.dr))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn quiet_params() -> PhysicalParams {
        PhysicalParams {
            diffusivity: [0.0; 4],
            arrhenius: Arrhenius {
                pre_exponential: 0.0,
                temperature_exponent: 0.0,
                activation_energy: 0.0,
                gas_constant: 8.314,
            },
            heat_release: 0.0,
            ox_stoich: 0.5,
            reference_pressure: 101_325.0,
            molar_mass: 0.029,
            wall_temperature: 300.0,
            boundary: BoundaryMode::Closed,
        }
    }

    fn grid(m: usize, n: usize) -> GridSpec {
        GridSpec { m, n, dx: 1e-4, dr: 1e-4, dt: 1e-3 }
    }

    #[test]
    fn rate_reduces_to_prefactor_without_activation() {
        let a = Arrhenius { pre_exponential: 2.0, temperature_exponent: 0.0, activation_energy: 0.0, gas_constant: 8.314 };
        assert_eq!(reaction_rate(500.0, 1.0, 1.0, &a).unwrap(), 2.0);
        assert_eq!(reaction_rate(1234.0, 0.0, 0.7, &a).unwrap(), 0.0);
    }

    #[test]
    fn rate_matches_closed_form() {
        let a = Arrhenius {
            pre_exponential: 1e6,
            temperature_exponent: 0.0,
            activation_energy: 8.314e4,
            gas_constant: 8.314,
        };
        let k = reaction_rate(1000.0, 1.0, 1.0, &a).unwrap();
        // 1e6 * exp(-10)
        let expected = 45.399_929_762_484_85;
        assert!((k - expected).abs() / expected < 1e-13, "{k}");
    }

    #[test]
    fn rate_rejects_bad_inputs() {
        let a = quiet_params().arrhenius;
        assert!(matches!(reaction_rate(f64::NAN, 0.1, 0.1, &a), Err(Error::Domain(_))));
        assert!(matches!(reaction_rate(0.0, 0.1, 0.1, &a), Err(Error::Domain(_))));
        assert!(matches!(reaction_rate(300.0, -0.1, 0.1, &a), Err(Error::Domain(_))));
        assert!(matches!(reaction_rate(300.0, 0.1, -1e-9, &a), Err(Error::Domain(_))));
    }

    #[test]
    fn uniform_quiescent_state_is_a_fixed_point() {
        let g = grid(5, 4);
        let solver = Solver::new(g, PhysicalParams { diffusivity: [1e-6; 4], ..quiet_params() }).unwrap();
        let s = Snapshot::from_fn(5, 4, 0.5, |_, _| [0.0, 0.0, 400.0, 0.05, 0.0, 0.2]);
        let next = solver.step(&s).unwrap();
        assert_eq!(next.values(), s.values());
        assert_eq!(next.time, 0.5 + 1e-3);
    }

    #[test]
    fn velocities_are_carried_unchanged() {
        let g = grid(6, 3);
        let mut params = quiet_params();
        params.boundary = BoundaryMode::Channel;
        let solver = Solver::new(g, params).unwrap();
        let s = Snapshot::from_fn(6, 3, 0.0, |i, j| [0.01 * (j + 1) as f64, 0.0, 300.0 + i as f64, 0.05, 0.0, 0.2]);
        let next = solver.step(&s).unwrap();
        for i in 0..6 {
            for j in 0..3 {
                assert_eq!(next.get(i, j, Variable::Vx), s.get(i, j, Variable::Vx));
                assert_eq!(next.get(i, j, Variable::Vr), s.get(i, j, Variable::Vr));
            }
        }
    }

    #[test]
    fn refuses_unstable_timestep() {
        let g = grid(5, 3);
        let solver = Solver::new(g, quiet_params()).unwrap();
        // 0.06 m/s * 1e-3 s / 1e-4 m = 0.6 > 0.5
        let s = Snapshot::from_fn(5, 3, 0.0, |_, _| [0.06, 0.0, 300.0, 0.0, 0.0, 0.0]);
        match solver.step(&s) {
            Err(Error::Unstable { cfl, .. }) => assert!((cfl - 0.6).abs() < 1e-12),
            other => panic!("expected instability, got {other:?}"),
        }
        let too_diffusive = PhysicalParams { diffusivity: [2e-6; 4], ..quiet_params() };
        assert!(matches!(Solver::new(g, too_diffusive), Err(Error::Unstable { .. })));
    }

    #[test]
    fn reports_first_non_finite_cell() {
        let g = grid(4, 3);
        let solver = Solver::new(g, PhysicalParams { diffusivity: [1e-6; 4], ..quiet_params() }).unwrap();
        let mut s = Snapshot::from_fn(4, 3, 0.0, |_, _| [0.0, 0.0, 300.0, 0.0, 0.0, 0.0]);
        s.set(2, 1, Variable::Prod, f64::INFINITY);
        match solver.step(&s) {
            Err(Error::Blowup { i, j, variable }) => {
                assert_eq!(variable, "X_prod");
                assert!(i <= 2 && j <= 1, "first offending cell should precede (2,1), got ({i},{j})");
            }
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn simulate_composes_steps() {
        let g = grid(6, 4);
        let mut params = PhysicalParams { diffusivity: [5e-7; 4], ..quiet_params() };
        params.boundary = BoundaryMode::Channel;
        let solver = Solver::new(g, params).unwrap();
        let s = Snapshot::from_fn(6, 4, 0.0, |i, _| [0.02, 0.0, 300.0 + 50.0 * i as f64, 0.05, 0.0, 0.2]);
        assert!(solver.simulate(&s, 0).is_err());
        let one = solver.simulate(&s, 1).unwrap();
        assert_eq!(one.len(), 2);
        assert_eq!(one[1], solver.step(&s).unwrap());
        let two = solver.simulate(&s, 2).unwrap();
        assert_eq!(two[2], solver.step(&solver.step(&s).unwrap()).unwrap());
    }

    #[test]
    fn step_rows_leaves_unselected_rows() {
        let g = grid(6, 3);
        let params = PhysicalParams { diffusivity: [8e-7; 4], ..quiet_params() };
        let solver = Solver::new(g, params).unwrap();
        let s = Snapshot::from_fn(6, 3, 0.0, |i, j| [0.0, 0.0, 300.0 + (i * j) as f64, 0.0, 0.0, 0.0]);
        let full = solver.step(&s).unwrap();
        let part = solver.step_rows(&s, |i| i >= 3).unwrap();
        for i in 0..6 {
            for j in 0..3 {
                let expect = if i >= 3 { full.cell(i, j) } else { s.cell(i, j) };
                assert_eq!(part.cell(i, j), expect);
            }
        }
    }
}
