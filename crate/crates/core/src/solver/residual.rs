use super::{GridSpec, PhysicalParams, Snapshot, Variable};
use crate::error::{Error, Result};

/// Unscaled continuity residual between two consecutive states.
///
/// Each cell contributes the magnitude of
/// `(rho^t - rho^{t-1}) / dt + d(rho v_x)/dx + d(rho v_r)/dr + rho v_r / r`,
/// where density comes from the ideal-gas law and face fluxes use arithmetic
/// averages of the neighbouring cell values. Axial end faces take the
/// adjacent cell value; the axis and the outer wall carry no radial flux.
pub fn continuity_residual(
    state: &Snapshot,
    prev: &Snapshot,
    grid: &GridSpec,
    params: &PhysicalParams,
) -> Result<f64> {
    if !state.same_shape(prev) {
        return Err(Error::Shape(format!(
            "residual between {}x{} and {}x{} snapshots",
            state.m(),
            state.n(),
            prev.m(),
            prev.n()
        )));
    }
    state.check_grid(grid)?;
    let dt = state.time - prev.time;
    if !(dt > 0.0) {
        return Err(Error::Consistency(format!(
            "residual needs state.time > prev.time, got {} and {}",
            state.time, prev.time
        )));
    }
    let (m, n) = (grid.m, grid.n);
    let rho = |s: &Snapshot, i: usize, j: usize| params.density(s.get(i, j, Variable::T));

    // Axial mass flux through the west face of cell i.
    let axial_face = |i: usize, j: usize| -> f64 {
        let (a, b) = match i {
            0 => (0, 0),
            _ if i == m => (m - 1, m - 1),
            _ => (i - 1, i),
        };
        let r = 0.5 * (rho(state, a, j) + rho(state, b, j));
        let v = 0.5 * (state.get(a, j, Variable::Vx) + state.get(b, j, Variable::Vx));
        r * v
    };
    // Radial mass flux through the south face of row j.
    let radial_face = |i: usize, j: usize| -> f64 {
        if j == 0 || j == n {
            return 0.0;
        }
        let r = 0.5 * (rho(state, i, j - 1) + rho(state, i, j));
        let v = 0.5 * (state.get(i, j - 1, Variable::Vr) + state.get(i, j, Variable::Vr));
        r * v
    };

    let mut total = 0.0;
    for i in 0..m {
        for j in 0..n {
            let rho_now = rho(state, i, j);
            let unsteady = (rho_now - rho(prev, i, j)) / dt;
            let axial = (axial_face(i + 1, j) - axial_face(i, j)) / grid.dx;
            let radial = (radial_face(i, j + 1) - radial_face(i, j)) / grid.dr;
            let metric = rho_now * state.get(i, j, Variable::Vr) / grid.radius(j);
            total += (unsteady + axial + radial + metric).abs();
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::tests::quiet_params;

    fn grid() -> GridSpec {
        GridSpec { m: 3, n: 3, dx: 1e-4, dr: 1e-4, dt: 1e-3 }
    }

    fn uniform(time: f64, vx: f64) -> Snapshot {
        Snapshot::from_fn(3, 3, time, |_, _| [vx, 0.0, 300.0, 0.0, 0.0, 0.2])
    }

    #[test]
    fn quiescent_isothermal_pair_has_no_residual() {
        let p = quiet_params();
        let r = continuity_residual(&uniform(1e-3, 0.0), &uniform(0.0, 0.0), &grid(), &p).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn uniform_axial_flow_telescopes() {
        let p = quiet_params();
        let r = continuity_residual(&uniform(1e-3, 0.03), &uniform(0.0, 0.03), &grid(), &p).unwrap();
        assert_eq!(r, 0.0);
    }

    #[test]
    fn single_heated_cell() {
        let p = quiet_params();
        let prev = uniform(0.0, 0.0);
        let mut state = uniform(1e-3, 0.0);
        state.set(1, 1, Variable::T, 450.0);
        let r = continuity_residual(&state, &prev, &grid(), &p).unwrap();
        // rho = p W / (R T) evaluated by hand for T = 300 and T = 450.
        let rho300 = 101_325.0 * 0.029 / (8.314 * 300.0);
        let rho450 = 101_325.0 * 0.029 / (8.314 * 450.0);
        let expected = (rho300 - rho450) / 1e-3;
        assert!((r - expected).abs() <= 1e-12 * expected, "{r} vs {expected}");
    }

    #[test]
    fn rejects_mismatched_or_unordered_snapshots() {
        let p = quiet_params();
        let small = Snapshot::from_fn(3, 3, 1.0, |_, _| [0.0, 0.0, 300.0, 0.0, 0.0, 0.0]);
        let big = Snapshot::from_fn(4, 3, 0.0, |_, _| [0.0, 0.0, 300.0, 0.0, 0.0, 0.0]);
        assert!(matches!(continuity_residual(&small, &big, &grid(), &p), Err(Error::Shape(_))));
        assert!(continuity_residual(&uniform(0.0, 0.0), &uniform(1e-3, 0.0), &grid(), &p).is_err());
    }
}
