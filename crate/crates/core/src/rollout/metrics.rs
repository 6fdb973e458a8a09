use nalgebra::{DMatrix, DVector};

use crate::dataset::DomainPartition;
use crate::error::{Error, Result};
use crate::solver::{Snapshot, Variable};

/// Cells with `|truth| < DENOMINATOR_FLOOR * max|truth|` are scored by
/// absolute error and left out of the maximum.
pub const DENOMINATOR_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorStats {
    pub max: f64,
    pub mean: f64,
    /// Cells scored by absolute error.
    pub floored: usize,
}

/// Relative error `|pred - truth| / |truth|` per flame cell of `var`.
/// Returns `(i, j, error, floored)` in row-major order.
pub fn error_field(pred: &Snapshot, truth: &Snapshot, var: Variable, partition: &DomainPartition) -> Result<Vec<(usize, usize, f64, bool)>> {
    if !pred.same_shape(truth) {
        return Err(Error::Shape("error between differently shaped snapshots".into()));
    }
    let n = truth.n();
    let scale = partition.flame_cells(n).map(|(i, j)| truth.get(i, j, var).abs()).fold(0.0, f64::max);
    let floor = DENOMINATOR_FLOOR * scale;
    Ok(partition
        .flame_cells(n)
        .map(|(i, j)| {
            let t = truth.get(i, j, var);
            let diff = (pred.get(i, j, var) - t).abs();
            if t.abs() < floor || t == 0.0 {
                (i, j, diff, true)
            } else {
                (i, j, diff / t.abs(), false)
            }
        })
        .collect())
}

/// Maximum and mean relative error of `var` over the flame region. When
/// every cell is floored the maximum falls back to the largest absolute error.
pub fn relative_error(pred: &Snapshot, truth: &Snapshot, var: Variable, partition: &DomainPartition) -> Result<ErrorStats> {
    let field = error_field(pred, truth, var, partition)?;
    let mut stats = ErrorStats::default();
    let mut abs_max = 0.0f64;
    let mut sum = 0.0;
    for &(_, _, e, floored) in &field {
        sum += e;
        if floored {
            stats.floored += 1;
            abs_max = abs_max.max(e);
        } else {
            stats.max = stats.max.max(e);
        }
    }
    if stats.floored == field.len() {
        stats.max = abs_max;
    }
    stats.mean = sum / field.len() as f64;
    Ok(stats)
}

/// Least-squares comparison of linear and quadratic growth models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthFit {
    pub linear_rss: f64,
    pub quadratic_rss: f64,
    /// `n ln(RSS / n) + 2 p` with `p` the number of coefficients.
    pub linear_aic: f64,
    pub quadratic_aic: f64,
    /// Coefficients `[c0, c1, c2]` of the quadratic fit.
    pub quadratic: [f64; 3],
}

impl GrowthFit {
    pub fn prefers_quadratic(&self) -> bool {
        self.quadratic_aic < self.linear_aic
    }
}

fn least_squares(x: &[f64], y: &[f64], degree: usize) -> Result<(DVector<f64>, f64)> {
    let a = DMatrix::from_fn(x.len(), degree + 1, |r, c| x[r].powi(c as i32));
    let b = DVector::from_column_slice(y);
    let coef = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::Consistency(format!("least squares failed: {e}")))?;
    let rss = (&a * &coef - b).norm_squared();
    Ok((coef, rss))
}

/// Fits `y` against `x` with polynomials of degree one and two.
pub fn fit_growth(x: &[f64], y: &[f64]) -> Result<GrowthFit> {
    if x.len() != y.len() || x.len() < 4 {
        return Err(Error::Shape(format!("growth fit needs at least 4 equal-length points, got {} and {}", x.len(), y.len())));
    }
    let n = x.len() as f64;
    let (_, linear_rss) = least_squares(x, y, 1)?;
    let (q, quadratic_rss) = least_squares(x, y, 2)?;
    let aic = |rss: f64, p: f64| n * (rss.max(f64::MIN_POSITIVE) / n).ln() + 2.0 * p;
    Ok(GrowthFit {
        linear_rss,
        quadratic_rss,
        linear_aic: aic(linear_rss, 2.0),
        quadratic_aic: aic(quadratic_rss, 3.0),
        quadratic: [q[0], q[1], q[2]],
    })
}
