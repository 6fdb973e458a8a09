use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature `(x - mean) / std` transform fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Population mean and standard deviation per column. Columns whose
    /// spread falls below `1e-12 * max(1, |mean|)` use that floor instead.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [f64]>) -> Result<Self> {
        let rows: Vec<&[f64]> = rows.into_iter().collect();
        if rows.len() < 2 {
            return Err(Error::Config(format!("standardizer needs at least 2 samples, got {}", rows.len())));
        }
        let dim = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::Shape(format!("row of length {} in a {dim}-feature table", bad.len())));
        }
        let count = rows.len() as f64;
        let mut mean = vec![0.0; dim];
        for r in &rows {
            for (m, x) in mean.iter_mut().zip(r.iter()) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= count);
        let mut var = vec![0.0; dim];
        for r in &rows {
            for ((v, m), x) in var.iter_mut().zip(&mean).zip(r.iter()) {
                let d = x - m;
                *v += d * d;
            }
        }
        let std = var
            .iter()
            .zip(&mean)
            .map(|(v, m)| {
                let s = (v / count).sqrt();
                let floor = sigma_floor(*m);
                if s < floor { floor } else { s }
            })
            .collect();
        Ok(Standardizer { mean, std })
    }

    /// Fits a one-dimensional standardizer on scalar values.
    pub fn fit_scalar(values: &[f64]) -> Result<Self> {
        Self::fit(values.chunks(1))
    }

    /// Identity transform of the given width.
    pub fn identity(dim: usize) -> Self {
        Standardizer { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_in_place(&self, x: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim());
        for ((x, m), s) in x.iter_mut().zip(&self.mean).zip(&self.std) {
            *x = (*x - m) / s;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut out = x.to_vec();
        self.apply_in_place(&mut out);
        out
    }

    pub fn invert_in_place(&self, z: &mut [f64]) {
        debug_assert_eq!(z.len(), self.dim());
        for ((z, m), s) in z.iter_mut().zip(&self.mean).zip(&self.std) {
            *z = *z * s + m;
        }
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        let mut out = z.to_vec();
        self.invert_in_place(&mut out);
        out
    }

    /// Scalar helpers for one-dimensional target scalers.
    pub fn apply_scalar(&self, x: f64) -> f64 {
        (x - self.mean[0]) / self.std[0]
    }

    pub fn invert_scalar(&self, z: f64) -> f64 {
        z * self.std[0] + self.mean[0]
    }
}

pub fn sigma_floor(mean: f64) -> f64 {
    1e-12 * mean.abs().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn closed_form_column() {
        let s = Standardizer::fit_scalar(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, vec![2.0]);
        assert!((s.std[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        let z: Vec<f64> = [1.0, 2.0, 3.0].iter().map(|x| s.apply_scalar(*x)).collect();
        assert!((z[0] + 1.224_744_871_391_589).abs() < 1e-12);
        assert_eq!(z[1], 0.0);
        assert!((z[2] - 1.224_744_871_391_589).abs() < 1e-12);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let s = Standardizer::fit_scalar(&[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(s.std[0], 5e-12);
        for x in [5.0, 5.0, 5.0] {
            assert_eq!(s.apply_scalar(x), 0.0);
        }
    }

    #[test]
    fn needs_two_samples() {
        assert!(Standardizer::fit_scalar(&[]).is_err());
        assert!(Standardizer::fit_scalar(&[1.0]).is_err());
    }

    #[test]
    fn fitted_rows_have_unit_statistics() {
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|k| {
                let x = k as f64;
                vec![300.0 + 7.0 * (x * 0.37).sin(), 1e-3 * (x * 1.3).cos(), x * x]
            })
            .collect();
        let s = Standardizer::fit(rows.iter().map(|r| r.as_slice())).unwrap();
        let z: Vec<Vec<f64>> = rows.iter().map(|r| s.apply(r)).collect();
        // Recompute the statistics directly from the transformed rows.
        for c in 0..3 {
            let col: Vec<f64> = z.iter().map(|r| r[c]).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
            assert!(mean.abs() < 1e-10, "column {c} mean {mean}");
            assert!((var.sqrt() - 1.0).abs() < 1e-10, "column {c} std {}", var.sqrt());
        }
    }

    proptest! {
        #[test]
        fn invert_undoes_apply(
            mean in prop::collection::vec(-1e4f64..1e4, 4),
            std in prop::collection::vec(1e-3f64..1e3, 4),
            x in prop::collection::vec(-1e5f64..1e5, 4),
        ) {
            let s = Standardizer { mean: mean.clone(), std };
            let back = s.invert(&s.apply(&x));
            for ((a, b), m) in back.iter().zip(&x).zip(&mean) {
                prop_assert!((a - b).abs() <= 1e-12 * (b.abs() + m.abs()).max(1.0));
            }
        }
    }
}
