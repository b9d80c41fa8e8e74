use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-feature z-scoring fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Population standard deviations; zero-variance features get 1.
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(train: &[Vec<f64>]) -> Result<Self> {
        let first = train.first().ok_or_else(|| Error::Empty("training set".into()))?;
        let d = first.len();
        if let Some(bad) = train.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: bad.len(),
            });
        }
        let n = train.len() as f64;
        let mut means = vec![0.0; d];
        for row in train {
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        means.iter_mut().for_each(|m| *m /= n);
        let mut vars = vec![0.0; d];
        for row in train {
            for j in 0..d {
                let c = row[j] - means[j];
                vars[j] += c * c;
            }
        }
        let stds = vars
            .into_iter()
            .map(|v| {
                let s = (v / n).sqrt();
                if s > 0.0 && s.is_finite() {
                    s
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { means, stds })
    }

    /// Identity transform over `d` features.
    pub fn identity(d: usize) -> Self {
        Self {
            means: vec![0.0; d],
            stds: vec![1.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.means.len()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }

    pub fn apply_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn moments(rows: &[Vec<f64>], j: usize) -> (f64, f64) {
        let n = rows.len() as f64;
        let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let v = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / n;
        (m, v)
    }

    #[test]
    fn standardized_training_data_has_unit_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| vec![rng.random_range(-5.0..20.0), rng.random_range(0.0..1e-3), 7.0])
            .collect();
        let s = Standardizer::fit(&rows).unwrap();
        let z = s.apply_all(&rows).unwrap();
        for j in 0..2 {
            let (m, v) = moments(&z, j);
            assert!(m.abs() <= 1e-9);
            assert!((v - 1.0).abs() <= 1e-6);
        }
        assert!(z.iter().all(|r| r[2] == 0.0));
    }

    #[test]
    fn repeated_vector_maps_to_zero() {
        let rows = vec![vec![3.0, -1.0, 2.5]; 6];
        let s = Standardizer::fit(&rows).unwrap();
        assert_eq!(s.apply(&rows[0]).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn already_standard_is_near_identity() {
        let rows = vec![vec![-1.0, 1.0], vec![1.0, -1.0]];
        let s = Standardizer::fit(&rows).unwrap();
        for (m, sd) in s.means.iter().zip(&s.stds) {
            assert!(m.abs() < 1e-12 && (sd - 1.0).abs() < 1e-12);
        }
        let x = [0.3, -0.7];
        let y = s.apply(&x).unwrap();
        assert!((y[0] - x[0]).abs() < 1e-6 && (y[1] - x[1]).abs() < 1e-6);
    }

    #[test]
    fn apply_is_affine() {
        let rows = vec![vec![1.0, 10.0], vec![3.0, 30.0], vec![8.0, -2.0]];
        let s = Standardizer::fit(&rows).unwrap();
        let (x, y, a) = ([2.0, 5.0], [-4.0, 9.0], 0.3);
        let mix: Vec<f64> = x.iter().zip(&y).map(|(p, q)| a * p + (1.0 - a) * q).collect();
        let lhs = s.apply(&mix).unwrap();
        let (sx, sy) = (s.apply(&x).unwrap(), s.apply(&y).unwrap());
        for j in 0..2 {
            assert!((lhs[j] - (a * sx[j] + (1.0 - a) * sy[j])).abs() < 1e-12);
        }
    }

    #[test]
    fn errors() {
        assert!(Standardizer::fit(&[]).is_err());
        let s = Standardizer::identity(2);
        assert!(matches!(s.apply(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }
}
