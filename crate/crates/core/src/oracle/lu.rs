//! Dense LU factorization with partial pivoting, sized for desk-scale
//! state spaces (a few thousand states at most).

use crate::error::{Error, Result};

pub(crate) struct LuFactors {
    lu: Vec<f64>,
    n: usize,
    pivots: Vec<usize>,
}

impl LuFactors {
    /// Factors a row-major `n x n` matrix in place.
    pub fn factor(mut a: Vec<f64>, n: usize) -> Result<Self> {
        assert_eq!(a.len(), n * n);
        let mut pivots = vec![0usize; n];
        for col in 0..n {
            // Pivot search.
            let mut pivot = col;
            let mut best = a[col * n + col].abs();
            for row in (col + 1)..n {
                let v = a[row * n + col].abs();
                if v > best {
                    best = v;
                    pivot = row;
                }
            }
            if best < 1e-300 {
                return Err(Error::numerical("singular matrix in LU factorization"));
            }
            pivots[col] = pivot;
            if pivot != col {
                for k in 0..n {
                    a.swap(col * n + k, pivot * n + k);
                }
            }
            let diag = a[col * n + col];
            for row in (col + 1)..n {
                let factor = a[row * n + col] / diag;
                a[row * n + col] = factor;
                for k in (col + 1)..n {
                    a[row * n + k] -= factor * a[col * n + k];
                }
            }
        }
        Ok(Self { lu: a, n, pivots })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for col in 0..n {
            x.swap(col, self.pivots[col]);
        }
        // Forward substitution (unit lower triangle).
        for row in 1..n {
            let mut acc = x[row];
            for k in 0..row {
                acc -= self.lu[row * n + k] * x[k];
            }
            x[row] = acc;
        }
        // Back substitution.
        for row in (0..n).rev() {
            let mut acc = x[row];
            for k in (row + 1)..n {
                acc -= self.lu[row * n + k] * x[k];
            }
            x[row] = acc / self.lu[row * n + row];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn solves_random_diagonally_dominant_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.gen_range(2..12);
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                let mut row_sum = 0.0;
                for j in 0..n {
                    let v: f64 = rng.gen_range(-1.0..1.0);
                    a[i * n + j] = v;
                    row_sum += v.abs();
                }
                a[i * n + i] += row_sum + 1.0;
            }
            let x_true: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut b = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    b[i] += a[i * n + j] * x_true[j];
                }
            }
            let f = LuFactors::factor(a, n).unwrap();
            let x = f.solve(&b);
            for (got, want) in x.iter().zip(x_true.iter()) {
                assert!((got - want).abs() < 1e-9, "{got} vs {want}");
            }
        }
    }

    #[test]
    fn rejects_singular_matrix() {
        let a = vec![1.0, 2.0, 2.0, 4.0];
        assert!(LuFactors::factor(a, 2).is_err());
    }
}
