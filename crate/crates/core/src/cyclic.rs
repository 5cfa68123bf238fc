// SPDX-License-Identifier: Apache-2.0

//! Periodic block-tridiagonal systems with 2×2 blocks.
//!
//! Row `j` reads `lower[j] x[j-1] + diag[j] x[j] + upper[j] x[j+1] = b[j]`
//! with indices taken modulo `n`. The solver eliminates the inner block
//! tridiagonal system `x[1..n]` by block Thomas and treats `x[0]` as a border
//! unknown, which absorbs the two wrap-around blocks.

use crate::error::Error;
use crate::linalg::{Mat2, Vec2};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct CyclicBlockTridiagonal<T> {
    pub lower: Vec<Mat2<T>>,
    pub diag: Vec<Mat2<T>>,
    pub upper: Vec<Mat2<T>>,
}

impl<T: Real> CyclicBlockTridiagonal<T> {
    pub fn zeros(n: usize) -> Self {
        assert!(n >= 3, "cyclic block system needs at least 3 block rows");
        Self {
            lower: vec![Mat2::zero(); n],
            diag: vec![Mat2::zero(); n],
            upper: vec![Mat2::zero(); n],
        }
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn mul_vec(&self, x: &[Vec2<T>]) -> Vec<Vec2<T>> {
        let n = self.len();
        assert_eq!(x.len(), n);
        (0..n)
            .map(|j| {
                let prev = (j + n - 1) % n;
                let next = (j + 1) % n;
                self.lower[j].mul_vec(x[prev])
                    + self.diag[j].mul_vec(x[j])
                    + self.upper[j].mul_vec(x[next])
            })
            .collect()
    }

    /// Dense row-major `2n × 2n` copy, unknowns ordered `(x0, y0, x1, y1, ...)`.
    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let n = self.len();
        let mut m = vec![vec![T::zero(); 2 * n]; 2 * n];
        for j in 0..n {
            let cols = [((j + n - 1) % n, self.lower[j]), (j, self.diag[j]), ((j + 1) % n, self.upper[j])];
            for (col, block) in cols {
                for r in 0..2 {
                    for c in 0..2 {
                        m[2 * j + r][2 * col + c] = m[2 * j + r][2 * col + c] + block.entry(r, c);
                    }
                }
            }
        }
        m
    }

    /// Block elimination with the border correction for `x[0]`.
    pub fn solve(&self, rhs: &[Vec2<T>]) -> Result<Vec<Vec2<T>>, Error> {
        let n = self.len();
        assert_eq!(rhs.len(), n);
        let last = n - 1;

        // Forward sweep over rows 1..n carrying the vector rhs and the border column.
        let mut piv: Vec<Mat2<T>> = vec![Mat2::zero(); n];
        let mut piv_inv: Vec<Mat2<T>> = vec![Mat2::zero(); n];
        let mut y: Vec<Vec2<T>> = vec![Vec2::zero(); n];
        let mut z: Vec<Mat2<T>> = vec![Mat2::zero(); n];
        for j in 1..n {
            let mut border = Mat2::zero();
            if j == 1 {
                border += self.lower[1];
            }
            if j == last {
                border += self.upper[last];
            }
            if j == 1 {
                piv[j] = self.diag[j];
                y[j] = rhs[j];
                z[j] = border;
            } else {
                let w = self.lower[j] * piv_inv[j - 1];
                piv[j] = self.diag[j] - w * self.upper[j - 1];
                y[j] = rhs[j] - w.mul_vec(y[j - 1]);
                z[j] = border - w * z[j - 1];
            }
            piv_inv[j] = piv[j].inverse().ok_or(Error::SingularSystem { block: j })?;
        }

        // Back substitution.
        y[last] = piv_inv[last].mul_vec(y[last]);
        z[last] = piv_inv[last] * z[last];
        for j in (1..last).rev() {
            y[j] = piv_inv[j].mul_vec(y[j] - self.upper[j].mul_vec(y[j + 1]));
            z[j] = piv_inv[j] * (z[j] - self.upper[j] * z[j + 1]);
        }

        // Border row: x_inner = y - z x0.
        let schur = self.diag[0] - self.upper[0] * z[1] - self.lower[0] * z[last];
        let b0 = rhs[0] - self.upper[0].mul_vec(y[1]) - self.lower[0].mul_vec(y[last]);
        let x0 = schur
            .inverse()
            .ok_or(Error::SingularSystem { block: 0 })?
            .mul_vec(b0);

        let mut x = vec![Vec2::zero(); n];
        x[0] = x0;
        for j in 1..n {
            x[j] = y[j] - z[j].mul_vec(x0);
        }
        Ok(x)
    }

    /// Gaussian elimination with partial pivoting on the dense matrix.
    pub fn solve_dense(&self, rhs: &[Vec2<T>]) -> Result<Vec<Vec2<T>>, Error> {
        let n = self.len();
        let mut b: Vec<T> = rhs.iter().flat_map(|v| [v.x, v.y]).collect();
        let x = dense_solve(self.to_dense(), &mut b)?;
        Ok(x.chunks(2).map(|c| Vec2::new(c[0], c[1])).take(n).collect())
    }
}

/// Solves `A x = b` for a dense square matrix.
pub fn dense_solve<T: Real>(mut a: Vec<Vec<T>>, b: &mut [T]) -> Result<Vec<T>, Error> {
    let m = b.len();
    for k in 0..m {
        let p = (k..m)
            .max_by(|&i, &j| a[i][k].abs().partial_cmp(&a[j][k].abs()).unwrap_or(std::cmp::Ordering::Equal))
            .unwrap_or(k);
        if a[p][k] == T::zero() || !a[p][k].is_finite() {
            return Err(Error::SingularSystem { block: k / 2 });
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..m {
            let f = a[i][k] / a[k][k];
            if f == T::zero() {
                continue;
            }
            for c in k..m {
                a[i][c] = a[i][c] - f * a[k][c];
            }
            b[i] = b[i] - f * b[k];
        }
    }
    let mut x = vec![T::zero(); m];
    for k in (0..m).rev() {
        let mut s = b[k];
        for c in k + 1..m {
            s = s - a[k][c] * x[c];
        }
        x[k] = s / a[k][k];
    }
    Ok(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mat(rng: &mut ChaCha8Rng, scale: f64) -> Mat2<f64> {
        Mat2::new(
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
        )
    }

    fn random_system(n: usize, seed: u64) -> CyclicBlockTridiagonal<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sys = CyclicBlockTridiagonal::zeros(n);
        for j in 0..n {
            sys.lower[j] = random_mat(&mut rng, 1.0);
            sys.upper[j] = random_mat(&mut rng, 1.0);
            sys.diag[j] = random_mat(&mut rng, 1.0) + Mat2::scalar(6.0);
        }
        sys
    }

    #[test]
    fn block_solve_matches_dense() {
        for (n, seed) in [(3, 1), (4, 2), (7, 3), (32, 4), (64, 5)] {
            let sys = random_system(n, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let b: Vec<_> = (0..n)
                .map(|_| Vec2::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect();
            let x = sys.solve(&b).unwrap();
            let xd = sys.solve_dense(&b).unwrap();
            for (u, v) in x.iter().zip(&xd) {
                assert!((*u - *v).max_abs() < 1e-12, "n={n}");
            }
            let r = sys.mul_vec(&x);
            for (u, v) in r.iter().zip(&b) {
                assert!((*u - *v).max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_system_reported() {
        let sys = CyclicBlockTridiagonal::<f64>::zeros(4);
        let b = vec![Vec2::zero(); 4];
        assert!(matches!(sys.solve(&b), Err(Error::SingularSystem { .. })));
        assert!(matches!(sys.solve_dense(&b), Err(Error::SingularSystem { .. })));
    }
}
