use super::C64;

/// Square band matrix with `kl` sub- and `ku` super-diagonals.
///
/// Storage is row-wise with room for the `kl` extra super-diagonals that
/// partial pivoting can create, so the same buffer is factored in place.
#[derive(Debug, Clone)]
pub struct BandedMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<C64>,
}

impl BandedMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self {
            n,
            kl,
            ku,
            width,
            data: vec![C64::default(); n * width],
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku + self.kl);
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> C64 {
        self.data[self.idx(i, j)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut C64 {
        let k = self.idx(i, j);
        &mut self.data[k]
    }

    /// Adds `v` at `(i, j)`; the entry must lie inside the declared band.
    pub fn add(&mut self, i: usize, j: usize, v: C64) {
        assert!(
            j + self.kl >= i && j <= i + self.ku,
            "entry ({i}, {j}) outside band ({}, {})",
            self.kl,
            self.ku
        );
        *self.at_mut(i, j) += v;
    }

    /// LU factorization with partial pivoting (LAPACK `gbtrf` ordering).
    pub fn factor(mut self) -> Result<BandedLu, SingularPivot> {
        let n = self.n;
        let kl = self.kl;
        let ku_fill = self.ku + self.kl;
        let scale = self
            .data
            .iter()
            .map(|v| v.norm())
            .fold(0.0_f64, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut piv = vec![0usize; n];
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = self.at(k, k).norm();
            for i in (k + 1)..=last_row {
                let v = self.at(i, k).norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            piv[k] = p;
            if best <= f64::EPSILON * 1e-4 * scale {
                return Err(SingularPivot { column: k });
            }
            let last_col = (k + ku_fill).min(n - 1);
            if p != k {
                for j in k..=last_col {
                    let a = self.idx(k, j);
                    let b = self.idx(p, j);
                    self.data.swap(a, b);
                }
            }
            let pivot = self.at(k, k);
            for i in (k + 1)..=last_row {
                let l = self.at(i, k) / pivot;
                *self.at_mut(i, k) = l;
                if l == C64::default() {
                    continue;
                }
                for j in (k + 1)..=last_col {
                    let u = self.at(k, j);
                    *self.at_mut(i, j) -= l * u;
                }
            }
        }
        Ok(BandedLu { lu: self, piv })
    }
}

/// A pivot vanished during elimination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("singular pivot in column {column}")]
pub struct SingularPivot {
    pub column: usize,
}

/// Factors of a band matrix, usable for `A x = b` and `A^H x = b`.
#[derive(Debug, Clone)]
pub struct BandedLu {
    lu: BandedMatrix,
    piv: Vec<usize>,
}

impl BandedLu {
    pub fn dim(&self) -> usize {
        self.lu.n
    }

    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [C64]) {
        let n = self.lu.n;
        let kl = self.lu.kl;
        let ku_fill = self.lu.ku + kl;
        assert_eq!(x.len(), n);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
            let xk = x[k];
            if xk == C64::default() {
                continue;
            }
            for i in (k + 1)..=(k + kl).min(n - 1) {
                x[i] -= self.lu.at(i, k) * xk;
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..=(i + ku_fill).min(n - 1) {
                s -= self.lu.at(i, j) * x[j];
            }
            x[i] = s / self.lu.at(i, i);
        }
    }

    /// Solves `A^H x = b`.
    pub fn solve_adjoint(&self, b: &[C64]) -> Vec<C64> {
        let n = self.lu.n;
        let kl = self.lu.kl;
        let ku_fill = self.lu.ku + kl;
        assert_eq!(b.len(), n);
        let mut x = b.to_vec();
        // U^H z = b
        for i in 0..n {
            let mut s = x[i];
            for j in i.saturating_sub(ku_fill)..i {
                s -= self.lu.at(j, i).conj() * x[j];
            }
            x[i] = s / self.lu.at(i, i).conj();
        }
        // then the elementary eliminations in reverse, each followed by its swap
        for k in (0..n).rev() {
            let mut s = x[k];
            for i in (k + 1)..=(k + kl).min(n - 1) {
                s -= self.lu.at(i, k).conj() * x[i];
            }
            x[k] = s;
            let p = self.piv[k];
            if p != k {
                x.swap(k, p);
            }
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMatrix;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, kl: usize, ku: usize, seed: u64) -> (BandedMatrix, CMatrix) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = BandedMatrix::zeros(n, kl, ku);
        let mut d = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                // small diagonal forces pivoting
                let v = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                    * if i == j { 0.01 } else { 1.0 };
                b.add(i, j, v);
                d[(i, j)] = v;
            }
        }
        (b, d)
    }

    #[test]
    fn solve_and_adjoint_solve_match_dense() {
        for &(n, kl, ku) in &[(1, 0, 0), (7, 1, 1), (20, 3, 2), (33, 5, 5)] {
            let (b, d) = random_band(n, kl, ku, 11 + n as u64);
            let lu = b.factor().unwrap();
            let rhs: Vec<C64> = (0..n).map(|k| C64::new(k as f64, 1.0 - k as f64)).collect();
            let x = lu.solve(&rhs);
            let r = &d * DVector::from_vec(x.clone()) - DVector::from_vec(rhs.clone());
            assert!(r.norm() < 1e-9, "n={n} residual {}", r.norm());
            let y = lu.solve_adjoint(&rhs);
            let r = d.adjoint() * DVector::from_vec(y) - DVector::from_vec(rhs);
            assert!(r.norm() < 1e-9, "n={n} adjoint residual {}", r.norm());
        }
    }

    #[test]
    fn zero_matrix_reports_singular_pivot() {
        let b = BandedMatrix::zeros(4, 1, 1);
        assert_eq!(b.factor().unwrap_err(), SingularPivot { column: 0 });
    }
}
