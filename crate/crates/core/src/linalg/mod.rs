//! Small dense/sparse linear algebra layer shared by the spectral code.
//!
//! Dense work goes through `nalgebra`; the sparse side is a CSR matrix and a
//! banded LU with partial pivoting, which is all the 1D/2D finite-difference
//! operators need.

mod banded;
mod estimate;
mod expm;
mod sparse;

pub use banded::{BandedLu, BandedMatrix, SingularPivot};
pub use estimate::{
    estimate_norm, lanczos_max_eigenvalue, low_rank_trace, random_vector, DenseOp, LinearOp, NormEstimate,
};
pub use expm::expm;
pub use sparse::CsrMatrix;

use nalgebra::DMatrix;
pub use num_complex::Complex64 as C64;

pub type CMatrix = DMatrix<C64>;
pub type RMatrix = DMatrix<f64>;

pub const I: C64 = C64::new(0.0, 1.0);

/// Hermitian inner product, conjugate-linear in the first slot.
pub fn dot(x: &[C64], y: &[C64]) -> C64 {
    debug_assert_eq!(x.len(), y.len());
    x.iter().zip(y).map(|(a, b)| a.conj() * b).sum()
}

pub fn norm2(x: &[C64]) -> f64 {
    x.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: C64, x: &mut [C64]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

/// Normalizes in place and returns the previous norm. Leaves zero vectors alone.
pub fn normalize(x: &mut [C64]) -> f64 {
    let nrm = norm2(x);
    if nrm > 0.0 {
        scale(C64::new(1.0 / nrm, 0.0), x);
    }
    nrm
}

pub fn sub(x: &[C64], y: &[C64]) -> Vec<C64> {
    x.iter().zip(y).map(|(a, b)| a - b).collect()
}

/// Eigenvalues of a general complex matrix from its complex Schur form.
pub fn dense_eigenvalues(m: &CMatrix) -> Vec<C64> {
    assert!(m.is_square(), "eigenvalues of a non-square matrix");
    if m.nrows() == 0 {
        return Vec::new();
    }
    let (_, t) = m.clone().schur().unpack();
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

pub fn to_complex(m: &RMatrix) -> CMatrix {
    m.map(|x| C64::new(x, 0.0))
}

/// Spectral norm of a dense complex matrix.
pub fn dense_norm2(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone()
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Greedy nearest-neighbour pairing of two point sets.
///
/// Returns `(index in a, index in b, distance)` triples, at most
/// `min(a.len(), b.len())` of them, each index used once. Pairs are formed
/// in order of increasing distance.
pub fn greedy_match(a: &[C64], b: &[C64]) -> Vec<(usize, usize, f64)> {
    let mut cand: Vec<(f64, usize, usize)> = Vec::with_capacity(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            cand.push(((x - y).norm(), i, j));
        }
    }
    cand.sort_by(|p, q| p.0.total_cmp(&q.0));
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut out = Vec::new();
    for (d, i, j) in cand {
        if !used_a[i] && !used_b[j] {
            used_a[i] = true;
            used_b[j] = true;
            out.push((i, j, d));
        }
    }
    out.sort_by_key(|p| p.0);
    out
}

/// Groups values whose mutual distance is below `rel_tol * max(1, |z|)`.
///
/// Single-linkage clustering; returns `(mean, count)` per cluster, ordered by
/// first appearance.
pub fn cluster(values: &[C64], rel_tol: f64) -> Vec<(C64, usize)> {
    let n = values.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        let mut k = i;
        while label[k] != r {
            let next = label[k];
            label[k] = r;
            k = next;
        }
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let scale = 1.0_f64.max(values[i].norm()).max(values[j].norm());
            if (values[i] - values[j]).norm() <= rel_tol * scale {
                let (ri, rj) = (find(&mut label, i), find(&mut label, j));
                if ri != rj {
                    label[rj.max(ri)] = rj.min(ri);
                }
            }
        }
    }
    let mut order: Vec<usize> = Vec::new();
    let mut sums: Vec<(C64, usize)> = Vec::new();
    for i in 0..n {
        let r = find(&mut label, i);
        match order.iter().position(|&o| o == r) {
            Some(k) => {
                sums[k].0 += values[i];
                sums[k].1 += 1;
            }
            None => {
                order.push(r);
                sums.push((values[i], 1));
            }
        }
    }
    sums.into_iter().map(|(s, c)| (s / c as f64, c)).collect()
}

/// Orthonormal basis (columns) of the numerical null space of a real
/// symmetric matrix: eigenvectors whose eigenvalue is below `tol` in modulus.
pub fn symmetric_null_space(m: &RMatrix, tol: f64) -> RMatrix {
    let n = m.nrows();
    if n == 0 {
        return RMatrix::zeros(0, 0);
    }
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let cols: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k].abs() <= tol).collect();
    let mut out = RMatrix::zeros(n, cols.len());
    for (c, &k) in cols.iter().enumerate() {
        out.set_column(c, &eig.eigenvectors.column(k));
    }
    out
}

/// Least-squares slope and intercept of `y` against `x`, plus R².
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    assert!(x.len() >= 2, "linear fit needs two points");
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - (intercept + slope * a);
            r * r
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - ss_res / syy } else { 1.0 };
    (slope, intercept, r2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn greedy_match_pairs_closest_first() {
        let a = [C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let b = [C64::new(1.1, 0.0), C64::new(0.05, 0.0)];
        let m = greedy_match(&a, &b);
        assert_eq!(m.len(), 2);
        assert_eq!((m[0].0, m[0].1), (0, 1));
        assert_eq!((m[1].0, m[1].1), (1, 0));
    }

    #[test]
    fn cluster_merges_near_duplicates() {
        let v = [C64::new(1.0, 0.0), C64::new(1.0 + 1e-9, 0.0), C64::new(2.0, 0.0)];
        let c = cluster(&v, 1e-6);
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].1, 2);
        assert_eq!(c[1].1, 1);
    }

    #[test]
    fn dense_eigenvalues_of_rotation() {
        let m = CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(0.0, 0.0),
                C64::new(1.0, 0.0),
                C64::new(-1.0, 0.0),
                C64::new(0.0, 0.0),
            ],
        );
        let mut ev = dense_eigenvalues(&m);
        ev.sort_by(|a, b| a.im.total_cmp(&b.im));
        assert!((ev[0] - C64::new(0.0, -1.0)).norm() < 1e-12);
        assert!((ev[1] - C64::new(0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn linear_fit_recovers_line() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let y: Vec<f64> = x.iter().map(|t| 1.5 - 2.0 * t).collect();
        let (s, c, r2) = linear_fit(&x, &y);
        assert!((s + 2.0).abs() < 1e-14);
        assert!((c - 1.5).abs() < 1e-14);
        assert!((r2 - 1.0).abs() < 1e-14);
    }
}
