use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use super::{axpy, dot, norm2, normalize, CMatrix, CsrMatrix, C64};

/// Matrix-free square operator with an adjoint.
pub trait LinearOp: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64]) -> Vec<C64>;
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64>;
}

impl LinearOp for CsrMatrix {
    fn dim(&self) -> usize {
        CsrMatrix::dim(self)
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.matvec(x)
    }
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        self.matvec_adjoint(x)
    }
}

/// Dense matrix viewed as a [`LinearOp`].
pub struct DenseOp<'a>(pub &'a CMatrix);

impl LinearOp for DenseOp<'_> {
    fn dim(&self) -> usize {
        self.0.nrows()
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        (self.0 * DVector::from_column_slice(x)).data.into()
    }
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        (self.0.adjoint() * DVector::from_column_slice(x)).data.into()
    }
}

pub fn random_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<C64> {
    (0..n)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub per_probe: Vec<f64>,
}

/// Randomized power iteration on `A^H A` for the operator 2-norm.
///
/// Each probe runs `iters` rounds; the result is the best lower bound seen
/// over all probes.
pub fn estimate_norm<R: Rng + ?Sized>(
    op: &dyn LinearOp,
    probes: usize,
    iters: usize,
    rng: &mut R,
) -> NormEstimate {
    let n = op.dim();
    let mut per_probe = Vec::with_capacity(probes);
    for _ in 0..probes {
        let mut v = random_vector(n, rng);
        normalize(&mut v);
        let mut best = 0.0_f64;
        for _ in 0..iters.max(1) {
            let mut w = op.apply(&v);
            let sigma = normalize(&mut w);
            best = best.max(sigma);
            if sigma == 0.0 {
                break;
            }
            v = op.apply_adjoint(&w);
            if normalize(&mut v) == 0.0 {
                break;
            }
        }
        per_probe.push(best);
    }
    NormEstimate {
        value: per_probe.iter().cloned().fold(0.0, f64::max),
        per_probe,
    }
}

/// Trace of a (numerically) low-rank operator by randomized range finding.
///
/// Applies the operator to `probes` Gaussian vectors, keeps the directions
/// whose singular values exceed `rank_tol` relative to the probe block, and
/// returns `(trace of Q^H A Q, rank)`. Exact whenever the rank is below
/// `probes`.
pub fn low_rank_trace<R: Rng + ?Sized>(
    op: &dyn LinearOp,
    probes: usize,
    rank_tol: f64,
    rng: &mut R,
) -> (C64, usize) {
    let n = op.dim();
    let k = probes.min(n).max(1);
    let mut omega = DMatrix::<C64>::zeros(n, k);
    let mut y = DMatrix::<C64>::zeros(n, k);
    for c in 0..k {
        let v = random_vector(n, rng);
        let av = op.apply(&v);
        omega.set_column(c, &DVector::from_vec(v));
        y.set_column(c, &DVector::from_vec(av));
    }
    let omega_norm = omega
        .svd(false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    let svd = y.svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > rank_tol * omega_norm)
        .count();
    let mut trace = C64::default();
    for c in 0..rank {
        let q: Vec<C64> = u.column(c).iter().cloned().collect();
        trace += dot(&q, &op.apply(&q));
    }
    (trace, rank)
}

/// Largest eigenvalue of a Hermitian positive semidefinite operator by
/// Lanczos with full reorthogonalization.
pub fn lanczos_max_eigenvalue(
    start: &[C64],
    max_iter: usize,
    rel_tol: f64,
    mut apply: impl FnMut(&[C64]) -> Vec<C64>,
) -> f64 {
    let n = start.len();
    let mut basis: Vec<Vec<C64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut v = start.to_vec();
    if normalize(&mut v) == 0.0 {
        return 0.0;
    }
    let mut prev_theta = 0.0_f64;
    let steps = max_iter.min(n).max(1);
    for j in 0..steps {
        let mut w = apply(&v);
        let a = dot(&v, &w).re;
        basis.push(v.clone());
        alpha.push(a);
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &w);
                axpy(-c, q, &mut w);
            }
        }
        let b = norm2(&w);
        let theta = tridiagonal_max(&alpha, &beta);
        let converged = j > 0 && (theta - prev_theta).abs() <= rel_tol * theta.abs();
        prev_theta = theta;
        if converged || b <= 1e-14 * theta.abs().max(f64::MIN_POSITIVE) || j + 1 == steps {
            return theta;
        }
        beta.push(b);
        v = w.into_iter().map(|x| x / b).collect();
    }
    prev_theta
}

fn tridiagonal_max(alpha: &[f64], beta: &[f64]) -> f64 {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    t.symmetric_eigenvalues().iter().cloned().fold(f64::MIN, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn diag(values: &[f64]) -> CMatrix {
        CMatrix::from_diagonal(&DVector::from_iterator(
            values.len(),
            values.iter().map(|&v| C64::new(v, 0.0)),
        ))
    }

    #[test]
    fn norm_estimate_on_diagonal() {
        let m = diag(&[0.5, 3.0, -1.0, 2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let est = estimate_norm(&DenseOp(&m), 5, 30, &mut rng);
        assert!((est.value - 3.0).abs() < 1e-8);
        assert_eq!(est.per_probe.len(), 5);
    }

    #[test]
    fn low_rank_trace_of_projector() {
        let mut p = CMatrix::zeros(6, 6);
        // oblique rank-two projector: diag(1,1,0,...) plus a nilpotent coupling
        p[(0, 0)] = C64::new(1.0, 0.0);
        p[(1, 1)] = C64::new(1.0, 0.0);
        p[(0, 4)] = C64::new(2.0, -1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (tr, rank) = low_rank_trace(&DenseOp(&p), 5, 1e-10, &mut rng);
        assert_eq!(rank, 2);
        assert!((tr - C64::new(2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn lanczos_top_eigenvalue() {
        let m = diag(&[1.0, 4.0, 9.0, 2.0, 0.1]);
        let start = vec![C64::new(1.0, 0.0); 5];
        let top = lanczos_max_eigenvalue(&start, 10, 1e-14, |x| DenseOp(&m).apply(x));
        assert!((top - 9.0).abs() < 1e-10);
    }
}
