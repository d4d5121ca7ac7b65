//! The semigroup `e^{-tM/h}` and the remainder left after subtracting the
//! contributions of the eigenvalues below a line `Re z = a h`.

mod krylov;

pub use krylov::{expv, KrylovRun, StepFailure};

use rand::Rng;
use serde::Serialize;

use crate::discretize::GridOperator;
use crate::linalg::{axpy, linear_fit, normalize, random_vector, CMatrix, DenseOp, LinearOp, C64};
use crate::oracles::{dense_expm, DENSE_LIMIT};
use crate::rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SemigroupError {
    #[error("time t = {0} must be finite and >= 0")]
    NegativeTime(f64),
    #[error("Krylov substepping stalled at t = {t_reached} (step {step:e}) above tolerance {tol:e}")]
    StepFailure { t_reached: f64, step: f64, tol: f64 },
    #[error("dimension {dim} exceeds the dense limit")]
    DimensionTooLarge { dim: usize },
    #[error("only {usable} remainders above the noise floor {floor:e}; need {needed}")]
    NoiseFloor {
        usable: usize,
        needed: usize,
        floor: f64,
    },
    #[error("lambdas and projections differ in length: {lambdas} vs {projections}")]
    LengthMismatch { lambdas: usize, projections: usize },
}

pub type Result<T> = std::result::Result<T, SemigroupError>;

/// Target accuracy of a propagation, relative to `‖v‖`.
pub const PROPAGATION_TOL: f64 = 1e-9;
/// Krylov subspace dimension.
pub const KRYLOV_DIM: usize = 30;
/// Remainders below this are not used by the decay fit.
pub const NOISE_FLOOR: f64 = 1e-8;
const FIT_THRESHOLD: f64 = 10.0 * NOISE_FLOOR;
const MIN_FIT_POINTS: usize = 5;

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(SemigroupError::NegativeTime(t))
    }
}

fn krylov(op: &GridOperator, v: &[C64], t: f64, adjoint: bool) -> Result<Vec<C64>> {
    check_time(t)?;
    let t_out = t / op.h;
    let anorm = op.matrix.norm1().max(op.matrix.norm_inf());
    let beta = crate::linalg::norm2(v);
    let tol = PROPAGATION_TOL * beta / t_out.max(1e-300);
    let apply = |x: &[C64]| {
        let mut y = if adjoint {
            op.matrix.matvec_adjoint(x)
        } else {
            op.matrix.matvec(x)
        };
        y.iter_mut().for_each(|c| *c = -*c);
        y
    };
    expv(t_out, apply, anorm, v, KRYLOV_DIM, tol)
        .map(|r| r.w)
        .map_err(|f| SemigroupError::StepFailure {
            t_reached: f.t_reached * op.h,
            step: f.step * op.h,
            tol: PROPAGATION_TOL,
        })
}

/// `e^{-tM/h} v` by adaptive Krylov substepping.
pub fn propagate(op: &GridOperator, v: &[C64], t: f64) -> Result<Vec<C64>> {
    krylov(op, v, t, false)
}

/// `e^{-tM^H/h} v`
pub fn propagate_adjoint(op: &GridOperator, v: &[C64], t: f64) -> Result<Vec<C64>> {
    krylov(op, v, t, true)
}

/// Dense `e^{-tM/h}` by scaling and squaring.
pub fn dense_propagator(op: &GridOperator, t: f64) -> Result<CMatrix> {
    check_time(t)?;
    if op.dim() > DENSE_LIMIT {
        return Err(SemigroupError::DimensionTooLarge { dim: op.dim() });
    }
    dense_expm(&op.matrix.to_dense(), -t / op.h)
        .map_err(|_| SemigroupError::DimensionTooLarge { dim: op.dim() })
}

/// How `e^{-tM/h}` is applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropagatorKind {
    Krylov,
    Dense,
}

/// `e^{-tM/h}` at a fixed time.
pub enum Evolution<'a> {
    Krylov { op: &'a GridOperator, t: f64 },
    Dense(CMatrix),
}

impl<'a> Evolution<'a> {
    pub fn new(op: &'a GridOperator, t: f64, kind: PropagatorKind) -> Result<Self> {
        check_time(t)?;
        match kind {
            PropagatorKind::Krylov => Ok(Self::Krylov { op, t }),
            PropagatorKind::Dense => Ok(Self::Dense(dense_propagator(op, t)?)),
        }
    }

    pub fn apply(&self, v: &[C64]) -> Result<Vec<C64>> {
        match self {
            Self::Krylov { op, t } => propagate(op, v, *t),
            Self::Dense(e) => Ok(DenseOp(e).apply(v)),
        }
    }

    pub fn apply_adjoint(&self, v: &[C64]) -> Result<Vec<C64>> {
        match self {
            Self::Krylov { op, t } => propagate_adjoint(op, v, *t),
            Self::Dense(e) => Ok(DenseOp(e).apply_adjoint(v)),
        }
    }
}

/// Probes and power iterations of the remainder norm estimate.
pub const REMAINDER_PROBES: usize = 5;
pub const REMAINDER_ITERS: usize = 10;

/// Randomized estimate of `‖e^{-tM/h} - Σ_k e^{-tλ_k/h} Π_k‖`.
pub fn remainder_norm(
    op: &GridOperator,
    kind: PropagatorKind,
    lambdas: &[C64],
    projections: &[&dyn LinearOp],
    t: f64,
    seed: u64,
) -> Result<f64> {
    if lambdas.len() != projections.len() {
        return Err(SemigroupError::LengthMismatch {
            lambdas: lambdas.len(),
            projections: projections.len(),
        });
    }
    let evo = Evolution::new(op, t, kind)?;
    let factors: Vec<C64> = lambdas.iter().map(|&l| (-l * t / op.h).exp()).collect();
    let apply = |x: &[C64]| -> Result<Vec<C64>> {
        let mut y = evo.apply(x)?;
        for (f, p) in factors.iter().zip(projections) {
            axpy(-f, &p.apply(x), &mut y);
        }
        Ok(y)
    };
    let apply_adjoint = |x: &[C64]| -> Result<Vec<C64>> {
        let mut y = evo.apply_adjoint(x)?;
        for (f, p) in factors.iter().zip(projections) {
            axpy(-f.conj(), &p.apply_adjoint(x), &mut y);
        }
        Ok(y)
    };
    let mut g = rng::stream(seed, &format!("remainder/{t}"));
    power_norm(op.dim(), apply, apply_adjoint, &mut g)
}

fn power_norm(
    n: usize,
    apply: impl Fn(&[C64]) -> Result<Vec<C64>>,
    apply_adjoint: impl Fn(&[C64]) -> Result<Vec<C64>>,
    rng: &mut impl Rng,
) -> Result<f64> {
    let mut best = 0.0_f64;
    for _ in 0..REMAINDER_PROBES {
        let mut v = random_vector(n, rng);
        normalize(&mut v);
        for _ in 0..REMAINDER_ITERS {
            let mut w = apply(&v)?;
            let sigma = normalize(&mut w);
            best = best.max(sigma);
            if sigma == 0.0 {
                break;
            }
            v = apply_adjoint(&w)?;
            if normalize(&mut v) == 0.0 {
                break;
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecaySeries {
    pub times: Vec<f64>,
    pub remainder_norms: Vec<f64>,
    /// Minus the slope of `log remainder` against `t` over the fitted points.
    pub fitted_rate: f64,
    pub reference_a: f64,
    pub r2: f64,
    /// Number of leading points above the noise threshold used by the fit.
    pub fitted_points: usize,
    /// Largest `|log remainder - fitted line|` over the fitted points.
    pub max_log_deviation: f64,
}

/// `count` times spaced geometrically over `[start, end]`.
pub fn geometric_times(start: f64, end: f64, count: usize) -> Vec<f64> {
    if count < 2 {
        return vec![start];
    }
    let r = (end / start).ln() / (count - 1) as f64;
    (0..count).map(|k| start * (r * k as f64).exp()).collect()
}

/// Log-linear fit of a remainder series, skipping values at or below
/// `10 × NOISE_FLOOR`.
pub fn decay_rate_fit(times: &[f64], remainder_norms: &[f64], reference_a: f64) -> Result<DecaySeries> {
    let (x, y): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(remainder_norms)
        .filter(|(_, &r)| r > FIT_THRESHOLD)
        .map(|(&t, &r)| (t, r.ln()))
        .unzip();
    if x.len() < MIN_FIT_POINTS {
        return Err(SemigroupError::NoiseFloor {
            usable: x.len(),
            needed: MIN_FIT_POINTS,
            floor: FIT_THRESHOLD,
        });
    }
    let (slope, intercept, r2) = linear_fit(&x, &y);
    let max_log_deviation = x
        .iter()
        .zip(&y)
        .map(|(t, l)| (l - (slope * t + intercept)).abs())
        .fold(0.0, f64::max);
    Ok(DecaySeries {
        times: times.to_vec(),
        remainder_norms: remainder_norms.to_vec(),
        fitted_rate: -slope,
        reference_a,
        r2,
        fitted_points: x.len(),
        max_log_deviation,
    })
}

/// Remainder norms over `times` followed by [`decay_rate_fit`].
pub fn decay_series(
    op: &GridOperator,
    kind: PropagatorKind,
    lambdas: &[C64],
    projections: &[&dyn LinearOp],
    times: &[f64],
    reference_a: f64,
    seed: u64,
) -> Result<DecaySeries> {
    let norms = times
        .iter()
        .map(|&t| remainder_norm(op, kind, lambdas, projections, t, seed))
        .collect::<Result<Vec<_>>>()?;
    decay_rate_fit(times, &norms, reference_a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{assemble, Grid};
    use crate::linalg::{norm2, sub};
    use crate::potential::{PotentialSpec, PotentialTerm};
    use crate::spectral::{eigs_in_disc, spectral_projection};

    fn oscillator(coeff: C64, h: f64, half_width: f64, n: usize) -> GridOperator {
        let spec = PotentialSpec::electric(
            1,
            vec![PotentialTerm::Monomial {
                coeff,
                powers: vec![2],
            }],
        )
        .unwrap();
        assemble(&spec, Grid::new(1, half_width, n).unwrap(), h).unwrap()
    }

    #[test]
    fn identity_at_zero_and_negative_time() {
        let op = oscillator(C64::new(1.0, 1.0), 0.1, 5.0, 100);
        let mut g = rng::stream(1, "t0");
        let v = random_vector(op.dim(), &mut g);
        assert_eq!(propagate(&op, &v, 0.0).unwrap(), v);
        assert!(matches!(
            propagate(&op, &v, -1.0),
            Err(SemigroupError::NegativeTime(_))
        ));
    }

    #[test]
    fn krylov_matches_dense() {
        let op = oscillator(C64::new(1.0, 1.0), 0.1, 5.0, 150);
        let mut g = rng::stream(2, "krylov-dense");
        for t in [0.1, 1.0, 5.0] {
            let e = dense_propagator(&op, t).unwrap();
            let v = random_vector(op.dim(), &mut g);
            let k = propagate(&op, &v, t).unwrap();
            let d = DenseOp(&e).apply(&v);
            assert!(
                norm2(&sub(&k, &d)) <= 1e-6 * norm2(&d).max(1e-3 * norm2(&v)),
                "t = {t}"
            );
            let ka = propagate_adjoint(&op, &v, t).unwrap();
            let da = DenseOp(&e).apply_adjoint(&v);
            assert!(norm2(&sub(&ka, &da)) <= 1e-6 * norm2(&da).max(1e-3 * norm2(&v)));
        }
    }

    #[test]
    fn ground_state_decays_at_unit_rate() {
        let h = 0.05;
        let op = oscillator(C64::new(1.0, 0.0), h, 6.0, 800);
        let eigs = eigs_in_disc(&op, 2.0, 1, 1).unwrap();
        let v = &eigs.eigenpairs[0].vector;
        let w = propagate(&op, v, 2.0).unwrap();
        assert!((norm2(&w) - (-2.0f64).exp()).abs() < 1e-3);
    }

    #[test]
    fn synthetic_fit_is_exact() {
        let times = geometric_times(0.5, 5.0, 8);
        let norms: Vec<f64> = times.iter().map(|t| 3.0 * (-2.0 * t).exp()).collect();
        let s = decay_rate_fit(&times, &norms, 2.0).unwrap();
        assert!((s.fitted_rate - 2.0).abs() < 1e-6);
        assert_eq!(s.fitted_points, 8);
        let tiny = vec![1e-9; 8];
        assert!(matches!(
            decay_rate_fit(&times, &tiny, 2.0),
            Err(SemigroupError::NoiseFloor { .. })
        ));
    }

    #[test]
    fn selfadjoint_remainder_rate() {
        let h = 0.1;
        let op = oscillator(C64::new(1.0, 0.0), h, 6.0, 300);
        let eigs = eigs_in_disc(&op, 2.0, 1, 4).unwrap();
        let known: Vec<C64> = eigs.eigenpairs.iter().map(|p| p.lambda).collect();
        let p = spectral_projection(&op, known[0], 0.5 * h, 32, &known, 7).unwrap();
        let projections: [&dyn LinearOp; 1] = [&p.projector];
        let r0 = remainder_norm(&op, PropagatorKind::Dense, &known, &projections, 0.0, 1).unwrap();
        assert!(r0 > 0.99);
        let times = geometric_times(0.5, 5.0, 8);
        let s = decay_series(&op, PropagatorKind::Dense, &known, &projections, &times, 2.0, 1).unwrap();
        assert!((s.fitted_rate - 3.0).abs() < 0.1, "{}", s.fitted_rate);
    }
}
