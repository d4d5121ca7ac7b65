use rayon::prelude::*;
use serde::Serialize;

use super::{Result, ShiftInvert, SpectralError};
use crate::discretize::GridOperator;
use crate::linalg::{axpy, estimate_norm, low_rank_trace, norm2, random_vector, sub, LinearOp, C64};
use crate::rng;

/// Trapezoidal approximation of `(2πi)^{-1} ∮ (z - M)^{-1} dz` on the circle
/// `|z - λ| = r`.
///
/// With `z_m = λ + r e^{iθ_m}` and `w_m = r e^{iθ_m}/n`, the action is
/// `Πx = -Σ w_m (M - z_m)^{-1} x`.
pub struct ContourProjector {
    pub center: C64,
    pub radius: f64,
    dim: usize,
    weights: Vec<C64>,
    solvers: Vec<ShiftInvert>,
}

impl ContourProjector {
    pub fn new(op: &GridOperator, center: C64, radius: f64, nodes: usize) -> Result<Self> {
        if radius <= 0.0 || nodes < 4 {
            return Err(SpectralError::Precondition(format!(
                "contour radius {radius} / nodes {nodes}"
            )));
        }
        let (weights, zs): (Vec<C64>, Vec<C64>) = (0..nodes)
            .map(|m| {
                let e = C64::from_polar(radius, 2.0 * std::f64::consts::PI * m as f64 / nodes as f64);
                (e / nodes as f64, center + e)
            })
            .unzip();
        let solvers = zs
            .par_iter()
            .map(|&z| ShiftInvert::new(op, z))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            center,
            radius,
            dim: op.dim(),
            weights,
            solvers,
        })
    }

    pub fn nodes(&self) -> usize {
        self.weights.len()
    }
}

impl LinearOp for ContourProjector {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::default(); self.dim];
        for (w, s) in self.weights.iter().zip(&self.solvers) {
            axpy(-w, &s.solve(x), &mut out);
        }
        out
    }

    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::default(); self.dim];
        for (w, s) in self.weights.iter().zip(&self.solvers) {
            axpy(-w.conj(), &s.solve_adjoint(x), &mut out);
        }
        out
    }
}

/// `Π² - Π`
struct IdempotencyDefect<'a>(&'a ContourProjector);

impl LinearOp for IdempotencyDefect<'_> {
    fn dim(&self) -> usize {
        self.0.dim
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        let p = self.0.apply(x);
        sub(&self.0.apply(&p), &p)
    }
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        let p = self.0.apply_adjoint(x);
        sub(&self.0.apply_adjoint(&p), &p)
    }
}

/// `MΠ - ΠM`
struct Commutator<'a>(&'a GridOperator, &'a ContourProjector);

impl LinearOp for Commutator<'_> {
    fn dim(&self) -> usize {
        self.1.dim
    }
    fn apply(&self, x: &[C64]) -> Vec<C64> {
        sub(&self.0.apply(&self.1.apply(x)), &self.1.apply(&self.0.apply(x)))
    }
    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        sub(
            &self.1.apply_adjoint(&self.0.apply_adjoint(x)),
            &self.0.apply_adjoint(&self.1.apply_adjoint(x)),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProjectionDiagnostics {
    pub lambda_center: C64,
    pub radius: f64,
    pub nodes: usize,
    /// Estimate of `‖Π² - Π‖`.
    pub idem_residual: f64,
    pub trace: C64,
    /// Numerical rank found while computing the trace.
    pub rank: usize,
    /// Known eigenvalues strictly inside the contour.
    pub enclosed: usize,
    /// Estimate of `‖Π‖`.
    pub norm: f64,
    /// `max ‖Π_{2n} x - Π_n x‖ / ‖x‖` over the probes.
    pub drift: f64,
    /// Estimate of `‖MΠ - ΠM‖ / ‖M‖₁`.
    pub commutation: f64,
}

pub struct SpectralProjection {
    pub projector: ContourProjector,
    pub diagnostics: ProjectionDiagnostics,
}

/// Probes and power iterations for the operator-norm estimates.
const NORM_PROBES: usize = 5;
const NORM_ITERS: usize = 10;
const DRIFT_TOL: f64 = 1e-6;

/// Contour projection around `lambda` with the diagnostics used to accept it.
///
/// `known` are eigenvalues of `M` (typically from `eigs_in_disc`); none may
/// fall in the annulus `0.5 r <= |z - λ| <= 1.5 r`.
pub fn spectral_projection(
    op: &GridOperator,
    lambda: C64,
    radius: f64,
    nodes: usize,
    known: &[C64],
    seed: u64,
) -> Result<SpectralProjection> {
    if let Some(&intruder) = known.iter().find(|&&mu| {
        let d = (mu - lambda).norm();
        (0.5 * radius..=1.5 * radius).contains(&d)
    }) {
        return Err(SpectralError::AnnulusNotClean { intruder });
    }
    let enclosed = known
        .iter()
        .filter(|&&mu| (mu - lambda).norm() < 0.5 * radius)
        .count();
    let projector = ContourProjector::new(op, lambda, radius, nodes)?;
    let fine = ContourProjector::new(op, lambda, radius, 2 * nodes)?;
    let mut g = rng::stream(seed, "spectral_projection");
    let mut drift = 0.0_f64;
    for _ in 0..3 {
        let x = random_vector(op.dim(), &mut g);
        let d = sub(&fine.apply(&x), &projector.apply(&x));
        drift = drift.max(norm2(&d) / norm2(&x));
    }
    let (trace, rank) = low_rank_trace(&projector, enclosed + 6, 1e-6, &mut g);
    let norm = estimate_norm(&projector, NORM_PROBES, NORM_ITERS, &mut g).value;
    let idem_residual = estimate_norm(&IdempotencyDefect(&projector), NORM_PROBES, NORM_ITERS, &mut g).value;
    let commutation =
        estimate_norm(&Commutator(op, &projector), NORM_PROBES, NORM_ITERS, &mut g).value / op.scale();
    let diagnostics = ProjectionDiagnostics {
        lambda_center: lambda,
        radius,
        nodes,
        idem_residual,
        trace,
        rank,
        enclosed,
        norm,
        drift,
        commutation,
    };
    if drift > DRIFT_TOL {
        return Err(SpectralError::QuadratureNotConverged {
            drift,
            diagnostics: Box::new(diagnostics),
        });
    }
    Ok(SpectralProjection {
        projector,
        diagnostics,
    })
}
