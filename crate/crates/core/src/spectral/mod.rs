//! Eigenvalues, resolvent norms and spectral projections of grid operators.
//!
//! Everything is built on banded LU factorizations of `M - z`: shift-invert
//! Arnoldi for eigenvalues, Lanczos on `(M - z)^{-1} (M - z)^{-H}` for
//! resolvent norms, and trapezoidal contour sums for projections.

mod projection;
mod resolvent;

pub use projection::{spectral_projection, ContourProjector, ProjectionDiagnostics, SpectralProjection};
pub use resolvent::{
    line_sup_resolvent, parabolic_probe, resolvent_norm, resolvent_norm_dense, LineSup, ParabolicSample,
    ResolventMethod, ResolventSample, PARABOLIC_C,
};

use nalgebra::DMatrix;
use rand::Rng;
use serde::Serialize;

use crate::discretize::{assemble, DiscretizeError, Grid, GridOperator};
use crate::linalg::{
    axpy, dense_eigenvalues, dot, linear_fit, norm2, normalize, random_vector, BandedLu, C64,
};
use crate::model::{antisymmetrize, spectral_gap, ModelError};
use crate::potential::{MinimumPoint, PotentialSpec};
use crate::rng;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("M - z is numerically singular at z = {z}")]
    FactorizationSingular { z: C64 },
    #[error("no convergence at shift {shift}: {detail}")]
    ConvergenceFailure { shift: C64, detail: String },
    #[error("two eigenvalues within 1e-3 h of h mu0 at h = {h}: {first}, {second}")]
    AmbiguousPairing { h: f64, first: C64, second: C64 },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("eigenvalue {intruder} lies in the annulus around the contour")]
    AnnulusNotClean { intruder: C64 },
    #[error("doubling the quadrature nodes moves the projection by {drift:e}")]
    QuadratureNotConverged {
        drift: f64,
        diagnostics: Box<ProjectionDiagnostics>,
    },
    #[error("dimension {dim} exceeds the dense limit")]
    DimensionTooLarge { dim: usize },
}

pub type Result<T> = std::result::Result<T, SpectralError>;

/// Right eigenpair of the grid matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Eigenpair {
    pub lambda: C64,
    #[serde(skip)]
    pub vector: Vec<C64>,
    /// `‖Mv - λv‖` with `‖v‖ = 1`.
    pub residual: f64,
}

/// Relative residual accepted for an eigenpair, against `‖M‖₁`.
pub const EIGEN_RESIDUAL_TOL: f64 = 1e-8;

/// Banded LU of `M - z`.
pub struct ShiftInvert {
    pub z: C64,
    lu: BandedLu,
}

impl ShiftInvert {
    pub fn new(op: &GridOperator, z: C64) -> Result<Self> {
        let lu = op
            .matrix
            .shifted_banded(z)
            .factor()
            .map_err(|_| SpectralError::FactorizationSingular { z })?;
        Ok(Self { z, lu })
    }

    /// `(M - z)^{-1} b`
    pub fn solve(&self, b: &[C64]) -> Vec<C64> {
        self.lu.solve(b)
    }

    /// `(M - z)^{-H} b`
    pub fn solve_adjoint(&self, b: &[C64]) -> Vec<C64> {
        self.lu.solve_adjoint(b)
    }
}

/// Hessenberg matrix of `m` Arnoldi steps; stops early on breakdown.
fn arnoldi(start: &[C64], m: usize, apply: impl Fn(&[C64]) -> Vec<C64>) -> DMatrix<C64> {
    let mut v = start.to_vec();
    normalize(&mut v);
    let mut basis = vec![v];
    let mut h = DMatrix::<C64>::zeros(m + 1, m);
    let mut steps = m;
    for j in 0..m {
        let mut w = apply(&basis[j]);
        let scale = norm2(&w);
        for _ in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let c = dot(q, &w);
                h[(i, j)] += c;
                axpy(-c, q, &mut w);
            }
        }
        let b = norm2(&w);
        if b <= 1e-13 * scale {
            steps = j + 1;
            break;
        }
        h[(j + 1, j)] = C64::new(b, 0.0);
        basis.push(w.into_iter().map(|x| x / b).collect());
    }
    h.view((0, 0), (steps, steps)).into_owned()
}

/// Inverse iteration at `guess`; refactors once at the updated estimate.
fn refine(op: &GridOperator, guess: C64, start: &[C64], tol: f64) -> Result<Eigenpair> {
    let mut shift = guess;
    let mut solver = match ShiftInvert::new(op, shift) {
        Ok(s) => s,
        Err(_) => {
            shift += C64::new(1e-12, 1e-12) * op.scale();
            ShiftInvert::new(op, shift)?
        }
    };
    let mut v = start.to_vec();
    normalize(&mut v);
    let mut best: Option<Eigenpair> = None;
    for it in 0..12 {
        let mut w = solver.solve(&v);
        if normalize(&mut w) == 0.0 || w.iter().any(|x| !x.is_finite()) {
            break;
        }
        v = w;
        let mv = op.matrix.matvec(&v);
        let lambda = dot(&v, &mv);
        let mut r = mv;
        axpy(-lambda, &v, &mut r);
        let residual = norm2(&r);
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(Eigenpair {
                lambda,
                vector: v.clone(),
                residual,
            });
        }
        if residual < tol {
            break;
        }
        if it == 3 && (lambda - shift).norm() > 1e-14 * op.scale() {
            shift = lambda;
            if let Ok(s) = ShiftInvert::new(op, shift) {
                solver = s;
            }
        }
    }
    match best {
        Some(p) if p.residual < tol => Ok(p),
        Some(p) => Err(SpectralError::ConvergenceFailure {
            shift: guess,
            detail: format!("residual {:e} after inverse iteration", p.residual),
        }),
        None => Err(SpectralError::ConvergenceFailure {
            shift: guess,
            detail: "inverse iteration broke down".into(),
        }),
    }
}

/// Distance of `v` from the span of the orthonormalized `basis`.
fn distance_from_span(v: &[C64], basis: &[Vec<C64>]) -> f64 {
    let mut r = v.to_vec();
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, &r);
            axpy(-c, q, &mut r);
        }
    }
    norm2(&r) / norm2(v)
}

/// Eigenpairs near one shift: Ritz values of shift-invert Arnoldi, each
/// polished by inverse iteration, twice from independent starts so that
/// a double eigenvalue yields two vectors.
fn eigs_near(
    op: &GridOperator,
    shift: C64,
    reach: f64,
    krylov_dim: usize,
    rng: &mut impl Rng,
) -> Result<Vec<Eigenpair>> {
    let si = ShiftInvert::new(op, shift)?;
    let start = random_vector(op.dim(), rng);
    let h = arnoldi(&start, krylov_dim.min(op.dim()), |x| si.solve(x));
    let tol = EIGEN_RESIDUAL_TOL * op.scale();
    let mut found: Vec<Eigenpair> = Vec::new();
    for theta in dense_eigenvalues(&h) {
        if theta.norm() == 0.0 {
            continue;
        }
        let ritz = shift + 1.0 / theta;
        if (ritz - shift).norm() > reach {
            continue;
        }
        for _ in 0..2 {
            let s = random_vector(op.dim(), rng);
            let p = refine(op, ritz, &s, tol)?;
            push_unique(&mut found, p, op.h);
        }
    }
    Ok(found)
}

/// Adds `p` unless its eigenvalue is already known with `p.vector` in the
/// span of the known eigenvectors.
fn push_unique(list: &mut Vec<Eigenpair>, p: Eigenpair, h: f64) {
    let close: Vec<Vec<C64>> = {
        let tol = 1e-6 * (p.lambda.norm() + h);
        let mut basis: Vec<Vec<C64>> = Vec::new();
        for q in list.iter().filter(|q| (q.lambda - p.lambda).norm() <= tol) {
            let mut v = q.vector.clone();
            for b in &basis {
                let c = dot(b, &v);
                axpy(-c, b, &mut v);
            }
            if normalize(&mut v) > 1e-8 {
                basis.push(v);
            }
        }
        basis
    };
    if close.is_empty() || distance_from_span(&p.vector, &close) > 0.1 {
        list.push(p);
    }
}

/// A shift whose Arnoldi run or refinement failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftFailure {
    pub shift: C64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscEigs {
    pub radius: f64,
    /// Sorted by modulus.
    pub eigenpairs: Vec<Eigenpair>,
    pub shifts: Vec<C64>,
    pub failures: Vec<ShiftFailure>,
    /// True when more than `max_count` eigenvalues were found.
    pub truncated: bool,
    /// No eigenvalue within `0.05 C h` of the disc boundary.
    pub boundary_clear: bool,
}

/// Krylov dimension of the shift-invert Arnoldi runs.
pub const KRYLOV_DIM: usize = 40;

/// All eigenvalues of `M` with `|λ| < C h`.
///
/// Shifts sit at the centres of squares of side `C h / 2` tiling the right
/// half of the disc (the matrix is accretive, so nothing lies to the left).
/// Each shift is responsible for the eigenvalues within one square side.
pub fn eigs_in_disc(op: &GridOperator, c: f64, max_count: usize, seed: u64) -> Result<DiscEigs> {
    if let Some(w) = &op.resolution_warning {
        return Err(SpectralError::Precondition(format!(
            "grid does not resolve the disc: {w}"
        )));
    }
    if c <= 0.0 {
        return Err(SpectralError::Precondition(format!("C = {c} <= 0")));
    }
    let radius = c * op.h;
    let side = radius / 2.0;
    let mut shifts = Vec::new();
    for i in 0..2 {
        for j in -2..2 {
            let (x0, y0) = (i as f64 * side, j as f64 * side);
            let centre = C64::new(x0 + 0.5 * side, y0 + 0.5 * side);
            let nearest = C64::new(0.0_f64.clamp(x0, x0 + side), 0.0_f64.clamp(y0, y0 + side));
            if nearest.norm() < radius {
                shifts.push(centre);
            }
        }
    }
    let mut rng = rng::stream(seed, "eigs_in_disc");
    let mut pairs: Vec<Eigenpair> = Vec::new();
    let mut failures = Vec::new();
    for &s in &shifts {
        match eigs_near(op, s, side, KRYLOV_DIM, &mut rng) {
            Ok(found) => {
                for p in found {
                    if p.lambda.norm() < radius * 1.05 {
                        push_unique(&mut pairs, p, op.h);
                    }
                }
            }
            Err(e) => failures.push(ShiftFailure {
                shift: s,
                detail: e.to_string(),
            }),
        }
    }
    let boundary_clear = pairs
        .iter()
        .all(|p| (p.lambda.norm() - radius).abs() > 0.05 * radius);
    pairs.retain(|p| p.lambda.norm() < radius);
    pairs.sort_by(|a, b| a.lambda.norm().total_cmp(&b.lambda.norm()));
    let truncated = pairs.len() > max_count;
    pairs.truncate(max_count);
    Ok(DiscEigs {
        radius,
        eigenpairs: pairs,
        shifts,
        failures,
        truncated,
        boundary_clear,
    })
}

/// Eigenpairs of `M` within `reach` of `target`, nearest first.
pub fn eigs_near_target(op: &GridOperator, target: C64, reach: f64, seed: u64) -> Result<Vec<Eigenpair>> {
    let mut rng = rng::stream(seed, "eigs_near_target");
    let mut found = eigs_near(op, target, reach, KRYLOV_DIM.min(24), &mut rng)?;
    found.retain(|p| (p.lambda - target).norm() <= reach);
    found.sort_by(|a, b| (a.lambda - target).norm().total_cmp(&(b.lambda - target).norm()));
    Ok(found)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticsRow {
    pub h: f64,
    pub lambda: C64,
    /// `λ₀(h)/h`
    pub scaled: C64,
    /// `|λ₀(h)/h - μ₀|`
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticsTable {
    pub mu0: C64,
    pub rows: Vec<AsymptoticsRow>,
    /// Least-squares slope of `log deviation` against `log h`.
    pub slope: f64,
    pub r2: f64,
}

/// Tracks the eigenvalue nearest `h μ₀` over a list of `h`.
///
/// `μ₀` is the bottom of the lattice over all minima; it must be separated
/// from the rest of the lattice by a gap above `0.1`.
pub fn leading_eigenvalue_asymptotics(
    spec: &PotentialSpec,
    minima: &[MinimumPoint],
    h_list: &[f64],
    grid: Grid,
    seed: u64,
) -> Result<AsymptoticsTable> {
    if minima.is_empty() {
        return Err(SpectralError::Precondition("no minima".into()));
    }
    let mut bottoms = Vec::new();
    for m in minima {
        let (model, _) = antisymmetrize(&m.model);
        bottoms.push(spectral_gap(&model)?);
    }
    bottoms.sort_by(|a, b| a.0.re.total_cmp(&b.0.re));
    let (mu0, tau0) = bottoms[0];
    if tau0 <= 0.1 {
        return Err(SpectralError::Precondition(format!("spectral gap {tau0} <= 0.1")));
    }
    if let Some(other) = bottoms.get(1) {
        if other.0.re - mu0.re <= 0.1 {
            return Err(SpectralError::Precondition(
                "bottom eigenvalue is not simple across minima".into(),
            ));
        }
    }
    let mut rows = Vec::with_capacity(h_list.len());
    for (k, &h) in h_list.iter().enumerate() {
        let op = assemble(spec, grid, h)?;
        let target = mu0 * h;
        let near = eigs_near_target(&op, target, 0.5 * tau0 * h, seed ^ k as u64)?;
        let first = near.first().ok_or_else(|| SpectralError::ConvergenceFailure {
            shift: target,
            detail: "no eigenvalue near h mu0".into(),
        })?;
        if let Some(second) = near.get(1) {
            if (second.lambda - target).norm() < 1e-3 * h {
                return Err(SpectralError::AmbiguousPairing {
                    h,
                    first: first.lambda,
                    second: second.lambda,
                });
            }
        }
        let scaled = first.lambda / h;
        rows.push(AsymptoticsRow {
            h,
            lambda: first.lambda,
            scaled,
            deviation: (scaled - mu0).norm(),
        });
    }
    let (slope, r2) = if rows.len() >= 2 {
        let x: Vec<f64> = rows.iter().map(|r| r.h.ln()).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.deviation.ln()).collect();
        let (s, _, r2) = linear_fit(&x, &y);
        (s, r2)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(AsymptoticsTable { mu0, rows, slope, r2 })
}
