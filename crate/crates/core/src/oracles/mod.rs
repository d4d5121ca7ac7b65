//! Independent reference computations used to check the main code paths.

mod hermite;

pub use hermite::{hermite_galerkin_spectrum, GalerkinSpectrum, HermiteTruncation};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{expm, CMatrix, RMatrix, C64};
use crate::model::QuadraticModel;

/// Largest dimension accepted by the dense reference paths.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleError {
    #[error("A is not antisymmetric")]
    NotAntisymmetric,
    #[error("dimension {dim} exceeds the dense limit {DENSE_LIMIT}")]
    DimensionTooLarge { dim: usize },
    #[error("argument jumps by {jump:.3} rad at contour node {node}; refine the contour")]
    ArgumentJump { node: usize, jump: f64 },
    #[error("det T vanishes at contour node {node}")]
    ZeroOnContour { node: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// `exp(t M)` by scaling and squaring.
pub fn dense_expm(m: &CMatrix, t: f64) -> Result<CMatrix> {
    if m.nrows() > DENSE_LIMIT {
        return Err(OracleError::DimensionTooLarge { dim: m.nrows() });
    }
    Ok(expm(&(m * C64::new(t, 0.0))))
}

/// Winding number of `λ ↦ det T(λ)` around `0` along `|λ - center| = radius`.
///
/// The argument is accumulated node to node; a step larger than `π/2`
/// means the contour is too coarse to resolve the winding.
pub fn det_winding(model: &QuadraticModel, center: C64, radius: f64, nodes: usize) -> Result<i64> {
    if radius <= 0.0 || nodes < 4 {
        return Err(OracleError::InvalidArgument(format!(
            "contour radius {radius} / nodes {nodes}"
        )));
    }
    let det_at = |m: usize| {
        let th = 2.0 * std::f64::consts::PI * m as f64 / nodes as f64;
        model
            .pencil_at(center + C64::from_polar(radius, th))
            .determinant()
    };
    let first = det_at(0);
    if first == C64::default() {
        return Err(OracleError::ZeroOnContour { node: 0 });
    }
    let mut prev = first;
    let mut total = 0.0;
    for m in 1..=nodes {
        let d = if m == nodes { first } else { det_at(m) };
        if d == C64::default() {
            return Err(OracleError::ZeroOnContour { node: m });
        }
        let step = (d / prev).arg();
        if step.abs() > std::f64::consts::FRAC_PI_2 {
            return Err(OracleError::ArgumentJump { node: m, jump: step });
        }
        total += step;
        prev = d;
    }
    Ok((total / (2.0 * std::f64::consts::PI)).round() as i64)
}

/// [`det_winding`] with the node count doubled on every argument jump.
pub fn det_winding_refined(
    model: &QuadraticModel,
    center: C64,
    radius: f64,
    nodes: usize,
    max_nodes: usize,
) -> Result<i64> {
    let mut m = nodes;
    loop {
        match det_winding(model, center, radius, m) {
            Err(OracleError::ArgumentJump { .. }) if 2 * m <= max_nodes => m *= 2,
            other => return other,
        }
    }
}

/// Shape of a random quadratic model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RandomModelKind {
    /// Generic `V`, invertible with probability one.
    Generic,
    /// `Re V` of rank one less than `n`, `Im V` generic: still invertible.
    DegenerateReal,
    /// `V y = 0` on a real subspace of the given dimension.
    CommonKernel(usize),
}

fn gaussian_matrix(rows: usize, cols: usize, rng: &mut impl Rng) -> RMatrix {
    RMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random model with antisymmetric `A` and `Re V ⪰ 0`.
pub fn random_model(n: usize, kind: RandomModelKind, rng: &mut impl Rng) -> QuadraticModel {
    let g = gaussian_matrix(n, n, rng);
    let a = (&g - g.transpose()) * 0.5;
    let s = gaussian_matrix(n, n, rng);
    let mut v2 = (&s + s.transpose()) * 0.5;
    let mut v1 = match kind {
        RandomModelKind::DegenerateReal if n > 1 => {
            let l = gaussian_matrix(n, n - 1, rng);
            &l * l.transpose()
        }
        _ => {
            let l = gaussian_matrix(n, n, rng);
            &l * l.transpose() / n as f64
        }
    };
    if let RandomModelKind::CommonKernel(k) = kind {
        let k = k.min(n);
        let q = gaussian_matrix(n, n, rng).qr().q();
        // projector onto the complement of the first k columns of q
        let kernel = q.columns(0, k).into_owned();
        let p = RMatrix::identity(n, n) - &kernel * kernel.transpose();
        v1 = &p * v1 * &p;
        v2 = &p * v2 * &p;
    }
    let v = CMatrix::from_fn(n, n, |i, j| C64::new(v1[(i, j)], v2[(i, j)]));
    QuadraticModel::new(a, v).expect("random model satisfies the invariants")
}
