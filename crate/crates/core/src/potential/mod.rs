//! Magnetic and electric potentials from a small term catalog.
//!
//! `A(x) = a + Bx` is affine and `V` is a sum of monomials `c x^α` with
//! `|α| <= 2` and damped monomials `c x^α (1 + |x|²)^{-m}` with
//! `|α| - 2m <= 2`. Both kinds are differentiated exactly.

mod assumptions;
mod order;

pub use assumptions::{
    check_assumptions, AssumptionConfig, AssumptionReport, Evidence, HypothesisRecord, HYPOTHESES,
};
pub use order::{check_order_property, order_function, order_gradient_ratio, OrderCheck};

use nalgebra::DVector;
use serde::Serialize;

use crate::linalg::{CMatrix, RMatrix, C64};
use crate::model::QuadraticModel;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PotentialError {
    #[error("invalid term: {0}")]
    InvalidTerm(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("candidate {index} at {point:?} is not a minimum: {condition}")]
    NotAMinimum {
        index: usize,
        point: Vec<f64>,
        condition: String,
    },
    #[error("candidate {index}: V'' has smallest singular value {sigma_min:e}")]
    DegenerateHessian { index: usize, sigma_min: f64 },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, PotentialError>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum PotentialTerm {
    /// `c x^α`
    Monomial { coeff: C64, powers: Vec<u32> },
    /// `c x^α (1 + |x|²)^{-damping}`
    Damped {
        coeff: C64,
        powers: Vec<u32>,
        damping: u32,
    },
}

impl PotentialTerm {
    fn powers(&self) -> &[u32] {
        match self {
            PotentialTerm::Monomial { powers, .. } | PotentialTerm::Damped { powers, .. } => powers,
        }
    }

    /// `|α| - 2m`, the growth order at infinity.
    pub fn effective_degree(&self) -> i64 {
        let deg: i64 = self.powers().iter().map(|&p| p as i64).sum();
        match self {
            PotentialTerm::Monomial { .. } => deg,
            PotentialTerm::Damped { damping, .. } => deg - 2 * *damping as i64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialSpec {
    dim: usize,
    a_offset: Vec<f64>,
    a_jacobian: RMatrix,
    terms: Vec<PotentialTerm>,
}

/// Values and exact derivatives at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub a: Vec<f64>,
    pub v: C64,
    pub grad_v: Vec<C64>,
    pub hess_v: CMatrix,
}

impl Evaluation {
    pub fn v1(&self) -> f64 {
        self.v.re
    }

    pub fn v2(&self) -> f64 {
        self.v.im
    }

    /// `|V₂'(x)|²`
    pub fn grad_v2_sq(&self) -> f64 {
        self.grad_v.iter().map(|g| g.im * g.im).sum()
    }
}

impl PotentialSpec {
    pub fn new(a_offset: Vec<f64>, a_jacobian: RMatrix, terms: Vec<PotentialTerm>) -> Result<Self> {
        let dim = a_offset.len();
        if dim == 0 {
            return Err(PotentialError::InvalidArgument("dimension 0".into()));
        }
        if a_jacobian.nrows() != dim || a_jacobian.ncols() != dim {
            return Err(PotentialError::DimensionMismatch {
                expected: dim,
                got: a_jacobian.nrows().max(a_jacobian.ncols()),
            });
        }
        for t in &terms {
            if t.powers().len() != dim {
                return Err(PotentialError::DimensionMismatch {
                    expected: dim,
                    got: t.powers().len(),
                });
            }
            // second derivatives stay bounded exactly when the growth order is <= 2
            if t.effective_degree() > 2 {
                return Err(PotentialError::InvalidTerm(format!(
                    "{t:?} grows with order {} > 2",
                    t.effective_degree()
                )));
            }
        }
        Ok(Self {
            dim,
            a_offset,
            a_jacobian,
            terms,
        })
    }

    /// Potential without magnetic field.
    pub fn electric(dim: usize, terms: Vec<PotentialTerm>) -> Result<Self> {
        Self::new(vec![0.0; dim], RMatrix::zeros(dim, dim), terms)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn a_offset(&self) -> &[f64] {
        &self.a_offset
    }

    pub fn a_jacobian(&self) -> &RMatrix {
        &self.a_jacobian
    }

    pub fn terms(&self) -> &[PotentialTerm] {
        &self.terms
    }

    pub fn magnetic_potential(&self, x: &[f64]) -> Vec<f64> {
        let xv = DVector::from_column_slice(x);
        let ax = &self.a_jacobian * xv;
        self.a_offset.iter().zip(ax.iter()).map(|(a, b)| a + b).collect()
    }

    /// `V(x)` alone, without derivatives.
    pub fn potential(&self, x: &[f64]) -> C64 {
        self.terms.iter().map(|t| term_value(t, x)).sum()
    }

    pub fn evaluate(&self, x: &[f64]) -> Evaluation {
        assert_eq!(x.len(), self.dim, "point dimension");
        let n = self.dim;
        let mut v = C64::default();
        let mut grad = vec![C64::default(); n];
        let mut hess = CMatrix::zeros(n, n);
        for t in &self.terms {
            let (tv, tg, th) = term_derivatives(t, x);
            v += tv;
            for j in 0..n {
                grad[j] += tg[j];
            }
            hess += th;
        }
        Evaluation {
            a: self.magnetic_potential(x),
            v,
            grad_v: grad,
            hess_v: hess,
        }
    }
}

fn monomial(powers: &[u32], x: &[f64]) -> f64 {
    powers.iter().zip(x).map(|(&p, &xi)| xi.powi(p as i32)).product()
}

/// `x^α`, its gradient and Hessian.
fn monomial_derivatives(powers: &[u32], x: &[f64]) -> (f64, Vec<f64>, RMatrix) {
    let n = x.len();
    let shifted = |drop: &[(usize, u32)]| -> f64 {
        let mut coeff = 1.0;
        let mut p: Vec<u32> = powers.to_vec();
        for &(j, k) in drop {
            if p[j] < k {
                return 0.0;
            }
            for _ in 0..k {
                coeff *= p[j] as f64;
                p[j] -= 1;
            }
        }
        coeff * monomial(&p, x)
    };
    let value = monomial(powers, x);
    let grad: Vec<f64> = (0..n).map(|j| shifted(&[(j, 1)])).collect();
    let mut hess = RMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            hess[(j, k)] = if j == k {
                shifted(&[(j, 2)])
            } else {
                shifted(&[(j, 1), (k, 1)])
            };
        }
    }
    (value, grad, hess)
}

/// `(1 + |x|²)^{-m}`, its gradient and Hessian.
fn damping_derivatives(m: u32, x: &[f64]) -> (f64, Vec<f64>, RMatrix) {
    let n = x.len();
    let s = 1.0 + x.iter().map(|v| v * v).sum::<f64>();
    let mf = m as f64;
    let w = s.powf(-mf);
    let w1 = -2.0 * mf * s.powf(-mf - 1.0);
    let w2 = 4.0 * mf * (mf + 1.0) * s.powf(-mf - 2.0);
    let grad: Vec<f64> = x.iter().map(|&xi| w1 * xi).collect();
    let mut hess = RMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            hess[(j, k)] = w2 * x[j] * x[k] + if j == k { w1 } else { 0.0 };
        }
    }
    (w, grad, hess)
}

fn term_value(t: &PotentialTerm, x: &[f64]) -> C64 {
    match t {
        PotentialTerm::Monomial { coeff, powers } => coeff * monomial(powers, x),
        PotentialTerm::Damped {
            coeff,
            powers,
            damping,
        } => {
            let s = 1.0 + x.iter().map(|v| v * v).sum::<f64>();
            coeff * monomial(powers, x) * s.powf(-(*damping as f64))
        }
    }
}

fn term_derivatives(t: &PotentialTerm, x: &[f64]) -> (C64, Vec<C64>, CMatrix) {
    let n = x.len();
    let (coeff, p, pg, ph) = match t {
        PotentialTerm::Monomial { coeff, powers } => {
            let (p, pg, ph) = monomial_derivatives(powers, x);
            (*coeff, p, pg, ph)
        }
        PotentialTerm::Damped {
            coeff,
            powers,
            damping,
        } => {
            let (p, pg, ph) = monomial_derivatives(powers, x);
            let (w, wg, wh) = damping_derivatives(*damping, x);
            let mut hess = RMatrix::zeros(n, n);
            for j in 0..n {
                for k in 0..n {
                    hess[(j, k)] = ph[(j, k)] * w + pg[j] * wg[k] + pg[k] * wg[j] + p * wh[(j, k)];
                }
            }
            let grad = (0..n).map(|j| pg[j] * w + p * wg[j]).collect();
            (*coeff, p * w, grad, hess)
        }
    };
    (
        coeff * p,
        pg.iter().map(|g| coeff * g).collect(),
        ph.map(|h| coeff * h),
    )
}

/// A declared zero of `V₁` together with its quadratic approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct MinimumPoint {
    pub x: Vec<f64>,
    pub hess_v: CMatrix,
    pub mag_jac: RMatrix,
    /// `(D - A'(x_j) y)² + ½ V''(x_j) y·y`; the constant `A(x_j)` is a gauge.
    pub model: QuadraticModel,
}

/// Pointwise tolerance on the vanishing conditions at a minimum.
pub const MINIMUM_TOL: f64 = 1e-10;
/// Smallest admissible singular value of `V''(x_j)`.
pub const HESSIAN_SIGMA_MIN: f64 = 1e-8;

/// Checks each candidate and builds its quadratic model.
///
/// Besides the pointwise conditions, `V₁` is sampled on a box around the
/// candidates; a zero of `V₁` away from every candidate means the zero set is
/// not the declared finite set, and the first candidate is rejected.
pub fn verify_minima(spec: &PotentialSpec, candidates: &[Vec<f64>]) -> Result<Vec<MinimumPoint>> {
    let n = spec.dim();
    let mut out = Vec::with_capacity(candidates.len());
    for (index, x) in candidates.iter().enumerate() {
        if x.len() != n {
            return Err(PotentialError::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let e = spec.evaluate(x);
        let not_min = |condition: &str| PotentialError::NotAMinimum {
            index,
            point: x.clone(),
            condition: condition.to_string(),
        };
        if e.v1().abs() > MINIMUM_TOL {
            return Err(not_min("V1(x) != 0"));
        }
        if e.grad_v.iter().any(|g| g.re.abs() > MINIMUM_TOL) {
            return Err(not_min("grad V1(x) != 0"));
        }
        if e.v2().abs() > MINIMUM_TOL {
            return Err(not_min("V2(x) != 0"));
        }
        if e.grad_v.iter().any(|g| g.im.abs() > MINIMUM_TOL) {
            return Err(not_min("grad V2(x) != 0"));
        }
        let sigma_min = e
            .hess_v
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if sigma_min < HESSIAN_SIGMA_MIN {
            return Err(PotentialError::DegenerateHessian { index, sigma_min });
        }
        let model = QuadraticModel::new(spec.a_jacobian().clone(), e.hess_v.clone())
            .map_err(|err| not_min(&format!("quadratic model rejected: {err}")))?;
        out.push(MinimumPoint {
            x: x.clone(),
            hess_v: e.hess_v,
            mag_jac: spec.a_jacobian().clone(),
            model,
        });
    }
    if let Some(w) = undeclared_zero(spec, candidates) {
        return Err(PotentialError::NotAMinimum {
            index: 0,
            point: candidates.first().cloned().unwrap_or_default(),
            condition: format!("V1 vanishes at undeclared point {w:?}; zero set not finite"),
        });
    }
    Ok(out)
}

/// Lattice points of `[-L, L]^n` farther than `0.25` from every candidate
/// where `V₁` vanishes.
fn undeclared_zero(spec: &PotentialSpec, candidates: &[Vec<f64>]) -> Option<Vec<f64>> {
    let n = spec.dim();
    let half = 8.0;
    let per_dim: usize = if n == 1 {
        257
    } else if n == 2 {
        65
    } else {
        17
    };
    let step = 2.0 * half / (per_dim - 1) as f64;
    let total = per_dim.pow(n as u32);
    let mut x = vec![0.0; n];
    for idx in 0..total {
        let mut r = idx;
        for xi in x.iter_mut() {
            *xi = -half + step * (r % per_dim) as f64;
            r /= per_dim;
        }
        let near = candidates
            .iter()
            .any(|c| c.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() < 0.0625);
        if !near && spec.potential(&x).re <= 1e-12 {
            return Some(x.clone());
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn quad_1d(coeff: C64) -> PotentialTerm {
        PotentialTerm::Monomial {
            coeff,
            powers: vec![2],
        }
    }

    fn damped_cubic() -> PotentialTerm {
        PotentialTerm::Damped {
            coeff: c(1.0, 0.0),
            powers: vec![3],
            damping: 1,
        }
    }

    #[test]
    fn rotated_quadratic_values() {
        let s = PotentialSpec::electric(1, vec![quad_1d(c(1.0, 1.0))]).unwrap();
        let e = s.evaluate(&[2.0]);
        assert_eq!(e.v, c(4.0, 4.0));
        assert_eq!(e.grad_v[0], c(4.0, 4.0));
        assert_eq!(e.hess_v[(0, 0)], c(2.0, 2.0));
    }

    #[test]
    fn damped_cubic_vanishes_to_third_order() {
        let s = PotentialSpec::electric(1, vec![damped_cubic()]).unwrap();
        let e = s.evaluate(&[0.0]);
        assert_eq!(e.v, c(0.0, 0.0));
        assert_eq!(e.grad_v[0], c(0.0, 0.0));
        assert_eq!(e.hess_v[(0, 0)], c(0.0, 0.0));
    }

    #[test]
    fn growth_order_is_enforced() {
        let cubic = PotentialTerm::Monomial {
            coeff: c(1.0, 0.0),
            powers: vec![3],
        };
        assert!(matches!(
            PotentialSpec::electric(1, vec![cubic]),
            Err(PotentialError::InvalidTerm(_))
        ));
        let quartic_damped = PotentialTerm::Damped {
            coeff: c(1.0, 0.0),
            powers: vec![4],
            damping: 1,
        };
        assert!(PotentialSpec::electric(1, vec![quartic_damped]).is_ok());
    }

    #[test]
    fn minima_are_verified() {
        let s = PotentialSpec::electric(1, vec![quad_1d(c(1.0, 1.0))]).unwrap();
        let m = verify_minima(&s, &[vec![0.0]]).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m[0].hess_v[(0, 0)], c(2.0, 2.0));

        let s = PotentialSpec::electric(1, vec![quad_1d(c(1.0, 1.0)), damped_cubic()]).unwrap();
        let m = verify_minima(&s, &[vec![0.0]]).unwrap();
        assert_eq!(m[0].hess_v[(0, 0)], c(2.0, 2.0));
    }

    #[test]
    fn purely_imaginary_potential_is_rejected() {
        let s = PotentialSpec::electric(1, vec![quad_1d(c(0.0, 1.0))]).unwrap();
        assert!(matches!(
            verify_minima(&s, &[vec![0.0]]),
            Err(PotentialError::NotAMinimum { .. })
        ));
    }

    #[test]
    fn shifted_candidate_is_rejected_with_condition() {
        let s = PotentialSpec::electric(1, vec![quad_1d(c(1.0, 1.0))]).unwrap();
        match verify_minima(&s, &[vec![0.5]]) {
            Err(PotentialError::NotAMinimum { condition, .. }) => {
                assert_eq!(condition, "V1(x) != 0")
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn flat_direction_is_degenerate() {
        let s = PotentialSpec::electric(
            2,
            vec![
                PotentialTerm::Monomial {
                    coeff: c(1.0, 0.0),
                    powers: vec![2, 0],
                },
                PotentialTerm::Damped {
                    coeff: c(1.0, 0.0),
                    powers: vec![0, 4],
                    damping: 1,
                },
            ],
        )
        .unwrap();
        assert!(matches!(
            verify_minima(&s, &[vec![0.0, 0.0]]),
            Err(PotentialError::DegenerateHessian { index: 0, .. })
        ));
    }

    #[test]
    fn magnetic_potential_is_affine() {
        let s = PotentialSpec::new(
            vec![1.0, -1.0],
            RMatrix::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]),
            vec![],
        )
        .unwrap();
        assert_eq!(s.magnetic_potential(&[2.0, 4.0]), vec![-1.0, 0.0]);
    }
}
