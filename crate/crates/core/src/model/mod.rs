//! Exact spectral algebra of quadratic magnetic Schrödinger operators
//! `Q = (D - Ax)^2 + (1/2) V x·x` on `R^n`.
//!
//! The spectrum of `Q` is a lattice generated by the roots of the quadratic
//! pencil `T(λ) = λ² + 2λA + V/2` lying in the upper half plane. The roots
//! are computed twice, from the Hamilton map and from a companion
//! linearization, and the two sets must agree.

mod lattice;
mod singular;

pub use lattice::{lowest_points, model_spectrum, sector_angle, spectral_gap, ModelEigenvalue};
pub use singular::{
    flow_derivative_forms, singular_space_closed_form, singular_space_iterative, symbol_forms,
    SingularMethod, SingularSpaceBasis,
};

use serde::Serialize;

use crate::linalg::{cluster, dense_eigenvalues, greedy_match, CMatrix, RMatrix, C64};

/// Tolerance on `|Im λ|` below which a pencil root counts as real.
pub const REAL_AXIS_TOL: f64 = 1e-8;
/// Acceptance distance between Hamilton-map and companion roots.
pub const CROSS_CHECK_TOL: f64 = 1e-8;
/// Relative distance under which roots are treated as one multiple root.
pub const CLUSTER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("dimension mismatch: A is {a}x{a}, V is {v_rows}x{v_cols}")]
    DimensionMismatch { a: usize, v_rows: usize, v_cols: usize },
    #[error("V is not symmetric (max |V - V^T| = {defect:e})")]
    NotSymmetric { defect: f64 },
    #[error("Re V is not positive semidefinite (smallest eigenvalue {min_eigenvalue:e})")]
    NotAccretive { min_eigenvalue: f64 },
    #[error("A is not antisymmetric (max |A + A^T| = {defect:e}); antisymmetrize first")]
    NotAntisymmetric { defect: f64 },
    #[error("Hamilton-map and companion roots disagree by {distance:e}")]
    CrossCheckFailure { distance: f64 },
    #[error("pencil root {root} lies on the real axis (V singular or singular space nontrivial)")]
    RealRoot { root: C64 },
    #[error("{found} roots in the upper half plane, expected {expected}")]
    CountMismatch { found: usize, expected: usize },
    #[error("no lattice point with real part <= {re_bound}")]
    EmptyWindow { re_bound: f64 },
    #[error("generator {generator} has |arg| >= pi/2")]
    SectorViolation { generator: C64 },
    #[error("pencil root {root} is within {distance:e} of the contour")]
    ContourTooClose { root: C64, distance: f64 },
    #[error("contour integral {value} is not an integer")]
    NonIntegerResidual { value: C64 },
    #[error("T(lambda) is singular at contour node {node}")]
    SingularPencil { node: C64 },
    #[error("iterative singular space disagrees with the closed form: {detail}")]
    MismatchWithClosedForm { detail: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, ModelError>;

fn max_abs_real(m: &RMatrix) -> f64 {
    m.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Quadratic model `(A, V)`: `A` real, `V` complex symmetric with `Re V ⪰ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticModel {
    a: RMatrix,
    v: CMatrix,
}

impl QuadraticModel {
    /// Validates and stores the pair. `V` is symmetrized exactly after the
    /// symmetry check so that `V - V^T` vanishes bit for bit.
    pub fn new(a: RMatrix, v: CMatrix) -> Result<Self> {
        let n = a.nrows();
        if !a.is_square() || v.nrows() != n || v.ncols() != n || n == 0 {
            return Err(ModelError::DimensionMismatch {
                a: n,
                v_rows: v.nrows(),
                v_cols: v.ncols(),
            });
        }
        let scale = 1.0_f64.max(max_abs(&v));
        let defect = max_abs(&(&v - v.transpose()));
        if defect > 1e-12 * scale {
            return Err(ModelError::NotSymmetric { defect });
        }
        let v = (&v + v.transpose()) * C64::new(0.5, 0.0);
        let re_v = v.map(|z| z.re);
        let min_eigenvalue = re_v
            .clone()
            .symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eigenvalue < -1e-12 * scale {
            return Err(ModelError::NotAccretive { min_eigenvalue });
        }
        Ok(Self { a, v })
    }

    /// Convenience constructor from row-major slices.
    pub fn from_rows(n: usize, a: &[f64], v: &[C64]) -> Result<Self> {
        Self::new(RMatrix::from_row_slice(n, n, a), CMatrix::from_row_slice(n, n, v))
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &RMatrix {
        &self.a
    }

    pub fn v(&self) -> &CMatrix {
        &self.v
    }

    /// `V₁ = Re V`
    pub fn v_re(&self) -> RMatrix {
        self.v.map(|z| z.re)
    }

    /// `V₂ = Im V`
    pub fn v_im(&self) -> RMatrix {
        self.v.map(|z| z.im)
    }

    pub fn antisymmetry_defect(&self) -> f64 {
        max_abs_real(&(&self.a + self.a.transpose()))
    }

    pub fn is_antisymmetric(&self) -> bool {
        self.antisymmetry_defect() <= 1e-12 * 1.0_f64.max(max_abs_real(&self.a))
    }

    fn require_antisymmetric(&self) -> Result<()> {
        if self.is_antisymmetric() {
            Ok(())
        } else {
            Err(ModelError::NotAntisymmetric {
                defect: self.antisymmetry_defect(),
            })
        }
    }

    /// Smallest singular value of `V`.
    pub fn v_sigma_min(&self) -> f64 {
        self.v
            .clone()
            .svd(false, false)
            .singular_values
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    /// Evaluates the symbol `q(y, η) = (η - Ay)² + ½ V y·y` at a real point.
    pub fn symbol(&self, y: &[f64], eta: &[f64]) -> C64 {
        let n = self.dim();
        let mut q = C64::default();
        for j in 0..n {
            let ay: f64 = (0..n).map(|k| self.a[(j, k)] * y[k]).sum();
            let d = eta[j] - ay;
            q += C64::new(d * d, 0.0);
        }
        for j in 0..n {
            for k in 0..n {
                q += self.v[(j, k)] * (0.5 * y[j] * y[k]);
            }
        }
        q
    }

    /// `T(λ) = λ² I + 2λA + V/2`
    pub fn pencil_at(&self, lambda: C64) -> CMatrix {
        let n = self.dim();
        let mut t = self.v.map(|z| z * 0.5);
        for j in 0..n {
            for k in 0..n {
                t[(j, k)] += 2.0 * lambda * self.a[(j, k)];
            }
            t[(j, j)] += lambda * lambda;
        }
        t
    }

    /// `∂_λ T(λ) = 2λ I + 2A`
    pub fn pencil_derivative_at(&self, lambda: C64) -> CMatrix {
        let n = self.dim();
        let mut d = self.a.map(|x| C64::new(2.0 * x, 0.0));
        for j in 0..n {
            d[(j, j)] += 2.0 * lambda;
        }
        d
    }
}

/// Symmetric part removed from `A` by [`antisymmetrize`].
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeRecord {
    pub removed: RMatrix,
}

/// Splits off the symmetric part of `A`.
///
/// `(D - Ax)²` and `(D - A_anti x)²` are conjugate through multiplication by
/// `exp(i S x·x / 2)`, so the spectrum is unchanged.
pub fn antisymmetrize(model: &QuadraticModel) -> (QuadraticModel, GaugeRecord) {
    let a = model.a();
    let s = (a + a.transpose()) * 0.5;
    let a_out = (a - a.transpose()) * 0.5;
    (
        QuadraticModel {
            a: a_out,
            v: model.v.clone(),
        },
        GaugeRecord { removed: s },
    )
}

/// Hamilton map `F = ½ H_q` of the quadratic symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonMap {
    pub f: CMatrix,
}

impl HamiltonMap {
    pub fn dim(&self) -> usize {
        self.f.nrows() / 2
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        dense_eigenvalues(&self.f)
    }
}

/// `F = [[-A, I], [A² - V/2, -A]]`; requires antisymmetric `A`.
pub fn hamilton_map(model: &QuadraticModel) -> Result<HamiltonMap> {
    model.require_antisymmetric()?;
    let n = model.dim();
    let a = crate::linalg::to_complex(model.a());
    let lower_left = &a * &a - model.v() * C64::new(0.5, 0.0);
    let mut f = CMatrix::zeros(2 * n, 2 * n);
    f.view_mut((0, 0), (n, n)).copy_from(&(-&a));
    f.view_mut((0, n), (n, n)).fill_with_identity();
    f.view_mut((n, 0), (n, n)).copy_from(&lower_left);
    f.view_mut((n, n), (n, n)).copy_from(&(-&a));
    Ok(HamiltonMap { f })
}

/// First companion linearization of `T`, acting on `[λx; x]`:
/// `C = [[-2A, -V/2], [I, 0]]`.
pub fn companion_matrix(model: &QuadraticModel) -> CMatrix {
    let n = model.dim();
    let mut c = CMatrix::zeros(2 * n, 2 * n);
    let a = model.a().map(|x| C64::new(-2.0 * x, 0.0));
    c.view_mut((0, 0), (n, n)).copy_from(&a);
    c.view_mut((0, n), (n, n))
        .copy_from(&(model.v() * C64::new(-0.5, 0.0)));
    c.view_mut((n, 0), (n, n)).fill_with_identity();
    c
}

/// Root of `det T(λ) = 0` with its algebraic multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PencilRoot {
    pub lambda: C64,
    pub multiplicity: usize,
}

/// All `2n` roots of the pencil, clustered by multiplicity.
///
/// Computed from the Hamilton map and, independently, from the companion
/// linearization; the two sets are paired greedily and must agree.
pub fn pencil_eigenvalues(model: &QuadraticModel) -> Result<Vec<PencilRoot>> {
    let from_f = hamilton_map(model)?.eigenvalues();
    let from_c = dense_eigenvalues(&companion_matrix(model));
    let pairs = greedy_match(&from_f, &from_c);
    let mut worst = 0.0_f64;
    for &(i, _, d) in &pairs {
        worst = worst.max(d / 1.0_f64.max(from_f[i].norm()));
    }
    if pairs.len() != from_f.len() || worst > CROSS_CHECK_TOL {
        return Err(ModelError::CrossCheckFailure { distance: worst });
    }
    if let Some(root) = from_f.iter().find(|z| z.im.abs() < REAL_AXIS_TOL) {
        return Err(ModelError::RealRoot { root: *root });
    }
    let mut roots: Vec<PencilRoot> = cluster(&from_f, CLUSTER_TOL)
        .into_iter()
        .map(|(lambda, multiplicity)| PencilRoot { lambda, multiplicity })
        .collect();
    roots.sort_by(|p, q| {
        p.lambda
            .im
            .total_cmp(&q.lambda.im)
            .then(p.lambda.re.total_cmp(&q.lambda.re))
    });
    Ok(roots)
}

/// The roots with `Im λ > 0`; their multiplicities must add up to `n`.
pub fn positive_half(roots: &[PencilRoot], n: usize) -> Result<Vec<PencilRoot>> {
    if let Some(r) = roots.iter().find(|r| r.lambda.im.abs() < REAL_AXIS_TOL) {
        return Err(ModelError::RealRoot { root: r.lambda });
    }
    let upper: Vec<PencilRoot> = roots.iter().filter(|r| r.lambda.im > 0.0).cloned().collect();
    let found: usize = upper.iter().map(|r| r.multiplicity).sum();
    if found != n {
        return Err(ModelError::CountMismatch { found, expected: n });
    }
    Ok(upper)
}

/// The `n` lattice generators `λ_j / i`, repeated with multiplicity.
pub fn generators(model: &QuadraticModel) -> Result<Vec<C64>> {
    let roots = pencil_eigenvalues(model)?;
    let upper = positive_half(&roots, model.dim())?;
    let mut g = Vec::with_capacity(model.dim());
    for r in upper {
        for _ in 0..r.multiplicity {
            g.push(r.lambda / crate::linalg::I);
        }
    }
    g.sort_by(|p, q| p.re.total_cmp(&q.re).then(p.im.total_cmp(&q.im)));
    Ok(g)
}

/// `(1/2πi) ∮ tr(T(λ)⁻¹ ∂_λ T(λ)) dλ` over `|λ - λ0| = radius` by the
/// trapezoidal rule, rounded to the nearest integer.
pub fn pencil_multiplicity_contour(
    model: &QuadraticModel,
    lambda0: C64,
    radius: f64,
    nodes: usize,
) -> Result<usize> {
    if radius <= 0.0 || nodes < 3 {
        return Err(ModelError::InvalidArgument(format!(
            "contour radius {radius} / nodes {nodes}"
        )));
    }
    for r in pencil_eigenvalues(model)? {
        let distance = ((r.lambda - lambda0).norm() - radius).abs();
        if distance < 0.1 * radius {
            return Err(ModelError::ContourTooClose {
                root: r.lambda,
                distance,
            });
        }
    }
    let value = contour_trace(model, lambda0, radius, nodes)?;
    let rounded = value.re.round();
    if (value - C64::new(rounded, 0.0)).norm() >= 1e-6 || rounded < 0.0 {
        return Err(ModelError::NonIntegerResidual { value });
    }
    Ok(rounded as usize)
}

pub(crate) fn contour_trace(model: &QuadraticModel, lambda0: C64, radius: f64, nodes: usize) -> Result<C64> {
    let mut acc = C64::default();
    for m in 0..nodes {
        let e = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * m as f64 / nodes as f64);
        let z = lambda0 + radius * e;
        let t = model.pencil_at(z);
        let dt = model.pencil_derivative_at(z);
        let sol = t.lu().solve(&dt).ok_or(ModelError::SingularPencil { node: z })?;
        acc += sol.trace() * radius * e;
    }
    Ok(acc / nodes as f64)
}

/// Multiplicity of the Hamilton-map root clusters inside `|λ - λ0| < radius`.
pub fn enclosed_multiplicity(roots: &[PencilRoot], lambda0: C64, radius: f64) -> usize {
    roots
        .iter()
        .filter(|r| (r.lambda - lambda0).norm() < radius)
        .map(|r| r.multiplicity)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn scalar(a: f64, v: C64) -> QuadraticModel {
        QuadraticModel::from_rows(1, &[a], &[v]).unwrap()
    }

    fn rotating(b: f64) -> QuadraticModel {
        QuadraticModel::from_rows(
            2,
            &[0.0, -b, b, 0.0],
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap()
    }

    #[test]
    fn constructor_rejects_bad_input() {
        assert!(matches!(
            QuadraticModel::from_rows(
                2,
                &[0.0; 4],
                &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]
            ),
            Err(ModelError::NotSymmetric { .. })
        ));
        assert!(matches!(
            QuadraticModel::from_rows(1, &[0.0], &[c(-1.0, 0.0)]),
            Err(ModelError::NotAccretive { .. })
        ));
    }

    #[test]
    fn antisymmetrize_examples() {
        let m = QuadraticModel::from_rows(
            2,
            &[0.0, 1.0, -1.0, 0.0],
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 1.0)],
        )
        .unwrap();
        let (out, g) = antisymmetrize(&m);
        assert_eq!(out, m);
        assert_eq!(g.removed, RMatrix::zeros(2, 2));

        let (out, g) = antisymmetrize(&scalar(3.0, c(1.0, 0.0)));
        assert_eq!(out.a()[(0, 0)], 0.0);
        assert_eq!(g.removed[(0, 0)], 3.0);
    }

    #[test]
    fn hamilton_map_examples() {
        let f = hamilton_map(&scalar(0.0, c(1.0, 0.0))).unwrap().f;
        assert_eq!(
            f,
            CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(-0.5, 0.0), c(0.0, 0.0)])
        );
        let f = hamilton_map(&scalar(0.0, c(0.0, 2.0))).unwrap().f;
        assert_eq!(
            f,
            CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(0.0, -1.0), c(0.0, 0.0)])
        );
        let m = QuadraticModel::from_rows(
            2,
            &[0.0, -0.5, 0.5, 0.0],
            &[c(2.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(2.0, 0.0)],
        )
        .unwrap();
        let f = hamilton_map(&m).unwrap().f;
        assert_eq!(f[(2, 0)], c(-1.25, 0.0));
        assert_eq!(f[(3, 3)], c(0.0, 0.0));
        assert_eq!(f[(2, 1)], c(0.0, 0.0));
        assert_eq!(f[(3, 1)], c(-1.25, 0.0));
        assert_eq!(f[(0, 1)], c(0.5, 0.0));
        assert_eq!(f[(0, 2)], c(1.0, 0.0));
    }

    #[test]
    fn hamilton_map_rejects_non_antisymmetric() {
        assert!(matches!(
            hamilton_map(&scalar(3.0, c(1.0, 0.0))),
            Err(ModelError::NotAntisymmetric { .. })
        ));
    }

    #[test]
    fn pencil_roots_of_harmonic_oscillator() {
        let roots = pencil_eigenvalues(&scalar(0.0, c(1.0, 0.0))).unwrap();
        let s = 0.5_f64.sqrt();
        assert_eq!(roots.len(), 2);
        assert!((roots[0].lambda - c(0.0, -s)).norm() < 1e-12);
        assert!((roots[1].lambda - c(0.0, s)).norm() < 1e-12);
        let upper = positive_half(&roots, 1).unwrap();
        assert_eq!(upper.len(), 1);
        assert!((upper[0].lambda - c(0.0, s)).norm() < 1e-12);
    }

    #[test]
    fn pencil_roots_of_rotated_oscillator() {
        // λ² = -i
        let roots = pencil_eigenvalues(&scalar(0.0, c(0.0, 2.0))).unwrap();
        let up = C64::from_polar(1.0, 3.0 * std::f64::consts::FRAC_PI_4);
        let down = C64::from_polar(1.0, -std::f64::consts::FRAC_PI_4);
        assert!(roots.iter().any(|r| (r.lambda - up).norm() < 1e-12));
        assert!(roots.iter().any(|r| (r.lambda - down).norm() < 1e-12));
        let upper = positive_half(&roots, 1).unwrap();
        assert!((upper[0].lambda - up).norm() < 1e-12);
    }

    #[test]
    fn pencil_roots_with_magnetic_rotation() {
        let g = generators(&rotating(0.5)).unwrap();
        let lo = 0.75_f64.sqrt() - 0.5;
        let hi = 0.75_f64.sqrt() + 0.5;
        assert!((g[0] - c(lo, 0.0)).norm() < 1e-12);
        assert!((g[1] - c(hi, 0.0)).norm() < 1e-12);
        assert!((lo - 0.3660254).abs() < 1e-7);
    }

    #[test]
    fn singular_v_is_a_real_root() {
        let m = QuadraticModel::from_rows(
            2,
            &[0.0; 4],
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
        )
        .unwrap();
        assert!(matches!(pencil_eigenvalues(&m), Err(ModelError::RealRoot { .. })));
    }

    #[test]
    fn positive_half_count_mismatch() {
        let roots = [PencilRoot {
            lambda: c(0.0, 1.0),
            multiplicity: 1,
        }];
        assert_eq!(
            positive_half(&roots, 2).unwrap_err(),
            ModelError::CountMismatch {
                found: 1,
                expected: 2
            }
        );
    }

    #[test]
    fn double_root_is_clustered() {
        let m = QuadraticModel::from_rows(
            2,
            &[0.0; 4],
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        let roots = pencil_eigenvalues(&m).unwrap();
        assert_eq!(roots.len(), 2);
        assert!(roots.iter().all(|r| r.multiplicity == 2));
    }

    #[test]
    fn contour_multiplicity_examples() {
        let s = 0.5_f64.sqrt();
        let osc = scalar(0.0, c(1.0, 0.0));
        assert_eq!(pencil_multiplicity_contour(&osc, c(0.0, s), 0.3, 128).unwrap(), 1);
        assert_eq!(
            pencil_multiplicity_contour(&osc, c(5.0, 5.0), 0.3, 128).unwrap(),
            0
        );
        let double = QuadraticModel::from_rows(
            2,
            &[0.0; 4],
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        assert_eq!(
            pencil_multiplicity_contour(&double, c(0.0, s), 0.3, 128).unwrap(),
            2
        );
        assert_eq!(
            pencil_multiplicity_contour(&double, c(0.0, 0.0), 3.0, 256).unwrap(),
            4
        );
    }

    #[test]
    fn contour_too_close_is_rejected() {
        let s = 0.5_f64.sqrt();
        let osc = scalar(0.0, c(1.0, 0.0));
        assert!(matches!(
            pencil_multiplicity_contour(&osc, c(0.0, s + 0.3), 0.3, 64),
            Err(ModelError::ContourTooClose { .. })
        ));
    }
}
