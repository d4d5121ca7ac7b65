use serde::Serialize;

use super::{ModelError, QuadraticModel, Result};
use crate::linalg::{symmetric_null_space, RMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SingularMethod {
    ClosedForm,
    Iterative,
}

/// Orthonormal basis of the singular space `S ⊂ R^{2n}` in `(y, η)` order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SingularSpaceBasis {
    pub vectors: Vec<Vec<f64>>,
    pub method: SingularMethod,
}

impl SingularSpaceBasis {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_trivial(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Largest distance from a basis vector of either space to the span of
    /// the other (infinite when the dimensions differ).
    pub fn distance_to(&self, other: &SingularSpaceBasis) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        let one_way = |a: &SingularSpaceBasis, b: &SingularSpaceBasis| {
            a.vectors
                .iter()
                .map(|v| {
                    let mut r = v.clone();
                    for w in &b.vectors {
                        let c: f64 = w.iter().zip(&r).map(|(x, y)| x * y).sum();
                        for (ri, wi) in r.iter_mut().zip(w) {
                            *ri -= c * wi;
                        }
                    }
                    r.iter().map(|x| x * x).sum::<f64>().sqrt()
                })
                .fold(0.0, f64::max)
        };
        one_way(self, other).max(one_way(other, self))
    }
}

fn scale_of(m: &RMatrix) -> f64 {
    m.iter().map(|x| x.abs()).fold(1.0, f64::max)
}

fn columns_to_vectors(m: &RMatrix) -> Vec<Vec<f64>> {
    if m.ncols() == 0 {
        return Vec::new();
    }
    // re-orthonormalize through QR for a clean basis
    let q = m.clone().qr().q();
    (0..m.ncols())
        .map(|c| q.column(c).iter().cloned().collect())
        .collect()
}

/// `S = {(y, Ay) : V₁y·y = 0, V₂y = 0}`, by real linear algebra.
pub fn singular_space_closed_form(model: &QuadraticModel) -> Result<SingularSpaceBasis> {
    if !model.is_antisymmetric() {
        return Err(ModelError::NotAntisymmetric {
            defect: model.antisymmetry_defect(),
        });
    }
    let n = model.dim();
    let v1 = model.v_re();
    let v2 = model.v_im();
    let tol = 1e-10 * scale_of(&v1).max(scale_of(&v2));
    let k = symmetric_null_space(&v2, tol);
    let mut y_basis = RMatrix::zeros(n, 0);
    if k.ncols() > 0 {
        // V₁ ⪰ 0, so V₁y·y = 0 iff V₁y = 0 on ker V₂
        let restricted = k.transpose() * &v1 * &k;
        let z = symmetric_null_space(&restricted, tol);
        y_basis = &k * z;
    }
    let mut s = RMatrix::zeros(2 * n, y_basis.ncols());
    for c in 0..y_basis.ncols() {
        let y = y_basis.column(c);
        let ay = model.a() * y;
        for i in 0..n {
            s[(i, c)] = y[i];
            s[(n + i, c)] = ay[i];
        }
    }
    Ok(SingularSpaceBasis {
        vectors: columns_to_vectors(&s),
        method: SingularMethod::ClosedForm,
    })
}

/// Matrices of the real and imaginary parts of `q` as quadratic forms in
/// `Y = (y, η)`.
pub fn symbol_forms(model: &QuadraticModel) -> (RMatrix, RMatrix) {
    let n = model.dim();
    let a = model.a();
    let mut re = RMatrix::zeros(2 * n, 2 * n);
    let top_left = a.transpose() * a + model.v_re() * 0.5;
    re.view_mut((0, 0), (n, n)).copy_from(&top_left);
    re.view_mut((0, n), (n, n)).copy_from(&(-a.transpose()));
    re.view_mut((n, 0), (n, n)).copy_from(&(-a));
    re.view_mut((n, n), (n, n)).fill_with_identity();
    let mut im = RMatrix::zeros(2 * n, 2 * n);
    im.view_mut((0, 0), (n, n)).copy_from(&(model.v_im() * 0.5));
    (re, im)
}

/// Matrices `G_k` of the quadratic forms `Y ↦ H^k_{Im q} Re q (Y)`,
/// `k = 0..=kmax`.
pub fn flow_derivative_forms(model: &QuadraticModel, kmax: usize) -> Vec<RMatrix> {
    let n = model.dim();
    let (re, im) = symbol_forms(model);
    let mut j = RMatrix::zeros(2 * n, 2 * n);
    j.view_mut((0, n), (n, n)).fill_with_identity();
    j.view_mut((n, 0), (n, n)).fill_with_identity();
    j.view_mut((n, 0), (n, n)).scale_mut(-1.0);
    // Hamilton field of Im q is Y ↦ K Y
    let k = j * &im * 2.0;
    let mut forms = vec![re];
    for _ in 0..kmax {
        let g = forms.last().unwrap();
        let next = g * &k + k.transpose() * g;
        forms.push(next);
    }
    forms
}

/// `S` from its definition: nested kernels of the flow-derivative forms.
///
/// On the subspace where the first `j - 1` flow derivatives of `Re q`
/// vanish, the form of order `2j` is positive semidefinite and its kernel is
/// the next subspace. `max_k` bounds `j`; the chain stops early once it
/// stabilizes. The result must coincide with the closed form.
pub fn singular_space_iterative(model: &QuadraticModel, max_k: usize) -> Result<SingularSpaceBasis> {
    if !model.is_antisymmetric() {
        return Err(ModelError::NotAntisymmetric {
            defect: model.antisymmetry_defect(),
        });
    }
    let n = model.dim();
    if max_k + 1 < 2 * n {
        return Err(ModelError::InvalidArgument(format!(
            "max_k = {max_k} below 2n - 1 = {}",
            2 * n - 1
        )));
    }
    let forms = flow_derivative_forms(model, 2 * max_k);
    let mut w = symmetric_null_space(&forms[0], 1e-10 * scale_of(&forms[0]));
    for j in 1..=max_k {
        if w.ncols() == 0 {
            break;
        }
        let g = &forms[2 * j];
        let restricted = w.transpose() * g * &w;
        let z = symmetric_null_space(&restricted, 1e-9 * scale_of(g));
        let next = &w * z;
        let stable = next.ncols() == w.ncols();
        w = next;
        if stable {
            break;
        }
    }
    let basis = SingularSpaceBasis {
        vectors: columns_to_vectors(&w),
        method: SingularMethod::Iterative,
    };
    let closed = singular_space_closed_form(model)?;
    let d = basis.distance_to(&closed);
    if d > 1e-10 {
        return Err(ModelError::MismatchWithClosedForm {
            detail: format!(
                "dims {} vs {}, subspace distance {d:e}",
                basis.dim(),
                closed.dim()
            ),
        });
    }
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn diag2(v: [C64; 2]) -> QuadraticModel {
        QuadraticModel::from_rows(2, &[0.0; 4], &[v[0], c(0.0, 0.0), c(0.0, 0.0), v[1]]).unwrap()
    }

    #[test]
    fn invertible_v_gives_trivial_space() {
        let m = diag2([c(1.0, 0.0), c(0.0, 1.0)]);
        assert!(singular_space_closed_form(&m).unwrap().is_trivial());
        assert!(singular_space_iterative(&m, 3).unwrap().is_trivial());
    }

    #[test]
    fn degenerate_direction_is_found() {
        let m = diag2([c(1.0, 0.0), c(0.0, 0.0)]);
        let s = singular_space_closed_form(&m).unwrap();
        assert_eq!(s.dim(), 1);
        let v = &s.vectors[0];
        assert!((v[1].abs() - 1.0).abs() < 1e-14);
        assert!(v[0].abs() + v[2].abs() + v[3].abs() < 1e-14);
        let it = singular_space_iterative(&m, 3).unwrap();
        assert!(it.distance_to(&s) < 1e-12);
        assert!(m.symbol(&[v[0], v[1]], &[v[2], v[3]]).norm() < 1e-14);
    }

    #[test]
    fn flow_derivatives_match_closed_expressions() {
        let m = QuadraticModel::from_rows(
            2,
            &[0.0, 0.7, -0.7, 0.0],
            &[c(1.0, 0.3), c(0.2, -0.5), c(0.2, -0.5), c(0.5, 1.1)],
        )
        .unwrap();
        let forms = flow_derivative_forms(&m, 5);
        let v2 = m.v_im();
        let a = m.a();
        let y = nalgebra::DVector::from_vec(vec![0.3, -1.2]);
        let eta = nalgebra::DVector::from_vec(vec![0.8, 0.1]);
        let big = nalgebra::DVector::from_vec(vec![y[0], y[1], eta[0], eta[1]]);
        let eval = |g: &RMatrix| (big.transpose() * g * &big)[(0, 0)];
        let v2y = &v2 * &y;
        let h1 = -2.0 * v2y.dot(&(&eta - a * &y));
        let h2 = 2.0 * v2y.norm_squared();
        assert!((eval(&forms[1]) - h1).abs() < 1e-12);
        assert!((eval(&forms[2]) - h2).abs() < 1e-12);
        for g in &forms[3..] {
            assert!(eval(g).abs() < 1e-12);
        }
    }

    #[test]
    fn small_max_k_is_rejected() {
        let m = diag2([c(1.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            singular_space_iterative(&m, 2),
            Err(ModelError::InvalidArgument(_))
        ));
    }
}
