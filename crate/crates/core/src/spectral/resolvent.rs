use rayon::prelude::*;
use serde::Serialize;

use super::{Result, ShiftInvert, SpectralError};
use crate::discretize::GridOperator;
use crate::linalg::{lanczos_max_eigenvalue, random_vector, CMatrix, C64};
use crate::oracles::DENSE_LIMIT;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResolventMethod {
    /// `1/σ_min(M - z)` from a dense SVD.
    ExactSmallestSingular,
    /// Lanczos on `(M - z)^{-1} (M - z)^{-H}` with the banded LU.
    Iterative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolventSample {
    pub z: C64,
    /// `‖(M - z)^{-1}‖`; infinite when `M - z` could not be factored.
    pub norm: f64,
    pub method: ResolventMethod,
}

/// `‖(M - z)^{-1}‖` by Lanczos on the Hermitian operator
/// `(M - z)^{-1} (M - z)^{-H}`, whose top eigenvalue is the squared norm.
pub fn resolvent_norm(op: &GridOperator, z: C64) -> Result<ResolventSample> {
    let si = match ShiftInvert::new(op, z) {
        Ok(s) => s,
        Err(SpectralError::FactorizationSingular { .. }) => {
            return Ok(ResolventSample {
                z,
                norm: f64::INFINITY,
                method: ResolventMethod::Iterative,
            })
        }
        Err(e) => return Err(e),
    };
    let mut g = rng::stream(0, "resolvent_norm");
    let start = random_vector(op.dim(), &mut g);
    let top = lanczos_max_eigenvalue(&start, 120, 1e-10, |x| si.solve(&si.solve_adjoint(x)));
    Ok(ResolventSample {
        z,
        norm: top.max(0.0).sqrt(),
        method: ResolventMethod::Iterative,
    })
}

/// `1/σ_min(M - z)` from a dense SVD; only for `dim <= DENSE_LIMIT`.
pub fn resolvent_norm_dense(op: &GridOperator, z: C64) -> Result<ResolventSample> {
    if op.dim() > DENSE_LIMIT {
        return Err(SpectralError::DimensionTooLarge { dim: op.dim() });
    }
    let mut m: CMatrix = op.matrix.to_dense();
    for i in 0..m.nrows() {
        m[(i, i)] -= z;
    }
    let smin = m.singular_values().iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(ResolventSample {
        z,
        norm: if smin > 0.0 { 1.0 / smin } else { f64::INFINITY },
        method: ResolventMethod::ExactSmallestSingular,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineSup {
    pub a: f64,
    pub samples: Vec<ResolventSample>,
    /// `sup h ‖(M - z)^{-1}‖` over the samples.
    pub sup_scaled: f64,
}

/// Samples `z = h (a + i s)` for `s` evenly spaced over `im_range` (in units
/// of `h`) and returns the largest `h ‖(M - z)^{-1}‖`.
///
/// `lattice` holds the model eigenvalues `μ`; the line must stay at least
/// `0.05` away from every `Re μ`.
pub fn line_sup_resolvent(
    op: &GridOperator,
    a: f64,
    im_range: (f64, f64),
    samples: usize,
    lattice: &[C64],
) -> Result<LineSup> {
    if let Some(mu) = lattice.iter().find(|mu| (a - mu.re).abs() <= 0.05) {
        return Err(SpectralError::Precondition(format!(
            "line Re z = {a} h is within 0.05 of Re mu = {}",
            mu.re
        )));
    }
    if samples < 2 || im_range.0 >= im_range.1 {
        return Err(SpectralError::Precondition(format!(
            "{samples} samples over {im_range:?}"
        )));
    }
    let h = op.h;
    let zs: Vec<C64> = (0..samples)
        .map(|k| {
            let s = im_range.0 + (im_range.1 - im_range.0) * k as f64 / (samples - 1) as f64;
            C64::new(a, s) * h
        })
        .collect();
    let samples = zs
        .par_iter()
        .map(|&z| resolvent_norm(op, z))
        .collect::<Result<Vec<_>>>()?;
    let sup_scaled = samples.iter().map(|s| h * s.norm).fold(0.0, f64::max);
    Ok(LineSup {
        a,
        samples,
        sup_scaled,
    })
}

/// Lower limit of the parabolic probes: `s >= PARABOLIC_C h`.
pub const PARABOLIC_C: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParabolicSample {
    pub h: f64,
    pub s: f64,
    pub sample: ResolventSample,
    /// `‖(M - is)^{-1}‖ h^{2/3} s^{1/3}`
    pub compensated: f64,
}

/// Resolvent norms on the imaginary axis, `z = is`.
pub fn parabolic_probe(op: &GridOperator, s_list: &[f64]) -> Result<Vec<ParabolicSample>> {
    let h = op.h;
    if let Some(s) = s_list.iter().find(|&&s| s < PARABOLIC_C * h * (1.0 - 1e-12)) {
        return Err(SpectralError::Precondition(format!(
            "s = {s} below {PARABOLIC_C} h = {}",
            PARABOLIC_C * h
        )));
    }
    s_list
        .par_iter()
        .map(|&s| {
            let sample = resolvent_norm(op, C64::new(0.0, s))?;
            Ok(ParabolicSample {
                h,
                s,
                sample,
                compensated: sample.norm * h.powf(2.0 / 3.0) * s.cbrt(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::{assemble, Grid};
    use crate::potential::{PotentialSpec, PotentialTerm};

    fn oscillator(coeff: C64, h: f64, n: usize) -> GridOperator {
        let spec = PotentialSpec::electric(
            1,
            vec![PotentialTerm::Monomial {
                coeff,
                powers: vec![2],
            }],
        )
        .unwrap();
        assemble(&spec, Grid::new(1, 6.0, n).unwrap(), h).unwrap()
    }

    fn real_spectrum(op: &GridOperator) -> Vec<f64> {
        let re = op.matrix.to_dense().map(|z| z.re);
        re.symmetric_eigenvalues().iter().cloned().collect()
    }

    #[test]
    fn selfadjoint_norm_is_inverse_distance() {
        let op = oscillator(C64::new(1.0, 0.0), 0.1, 300);
        let spec = real_spectrum(&op);
        for z in [C64::new(0.0, 0.1), C64::new(0.2, 0.05), C64::new(0.45, -0.3)] {
            let dist = spec.iter().map(|&l| (z - l).norm()).fold(f64::INFINITY, f64::min);
            let it = resolvent_norm(&op, z).unwrap();
            assert!((it.norm * dist - 1.0).abs() < 1e-2, "{z}: {}", it.norm * dist);
        }
    }

    #[test]
    fn iterative_matches_dense() {
        let op = oscillator(C64::new(1.0, 1.0), 0.1, 300);
        for z in [C64::new(0.2, 0.0), C64::new(0.0, 1.0), C64::new(0.3, 0.3)] {
            let it = resolvent_norm(&op, z).unwrap();
            let de = resolvent_norm_dense(&op, z).unwrap();
            assert_eq!(de.method, ResolventMethod::ExactSmallestSingular);
            assert!(
                (it.norm / de.norm - 1.0).abs() < 1e-2,
                "{z}: {} vs {}",
                it.norm,
                de.norm
            );
        }
    }

    #[test]
    fn line_and_parabolic_preconditions() {
        let op = oscillator(C64::new(1.0, 1.0), 0.1, 300);
        let mu0 = C64::new(1.0, 1.0).sqrt();
        let lattice = [mu0, mu0 * 3.0];
        assert!(matches!(
            line_sup_resolvent(&op, mu0.re, (-5.0, 5.0), 5, &lattice),
            Err(SpectralError::Precondition(_))
        ));
        let line = line_sup_resolvent(&op, 2.0, (-5.0, 5.0), 5, &lattice).unwrap();
        assert!(line.sup_scaled.is_finite() && line.sup_scaled > 0.0);
        assert!(parabolic_probe(&op, &[0.5]).is_err());
        let p = parabolic_probe(&op, &[1.0, 2.0]).unwrap();
        assert!(p.iter().all(|s| s.compensated.is_finite()));
    }
}
