use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use serde::Serialize;

use super::{generators, ModelError, QuadraticModel, Result};
use crate::linalg::C64;

/// One point `Σ_j g_j (1 + 2ν_j)` of the spectrum of `Q`, `g_j = λ_j / i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelEigenvalue {
    pub value: C64,
    /// Lexicographically smallest index vector producing `value`.
    pub index: Vec<usize>,
    pub generators: Vec<C64>,
    pub multiplicity: usize,
}

fn reassemble(gens: &[C64], index: &[usize]) -> C64 {
    gens.iter()
        .zip(index)
        .map(|(g, &nu)| g * (1.0 + 2.0 * nu as f64))
        .sum()
}

struct Frontier {
    re: f64,
    index: Vec<usize>,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Frontier {}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Frontier {
    // reversed: BinaryHeap pops the smallest real part first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .re
            .total_cmp(&self.re)
            .then_with(|| other.index.cmp(&self.index))
    }
}

/// Lattice points with `Re μ <= re_bound`, sorted by real part, duplicates
/// merged with summed multiplicity.
pub fn model_spectrum(model: &QuadraticModel, re_bound: f64) -> Result<Vec<ModelEigenvalue>> {
    let gens = generators(model)?;
    let n = gens.len();
    let mut heap = BinaryHeap::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let origin = vec![0usize; n];
    heap.push(Frontier {
        re: reassemble(&gens, &origin).re,
        index: origin.clone(),
    });
    seen.insert(origin);
    let mut raw: Vec<(C64, Vec<usize>)> = Vec::new();
    // Re g_j > 0, so popped real parts are nondecreasing
    while let Some(Frontier { re, index }) = heap.pop() {
        if re > re_bound {
            break;
        }
        raw.push((reassemble(&gens, &index), index.clone()));
        for j in 0..n {
            let mut next = index.clone();
            next[j] += 1;
            if seen.insert(next.clone()) {
                heap.push(Frontier {
                    re: reassemble(&gens, &next).re,
                    index: next,
                });
            }
        }
    }
    if raw.is_empty() {
        return Err(ModelError::EmptyWindow { re_bound });
    }
    let mut merged: Vec<ModelEigenvalue> = Vec::new();
    for (value, index) in raw {
        let tol = 1e-10 * 1.0_f64.max(value.norm());
        let hit = merged
            .iter_mut()
            .rev()
            .take_while(|e| (e.value.re - value.re).abs() <= tol)
            .find(|e| (e.value - value).norm() <= tol);
        match hit {
            Some(e) => {
                e.multiplicity += 1;
                if index < e.index {
                    e.index = index;
                }
            }
            None => merged.push(ModelEigenvalue {
                value,
                index,
                generators: gens.clone(),
                multiplicity: 1,
            }),
        }
    }
    merged.sort_by(|p, q| {
        p.value
            .re
            .total_cmp(&q.value.re)
            .then(p.value.im.total_cmp(&q.value.im))
    });
    Ok(merged)
}

/// The `count` lattice points of smallest real part, repeated with
/// multiplicity.
pub fn lowest_points(model: &QuadraticModel, count: usize) -> Result<Vec<C64>> {
    let (mu0, tau0) = spectral_gap(model)?;
    let bound = mu0.re + tau0 * count.max(1) as f64;
    let mut pts: Vec<C64> = model_spectrum(model, bound)?
        .into_iter()
        .flat_map(|e| std::iter::repeat_n(e.value, e.multiplicity))
        .collect();
    pts.sort_by(|p, q| p.re.total_cmp(&q.re).then(p.im.total_cmp(&q.im)));
    pts.truncate(count);
    Ok(pts)
}

/// Bottom eigenvalue `μ₀ = Σ g_j` and the gap `τ₀ = 2 min_j Re g_j` to the
/// rest of the lattice.
pub fn spectral_gap(model: &QuadraticModel) -> Result<(C64, f64)> {
    let gens = generators(model)?;
    let mu0: C64 = gens.iter().sum();
    let tau0 = 2.0 * gens.iter().map(|g| g.re).fold(f64::INFINITY, f64::min);
    Ok((mu0, tau0))
}

/// Half-angle of the sector `|arg z| <= θ₀` containing the spectrum.
pub fn sector_angle(model: &QuadraticModel) -> Result<f64> {
    let gens = generators(model)?;
    let mut theta = 0.0_f64;
    for g in gens {
        let a = g.arg().abs();
        if a >= std::f64::consts::FRAC_PI_2 {
            return Err(ModelError::SectorViolation { generator: g });
        }
        theta = theta.max(a);
    }
    Ok(theta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_4, FRAC_PI_8, SQRT_2};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn scalar(v: C64) -> QuadraticModel {
        QuadraticModel::from_rows(1, &[0.0], &[v]).unwrap()
    }

    fn rotating() -> QuadraticModel {
        QuadraticModel::from_rows(
            2,
            &[0.0, -0.5, 0.5, 0.0],
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap()
    }

    #[test]
    fn oscillator_window() {
        let s = model_spectrum(&scalar(c(1.0, 0.0)), 3.0).unwrap();
        assert_eq!(s.len(), 2);
        assert!((s[0].value.re - 1.0 / SQRT_2).abs() < 1e-12);
        assert!((s[1].value.re - 3.0 / SQRT_2).abs() < 1e-12);
        assert_eq!(s[1].index, vec![1]);
    }

    #[test]
    fn rotated_oscillator_window() {
        let s = model_spectrum(&scalar(c(0.0, 2.0)), 2.5).unwrap();
        let w = C64::from_polar(1.0, FRAC_PI_4);
        assert_eq!(s.len(), 2);
        assert!((s[0].value - w).norm() < 1e-12);
        assert!((s[1].value - 3.0 * w).norm() < 1e-12);
    }

    #[test]
    fn magnetic_ground_state() {
        let s = model_spectrum(&rotating(), 2.0).unwrap();
        assert!((s[0].value - c(3.0_f64.sqrt(), 0.0)).norm() < 1e-12);
        assert_eq!(s[0].multiplicity, 1);
    }

    #[test]
    fn degenerate_generators_sum_multiplicities() {
        let m = QuadraticModel::from_rows(
            2,
            &[0.0; 4],
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        let s = model_spectrum(&m, 7.0 / SQRT_2).unwrap();
        let mults: Vec<usize> = s.iter().map(|e| e.multiplicity).collect();
        assert_eq!(mults, vec![1, 2, 3]);
        assert_eq!(s[1].index, vec![0, 1]);
    }

    #[test]
    fn empty_window_is_reported() {
        assert_eq!(
            model_spectrum(&scalar(c(1.0, 0.0)), 0.1).unwrap_err(),
            ModelError::EmptyWindow { re_bound: 0.1 }
        );
    }

    #[test]
    fn gaps() {
        let (mu0, tau0) = spectral_gap(&scalar(c(1.0, 0.0))).unwrap();
        assert!((mu0.re - 1.0 / SQRT_2).abs() < 1e-12);
        assert!((tau0 - SQRT_2).abs() < 1e-12);
        let (mu0, tau0) = spectral_gap(&scalar(c(0.0, 2.0))).unwrap();
        assert!((mu0 - C64::from_polar(1.0, FRAC_PI_4)).norm() < 1e-12);
        assert!((tau0 - SQRT_2).abs() < 1e-12);
        let (mu0, tau0) = spectral_gap(&rotating()).unwrap();
        assert!((mu0.re - 3.0_f64.sqrt()).abs() < 1e-12);
        assert!((tau0 - 0.7320508).abs() < 1e-7);
    }

    #[test]
    fn sectors() {
        assert!(sector_angle(&scalar(c(1.0, 0.0))).unwrap().abs() < 1e-12);
        assert!((sector_angle(&scalar(c(0.0, 2.0))).unwrap() - FRAC_PI_4).abs() < 1e-12);
        assert!((sector_angle(&scalar(c(2.0, 2.0))).unwrap() - FRAC_PI_8).abs() < 1e-12);
    }

    #[test]
    fn lowest_points_expand_multiplicity() {
        let m = QuadraticModel::from_rows(
            2,
            &[0.0; 4],
            &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
        )
        .unwrap();
        let p = lowest_points(&m, 4).unwrap();
        let want = [2.0, 4.0, 4.0, 6.0].map(|x| x / SQRT_2);
        for (z, w) in p.iter().zip(want) {
            assert!((z.re - w).abs() < 1e-12);
        }
    }
}
