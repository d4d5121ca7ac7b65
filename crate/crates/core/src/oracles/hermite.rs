use std::collections::BTreeMap;

use serde::Serialize;

use super::{OracleError, Result};
use crate::linalg::{dense_eigenvalues, CMatrix, C64};
use crate::model::QuadraticModel;

type Index = Vec<u16>;
type State = BTreeMap<Index, C64>;

/// Tensor Hermite basis of total degree `<= max_degree` in `dim` variables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HermiteTruncation {
    pub dim: usize,
    pub max_degree: usize,
    pub basis_size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GalerkinSpectrum {
    pub truncation: HermiteTruncation,
    /// The `trusted` eigenvalues of smallest modulus sorted by real part,
    /// then the rest sorted by real part.
    pub eigenvalues: Vec<C64>,
    /// Number of leading eigenvalues considered converged.
    pub trusted: usize,
}

impl GalerkinSpectrum {
    pub fn trusted_eigenvalues(&self) -> &[C64] {
        &self.eigenvalues[..self.trusted]
    }
}

fn multi_indices(dim: usize, max_degree: usize) -> Vec<Index> {
    let mut out = vec![Vec::new()];
    for _ in 0..dim {
        let mut next = Vec::new();
        for prefix in &out {
            let used: usize = prefix.iter().map(|&a| a as usize).sum();
            for a in 0..=(max_degree - used) {
                let mut p = prefix.clone();
                p.push(a as u16);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// `c_low a_j ψ + c_high a_j^† ψ` with `a φ_k = √k φ_{k-1}`,
/// `a^† φ_k = √(k+1) φ_{k+1}`.
fn ladder(state: &State, j: usize, c_low: C64, c_high: C64) -> State {
    let mut out = State::new();
    for (idx, &c) in state {
        let k = idx[j];
        if k > 0 {
            let mut down = idx.clone();
            down[j] -= 1;
            *out.entry(down).or_default() += c * c_low * (k as f64).sqrt();
        }
        let mut up = idx.clone();
        up[j] += 1;
        *out.entry(up).or_default() += c * c_high * ((k + 1) as f64).sqrt();
    }
    out
}

fn add_scaled(acc: &mut State, s: &State, alpha: C64) {
    for (k, &v) in s {
        *acc.entry(k.clone()).or_default() += alpha * v;
    }
}

/// `x_j = (a + a^†)/√2`
fn position(state: &State, j: usize) -> State {
    let c = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    ladder(state, j, c, c)
}

/// `D_j = -i ∂_j`, `∂_j = (a - a^†)/√2`
fn momentum(state: &State, j: usize) -> State {
    let c = std::f64::consts::FRAC_1_SQRT_2;
    ladder(state, j, C64::new(0.0, -c), C64::new(0.0, c))
}

/// `(D_j - (Ax)_j) ψ`
fn covariant(model: &QuadraticModel, state: &State, j: usize) -> State {
    let mut out = momentum(state, j);
    for k in 0..model.dim() {
        let a = model.a()[(j, k)];
        if a != 0.0 {
            add_scaled(&mut out, &position(state, k), C64::new(-a, 0.0));
        }
    }
    out
}

fn apply_q(model: &QuadraticModel, state: &State) -> State {
    let n = model.dim();
    let mut out = State::new();
    for j in 0..n {
        let w = covariant(model, state, j);
        add_scaled(&mut out, &covariant(model, &w, j), C64::new(1.0, 0.0));
    }
    for j in 0..n {
        let xj = position(state, j);
        for k in 0..n {
            let v = model.v()[(j, k)];
            if v != C64::default() {
                add_scaled(&mut out, &position(&xj, k), v * 0.5);
            }
        }
    }
    out
}

/// Galerkin eigenvalues of `Q` in the unit-frequency Hermite basis.
///
/// Matrix elements come from exact ladder algebra. `Q` is even, so the
/// basis splits into two parity blocks that are diagonalized separately.
pub fn hermite_galerkin_spectrum(model: &QuadraticModel, max_degree: usize) -> Result<GalerkinSpectrum> {
    if !model.is_antisymmetric() {
        return Err(OracleError::NotAntisymmetric);
    }
    if max_degree < 8 {
        return Err(OracleError::InvalidArgument(format!(
            "max degree {max_degree} < 8"
        )));
    }
    let basis = multi_indices(model.dim(), max_degree);
    let mut eigenvalues = Vec::with_capacity(basis.len());
    for parity in 0..2u16 {
        let block: Vec<&Index> = basis
            .iter()
            .filter(|idx| idx.iter().sum::<u16>() % 2 == parity)
            .collect();
        let pos: BTreeMap<&Index, usize> = block.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        let mut m = CMatrix::zeros(block.len(), block.len());
        for (col, idx) in block.iter().enumerate() {
            let mut s = State::new();
            s.insert((*idx).clone(), C64::new(1.0, 0.0));
            for (k, v) in apply_q(model, &s) {
                if let Some(&row) = pos.get(&k) {
                    m[(row, col)] = v;
                }
            }
        }
        eigenvalues.extend(dense_eigenvalues(&m));
    }
    // truncation error grows with |λ|; spurious eigenvalues of the
    // non-normal blocks can have small real part but large modulus
    eigenvalues.sort_by(|p, q| p.norm().total_cmp(&q.norm()));
    let basis_size = basis.len();
    let trusted = basis_size.div_ceil(4);
    let by_re = |p: &C64, q: &C64| p.re.total_cmp(&q.re).then(p.im.total_cmp(&q.im));
    eigenvalues[..trusted].sort_by(by_re);
    eigenvalues[trusted..].sort_by(by_re);
    Ok(GalerkinSpectrum {
        truncation: HermiteTruncation {
            dim: model.dim(),
            max_degree,
            basis_size,
        },
        eigenvalues,
        trusted,
    })
}
