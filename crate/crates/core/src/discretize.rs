//! Finite-difference discretization of `P = (hD - A)² + V` on a Dirichlet box.
//!
//! The magnetic first-order term `ih(A∂ + ∂A)` is built from edge midpoint
//! averages of `A`, which makes the kinetic part exactly Hermitian and, edge
//! by edge, positive semidefinite. The real part of the matrix is then
//! accretive whenever `Re V >= 0` at the nodes.

use serde::Serialize;

use crate::linalg::{CsrMatrix, LinearOp, C64, I};
use crate::potential::PotentialSpec;

/// Largest per-dimension resolution accepted in 2D.
pub const MAX_POINTS_2D: usize = 256;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiscretizeError {
    #[error("potential has dimension {spec}, grid has dimension {grid}")]
    DimensionMismatch { spec: usize, grid: usize },
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("h = {0} outside (0, 1]")]
    InvalidH(f64),
}

/// Interior nodes `x_i = -L + (i + 1) δ`, `δ = 2L/(N + 1)`, in each dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub dim: usize,
    pub half_width: f64,
    pub points_per_dim: usize,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, points_per_dim: usize) -> Result<Self, DiscretizeError> {
        if !(1..=2).contains(&dim) {
            return Err(DiscretizeError::InvalidGrid(format!("dimension {dim}")));
        }
        if points_per_dim < 16 {
            return Err(DiscretizeError::InvalidGrid(format!("N = {points_per_dim} < 16")));
        }
        if dim == 2 && points_per_dim > MAX_POINTS_2D {
            return Err(DiscretizeError::InvalidGrid(format!(
                "N = {points_per_dim} > {MAX_POINTS_2D} in 2D"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(DiscretizeError::InvalidGrid(format!("L = {half_width}")));
        }
        Ok(Self {
            dim,
            half_width,
            points_per_dim,
        })
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.points_per_dim + 1) as f64
    }

    pub fn len(&self) -> usize {
        self.points_per_dim.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn coordinate(&self, i: usize) -> f64 {
        -self.half_width + (i + 1) as f64 * self.spacing()
    }

    /// Multi-index of a node; the first coordinate runs fastest.
    pub fn multi_index(&self, idx: usize) -> [usize; 2] {
        let n = self.points_per_dim;
        [idx % n, idx / n]
    }

    pub fn node(&self, idx: usize) -> Vec<f64> {
        let m = self.multi_index(idx);
        (0..self.dim).map(|j| self.coordinate(m[j])).collect()
    }

    /// Flat index of the neighbor one step up along `axis`, if interior.
    fn neighbor(&self, idx: usize, axis: usize) -> Option<usize> {
        let n = self.points_per_dim;
        let m = self.multi_index(idx);
        if m[axis] + 1 < n {
            Some(idx + if axis == 0 { 1 } else { n })
        } else {
            None
        }
    }
}

/// The assembled matrix `M ≈ P` with the data it came from.
#[derive(Debug, Clone)]
pub struct GridOperator {
    pub h: f64,
    pub grid: Grid,
    pub spec: PotentialSpec,
    pub matrix: CsrMatrix,
    /// Set when `δ² > h/4`: the grid under-resolves the `√h` length scale.
    pub resolution_warning: Option<String>,
}

impl GridOperator {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `‖M‖₁`, the scale used by relative tolerances.
    pub fn scale(&self) -> f64 {
        self.matrix.norm1()
    }
}

impl LinearOp for GridOperator {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }

    fn apply(&self, x: &[C64]) -> Vec<C64> {
        self.matrix.matvec(x)
    }

    fn apply_adjoint(&self, x: &[C64]) -> Vec<C64> {
        self.matrix.matvec_adjoint(x)
    }
}

pub fn assemble(spec: &PotentialSpec, grid: Grid, h: f64) -> Result<GridOperator, DiscretizeError> {
    if spec.dim() != grid.dim {
        return Err(DiscretizeError::DimensionMismatch {
            spec: spec.dim(),
            grid: grid.dim,
        });
    }
    if !(h > 0.0 && h <= 1.0) {
        return Err(DiscretizeError::InvalidH(h));
    }
    let delta = grid.spacing();
    let size = grid.len();
    let kin = h * h / (delta * delta);
    let mut trip: Vec<(usize, usize, C64)> = Vec::with_capacity(size * (1 + 4 * grid.dim));
    let nodes: Vec<Vec<f64>> = (0..size).map(|i| grid.node(i)).collect();
    let a_nodes: Vec<Vec<f64>> = nodes.iter().map(|x| spec.magnetic_potential(x)).collect();
    for p in 0..size {
        let a2: f64 = a_nodes[p].iter().map(|a| a * a).sum();
        let diag = C64::new(2.0 * kin * grid.dim as f64 + a2, 0.0) + spec.potential(&nodes[p]);
        trip.push((p, p, diag));
        for axis in 0..grid.dim {
            if let Some(q) = grid.neighbor(p, axis) {
                let a_mid = 0.5 * (a_nodes[p][axis] + a_nodes[q][axis]);
                let mag = I * (h * a_mid / delta);
                trip.push((p, q, C64::new(-kin, 0.0) + mag));
                trip.push((q, p, C64::new(-kin, 0.0) - mag));
            }
        }
    }
    let resolution_warning = (delta * delta > h / 4.0).then(|| {
        format!(
            "grid spacing {delta:.4} exceeds 0.5 sqrt(h) = {:.4}",
            0.5 * h.sqrt()
        )
    });
    Ok(GridOperator {
        h,
        grid,
        spec: spec.clone(),
        matrix: CsrMatrix::from_triplets(size, trip),
        resolution_warning,
    })
}
