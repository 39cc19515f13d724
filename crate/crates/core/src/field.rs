//! Boundary and interior fields on the polar reference grid.

use serde::{Deserialize, Serialize};

/// Scalar values collocated with the boundary nodes of a curve.
pub type BoundaryField = Vec<f64>;

/// 2-vector values collocated with the boundary nodes of a curve.
pub type BoundaryVectorField = Vec<[f64; 2]>;

/// Reference grid `(s_i, φ_j)` on the unit disk.
///
/// Ring `i = 0` is the origin (one value shared across all `φ_j`), ring
/// `n_s - 1` is the boundary `s = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefGrid {
    pub n_s: usize,
    pub n_phi: usize,
}

impl RefGrid {
    pub fn new(n_s: usize, n_phi: usize) -> Self {
        assert!(n_s >= 3, "need at least origin, one interior ring and the boundary");
        assert!(n_phi >= 4);
        Self { n_s, n_phi }
    }

    /// Index of the boundary ring.
    pub fn boundary_ring(&self) -> usize {
        self.n_s - 1
    }

    /// Radial spacing in `s`.
    pub fn h(&self) -> f64 {
        1.0 / (self.n_s - 1) as f64
    }

    pub fn s(&self, i: usize) -> f64 {
        i as f64 * self.h()
    }

    pub fn dphi(&self) -> f64 {
        std::f64::consts::TAU / self.n_phi as f64
    }

    pub fn phi(&self, j: usize) -> f64 {
        j as f64 * self.dphi()
    }

    pub fn len(&self) -> usize {
        self.n_s * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_phi + j
    }
}

/// Values on a [`RefGrid`], row-major `(ring, angle)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorField<T> {
    pub grid: RefGrid,
    pub values: Vec<T>,
}

impl<T: Copy> InteriorField<T> {
    pub fn filled(grid: RefGrid, value: T) -> Self {
        Self { grid, values: vec![value; grid.len()] }
    }

    pub fn from_fn(grid: RefGrid, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..grid.n_s {
            for j in 0..grid.n_phi {
                values.push(f(i, j));
            }
        }
        Self { grid, values }
    }

    pub fn at(&self, i: usize, j: usize) -> T {
        self.values[self.grid.index(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: T) {
        let k = self.grid.index(i, j);
        self.values[k] = v;
    }

    pub fn ring(&self, i: usize) -> &[T] {
        let n = self.grid.n_phi;
        &self.values[i * n..(i + 1) * n]
    }

    pub fn boundary(&self) -> Vec<T> {
        self.ring(self.grid.boundary_ring()).to_vec()
    }
}

impl InteriorField<f64> {
    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}
