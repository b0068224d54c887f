//! Symmetric matrices in scaled svec form.
//!
//! A symmetric `d x d` matrix is stored as its lower triangle, column-major,
//! with off-diagonal entries scaled by sqrt(2). Under that scaling the inner
//! product of two stored vectors equals `trace(A * B)`, which keeps all conic
//! bookkeeping as plain dot products.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;

pub const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Number of scalar entries needed for a `dim x dim` symmetric matrix.
pub fn svec_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

/// Position of entry (i, j), i >= j, in lower-triangle column-major order.
pub fn svec_index(dim: usize, i: usize, j: usize) -> usize {
    debug_assert!(i >= j && i < dim);
    // offset of column j = d + (d-1) + ... + (d-j+1)
    j * dim - j * (j + 1) / 2 + i
}

/// A real symmetric matrix in scaled svec storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymMat {
    dim: usize,
    entries: Vec<f64>,
}

impl SymMat {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![0.0; svec_len(dim)] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut s = Self::zeros(dim);
        for i in 0..dim {
            s.entries[svec_index(dim, i, i)] = 1.0;
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Raw svec storage, mutable. Callers must keep the sqrt(2) convention.
    pub fn entries_mut(&mut self) -> &mut [f64] {
        &mut self.entries
    }

    pub fn from_svec(dim: usize, entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), svec_len(dim), "svec length mismatch");
        Self { dim, entries }
    }

    /// Entry (i, j) of the materialized matrix.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i >= j { (i, j) } else { (j, i) };
        let v = self.entries[svec_index(self.dim, a, b)];
        if a == b {
            v
        } else {
            v / SQRT2
        }
    }

    /// Set entry (i, j) (and its mirror) of the materialized matrix.
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let (a, b) = if i >= j { (i, j) } else { (j, i) };
        let idx = svec_index(self.dim, a, b);
        self.entries[idx] = if a == b { value } else { value * SQRT2 };
    }

    /// Add `value` to entry (i, j) (and its mirror).
    pub fn add(&mut self, i: usize, j: usize, value: f64) {
        let (a, b) = if i >= j { (i, j) } else { (j, i) };
        let idx = svec_index(self.dim, a, b);
        self.entries[idx] += if a == b { value } else { value * SQRT2 };
    }

    pub fn scale(&mut self, factor: f64) {
        for e in &mut self.entries {
            *e *= factor;
        }
    }

    /// trace(self * other); a plain dot product in svec form.
    pub fn inner(&self, other: &SymMat) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        self.entries
            .iter()
            .zip(other.entries.iter())
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.entries[svec_index(self.dim, i, i)]).sum()
    }

    pub fn materialize(&self) -> DMatrix<f64> {
        let d = self.dim;
        DMatrix::from_fn(d, d, |i, j| self.get(i, j))
    }
}

/// Symmetry-checked conversion of a dense matrix into svec form.
///
/// The input must be symmetric to 1e-10 relative tolerance; small asymmetry
/// from floating-point arithmetic is averaged away.
pub fn svec(m: &DMatrix<f64>) -> Result<SymMat, CoreError> {
    if m.nrows() != m.ncols() {
        return Err(CoreError::AsymmetricInput {
            max_violation: f64::INFINITY,
        });
    }
    let d = m.nrows();
    let scale = m.amax().max(1.0);
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..i {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    if worst > 1e-10 * scale {
        return Err(CoreError::AsymmetricInput { max_violation: worst / scale });
    }
    let mut s = SymMat::zeros(d);
    for j in 0..d {
        for i in j..d {
            let v = if i == j { m[(i, i)] } else { 0.5 * (m[(i, j)] + m[(j, i)]) };
            s.set(i, j, v);
        }
    }
    Ok(s)
}

/// Smallest eigenvalue of a dense symmetric matrix.
pub fn min_eig(m: &DMatrix<f64>) -> f64 {
    let es = m.clone().symmetric_eigen();
    es.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Largest eigenvalue of a dense symmetric matrix.
pub fn max_eig(m: &DMatrix<f64>) -> f64 {
    let es = m.clone().symmetric_eigen();
    es.eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    #[test]
    fn svec_identity_2x2() {
        let s = svec(&DMatrix::identity(2, 2)).unwrap();
        assert_eq!(s.entries(), &[1.0, 0.0, 1.0]);
    }

    #[test]
    fn svec_offdiag_scaling() {
        let m = dmatrix![0.0, 1.0; 1.0, 0.0];
        let s = svec(&m).unwrap();
        assert_abs_diff_eq!(s.entries()[0], 0.0);
        assert_abs_diff_eq!(s.entries()[1], SQRT2, epsilon = 1e-15);
        assert_abs_diff_eq!(s.entries()[2], 0.0);
    }

    #[test]
    fn asymmetric_input_rejected() {
        let m = dmatrix![1.0, 2.0; 0.0, 1.0];
        assert!(matches!(svec(&m), Err(CoreError::AsymmetricInput { .. })));
    }

    #[test]
    fn inner_product_matches_trace_4x4() {
        // oracle: direct trace(A*B) on fixed random symmetric matrices
        let mut rng_state = 42u64;
        let mut next = || {
            rng_state = rng_state.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((rng_state >> 33) as f64) / (u32::MAX as f64) - 0.5
        };
        let mut a = DMatrix::from_fn(4, 4, |_, _| next());
        let mut b = DMatrix::from_fn(4, 4, |_, _| next());
        a = (&a + a.transpose()) * 0.5;
        b = (&b + b.transpose()) * 0.5;
        let tr = (&a * &b).trace();
        let dot = svec(&a).unwrap().inner(&svec(&b).unwrap());
        assert_abs_diff_eq!(dot, tr, epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn materialize_roundtrip(dim in 1usize..50, seed in 0u64..1000) {
            let mut state = seed.wrapping_mul(2654435761).wrapping_add(1);
            let mut next = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1);
                ((state >> 33) as f64) / (u32::MAX as f64) - 0.5
            };
            let raw = DMatrix::from_fn(dim, dim, |_, _| next());
            let m = (&raw + raw.transpose()) * 0.5;
            let back = svec(&m).unwrap().materialize();
            let err = (&back - &m).amax();
            prop_assert!(err <= 1e-12);
        }
    }
}
