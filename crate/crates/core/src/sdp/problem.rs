//! Block-structured conic problems in the standard form
//!
//! ```text
//!     minimize    c' x
//!     subject to  S(x) := C + sum_i x_i A_i  in K,
//! ```
//!
//! where K is a product of positive-semidefinite cones and nonnegative
//! orthants (diagonal blocks). Each diagonal-block row is one scalar linear
//! inequality `const_r + sum_i x_i a_{ir} >= 0`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockKind {
    Psd,
    NonNegDiag,
}

/// Ordered cone layout of a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub blocks: Vec<(BlockKind, usize)>,
}

impl BlockSpec {
    /// Total scalar dimension: svec length for PSD blocks, row count for
    /// diagonal blocks.
    pub fn scalar_dim(&self) -> usize {
        self.blocks
            .iter()
            .map(|&(kind, d)| match kind {
                BlockKind::Psd => d * (d + 1) / 2,
                BlockKind::NonNegDiag => d,
            })
            .sum()
    }
}

/// Sparse symmetric coefficient: entries (i, j, v) with i >= j meaning
/// `M[i][j] = M[j][i] = v`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SparseSym {
    pub entries: Vec<(u32, u32, f64)>,
}

impl SparseSym {
    pub fn materialize(&self, dim: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(dim, dim);
        for &(i, j, v) in &self.entries {
            m[(i as usize, j as usize)] += v;
            if i != j {
                m[(j as usize, i as usize)] += v;
            }
        }
        m
    }

    /// trace(self * D) for symmetric dense D.
    pub fn inner(&self, d: &DMatrix<f64>) -> f64 {
        let mut acc = 0.0;
        for &(i, j, v) in &self.entries {
            let x = d[(i as usize, j as usize)];
            acc += if i == j { v * x } else { 2.0 * v * x };
        }
        acc
    }
}

/// Per-variable coefficient in one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Coeff {
    Sym(SparseSym),
    /// (row, coefficient) pairs of a diagonal block.
    Diag(Vec<(u32, f64)>),
}

/// Constant term of one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConstBlock {
    Sym { dim: usize, entries: Vec<(u32, u32, f64)> },
    Diag(Vec<f64>),
}

impl ConstBlock {
    pub fn materialize(&self) -> DMatrix<f64> {
        match self {
            ConstBlock::Sym { dim, entries } => {
                SparseSym { entries: entries.clone() }.materialize(*dim)
            }
            ConstBlock::Diag(v) => DMatrix::from_diagonal(&nalgebra::DVector::from_vec(v.clone())),
        }
    }
}

/// A block-structured SDP `min c'x  s.t.  C + sum x_i A_i in K`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockSdp {
    pub spec: BlockSpec,
    pub objective: Vec<f64>,
    /// `coeff[i]` lists the nonzero blocks of A_i.
    pub coeff: Vec<Vec<(usize, Coeff)>>,
    pub constant: Vec<ConstBlock>,
    pub var_names: Vec<String>,
}

impl BlockSdp {
    pub fn new() -> Self {
        Self {
            spec: BlockSpec { blocks: Vec::new() },
            objective: Vec::new(),
            coeff: Vec::new(),
            constant: Vec::new(),
            var_names: Vec::new(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, obj: f64) -> usize {
        self.objective.push(obj);
        self.coeff.push(Vec::new());
        self.var_names.push(name.into());
        self.objective.len() - 1
    }

    pub fn add_psd_block(&mut self, dim: usize) -> usize {
        assert!(dim >= 1);
        self.spec.blocks.push((BlockKind::Psd, dim));
        self.constant.push(ConstBlock::Sym { dim, entries: Vec::new() });
        self.spec.blocks.len() - 1
    }

    /// Adds an empty diagonal block; rows are appended with [`Self::add_row`].
    pub fn add_diag_block(&mut self) -> usize {
        self.spec.blocks.push((BlockKind::NonNegDiag, 0));
        self.constant.push(ConstBlock::Diag(Vec::new()));
        self.spec.blocks.len() - 1
    }

    pub fn block_dim(&self, block: usize) -> usize {
        self.spec.blocks[block].1
    }

    /// Accumulates `v` onto symmetric entry (i, j) of variable `var` in a PSD
    /// block.
    pub fn add_sym_entry(&mut self, var: usize, block: usize, i: usize, j: usize, v: f64) {
        debug_assert_eq!(self.spec.blocks[block].0, BlockKind::Psd);
        if v == 0.0 {
            return;
        }
        let (a, b) = if i >= j { (i, j) } else { (j, i) };
        let coeffs = &mut self.coeff[var];
        let slot = match coeffs.iter_mut().find(|(b_, _)| *b_ == block) {
            Some((_, Coeff::Sym(s))) => s,
            Some(_) => panic!("block kind mismatch"),
            None => {
                coeffs.push((block, Coeff::Sym(SparseSym::default())));
                match &mut coeffs.last_mut().unwrap().1 {
                    Coeff::Sym(s) => s,
                    _ => unreachable!(),
                }
            }
        };
        for e in &mut slot.entries {
            if e.0 == a as u32 && e.1 == b as u32 {
                e.2 += v;
                return;
            }
        }
        slot.entries.push((a as u32, b as u32, v));
    }

    /// Accumulates `v` onto the symmetric constant entry (i, j) of a PSD block.
    pub fn add_const_sym(&mut self, block: usize, i: usize, j: usize, v: f64) {
        if v == 0.0 {
            return;
        }
        let (a, b) = if i >= j { (i, j) } else { (j, i) };
        match &mut self.constant[block] {
            ConstBlock::Sym { entries, .. } => {
                for e in entries.iter_mut() {
                    if e.0 == a as u32 && e.1 == b as u32 {
                        e.2 += v;
                        return;
                    }
                }
                entries.push((a as u32, b as u32, v));
            }
            ConstBlock::Diag(_) => panic!("block kind mismatch"),
        }
    }

    /// Appends one linear inequality `konst + sum coeff_i x_i >= 0` to a
    /// diagonal block; returns the row index within the block.
    pub fn add_row(&mut self, block: usize, terms: &[(usize, f64)], konst: f64) -> usize {
        let row = match &mut self.constant[block] {
            ConstBlock::Diag(c) => {
                c.push(konst);
                c.len() - 1
            }
            ConstBlock::Sym { .. } => panic!("block kind mismatch"),
        };
        self.spec.blocks[block].1 += 1;
        for &(var, v) in terms {
            if v == 0.0 {
                continue;
            }
            let coeffs = &mut self.coeff[var];
            match coeffs.iter_mut().find(|(b, _)| *b == block) {
                Some((_, Coeff::Diag(rows))) => rows.push((row as u32, v)),
                Some(_) => panic!("block kind mismatch"),
                None => coeffs.push((block, Coeff::Diag(vec![(row as u32, v)]))),
            }
        }
        row
    }

    /// Structural well-formedness check.
    pub fn validate(&self) -> Result<(), CoreError> {
        if self.objective.len() != self.coeff.len() || self.objective.len() != self.var_names.len()
        {
            return Err(CoreError::dim("objective/coeff/var_names length mismatch"));
        }
        if self.spec.blocks.len() != self.constant.len() {
            return Err(CoreError::dim("spec/constant block count mismatch"));
        }
        for (b, (&(kind, dim), konst)) in
            self.spec.blocks.iter().zip(self.constant.iter()).enumerate()
        {
            match (kind, konst) {
                (BlockKind::Psd, ConstBlock::Sym { dim: cd, entries }) => {
                    if *cd != dim {
                        return Err(CoreError::dim(format!("constant dim of PSD block {b}")));
                    }
                    if entries.iter().any(|&(i, j, _)| i as usize >= dim || j as usize >= dim) {
                        return Err(CoreError::dim(format!("constant entry out of range, block {b}")));
                    }
                }
                (BlockKind::NonNegDiag, ConstBlock::Diag(c)) => {
                    if c.len() != dim {
                        return Err(CoreError::dim(format!("constant dim of diag block {b}")));
                    }
                }
                _ => return Err(CoreError::dim(format!("kind/constant mismatch in block {b}"))),
            }
        }
        for (v, blocks) in self.coeff.iter().enumerate() {
            for (b, c) in blocks {
                let (kind, dim) = self.spec.blocks[*b];
                match (kind, c) {
                    (BlockKind::Psd, Coeff::Sym(s)) => {
                        if s.entries.iter().any(|&(i, j, _)| i as usize >= dim || j as usize >= dim)
                        {
                            return Err(CoreError::dim(format!(
                                "coefficient of var {v} out of range in block {b}"
                            )));
                        }
                    }
                    (BlockKind::NonNegDiag, Coeff::Diag(rows)) => {
                        if rows.iter().any(|&(r, _)| r as usize >= dim) {
                            return Err(CoreError::dim(format!(
                                "row index of var {v} out of range in block {b}"
                            )));
                        }
                    }
                    _ => {
                        return Err(CoreError::dim(format!(
                            "coefficient kind mismatch for var {v} block {b}"
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    /// Evaluates S(x) = C + sum x_i A_i for every block (dense).
    pub fn eval_blocks(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        assert_eq!(x.len(), self.nvars());
        let mut out: Vec<DMatrix<f64>> =
            self.constant.iter().map(|c| c.materialize()).collect();
        for (i, blocks) in self.coeff.iter().enumerate() {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for (b, c) in blocks {
                match c {
                    Coeff::Sym(s) => {
                        for &(r, cix, v) in &s.entries {
                            out[*b][(r as usize, cix as usize)] += xi * v;
                            if r != cix {
                                out[*b][(cix as usize, r as usize)] += xi * v;
                            }
                        }
                    }
                    Coeff::Diag(rows) => {
                        for &(r, v) in rows {
                            out[*b][(r as usize, r as usize)] += xi * v;
                        }
                    }
                }
            }
        }
        out
    }

    /// Index of a variable by tag, if present.
    pub fn var_index(&self, name: &str) -> Option<usize> {
        self.var_names.iter().position(|n| n == name)
    }
}

impl Default for BlockSdp {
    fn default() -> Self {
        Self::new()
    }
}
