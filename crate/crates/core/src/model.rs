//! Networked nonlinear dynamic system models and sensor configurations.
//!
//! The plant is `xdot = A x + G f(x) + B u`, `y = C x`, where `f` belongs to
//! a declared nonlinearity class. Outputs and inputs are partitioned by
//! node: node `i` owns `node_outputs[i]` consecutive rows of `C` and
//! `node_inputs[i]` consecutive columns of `B`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Nonlinearity class of `f` with its constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Nonlinearity {
    /// `||f(x) - f(xh)|| <= gamma_l ||x - xh||` on the operating region.
    Lipschitz { gamma_l: f64 },
    /// One-sided Lipschitz (gamma_s) plus quadratic inner bound (gamma_q1,
    /// gamma_q2).
    OslQib { gamma_s: f64, gamma_q1: f64, gamma_q2: f64 },
}

/// Disturbance data for the robust L-infinity design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disturbance {
    pub b_w: DMatrix<f64>,
    pub d_w: DMatrix<f64>,
    pub z_perf: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NdsModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub node_outputs: Vec<usize>,
    pub node_inputs: Vec<usize>,
    pub nonlinearity: Nonlinearity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disturbance: Option<Disturbance>,
}

impl NdsModel {
    pub fn nx(&self) -> usize {
        self.a.nrows()
    }

    pub fn ny(&self) -> usize {
        self.c.nrows()
    }

    pub fn nu(&self) -> usize {
        self.b.ncols()
    }

    pub fn ng(&self) -> usize {
        self.g.ncols()
    }

    pub fn nodes(&self) -> usize {
        self.node_outputs.len()
    }

    /// Lipschitz constant, when the model declares that class.
    pub fn lipschitz(&self) -> Option<f64> {
        match self.nonlinearity {
            Nonlinearity::Lipschitz { gamma_l } => Some(gamma_l),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let (nx, ny, nu) = (self.nx(), self.ny(), self.nu());
        if self.a.ncols() != nx {
            return Err(CoreError::dim("A must be square"));
        }
        if self.b.nrows() != nx {
            return Err(CoreError::dim("B row count must equal state dimension"));
        }
        if self.c.ncols() != nx {
            return Err(CoreError::dim("C column count must equal state dimension"));
        }
        if self.g.nrows() != nx {
            return Err(CoreError::dim("G row count must equal state dimension"));
        }
        if self.node_outputs.iter().sum::<usize>() != ny {
            return Err(CoreError::dim("node output partition must sum to rows of C"));
        }
        if self.node_inputs.iter().sum::<usize>() != nu {
            return Err(CoreError::dim("node input partition must sum to columns of B"));
        }
        if let Nonlinearity::Lipschitz { gamma_l } = self.nonlinearity {
            if !(gamma_l >= 0.0) {
                return Err(CoreError::invalid("Lipschitz constant must be nonnegative"));
            }
        }
        if let Some(d) = &self.disturbance {
            if d.b_w.nrows() != nx {
                return Err(CoreError::dim("B_w row count must equal state dimension"));
            }
            if d.z_perf.ncols() != nx {
                return Err(CoreError::dim("Z_perf column count must equal state dimension"));
            }
            if d.d_w.nrows() != ny || d.d_w.ncols() != d.b_w.ncols() {
                return Err(CoreError::dim("D_w must map disturbances to measurements"));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String, CoreError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, CoreError> {
        let m: NdsModel = serde_json::from_str(s)?;
        m.validate()?;
        Ok(m)
    }
}

/// Which sensors are active, at node granularity and expanded to the
/// per-measurement rows of `C`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorConfig {
    /// One flag per node.
    pub gamma: Vec<bool>,
    /// One flag per measurement (row of C).
    pub expanded: Vec<bool>,
}

impl SensorConfig {
    /// Node-level selection: every measurement of an active node is active.
    pub fn from_nodes(gamma: &[bool], node_outputs: &[usize]) -> Self {
        assert_eq!(gamma.len(), node_outputs.len());
        let mut expanded = Vec::new();
        for (on, &k) in gamma.iter().zip(node_outputs) {
            expanded.extend(std::iter::repeat(*on).take(k));
        }
        Self { gamma: gamma.to_vec(), expanded }
    }

    /// Measurement-level selection; a node counts as active when any of its
    /// measurements is active.
    pub fn from_measurements(expanded: &[bool], node_outputs: &[usize]) -> Self {
        assert_eq!(expanded.len(), node_outputs.iter().sum::<usize>());
        let mut gamma = Vec::with_capacity(node_outputs.len());
        let mut off = 0;
        for &k in node_outputs {
            gamma.push(expanded[off..off + k].iter().any(|&b| b));
            off += k;
        }
        Self { gamma: gamma.to_vec(), expanded: expanded.to_vec() }
    }

    pub fn all_on(node_outputs: &[usize]) -> Self {
        Self::from_nodes(&vec![true; node_outputs.len()], node_outputs)
    }

    pub fn all_off(node_outputs: &[usize]) -> Self {
        Self::from_nodes(&vec![false; node_outputs.len()], node_outputs)
    }

    pub fn active_count(&self) -> usize {
        self.expanded.iter().filter(|&&b| b).count()
    }

    /// Active-measurement set as a bitmask (measurement count <= 64 here).
    pub fn bitmask(&self) -> u64 {
        self.expanded
            .iter()
            .enumerate()
            .fold(0u64, |m, (i, &b)| if b { m | (1 << i) } else { m })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn tiny_model() -> NdsModel {
        NdsModel {
            a: -DMatrix::identity(2, 2),
            b: DMatrix::identity(2, 2),
            c: DMatrix::identity(2, 2),
            g: DMatrix::zeros(2, 1),
            node_outputs: vec![2],
            node_inputs: vec![2],
            nonlinearity: Nonlinearity::Lipschitz { gamma_l: 0.0 },
            disturbance: None,
        }
    }

    #[test]
    fn valid_model_roundtrips_through_json() {
        let m = tiny_model();
        m.validate().unwrap();
        let s = m.to_json().unwrap();
        let back = NdsModel::from_json(&s).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn partition_mismatch_rejected() {
        let mut m = tiny_model();
        m.node_outputs = vec![1];
        assert!(matches!(m.validate(), Err(CoreError::DimensionMismatch { .. })));
    }

    #[test]
    fn negative_lipschitz_rejected() {
        let mut m = tiny_model();
        m.nonlinearity = Nonlinearity::Lipschitz { gamma_l: -1.0 };
        assert!(m.validate().is_err());
    }

    #[test]
    fn node_expansion_invariant() {
        let s = SensorConfig::from_nodes(&[true, false], &[2, 2]);
        assert_eq!(s.expanded, vec![true, true, false, false]);
        // expanded_j equals gamma_i for every measurement j of node i
        for (j, &e) in s.expanded.iter().enumerate() {
            assert_eq!(e, s.gamma[j / 2]);
        }
        assert_eq!(s.active_count(), 2);
        assert_eq!(s.bitmask(), 0b0011);
    }

    #[test]
    fn measurement_level_node_flags() {
        let s = SensorConfig::from_measurements(&[false, true, false, false], &[2, 2]);
        assert_eq!(s.gamma, vec![true, false]);
    }

    #[test]
    fn rectangular_a_rejected() {
        let mut m = tiny_model();
        m.a = dmatrix![1.0, 0.0; 0.0, 1.0; 0.0, 0.0];
        assert!(m.validate().is_err());
    }
}
