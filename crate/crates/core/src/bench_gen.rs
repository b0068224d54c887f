//! Generator for networks of nonlinear, possibly unstable, coupled nodes.
//!
//! Each node carries two states with local dynamics
//! `[[zeta1, 1], [1, zeta2]]`, a sinusoidal nonlinearity `beta*sin(x2)`
//! entering its second state, one control input on the second state, and
//! both states measured. Nodes couple through `exp(-dist(i, j))` times
//! the identity, so coupling decays with the Euclidean distance between
//! node positions drawn in a 5x5 box.
//!
//! The stacked nonlinearity `f(x) = (sin(x_{2i}))_i` is 1-Lipschitz
//! componentwise; instances declare the conservative bound
//! `gamma_l = eta * sqrt(N)` used by the design problems.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::model::{NdsModel, Nonlinearity};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkInstance {
    pub n: usize,
    pub eta: f64,
    pub seed: u64,
    /// Local dynamics diagonal entries, in [-2, 2].
    pub zeta1: Vec<f64>,
    pub zeta2: Vec<f64>,
    /// Nonlinearity strengths, in [-1, 1].
    pub beta: Vec<f64>,
    /// Node positions in the [0, 5] x [0, 5] box.
    pub positions: Vec<(f64, f64)>,
    /// Coupling exponent multiplier applied to the negative distance.
    pub coupling_exponent: f64,
    pub model: NdsModel,
}

impl NetworkInstance {
    /// The stacked nonlinearity `f(x) = (sin(x_{2i}))_i`.
    pub fn nonlinearity(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.n, |i, _| x[2 * i + 1].sin())
    }

    pub fn to_json(&self) -> Result<String, CoreError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self, CoreError> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Draws one instance. Every field uses its own RNG stream, so the draws
/// for one field never depend on how many values another field consumes.
pub fn generate_network(n: usize, eta: f64, seed: u64) -> Result<NetworkInstance, CoreError> {
    generate_network_with_coupling(n, eta, seed, 1.0)
}

pub fn generate_network_with_coupling(
    n: usize,
    eta: f64,
    seed: u64,
    coupling_exponent: f64,
) -> Result<NetworkInstance, CoreError> {
    if n == 0 {
        return Err(CoreError::invalid("the network needs at least one node"));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(CoreError::invalid("the Lipschitz multiplier must be positive"));
    }
    let stream = |k: u64| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k);
        rng
    };
    let mut r = stream(0);
    let zeta1: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..=2.0)).collect();
    let mut r = stream(1);
    let zeta2: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..=2.0)).collect();
    let mut r = stream(2);
    let beta: Vec<f64> = (0..n).map(|_| r.gen_range(-1.0..=1.0)).collect();
    let mut r = stream(3);
    let positions: Vec<(f64, f64)> =
        (0..n).map(|_| (r.gen_range(0.0..=5.0), r.gen_range(0.0..=5.0))).collect();

    let nx = 2 * n;
    let mut a = DMatrix::zeros(nx, nx);
    for i in 0..n {
        a[(2 * i, 2 * i)] = zeta1[i];
        a[(2 * i, 2 * i + 1)] = 1.0;
        a[(2 * i + 1, 2 * i)] = 1.0;
        a[(2 * i + 1, 2 * i + 1)] = zeta2[i];
        for j in 0..n {
            if i == j {
                continue;
            }
            let (xi, yi) = positions[i];
            let (xj, yj) = positions[j];
            let dist = ((xi - xj).powi(2) + (yi - yj).powi(2)).sqrt();
            let w = (-coupling_exponent * dist).exp();
            a[(2 * i, 2 * j)] += w;
            a[(2 * i + 1, 2 * j + 1)] += w;
        }
    }
    let mut b = DMatrix::zeros(nx, n);
    let mut g = DMatrix::zeros(nx, n);
    for i in 0..n {
        b[(2 * i + 1, i)] = 1.0;
        g[(2 * i + 1, i)] = beta[i];
    }
    let c = DMatrix::identity(nx, nx);

    let model = NdsModel {
        a,
        b,
        c,
        g,
        node_outputs: vec![2; n],
        node_inputs: vec![1; n],
        nonlinearity: Nonlinearity::Lipschitz { gamma_l: eta * (n as f64).sqrt() },
        disturbance: None,
    };
    model.validate()?;
    Ok(NetworkInstance {
        n,
        eta,
        seed,
        zeta1,
        zeta2,
        beta,
        positions,
        coupling_exponent,
        model,
    })
}

/// Empirical Lipschitz ratio of the stacked nonlinearity over sampled
/// state pairs: `sup ||f(x) - f(y)|| / ||x - y||`.
pub fn lipschitz_sample_sup(inst: &NetworkInstance, pairs: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nx = 2 * inst.n;
    let mut sup = 0.0f64;
    for _ in 0..pairs {
        let x = DVector::from_fn(nx, |_, _| rng.gen_range(-10.0..=10.0));
        let y = DVector::from_fn(nx, |_, _| rng.gen_range(-10.0..=10.0));
        let dx = (&x - &y).norm();
        if dx < 1e-12 {
            continue;
        }
        let df = (inst.nonlinearity(&x) - inst.nonlinearity(&y)).norm();
        sup = sup.max(df / dx);
    }
    sup
}
