//! Observability / controllability matrix-inequality builders and gain
//! recovery.
//!
//! The observability condition for a Lipschitz plant asks for `P > 0`,
//! `Y`, `eps > 0` with
//!
//! ```text
//!     [ A'P + PA - Y Gam C - C' Gam Y' + eps*gl^2*I    P G  ]
//!     [ G'P                                          -eps*I ]  < 0,
//! ```
//!
//! where `Gam` masks the active sensor rows; the observer gain is
//! `L = P^{-1} Y`. The controllability condition is the dual design over
//! `(Q, X, sigma)` with `K = X Q^{-1}`. Builders emit the negated
//! inequality as a PSD block shifted by a small `kappa`, plus positivity
//! blocks and box/cap rows that keep the feasible set bounded (the
//! inequalities are positively homogeneous in their variables, so the caps
//! never change feasibility).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use crate::model::{NdsModel, SensorConfig};
use crate::sdp::BlockSdp;
use crate::sym::{svec_index, svec_len, SymMat};

/// Default strictness shift realizing strict inequalities.
pub const DEFAULT_KAPPA: f64 = 1e-6;
/// Diagonal cap on Lyapunov variables and multipliers.
pub const VAR_CAP: f64 = 1e6;
/// Default elementwise box on Y (and X).
pub const DEFAULT_GAIN_BOUND: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsMode {
    Variable,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct LmiOptions {
    pub kappa: f64,
    pub eps: EpsMode,
    /// Symmetric elementwise bound on the gain proxy (Y or X).
    pub gain_bound: f64,
}

impl Default for LmiOptions {
    fn default() -> Self {
        Self { kappa: DEFAULT_KAPPA, eps: EpsMode::Variable, gain_bound: DEFAULT_GAIN_BOUND }
    }
}

/// An assembled feasibility problem plus the variable layout needed to read
/// matrices back out of a solution vector.
#[derive(Debug, Clone)]
pub struct LmiProblem {
    pub sdp: BlockSdp,
    pub nx: usize,
    /// Active measurement (observability) or input (controllability)
    /// indices; gain-proxy columns/rows exist only for these.
    pub active: Vec<usize>,
    /// Variable index of svec entry (i, j), i >= j, of the Lyapunov matrix.
    pub lyap_base: usize,
    pub eps_var: Option<usize>,
    pub eps_fixed: f64,
    /// `(row, col) -> var` of the gain proxy (Y for observers: row in n_x,
    /// col an active measurement; X for controllers: row an active input,
    /// col in n_x).
    pub gain_vars: Vec<(usize, usize, usize)>,
    pub kappa: f64,
}

impl LmiProblem {
    /// Lyapunov matrix from a solution vector.
    pub fn lyapunov(&self, x: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nx, self.nx);
        for j in 0..self.nx {
            for i in j..self.nx {
                let v = x[self.lyap_base + svec_index(self.nx, i, j)];
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Gain proxy matrix (dense, inactive columns/rows zero).
    pub fn gain_proxy(&self, x: &[f64], nrows: usize, ncols: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(nrows, ncols);
        for &(i, j, var) in &self.gain_vars {
            m[(i, j)] = x[var];
        }
        m
    }

    pub fn eps_value(&self, x: &[f64]) -> f64 {
        match self.eps_var {
            Some(v) => x[v],
            None => self.eps_fixed,
        }
    }
}

/// Adds the svec variables of an `n x n` symmetric matrix named `tag`.
pub(crate) fn add_sym_vars(sdp: &mut BlockSdp, tag: &str, n: usize) -> usize {
    let base = sdp.nvars();
    for j in 0..n {
        for i in j..n {
            sdp.add_var(format!("{tag}_{i}_{j}"), 0.0);
        }
    }
    debug_assert_eq!(sdp.nvars(), base + svec_len(n));
    base
}

/// Scatters a dense symmetric contribution of one variable into a PSD block.
pub(crate) fn add_dense_sym(sdp: &mut BlockSdp, var: usize, block: usize, m: &DMatrix<f64>) {
    for j in 0..m.ncols() {
        for i in j..m.nrows() {
            let v = m[(i, j)];
            if v != 0.0 {
                sdp.add_sym_entry(var, block, i, j, v);
            }
        }
    }
}

/// Basis matrix E of svec entry (i, j): `e_i e_j' + e_j e_i'` off the
/// diagonal, `e_i e_i'` on it.
pub(crate) fn sym_basis(n: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut e = DMatrix::zeros(n, n);
    e[(i, j)] = 1.0;
    e[(j, i)] = 1.0;
    e
}

/// Positivity block (`Lyap >= kappa I`), diagonal caps, and the multiplier
/// row pattern shared by both designs.
fn add_common_tail(
    sdp: &mut BlockSdp,
    lyap_base: usize,
    n: usize,
    kappa: f64,
    mult_var: Option<usize>,
) {
    let pos = sdp.add_psd_block(n);
    for j in 0..n {
        for i in j..n {
            sdp.add_sym_entry(lyap_base + svec_index(n, i, j), pos, i, j, 1.0);
        }
        sdp.add_const_sym(pos, j, j, -kappa);
    }
    let caps = sdp.add_diag_block();
    // The design inequalities are homogeneous of degree one in their
    // variables, so trace(Lyap) >= 1 is a normalization, not a restriction;
    // it keeps infeasible systems bounded away from feasibility instead of
    // collapsing toward the origin.
    let diag_terms: Vec<(usize, f64)> =
        (0..n).map(|i| (lyap_base + svec_index(n, i, i), 1.0)).collect();
    sdp.add_row(caps, &diag_terms, -1.0);
    for i in 0..n {
        let di = lyap_base + svec_index(n, i, i);
        sdp.add_row(caps, &[(di, -1.0 / VAR_CAP)], 1.0);
    }
    if let Some(v) = mult_var {
        sdp.add_row(caps, &[(v, 1.0)], -kappa);
        sdp.add_row(caps, &[(v, -1.0 / VAR_CAP)], 1.0);
    }
}

/// Box rows `|x_var| <= bound`, scaled to unit constants.
pub(crate) fn add_box_rows(sdp: &mut BlockSdp, vars: &[usize], bound: f64) {
    let b = sdp.add_diag_block();
    let s = 1.0 / bound.max(1.0);
    for &v in vars {
        sdp.add_row(b, &[(v, -s)], s * bound);
        sdp.add_row(b, &[(v, s)], s * bound);
    }
}

/// Observability feasibility problem for a masked output matrix.
pub fn build_observability_lmi(
    m: &NdsModel,
    sensors: &SensorConfig,
    opts: &LmiOptions,
) -> Result<LmiProblem, CoreError> {
    m.validate()?;
    let gl = m
        .lipschitz()
        .ok_or_else(|| CoreError::invalid("observability design requires a Lipschitz model"))?;
    if sensors.expanded.len() != m.ny() {
        return Err(CoreError::dim("sensor flags must match the rows of C"));
    }
    let (nx, ng) = (m.nx(), m.ng());
    let active: Vec<usize> =
        (0..m.ny()).filter(|&j| sensors.expanded[j]).collect();

    let mut sdp = BlockSdp::new();
    let lyap_base = add_sym_vars(&mut sdp, "P", nx);
    let (eps_var, eps_fixed) = match opts.eps {
        EpsMode::Variable => (Some(sdp.add_var("eps", 0.0)), f64::NAN),
        EpsMode::Fixed(e) => {
            if !(e > 0.0) {
                return Err(CoreError::invalid("fixed eps must be positive"));
            }
            (None, e)
        }
    };
    let mut gain_vars = Vec::new();
    for &j in &active {
        for i in 0..nx {
            gain_vars.push((i, j, sdp.add_var(format!("Y_{i}_{j}"), 0.0)));
        }
    }

    // Negated observability inequality, shifted by kappa.
    let big = sdp.add_psd_block(nx + ng);
    for jj in 0..nx {
        for ii in jj..nx {
            let e = sym_basis(nx, ii, jj);
            let var = lyap_base + svec_index(nx, ii, jj);
            let top = -(m.a.transpose() * &e + &e * &m.a);
            add_dense_sym(&mut sdp, var, big, &top);
            // Off-diagonal: -(G' E) in the (2,1) position.
            let gpe = -(m.g.transpose() * &e);
            for r in 0..ng {
                for c in 0..nx {
                    if gpe[(r, c)] != 0.0 {
                        sdp.add_sym_entry(var, big, nx + r, c, gpe[(r, c)]);
                    }
                }
            }
        }
    }
    // eps terms: -gl^2 I on the state part, +I on the nonlinearity part.
    match eps_var {
        Some(v) => {
            for i in 0..nx {
                sdp.add_sym_entry(v, big, i, i, -gl * gl);
            }
            for r in 0..ng {
                sdp.add_sym_entry(v, big, nx + r, nx + r, 1.0);
            }
        }
        None => {
            for i in 0..nx {
                sdp.add_const_sym(big, i, i, -eps_fixed * gl * gl);
            }
            for r in 0..ng {
                sdp.add_const_sym(big, nx + r, nx + r, eps_fixed);
            }
        }
    }
    // Y terms: + (e_i row_j(C) + transpose) on the state part.
    for &(i, j, var) in &gain_vars {
        for c in 0..nx {
            let v = m.c[(j, c)];
            if v != 0.0 {
                sdp.add_sym_entry(var, big, i, c, if i == c { 2.0 * v } else { v });
            }
        }
    }
    for d in 0..nx + ng {
        sdp.add_const_sym(big, d, d, -opts.kappa);
    }

    add_common_tail(&mut sdp, lyap_base, nx, opts.kappa, eps_var);
    let yv: Vec<usize> = gain_vars.iter().map(|&(_, _, v)| v).collect();
    if !yv.is_empty() {
        add_box_rows(&mut sdp, &yv, opts.gain_bound);
    }
    sdp.validate()?;
    Ok(LmiProblem { sdp, nx, active, lyap_base, eps_var, eps_fixed, gain_vars, kappa: opts.kappa })
}

/// Controllability feasibility problem for a masked input matrix.
///
/// Variables are `(Q, X, sigma)`; the nonlinearity row/column of the
/// inequality is dropped when the Lipschitz constant is zero.
pub fn build_controllability_lmi(
    m: &NdsModel,
    actuators: &[bool],
    opts: &LmiOptions,
) -> Result<LmiProblem, CoreError> {
    m.validate()?;
    let gl = m
        .lipschitz()
        .ok_or_else(|| CoreError::invalid("controllability design requires a Lipschitz model"))?;
    if actuators.len() != m.nu() {
        return Err(CoreError::dim("actuator flags must match the columns of B"));
    }
    let nx = m.nx();
    let active: Vec<usize> = (0..m.nu()).filter(|&j| actuators[j]).collect();
    let with_nl = gl > 0.0;

    let mut sdp = BlockSdp::new();
    let lyap_base = add_sym_vars(&mut sdp, "Q", nx);
    let sigma = sdp.add_var("sigma", 0.0);
    let mut gain_vars = Vec::new();
    for &r in &active {
        for c in 0..nx {
            gain_vars.push((r, c, sdp.add_var(format!("X_{r}_{c}"), 0.0)));
        }
    }

    let dim = if with_nl { 2 * nx } else { nx };
    let big = sdp.add_psd_block(dim);
    for jj in 0..nx {
        for ii in jj..nx {
            let e = sym_basis(nx, ii, jj);
            let var = lyap_base + svec_index(nx, ii, jj);
            let top = -(&e * m.a.transpose() + &m.a * &e);
            add_dense_sym(&mut sdp, var, big, &top);
            if with_nl {
                // Off-diagonal: -Q in the (2,1) position.
                for r in 0..nx {
                    for c in 0..nx {
                        if e[(r, c)] != 0.0 {
                            sdp.add_sym_entry(var, big, nx + r, c, -e[(r, c)]);
                        }
                    }
                }
            }
        }
    }
    // sigma: -G G' on the state part, +1/gl^2 on the nonlinearity part.
    let ggt = -(&m.g * m.g.transpose());
    add_dense_sym(&mut sdp, sigma, big, &ggt);
    if with_nl {
        for r in 0..nx {
            sdp.add_sym_entry(sigma, big, nx + r, nx + r, 1.0 / (gl * gl));
        }
    }
    // X terms: + (B col_r) (e_c)' + transpose on the state part.
    for &(r, c, var) in &gain_vars {
        for i in 0..nx {
            let v = m.b[(i, r)];
            if v != 0.0 {
                sdp.add_sym_entry(var, big, i, c, if i == c { 2.0 * v } else { v });
            }
        }
    }
    for d in 0..dim {
        sdp.add_const_sym(big, d, d, -opts.kappa);
    }

    add_common_tail(&mut sdp, lyap_base, nx, opts.kappa, Some(sigma));
    let xv: Vec<usize> = gain_vars.iter().map(|&(_, _, v)| v).collect();
    if !xv.is_empty() {
        add_box_rows(&mut sdp, &xv, opts.gain_bound);
    }
    sdp.validate()?;
    Ok(LmiProblem {
        sdp,
        nx,
        active,
        lyap_base,
        eps_var: Some(sigma),
        eps_fixed: f64::NAN,
        gain_vars,
        kappa: opts.kappa,
    })
}

/// Symmetrized output basis matrices: for each (i, j) with `i` over states
/// and `j` over measurements (column-major, matching `vec(Y)`), the matrix
/// `e_i row_j(C) + row_j(C)' e_i'`.
pub fn build_yc_basis(m: &NdsModel) -> Vec<SymMat> {
    let (nx, ny) = (m.nx(), m.ny());
    let mut out = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let mut s = SymMat::zeros(nx);
            for c in 0..nx {
                let v = m.c[(j, c)];
                if v != 0.0 {
                    // add() mirrors (i, c); the diagonal needs the doubled
                    // value of r e_i' + e_i r'.
                    s.add(i, c, if i == c { 2.0 * v } else { v });
                }
            }
            out.push(s);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainKind {
    Observer,
    Controller,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GainResult {
    pub gain: DMatrix<f64>,
    pub lyapunov: SymMat,
    pub multipliers: Vec<(String, f64)>,
    /// Max eigenvalue of the source inequality at the recovered point
    /// (negative semidefinite within tolerance when valid).
    pub residual_eig: f64,
}

/// Recovers `L = P^{-1} Y` (observer) or `K = X Q^{-1}` (controller) from a
/// solved feasibility problem and re-verifies it by back-substitution.
pub fn recover_gain(
    kind: GainKind,
    m: &NdsModel,
    prob: &LmiProblem,
    x: &[f64],
) -> Result<GainResult, CoreError> {
    let lyap = prob.lyapunov(x);
    let min_eig = crate::sym::min_eig(&lyap);
    if min_eig <= prob.kappa / 10.0 {
        return Err(CoreError::SingularLyapunov { min_eig });
    }
    let inv = lyap
        .clone()
        .cholesky()
        .ok_or(CoreError::SingularLyapunov { min_eig })?
        .inverse();
    let eps = prob.eps_value(x);
    let (gain, residual) = match kind {
        GainKind::Observer => {
            let y = prob.gain_proxy(x, m.nx(), m.ny());
            let gain = &inv * &y;
            let res = observability_residual(m, &lyap, &y, eps);
            (gain, res)
        }
        GainKind::Controller => {
            let xm = prob.gain_proxy(x, m.nu(), m.nx());
            let gain = &xm * &inv;
            let res = controllability_residual(m, &lyap, &xm, eps);
            (gain, res)
        }
    };
    let residual_eig = crate::sym::max_eig(&residual);
    Ok(GainResult {
        gain,
        lyapunov: crate::sym::svec(&lyap).expect("symmetric by construction"),
        multipliers: vec![(
            match kind {
                GainKind::Observer => "eps".into(),
                GainKind::Controller => "sigma".into(),
            },
            eps,
        )],
        residual_eig,
    })
}

/// The observability inequality evaluated at a point (masked columns of Y
/// are zero already by construction of the dense Y).
pub fn observability_residual(
    m: &NdsModel,
    p: &DMatrix<f64>,
    y: &DMatrix<f64>,
    eps: f64,
) -> DMatrix<f64> {
    let gl = m.lipschitz().unwrap_or(0.0);
    let (nx, ng) = (m.nx(), m.ng());
    let mut s = DMatrix::zeros(nx + ng, nx + ng);
    let yc = y * &m.c;
    let top = m.a.transpose() * p + p * &m.a - &yc - yc.transpose()
        + DMatrix::identity(nx, nx) * (eps * gl * gl);
    s.view_mut((0, 0), (nx, nx)).copy_from(&top);
    let gp = m.g.transpose() * p;
    s.view_mut((nx, 0), (ng, nx)).copy_from(&gp);
    s.view_mut((0, nx), (nx, ng)).copy_from(&gp.transpose());
    for r in 0..ng {
        s[(nx + r, nx + r)] = -eps;
    }
    s
}

/// The controllability inequality evaluated at a point.
pub fn controllability_residual(
    m: &NdsModel,
    q: &DMatrix<f64>,
    x: &DMatrix<f64>,
    sigma: f64,
) -> DMatrix<f64> {
    let gl = m.lipschitz().unwrap_or(0.0);
    let nx = m.nx();
    let bx = &m.b * x;
    let top = q * m.a.transpose() + &m.a * q - &bx - bx.transpose()
        + &m.g * m.g.transpose() * sigma;
    if gl == 0.0 {
        return top;
    }
    let mut s = DMatrix::zeros(2 * nx, 2 * nx);
    s.view_mut((0, 0), (nx, nx)).copy_from(&top);
    s.view_mut((nx, 0), (nx, nx)).copy_from(q);
    s.view_mut((0, nx), (nx, nx)).copy_from(q);
    for r in 0..nx {
        s[(nx + r, nx + r)] = -sigma / (gl * gl);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Nonlinearity;
    use crate::sdp::{check_feasibility, FeasOptions, Feasibility};
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    fn hurwitz_two_state() -> NdsModel {
        NdsModel {
            a: -DMatrix::identity(2, 2),
            b: DMatrix::identity(2, 2),
            c: DMatrix::identity(2, 2),
            g: DMatrix::zeros(2, 0),
            node_outputs: vec![2],
            node_inputs: vec![2],
            nonlinearity: Nonlinearity::Lipschitz { gamma_l: 0.0 },
            disturbance: None,
        }
    }

    #[test]
    fn hurwitz_all_sensors_strictly_feasible() {
        let m = hurwitz_two_state();
        let sensors = SensorConfig::all_on(&m.node_outputs);
        let prob = build_observability_lmi(&m, &sensors, &LmiOptions::default()).unwrap();
        let rep = check_feasibility(&prob.sdp, &FeasOptions::default());
        assert_eq!(rep.feasibility, Feasibility::StrictlyFeasible);
    }

    #[test]
    fn hurwitz_controller_feasible_with_zero_gain_admissible() {
        let m = hurwitz_two_state();
        let prob = build_controllability_lmi(&m, &[true, true], &LmiOptions::default()).unwrap();
        let rep = check_feasibility(&prob.sdp, &FeasOptions::default());
        assert_eq!(rep.feasibility, Feasibility::StrictlyFeasible);
    }

    #[test]
    fn unstable_integrator_needs_its_actuator() {
        let m = NdsModel {
            a: dmatrix![1.0],
            b: dmatrix![1.0],
            c: dmatrix![1.0],
            g: DMatrix::zeros(1, 0),
            node_outputs: vec![1],
            node_inputs: vec![1],
            nonlinearity: Nonlinearity::Lipschitz { gamma_l: 0.0 },
            disturbance: None,
        };
        let on = build_controllability_lmi(&m, &[true], &LmiOptions::default()).unwrap();
        let rep = check_feasibility(&on.sdp, &FeasOptions::default());
        assert_eq!(rep.feasibility, Feasibility::StrictlyFeasible);
        let gr = recover_gain(GainKind::Controller, &m, &on, &rep.point.clone().unwrap()).unwrap();
        // Closed-loop eigenvalue of a - b*k must be negative.
        assert!(m.a[(0, 0)] - m.b[(0, 0)] * gr.gain[(0, 0)] < 0.0);

        let off = build_controllability_lmi(&m, &[false], &LmiOptions::default()).unwrap();
        let rep = check_feasibility(&off.sdp, &FeasOptions::default());
        assert_eq!(rep.feasibility, Feasibility::Infeasible);
    }

    #[test]
    fn unstable_scalar_without_sensors_infeasible() {
        let m = NdsModel {
            a: dmatrix![1.0],
            b: dmatrix![1.0],
            c: dmatrix![1.0],
            g: DMatrix::zeros(1, 0),
            node_outputs: vec![1],
            node_inputs: vec![1],
            nonlinearity: Nonlinearity::Lipschitz { gamma_l: 0.0 },
            disturbance: None,
        };
        let sensors = SensorConfig::all_off(&m.node_outputs);
        let prob = build_observability_lmi(&m, &sensors, &LmiOptions::default()).unwrap();
        let rep = check_feasibility(&prob.sdp, &FeasOptions::default());
        assert_eq!(rep.feasibility, Feasibility::Infeasible);
    }

    #[test]
    fn yc_basis_reassembles_symmetrized_product() {
        // oracle: direct matrix product Y*C + C'*Y' on fixed pseudo-random
        // data with C of size 3 x 2... (C maps 2 states to 3 outputs).
        let c = dmatrix![0.3, -1.2; 2.0, 0.7; -0.4, 0.0];
        let m = NdsModel {
            a: DMatrix::zeros(2, 2),
            b: DMatrix::zeros(2, 1),
            c: c.clone(),
            g: DMatrix::zeros(2, 0),
            node_outputs: vec![3],
            node_inputs: vec![1],
            nonlinearity: Nonlinearity::Lipschitz { gamma_l: 0.0 },
            disturbance: None,
        };
        let basis = build_yc_basis(&m);
        assert_eq!(basis.len(), 6);
        let y = dmatrix![1.5, -0.2, 0.8; 0.1, 0.9, -1.1];
        let direct = &y * &c + c.transpose() * y.transpose();
        let mut assembled = DMatrix::zeros(2, 2);
        for j in 0..3 {
            for i in 0..2 {
                assembled += basis[j * 2 + i].materialize() * y[(i, j)];
            }
        }
        assert_abs_diff_eq!((assembled - direct).amax(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn yc_basis_zero_row_gives_zero_matrix() {
        let m = NdsModel {
            a: DMatrix::zeros(2, 2),
            b: DMatrix::zeros(2, 1),
            c: dmatrix![1.0, 0.0; 0.0, 0.0],
            g: DMatrix::zeros(2, 0),
            node_outputs: vec![2],
            node_inputs: vec![1],
            nonlinearity: Nonlinearity::Lipschitz { gamma_l: 0.0 },
            disturbance: None,
        };
        let basis = build_yc_basis(&m);
        // j = 1 (second measurement) has a zero row of C.
        for i in 0..2 {
            assert_eq!(basis[2 + i].materialize().amax(), 0.0);
        }
    }

    #[test]
    fn scalar_yc_basis_is_doubled_entry() {
        let m = NdsModel {
            a: dmatrix![0.0],
            b: dmatrix![0.0],
            c: dmatrix![3.0],
            g: DMatrix::zeros(1, 0),
            node_outputs: vec![1],
            node_inputs: vec![1],
            nonlinearity: Nonlinearity::Lipschitz { gamma_l: 0.0 },
            disturbance: None,
        };
        let basis = build_yc_basis(&m);
        assert_eq!(basis.len(), 1);
        assert_abs_diff_eq!(basis[0].materialize()[(0, 0)], 6.0);
    }

    #[test]
    fn recover_gain_diagonal_case() {
        // P = 2I, Y = 2*C0' gives L = C0'.
        let m = hurwitz_two_state();
        let sensors = SensorConfig::all_on(&m.node_outputs);
        let prob = build_observability_lmi(&m, &sensors, &LmiOptions::default()).unwrap();
        let n = prob.sdp.nvars();
        let mut x = vec![0.0; n];
        x[prob.lyap_base + svec_index(2, 0, 0)] = 2.0;
        x[prob.lyap_base + svec_index(2, 1, 1)] = 2.0;
        x[prob.eps_var.unwrap()] = 1.0;
        for &(i, j, var) in &prob.gain_vars {
            x[var] = if i == j { 2.0 } else { 0.0 }; // 2 * C0' with C0 = I
        }
        let gr = recover_gain(GainKind::Observer, &m, &prob, &x).unwrap();
        assert_abs_diff_eq!((gr.gain - DMatrix::identity(2, 2)).amax(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn observer_gain_back_substitution_is_negative_definite() {
        let m = hurwitz_two_state();
        let sensors = SensorConfig::all_on(&m.node_outputs);
        let prob = build_observability_lmi(&m, &sensors, &LmiOptions::default()).unwrap();
        let rep = check_feasibility(&prob.sdp, &FeasOptions::default());
        let gr =
            recover_gain(GainKind::Observer, &m, &prob, &rep.point.clone().unwrap()).unwrap();
        assert!(gr.residual_eig <= -1e-8, "residual eig {}", gr.residual_eig);
    }
}
