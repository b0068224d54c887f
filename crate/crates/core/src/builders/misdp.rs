//! Mixed-integer selection problems in standard form.
//!
//! The bilinear product of a binary activation `g_j` with a gain-proxy
//! column `Y_(:,j)` is replaced by auxiliary variables `M_(:,j)` tied to
//! `(Y, g)` through the four-row McCormick envelope of `M = Y*g`:
//!
//! ```text
//!     M - Y - lo*g <= -lo        -M + Y + hi*g <= hi
//!     M - hi*g     <= 0          -M + lo*g     <= 0
//! ```
//!
//! At `g = 1` the envelope collapses to `M = Y`, at `g = 0` to `M = 0`
//! with `Y` free in its box, so restricting the binaries reproduces the
//! original design inequality exactly. Big-M is the special case
//! `(lo, hi) = (-bigM, +bigM)`. Branch-and-bound nodes are derived from
//! the one assembled problem by variable substitution (`node`), either
//! keeping the envelope rows (standard form) or substituting them out
//! (structure-exploiting form).

use nalgebra::{DMatrix, DVector};

use crate::builders::lmi::{
    add_dense_sym, add_sym_vars, sym_basis, GainResult, DEFAULT_KAPPA, VAR_CAP,
};
use crate::error::CoreError;
use crate::model::{NdsModel, Nonlinearity};
use crate::sdp::{
    self, check_feasibility, BlockSdp, FeasOptions, Feasibility, Reduced, Reduction,
};
use crate::sym::svec_index;

/// Which design the binaries select.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesignKind {
    /// Sensor selection, Lipschitz nonlinearity; binaries per measurement.
    Sensor,
    /// Actuator selection; binaries per input column.
    Actuator,
    /// Sensor selection under one-sided Lipschitz / quadratic inner bound.
    OslQib,
    /// Sensor selection for the discrete-time plant (OSL/QIB constants).
    Discrete,
    /// Sensor selection minimizing a worst-case L-infinity attenuation.
    RobustLinf,
}

/// Per-entry proxy bounds, or one symmetric big-M bound for every entry.
#[derive(Debug, Clone)]
pub enum Bounds {
    /// `(lo, hi)` per proxy entry, grouped per binary (entries of binary
    /// `b` occupy positions `b*n_x .. (b+1)*n_x`).
    PerEntry(Vec<(f64, f64)>),
    BigM(f64),
}

impl Bounds {
    fn resolve(&self, total: usize) -> Result<Vec<(f64, f64)>, CoreError> {
        match self {
            Bounds::BigM(m) => {
                if !(m.is_finite() && *m > 0.0) {
                    return Err(CoreError::UnboundedY {
                        context: "big-M bound must be a positive finite scalar".into(),
                    });
                }
                Ok(vec![(-m, *m); total])
            }
            Bounds::PerEntry(v) => {
                if v.len() != total
                    || v.iter().any(|&(lo, hi)| !lo.is_finite() || !hi.is_finite() || lo > hi)
                {
                    return Err(CoreError::UnboundedY {
                        context: "every proxy entry needs finite ordered bounds".into(),
                    });
                }
                Ok(v.clone())
            }
        }
    }
}

/// Affine constraints `H' g <= h` on the binaries (one column of H per
/// constraint).
#[derive(Debug, Clone)]
pub struct Logistic {
    pub h_mat: DMatrix<f64>,
    pub rhs: DVector<f64>,
}

impl Logistic {
    pub fn none(n_bin: usize) -> Self {
        Self { h_mat: DMatrix::zeros(n_bin, 0), rhs: DVector::zeros(0) }
    }

    /// At least `count` binaries active: `-1'g <= -count`.
    pub fn min_active(n_bin: usize, count: usize) -> Self {
        Self {
            h_mat: DMatrix::from_element(n_bin, 1, -1.0),
            rhs: DVector::from_element(1, -(count as f64)),
        }
    }

    /// At most `count` binaries active.
    pub fn max_active(n_bin: usize, count: usize) -> Self {
        Self {
            h_mat: DMatrix::from_element(n_bin, 1, 1.0),
            rhs: DVector::from_element(1, count as f64),
        }
    }

    /// Pin binary `j` to 1 (`-g_j <= -1`).
    pub fn force_on(n_bin: usize, j: usize) -> Self {
        let mut h = DMatrix::zeros(n_bin, 1);
        h[(j, 0)] = -1.0;
        Self { h_mat: h, rhs: DVector::from_element(1, -1.0) }
    }

    /// Stacks the constraints of two sets.
    pub fn and(&self, other: &Logistic) -> Self {
        assert_eq!(self.h_mat.nrows(), other.h_mat.nrows());
        let mut h = DMatrix::zeros(self.h_mat.nrows(), self.h_mat.ncols() + other.h_mat.ncols());
        h.view_mut((0, 0), self.h_mat.shape()).copy_from(&self.h_mat);
        h.view_mut((0, self.h_mat.ncols()), other.h_mat.shape()).copy_from(&other.h_mat);
        let rhs = DVector::from_iterator(
            self.rhs.len() + other.rhs.len(),
            self.rhs.iter().chain(other.rhs.iter()).copied(),
        );
        Self { h_mat: h, rhs }
    }
}

/// One proxy entry of one binary: the auxiliary `m`, the underlying gain
/// entry `y`, its box, and its four envelope rows.
#[derive(Debug, Clone)]
pub struct ProxyEntry {
    pub m_var: usize,
    pub y_var: usize,
    pub lo: f64,
    pub hi: f64,
    pub env_rows: [u32; 4],
}

#[derive(Debug, Clone)]
pub struct BinaryGroup {
    pub gamma_var: usize,
    pub proxy: Vec<ProxyEntry>,
}

/// An assembled mixed-integer selection problem: the standard-form SDP plus
/// the bookkeeping needed to derive branch-and-bound node problems from it.
#[derive(Debug, Clone)]
pub struct Misdp {
    pub sdp: BlockSdp,
    pub kind: DesignKind,
    pub binary_idx: Vec<usize>,
    /// Selection cost per binary.
    pub weights: Vec<f64>,
    pub logistic: Logistic,
    pub groups: Vec<BinaryGroup>,
    /// Block holding the envelope rows.
    pub envelope_block: usize,
    /// svec base of the Lyapunov variable.
    pub lyap_base: usize,
    pub nx: usize,
    /// Multiplier variables by name (eps, eps1, eps2, mu1, mu2, sigma).
    pub mult_vars: Vec<(String, usize)>,
    /// Constants held fixed at build time (alpha, mu0).
    pub fixed_params: Vec<(String, f64)>,
}

impl Misdp {
    pub fn n_binaries(&self) -> usize {
        self.groups.len()
    }

    /// Binary values out of a full-length solution vector.
    pub fn gamma_of(&self, x_full: &[f64]) -> Vec<f64> {
        self.groups.iter().map(|g| x_full[g.gamma_var]).collect()
    }

    /// Selection cost of an activation pattern.
    pub fn cost(&self, active: &[bool]) -> f64 {
        active.iter().zip(&self.weights).filter(|(a, _)| **a).map(|(_, w)| w).sum()
    }

    /// Objective value of a full-length solution vector.
    pub fn objective_of(&self, x_full: &[f64]) -> f64 {
        self.sdp.objective.iter().zip(x_full).map(|(c, x)| c * x).sum()
    }

    /// The Lyapunov matrix from a full-length solution vector.
    pub fn lyapunov_of(&self, x_full: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nx, self.nx);
        for j in 0..self.nx {
            for i in j..self.nx {
                let v = x_full[self.lyap_base + svec_index(self.nx, i, j)];
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    /// Gain-proxy matrix from a full-length solution vector: `n_x` rows by
    /// one column per binary for sensor-side kinds, transposed layout for
    /// actuators.
    pub fn proxy_of(&self, x_full: &[f64]) -> DMatrix<f64> {
        let nb = self.groups.len();
        let mut m = match self.kind {
            DesignKind::Actuator => DMatrix::zeros(nb, self.nx),
            _ => DMatrix::zeros(self.nx, nb),
        };
        for (b, g) in self.groups.iter().enumerate() {
            for (t, p) in g.proxy.iter().enumerate() {
                match self.kind {
                    DesignKind::Actuator => m[(b, t)] = x_full[p.y_var],
                    _ => m[(t, b)] = x_full[p.y_var],
                }
            }
        }
        m
    }

    /// Auxiliary (`M`) matrix from a full-length solution vector, laid out
    /// like [`Self::proxy_of`]. At a restricted point this is the masked
    /// gain proxy `Y * diag(g)`.
    pub fn aux_of(&self, x_full: &[f64]) -> DMatrix<f64> {
        let nb = self.groups.len();
        let mut m = match self.kind {
            DesignKind::Actuator => DMatrix::zeros(nb, self.nx),
            _ => DMatrix::zeros(self.nx, nb),
        };
        for (b, g) in self.groups.iter().enumerate() {
            for (t, p) in g.proxy.iter().enumerate() {
                match self.kind {
                    DesignKind::Actuator => m[(b, t)] = x_full[p.m_var],
                    _ => m[(t, b)] = x_full[p.m_var],
                }
            }
        }
        m
    }

    /// Whether an activation pattern satisfies the logistic constraints.
    pub fn logistic_ok(&self, active: &[bool]) -> bool {
        (0..self.logistic.h_mat.ncols()).all(|m| {
            let lhs: f64 = active
                .iter()
                .enumerate()
                .filter(|(_, a)| **a)
                .map(|(b, _)| self.logistic.h_mat[(b, m)])
                .sum();
            lhs <= self.logistic.rhs[m] + 1e-9
        })
    }

    /// Node relaxation with a partial binary assignment. With `exploit`
    /// set, each fixed binary's auxiliary column is substituted out
    /// (`M = Y` or `M = 0`) and its envelope rows are deleted; otherwise
    /// only the binary itself is fixed and the full standard form remains.
    pub fn node(&self, fixes: &[(usize, bool)], exploit: bool) -> Reduced {
        let mut red = Reduction::default();
        for &(b, val) in fixes {
            let g = &self.groups[b];
            red.fixes.push((g.gamma_var, if val { 1.0 } else { 0.0 }));
            if exploit {
                for p in &g.proxy {
                    if val {
                        red.aliases.push((p.m_var, p.y_var));
                    } else {
                        red.fixes.push((p.m_var, 0.0));
                    }
                    for r in p.env_rows {
                        red.drop_rows.push((self.envelope_block, r));
                    }
                }
            }
        }
        sdp::apply_reduction(&self.sdp, &red)
    }

    /// Fully restricted problem at a binary point: every binary fixed, the
    /// envelope substituted out, and the gain columns of inactive binaries
    /// pinned to zero.
    pub fn restriction(&self, active: &[bool]) -> Reduced {
        assert_eq!(active.len(), self.groups.len());
        let mut red = Reduction::default();
        for (&on, g) in active.iter().zip(&self.groups) {
            red.fixes.push((g.gamma_var, if on { 1.0 } else { 0.0 }));
            for p in &g.proxy {
                if on {
                    red.aliases.push((p.m_var, p.y_var));
                } else {
                    red.fixes.push((p.m_var, 0.0));
                    red.fixes.push((p.y_var, 0.0));
                }
                for r in p.env_rows {
                    red.drop_rows.push((self.envelope_block, r));
                }
            }
        }
        sdp::apply_reduction(&self.sdp, &red)
    }
}

/// Shared assembly of the binary part: activation variables, their [0, 1]
/// box and logistic rows, the proxy boxes, and the envelope rows.
#[allow(clippy::too_many_arguments)]
fn attach_binaries(
    sdp: &mut BlockSdp,
    pairs: &[Vec<(usize, usize)>],
    obj_weights: &[f64],
    logistic: &Logistic,
    bounds: &Bounds,
) -> Result<(Vec<BinaryGroup>, Vec<usize>, usize), CoreError> {
    let n_bin = pairs.len();
    if logistic.h_mat.nrows() != n_bin || logistic.rhs.len() != logistic.h_mat.ncols() {
        return Err(CoreError::dim("logistic constraint shape"));
    }
    let total: usize = pairs.iter().map(|p| p.len()).sum();
    let resolved = bounds.resolve(total)?;

    let gvars: Vec<usize> =
        (0..n_bin).map(|b| sdp.add_var(format!("g_{b}"), obj_weights[b])).collect();

    let gblock = sdp.add_diag_block();
    for &g in &gvars {
        sdp.add_row(gblock, &[(g, 1.0)], 0.0);
        sdp.add_row(gblock, &[(g, -1.0)], 1.0);
    }
    for m in 0..logistic.h_mat.ncols() {
        let terms: Vec<(usize, f64)> = gvars
            .iter()
            .enumerate()
            .map(|(b, &g)| (g, -logistic.h_mat[(b, m)]))
            .filter(|&(_, c)| c != 0.0)
            .collect();
        sdp.add_row(gblock, &terms, logistic.rhs[m]);
    }

    // Proxy boxes. Redundant with the envelope at the relaxation, but they
    // must survive the structure-exploiting substitution that deletes the
    // envelope rows of fixed binaries.
    let ybox = sdp.add_diag_block();
    let mut flat = resolved.iter();
    for group in pairs {
        for &(_, y) in group {
            let &(lo, hi) = flat.next().unwrap();
            let s = 1.0 / lo.abs().max(hi.abs()).max(1.0);
            sdp.add_row(ybox, &[(y, -s)], s * hi);
            sdp.add_row(ybox, &[(y, s)], -s * lo);
        }
    }

    let env = sdp.add_diag_block();
    let mut flat = resolved.iter();
    let mut groups = Vec::with_capacity(n_bin);
    for (b, group) in pairs.iter().enumerate() {
        let g = gvars[b];
        let mut proxy = Vec::with_capacity(group.len());
        for &(m, y) in group {
            let &(lo, hi) = flat.next().unwrap();
            // One common scale per entry keeps the four rows exact
            // negations of each other after a binary is substituted in.
            let s = 1.0 / lo.abs().max(hi.abs()).max(1.0);
            let r1 = sdp.add_row(env, &[(m, -s), (y, s), (g, lo * s)], -lo * s);
            let r2 = sdp.add_row(env, &[(m, s), (y, -s), (g, -hi * s)], hi * s);
            let r3 = sdp.add_row(env, &[(m, -s), (g, hi * s)], 0.0);
            let r4 = sdp.add_row(env, &[(m, s), (g, -lo * s)], 0.0);
            proxy.push(ProxyEntry {
                m_var: m,
                y_var: y,
                lo,
                hi,
                env_rows: [r1 as u32, r2 as u32, r3 as u32, r4 as u32],
            });
        }
        groups.push(BinaryGroup { gamma_var: g, proxy });
    }
    Ok((groups, gvars, env))
}

/// Caps and positivity shared by the sensor-side builders: `P >= kappa I`,
/// diagonal caps on P, and `kappa <= mult <= cap` rows for multipliers.
fn add_lyap_tail(sdp: &mut BlockSdp, lyap_base: usize, n: usize, kappa: f64, mults: &[usize]) {
    let pos = sdp.add_psd_block(n);
    for j in 0..n {
        for i in j..n {
            sdp.add_sym_entry(lyap_base + svec_index(n, i, j), pos, i, j, 1.0);
        }
        sdp.add_const_sym(pos, j, j, -kappa);
    }
    let caps = sdp.add_diag_block();
    // trace(Lyap) >= 1: a free normalization (the inequalities are
    // homogeneous of degree one) that keeps infeasibility bounded away
    // from the origin-collapse direction.
    let diag_terms: Vec<(usize, f64)> =
        (0..n).map(|i| (lyap_base + svec_index(n, i, i), 1.0)).collect();
    sdp.add_row(caps, &diag_terms, -1.0);
    for i in 0..n {
        let di = lyap_base + svec_index(n, i, i);
        sdp.add_row(caps, &[(di, -1.0 / VAR_CAP)], 1.0);
    }
    for &v in mults {
        sdp.add_row(caps, &[(v, 1.0)], -kappa);
        sdp.add_row(caps, &[(v, -1.0 / VAR_CAP)], 1.0);
    }
}

/// Adds M-variable columns (and matching Y columns) for `n_bin` binaries
/// with `per` entries each; returns (m, y) pairs per binary.
fn add_proxy_vars(sdp: &mut BlockSdp, n_bin: usize, per: usize) -> Vec<Vec<(usize, usize)>> {
    let mut mv = Vec::with_capacity(n_bin);
    for b in 0..n_bin {
        mv.push((0..per).map(|t| sdp.add_var(format!("M_{t}_{b}"), 0.0)).collect::<Vec<_>>());
    }
    let mut pairs = Vec::with_capacity(n_bin);
    for (b, ms) in mv.into_iter().enumerate() {
        let ys: Vec<usize> =
            (0..per).map(|t| sdp.add_var(format!("Y_{t}_{b}"), 0.0)).collect();
        pairs.push(ms.into_iter().zip(ys).collect());
    }
    pairs
}

/// Scatters the output-injection coefficient of `M_(i,j)` (the symmetrized
/// `e_i row_j(C)`) into a PSD block at a row offset.
fn add_injection_sym(sdp: &mut BlockSdp, var: usize, block: usize, c: &DMatrix<f64>, i: usize, j: usize) {
    for col in 0..c.ncols() {
        let v = c[(j, col)];
        if v != 0.0 {
            sdp.add_sym_entry(var, block, i, col, if i == col { 2.0 * v } else { v });
        }
    }
}

/// Sensor selection for the Lipschitz plant: minimize `c'g` subject to the
/// observability inequality with `M` in place of `Y*Gamma`, the envelope,
/// and the logistic set.
pub fn build_ssp(
    m: &NdsModel,
    weights: &[f64],
    logistic: &Logistic,
    bounds: &Bounds,
) -> Result<Misdp, CoreError> {
    m.validate()?;
    let gl = m.lipschitz().ok_or_else(|| CoreError::invalid("sensor selection requires a Lipschitz model"))?;
    let (nx, ny, ng) = (m.nx(), m.ny(), m.ng());
    if weights.len() != ny {
        return Err(CoreError::dim("one weight per measurement"));
    }
    let kappa = DEFAULT_KAPPA;

    let mut sdp = BlockSdp::new();
    let lyap_base = add_sym_vars(&mut sdp, "P", nx);
    let eps = sdp.add_var("eps", 0.0);
    let pairs = add_proxy_vars(&mut sdp, ny, nx);

    let big = sdp.add_psd_block(nx + ng);
    for jj in 0..nx {
        for ii in jj..nx {
            let e = sym_basis(nx, ii, jj);
            let var = lyap_base + svec_index(nx, ii, jj);
            let top = -(m.a.transpose() * &e + &e * &m.a);
            add_dense_sym(&mut sdp, var, big, &top);
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
    for i in 0..nx {
        sdp.add_sym_entry(eps, big, i, i, -gl * gl);
    }
    for r in 0..ng {
        sdp.add_sym_entry(eps, big, nx + r, nx + r, 1.0);
    }
    for (j, group) in pairs.iter().enumerate() {
        for (i, &(mv, _)) in group.iter().enumerate() {
            add_injection_sym(&mut sdp, mv, big, &m.c, i, j);
        }
    }
    for d in 0..nx + ng {
        sdp.add_const_sym(big, d, d, -kappa);
    }

    add_lyap_tail(&mut sdp, lyap_base, nx, kappa, &[eps]);
    let (groups, binary_idx, envelope_block) =
        attach_binaries(&mut sdp, &pairs, weights, logistic, bounds)?;
    sdp.validate()?;
    Ok(Misdp {
        sdp,
        kind: DesignKind::Sensor,
        binary_idx,
        weights: weights.to_vec(),
        logistic: logistic.clone(),
        groups,
        envelope_block,
        lyap_base,
        nx,
        mult_vars: vec![("eps".into(), eps)],
        fixed_params: Vec::new(),
    })
}

/// Actuator selection: the controllability inequality with auxiliary
/// `M = Pi * X` rows, envelope applied row-wise to X.
pub fn build_asp(
    m: &NdsModel,
    weights: &[f64],
    logistic: &Logistic,
    bounds: &Bounds,
) -> Result<Misdp, CoreError> {
    m.validate()?;
    let gl = m.lipschitz().ok_or_else(|| CoreError::invalid("actuator selection requires a Lipschitz model"))?;
    let (nx, nu) = (m.nx(), m.nu());
    if weights.len() != nu {
        return Err(CoreError::dim("one weight per input"));
    }
    let kappa = DEFAULT_KAPPA;
    let with_nl = gl > 0.0;

    let mut sdp = BlockSdp::new();
    let lyap_base = add_sym_vars(&mut sdp, "Q", nx);
    let sigma = sdp.add_var("sigma", 0.0);
    let pairs = add_proxy_vars(&mut sdp, nu, nx);

    let dim = if with_nl { 2 * nx } else { nx };
    let big = sdp.add_psd_block(dim);
    for jj in 0..nx {
        for ii in jj..nx {
            let e = sym_basis(nx, ii, jj);
            let var = lyap_base + svec_index(nx, ii, jj);
            let top = -(&e * m.a.transpose() + &m.a * &e);
            add_dense_sym(&mut sdp, var, big, &top);
            if with_nl {
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
    let ggt = -(&m.g * m.g.transpose());
    add_dense_sym(&mut sdp, sigma, big, &ggt);
    if with_nl {
        for r in 0..nx {
            sdp.add_sym_entry(sigma, big, nx + r, nx + r, 1.0 / (gl * gl));
        }
    }
    // M_(r,c) (the masked X entry) enters as B col_r e_c' symmetrized.
    for (r, group) in pairs.iter().enumerate() {
        for (c, &(mv, _)) in group.iter().enumerate() {
            for i in 0..nx {
                let v = m.b[(i, r)];
                if v != 0.0 {
                    sdp.add_sym_entry(mv, big, i, c, if i == c { 2.0 * v } else { v });
                }
            }
        }
    }
    for d in 0..dim {
        sdp.add_const_sym(big, d, d, -kappa);
    }

    add_lyap_tail(&mut sdp, lyap_base, nx, kappa, &[sigma]);
    let (groups, binary_idx, envelope_block) =
        attach_binaries(&mut sdp, &pairs, weights, logistic, bounds)?;
    sdp.validate()?;
    Ok(Misdp {
        sdp,
        kind: DesignKind::Actuator,
        binary_idx,
        weights: weights.to_vec(),
        logistic: logistic.clone(),
        groups,
        envelope_block,
        lyap_base,
        nx,
        mult_vars: vec![("sigma".into(), sigma)],
        fixed_params: Vec::new(),
    })
}

/// Sensor selection under one-sided-Lipschitz / quadratic-inner-bound
/// constants `(gamma_s, gamma_q1, gamma_q2)` with multipliers
/// `(eps1, eps2)`.
pub fn build_osl_qib_ssp(
    m: &NdsModel,
    weights: &[f64],
    logistic: &Logistic,
    bounds: &Bounds,
) -> Result<Misdp, CoreError> {
    m.validate()?;
    let (gs, gq1, gq2) = match m.nonlinearity {
        Nonlinearity::OslQib { gamma_s, gamma_q1, gamma_q2 } => (gamma_s, gamma_q1, gamma_q2),
        _ => return Err(CoreError::invalid("this design requires OSL/QIB constants")),
    };
    let (nx, ny, ng) = (m.nx(), m.ny(), m.ng());
    if weights.len() != ny {
        return Err(CoreError::dim("one weight per measurement"));
    }
    let kappa = DEFAULT_KAPPA;

    let mut sdp = BlockSdp::new();
    let lyap_base = add_sym_vars(&mut sdp, "P", nx);
    let eps1 = sdp.add_var("eps1", 0.0);
    let eps2 = sdp.add_var("eps2", 0.0);
    let pairs = add_proxy_vars(&mut sdp, ny, nx);

    let big = sdp.add_psd_block(nx + ng);
    for jj in 0..nx {
        for ii in jj..nx {
            let e = sym_basis(nx, ii, jj);
            let var = lyap_base + svec_index(nx, ii, jj);
            let top = -(m.a.transpose() * &e + &e * &m.a);
            add_dense_sym(&mut sdp, var, big, &top);
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
    for i in 0..nx {
        sdp.add_sym_entry(eps1, big, i, i, -gs);
        sdp.add_sym_entry(eps2, big, i, i, -gq1);
    }
    // Off-diagonal multiplier shift ((gq2*eps2 - eps1)/2) I, negated.
    for i in 0..ng.min(nx) {
        sdp.add_sym_entry(eps1, big, nx + i, i, 0.5);
        sdp.add_sym_entry(eps2, big, nx + i, i, -0.5 * gq2);
    }
    for r in 0..ng {
        sdp.add_sym_entry(eps2, big, nx + r, nx + r, 1.0);
    }
    for (j, group) in pairs.iter().enumerate() {
        for (i, &(mv, _)) in group.iter().enumerate() {
            add_injection_sym(&mut sdp, mv, big, &m.c, i, j);
        }
    }
    for d in 0..nx + ng {
        sdp.add_const_sym(big, d, d, -kappa);
    }

    add_lyap_tail(&mut sdp, lyap_base, nx, kappa, &[eps1, eps2]);
    let (groups, binary_idx, envelope_block) =
        attach_binaries(&mut sdp, &pairs, weights, logistic, bounds)?;
    sdp.validate()?;
    Ok(Misdp {
        sdp,
        kind: DesignKind::OslQib,
        binary_idx,
        weights: weights.to_vec(),
        logistic: logistic.clone(),
        groups,
        envelope_block,
        lyap_base,
        nx,
        mult_vars: vec![("eps1".into(), eps1), ("eps2".into(), eps2)],
        fixed_params: Vec::new(),
    })
}

/// Sensor selection for the discrete-time plant (three-block inequality,
/// OSL/QIB constants, no explicit G block).
pub fn build_discrete_ssp(
    m: &NdsModel,
    weights: &[f64],
    logistic: &Logistic,
    bounds: &Bounds,
) -> Result<Misdp, CoreError> {
    m.validate()?;
    let (gs, gq1, gq2) = match m.nonlinearity {
        Nonlinearity::OslQib { gamma_s, gamma_q1, gamma_q2 } => (gamma_s, gamma_q1, gamma_q2),
        _ => return Err(CoreError::invalid("this design requires OSL/QIB constants")),
    };
    let (nx, ny) = (m.nx(), m.ny());
    if weights.len() != ny {
        return Err(CoreError::dim("one weight per measurement"));
    }
    let kappa = DEFAULT_KAPPA;

    let mut sdp = BlockSdp::new();
    let lyap_base = add_sym_vars(&mut sdp, "P", nx);
    let eps1 = sdp.add_var("eps1", 0.0);
    let eps2 = sdp.add_var("eps2", 0.0);
    let pairs = add_proxy_vars(&mut sdp, ny, nx);

    // Negated three-block inequality:
    //   [ P - e1*gs*I - e2*gq1*I,   *,            *
    //    -PA + MC - shift*I,        e2*I - P,     *
    //    -PA + MC,                  O,            P ]  >= kappa*I
    let big = sdp.add_psd_block(3 * nx);
    for jj in 0..nx {
        for ii in jj..nx {
            let e = sym_basis(nx, ii, jj);
            let var = lyap_base + svec_index(nx, ii, jj);
            for r in 0..nx {
                for c in r..nx {
                    if e[(c, r)] != 0.0 {
                        sdp.add_sym_entry(var, big, c, r, e[(c, r)]); // (1,1): +P
                        sdp.add_sym_entry(var, big, nx + c, nx + r, -e[(c, r)]); // (2,2): -P
                        sdp.add_sym_entry(var, big, 2 * nx + c, 2 * nx + r, e[(c, r)]); // (3,3): +P
                    }
                }
            }
            let ea = -(&e * &m.a); // -PA blocks
            for r in 0..nx {
                for c in 0..nx {
                    if ea[(r, c)] != 0.0 {
                        sdp.add_sym_entry(var, big, nx + r, c, ea[(r, c)]);
                        sdp.add_sym_entry(var, big, 2 * nx + r, c, ea[(r, c)]);
                    }
                }
            }
        }
    }
    for i in 0..nx {
        sdp.add_sym_entry(eps1, big, i, i, -gs);
        sdp.add_sym_entry(eps2, big, i, i, -gq1);
        sdp.add_sym_entry(eps1, big, nx + i, i, 0.5);
        sdp.add_sym_entry(eps2, big, nx + i, i, -0.5 * gq2);
        sdp.add_sym_entry(eps2, big, nx + i, nx + i, 1.0);
    }
    for (j, group) in pairs.iter().enumerate() {
        for (i, &(mv, _)) in group.iter().enumerate() {
            for c in 0..nx {
                let v = m.c[(j, c)];
                if v != 0.0 {
                    sdp.add_sym_entry(mv, big, nx + i, c, v);
                    sdp.add_sym_entry(mv, big, 2 * nx + i, c, v);
                }
            }
        }
    }
    for d in 0..3 * nx {
        sdp.add_const_sym(big, d, d, -kappa);
    }

    add_lyap_tail(&mut sdp, lyap_base, nx, kappa, &[eps1, eps2]);
    let (groups, binary_idx, envelope_block) =
        attach_binaries(&mut sdp, &pairs, weights, logistic, bounds)?;
    sdp.validate()?;
    Ok(Misdp {
        sdp,
        kind: DesignKind::Discrete,
        binary_idx,
        weights: weights.to_vec(),
        logistic: logistic.clone(),
        groups,
        envelope_block,
        lyap_base,
        nx,
        mult_vars: vec![("eps1".into(), eps1), ("eps2".into(), eps2)],
        fixed_params: Vec::new(),
    })
}

/// Robust sensor selection minimizing the worst-case L-infinity attenuation
/// `mu0*mu1 + mu2` under a sensor budget, with `alpha > 0` and `mu0 >= 0`
/// held fixed.
pub fn build_robust_linf_ssp(
    m: &NdsModel,
    fixed: (f64, f64),
    budget: usize,
    bounds: &Bounds,
) -> Result<Misdp, CoreError> {
    m.validate()?;
    let (alpha, mu0) = fixed;
    if !(alpha > 0.0) || !(mu0 >= 0.0) {
        return Err(CoreError::invalid("alpha must be positive and mu0 nonnegative"));
    }
    let gl = m.lipschitz().ok_or_else(|| CoreError::invalid("the robust design requires a Lipschitz model"))?;
    let dist = m
        .disturbance
        .clone()
        .ok_or_else(|| CoreError::invalid("the robust design requires disturbance data"))?;
    let (nx, ny, ng) = (m.nx(), m.ny(), m.ng());
    let nw = dist.b_w.ncols();
    let nz = dist.z_perf.nrows();
    let kappa = DEFAULT_KAPPA;

    let mut sdp = BlockSdp::new();
    let lyap_base = add_sym_vars(&mut sdp, "P", nx);
    let eps = sdp.add_var("eps", 0.0);
    let mu1 = sdp.add_var("mu1", mu0);
    let mu2 = sdp.add_var("mu2", 1.0);
    let pairs = add_proxy_vars(&mut sdp, ny, nx);

    // First inequality, negated: stability plus disturbance-to-state gain.
    let big = sdp.add_psd_block(nx + ng + nw);
    for jj in 0..nx {
        for ii in jj..nx {
            let e = sym_basis(nx, ii, jj);
            let var = lyap_base + svec_index(nx, ii, jj);
            let top = -(m.a.transpose() * &e + &e * &m.a) - &e * alpha;
            add_dense_sym(&mut sdp, var, big, &top);
            let gpe = -(m.g.transpose() * &e);
            for r in 0..ng {
                for c in 0..nx {
                    if gpe[(r, c)] != 0.0 {
                        sdp.add_sym_entry(var, big, nx + r, c, gpe[(r, c)]);
                    }
                }
            }
            let bwe = -(dist.b_w.transpose() * &e);
            for r in 0..nw {
                for c in 0..nx {
                    if bwe[(r, c)] != 0.0 {
                        sdp.add_sym_entry(var, big, nx + ng + r, c, bwe[(r, c)]);
                    }
                }
            }
        }
    }
    for i in 0..nx {
        sdp.add_sym_entry(eps, big, i, i, -gl * gl);
    }
    for r in 0..ng {
        sdp.add_sym_entry(eps, big, nx + r, nx + r, 1.0);
    }
    for w in 0..nw {
        sdp.add_const_sym(big, nx + ng + w, nx + ng + w, alpha * mu0);
    }
    for (j, group) in pairs.iter().enumerate() {
        for (i, &(mv, _)) in group.iter().enumerate() {
            add_injection_sym(&mut sdp, mv, big, &m.c, i, j);
            // Feedthrough: +D_w' M' in the disturbance rows.
            for w in 0..nw {
                let v = dist.d_w[(j, w)];
                if v != 0.0 {
                    sdp.add_sym_entry(mv, big, nx + ng + w, i, v);
                }
            }
        }
    }
    for d in 0..nx + ng + nw {
        sdp.add_const_sym(big, d, d, -kappa);
    }

    // Second inequality, negated: performance bound linking P, mu1, mu2.
    let perf = sdp.add_psd_block(nx + 2 * nz);
    for jj in 0..nx {
        for ii in jj..nx {
            let var = lyap_base + svec_index(nx, ii, jj);
            sdp.add_sym_entry(var, perf, ii, jj, 1.0);
        }
    }
    for z in 0..nz {
        sdp.add_sym_entry(mu2, perf, nx + z, nx + z, 1.0);
        sdp.add_sym_entry(mu1, perf, nx + nz + z, nx + nz + z, 1.0);
        for c in 0..nx {
            let v = dist.z_perf[(z, c)];
            if v != 0.0 {
                sdp.add_const_sym(perf, nx + nz + z, c, -v);
            }
        }
    }
    for d in 0..nx + 2 * nz {
        sdp.add_const_sym(perf, d, d, -kappa);
    }

    add_lyap_tail(&mut sdp, lyap_base, nx, kappa, &[eps]);
    // mu1, mu2 >= 0 with caps (they sit on the boundary at zero-disturbance
    // optima, so no kappa floor here).
    let mblock = sdp.add_diag_block();
    for &v in &[mu1, mu2] {
        sdp.add_row(mblock, &[(v, 1.0)], 0.0);
        sdp.add_row(mblock, &[(v, -1.0 / VAR_CAP)], 1.0);
    }

    let logistic = Logistic::max_active(ny, budget);
    let (groups, binary_idx, envelope_block) =
        attach_binaries(&mut sdp, &pairs, &vec![0.0; ny], &logistic, bounds)?;
    sdp.validate()?;
    Ok(Misdp {
        sdp,
        kind: DesignKind::RobustLinf,
        binary_idx,
        weights: vec![1.0; ny],
        logistic,
        groups,
        envelope_block,
        lyap_base,
        nx,
        mult_vars: vec![("eps".into(), eps), ("mu1".into(), mu1), ("mu2".into(), mu2)],
        fixed_params: vec![("alpha".into(), alpha), ("mu0".into(), mu0)],
    })
}

/// Recovers the design gain from a full-length solution vector of a
/// selection problem: `L = P^{-1} M` for the observer-side kinds and
/// `K = M Q^{-1}` for actuators, where `M` already carries the binary
/// masking. The residual is the largest amount by which any semidefinite
/// block of the assembled problem is violated at the point (negative when
/// the point is interior).
pub fn recover_selection_gain(p: &Misdp, x_full: &[f64]) -> Result<GainResult, CoreError> {
    let lyap = p.lyapunov_of(x_full);
    let min_eig = crate::sym::min_eig(&lyap);
    if min_eig <= DEFAULT_KAPPA / 10.0 {
        return Err(CoreError::SingularLyapunov { min_eig });
    }
    let inv = lyap
        .clone()
        .cholesky()
        .ok_or(CoreError::SingularLyapunov { min_eig })?
        .inverse();
    let aux = p.aux_of(x_full);
    let gain = match p.kind {
        DesignKind::Actuator => &aux * &inv,
        _ => &inv * &aux,
    };
    let blocks = p.sdp.eval_blocks(x_full);
    let residual_eig = p
        .sdp
        .spec
        .blocks
        .iter()
        .zip(&blocks)
        .filter(|((kind, _), _)| *kind == crate::sdp::BlockKind::Psd)
        .map(|(_, s)| -crate::sym::min_eig(s))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(GainResult {
        gain,
        lyapunov: crate::sym::svec(&lyap).expect("symmetric by construction"),
        multipliers: p
            .mult_vars
            .iter()
            .map(|(name, v)| (name.clone(), x_full[*v]))
            .collect(),
        residual_eig,
    })
}

/// Upper limit of the decay-shift search. Chasing much faster certified
/// decay buys little and inflates the gain, which in turn forces tiny
/// simulation steps, so the search settles for a unit rate when one is
/// attainable.
const RATE_MAX: f64 = 1.0;

/// A clone of the assembled problem with the design inequality tightened
/// by `2 rho P` in its top-left corner. That is exactly the inequality of
/// the plant `A + rho I`, so every point certified on the clone decays at
/// rate `rho` at least.
fn rate_shifted(p: &Misdp, rho: f64) -> Misdp {
    let mut q = p.clone();
    for jj in 0..p.nx {
        for ii in jj..p.nx {
            let e = sym_basis(p.nx, ii, jj);
            let var = p.lyap_base + svec_index(p.nx, ii, jj);
            add_dense_sym(&mut q.sdp, var, 0, &(&e * (-2.0 * rho)));
        }
    }
    q
}

/// Max-margin point of the pattern's restriction of `shifted`, lifted to
/// the full space and scored (gain, residual) against the original `p`.
fn rate_point(p: &Misdp, shifted: &Misdp, active: &[bool]) -> Option<(Vec<f64>, GainResult)> {
    let (q, map) = match shifted.restriction(active) {
        Reduced::Infeasible => return None,
        Reduced::Problem(q, map) => (q, map),
    };
    let rep = check_feasibility(&q, &FeasOptions::default());
    if rep.feasibility != Feasibility::StrictlyFeasible {
        return None;
    }
    let x_full = map.lift(&rep.point?);
    let gain = recover_selection_gain(p, &x_full).ok()?;
    Some((x_full, gain))
}

/// Largest strictly certifiable decay shift of one pattern, found by
/// doubling then bisection (a point for `rho` also certifies every
/// smaller shift, so feasibility in `rho` is monotone), together with the
/// point and gain at that shift.
fn rate_search(p: &Misdp, active: &[bool]) -> Option<(f64, Vec<f64>, GainResult)> {
    let at = |rho: f64| rate_point(p, &rate_shifted(p, rho), active);
    let (x0, g0) = rate_point(p, p, active)?;
    let mut best = (0.0, x0, g0);
    let (mut lo, mut hi) = (0.0, 0.25);
    while hi <= RATE_MAX {
        match at(hi) {
            Some((x, g)) => {
                best = (hi, x, g);
                lo = hi;
                hi *= 2.0;
            }
            None => break,
        }
    }
    if hi <= RATE_MAX {
        for _ in 0..5 {
            let mid = 0.5 * (lo + hi);
            match at(mid) {
                Some((x, g)) => {
                    best = (mid, x, g);
                    lo = mid;
                }
                None => hi = mid,
            }
        }
    }
    Some(best)
}

/// Recovers the strongest design at the incumbent's price. Optimal
/// selection points sit on the boundary of the design inequality and
/// yield slow observers, and equal-cost patterns can differ a lot in the
/// decay they support, so the pattern itself and every
/// logistic-admissible single swap of an active entry for an equal-weight
/// inactive one are ranked by their largest certifiable decay shift; the
/// winning pattern, lifted point, and gain are returned. Design kinds
/// without a continuous-time decay reading get plain centered recovery.
/// `None` when the restriction is not strictly feasible.
pub fn polished_selection_gain(
    p: &Misdp,
    active: &[bool],
) -> Option<(Vec<bool>, Vec<f64>, GainResult)> {
    if !matches!(p.kind, DesignKind::Sensor | DesignKind::Actuator) {
        let (x, g) = rate_point(p, p, active)?;
        return Some((active.to_vec(), x, g));
    }
    let mut best: Option<(f64, Vec<bool>, Vec<f64>, GainResult)> =
        rate_search(p, active).map(|(r, x, g)| (r, active.to_vec(), x, g));
    for i in 0..active.len() {
        if !active[i] {
            continue;
        }
        for j in 0..active.len() {
            if active[j] || p.weights[j] != p.weights[i] {
                continue;
            }
            let mut cand = active.to_vec();
            cand[i] = false;
            cand[j] = true;
            if !p.logistic_ok(&cand) {
                continue;
            }
            if let Some((r, x, g)) = rate_search(p, &cand) {
                if best.as_ref().map_or(true, |b| r > b.0) {
                    best = Some((r, cand, x, g));
                }
            }
        }
    }
    best.map(|(_, a, x, g)| (a, x, g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Disturbance;
    use crate::sdp::{check_feasibility, solve, FeasOptions, Feasibility, SolveStatus, SolverOptions};
    use approx::assert_abs_diff_eq;
    use nalgebra::dmatrix;

    fn scalar_model(a: f64, gamma_l: f64) -> NdsModel {
        NdsModel {
            a: dmatrix![a],
            b: dmatrix![1.0],
            c: dmatrix![1.0],
            g: DMatrix::zeros(1, 0),
            node_outputs: vec![1],
            node_inputs: vec![1],
            nonlinearity: Nonlinearity::Lipschitz { gamma_l },
            disturbance: None,
        }
    }

    fn scalar_ssp(a: f64) -> Misdp {
        let m = scalar_model(a, 0.0);
        build_ssp(&m, &[1.0], &Logistic::none(1), &Bounds::PerEntry(vec![(-1.0, 1.0)])).unwrap()
    }

    /// Evaluates only the envelope block rows at (M, Y, g).
    fn env_feasible(p: &Misdp, mv: f64, yv: f64, gv: f64) -> bool {
        let mut x = vec![0.0; p.sdp.nvars()];
        let e = &p.groups[0].proxy[0];
        x[e.m_var] = mv;
        x[e.y_var] = yv;
        x[p.groups[0].gamma_var] = gv;
        let blocks = p.sdp.eval_blocks(&x);
        let env = &blocks[p.envelope_block];
        (0..env.nrows()).all(|r| env[(r, r)] >= -1e-12)
    }

    #[test]
    fn envelope_matches_unit_bound_rows() {
        // (lo, hi) = (-1, 1): the four rows in <= form are
        // [1,-1,1; -1,1,1; 1,0,-1; -1,0,-1]*[M;Y;g] <= [1;1;0;0].
        let p = scalar_ssp(-1.0);
        let e = &p.groups[0].proxy[0];
        let g = p.groups[0].gamma_var;
        let blocks = |vals: &[(usize, f64)]| {
            let mut x = vec![0.0; p.sdp.nvars()];
            for &(v, val) in vals {
                x[v] = val;
            }
            let b = p.sdp.eval_blocks(&x);
            (0..4).map(|r| b[p.envelope_block][(r, r)]).collect::<Vec<_>>()
        };
        // Constants: [1, 1, 0, 0].
        assert_eq!(blocks(&[]), vec![1.0, 1.0, 0.0, 0.0]);
        // Row values are konst - (lhs coefficients) per variable.
        assert_eq!(blocks(&[(e.m_var, 1.0)]), vec![0.0, 2.0, -1.0, 1.0]);
        assert_eq!(blocks(&[(e.y_var, 1.0)]), vec![2.0, 0.0, 0.0, 0.0]);
        assert_eq!(blocks(&[(g, 1.0)]), vec![0.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn envelope_case_analysis_at_binaries() {
        let p = scalar_ssp(-1.0);
        // g = 1 forces M = Y within the box.
        assert!(env_feasible(&p, 0.4, 0.4, 1.0));
        assert!(!env_feasible(&p, 0.4, 0.5, 1.0));
        assert!(!env_feasible(&p, 1.2, 1.2, 1.0));
        // g = 0 forces M = 0 with Y free in the box.
        assert!(env_feasible(&p, 0.0, 0.9, 0.0));
        assert!(env_feasible(&p, 0.0, -1.0, 0.0));
        assert!(!env_feasible(&p, 0.1, 0.1, 0.0));
        assert!(!env_feasible(&p, 0.0, 1.5, 0.0));
        // Fractional g admits the McCormick hull.
        assert!(env_feasible(&p, 0.25, 0.5, 0.5));
        assert!(!env_feasible(&p, 0.75, 0.5, 0.5));
    }

    #[test]
    fn big_m_is_mccormick_with_symmetric_bounds() {
        let m = scalar_model(1.0, 0.0);
        let a = build_ssp(&m, &[1.0], &Logistic::none(1), &Bounds::BigM(1e3)).unwrap();
        let b = build_ssp(&m, &[1.0], &Logistic::none(1), &Bounds::PerEntry(vec![(-1e3, 1e3)]))
            .unwrap();
        assert_eq!(
            serde_json::to_string(&a.sdp).unwrap(),
            serde_json::to_string(&b.sdp).unwrap()
        );
    }

    #[test]
    fn missing_bounds_rejected() {
        let m = scalar_model(1.0, 0.0);
        let r = build_ssp(&m, &[1.0], &Logistic::none(1), &Bounds::PerEntry(vec![]));
        assert!(matches!(r, Err(CoreError::UnboundedY { .. })));
        let r = build_ssp(
            &m,
            &[1.0],
            &Logistic::none(1),
            &Bounds::PerEntry(vec![(f64::NEG_INFINITY, 1.0)]),
        );
        assert!(matches!(r, Err(CoreError::UnboundedY { .. })));
    }

    #[test]
    fn restriction_matches_direct_feasibility_scalar() {
        // Unstable scalar: sensor on feasible, sensor off infeasible. Uses
        // the default big-M box; the reformulation matches the unbounded
        // design problem only when the proxy bounds are roomy enough.
        let m = scalar_model(1.0, 0.0);
        let p = build_ssp(&m, &[1.0], &Logistic::none(1), &Bounds::BigM(1e3)).unwrap();
        match p.restriction(&[true]) {
            Reduced::Problem(q, _) => {
                let rep = check_feasibility(&q, &FeasOptions::default());
                assert_eq!(rep.feasibility, Feasibility::StrictlyFeasible);
            }
            Reduced::Infeasible => panic!("reachable restriction"),
        }
        match p.restriction(&[false]) {
            Reduced::Problem(q, _) => {
                let rep = check_feasibility(&q, &FeasOptions::default());
                assert_eq!(rep.feasibility, Feasibility::Infeasible);
            }
            Reduced::Infeasible => {}
        }
    }

    #[test]
    fn exploiting_node_counts() {
        // Fixing k binaries: the exploiting node has exactly k*n_x fewer
        // scalar variables and 4*k*n_x fewer rows than the standard node.
        let m = NdsModel {
            a: dmatrix![0.5, 0.2; 0.0, -1.0],
            b: DMatrix::identity(2, 2),
            c: DMatrix::identity(2, 2),
            g: DMatrix::zeros(2, 0),
            node_outputs: vec![2],
            node_inputs: vec![2],
            nonlinearity: Nonlinearity::Lipschitz { gamma_l: 0.0 },
            disturbance: None,
        };
        let p = build_ssp(&m, &[1.0, 1.0], &Logistic::none(2), &Bounds::BigM(1e3)).unwrap();
        for fixes in [vec![(0usize, true)], vec![(0, false)], vec![(0, true), (1, false)]] {
            let k = fixes.len();
            let (se, s) = match (p.node(&fixes, true), p.node(&fixes, false)) {
                (Reduced::Problem(se, _), Reduced::Problem(s, _)) => (se, s),
                _ => panic!("both nodes exist"),
            };
            assert_eq!(s.nvars() - se.nvars(), k * p.nx);
            let rows = |q: &BlockSdp| -> usize {
                q.spec
                    .blocks
                    .iter()
                    .filter(|(kind, _)| *kind == crate::sdp::BlockKind::NonNegDiag)
                    .map(|&(_, d)| d)
                    .sum()
            };
            assert_eq!(rows(&s) - rows(&se), 4 * k * p.nx);
        }
    }

    #[test]
    fn node_relaxations_agree_across_forms() {
        // With one binary fixed, the exploiting and standard nodes have the
        // same optimal value (the substitution is exact).
        let p = scalar_ssp(1.0);
        for val in [true, false] {
            let objs: Vec<f64> = [true, false]
                .iter()
                .map(|&exploit| {
                    let node = match p.node(&[(0, val)], exploit) {
                        Reduced::Problem(q, map) => (q, map),
                        Reduced::Infeasible => panic!("node solvable"),
                    };
                    let rep = check_feasibility(&node.0, &FeasOptions::default());
                    match rep.feasibility {
                        Feasibility::StrictlyFeasible => 0.0,
                        Feasibility::Infeasible => f64::INFINITY,
                        Feasibility::Indeterminate => panic!("decisive expected"),
                    }
                })
                .collect();
            assert_eq!(objs[0], objs[1]);
        }
    }

    #[test]
    fn logistic_floor_prunes_zero_point() {
        let m = scalar_model(-1.0, 0.0);
        let p = build_ssp(&m, &[1.0], &Logistic::min_active(1, 1), &Bounds::BigM(1e3)).unwrap();
        // The all-off restriction violates the floor as a constant row.
        assert!(matches!(p.restriction(&[false]), Reduced::Infeasible));
    }

    #[test]
    fn osl_qib_with_zero_constants_matches_lipschitz() {
        // gs = gq1 = gq2 = 0, G = 0: same feasibility pattern as the
        // Lipschitz problem with gl = 0.
        let stable = NdsModel {
            nonlinearity: Nonlinearity::OslQib { gamma_s: 0.0, gamma_q1: 0.0, gamma_q2: 0.0 },
            ..scalar_model(-1.0, 0.0)
        };
        let p = build_osl_qib_ssp(&stable, &[1.0], &Logistic::none(1), &Bounds::BigM(1e3)).unwrap();
        for (active, want) in [(true, Feasibility::StrictlyFeasible), (false, Feasibility::StrictlyFeasible)]
        {
            match p.restriction(&[active]) {
                Reduced::Problem(q, _) => {
                    assert_eq!(check_feasibility(&q, &FeasOptions::default()).feasibility, want)
                }
                Reduced::Infeasible => panic!("feasible stable case"),
            }
        }
        let unstable = NdsModel {
            nonlinearity: Nonlinearity::OslQib { gamma_s: 0.0, gamma_q1: 0.0, gamma_q2: 0.0 },
            ..scalar_model(1.0, 0.0)
        };
        let p = build_osl_qib_ssp(&unstable, &[1.0], &Logistic::none(1), &Bounds::BigM(1e3)).unwrap();
        match p.restriction(&[false]) {
            Reduced::Problem(q, _) => assert_eq!(
                check_feasibility(&q, &FeasOptions::default()).feasibility,
                Feasibility::Infeasible
            ),
            Reduced::Infeasible => {}
        }
    }

    #[test]
    fn discrete_deadbeat_feasible_and_expanding_needs_sensor() {
        let deadbeat = NdsModel {
            nonlinearity: Nonlinearity::OslQib { gamma_s: 0.0, gamma_q1: 0.0, gamma_q2: 0.0 },
            ..scalar_model(0.0, 0.0)
        };
        let p =
            build_discrete_ssp(&deadbeat, &[1.0], &Logistic::none(1), &Bounds::BigM(1e3)).unwrap();
        match p.restriction(&[false]) {
            Reduced::Problem(q, _) => assert_eq!(
                check_feasibility(&q, &FeasOptions::default()).feasibility,
                Feasibility::StrictlyFeasible
            ),
            Reduced::Infeasible => panic!("deadbeat needs no sensor"),
        }

        let expanding = NdsModel {
            nonlinearity: Nonlinearity::OslQib { gamma_s: 0.0, gamma_q1: 0.0, gamma_q2: 0.0 },
            ..scalar_model(2.0, 0.0)
        };
        let p =
            build_discrete_ssp(&expanding, &[1.0], &Logistic::none(1), &Bounds::BigM(1e3)).unwrap();
        match p.restriction(&[false]) {
            Reduced::Problem(q, _) => assert_eq!(
                check_feasibility(&q, &FeasOptions::default()).feasibility,
                Feasibility::Infeasible
            ),
            Reduced::Infeasible => {}
        }
        // With the sensor: feasible and |A - L*C| < 1 at the recovered gain.
        match p.restriction(&[true]) {
            Reduced::Problem(q, map) => {
                let rep = check_feasibility(&q, &FeasOptions::default());
                assert_eq!(rep.feasibility, Feasibility::StrictlyFeasible);
                let full = map.lift(&rep.point.unwrap());
                let pm = p.lyapunov_of(&full)[(0, 0)];
                let y = full[p.groups[0].proxy[0].y_var];
                let l = y / pm;
                assert!((2.0 - l).abs() < 1.0, "closed-loop magnitude {}", (2.0 - l).abs());
            }
            Reduced::Infeasible => panic!("sensor makes it feasible"),
        }
    }

    #[test]
    fn robust_without_disturbance_path_has_zero_attenuation() {
        let mut m = scalar_model(-1.0, 0.0);
        m.disturbance = Some(Disturbance {
            b_w: DMatrix::zeros(1, 1),
            d_w: DMatrix::zeros(1, 1),
            z_perf: DMatrix::zeros(1, 1),
        });
        let p = build_robust_linf_ssp(&m, (1.0, 1.0), 1, &Bounds::BigM(1e3)).unwrap();
        match p.restriction(&[true]) {
            Reduced::Problem(q, map) => {
                let sol = solve(&q, &SolverOptions::default());
                assert_eq!(sol.status, SolveStatus::Optimal);
                let full = map.lift(&sol.x);
                let mu1 = full[p.mult_vars.iter().find(|(n, _)| n == "mu1").unwrap().1];
                let mu2 = full[p.mult_vars.iter().find(|(n, _)| n == "mu2").unwrap().1];
                // Only the kappa strictness shift keeps them off zero.
                assert!(mu1.abs() < 1e-4 && mu2.abs() < 1e-4, "mu1 {mu1} mu2 {mu2}");
            }
            Reduced::Infeasible => panic!("stable plant is feasible"),
        }
    }

    #[test]
    fn asp_unstable_scalar_needs_its_actuator() {
        let m = scalar_model(1.0, 0.0);
        let p = build_asp(&m, &[1.0], &Logistic::none(1), &Bounds::BigM(1e3)).unwrap();
        match p.restriction(&[true]) {
            Reduced::Problem(q, _) => assert_eq!(
                check_feasibility(&q, &FeasOptions::default()).feasibility,
                Feasibility::StrictlyFeasible
            ),
            Reduced::Infeasible => panic!("actuated case feasible"),
        }
        match p.restriction(&[false]) {
            Reduced::Problem(q, _) => assert_eq!(
                check_feasibility(&q, &FeasOptions::default()).feasibility,
                Feasibility::Infeasible
            ),
            Reduced::Infeasible => {}
        }
    }

    #[test]
    fn asp_two_decoupled_nodes_exhaustive() {
        // One stable, one unstable node; only the unstable node's actuator
        // is required. Exhaustive check over the four patterns.
        let m = NdsModel {
            a: dmatrix![-1.0, 0.0; 0.0, 1.0],
            b: DMatrix::identity(2, 2),
            c: DMatrix::identity(2, 2),
            g: DMatrix::zeros(2, 0),
            node_outputs: vec![1, 1],
            node_inputs: vec![1, 1],
            nonlinearity: Nonlinearity::Lipschitz { gamma_l: 0.0 },
            disturbance: None,
        };
        let p = build_asp(&m, &[1.0, 1.0], &Logistic::none(2), &Bounds::BigM(1e3)).unwrap();
        let mut best: Option<(f64, Vec<bool>)> = None;
        for mask in 0..4u32 {
            let active = vec![mask & 1 != 0, mask & 2 != 0];
            let feas = match p.restriction(&active) {
                Reduced::Problem(q, _) => {
                    check_feasibility(&q, &FeasOptions::default()).feasibility
                        == Feasibility::StrictlyFeasible
                }
                Reduced::Infeasible => false,
            };
            if feas {
                let cost = p.cost(&active);
                if best.as_ref().map_or(true, |(c, _)| cost < *c) {
                    best = Some((cost, active));
                }
            }
        }
        let (cost, active) = best.unwrap();
        assert_abs_diff_eq!(cost, 1.0);
        assert_eq!(active, vec![false, true]);
    }

}
