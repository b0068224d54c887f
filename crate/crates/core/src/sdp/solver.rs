//! Primal-dual interior-point solver for block SDPs.
//!
//! Infeasible-start path following with Nesterov-Todd scaling. Each
//! iteration runs an affine (predictor) pass to pick the centering
//! parameter, then re-solves against the same factored Schur complement
//! with the centered right-hand side. Problems here are small (a few
//! hundred variables, blocks of dimension <= ~40), so the Schur complement
//! is assembled densely and factored by Cholesky.
//!
//! Alongside the primal iterate `x`, the dual matrix `Z` is maintained and
//! exposed: on infeasible problems the normalized dual accumulation point
//! is a separating certificate (`<A_i, Z> ~ 0`, `<C, Z> < 0`), which the
//! callers re-verify independently.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::problem::{BlockKind, BlockSdp, Coeff};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalLimit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Objective below which the problem is declared unbounded.
    pub unbounded_obj: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 200, unbounded_obj: -1e12 }
    }
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub obj: f64,
    /// Dual matrix per block (dense; diagonal blocks as diagonal matrices).
    pub dual: Vec<DMatrix<f64>>,
    pub primal_res: f64,
    pub dual_res: f64,
    pub gap: f64,
    pub iterations: usize,
}

/// One cone block's worth of matrix data.
#[derive(Clone)]
enum Blk {
    Dense(DMatrix<f64>),
    Diag(DVector<f64>),
}

impl Blk {
    fn inner(&self, other: &Blk) -> f64 {
        match (self, other) {
            (Blk::Dense(a), Blk::Dense(b)) => a.dot(b),
            (Blk::Diag(a), Blk::Diag(b)) => a.dot(b),
            _ => unreachable!(),
        }
    }

    fn trace(&self) -> f64 {
        match self {
            Blk::Dense(m) => m.trace(),
            Blk::Diag(v) => v.sum(),
        }
    }

    fn norm(&self) -> f64 {
        match self {
            Blk::Dense(m) => m.norm(),
            Blk::Diag(v) => v.norm(),
        }
    }

    fn axpy(&mut self, alpha: f64, other: &Blk) {
        match (self, other) {
            (Blk::Dense(a), Blk::Dense(b)) => *a += b * alpha,
            (Blk::Diag(a), Blk::Diag(b)) => a.axpy(alpha, b, 1.0),
            _ => unreachable!(),
        }
    }

    fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Blk::Dense(m) => m.clone(),
            Blk::Diag(v) => DMatrix::from_diagonal(v),
        }
    }
}

/// Per-block coefficient of one variable.
struct VarBlk {
    block: usize,
    sparse: Coeff,
    /// Dense form, PSD blocks only (used for congruence products).
    dense: Option<DMatrix<f64>>,
}

struct Workspace {
    kinds: Vec<(BlockKind, usize)>,
    constant: Vec<Blk>,
    vars: Vec<Vec<VarBlk>>,
    /// Variables touching each block, for Schur assembly.
    block_vars: Vec<Vec<usize>>,
    obj: Vec<f64>,
    norm_a: Vec<f64>,
    norm_c: f64,
}

fn coeff_inner(c: &Coeff, blk: &Blk) -> f64 {
    match (c, blk) {
        (Coeff::Sym(s), Blk::Dense(d)) => s.inner(d),
        (Coeff::Diag(rows), Blk::Diag(v)) => {
            rows.iter().map(|&(r, a)| a * v[r as usize]).sum()
        }
        _ => unreachable!(),
    }
}

fn coeff_add_to(c: &Coeff, scale: f64, blk: &mut Blk) {
    match (c, blk) {
        (Coeff::Sym(s), Blk::Dense(d)) => {
            for &(i, j, v) in &s.entries {
                d[(i as usize, j as usize)] += scale * v;
                if i != j {
                    d[(j as usize, i as usize)] += scale * v;
                }
            }
        }
        (Coeff::Diag(rows), Blk::Diag(v)) => {
            for &(r, a) in rows {
                v[r as usize] += scale * a;
            }
        }
        _ => unreachable!(),
    }
}

impl Workspace {
    fn build(p: &BlockSdp) -> Self {
        let kinds = p.spec.blocks.clone();
        let constant: Vec<Blk> = p
            .constant
            .iter()
            .zip(kinds.iter())
            .map(|(c, &(kind, dim))| match kind {
                BlockKind::Psd => Blk::Dense(c.materialize()),
                BlockKind::NonNegDiag => {
                    let m = c.materialize();
                    Blk::Diag(DVector::from_fn(dim, |i, _| m[(i, i)]))
                }
            })
            .collect();
        let mut block_vars: Vec<Vec<usize>> = vec![Vec::new(); kinds.len()];
        let vars: Vec<Vec<VarBlk>> = p
            .coeff
            .iter()
            .enumerate()
            .map(|(v, blocks)| {
                blocks
                    .iter()
                    .map(|(b, c)| {
                        block_vars[*b].push(v);
                        let dense = match c {
                            Coeff::Sym(s) => Some(s.materialize(kinds[*b].1)),
                            Coeff::Diag(_) => None,
                        };
                        VarBlk { block: *b, sparse: c.clone(), dense }
                    })
                    .collect()
            })
            .collect();
        let norm_a: Vec<f64> = vars
            .iter()
            .map(|blocks| {
                let sq: f64 = blocks
                    .iter()
                    .map(|vb| match &vb.sparse {
                        Coeff::Sym(s) => s
                            .entries
                            .iter()
                            .map(|&(i, j, v)| if i == j { v * v } else { 2.0 * v * v })
                            .sum::<f64>(),
                        Coeff::Diag(rows) => rows.iter().map(|&(_, v)| v * v).sum(),
                    })
                    .sum();
                sq.sqrt().max(1.0)
            })
            .collect();
        let norm_c = constant.iter().map(Blk::norm).fold(0.0f64, f64::max).max(1.0);
        Self { kinds, constant, vars, block_vars, obj: p.objective.clone(), norm_a, norm_c }
    }

    fn nblocks(&self) -> usize {
        self.kinds.len()
    }

    fn nvars(&self) -> usize {
        self.obj.len()
    }

    fn zero_blocks(&self) -> Vec<Blk> {
        self.kinds
            .iter()
            .map(|&(kind, dim)| match kind {
                BlockKind::Psd => Blk::Dense(DMatrix::zeros(dim, dim)),
                BlockKind::NonNegDiag => Blk::Diag(DVector::zeros(dim)),
            })
            .collect()
    }

    fn identity_blocks(&self, scale: f64) -> Vec<Blk> {
        self.kinds
            .iter()
            .map(|&(kind, dim)| match kind {
                BlockKind::Psd => Blk::Dense(DMatrix::identity(dim, dim) * scale),
                BlockKind::NonNegDiag => Blk::Diag(DVector::from_element(dim, scale)),
            })
            .collect()
    }

    /// S(x) = C + sum x_i A_i.
    fn eval(&self, x: &DVector<f64>) -> Vec<Blk> {
        let mut out = self.constant.clone();
        for (i, blocks) in self.vars.iter().enumerate() {
            if x[i] == 0.0 {
                continue;
            }
            for vb in blocks {
                coeff_add_to(&vb.sparse, x[i], &mut out[vb.block]);
            }
        }
        out
    }

    /// A(dx) accumulated into zeroed blocks.
    fn apply(&self, dx: &DVector<f64>) -> Vec<Blk> {
        let mut out = self.zero_blocks();
        for (i, blocks) in self.vars.iter().enumerate() {
            if dx[i] == 0.0 {
                continue;
            }
            for vb in blocks {
                coeff_add_to(&vb.sparse, dx[i], &mut out[vb.block]);
            }
        }
        out
    }

    /// Adjoint: (<A_i, Z>)_i.
    fn adjoint(&self, z: &[Blk]) -> DVector<f64> {
        DVector::from_fn(self.nvars(), |i, _| {
            self.vars[i]
                .iter()
                .map(|vb| coeff_inner(&vb.sparse, &z[vb.block]))
                .sum()
        })
    }

    fn total_trace_dim(&self) -> usize {
        self.kinds.iter().map(|&(_, d)| d).sum()
    }
}

/// Symmetric matrix function via eigendecomposition.
fn sym_fn(m: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let es = m.clone().symmetric_eigen();
    let d = DMatrix::from_diagonal(&es.eigenvalues.map(f));
    &es.eigenvectors * d * es.eigenvectors.transpose()
}

/// NT scaling data for one block: the inverse scaling point and S^{-1}.
enum Scaling {
    Dense { winv: DMatrix<f64>, sinv: DMatrix<f64> },
    Diag { winv2: DVector<f64>, sinv: DVector<f64> },
}

fn nt_scaling(s: &Blk, z: &Blk) -> Scaling {
    match (s, z) {
        (Blk::Dense(s), Blk::Dense(z)) => {
            let shalf = sym_fn(s, |l| l.max(1e-300).sqrt());
            let sinvhalf = sym_fn(s, |l| 1.0 / l.max(1e-300).sqrt());
            let t = &shalf * z * &shalf;
            let thalf = sym_fn(&t, |l| l.max(1e-300).sqrt());
            let winv = &sinvhalf * thalf * &sinvhalf;
            let sinv = &sinvhalf * &sinvhalf;
            Scaling::Dense { winv, sinv }
        }
        (Blk::Diag(s), Blk::Diag(z)) => Scaling::Diag {
            winv2: z.component_div(s),
            sinv: s.map(|v| 1.0 / v),
        },
        _ => unreachable!(),
    }
}

/// Largest alpha in (0, 1] keeping `b + alpha*db` in the cone, with a
/// fraction-to-boundary backoff applied by the caller.
fn max_step(b: &Blk, db: &Blk) -> f64 {
    match (b, db) {
        (Blk::Dense(s), Blk::Dense(ds)) => {
            let Some(chol) = nalgebra::Cholesky::new(s.clone()) else {
                return 0.0;
            };
            let l = chol.l();
            // N = L^{-1} dS L^{-T}, lambda_min gives the boundary.
            let t1 = l.solve_lower_triangular(ds).expect("nonsingular Cholesky factor");
            let t2 = l
                .solve_lower_triangular(&t1.transpose())
                .expect("nonsingular Cholesky factor");
            let lam_min = t2
                .symmetric_eigen()
                .eigenvalues
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            if lam_min >= 0.0 {
                f64::INFINITY
            } else {
                -1.0 / lam_min
            }
        }
        (Blk::Diag(s), Blk::Diag(ds)) => {
            let mut alpha = f64::INFINITY;
            for i in 0..s.len() {
                if ds[i] < 0.0 {
                    alpha = alpha.min(-s[i] / ds[i]);
                }
            }
            alpha
        }
        _ => unreachable!(),
    }
}

pub fn solve(p: &BlockSdp, opts: &SolverOptions) -> SdpSolution {
    debug_assert!(p.validate().is_ok());
    let ws = Workspace::build(p);
    let m = ws.nvars();
    let nu = ws.total_trace_dim().max(1);

    if m == 0 {
        // Pure feasibility of the constant blocks.
        let feasible = ws.constant.iter().all(|b| match b {
            Blk::Dense(s) => crate::sym::min_eig(s) >= -1e-9,
            Blk::Diag(v) => v.iter().all(|&x| x >= -1e-9),
        });
        return SdpSolution {
            status: if feasible { SolveStatus::Optimal } else { SolveStatus::Infeasible },
            x: Vec::new(),
            obj: 0.0,
            dual: ws.zero_blocks().iter().map(Blk::to_dense).collect(),
            primal_res: 0.0,
            dual_res: 0.0,
            gap: 0.0,
            iterations: 0,
        };
    }

    let eta = 1.0 + ws.norm_c;
    let mut x = DVector::<f64>::zeros(m);
    let mut s = ws.identity_blocks(eta);
    let mut z = ws.identity_blocks(1.0);
    let c_vec = DVector::from_vec(ws.obj.clone());

    let mut status = SolveStatus::NumericalLimit;
    let mut iters = 0usize;
    let (mut pres, mut dres, mut relgap) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);

    for iter in 0..opts.max_iter {
        iters = iter;
        // Residuals.
        let sx = ws.eval(&x);
        let mut rp: Vec<Blk> = sx;
        for (b, sb) in rp.iter_mut().zip(s.iter()) {
            sb_neg_axpy(b, sb);
        }
        let rd = &c_vec - ws.adjoint(&z);
        let gap: f64 = s.iter().zip(z.iter()).map(|(a, b)| a.inner(b)).sum();
        let pobj = c_vec.dot(&x);
        let dobj: f64 = -ws.constant.iter().zip(z.iter()).map(|(a, b)| a.inner(b)).sum::<f64>();
        pres = rp.iter().map(Blk::norm).fold(0.0f64, f64::max) / ws.norm_c;
        dres = rd.amax() / (1.0 + c_vec.amax());
        relgap = gap.abs() / (1.0 + pobj.abs() + dobj.abs());

        if pres <= opts.tol && dres <= opts.tol && relgap <= opts.tol {
            status = SolveStatus::Optimal;
            break;
        }
        if pobj < opts.unbounded_obj && pres <= opts.tol.sqrt() {
            status = SolveStatus::Unbounded;
            break;
        }
        // Infeasibility certificate: normalized dual with tiny adjoint and
        // negative objective value.
        let trz: f64 = z.iter().map(Blk::trace).sum();
        if trz > 10.0 {
            let az = ws.adjoint(&z);
            let cz: f64 = ws.constant.iter().zip(z.iter()).map(|(a, b)| a.inner(b)).sum();
            let viol = (0..m)
                .map(|i| (az[i] / trz / ws.norm_a[i]).abs())
                .fold(0.0f64, f64::max);
            let neg = -cz / trz / ws.norm_c;
            if neg > 1e-10 && viol <= 1e-8 * neg.max(1e-4) {
                status = SolveStatus::Infeasible;
                break;
            }
        }

        let mu = gap / nu as f64;
        let scalings: Vec<Scaling> =
            s.iter().zip(z.iter()).map(|(sb, zb)| nt_scaling(sb, zb)).collect();

        // Schur complement M_ij = <A_i, W^{-1} A_j W^{-1}>.
        let mut schur = DMatrix::<f64>::zeros(m, m);
        // Cache W^{-1} A_j W^{-1} per dense block while iterating.
        for (b, sc) in scalings.iter().enumerate() {
            match sc {
                Scaling::Dense { winv, .. } => {
                    let vars_b = &ws.block_vars[b];
                    for &j in vars_b {
                        let aj = ws.vars[j]
                            .iter()
                            .find(|vb| vb.block == b)
                            .and_then(|vb| vb.dense.as_ref())
                            .expect("dense coeff cached for PSD blocks");
                        let dj = winv * aj * winv;
                        for &i in vars_b {
                            if i > j {
                                continue;
                            }
                            let ai = &ws.vars[i]
                                .iter()
                                .find(|vb| vb.block == b)
                                .expect("var listed in block")
                                .sparse;
                            let v = coeff_inner(ai, &Blk::Dense(dj.clone()));
                            schur[(i, j)] += v;
                            if i != j {
                                schur[(j, i)] += v;
                            }
                        }
                    }
                }
                Scaling::Diag { winv2, .. } => {
                    // Row-wise rank-one accumulation.
                    let dim = ws.kinds[b].1;
                    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
                    for &j in &ws.block_vars[b] {
                        if let Some(Coeff::Diag(rw)) = ws.vars[j]
                            .iter()
                            .find(|vb| vb.block == b)
                            .map(|vb| &vb.sparse)
                        {
                            for &(r, v) in rw {
                                rows[r as usize].push((j, v));
                            }
                        }
                    }
                    for (r, terms) in rows.iter().enumerate() {
                        let w = winv2[r];
                        for &(i, ai) in terms {
                            for &(j, aj) in terms {
                                if i <= j {
                                    schur[(i, j)] += w * ai * aj;
                                    if i != j {
                                        schur[(j, i)] += w * ai * aj;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }

        // Factor with escalating ridge if needed.
        let mut chol = None;
        let base = schur.trace() / m as f64;
        for k in 0..4 {
            let ridge = if k == 0 { 0.0 } else { base * 10f64.powi(-14 + 4 * k) };
            let mut mm = schur.clone();
            for i in 0..m {
                mm[(i, i)] += ridge;
            }
            if let Some(c) = nalgebra::Cholesky::new(mm) {
                chol = Some(c);
                break;
            }
        }
        let Some(chol) = chol else {
            status = SolveStatus::NumericalLimit;
            break;
        };

        let solve_dir = |rc: &[Blk]| -> (DVector<f64>, Vec<Blk>, Vec<Blk>) {
            // rhs_i = <A_i, Rc - W^{-1} Rp W^{-1}> - rd_i
            let mut g = Vec::with_capacity(ws.nblocks());
            for (b, sc) in scalings.iter().enumerate() {
                let gb = match (sc, &rp[b], &rc[b]) {
                    (Scaling::Dense { winv, .. }, Blk::Dense(rpb), Blk::Dense(rcb)) => {
                        Blk::Dense(rcb - winv * rpb * winv)
                    }
                    (Scaling::Diag { winv2, .. }, Blk::Diag(rpb), Blk::Diag(rcb)) => {
                        Blk::Diag(rcb - winv2.component_mul(rpb))
                    }
                    _ => unreachable!(),
                };
                g.push(gb);
            }
            let rhs = ws.adjoint(&g) - &rd;
            let dx = chol.solve(&rhs);
            // dS = A(dx) + Rp
            let mut ds = ws.apply(&dx);
            for (b, rpb) in ds.iter_mut().zip(rp.iter()) {
                b.axpy(1.0, rpb);
            }
            // dZ = Rc - W^{-1} dS W^{-1}
            let mut dz = Vec::with_capacity(ws.nblocks());
            for (b, sc) in scalings.iter().enumerate() {
                let dzb = match (sc, &ds[b], &rc[b]) {
                    (Scaling::Dense { winv, .. }, Blk::Dense(dsb), Blk::Dense(rcb)) => {
                        let prod = winv * dsb * winv;
                        Blk::Dense(rcb - (&prod + prod.transpose()) * 0.5)
                    }
                    (Scaling::Diag { winv2, .. }, Blk::Diag(dsb), Blk::Diag(rcb)) => {
                        Blk::Diag(rcb - winv2.component_mul(dsb))
                    }
                    _ => unreachable!(),
                };
                dz.push(dzb);
            }
            (dx, ds, dz)
        };

        // Affine pass: Rc = -Z.
        let rc_aff: Vec<Blk> = z
            .iter()
            .map(|b| match b {
                Blk::Dense(mm) => Blk::Dense(-mm),
                Blk::Diag(v) => Blk::Diag(-v),
            })
            .collect();
        let (_, ds_a, dz_a) = solve_dir(&rc_aff);
        let alpha_s_aff = step_all(&s, &ds_a).min(1.0);
        let alpha_z_aff = step_all(&z, &dz_a).min(1.0);
        let mut gap_aff = 0.0;
        for b in 0..ws.nblocks() {
            let mut sb = s[b].clone();
            sb.axpy(alpha_s_aff, &ds_a[b]);
            let mut zb = z[b].clone();
            zb.axpy(alpha_z_aff, &dz_a[b]);
            gap_aff += sb.inner(&zb);
        }
        let mu_aff = gap_aff / nu as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3).max(1e-8);

        // Corrector pass: Rc = sigma*mu*S^{-1} - Z.
        let rc: Vec<Blk> = scalings
            .iter()
            .zip(z.iter())
            .map(|(sc, zb)| match (sc, zb) {
                (Scaling::Dense { sinv, .. }, Blk::Dense(zm)) => {
                    Blk::Dense(sinv * (sigma * mu) - zm)
                }
                (Scaling::Diag { sinv, .. }, Blk::Diag(zv)) => {
                    Blk::Diag(sinv * (sigma * mu) - zv)
                }
                _ => unreachable!(),
            })
            .collect();
        let (dx, ds, dz) = solve_dir(&rc);

        let tau = if iter < 5 { 0.95 } else { 0.98 };
        let alpha_p = (tau * step_all(&s, &ds)).min(1.0);
        let alpha_d = (tau * step_all(&z, &dz)).min(1.0);
        if alpha_p < 1e-10 && alpha_d < 1e-10 {
            status = SolveStatus::NumericalLimit;
            break;
        }
        x += &dx * alpha_p;
        for b in 0..ws.nblocks() {
            s[b].axpy(alpha_p, &ds[b]);
            z[b].axpy(alpha_d, &dz[b]);
        }
    }

    SdpSolution {
        status,
        x: x.iter().cloned().collect(),
        obj: c_vec.dot(&x),
        dual: z.iter().map(Blk::to_dense).collect(),
        primal_res: pres,
        dual_res: dres,
        gap: relgap,
        iterations: iters,
    }
}

fn step_all(blocks: &[Blk], dirs: &[Blk]) -> f64 {
    blocks
        .iter()
        .zip(dirs.iter())
        .map(|(b, d)| max_step(b, d))
        .fold(f64::INFINITY, f64::min)
}

fn sb_neg_axpy(target: &mut Blk, sub: &Blk) {
    target.axpy(-1.0, sub);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::problem::BlockSdp;
    use approx::assert_abs_diff_eq;

    /// min x s.t. x >= 3 (diag block only).
    #[test]
    fn lp_min_over_halfline() {
        let mut p = BlockSdp::new();
        let x = p.add_var("x", 1.0);
        let d = p.add_diag_block();
        p.add_row(d, &[(x, 1.0)], -3.0);
        p.add_row(d, &[(x, -1.0)], 10.0); // x <= 10 keeps it bounded both ways
        let sol = solve(&p, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.x[0], 3.0, epsilon = 1e-6);
    }

    /// Smallest t with [[t, 1], [1, t]] >= 0 is t = 1.
    #[test]
    fn psd_min_diagonal_shift() {
        let mut p = BlockSdp::new();
        let t = p.add_var("t", 1.0);
        let b = p.add_psd_block(2);
        p.add_const_sym(b, 1, 0, 1.0);
        p.add_sym_entry(t, b, 0, 0, 1.0);
        p.add_sym_entry(t, b, 1, 1, 1.0);
        let sol = solve(&p, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.x[0], 1.0, epsilon = 1e-6);
    }

    /// Max-eigenvalue SDP: min t s.t. t*I - A >= 0; oracle is lambda_max(A).
    #[test]
    fn lambda_max_oracle() {
        // A = [[2, -1, 0], [-1, 2, -1], [0, -1, 2]]: eigenvalues 2 - 2cos(k*pi/4),
        // lambda_max = 2 + sqrt(2).
        let oracle = 2.0 + std::f64::consts::SQRT_2;
        let mut p = BlockSdp::new();
        let t = p.add_var("t", 1.0);
        let b = p.add_psd_block(3);
        for i in 0..3 {
            p.add_const_sym(b, i, i, -2.0);
            p.add_sym_entry(t, b, i, i, 1.0);
        }
        p.add_const_sym(b, 1, 0, 1.0);
        p.add_const_sym(b, 2, 1, 1.0);
        let sol = solve(&p, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.x[0], oracle, epsilon = 1e-6);
    }

    /// An infeasible pair of inequalities is flagged with a dual ray.
    #[test]
    fn detects_lp_infeasibility() {
        let mut p = BlockSdp::new();
        let x = p.add_var("x", 0.0);
        let d = p.add_diag_block();
        p.add_row(d, &[(x, 1.0)], -2.0); // x >= 2
        p.add_row(d, &[(x, -1.0)], 1.0); // x <= 1
        let sol = solve(&p, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    /// Infeasible PSD constraint: x*I2 >= 0 and scalar row x <= -1.
    #[test]
    fn detects_psd_infeasibility() {
        let mut p = BlockSdp::new();
        let x = p.add_var("x", 0.0);
        let b = p.add_psd_block(2);
        p.add_sym_entry(x, b, 0, 0, 1.0);
        p.add_sym_entry(x, b, 1, 1, 1.0);
        let d = p.add_diag_block();
        p.add_row(d, &[(x, -1.0)], -1.0);
        let sol = solve(&p, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    /// Dual matrix at optimality is PSD and complementary to the slack.
    #[test]
    fn dual_is_psd_and_complementary() {
        let mut p = BlockSdp::new();
        let t = p.add_var("t", 1.0);
        let b = p.add_psd_block(2);
        p.add_const_sym(b, 1, 0, 1.0);
        p.add_sym_entry(t, b, 0, 0, 1.0);
        p.add_sym_entry(t, b, 1, 1, 1.0);
        let sol = solve(&p, &SolverOptions::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!(crate::sym::min_eig(&sol.dual[0]) >= -1e-9);
        let slack = p.eval_blocks(&sol.x).remove(0);
        let comp = (&slack * &sol.dual[0]).trace();
        assert!(comp.abs() <= 1e-5, "complementarity residual {comp}");
    }
}
