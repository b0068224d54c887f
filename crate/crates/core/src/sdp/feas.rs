//! Strict-feasibility classification via a phase-I auxiliary problem.
//!
//! For constraints `S(x) in K` the auxiliary problem
//!
//! ```text
//!     maximize  t   subject to   S(x) - t*I in K,  t <= 1
//! ```
//!
//! always has a strict interior (any x with t negative enough) and a
//! bounded optimum, so the interior-point solver terminates cleanly on it.
//! The sign of the optimal `t*` classifies the original system: a clearly
//! positive value exhibits a strictly feasible point, a clearly negative
//! value proves infeasibility, and the dual at the optimum is then a
//! trace-normalized separating certificate.

use nalgebra::DMatrix;

use super::problem::{BlockKind, BlockSdp};
use super::reduce::{self, Reduced};
use super::solver::{solve, SolveStatus, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Feasibility {
    StrictlyFeasible,
    Infeasible,
    Indeterminate,
}

#[derive(Debug, Clone)]
pub struct FeasReport {
    pub feasibility: Feasibility,
    /// Optimal interior margin of the phase-I problem.
    pub t_star: f64,
    /// A strictly feasible point for the original variables, when one exists.
    pub point: Option<Vec<f64>>,
    /// Dual certificate blocks (aligned with the blocks of the problem that
    /// was actually solved, after presolve), present when infeasible.
    pub certificate: Option<Vec<DMatrix<f64>>>,
}

#[derive(Debug, Clone)]
pub struct FeasOptions {
    /// |t*| below this is reported as indeterminate.
    pub margin: f64,
    pub solver: SolverOptions,
}

impl Default for FeasOptions {
    fn default() -> Self {
        Self { margin: 1e-7, solver: SolverOptions::default() }
    }
}

/// Smallest eigenvalue (PSD blocks) or entry (diagonal blocks) of S(x).
fn point_margin(p: &BlockSdp, x: &[f64]) -> f64 {
    let mut margin = f64::INFINITY;
    for (b, s) in p.eval_blocks(x).iter().enumerate() {
        margin = match p.spec.blocks[b].0 {
            BlockKind::Psd => margin.min(crate::sym::min_eig(s)),
            BlockKind::NonNegDiag => {
                s.diagonal().iter().fold(margin, |m, &v| m.min(v))
            }
        };
    }
    margin
}

/// Classifies strict feasibility of the constraints of `p` (its objective
/// is ignored). Paired inequality rows are presolved into substitutions
/// first so the phase-I problem keeps a genuine interior.
pub fn check_feasibility(p: &BlockSdp, opts: &FeasOptions) -> FeasReport {
    let (reduced, map) = match reduce::presolve(p) {
        Reduced::Infeasible => {
            return FeasReport {
                feasibility: Feasibility::Infeasible,
                t_star: f64::NEG_INFINITY,
                point: None,
                certificate: None,
            }
        }
        Reduced::Problem(q, map) => (q, map),
    };

    let mut aux = reduced.clone();
    for obj in aux.objective.iter_mut() {
        *obj = 0.0;
    }
    let t = aux.add_var("phase1_t", -1.0);
    let nblocks = aux.spec.blocks.len();
    for b in 0..nblocks {
        match aux.spec.blocks[b].0 {
            BlockKind::Psd => {
                for i in 0..aux.block_dim(b) {
                    aux.add_sym_entry(t, b, i, i, -1.0);
                }
            }
            BlockKind::NonNegDiag => {
                let rows = aux.block_dim(b);
                if let super::problem::Coeff::Diag(entries) = {
                    // Append -1 on every existing row of this block.
                    let coeffs = &mut aux.coeff[t];
                    match coeffs.iter_mut().find(|(bb, _)| *bb == b) {
                        Some((_, c)) => c,
                        None => {
                            coeffs.push((b, super::problem::Coeff::Diag(Vec::new())));
                            &mut coeffs.last_mut().unwrap().1
                        }
                    }
                } {
                    for r in 0..rows {
                        entries.push((r as u32, -1.0));
                    }
                }
            }
        }
    }
    let cap = aux.add_diag_block();
    aux.add_row(cap, &[(t, -1.0)], 1.0);

    let mut sol = solve(&aux, &opts.solver);
    // Marginal problems can stall within an order of magnitude of the
    // requested tolerance; a looser rerun usually terminates cleanly and
    // the classification margin is far coarser than either tolerance.
    let mut tol = opts.solver.tol;
    while sol.status != SolveStatus::Optimal && tol < 1e-6 {
        tol = (tol * 100.0).min(1e-6);
        sol = solve(&aux, &SolverOptions { tol, ..opts.solver.clone() });
    }
    let t_star = sol.x.get(t).copied().unwrap_or(f64::NEG_INFINITY);

    if sol.status != SolveStatus::Optimal {
        // Even a stalled iterate can exhibit strict feasibility: drop the
        // margin variable and evaluate the blocks at the returned point
        // directly. This certifies the point itself, not the solver run.
        if sol.x.len() > reduced.nvars() {
            let x = &sol.x[..reduced.nvars()];
            if point_margin(&reduced, x) >= opts.margin {
                return FeasReport {
                    feasibility: Feasibility::StrictlyFeasible,
                    t_star,
                    point: Some(map.lift(x)),
                    certificate: None,
                };
            }
        }
        // The phase-I optimum can be fully degenerate (every block on the
        // boundary) when infeasibility is only as deep as a strictness
        // shift; the path-following iteration then stalls before t* is
        // resolved. A direct zero-objective run on the original system
        // still detects such problems through the growth of a dual ray.
        let mut plain = reduced.clone();
        for obj in plain.objective.iter_mut() {
            *obj = 0.0;
        }
        let direct = solve(&plain, &opts.solver);
        if direct.status == SolveStatus::Infeasible {
            return FeasReport {
                feasibility: Feasibility::Infeasible,
                t_star,
                point: None,
                certificate: Some(direct.dual),
            };
        }
        return FeasReport {
            feasibility: Feasibility::Indeterminate,
            t_star,
            point: None,
            certificate: None,
        };
    }
    if t_star >= opts.margin {
        let point = map.lift(&sol.x[..reduced.nvars()]);
        FeasReport {
            feasibility: Feasibility::StrictlyFeasible,
            t_star,
            point: Some(point),
            certificate: None,
        }
    } else if t_star <= -opts.margin {
        // Drop the cap block from the dual; the rest aligns with `reduced`.
        let mut cert = sol.dual;
        cert.truncate(nblocks);
        FeasReport {
            feasibility: Feasibility::Infeasible,
            t_star,
            point: None,
            certificate: Some(cert),
        }
    } else {
        FeasReport {
            feasibility: Feasibility::Indeterminate,
            t_star,
            point: None,
            certificate: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::problem::BlockSdp;

    #[test]
    fn strict_interval_is_feasible() {
        let mut p = BlockSdp::new();
        let x = p.add_var("x", 0.0);
        let d = p.add_diag_block();
        p.add_row(d, &[(x, 1.0)], 0.0); // x >= 0
        p.add_row(d, &[(x, -1.0)], 2.0); // x <= 2
        let rep = check_feasibility(&p, &FeasOptions::default());
        assert_eq!(rep.feasibility, Feasibility::StrictlyFeasible);
        assert!(rep.t_star > 0.5, "interval of width 2 has margin ~1");
        let pt = rep.point.unwrap();
        assert!(pt[0] > 0.0 && pt[0] < 2.0);
    }

    #[test]
    fn empty_interval_is_infeasible_with_certificate() {
        let mut p = BlockSdp::new();
        let x = p.add_var("x", 0.0);
        let d = p.add_diag_block();
        p.add_row(d, &[(x, 1.0)], -2.0); // x >= 2
        p.add_row(d, &[(x, -1.0)], 1.0); // x <= 1
        let rep = check_feasibility(&p, &FeasOptions::default());
        assert_eq!(rep.feasibility, Feasibility::Infeasible);
        let cert = rep.certificate.unwrap();
        // Certificate: z >= 0, trace ~ 1, annihilates the x-column, and
        // gives the constants a negative inner product.
        let z = &cert[0];
        assert!(z[(0, 0)] >= -1e-9 && z[(1, 1)] >= -1e-9);
        let tr = z[(0, 0)] + z[(1, 1)];
        assert!((tr - 1.0).abs() < 1e-6, "trace {tr}");
        let adj = z[(0, 0)] - z[(1, 1)];
        assert!(adj.abs() < 1e-6, "adjoint residual {adj}");
        let cz = -2.0 * z[(0, 0)] + 1.0 * z[(1, 1)];
        assert!(cz < -0.1, "separating value {cz}");
    }

    #[test]
    fn psd_strict_feasibility() {
        // [[1, x], [x, 1]] > 0 strictly for x in (-1, 1).
        let mut p = BlockSdp::new();
        let x = p.add_var("x", 0.0);
        let b = p.add_psd_block(2);
        p.add_const_sym(b, 0, 0, 1.0);
        p.add_const_sym(b, 1, 1, 1.0);
        p.add_sym_entry(x, b, 1, 0, 1.0);
        let rep = check_feasibility(&p, &FeasOptions::default());
        assert_eq!(rep.feasibility, Feasibility::StrictlyFeasible);
        assert!((rep.t_star - 1.0).abs() < 1e-5, "best margin is t=1 at x=0");
    }

    #[test]
    fn paired_rows_classify_without_interior_failure() {
        // x pinned to 5 by an inequality pair, and a second constraint
        // 6 - x >= 0 that holds strictly at the pin.
        let mut p = BlockSdp::new();
        let x = p.add_var("x", 0.0);
        let d = p.add_diag_block();
        p.add_row(d, &[(x, 1.0)], -5.0);
        p.add_row(d, &[(x, -1.0)], 5.0);
        p.add_row(d, &[(x, -1.0)], 6.0);
        let rep = check_feasibility(&p, &FeasOptions::default());
        assert_eq!(rep.feasibility, Feasibility::StrictlyFeasible);
        assert_eq!(rep.point.unwrap()[0], 5.0);
    }
}
