//! Pluggable solver backends.
//!
//! Everything above this layer talks to an [`SdpBackend`]; the bundled
//! interior-point solver is registered under the name `"reference"`.
//! External conic solvers can be plugged in by implementing the trait on
//! the serialized problem (a `BlockSdp` is plain serde JSON).

use super::problem::BlockSdp;
use super::solver::{solve, SdpSolution, SolverOptions};

pub trait SdpBackend {
    fn name(&self) -> &str;

    /// Solves `min c'x  s.t.  sum_i x_i A_i + C >= 0` blockwise to the
    /// requested duality-gap tolerance.
    fn submit(&self, p: &BlockSdp, tol: f64) -> SdpSolution;
}

/// The bundled primal-dual interior-point solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceBackend;

impl SdpBackend for ReferenceBackend {
    fn name(&self) -> &str {
        "reference"
    }

    fn submit(&self, p: &BlockSdp, tol: f64) -> SdpSolution {
        let opts = SolverOptions { tol, ..SolverOptions::default() };
        solve(p, &opts)
    }
}

/// Looks a backend up by its registered name.
pub fn backend_by_name(name: &str) -> Option<Box<dyn SdpBackend>> {
    match name {
        "reference" => Some(Box::new(ReferenceBackend)),
        _ => None,
    }
}

/// Convenience entry point using the reference backend.
pub fn solve_sdp(p: &BlockSdp, tol: f64) -> SdpSolution {
    ReferenceBackend.submit(p, tol)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sdp::solver::SolveStatus;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scalar_bound_solves_to_one() {
        let mut p = BlockSdp::new();
        let x = p.add_var("x", 1.0);
        let b = p.add_psd_block(1);
        p.add_sym_entry(x, b, 0, 0, 1.0);
        p.add_const_sym(b, 0, 0, -1.0);
        let sol = solve_sdp(&p, 1e-8);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.obj - 1.0).abs() < 1e-6);
    }

    #[test]
    fn unknown_backend_name_is_rejected() {
        assert!(backend_by_name("reference").is_some());
        assert!(backend_by_name("no-such-solver").is_none());
    }

    /// A random problem whose feasibility status is known by
    /// construction, kept safely away from the feasibility boundary.
    fn random_problem(rng: &mut ChaCha8Rng, feasible: bool) -> BlockSdp {
        let nv = rng.gen_range(1..=4);
        let dim = rng.gen_range(1..=3);
        let mut p = BlockSdp::new();
        let vars: Vec<usize> =
            (0..nv).map(|i| p.add_var(format!("v{i}"), rng.gen_range(-1.0..=1.0))).collect();
        // Box rows keep the objective bounded.
        let bx = p.add_diag_block();
        for &v in &vars {
            p.add_row(bx, &[(v, 1.0)], 10.0);
            p.add_row(bx, &[(v, -1.0)], 10.0);
        }
        let b = p.add_psd_block(dim);
        for &v in &vars {
            for i in 0..dim {
                for j in 0..=i {
                    p.add_sym_entry(v, b, i, j, rng.gen_range(-1.0..=1.0));
                }
            }
        }
        // C := S - sum_i x*_i A_i with S = I makes x* strictly feasible
        // with unit margin.
        let xstar: Vec<f64> = vars.iter().map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let mut c = DMatrix::<f64>::identity(dim, dim);
        for (k, &v) in vars.iter().enumerate() {
            for (blk, co) in &p.coeff[v] {
                if *blk == b {
                    if let crate::sdp::Coeff::Sym(s) = co {
                        c -= xstar[k] * s.materialize(dim);
                    }
                }
            }
        }
        for i in 0..dim {
            for j in 0..=i {
                p.add_const_sym(b, i, j, c[(i, j)]);
            }
        }
        if !feasible {
            // Contradictory rows on the first variable: v >= 1, -v >= 0.
            p.add_row(bx, &[(vars[0], 1.0)], -1.0);
            p.add_row(bx, &[(vars[0], -1.0)], 0.0);
        }
        p.validate().unwrap();
        p
    }

    #[test]
    fn backend_status_matches_construction_on_random_problems() {
        let backend = backend_by_name("reference").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5d9);
        for trial in 0..50 {
            let feasible = trial % 2 == 0;
            let p = random_problem(&mut rng, feasible);
            let sol = backend.submit(&p, 1e-8);
            if feasible {
                assert_eq!(sol.status, SolveStatus::Optimal, "trial {trial}");
                assert!(sol.gap <= 1e-6, "trial {trial}: gap {}", sol.gap);
            } else {
                assert_eq!(sol.status, SolveStatus::Infeasible, "trial {trial}");
            }
        }
    }

    #[test]
    fn problems_serialize_and_resolve_identically() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = random_problem(&mut rng, true);
        let json = serde_json::to_string(&p).unwrap();
        let q: BlockSdp = serde_json::from_str(&json).unwrap();
        let a = solve_sdp(&p, 1e-8);
        let b = solve_sdp(&q, 1e-8);
        assert_eq!(a.status, b.status);
        assert_eq!(a.x, b.x);
    }
}
