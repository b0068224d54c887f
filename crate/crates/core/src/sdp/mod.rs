//! Conic solver layer: problem container, interior-point solver, presolve
//! reductions, and strict-feasibility classification.

pub mod backend;
pub mod feas;
pub mod problem;
pub mod reduce;
pub mod solver;

pub use backend::{backend_by_name, solve_sdp, ReferenceBackend, SdpBackend};
pub use feas::{check_feasibility, FeasOptions, FeasReport, Feasibility};
pub use problem::{BlockKind, BlockSdp, BlockSpec, Coeff, ConstBlock, SparseSym};
pub use reduce::{apply as apply_reduction, presolve, Reduced, Reduction, VarFate, VarMap};
pub use solver::{solve, SdpSolution, SolveStatus, SolverOptions};
