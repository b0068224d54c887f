//! Problem builders: continuous-time matrix-inequality feasibility
//! problems and their mixed-integer selection counterparts.

pub mod lmi;
pub mod misdp;

pub use lmi::{
    build_controllability_lmi, build_observability_lmi, build_yc_basis,
    controllability_residual, observability_residual, recover_gain, EpsMode, GainKind,
    GainResult, LmiOptions, LmiProblem, DEFAULT_GAIN_BOUND, DEFAULT_KAPPA, VAR_CAP,
};
pub use misdp::{
    build_asp, build_discrete_ssp, build_osl_qib_ssp, build_robust_linf_ssp, build_ssp,
    polished_selection_gain, recover_selection_gain, BinaryGroup, Bounds, DesignKind, Logistic,
    Misdp, ProxyEntry,
};
