//! Numeric checks of the quantities that drive convergence: `B_n`, the
//! scenery CF substitution gap, moment and CF conditions on the strategy
//! law, and an exact enumeration oracle for tiny instances.

mod bn;
mod conditions;
mod enumerate;

pub use bn::{bn_replicas, compute_bn, substitution_gap, BnRun, BnSample};
pub use conditions::{
    check_bn_stabilization, check_cf_condition, check_cond_moments, check_gap_decay,
    check_uniform_integrability, CharFn, ConditionReport, CosineCf, Criterion, GaussianCf, LawCf,
    Verdict, DEFAULT_K_GRID, MOMENT_SLOPE_BOUND, NEAR_ZERO_SLACK, TAIL_REMAINDER_FRACTION,
    UI_SLOPE_BAND,
};
pub use enumerate::{enumerate_cf_exact, ENUMERATION_LIMIT, MAX_ENUMERATION_N};
