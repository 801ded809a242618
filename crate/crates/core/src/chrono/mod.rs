//! Chronological calculus on polynomial fields: truncated flow expansions of
//! piecewise-constant schedules, a brute-force Picard oracle, RK4 flows, and
//! seminorm estimates.

mod estimate;
mod expansion;
mod flow;
mod oracle;
mod seminorm;

pub use estimate::{picard_error, picard_fit, OrderSlope, PicardFitConfig, PicardFitReport, PicardPoint};
pub use expansion::{chrono_power, exp_trunc_endpoint, exp_trunc_schedule, CoefficientDifference, FlowPolynomial};
pub use flow::{
    flow_endpoint, flow_numeric, CompiledField, CompiledSystem, FlowConfig, FlowOutcome, TracePoint, DEFAULT_NORM_CAP,
    DEFAULT_STEP,
};
pub use oracle::{picard_direct_oracle, picard_direct_oracle_exact, ORACLE_MAX_ORDER, ORACLE_MAX_SEGMENTS};
pub use seminorm::{seminorm, SeminormSpec, SeminormValue, DEFAULT_GRID};
