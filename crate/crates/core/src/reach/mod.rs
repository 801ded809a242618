//! Empirical reachable sets: seeded sampling, sphere coverage, steering to
//! targets, growth-rate tests and control-variation checks.

mod coverage;
mod growth;
mod sample;
mod steer;
mod variation;

pub use coverage::{ball_coverage, unit_directions, Coverage, CoverageConfig};
pub use growth::{
    calibrate_growth_constant, growth_rate_test, Calibration, CalibrationConfig, GrowthConfig, GrowthPoint,
    GrowthReport,
};
pub use sample::{sample_reachable, ReachPoint, ReachSample, SamplerConfig, SamplerMode, MAX_SCALE};
pub use steer::{steer_to, SteerConfig, SteerResult};
pub use variation::{
    calibrate_scan_magnitude, order_scan, rounding_floor, variation_check, MagnitudeCalibration, MagnitudeConfig, OrderScanConfig,
    OrderScanReport, ScanScale, VariationConfig, VariationPoint, VariationReport, RESTRICTION_NOTE,
};

pub(crate) use growth::growth_compiled;
pub(crate) use steer::steer_compiled;
pub(crate) use variation::{calibrate_compiled, order_scan_compiled};
