//! Calibrates a growth constant for the Brockett integrator by brute force,
//! then runs the growth-rate test at orders 2 and 1 with that constant.
//!
//! cargo run --release --example growth_rate

use chronoreach::chrono::FlowConfig;
use chronoreach::reach::{calibrate_growth_constant, growth_rate_test, CalibrationConfig, GrowthConfig};
use chronoreach::sysparse::parse_system;

const BROCKETT: &str = include_str!("../../../corpus/brockett.ctrl");

fn main() -> chronoreach::Result<()> {
    let sys = parse_system(BROCKETT)?;
    let x0 = [0.0; 3];
    let times = [0.5, 0.25, 0.125];

    let cal = calibrate_growth_constant(&sys, &x0, 2, &CalibrationConfig::default(), 1, &FlowConfig::default())?;
    println!(
        "C = {:.4} from {} samples (tightest direction {:?}, {} endpoints in its cone)",
        cal.constant, cal.samples, cal.worst_direction, cal.worst_support
    );
    for order in [2, 1] {
        let report = growth_rate_test(&sys, &x0, order, cal.constant, &times, &GrowthConfig::default(), 2)?;
        println!("order {order}:");
        for p in &report.points {
            println!(
                "  t = {:<6} radius = {:.3e}  sample coverage {:.3}  after steering {:.3}",
                p.t, p.radius, p.sample_coverage, p.coverage
            );
        }
        println!("  {}", report.verdict);
    }
    Ok(())
}
