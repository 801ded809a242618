//! Growth transfers to a system with second-order contact: Brockett passes
//! at order 2 with a calibrated C, so its cubic-drift copy should pass with
//! C / 2.

use std::time::Instant;

use chronoreach::chrono::FlowConfig;
use chronoreach::perturb::main_theorem_experiment;
use chronoreach::polyalg::to_f64_vec;
use chronoreach::reach::{calibrate_growth_constant, CalibrationConfig, GrowthConfig};
use chronoreach::sysparse::parse_system;

fn main() -> chronoreach::Result<()> {
    let x = parse_system(include_str!("../../../corpus/brockett.ctrl"))?;
    let y = parse_system(include_str!("../../../corpus/brockett_cubic.ctrl"))?;
    let x0 = x.basepoint_or_origin();
    let start = Instant::now();
    let cal = calibrate_growth_constant(&x, &to_f64_vec(&x0), 2, &CalibrationConfig::default(), 1, &FlowConfig::default())?;
    let report = main_theorem_experiment(&x, &y, &x0, 2, cal.constant, &[0.5, 0.25, 0.125], &GrowthConfig::default(), 2)?;
    println!("C = {:.4}", cal.constant);
    for (name, r) in [("brockett", &report.x_report), ("brockett-cubic", &report.y_report)] {
        let cov: Vec<String> = r.points.iter().map(|p| format!("{:.3}", p.coverage)).collect();
        println!("{name:<15} C = {:.4}  coverage {}  {}", r.constant, cov.join(" "), r.verdict);
    }
    eprintln!("{:.1?}", start.elapsed());
    Ok(())
}
