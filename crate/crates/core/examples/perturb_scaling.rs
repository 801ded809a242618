//! Replay distance between Brockett and its cubic-drift copy, for targets in
//! the ball of radius `C t^2 / 2`. The fitted exponent should be at least 3.

use std::time::Instant;

use chronoreach::perturb::{perturb_scaling_experiment, ScalingConfig};
use chronoreach::sysparse::parse_system;

fn main() {
    let x = parse_system(include_str!("../../../corpus/brockett.ctrl")).expect("corpus file parses");
    let y = parse_system(include_str!("../../../corpus/brockett_cubic.ctrl")).expect("corpus file parses");
    let x0 = x.basepoint_or_origin();
    let start = Instant::now();
    let report = perturb_scaling_experiment(&x, &y, &x0, 2, 0.0932, &[0.4, 0.2, 0.1, 0.05], &ScalingConfig::default(), 7)
        .expect("systems have second-order contact");
    println!("t       radius     max dist   median dist");
    for p in &report.points {
        println!("{:<7} {:<10.3e} {:<10.3e} {:.3e}", p.t, p.radius, p.max_distance, p.median_distance);
    }
    match report.fit {
        Some(f) => println!("slope {:.3} (residual {:.2e}), alpha {:.3e}", f.slope, f.residual, report.alpha),
        None => println!("fit degenerate"),
    }
    eprintln!("{:.1?}", start.elapsed());
}
