//! Steers the Brockett integrator to a point on the x3 axis, which no single
//! constant control reaches: the schedule has to loop.

use chronoreach::reach::{steer_to, SteerConfig};
use chronoreach::sysparse::parse_system;

fn main() -> chronoreach::Result<()> {
    let sys = parse_system(include_str!("../../../corpus/brockett.ctrl"))?;
    let target = [0.0, 0.0, 0.002];
    for t in [0.4, 0.2] {
        let cfg = SteerConfig { stop_below: 1e-12, ..SteerConfig::default() };
        let r = steer_to(&sys, &[0.0; 3], &target, t, &cfg, 5)?;
        println!("t = {t}: miss {:.2e} after {} starts, {} flows", r.distance, r.starts, r.evaluations);
        println!("  schedule {} (total {:.4})", r.schedule, r.schedule.total());
    }
    Ok(())
}
