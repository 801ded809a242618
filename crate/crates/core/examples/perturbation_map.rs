//! One evaluation of the perturbation map: steer Brockett to a target, replay
//! the schedule on the cubic-drift copy, and compare endpoints.

use chronoreach::perturb::{perturbation_map, MapConfig};
use chronoreach::sysparse::parse_system;

fn main() -> chronoreach::Result<()> {
    let x = parse_system(include_str!("../../../corpus/brockett.ctrl"))?;
    let y = parse_system(include_str!("../../../corpus/brockett_cubic.ctrl"))?;
    let c = 0.09;
    for t in [0.4, 0.2, 0.1] {
        let radius = 0.5 * c * t * t;
        let target = [0.3 * radius, -0.5 * radius, 0.6 * radius];
        let cfg = MapConfig { ball_radius: Some(radius), ..MapConfig::default() };
        let r = perturbation_map(&x, &y, &[0.0; 3], &target, t, &cfg, 11)?;
        println!(
            "t = {t:<4} steer miss {:.2e}  |y - x| = {:.3e}  |y - x| / t^3 = {:.3e}",
            r.steer_residual,
            r.replay_distance,
            r.replay_distance / t.powi(3)
        );
    }
    Ok(())
}
