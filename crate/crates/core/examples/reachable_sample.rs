//! Samples reachable endpoints of the Brockett integrator and measures how
//! much of a small ball around the origin they cover. Raw samples leave
//! gaps; the growth test closes them by steering.

use chronoreach::chrono::FlowConfig;
use chronoreach::reach::{ball_coverage, sample_reachable, CoverageConfig, SamplerConfig, SamplerMode};
use chronoreach::sysparse::parse_system;

fn main() -> chronoreach::Result<()> {
    let sys = parse_system(include_str!("../../../corpus/brockett.ctrl"))?;
    let x0 = [0.0; 3];
    let t = 0.25;
    for mode in [SamplerMode::BangBang, SamplerMode::Uniform] {
        let cfg = SamplerConfig { count: 4000, mode, ..SamplerConfig::default() };
        let sample = sample_reachable(&sys, &x0, t, &cfg, 3, &FlowConfig::default())?;
        let reach = sample
            .points
            .iter()
            .map(|p| p.endpoint[2].abs())
            .fold(0.0, f64::max);
        println!("{mode:?}: {} endpoints, largest |x3| = {reach:.3e}", sample.points.len());
        let coverage = CoverageConfig { delta: 0.25, ..CoverageConfig::default() };
        for radius in [1e-3, 3e-3, 1e-2] {
            let cov = ball_coverage(&sample, &x0, radius, &coverage)?;
            println!("  radius {radius:.0e}: coverage {:.3}", cov.fraction);
        }
    }
    Ok(())
}
