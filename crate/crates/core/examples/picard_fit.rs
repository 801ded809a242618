//! Picard truncation error for x' = x from x0 = 1 against the closed form
//! |e^t - sum_{l<=k} t^l / l!|, with fitted slopes (expected k + 1).

use chronoreach::chrono::{picard_fit, FlowConfig, PicardFitConfig};
use chronoreach::sysparse::parse_system;

fn main() -> chronoreach::Result<()> {
    let sys = parse_system(include_str!("../../../corpus/exp1d.ctrl"))?;
    let x0 = sys.basepoint_or_origin();
    let times = [0.1, 0.05, 0.025];
    let report = picard_fit(&sys, &[vec![]], &x0, &[1, 2, 3, 4], &times, &FlowConfig::default(), &PicardFitConfig::default())?;

    println!(" k  t       measured    analytic");
    for p in &report.points {
        let partial: f64 = (0..=p.k).map(|l| p.t.powi(l as i32) / (1..=l).product::<u32>() as f64).sum();
        println!("{:>2}  {:<6}  {:.4e}  {:.4e}", p.k, p.t, p.error, (p.t.exp() - partial).abs());
    }
    for s in &report.slopes {
        if let Some(f) = s.fit {
            println!("k = {}: slope {:.3}", s.k, f.slope);
        }
    }
    println!("bound M = {:?}, L = {:?}, dominates every point: {}", report.m, report.l, report.dominates);
    Ok(())
}
