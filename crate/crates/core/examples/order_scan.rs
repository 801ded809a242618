//! Order scan on the four-dimensional chain system and on its copy with an
//! `x1^58` drift term: for each signed axis, the smallest k at which a
//! control variation of order k is found.

use chronoreach::chrono::FlowConfig;
use chronoreach::perturb::compare_order_scans;
use chronoreach::reach::{MagnitudeConfig, OrderScanConfig, ScanScale, SteerConfig, VariationConfig};
use chronoreach::sysparse::parse_system;

fn main() {
    let chain = parse_system(include_str!("../../../corpus/chain4.ctrl")).expect("corpus file parses");
    let perturbed = parse_system(include_str!("../../../corpus/chain4_perturbed.ctrl")).expect("corpus file parses");
    let x0 = [0.0; 4];
    let flow = FlowConfig::with_step(4e-3);
    // Coordinates here move at rates t, t^2, t^4 and t^9; balance them.
    let steer = SteerConfig {
        segments: 6,
        weighted: true,
        flow,
        ..SteerConfig::default()
    };
    let cfg = OrderScanConfig {
        k_max: 10,
        times: vec![0.8, 0.4, 0.2],
        scale: ScanScale::Calibrated {
            t_ref: 0.8,
            config: MagnitudeConfig {
                segments: 6,
                steer,
                flow,
                ..MagnitudeConfig::default()
            },
        },
        variation: VariationConfig {
            steer,
            stop_on_failure: true,
            ..VariationConfig::default()
        },
    };
    let mut dirs = Vec::new();
    for axis in 0..4 {
        for sign in [1.0, -1.0] {
            let mut v = vec![0.0; 4];
            v[axis] = sign;
            dirs.push(v);
        }
    }
    // Both systems are scanned against the same calibrated targets.
    let scans = compare_order_scans(&chain, &perturbed, &x0, &dirs, &cfg, 7).expect("valid scan");
    let show = |k: Option<u32>| k.map_or("none".to_string(), |k| k.to_string());
    println!("direction   chain4   chain4 + x1^58");
    for s in &scans {
        let axis = s.direction.iter().position(|d| *d != 0.0).expect("axis direction");
        let sign = if s.direction[axis] > 0.0 { '+' } else { '-' };
        println!("{sign}e{}         {:<8} {}", axis + 1, show(s.x.found), show(s.y.found));
    }
}
