//! Control variations of the Brockett integrator: x1 moves at order 1, x3
//! only at order 2, so the order-1 check along e3 fails and the order-2
//! check passes.

use chronoreach::reach::{variation_check, VariationConfig};
use chronoreach::sysparse::parse_system;

fn main() -> chronoreach::Result<()> {
    let sys = parse_system(include_str!("../../../corpus/brockett.ctrl"))?;
    let times = [0.5, 0.25, 0.125];
    for (v, k) in [([1.0, 0.0, 0.0], 1), ([0.0, 0.0, 1.0], 1), ([0.0, 0.0, 1.0], 2)] {
        let r = variation_check(&sys, &[0.0; 3], &v, k, 0.05, &times, &VariationConfig::default(), 9)?;
        print!("v = {v:?}, k = {k}: ");
        println!("{}", if r.passed { "passes" } else { "fails" });
        print!("{}", r.to_csv());
    }
    Ok(())
}
