//! Truncated flow expansion of a two-segment Brockett schedule: the
//! polynomial in the durations s1, s2, the brute-force Picard oracle at
//! concrete durations, and the RK4 flow.

use chronoreach::chrono::{exp_trunc_schedule, flow_numeric, picard_direct_oracle, FlowConfig};
use chronoreach::polyalg::{to_f64_vec, Rational};
use chronoreach::sysparse::parse_system;
use chronoreach::system::Schedule;

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn main() -> chronoreach::Result<()> {
    let sys = parse_system(include_str!("../../../corpus/brockett.ctrl"))?;
    let x0 = sys.basepoint_or_origin();
    let controls = vec![vec![q(1, 1), q(0, 1)], vec![q(0, 1), q(1, 1)]];

    let fp = exp_trunc_schedule(&sys, &controls, 2, &x0)?;
    println!("order 2 expansion:\n{fp}");

    let durations = vec![q(1, 10), q(1, 5)];
    let from_poly = fp.eval_exact(&durations)?;
    let oracle = picard_direct_oracle(&sys, &controls, 2, &x0, &durations)?;
    let exact: Vec<String> = from_poly.iter().map(|v| v.to_string()).collect();
    println!("expansion at (1/10, 1/5): [{}]", exact.join(", "));
    println!("oracle:                   {oracle:?}");

    let sched = Schedule::from_exact(&controls, &durations)?;
    let rk = flow_numeric(&sys, &sched, &to_f64_vec(&x0), &FlowConfig::default())?;
    println!("RK4 endpoint:             {:?}", rk.endpoint);
    Ok(())
}
