//! Grid estimate of the weighted seminorm sup_{x in K} sum_r a_|r| |D^r (X f)(x)| / r!
//! for Brockett's X2 acting on a quadratic, over the cube [-1, 1]^3.

use chronoreach::chrono::{seminorm, SeminormSpec};
use chronoreach::polyalg::Rational;
use chronoreach::sysparse::{parse_poly, parse_system};

fn main() -> chronoreach::Result<()> {
    let sys = parse_system(include_str!("../../../corpus/brockett.ctrl"))?;
    // X2 f has degree 2, so at least three weights are needed.
    let f = parse_poly("x3^2 - x1*x2", 3)?;
    for len in [3, 4, 6] {
        let spec = SeminormSpec::cube(3, Rational::from_integer(1.into()), len)?;
        let v = seminorm(sys.field(2), &f, &spec)?;
        println!("{len} weights: {:.4} at {:?} ({} grid points)", v.value, v.argmax_point, v.grid_points);
    }
    Ok(())
}
