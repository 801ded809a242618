//! Exact Lie derivatives and brackets. The Brockett fields bracket to the
//! constant field (0, 0, 2), which is what makes the third direction
//! reachable at order 2.

use chronoreach::polyalg::{taylor_coeffs, MultiIndex, Rational};
use chronoreach::sysparse::{parse_poly, parse_system};

fn main() -> chronoreach::Result<()> {
    let sys = parse_system(include_str!("../../../corpus/brockett.ctrl"))?;
    let (x1, x2) = (sys.field(1), sys.field(2));
    println!("X1 = {x1}\nX2 = {x2}");
    println!("[X1, X2] = {}", x1.lie_bracket(x2)?);

    let f = parse_poly("x1*x2 + 1/2*x3^2", 3)?;
    println!("X1 f = {}", x1.lie_derivative(&f)?);
    println!("X2 X1 f = {}", x2.lie_derivative(&x1.lie_derivative(&f)?)?);

    // Jacobi identity on the three fields X1, X2 and X2 + x1 X1.
    let x3 = x2.add(&x1.scale(&Rational::new(1.into(), 3.into())))?;
    let jacobi = x1
        .lie_bracket(&x2.lie_bracket(&x3)?)?
        .add(&x2.lie_bracket(&x3.lie_bracket(x1)?)?)?
        .add(&x3.lie_bracket(&x1.lie_bracket(x2)?)?)?;
    println!("Jacobi sum is zero: {}", jacobi.is_zero());

    let origin = vec![Rational::from_integer(0.into()); 3];
    let coeffs = taylor_coeffs(x2, &origin, 1)?;
    let d = MultiIndex::new(vec![1, 0, 0]);
    let c = coeffs.get(2, &d).map(|v| v.to_string());
    println!("d/dx1 of the third component of X2 at 0: {}", c.unwrap_or_default());
    Ok(())
}
