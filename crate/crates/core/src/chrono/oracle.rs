//! Brute-force Picard iterate by literal iterated integration.
//!
//! `E_0(τ) = id`, `E_k(τ) f = f + ∫_0^τ E_{k-1}(σ)(X̂(σ) f) dσ`, with `X̂(σ)`
//! the derivation of whichever segment is active at `σ`. Each `E_k(·) f` is
//! held as a piecewise polynomial in absolute time whose coefficients are
//! polynomials in x, and integrated exactly. Nothing here shares code with
//! the composed-exponential expansion it is used to check.

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::polyalg::{rational_to_f64, Poly, PolyVectorField, Rational};
use crate::system::{control_vf, ControlSystem};

pub const ORACLE_MAX_ORDER: u32 = 4;
pub const ORACLE_MAX_SEGMENTS: usize = 3;

/// Polynomial in time with x-polynomial coefficients; entry `d` multiplies `τ^d`.
#[derive(Clone)]
struct TimePoly(Vec<Poly>);

impl TimePoly {
    fn constant(f: Poly) -> Self {
        TimePoly(vec![f])
    }

    fn at(&self, tau: &Rational) -> Poly {
        let dim = self.0[0].dim();
        let mut acc = Poly::zero(dim);
        let mut pw = Rational::one();
        for c in &self.0 {
            acc = &acc + &c.scale(&pw);
            pw *= tau;
        }
        acc
    }

    /// Antiderivative vanishing at `τ = 0`.
    fn antiderivative(&self) -> TimePoly {
        let dim = self.0[0].dim();
        let mut out = vec![Poly::zero(dim)];
        for (d, c) in self.0.iter().enumerate() {
            out.push(c.scale(&Rational::new(1.into(), ((d + 1) as i64).into())));
        }
        TimePoly(out)
    }

    fn add_constant(mut self, c: &Poly) -> TimePoly {
        self.0[0] = &self.0[0] + c;
        self
    }
}

struct PathData {
    /// Segment start times `c_0 = 0 < ... ` and the total at the end.
    breaks: Vec<Rational>,
    fields: Vec<PolyVectorField>,
}

/// `τ ↦ E_k(τ) f`, one time polynomial per segment interval.
fn iterate(path: &PathData, k: u32, f: &Poly) -> Result<Vec<TimePoly>> {
    let p = path.fields.len();
    if k == 0 {
        return Ok(vec![TimePoly::constant(f.clone()); p]);
    }
    let mut pieces = Vec::with_capacity(p);
    let mut accumulated = Poly::zero(f.dim());
    for j in 0..p {
        let h = path.fields[j].lie_derivative(f)?;
        let inner = iterate(path, k - 1, &h)?;
        let anti = inner[j].antiderivative();
        let start = &path.breaks[j];
        let end = &path.breaks[j + 1];
        // on [c_j, c_{j+1}]: f + (integral up to c_j) + A(τ) - A(c_j)
        let offset = &(f + &accumulated) - &anti.at(start);
        pieces.push(anti.clone().add_constant(&offset));
        accumulated = &accumulated + &(&anti.at(end) - &anti.at(start));
    }
    Ok(pieces)
}

/// Exact `k`-th Picard iterate of the schedule applied to each coordinate
/// function, evaluated at `x0`.
pub fn picard_direct_oracle_exact(
    sys: &ControlSystem,
    controls: &[Vec<Rational>],
    k: u32,
    x0: &[Rational],
    durations: &[Rational],
) -> Result<Vec<Rational>> {
    if k > ORACLE_MAX_ORDER {
        return Err(Error::input(format!("oracle supports order <= {ORACLE_MAX_ORDER}, got {k}")));
    }
    if controls.len() > ORACLE_MAX_SEGMENTS {
        return Err(Error::input(format!(
            "oracle supports at most {ORACLE_MAX_SEGMENTS} segments, got {}",
            controls.len()
        )));
    }
    if controls.len() != durations.len() {
        return Err(Error::dim("oracle durations", controls.len(), durations.len()));
    }
    if x0.len() != sys.dim() {
        return Err(Error::dim("oracle basepoint", sys.dim(), x0.len()));
    }
    if durations.iter().any(|s| s < &Rational::zero()) {
        return Err(Error::input("negative duration"));
    }
    if controls.is_empty() {
        return Ok(x0.to_vec());
    }
    let fields = controls
        .iter()
        .map(|u| control_vf(sys, u))
        .collect::<Result<Vec<_>>>()?;
    let mut breaks = vec![Rational::zero()];
    for s in durations {
        let last = breaks.last().unwrap().clone();
        breaks.push(last + s);
    }
    let total = breaks.last().unwrap().clone();
    let path = PathData { breaks, fields };
    (0..sys.dim())
        .map(|i| {
            let pieces = iterate(&path, k, &Poly::var(sys.dim(), i))?;
            pieces.last().unwrap().at(&total).eval_exact(x0)
        })
        .collect()
}

/// Floating-point view of [`picard_direct_oracle_exact`].
pub fn picard_direct_oracle(
    sys: &ControlSystem,
    controls: &[Vec<Rational>],
    k: u32,
    x0: &[Rational],
    durations: &[Rational],
) -> Result<Vec<f64>> {
    Ok(picard_direct_oracle_exact(sys, controls, k, x0, durations)?
        .iter()
        .map(rational_to_f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chrono::chrono_power;
    use crate::polyalg::factorial;

    fn q(n: i64, d: i64) -> Rational {
        Rational::new(n.into(), d.into())
    }

    fn cubic_1d() -> ControlSystem {
        let x = Poly::var(1, 0);
        let f0 = PolyVectorField::new(vec![&x.pow(3) - &Poly::constant(1, q(1, 2))]).unwrap();
        let f1 = PolyVectorField::new(vec![&x * &x]).unwrap();
        ControlSystem::new("c", vec![f0, f1], None).unwrap()
    }

    #[test]
    fn order_zero_returns_basepoint() {
        let sys = cubic_1d();
        let out = picard_direct_oracle_exact(&sys, &[vec![q(1, 1)]], 0, &[q(1, 3)], &[q(1, 2)]).unwrap();
        assert_eq!(out, vec![q(1, 3)]);
    }

    #[test]
    fn single_segment_matches_closed_form() {
        let sys = cubic_1d();
        let u = vec![q(-1, 2)];
        let v = control_vf(&sys, &u).unwrap();
        let x0 = [q(2, 5)];
        let t = q(3, 10);
        for k in 0..=4 {
            let got = picard_direct_oracle_exact(&sys, &[u.clone()], k, &x0, &[t.clone()]).unwrap();
            let mut want = Rational::zero();
            for l in 0..=k {
                let g = chrono_power(&v, &Poly::var(1, 0), l).unwrap();
                let tl = num_traits::pow(t.clone(), l as usize);
                want += g.eval_exact(&x0).unwrap() * tl / Rational::from_integer(factorial(l));
            }
            assert_eq!(got[0], want, "k = {k}");
        }
    }

    #[test]
    fn limits_are_enforced() {
        let sys = cubic_1d();
        let u = vec![q(0, 1)];
        assert!(picard_direct_oracle_exact(&sys, &[u.clone()], 5, &[q(0, 1)], &[q(1, 1)]).is_err());
        let four = vec![u.clone(), u.clone(), u.clone(), u];
        let ds = vec![q(1, 10); 4];
        assert!(picard_direct_oracle_exact(&sys, &four, 2, &[q(0, 1)], &ds).is_err());
    }
}
