use std::collections::BTreeMap;
use std::fmt;

use num_traits::Zero;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::polyalg::{factorial, rational_to_f64, MultiIndex, Poly, PolyVectorField, Rational};
use crate::system::{control_vf, ControlSystem};

/// `V̂^l f`: the `l`-fold Lie derivative.
pub fn chrono_power(v: &PolyVectorField, f: &Poly, l: u32) -> Result<Poly> {
    if v.dim() != f.dim() {
        return Err(Error::dim("chrono_power", v.dim(), f.dim()));
    }
    let mut g = f.clone();
    for _ in 0..l {
        if g.is_zero() {
            break;
        }
        g = v.lie_derivative(&g)?;
    }
    Ok(g)
}

/// Truncated flow of a piecewise-constant schedule, per coordinate, as a
/// polynomial in the formal segment durations `s1..sp`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPolynomial {
    dim: usize,
    segments: usize,
    order: u32,
    coords: Vec<Poly>,
}

impl FlowPolynomial {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// Coordinate `i` (zero-based) as a polynomial in `s1..sp`.
    pub fn coordinate(&self, i: usize) -> &Poly {
        &self.coords[i]
    }

    pub fn coordinates(&self) -> &[Poly] {
        &self.coords
    }

    pub fn eval(&self, durations: &[f64]) -> Result<Vec<f64>> {
        self.coords.iter().map(|c| c.eval(durations)).collect()
    }

    pub fn eval_exact(&self, durations: &[Rational]) -> Result<Vec<Rational>> {
        self.coords.iter().map(|c| c.eval_exact(durations)).collect()
    }

    /// Drops every term of total degree above `order`.
    pub fn truncate(&self, order: u32) -> FlowPolynomial {
        let coords = self
            .coords
            .iter()
            .map(|c| {
                Poly::from_terms(
                    self.segments,
                    c.terms()
                        .filter(|(r, _)| r.order() <= order)
                        .map(|(r, q)| (q.clone(), r.clone())),
                )
                .expect("same dimension")
            })
            .collect();
        FlowPolynomial {
            dim: self.dim,
            segments: self.segments,
            order: order.min(self.order),
            coords,
        }
    }

    /// First coefficient (coordinate, monomial in `s`) where two expansions differ.
    pub fn first_difference(&self, other: &FlowPolynomial) -> Option<CoefficientDifference> {
        for (i, (a, b)) in self.coords.iter().zip(&other.coords).enumerate() {
            let diff = a - b;
            let first = diff.terms().next().map(|(r, _)| r.clone());
            if let Some(r) = first {
                let r = &r;
                return Some(CoefficientDifference {
                    coordinate: i,
                    monomial: r.entries().to_vec(),
                    left: a.coeff(r).to_string(),
                    right: b.coeff(r).to_string(),
                });
            }
        }
        None
    }
}

impl fmt::Display for FlowPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.coords.iter().enumerate() {
            writeln!(f, "x{} = {}", i + 1, c.display_with("s"))?;
        }
        Ok(())
    }
}

/// Where two flow expansions disagree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientDifference {
    pub coordinate: usize,
    /// Exponents of `s1..sp`.
    pub monomial: Vec<u32>,
    pub left: String,
    pub right: String,
}

/// Series in the segment durations whose coefficients are polynomials in x.
type DurationSeries = BTreeMap<MultiIndex, Poly>;

/// Applies `Σ_{l} s_j^l / l! · V̂^l` to every term, keeping total degree `<= k`.
fn apply_segment(series: &DurationSeries, v: &PolyVectorField, j: usize, k: u32) -> Result<DurationSeries> {
    let p = series.keys().next().map(MultiIndex::len).unwrap_or(0);
    let mut out: DurationSeries = BTreeMap::new();
    for (alpha, g) in series {
        let budget = k - alpha.order();
        let mut power = g.clone();
        for l in 0..=budget {
            if power.is_zero() {
                break;
            }
            let mut idx = alpha.entries().to_vec();
            idx[j] += l;
            let coeff = Rational::from_integer(factorial(l)).recip();
            let term = power.scale(&coeff);
            let key = MultiIndex::new(idx);
            debug_assert_eq!(key.len(), p);
            match out.get_mut(&key) {
                Some(acc) => *acc = &*acc + &term,
                None => {
                    out.insert(key, term);
                }
            }
            if l < budget {
                power = v.lie_derivative(&power)?;
            }
        }
    }
    out.retain(|_, g| !g.is_zero());
    Ok(out)
}

fn check_controls(sys: &ControlSystem, controls: &[Vec<Rational>], x0: &[Rational]) -> Result<Vec<PolyVectorField>> {
    if x0.len() != sys.dim() {
        return Err(Error::dim("basepoint", sys.dim(), x0.len()));
    }
    controls.iter().map(|u| control_vf(sys, u)).collect()
}

/// Order-`k` truncated chronological expansion of the schedule with
/// `controls` (execution order), evaluated at `x0`.
///
/// The first segment's operator is outermost in the composition, so the
/// innermost (last) segment is applied to `x^i` first. Terms of total degree
/// above `k` in all durations jointly are discarded.
pub fn exp_trunc_schedule(
    sys: &ControlSystem,
    controls: &[Vec<Rational>],
    k: u32,
    x0: &[Rational],
) -> Result<FlowPolynomial> {
    let fields = check_controls(sys, controls, x0)?;
    let p = controls.len();
    let n = sys.dim();
    let mut coords = Vec::with_capacity(n);
    for i in 0..n {
        let mut series: DurationSeries = BTreeMap::new();
        series.insert(MultiIndex::zero(p), Poly::var(n, i));
        for j in (0..p).rev() {
            series = apply_segment(&series, &fields[j], j, k)?;
        }
        let mut coord = Poly::zero(p);
        for (alpha, g) in series {
            let c = g.eval_exact(x0)?;
            if !c.is_zero() {
                coord = &coord + &Poly::monomial(c, alpha);
            }
        }
        coords.push(coord);
    }
    Ok(FlowPolynomial {
        dim: n,
        segments: p,
        order: k,
        coords,
    })
}

/// Evaluates [`exp_trunc_schedule`] at concrete durations in floating point.
pub fn exp_trunc_endpoint(
    sys: &ControlSystem,
    controls: &[Vec<Rational>],
    durations: &[Rational],
    k: u32,
    x0: &[Rational],
) -> Result<Vec<f64>> {
    if durations.len() != controls.len() {
        return Err(Error::dim("durations", controls.len(), durations.len()));
    }
    let fp = exp_trunc_schedule(sys, controls, k, x0)?;
    Ok(fp
        .eval_exact(durations)?
        .iter()
        .map(rational_to_f64)
        .collect())
}
