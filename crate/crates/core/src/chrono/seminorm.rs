use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::polyalg::{factorial, rational_to_f64, MultiIndex, Poly, PolyVectorField, Rational};

/// Compact box, weight prefix and evaluation grid for the analytic seminorm
/// `sup (a_0 ... a_|r| / |r|!) |D^r (V̂f)(x)|`.
#[derive(Debug, Clone, PartialEq)]
pub struct SeminormSpec {
    bounds: Vec<(Rational, Rational)>,
    weights: Vec<Rational>,
    grid: usize,
}

pub const DEFAULT_GRID: usize = 11;

impl SeminormSpec {
    pub fn new(bounds: Vec<(Rational, Rational)>, weights: Vec<Rational>, grid: usize) -> Result<Self> {
        if bounds.iter().any(|(lo, hi)| lo >= hi) {
            return Err(Error::input("box must be non-degenerate on every axis"));
        }
        if weights.iter().any(|a| !a.is_positive()) {
            return Err(Error::input("weights must be strictly positive"));
        }
        if weights.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::input("weights must be non-increasing"));
        }
        if grid < 2 {
            return Err(Error::input("grid needs at least 2 points per axis"));
        }
        Ok(SeminormSpec { bounds, weights, grid })
    }

    /// `a_i = 2^{-i}`, `i = 0..len`.
    pub fn halving_weights(len: usize) -> Vec<Rational> {
        let two = Rational::from_integer(2.into());
        (0..len)
            .map(|i| num_traits::pow(two.clone(), i).recip())
            .collect()
    }

    /// `[-r, r]^dim` with halving weights and the default grid.
    pub fn cube(dim: usize, radius: Rational, weight_len: usize) -> Result<Self> {
        SeminormSpec::new(
            vec![(-radius.clone(), radius); dim],
            Self::halving_weights(weight_len),
            DEFAULT_GRID,
        )
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    fn grid_points(&self) -> Vec<Vec<f64>> {
        let axes: Vec<Vec<f64>> = self
            .bounds
            .iter()
            .map(|(lo, hi)| {
                let (lo, hi) = (rational_to_f64(lo), rational_to_f64(hi));
                (0..self.grid)
                    .map(|i| lo + (hi - lo) * i as f64 / (self.grid - 1) as f64)
                    .collect()
            })
            .collect();
        let mut points = vec![Vec::new()];
        for axis in &axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        points
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeminormValue {
    /// Grid maximum; a lower bound for the supremum over the box.
    pub value: f64,
    pub argmax_point: Vec<f64>,
    pub argmax_index: Vec<u32>,
    pub grid_points: usize,
}

/// Grid estimate of `ρ_{K,a,f}(V)`.
pub fn seminorm(v: &PolyVectorField, f: &Poly, spec: &SeminormSpec) -> Result<SeminormValue> {
    if v.dim() != f.dim() {
        return Err(Error::dim("seminorm function", v.dim(), f.dim()));
    }
    if spec.dim() != v.dim() {
        return Err(Error::dim("seminorm box", v.dim(), spec.dim()));
    }
    let g = v.lie_derivative(f)?;
    let points = spec.grid_points();
    let mut best = SeminormValue {
        value: 0.0,
        argmax_point: points[0].clone(),
        argmax_index: vec![0; v.dim()],
        grid_points: points.len(),
    };
    let Some(deg) = g.degree() else {
        return Ok(best);
    };
    if spec.weights.len() < deg as usize + 1 {
        return Err(Error::input(format!(
            "weight sequence has {} entries; degree {} needs {}",
            spec.weights.len(),
            deg,
            deg + 1
        )));
    }
    let mut prefix = Rational::one();
    let mut weight_by_order = Vec::with_capacity(deg as usize + 1);
    for (order, a) in spec.weights.iter().take(deg as usize + 1).enumerate() {
        prefix *= a;
        weight_by_order.push(rational_to_f64(&(&prefix / Rational::from_integer(factorial(order as u32)))));
    }
    for r in MultiIndex::all_up_to(v.dim(), deg) {
        let d = g.dpow(&r)?;
        if d.is_zero() {
            continue;
        }
        let w = weight_by_order[r.order() as usize];
        let constant = d.as_constant().filter(|c| !c.is_zero());
        for x in &points {
            let val = match &constant {
                Some(c) => rational_to_f64(&c.abs()),
                None => d.eval(x)?.abs(),
            } * w;
            if val > best.value {
                best.value = val;
                best.argmax_point = x.clone();
                best.argmax_index = r.entries().to_vec();
            }
            if constant.is_some() {
                break;
            }
        }
    }
    Ok(best)
}
