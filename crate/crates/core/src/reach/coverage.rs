use std::f64::consts::PI;

use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::sample::ReachSample;
use crate::error::{Error, Result};
use crate::seeding::stream_rng;
use crate::stats::{distance, norm};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageConfig {
    pub directions: usize,
    /// A target counts as covered when some endpoint lies within
    /// `delta * radius` of it.
    pub delta: f64,
    /// Only used for `n > 3`, where directions are random.
    pub seed: u64,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        CoverageConfig {
            directions: 64,
            delta: 0.05,
            seed: 0,
        }
    }
}

/// Unit directions in `R^n`: `±1` for `n = 1`, equally spaced angles for
/// `n = 2`, a Fibonacci lattice for `n = 3`, seeded Gaussian draws otherwise.
pub fn unit_directions(n: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    match n {
        0 => Vec::new(),
        1 => vec![vec![1.0], vec![-1.0]].into_iter().take(count.max(1).min(2)).collect(),
        2 => (0..count)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|i| {
                    let z = 1.0 - (2 * i + 1) as f64 / count as f64;
                    let r = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden * i as f64;
                    vec![r * phi.cos(), r * phi.sin(), z]
                })
                .collect()
        }
        _ => (0..count)
            .map(|i| {
                let mut rng = stream_rng(seed, i as u64);
                loop {
                    let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
                    let len = norm(&v);
                    if len > 1e-12 {
                        return v.into_iter().map(|x| x / len).collect();
                    }
                }
            })
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coverage {
    pub radius: f64,
    pub fraction: f64,
    pub directions: Vec<Vec<f64>>,
    pub covered: Vec<bool>,
}

impl Coverage {
    pub fn uncovered(&self) -> Vec<usize> {
        self.covered
            .iter()
            .enumerate()
            .filter(|(_, c)| !**c)
            .map(|(i, _)| i)
            .collect()
    }

    pub(crate) fn recount(&mut self) {
        let hit = self.covered.iter().filter(|c| **c).count();
        self.fraction = if self.covered.is_empty() {
            1.0
        } else {
            hit as f64 / self.covered.len() as f64
        };
    }
}

/// Fraction of sphere targets `x0 + radius * d` that lie within
/// `delta * radius` of some sample endpoint.
pub fn ball_coverage(sample: &ReachSample, x0: &[f64], radius: f64, cfg: &CoverageConfig) -> Result<Coverage> {
    if sample.points.is_empty() {
        return Err(Error::input("coverage needs a non-empty sample"));
    }
    if !(radius >= 0.0) {
        return Err(Error::input("radius must be non-negative"));
    }
    if x0.len() != sample.basepoint.len() {
        return Err(Error::dim("coverage basepoint", sample.basepoint.len(), x0.len()));
    }
    let directions = unit_directions(x0.len(), cfg.directions, cfg.seed);
    let tol = cfg.delta * radius;
    let covered = directions
        .iter()
        .map(|d| {
            if radius == 0.0 {
                return true;
            }
            let target: Vec<f64> = x0.iter().zip(d).map(|(x, v)| x + radius * v).collect();
            sample.endpoints().any(|e| distance(e, &target) <= tol)
        })
        .collect();
    let mut out = Coverage {
        radius,
        fraction: 0.0,
        directions,
        covered,
    };
    out.recount();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chrono::FlowConfig;
    use crate::polyalg::{Poly, PolyVectorField};
    use crate::reach::sample::{sample_reachable, SamplerConfig};
    use crate::system::ControlSystem;

    fn double_integrator_sample() -> ReachSample {
        let sys = ControlSystem::new(
            "di",
            vec![
                PolyVectorField::new(vec![Poly::zero(2), Poly::var(2, 0)]).unwrap(),
                PolyVectorField::new(vec![Poly::one(2), Poly::zero(2)]).unwrap(),
            ],
            None,
        )
        .unwrap();
        sample_reachable(&sys, &[0.0, 0.0], 1.0, &SamplerConfig::default(), 5, &FlowConfig::default()).unwrap()
    }

    #[test]
    fn directions_are_unit() {
        for n in 1..=5 {
            let ds = unit_directions(n, 16, 3);
            assert!(!ds.is_empty());
            for d in ds {
                assert!((norm(&d) - 1.0).abs() < 1e-12);
            }
        }
        assert_eq!(unit_directions(1, 64, 0).len(), 2);
    }

    #[test]
    fn zero_radius_and_unreachable_radius() {
        let s = double_integrator_sample();
        let cfg = CoverageConfig::default();
        assert_eq!(ball_coverage(&s, &[0.0, 0.0], 0.0, &cfg).unwrap().fraction, 1.0);
        assert_eq!(ball_coverage(&s, &[0.0, 0.0], 10.0, &cfg).unwrap().fraction, 0.0);
    }

    #[test]
    fn empty_sample_rejected() {
        let mut s = double_integrator_sample();
        s.points.clear();
        assert!(ball_coverage(&s, &[0.0, 0.0], 0.1, &CoverageConfig::default()).is_err());
    }
}
