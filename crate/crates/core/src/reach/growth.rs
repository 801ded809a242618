use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::coverage::{ball_coverage, unit_directions, CoverageConfig};
use super::sample::{sample_compiled, ReachSample, SamplerConfig, SamplerMode, MAX_SCALE};
use super::steer::{steer_compiled, SteerConfig};
use crate::chrono::{CompiledSystem, FlowConfig};
use crate::error::{Error, Result};
use crate::seeding::derive_seed;
use crate::stats::distance;
use crate::system::{ControlSystem, Schedule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthConfig {
    pub sampler: SamplerConfig,
    pub coverage: CoverageConfig,
    /// Steering refinement for directions the sample misses; `None` disables it.
    pub steer: Option<SteerConfig>,
    /// Nearest sample schedules offered to the optimizer as warm starts.
    pub warm_starts: usize,
    /// Pass threshold on the per-`t` coverage.
    pub min_coverage: f64,
    /// Largest admissible horizon `T`.
    pub horizon_cap: Option<f64>,
    pub flow: FlowConfig,
}

impl Default for GrowthConfig {
    fn default() -> Self {
        GrowthConfig {
            sampler: SamplerConfig::default(),
            coverage: CoverageConfig::default(),
            steer: Some(SteerConfig::default()),
            warm_starts: 2,
            min_coverage: 0.95,
            horizon_cap: None,
            flow: FlowConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthPoint {
    pub t: f64,
    pub radius: f64,
    pub sample_size: usize,
    pub discarded: usize,
    /// Coverage from the sample alone.
    pub sample_coverage: f64,
    /// Coverage after steering refinement.
    pub coverage: f64,
    /// Directions reached only by steering.
    pub steered: usize,
    pub uncovered: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub order: u32,
    pub constant: f64,
    pub delta: f64,
    pub directions: usize,
    pub min_coverage: f64,
    pub points: Vec<GrowthPoint>,
    pub passed: bool,
    pub verdict: String,
}

impl GrowthReport {
    /// `t,radius,coverage`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,radius,coverage\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{:e},{}", p.t, p.radius, p.coverage);
        }
        out
    }

    pub fn coverage_at(&self, t: f64) -> Option<f64> {
        self.points.iter().find(|p| p.t == t).map(|p| p.coverage)
    }
}

fn nearest_schedules<'a>(sample: &'a ReachSample, target: &[f64], count: usize) -> Vec<&'a Schedule> {
    let mut ranked: Vec<(f64, usize)> = sample
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| (distance(&p.endpoint, target), i))
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ranked
        .into_iter()
        .take(count)
        .map(|(_, i)| &sample.points[i].schedule)
        .collect()
}

pub(crate) fn growth_compiled(
    sys: &CompiledSystem,
    x0: &[f64],
    order: u32,
    constant: f64,
    times: &[f64],
    cfg: &GrowthConfig,
    seed: u64,
) -> Result<GrowthReport> {
    if times.is_empty() {
        return Err(Error::input("growth test needs at least one time"));
    }
    if !(constant >= 0.0) {
        return Err(Error::input("growth constant must be non-negative"));
    }
    if let Some(cap) = cfg.horizon_cap {
        if let Some(t) = times.iter().find(|&&t| t > cap) {
            return Err(Error::input(format!("time {t} exceeds the horizon cap {cap}")));
        }
    }
    // Horizons are handled from the largest down so that the schedule found
    // for each direction can seed the same direction at the next smaller t.
    let mut order_idx: Vec<usize> = (0..times.len()).collect();
    order_idx.sort_by(|&a, &b| times[b].total_cmp(&times[a]).then(a.cmp(&b)));
    let mut carried: Vec<Option<(f64, Schedule)>> = Vec::new();
    let mut slots: Vec<Option<GrowthPoint>> = vec![None; times.len()];
    for &ti in &order_idx {
        let t = times[ti];
        let radius = constant * t.powi(order as i32);
        let sample = sample_compiled(sys, x0, t, &cfg.sampler, derive_seed(seed, 2 * ti as u64), &cfg.flow)?;
        let sample_size = sample.points.len();
        let (mut cov, sample_coverage) = if sample.points.is_empty() {
            let directions = unit_directions(x0.len(), cfg.coverage.directions, cfg.coverage.seed);
            let covered = vec![radius == 0.0; directions.len()];
            let mut c = super::coverage::Coverage {
                radius,
                fraction: 0.0,
                directions,
                covered,
            };
            c.recount();
            let f = c.fraction;
            (c, f)
        } else {
            let c = ball_coverage(&sample, x0, radius, &cfg.coverage)?;
            let f = c.fraction;
            (c, f)
        };
        carried.resize(cov.directions.len(), None);
        let targets: Vec<Vec<f64>> = cov
            .directions
            .iter()
            .map(|d| x0.iter().zip(d).map(|(x, v)| x + radius * v).collect())
            .collect();
        let mut found: Vec<Option<Schedule>> = targets
            .iter()
            .zip(&cov.covered)
            .map(|(target, &c)| {
                if c {
                    nearest_schedules(&sample, target, 1).first().map(|s| (*s).clone())
                } else {
                    None
                }
            })
            .collect();
        let mut steered = 0;
        if let Some(steer) = &cfg.steer {
            let tol = cfg.coverage.delta * radius;
            let steer_cfg = SteerConfig {
                stop_below: 0.5 * tol,
                ..*steer
            };
            let steer_seed = derive_seed(seed, 2 * ti as u64 + 1);
            let missing = cov.uncovered();
            let reached: Vec<Result<(bool, Schedule)>> = missing
                .par_iter()
                .map(|&di| {
                    let target = &targets[di];
                    let mut warm: Vec<Schedule> = carried[di]
                        .iter()
                        .map(|(tp, s)| s.scaled(t / tp))
                        .collect();
                    if steer.segments == cfg.sampler.segments {
                        warm.extend(nearest_schedules(&sample, target, cfg.warm_starts).into_iter().cloned());
                    }
                    let warm_refs: Vec<&Schedule> = warm.iter().collect();
                    let r = steer_compiled(sys, x0, target, t, &steer_cfg, derive_seed(steer_seed, di as u64), &warm_refs)?;
                    Ok((r.distance <= tol, r.schedule))
                })
                .collect();
            for (&di, res) in missing.iter().zip(reached) {
                let (ok, schedule) = res?;
                if ok {
                    cov.covered[di] = true;
                    steered += 1;
                    found[di] = Some(schedule);
                }
            }
            cov.recount();
        }
        for (slot, f) in carried.iter_mut().zip(found) {
            if let Some(s) = f {
                *slot = Some((t, s));
            }
        }
        let uncovered = cov.uncovered().into_iter().map(|i| cov.directions[i].clone()).collect();
        slots[ti] = Some(GrowthPoint {
            t,
            radius,
            sample_size,
            discarded: sample.discarded,
            sample_coverage,
            coverage: cov.fraction,
            steered,
            uncovered,
        });
    }
    let points: Vec<GrowthPoint> = slots.into_iter().map(|p| p.expect("every time handled")).collect();
    let passed = points.iter().all(|p| p.coverage >= cfg.min_coverage);
    let verdict = if passed {
        format!("coverage >= {} at every t", cfg.min_coverage)
    } else {
        let worst = points
            .iter()
            .min_by(|a, b| a.coverage.total_cmp(&b.coverage))
            .expect("non-empty");
        format!(
            "not found under budget: coverage {:.3} < {} at t = {}",
            worst.coverage, cfg.min_coverage, worst.t
        )
    };
    Ok(GrowthReport {
        order,
        constant,
        delta: cfg.coverage.delta,
        directions: points
            .first()
            .map(|_| unit_directions(x0.len(), cfg.coverage.directions, cfg.coverage.seed).len())
            .unwrap_or(0),
        min_coverage: cfg.min_coverage,
        points,
        passed,
        verdict,
    })
}

/// Checks `B(x0, C t^N) ⊂ R(< t, x0)` on a grid of horizons by sphere
/// coverage, refining missed directions by steering.
pub fn growth_rate_test(
    sys: &ControlSystem,
    x0: &[f64],
    order: u32,
    constant: f64,
    times: &[f64],
    cfg: &GrowthConfig,
    seed: u64,
) -> Result<GrowthReport> {
    growth_compiled(&CompiledSystem::new(sys), x0, order, constant, times, cfg, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationConfig {
    pub samples: usize,
    pub segments: usize,
    pub scale: f64,
    pub t: f64,
    pub directions: usize,
    /// Half-angle (radians) of the cone around each direction inside which
    /// sample endpoints count towards that direction's reach.
    pub cone: f64,
    /// Multiplier applied to the smallest directional ratio.
    pub safety: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        CalibrationConfig {
            samples: 100_000,
            segments: 4,
            scale: MAX_SCALE,
            t: 0.5,
            directions: CoverageConfig::default().directions,
            cone: std::f64::consts::FRAC_PI_4,
            safety: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub order: u32,
    pub t: f64,
    pub constant: f64,
    /// `min_d reach(d) / t^N`.
    pub min_ratio: f64,
    pub worst_direction: Vec<f64>,
    /// Sample endpoints inside the cone of the worst direction.
    pub worst_support: usize,
    pub samples: usize,
    pub discarded: usize,
}

/// Brute-force growth constant from a large bang-bang sample at horizon `t`.
///
/// The reach along a direction `d` is the largest projection `<e - x0, d>`
/// over endpoints `e` within the configured cone around `d`; the constant is
/// `safety * min_d reach(d) / t^N`. Directions are the coverage directions
/// plus the coordinate axes.
pub fn calibrate_growth_constant(
    sys: &ControlSystem,
    x0: &[f64],
    order: u32,
    cfg: &CalibrationConfig,
    seed: u64,
    flow: &FlowConfig,
) -> Result<Calibration> {
    if !(cfg.cone > 0.0 && cfg.cone < std::f64::consts::FRAC_PI_2) {
        return Err(Error::input("cone half-angle must lie in (0, pi/2)"));
    }
    let sampler = SamplerConfig {
        count: cfg.samples,
        segments: cfg.segments,
        mode: SamplerMode::BangBang,
        scale: Some(cfg.scale),
    };
    let sample = sample_compiled(&CompiledSystem::new(sys), x0, cfg.t, &sampler, seed, flow)?;
    if sample.points.is_empty() {
        return Err(Error::input("every calibration schedule blew up"));
    }
    let n = x0.len();
    let mut dirs = unit_directions(n, cfg.directions, seed);
    for i in 0..n {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; n];
            e[i] = s;
            dirs.push(e);
        }
    }
    let cos_cone = cfg.cone.cos();
    let offsets: Vec<(Vec<f64>, f64)> = sample
        .endpoints()
        .map(|e| {
            let d: Vec<f64> = e.iter().zip(x0).map(|(a, b)| a - b).collect();
            let len = crate::stats::norm(&d);
            (d, len)
        })
        .collect();
    let reach: Vec<(f64, usize)> = dirs
        .par_iter()
        .map(|d| {
            let mut best = 0.0f64;
            let mut inside = 0;
            for (e, len) in &offsets {
                let along: f64 = e.iter().zip(d).map(|(a, b)| a * b).sum();
                if *len > 0.0 && along >= cos_cone * len {
                    inside += 1;
                    best = best.max(along);
                }
            }
            (best, inside)
        })
        .collect();
    let (worst, &(min_reach, worst_support)) = reach
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .0.total_cmp(&b.1 .0).then(a.0.cmp(&b.0)))
        .expect("at least one direction");
    let min_ratio = min_reach / cfg.t.powi(order as i32);
    Ok(Calibration {
        order,
        t: cfg.t,
        constant: cfg.safety * min_ratio,
        min_ratio,
        worst_direction: dirs[worst].clone(),
        worst_support,
        samples: sample.points.len(),
        discarded: sample.discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::{Poly, PolyVectorField};

    fn double_integrator() -> ControlSystem {
        ControlSystem::new(
            "di",
            vec![
                PolyVectorField::new(vec![Poly::zero(2), Poly::var(2, 0)]).unwrap(),
                PolyVectorField::new(vec![Poly::one(2), Poly::zero(2)]).unwrap(),
            ],
            None,
        )
        .unwrap()
    }

    #[test]
    fn zero_constant_always_passes() {
        let cfg = GrowthConfig {
            sampler: SamplerConfig {
                count: 10,
                ..SamplerConfig::default()
            },
            ..GrowthConfig::default()
        };
        let r = growth_rate_test(&double_integrator(), &[0.0, 0.0], 3, 0.0, &[0.5, 0.25], &cfg, 1).unwrap();
        assert!(r.passed);
        assert!(r.points.iter().all(|p| p.coverage == 1.0));
        assert!(r.to_csv().starts_with("t,radius,coverage\n0.5,0e0,1\n"));
    }

    #[test]
    fn horizon_cap_enforced() {
        let cfg = GrowthConfig {
            horizon_cap: Some(0.3),
            ..GrowthConfig::default()
        };
        assert!(growth_rate_test(&double_integrator(), &[0.0, 0.0], 2, 0.1, &[0.5], &cfg, 1).is_err());
    }

    #[test]
    fn double_integrator_order_two_but_not_one() {
        let sys = double_integrator();
        let flow = FlowConfig::default();
        let cal_cfg = CalibrationConfig {
            samples: 20_000,
            ..CalibrationConfig::default()
        };
        let c2 = calibrate_growth_constant(&sys, &[0.0, 0.0], 2, &cal_cfg, 9, &flow).unwrap();
        assert!(c2.constant > 0.0);
        let cfg = GrowthConfig {
            coverage: CoverageConfig {
                directions: 32,
                ..CoverageConfig::default()
            },
            ..GrowthConfig::default()
        };
        let times = [0.5, 0.25, 0.125];
        let pass = growth_rate_test(&sys, &[0.0, 0.0], 2, c2.constant, &times, &cfg, 4).unwrap();
        assert!(pass.passed, "{pass:?}");

        let fail = growth_rate_test(&sys, &[0.0, 0.0], 1, c2.constant, &[0.0625], &cfg, 4).unwrap();
        assert!(!fail.passed);
        assert!(fail.verdict.starts_with("not found under budget"));
    }
}
