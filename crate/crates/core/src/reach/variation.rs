use std::fmt::Write as _;

use serde::Serialize;

use super::sample::{sample_compiled, SamplerConfig, SamplerMode};
use super::steer::{steer_compiled, SteerConfig};
use crate::chrono::{CompiledSystem, FlowConfig};
use crate::error::{Error, Result};
use crate::seeding::derive_seed;
use crate::stats::{fit_loglog, norm, LineFit};
use crate::system::{ControlSystem, Schedule};

/// Appended to every report: steering only explores piecewise-constant
/// schedules with a fixed number of switches.
pub const RESTRICTION_NOTE: &str =
    "only steered endpoints of fixed-switch piecewise-constant schedules are examined; a failure is not a proof of absence";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariationConfig {
    /// Residual must stay below `rho * c * t^k`.
    pub rho: f64,
    /// Residual slope must reach `k + slope_margin`.
    pub slope_margin: f64,
    /// Residuals below `floor_rel * c * t^k`, or below the rounding floor
    /// (see [`rounding_floor`]), count as exact hits and are left out of the
    /// slope fit.
    pub floor_rel: f64,
    pub steer: SteerConfig,
    /// Stop at the first horizon (largest first) whose residual fails.
    pub stop_on_failure: bool,
}

impl Default for VariationConfig {
    fn default() -> Self {
        VariationConfig {
            rho: 0.1,
            slope_margin: 0.5,
            floor_rel: 1e-5,
            steer: SteerConfig::default(),
            stop_on_failure: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationPoint {
    pub t: f64,
    /// `c t^k`, the distance from `x0` to the target.
    pub target_dist: f64,
    pub residual: f64,
    pub schedule: Schedule,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariationReport {
    pub direction: Vec<f64>,
    pub order: u32,
    pub scale: f64,
    pub rho: f64,
    pub slope_margin: f64,
    /// Sorted by decreasing `t`; shorter than the grid after an early stop.
    pub points: Vec<VariationPoint>,
    pub fit: Option<LineFit>,
    pub fit_points: usize,
    pub residuals_ok: bool,
    pub slope_ok: bool,
    pub passed: bool,
    pub note: String,
}

impl VariationReport {
    /// `t,target_dist,residual`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,target_dist,residual\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{:e},{:e}", p.t, p.target_dist, p.residual);
        }
        out
    }
}

pub(crate) fn check_direction(v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(Error::dim("direction", dim, v.len()));
    }
    if (norm(v) - 1.0).abs() > 1e-9 {
        return Err(Error::input("direction must be a unit vector"));
    }
    Ok(())
}

pub(crate) fn variation_compiled(
    sys: &CompiledSystem,
    x0: &[f64],
    v: &[f64],
    k: u32,
    c: f64,
    times: &[f64],
    cfg: &VariationConfig,
    seed: u64,
    hints: &[VariationPoint],
) -> Result<VariationReport> {
    check_direction(v, sys.dim())?;
    if k == 0 {
        return Err(Error::input("order k must be at least 1"));
    }
    if !(c > 0.0) {
        return Err(Error::input("scale c must be positive"));
    }
    if times.is_empty() || times.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::input("times must be a non-empty list of positive values"));
    }
    // Largest horizon first: each solution, rescaled, seeds the next one.
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));

    let mut points: Vec<(usize, VariationPoint)> = Vec::new();
    let mut residuals_ok = true;
    let mut prev: Option<(f64, Schedule)> = None;
    for &i in &order {
        let t = times[i];
        let target_dist = c * t.powi(k as i32);
        let target: Vec<f64> = x0.iter().zip(v).map(|(x, d)| x + target_dist * d).collect();
        let steer = SteerConfig {
            stop_below: (0.1 * cfg.floor_rel * target_dist).max(rounding_floor(x0, t)),
            ..cfg.steer
        };
        let mut warm: Vec<Schedule> = prev.iter().map(|(tp, s)| s.scaled(t / tp)).collect();
        warm.extend(hints.iter().filter(|h| h.t == t).map(|h| h.schedule.clone()));
        let warm_refs: Vec<&Schedule> = warm.iter().collect();
        let r = steer_compiled(sys, x0, &target, t, &steer, derive_seed(seed, i as u64), &warm_refs)?;
        let ok = r.distance <= cfg.rho * target_dist;
        prev = Some((t, r.schedule.clone()));
        points.push((
            i,
            VariationPoint {
                t,
                target_dist,
                residual: r.distance,
                schedule: r.schedule,
            },
        ));
        if !ok {
            residuals_ok = false;
            if cfg.stop_on_failure {
                break;
            }
        }
    }
    points.sort_by(|a, b| b.1.t.total_cmp(&a.1.t).then(a.0.cmp(&b.0)));
    let points: Vec<VariationPoint> = points.into_iter().map(|(_, p)| p).collect();

    let (ts, rs): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.residual > (cfg.floor_rel * p.target_dist).max(rounding_floor(x0, p.t)))
        .map(|p| (p.t, p.residual))
        .unzip();
    let fit = if ts.len() >= 2 { fit_loglog(&ts, &rs) } else { None };
    let slope_ok = match &fit {
        Some(f) => f.slope >= k as f64 + cfg.slope_margin,
        None => true,
    };
    let passed = residuals_ok && slope_ok;
    let mut note = String::new();
    if !residuals_ok {
        note.push_str("not found under budget: a residual exceeded rho * c * t^k; ");
    } else if !slope_ok {
        note.push_str("not found under budget: residual slope below k + margin; ");
    } else if fit.is_none() {
        note.push_str("residuals at the noise floor, slope condition vacuous; ");
    }
    note.push_str(RESTRICTION_NOTE);
    Ok(VariationReport {
        direction: v.to_vec(),
        order: k,
        scale: c,
        rho: cfg.rho,
        slope_margin: cfg.slope_margin,
        fit_points: ts.len(),
        points,
        fit,
        residuals_ok,
        slope_ok,
        passed,
        note,
    })
}

/// Smallest miss that double precision can resolve at horizon `t`: endpoint
/// coordinates are sums of increments of size up to about `|x0| + t`, so
/// misses a few ulps of that are rounding, not a failure to hit the target.
pub fn rounding_floor(x0: &[f64], t: f64) -> f64 {
    let scale = x0.iter().fold(0.0f64, |m, x| m.max(x.abs())) + t;
    16.0 * f64::EPSILON * scale
}

/// Steers to `x0 + c t^k v` for each horizon and judges whether the misses
/// behave like `O(t^{k+1})`.
#[allow(clippy::too_many_arguments)]
pub fn variation_check(
    sys: &ControlSystem,
    x0: &[f64],
    v: &[f64],
    k: u32,
    c: f64,
    times: &[f64],
    cfg: &VariationConfig,
    seed: u64,
) -> Result<VariationReport> {
    variation_compiled(&CompiledSystem::new(sys), x0, v, k, c, times, cfg, seed, &[])
}

/// How the order scan sizes its targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanScale {
    /// Same `c` for every order.
    Fixed(f64),
    /// `c_k = magnitude / t_ref^k`: every order asks for the same distance
    /// at `t_ref`.
    Anchored { magnitude: f64, t_ref: f64 },
    /// Anchored, with the magnitude found by [`calibrate_scan_magnitude`].
    Calibrated { t_ref: f64, config: MagnitudeConfig },
}

impl ScanScale {
    /// `c_k`; `None` for a scale that still needs calibrating.
    pub fn scale(&self, k: u32) -> Option<f64> {
        match *self {
            ScanScale::Fixed(c) => Some(c),
            ScanScale::Anchored { magnitude, t_ref } => Some(magnitude / t_ref.powi(k as i32)),
            ScanScale::Calibrated { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderScanConfig {
    pub k_max: u32,
    pub times: Vec<f64>,
    pub scale: ScanScale,
    pub variation: VariationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderScanReport {
    pub direction: Vec<f64>,
    pub k_max: u32,
    pub found: Option<u32>,
    /// Present when the scale was [`ScanScale::Calibrated`].
    pub calibration: Option<MagnitudeCalibration>,
    pub attempts: Vec<VariationReport>,
    pub note: String,
}

pub(crate) fn order_scan_compiled(
    sys: &CompiledSystem,
    x0: &[f64],
    v: &[f64],
    cfg: &OrderScanConfig,
    seed: u64,
) -> Result<OrderScanReport> {
    if cfg.k_max == 0 {
        return Err(Error::input("k_max must be at least 1"));
    }
    check_direction(v, sys.dim())?;
    let (scale, calibration) = match cfg.scale {
        ScanScale::Calibrated { t_ref, config } => {
            let cal = calibrate_compiled(sys, x0, v, t_ref, &config, derive_seed(seed, 0))?;
            let scale = ScanScale::Anchored {
                magnitude: cal.magnitude,
                t_ref,
            };
            (scale, Some(cal))
        }
        other => (other, None),
    };
    if let Some(cal) = calibration.as_ref().filter(|c| c.steerable.is_none()) {
        return Ok(OrderScanReport {
            direction: v.to_vec(),
            k_max: cfg.k_max,
            found: None,
            note: format!(
                "not found under budget: nothing along the direction was steerable at t = {}; {RESTRICTION_NOTE}",
                cal.t_ref
            ),
            calibration,
            attempts: Vec::new(),
        });
    }
    let mut attempts: Vec<VariationReport> = Vec::new();
    let mut found = None;
    for k in 1..=cfg.k_max {
        let c = scale.scale(k).expect("scale resolved above");
        // The previous order's schedules are natural starting points: with an
        // anchored scale the targets at `t_ref` coincide.
        let hints = attempts.last().map(|a| a.points.clone()).unwrap_or_default();
        let rep = variation_compiled(sys, x0, v, k, c, &cfg.times, &cfg.variation, derive_seed(seed, k as u64), &hints)?;
        let passed = rep.passed;
        attempts.push(rep);
        if passed {
            found = Some(k);
            break;
        }
    }
    let note = match found {
        Some(k) => format!("first passing order {k}"),
        None => format!("not found under budget for k <= {}; {RESTRICTION_NOTE}", cfg.k_max),
    };
    Ok(OrderScanReport {
        direction: v.to_vec(),
        k_max: cfg.k_max,
        found,
        calibration,
        attempts,
        note,
    })
}

/// Smallest `k <= k_max` at which [`variation_check`] passes along `v`.
pub fn order_scan(
    sys: &ControlSystem,
    x0: &[f64],
    v: &[f64],
    cfg: &OrderScanConfig,
    seed: u64,
) -> Result<OrderScanReport> {
    order_scan_compiled(&CompiledSystem::new(sys), x0, v, cfg, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MagnitudeConfig {
    pub samples: usize,
    pub segments: usize,
    /// Each unsuccessful attempt divides the candidate magnitude by this.
    pub shrink: f64,
    pub max_steps: u32,
    /// Log-scale bisection steps between the first success and the last miss.
    pub refine: u32,
    /// Fraction of the steerable distance used as the scan magnitude.
    pub safety: f64,
    pub rho: f64,
    pub steer: SteerConfig,
    pub flow: FlowConfig,
}

impl Default for MagnitudeConfig {
    fn default() -> Self {
        MagnitudeConfig {
            samples: 5000,
            segments: 4,
            shrink: 4.0,
            max_steps: 24,
            refine: 2,
            safety: 0.5,
            rho: 0.1,
            steer: SteerConfig::default(),
            flow: FlowConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MagnitudeCalibration {
    pub direction: Vec<f64>,
    pub t_ref: f64,
    /// Largest sampled displacement along the direction.
    pub support: f64,
    /// Largest distance along the direction actually steered to, if any.
    pub steerable: Option<f64>,
    /// `safety * steerable`, or zero when nothing was steerable.
    pub magnitude: f64,
}

/// Scan magnitude for one direction: start from the sample support along
/// `v` at `t_ref`, shrink geometrically until steering reaches `x0 + m v`,
/// then bisect (in log scale) towards the last miss.
pub fn calibrate_scan_magnitude(
    sys: &ControlSystem,
    x0: &[f64],
    v: &[f64],
    t_ref: f64,
    cfg: &MagnitudeConfig,
    seed: u64,
) -> Result<MagnitudeCalibration> {
    calibrate_compiled(&CompiledSystem::new(sys), x0, v, t_ref, cfg, seed)
}

pub(crate) fn calibrate_compiled(
    compiled: &CompiledSystem,
    x0: &[f64],
    v: &[f64],
    t_ref: f64,
    cfg: &MagnitudeConfig,
    seed: u64,
) -> Result<MagnitudeCalibration> {
    check_direction(v, compiled.dim())?;
    if !(cfg.shrink > 1.0) {
        return Err(Error::input("shrink factor must exceed 1"));
    }
    let sampler = SamplerConfig {
        count: cfg.samples,
        segments: cfg.segments,
        mode: SamplerMode::BangBang,
        scale: None,
    };
    let sample = sample_compiled(compiled, x0, t_ref, &sampler, derive_seed(seed, 0), &cfg.flow)?;
    let along = |e: &[f64]| e.iter().zip(x0).zip(v).map(|((a, b), d)| (a - b) * d).sum::<f64>();
    let best = sample.points.iter().max_by(|a, b| along(&a.endpoint).total_cmp(&along(&b.endpoint)));
    let support = best.map_or(0.0, |p| along(&p.endpoint).max(0.0));
    // Warm starts: the sample farthest along v, then the last steered schedule.
    let mut warm: Vec<Schedule> = best.filter(|_| support > 0.0).map(|p| p.schedule.clone()).into_iter().collect();
    // Nothing moved along v: fall back to the overall excursion size.
    let start = if support > 0.0 {
        support
    } else {
        sample
            .endpoints()
            .map(|e| e.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    };
    let mut attempt = 0u64;
    let mut reaches = |m: f64| -> Result<bool> {
        attempt += 1;
        let target: Vec<f64> = x0.iter().zip(v).map(|(x, d)| x + m * d).collect();
        let steer = SteerConfig {
            stop_below: 0.1 * cfg.rho * m,
            ..cfg.steer
        };
        let refs: Vec<&Schedule> = warm.iter().collect();
        let r = steer_compiled(compiled, x0, &target, t_ref, &steer, derive_seed(seed, attempt), &refs)?;
        warm.truncate(1);
        warm.push(r.schedule);
        Ok(r.distance <= cfg.rho * m)
    };
    let mut steerable = None;
    let mut missed = None;
    let mut m = start;
    for _ in 0..cfg.max_steps {
        if !(m > 0.0) {
            break;
        }
        if reaches(m)? {
            steerable = Some(m);
            break;
        }
        missed = Some(m);
        m /= cfg.shrink;
    }
    if let (Some(mut lo), Some(mut hi)) = (steerable, missed) {
        for _ in 0..cfg.refine {
            let mid = (lo * hi).sqrt();
            if reaches(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        steerable = Some(lo);
    }
    Ok(MagnitudeCalibration {
        direction: v.to_vec(),
        t_ref,
        support,
        steerable,
        magnitude: cfg.safety * steerable.unwrap_or(0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::{Poly, PolyVectorField};

    #[test]
    fn rounding_floor_grows_with_the_state_scale() {
        assert!(rounding_floor(&[0.0], 0.2) < 1e-15);
        assert_eq!(rounding_floor(&[0.0, -2.0], 1.0), 3.0 * rounding_floor(&[0.0], 1.0));
    }

    fn brockett() -> ControlSystem {
        let x1 = Poly::var(3, 0);
        let x2 = Poly::var(3, 1);
        ControlSystem::new(
            "brockett",
            vec![
                PolyVectorField::zero(3),
                PolyVectorField::new(vec![Poly::one(3), Poly::zero(3), -&x2]).unwrap(),
                PolyVectorField::new(vec![Poly::zero(3), Poly::one(3), x1]).unwrap(),
            ],
            None,
        )
        .unwrap()
    }

    const TIMES: [f64; 3] = [0.4, 0.2, 0.1];

    #[test]
    fn brockett_horizontal_first_order() {
        let r = variation_check(&brockett(), &[0.0; 3], &[1.0, 0.0, 0.0], 1, 0.5, &TIMES, &VariationConfig::default(), 1)
            .unwrap();
        assert!(r.passed, "{r:?}");
        assert!(r.to_csv().starts_with("t,target_dist,residual\n0.4,"));
    }

    #[test]
    fn brockett_vertical_needs_second_order() {
        let sys = brockett();
        let up = [0.0, 0.0, 1.0];
        let cfg = VariationConfig::default();
        let first = variation_check(&sys, &[0.0; 3], &up, 1, 0.1, &TIMES, &cfg, 2).unwrap();
        assert!(!first.passed);
        assert!(first.note.starts_with("not found under budget"));
        let second = variation_check(&sys, &[0.0; 3], &up, 2, 0.1, &TIMES, &cfg, 2).unwrap();
        assert!(second.passed, "{second:?}");
    }

    #[test]
    fn scan_finds_orders() {
        let sys = brockett();
        let cfg = OrderScanConfig {
            k_max: 3,
            times: TIMES.to_vec(),
            scale: ScanScale::Anchored {
                magnitude: 0.02,
                t_ref: 0.4,
            },
            variation: VariationConfig {
                stop_on_failure: true,
                ..VariationConfig::default()
            },
        };
        assert_eq!(order_scan(&sys, &[0.0; 3], &[1.0, 0.0, 0.0], &cfg, 5).unwrap().found, Some(1));
        assert_eq!(order_scan(&sys, &[0.0; 3], &[0.0, 0.0, -1.0], &cfg, 5).unwrap().found, Some(2));
    }

    #[test]
    fn rejects_bad_inputs() {
        let sys = brockett();
        let cfg = VariationConfig::default();
        assert!(variation_check(&sys, &[0.0; 3], &[1.0, 1.0, 0.0], 1, 0.1, &TIMES, &cfg, 0).is_err());
        assert!(variation_check(&sys, &[0.0; 3], &[1.0, 0.0, 0.0], 0, 0.1, &TIMES, &cfg, 0).is_err());
        assert!(variation_check(&sys, &[0.0; 3], &[1.0, 0.0, 0.0], 1, 0.0, &TIMES, &cfg, 0).is_err());
    }
}
