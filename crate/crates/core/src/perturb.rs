//! Robustness under high-order perturbations.
//!
//! Two systems with `N`th contact at `x0` have truncated flow expansions that
//! agree to order `N`; steering with one and replaying the schedule on the
//! other then lands within `O(t^{N+1})`, which is what lets the growth rate
//! condition transfer from one system to the other.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::chrono::{exp_trunc_schedule, flow_endpoint, CoefficientDifference, CompiledSystem, FlowConfig};
use crate::error::{Error, Result};
use crate::polyalg::{kth_contact, to_f64_vec, ContactReport, MultiIndex, Poly, PolyVectorField, Rational};
use crate::reach::{
    calibrate_compiled, growth_compiled, order_scan_compiled, steer_compiled, GrowthConfig, GrowthReport,
    OrderScanConfig, OrderScanReport, ScanScale, SteerConfig,
};
use crate::seeding::{derive_seed, stream_rng};
use crate::stats::{distance, fit_loglog, median, LineFit};
use crate::system::{ControlSystem, Schedule};

/// Scale of the fixed-step RK4 error on a unit horizon: `step^4`.
pub fn integrator_tolerance(flow: &FlowConfig) -> f64 {
    flow.step.powi(4)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContactFlowReport {
    pub order: u32,
    pub segments: usize,
    pub contact: ContactReport,
    /// All rational coefficients of the two expansions coincide.
    pub equal: bool,
    pub difference: Option<CoefficientDifference>,
}

/// Compares the order-`k` flow expansions of `x` and `y` for one control
/// sequence, coefficient by coefficient and exactly.
///
/// When the systems have `k`th contact at `x0` the expansions must agree;
/// a difference then is reported as [`Error::Invariant`].
pub fn contact_flow_identity(
    x: &ControlSystem,
    y: &ControlSystem,
    x0: &[Rational],
    k: u32,
    controls: &[Vec<Rational>],
) -> Result<ContactFlowReport> {
    x.check_same_shape(y)?;
    let fx = exp_trunc_schedule(x, controls, k, x0)?;
    let fy = exp_trunc_schedule(y, controls, k, x0)?;
    let contact = kth_contact(x, y, x0, k)?;
    let difference = fx.first_difference(&fy);
    if contact.holds {
        if let Some(d) = &difference {
            return Err(Error::Invariant(format!(
                "systems have contact of order {k} but their expansions differ in coordinate {} at s^{:?}: {} vs {}",
                d.coordinate + 1,
                d.monomial,
                d.left,
                d.right
            )));
        }
    }
    Ok(ContactFlowReport {
        order: k,
        segments: controls.len(),
        contact,
        equal: difference.is_none(),
        difference,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapConfig {
    pub steer: SteerConfig,
    /// Steering misses above this are flagged (not fatal).
    pub max_steer_residual: Option<f64>,
    /// Targets farther than this from `x0` produce a warning.
    pub ball_radius: Option<f64>,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig {
            steer: SteerConfig::default(),
            max_steer_residual: None,
            ball_radius: None,
        }
    }
}

/// One evaluation of the perturbation map.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapResult {
    pub target: Vec<f64>,
    /// Endpoint of the steered schedule under the first system.
    pub x: Vec<f64>,
    /// Endpoint of the same schedule under the second system.
    pub y: Vec<f64>,
    pub schedule: Schedule,
    /// `‖x - target‖`.
    pub steer_residual: f64,
    /// `‖y - x‖`.
    pub replay_distance: f64,
    pub flagged: bool,
    pub warnings: Vec<String>,
}

fn map_compiled(
    xs: &CompiledSystem,
    ys: &CompiledSystem,
    x0: &[f64],
    target: &[f64],
    t: f64,
    cfg: &MapConfig,
    seed: u64,
    warm: &[&Schedule],
) -> Result<MapResult> {
    let mut warnings = Vec::new();
    if let Some(r) = cfg.ball_radius {
        let d = distance(target, x0);
        if d > r {
            warnings.push(format!("target lies {d:.3e} from x0, outside the ball of radius {r:.3e}"));
        }
    }
    let steered = steer_compiled(xs, x0, target, t, &cfg.steer, seed, warm)?;
    let y = flow_endpoint(ys, &steered.schedule, x0, &cfg.steer.flow)?;
    let flagged = cfg.max_steer_residual.map_or(false, |m| steered.distance > m);
    if flagged {
        warnings.push(format!("steering missed the target by {:.3e}", steered.distance));
    }
    Ok(MapResult {
        target: target.to_vec(),
        replay_distance: distance(&y, &steered.achieved),
        steer_residual: steered.distance,
        x: steered.achieved,
        y,
        schedule: steered.schedule,
        flagged,
        warnings,
    })
}

/// Steers `x` towards `target` in time `< t`, then replays the schedule on
/// `y`. The reported distance is measured from the endpoint actually reached
/// under `x`, not from the target.
pub fn perturbation_map(
    x: &ControlSystem,
    y: &ControlSystem,
    x0: &[f64],
    target: &[f64],
    t: f64,
    cfg: &MapConfig,
    seed: u64,
) -> Result<MapResult> {
    x.check_same_shape(y)?;
    map_compiled(&CompiledSystem::new(x), &CompiledSystem::new(y), x0, target, t, cfg, seed, &[])
}

fn require_contact(x: &ControlSystem, y: &ControlSystem, x0: &[Rational], order: u32) -> Result<ContactReport> {
    let contact = kth_contact(x, y, x0, order)?;
    if let Some(w) = &contact.witness {
        return Err(Error::input(format!(
            "systems lack contact of order {order}: D^{:?} of component {} of X{} is {} vs {}",
            w.index,
            w.component + 1,
            w.field,
            w.x_value,
            w.y_value
        )));
    }
    Ok(contact)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingConfig {
    pub targets: usize,
    /// Draw targets only along these coordinates (0-based); empty means all.
    pub target_axes: Vec<usize>,
    pub map: MapConfig,
    /// Steering stops once within this fraction of the ball radius.
    pub steer_tol_rel: f64,
    /// Grid points whose largest distance is below this many integrator
    /// tolerances are left out of the fit.
    pub floor_factor: f64,
}

impl Default for ScalingConfig {
    fn default() -> Self {
        ScalingConfig {
            targets: 20,
            target_axes: Vec::new(),
            map: MapConfig::default(),
            steer_tol_rel: 0.05,
            floor_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingSample {
    pub target_idx: usize,
    pub steer_residual: f64,
    pub replay_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingPoint {
    pub t: f64,
    /// `C t^N / 2`.
    pub radius: f64,
    pub max_distance: f64,
    pub median_distance: f64,
    pub samples: Vec<ScalingSample>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbReport {
    pub order: u32,
    pub constant: f64,
    pub contact: ContactReport,
    pub points: Vec<ScalingPoint>,
    /// Fit of `log max_distance` against `log t`.
    pub fit: Option<LineFit>,
    pub fit_points: usize,
    /// Fewer than two grid points above the noise floor.
    pub degenerate: bool,
    /// Smallest `α` with `max_distance <= α t^{N+1}` on the whole grid.
    pub alpha: f64,
    /// Largest grid time; the bound is only claimed for `t <= t_min_cut`.
    pub t_min_cut: f64,
    pub noise_floor: f64,
}

impl PerturbReport {
    /// `t,target_idx,steer_residual,replay_dist`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,target_idx,steer_residual,replay_dist\n");
        for p in &self.points {
            for s in &p.samples {
                let _ = writeln!(
                    out,
                    "{},{},{:e},{:e}",
                    p.t, s.target_idx, s.steer_residual, s.replay_distance
                );
            }
        }
        out
    }

    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }
}

/// Uniform point in the closed ball of the given radius around `x0`,
/// restricted to the coordinate subspace `axes` when it is non-empty.
fn ball_point<R: Rng>(rng: &mut R, x0: &[f64], axes: &[usize], radius: f64) -> Vec<f64> {
    let axes: Vec<usize> = if axes.is_empty() { (0..x0.len()).collect() } else { axes.to_vec() };
    let n = axes.len();
    let dir: Vec<f64> = loop {
        let g: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
        let len = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        if len > 1e-12 {
            break g.into_iter().map(|v| v / len).collect();
        }
    };
    let r = radius * rng.gen::<f64>().powf(1.0 / n as f64);
    let mut out = x0.to_vec();
    for (&i, d) in axes.iter().zip(dir) {
        out[i] += r * d;
    }
    out
}

/// Measures how the perturbation-map displacement scales with `t` for
/// targets in `B(x0, C t^N / 2)`. Requires `N`th contact.
#[allow(clippy::too_many_arguments)]
pub fn perturb_scaling_experiment(
    x: &ControlSystem,
    y: &ControlSystem,
    x0: &[Rational],
    order: u32,
    constant: f64,
    times: &[f64],
    cfg: &ScalingConfig,
    seed: u64,
) -> Result<PerturbReport> {
    x.check_same_shape(y)?;
    if times.is_empty() || times.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::input("times must be a non-empty list of positive values"));
    }
    if !(constant > 0.0) {
        return Err(Error::input("constant C must be positive"));
    }
    if cfg.targets == 0 {
        return Err(Error::input("at least one target per time is needed"));
    }
    if let Some(&i) = cfg.target_axes.iter().find(|&&i| i >= x.dim()) {
        return Err(Error::input(format!("target axis {} is out of range for dimension {}", i + 1, x.dim())));
    }
    let contact = require_contact(x, y, x0, order)?;
    let xs = CompiledSystem::new(x);
    let ys = CompiledSystem::new(y);
    let base = to_f64_vec(x0);
    let radius = |t: f64| 0.5 * constant * t.powi(order as i32);
    let maps: Vec<MapConfig> = times
        .iter()
        .map(|&t| MapConfig {
            steer: SteerConfig {
                stop_below: cfg.steer_tol_rel * radius(t),
                ..cfg.map.steer
            },
            ball_radius: Some(radius(t)),
            ..cfg.map
        })
        .collect();
    // Target j is the same point of the unit ball at every t, and is steered
    // from its rescaled schedule at the next larger t; both keep the
    // per-target curves comparable across the grid.
    let mut by_size: Vec<usize> = (0..times.len()).collect();
    by_size.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
    let zero = vec![0.0; base.len()];
    let per_target: Vec<Result<Vec<ScalingSample>>> = (0..cfg.targets)
        .into_par_iter()
        .map(|j| {
            let unit = ball_point(&mut stream_rng(seed, j as u64), &zero, &cfg.target_axes, 1.0);
            let mut out = vec![None; times.len()];
            let mut carried: Option<(f64, Schedule)> = None;
            for &ti in &by_size {
                let t = times[ti];
                let target: Vec<f64> = base.iter().zip(&unit).map(|(a, u)| a + radius(t) * u).collect();
                let warm = carried.as_ref().map(|(tp, s)| s.scaled(t / tp));
                let warm: Vec<&Schedule> = warm.iter().collect();
                let s = derive_seed(derive_seed(seed, ti as u64 + 1), j as u64);
                let r = map_compiled(&xs, &ys, &base, &target, t, &maps[ti], s, &warm)?;
                out[ti] = Some(ScalingSample {
                    target_idx: j,
                    steer_residual: r.steer_residual,
                    replay_distance: r.replay_distance,
                });
                carried = Some((t, r.schedule));
            }
            Ok(out.into_iter().map(|s| s.expect("every time visited")).collect())
        })
        .collect();
    let per_target = per_target.into_iter().collect::<Result<Vec<_>>>()?;
    let points: Vec<ScalingPoint> = times
        .iter()
        .enumerate()
        .map(|(ti, &t)| {
            let samples: Vec<ScalingSample> = per_target.iter().map(|v| v[ti].clone()).collect();
            let dists: Vec<f64> = samples.iter().map(|s| s.replay_distance).collect();
            ScalingPoint {
                t,
                radius: radius(t),
                max_distance: dists.iter().copied().fold(0.0, f64::max),
                median_distance: median(&dists),
                samples,
            }
        })
        .collect();
    let noise_floor = cfg.floor_factor * integrator_tolerance(&cfg.map.steer.flow);
    let (ts, ds): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter(|p| p.max_distance >= noise_floor)
        .map(|p| (p.t, p.max_distance))
        .unzip();
    let fit = if ts.len() >= 2 { fit_loglog(&ts, &ds) } else { None };
    let alpha = points
        .iter()
        .map(|p| p.max_distance / p.t.powi(order as i32 + 1))
        .fold(0.0, f64::max);
    Ok(PerturbReport {
        order,
        constant,
        contact,
        fit_points: ts.len(),
        degenerate: fit.is_none(),
        fit,
        alpha,
        t_min_cut: times.iter().copied().fold(0.0, f64::max),
        noise_floor,
        points,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MainTheoremReport {
    pub order: u32,
    /// Constant at which the first system passes.
    pub constant: f64,
    pub contact: ContactReport,
    pub x_report: GrowthReport,
    /// Growth test of the second system at `constant / 2`.
    pub y_report: GrowthReport,
}

impl MainTheoremReport {
    pub fn passed(&self) -> bool {
        self.y_report.passed
    }
}

/// Checks that `y`, having `N`th contact with `x` at `x0`, inherits the
/// growth rate condition of `x` with constant `C / 2`.
///
/// Both preconditions (contact, and `x` passing at `C`) are verified; a
/// failure of either is an input error.
#[allow(clippy::too_many_arguments)]
pub fn main_theorem_experiment(
    x: &ControlSystem,
    y: &ControlSystem,
    x0: &[Rational],
    order: u32,
    constant: f64,
    times: &[f64],
    cfg: &GrowthConfig,
    seed: u64,
) -> Result<MainTheoremReport> {
    x.check_same_shape(y)?;
    let contact = require_contact(x, y, x0, order)?;
    let base = to_f64_vec(x0);
    let x_report = growth_compiled(&CompiledSystem::new(x), &base, order, constant, times, cfg, derive_seed(seed, 0))?;
    if !x_report.passed {
        return Err(Error::input(format!(
            "the unperturbed system does not pass the growth test at order {order} with C = {constant}: {}",
            x_report.verdict
        )));
    }
    let y_report = growth_compiled(
        &CompiledSystem::new(y),
        &base,
        order,
        0.5 * constant,
        times,
        cfg,
        derive_seed(seed, 1),
    )?;
    Ok(MainTheoremReport {
        order,
        constant,
        contact,
        x_report,
        y_report,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationSpec {
    pub min_degree: u32,
    pub max_degree: u32,
    /// Monomials drawn per component (duplicates merge).
    pub terms: usize,
    /// Coefficients are `a / denominator` with `|a| <= denominator`.
    pub denominator: u32,
}

impl PerturbationSpec {
    /// Degrees `N+1..=N+3`: any such perturbation keeps `N`th contact.
    pub fn above_order(order: u32) -> Self {
        PerturbationSpec {
            min_degree: order + 1,
            max_degree: order + 3,
            terms: 2,
            denominator: 8,
        }
    }
}

/// Random polynomial fields, one per `X_0..X_m`, whose monomials are in
/// `x - x0` with degrees in `[min_degree, max_degree]` and coefficients in
/// `[-1, 1] ∩ Q`.
pub fn random_perturbation(
    dim: usize,
    fields: usize,
    x0: &[Rational],
    spec: &PerturbationSpec,
    seed: u64,
) -> Result<Vec<PolyVectorField>> {
    if x0.len() != dim {
        return Err(Error::dim("perturbation basepoint", dim, x0.len()));
    }
    if spec.min_degree > spec.max_degree || spec.denominator == 0 {
        return Err(Error::input("perturbation needs min_degree <= max_degree and a positive denominator"));
    }
    let shift: Vec<Rational> = x0.iter().map(|v| -v.clone()).collect();
    let mut rng = stream_rng(seed, 0);
    let den = spec.denominator as i64;
    (0..fields)
        .map(|_| {
            let comps = (0..dim)
                .map(|_| {
                    let mut p = Poly::zero(dim);
                    for _ in 0..spec.terms {
                        let deg = rng.gen_range(spec.min_degree..=spec.max_degree);
                        let mut e = vec![0u32; dim];
                        for _ in 0..deg {
                            e[rng.gen_range(0..dim)] += 1;
                        }
                        let a = rng.gen_range(-den..=den);
                        let c = Rational::new(a.into(), den.into());
                        p = &p + &Poly::monomial(c, MultiIndex::new(e));
                    }
                    p.translate(&shift)
                })
                .collect::<Result<Vec<_>>>()?;
            PolyVectorField::new(comps)
        })
        .collect()
}

/// `x` plus a [`random_perturbation`] above `order`.
pub fn perturb_above_order(x: &ControlSystem, x0: &[Rational], order: u32, seed: u64) -> Result<ControlSystem> {
    let extra = random_perturbation(x.dim(), x.m() + 1, x0, &PerturbationSpec::above_order(order), seed)?;
    Ok(x.perturbed(&extra)?.with_name(format!("{}_perturbed", x.name())))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanComparison {
    pub direction: Vec<f64>,
    pub x: OrderScanReport,
    pub y: OrderScanReport,
}

impl ScanComparison {
    pub fn matches(&self) -> bool {
        self.x.found == self.y.found
    }
}

/// Runs the same order scan (same seeds) on both systems for each direction.
/// A calibrated scale is calibrated once, on `x`, and shared, so both systems
/// face the same targets.
pub fn compare_order_scans(
    x: &ControlSystem,
    y: &ControlSystem,
    x0: &[f64],
    directions: &[Vec<f64>],
    cfg: &OrderScanConfig,
    seed: u64,
) -> Result<Vec<ScanComparison>> {
    x.check_same_shape(y)?;
    let xs = CompiledSystem::new(x);
    let ys = CompiledSystem::new(y);
    directions
        .par_iter()
        .enumerate()
        .map(|(i, v)| {
            let s = derive_seed(seed, i as u64);
            let (shared, calibration) = match cfg.scale {
                ScanScale::Calibrated { t_ref, config } => {
                    let cal = calibrate_compiled(&xs, x0, v, t_ref, &config, derive_seed(s, 0))?;
                    let shared = OrderScanConfig {
                        scale: ScanScale::Anchored {
                            magnitude: cal.magnitude,
                            t_ref,
                        },
                        ..cfg.clone()
                    };
                    (cal.steerable.is_some().then_some(shared), Some(cal))
                }
                _ => (None, None),
            };
            let scan = |sys: &CompiledSystem| -> Result<OrderScanReport> {
                let mut rep = order_scan_compiled(sys, x0, v, shared.as_ref().unwrap_or(cfg), s)?;
                if shared.is_some() {
                    rep.calibration = calibration.clone();
                }
                Ok(rep)
            };
            Ok(ScanComparison {
                direction: v.clone(),
                x: scan(&xs)?,
                y: scan(&ys)?,
            })
        })
        .collect()
}

/// Exact rational controls in `[-1, 1]` with the given denominator.
pub fn random_rational_controls(m: usize, p: usize, denominator: u32, seed: u64) -> Vec<Vec<Rational>> {
    let mut rng = stream_rng(seed, 0);
    let den = denominator.max(1) as i64;
    (0..p)
        .map(|_| {
            (0..m)
                .map(|_| Rational::new(rng.gen_range(-den..=den).into(), den.into()))
                .collect()
        })
        .collect()
}
