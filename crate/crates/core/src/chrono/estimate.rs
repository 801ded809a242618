//! Discrepancy between numerical flows and truncated expansions, and the
//! empirical fit of the `M t^{k+1} L / (1 - M t)` remainder bound.

use std::fmt::Write as _;

use serde::Serialize;

use super::expansion::exp_trunc_schedule;
use super::flow::{flow_endpoint, CompiledSystem, FlowConfig};
use crate::error::{Error, Result};
use crate::polyalg::{rational_from_f64, rational_to_f64, to_f64_vec, Rational};
use crate::stats::{distance, fit_loglog, LineFit};
use crate::system::{ControlSystem, Schedule};

fn exact_durations(durations: &[f64]) -> Result<Vec<Rational>> {
    durations
        .iter()
        .map(|&d| {
            if !(d >= 0.0) {
                return Err(Error::input(format!("invalid duration {d}")));
            }
            rational_from_f64(d).ok_or_else(|| Error::input(format!("invalid duration {d}")))
        })
        .collect()
}

/// Euclidean distance between the RK4 endpoint and the order-`k` expansion
/// evaluated at the same durations.
pub fn picard_error(
    sys: &ControlSystem,
    controls: &[Vec<Rational>],
    durations: &[f64],
    x0: &[Rational],
    k: u32,
    flow: &FlowConfig,
) -> Result<f64> {
    if controls.len() != durations.len() {
        return Err(Error::dim("picard_error durations", controls.len(), durations.len()));
    }
    let exact = exact_durations(durations)?;
    let fp = exp_trunc_schedule(sys, controls, k, x0)?;
    let approx: Vec<f64> = fp.eval_exact(&exact)?.iter().map(rational_to_f64).collect();
    let schedule = Schedule::from_exact(controls, &exact)?;
    let numeric = flow_endpoint(&CompiledSystem::new(sys), &schedule, &to_f64_vec(x0), flow)?;
    Ok(distance(&approx, &numeric))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PicardFitConfig {
    /// Errors at or below this are treated as exact zeros and left out of fits.
    pub noise_floor: f64,
    /// Number of candidate `M` values scanned on `(0, 1 / t_max)`.
    pub m_grid: usize,
}

impl Default for PicardFitConfig {
    fn default() -> Self {
        PicardFitConfig {
            noise_floor: 1e-12,
            m_grid: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardPoint {
    pub k: u32,
    pub t: f64,
    pub error: f64,
    /// Fitted bound at this point; `None` when the fit was declined.
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderSlope {
    pub k: u32,
    pub points_used: usize,
    pub fit: Option<LineFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PicardFitReport {
    pub points: Vec<PicardPoint>,
    pub slopes: Vec<OrderSlope>,
    pub m: Option<f64>,
    /// Smallest `L` for which the bound covers every measured point at the fitted `M`.
    pub l: Option<f64>,
    /// Least-squares `L` (geometric mean fit) at the fitted `M`.
    pub l_least_squares: Option<f64>,
    pub log_rms_residual: Option<f64>,
    pub dominates: bool,
    pub diagnostic: Option<String>,
}

impl PicardFitReport {
    pub fn slope(&self, k: u32) -> Option<f64> {
        self.slopes.iter().find(|s| s.k == k).and_then(|s| s.fit).map(|f| f.slope)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,t,error,bound\n");
        for p in &self.points {
            let bound = p.bound.map(|b| format!("{b:e}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{:e},{}", p.k, p.t, p.error, bound);
        }
        out
    }
}

fn bound_shape(m: f64, t: f64, k: u32) -> f64 {
    m * t.powi(k as i32 + 1) / (1.0 - m * t)
}

/// Measures [`picard_error`] over `orders × times` (durations split evenly
/// across segments) and fits slopes and the `(M, L)` bound.
pub fn picard_fit(
    sys: &ControlSystem,
    controls: &[Vec<Rational>],
    x0: &[Rational],
    orders: &[u32],
    times: &[f64],
    flow: &FlowConfig,
    cfg: &PicardFitConfig,
) -> Result<PicardFitReport> {
    if controls.is_empty() {
        return Err(Error::input("picard_fit needs at least one segment"));
    }
    if times.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::input("times must be positive"));
    }
    let p = controls.len();
    let mut points = Vec::new();
    for &k in orders {
        for &t in times {
            let durations = vec![t / p as f64; p];
            let error = picard_error(sys, controls, &durations, x0, k, flow)?;
            points.push(PicardPoint { k, t, error, bound: None });
        }
    }

    let usable: Vec<PicardPoint> = points.iter().filter(|p| p.error > cfg.noise_floor).cloned().collect();
    let slopes = orders
        .iter()
        .map(|&k| {
            let (ts, es): (Vec<f64>, Vec<f64>) = usable.iter().filter(|p| p.k == k).map(|p| (p.t, p.error)).unzip();
            OrderSlope {
                k,
                points_used: ts.len(),
                fit: fit_loglog(&ts, &es),
            }
        })
        .collect();

    if usable.len() < 2 {
        return Ok(PicardFitReport {
            points,
            slopes,
            m: None,
            l: None,
            l_least_squares: None,
            log_rms_residual: None,
            dominates: true,
            diagnostic: Some(format!(
                "degenerate fit: {} of {} errors above noise floor {:e}",
                usable.len(),
                orders.len() * times.len(),
                cfg.noise_floor
            )),
        });
    }

    let t_max = times.iter().cloned().fold(0.0, f64::max);
    let mut best: Option<(f64, f64, f64)> = None; // (rss, m, log L)
    for i in 1..=cfg.m_grid {
        // log-spaced on (1e-4 / t_max, 0.999 / t_max)
        let frac = i as f64 / cfg.m_grid as f64;
        let m = (1e-4f64.ln() + frac * (0.999f64.ln() - 1e-4f64.ln())).exp() / t_max;
        let logs: Vec<f64> = usable
            .iter()
            .map(|p| p.error.ln() - bound_shape(m, p.t, p.k).ln())
            .collect();
        let log_l = logs.iter().sum::<f64>() / logs.len() as f64;
        let rss: f64 = logs.iter().map(|v| (v - log_l).powi(2)).sum();
        if best.map_or(true, |(b, _, _)| rss < b) {
            best = Some((rss, m, log_l));
        }
    }
    let (rss, m, log_l) = best.expect("m_grid is non-empty");
    let l = usable
        .iter()
        .map(|p| p.error / bound_shape(m, p.t, p.k))
        .fold(0.0, f64::max);
    for p in points.iter_mut() {
        p.bound = Some(l * bound_shape(m, p.t, p.k));
    }
    let dominates = points
        .iter()
        .all(|p| p.error <= p.bound.unwrap() * (1.0 + 1e-12) || p.error <= cfg.noise_floor);
    Ok(PicardFitReport {
        points,
        slopes,
        m: Some(m),
        l: Some(l),
        l_least_squares: Some(log_l.exp()),
        log_rms_residual: Some((rss / usable.len() as f64).sqrt()),
        dominates,
        diagnostic: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::{Poly, PolyVectorField};

    fn exp_system() -> ControlSystem {
        ControlSystem::new("exp", vec![PolyVectorField::new(vec![Poly::var(1, 0)]).unwrap()], None).unwrap()
    }

    fn one() -> Vec<Rational> {
        vec![Rational::from_integer(1.into())]
    }

    #[test]
    fn exponential_second_order_remainder() {
        // e^0.1 - (1 + 0.1 + 0.005)
        let want = 0.1f64.exp() - 1.105;
        let got = picard_error(&exp_system(), &[vec![]], &[0.1], &one(), 2, &FlowConfig::default()).unwrap();
        assert!((got - want).abs() < 1e-7);
        assert!((got - 1.70918e-4).abs() < 1e-7);
    }

    #[test]
    fn order_zero_is_displacement() {
        let got = picard_error(&exp_system(), &[vec![]], &[0.2], &one(), 0, &FlowConfig::default()).unwrap();
        assert!((got - (0.2f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn exponential_slope_for_k2() {
        let rep = picard_fit(
            &exp_system(),
            &[vec![]],
            &one(),
            &[2],
            &[0.1, 0.05, 0.025],
            &FlowConfig::default(),
            &PicardFitConfig::default(),
        )
        .unwrap();
        assert!((rep.slope(2).unwrap() - 3.0).abs() < 0.15);
        assert!(rep.dominates);
        assert!(rep.diagnostic.is_none());
        assert!(rep.to_csv().starts_with("k,t,error,bound\n"));
    }

    #[test]
    fn nilpotent_fit_is_declined() {
        let x1 = Poly::var(2, 0);
        let sys = ControlSystem::new(
            "di",
            vec![
                PolyVectorField::new(vec![Poly::zero(2), x1]).unwrap(),
                PolyVectorField::new(vec![Poly::one(2), Poly::zero(2)]).unwrap(),
            ],
            None,
        )
        .unwrap();
        let zero = vec![Rational::from_integer(0.into()); 2];
        let rep = picard_fit(
            &sys,
            &[one()],
            &zero,
            &[2, 3],
            &[0.4, 0.2, 0.1],
            &FlowConfig::default(),
            &PicardFitConfig::default(),
        )
        .unwrap();
        assert!(rep.diagnostic.unwrap().contains("degenerate"));
        assert!(rep.m.is_none());
    }

    #[test]
    fn slopes_grow_with_order_on_cubic_system() {
        let x = Poly::var(1, 0);
        let f0 = PolyVectorField::new(vec![&(&x.pow(3) + &x) + &Poly::one(1)]).unwrap();
        let sys = ControlSystem::new("cubic", vec![f0], None).unwrap();
        let x0 = vec![Rational::new(1.into(), 2.into())];
        let rep = picard_fit(
            &sys,
            &[vec![]],
            &x0,
            &[1, 2, 3],
            &[0.04, 0.02, 0.01],
            &FlowConfig::with_step(1e-4),
            &PicardFitConfig::default(),
        )
        .unwrap();
        let s: Vec<f64> = (1..=3).map(|k| rep.slope(k).unwrap()).collect();
        assert!(s[0] <= s[1] && s[1] <= s[2], "{s:?}");
    }
}
