use std::fmt::Write as _;

use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chrono::{flow_endpoint, CompiledSystem, FlowConfig};
use crate::error::{Error, Result};
use crate::seeding::stream_rng;
use crate::system::{ControlSystem, Schedule, Segment};

/// Largest fraction of the horizon a schedule may use; keeps totals strictly
/// below `t`.
pub const MAX_SCALE: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerMode {
    /// Controls drawn from `{-1, 0, 1}^m`.
    BangBang,
    /// Controls drawn uniformly from `[-1, 1]^m`.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplerConfig {
    pub count: usize,
    pub segments: usize,
    pub mode: SamplerMode,
    /// Fixed total-duration fraction `σ ∈ [0, 0.99]`; drawn uniformly from
    /// `(0, 0.99]` per schedule when `None`.
    pub scale: Option<f64>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            count: 4000,
            segments: 4,
            mode: SamplerMode::BangBang,
            scale: None,
        }
    }
}

impl SamplerConfig {
    fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::input("sample count must be at least 1"));
        }
        if self.segments == 0 {
            return Err(Error::input("segment count must be at least 1"));
        }
        if let Some(s) = self.scale {
            if !(0.0..=MAX_SCALE).contains(&s) {
                return Err(Error::input(format!("duration scale must lie in [0, {MAX_SCALE}]")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachPoint {
    pub endpoint: Vec<f64>,
    pub schedule: Schedule,
}

/// Endpoints of random schedules with total duration `< t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReachSample {
    pub basepoint: Vec<f64>,
    pub horizon: f64,
    pub seed: u64,
    pub config: SamplerConfig,
    pub points: Vec<ReachPoint>,
    /// Schedules dropped because the flow left the norm cap.
    pub discarded: usize,
}

impl ReachSample {
    pub fn endpoints(&self) -> impl Iterator<Item = &[f64]> {
        self.points.iter().map(|p| p.endpoint.as_slice())
    }

    /// `idx,x_1..x_n,schedule`
    pub fn to_csv(&self) -> String {
        let n = self.basepoint.len();
        let mut out = String::from("idx");
        for i in 1..=n {
            let _ = write!(out, ",x_{i}");
        }
        out.push_str(",schedule\n");
        for (i, p) in self.points.iter().enumerate() {
            let _ = write!(out, "{i}");
            for v in &p.endpoint {
                let _ = write!(out, ",{v:e}");
            }
            let _ = writeln!(out, ",{}", p.schedule);
        }
        out
    }
}

/// Durations `σ t w_j / Σ w` with exponential `w` (uniform on the simplex).
pub(crate) fn random_schedule<R: Rng>(rng: &mut R, m: usize, t: f64, cfg: &SamplerConfig) -> Schedule {
    let p = cfg.segments;
    let controls: Vec<Vec<f64>> = (0..p)
        .map(|_| {
            (0..m)
                .map(|_| match cfg.mode {
                    SamplerMode::BangBang => rng.gen_range(-1i32..=1) as f64,
                    SamplerMode::Uniform => rng.gen_range(-1.0..=1.0),
                })
                .collect()
        })
        .collect();
    let weights: Vec<f64> = (0..p).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = weights.iter().sum();
    let sigma = cfg.scale.unwrap_or_else(|| MAX_SCALE * (1.0 - rng.gen::<f64>()));
    let segments = controls
        .into_iter()
        .zip(weights)
        .map(|(control, w)| Segment {
            control,
            duration: if total > 0.0 { sigma * t * w / total } else { 0.0 },
        })
        .collect();
    Schedule::new(segments).expect("controls and durations are in range")
}

pub(crate) fn sample_compiled(
    sys: &CompiledSystem,
    x0: &[f64],
    t: f64,
    cfg: &SamplerConfig,
    seed: u64,
    flow: &FlowConfig,
) -> Result<ReachSample> {
    if !(t > 0.0) {
        return Err(Error::input("horizon t must be positive"));
    }
    if x0.len() != sys.dim() {
        return Err(Error::dim("sample basepoint", sys.dim(), x0.len()));
    }
    cfg.validate()?;
    let drawn: Vec<Result<Option<ReachPoint>>> = (0..cfg.count)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let schedule = random_schedule(&mut rng, sys.m(), t, cfg);
            match flow_endpoint(sys, &schedule, x0, flow) {
                Ok(endpoint) => Ok(Some(ReachPoint { endpoint, schedule })),
                Err(Error::BlowUp { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect();
    let mut points = Vec::with_capacity(cfg.count);
    let mut discarded = 0;
    for d in drawn {
        match d? {
            Some(p) => points.push(p),
            None => discarded += 1,
        }
    }
    Ok(ReachSample {
        basepoint: x0.to_vec(),
        horizon: t,
        seed,
        config: *cfg,
        points,
        discarded,
    })
}

/// Seeded sample of `R(< t, x0)` from `count` random `p`-segment schedules.
pub fn sample_reachable(
    sys: &ControlSystem,
    x0: &[f64],
    t: f64,
    cfg: &SamplerConfig,
    seed: u64,
    flow: &FlowConfig,
) -> Result<ReachSample> {
    sample_compiled(&CompiledSystem::new(sys), x0, t, cfg, seed, flow)
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
    fn zero_duration_sample_is_basepoint() {
        let cfg = SamplerConfig {
            count: 1,
            segments: 1,
            mode: SamplerMode::BangBang,
            scale: Some(0.0),
        };
        let s = sample_reachable(&double_integrator(), &[0.5, -1.0], 1.0, &cfg, 1, &FlowConfig::default()).unwrap();
        assert_eq!(s.points[0].endpoint, vec![0.5, -1.0]);
    }

    #[test]
    fn bounded_speed_and_strict_horizon() {
        let cfg = SamplerConfig {
            count: 300,
            mode: SamplerMode::Uniform,
            ..SamplerConfig::default()
        };
        let s = sample_reachable(&double_integrator(), &[0.0, 0.0], 1.0, &cfg, 3, &FlowConfig::default()).unwrap();
        assert_eq!(s.points.len(), 300);
        for p in &s.points {
            assert!(p.endpoint[0].abs() < 1.0);
            assert!(p.schedule.total() < 1.0);
            assert_eq!(p.schedule.len(), 4);
        }
    }

    #[test]
    fn deterministic_for_seed() {
        let cfg = SamplerConfig {
            count: 50,
            ..SamplerConfig::default()
        };
        let sys = double_integrator();
        let a = sample_reachable(&sys, &[0.0, 0.0], 0.5, &cfg, 11, &FlowConfig::default()).unwrap();
        let b = sample_reachable(&sys, &[0.0, 0.0], 0.5, &cfg, 11, &FlowConfig::default()).unwrap();
        let c = sample_reachable(&sys, &[0.0, 0.0], 0.5, &cfg, 12, &FlowConfig::default()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.to_csv().starts_with("idx,x_1,x_2,schedule\n0,"));
    }

    #[test]
    fn blow_ups_are_discarded() {
        let x = Poly::var(1, 0);
        let sys = ControlSystem::new("blow", vec![PolyVectorField::new(vec![x.pow(2)]).unwrap()], None).unwrap();
        let cfg = SamplerConfig {
            count: 20,
            segments: 1,
            mode: SamplerMode::BangBang,
            scale: Some(0.99),
        };
        let s = sample_reachable(&sys, &[1.0], 2.0, &cfg, 0, &FlowConfig::default()).unwrap();
        assert_eq!(s.discarded, 20);
        assert!(s.points.is_empty());
    }
}
