//! Deterministic fixed-step RK4 integration of piecewise-constant schedules.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polyalg::{rational_to_f64, Poly, PolyVectorField};
use crate::system::{ControlSystem, Schedule};

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_NORM_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    /// Upper bound on the RK4 step; each segment uses `s / ceil(s / step)`.
    pub step: f64,
    /// Integration aborts once the state norm exceeds this.
    pub norm_cap: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            step: DEFAULT_STEP,
            norm_cap: DEFAULT_NORM_CAP,
        }
    }
}

impl FlowConfig {
    pub fn with_step(step: f64) -> Self {
        FlowConfig {
            step,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone)]
struct Monomial {
    coeff: f64,
    /// `(variable, exponent)` for exponents > 0.
    factors: Vec<(usize, u32)>,
}

/// A vector field lowered to floating-point term lists.
#[derive(Debug, Clone)]
pub struct CompiledField {
    components: Vec<Vec<Monomial>>,
}

fn lower(p: &Poly) -> BTreeMap<Vec<u32>, f64> {
    p.terms()
        .map(|(r, c)| (r.entries().to_vec(), rational_to_f64(c)))
        .collect()
}

fn to_monomials(terms: BTreeMap<Vec<u32>, f64>) -> Vec<Monomial> {
    terms
        .into_iter()
        .filter(|(_, c)| *c != 0.0)
        .map(|(e, coeff)| Monomial {
            coeff,
            factors: e
                .iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(i, &k)| (i, k))
                .collect(),
        })
        .collect()
}

impl CompiledField {
    pub fn new(v: &PolyVectorField) -> Self {
        CompiledField {
            components: v.components().iter().map(|p| to_monomials(lower(p))).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, comp) in out.iter_mut().zip(&self.components) {
            let mut acc = 0.0;
            for m in comp {
                let mut v = m.coeff;
                for &(i, e) in &m.factors {
                    v *= if e == 1 { x[i] } else { x[i].powi(e as i32) };
                }
                acc += v;
            }
            *o = acc;
        }
    }
}

/// All fields of a system, lowered once for repeated integration.
#[derive(Debug, Clone)]
pub struct CompiledSystem {
    dim: usize,
    m: usize,
    /// Per component: the union of monomials over all fields, each with its
    /// coefficient in `X_0..X_m`.
    components: Vec<Vec<(Vec<(usize, u32)>, Vec<f64>)>>,
}

impl CompiledSystem {
    pub fn new(sys: &ControlSystem) -> Self {
        let m = sys.m();
        let components = (0..sys.dim())
            .map(|j| {
                let mut merged: BTreeMap<Vec<u32>, Vec<f64>> = BTreeMap::new();
                for (i, f) in sys.fields().iter().enumerate() {
                    for (e, c) in lower(f.component(j)) {
                        merged.entry(e).or_insert_with(|| vec![0.0; m + 1])[i] += c;
                    }
                }
                merged
                    .into_iter()
                    .map(|(e, coeffs)| {
                        let factors = e
                            .iter()
                            .enumerate()
                            .filter(|(_, &k)| k > 0)
                            .map(|(i, &k)| (i, k))
                            .collect();
                        (factors, coeffs)
                    })
                    .collect()
            })
            .collect();
        CompiledSystem {
            dim: sys.dim(),
            m,
            components,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `X_u` with like monomials merged.
    pub fn combine(&self, u: &[f64]) -> CompiledField {
        let components = self
            .components
            .iter()
            .map(|comp| {
                comp.iter()
                    .filter_map(|(factors, coeffs)| {
                        let coeff = coeffs[0] + coeffs[1..].iter().zip(u).map(|(c, w)| c * w).sum::<f64>();
                        (coeff != 0.0).then(|| Monomial {
                            coeff,
                            factors: factors.clone(),
                        })
                    })
                    .collect()
            })
            .collect();
        CompiledField { components }
    }
}

/// One recorded integration step.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TracePoint {
    /// Zero-based segment index.
    pub segment: usize,
    pub time: f64,
    pub state: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowOutcome {
    pub endpoint: Vec<f64>,
    pub trace: Vec<TracePoint>,
}

struct Rk4Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Scratch {
    fn new(n: usize) -> Self {
        Rk4Scratch {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    fn step(&mut self, f: &CompiledField, x: &mut [f64], h: f64) {
        let n = x.len();
        f.eval_into(x, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k1[i];
        }
        f.eval_into(&self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = x[i] + 0.5 * h * self.k2[i];
        }
        f.eval_into(&self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = x[i] + h * self.k3[i];
        }
        f.eval_into(&self.tmp, &mut self.k4);
        for i in 0..n {
            x[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

fn integrate(
    sys: &CompiledSystem,
    schedule: &Schedule,
    x0: &[f64],
    cfg: &FlowConfig,
    mut on_step: impl FnMut(usize, f64, &[f64]),
) -> Result<Vec<f64>> {
    if x0.len() != sys.dim() {
        return Err(Error::dim("flow basepoint", sys.dim(), x0.len()));
    }
    if !(cfg.step > 0.0) {
        return Err(Error::input("integration step must be positive"));
    }
    schedule.check_controls(sys.m())?;
    let mut x = x0.to_vec();
    let mut scratch = Rk4Scratch::new(x.len());
    let mut time = 0.0;
    for (j, seg) in schedule.segments().iter().enumerate() {
        if seg.duration == 0.0 {
            continue;
        }
        let field = sys.combine(&seg.control);
        let steps = (seg.duration / cfg.step).ceil().max(1.0) as usize;
        let h = seg.duration / steps as f64;
        let start = time;
        for s in 0..steps {
            scratch.step(&field, &mut x, h);
            time = start + h * (s + 1) as f64;
            let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            if !(norm <= cfg.norm_cap) {
                return Err(Error::BlowUp {
                    segment: j + 1,
                    time,
                    norm,
                });
            }
            on_step(j, time, &x);
        }
        time = start + seg.duration;
    }
    Ok(x)
}

/// Endpoint only; the workhorse for sampling and steering.
pub fn flow_endpoint(sys: &CompiledSystem, schedule: &Schedule, x0: &[f64], cfg: &FlowConfig) -> Result<Vec<f64>> {
    integrate(sys, schedule, x0, cfg, |_, _, _| {})
}

/// Integrates the schedule and records the state after every step.
pub fn flow_numeric(sys: &ControlSystem, schedule: &Schedule, x0: &[f64], cfg: &FlowConfig) -> Result<FlowOutcome> {
    let compiled = CompiledSystem::new(sys);
    let mut trace = vec![TracePoint {
        segment: 0,
        time: 0.0,
        state: x0.to_vec(),
    }];
    let endpoint = integrate(&compiled, schedule, x0, cfg, |segment, time, x| {
        trace.push(TracePoint {
            segment,
            time,
            state: x.to_vec(),
        })
    })?;
    Ok(FlowOutcome { endpoint, trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polyalg::Poly;
    use crate::system::Segment;

    fn exp_system() -> ControlSystem {
        ControlSystem::new("exp", vec![PolyVectorField::new(vec![Poly::var(1, 0)]).unwrap()], None).unwrap()
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

    fn seg(u: &[f64], d: f64) -> Segment {
        Segment {
            control: u.to_vec(),
            duration: d,
        }
    }

    #[test]
    fn exponential_growth() {
        let sched = Schedule::new(vec![seg(&[], 1.0)]).unwrap();
        let out = flow_numeric(&exp_system(), &sched, &[1.0], &FlowConfig::default()).unwrap();
        assert!((out.endpoint[0] - std::f64::consts::E).abs() < 1e-8);
        assert_eq!(out.trace.len(), 1001);
    }

    #[test]
    fn zero_field_is_stationary() {
        let sys = ControlSystem::new("z", vec![PolyVectorField::zero(2)], None).unwrap();
        let sched = Schedule::new(vec![seg(&[], 0.7), seg(&[], 0.0)]).unwrap();
        let out = flow_numeric(&sys, &sched, &[0.3, -2.0], &FlowConfig::default()).unwrap();
        assert_eq!(out.endpoint, vec![0.3, -2.0]);
    }

    #[test]
    fn brockett_composed_flow() {
        let (tau, sigma) = (0.3, 0.45);
        let sched = Schedule::new(vec![seg(&[1.0, 0.0], tau), seg(&[0.0, 1.0], sigma)]).unwrap();
        let out = flow_numeric(&brockett(), &sched, &[0.0; 3], &FlowConfig::default()).unwrap();
        let want = [tau, sigma, tau * sigma];
        for (a, b) in out.endpoint.iter().zip(want) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn blow_up_is_reported() {
        let x = Poly::var(1, 0);
        let sys = ControlSystem::new("bu", vec![PolyVectorField::new(vec![&x * &x]).unwrap()], None).unwrap();
        let sched = Schedule::new(vec![seg(&[], 0.5), seg(&[], 2.0)]).unwrap();
        match flow_numeric(&sys, &sched, &[1.0], &FlowConfig::default()) {
            Err(Error::BlowUp { segment, time, .. }) => {
                assert_eq!(segment, 2);
                assert!(time > 0.5 && time < 1.01);
            }
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn step_sizes_divide_segments() {
        let sched = Schedule::new(vec![seg(&[], 0.0105)]).unwrap();
        let out = flow_numeric(&exp_system(), &sched, &[1.0], &FlowConfig::with_step(1e-3)).unwrap();
        assert_eq!(out.trace.len(), 12);
        assert!((out.trace.last().unwrap().time - 0.0105).abs() < 1e-15);
    }
}
