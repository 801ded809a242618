//! Steering: find a `p`-segment schedule with total duration `< t` whose
//! endpoint is as close as possible to a target.
//!
//! Levenberg–Marquardt on the endpoint residual runs from the warm starts and
//! seeded random starts. An optional Nelder–Mead pass before each run helps
//! when the residual is not smooth (e.g. near blow-up); it is off by default
//! because on smooth problems it tends to collapse segments to zero length.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::Exp1;
use serde::Serialize;

use super::sample::MAX_SCALE;
use crate::chrono::{flow_endpoint, CompiledSystem, FlowConfig};
use crate::error::{Error, Result};
use crate::seeding::stream_rng;
use crate::stats::distance;
use crate::system::{ControlSystem, Schedule, Segment};

/// Objective assigned to schedules whose flow leaves the norm cap.
const BLOWUP_PENALTY: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteerConfig {
    pub segments: usize,
    /// Random starts after the warm starts.
    pub restarts: usize,
    /// Objective evaluations per Nelder–Mead run; `0` skips it.
    pub nm_evals: usize,
    /// Levenberg–Marquardt iterations per polish.
    pub lm_iters: usize,
    /// Stop as soon as a schedule gets this close to the target.
    pub stop_below: f64,
    /// Balance the residual across coordinates that move at very different
    /// rates (see [`Problem::residual_scales`]) before the final polish.
    pub weighted: bool,
    pub flow: FlowConfig,
}

impl Default for SteerConfig {
    fn default() -> Self {
        SteerConfig {
            segments: 4,
            restarts: 100,
            nm_evals: 0,
            lm_iters: 12,
            stop_below: 0.0,
            weighted: false,
            flow: FlowConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SteerResult {
    pub target: Vec<f64>,
    pub achieved: Vec<f64>,
    pub distance: f64,
    pub schedule: Schedule,
    /// Flow evaluations spent.
    pub evaluations: usize,
    /// Optimizer starts actually run (warm plus random).
    pub starts: usize,
}

/// Unconstrained parameters: `p*m` angles `a` (segment-major) with controls
/// `u = sin a`, then `p` duration roots `b` with durations
/// `t * b_j^2 * g(B)`, `B = Σ b^2`, `g(B) = 0.99 (1 - e^{-B}) / B`.
/// The map is smooth and every image has total duration below `0.99 t`.
struct Problem<'a> {
    sys: &'a CompiledSystem,
    x0: &'a [f64],
    target: &'a [f64],
    t: f64,
    p: usize,
    m: usize,
    flow: FlowConfig,
    evals: usize,
}

fn total_gain(b2: f64) -> f64 {
    if b2 < 1e-8 {
        MAX_SCALE * (1.0 - 0.5 * b2)
    } else {
        MAX_SCALE * (-(-b2).exp_m1()) / b2
    }
}

impl Problem<'_> {
    fn len(&self) -> usize {
        self.p * (self.m + 1)
    }

    fn decode(&self, z: &[f64]) -> Schedule {
        let (angles, roots) = z.split_at(self.p * self.m);
        let b2: f64 = roots.iter().map(|b| b * b).sum();
        let gain = total_gain(b2);
        let segments = (0..self.p)
            .map(|j| Segment {
                control: angles[j * self.m..(j + 1) * self.m].iter().map(|a| a.sin()).collect(),
                duration: self.t * roots[j] * roots[j] * gain,
            })
            .collect();
        Schedule::new(segments).expect("decoded schedule is in range")
    }

    /// Inverse of `decode` for schedules with `p` segments and total `< 0.99 t`.
    fn encode(&self, s: &Schedule) -> Option<Vec<f64>> {
        if s.len() != self.p || s.segments().iter().any(|g| g.control.len() != self.m) {
            return None;
        }
        let mut z: Vec<f64> = s
            .segments()
            .iter()
            .flat_map(|g| g.control.iter().map(|u| u.clamp(-1.0, 1.0).asin()))
            .collect();
        let fracs: Vec<f64> = s.segments().iter().map(|g| (g.duration / self.t).max(0.0)).collect();
        let total: f64 = fracs.iter().sum();
        let total_clipped = total.min(MAX_SCALE * (1.0 - 1e-9));
        if total <= 0.0 {
            z.extend(std::iter::repeat(0.0).take(self.p));
        } else {
            let b2 = -(1.0 - total_clipped / MAX_SCALE).ln();
            z.extend(fracs.iter().map(|f| (f / total * b2).sqrt()));
        }
        Some(z)
    }

    fn encode_parts(&self, controls: &[f64], fracs: &[f64]) -> Vec<f64> {
        let segments = (0..self.p)
            .map(|j| Segment {
                control: controls[j * self.m..(j + 1) * self.m].to_vec(),
                duration: self.t * fracs[j],
            })
            .collect();
        let s = Schedule::new(segments).expect("random start is in range");
        self.encode(&s).expect("shape matches")
    }

    fn endpoint(&mut self, z: &[f64]) -> Option<Vec<f64>> {
        self.evals += 1;
        let s = self.decode(z);
        flow_endpoint(self.sys, &s, self.x0, &self.flow).ok()
    }

    fn objective(&mut self, z: &[f64]) -> f64 {
        match self.endpoint(z) {
            Some(e) => distance(&e, self.target),
            None => BLOWUP_PENALTY,
        }
    }

    fn random_start<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let controls: Vec<f64> = (0..self.p * self.m)
            .map(|_| {
                if rng.gen_bool(0.5) {
                    rng.gen_range(-1i32..=1) as f64 * 0.95
                } else {
                    rng.gen_range(-0.95..=0.95)
                }
            })
            .collect();
        let w: Vec<f64> = (0..self.p).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = w.iter().sum();
        let sigma = 0.9 * MAX_SCALE * (1.0 - rng.gen::<f64>());
        let fracs: Vec<f64> = w.iter().map(|x| sigma * x / total).collect();
        self.encode_parts(&controls, &fracs)
    }

    /// Nelder–Mead with dimension-adaptive coefficients.
    fn nelder_mead(&mut self, start: &[f64], budget: usize, stop: f64) -> (Vec<f64>, f64) {
        let n = start.len();
        let nf = n as f64;
        let (alpha, gamma, rho, shrink) = (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);
        let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
        for i in 0..n {
            let mut v = start.to_vec();
            v[i] += if i < self.p * self.m { 0.4 } else { 0.15 };
            simplex.push(v);
        }
        let mut values: Vec<f64> = simplex.iter().map(|v| self.objective(v)).collect();
        let mut used = n + 1;
        while used < budget {
            let mut order: Vec<usize> = (0..=n).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();
            if values[0] <= stop {
                break;
            }
            let spread = values[n] - values[0];
            if spread <= 1e-15 * values[0].abs().max(1e-300) {
                break;
            }
            let mut centroid = vec![0.0; n];
            for v in &simplex[..n] {
                for (c, x) in centroid.iter_mut().zip(v) {
                    *c += x / nf;
                }
            }
            let along = |coef: f64| -> Vec<f64> {
                centroid
                    .iter()
                    .zip(&simplex[n])
                    .map(|(c, w)| c + coef * (c - w))
                    .collect()
            };
            let xr = along(alpha);
            let fr = self.objective(&xr);
            used += 1;
            if fr < values[0] {
                let xe = along(alpha * gamma);
                let fe = self.objective(&xe);
                used += 1;
                if fe < fr {
                    simplex[n] = xe;
                    values[n] = fe;
                } else {
                    simplex[n] = xr;
                    values[n] = fr;
                }
            } else if fr < values[n - 1] {
                simplex[n] = xr;
                values[n] = fr;
            } else {
                let (xc, fc) = if fr < values[n] {
                    let xc = along(alpha * rho);
                    let fc = self.objective(&xc);
                    (xc, fc)
                } else {
                    let xc = along(-rho);
                    let fc = self.objective(&xc);
                    (xc, fc)
                };
                used += 1;
                if fc < values[n].min(fr) {
                    simplex[n] = xc;
                    values[n] = fc;
                } else {
                    for i in 1..=n {
                        let moved: Vec<f64> = simplex[0]
                            .iter()
                            .zip(&simplex[i])
                            .map(|(b, x)| b + shrink * (x - b))
                            .collect();
                        values[i] = self.objective(&moved);
                        simplex[i] = moved;
                    }
                    used += n;
                }
            }
        }
        let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
        (simplex[best].clone(), values[best])
    }

    /// Per-coordinate residual scales `s_i τ^{w_i}`. Random schedules at `t`
    /// and `t/2` give each coordinate's typical excursion `s_i` and growth
    /// exponent `w_i` (so coordinate `i` moves like `t^{w_i}`); `τ` is the
    /// fraction of the horizon at which the target is a typical excursion.
    /// The scaled residual treats a coordinate that is reached at high order
    /// and one that moves linearly on an equal footing.
    fn residual_scales<R: Rng>(&mut self, rng: &mut R) -> Vec<f64> {
        const DRAWS: usize = 64;
        let n = self.target.len();
        let mut full = vec![0.0; n];
        let mut half = vec![0.0; n];
        let t = self.t;
        for _ in 0..DRAWS {
            let z = self.random_start(rng);
            for (acc, horizon) in [(&mut full, t), (&mut half, 0.5 * t)] {
                self.t = horizon;
                if let Some(e) = self.endpoint(&z) {
                    for (a, (x, b)) in acc.iter_mut().zip(e.iter().zip(self.x0)) {
                        *a += (x - b) * (x - b);
                    }
                }
            }
        }
        self.t = t;
        let excursion: Vec<(f64, f64)> = full
            .iter()
            .zip(&half)
            .map(|(f, h)| {
                let (f, h) = ((f / DRAWS as f64).sqrt(), (h / DRAWS as f64).sqrt());
                let w = if f > 0.0 && h > 0.0 { (f / h).log2().clamp(0.5, 30.0) } else { 1.0 };
                (f, w)
            })
            .collect();
        let tau = excursion
            .iter()
            .zip(self.target.iter().zip(self.x0))
            .filter(|((s, _), _)| *s > 0.0)
            .map(|((s, w), (a, b))| ((a - b).abs() / s).powf(1.0 / w))
            .fold(0.0, f64::max)
            .max(1e-12);
        excursion
            .iter()
            .zip(self.target.iter().zip(self.x0))
            .map(|(&(s, w), (a, b))| {
                if s > 0.0 {
                    s * tau.powf(w)
                } else {
                    (a - b).abs().max(1.0)
                }
            })
            .collect()
    }

    /// Levenberg–Marquardt on `endpoint(z) - target`.
    fn polish(&mut self, start: &[f64], iters: usize, stop: f64) -> (Vec<f64>, f64) {
        let target = self.target.to_vec();
        self.least_squares(start, iters, stop, |e| e.iter().zip(&target).map(|(a, b)| a - b).collect())
    }

    /// Levenberg–Marquardt on `residual(endpoint(z))` with a forward-difference
    /// Jacobian. Returns the final point and residual norm.
    fn least_squares<F: Fn(&[f64]) -> Vec<f64>>(
        &mut self,
        start: &[f64],
        iters: usize,
        stop: f64,
        residual: F,
    ) -> (Vec<f64>, f64) {
        let mut z = start.to_vec();
        let Some(e) = self.endpoint(&z) else {
            return (start.to_vec(), BLOWUP_PENALTY);
        };
        let mut r = residual(&e);
        let n = r.len();
        let q = self.len();
        let mut cost = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut lambda = 1e-3;
        let h = 1e-7;
        for _ in 0..iters {
            if cost <= stop {
                break;
            }
            let mut jac = DMatrix::<f64>::zeros(n, q);
            for i in 0..q {
                let mut zi = z.clone();
                zi[i] += h;
                let Some(ei) = self.endpoint(&zi) else { continue };
                let ri = residual(&ei);
                for k in 0..n {
                    jac[(k, i)] = (ri[k] - r[k]) / h;
                }
            }
            let rv = DVector::from_column_slice(&r);
            let jtj = jac.transpose() * &jac;
            let g = jac.transpose() * rv;
            let floor = 1e-9 * (0..q).map(|i| jtj[(i, i)]).fold(0.0, f64::max);
            let mut improved = false;
            for _ in 0..8 {
                let mut a = jtj.clone();
                for i in 0..q {
                    a[(i, i)] += lambda * jtj[(i, i)].max(floor);
                }
                let Some(chol) = a.cholesky() else {
                    lambda *= 10.0;
                    continue;
                };
                let delta = chol.solve(&(-&g));
                let trial: Vec<f64> = z.iter().zip(delta.iter()).map(|(a, b)| a + b).collect();
                if let Some(et) = self.endpoint(&trial) {
                    let rt = residual(&et);
                    let ct = rt.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if ct < cost {
                        z = trial;
                        r = rt;
                        cost = ct;
                        lambda = (lambda / 3.0).max(1e-12);
                        improved = true;
                        break;
                    }
                }
                lambda *= 4.0;
            }
            if !improved {
                break;
            }
        }
        (z, cost)
    }
}

/// Multi-start steering on a compiled system. `warm` schedules with the
/// configured segment count are tried first, in order.
pub(crate) fn steer_compiled(
    sys: &CompiledSystem,
    x0: &[f64],
    target: &[f64],
    t: f64,
    cfg: &SteerConfig,
    seed: u64,
    warm: &[&Schedule],
) -> Result<SteerResult> {
    if !(t > 0.0) {
        return Err(Error::input("horizon t must be positive"));
    }
    if cfg.segments == 0 {
        return Err(Error::input("steering needs at least one segment"));
    }
    if x0.len() != sys.dim() {
        return Err(Error::dim("steer basepoint", sys.dim(), x0.len()));
    }
    if target.len() != sys.dim() {
        return Err(Error::dim("steer target", sys.dim(), target.len()));
    }
    let mut prob = Problem {
        sys,
        x0,
        target,
        t,
        p: cfg.segments,
        m: sys.m(),
        flow: cfg.flow,
        evals: 0,
    };
    let mut best_z = vec![0.0; prob.len()];
    let mut best = prob.objective(&best_z);
    let mut starts = 0;
    let mut rng = stream_rng(seed, 0);
    let scales = if cfg.weighted && best > cfg.stop_below {
        Some(prob.residual_scales(&mut stream_rng(seed, 1)))
    } else {
        None
    };
    let warm_starts: Vec<Vec<f64>> = warm.iter().filter_map(|s| prob.encode(s)).collect();
    let random = (0..cfg.restarts).map(|_| None);
    for start in warm_starts.into_iter().map(Some).chain(random) {
        if best <= cfg.stop_below {
            break;
        }
        let warm = start.is_some();
        let z0 = start.unwrap_or_else(|| prob.random_start(&mut rng));
        starts += 1;
        let f0 = prob.objective(&z0);
        if f0 < best {
            best = f0;
            best_z = z0.clone();
        }
        let z1 = if cfg.nm_evals > 0 {
            prob.nelder_mead(&z0, cfg.nm_evals, cfg.stop_below).0
        } else {
            z0
        };
        // Warm starts are usually close already; the balanced pass would
        // trade their accuracy in the plain metric for the scaled one.
        let z1 = match (&scales, warm) {
            (Some(sc), false) => {
                let target = target.to_vec();
                prob.least_squares(&z1, cfg.lm_iters, 0.0, |e| {
                    e.iter().zip(&target).zip(sc).map(|((a, b), s)| (a - b) / s).collect()
                })
                .0
            }
            _ => z1,
        };
        let (z2, f2) = prob.polish(&z1, cfg.lm_iters, cfg.stop_below);
        if f2 < best {
            best = f2;
            best_z = z2;
        }
    }
    let schedule = prob.decode(&best_z);
    let achieved = flow_endpoint(sys, &schedule, x0, &cfg.flow)?;
    Ok(SteerResult {
        target: target.to_vec(),
        distance: distance(&achieved, target),
        achieved,
        schedule,
        evaluations: prob.evals,
        starts,
    })
}

/// Best schedule found for reaching `target` from `x0` in time `< t`.
pub fn steer_to(
    sys: &ControlSystem,
    x0: &[f64],
    target: &[f64],
    t: f64,
    cfg: &SteerConfig,
    seed: u64,
) -> Result<SteerResult> {
    steer_compiled(&CompiledSystem::new(sys), x0, target, t, cfg, seed, &[])
}
