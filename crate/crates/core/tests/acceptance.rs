//! Acceptance suite: twelve criteria, one PASS/FAIL line each. Runs every
//! criterion even when an earlier one fails and exits non-zero if any did.
//!
//! cargo test --release --test acceptance

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::Command;
use std::time::Instant;

use chronoreach::chrono::{
    exp_trunc_schedule, picard_direct_oracle_exact, picard_error, picard_fit, FlowConfig, PicardFitConfig,
};
use chronoreach::perturb::{
    compare_order_scans, contact_flow_identity, main_theorem_experiment, perturb_scaling_experiment,
    random_perturbation, PerturbationSpec, ScalingConfig,
};
use chronoreach::polyalg::{kth_contact, PolyVectorField};
use chronoreach::reach::{
    calibrate_growth_constant, growth_rate_test, unit_directions, variation_check, CalibrationConfig, GrowthConfig,
    MagnitudeConfig, OrderScanConfig, ScanScale, SteerConfig, VariationConfig,
};
use chronoreach::sysparse::{parse_system, serialize_system};
use chronoreach::Error;
use rand::Rng;

use common::*;

type Verdict = (bool, String);

fn contact_flow_identity_trials() -> Verdict {
    let mut equal = 0;
    let mut failures = Vec::new();
    for trial in 0..100u64 {
        let mut r = rng(1000 + trial);
        let n = r.gen_range(1..=3);
        let m = r.gen_range(0..=2);
        let k = r.gen_range(0..=4);
        let p = r.gen_range(1..=3);
        let x = random_system(&mut r, n, m, 3);
        let x0 = random_point(&mut r, n);
        let extra: Vec<PolyVectorField> = (0..=m).map(|_| high_order_field(&mut r, &x0, k + 1, k + 3)).collect();
        let y = x.perturbed(&extra).unwrap();
        let controls = random_controls(&mut r, m, p);
        match contact_flow_identity(&x, &y, &x0, k, &controls) {
            Ok(rep) if rep.contact.holds && rep.equal => equal += 1,
            Ok(rep) => failures.push(format!("trial {trial}: contact {} equal {}", rep.contact.holds, rep.equal)),
            Err(e) => failures.push(format!("trial {trial}: {e}")),
        }
    }
    (failures.is_empty(), format!("{equal}/100 exactly equal {failures:?}"))
}

fn oracle_equivalence() -> Verdict {
    let mut agree = 0;
    for trial in 0..50u64 {
        let mut r = rng(2000 + trial);
        let n = r.gen_range(1..=3);
        let m = r.gen_range(0..=2);
        let k = r.gen_range(0..=4);
        let p = r.gen_range(1..=3);
        let sys = random_system(&mut r, n, m, 2);
        let x0 = random_point(&mut r, n);
        let controls = random_controls(&mut r, m, p);
        let durations: Vec<_> = (0..p).map(|_| q(r.gen_range(0..=5), 10)).collect();
        let fp = exp_trunc_schedule(&sys, &controls, k, &x0).unwrap();
        let oracle = picard_direct_oracle_exact(&sys, &controls, k, &x0, &durations).unwrap();
        if fp.eval_exact(&durations).unwrap() == oracle {
            agree += 1;
        }
    }
    (agree == 50, format!("{agree}/50 instances identical"))
}

fn picard_error_order() -> Verdict {
    let sys = load("exp1d.ctrl");
    let x0 = sys.basepoint_or_origin();
    let times = [0.1, 0.05, 0.025];
    let orders = [1, 2, 3, 4];
    let rep = picard_fit(&sys, &[vec![]], &x0, &orders, &times, &FlowConfig::default(), &PicardFitConfig::default())
        .unwrap();
    let mut worst_rel: f64 = 0.0;
    for p in &rep.points {
        let partial: f64 = (0..=p.k).map(|l| p.t.powi(l as i32) / (1..=l).product::<u32>() as f64).sum();
        let analytic = (p.t.exp() - partial).abs();
        worst_rel = worst_rel.max((p.error - analytic).abs() / analytic);
    }
    let slopes: Vec<f64> = rep.slopes.iter().map(|s| s.fit.map_or(f64::NAN, |f| f.slope)).collect();
    let slopes_ok = orders.iter().zip(&slopes).all(|(&k, s)| (s - (k as f64 + 1.0)).abs() <= 0.15);
    let ok = worst_rel <= 0.15 && slopes_ok && rep.dominates;
    (
        ok,
        format!("worst relative error {worst_rel:.2e}, slopes {slopes:.3?}, bound dominates {}", rep.dominates),
    )
}

fn nilpotent_termination() -> Verdict {
    let sys = load("double_integrator.ctrl");
    let x0 = sys.basepoint_or_origin();
    let mut worst: f64 = 0.0;
    let mut r = rng(4);
    for k in 2..=4 {
        for t in [0.5, 0.25, 0.125] {
            let p = r.gen_range(1..=3);
            let controls = random_controls(&mut r, 1, p);
            let durations = vec![t / p as f64; p];
            worst = worst.max(picard_error(&sys, &controls, &durations, &x0, k, &FlowConfig::default()).unwrap());
        }
    }
    (worst <= 1e-8, format!("largest error for k >= 2, t <= 0.5: {worst:.2e}"))
}

fn bracket_sanity() -> Verdict {
    let b = load("brockett.ctrl");
    let bracket = b.field(1).lie_bracket(b.field(2)).unwrap();
    let expected = PolyVectorField::new(vec![
        chronoreach::polyalg::Poly::zero(3),
        chronoreach::polyalg::Poly::zero(3),
        chronoreach::polyalg::Poly::constant(3, q(2, 1)),
    ])
    .unwrap();
    let mut jacobi = 0;
    for trial in 0..50u64 {
        let mut r = rng(5000 + trial);
        let n = r.gen_range(1..=3);
        let (u, v, w) = (random_field(&mut r, n, 2), random_field(&mut r, n, 2), random_field(&mut r, n, 2));
        let sum = u
            .lie_bracket(&v.lie_bracket(&w).unwrap())
            .unwrap()
            .add(&v.lie_bracket(&w.lie_bracket(&u).unwrap()).unwrap())
            .unwrap()
            .add(&w.lie_bracket(&u.lie_bracket(&v).unwrap()).unwrap())
            .unwrap();
        if sum.is_zero() {
            jacobi += 1;
        }
    }
    (
        bracket == expected && jacobi == 50,
        format!("[X1, X2] = {bracket}, Jacobi exact on {jacobi}/50"),
    )
}

fn brockett_constant() -> f64 {
    let b = load("brockett.ctrl");
    calibrate_growth_constant(&b, &[0.0; 3], 2, &CalibrationConfig::default(), 1, &FlowConfig::default())
        .unwrap()
        .constant
}

const GROWTH_TIMES: [f64; 3] = [0.5, 0.25, 0.125];

fn growth_rate(c: f64) -> Verdict {
    let b = load("brockett.ctrl");
    let two = growth_rate_test(&b, &[0.0; 3], 2, c, &GROWTH_TIMES, &GrowthConfig::default(), 2).unwrap();
    let one = growth_rate_test(&b, &[0.0; 3], 1, c, &GROWTH_TIMES, &GrowthConfig::default(), 2).unwrap();
    let cov = |r: &chronoreach::reach::GrowthReport| r.points.iter().map(|p| p.coverage).collect::<Vec<_>>();
    let one_small = one.coverage_at(0.125).unwrap_or(1.0);
    let ok = two.passed && cov(&two).iter().all(|&v| v >= 0.95) && one_small < 0.5;
    (
        ok,
        format!("C = {c:.4}; N = 2 coverage {:.3?}; N = 1 coverage {:.3?}", cov(&two), cov(&one)),
    )
}

fn perturbation_scaling(c: f64) -> Verdict {
    let x = load("brockett.ctrl");
    let x0 = x.basepoint_or_origin();
    let times = [0.4, 0.2, 0.1, 0.05];
    let cfg = ScalingConfig::default();
    let cubic = load("brockett_cubic.ctrl");
    let spec = PerturbationSpec {
        min_degree: 3,
        max_degree: 3,
        terms: 2,
        denominator: 8,
    };
    let all_fields = x.perturbed(&random_perturbation(3, 3, &x0, &spec, 17).unwrap()).unwrap();
    let mut slopes = Vec::new();
    for y in [&cubic, &all_fields] {
        let rep = perturb_scaling_experiment(&x, y, &x0, 2, c, &times, &cfg, 7).unwrap();
        slopes.push(rep.slope().unwrap_or(f64::NAN));
    }
    (
        cfg.targets >= 20 && slopes.iter().all(|&s| s >= 2.7),
        format!("{} targets per t; slopes: x1^3 in X0 {:.3}, degree-3 terms in all fields {:.3}", cfg.targets, slopes[0], slopes[1]),
    )
}

fn main_theorem(c: f64) -> Verdict {
    let x = load("brockett.ctrl");
    let y = load("brockett_cubic.ctrl");
    let x0 = x.basepoint_or_origin();
    let cfg = GrowthConfig::default();
    let rep = main_theorem_experiment(&x, &y, &x0, 2, c, &GROWTH_TIMES, &cfg, 3).unwrap();
    let cov: Vec<f64> = rep.y_report.points.iter().map(|p| p.coverage).collect();
    (
        cov.iter().all(|&v| v >= 0.90),
        format!("perturbed system at C/2 = {:.4}: coverage {cov:.3?}", rep.y_report.constant),
    )
}

fn chain_reproduction() -> Verdict {
    let x = load("chain4.ctrl");
    let y = load("chain4_perturbed.ctrl");
    let origin = x.basepoint_or_origin();
    let c57 = kth_contact(&x, &y, &origin, 57).unwrap().holds;
    let c58 = kth_contact(&x, &y, &origin, 58).unwrap().holds;
    let flow = FlowConfig::with_step(4e-3);
    let steer = SteerConfig {
        segments: 6,
        weighted: true,
        flow,
        ..SteerConfig::default()
    };
    let cfg = OrderScanConfig {
        k_max: 10,
        times: vec![0.8, 0.4, 0.2],
        scale: ScanScale::Calibrated {
            t_ref: 0.8,
            config: MagnitudeConfig {
                segments: 6,
                steer,
                flow,
                ..MagnitudeConfig::default()
            },
        },
        variation: VariationConfig {
            steer,
            stop_on_failure: true,
            ..VariationConfig::default()
        },
    };
    let mut dirs = Vec::new();
    for axis in 0..4 {
        for sign in [1.0, -1.0] {
            let mut v = vec![0.0; 4];
            v[axis] = sign;
            dirs.push(v);
        }
    }
    let scans = compare_order_scans(&x, &y, &[0.0; 4], &dirs, &cfg, 7).unwrap();
    let show = |k: Option<u32>| k.map_or("none".to_string(), |k| k.to_string());
    let table: Vec<String> = scans
        .iter()
        .zip(["+e1", "-e1", "+e2", "-e2", "+e3", "-e3", "+e4", "-e4"])
        .map(|(s, name)| format!("{name}:{}/{}", show(s.x.found), show(s.y.found)))
        .collect();
    let found_seven = scans[..7].iter().all(|s| s.x.found.is_some());
    let minus_e4_none = scans[7].x.found.is_none();
    let matches = scans[..7].iter().all(|s| s.matches());
    (
        c57 && !c58 && found_seven && minus_e4_none && matches,
        format!("contact 57 {c57}, 58 {c58}; orders X/Y {}", table.join(" ")),
    )
}

fn variation_consistency(c: f64) -> Verdict {
    let dirs = unit_directions(3, 20, 11);
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, c) in [("brockett.ctrl", c), ("brockett_cubic.ctrl", c / 2.0)] {
        let sys = load(name);
        let passed = dirs
            .iter()
            .enumerate()
            .filter(|(i, v)| {
                variation_check(&sys, &[0.0; 3], v, 2, c, &GROWTH_TIMES, &VariationConfig::default(), *i as u64)
                    .unwrap()
                    .passed
            })
            .count();
        ok &= passed == dirs.len();
        lines.push(format!("{name} at C = {c:.4}: {passed}/{}", dirs.len()));
    }
    (ok, lines.join("; "))
}

fn parser_round_trip() -> Verdict {
    let files = [
        "exp1d.ctrl",
        "double_integrator.ctrl",
        "brockett.ctrl",
        "brockett_cubic.ctrl",
        "chain4.ctrl",
        "chain4_perturbed.ctrl",
    ];
    let corpus_ok = files.iter().all(|f| {
        let sys = load(f);
        let text = serialize_system(&sys);
        let back = parse_system(&text).unwrap();
        back == sys && serialize_system(&back) == text
    });
    let mut random_ok = 0;
    for trial in 0..200u64 {
        let mut r = rng(11_000 + trial);
        let n = r.gen_range(1..=4);
        let m = r.gen_range(0..=3);
        let sys = random_system(&mut r, n, m, 3);
        let text = serialize_system(&sys);
        if parse_system(&text).map_or(false, |b| b == sys) {
            random_ok += 1;
        }
    }
    let malformed = [
        "system a\ndim 2\ncontrols 1\nX0 = [x1, x3]\nX1 = [1, 0]\n",
        "system a\ndim 1\ncontrols 0\nX0 = [x1^-1]\n",
        "system a\ndim 1\ncontrols 0\nX0 = [x1^(1/2)]\n",
        "system a\ndim 1\ncontrols 0\nX0 = [(x1 + 1]\n",
        "system a\ndim 2\ncontrols 1\nX0 = [0, 0]\n",
        "system a\ndim 2\ncontrols 1\nX0 = [0]\nX1 = [1, 0]\n",
        "system a\ndim 1\ncontrols 0\nX0 = [1]\nX0 = [2]\n",
        "system a\ndim 1\ncontrols 1\nX0 = [0]\nX1 = [1]\nX2 = [1]\n",
        "system a\ndim 1\ncontrols 0\nX0 = [1e3]\n",
        "system a\ndim 1\ncontrols 0\nX0 = [x0]\n",
        "",
        "dim two\n",
        "system a\ndim 1\ncontrols 0\nX0 = [1 +]\n",
        "system a\ndim 1\ncontrols 0\nX0 = [\u{3b1}]\n",
    ];
    let positioned = malformed
        .iter()
        .filter(|text| matches!(catch_unwind(|| parse_system(text)), Ok(Err(Error::Parse { line, .. })) if line >= 1))
        .count();
    (
        corpus_ok && random_ok == 200 && positioned == malformed.len(),
        format!(
            "corpus round trip {corpus_ok}, random {random_ok}/200, positioned errors {positioned}/{}",
            malformed.len()
        ),
    )
}

fn cli_determinism() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_chronoreach");
    let b = corpus("brockett.ctrl");
    let bc = corpus("brockett_cubic.ctrl");
    let runs: Vec<Vec<String>> = vec![
        vec!["reach", &b, "--t", "0.3", "--count", "200", "--seed", "5"],
        vec!["growth", &b, "--N", "2", "--C", "0.09", "--times", "0.5,0.25", "--seed", "7"],
        vec!["variation", &b, "--direction", "0,0,1", "--k", "2", "--c", "0.05", "--seed", "2", "--json"],
        vec!["perturb-map", &b, &bc, "--target", "0.001,0,0.0005", "--t", "0.2", "--seed", "3"],
        vec!["perturb-scaling", &b, &bc, "--N", "2", "--C", "0.09", "--targets", "6", "--seed", "4", "--json"],
        vec!["contact-flow", &b, &bc, "--order", "2", "--segments", "2", "--seed", "7"],
        vec!["picard-fit", &corpus("exp1d.ctrl"), "--controls", "()"],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();
    let mut identical = 0;
    let mut notes = Vec::new();
    for args in &runs {
        let first = Command::new(bin).args(args).output().unwrap();
        let second = Command::new(bin).args(args).output().unwrap();
        if first.status.code() == Some(0) && first.stdout == second.stdout && !first.stdout.is_empty() {
            identical += 1;
        } else {
            notes.push(format!("{} (exit {:?})", args[0], first.status.code()));
        }
    }
    (
        identical == runs.len(),
        format!("{identical}/{} commands byte-identical on rerun {notes:?}", runs.len()),
    )
}

fn main() {
    let mut failed = 0;
    let mut run = |n: usize, name: &str, f: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let (ok, detail) = match catch_unwind(AssertUnwindSafe(f)) {
            Ok(v) => v,
            Err(_) => (false, "panicked".to_string()),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {n:>2} {} {name}: {detail} ({:.1} s)",
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64()
        );
    };
    run(1, "contact-flow identity", &mut contact_flow_identity_trials);
    run(2, "Picard oracle equivalence", &mut oracle_equivalence);
    run(3, "Picard error order", &mut picard_error_order);
    run(4, "nilpotent termination", &mut nilpotent_termination);
    run(5, "bracket sanity", &mut bracket_sanity);
    let c = brockett_constant();
    run(6, "growth-rate test", &mut || growth_rate(c));
    run(7, "perturbation scaling", &mut || perturbation_scaling(c));
    run(8, "growth of the perturbed system", &mut || main_theorem(c));
    run(9, "chain system reproduction", &mut chain_reproduction);
    run(10, "variation consistency", &mut || variation_consistency(c));
    run(11, "parser", &mut parser_round_trip);
    run(12, "CLI determinism", &mut cli_determinism);
    println!("{} of 12 criteria passed", 12 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
