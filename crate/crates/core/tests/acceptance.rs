//! One PASS/FAIL line per acceptance criterion on `example:paper`.
//!
//! Runs without the libtest harness so the lines print in order. The process
//! exits non-zero when any criterion fails.

use std::path::PathBuf;
use std::process::{Command, ExitCode};
use std::time::Instant;

use approx::abs_diff_eq;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestError, TestRng, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use vep_core::diagnostics::{
    estimate_gamma, strong_slope, verify_error_bound, SampleSpec, DEFAULT_SLOPE_RADII,
};
use vep_core::geometry::{ConeRepr, ConvexBody, ConvexSetRepr, RayUnion};
use vep_core::linalg;
use vep_core::merit::{eval_nu, fd_gradient, merit_gradient, merit_value, nu_gradient, NuMethod};
use vep_core::problem::{load, load_str, oracle_solutions, OracleGrid, VepProblem, Window};
use vep_core::solver::{
    check_stationarity_general, random_starts, solve_penalized, PenaltyConfig, StatVerdict,
    StationarityOptions,
};
use vep_core::subdiff::{coderivative_k, nu_subgradient_full};

const NU_TOL: f64 = 1e-9;
const VERTEX_TOL: f64 = 1e-9;
const RESIDUAL_TOL: f64 = 1e-9;
const WITNESS_TOL: f64 = 1e-6;
const SOLVER_TOL: f64 = 1e-3;
const MAX_STAGES: usize = 4;
const DENSE_TOL: f64 = 0.02;
const FD_TOL: f64 = 1e-4;
const SLOPE_SLACK: f64 = 0.05;
const SUITE_SECONDS: f64 = 30.0;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn paper() -> VepProblem {
    load("example:paper").expect("builtin problem loads")
}

fn same_point_set(got: &[Vec<f64>], want: &[Vec<f64>], tol: f64) -> bool {
    got.len() == want.len()
        && got.iter().all(|g| want.iter().any(|w| linalg::approx_eq(g, w, tol)))
        && want.iter().all(|w| got.iter().any(|g| linalg::approx_eq(g, w, tol)))
}

fn criterion_1() -> Outcome {
    let p = paper();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    let mut non_exact = 0;
    for _ in 0..10_000 {
        let (xi, x) = (rng.gen_range(-3.0..=3.0), rng.gen_range(-3.0..=3.0));
        let e = eval_nu(&p, &[xi], &[x], 0.0).expect("nu evaluates");
        if e.method != NuMethod::VertexExact {
            non_exact += 1;
        }
        worst = worst.max((e.value - (f64::abs(xi) + 1.0 - x).max(0.0)).abs());
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        worst <= NU_TOL && non_exact == 0 && secs < 5.0,
        format!("max |nu - formula| = {worst:.2e}, non-vertex evaluations {non_exact}, {secs:.2} s"),
    )
}

fn criterion_2() -> Outcome {
    let p = paper();
    let grid = OracleGrid::for_problem(&p);
    let t0 = Instant::now();
    let mut bad = Vec::new();
    for xi in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let sols = oracle_solutions(&p, &[xi], &grid).expect("oracle runs");
        let step = p.slice_window(&[xi], p.x_window.as_ref()).unwrap().step(grid.x_resolution);
        let want = f64::abs(xi) + 1.0;
        if sols.is_empty() || sols.iter().any(|s| (s[0] - want).abs() > step) {
            bad.push(format!("xi={xi}: {sols:?}"));
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        bad.is_empty() && secs < 10.0,
        if bad.is_empty() {
            format!("E(xi) = {{|xi|+1}} within one grid step at 5 values, {secs:.2} s")
        } else {
            format!("mismatch {}", bad.join("; "))
        },
    )
}

fn criterion_3() -> Outcome {
    let p = paper();
    let s = nu_subgradient_full(&p, &[0.0], &[1.0]).expect("subdifferential");
    let got = s.body().pruned().hull_points;
    let want = vec![vec![-1.0, -1.0], vec![-1.0, 1.0], vec![0.0, 0.0]];
    outcome(
        same_point_set(&got, &want, VERTEX_TOL),
        format!("hull points {got:?}, expected {want:?}"),
    )
}

fn criterion_4() -> Outcome {
    let p = paper();
    let mut notes = Vec::new();
    let mut pass = true;
    for v in [-1.0, -0.5, 0.0, 0.5] {
        let img = coderivative_k(&p, &[0.0], &[1.0], &[v]).expect("coderivative");
        let ok = if v > 0.0 {
            img.is_empty()
        } else {
            img.branches.iter().all(|b| b.rays.is_empty())
                && same_point_set(&img.points(), &linalg::dedup_points(vec![vec![-v], vec![v]], 0.0), 1e-12)
        };
        pass &= ok;
        notes.push(if img.is_empty() {
            format!("v={v}: empty")
        } else {
            format!("v={v}: {:?}", img.points())
        });
    }
    outcome(pass, notes.join(", "))
}

fn criterion_5() -> Outcome {
    let p = paper();
    let opts = StationarityOptions::coordinate(2);
    let a = check_stationarity_general(&p, &[0.0], &[1.0], &[0.5], 0.5, &opts).expect("check at (0,1)");
    let want = [[0.0, 2.0], [0.0, 0.0], [0.0, -1.0], [0.0, -1.0]];
    let parts: Vec<Vec<f64>> = a.witness.iter().flatten().map(|(_, v)| v.clone()).collect();
    let witness_ok = parts.len() == 4 && parts.iter().zip(want).all(|(g, w)| linalg::approx_eq(g, &w, WITNESS_TOL));
    let first = a.verdict == StatVerdict::StationaryWithinTol && a.residual <= RESIDUAL_TOL && witness_ok;
    let b = check_stationarity_general(&p, &[0.5], &[1.5], &[0.5], 0.5, &opts).expect("check at (0.5,1.5)");
    let second = matches!(&b.verdict, StatVerdict::RefutedByDirection { direction }
        if linalg::approx_eq(direction, &[-1.0, 0.0], 1e-12));
    let row = b
        .support_table
        .iter()
        .find(|r| linalg::approx_eq(&r.direction, &[-1.0, 0.0], 1e-12))
        .map(|r| format!("c0={} c1={}", r.c0, r.c1))
        .unwrap_or_default();
    outcome(
        first && second,
        format!(
            "(0,1): {} residual {:.1e} witness {:?}; (0.5,1.5): {} along (-1,0) {row}",
            a.verdict.as_str(),
            a.residual,
            parts,
            b.verdict.as_str()
        ),
    )
}

fn criterion_6() -> Outcome {
    let p = paper();
    let t0 = Instant::now();
    let g = estimate_gamma(&p, &[0.0], 1.0, &SampleSpec::default()).expect("gamma estimate");
    let eb = verify_error_bound(&p, &[0.0], 1.0, 0.9, (41, 161)).expect("error bound");
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        abs_diff_eq!(g.constant, 1.0, epsilon = 0.01) && eb.is_certified() && secs < 30.0,
        format!(
            "gamma_est = {}, gamma 0.9 {} on {}, {secs:.2} s",
            g.constant,
            eb.verdict.as_str(),
            eb.resolution
        ),
    )
}

fn criterion_7() -> Outcome {
    let p = paper();
    let t0 = Instant::now();
    let starts = random_starts(&Window::new(vec![-2.0, -2.0], vec![2.0, 2.0]), 5, 0);
    let out = solve_penalized(&p, &PenaltyConfig::default(), &starts).expect("solver runs");
    let secs = t0.elapsed().as_secs_f64();
    let errs: Vec<String> = out
        .chains
        .iter()
        .map(|c| format!("{:.1e}/{}", linalg::dist(&c.point, &[0.0, 1.0]), c.stages))
        .collect();
    let pass = out
        .chains
        .iter()
        .all(|c| linalg::dist(&c.point, &[0.0, 1.0]) <= SOLVER_TOL && c.stages <= MAX_STAGES)
        && out.chains.len() == 5
        && secs < 60.0;
    outcome(pass, format!("distance/stages per start {}, {secs:.2} s", errs.join(" ")))
}

fn runner(cases: u32) -> TestRunner {
    let cfg = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(cfg, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn pt2() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, 2)
}

fn set2() -> impl Strategy<Value = ConvexSetRepr> {
    prop_oneof![
        (pt2(), pt2()).prop_map(|(a, b)| ConvexSetRepr::Box {
            lower: vec![a[0].min(b[0]), a[1].min(b[1])],
            upper: vec![a[0].max(b[0]), a[1].max(b[1])],
        }),
        prop::collection::vec(pt2(), 1..7).prop_map(|vertices| ConvexSetRepr::Polytope { vertices }),
    ]
}

fn suite_projection() -> Result<(), String> {
    runner(256)
        .run(&(set2(), pt2(), pt2()), |(k, x, y)| {
            let (px, py) = (k.project(&x).unwrap(), k.project(&y).unwrap());
            let d = linalg::sub(&px, &py);
            prop_assert!(linalg::dot(&d, &d) <= linalg::dot(&d, &linalg::sub(&x, &y)) + 1e-8);
            Ok(())
        })
        .map_err(describe)
}

fn suite_product_rule() -> Result<(), String> {
    let strat = (prop::collection::vec(pt2(), 1..6), 0usize..6, -2.0f64..0.0, 0.0f64..2.0, 0usize..3);
    runner(128)
        .run(&strat, |(verts, pick, lo, hi, side)| {
            let pa = ConvexSetRepr::Polytope { vertices: verts.clone() };
            let xa = pa.project(&verts[pick % verts.len()]).unwrap();
            let xb = [lo, hi, 0.5 * (lo + hi)][side];
            let joint = ConvexSetRepr::Polytope {
                vertices: verts.iter().flat_map(|v| [lo, hi].map(|s| linalg::concat(v, &[s]))).collect(),
            };
            let direct = joint.normal_cone(&linalg::concat(&xa, &[xb])).unwrap();
            let product = pa.normal_cone(&xa).unwrap().product(&ConvexSetRepr::interval(lo, hi).normal_cone(&[xb]).unwrap());
            let inside = |a: &RayUnion, b: &RayUnion| a.branches.iter().flatten().all(|g| b.contains(g, 1e-7));
            prop_assert!(inside(&direct, &product) && inside(&product, &direct));
            Ok(())
        })
        .map_err(describe)
}

fn suite_min_norm() -> Result<(), String> {
    let strat = (prop::collection::vec(pt2(), 1..5), 0.0f64..0.5, prop::collection::vec(pt2(), 1..3), 0.0f64..1.5);
    runner(64)
        .run(&strat, |(verts, r, gens, cap_r)| {
            let body = ConvexBody::polytope(verts)
                .sum(&ConvexBody::ball(2, r))
                .sum(&ConvexBody::cap(ConeRepr::Generators { dim: 2, gens }, cap_r));
            let mn = body.min_norm_point().unwrap().dist;
            let dense = (0..3600)
                .map(|i| {
                    let t = i as f64 * std::f64::consts::TAU / 3600.0;
                    -body.support(&[t.cos(), t.sin()])
                })
                .fold(0.0f64, f64::max);
            prop_assert!((mn - dense).abs() <= DENSE_TOL, "{} vs {}", mn, dense);
            Ok(())
        })
        .map_err(describe)
}

fn two_dim() -> VepProblem {
    load_str(include_str!("../../../problems/two_dim.toml")).expect("two_dim loads")
}

fn suite_fd() -> Result<(), String> {
    let probs = [paper(), two_dim()];
    runner(200)
        .run(&(0usize..2, -1.0f64..1.0, pt2()), |(which, xi, x)| {
            let p = &probs[which];
            let x = &x[..p.n()];
            if let Some(g) = nu_gradient(p, &[xi], x).unwrap() {
                let fd = fd_gradient(&[xi], x, 1e-6, |a, b| Ok(eval_nu(p, a, b, 0.0)?.value)).unwrap();
                prop_assert!(linalg::approx_eq(&g, &fd, FD_TOL));
            }
            if let Some(g) = merit_gradient(p, &[xi], x).unwrap() {
                let fd = fd_gradient(&[xi], x, 1e-6, |a, b| merit_value(p, a, b)).unwrap();
                prop_assert!(linalg::approx_eq(&g, &fd, FD_TOL));
            }
            Ok(())
        })
        .map_err(describe)
}

fn suite_lsc_convexity() -> Result<(), String> {
    let p = paper();
    let strat = (-1.0f64..1.0, -3.0f64..3.0, -3.0f64..3.0, 0.0f64..1.0, pt2());
    runner(200)
        .run(&strat, |(xi, x, y, t, h)| {
            let m = |a: f64, b: f64| merit_value(&p, &[a], &[b]).unwrap();
            prop_assert!(m(xi, (1.0 - t) * x + t * y) <= (1.0 - t) * m(xi, x) + t * m(xi, y) + 1e-9);
            let tail = (4..=6)
                .map(|k| {
                    let s = 10f64.powi(-2 * k);
                    m(xi + s * h[0], x + s * h[1])
                })
                .fold(f64::INFINITY, f64::min);
            prop_assert!(m(xi, x) <= tail + 1e-6);
            Ok(())
        })
        .map_err(describe)
}

fn suite_zero_level() -> Result<(), String> {
    let probs = [paper(), two_dim()];
    runner(16)
        .run(&(0usize..2, -1.0f64..1.0), |(which, xi)| {
            let p = &probs[which];
            let grid = OracleGrid::for_problem(p);
            let sols = oracle_solutions(p, &[xi], &grid).unwrap();
            let slice = p.slice(&[xi]).unwrap();
            let xw = p.slice_window(&[xi], p.x_window.as_ref()).unwrap();
            for x in xw.grid(grid.x_resolution).into_iter().filter(|x| slice.contains(x, 1e-12)) {
                let zero = merit_value(p, &[xi], &x).unwrap() <= 1e-9;
                let listed = sols.iter().any(|s| linalg::dist(s, &x) <= 1e-12);
                prop_assert_eq!(zero, listed);
            }
            Ok(())
        })
        .map_err(describe)
}

fn small_spec() -> SampleSpec {
    SampleSpec {
        grid: 15,
        random: 30,
        seed: 3,
    }
}

fn suite_gamma_error_bound() -> Result<(), String> {
    let p = paper();
    runner(12)
        .run(&(-1.0f64..1.0, 0.2f64..1.0, 0.3f64..0.95), |(xi_bar, rho, frac)| {
            let g = estimate_gamma(&p, &[xi_bar], rho, &small_spec()).unwrap();
            prop_assert!(g.is_certified());
            let eb = verify_error_bound(&p, &[xi_bar], rho, frac * g.constant, (9, 41)).unwrap();
            prop_assert!(eb.is_certified());
            Ok(())
        })
        .map_err(describe)
}

fn suite_strong_slope() -> Result<(), String> {
    let p = paper();
    let g = estimate_gamma(&p, &[0.0], 1.0, &small_spec()).map_err(|e| e.to_string())?.constant;
    runner(64)
        .run(&(-1.0f64..1.0, -4.0f64..4.0), |(xi, x)| {
            if merit_value(&p, &[xi], &[x]).unwrap() <= 1e-3 {
                return Ok(());
            }
            let s = strong_slope(&p, &[xi], &[x], &DEFAULT_SLOPE_RADII).unwrap();
            prop_assert!(s >= g - SLOPE_SLACK, "slope {} gamma {}", s, g);
            Ok(())
        })
        .map_err(describe)
}

fn describe<T: std::fmt::Debug>(e: TestError<T>) -> String {
    match e {
        TestError::Abort(r) => format!("aborted: {r}"),
        TestError::Fail(r, v) => format!("{r} at {v:?}"),
    }
}

type Suite = fn() -> Result<(), String>;

fn criterion_8() -> Outcome {
    let suites: [(&str, Suite); 8] = [
        ("projection-firmness", suite_projection),
        ("normal-cone-product", suite_product_rule),
        ("min-norm-vs-dense", suite_min_norm),
        ("fd-vs-formula", suite_fd),
        ("merit-lsc-convexity", suite_lsc_convexity),
        ("zero-level-equivalence", suite_zero_level),
        ("gamma-error-bound", suite_gamma_error_bound),
        ("strong-slope", suite_strong_slope),
    ];
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, run) in suites {
        let t0 = Instant::now();
        let r = run();
        let secs = t0.elapsed().as_secs_f64();
        let ok = r.is_ok() && secs < SUITE_SECONDS;
        pass &= ok;
        notes.push(match r {
            Ok(()) => format!("{name} {secs:.1}s"),
            Err(e) => format!("{name} FAILED ({e})"),
        });
    }
    outcome(pass, notes.join(", "))
}

/// The `vep` binary next to this test's `deps` directory, rebuilt first so
/// the check does not depend on which packages were tested before it.
fn vep_binary() -> Result<PathBuf, String> {
    let exe = std::env::current_exe().map_err(|e| e.to_string())?;
    let dir = exe.parent().and_then(|d| d.parent()).ok_or("no target directory")?.to_path_buf();
    let mut build = Command::new(option_env!("CARGO").unwrap_or("cargo"));
    build.args(["build", "--quiet", "-p", "vep-cli"]);
    if dir.ends_with("release") {
        build.arg("--release");
    }
    let status = build.status().map_err(|e| e.to_string())?;
    if !status.success() {
        return Err(format!("building vep failed: {status}"));
    }
    let bin = dir.join(format!("vep{}", std::env::consts::EXE_SUFFIX));
    if bin.exists() {
        Ok(bin)
    } else {
        Err(format!("{} not found", bin.display()))
    }
}

fn criterion_9() -> Outcome {
    let bin = match vep_binary() {
        Ok(b) => b,
        Err(e) => return outcome(false, e),
    };
    let commands: [&[&str]; 7] = [
        &["eval", "example:paper", "--xi", "0.5", "--x", "0"],
        &["check-erbo", "example:paper", "--xi-bar", "0", "--xi-grid", "11", "--x-grid", "41"],
        &["check-subtransversality", "example:paper", "--xi-bar", "0", "--x-bar", "1", "--resolution", "11"],
        &["check-stationarity", "example:paper", "--xi-bar", "0", "--x-bar", "1", "--gamma", "0.5"],
        &["solve", "example:paper", "--starts", "3"],
        &["probe-stability", "example:paper", "--xi-bar", "0", "--x-bar", "1"],
        &["estimate-constants", "example:paper", "--xi-bar", "0", "--x-bar", "1"],
    ];
    let mut differing = Vec::new();
    for args in commands {
        let run = || {
            Command::new(&bin)
                .args(["--seed", "7"])
                .args(args)
                .output()
                .map(|o| (o.status.code(), o.stdout))
        };
        match (run(), run()) {
            (Ok(a), Ok(b)) if a == b && !a.1.is_empty() => {}
            _ => differing.push(args[0]),
        }
    }
    outcome(
        differing.is_empty(),
        if differing.is_empty() {
            "7 commands give identical report bodies and exit codes".to_string()
        } else {
            format!("non-deterministic or failed: {}", differing.join(", "))
        },
    )
}

fn main() -> ExitCode {
    let criteria: [fn() -> Outcome; 9] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
    ];
    let mut failed = 0;
    for (i, c) in criteria.iter().enumerate() {
        let o = c();
        if !o.pass {
            failed += 1;
        }
        println!("criterion {}: {} {}", i + 1, if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {} of 9 criteria pass", 9 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
