//! `vep`: evaluate merit functions, certify constants and check stationarity
//! for programs with strong vector-equilibrium constraints.

mod report;

use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use report::{num, Format, Report};
use vep_core::diagnostics::{
    check_c_bounded, estimate_gamma, estimate_lipschitz_f, estimate_openness_rate, lf_below_alpha, stability_probe,
    strong_slope, subtransversality_kappa, subtransversality_nc, verify_error_bound, Certificate, GraphSamples,
    SampleSpec, Verdict, DEFAULT_SLOPE_RADII,
};
use vep_core::geometry::RayUnion;
use vep_core::linalg;
use vep_core::merit::{eval_merit, eval_nu};
use vep_core::problem::{load, ProblemError, VepProblem, Window};
use vep_core::solver::{
    check_stationarity_general, check_stationarity_smooth_concave, random_starts, solve_penalized, PenaltyConfig,
    StatVerdict, StationarityOptions, StationarityReport,
};
use vep_core::subdiff::{graph_e_normals, GraphSampling};

const EXIT_LOAD: u8 = 2;
const EXIT_EVAL: u8 = 3;
const EXIT_REFUTED: u8 = 4;
const EXIT_INCONCLUSIVE: u8 = 5;
const EXIT_SOLVE: u8 = 6;

#[derive(Parser)]
#[command(name = "vep", version, about = "Merit functions, error bounds and stationarity checks")]
struct Cli {
    /// Seed for every random sample drawn by the command.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Point {
    #[arg(long = "xi-bar", value_delimiter = ',', allow_hyphen_values = true, required = true)]
    xi_bar: Vec<f64>,
    #[arg(long = "x-bar", value_delimiter = ',', allow_hyphen_values = true, required = true)]
    x_bar: Vec<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate ν, μ and the merit function at a point.
    Eval {
        problem: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        xi: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        x: Vec<f64>,
        /// Enlarge K(ξ) by this amount for ν.
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
    },
    /// Estimate the error-bound modulus and verify the error bound.
    CheckErbo {
        problem: String,
        #[arg(long = "xi-bar", value_delimiter = ',', allow_hyphen_values = true, required = true)]
        xi_bar: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        rho: f64,
        /// Modulus to verify; defaults to 90% of the estimate.
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 41)]
        xi_grid: usize,
        #[arg(long, default_value_t = 161)]
        x_grid: usize,
    },
    /// Subtransversality of Ω × R^n and the graph of E.
    CheckSubtransversality {
        problem: String,
        #[command(flatten)]
        point: Point,
        #[arg(long, default_value_t = 0.5)]
        radius: f64,
        #[arg(long, default_value_t = 21)]
        resolution: usize,
    },
    /// Check the necessary optimality condition at a point of the graph.
    CheckStationarity {
        problem: String,
        #[command(flatten)]
        point: Point,
        #[arg(long)]
        gamma: f64,
        #[arg(long = "lambda-grid", value_delimiter = ',', default_value = "0.5")]
        lambda_grid: Vec<f64>,
        /// Use the outer estimates of ∂ν for smooth concave data.
        #[arg(long)]
        smooth_concave: bool,
        #[arg(long = "eps-list", value_delimiter = ',', default_value = "0.05,0.1")]
        eps_list: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        lf: f64,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Run the penalty method and post-check the incumbent.
    Solve {
        problem: String,
        /// TOML file with solver settings.
        #[arg(long)]
        config: Option<String>,
        #[arg(long, default_value_t = 5)]
        starts: usize,
        /// Half-width of the start box around the origin.
        #[arg(long, default_value_t = 2.0)]
        start_radius: f64,
    },
    /// Lower semicontinuity and Aubin-type estimates for E near a point.
    ProbeStability {
        problem: String,
        #[command(flatten)]
        point: Point,
        #[arg(long, default_value_t = 0.9)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
    },
    /// Lipschitz, openness, C-boundedness and strong-slope estimates.
    EstimateConstants {
        problem: String,
        #[command(flatten)]
        point: Point,
        #[arg(long, default_value_t = 1.0)]
        radius: f64,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn load(e: ProblemError) -> Self {
        Failure {
            code: EXIT_LOAD,
            message: format!("load error: {e}"),
        }
    }

    fn eval(e: ProblemError) -> Self {
        Failure {
            code: EXIT_EVAL,
            message: format!("evaluation error: {e}"),
        }
    }

    /// Precondition failures (point off the graph, bad parameters) exit like load errors.
    fn pre_or_eval(e: ProblemError) -> Self {
        match e {
            ProblemError::NotOnGraph { .. } | ProblemError::NotASolution { .. } | ProblemError::Invalid { .. } => Failure {
                code: EXIT_LOAD,
                message: format!("precondition error: {e}"),
            },
            e => Self::eval(e),
        }
    }
}

fn cert_value(c: &Certificate) -> Value {
    let values: Map<String, Value> = c.values.iter().map(|(k, v)| (k.clone(), num(*v))).collect();
    json!({
        "kind": c.kind.as_str(),
        "verdict": c.verdict.as_str(),
        "constant": num(c.constant),
        "witnesses": c.witnesses,
        "resolution": c.resolution,
        "flags": c.flags,
        "values": values,
    })
}

fn stationarity_value(r: &StationarityReport) -> Value {
    let mut v = json!({
        "verdict": r.verdict.as_str(),
        "residual": num(r.residual),
        "lambda": r.lambda,
        "gamma": r.gamma,
        "branch-id": r.branch_id,
        "tol-stat": r.tol_stat,
        "residual-table": r.residual_table.iter().map(|row| json!({
            "lambda": row.lambda,
            "eps": row.eps,
            "branch": row.branch,
            "residual": num(row.residual),
        })).collect::<Vec<_>>(),
    });
    let m = v.as_object_mut().unwrap();
    if let StatVerdict::RefutedByDirection { direction } = &r.verdict {
        m.insert("direction".into(), json!(direction));
        let rows: Vec<Value> = r
            .support_table
            .iter()
            .filter(|s| &s.direction == direction)
            .map(|s| json!({"eps": s.eps, "branch": s.branch, "c0": num(s.c0), "c1": num(s.c1)}))
            .collect();
        m.insert("support".into(), Value::Array(rows));
    }
    if let Some(w) = &r.witness {
        let parts: Vec<Value> = w.iter().map(|(label, v)| json!({"summand": label, "vector": v})).collect();
        m.insert("witness".into(), Value::Array(parts));
        m.insert("witness-violation".into(), num(r.witness_violation.unwrap_or(f64::NAN)));
    }
    v
}

fn verdict_code(verdicts: &[Verdict]) -> u8 {
    if verdicts.contains(&Verdict::Refuted) {
        EXIT_REFUTED
    } else if verdicts.contains(&Verdict::Inconclusive) {
        EXIT_INCONCLUSIVE
    } else {
        0
    }
}

fn load_problem(spec: &str) -> Result<VepProblem, Failure> {
    load(spec).map_err(Failure::load)
}

fn check_point(prob: &VepProblem, xi: &[f64], x: &[f64]) -> Result<(), Failure> {
    if xi.len() != prob.p() || x.len() != prob.n() {
        return Err(Failure {
            code: EXIT_EVAL,
            message: format!("expected {} xi and {} x coordinates", prob.p(), prob.n()),
        });
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<(Report, u8), Failure> {
    let seed = cli.seed;
    match &cli.command {
        Command::Eval { problem, xi, x, epsilon } => {
            let prob = load_problem(problem)?;
            check_point(&prob, xi, x)?;
            let mut r = Report::new("eval", &prob.name, &prob.source, seed);
            r.param("xi", xi);
            r.param("x", x);
            r.param("epsilon", epsilon);
            let m = eval_merit(&prob, xi, x).map_err(Failure::eval)?;
            r.result("nu", num(m.nu));
            r.result("mu", num(m.mu));
            r.result("merit", num(m.merit));
            r.result("argmax-z", &m.argmax_z);
            r.result("method", m.method.as_str());
            if *epsilon > 0.0 {
                let e = eval_nu(&prob, xi, x, *epsilon).map_err(Failure::eval)?;
                r.result("nu-epsilon", num(e.value));
                r.result("argmax-z-epsilon", &e.argmax_z);
                r.flags.extend(e.flags);
            }
            r.flags.extend(m.flags);
            Ok((r, 0))
        }
        Command::CheckErbo {
            problem,
            xi_bar,
            rho,
            gamma,
            xi_grid,
            x_grid,
        } => {
            let prob = load_problem(problem)?;
            let mut r = Report::new("check-erbo", &prob.name, &prob.source, seed);
            r.param("xi-bar", xi_bar);
            r.param("rho", rho);
            r.param("grid", [xi_grid, x_grid]);
            let spec = SampleSpec {
                seed,
                ..SampleSpec::default()
            };
            let est = estimate_gamma(&prob, xi_bar, *rho, &spec).map_err(Failure::eval)?;
            let g = match gamma {
                Some(g) => *g,
                None if est.constant.is_finite() && est.constant > 0.0 => 0.9 * est.constant,
                None => 1.0,
            };
            if gamma.is_none() {
                r.flags.push("gamma-from-estimate".into());
            }
            r.param("gamma", g);
            let eb = verify_error_bound(&prob, xi_bar, *rho, g, (*xi_grid, *x_grid)).map_err(Failure::eval)?;
            // Without solutions the modulus has nothing to bound.
            let code = if eb.verdict == Verdict::Inconclusive {
                EXIT_INCONCLUSIVE
            } else {
                verdict_code(&[est.verdict, eb.verdict])
            };
            r.flags.extend(eb.flags.iter().cloned());
            r.result("gamma-estimate", cert_value(&est));
            r.result("error-bound", cert_value(&eb));
            Ok((r, code))
        }
        Command::CheckSubtransversality {
            problem,
            point,
            radius,
            resolution,
        } => {
            let prob = load_problem(problem)?;
            check_point(&prob, &point.xi_bar, &point.x_bar)?;
            let p = prob.p();
            let mut r = Report::new("check-subtransversality", &prob.name, &prob.source, seed);
            r.param("xi-bar", &point.xi_bar);
            r.param("x-bar", &point.x_bar);
            r.param("radius", radius);
            r.param("resolution", resolution);
            let graph = GraphSamples::build(&prob, &Window::cube(&point.xi_bar, 2.0 * radius), 81).map_err(Failure::eval)?;
            let inter: Vec<Vec<f64>> = graph
                .points
                .iter()
                .filter(|w| prob.omega.contains(&w[..p], 1e-12))
                .cloned()
                .collect();
            let omega = prob.omega.clone();
            let center = linalg::concat(&point.xi_bar, &point.x_bar);
            let kappa = subtransversality_kappa(
                |w| omega.dist(&w[..p]).unwrap_or(f64::INFINITY),
                |w| graph.dist(w),
                |w| vep_core::geometry::dist_to_points(w, &inter),
                &center,
                *radius,
                *resolution,
            );
            let n_omega = prob
                .omega
                .normal_cone(&point.xi_bar)
                .map_err(|e| Failure::pre_or_eval(e.into()))?
                .product(&RayUnion::zero(prob.n()));
            let n_graph = graph_e_normals(&prob, &point.xi_bar, &point.x_bar, &GraphSampling::default()).map_err(Failure::eval)?;
            let nc = subtransversality_nc(&n_omega, &n_graph);
            r.result("kappa", cert_value(&kappa));
            r.result("normal-cone-test", cert_value(&nc));
            r.result("graph-samples", graph.points.len());
            Ok((r, verdict_code(&[kappa.verdict])))
        }
        Command::CheckStationarity {
            problem,
            point,
            gamma,
            lambda_grid,
            smooth_concave,
            eps_list,
            lf,
            tol,
        } => {
            let prob = load_problem(problem)?;
            check_point(&prob, &point.xi_bar, &point.x_bar)?;
            let mut r = Report::new("check-stationarity", &prob.name, &prob.source, seed);
            r.param("xi-bar", &point.xi_bar);
            r.param("x-bar", &point.x_bar);
            r.param("gamma", gamma);
            r.param("lambda-grid", lambda_grid);
            let mut opts = StationarityOptions::coordinate(prob.p() + prob.n());
            opts.tol_stat = *tol;
            let rep = if *smooth_concave {
                r.param("eps-list", eps_list);
                r.param("lf", lf);
                check_stationarity_smooth_concave(&prob, &point.xi_bar, &point.x_bar, lambda_grid, *gamma, eps_list, *lf, &opts)
            } else {
                check_stationarity_general(&prob, &point.xi_bar, &point.x_bar, lambda_grid, *gamma, &opts)
            }
            .map_err(Failure::pre_or_eval)?;
            r.param("variant", if *smooth_concave { "smooth-concave" } else { "general" });
            r.result("stationarity", stationarity_value(&rep));
            r.flags.extend(rep.flags.iter().cloned());
            let code = match rep.verdict {
                StatVerdict::StationaryWithinTol => 0,
                StatVerdict::RefutedByDirection { .. } => EXIT_REFUTED,
                StatVerdict::Inconclusive => EXIT_INCONCLUSIVE,
            };
            Ok((r, code))
        }
        Command::Solve {
            problem,
            config,
            starts,
            start_radius,
        } => {
            let prob = load_problem(problem)?;
            let mut cfg = match config {
                Some(path) => {
                    let text = std::fs::read_to_string(path).map_err(|e| Failure {
                        code: EXIT_LOAD,
                        message: format!("cannot read config {path}: {e}"),
                    })?;
                    toml::from_str::<PenaltyConfig>(&text).map_err(|e| Failure {
                        code: EXIT_LOAD,
                        message: format!("config error: {e}"),
                    })?
                }
                None => PenaltyConfig::default(),
            };
            cfg.seed = seed;
            let mut r = Report::new("solve", &prob.name, &prob.source, seed);
            r.param("config", &cfg);
            let window = Window::cube(&vec![0.0; prob.p() + prob.n()], *start_radius);
            let st = random_starts(&window, *starts, seed);
            r.param("starts", &st);
            let out = solve_penalized(&prob, &cfg, &st).map_err(Failure::pre_or_eval)?;
            let p = prob.p();
            let best = &out.best;
            r.result("incumbent", json!({"xi": &best.point[..p], "x": &best.point[p..]}));
            r.result("status", best.status.as_str());
            r.result("objective", num(best.objective));
            r.result("merit", num(best.merit));
            r.result("omega-distance", num(best.omega_dist));
            r.result("lambda", best.lambda);
            r.result("stages", best.stages);
            r.result("best-start", out.best_index);
            let chains: Vec<Value> = out
                .chains
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    let steps = out.trace.iter().filter(|t| t.start == i).count();
                    json!({
                        "start": c.start,
                        "point": c.point,
                        "status": c.status.as_str(),
                        "stages": c.stages,
                        "value": num(c.value),
                        "accepted-steps": steps,
                    })
                })
                .collect();
            r.result("chains", chains);
            let mut stationary = false;
            if best.merit <= vep_core::solver::FEASIBILITY_TOL {
                let lam = vec![0.5];
                let opts = StationarityOptions {
                    tol_stat: 1e-2,
                    ..StationarityOptions::coordinate(best.point.len())
                };
                match check_stationarity_general(&prob, &best.point[..p], &best.point[p..], &lam, 0.5, &opts) {
                    Ok(rep) => {
                        stationary = rep.verdict == StatVerdict::StationaryWithinTol;
                        r.result("post-check", stationarity_value(&rep));
                    }
                    Err(e) => r.result("post-check", format!("not run: {e}")),
                }
            } else {
                r.result("post-check", "not run: incumbent is not on the graph of E");
                r.flags.push("no-feasible-incumbent".into());
            }
            let code = if best.status == vep_core::solver::SolveStatus::Converged || stationary {
                0
            } else {
                EXIT_SOLVE
            };
            Ok((r, code))
        }
        Command::ProbeStability {
            problem,
            point,
            gamma,
            radius,
        } => {
            let prob = load_problem(problem)?;
            check_point(&prob, &point.xi_bar, &point.x_bar)?;
            let mut r = Report::new("probe-stability", &prob.name, &prob.source, seed);
            r.param("xi-bar", &point.xi_bar);
            r.param("x-bar", &point.x_bar);
            r.param("gamma", gamma);
            r.param("radius", radius);
            let c = stability_probe(&prob, &point.xi_bar, &point.x_bar, *gamma, *radius).map_err(Failure::pre_or_eval)?;
            r.result("stability", cert_value(&c));
            Ok((r, verdict_code(&[c.verdict])))
        }
        Command::EstimateConstants { problem, point, radius } => {
            let prob = load_problem(problem)?;
            check_point(&prob, &point.xi_bar, &point.x_bar)?;
            let (xi, x) = (&point.xi_bar, &point.x_bar);
            let mut r = Report::new("estimate-constants", &prob.name, &prob.source, seed);
            r.param("xi-bar", xi);
            r.param("x-bar", x);
            r.param("radius", radius);
            let w = Window::cube(&linalg::concat(xi, x), *radius);
            let zw = prob
                .slice_window(xi, prob.z_window.as_ref().or(prob.x_window.as_ref()))
                .map_err(Failure::eval)?;
            let zs = zw.grid(11);
            let lf = estimate_lipschitz_f(&prob, &w, &zs, seed).map_err(Failure::eval)?;
            let alpha = estimate_openness_rate(&prob, &w).map_err(Failure::eval)?;
            let (ok, msg) = lf_below_alpha(&lf, &alpha);
            let x0 = prob.slice(xi).and_then(|s| Ok(s.project(x)?)).map_err(Failure::eval)?;
            let cb = check_c_bounded(&prob, xi, &x0, 1.0).map_err(Failure::eval)?;
            let slope = strong_slope(&prob, xi, x, &DEFAULT_SLOPE_RADII).map_err(Failure::eval)?;
            r.result("lipschitz-f", cert_value(&lf));
            r.result("openness", cert_value(&alpha));
            r.result("lf-below-alpha", json!({"holds": ok, "detail": msg}));
            r.result("c-bounded", cert_value(&cb));
            r.result("strong-slope", num(slope));
            if !ok {
                r.flags.push("lf-below-alpha-refuted".into());
            }
            Ok((r, 0))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("VEP_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let t0 = Instant::now();
    match run(&cli) {
        Ok((report, code)) => {
            print!("{}", report.render(cli.format));
            eprintln!("elapsed: {:.3} s", t0.elapsed().as_secs_f64());
            ExitCode::from(code)
        }
        Err(f) => {
            eprintln!("{}", f.message);
            ExitCode::from(f.code)
        }
    }
}
