//! Sample-based certificates for the constants the optimality theory needs:
//! error-bound modulus, subtransversality, strong slope, `C`-boundedness,
//! Lipschitz and openness rates, and stability of the solution map.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::{dist_to_points, excess, sphere_directions, truncated_normal, RayUnion};
use crate::linalg;
use crate::merit::merit_value;
use crate::problem::{oracle_solutions, OracleGrid, ProblemError, VepProblem, Window};
use crate::subdiff::nu_partial_subgradient_smooth;

/// Merit values at or below this count as solutions when filtering samples.
pub const SOLUTION_TOL: f64 = 1e-9;
/// `γ` is certified only above this margin.
pub const GAMMA_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertKind {
    Gamma,
    Kappa,
    SubtransversalNc,
    StrongSlope,
    CBounded,
    Lipschitz,
    Openness,
    Stability,
    ErrorBound,
}

impl CertKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            CertKind::Gamma => "gamma",
            CertKind::Kappa => "kappa",
            CertKind::SubtransversalNc => "subtransversal-nc",
            CertKind::StrongSlope => "strong-slope",
            CertKind::CBounded => "c-bounded",
            CertKind::Lipschitz => "lipschitz",
            CertKind::Openness => "openness",
            CertKind::Stability => "stability",
            CertKind::ErrorBound => "error-bound",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    CertifiedOnSamples,
    Refuted,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::CertifiedOnSamples => "certified-on-samples",
            Verdict::Refuted => "refuted",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub kind: CertKind,
    pub verdict: Verdict,
    pub constant: f64,
    pub witnesses: Vec<Vec<f64>>,
    pub resolution: String,
    pub flags: Vec<String>,
    /// Secondary numbers (sample counts, auxiliary constants).
    pub values: BTreeMap<String, f64>,
}

impl Certificate {
    fn new(kind: CertKind, verdict: Verdict, constant: f64, resolution: String) -> Self {
        Certificate {
            kind,
            verdict,
            constant,
            witnesses: Vec::new(),
            resolution,
            flags: Vec::new(),
            values: BTreeMap::new(),
        }
    }

    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::CertifiedOnSamples
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleSpec {
    /// Points per axis of the `(ξ, x)` grid.
    pub grid: usize,
    pub random: usize,
    pub seed: u64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        SampleSpec {
            grid: 41,
            random: 200,
            seed: 0,
        }
    }
}

/// The `x` window used for sweeps: the declared one, else the slice at the
/// window center padded by 2.
pub fn x_sweep_window(prob: &VepProblem, xi: &[f64]) -> Result<Window, ProblemError> {
    if let Some(w) = &prob.x_window {
        return Ok(w.clone());
    }
    let s = prob.slice_window(xi, None)?;
    Ok(Window::new(
        s.lo.iter().map(|v| v - 2.0).collect(),
        s.hi.iter().map(|v| v + 2.0).collect(),
    ))
}

fn joint_window(xi_w: &Window, x_w: &Window) -> Window {
    Window::new(linalg::concat(&xi_w.lo, &x_w.lo), linalg::concat(&xi_w.hi, &x_w.hi))
}

/// Keeps the total near `per_axis²` when the joint dimension exceeds 2.
fn per_axis(per_axis_2d: usize, dim: usize) -> usize {
    if dim <= 2 {
        per_axis_2d
    } else {
        ((per_axis_2d * per_axis_2d) as f64).powf(1.0 / dim as f64).round().max(3.0) as usize
    }
}

/// `dist(0, ∂_x ν(ξ, x) ⊕ N♭(x, K(ξ)))`.
pub fn gamma_sample(prob: &VepProblem, xi: &[f64], x: &[f64]) -> Result<f64, ProblemError> {
    let dnu = nu_partial_subgradient_smooth(prob, xi, x)?;
    let nflat = truncated_normal(x, &prob.slice(xi)?)?;
    Ok(dnu.body().sum(&nflat).min_norm_point()?.dist)
}

/// `γ_est = min dist(0, ∂_x ν ⊕ N♭)` over non-solution samples with `ξ ∈ B(ξ̄, ρ)`.
pub fn estimate_gamma(prob: &VepProblem, xi_bar: &[f64], rho: f64, spec: &SampleSpec) -> Result<Certificate, ProblemError> {
    let p = prob.p();
    let xw = x_sweep_window(prob, xi_bar)?;
    let w = joint_window(&Window::cube(xi_bar, rho), &xw);
    let res = per_axis(spec.grid, w.dim());
    let mut pts = w.grid(res);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for _ in 0..spec.random {
        pts.push(w.sample(&mut rng));
    }
    let vals: Vec<Option<(f64, usize)>> = pts
        .par_iter()
        .enumerate()
        .map(|(i, pt)| {
            let (xi, x) = pt.split_at(p);
            if merit_value(prob, xi, x)? <= SOLUTION_TOL {
                return Ok(None);
            }
            Ok(Some((gamma_sample(prob, xi, x)?, i)))
        })
        .collect::<Result<_, ProblemError>>()?;
    let tested: Vec<(f64, usize)> = vals.into_iter().flatten().collect();
    let resolution = format!("grid {res}^{} + {} random (seed {})", w.dim(), spec.random, spec.seed);
    let Some(&(g, i)) = tested.iter().min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))) else {
        let mut c = Certificate::new(CertKind::Gamma, Verdict::Inconclusive, f64::NAN, resolution);
        c.flags.push("all-samples-are-solutions".into());
        return Ok(c);
    };
    let verdict = if g > GAMMA_MARGIN { Verdict::CertifiedOnSamples } else { Verdict::Refuted };
    let mut c = Certificate::new(CertKind::Gamma, verdict, g, resolution);
    c.witnesses.push(pts[i].clone());
    c.values.insert("samples-tested".into(), tested.len() as f64);
    Ok(c)
}

/// Checks `dist(x, E(ξ)) ≤ merit(ξ, x)/γ + slack` on a `(ξ, x)` grid, with
/// `E(ξ)` from the brute-force oracle and `slack` its x-step.
pub fn verify_error_bound(
    prob: &VepProblem,
    xi_bar: &[f64],
    rho: f64,
    gamma: f64,
    grid: (usize, usize),
) -> Result<Certificate, ProblemError> {
    let p = prob.p();
    let xi_w = Window::cube(xi_bar, rho);
    let xw = x_sweep_window(prob, xi_bar)?;
    let xis = xi_w.grid(per_axis(grid.0, 2 * p));
    let xs = xw.grid(if prob.n() == 1 { grid.1 } else { per_axis(grid.1, 2 * prob.n()) });
    let og = OracleGrid::for_problem(prob);
    let rows: Vec<(Vec<f64>, bool, Vec<(f64, Vec<f64>)>)> = xis
        .par_iter()
        .map(|xi| {
            let sols = oracle_solutions(prob, xi, &og)?;
            let slack = prob.slice_window(xi, prob.x_window.as_ref())?.step(og.x_resolution);
            let mut bad = Vec::new();
            if !sols.is_empty() {
                for x in &xs {
                    let d = dist_to_points(x, &sols);
                    let m = merit_value(prob, xi, x)?;
                    let gap = d - (m / gamma + slack);
                    if gap > 0.0 {
                        bad.push((gap, linalg::concat(xi, x)));
                    }
                }
            }
            Ok((xi.clone(), sols.is_empty(), bad))
        })
        .collect::<Result<_, ProblemError>>()?;
    let resolution = format!(
        "xi grid {}, x grid {}, oracle x/z resolution {}",
        xis.len(),
        xs.len(),
        og.x_resolution
    );
    let mut worst: Option<(f64, Vec<f64>)> = None;
    let mut empty = Vec::new();
    for (xi, is_empty, bad) in rows {
        if is_empty {
            empty.push(xi);
        }
        for (gap, w) in bad {
            if worst.as_ref().is_none_or(|(g, _)| gap > *g) {
                worst = Some((gap, w));
            }
        }
    }
    let mut c = if let Some((gap, w)) = worst {
        let mut c = Certificate::new(CertKind::ErrorBound, Verdict::Refuted, gamma, resolution);
        c.witnesses.push(w);
        c.values.insert("max-violation".into(), gap);
        c
    } else if !empty.is_empty() {
        Certificate::new(CertKind::ErrorBound, Verdict::Inconclusive, gamma, resolution)
    } else {
        Certificate::new(CertKind::ErrorBound, Verdict::CertifiedOnSamples, gamma, resolution)
    };
    if !empty.is_empty() {
        c.flags.push("E(xi)-empty".into());
        c.values.insert("empty-xi-count".into(), empty.len() as f64);
        if c.verdict == Verdict::Inconclusive {
            c.witnesses.extend(empty.into_iter().take(5));
        }
    }
    Ok(c)
}

pub const DEFAULT_SLOPE_RADII: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Sampled strong slope of `merit(ξ, ·)` at `x`: largest unit-rate decrease
/// over spheres of shrinking radius, clamped at 0 and extrapolated to radius
/// zero when the last two radii disagree monotonically.
pub fn strong_slope(prob: &VepProblem, xi: &[f64], x: &[f64], radii: &[f64]) -> Result<f64, ProblemError> {
    let m0 = merit_value(prob, xi, x)?;
    let dirs = sphere_directions(prob.n(), 64);
    let mut slopes = Vec::with_capacity(radii.len());
    for &r in radii {
        let mut best: f64 = 0.0;
        for d in &dirs {
            let y: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + r * b).collect();
            best = best.max((m0 - merit_value(prob, xi, &y)?) / r);
        }
        slopes.push(best);
    }
    let k = slopes.len();
    if k >= 3 {
        let (a, b, c) = (slopes[k - 3], slopes[k - 2], slopes[k - 1]);
        let monotone = (a <= b && b <= c) || (a >= b && b >= c);
        if monotone && (b - c).abs() > 1e-9 {
            let (rb, rc) = (radii[k - 2], radii[k - 1]);
            return Ok((c + (c - b) * rc / (rb - rc)).max(0.0));
        }
    }
    Ok(slopes.last().copied().unwrap_or(0.0))
}

/// `κ_est = max dist(w, S₁∩S₂) / max{dist(w, S₁), dist(w, S₂)}` over a grid
/// on the cube of radius `r` around `center`.
pub fn subtransversality_kappa(
    d1: impl Fn(&[f64]) -> f64 + Sync,
    d2: impl Fn(&[f64]) -> f64 + Sync,
    d12: impl Fn(&[f64]) -> f64 + Sync,
    center: &[f64],
    r: f64,
    resolution: usize,
) -> Certificate {
    let pts = Window::cube(center, r).grid(resolution);
    let ratios: Vec<(f64, usize)> = pts
        .par_iter()
        .enumerate()
        .filter_map(|(i, w)| {
            let num = d12(w);
            if num <= 1e-12 {
                return None;
            }
            let den = d1(w).max(d2(w));
            Some((if den <= 1e-12 { f64::INFINITY } else { num / den }, i))
        })
        .collect();
    let res = format!("grid {resolution}^{} radius {r}", center.len());
    let Some(&(k, i)) = ratios.iter().max_by(|a, b| a.0.total_cmp(&b.0).then(b.1.cmp(&a.1))) else {
        let mut c = Certificate::new(CertKind::Kappa, Verdict::CertifiedOnSamples, 1.0, res);
        c.flags.push("all-samples-in-intersection".into());
        return c;
    };
    let mut c = if k.is_finite() {
        Certificate::new(CertKind::Kappa, Verdict::CertifiedOnSamples, k, res)
    } else {
        Certificate::new(CertKind::Kappa, Verdict::Refuted, f64::INFINITY, res)
    };
    c.witnesses.push(pts[i].clone());
    c
}

/// `N(s̄; S₁) ∩ [−N(s̄; S₂)] = {0}` tested branch by branch.
pub fn subtransversality_nc(n1: &RayUnion, n2: &RayUnion) -> Certificate {
    let res = format!("{} x {} branches", n1.branches.len(), n2.branches.len());
    let mut c = match n1.common_ray(&n2.neg()) {
        Some(d) => {
            let mut c = Certificate::new(CertKind::SubtransversalNc, Verdict::Refuted, 0.0, res);
            c.witnesses.push(d);
            c
        }
        None => Certificate::new(CertKind::SubtransversalNc, Verdict::CertifiedOnSamples, 0.0, res),
    };
    if n1.approximate || n2.approximate {
        c.flags.push("sampled-normals".into());
    }
    c
}

/// Distance oracles for `gph E` built from the solution oracle on a ξ grid.
#[derive(Debug, Clone)]
pub struct GraphSamples {
    pub points: Vec<Vec<f64>>,
    pub xi_step: f64,
}

impl GraphSamples {
    pub fn build(prob: &VepProblem, xi_window: &Window, xi_resolution: usize) -> Result<Self, ProblemError> {
        let og = OracleGrid::for_problem(prob);
        let xis = xi_window.grid(xi_resolution);
        let rows: Vec<Vec<Vec<f64>>> = xis
            .par_iter()
            .map(|xi| Ok(oracle_solutions(prob, xi, &og)?.iter().map(|x| linalg::concat(xi, x)).collect()))
            .collect::<Result<_, ProblemError>>()?;
        Ok(GraphSamples {
            points: rows.into_iter().flatten().collect(),
            xi_step: xi_window.step(xi_resolution),
        })
    }

    pub fn dist(&self, w: &[f64]) -> f64 {
        dist_to_points(w, &self.points)
    }
}

/// Sup of `‖f(ξ, x0, z)‖` over `z` with `f ∉ C`, on growing `z` grids.
pub fn check_c_bounded(prob: &VepProblem, xi: &[f64], x0: &[f64], window: f64) -> Result<Certificate, ProblemError> {
    let slice = prob.slice(xi)?;
    let res = per_axis(201, 2 * prob.n());
    let bounded = slice.bounding_box();
    let mut sups = Vec::new();
    let mut witness = None;
    for k in 0..4 {
        let w = match &bounded {
            Some((lo, hi)) => Window::new(lo.clone(), hi.clone()),
            None => Window::cube(x0, window * 2f64.powi(k)),
        };
        let mut sup: f64 = 0.0;
        for z in w.grid(res) {
            if !slice.contains(&z, 1e-12) {
                continue;
            }
            if prob.dist_f_to_c(xi, x0, &z)? > prob.tol_c {
                let v = linalg::norm(&prob.eval_f(xi, x0, &z)?);
                if v > sup {
                    sup = v;
                    witness = Some(z);
                }
            }
        }
        sups.push(sup);
    }
    let n = sups.len();
    let growing = sups[n - 1] > sups[n - 2] * 1.01 + 1e-12;
    let resolution = format!("z grid {res} per axis, radii {window} x 2^k, k < 4");
    let mut c = if growing {
        Certificate::new(CertKind::CBounded, Verdict::Inconclusive, sups[n - 1], resolution)
    } else {
        Certificate::new(CertKind::CBounded, Verdict::CertifiedOnSamples, sups[n - 1], resolution)
    };
    if growing {
        c.flags.push("growth-at-window-edge".into());
    }
    c.witnesses.extend(witness);
    Ok(c)
}

fn z_samples(prob: &VepProblem, xi: &[f64]) -> Result<Vec<Vec<f64>>, ProblemError> {
    let zw = prob.slice_window(xi, prob.z_window.as_ref().or(prob.x_window.as_ref()))?;
    Ok(zw.grid(per_axis(11, 2 * prob.n())))
}

/// `ℓ_f`: largest difference quotient of `(ξ, x) ↦ f(ξ, x, z)` over grid
/// neighbours and random pairs of the window, maximized over `z`.
pub fn estimate_lipschitz_f(prob: &VepProblem, window: &Window, z_set: &[Vec<f64>], seed: u64) -> Result<Certificate, ProblemError> {
    let p = prob.p();
    let res = per_axis(21, window.dim());
    let grid = window.grid(res);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    let h = window.step(res);
    for a in &grid {
        for k in 0..a.len() {
            let mut b = a.clone();
            b[k] += h;
            pairs.push((a.clone(), b));
        }
    }
    for _ in 0..500 {
        pairs.push((window.sample(&mut rng), window.sample(&mut rng)));
    }
    let qs: Vec<f64> = pairs
        .par_iter()
        .map(|(a, b)| {
            let d = linalg::dist(a, b);
            if d <= 1e-12 {
                return Ok(0.0);
            }
            let mut best: f64 = 0.0;
            for z in z_set {
                let fa = prob.eval_f(&a[..p], &a[p..], z)?;
                let fb = prob.eval_f(&b[..p], &b[p..], z)?;
                best = best.max(linalg::dist(&fa, &fb) / d);
            }
            Ok(best)
        })
        .collect::<Result<_, ProblemError>>()?;
    let lf = qs.iter().copied().fold(0.0, f64::max);
    let mut c = Certificate::new(
        CertKind::Lipschitz,
        Verdict::CertifiedOnSamples,
        lf,
        format!("{} pairs x {} z samples", pairs.len(), z_set.len()),
    );
    c.values.insert("pairs".into(), pairs.len() as f64);
    Ok(c)
}

/// Largest `a` with `B(g(z), a r) ⊆ g(B(z, r))` for `g = f(ξ, x, ·)`, tested
/// on an output grid; `0` when no rate is resolved above the sampling floor.
pub fn openness_rate_at(prob: &VepProblem, xi: &[f64], x: &[f64], z: &[f64], r: f64) -> Result<f64, ProblemError> {
    let n = prob.n();
    let g0 = prob.eval_f(xi, x, z)?;
    let ball_res = per_axis(41, 2 * n);
    let mut image = Vec::new();
    for q in Window::cube(z, r).grid(ball_res) {
        if linalg::dist(&q, z) <= r * (1.0 + 1e-12) {
            image.push(prob.eval_f(xi, x, &q)?);
        }
    }
    // Covering tolerance: half the largest nearest-neighbour gap of the image.
    let mut gap: f64 = 0.0;
    for (i, a) in image.iter().enumerate() {
        let nn = image
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i)
            .map(|(_, b)| linalg::dist(a, b))
            .fold(f64::INFINITY, f64::min);
        if nn.is_finite() {
            gap = gap.max(nn);
        }
    }
    let delta = 0.5 * gap * 1.01 + 1e-12;
    let a_max = image.iter().map(|y| linalg::dist(y, &g0)).fold(0.0, f64::max) / r;
    let dirs = sphere_directions(prob.m, 64);
    let covered = |a: f64| {
        dirs.iter().all(|u| {
            [0.25, 0.5, 0.75, 1.0].iter().all(|t| {
                let y: Vec<f64> = g0.iter().zip(u).map(|(c, v)| c + t * a * r * v).collect();
                dist_to_points(&y, &image) <= delta
            })
        })
    };
    let (mut lo, mut hi) = (0.0, a_max);
    if covered(hi) {
        lo = hi;
    } else {
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if covered(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    Ok(if lo * r > 4.0 * delta { lo } else { 0.0 })
}

/// `α`: minimum openness rate of the `z`-slice maps over sampled `(ξ, x)`,
/// `z` and radii.
pub fn estimate_openness_rate(prob: &VepProblem, window: &Window) -> Result<Certificate, ProblemError> {
    let p = prob.p();
    let mut wpts = vec![window.center()];
    wpts.extend(window.grid(2));
    let radii = [0.1, 0.05];
    let mut alpha = f64::INFINITY;
    let mut witness = None;
    for w in &wpts {
        let (xi, x) = w.split_at(p);
        for z in z_samples(prob, xi)?.iter().step_by(2) {
            for &r in &radii {
                let a = openness_rate_at(prob, xi, x, z, r)?;
                if a < alpha {
                    alpha = a;
                    witness = Some(linalg::concat(w, z));
                }
            }
        }
    }
    let mut c = Certificate::new(
        CertKind::Openness,
        Verdict::CertifiedOnSamples,
        alpha,
        format!("{} (xi, x) points, radii {radii:?}", wpts.len()),
    );
    if alpha <= 0.0 {
        c.verdict = Verdict::Refuted;
        c.flags.push("not-open-at-linear-rate".into());
    }
    c.witnesses.extend(witness);
    Ok(c)
}

/// Flags whether `ℓ_f < α` holds for the two estimates.
pub fn lf_below_alpha(lf: &Certificate, alpha: &Certificate) -> (bool, String) {
    let ok = lf.constant < alpha.constant;
    let msg = format!(
        "lf = {} {} alpha = {}",
        lf.constant,
        if ok { "<" } else { ">=" },
        alpha.constant
    );
    (ok, msg)
}

/// Checks `B(x̄, merit(ξ, x̄)/γ) ∩ E(ξ) ≠ ∅` on sampled `ξ` and compares the
/// sampled excess ratio of `E` with the bound `ℓ_merit / γ`.
pub fn stability_probe(prob: &VepProblem, xi_bar: &[f64], x_bar: &[f64], gamma: f64, radius: f64) -> Result<Certificate, ProblemError> {
    let og = OracleGrid::for_problem(prob);
    let xi_w = Window::cube(xi_bar, radius);
    let res = per_axis(21, 2 * prob.p());
    let xis = xi_w.grid(res);
    let m_bar = merit_value(prob, xi_bar, x_bar)?;
    let rows: Vec<(Vec<f64>, Vec<Vec<f64>>, f64, f64)> = xis
        .par_iter()
        .map(|xi| {
            let sols = oracle_solutions(prob, xi, &og)?;
            let m = merit_value(prob, xi, x_bar)?;
            let slack = prob.slice_window(xi, prob.x_window.as_ref())?.step(og.x_resolution);
            Ok((xi.clone(), sols, m, slack))
        })
        .collect::<Result<_, ProblemError>>()?;
    let mut lsc_fail = Vec::new();
    let mut beta: f64 = 0.0;
    let mut empty = 0usize;
    for (xi, sols, m, slack) in &rows {
        if sols.is_empty() {
            empty += 1;
            continue;
        }
        if dist_to_points(x_bar, sols) > m / gamma + slack {
            lsc_fail.push(xi.clone());
        }
        let d = linalg::dist(xi, xi_bar);
        if d > 1e-12 {
            beta = beta.max((m - m_bar).abs() / d);
        }
    }
    // Lipschitz modulus of ξ ↦ merit(ξ, x) for x near x̄.
    let xs: Vec<Vec<f64>> = Window::cube(x_bar, radius).grid(per_axis(5, 2 * prob.n()));
    let mut l_mf: f64 = 0.0;
    let step = xi_w.step(res);
    for x in &xs {
        for xi in &xis {
            for k in 0..xi.len() {
                let mut xi2 = xi.clone();
                xi2[k] += step;
                let q = (merit_value(prob, &xi2, x)? - merit_value(prob, xi, x)?).abs() / step;
                l_mf = l_mf.max(q);
            }
        }
    }
    let bound = l_mf / gamma;
    let ball = radius.max(1.0);
    let mut ratio: f64 = 0.0;
    let mut ratio_slack: f64 = 0.0;
    let mut ratio_witness = None;
    for i in 0..rows.len() {
        for j in 0..rows.len() {
            let (xi1, s1, _, sl1) = &rows[i];
            let (xi2, s2, _, sl2) = &rows[j];
            let d = linalg::dist(xi1, xi2);
            if i == j || d > 1.5 * step || s1.is_empty() || s2.is_empty() {
                continue;
            }
            let near: Vec<Vec<f64>> = s2.iter().filter(|x| linalg::dist(x, x_bar) <= ball).cloned().collect();
            let e = excess(&near, |x| dist_to_points(x, s1));
            let q = e / d;
            if q > ratio {
                ratio = q;
                ratio_slack = (sl1 + sl2) / d;
                ratio_witness = Some(linalg::concat(xi1, xi2));
            }
        }
    }
    let resolution = format!("xi grid {}, oracle resolution {}", xis.len(), og.x_resolution);
    let mut c = Certificate::new(CertKind::Stability, Verdict::CertifiedOnSamples, bound, resolution);
    c.values.insert("beta-merit".into(), beta);
    c.values.insert("lipschitz-merit".into(), l_mf);
    c.values.insert("aubin-bound".into(), bound);
    c.values.insert("excess-ratio".into(), ratio);
    if !lsc_fail.is_empty() {
        c.verdict = Verdict::Refuted;
        c.flags.push("lsc-inclusion-violated".into());
        c.witnesses.extend(lsc_fail.into_iter().take(5));
    } else if ratio > bound + ratio_slack + 1e-9 {
        c.verdict = Verdict::Refuted;
        c.flags.push("excess-ratio-above-bound".into());
        c.witnesses.extend(ratio_witness);
    }
    if empty > 0 {
        c.flags.push("E(xi)-empty".into());
        if c.verdict == Verdict::CertifiedOnSamples {
            c.verdict = Verdict::Inconclusive;
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{load, load_str, EXAMPLE_PAPER};

    fn paper() -> VepProblem {
        load("example:paper").unwrap()
    }

    #[test]
    fn gamma_table_values() {
        let p = paper();
        assert_eq!(gamma_sample(&p, &[0.3], &[3.0]).unwrap(), 1.0);
        assert_eq!(gamma_sample(&p, &[0.3], &[0.0]).unwrap(), 1.0);
        assert_eq!(gamma_sample(&p, &[0.3], &[-1.3]).unwrap(), 1.0);
        assert_eq!(gamma_sample(&p, &[0.3], &[-2.0]).unwrap(), 2.0);
    }

    #[test]
    fn gamma_without_vector_inequality() {
        let text = EXAMPLE_PAPER
            .replace("\"x1 - z1\", \"abs(xi1)\"", "\"0\", \"0\"")
            .replace("\"-abs(xi1) - 1\"", "-1.0")
            .replace("\"abs(xi1) + 1\"", "1.0");
        let p = load_str(&text).unwrap();
        let c = estimate_gamma(&p, &[0.0], 1.0, &SampleSpec { grid: 21, random: 20, seed: 1 }).unwrap();
        assert!(c.is_certified());
        assert!((c.constant - 1.0).abs() < 1e-12);
    }

    #[test]
    fn error_bound_refuted_for_large_gamma() {
        let p = paper();
        let c = verify_error_bound(&p, &[0.0], 1.0, 5.0, (5, 9)).unwrap();
        assert_eq!(c.verdict, Verdict::Refuted);
        let c = verify_error_bound(&p, &[0.0], 1.0, 0.9, (5, 33)).unwrap();
        assert!(c.is_certified(), "{c:?}");
    }

    #[test]
    fn strong_slope_examples() {
        let p = paper();
        let r = DEFAULT_SLOPE_RADII;
        assert!((strong_slope(&p, &[0.0], &[0.0], &r).unwrap() - 1.0).abs() < 1e-9);
        assert!((strong_slope(&p, &[0.0], &[-2.0], &r).unwrap() - 2.0).abs() < 1e-9);
        assert_eq!(strong_slope(&p, &[0.0], &[1.0], &r).unwrap(), 0.0);
    }

    #[test]
    fn kappa_trivial_pairs() {
        let d1 = |w: &[f64]| (w[0].abs() - 1.0).max(0.0);
        let c = subtransversality_kappa(d1, |_| 0.0, d1, &[0.0], 2.0, 41);
        assert_eq!(c.constant, 1.0);
        let c = subtransversality_kappa(d1, d1, d1, &[0.0], 2.0, 41);
        assert_eq!(c.constant, 1.0);
    }

    #[test]
    fn normal_cone_test_cases() {
        let a = RayUnion::single(2, vec![vec![1.0, 0.0]]);
        let c = subtransversality_nc(&a, &a.neg());
        assert_eq!(c.verdict, Verdict::Refuted);
        assert_eq!(c.witnesses, vec![vec![1.0, 0.0]]);
        let c = subtransversality_nc(&a, &RayUnion::zero(2));
        assert!(c.is_certified());
    }

    #[test]
    fn c_boundedness() {
        let p = paper();
        let c = check_c_bounded(&p, &[0.5], &[0.0], 1.0).unwrap();
        assert!(c.is_certified());
        assert!((c.constant - (2.25f64 + 0.25).sqrt()).abs() < 1e-9);
        let c = check_c_bounded(&p, &[0.5], &[5.0], 1.0).unwrap();
        assert!(c.is_certified());
        assert_eq!(c.constant, 0.0);
        let text = EXAMPLE_PAPER
            .replace("\"x1 - z1\"", "\"-z1\"")
            .replace("type = \"box\"\nlower = [\"-abs(xi1) - 1\"]", "type = \"box\"\nlower = [\"-inf\"]")
            .replace("upper = [\"abs(xi1) + 1\"]", "upper = [\"inf\"]");
        let q = load_str(&text).unwrap();
        let c = check_c_bounded(&q, &[0.5], &[0.0], 1.0).unwrap();
        assert_eq!(c.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn lipschitz_and_openness() {
        let p = paper();
        let w = Window::new(vec![-1.0, -1.0], vec![1.0, 1.0]);
        let lf = estimate_lipschitz_f(&p, &w, &z_samples(&p, &[0.0]).unwrap(), 3).unwrap();
        assert!((lf.constant - 1.0).abs() < 1e-9, "{}", lf.constant);
        let alpha = estimate_openness_rate(&p, &w).unwrap();
        assert_eq!(alpha.constant, 0.0);
        assert!(!lf_below_alpha(&lf, &alpha).0);
        let text = EXAMPLE_PAPER
            .replace("m = 2", "m = 1")
            .replace("\"x1 - z1\", \"abs(xi1)\"", "\"2*z1\"");
        let q = load_str(&text).unwrap();
        let a = openness_rate_at(&q, &[0.0], &[0.0], &[0.0], 0.1).unwrap();
        assert!((a - 2.0).abs() < 1e-6, "{a}");
    }

    #[test]
    fn stability_on_example() {
        let p = paper();
        let c = stability_probe(&p, &[0.0], &[1.0], 0.9, 1.0).unwrap();
        assert!(c.is_certified(), "{c:?}");
        assert!((c.values["beta-merit"] - 1.0).abs() < 1e-9);
        assert!(c.values["excess-ratio"] <= 1.0 + 1e-9);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use crate::problem::load;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn paper() -> &'static VepProblem {
        static P: OnceLock<VepProblem> = OnceLock::new();
        P.get_or_init(|| load("example:paper").unwrap())
    }

    fn small() -> SampleSpec {
        SampleSpec {
            grid: 15,
            random: 30,
            seed: 3,
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn gamma_below_estimate_gives_error_bound(xi_bar in -1.0f64..1.0, rho in 0.2f64..1.0, frac in 0.3f64..0.95) {
            let p = paper();
            let g = estimate_gamma(p, &[xi_bar], rho, &small()).unwrap();
            prop_assert!(g.is_certified());
            let eb = verify_error_bound(p, &[xi_bar], rho, frac * g.constant, (9, 41)).unwrap();
            prop_assert!(eb.is_certified(), "{:?}", eb);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn strong_slope_dominates_gamma(xi in -1.0f64..1.0, x in -4.0f64..4.0) {
            static G: OnceLock<f64> = OnceLock::new();
            let p = paper();
            prop_assume!(merit_value(p, &[xi], &[x]).unwrap() > 1e-3);
            let g = *G.get_or_init(|| estimate_gamma(p, &[0.0], 1.0, &small()).unwrap().constant);
            let s = strong_slope(p, &[xi], &[x], &DEFAULT_SLOPE_RADII).unwrap();
            prop_assert!(s >= g - 0.05, "slope {} gamma {}", s, g);
        }
    }
}
