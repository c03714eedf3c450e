use serde::Serialize;

use super::cone::ConeRepr;
use super::nnls::nnls;
use super::GeometryError;
use crate::linalg;

/// Angular resolution of two-dimensional cone caps, in degrees.
pub const CAP_RESOLUTION_DEG: f64 = 2.0;
pub const MNP_TOL: f64 = 1e-10;

/// `cone ∩ radius·B`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CapPart {
    pub cone: ConeRepr,
    pub radius: f64,
}

impl CapPart {
    /// Exact support: `radius · ‖Proj_K d‖`.
    pub fn support(&self, d: &[f64]) -> f64 {
        self.radius * linalg::norm(&self.cone.project(d))
    }

    /// `conv{0, unit directions of the cone}` scaled by the radius: 2° arcs
    /// in the plane, the generators themselves elsewhere.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let dim = self.cone.dim();
        let mut dirs = self.cone.generating_rays();
        if dim == 2 {
            let steps = (360.0 / CAP_RESOLUTION_DEG).round() as usize;
            for k in 0..steps {
                let t = (k as f64) * CAP_RESOLUTION_DEG.to_radians();
                let u = vec![t.cos(), t.sin()];
                if self.cone.contains(&u, 1e-9) {
                    dirs.push(u);
                }
            }
        }
        let mut out = vec![vec![0.0; dim]];
        out.extend(dirs.into_iter().map(|u| linalg::scale(&u, self.radius)));
        linalg::dedup_points(out, 1e-12)
    }
}

/// `conv(hull_points) ⊕ ball_radius·B ⊕ Σ caps ⊕ cone(rays)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexBody {
    pub dim: usize,
    pub hull_points: Vec<Vec<f64>>,
    pub ball_radius: f64,
    pub caps: Vec<CapPart>,
    /// Recession directions; nonempty only for unbounded bodies.
    pub rays: Vec<Vec<f64>>,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinNorm {
    pub point: Vec<f64>,
    pub dist: f64,
}

impl ConvexBody {
    pub fn empty(dim: usize) -> Self {
        ConvexBody {
            dim,
            hull_points: Vec::new(),
            ball_radius: 0.0,
            caps: Vec::new(),
            rays: Vec::new(),
            label: "empty".into(),
        }
    }

    pub fn point(p: Vec<f64>) -> Self {
        Self::polytope(vec![p])
    }

    pub fn zero(dim: usize) -> Self {
        Self::point(vec![0.0; dim])
    }

    pub fn polytope(points: Vec<Vec<f64>>) -> Self {
        let dim = points.first().map_or(0, |p| p.len());
        ConvexBody {
            dim,
            hull_points: linalg::dedup_points(points, 0.0),
            ball_radius: 0.0,
            caps: Vec::new(),
            rays: Vec::new(),
            label: String::new(),
        }
    }

    pub fn ball(dim: usize, radius: f64) -> Self {
        let mut b = Self::zero(dim);
        b.ball_radius = radius;
        b
    }

    pub fn cap(cone: ConeRepr, radius: f64) -> Self {
        let dim = cone.dim();
        let mut b = Self::zero(dim);
        b.caps.push(CapPart { cone, radius });
        b
    }

    /// Axis box `[lo, hi]` as a polytope.
    pub fn axis_box(lo: &[f64], hi: &[f64]) -> Self {
        let n = lo.len();
        let mut pts = Vec::new();
        for mask in 0..(1usize << n) {
            pts.push((0..n).map(|i| if mask & (1 << i) != 0 { hi[i] } else { lo[i] }).collect());
        }
        Self::polytope(pts)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn is_empty(&self) -> bool {
        self.hull_points.is_empty()
    }

    pub fn is_bounded(&self) -> bool {
        self.rays.iter().all(|r| linalg::norm(r) == 0.0)
    }

    pub fn support(&self, d: &[f64]) -> f64 {
        if self.is_empty() {
            return f64::NEG_INFINITY;
        }
        let dn = linalg::norm(d);
        if self.rays.iter().any(|r| linalg::dot(r, d) > 1e-12 * dn * linalg::norm(r)) {
            return f64::INFINITY;
        }
        let h = self
            .hull_points
            .iter()
            .map(|p| linalg::dot(p, d))
            .fold(f64::NEG_INFINITY, f64::max);
        h + self.ball_radius * dn + self.caps.iter().map(|c| c.support(d)).sum::<f64>()
    }

    /// Minkowski sum.
    pub fn sum(&self, other: &ConvexBody) -> ConvexBody {
        if self.is_empty() || other.is_empty() {
            return ConvexBody::empty(self.dim.max(other.dim));
        }
        let mut pts = Vec::with_capacity(self.hull_points.len() * other.hull_points.len());
        for p in &self.hull_points {
            for q in &other.hull_points {
                pts.push(linalg::add(p, q));
            }
        }
        let mut caps = self.caps.clone();
        caps.extend(other.caps.iter().cloned());
        let mut rays = self.rays.clone();
        rays.extend(other.rays.iter().cloned());
        ConvexBody {
            dim: self.dim,
            hull_points: linalg::dedup_points(pts, 1e-14),
            ball_radius: self.ball_radius + other.ball_radius,
            caps,
            rays,
            label: join_labels(&self.label, &other.label, " + "),
        }
    }

    /// `t · body` for `t ≥ 0`.
    pub fn scaled(&self, t: f64) -> ConvexBody {
        assert!(t >= 0.0, "negative scaling of a convex body");
        ConvexBody {
            dim: self.dim,
            hull_points: linalg::dedup_points(
                self.hull_points.iter().map(|p| linalg::scale(p, t)).collect(),
                0.0,
            ),
            ball_radius: self.ball_radius * t,
            caps: self
                .caps
                .iter()
                .map(|c| CapPart {
                    cone: c.cone.clone(),
                    radius: c.radius * t,
                })
                .collect(),
            rays: if t == 0.0 { Vec::new() } else { self.rays.clone() },
            label: self.label.clone(),
        }
    }

    /// Cartesian product `self × other`.
    pub fn product(&self, other: &ConvexBody) -> ConvexBody {
        let (a, b) = (self.dim, other.dim);
        let lift_a = |v: &[f64]| linalg::concat(v, &vec![0.0; b]);
        let lift_b = |v: &[f64]| linalg::concat(&vec![0.0; a], v);
        let mut left = self.discretized();
        left.hull_points = left.hull_points.iter().map(|p| lift_a(p)).collect();
        left.rays = left.rays.iter().map(|r| lift_a(r)).collect();
        left.dim = a + b;
        let mut right = other.discretized();
        right.hull_points = right.hull_points.iter().map(|p| lift_b(p)).collect();
        right.rays = right.rays.iter().map(|r| lift_b(r)).collect();
        right.dim = a + b;
        let mut out = left.sum(&right);
        out.label = join_labels(&self.label, &other.label, " × ");
        out
    }

    /// Image under the linear map with the given rows. Caps and balls are
    /// discretized first (balls as 2° polygons in the plane, `±e_i` otherwise).
    pub fn linear_image(&self, rows: &[Vec<f64>]) -> ConvexBody {
        let out_dim = rows.len();
        let d = self.discretized();
        let map = |v: &[f64]| -> Vec<f64> { rows.iter().map(|r| linalg::dot(r, v)).collect() };
        ConvexBody {
            dim: out_dim,
            hull_points: linalg::dedup_points(d.hull_points.iter().map(|p| map(p)).collect(), 1e-14),
            ball_radius: 0.0,
            caps: Vec::new(),
            rays: d.rays.iter().map(|r| map(r)).collect(),
            label: self.label.clone(),
        }
    }

    /// Same body with caps (and the ball, when `include_ball`) replaced by
    /// point clouds.
    fn discretize(&self, include_ball: bool) -> ConvexBody {
        let mut pts = self.hull_points.clone();
        for cap in &self.caps {
            let cp = cap.points();
            let mut next = Vec::with_capacity(pts.len() * cp.len());
            for p in &pts {
                for q in &cp {
                    next.push(linalg::add(p, q));
                }
            }
            pts = linalg::dedup_points(next, 1e-14);
        }
        let mut radius = self.ball_radius;
        if include_ball && radius > 0.0 {
            let bp = ball_points(self.dim, radius);
            let mut next = Vec::with_capacity(pts.len() * bp.len());
            for p in &pts {
                for q in &bp {
                    next.push(linalg::add(p, q));
                }
            }
            pts = linalg::dedup_points(next, 1e-14);
            radius = 0.0;
        }
        ConvexBody {
            dim: self.dim,
            hull_points: pts,
            ball_radius: radius,
            caps: Vec::new(),
            rays: self.rays.clone(),
            label: self.label.clone(),
        }
    }

    pub fn discretized(&self) -> ConvexBody {
        self.discretize(true)
    }

    /// Point of the body closest to the origin.
    pub fn min_norm_point(&self) -> Result<MinNorm, GeometryError> {
        if self.is_empty() {
            return Err(GeometryError::EmptyBody);
        }
        let d = self.discretize(false);
        let y = if d.rays.is_empty() {
            wolfe_min_norm(&d.hull_points).0
        } else {
            min_norm_with_rays(&d.hull_points, &d.rays)
        };
        let n = linalg::norm(&y);
        if n <= self.ball_radius {
            return Ok(MinNorm {
                point: vec![0.0; self.dim],
                dist: 0.0,
            });
        }
        let point = linalg::scale(&y, 1.0 - self.ball_radius / n);
        Ok(MinNorm {
            dist: n - self.ball_radius,
            point,
        })
    }

    pub fn translated(&self, v: &[f64]) -> ConvexBody {
        let mut out = self.clone();
        out.hull_points = out.hull_points.iter().map(|p| linalg::add(p, v)).collect();
        out
    }

    /// `dist(x, body)`; `+∞` for the empty body.
    pub fn dist(&self, x: &[f64]) -> f64 {
        if self.is_empty() {
            return f64::INFINITY;
        }
        self.translated(&linalg::neg(x))
            .min_norm_point()
            .map(|m| m.dist)
            .unwrap_or(f64::INFINITY)
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
        let m = self.translated(&linalg::neg(x)).min_norm_point()?;
        Ok(linalg::add(x, &m.point))
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.dist(x) <= tol
    }

    /// Extreme points of `conv(hull_points)` (a point is dropped when it lies
    /// in the hull of the others).
    pub fn pruned(&self) -> ConvexBody {
        let mut pts = self.hull_points.clone();
        let mut i = 0;
        while i < pts.len() && pts.len() > 1 {
            let others: Vec<Vec<f64>> = pts
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, p)| linalg::sub(p, &pts[i]))
                .collect();
            let (y, _) = wolfe_min_norm(&others);
            if linalg::norm(&y) <= 1e-11 * linalg::norm_inf(&pts[i]).max(1.0) {
                pts.remove(i);
            } else {
                i += 1;
            }
        }
        let mut out = self.clone();
        out.hull_points = pts;
        out
    }
}

fn join_labels(a: &str, b: &str, sep: &str) -> String {
    match (a.is_empty(), b.is_empty()) {
        (true, _) => b.to_string(),
        (_, true) => a.to_string(),
        _ => format!("{a}{sep}{b}"),
    }
}

fn ball_points(dim: usize, r: f64) -> Vec<Vec<f64>> {
    if dim == 2 {
        let steps = (360.0 / CAP_RESOLUTION_DEG).round() as usize;
        (0..steps)
            .map(|k| {
                let t = (k as f64) * CAP_RESOLUTION_DEG.to_radians();
                vec![r * t.cos(), r * t.sin()]
            })
            .collect()
    } else {
        let mut out = Vec::new();
        for i in 0..dim {
            out.push(linalg::scale(&linalg::unit(dim, i), r));
            out.push(linalg::scale(&linalg::unit(dim, i), -r));
        }
        out
    }
}

/// Minimize `‖Σ α_i p_i‖` over `Σ α_i = 1` (no sign constraint).
fn affine_min(points: &[&Vec<f64>]) -> Vec<f64> {
    let s = points.len();
    if s == 1 {
        return vec![1.0];
    }
    // min ‖p0 + D β‖ with D = [p_i − p0]; avoids squaring the conditioning
    let dim = points[0].len();
    let p0 = points[0];
    let rows: Vec<Vec<f64>> = (0..dim)
        .map(|r| (1..s).map(|i| points[i][r] - p0[r]).collect())
        .collect();
    let rhs: Vec<f64> = p0.iter().map(|v| -v).collect();
    let beta = linalg::lstsq(&rows, s - 1, &rhs);
    let mut alpha = Vec::with_capacity(s);
    alpha.push(1.0 - beta.iter().sum::<f64>());
    alpha.extend(beta);
    alpha
}

/// Wolfe's minimum-norm-point algorithm over `conv(points)`. Returns the
/// point and its convex weights. Falls back to a penalized NNLS formulation
/// when the active-set iteration fails to settle.
pub fn wolfe_min_norm(points: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let k = points.len();
    assert!(k > 0, "min-norm point of an empty hull");
    let dim = points[0].len();
    let scale = points.iter().map(|p| linalg::dot(p, p)).fold(0.0, f64::max).max(1e-300);

    let combine = |set: &[usize], w: &[f64]| -> Vec<f64> {
        let mut x = vec![0.0; dim];
        for (t, &i) in set.iter().enumerate() {
            linalg::axpy(w[t], &points[i], &mut x);
        }
        x
    };
    let full_weights = |set: &[usize], w: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; k];
        for (t, &i) in set.iter().enumerate() {
            out[i] += w[t];
        }
        out
    };

    let start = (0..k)
        .min_by(|&a, &b| {
            linalg::dot(&points[a], &points[a])
                .partial_cmp(&linalg::dot(&points[b], &points[b]))
                .unwrap()
        })
        .unwrap();
    let mut set = vec![start];
    let mut w = vec![1.0];
    let mut x = points[start].clone();

    for _major in 0..(10 * k + 100) {
        let xx = linalg::dot(&x, &x);
        if xx <= 1e-30 * scale {
            return (x, full_weights(&set, &w));
        }
        let (j, xp) = (0..k)
            .map(|j| (j, linalg::dot(&x, &points[j])))
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .unwrap();
        if xx - xp <= MNP_TOL * scale || set.contains(&j) {
            return (x, full_weights(&set, &w));
        }
        set.push(j);
        w.push(0.0);
        for _minor in 0..(set.len() + 2) {
            let refs: Vec<&Vec<f64>> = set.iter().map(|&i| &points[i]).collect();
            let alpha = affine_min(&refs);
            if alpha.iter().all(|a| *a > 1e-14) {
                w = alpha;
                break;
            }
            let mut theta = 1.0f64;
            for t in 0..set.len() {
                if alpha[t] <= 1e-14 && w[t] - alpha[t] > 0.0 {
                    theta = theta.min(w[t] / (w[t] - alpha[t]));
                }
            }
            for t in 0..set.len() {
                w[t] = theta * alpha[t] + (1.0 - theta) * w[t];
            }
            let mut t = 0;
            while t < set.len() {
                if w[t] <= 1e-14 && set.len() > 1 {
                    set.remove(t);
                    w.remove(t);
                } else {
                    t += 1;
                }
            }
            let total: f64 = w.iter().sum();
            for v in w.iter_mut() {
                *v /= total;
            }
        }
        x = combine(&set, &w);
    }
    let y = min_norm_with_rays(points, &[]);
    let w = vec![f64::NAN; k];
    (y, w)
}

/// Minimum-norm point of `conv(points) + cone(rays)` via a weighted NNLS,
/// polished by an exact solve on the detected support.
pub fn min_norm_with_rays(points: &[Vec<f64>], rays: &[Vec<f64>]) -> Vec<f64> {
    let dim = points[0].len();
    let scale = points
        .iter()
        .chain(rays)
        .map(|p| linalg::norm(p))
        .fold(1.0, f64::max);
    let big = 1e4 * scale;
    let mut cols: Vec<Vec<f64>> = points.iter().map(|p| {
        let mut c = p.clone();
        c.push(big);
        c
    }).collect();
    cols.extend(rays.iter().map(|r| {
        let mut c = r.clone();
        c.push(0.0);
        c
    }));
    let mut b = vec![0.0; dim];
    b.push(big);
    let w = nnls(&cols, &b);
    let (wp, wr) = w.split_at(points.len());
    let total: f64 = wp.iter().sum();
    let mut y = vec![0.0; dim];
    for (p, a) in points.iter().zip(wp) {
        linalg::axpy(a / total.max(1e-300), p, &mut y);
    }
    for (r, a) in rays.iter().zip(wr) {
        linalg::axpy(*a, r, &mut y);
    }

    // Polish: equality-constrained least norm on the support.
    let sp: Vec<usize> = (0..points.len()).filter(|&i| wp[i] > 1e-12).collect();
    let sr: Vec<usize> = (0..rays.len()).filter(|&i| wr[i] > 1e-12).collect();
    let s = sp.len() + sr.len();
    if !sp.is_empty() {
        let vecs: Vec<&Vec<f64>> = sp.iter().map(|&i| &points[i]).chain(sr.iter().map(|&i| &rays[i])).collect();
        let mut rows = vec![vec![0.0; s + 1]; s + 1];
        for i in 0..s {
            for j in 0..s {
                rows[i][j] = linalg::dot(vecs[i], vecs[j]);
            }
        }
        for i in 0..sp.len() {
            rows[i][s] = 1.0;
            rows[s][i] = 1.0;
        }
        let mut rhs = vec![0.0; s + 1];
        rhs[s] = 1.0;
        let sol = linalg::lstsq(&rows, s + 1, &rhs);
        if sol[..s].iter().all(|v| *v >= -1e-12) {
            let mut z = vec![0.0; dim];
            for (t, v) in vecs.iter().enumerate() {
                linalg::axpy(sol[t].max(0.0), v, &mut z);
            }
            if linalg::norm(&z) <= linalg::norm(&y) + 1e-12 {
                y = z;
            }
        }
    }
    y
}

/// Least-norm decomposition: `b_i ∈ bodies[i]` with `Σ b_i = target`,
/// minimizing `Σ ‖b_i‖²`, computed by Dykstra's alternating projections
/// between the product of the bodies and the affine sum constraint.
/// Returns the parts and the final constraint violation `‖Σ b_i − target‖`.
pub fn least_norm_decomposition(
    bodies: &[ConvexBody],
    target: &[f64],
    iterations: usize,
) -> Result<(Vec<Vec<f64>>, f64), GeometryError> {
    let k = bodies.len();
    let dim = target.len();
    if bodies.iter().any(|b| b.is_empty()) {
        return Err(GeometryError::EmptyBody);
    }
    let bodies: Vec<ConvexBody> = bodies.iter().map(|b| b.discretized()).collect();
    let proj_affine = |parts: &[Vec<f64>]| -> Vec<Vec<f64>> {
        let mut s = vec![0.0; dim];
        for p in parts {
            s = linalg::add(&s, p);
        }
        let corr = linalg::scale(&linalg::sub(&s, target), 1.0 / k as f64);
        parts.iter().map(|p| linalg::sub(p, &corr)).collect()
    };
    let mut x: Vec<Vec<f64>> = vec![vec![0.0; dim]; k];
    let mut p_inc: Vec<Vec<f64>> = vec![vec![0.0; dim]; k];
    let mut q_inc: Vec<Vec<f64>> = vec![vec![0.0; dim]; k];
    let mut parts = x.clone();
    for _ in 0..iterations {
        // Project onto the product of bodies.
        let mut y = Vec::with_capacity(k);
        for i in 0..k {
            let a = linalg::add(&x[i], &p_inc[i]);
            let pi = bodies[i].project(&a)?;
            p_inc[i] = linalg::sub(&a, &pi);
            y.push(pi);
        }
        // Project onto the affine constraint.
        let shifted: Vec<Vec<f64>> = (0..k).map(|i| linalg::add(&y[i], &q_inc[i])).collect();
        let z = proj_affine(&shifted);
        for i in 0..k {
            q_inc[i] = linalg::sub(&shifted[i], &z[i]);
        }
        let change: f64 = (0..k).map(|i| linalg::dist(&z[i], &x[i])).fold(0.0, f64::max);
        x = z;
        parts = y;
        if change < 1e-13 {
            break;
        }
    }
    let mut s = vec![0.0; dim];
    for p in &parts {
        s = linalg::add(&s, p);
    }
    let viol = linalg::dist(&s, target);
    Ok((parts, viol))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_norm_examples() {
        let b = ConvexBody::point(vec![3.0, 4.0]);
        assert!((b.min_norm_point().unwrap().dist - 5.0).abs() < 1e-12);
        let b = ConvexBody::polytope(vec![vec![1.0, 0.0], vec![-1.0, 0.0]]);
        assert!(b.min_norm_point().unwrap().dist.abs() < 1e-12);
        let b = ConvexBody::polytope(vec![vec![1.0, -1.0], vec![1.0, 1.0]]);
        let m = b.min_norm_point().unwrap();
        assert!((m.dist - 1.0).abs() < 1e-10);
        assert!(linalg::approx_eq(&m.point, &[1.0, 0.0], 1e-10));
    }

    #[test]
    fn min_norm_with_ball_and_rays() {
        let b = ConvexBody::point(vec![3.0, 4.0]).sum(&ConvexBody::ball(2, 1.0));
        assert!((b.min_norm_point().unwrap().dist - 4.0).abs() < 1e-12);
        let mut r = ConvexBody::point(vec![2.0, 1.0]);
        r.rays.push(vec![-1.0, 0.0]);
        let m = r.min_norm_point().unwrap();
        assert!(linalg::approx_eq(&m.point, &[0.0, 1.0], 1e-9), "{:?}", m.point);
    }

    #[test]
    fn support_examples() {
        let b = ConvexBody::axis_box(&[0.0, -1.0], &[1.0, 1.0]);
        assert_eq!(b.support(&[-1.0, 0.0]), 0.0);
        let ball = ConvexBody::ball(3, 1.0);
        assert!((ball.support(&[0.0, 0.6, 0.8]) - 1.0).abs() < 1e-15);
        let b = ConvexBody::polytope(vec![vec![1.0, 1.0], vec![1.0, -1.0]])
            .sum(&ConvexBody::ball(2, 0.5));
        assert!((b.support(&[1.0, 0.0]) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn cap_support_and_points() {
        let cap = ConvexBody::cap(ConeRepr::Orthant(2), 1.0);
        assert!((cap.support(&[1.0, 1.0]) - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(cap.support(&[-1.0, -1.0]), 0.0);
        let pts = cap.caps[0].points();
        // 0, the two axes and the 2° arc in between.
        assert_eq!(pts.len(), 1 + 46);
    }

    #[test]
    fn sum_and_scale() {
        let a = ConvexBody::point(vec![0.0, 2.0]);
        let sq = ConvexBody::axis_box(&[-1.0, -1.0], &[1.0, 1.0]);
        let s = a.sum(&sq);
        assert_eq!(s.support(&[0.0, 1.0]), 3.0);
        let z = sq.sum(&ConvexBody::zero(2));
        assert_eq!(z.hull_points.len(), 4);
        let hex = ConvexBody::polytope(vec![vec![-1.0, -1.0], vec![-1.0, 1.0], vec![0.0, 0.0]]).sum(&sq);
        assert_eq!(hex.support(&[1.0, 0.0]), 1.0);
    }

    #[test]
    fn pruning_keeps_vertices() {
        let b = ConvexBody::polytope(vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.25, 0.25],
            vec![0.5, 0.0],
        ])
        .pruned();
        assert_eq!(b.hull_points.len(), 3);
    }

    #[test]
    fn dykstra_decomposition() {
        let bodies = vec![
            ConvexBody::point(vec![0.0, 2.0]),
            ConvexBody::polytope(vec![vec![-0.5, 0.0], vec![0.0, 0.0]]),
            ConvexBody::polytope(vec![vec![1.0, -1.0], vec![-1.0, -1.0], vec![0.0, 0.0]]),
            ConvexBody::axis_box(&[0.0, -1.0], &[1.0, 1.0]),
        ];
        let (parts, viol) = least_norm_decomposition(&bodies, &[0.0, 0.0], 5000).unwrap();
        assert!(viol < 1e-9, "{viol}");
        let expect = [[0.0, 2.0], [0.0, 0.0], [0.0, -1.0], [0.0, -1.0]];
        for (p, e) in parts.iter().zip(expect) {
            assert!(linalg::approx_eq(p, &e, 1e-7), "{parts:?}");
        }
    }
}
