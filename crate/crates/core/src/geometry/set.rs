use serde::Serialize;

use super::body::wolfe_min_norm;
use super::cone::{extreme_rays, ConeRepr};
use super::{GeometryError, RayUnion, ON_SET_TOL};
use crate::linalg;

/// Closed convex set: a box (bounds may be infinite), the convex hull of
/// finitely many vertices, or `{y : A y ≤ b}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ConvexSetRepr {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Polytope { vertices: Vec<Vec<f64>> },
    Halfspaces { a: Vec<Vec<f64>>, b: Vec<f64> },
}

impl ConvexSetRepr {
    pub fn whole_space(dim: usize) -> Self {
        ConvexSetRepr::Box {
            lower: vec![f64::NEG_INFINITY; dim],
            upper: vec![f64::INFINITY; dim],
        }
    }

    pub fn interval(lo: f64, hi: f64) -> Self {
        ConvexSetRepr::Box {
            lower: vec![lo],
            upper: vec![hi],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSetRepr::Box { lower, .. } => lower.len(),
            ConvexSetRepr::Polytope { vertices } => vertices.first().map_or(0, |v| v.len()),
            ConvexSetRepr::Halfspaces { a, .. } => a.first().map_or(0, |r| r.len()),
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        match self {
            ConvexSetRepr::Box { lower, upper } => {
                if lower.len() != upper.len() {
                    return Err(GeometryError::DimensionMismatch);
                }
                if lower.iter().zip(upper).any(|(l, u)| l.is_nan() || u.is_nan() || l > u) {
                    return Err(GeometryError::EmptySet);
                }
            }
            ConvexSetRepr::Polytope { vertices } => {
                if vertices.is_empty() {
                    return Err(GeometryError::EmptySet);
                }
                let d = vertices[0].len();
                if vertices.iter().any(|v| v.len() != d || v.iter().any(|c| !c.is_finite())) {
                    return Err(GeometryError::DimensionMismatch);
                }
            }
            ConvexSetRepr::Halfspaces { a, b } => {
                if a.len() != b.len() {
                    return Err(GeometryError::DimensionMismatch);
                }
                let probe = vec![0.0; self.dim()];
                self.project(&probe)?;
            }
        }
        Ok(())
    }

    pub fn is_bounded(&self) -> bool {
        match self {
            ConvexSetRepr::Box { lower, upper } => lower
                .iter()
                .chain(upper)
                .all(|v| v.is_finite()),
            ConvexSetRepr::Polytope { .. } => true,
            ConvexSetRepr::Halfspaces { a, .. } => {
                let dim = self.dim();
                extreme_rays(a, dim).is_empty()
            }
        }
    }

    /// Vertices of a bounded box or polytope. `None` for unbounded boxes and
    /// for halfspace form.
    pub fn vertices(&self) -> Option<Vec<Vec<f64>>> {
        match self {
            ConvexSetRepr::Box { lower, upper } => {
                if !self.is_bounded() {
                    return None;
                }
                let n = lower.len();
                let mut out = Vec::with_capacity(1 << n);
                for mask in 0..(1usize << n) {
                    let mut v = lower.clone();
                    for i in 0..n {
                        if mask & (1 << i) != 0 {
                            v[i] = upper[i];
                        }
                    }
                    out.push(v);
                }
                Some(linalg::dedup_points(out, 0.0))
            }
            ConvexSetRepr::Polytope { vertices } => Some(vertices.clone()),
            ConvexSetRepr::Halfspaces { .. } => None,
        }
    }

    /// Axis-aligned bounding box, if bounded.
    pub fn bounding_box(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        match self {
            ConvexSetRepr::Box { lower, upper } => {
                self.is_bounded().then(|| (lower.clone(), upper.clone()))
            }
            _ => {
                let verts = match self {
                    ConvexSetRepr::Polytope { vertices } => vertices.clone(),
                    ConvexSetRepr::Halfspaces { a, b } => halfspace_vertices(a, b)?,
                    ConvexSetRepr::Box { .. } => unreachable!(),
                };
                let d = self.dim();
                let mut lo = vec![f64::INFINITY; d];
                let mut hi = vec![f64::NEG_INFINITY; d];
                for v in &verts {
                    for i in 0..d {
                        lo[i] = lo[i].min(v[i]);
                        hi[i] = hi[i].max(v[i]);
                    }
                }
                Some((lo, hi))
            }
        }
    }

    /// Set enlarged by `eps` in each bound (box) or right-hand side
    /// (halfspaces, scaled by row norm), polytope vertices pushed outward
    /// through a box inflation of their hull. Exact for 1-D boxes.
    pub fn enlarged(&self, eps: f64) -> ConvexSetRepr {
        if eps == 0.0 {
            return self.clone();
        }
        match self {
            ConvexSetRepr::Box { lower, upper } => ConvexSetRepr::Box {
                lower: lower.iter().map(|l| l - eps).collect(),
                upper: upper.iter().map(|u| u + eps).collect(),
            },
            ConvexSetRepr::Halfspaces { a, b } => ConvexSetRepr::Halfspaces {
                a: a.clone(),
                b: a.iter().zip(b).map(|(r, bi)| bi + eps * linalg::norm(r)).collect(),
            },
            ConvexSetRepr::Polytope { vertices } => {
                let d = self.dim();
                let mut out = Vec::new();
                for v in vertices {
                    for mask in 0..(1usize << d) {
                        let mut w = v.clone();
                        for i in 0..d {
                            w[i] += if mask & (1 << i) != 0 { eps } else { -eps };
                        }
                        out.push(w);
                    }
                }
                ConvexSetRepr::Polytope { vertices: out }
            }
        }
    }

    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>, GeometryError> {
        match self {
            ConvexSetRepr::Box { lower, upper } => Ok(x
                .iter()
                .zip(lower.iter().zip(upper))
                .map(|(v, (l, u))| v.max(*l).min(*u))
                .collect()),
            ConvexSetRepr::Polytope { vertices } => {
                if vertices.is_empty() {
                    return Err(GeometryError::EmptySet);
                }
                let shifted: Vec<Vec<f64>> = vertices.iter().map(|v| linalg::sub(v, x)).collect();
                let (y, _) = wolfe_min_norm(&shifted);
                Ok(linalg::add(x, &y))
            }
            ConvexSetRepr::Halfspaces { a, b } => hildreth(a, b, x),
        }
    }

    /// `+∞` never occurs here since every representable set is nonempty.
    pub fn dist(&self, x: &[f64]) -> Result<f64, GeometryError> {
        Ok(linalg::dist(x, &self.project(x)?))
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        match self {
            ConvexSetRepr::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            _ => self.dist(x).map(|d| d <= tol).unwrap_or(false),
        }
    }

    /// Normal cone of convex analysis at a point of the set (single branch).
    pub fn normal_cone(&self, x: &[f64]) -> Result<RayUnion, GeometryError> {
        let dim = x.len();
        let d = self.dist(x)?;
        let scale = linalg::norm_inf(x).max(1.0);
        let tol = ON_SET_TOL * scale;
        if d > tol {
            return Err(GeometryError::NotOnSet { dist: d });
        }
        let gens = match self {
            ConvexSetRepr::Box { lower, upper } => {
                let mut g = Vec::new();
                for i in 0..dim {
                    if lower[i].is_finite() && (x[i] - lower[i]).abs() <= tol {
                        g.push(linalg::neg(&linalg::unit(dim, i)));
                    }
                    if upper[i].is_finite() && (x[i] - upper[i]).abs() <= tol {
                        g.push(linalg::unit(dim, i));
                    }
                }
                g
            }
            ConvexSetRepr::Halfspaces { a, b } => a
                .iter()
                .zip(b)
                .filter(|(r, bi)| (linalg::dot(r, x) - *bi).abs() <= tol * linalg::norm(r).max(1.0))
                .filter_map(|(r, _)| linalg::normalized(r))
                .collect(),
            ConvexSetRepr::Polytope { vertices } => {
                let normals: Vec<Vec<f64>> = vertices.iter().map(|v| linalg::sub(v, x)).collect();
                ConeRepr::Halfspaces { dim, normals }.generating_rays()
            }
        };
        Ok(RayUnion::single(dim, linalg::dedup_points(gens, 1e-12)))
    }
}

/// Dual coordinate ascent for `min ‖y − x‖` over `A y ≤ b`, polished by an
/// exact solve on the detected active set.
fn hildreth(a: &[Vec<f64>], b: &[f64], x: &[f64]) -> Result<Vec<f64>, GeometryError> {
    let m = a.len();
    let norms2: Vec<f64> = a.iter().map(|r| linalg::dot(r, r)).collect();
    let scale = linalg::norm_inf(x).max(linalg::norm_inf(b)).max(1.0);
    let mut lam = vec![0.0; m];
    let mut y = x.to_vec();
    for _sweep in 0..20_000 {
        let mut change = 0.0f64;
        for i in 0..m {
            if norms2[i] == 0.0 {
                if b[i] < 0.0 {
                    return Err(GeometryError::Infeasible);
                }
                continue;
            }
            let delta = (linalg::dot(&a[i], &y) - b[i]) / norms2[i];
            let new = (lam[i] + delta).max(0.0);
            let step = new - lam[i];
            if step != 0.0 {
                linalg::axpy(-step, &a[i], &mut y);
                change = change.max(step.abs() * norms2[i].sqrt());
                lam[i] = new;
            }
        }
        if change <= 1e-15 * scale {
            break;
        }
        if lam.iter().any(|l| !l.is_finite() || *l > 1e12 * scale) {
            return Err(GeometryError::Infeasible);
        }
    }
    // Exact solve on the active set.
    let active: Vec<usize> = (0..m).filter(|&i| lam[i] > 0.0).collect();
    if !active.is_empty() {
        let rows: Vec<Vec<f64>> = active
            .iter()
            .map(|&i| active.iter().map(|&j| linalg::dot(&a[i], &a[j])).collect())
            .collect();
        let rhs: Vec<f64> = active.iter().map(|&i| linalg::dot(&a[i], x) - b[i]).collect();
        let mu = linalg::lstsq(&rows, active.len(), &rhs);
        if mu.iter().all(|v| *v >= -1e-12) {
            let mut z = x.to_vec();
            for (t, &i) in active.iter().enumerate() {
                linalg::axpy(-mu[t], &a[i], &mut z);
            }
            if a.iter().zip(b).all(|(r, bi)| linalg::dot(r, &z) <= bi + 1e-10 * scale) {
                y = z;
            }
        }
    }
    let viol = a
        .iter()
        .zip(b)
        .map(|(r, bi)| linalg::dot(r, &y) - bi)
        .fold(0.0f64, f64::max);
    if viol > 1e-7 * scale {
        return Err(GeometryError::Infeasible);
    }
    Ok(y)
}

/// Vertices of a bounded `{A y ≤ b}` by basic-solution enumeration.
pub fn halfspace_vertices(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<Vec<f64>>> {
    let dim = a.first()?.len();
    if !extreme_rays(a, dim).is_empty() {
        return None;
    }
    let mut out = Vec::new();
    for subset in linalg::combinations(a.len(), dim) {
        let rows: Vec<Vec<f64>> = subset.iter().map(|&i| a[i].clone()).collect();
        let rhs: Vec<f64> = subset.iter().map(|&i| b[i]).collect();
        if let Some(v) = linalg::solve(&rows, &rhs) {
            let scale = linalg::norm_inf(&v).max(1.0);
            if a.iter().zip(b).all(|(r, bi)| linalg::dot(r, &v) <= bi + 1e-9 * scale) {
                out.push(v);
            }
        }
    }
    let out = linalg::dedup_points(out, 1e-9);
    (!out.is_empty()).then_some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_projection_and_normals() {
        let s = ConvexSetRepr::interval(-2.0, 2.0);
        assert_eq!(s.project(&[0.5]).unwrap(), vec![0.5]);
        assert!(s.normal_cone(&[0.5]).unwrap().is_zero());
        let half = ConvexSetRepr::interval(0.0, f64::INFINITY);
        let n = half.normal_cone(&[0.0]).unwrap();
        assert_eq!(n.branches, vec![vec![vec![-1.0]]]);
        assert!(matches!(half.normal_cone(&[-1.0]), Err(GeometryError::NotOnSet { .. })));
    }

    #[test]
    fn polytope_projection() {
        let tri = ConvexSetRepr::Polytope {
            vertices: vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        let p = tri.project(&[1.0, 1.0]).unwrap();
        assert!(linalg::approx_eq(&p, &[0.5, 0.5], 1e-10));
        let n = tri.normal_cone(&[0.0, 0.0]).unwrap();
        assert_eq!(n.branches[0].len(), 2);
    }

    #[test]
    fn halfspace_projection_matches_box() {
        let hs = ConvexSetRepr::Halfspaces {
            a: vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]],
            b: vec![1.0, 1.0, 2.0, 0.0],
        };
        let p = hs.project(&[3.0, -4.0]).unwrap();
        assert!(linalg::approx_eq(&p, &[1.0, 0.0], 1e-10));
        let verts = halfspace_vertices(
            &[vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0], vec![0.0, -1.0]],
            &[1.0, 1.0, 2.0, 0.0],
        )
        .unwrap();
        assert_eq!(verts.len(), 4);
    }

    #[test]
    fn infeasible_halfspaces() {
        let hs = ConvexSetRepr::Halfspaces {
            a: vec![vec![1.0], vec![-1.0]],
            b: vec![-1.0, -1.0],
        };
        assert!(matches!(hs.project(&[0.0]), Err(GeometryError::Infeasible)));
    }
}
