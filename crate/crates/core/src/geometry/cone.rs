use serde::Serialize;

use super::nnls::nnls;
use super::{GeometryError, RAY_TOL};
use crate::linalg;

/// A closed convex polyhedral cone.
///
/// `Halfspaces` stores outward normals: the cone is `{y : ⟨a, y⟩ ≤ 0}` for
/// every listed `a`. An empty normal list is the whole space, an empty
/// generator list is `{0}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ConeRepr {
    Orthant(usize),
    Generators { dim: usize, gens: Vec<Vec<f64>> },
    Halfspaces { dim: usize, normals: Vec<Vec<f64>> },
}

impl ConeRepr {
    pub fn zero(dim: usize) -> Self {
        ConeRepr::Generators {
            dim,
            gens: Vec::new(),
        }
    }

    pub fn full(dim: usize) -> Self {
        ConeRepr::Halfspaces {
            dim,
            normals: Vec::new(),
        }
    }

    pub fn ray(dir: Vec<f64>) -> Self {
        ConeRepr::Generators {
            dim: dir.len(),
            gens: vec![dir],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConeRepr::Orthant(m) => *m,
            ConeRepr::Generators { dim, .. } | ConeRepr::Halfspaces { dim, .. } => *dim,
        }
    }

    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        match self {
            ConeRepr::Orthant(_) => x.iter().map(|v| v.max(0.0)).collect(),
            ConeRepr::Generators { dim, gens } => {
                let w = nnls(gens, x);
                combine(gens, &w, *dim)
            }
            ConeRepr::Halfspaces { dim, normals } => {
                // Moreau: x = P_K x + P_{K°} x, and K° = cone(normals).
                let w = nnls(normals, x);
                let polar = combine(normals, &w, *dim);
                linalg::sub(x, &polar)
            }
        }
    }

    pub fn dist(&self, x: &[f64]) -> f64 {
        linalg::dist(x, &self.project(x))
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.dist(x) <= tol * linalg::norm(x).max(1.0)
    }

    /// Negative dual (polar) cone `{x : ⟨c, x⟩ ≤ 0 for all c ∈ C}`.
    pub fn dual(&self) -> ConeRepr {
        match self {
            ConeRepr::Orthant(m) => ConeRepr::Generators {
                dim: *m,
                gens: (0..*m).map(|i| linalg::neg(&linalg::unit(*m, i))).collect(),
            },
            ConeRepr::Generators { dim, gens } => ConeRepr::Halfspaces {
                dim: *dim,
                normals: gens.clone(),
            },
            ConeRepr::Halfspaces { dim, normals } => ConeRepr::Generators {
                dim: *dim,
                gens: normals.clone(),
            },
        }
    }

    /// Unit generators of the cone. Lines are returned as pairs `±l`.
    pub fn generating_rays(&self) -> Vec<Vec<f64>> {
        match self {
            ConeRepr::Orthant(m) => (0..*m).map(|i| linalg::unit(*m, i)).collect(),
            ConeRepr::Generators { gens, .. } => unit_rays(gens.iter().cloned()),
            ConeRepr::Halfspaces { dim, normals } => extreme_rays(normals, *dim),
        }
    }

    /// Same cone written as outward normals.
    pub fn to_halfspaces(&self) -> Vec<Vec<f64>> {
        match self {
            ConeRepr::Halfspaces { normals, .. } => normals.clone(),
            ConeRepr::Orthant(m) => (0..*m).map(|i| linalg::neg(&linalg::unit(*m, i))).collect(),
            ConeRepr::Generators { dim, gens } => {
                let gens: Vec<Vec<f64>> = gens.iter().filter(|g| linalg::norm(g) > RAY_TOL).cloned().collect();
                if gens.is_empty() {
                    let mut n = Vec::new();
                    for i in 0..*dim {
                        n.push(linalg::unit(*dim, i));
                        n.push(linalg::neg(&linalg::unit(*dim, i)));
                    }
                    return n;
                }
                extreme_rays(&gens, *dim)
            }
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.generating_rays().is_empty()
    }

    /// No nonzero `y` with both `y` and `−y` in the cone.
    pub fn is_pointed(&self) -> bool {
        match self {
            ConeRepr::Orthant(_) => true,
            ConeRepr::Generators { gens, .. } => gens
                .iter()
                .filter(|g| linalg::norm(g) > RAY_TOL)
                .all(|g| !self.contains(&linalg::neg(g), 1e-9)),
            ConeRepr::Halfspaces { dim, normals } => {
                linalg::null_space(normals, *dim, 1e-10).is_empty()
            }
        }
    }

    /// Normal cone to the cone at a point on it: `C° ∩ x^⊥`.
    pub fn normal_cone_at(&self, x: &[f64], tol: f64) -> Result<Vec<Vec<f64>>, GeometryError> {
        let d = self.dist(x);
        if d > tol * linalg::norm(x).max(1.0) {
            return Err(GeometryError::NotOnSet { dist: d });
        }
        let scale = linalg::norm(x).max(1.0);
        Ok(self
            .dual()
            .generating_rays()
            .into_iter()
            .filter(|g| linalg::dot(g, x).abs() <= tol * scale)
            .collect())
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let dim = self.dim();
        let bad = match self {
            ConeRepr::Orthant(_) => false,
            ConeRepr::Generators { gens: v, .. } | ConeRepr::Halfspaces { normals: v, .. } => {
                v.iter().any(|g| g.len() != dim || g.iter().any(|c| !c.is_finite()))
            }
        };
        if bad || dim == 0 {
            return Err(GeometryError::DimensionMismatch);
        }
        Ok(())
    }
}

fn combine(gens: &[Vec<f64>], w: &[f64], dim: usize) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (g, wi) in gens.iter().zip(w) {
        if *wi != 0.0 {
            linalg::axpy(*wi, g, &mut out);
        }
    }
    out
}

fn unit_rays(it: impl Iterator<Item = Vec<f64>>) -> Vec<Vec<f64>> {
    let rays: Vec<Vec<f64>> = it.filter_map(|g| linalg::normalized(&g)).collect();
    linalg::dedup_points(rays, 1e-9)
}

/// Extreme rays of `{y : ⟨a, y⟩ ≤ 0 ∀a}` plus `±` a basis of its lineality space.
pub fn extreme_rays(normals: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let normals: Vec<Vec<f64>> = normals
        .iter()
        .filter_map(|a| linalg::normalized(a))
        .collect();
    let normals = linalg::dedup_points(normals, 1e-12);
    let lineality = linalg::null_space(&normals, dim, 1e-10);
    let mut out: Vec<Vec<f64>> = Vec::new();
    for l in &lineality {
        out.push(l.clone());
        out.push(linalg::neg(l));
    }
    let reduced = dim - lineality.len();
    if reduced == 0 {
        return out;
    }
    let feasible = |r: &[f64]| normals.iter().all(|a| linalg::dot(a, r) <= 1e-9);
    for subset in linalg::combinations(normals.len(), reduced - 1) {
        let mut eqs: Vec<Vec<f64>> = subset.iter().map(|&i| normals[i].clone()).collect();
        eqs.extend(lineality.iter().cloned());
        let ns = linalg::null_space(&eqs, dim, 1e-10);
        if ns.len() != 1 {
            continue;
        }
        for cand in [ns[0].clone(), linalg::neg(&ns[0])] {
            if feasible(&cand) {
                if let Some(u) = linalg::normalized(&cand) {
                    out.push(u);
                }
            }
        }
    }
    linalg::dedup_points(out, 1e-9)
}

/// Rays of `cone(a) ∩ cone(b)` for two finitely generated cones.
pub fn intersect_generated(a: &[Vec<f64>], b: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let mut normals = ConeRepr::Generators {
        dim,
        gens: a.to_vec(),
    }
    .to_halfspaces();
    normals.extend(
        ConeRepr::Generators {
            dim,
            gens: b.to_vec(),
        }
        .to_halfspaces(),
    );
    extreme_rays(&normals, dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthant_projection() {
        let c = ConeRepr::Orthant(2);
        assert_eq!(c.project(&[2.0, -1.0]), vec![2.0, 0.0]);
        assert_eq!(c.project(&[-0.3, 0.4]), vec![0.0, 0.4]);
        assert!((c.dist(&[-2.0, 1.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn dual_of_ray_is_halfplane() {
        let d = ConeRepr::ray(vec![1.0, 1.0]).dual();
        assert!(d.contains(&[1.0, -1.0], 1e-12));
        assert!(d.contains(&[-3.0, 1.0], 1e-12));
        assert!(!d.contains(&[0.1, 0.0], 1e-9));
        // The halfplane has a line of lineality and one extreme ray.
        assert_eq!(d.generating_rays().len(), 3);
    }

    #[test]
    fn dual_of_zero_is_everything() {
        let d = ConeRepr::zero(3).dual();
        assert!(d.contains(&[5.0, -2.0, 1.0], 1e-12));
        assert!(ConeRepr::zero(3).is_trivial());
    }

    #[test]
    fn pointedness() {
        assert!(ConeRepr::Orthant(3).is_pointed());
        let line = ConeRepr::Generators {
            dim: 2,
            gens: vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
        };
        assert!(!line.is_pointed());
        let half = ConeRepr::Halfspaces {
            dim: 2,
            normals: vec![vec![0.0, -1.0]],
        };
        assert!(!half.is_pointed());
    }

    #[test]
    fn extreme_rays_of_quadrant() {
        let mut r = extreme_rays(&[vec![-1.0, 0.0], vec![0.0, -1.0]], 2);
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(r, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn intersection_of_opposite_wedges_is_zero() {
        let a = vec![vec![-1.0, 0.0], vec![-1.0, 1.0]];
        let b = vec![vec![1.0, 0.0], vec![1.0, 1.0]];
        assert!(intersect_generated(&a, &b, 2).is_empty());
        let c = vec![vec![-1.0, 1.0], vec![1.0, 1.0]];
        assert_eq!(intersect_generated(&a, &c, 2).len(), 1);
    }
}
