use serde::Serialize;

use super::body::ConvexBody;
use super::cone::{extreme_rays, intersect_generated, ConeRepr};
use super::RAY_TOL;
use crate::linalg;

/// Union of finitely generated convex cones. A branch with no generators is `{0}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RayUnion {
    pub dim: usize,
    pub branches: Vec<Vec<Vec<f64>>>,
    /// Set when the branches come from sampling rather than from exact pieces.
    pub approximate: bool,
}

/// Linearized piece `{h : ⟨m, h⟩ ≤ 0 for all rows m}` of a set near a point.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyPiece {
    pub rows: Vec<Vec<f64>>,
}

impl RayUnion {
    pub fn zero(dim: usize) -> Self {
        RayUnion {
            dim,
            branches: vec![Vec::new()],
            approximate: false,
        }
    }

    pub fn single(dim: usize, gens: Vec<Vec<f64>>) -> Self {
        RayUnion {
            dim,
            branches: vec![gens],
            approximate: false,
        }
    }

    /// Whole space as a single branch.
    pub fn full(dim: usize) -> Self {
        Self::single(dim, ConeRepr::full(dim).generating_rays())
    }

    pub fn is_zero(&self) -> bool {
        self.branches.iter().all(|b| b.iter().all(|g| linalg::norm(g) <= RAY_TOL))
    }

    pub fn branch_cone(&self, i: usize) -> ConeRepr {
        ConeRepr::Generators {
            dim: self.dim,
            gens: self.branches[i].clone(),
        }
    }

    pub fn contains(&self, v: &[f64], tol: f64) -> bool {
        (0..self.branches.len()).any(|i| self.branch_cone(i).contains(v, tol))
    }

    pub fn neg(&self) -> RayUnion {
        RayUnion {
            dim: self.dim,
            branches: self
                .branches
                .iter()
                .map(|b| b.iter().map(|g| linalg::neg(g)).collect())
                .collect(),
            approximate: self.approximate,
        }
    }

    /// `N₁ × N₂`: every pair of branches gives one product branch.
    pub fn product(&self, other: &RayUnion) -> RayUnion {
        let (a, b) = (self.dim, other.dim);
        let mut branches = Vec::new();
        for x in &self.branches {
            for y in &other.branches {
                let mut g: Vec<Vec<f64>> = x.iter().map(|v| linalg::concat(v, &vec![0.0; b])).collect();
                g.extend(y.iter().map(|v| linalg::concat(&vec![0.0; a], v)));
                branches.push(g);
            }
        }
        RayUnion {
            dim: a + b,
            branches,
            approximate: self.approximate || other.approximate,
        }
    }

    /// Nonzero common direction of some pair of branches, if any.
    pub fn common_ray(&self, other: &RayUnion) -> Option<Vec<f64>> {
        for x in &self.branches {
            for y in &other.branches {
                if let Some(r) = intersect_generated(x, y, self.dim).into_iter().next() {
                    return Some(r);
                }
            }
        }
        None
    }

    /// Each branch intersected with the ball of the given radius.
    pub fn capped_bodies(&self, radius: f64) -> Vec<ConvexBody> {
        (0..self.branches.len())
            .map(|i| ConvexBody::cap(self.branch_cone(i), radius))
            .collect()
    }

    /// Drop duplicate branches (same normalized generator set) and branches
    /// contained in another branch.
    pub fn simplified(mut self) -> RayUnion {
        let norm_branch = |b: &Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            let mut g: Vec<Vec<f64>> = b.iter().filter_map(|v| linalg::normalized(v)).collect();
            g = linalg::dedup_points(g, 1e-9);
            g.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
            g
        };
        self.branches = self.branches.iter().map(norm_branch).collect();
        let mut keep: Vec<Vec<Vec<f64>>> = Vec::new();
        let dim = self.dim;
        let inside = |small: &Vec<Vec<f64>>, big: &Vec<Vec<f64>>| {
            let c = ConeRepr::Generators {
                dim,
                gens: big.clone(),
            };
            small.iter().all(|g| c.contains(g, 1e-9))
        };
        for (i, b) in self.branches.iter().enumerate() {
            let dominated = self.branches.iter().enumerate().any(|(j, o)| {
                j != i && inside(b, o) && (!inside(o, b) || j < i)
            });
            if !dominated {
                keep.push(b.clone());
            }
        }
        if keep.is_empty() {
            keep.push(Vec::new());
        }
        self.branches = keep;
        self
    }
}

/// Limiting normal cone at the origin of `T = ∪ pieces`, i.e. the union over
/// `w ∈ T` of the regular normal cones `N̂(w; T)`. Representative points `w`
/// are taken in the relative interior of every face of every piece.
pub fn limiting_normal_graph(pieces: &[PolyPiece], dim: usize) -> RayUnion {
    if pieces.is_empty() {
        return RayUnion::zero(dim);
    }
    let piece_rays: Vec<Vec<Vec<f64>>> = pieces.iter().map(|p| extreme_rays(&p.rows, dim)).collect();
    let mut candidates: Vec<Vec<f64>> = vec![vec![0.0; dim]];
    for rays in &piece_rays {
        let kmax = rays.len().min(dim);
        for k in 1..=kmax {
            for subset in linalg::combinations(rays.len(), k) {
                let mut w = vec![0.0; dim];
                for &i in &subset {
                    w = linalg::add(&w, &rays[i]);
                }
                if let Some(u) = linalg::normalized(&w) {
                    candidates.push(u);
                }
            }
        }
    }
    let candidates = linalg::dedup_points(candidates, 1e-9);

    let mut branches = Vec::new();
    for w in &candidates {
        let mut normal: Option<Vec<Vec<f64>>> = None;
        for p in pieces {
            if !p.rows.iter().all(|m| linalg::dot(m, w) <= 1e-9 * linalg::norm(m).max(1.0)) {
                continue;
            }
            let active: Vec<Vec<f64>> = p
                .rows
                .iter()
                .filter(|m| linalg::dot(m, w).abs() <= 1e-9 * linalg::norm(m).max(1.0))
                .cloned()
                .collect();
            normal = Some(match normal {
                None => ConeRepr::Generators { dim, gens: active }.generating_rays(),
                Some(prev) => intersect_generated(&prev, &active, dim),
            });
        }
        if let Some(n) = normal {
            branches.push(n);
        }
    }
    RayUnion {
        dim,
        branches,
        approximate: false,
    }
    .simplified()
}

/// Projection-direction sampling of the limiting normal cone to a sampled
/// set at `center`: for query points on spheres of the given radii, the unit
/// vector from the nearest sample to the query is recorded, and directions
/// are clustered into single-ray branches. Always flagged approximate.
pub fn sampled_limiting_normals(
    samples: &[Vec<f64>],
    center: &[f64],
    radii: &[f64],
    queries_per_radius: usize,
    min_offset: f64,
) -> RayUnion {
    let dim = center.len();
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for &r in radii {
        for q in sphere_directions(dim, queries_per_radius) {
            let query = linalg::add(center, &linalg::scale(&q, r));
            let nearest = samples
                .iter()
                .min_by(|a, b| {
                    linalg::dist(a, &query)
                        .partial_cmp(&linalg::dist(b, &query))
                        .unwrap()
                });
            let Some(s) = nearest else { continue };
            let off = linalg::sub(&query, s);
            if linalg::norm(&off) <= min_offset || linalg::dist(s, center) > 2.0 * r {
                continue;
            }
            if let Some(u) = linalg::normalized(&off) {
                dirs.push(u);
            }
        }
    }
    let rays = cluster_directions(dirs, 2f64.to_radians());
    let mut branches: Vec<Vec<Vec<f64>>> = rays.into_iter().map(|r| vec![r]).collect();
    branches.push(Vec::new());
    RayUnion {
        dim,
        branches,
        approximate: true,
    }
}

/// Evenly spread unit vectors: a uniform circle in the plane, `±e_i` plus
/// normalized `±1` corner vectors in higher dimension.
pub fn sphere_directions(dim: usize, count: usize) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let t = 2.0 * std::f64::consts::PI * (k as f64) / (count as f64);
                vec![t.cos(), t.sin()]
            })
            .collect(),
        _ => {
            let mut out = Vec::new();
            for i in 0..dim {
                out.push(linalg::unit(dim, i));
                out.push(linalg::neg(&linalg::unit(dim, i)));
            }
            if dim <= 10 {
                for mask in 0..(1usize << dim) {
                    let v: Vec<f64> = (0..dim)
                        .map(|i| if mask & (1 << i) != 0 { 1.0 } else { -1.0 })
                        .collect();
                    out.push(linalg::normalized(&v).unwrap());
                }
            }
            out
        }
    }
}

fn cluster_directions(dirs: Vec<Vec<f64>>, angle: f64) -> Vec<Vec<f64>> {
    let cos_tol = angle.cos();
    let mut reps: Vec<(Vec<f64>, usize)> = Vec::new();
    for d in dirs {
        if let Some(slot) = reps.iter_mut().find(|(r, _)| linalg::dot(r, &d) >= cos_tol) {
            slot.1 += 1;
        } else {
            reps.push((d, 1));
        }
    }
    reps.into_iter().map(|(r, _)| r).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v_graph_pieces() -> Vec<PolyPiece> {
        // Linearization of {x ≤ |ξ| + 1} at (0, 1).
        vec![
            PolyPiece {
                rows: vec![vec![-1.0, 0.0], vec![-1.0, 1.0]],
            },
            PolyPiece {
                rows: vec![vec![1.0, 0.0], vec![1.0, 1.0]],
            },
        ]
    }

    #[test]
    fn normal_cone_at_kink_is_two_rays() {
        let n = limiting_normal_graph(&v_graph_pieces(), 2);
        let s = 0.5f64.sqrt();
        assert!(n.contains(&[-s, s], 1e-9));
        assert!(n.contains(&[s, s], 1e-9));
        assert!(!n.contains(&[0.0, 1.0], 1e-6));
        assert!(!n.contains(&[1.0, 0.0], 1e-6));
        assert!(!n.contains(&[0.0, -1.0], 1e-6));
    }

    #[test]
    fn smooth_piece_gives_single_ray() {
        let p = vec![PolyPiece {
            rows: vec![vec![-1.0, 1.0]],
        }];
        let n = limiting_normal_graph(&p, 2);
        assert!(n.contains(&[-1.0, 1.0], 1e-9));
        assert!(!n.contains(&[1.0, -1.0], 1e-6));
    }

    #[test]
    fn no_constraints_gives_zero() {
        let p = vec![PolyPiece { rows: vec![] }];
        assert!(limiting_normal_graph(&p, 3).is_zero());
    }

    #[test]
    fn product_and_common_ray() {
        let a = RayUnion::single(1, vec![vec![-1.0]]);
        let b = RayUnion::zero(1);
        let p = a.product(&b);
        assert!(p.contains(&[-2.0, 0.0], 1e-12));
        assert!(!p.contains(&[-2.0, 1.0], 1e-9));
        let h = RayUnion::single(2, vec![vec![1.0, 0.0]]);
        assert!(h.common_ray(&h.neg()).is_none());
        assert!(h.common_ray(&h).is_some());
    }
}
