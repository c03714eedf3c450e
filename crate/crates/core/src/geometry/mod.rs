//! Convex geometry kernel: cones, convex sets, structured convex bodies and
//! (limiting) normal cones.

mod body;
mod cone;
mod nnls;
mod normals;
mod set;

pub use body::{
    least_norm_decomposition, min_norm_with_rays, wolfe_min_norm, CapPart, ConvexBody, MinNorm,
    CAP_RESOLUTION_DEG, MNP_TOL,
};
pub use cone::{extreme_rays, intersect_generated, ConeRepr};
pub use nnls::nnls;
pub use normals::{limiting_normal_graph, sampled_limiting_normals, sphere_directions, PolyPiece, RayUnion};
pub use set::{halfspace_vertices, ConvexSetRepr};

use thiserror::Error;

use crate::linalg;

/// Points within this (scaled) distance count as lying on a set.
pub const ON_SET_TOL: f64 = 1e-9;
pub const RAY_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point is not on the set (distance {dist:e})")]
    NotOnSet { dist: f64 },
    #[error("halfspace representation is infeasible")]
    Infeasible,
    #[error("set is empty")]
    EmptySet,
    #[error("convex body is empty")]
    EmptyBody,
    #[error("dimension mismatch")]
    DimensionMismatch,
}

/// Distance to a finite point set; `+∞` for the empty set.
pub fn dist_to_points(x: &[f64], points: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .map(|p| linalg::dist(x, p))
        .fold(f64::INFINITY, f64::min)
}

/// `exc(A, S) = sup_{a ∈ A} dist(a, S)`; zero for empty `A`.
pub fn excess(a: &[Vec<f64>], dist_to_s: impl Fn(&[f64]) -> f64) -> f64 {
    a.iter().map(|p| dist_to_s(p)).fold(0.0, f64::max)
}

/// `N♭(x, K)`: `N(x; K) ∩ B` when `x ∈ K`, else `{(x − Proj x)/dist}`.
pub fn truncated_normal(x: &[f64], k: &ConvexSetRepr) -> Result<ConvexBody, GeometryError> {
    let p = k.project(x)?;
    let d = linalg::dist(x, &p);
    if d <= ON_SET_TOL * linalg::norm_inf(x).max(1.0) {
        let n = k.normal_cone(&p)?;
        let gens = n.branches.into_iter().next().unwrap_or_default();
        if gens.is_empty() {
            return Ok(ConvexBody::zero(x.len()).with_label("N♭ = {0}"));
        }
        return Ok(ConvexBody::cap(ConeRepr::Generators { dim: x.len(), gens }, 1.0)
            .with_label("N♭ = N ∩ B"));
    }
    Ok(ConvexBody::point(linalg::scale(&linalg::sub(x, &p), 1.0 / d)).with_label("N♭ = unit projection direction"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn excess_and_empty_distance() {
        let c = ConeRepr::Orthant(2);
        let e = excess(&[vec![-1.0, 0.0], vec![0.0, -3.0]], |p| c.dist(p));
        assert_eq!(e, 3.0);
        assert_eq!(excess(&[], |p| c.dist(p)), 0.0);
        assert_eq!(dist_to_points(&[1.0], &[]), f64::INFINITY);
    }

    #[test]
    fn truncated_normal_table() {
        let k = ConvexSetRepr::interval(-1.5, 1.5);
        let at_lower = truncated_normal(&[-1.5], &k).unwrap();
        assert_eq!(at_lower.support(&[-1.0]), 1.0);
        assert_eq!(at_lower.support(&[1.0]), 0.0);
        let inside = truncated_normal(&[0.3], &k).unwrap();
        assert_eq!(inside.support(&[1.0]), 0.0);
        assert_eq!(inside.support(&[-1.0]), 0.0);
        let below = truncated_normal(&[-4.0], &k).unwrap();
        assert_eq!(below.hull_points, vec![vec![-1.0]]);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

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
            (pt2(), prop::collection::vec((pt2(), 0.1f64..2.0), 1..5)).prop_map(|(c, rows)| {
                let (a, b): (Vec<_>, Vec<_>) = rows
                    .into_iter()
                    .filter(|(r, _)| linalg::norm(r) > 0.1)
                    .map(|(r, s)| {
                        let bi = linalg::dot(&r, &c) + s;
                        (r, bi)
                    })
                    .unzip();
                if a.is_empty() {
                    ConvexSetRepr::whole_space(2)
                } else {
                    ConvexSetRepr::Halfspaces { a, b }
                }
            }),
        ]
    }

    fn same_cone(a: &RayUnion, b: &RayUnion) -> bool {
        let inside = |x: &RayUnion, y: &RayUnion| x.branches.iter().flatten().all(|g| y.contains(g, 1e-7));
        inside(a, b) && inside(b, a)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(256))]

        #[test]
        fn projection_is_firmly_nonexpansive(k in set2(), x in pt2(), y in pt2()) {
            let (px, py) = (k.project(&x).unwrap(), k.project(&y).unwrap());
            let d = linalg::sub(&px, &py);
            prop_assert!(linalg::dot(&d, &d) <= linalg::dot(&d, &linalg::sub(&x, &y)) + 1e-8);
        }

        #[test]
        fn cone_projection_is_firmly_nonexpansive(gens in prop::collection::vec(pt2(), 0..4), x in pt2(), y in pt2()) {
            let c = ConeRepr::Generators { dim: 2, gens };
            let (px, py) = (c.project(&x), c.project(&y));
            let d = linalg::sub(&px, &py);
            prop_assert!(linalg::dot(&d, &d) <= linalg::dot(&d, &linalg::sub(&x, &y)) + 1e-8);
        }

        #[test]
        fn normal_cone_of_product(
            verts in prop::collection::vec(pt2(), 1..6),
            pick in 0usize..6,
            t in 0.0f64..1.0,
            lo in -2.0f64..0.0,
            hi in 0.0f64..2.0,
            side in 0usize..3,
        ) {
            // a point on an edge (or vertex) of the polytope
            let a = &verts[pick % verts.len()];
            let b = &verts[(pick + 1) % verts.len()];
            let mut xa = linalg::add(&linalg::scale(a, 1.0 - t), &linalg::scale(b, t));
            let pa = ConvexSetRepr::Polytope { vertices: verts.clone() };
            xa = pa.project(&xa).unwrap();
            let xb = [lo, hi, 0.5 * (lo + hi)][side];
            let pb = ConvexSetRepr::interval(lo, hi);
            let joint = ConvexSetRepr::Polytope {
                vertices: verts.iter().flat_map(|v| [lo, hi].map(|s| linalg::concat(v, &[s]))).collect(),
            };
            let direct = joint.normal_cone(&linalg::concat(&xa, &[xb])).unwrap();
            let product = pa.normal_cone(&xa).unwrap().product(&pb.normal_cone(&[xb]).unwrap());
            prop_assert!(same_cone(&direct, &product), "{:?} vs {:?}", direct, product);
        }

        #[test]
        fn min_norm_matches_dense_support_sampling(
            verts in prop::collection::vec(pt2(), 1..5),
            r in 0.0f64..0.5,
            gens in prop::collection::vec(pt2(), 1..3),
            cap_r in 0.0f64..1.5,
        ) {
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
            prop_assert!((mn - dense).abs() <= 0.02, "min-norm {} dense {}", mn, dense);
        }
    }
}
