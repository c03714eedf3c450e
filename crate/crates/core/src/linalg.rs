//! Small dense vector helpers. Dimensions in this crate are tiny (a handful
//! of coordinates), so plain `Vec<f64>` is used throughout and nalgebra only
//! backs the few factorizations we need.

use nalgebra::{DMatrix, DVector};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn neg(a: &[f64]) -> Vec<f64> {
    a.iter().map(|x| -x).collect()
}

/// Unit vector along `a`, or `None` for (numerically) zero input.
pub fn normalized(a: &[f64]) -> Option<Vec<f64>> {
    let n = norm(a);
    if n <= 1e-300 || !n.is_finite() {
        None
    } else {
        Some(scale(a, 1.0 / n))
    }
}

pub fn unit(dim: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[i] = 1.0;
    e
}

pub fn concat(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(a.len() + b.len());
    v.extend_from_slice(a);
    v.extend_from_slice(b);
    v
}

pub fn approx_eq(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// Remove near-duplicates (sup-norm distance within `tol`), keeping first occurrences.
pub fn dedup_points(points: Vec<Vec<f64>>, tol: f64) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    for p in points {
        if !out.iter().any(|q| approx_eq(q, &p, tol)) {
            out.push(p);
        }
    }
    out
}

fn to_matrix(rows: &[Vec<f64>], cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j])
}

/// Orthonormal basis of the null space of the matrix whose rows are `rows`.
pub fn null_space(rows: &[Vec<f64>], dim: usize, tol: f64) -> Vec<Vec<f64>> {
    if rows.is_empty() {
        return (0..dim).map(|i| unit(dim, i)).collect();
    }
    // Pad to a square-or-taller matrix so the SVD exposes every right singular vector.
    let r = rows.len().max(dim);
    let mut m = DMatrix::zeros(r, dim);
    for (i, row) in rows.iter().enumerate() {
        for j in 0..dim {
            m[(i, j)] = row[j];
        }
    }
    let svd = m.svd(false, true);
    let v_t = match svd.v_t {
        Some(v) => v,
        None => return Vec::new(),
    };
    let smax = svd.singular_values.iter().fold(0.0f64, |a, b| a.max(*b));
    let cutoff = tol * smax.max(1.0);
    let mut basis = Vec::new();
    for (k, s) in svd.singular_values.iter().enumerate() {
        if *s <= cutoff {
            basis.push(v_t.row(k).iter().copied().collect());
        }
    }
    basis
}

pub fn rank(rows: &[Vec<f64>], dim: usize, tol: f64) -> usize {
    dim - null_space(rows, dim, tol).len()
}

/// Solve the square system `A x = b`; `None` when singular.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let m = to_matrix(a, n);
    let rhs = DVector::from_column_slice(b);
    let lu = m.lu();
    let x = lu.solve(&rhs)?;
    if x.iter().all(|v| v.is_finite()) {
        Some(x.iter().copied().collect())
    } else {
        None
    }
}

/// Minimum-norm least-squares solution of `A x ≈ b` for an `r × c` matrix.
pub fn lstsq(a: &[Vec<f64>], cols: usize, b: &[f64]) -> Vec<f64> {
    if a.is_empty() {
        return vec![0.0; cols];
    }
    let m = to_matrix(a, cols);
    let rhs = DVector::from_column_slice(b);
    let svd = m.svd(true, true);
    match svd.solve(&rhs, 1e-13) {
        Ok(x) => x.iter().copied().collect(),
        Err(_) => vec![0.0; cols],
    }
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return out;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_single_row() {
        let ns = null_space(&[vec![1.0, 1.0]], 2, 1e-10);
        assert_eq!(ns.len(), 1);
        assert!(dot(&ns[0], &[1.0, 1.0]).abs() < 1e-12);
    }

    #[test]
    fn combinations_count() {
        assert_eq!(combinations(5, 2).len(), 10);
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
        assert_eq!(combinations(3, 3), vec![vec![0, 1, 2]]);
        assert!(combinations(2, 3).is_empty());
    }

    #[test]
    fn solve_and_lstsq() {
        let a = vec![vec![2.0, 0.0], vec![0.0, 4.0]];
        assert_eq!(solve(&a, &[2.0, 2.0]).unwrap(), vec![1.0, 0.5]);
        let x = lstsq(&[vec![1.0, 1.0]], 2, &[2.0]);
        assert!(approx_eq(&x, &[1.0, 1.0], 1e-12));
    }
}
