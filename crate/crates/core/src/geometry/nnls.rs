//! Lawson–Hanson non-negative least squares.

use crate::linalg;

/// Solve `min ‖A w − b‖` over `w ≥ 0`, with `A` given by its columns.
pub fn nnls(cols: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
    let k = cols.len();
    let m = b.len();
    let mut x = vec![0.0; k];
    if k == 0 {
        return x;
    }
    let scale = cols
        .iter()
        .map(|c| linalg::norm(c))
        .fold(linalg::norm(b), f64::max)
        .max(1.0);
    let tol = 1e-13 * scale * scale * (k.max(m) as f64);
    let mut passive = vec![false; k];

    let residual = |x: &[f64]| -> Vec<f64> {
        let mut r = b.to_vec();
        for (j, c) in cols.iter().enumerate() {
            if x[j] != 0.0 {
                linalg::axpy(-x[j], c, &mut r);
            }
        }
        r
    };

    for _ in 0..(3 * k + 30) {
        let r = residual(&x);
        let mut best = None;
        let mut best_w = tol;
        for j in 0..k {
            if !passive[j] {
                let w = linalg::dot(&cols[j], &r);
                if w > best_w {
                    best_w = w;
                    best = Some(j);
                }
            }
        }
        let Some(j) = best else { break };
        passive[j] = true;

        let mut guard = 0;
        loop {
            guard += 1;
            let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
            let rows: Vec<Vec<f64>> = (0..m)
                .map(|r| idx.iter().map(|&i| cols[i][r]).collect())
                .collect();
            let z = linalg::lstsq(&rows, idx.len(), b);
            if z.iter().all(|&v| v > 0.0) || guard > k + 2 {
                for i in 0..k {
                    x[i] = 0.0;
                }
                for (t, &i) in idx.iter().enumerate() {
                    x[i] = z[t].max(0.0);
                }
                break;
            }
            let mut alpha = 1.0f64;
            for (t, &i) in idx.iter().enumerate() {
                if z[t] <= 0.0 {
                    let denom = x[i] - z[t];
                    if denom > 0.0 {
                        alpha = alpha.min(x[i] / denom);
                    }
                }
            }
            for (t, &i) in idx.iter().enumerate() {
                x[i] += alpha * (z[t] - x[i]);
            }
            let mut dropped = false;
            for &i in &idx {
                if x[i] <= 1e-15 * scale {
                    x[i] = 0.0;
                    passive[i] = false;
                    dropped = true;
                }
            }
            if !dropped {
                // Numerically stuck; drop the smallest passive entry.
                if let Some(&i) = idx
                    .iter()
                    .min_by(|a, b| x[**a].partial_cmp(&x[**b]).unwrap())
                {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projects_onto_quadrant_generators() {
        let cols = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let w = nnls(&cols, &[2.0, -1.0]);
        assert!(linalg::approx_eq(&w, &[2.0, 0.0], 1e-12));
    }

    #[test]
    fn redundant_columns() {
        let cols = vec![vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0], vec![2.0, 2.0]];
        let w = nnls(&cols, &[3.0, 3.0]);
        let mut fit = vec![0.0; 2];
        for (c, wi) in cols.iter().zip(&w) {
            linalg::axpy(*wi, c, &mut fit);
        }
        assert!(linalg::approx_eq(&fit, &[3.0, 3.0], 1e-10));
        assert!(w.iter().all(|v| *v >= 0.0));
    }
}
