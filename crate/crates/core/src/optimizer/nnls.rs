//! Lawson–Hanson non-negative least squares.

use nalgebra::{DMatrix, DVector};

/// Solves `min ‖A x − b‖₂` subject to `x ≥ 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    if n == 0 {
        return x;
    }
    let scale = a.iter().fold(0.0_f64, |m, v| m.max(v.abs())) * b.amax().max(1.0);
    let tol = 1e-13 * scale.max(1e-300) * (a.nrows().max(n) as f64);
    let mut passive = vec![false; n];
    let mut w = a.tr_mul(&(b - a * &x));

    for _ in 0..3 * n + 10 {
        let pick = (0..n).filter(|&j| !passive[j]).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        match pick {
            Some(j) if w[j] > tol => passive[j] = true,
            _ => break,
        }
        loop {
            let s = solve_passive(a, b, &passive);
            if (0..n).filter(|&i| passive[i]).all(|i| s[i] > 0.0) {
                x = s;
                break;
            }
            let mut alpha = f64::INFINITY;
            for i in (0..n).filter(|&i| passive[i] && s[i] <= 0.0) {
                alpha = alpha.min(x[i] / (x[i] - s[i]));
            }
            x += (&s - &x) * alpha;
            let mut dropped = false;
            for i in 0..n {
                if passive[i] && x[i] <= 1e-15 {
                    passive[i] = false;
                    x[i] = 0.0;
                    dropped = true;
                }
            }
            if !dropped || !passive.iter().any(|&p| p) {
                break;
            }
        }
        w = a.tr_mul(&(b - a * &x));
    }
    x
}

fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..a.ncols()).filter(|&i| passive[i]).collect();
    let mut out = DVector::zeros(a.ncols());
    if cols.is_empty() {
        return out;
    }
    let sub = a.select_columns(cols.iter());
    let sol = sub.svd(true, true).solve(b, 1e-12).expect("SVD with both factors computed");
    for (k, &c) in cols.iter().enumerate() {
        out[c] = sol[k];
    }
    out
}
