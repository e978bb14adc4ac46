//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

const RANK_RTOL: f64 = 1e-10;

fn rank_eps(singular_values: &Vector, rows: usize, cols: usize) -> f64 {
    let smax = singular_values.iter().cloned().fold(0.0, f64::max);
    smax * RANK_RTOL * rows.max(cols).max(1) as f64
}

/// Ratio of extreme singular values; infinite for singular matrices.
pub fn condition_number(a: &Mat) -> f64 {
    if a.is_empty() {
        return 1.0;
    }
    let sv = a.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    if smin <= 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

pub fn spectral_norm(a: &Mat) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    a.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

pub fn is_rank_deficient(a: &Mat) -> bool {
    is_rank_deficient_at(a, 0.0)
}

/// Rank test against `max(‖A‖, scale)`, so a matrix that is pure rounding
/// noise relative to its natural magnitude counts as singular.
pub fn is_rank_deficient_at(a: &Mat, scale: f64) -> bool {
    let sv = a.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max).max(scale);
    let eps = smax * RANK_RTOL * a.nrows().max(a.ncols()).max(1) as f64;
    sv.iter().any(|&s| s <= eps)
}

/// Minimum-norm least-squares solution `argmin ‖Ax − b‖` via SVD.
pub fn min_norm_solve(a: &Mat, b: &Vector) -> Vector {
    let svd = a.clone().svd(true, true);
    let eps = rank_eps(&svd.singular_values, a.nrows(), a.ncols());
    svd.solve(b, eps).expect("both factors were computed")
}

pub fn pseudo_inverse(a: &Mat) -> Mat {
    let svd = a.clone().svd(true, true);
    let eps = rank_eps(&svd.singular_values, a.nrows(), a.ncols());
    svd.pseudo_inverse(eps).expect("eps is non-negative")
}

/// Solves a square system, falling back to the minimum-norm solution when
/// the matrix is singular. The flag reports whether the fallback was taken.
pub fn solve_or_min_norm(a: &Mat, b: &Vector) -> (Vector, bool) {
    if !is_rank_deficient(a) {
        if let Some(x) = a.clone().lu().solve(b) {
            return (x, false);
        }
    }
    (min_norm_solve(a, b), true)
}

/// Solves `A x = b`; if `A` is rank-deficient (relative to
/// `max(‖A‖, scale)`), appends the gauge row `g^T x = 0` and returns the
/// minimum-norm least-squares solution of the stacked system.
pub fn solve_with_gauge(a: &Mat, b: &Vector, gauge: &Vector, scale: f64) -> (Vector, bool) {
    if !is_rank_deficient_at(a, scale) {
        if let Some(x) = a.clone().lu().solve(b) {
            return (x, false);
        }
    }
    let n = a.ncols();
    let mut stacked = Mat::zeros(a.nrows() + 1, n);
    stacked.view_mut((0, 0), (a.nrows(), n)).copy_from(a);
    for j in 0..n {
        stacked[(a.nrows(), j)] = gauge[j];
    }
    let mut rhs = Vector::zeros(a.nrows() + 1);
    rhs.rows_mut(0, a.nrows()).copy_from(b);
    (min_norm_solve(&stacked, &rhs), true)
}

/// `sqrt(Σ w_i v_i²)`.
pub fn weighted_norm(v: &[f64], weights: &[f64]) -> f64 {
    v.iter()
        .zip(weights)
        .map(|(x, w)| w * x * x)
        .sum::<f64>()
        .sqrt()
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
