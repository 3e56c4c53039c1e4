//! Dense linear-algebra helpers shared by the reduction pipeline.

mod ldlt;
mod ortho;

pub use ldlt::{Inertia, SymmetricFactor};
pub use ortho::{columns_to_matrix, orthonormal_columns, project_out};

use nalgebra::{DMatrix, DVector};

/// Singular values, descending.
pub fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.ncols() == 0 || a.nrows() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// σ_max / σ_min of the columns of `a`; infinite when rank-deficient.
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Thin SVD left factor and singular values, sorted descending.
pub fn left_singular(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let svd = a.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let mut us = DMatrix::zeros(u.nrows(), order.len());
    let mut s = Vec::with_capacity(order.len());
    for (k, &i) in order.iter().enumerate() {
        us.set_column(k, &u.column(i));
        s.push(svd.singular_values[i]);
    }
    (us, s)
}

/// Principal angles (radians, ascending) between the column spans of `a`
/// and `b`. When the spans differ in dimension, the missing directions
/// count as right angles.
pub fn principal_angles(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let qa = columns_to_matrix(a.nrows(), &orthonormal_columns(a, 1e-12));
    let qb = columns_to_matrix(b.nrows(), &orthonormal_columns(b, 1e-12));
    let (qa, qb) = if qa.ncols() >= qb.ncols() { (qa, qb) } else { (qb, qa) };
    let m = qb.ncols();
    // cosines from the overlap, sines from the residual: atan2 keeps full
    // precision at both ends of the range.
    let cos = singular_values(&(qa.transpose() * &qb));
    let resid = &qb - &qa * (qa.transpose() * &qb);
    let mut sin = singular_values(&resid);
    sin.reverse();
    let mut angles: Vec<f64> = (0..m)
        .map(|k| {
            sin.get(k)
                .copied()
                .unwrap_or(0.0)
                .atan2(cos.get(k).copied().unwrap_or(0.0))
        })
        .collect();
    angles.extend(std::iter::repeat_n(std::f64::consts::FRAC_PI_2, qa.ncols() - m));
    angles.sort_by(f64::total_cmp);
    angles
}

pub fn max_abs(a: &DMatrix<f64>) -> f64 {
    a.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Largest |a_ij − a_ji| and its location.
pub fn worst_asymmetry(a: &DMatrix<f64>) -> (f64, usize, usize) {
    let mut worst = (0.0, 0, 0);
    for j in 0..a.ncols() {
        for i in (j + 1)..a.nrows() {
            let d = (a[(i, j)] - a[(j, i)]).abs();
            if d > worst.0 {
                worst = (d, i, j);
            }
        }
    }
    worst
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

pub fn submatrix(a: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| a[(rows[i], cols[j])])
}

pub fn subvector(v: &DVector<f64>, rows: &[usize]) -> DVector<f64> {
    DVector::from_fn(rows.len(), |i, _| v[rows[i]])
}

/// Rayleigh quotient root sqrt(vᵀKv / vᵀMv), in rad/s for structural pencils.
pub fn rayleigh_root(mass: &DMatrix<f64>, stiffness: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    let num = v.dot(&(stiffness * v));
    let den = v.dot(&(mass * v));
    (num / den).max(0.0).sqrt()
}
