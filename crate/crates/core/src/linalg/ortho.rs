use nalgebra::{DMatrix, DVector};

/// Projects `v` off the orthonormal columns `q`, two passes of modified
/// Gram-Schmidt.
pub fn project_out(q: &[DVector<f64>], v: &mut DVector<f64>) {
    for _ in 0..2 {
        for qi in q {
            let c = qi.dot(v);
            v.axpy(-c, qi, 1.0);
        }
    }
}

/// Orthonormal basis of the column span of `a` (MGS with reorthogonalization).
/// Columns whose residual falls below `drop_tol` of their original norm are
/// skipped.
pub fn orthonormal_columns(a: &DMatrix<f64>, drop_tol: f64) -> Vec<DVector<f64>> {
    let mut q: Vec<DVector<f64>> = Vec::with_capacity(a.ncols());
    for j in 0..a.ncols() {
        let mut v = a.column(j).into_owned();
        let pre = v.norm();
        if pre == 0.0 {
            continue;
        }
        project_out(&q, &mut v);
        let post = v.norm();
        if post > drop_tol * pre {
            q.push(v / post);
        }
    }
    q
}

pub fn columns_to_matrix(nrows: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(nrows, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}
