//! Block shift-invert Krylov iteration for the low end of a large pencil.
//!
//! Builds an M-orthonormal basis of span{V₀, A V₀, A² V₀, …} with
//! A = (K + σM)⁻¹ M and extracts Ritz pairs with the original (K, M). The
//! block start handles the six-fold rigid multiplicity of free solids.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const BLOCK: usize = 8;
const RESIDUAL_TOL: f64 = 1e-9;

pub(super) fn solve(
    mass: &DMatrix<f64>,
    stiffness: &DMatrix<f64>,
    sigma: f64,
    lambda_cut: f64,
    max_modes: usize,
) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = mass.nrows();
    let shifted = crate::coupling::shifted(stiffness, mass, -sigma);
    let chol = shifted
        .cholesky()
        .ok_or_else(|| Error::Definiteness(format!("K + {sigma:e}·M is not positive definite")))?;
    let k_norm = crate::linalg::max_abs(stiffness);

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut mbasis: Vec<DVector<f64>> = Vec::new();
    let mut block: Vec<DVector<f64>> = (0..BLOCK.min(n))
        .map(|_| DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0)))
        .collect();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut added = 0;
        let mut next = Vec::with_capacity(block.len());
        for mut v in block.drain(..) {
            let pre = (v.dot(&(mass * &v))).sqrt();
            for _ in 0..2 {
                for (q, mq) in basis.iter().zip(&mbasis) {
                    let c = mq.dot(&v);
                    v.axpy(-c, q, 1.0);
                }
            }
            let mv = mass * &v;
            let norm = v.dot(&mv).max(0.0).sqrt();
            if norm > 1e-10 * pre && norm > 0.0 {
                let q = v / norm;
                let mq = mv / norm;
                next.push(chol.solve(&mq));
                basis.push(q);
                mbasis.push(mq);
                added += 1;
            }
        }
        block = next;

        let (lambda, vecs, done) = ritz(mass, stiffness, &basis, lambda_cut, max_modes, k_norm);
        if done || basis.len() >= n || added == 0 {
            return Ok((lambda, vecs));
        }
        if iterations > n {
            return Err(Error::Numeric(format!(
                "block Krylov did not converge after {iterations} blocks ({} vectors)",
                basis.len()
            )));
        }
    }
}

/// Ritz pairs of the current basis and whether the requested range has
/// converged: every Ritz value up to the cut (or `max_modes` of them) must
/// have a small residual, and at least one converged value must lie beyond
/// the cut so no in-range eigenvalue can still be missing.
fn ritz(
    mass: &DMatrix<f64>,
    stiffness: &DMatrix<f64>,
    basis: &[DVector<f64>],
    lambda_cut: f64,
    max_modes: usize,
    k_norm: f64,
) -> (Vec<f64>, DMatrix<f64>, bool) {
    let v = DMatrix::from_columns(basis);
    let kr = crate::linalg::symmetrize(&(v.transpose() * stiffness * &v));
    let eig = kr.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut lambda = Vec::with_capacity(order.len());
    let mut x = DMatrix::zeros(v.nrows(), order.len());
    for (k, &i) in order.iter().enumerate() {
        lambda.push(eig.eigenvalues[i]);
        x.set_column(k, &(&v * eig.eigenvectors.column(i)));
    }
    let converged = |k: usize| {
        let xk = x.column(k);
        let kx = stiffness * xk;
        let r = &kx - mass * xk * lambda[k];
        r.norm() <= RESIDUAL_TOL * kx.norm().max(k_norm * xk.norm() * 1e-6)
    };
    let mut wanted = 0;
    let mut beyond = false;
    for k in 0..lambda.len() {
        if lambda[k] <= lambda_cut && wanted < max_modes {
            if !converged(k) {
                return (lambda, x, false);
            }
            wanted += 1;
        } else {
            beyond = converged(k);
            break;
        }
    }
    (lambda, x, beyond || wanted == max_modes)
}
