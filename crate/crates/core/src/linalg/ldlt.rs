//! Dense symmetric-indefinite LDLᵀ with Bunch-Parlett diagonal pivoting.
//!
//! Factors `P A Pᵀ = L D Lᵀ` with `L` unit lower triangular and `D` block
//! diagonal with 1×1 and 2×2 blocks. The signs of `D` give the inertia of
//! `A` (Sylvester), which the eigenvalue window checks rely on.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

// (1 + sqrt(17)) / 8, the growth-optimal pivot threshold.
const ALPHA: f64 = 0.640_388_203_202_208;

#[derive(Debug, Clone, Copy)]
enum Pivot {
    One(f64),
    Two { a: f64, b: f64, c: f64 },
}

#[derive(Debug, Clone)]
pub struct SymmetricFactor {
    perm: Vec<usize>,
    l: DMatrix<f64>,
    /// (start index, block)
    blocks: Vec<(usize, Pivot)>,
}

/// Eigenvalue sign counts of a symmetric matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub negative: usize,
    pub zero: usize,
    pub positive: usize,
}

impl SymmetricFactor {
    /// Factors a symmetric matrix. An identically zero trailing block yields
    /// zero pivots (see [`Self::is_singular`]); tiny pivots are kept and show
    /// up in the inertia as zeros.
    pub fn new(a: &DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::InvalidArgument("LDLᵀ needs a square matrix".into()));
        }
        let mut w = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut blocks = Vec::new();
        let mut k = 0;
        while k < n {
            let (mut dmax, mut r) = (0.0_f64, k);
            for i in k..n {
                let v = w[(i, i)].abs();
                if v > dmax {
                    dmax = v;
                    r = i;
                }
            }
            let (mut omax, mut p, mut q) = (0.0_f64, k, k);
            for j in k..n {
                for i in (j + 1)..n {
                    let v = w[(i, j)].abs();
                    if v > omax {
                        omax = v;
                        p = i;
                        q = j;
                    }
                }
            }
            if dmax == 0.0 && omax == 0.0 {
                // Exactly singular: the rest of D is zero.
                for i in k..n {
                    for j in (k + 1)..n {
                        w[(j, i)] = 0.0;
                    }
                    blocks.push((i, Pivot::One(0.0)));
                }
                break;
            }
            if dmax >= ALPHA * omax || k + 1 == n {
                swap_sym(&mut w, &mut perm, k, r);
                let d = w[(k, k)];
                for i in (k + 1)..n {
                    w[(i, k)] /= d;
                }
                for j in (k + 1)..n {
                    let ljd = w[(j, k)] * d;
                    for i in j..n {
                        let v = w[(i, j)] - w[(i, k)] * ljd;
                        w[(i, j)] = v;
                    }
                }
                mirror_trailing(&mut w, k + 1);
                blocks.push((k, Pivot::One(d)));
                k += 1;
            } else {
                // q < p; bring q to k and p to k+1.
                swap_sym(&mut w, &mut perm, k, q);
                let p = if p == k { q } else { p };
                swap_sym(&mut w, &mut perm, k + 1, p);
                let (a11, b, c22) = (w[(k, k)], w[(k + 1, k)], w[(k + 1, k + 1)]);
                let det = a11 * c22 - b * b;
                let (i11, i12, i22) = (c22 / det, -b / det, a11 / det);
                for i in (k + 2)..n {
                    let (x, y) = (w[(i, k)], w[(i, k + 1)]);
                    w[(i, k)] = x * i11 + y * i12;
                    w[(i, k + 1)] = x * i12 + y * i22;
                }
                for j in (k + 2)..n {
                    let (lj0, lj1) = (w[(j, k)], w[(j, k + 1)]);
                    // E Lⱼᵀ
                    let e0 = a11 * lj0 + b * lj1;
                    let e1 = b * lj0 + c22 * lj1;
                    for i in j..n {
                        let v = w[(i, j)] - w[(i, k)] * e0 - w[(i, k + 1)] * e1;
                        w[(i, j)] = v;
                    }
                }
                mirror_trailing(&mut w, k + 2);
                w[(k + 1, k)] = 0.0;
                blocks.push((k, Pivot::Two { a: a11, b, c: c22 }));
                k += 2;
            }
        }
        let mut l = DMatrix::identity(n, n);
        for j in 0..n {
            for i in (j + 1)..n {
                l[(i, j)] = w[(i, j)];
            }
        }
        Ok(Self { perm, l, blocks })
    }

    /// True when some pivot is exactly zero; solves are then meaningless.
    pub fn is_singular(&self) -> bool {
        self.blocks.iter().any(|(_, p)| matches!(p, Pivot::One(d) if *d == 0.0))
    }

    pub fn dim(&self) -> usize {
        self.perm.len()
    }

    /// Inertia with pivots below `rel_zero · max|pivot|` counted as zero.
    pub fn inertia(&self, rel_zero: f64) -> Inertia {
        let scale = self
            .blocks
            .iter()
            .map(|(_, p)| match *p {
                Pivot::One(d) => d.abs(),
                Pivot::Two { a, b, c } => a.abs().max(b.abs()).max(c.abs()),
            })
            .fold(0.0_f64, f64::max);
        let tol = rel_zero * scale;
        let mut out = Inertia {
            negative: 0,
            zero: 0,
            positive: 0,
        };
        let mut count = |v: f64| {
            if v.abs() <= tol {
                out.zero += 1;
            } else if v < 0.0 {
                out.negative += 1;
            } else {
                out.positive += 1;
            }
        };
        for (_, p) in &self.blocks {
            match *p {
                Pivot::One(d) => count(d),
                Pivot::Two { a, b, c } => {
                    let mean = 0.5 * (a + c);
                    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
                    count(mean - rad);
                    count(mean + rad);
                }
            }
        }
        out
    }

    pub fn solve_vec(&self, rhs: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut y = DVector::from_fn(n, |i, _| rhs[self.perm[i]]);
        // L z = y
        for j in 0..n {
            let yj = y[j];
            if yj != 0.0 {
                for i in (j + 1)..n {
                    y[i] -= self.l[(i, j)] * yj;
                }
            }
        }
        for &(k, p) in &self.blocks {
            match p {
                Pivot::One(d) => y[k] /= d,
                Pivot::Two { a, b, c } => {
                    let det = a * c - b * b;
                    let (u, v) = (y[k], y[k + 1]);
                    y[k] = (c * u - b * v) / det;
                    y[k + 1] = (a * v - b * u) / det;
                }
            }
        }
        // Lᵀ x = z
        for j in (0..n).rev() {
            let mut s = y[j];
            for i in (j + 1)..n {
                s -= self.l[(i, j)] * y[i];
            }
            y[j] = s;
        }
        let mut x = DVector::zeros(n);
        for i in 0..n {
            x[self.perm[i]] = y[i];
        }
        x
    }

    pub fn solve(&self, rhs: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(rhs.nrows(), rhs.ncols());
        for j in 0..rhs.ncols() {
            let x = self.solve_vec(&rhs.column(j).into_owned());
            out.set_column(j, &x);
        }
        out
    }
}

fn swap_sym(w: &mut DMatrix<f64>, perm: &mut [usize], i: usize, j: usize) {
    if i != j {
        w.swap_rows(i, j);
        w.swap_columns(i, j);
        perm.swap(i, j);
    }
}

fn mirror_trailing(w: &mut DMatrix<f64>, from: usize) {
    let n = w.nrows();
    for j in from..n {
        for i in (j + 1)..n {
            w[(j, i)] = w[(i, j)];
        }
    }
}
