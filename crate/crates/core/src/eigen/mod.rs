//! Generalized symmetric eigenproblems K φ = ω² M φ.
//!
//! Mode sets are mass-normalized, sorted by frequency, and sign-canonical
//! (largest-magnitude entry positive). Rigid-body modes are reported at
//! exactly 0 Hz.

mod krylov;

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coupling::AssembledSystem;
use crate::error::{Error, Result};
use crate::linalg;
use crate::model::ComponentModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub f_min: f64,
    pub f_max: f64,
}

impl BandSpec {
    pub fn new(f_min: f64, f_max: f64) -> Result<Self> {
        if !(f_min >= 0.0 && f_min < f_max) {
            return Err(Error::InvalidArgument(format!(
                "band needs 0 ≤ f_min < f_max, got [{f_min}, {f_max}]"
            )));
        }
        Ok(Self { f_min, f_max })
    }

    /// [0, ∞)
    pub fn all() -> Self {
        Self {
            f_min: 0.0,
            f_max: f64::INFINITY,
        }
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.f_min && f <= self.f_max
    }

    pub fn omega_max(&self) -> f64 {
        TAU * self.f_max
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DofContext {
    Component { id: usize },
    ComponentInterior { id: usize },
    Assembled,
    Reduced { basis_size: usize },
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSet {
    /// Hz, ascending.
    pub frequencies: Vec<f64>,
    /// ω² in (rad/s)², zero for rigid modes.
    pub eigenvalues: Vec<f64>,
    /// One column per mode.
    pub shapes: DMatrix<f64>,
    pub dof_context: DofContext,
    pub rigid_count: usize,
}

impl ModeSet {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn shape(&self, i: usize) -> DVector<f64> {
        self.shapes.column(i).into_owned()
    }

    pub fn is_rigid(&self, i: usize) -> bool {
        i < self.rigid_count
    }

    pub fn elastic_indices(&self) -> std::ops::Range<usize> {
        self.rigid_count..self.len()
    }

    /// Keeps modes `keep` (in order).
    pub fn select(&self, keep: &[usize]) -> ModeSet {
        let mut shapes = DMatrix::zeros(self.shapes.nrows(), keep.len());
        for (k, &i) in keep.iter().enumerate() {
            shapes.set_column(k, &self.shapes.column(i));
        }
        ModeSet {
            frequencies: keep.iter().map(|&i| self.frequencies[i]).collect(),
            eigenvalues: keep.iter().map(|&i| self.eigenvalues[i]).collect(),
            shapes,
            dof_context: self.dof_context.clone(),
            rigid_count: keep.iter().filter(|&&i| i < self.rigid_count).count(),
        }
    }

    /// Modes with frequency inside `band`.
    pub fn in_band(&self, band: &BandSpec) -> ModeSet {
        let keep: Vec<usize> = (0..self.len())
            .filter(|&i| band.contains(self.frequencies[i]))
            .collect();
        self.select(&keep)
    }

    /// Junction rows of the shapes (component-local sets only).
    pub fn junction_trace(&self, c: &ComponentModel) -> DMatrix<f64> {
        let rows = c.junction();
        DMatrix::from_fn(rows.len(), self.len(), |r, j| self.shapes[(rows[r], j)])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenOptions {
    /// Above this many DoF the block shift-invert Krylov path is used.
    pub dense_threshold: usize,
    /// Spectral shift σ for semi-definite K; default 1% of mean(diag K / diag M).
    pub shift: Option<f64>,
    /// Override for the rigid/elastic frequency cut (Hz).
    pub rigid_tolerance_hz: Option<f64>,
    /// Frequency scale (Hz) used to place the rigid cut; defaults to
    /// sqrt(mean(diag K / diag M)) / 2π of the pencil being solved.
    pub reference_hz: Option<f64>,
    pub include_rigid: bool,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            dense_threshold: 5000,
            shift: None,
            rigid_tolerance_hz: None,
            reference_hz: None,
            include_rigid: true,
        }
    }
}

pub(crate) fn mean_diag_ratio(m: &DMatrix<f64>, k: &DMatrix<f64>) -> f64 {
    let n = m.nrows().max(1) as f64;
    (0..m.nrows()).map(|i| k[(i, i)] / m[(i, i)]).sum::<f64>() / n
}

/// Frequency scale of a pencil: sqrt(mean(diag K / diag M)) / 2π.
pub fn reference_frequency(m: &DMatrix<f64>, k: &DMatrix<f64>) -> f64 {
    mean_diag_ratio(m, k).max(0.0).sqrt() / TAU
}

pub fn solve_modes(mass: &DMatrix<f64>, stiffness: &DMatrix<f64>, band: BandSpec, max_modes: usize) -> Result<ModeSet> {
    solve_modes_with(mass, stiffness, band, max_modes, &EigenOptions::default())
}

pub fn solve_modes_with(
    mass: &DMatrix<f64>,
    stiffness: &DMatrix<f64>,
    band: BandSpec,
    max_modes: usize,
    opts: &EigenOptions,
) -> Result<ModeSet> {
    let n = mass.nrows();
    if mass.ncols() != n || stiffness.nrows() != n || stiffness.ncols() != n {
        return Err(Error::InvalidArgument("M and K must be square and equal-sized".into()));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty pencil".into()));
    }
    let sigma = opts.shift.unwrap_or_else(|| 0.01 * mean_diag_ratio(mass, stiffness));
    let (lambda, shapes) = if n > opts.dense_threshold {
        let lambda_cut = if band.f_max.is_finite() {
            (TAU * band.f_max).powi(2)
        } else {
            f64::INFINITY
        };
        krylov::solve(mass, stiffness, sigma, lambda_cut, max_modes)?
    } else {
        dense(mass, stiffness, sigma)?
    };
    let reference = opts
        .reference_hz
        .unwrap_or_else(|| reference_frequency(mass, stiffness));
    Ok(finish(
        lambda,
        shapes,
        band,
        max_modes,
        reference,
        opts,
        DofContext::Raw,
    ))
}

/// Cholesky reduction L⁻¹(K + σM)L⁻ᵀ and a dense symmetric eigensolve.
fn dense(mass: &DMatrix<f64>, stiffness: &DMatrix<f64>, sigma: f64) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = mass
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Definiteness("mass matrix".into()))?;
    let l = chol.l();
    let a = crate::coupling::shifted(stiffness, mass, -sigma);
    let x = l
        .solve_lower_triangular(&a)
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
    let c = l
        .solve_lower_triangular(&x.transpose())
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
    let c = linalg::symmetrize(&c);
    let eig = c.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let mut y = DMatrix::zeros(mass.nrows(), order.len());
    let mut lambda = Vec::with_capacity(order.len());
    for (k, &i) in order.iter().enumerate() {
        y.set_column(k, &eig.eigenvectors.column(i));
        lambda.push(eig.eigenvalues[i] - sigma);
    }
    let shapes = l
        .transpose()
        .solve_upper_triangular(&y)
        .ok_or_else(|| Error::Numeric("triangular solve failed".into()))?;
    Ok((lambda, shapes))
}

/// Rigid classification, band selection, sign canonicalization.
fn finish(
    lambda: Vec<f64>,
    shapes: DMatrix<f64>,
    band: BandSpec,
    max_modes: usize,
    reference_hz: f64,
    opts: &EigenOptions,
    context: DofContext,
) -> ModeSet {
    let raw_f: Vec<f64> = lambda.iter().map(|&l| l.max(0.0).sqrt() / TAU).collect();
    let rigid_tol = opts.rigid_tolerance_hz.unwrap_or_else(|| {
        let first_elastic = raw_f
            .iter()
            .copied()
            .find(|&f| f >= 1e-6 * reference_hz)
            .unwrap_or(reference_hz);
        (1e-4 * first_elastic).max(1e-6)
    });
    let mut keep = Vec::new();
    let mut rigid_count = 0;
    let mut freqs = Vec::new();
    let mut eigs = Vec::new();
    for (i, &f) in raw_f.iter().enumerate() {
        let rigid = f < rigid_tol;
        let f = if rigid { 0.0 } else { f };
        if rigid && !opts.include_rigid {
            continue;
        }
        if !band.contains(f) {
            continue;
        }
        if keep.len() == max_modes {
            break;
        }
        keep.push(i);
        freqs.push(f);
        eigs.push(if rigid { 0.0 } else { lambda[i] });
        if rigid {
            rigid_count += 1;
        }
    }
    let mut out = DMatrix::zeros(shapes.nrows(), keep.len());
    for (k, &i) in keep.iter().enumerate() {
        out.set_column(k, &canonical_sign(shapes.column(i).into_owned()));
    }
    ModeSet {
        frequencies: freqs,
        eigenvalues: eigs,
        shapes: out,
        dof_context: context,
        rigid_count,
    }
}

/// Flips `v` so that its largest-magnitude entry (first on ties) is positive.
pub fn canonical_sign(v: DVector<f64>) -> DVector<f64> {
    let mut best = 0.0_f64;
    let mut sign = 1.0;
    for &x in v.iter() {
        if x.abs() > best {
            best = x.abs();
            sign = x.signum();
        }
    }
    if sign < 0.0 {
        -v
    } else {
        v
    }
}

/// Free-free modes of a component in `band` (rigid modes included per
/// `include_rigid`).
pub fn solve_free_modes(c: &ComponentModel, band: BandSpec, include_rigid: bool) -> Result<ModeSet> {
    let opts = EigenOptions {
        include_rigid,
        ..EigenOptions::default()
    };
    let mut m = solve_modes_with(&c.mass, &c.stiffness, band, usize::MAX, &opts)?;
    m.dof_context = DofContext::Component { id: c.id };
    Ok(m)
}

/// Modes of the interior block with the junction clamped.
pub fn solve_fixed_interface_modes(c: &ComponentModel, band: BandSpec) -> Result<ModeSet> {
    if c.interior().is_empty() {
        return Err(Error::InvalidArgument(format!(
            "component {} has no interior DoF",
            c.id
        )));
    }
    if c.junction().is_empty() {
        return Err(Error::InvalidArgument(format!(
            "component {} has no junction DoF",
            c.id
        )));
    }
    let b = c.blocks();
    let mut m = solve_modes(&b.m_ii, &b.k_ii, band, usize::MAX)?;
    m.dof_context = DofContext::ComponentInterior { id: c.id };
    Ok(m)
}

/// All modes of the assembled system in `band`.
pub fn solve_full(sys: &AssembledSystem, band: BandSpec) -> Result<ModeSet> {
    let mut m = solve_modes(&sys.mass, &sys.stiffness, band, usize::MAX)?;
    m.dof_context = DofContext::Assembled;
    Ok(m)
}

/// Columns with σ ≤ this fraction of σ_max make a basis rank-deficient.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Rayleigh-Ritz on span(T): solves (TᵀKT, TᵀMT) through an orthonormal
/// basis of the span and back-projects to global DoF. Fails when T is
/// rank-deficient at [`RANK_TOLERANCE`].
pub fn solve_reduced(t: &DMatrix<f64>, sys: &AssembledSystem, band: BandSpec) -> Result<ModeSet> {
    reduced(t, sys, band, None)
}

/// Like [`solve_reduced`] but discards directions with σ ≤ `rank_tol`·σ_max
/// instead of failing; returns the number of discarded directions too.
pub fn solve_reduced_deflated(
    t: &DMatrix<f64>,
    sys: &AssembledSystem,
    band: BandSpec,
    rank_tol: f64,
) -> Result<(ModeSet, usize)> {
    let (u, s) = linalg::left_singular(t);
    let kept = s.iter().filter(|&&v| v > rank_tol * s[0]).count();
    let modes = reduced(t, sys, band, Some((u.columns(0, kept).into_owned(), s)))?;
    Ok((modes, t.ncols() - kept))
}

fn reduced(
    t: &DMatrix<f64>,
    sys: &AssembledSystem,
    band: BandSpec,
    pre: Option<(DMatrix<f64>, Vec<f64>)>,
) -> Result<ModeSet> {
    if t.nrows() != sys.n_global {
        return Err(Error::InvalidArgument(format!(
            "basis has {} rows, system has {} DoF",
            t.nrows(),
            sys.n_global
        )));
    }
    if t.ncols() == 0 {
        return Err(Error::InvalidArgument("empty reduction basis".into()));
    }
    let q = match pre {
        Some((q, _)) => q,
        None => {
            let (u, s) = linalg::left_singular(t);
            let (hi, lo) = (s[0], s[s.len() - 1]);
            if !(lo > RANK_TOLERANCE * hi) || t.ncols() > t.nrows() {
                let condition_number = if lo > 0.0 { hi / lo } else { f64::INFINITY };
                return Err(Error::Conditioning { condition_number });
            }
            u
        }
    };
    let kr = linalg::symmetrize(&(q.transpose() * &sys.stiffness * &q));
    let mr = linalg::symmetrize(&(q.transpose() * &sys.mass * &q));
    let reference = reference_frequency(&sys.mass, &sys.stiffness);
    let sigma = 0.01 * mean_diag_ratio(&sys.mass, &sys.stiffness);
    let (lambda, y) = dense(&mr, &kr, sigma)?;
    let mut shapes = &q * y;
    for j in 0..shapes.ncols() {
        let v = shapes.column(j).into_owned();
        let mn = v.dot(&(&sys.mass * &v)).sqrt();
        shapes.set_column(j, &(v / mn));
    }
    Ok(finish(
        lambda,
        shapes,
        band,
        usize::MAX,
        reference,
        &EigenOptions::default(),
        DofContext::Reduced { basis_size: t.ncols() },
    ))
}
