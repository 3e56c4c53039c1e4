//! Coupling deformations Θ: an interface displacement pattern imposed on a
//! component whose interior responds through its dynamic stiffness,
//! Θᵢ = −Zᵢᵢ(ω)⁻¹ Zᵢⱼ(ω) Θⱼ.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coupling::{shifted, AssembledSystem};
use crate::eigen::{solve_fixed_interface_modes, BandSpec, ModeSet};
use crate::error::{Error, Result};
use crate::linalg::{self, SymmetricFactor};
use crate::model::ComponentModel;
use crate::parallel::{self, Exec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingMethod {
    /// Each component driven by the other component's free-mode traces.
    Cross,
    /// Both components driven by a common SVD interface basis.
    Svd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CouplingSource {
    /// Θ_{receiver/donor} built from free mode `mode` of the donor.
    Donor { receiver: usize, mode: usize },
    /// Θ_{T_j} built from interface direction `index`.
    Direction { index: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingVector {
    /// Global DoF.
    pub shape: DVector<f64>,
    /// rad/s
    pub omega: f64,
    /// sqrt(ΘᵀKΘ / ΘᵀMΘ), rad/s.
    pub rayleigh_root: f64,
    pub method: CouplingMethod,
    pub singular_value: Option<f64>,
    pub source: CouplingSource,
}

/// Relative half-width of the forbidden window around fixed-interface
/// eigenfrequencies.
pub const NEAR_SINGULAR_WINDOW: f64 = 1e-3;

enum Factor {
    Cholesky(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Indefinite(SymmetricFactor),
}

/// Factorized Zᵢᵢ(ω) of one component together with Zᵢⱼ(ω).
pub(crate) struct InteriorSolver {
    factor: Factor,
    z_ij: DMatrix<f64>,
}

impl InteriorSolver {
    pub(crate) fn new(c: &ComponentModel, omega: f64) -> Result<Self> {
        let b = c.blocks();
        let s = omega * omega;
        let z_ii = shifted(&b.k_ii, &b.m_ii, s);
        let z_ij = shifted(&b.k_ij, &b.m_ij, s);
        if omega == 0.0 {
            let chol = z_ii.cholesky().ok_or_else(|| {
                Error::Singular(format!(
                    "clamped interior stiffness of component {} is not positive definite",
                    c.id
                ))
            })?;
            return Ok(Self {
                factor: Factor::Cholesky(chol),
                z_ij,
            });
        }
        let below = (omega * (1.0 - NEAR_SINGULAR_WINDOW)).powi(2);
        let above = (omega * (1.0 + NEAR_SINGULAR_WINDOW)).powi(2);
        let n_below = SymmetricFactor::new(&shifted(&b.k_ii, &b.m_ii, below))?
            .inertia(0.0)
            .negative;
        let n_above = SymmetricFactor::new(&shifted(&b.k_ii, &b.m_ii, above))?
            .inertia(0.0)
            .negative;
        let factor = SymmetricFactor::new(&z_ii)?;
        if n_below != n_above || factor.is_singular() {
            let requested_hz = omega / TAU;
            let fixed = solve_fixed_interface_modes(c, BandSpec::all())?;
            let eigen_hz = fixed
                .frequencies
                .iter()
                .copied()
                .min_by(|a, b| (a - requested_hz).abs().total_cmp(&(b - requested_hz).abs()))
                .unwrap_or(f64::NAN);
            return Err(Error::NearSingular {
                component: c.id,
                requested_hz,
                eigen_hz,
            });
        }
        Ok(Self {
            factor: Factor::Indefinite(factor),
            z_ij,
        })
    }

    /// Interior response −Zᵢᵢ⁻¹ Zᵢⱼ X to junction displacements X (columns).
    pub(crate) fn respond(&self, junction: &DMatrix<f64>) -> DMatrix<f64> {
        let rhs = -(&self.z_ij * junction);
        match &self.factor {
            Factor::Cholesky(c) => c.solve(&rhs),
            Factor::Indefinite(f) => f.solve(&rhs),
        }
    }
}

fn sorted_omegas(omegas: &[f64]) -> Result<Vec<f64>> {
    if omegas.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "sampling frequencies must be finite and ≥ 0, got {omegas:?}"
        )));
    }
    let mut w = omegas.to_vec();
    w.sort_by(f64::total_cmp);
    w.dedup();
    Ok(w)
}

/// Θ_{1/2} and Θ_{2/1} for every sampling frequency and every donor mode.
/// Output order: ω ascending, then receiver 1 (donor 2 modes in order), then
/// receiver 2 (donor 1 modes in order).
pub fn cross_coupling_vectors(
    sys: &AssembledSystem,
    free_modes: &[ModeSet; 2],
    omegas: &[f64],
    exec: Exec,
) -> Result<Vec<CouplingVector>> {
    let omegas = sorted_omegas(omegas)?;
    let per_omega = parallel::try_map(exec, &omegas, |&omega| {
        let mut out = Vec::new();
        for (receiver, donor) in [(1usize, 2usize), (2, 1)] {
            let rc = sys.component(receiver);
            let traces = free_modes[donor - 1].junction_trace(sys.component(donor));
            let solver = InteriorSolver::new(rc, omega)?;
            let interior = solver.respond(&traces);
            for m in 0..traces.ncols() {
                let mut local = DVector::zeros(rc.ndof());
                for (r, &d) in rc.interior().iter().enumerate() {
                    local[d] = interior[(r, m)];
                }
                for (r, &d) in rc.junction().iter().enumerate() {
                    local[d] = traces[(r, m)];
                }
                if local.norm() == 0.0 {
                    continue;
                }
                out.push(CouplingVector {
                    rayleigh_root: linalg::rayleigh_root(&rc.mass, &rc.stiffness, &local),
                    shape: sys.scatter(receiver, &local),
                    omega,
                    method: CouplingMethod::Cross,
                    singular_value: None,
                    source: CouplingSource::Donor { receiver, mode: m },
                });
            }
        }
        Ok::<_, Error>(out)
    })?;
    Ok(per_omega.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayleighPolicy {
    /// Smallest Rayleigh roots first.
    #[default]
    Smallest,
    /// Closest to the band first (zero distance inside it), ties by root.
    NearestBand,
}

#[derive(Debug, Clone)]
pub struct RayleighSelection {
    pub vectors: Vec<CouplingVector>,
    /// Set when fewer than `keep` vectors were available.
    pub short: bool,
}

/// Orders coupling vectors by Rayleigh root under `policy` and keeps the
/// first `keep`.
pub fn filter_by_rayleigh(
    vectors: &[CouplingVector],
    band: BandSpec,
    keep: usize,
    policy: RayleighPolicy,
) -> Result<RayleighSelection> {
    if keep == 0 {
        return Err(Error::InvalidArgument("keep must be ≥ 1".into()));
    }
    let distance = |v: &CouplingVector| {
        let f = v.rayleigh_root / TAU;
        if band.contains(f) {
            0.0
        } else if f < band.f_min {
            band.f_min - f
        } else {
            f - band.f_max
        }
    };
    let mut order: Vec<usize> = (0..vectors.len()).collect();
    match policy {
        RayleighPolicy::Smallest => {
            order.sort_by(|&a, &b| vectors[a].rayleigh_root.total_cmp(&vectors[b].rayleigh_root))
        }
        RayleighPolicy::NearestBand => order.sort_by(|&a, &b| {
            distance(&vectors[a])
                .total_cmp(&distance(&vectors[b]))
                .then(vectors[a].rayleigh_root.total_cmp(&vectors[b].rayleigh_root))
        }),
    }
    let short = keep > vectors.len();
    if short {
        log::warn!(
            "requested {keep} coupling vectors but only {} are available",
            vectors.len()
        );
    }
    Ok(RayleighSelection {
        vectors: order.into_iter().take(keep).map(|i| vectors[i].clone()).collect(),
        short,
    })
}

/// Common interface displacement basis T_j.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceBasis {
    /// Junction-DoF matrix, orthonormal columns.
    pub columns: DMatrix<f64>,
    /// All singular values of the trace matrix, descending.
    pub singular_values: Vec<f64>,
    pub threshold: f64,
}

impl InterfaceBasis {
    pub fn retained(&self) -> usize {
        self.columns.ncols()
    }

    /// Identity on the junction: every junction DoF its own direction.
    pub fn identity(n_junction: usize) -> Self {
        Self {
            columns: DMatrix::identity(n_junction, n_junction),
            singular_values: vec![1.0; n_junction],
            threshold: 0.0,
        }
    }
}

/// Singular values within roundoff of the threshold count as reaching it,
/// so orthonormal traces survive a threshold of exactly 1.
pub fn retains(singular_value: f64, threshold: f64) -> bool {
    singular_value >= threshold * (1.0 - 1e-12)
}

/// Left singular vectors of [φ₁,ⱼ | φ₂,ⱼ] (unit-normalized columns) with
/// singular value ≥ `sv_threshold`.
pub fn svd_interface_basis(
    c1: &ComponentModel,
    c2: &ComponentModel,
    free_modes_1: &ModeSet,
    free_modes_2: &ModeSet,
    sv_threshold: f64,
) -> Result<InterfaceBasis> {
    if free_modes_1.is_empty() || free_modes_2.is_empty() {
        return Err(Error::InvalidArgument("both mode sets must be nonempty".into()));
    }
    let t1 = free_modes_1.junction_trace(c1);
    let t2 = free_modes_2.junction_trace(c2);
    let cols: Vec<DVector<f64>> = t1
        .column_iter()
        .chain(t2.column_iter())
        .filter_map(|c| {
            let n = c.norm();
            (n > 0.0).then(|| c / n)
        })
        .collect();
    let traces = linalg::columns_to_matrix(t1.nrows(), &cols);
    let (u, s) = linalg::left_singular(&traces);
    let retained = s.iter().take_while(|&&v| retains(v, sv_threshold)).count();
    if retained == 0 {
        return Err(Error::EmptyBasis {
            threshold: sv_threshold,
        });
    }
    Ok(InterfaceBasis {
        columns: u.columns(0, retained).into_owned(),
        singular_values: s,
        threshold: sv_threshold,
    })
}

/// Θ_{T_j}: one global vector per (ω, direction) with both interiors
/// responding to the shared junction displacement. Order: ω ascending, then
/// direction index.
pub fn svd_coupling_vectors(
    sys: &AssembledSystem,
    tj: &InterfaceBasis,
    omegas: &[f64],
    exec: Exec,
) -> Result<Vec<CouplingVector>> {
    let omegas = sorted_omegas(omegas)?;
    if tj.columns.nrows() != sys.junction_global.len() {
        return Err(Error::InvalidArgument(format!(
            "interface basis has {} rows, junction has {} DoF",
            tj.columns.nrows(),
            sys.junction_global.len()
        )));
    }
    let per_omega = parallel::try_map(exec, &omegas, |&omega| {
        let x1 = InteriorSolver::new(sys.component(1), omega)?.respond(&tj.columns);
        let x2 = InteriorSolver::new(sys.component(2), omega)?.respond(&tj.columns);
        let (i1, i2) = (sys.component(1).interior(), sys.component(2).interior());
        let mut out = Vec::with_capacity(tj.retained());
        for d in 0..tj.retained() {
            let mut g = DVector::zeros(sys.n_global);
            for (r, &gj) in sys.junction_global.iter().enumerate() {
                g[gj] = tj.columns[(r, d)];
            }
            for (r, &l) in i1.iter().enumerate() {
                g[sys.map(1)[l]] = x1[(r, d)];
            }
            for (r, &l) in i2.iter().enumerate() {
                g[sys.map(2)[l]] = x2[(r, d)];
            }
            out.push(CouplingVector {
                rayleigh_root: linalg::rayleigh_root(&sys.mass, &sys.stiffness, &g),
                shape: g,
                omega,
                method: CouplingMethod::Svd,
                singular_value: tj.singular_values.get(d).copied(),
                source: CouplingSource::Direction { index: d },
            });
        }
        Ok::<_, Error>(out)
    })?;
    Ok(per_omega.into_iter().flatten().collect())
}
