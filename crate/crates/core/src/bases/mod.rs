//! Reduction bases T: Craig-Bampton, and free-free modes plus coupling
//! vectors built either from cross-component mode traces (CROSS) or from a
//! common SVD interface basis (SVD).

mod coupling_vectors;
pub mod database;
mod orthogonalize;

pub use coupling_vectors::{
    cross_coupling_vectors, filter_by_rayleigh, retains, svd_coupling_vectors, svd_interface_basis, CouplingMethod,
    CouplingSource, CouplingVector, InterfaceBasis, RayleighPolicy, RayleighSelection, NEAR_SINGULAR_WINDOW,
};
pub use orthogonalize::{gram_schmidt_against, orthogonalize, DroppedCandidate, Orthogonalization};

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coupling::AssembledSystem;
use crate::eigen::{self, BandSpec, ModeSet};
use crate::error::{Error, Result};
use crate::linalg;
use crate::parallel::Exec;
use coupling_vectors::InteriorSolver;

/// Provenance of one basis column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnTag {
    FreeFreeMode {
        component: usize,
        index: usize,
    },
    ConstraintMode {
        junction_dof: usize,
    },
    FixedInterfaceMode {
        component: usize,
        index: usize,
    },
    CouplingVector {
        method: CouplingMethod,
        omega: f64,
        source: CouplingSource,
    },
    /// Reduced-model mode shape carried over by an enrichment restart.
    RitzVector {
        round: usize,
        mode: usize,
    },
    ArnoldiVector {
        round: usize,
        target_mode: usize,
        step: usize,
    },
    /// Column supplied from outside the pipeline.
    External {
        index: usize,
    },
}

impl ColumnTag {
    pub fn coupling(c: &CouplingVector) -> Self {
        ColumnTag::CouplingVector {
            method: c.method,
            omega: c.omega,
            source: c.source,
        }
    }

    pub fn is_free_free(&self) -> bool {
        matches!(self, ColumnTag::FreeFreeMode { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionBasis {
    /// Global-DoF columns.
    pub columns: DMatrix<f64>,
    pub tags: Vec<ColumnTag>,
    /// σ_max / σ_min of `columns`.
    pub condition_number: f64,
    pub dropped: Vec<DroppedCandidate>,
}

impl ReductionBasis {
    pub fn new(columns: DMatrix<f64>, tags: Vec<ColumnTag>, dropped: Vec<DroppedCandidate>) -> Self {
        assert_eq!(columns.ncols(), tags.len(), "one tag per column");
        Self {
            condition_number: linalg::condition_number(&columns),
            columns,
            tags,
            dropped,
        }
    }

    /// Columns tagged as external, in order.
    pub fn from_columns(columns: DMatrix<f64>) -> Self {
        let tags = (0..columns.ncols())
            .map(|index| ColumnTag::External { index })
            .collect();
        Self::new(columns, tags, Vec::new())
    }

    pub fn len(&self) -> usize {
        self.columns.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.ncols() == 0
    }

    pub fn count(&self, pred: impl Fn(&ColumnTag) -> bool) -> usize {
        self.tags.iter().filter(|t| pred(t)).count()
    }

    /// Sub-basis of the columns whose tag satisfies `pred`.
    pub fn filter(&self, pred: impl Fn(&ColumnTag) -> bool) -> ReductionBasis {
        let keep: Vec<usize> = (0..self.len()).filter(|&i| pred(&self.tags[i])).collect();
        let mut cols = DMatrix::zeros(self.columns.nrows(), keep.len());
        for (k, &i) in keep.iter().enumerate() {
            cols.set_column(k, &self.columns.column(i));
        }
        ReductionBasis::new(cols, keep.iter().map(|&i| self.tags[i].clone()).collect(), Vec::new())
    }

    pub fn solve(&self, sys: &AssembledSystem, band: BandSpec) -> Result<ModeSet> {
        eigen::solve_reduced(&self.columns, sys, band)
    }
}

/// Free-free modes of both components placed in global DoF, component 1
/// first.
pub fn free_free_basis(sys: &AssembledSystem, free_modes: &[ModeSet; 2]) -> ReductionBasis {
    let mut cols = Vec::new();
    let mut tags = Vec::new();
    for (k, modes) in free_modes.iter().enumerate() {
        for i in 0..modes.len() {
            cols.push(sys.scatter(k + 1, &modes.shape(i)));
            tags.push(ColumnTag::FreeFreeMode {
                component: k + 1,
                index: i,
            });
        }
    }
    ReductionBasis::new(linalg::columns_to_matrix(sys.n_global, &cols), tags, Vec::new())
}

/// Free-free modes of both components in `band`.
pub fn solve_component_modes(sys: &AssembledSystem, band: BandSpec, include_rigid: bool) -> Result<[ModeSet; 2]> {
    Ok([
        eigen::solve_free_modes(sys.component(1), band, include_rigid)?,
        eigen::solve_free_modes(sys.component(2), band, include_rigid)?,
    ])
}

/// Fixed-interface modes in `band` of both components followed by one
/// static constraint mode per global junction DoF.
pub fn craig_bampton_basis(sys: &AssembledSystem, band: BandSpec) -> Result<ReductionBasis> {
    let mut cols = Vec::new();
    let mut tags = Vec::new();
    for k in 1..=2 {
        let c = sys.component(k);
        let modes = eigen::solve_fixed_interface_modes(c, band)?;
        for i in 0..modes.len() {
            let mut local = DVector::zeros(c.ndof());
            for (r, &d) in c.interior().iter().enumerate() {
                local[d] = modes.shapes[(r, i)];
            }
            cols.push(sys.scatter(k, &local));
            tags.push(ColumnTag::FixedInterfaceMode { component: k, index: i });
        }
    }
    let constraint = static_constraint_modes(sys)?;
    for (k, &g) in sys.junction_global.iter().enumerate() {
        cols.push(constraint.column(k).into_owned());
        tags.push(ColumnTag::ConstraintMode { junction_dof: g });
    }
    Ok(ReductionBasis::new(
        linalg::columns_to_matrix(sys.n_global, &cols),
        tags,
        Vec::new(),
    ))
}

/// Ψ: unit displacement of each junction DoF with both interiors statically
/// condensed (Ψᵢ = −Kᵢᵢ⁻¹Kᵢⱼ), one global column per junction DoF.
pub fn static_constraint_modes(sys: &AssembledSystem) -> Result<DMatrix<f64>> {
    let nj = sys.junction_global.len();
    let eye = DMatrix::identity(nj, nj);
    let mut out = DMatrix::zeros(sys.n_global, nj);
    for (r, &g) in sys.junction_global.iter().enumerate() {
        out[(g, r)] = 1.0;
    }
    for k in 1..=2 {
        let c = sys.component(k);
        let x = InteriorSolver::new(c, 0.0)?.respond(&eye);
        for (r, &l) in c.interior().iter().enumerate() {
            let g = sys.map(k)[l];
            for col in 0..nj {
                out[(g, col)] = x[(r, col)];
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Cb,
    Cross,
    Svd,
    /// Free-free modes only, no coupling vectors.
    Free,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Cb => "CB",
            Method::Cross => "CROSS",
            Method::Svd => "SVD",
            Method::Free => "FREE",
        })
    }
}

/// Settings shared by the basis builders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisConfig {
    /// Study band.
    pub band: BandSpec,
    /// Band for component modes (free-free or fixed-interface); defaults to
    /// the study band.
    pub mode_band: Option<BandSpec>,
    /// Sampling circular frequencies (rad/s).
    pub omegas: Vec<f64>,
    pub sv_threshold: f64,
    /// CROSS basis size cap (surviving coupling vectors).
    pub rayleigh_keep: Option<usize>,
    pub rayleigh_policy: RayleighPolicy,
    pub drop_tol: f64,
    pub orthogonalization: Orthogonalization,
    pub include_rigid: bool,
    #[serde(skip)]
    pub exec: Exec,
}

impl BasisConfig {
    pub fn new(band: BandSpec) -> Self {
        Self {
            band,
            mode_band: None,
            omegas: default_omegas(band),
            sv_threshold: 0.2,
            rayleigh_keep: None,
            rayleigh_policy: RayleighPolicy::Smallest,
            drop_tol: 1e-8,
            orthogonalization: Orthogonalization::AgainstBase,
            include_rigid: true,
            exec: Exec::default(),
        }
    }

    pub fn mode_band(&self) -> BandSpec {
        self.mode_band.unwrap_or(self.band)
    }
}

/// {0, 2π·f_mid, 2π·f_max} in rad/s.
pub fn default_omegas(band: BandSpec) -> Vec<f64> {
    let mid = 0.5 * (band.f_min + band.f_max);
    vec![0.0, TAU * mid, TAU * band.f_max]
}

/// A basis together with the ingredients needed to rebuild or store it.
#[derive(Debug, Clone)]
pub struct BuiltBasis {
    pub method: Method,
    pub basis: ReductionBasis,
    pub free_modes: Option<[ModeSet; 2]>,
    pub interface: Option<InterfaceBasis>,
    /// Candidate pool in the order it was fed to the orthogonalization.
    pub coupling_pool: Vec<CouplingVector>,
    /// Fewer coupling vectors survived than `rayleigh_keep` asked for.
    pub short: bool,
}

pub fn build_basis(sys: &AssembledSystem, method: Method, cfg: &BasisConfig) -> Result<BuiltBasis> {
    if method == Method::Cb {
        return Ok(BuiltBasis {
            method,
            basis: craig_bampton_basis(sys, cfg.mode_band())?,
            free_modes: None,
            interface: None,
            coupling_pool: Vec::new(),
            short: false,
        });
    }
    let free_modes = solve_component_modes(sys, cfg.mode_band(), cfg.include_rigid)?;
    build_with_free_modes(sys, method, cfg, free_modes)
}

/// Free-mode methods starting from already solved component modes.
pub fn build_with_free_modes(
    sys: &AssembledSystem,
    method: Method,
    cfg: &BasisConfig,
    free_modes: [ModeSet; 2],
) -> Result<BuiltBasis> {
    let (pool, interface) = match method {
        Method::Cb => {
            return Err(Error::InvalidArgument(
                "Craig-Bampton bases are not built from free modes".into(),
            ))
        }
        Method::Free => (Vec::new(), None),
        Method::Svd => {
            let tj = svd_interface_basis(
                sys.component(1),
                sys.component(2),
                &free_modes[0],
                &free_modes[1],
                cfg.sv_threshold,
            )?;
            let pool = svd_coupling_vectors(sys, &tj, &cfg.omegas, cfg.exec)?;
            (pool, Some(tj))
        }
        Method::Cross => {
            let raw = cross_coupling_vectors(sys, &free_modes, &cfg.omegas, cfg.exec)?;
            let n = raw.len().max(1);
            let sorted = filter_by_rayleigh(&raw, cfg.band, n, cfg.rayleigh_policy)?.vectors;
            (sorted, None)
        }
    };
    Ok(from_parts(sys, method, cfg, free_modes, pool, interface))
}

pub(crate) fn from_parts(
    sys: &AssembledSystem,
    method: Method,
    cfg: &BasisConfig,
    free_modes: [ModeSet; 2],
    pool: Vec<CouplingVector>,
    interface: Option<InterfaceBasis>,
) -> BuiltBasis {
    let limit = match method {
        Method::Cross => cfg.rayleigh_keep,
        _ => None,
    };
    let basis = assemble_from_parts(sys, &free_modes, &pool, cfg, limit);
    let survivors = basis.count(|t| matches!(t, ColumnTag::CouplingVector { .. }));
    BuiltBasis {
        method,
        short: limit.is_some_and(|k| survivors < k),
        basis,
        free_modes: Some(free_modes),
        interface,
        coupling_pool: pool,
    }
}

/// T = [φ_f | coupling vectors projected off span(φ_f)].
pub fn assemble_from_parts(
    sys: &AssembledSystem,
    free_modes: &[ModeSet; 2],
    pool: &[CouplingVector],
    cfg: &BasisConfig,
    limit: Option<usize>,
) -> ReductionBasis {
    let ff = free_free_basis(sys, free_modes);
    orthogonalize(
        &ff.columns,
        &ff.tags,
        pool.iter().map(|c| (c.shape.clone(), ColumnTag::coupling(c))),
        cfg.drop_tol,
        cfg.orthogonalization,
        limit,
    )
}

/// Checks the no-empty-basis precondition shared by the reduced solvers.
pub fn require_nonempty(b: &ReductionBasis) -> Result<()> {
    if b.is_empty() {
        return Err(Error::InvalidArgument("empty reduction basis".into()));
    }
    Ok(())
}
