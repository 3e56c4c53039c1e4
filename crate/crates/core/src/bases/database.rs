//! Reusable store of free-free modes and coupling vectors.
//!
//! On disk a database is a directory holding `manifest.json` plus Matrix
//! Market files for the mode shapes, coupling vectors and interface basis.
//! Moving an interface changes the partitions but not the component
//! matrices, so free modes stay valid while coupling vectors do not.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{
    build_with_free_modes, from_parts, BasisConfig, BuiltBasis, CouplingMethod, CouplingSource, CouplingVector,
    InterfaceBasis, Method,
};
use crate::coupling::AssembledSystem;
use crate::eigen::{DofContext, ModeSet};
use crate::error::{Error, Result};
use crate::model::io::{matrix_digest, partition_digest};
use crate::model::{mtx, ComponentModel};

const FORMAT_VERSION: u32 = 1;
const MANIFEST: &str = "manifest.json";
const COUPLING: &str = "coupling.mtx";
const INTERFACE: &str = "interface.mtx";

fn free_modes_file(k: usize) -> String {
    format!("free_modes_{k}.mtx")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    /// Per component: digest of (M, K).
    pub matrices: [String; 2],
    /// Per component: digest of the interior/junction lists.
    pub partitions: [String; 2],
}

impl Fingerprint {
    pub fn of(c1: &ComponentModel, c2: &ComponentModel) -> Self {
        Self {
            matrices: [matrix_digest(c1), matrix_digest(c2)],
            partitions: [partition_digest(c1), partition_digest(c2)],
        }
    }

    pub fn summary(&self) -> String {
        let all = [
            &self.matrices[0],
            &self.partitions[0],
            &self.matrices[1],
            &self.partitions[1],
        ];
        all.iter().map(|d| &d[..8.min(d.len())]).collect::<Vec<_>>().join(":")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CouplingDatabase {
    pub method: Method,
    pub settings: BasisConfig,
    pub fingerprint: Fingerprint,
    pub free_modes: [ModeSet; 2],
    /// Empty after a partial reuse.
    pub coupling_vectors: Vec<CouplingVector>,
    pub interface: Option<InterfaceBasis>,
}

impl CouplingDatabase {
    pub fn from_built(
        built: &BuiltBasis,
        settings: &BasisConfig,
        c1: &ComponentModel,
        c2: &ComponentModel,
    ) -> Result<Self> {
        let Some(free_modes) = built.free_modes.clone() else {
            return Err(Error::InvalidArgument(format!(
                "{} bases carry no free modes to store",
                built.method
            )));
        };
        Ok(Self {
            method: built.method,
            settings: settings.clone(),
            fingerprint: Fingerprint::of(c1, c2),
            free_modes,
            coupling_vectors: built.coupling_pool.clone(),
            interface: built.interface.clone(),
        })
    }

    /// Rebuilds the basis from stored data, recomputing coupling vectors
    /// only when none are stored.
    pub fn rebuild(&self, sys: &AssembledSystem) -> Result<BuiltBasis> {
        let fp = Fingerprint::of(sys.component(1), sys.component(2));
        if fp.matrices != self.fingerprint.matrices {
            return Err(stale(&self.fingerprint, &fp));
        }
        let needs_coupling = self.method != Method::Free;
        if needs_coupling && (self.coupling_vectors.is_empty() || fp != self.fingerprint) {
            return build_with_free_modes(sys, self.method, &self.settings, self.free_modes.clone());
        }
        Ok(from_parts(
            sys,
            self.method,
            &self.settings,
            self.free_modes.clone(),
            self.coupling_vectors.clone(),
            self.interface.clone(),
        ))
    }
}

fn stale(stored: &Fingerprint, actual: &Fingerprint) -> Error {
    Error::StaleDatabase {
        stored: stored.summary(),
        actual: actual.summary(),
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ModeMeta {
    frequencies: Vec<f64>,
    eigenvalues: Vec<f64>,
    rigid_count: usize,
    dof_context: DofContext,
}

#[derive(Debug, Serialize, Deserialize)]
struct CouplingMeta {
    omega: f64,
    rayleigh_root: f64,
    method: CouplingMethod,
    singular_value: Option<f64>,
    source: CouplingSource,
}

#[derive(Debug, Serialize, Deserialize)]
struct InterfaceMeta {
    singular_values: Vec<f64>,
    threshold: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    format_version: u32,
    method: Method,
    settings: BasisConfig,
    fingerprint: Fingerprint,
    free_modes: [ModeMeta; 2],
    coupling: Vec<CouplingMeta>,
    interface: Option<InterfaceMeta>,
}

pub fn save_database(db: &CouplingDatabase, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = |m: &ModeSet| ModeMeta {
        frequencies: m.frequencies.clone(),
        eigenvalues: m.eigenvalues.clone(),
        rigid_count: m.rigid_count,
        dof_context: m.dof_context.clone(),
    };
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        method: db.method,
        settings: db.settings.clone(),
        fingerprint: db.fingerprint.clone(),
        free_modes: [meta(&db.free_modes[0]), meta(&db.free_modes[1])],
        coupling: db
            .coupling_vectors
            .iter()
            .map(|c| CouplingMeta {
                omega: c.omega,
                rayleigh_root: c.rayleigh_root,
                method: c.method,
                singular_value: c.singular_value,
                source: c.source,
            })
            .collect(),
        interface: db.interface.as_ref().map(|i| InterfaceMeta {
            singular_values: i.singular_values.clone(),
            threshold: i.threshold,
        }),
    };
    for (k, m) in db.free_modes.iter().enumerate() {
        mtx::write_dense(&dir.join(free_modes_file(k + 1)), &m.shapes)?;
    }
    let n = db.coupling_vectors.first().map_or(0, |c| c.shape.len());
    let mut coupling = DMatrix::zeros(n, db.coupling_vectors.len());
    for (j, c) in db.coupling_vectors.iter().enumerate() {
        coupling.set_column(j, &c.shape);
    }
    mtx::write_dense(&dir.join(COUPLING), &coupling)?;
    if let Some(i) = &db.interface {
        mtx::write_dense(&dir.join(INTERFACE), &i.columns)?;
    }
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    let path = dir.join(MANIFEST);
    fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}

/// Reads a database without checking it against any components.
pub fn read_database(dir: &Path) -> Result<CouplingDatabase> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::format(
            &path,
            format!("unsupported format version {}", manifest.format_version),
        ));
    }
    let mut free_modes = Vec::with_capacity(2);
    for (k, meta) in manifest.free_modes.into_iter().enumerate() {
        let file = dir.join(free_modes_file(k + 1));
        let shapes = mtx::read(&file)?.matrix;
        if shapes.ncols() != meta.frequencies.len() || meta.eigenvalues.len() != meta.frequencies.len() {
            return Err(Error::format(
                &file,
                format!(
                    "{} shape columns for {} frequencies",
                    shapes.ncols(),
                    meta.frequencies.len()
                ),
            ));
        }
        free_modes.push(ModeSet {
            frequencies: meta.frequencies,
            eigenvalues: meta.eigenvalues,
            shapes,
            dof_context: meta.dof_context,
            rigid_count: meta.rigid_count,
        });
    }
    let file = dir.join(COUPLING);
    let coupling = mtx::read(&file)?.matrix;
    if coupling.ncols() != manifest.coupling.len() {
        return Err(Error::format(
            &file,
            format!(
                "{} columns for {} coupling vectors in the manifest",
                coupling.ncols(),
                manifest.coupling.len()
            ),
        ));
    }
    let coupling_vectors = manifest
        .coupling
        .into_iter()
        .enumerate()
        .map(|(j, m)| CouplingVector {
            shape: DVector::from(coupling.column(j).into_owned()),
            omega: m.omega,
            rayleigh_root: m.rayleigh_root,
            method: m.method,
            singular_value: m.singular_value,
            source: m.source,
        })
        .collect();
    let interface = match manifest.interface {
        None => None,
        Some(meta) => Some(InterfaceBasis {
            columns: mtx::read(&dir.join(INTERFACE))?.matrix,
            singular_values: meta.singular_values,
            threshold: meta.threshold,
        }),
    };
    let [f1, f2]: [ModeSet; 2] = free_modes.try_into().expect("two components");
    Ok(CouplingDatabase {
        method: manifest.method,
        settings: manifest.settings,
        fingerprint: manifest.fingerprint,
        free_modes: [f1, f2],
        coupling_vectors,
        interface,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoadMode {
    /// Any fingerprint mismatch is an error.
    Strict,
    /// Matching matrices suffice; coupling data is dropped if the
    /// partitions changed.
    ReusePartial,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LoadStatus {
    Identical,
    Partial {
        retained_free_mode_sets: usize,
        discarded_coupling_vectors: usize,
    },
}

impl std::fmt::Display for LoadStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LoadStatus::Identical => f.write_str("identical"),
            LoadStatus::Partial {
                retained_free_mode_sets,
                discarded_coupling_vectors,
            } => write!(
                f,
                "retained: free modes ({retained_free_mode_sets} sets); discarded: \
                 {discarded_coupling_vectors} coupling vectors"
            ),
        }
    }
}

/// Reads a database and checks it against the supplied components.
pub fn load_database(
    dir: &Path,
    c1: &ComponentModel,
    c2: &ComponentModel,
    mode: LoadMode,
) -> Result<(CouplingDatabase, LoadStatus)> {
    let mut db = read_database(dir)?;
    let actual = Fingerprint::of(c1, c2);
    if actual == db.fingerprint {
        return Ok((db, LoadStatus::Identical));
    }
    if mode == LoadMode::Strict || actual.matrices != db.fingerprint.matrices {
        return Err(stale(&db.fingerprint, &actual));
    }
    for (k, (m, c)) in db.free_modes.iter().zip([c1, c2]).enumerate() {
        if m.shapes.nrows() != c.ndof() {
            return Err(Error::Validity(format!(
                "stored free modes of component {} have {} rows, component has {} DoF",
                k + 1,
                m.shapes.nrows(),
                c.ndof()
            )));
        }
    }
    let discarded = db.coupling_vectors.len();
    db.coupling_vectors.clear();
    db.interface = None;
    db.fingerprint = actual;
    Ok((
        db,
        LoadStatus::Partial {
            retained_free_mode_sets: 2,
            discarded_coupling_vectors: discarded,
        },
    ))
}
