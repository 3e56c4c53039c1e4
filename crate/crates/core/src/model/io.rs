//! Component files: two Matrix Market matrices plus a JSON partition file
//! (`interior` and `junction` arrays, 0-based, with optional geometry).

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::mtx::{self, Symmetry};
use super::{ComponentModel, DofPartition, Geometry};
use crate::error::{Error, Result};
use crate::linalg;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionFile {
    pub interior: Vec<usize>,
    pub junction: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<Geometry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rigid_body_count: Option<usize>,
}

/// Paths written by [`export_component`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentFiles {
    pub mass: PathBuf,
    pub stiffness: PathBuf,
    pub partition: PathBuf,
}

impl ComponentFiles {
    pub fn in_dir(dir: &Path, stem: &str) -> Self {
        Self {
            mass: dir.join(format!("{stem}_mass.mtx")),
            stiffness: dir.join(format!("{stem}_stiffness.mtx")),
            partition: dir.join(format!("{stem}_partition.json")),
        }
    }
}

pub fn export_component(c: &ComponentModel, files: &ComponentFiles) -> Result<()> {
    mtx::write_symmetric(&files.mass, &c.mass)?;
    mtx::write_symmetric(&files.stiffness, &c.stiffness)?;
    let p = PartitionFile {
        interior: c.partition.interior.clone(),
        junction: c.partition.junction.clone(),
        geometry: c.geometry.clone(),
        rigid_body_count: c.rigid_body_count,
    };
    let json = serde_json::to_string_pretty(&p).expect("partition serializes");
    fs::write(&files.partition, json).map_err(|e| Error::io(&files.partition, e))
}

pub fn read_partition(path: &Path) -> Result<PartitionFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

fn read_symmetric_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let f = mtx::read(path)?;
    if f.matrix.nrows() != f.matrix.ncols() {
        return Err(Error::format(
            path,
            format!("matrix is {}x{}, expected square", f.matrix.nrows(), f.matrix.ncols()),
        ));
    }
    if f.symmetry == Symmetry::General {
        let (d, i, j) = linalg::worst_asymmetry(&f.matrix);
        if d > 1e-10 * linalg::max_abs(&f.matrix) {
            return Err(Error::format(
                path,
                format!(
                    "matrix is not symmetric; worst entry ({i}, {j}): {:e} vs {:e}",
                    f.matrix[(i, j)],
                    f.matrix[(j, i)]
                ),
            ));
        }
        return Ok(linalg::symmetrize(&f.matrix));
    }
    Ok(f.matrix)
}

/// Loads and validates a component; nothing is returned unless every
/// invariant holds.
pub fn ingest_component(id: usize, files: &ComponentFiles) -> Result<ComponentModel> {
    let mass = read_symmetric_matrix(&files.mass)?;
    let stiffness = read_symmetric_matrix(&files.stiffness)?;
    if mass.nrows() != stiffness.nrows() {
        return Err(Error::InvalidArgument(format!(
            "mass has {} DoF but stiffness has {}",
            mass.nrows(),
            stiffness.nrows()
        )));
    }
    let p = read_partition(&files.partition)?;
    let partition = DofPartition {
        interior: p.interior,
        junction: p.junction,
    };
    let mut c = ComponentModel::new(id, mass, stiffness, partition)?;
    if let Some(g) = p.geometry {
        if g.node_coords.len() * g.dofs_per_node != c.ndof() {
            return Err(Error::format(
                &files.partition,
                "geometry does not match the matrix dimension",
            ));
        }
        c = c.with_geometry(g);
    }
    c.rigid_body_count = p.rigid_body_count;
    Ok(c)
}

fn hash_matrix(h: &mut Sha256, a: &DMatrix<f64>) {
    h.update((a.nrows() as u64).to_le_bytes());
    h.update((a.ncols() as u64).to_le_bytes());
    for v in a.iter() {
        h.update(v.to_bits().to_le_bytes());
    }
}

fn hash_indices(h: &mut Sha256, v: &[usize]) {
    h.update((v.len() as u64).to_le_bytes());
    for &i in v {
        h.update((i as u64).to_le_bytes());
    }
}

/// SHA-256 of the mass and stiffness bits.
pub fn matrix_digest(c: &ComponentModel) -> String {
    let mut h = Sha256::new();
    hash_matrix(&mut h, &c.mass);
    hash_matrix(&mut h, &c.stiffness);
    hex::encode(h.finalize())
}

/// SHA-256 of the interior and junction lists.
pub fn partition_digest(c: &ComponentModel) -> String {
    let mut h = Sha256::new();
    hash_indices(&mut h, &c.partition.interior);
    hash_indices(&mut h, &c.partition.junction);
    hex::encode(h.finalize())
}

/// Fingerprint of a component pair: matrices and partitions of both.
pub fn pair_fingerprint(c1: &ComponentModel, c2: &ComponentModel) -> String {
    let mut h = Sha256::new();
    for c in [c1, c2] {
        h.update(matrix_digest(c).as_bytes());
        h.update(partition_digest(c).as_bytes());
    }
    hex::encode(h.finalize())
}
