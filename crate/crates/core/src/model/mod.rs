//! Component models: mass/stiffness pairs with an interior/junction split.

mod chain;
mod hex;
pub mod io;
pub mod mtx;

pub use chain::{build_chain_pair, build_chain_pair_with, ChainGeometry};
pub use hex::{build_box_pair, hex8_element_matrices, BoxDivisions};

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, SymmetricFactor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    /// Pa
    pub youngs_modulus: f64,
    /// kg/m³
    pub density: f64,
    #[serde(default)]
    pub poisson_ratio: f64,
}

impl MaterialSpec {
    pub fn steel() -> Self {
        Self {
            youngs_modulus: 210e9,
            density: 7800.0,
            poisson_ratio: 0.3,
        }
    }

    pub fn unit() -> Self {
        Self {
            youngs_modulus: 1.0,
            density: 1.0,
            poisson_ratio: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.youngs_modulus > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "youngs_modulus must be > 0, got {}",
                self.youngs_modulus
            )));
        }
        if !(self.density > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "density must be > 0, got {}",
                self.density
            )));
        }
        if !(0.0..0.5).contains(&self.poisson_ratio) {
            return Err(Error::InvalidArgument(format!(
                "poisson_ratio must lie in [0, 0.5), got {}",
                self.poisson_ratio
            )));
        }
        Ok(())
    }
}

/// Interior (`i_k`) and junction (`j_k`) DoF lists, 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DofPartition {
    pub interior: Vec<usize>,
    pub junction: Vec<usize>,
}

impl DofPartition {
    /// Junction as given, interior = every other DoF in ascending order.
    pub fn from_junction(n: usize, junction: Vec<usize>) -> Self {
        let mut is_j = vec![false; n];
        for &j in &junction {
            is_j[j] = true;
        }
        let interior = (0..n).filter(|&d| !is_j[d]).collect();
        Self { interior, junction }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let mut seen = vec![false; n];
        for &d in self.interior.iter().chain(&self.junction) {
            if d >= n {
                return Err(Error::InvalidArgument(format!(
                    "partition index {d} out of range for {n} DoF"
                )));
            }
            if seen[d] {
                return Err(Error::InvalidArgument(format!(
                    "DoF {d} appears twice in the partition"
                )));
            }
            seen[d] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::InvalidArgument(format!(
                "DoF {missing} is neither interior nor junction"
            )));
        }
        if self.junction.is_empty() {
            return Err(Error::InvalidArgument("junction set is empty".into()));
        }
        Ok(())
    }
}

/// Node positions backing a generated component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub node_coords: Vec<[f64; 3]>,
    pub dofs_per_node: usize,
    pub element_size: f64,
}

impl Geometry {
    pub fn dof_node(&self, dof: usize) -> (usize, usize) {
        (dof / self.dofs_per_node, dof % self.dofs_per_node)
    }

    /// Rigid-body displacement fields: one translation for axial chains,
    /// three translations and three rotations for 3D solids.
    pub fn rigid_body_vectors(&self) -> Vec<DVector<f64>> {
        let n = self.node_coords.len() * self.dofs_per_node;
        if self.dofs_per_node == 1 {
            return vec![DVector::from_element(n, 1.0)];
        }
        let count = self.node_coords.len() as f64;
        let mut c = [0.0; 3];
        for x in &self.node_coords {
            for d in 0..3 {
                c[d] += x[d] / count;
            }
        }
        let mut out = Vec::with_capacity(6);
        for dir in 0..3 {
            out.push(DVector::from_fn(n, |i, _| if i % 3 == dir { 1.0 } else { 0.0 }));
        }
        for axis in 0..3 {
            let mut v = DVector::zeros(n);
            for (node, x) in self.node_coords.iter().enumerate() {
                let r = [x[0] - c[0], x[1] - c[1], x[2] - c[2]];
                // e_axis × r
                let u = match axis {
                    0 => [0.0, -r[2], r[1]],
                    1 => [r[2], 0.0, -r[0]],
                    _ => [-r[1], r[0], 0.0],
                };
                for d in 0..3 {
                    v[3 * node + d] = u[d];
                }
            }
            out.push(v);
        }
        out
    }
}

/// One substructure Σ_k.
#[derive(Debug, Clone, PartialEq)]
pub struct ComponentModel {
    pub id: usize,
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    pub partition: DofPartition,
    pub geometry: Option<Geometry>,
    /// Rigid-body count declared by the generator, if known.
    pub rigid_body_count: Option<usize>,
}

impl ComponentModel {
    /// Builds a component and checks its invariants: symmetry within
    /// 1e-10 relative, M positive definite, K positive semi-definite.
    pub fn new(id: usize, mass: DMatrix<f64>, stiffness: DMatrix<f64>, partition: DofPartition) -> Result<Self> {
        let n = mass.nrows();
        if mass.ncols() != n || stiffness.nrows() != n || stiffness.ncols() != n {
            return Err(Error::InvalidArgument(format!(
                "mass is {}x{}, stiffness is {}x{}; both must be square and equal",
                mass.nrows(),
                mass.ncols(),
                stiffness.nrows(),
                stiffness.ncols()
            )));
        }
        partition.validate(n)?;
        for (name, a) in [("mass", &mass), ("stiffness", &stiffness)] {
            let (d, i, j) = linalg::worst_asymmetry(a);
            if d > 1e-10 * linalg::max_abs(a) {
                return Err(Error::Validity(format!(
                    "{name} matrix of component {id} is not symmetric: \
                     |a[{i},{j}] - a[{j},{i}]| = {d:.3e}"
                )));
            }
        }
        if mass.clone().cholesky().is_none() {
            return Err(Error::Definiteness(format!(
                "mass matrix of component {id} is not positive definite"
            )));
        }
        let inertia = SymmetricFactor::new(&stiffness)?.inertia(1e-10);
        if inertia.negative > 0 {
            return Err(Error::Validity(format!(
                "stiffness matrix of component {id} has {} negative eigenvalues",
                inertia.negative
            )));
        }
        Ok(Self {
            id,
            mass,
            stiffness,
            partition,
            geometry: None,
            rigid_body_count: None,
        })
    }

    pub fn with_geometry(mut self, geometry: Geometry) -> Self {
        self.geometry = Some(geometry);
        self
    }

    pub fn with_rigid_body_count(mut self, count: usize) -> Self {
        self.rigid_body_count = Some(count);
        self
    }

    pub fn ndof(&self) -> usize {
        self.mass.nrows()
    }

    pub fn interior(&self) -> &[usize] {
        &self.partition.interior
    }

    pub fn junction(&self) -> &[usize] {
        &self.partition.junction
    }

    /// (K_ii, K_ij, M_ii, M_ij) blocks.
    pub fn blocks(&self) -> ComponentBlocks {
        let (i, j) = (self.interior(), self.junction());
        ComponentBlocks {
            k_ii: linalg::submatrix(&self.stiffness, i, i),
            k_ij: linalg::submatrix(&self.stiffness, i, j),
            m_ii: linalg::submatrix(&self.mass, i, i),
            m_ij: linalg::submatrix(&self.mass, i, j),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ComponentBlocks {
    pub k_ii: DMatrix<f64>,
    pub k_ij: DMatrix<f64>,
    pub m_ii: DMatrix<f64>,
    pub m_ij: DMatrix<f64>,
}

/// Checks that two components can be tied: equal junction lengths and, when
/// both carry geometry, coincident nodes and matching directions.
pub fn check_coherence(c1: &ComponentModel, c2: &ComponentModel) -> Result<()> {
    let (j1, j2) = (c1.junction(), c2.junction());
    if j1.len() != j2.len() {
        return Err(Error::InterfaceIncoherence(format!(
            "junction sizes differ: component {} has {}, component {} has {}",
            c1.id,
            j1.len(),
            c2.id,
            j2.len()
        )));
    }
    if let (Some(g1), Some(g2)) = (&c1.geometry, &c2.geometry) {
        let tol = 1e-12 * g1.element_size.max(g2.element_size);
        for (k, (&a, &b)) in j1.iter().zip(j2).enumerate() {
            let (n1, d1) = g1.dof_node(a);
            let (n2, d2) = g2.dof_node(b);
            let (x1, x2) = (g1.node_coords[n1], g2.node_coords[n2]);
            let dist = ((x1[0] - x2[0]).powi(2) + (x1[1] - x2[1]).powi(2) + (x1[2] - x2[2]).powi(2)).sqrt();
            if d1 != d2 || dist > tol {
                return Err(Error::InterfaceIncoherence(format!(
                    "junction entry {k}: DoF {a} of component {} and DoF {b} of component {} \
                     are not coincident (distance {dist:.3e}, directions {d1}/{d2})",
                    c1.id, c2.id
                )));
            }
        }
    }
    Ok(())
}

/// Symmetric sparse accumulator; stores the lower triangle only.
#[derive(Debug, Clone, Default)]
pub struct SymmetricTriplets {
    n: usize,
    entries: BTreeMap<(usize, usize), f64>,
}

impl SymmetricTriplets {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: BTreeMap::new(),
        }
    }

    /// Adds `v` at (i, j); the mirrored entry is implied.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let key = if i >= j { (i, j) } else { (j, i) };
        *self.entries.entry(key).or_insert(0.0) += v;
    }

    pub fn nnz_lower(&self) -> usize {
        self.entries.len()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for (&(i, j), &v) in &self.entries {
            a[(i, j)] = v;
            a[(j, i)] = v;
        }
        a
    }
}
