//! Primal assembly of two components and the dynamic stiffness operator.
//!
//! Shared junction DoF are single global unknowns. Global numbering keeps
//! component 1's local order, then appends component 2's interior DoF; the
//! junction of component 2 maps onto component 1's junction entries.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::linalg;
use crate::model::{check_coherence, ComponentModel};

#[derive(Debug, Clone)]
pub struct AssembledSystem {
    pub components: [ComponentModel; 2],
    pub mass: DMatrix<f64>,
    pub stiffness: DMatrix<f64>,
    /// Local DoF → global DoF, per component.
    pub dof_map: [Vec<usize>; 2],
    pub junction_global: Vec<usize>,
    pub n_global: usize,
}

pub fn assemble(c1: &ComponentModel, c2: &ComponentModel) -> Result<AssembledSystem> {
    check_coherence(c1, c2)?;
    let n1 = c1.ndof();
    let map1: Vec<usize> = (0..n1).collect();
    let mut map2 = vec![usize::MAX; c2.ndof()];
    let mut next = n1;
    for &d in c2.interior() {
        map2[d] = next;
        next += 1;
    }
    for (&a, &b) in c1.junction().iter().zip(c2.junction()) {
        map2[b] = map1[a];
    }
    let n = next;
    let mut mass = DMatrix::zeros(n, n);
    let mut stiffness = DMatrix::zeros(n, n);
    for (c, map) in [(c1, &map1), (c2, &map2)] {
        for j in 0..c.ndof() {
            for i in 0..c.ndof() {
                mass[(map[i], map[j])] += c.mass[(i, j)];
                stiffness[(map[i], map[j])] += c.stiffness[(i, j)];
            }
        }
    }
    let junction_global = c1.junction().iter().map(|&d| map1[d]).collect();
    Ok(AssembledSystem {
        components: [c1.clone(), c2.clone()],
        mass,
        stiffness,
        dof_map: [map1, map2],
        junction_global,
        n_global: n,
    })
}

impl AssembledSystem {
    /// Component by 1-based id.
    pub fn component(&self, k: usize) -> &ComponentModel {
        &self.components[k - 1]
    }

    pub fn map(&self, k: usize) -> &[usize] {
        &self.dof_map[k - 1]
    }

    /// Places a component-local vector in global DoF, zero elsewhere.
    pub fn scatter(&self, k: usize, local: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.n_global);
        for (l, &gi) in self.map(k).iter().enumerate() {
            g[gi] = local[l];
        }
        g
    }

    /// Restricts a global vector to component `k`'s local DoF.
    pub fn gather(&self, k: usize, global: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.map(k).len(), |l, _| global[self.map(k)[l]])
    }

    /// Global indices of the stacked-minus-duplicate ordering [i₁, j, i₂].
    pub fn condensed_order(&self) -> Vec<usize> {
        let (c1, c2) = (self.component(1), self.component(2));
        c1.interior()
            .iter()
            .map(|&d| self.map(1)[d])
            .chain(self.junction_global.iter().copied())
            .chain(c2.interior().iter().map(|&d| self.map(2)[d]))
            .collect()
    }
}

/// Z(ω) = K − ω²M with an optional elastic/interaction split.
#[derive(Debug, Clone)]
pub struct DynamicStiffness {
    pub omega: f64,
    pub matrix: DMatrix<f64>,
    pub split: Option<StackedSplit>,
}

pub fn dynamic_stiffness(sys: &AssembledSystem, omega: f64) -> DynamicStiffness {
    DynamicStiffness {
        omega,
        matrix: shifted(&sys.stiffness, &sys.mass, omega * omega),
        split: None,
    }
}

/// K − s·M, entrywise.
pub(crate) fn shifted(k: &DMatrix<f64>, m: &DMatrix<f64>, s: f64) -> DMatrix<f64> {
    if s == 0.0 {
        return k.clone();
    }
    k.zip_map(m, |kv, mv| kv - s * mv)
}

/// Z = Z_E + Z_I in the stacked ordering [i₁, j₁, i₂, j₂].
///
/// Z_E is block diagonal with each component's own dynamic stiffness.
/// Z_I lives only in the junction rows: row block j₁ receives component 2's
/// junction row (Z₂,jj on j₁, Z₂,ji on i₂), row block j₂ receives component
/// 1's (Z₁,ji on i₁, Z₁,jj on j₂). Each junction copy then carries the full
/// assembled junction equation.
#[derive(Debug, Clone)]
pub struct StackedSplit {
    pub elastic: DMatrix<f64>,
    pub interaction: DMatrix<f64>,
    pub n_interior: [usize; 2],
    pub n_junction: usize,
}

impl StackedSplit {
    pub fn stacked_operator(&self) -> DMatrix<f64> {
        &self.elastic + &self.interaction
    }

    /// Drops the duplicated j₂ rows and sums the j₁/j₂ columns, giving the
    /// assembled operator in [i₁, j, i₂] order.
    pub fn condensed(&self) -> DMatrix<f64> {
        let z = self.stacked_operator();
        let [a, b] = self.n_interior;
        let nj = self.n_junction;
        let n = a + nj + b;
        let j2 = a + nj + b; // offset of the j₂ block in the stacked layout
        let mut out = DMatrix::zeros(n, n);
        for r in 0..n {
            for c in 0..n {
                out[(r, c)] = z[(r, c)];
            }
            for k in 0..nj {
                out[(r, a + k)] += z[(r, j2 + k)];
            }
        }
        out
    }

    pub fn block_offsets(&self) -> [usize; 4] {
        let [a, b] = self.n_interior;
        let nj = self.n_junction;
        [0, a, a + nj, a + nj + b]
    }
}

pub fn split_elastic_interaction(c1: &ComponentModel, c2: &ComponentModel, omega: f64) -> Result<DynamicStiffness> {
    let sys = assemble(c1, c2)?;
    let z1 = shifted(&c1.stiffness, &c1.mass, omega * omega);
    let z2 = shifted(&c2.stiffness, &c2.mass, omega * omega);
    let o1: Vec<usize> = c1.interior().iter().chain(c1.junction()).copied().collect();
    let o2: Vec<usize> = c2.interior().iter().chain(c2.junction()).copied().collect();
    let z1s = linalg::submatrix(&z1, &o1, &o1);
    let z2s = linalg::submatrix(&z2, &o2, &o2);
    let (n1, n2) = (c1.ndof(), c2.ndof());
    let (a, b, nj) = (c1.interior().len(), c2.interior().len(), c1.junction().len());
    let mut elastic = DMatrix::zeros(n1 + n2, n1 + n2);
    elastic.view_mut((0, 0), (n1, n1)).copy_from(&z1s);
    elastic.view_mut((n1, n1), (n2, n2)).copy_from(&z2s);

    let mut interaction = DMatrix::zeros(n1 + n2, n1 + n2);
    let (j1, i2, j2) = (a, n1, n1 + b);
    for r in 0..nj {
        // row j₁: component 2's junction equation
        for c in 0..nj {
            interaction[(j1 + r, j1 + c)] = z2s[(b + r, b + c)];
            interaction[(j2 + r, j2 + c)] = z1s[(a + r, a + c)];
        }
        for c in 0..b {
            interaction[(j1 + r, i2 + c)] = z2s[(b + r, c)];
        }
        for c in 0..a {
            interaction[(j2 + r, c)] = z1s[(a + r, c)];
        }
    }
    Ok(DynamicStiffness {
        omega,
        matrix: shifted(&sys.stiffness, &sys.mass, omega * omega),
        split: Some(StackedSplit {
            elastic,
            interaction,
            n_interior: [a, b],
            n_junction: nj,
        }),
    })
}
