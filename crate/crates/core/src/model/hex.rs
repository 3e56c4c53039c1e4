//! Two boxes of 8-node trilinear hexahedra sharing a planar face.
//!
//! Box 1 spans x ∈ [0, nx₁·h], box 2 spans x ∈ [nx₁·h, (nx₁+nx₂)·h]; the
//! shared face is x = nx₁·h. Nodes are numbered `i + (nx+1)(j + (ny+1)k)`
//! with three DoF (ux, uy, uz) per node.

use nalgebra::{DMatrix, SMatrix};
use serde::{Deserialize, Serialize};

use super::{ComponentModel, DofPartition, Geometry, MaterialSpec, SymmetricTriplets};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxDivisions {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl BoxDivisions {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Self {
        Self { nx, ny, nz }
    }

    fn node(&self, i: usize, j: usize, k: usize) -> usize {
        i + (self.nx + 1) * (j + (self.ny + 1) * k)
    }

    fn node_count(&self) -> usize {
        (self.nx + 1) * (self.ny + 1) * (self.nz + 1)
    }
}

// Reference-cube corner signs in the usual hex8 order.
const CORNERS: [[f64; 3]; 8] = [
    [-1.0, -1.0, -1.0],
    [1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
    [1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0],
    [-1.0, 1.0, 1.0],
];

/// Stiffness and consistent mass of a cube hex8 of edge `h`, integrated
/// with 2×2×2 Gauss points (exact for the mass, standard for stiffness).
pub fn hex8_element_matrices(material: &MaterialSpec, h: f64) -> (SMatrix<f64, 24, 24>, SMatrix<f64, 24, 24>) {
    let (e, nu) = (material.youngs_modulus, material.poisson_ratio);
    let lambda = e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
    let mu = e / (2.0 * (1.0 + nu));
    let mut d = SMatrix::<f64, 6, 6>::zeros();
    for a in 0..3 {
        for b in 0..3 {
            d[(a, b)] = lambda;
        }
        d[(a, a)] += 2.0 * mu;
        d[(a + 3, a + 3)] = mu;
    }

    let g = 1.0 / 3.0_f64.sqrt();
    let det_j = (h / 2.0).powi(3);
    let mut ke = SMatrix::<f64, 24, 24>::zeros();
    let mut me = SMatrix::<f64, 24, 24>::zeros();
    for gp in CORNERS {
        let (xi, eta, zeta) = (gp[0] * g, gp[1] * g, gp[2] * g);
        let mut n = [0.0; 8];
        let mut dn = [[0.0; 3]; 8];
        for (a, c) in CORNERS.iter().enumerate() {
            let (fx, fy, fz) = (1.0 + c[0] * xi, 1.0 + c[1] * eta, 1.0 + c[2] * zeta);
            n[a] = fx * fy * fz / 8.0;
            // d/dx = (2/h) d/dξ on a cube
            dn[a] = [
                c[0] * fy * fz / 8.0 * 2.0 / h,
                c[1] * fx * fz / 8.0 * 2.0 / h,
                c[2] * fx * fy / 8.0 * 2.0 / h,
            ];
        }
        let mut b = SMatrix::<f64, 6, 24>::zeros();
        for a in 0..8 {
            let [dx, dy, dz] = dn[a];
            let c = 3 * a;
            b[(0, c)] = dx;
            b[(1, c + 1)] = dy;
            b[(2, c + 2)] = dz;
            b[(3, c)] = dy;
            b[(3, c + 1)] = dx;
            b[(4, c + 1)] = dz;
            b[(4, c + 2)] = dy;
            b[(5, c)] = dz;
            b[(5, c + 2)] = dx;
        }
        ke += b.transpose() * d * b * det_j;
        for a in 0..8 {
            for bb in 0..8 {
                let v = material.density * n[a] * n[bb] * det_j;
                for c in 0..3 {
                    me[(3 * a + c, 3 * bb + c)] += v;
                }
            }
        }
    }
    // Exact symmetry for the assembled matrices.
    let ke = (ke + ke.transpose()) * 0.5;
    let me = (me + me.transpose()) * 0.5;
    (ke, me)
}

/// Builds the two boxes. The shared-face grids (ny, nz) must match.
pub fn build_box_pair(
    d1: BoxDivisions,
    d2: BoxDivisions,
    material: MaterialSpec,
    element_size: f64,
) -> Result<(ComponentModel, ComponentModel)> {
    material.validate()?;
    for d in [d1, d2] {
        if d.nx == 0 || d.ny == 0 || d.nz == 0 {
            return Err(Error::InvalidArgument(format!(
                "box divisions must be ≥ 1 per axis, got ({}, {}, {})",
                d.nx, d.ny, d.nz
            )));
        }
    }
    if !(element_size > 0.0) {
        return Err(Error::InvalidArgument("element_size must be positive".into()));
    }
    if (d1.ny, d1.nz) != (d2.ny, d2.nz) {
        return Err(Error::InterfaceIncoherence(format!(
            "shared-face grids differ: {}x{} vs {}x{}",
            d1.ny, d1.nz, d2.ny, d2.nz
        )));
    }
    let (ke, me) = hex8_element_matrices(&material, element_size);
    let c1 = build_box(1, d1, 0.0, d1.nx, &ke, &me, element_size)?;
    let c2 = build_box(2, d2, d1.nx as f64 * element_size, 0, &ke, &me, element_size)?;
    Ok((c1, c2))
}

fn build_box(
    id: usize,
    div: BoxDivisions,
    x0: f64,
    face_i: usize,
    ke: &SMatrix<f64, 24, 24>,
    me: &SMatrix<f64, 24, 24>,
    h: f64,
) -> Result<ComponentModel> {
    let ndof = 3 * div.node_count();
    let mut kt = SymmetricTriplets::new(ndof);
    let mut mt = SymmetricTriplets::new(ndof);
    for k in 0..div.nz {
        for j in 0..div.ny {
            for i in 0..div.nx {
                let nodes: Vec<usize> = CORNERS
                    .iter()
                    .map(|c| {
                        let di = usize::from(c[0] > 0.0);
                        let dj = usize::from(c[1] > 0.0);
                        let dk = usize::from(c[2] > 0.0);
                        div.node(i + di, j + dj, k + dk)
                    })
                    .collect();
                for a in 0..24 {
                    let ga = 3 * nodes[a / 3] + a % 3;
                    for b in 0..=a {
                        let gb = 3 * nodes[b / 3] + b % 3;
                        kt.add(ga, gb, ke[(a, b)]);
                        mt.add(ga, gb, me[(a, b)]);
                    }
                }
            }
        }
    }
    let mut junction = Vec::new();
    for k in 0..=div.nz {
        for j in 0..=div.ny {
            let node = div.node(face_i, j, k);
            junction.extend([3 * node, 3 * node + 1, 3 * node + 2]);
        }
    }
    let mut coords = vec![[0.0; 3]; div.node_count()];
    for k in 0..=div.nz {
        for j in 0..=div.ny {
            for i in 0..=div.nx {
                coords[div.node(i, j, k)] = [x0 + i as f64 * h, j as f64 * h, k as f64 * h];
            }
        }
    }
    let (kd, md): (DMatrix<f64>, DMatrix<f64>) = (kt.to_dense(), mt.to_dense());
    Ok(
        ComponentModel::new(id, md, kd, DofPartition::from_junction(ndof, junction))?
            .with_geometry(Geometry {
                node_coords: coords,
                dofs_per_node: 3,
                element_size: h,
            })
            .with_rigid_body_count(6),
    )
}
