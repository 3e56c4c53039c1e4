use super::{ComponentModel, DofPartition, Geometry, MaterialSpec, SymmetricTriplets};
use crate::error::{Error, Result};

/// Cross-section and element length of an axial chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainGeometry {
    pub element_length: f64,
    pub area: f64,
}

impl Default for ChainGeometry {
    fn default() -> Self {
        Self {
            element_length: 1.0,
            area: 1.0,
        }
    }
}

/// Two axial spring-mass chains tied end to end, unit geometry.
pub fn build_chain_pair(n1: usize, n2: usize, material: MaterialSpec) -> Result<(ComponentModel, ComponentModel)> {
    build_chain_pair_with(n1, n2, material, ChainGeometry::default())
}

/// Component 1 ends at its junction node (last node), component 2 starts at
/// it (first node). Masses are lumped: ρ·A·h per element split equally
/// between its two nodes.
pub fn build_chain_pair_with(
    n1: usize,
    n2: usize,
    material: MaterialSpec,
    geometry: ChainGeometry,
) -> Result<(ComponentModel, ComponentModel)> {
    material.validate()?;
    if n1 < 2 || n2 < 2 {
        return Err(Error::InvalidArgument(format!(
            "chains need at least 2 elements each, got {n1} and {n2}"
        )));
    }
    if !(geometry.element_length > 0.0 && geometry.area > 0.0) {
        return Err(Error::InvalidArgument(
            "element length and area must be positive".into(),
        ));
    }
    let c1 = chain(1, n1, 0.0, n1, material, geometry)?;
    let c2 = chain(2, n2, n1 as f64 * geometry.element_length, 0, material, geometry)?;
    Ok((c1, c2))
}

fn chain(
    id: usize,
    elements: usize,
    x0: f64,
    junction_node: usize,
    material: MaterialSpec,
    geometry: ChainGeometry,
) -> Result<ComponentModel> {
    let h = geometry.element_length;
    let k = material.youngs_modulus * geometry.area / h;
    let m = material.density * geometry.area * h;
    let n = elements + 1;
    let mut kt = SymmetricTriplets::new(n);
    let mut mt = SymmetricTriplets::new(n);
    for e in 0..elements {
        kt.add(e, e, k);
        kt.add(e + 1, e + 1, k);
        kt.add(e + 1, e, -k);
        mt.add(e, e, 0.5 * m);
        mt.add(e + 1, e + 1, 0.5 * m);
    }
    let partition = DofPartition::from_junction(n, vec![junction_node]);
    let model = ComponentModel::new(id, mt.to_dense(), kt.to_dense(), partition)?
        .with_geometry(Geometry {
            node_coords: (0..n).map(|i| [x0 + i as f64 * h, 0.0, 0.0]).collect(),
            dofs_per_node: 1,
            element_size: h,
        })
        .with_rigid_body_count(1);
    Ok(model)
}
