use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{ColumnTag, ReductionBasis};
use crate::linalg::{self, project_out};

/// How appended candidates are orthogonalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orthogonalization {
    /// Against the base and against every previously accepted candidate.
    #[default]
    Full,
    /// Against the base only; candidates keep their mutual angles.
    AgainstBase,
}

/// A candidate that did not survive projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedCandidate {
    pub tag: ColumnTag,
    /// ‖post-projection‖ / ‖pre-projection‖
    pub residual_ratio: f64,
}

/// Appends `candidates` to `base` after projecting them off its span.
///
/// The base columns are kept as given; an orthonormal copy of their span is
/// used for the projections (two MGS passes). A candidate is dropped when
/// its residual is below `drop_tol` of its original norm; survivors are
/// unit-normalized. At most `limit` candidates are accepted.
pub fn orthogonalize(
    base: &DMatrix<f64>,
    base_tags: &[ColumnTag],
    candidates: impl IntoIterator<Item = (DVector<f64>, ColumnTag)>,
    drop_tol: f64,
    mode: Orthogonalization,
    limit: Option<usize>,
) -> ReductionBasis {
    assert_eq!(base.ncols(), base_tags.len(), "one tag per base column");
    let n = base.nrows();
    let mut q = linalg::orthonormal_columns(base, 1e-12);
    let mut accepted: Vec<DVector<f64>> = Vec::new();
    let mut tags: Vec<ColumnTag> = base_tags.to_vec();
    let mut dropped = Vec::new();
    let limit = limit.unwrap_or(usize::MAX);
    for (mut v, tag) in candidates {
        if accepted.len() == limit {
            break;
        }
        let pre = v.norm();
        if pre == 0.0 {
            dropped.push(DroppedCandidate {
                tag,
                residual_ratio: 0.0,
            });
            continue;
        }
        project_out(&q, &mut v);
        let post = v.norm();
        let ratio = post / pre;
        if ratio < drop_tol {
            dropped.push(DroppedCandidate {
                tag,
                residual_ratio: ratio,
            });
            continue;
        }
        v /= post;
        if mode == Orthogonalization::Full {
            q.push(v.clone());
        }
        accepted.push(v);
        tags.push(tag);
    }
    let mut columns = DMatrix::zeros(n, base.ncols() + accepted.len());
    columns.view_mut((0, 0), (n, base.ncols())).copy_from(base);
    for (k, v) in accepted.iter().enumerate() {
        columns.set_column(base.ncols() + k, v);
    }
    ReductionBasis::new(columns, tags, dropped)
}

/// Full modified Gram-Schmidt of `candidates` against `base`.
pub fn gram_schmidt_against(
    base: &ReductionBasis,
    candidates: &[super::CouplingVector],
    drop_tol: f64,
) -> ReductionBasis {
    orthogonalize(
        &base.columns,
        &base.tags,
        candidates.iter().map(|c| (c.shape.clone(), ColumnTag::coupling(c))),
        drop_tol,
        Orthogonalization::Full,
        None,
    )
}
