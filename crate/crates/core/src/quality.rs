//! Modal assurance criterion, mode pairing and method comparison.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bases::ReductionBasis;
use crate::coupling::AssembledSystem;
use crate::eigen::{self, BandSpec, ModeSet};
use crate::enrich::IndicatorReport;
use crate::error::{Error, Result};
use crate::parallel::{self, Exec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacMatrix {
    /// Row i, column j: mac(uᵢ, vⱼ).
    pub values: DMatrix<f64>,
    pub row_context: String,
    pub col_context: String,
}

impl MacMatrix {
    /// CSV grid, one row per `u` vector.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        for i in 0..self.values.nrows() {
            let row: Vec<String> = self.values.row(i).iter().map(|v| format!("{v:e}")).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// |uᵀv|² / ((uᵀu)(vᵀv)) for every column pair of `u` and `v`.
pub fn mac(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<MacMatrix> {
    mac_with(u, v, Exec::default())
}

pub fn mac_with(u: &DMatrix<f64>, v: &DMatrix<f64>, exec: Exec) -> Result<MacMatrix> {
    if u.nrows() != v.nrows() {
        return Err(Error::InvalidArgument(format!(
            "vector lengths differ: {} vs {}",
            u.nrows(),
            v.nrows()
        )));
    }
    let nu = column_norms2(u, "row")?;
    let nv = column_norms2(v, "column")?;
    let rows = parallel::map_range(exec, u.ncols(), |i| {
        let ui = u.column(i);
        (0..v.ncols())
            .map(|j| {
                let d = ui.dot(&v.column(j));
                (d * d / (nu[i] * nv[j])).min(1.0)
            })
            .collect::<Vec<f64>>()
    });
    Ok(MacMatrix {
        values: DMatrix::from_fn(u.ncols(), v.ncols(), |i, j| rows[i][j]),
        row_context: String::new(),
        col_context: String::new(),
    })
}

fn column_norms2(a: &DMatrix<f64>, side: &str) -> Result<Vec<f64>> {
    a.column_iter()
        .enumerate()
        .map(|(j, c)| {
            let n = c.norm_squared();
            if n > 0.0 {
                Ok(n)
            } else {
                Err(Error::UndefinedMac(format!("{side} vector {j}")))
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PairingRule {
    /// Repeatedly take the largest remaining MAC entry.
    #[default]
    Greedy,
    /// k-th flexible full mode with k-th flexible reduced mode.
    Sorted,
}

impl std::str::FromStr for PairingRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(PairingRule::Greedy),
            "sorted" => Ok(PairingRule::Sorted),
            _ => Err(Error::InvalidArgument(format!("unknown pairing rule `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pair {
    pub full: usize,
    pub reduced: usize,
    pub mac: f64,
    pub full_hz: f64,
    pub reduced_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pairing {
    /// Sorted by full index.
    pub pairs: Vec<Pair>,
    /// Flexible full modes without a partner.
    pub unpaired_full: Vec<usize>,
    /// Percent; unpaired full modes contribute 0.
    pub mac_average: f64,
    pub rule: PairingRule,
    pub skip_rigid: bool,
    /// Over the modes considered, rows = full, cols = reduced.
    pub mac_matrix: MacMatrix,
}

/// Pairs reduced modes to full modes and averages the paired MAC values over
/// every considered full mode.
pub fn pair_and_average(full: &ModeSet, reduced: &ModeSet, skip_rigid: bool, rule: PairingRule) -> Result<Pairing> {
    let fi: Vec<usize> = considered(full, skip_rigid);
    let ri: Vec<usize> = considered(reduced, skip_rigid);
    if fi.is_empty() || ri.is_empty() {
        return Err(Error::InvalidArgument("no flexible modes to pair on one side".into()));
    }
    let fs = full.select(&fi).shapes;
    let rs = reduced.select(&ri).shapes;
    let mut m = mac(&fs, &rs)?;
    m.row_context = "full".into();
    m.col_context = "reduced".into();
    let local: Vec<(usize, usize)> = match rule {
        PairingRule::Greedy => greedy(&m.values),
        PairingRule::Sorted => (0..fi.len().min(ri.len())).map(|k| (k, k)).collect(),
    };
    let mut pairs: Vec<Pair> = local
        .iter()
        .map(|&(a, b)| Pair {
            full: fi[a],
            reduced: ri[b],
            mac: m.values[(a, b)],
            full_hz: full.frequencies[fi[a]],
            reduced_hz: reduced.frequencies[ri[b]],
        })
        .collect();
    pairs.sort_by_key(|p| p.full);
    let unpaired_full = fi
        .iter()
        .copied()
        .filter(|i| !pairs.iter().any(|p| p.full == *i))
        .collect();
    let total: f64 = pairs.iter().map(|p| p.mac).sum();
    Ok(Pairing {
        mac_average: 100.0 * total / fi.len() as f64,
        pairs,
        unpaired_full,
        rule,
        skip_rigid,
        mac_matrix: m,
    })
}

fn considered(modes: &ModeSet, skip_rigid: bool) -> Vec<usize> {
    let start = if skip_rigid { modes.rigid_count } else { 0 };
    (start..modes.len()).collect()
}

fn greedy(values: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let mut entries: Vec<(usize, usize)> = (0..values.nrows())
        .flat_map(|i| (0..values.ncols()).map(move |j| (i, j)))
        .collect();
    entries.sort_by(|a, b| values[*b].total_cmp(&values[*a]).then(a.cmp(b)));
    let mut row_used = vec![false; values.nrows()];
    let mut col_used = vec![false; values.ncols()];
    let mut out = Vec::new();
    for (i, j) in entries {
        if !row_used[i] && !col_used[j] {
            row_used[i] = true;
            col_used[j] = true;
            out.push((i, j));
        }
    }
    out
}

/// One scored reduction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    /// CB, CROSS, SVD, FREE, or an enriched variant such as "SVD+enriched".
    pub method: String,
    pub model_fingerprint: String,
    pub dof_full: usize,
    pub dof_reduced: usize,
    #[serde(with = "extended_f64")]
    pub condition_number: f64,
    /// Basis directions discarded as numerically dependent before the
    /// reduced solve.
    #[serde(default)]
    pub deflated_directions: usize,
    /// Reduced frequencies inside the study band.
    pub reduced_frequencies_hz: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mac_average: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pairing: Option<Pairing>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indicator: Option<IndicatorReport>,
}

/// JSON has no infinity; a rank-deficient basis has an infinite condition
/// number, written as the string "inf".
mod extended_f64 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(v) => Ok(v),
            Repr::Text(t) => t.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Reduced modes are solved up to this multiple of the band's upper edge
/// before pairing, since Ritz frequencies sit above the exact ones.
pub const SCORING_MARGIN: f64 = 1.1;

pub fn scoring_band(band: BandSpec) -> BandSpec {
    BandSpec {
        f_min: band.f_min,
        f_max: band.f_max * SCORING_MARGIN,
    }
}

/// Reduced solve of `basis`, falling back to a deflated solve when the
/// basis is numerically rank-deficient; the second value counts the
/// discarded directions.
pub fn reduced_modes(sys: &AssembledSystem, basis: &ReductionBasis, band: BandSpec) -> Result<(ModeSet, usize)> {
    match eigen::solve_reduced(&basis.columns, sys, band) {
        Ok(m) => Ok((m, 0)),
        Err(Error::Conditioning { condition_number }) => {
            log::warn!("basis condition number {condition_number:.3e}; deflating dependent directions");
            eigen::solve_reduced_deflated(&basis.columns, sys, band, eigen::RANK_TOLERANCE)
        }
        Err(e) => Err(e),
    }
}

/// What a scoring run needs besides the basis.
pub struct ScoreInput<'a> {
    pub method: String,
    pub model_fingerprint: String,
    pub band: BandSpec,
    /// Full-model modes in the study band; `None` skips MAC scoring.
    pub full: Option<&'a ModeSet>,
    pub rule: PairingRule,
}

/// Solves the reduced model of `basis` and scores it against the full
/// modes when they are given. Returns the report and the reduced modes in
/// the scoring band.
pub fn score_basis(
    sys: &AssembledSystem,
    basis: &ReductionBasis,
    input: &ScoreInput<'_>,
) -> Result<(QualityReport, ModeSet)> {
    let (reduced, deflated) = reduced_modes(sys, basis, scoring_band(input.band))?;
    let pairing = match input.full {
        Some(full) => Some(pair_and_average(full, &reduced, true, input.rule)?),
        None => None,
    };
    let report = QualityReport {
        method: input.method.clone(),
        model_fingerprint: input.model_fingerprint.clone(),
        dof_full: sys.n_global,
        dof_reduced: basis.len(),
        condition_number: basis.condition_number,
        deflated_directions: deflated,
        reduced_frequencies_hz: reduced
            .frequencies
            .iter()
            .copied()
            .filter(|&f| input.band.contains(f))
            .collect(),
        mac_average: pairing.as_ref().map(|p| p.mac_average),
        pairing,
        indicator: None,
    };
    Ok((report, reduced))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub dof_reduced: usize,
    pub mac_average: Option<f64>,
    #[serde(with = "extended_f64")]
    pub condition_number: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub model_fingerprint: String,
    pub rows: Vec<ComparisonRow>,
}

/// Rows sorted by MAC average, best first; reports without MAC data last.
/// Reports built on different models are refused.
pub fn compare_methods(reports: &[QualityReport]) -> Result<ComparisonTable> {
    let Some(first) = reports.first() else {
        return Err(Error::InvalidArgument("no reports to compare".into()));
    };
    if let Some(other) = reports.iter().find(|r| r.model_fingerprint != first.model_fingerprint) {
        return Err(Error::Validity(format!(
            "reports are not comparable: model fingerprints {} and {} differ",
            first.model_fingerprint, other.model_fingerprint
        )));
    }
    let mut rows: Vec<ComparisonRow> = reports
        .iter()
        .map(|r| ComparisonRow {
            method: r.method.clone(),
            dof_reduced: r.dof_reduced,
            mac_average: r.mac_average,
            condition_number: r.condition_number,
        })
        .collect();
    rows.sort_by(|a, b| {
        let key = |r: &ComparisonRow| r.mac_average.unwrap_or(f64::NEG_INFINITY);
        key(b).total_cmp(&key(a))
    });
    Ok(ComparisonTable {
        model_fingerprint: first.model_fingerprint.clone(),
        rows,
    })
}

impl ComparisonTable {
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{:<16} {:>12} {:>12} {:>16}\n",
            "method", "reduced DoF", "MAC avg %", "condition"
        );
        for r in &self.rows {
            let mac = r.mac_average.map_or_else(|| "-".to_string(), |m| format!("{m:.2}"));
            let _ = writeln!(
                s,
                "{:<16} {:>12} {:>12} {:>16.4e}",
                r.method, r.dof_reduced, mac, r.condition_number
            );
        }
        s
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("method,dof_reduced,mac_average,condition_number\n");
        for r in &self.rows {
            let mac = r.mac_average.map_or_else(String::new, |m| format!("{m:e}"));
            let _ = writeln!(s, "{},{},{},{:e}", r.method, r.dof_reduced, mac, r.condition_number);
        }
        s
    }
}
