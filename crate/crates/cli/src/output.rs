//! Files written by the commands.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use modred::bases::{retains, ColumnTag, ReductionBasis};
use modred::eigen::ModeSet;
use modred::enrich::{EnrichStatus, IndicatorReport, NormMode};
use modred::model::mtx;
use modred::quality::{PairingRule, QualityReport};

pub const BASIS: &str = "basis.mtx";
pub const TAGS: &str = "basis_tags.json";
pub const REPORT: &str = "report.json";
pub const MAC: &str = "mac.csv";
pub const TRACE: &str = "trace.csv";

/// How a report was produced. Holds no timestamps, so identical inputs
/// give byte-identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub command: String,
    pub config_hash: String,
    pub modred_core: String,
    pub modred_cli: String,
    pub norm_mode: NormMode,
    pub pairing: PairingRule,
    pub skip_rigid: bool,
    pub scoring_margin: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisSummary {
    pub columns: usize,
    pub free_free_modes: usize,
    pub fixed_interface_modes: usize,
    pub constraint_modes: usize,
    pub coupling_vectors: usize,
    pub ritz_vectors: usize,
    pub arnoldi_vectors: usize,
    pub dropped_candidates: usize,
    /// Fewer coupling vectors survived than requested.
    #[serde(default)]
    pub short: bool,
}

impl BasisSummary {
    pub fn of(b: &ReductionBasis, short: bool) -> Self {
        Self {
            columns: b.len(),
            free_free_modes: b.count(|t| matches!(t, ColumnTag::FreeFreeMode { .. })),
            fixed_interface_modes: b.count(|t| matches!(t, ColumnTag::FixedInterfaceMode { .. })),
            constraint_modes: b.count(|t| matches!(t, ColumnTag::ConstraintMode { .. })),
            coupling_vectors: b.count(|t| matches!(t, ColumnTag::CouplingVector { .. })),
            ritz_vectors: b.count(|t| matches!(t, ColumnTag::RitzVector { .. })),
            arnoldi_vectors: b.count(|t| matches!(t, ColumnTag::ArnoldiVector { .. })),
            dropped_candidates: b.dropped.len(),
            short,
        }
    }
}

/// Per-run enrichment record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentSummary {
    pub status: EnrichStatus,
    pub rounds: usize,
    pub initial_columns: usize,
    pub warnings: Vec<String>,
    /// One entry per indicator evaluation, round 0 first.
    pub trace: Vec<IndicatorReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub provenance: Provenance,
    pub basis: BasisSummary,
    pub quality: QualityReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enrichment: Option<EnrichmentSummary>,
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed JSON in {}", path.display()))
}

pub fn write_basis(dir: &Path, b: &ReductionBasis) -> Result<()> {
    mtx::write_dense(&dir.join(BASIS), &b.columns)?;
    write_json(&dir.join(TAGS), &b.tags)
}

pub fn read_basis(dir: &Path) -> Result<ReductionBasis> {
    let columns = mtx::read(&dir.join(BASIS))?.matrix;
    let tags: Vec<ColumnTag> = read_json(&dir.join(TAGS))?;
    if tags.len() != columns.ncols() {
        bail!(
            "{}: {} tags for {} basis columns",
            dir.display(),
            tags.len(),
            columns.ncols()
        );
    }
    Ok(ReductionBasis::new(columns, tags, vec![]))
}

/// Frequencies as CSV plus shapes as a dense Matrix Market file.
pub fn write_modes(dir: &Path, stem: &str, modes: &ModeSet) -> Result<()> {
    let mut s = String::from("index,frequency_hz,rigid\n");
    for (i, f) in modes.frequencies.iter().enumerate() {
        let _ = writeln!(s, "{i},{f:e},{}", modes.is_rigid(i));
    }
    write_text(&dir.join(format!("{stem}_frequencies.csv")), &s)?;
    mtx::write_dense(&dir.join(format!("{stem}_modes.mtx")), &modes.shapes)?;
    Ok(())
}

pub fn singular_values_csv(values: &[f64], threshold: f64) -> String {
    let mut s = String::from("index,singular_value,retained\n");
    for (i, v) in values.iter().enumerate() {
        let _ = writeln!(s, "{i},{v:e},{}", retains(*v, threshold));
    }
    s
}
