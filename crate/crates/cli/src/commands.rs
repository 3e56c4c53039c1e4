use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use modred::bases::database::{load_database, save_database, CouplingDatabase, Fingerprint, LoadMode, LoadStatus};
use modred::bases::{build_basis, BuiltBasis, Method};
use modred::coupling::{assemble, AssembledSystem};
use modred::eigen::{solve_full, ModeSet};
use modred::enrich::{self, trace_csv, EnrichStatus};
use modred::model::io::{
    export_component, ingest_component, matrix_digest, pair_fingerprint, partition_digest, ComponentFiles,
};
use modred::model::{build_box_pair, build_chain_pair_with, BoxDivisions, ChainGeometry, ComponentModel};
use modred::quality::{compare_methods, score_basis, ScoreInput, SCORING_MARGIN};

use crate::config::{InitialBasis, ModelSource, RunConfig};
use crate::output::{self, BasisSummary, EnrichmentSummary, Provenance, RunReport};

/// Successful command outcomes; partial maps to exit status 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Partial,
}

/// Run-wide switches from the command line.
#[derive(Debug, Clone, Copy)]
pub struct Flags {
    pub oracle: bool,
}

const MODEL_DIR: &str = "model";
const MODEL_MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ComponentEntry {
    ndof: usize,
    junction_dofs: usize,
    matrix_digest: String,
    partition_digest: String,
    files: ComponentFiles,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelManifest {
    fingerprint: String,
    source: ModelSource,
    components: [ComponentEntry; 2],
}

fn model_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir.join(MODEL_DIR)
}

fn component_files(dir: &Path, k: usize) -> ComponentFiles {
    ComponentFiles::in_dir(dir, &format!("component{k}"))
}

fn generate(source: &ModelSource) -> Result<(ComponentModel, ComponentModel)> {
    Ok(match source {
        ModelSource::Chain {
            n1,
            n2,
            material,
            element_length,
            area,
        } => build_chain_pair_with(
            *n1,
            *n2,
            *material,
            ChainGeometry {
                element_length: *element_length,
                area: *area,
            },
        )?,
        ModelSource::Box {
            divisions1: [a, b, c],
            divisions2: [d, e, f],
            material,
            element_size,
        } => build_box_pair(
            BoxDivisions::new(*a, *b, *c),
            BoxDivisions::new(*d, *e, *f),
            *material,
            *element_size,
        )?,
        ModelSource::Files { component1, component2 } => (
            ingest_component(1, component1).context("component 1")?,
            ingest_component(2, component2).context("component 2")?,
        ),
    })
}

/// Generates or ingests the components and writes them, with a manifest,
/// under `<output_dir>/model`.
pub fn build(cfg: &RunConfig) -> Result<Outcome> {
    let (c1, c2) = generate(&cfg.model)?;
    assemble(&c1, &c2)?;
    let dir = model_dir(cfg);
    output::create_dir(&dir)?;
    let mut entries = Vec::new();
    for (k, c) in [(1, &c1), (2, &c2)] {
        let files = component_files(&dir, k);
        export_component(c, &files)?;
        entries.push(ComponentEntry {
            ndof: c.ndof(),
            junction_dofs: c.junction().len(),
            matrix_digest: matrix_digest(c),
            partition_digest: partition_digest(c),
            files: ComponentFiles::in_dir(Path::new(""), &format!("component{k}")),
        });
    }
    let [e1, e2]: [ComponentEntry; 2] = entries.try_into().expect("two components");
    let manifest = ModelManifest {
        fingerprint: pair_fingerprint(&c1, &c2),
        source: cfg.model.clone(),
        components: [e1, e2],
    };
    output::write_json(&dir.join(MODEL_MANIFEST), &manifest)?;
    println!(
        "model: {} + {} DoF, junction {} DoF, fingerprint {}",
        c1.ndof(),
        c2.ndof(),
        c1.junction().len(),
        manifest.fingerprint
    );
    Ok(Outcome::Success)
}

/// Loads the model written by `build`.
fn load_model(cfg: &RunConfig) -> Result<AssembledSystem> {
    let dir = model_dir(cfg);
    if !dir.join(MODEL_MANIFEST).exists() {
        bail!("no model under {}; run `modred build` first", dir.display());
    }
    let c1 = ingest_component(1, &component_files(&dir, 1)).context("component 1")?;
    let c2 = ingest_component(2, &component_files(&dir, 2)).context("component 2")?;
    Ok(assemble(&c1, &c2)?)
}

fn fingerprint_of(sys: &AssembledSystem) -> String {
    pair_fingerprint(sys.component(1), sys.component(2))
}

fn provenance(cfg: &RunConfig, command: &str) -> Provenance {
    Provenance {
        command: command.into(),
        config_hash: cfg.hash(),
        modred_core: modred::VERSION.into(),
        modred_cli: env!("CARGO_PKG_VERSION").into(),
        norm_mode: cfg.enrichment.norm,
        pairing: cfg.pairing,
        skip_rigid: true,
        scoring_margin: SCORING_MARGIN,
        seed: cfg.seed,
    }
}

fn full_modes(cfg: &RunConfig, sys: &AssembledSystem, flags: Flags) -> Result<Option<ModeSet>> {
    if !flags.oracle {
        return Ok(None);
    }
    Ok(Some(solve_full(sys, cfg.band()?).context("full-model oracle")?))
}

fn reduce_dir(cfg: &RunConfig, method: Method) -> PathBuf {
    cfg.output_dir.join("reduce").join(method.to_string().to_lowercase())
}

/// Builds the configured basis and scores it.
pub fn reduce(cfg: &RunConfig, flags: Flags) -> Result<Outcome> {
    let sys = load_model(cfg)?;
    let band = cfg.band()?;
    let method = cfg.method;
    let built = build_basis(&sys, method, &cfg.basis_config()?).with_context(|| format!("method {method}"))?;
    let full = full_modes(cfg, &sys, flags)?;
    let (mut quality, reduced) = score_basis(
        &sys,
        &built.basis,
        &ScoreInput {
            method: method.to_string(),
            model_fingerprint: fingerprint_of(&sys),
            band,
            full: full.as_ref(),
            rule: cfg.pairing,
        },
    )
    .with_context(|| format!("method {method}"))?;
    quality.indicator = Some(enrich::indicator(
        &sys,
        &reduced.in_band(&band),
        &cfg.enrichment_config(),
    )?);

    let dir = reduce_dir(cfg, method);
    output::create_dir(&dir)?;
    write_run(&dir, &built.basis, &reduced, full.as_ref(), &quality)?;
    if let Some(interface) = &built.interface {
        output::write_text(
            &dir.join("singular_values.csv"),
            &output::singular_values_csv(&interface.singular_values, interface.threshold),
        )?;
    }
    let report = RunReport {
        provenance: provenance(cfg, "reduce"),
        basis: BasisSummary::of(&built.basis, built.short),
        quality,
        enrichment: None,
    };
    output::write_json(&dir.join(output::REPORT), &report)?;
    print_summary(&report);
    Ok(Outcome::Success)
}

fn write_run(
    dir: &Path,
    basis: &modred::bases::ReductionBasis,
    reduced: &ModeSet,
    full: Option<&ModeSet>,
    quality: &modred::quality::QualityReport,
) -> Result<()> {
    output::write_basis(dir, basis)?;
    output::write_modes(dir, "reduced", reduced)?;
    if let Some(full) = full {
        let mut s = String::from("index,frequency_hz,rigid\n");
        for (i, f) in full.frequencies.iter().enumerate() {
            s.push_str(&format!("{i},{f:e},{}\n", full.is_rigid(i)));
        }
        output::write_text(&dir.join("full_frequencies.csv"), &s)?;
    }
    if let Some(p) = &quality.pairing {
        output::write_text(&dir.join(output::MAC), &p.mac_matrix.to_csv())?;
    }
    Ok(())
}

fn print_summary(r: &RunReport) {
    let q = &r.quality;
    let mac = q
        .mac_average
        .map(|m| format!(", MAC average {m:.3}%"))
        .unwrap_or_default();
    println!(
        "{}: {} reduced DoF of {}, condition number {:.4e}{mac}",
        q.method, q.dof_reduced, q.dof_full, q.condition_number
    );
}

/// Runs the enrichment loop and scores the final basis.
pub fn enrich(cfg: &RunConfig, flags: Flags) -> Result<Outcome> {
    if !cfg.enrichment.enabled {
        bail!("enrichment is disabled in the configuration");
    }
    let sys = load_model(cfg)?;
    let band = cfg.band()?;
    let (label, t0) = match cfg.enrichment.initial_basis {
        InitialBasis::Free => {
            let built = build_basis(&sys, Method::Free, &cfg.basis_config()?)?;
            (Method::Free, built.basis)
        }
        InitialBasis::Method => {
            let dir = reduce_dir(cfg, cfg.method);
            if !dir.join(output::BASIS).exists() {
                bail!(
                    "no {} basis under {}; run `modred reduce` first",
                    cfg.method,
                    dir.display()
                );
            }
            (cfg.method, output::read_basis(&dir)?)
        }
    };
    let ecfg = cfg.enrichment_config();
    let outcome = enrich::enrich(&sys, &t0, band, &ecfg).with_context(|| format!("enriching {label}"))?;
    for w in &outcome.warnings {
        log::info!("{w}");
    }
    if !outcome.warnings.is_empty() {
        log::warn!(
            "{} enrichment warnings (shift nudges, regularization); see the report",
            outcome.warnings.len()
        );
    }
    let full = full_modes(cfg, &sys, flags)?;
    let name = format!("{label}+enriched");
    let (mut quality, reduced) = score_basis(
        &sys,
        &outcome.basis,
        &ScoreInput {
            method: name.clone(),
            model_fingerprint: fingerprint_of(&sys),
            band,
            full: full.as_ref(),
            rule: cfg.pairing,
        },
    )?;
    quality.indicator = outcome.reports.last().cloned();

    let dir = cfg.output_dir.join("enrich").join(label.to_string().to_lowercase());
    output::create_dir(&dir)?;
    write_run(&dir, &outcome.basis, &reduced, full.as_ref(), &quality)?;
    output::write_text(&dir.join(output::TRACE), &trace_csv(&outcome.reports))?;
    let report = RunReport {
        provenance: provenance(cfg, "enrich"),
        basis: BasisSummary::of(&outcome.basis, false),
        quality,
        enrichment: Some(EnrichmentSummary {
            status: outcome.status,
            rounds: outcome.rounds,
            initial_columns: t0.len(),
            warnings: outcome.warnings.clone(),
            trace: outcome.reports.clone(),
        }),
    };
    output::write_json(&dir.join(output::REPORT), &report)?;
    print_summary(&report);
    let max_eps = outcome.reports.last().map_or(0.0, |r| r.max_epsilon());
    match outcome.status {
        EnrichStatus::Converged => {
            println!("converged after {} rounds, max epsilon {max_eps:.3e}", outcome.rounds);
            Ok(Outcome::Success)
        }
        EnrichStatus::Partial => {
            println!(
                "partial: {} rounds exhausted, max epsilon {max_eps:.3e}",
                outcome.rounds
            );
            Ok(Outcome::Partial)
        }
    }
}

/// Merges run reports into one table; with `output`, also writes
/// `comparison.csv` and `comparison.json` there.
pub fn compare(reports: &[PathBuf], output: Option<&Path>) -> Result<Outcome> {
    if reports.is_empty() {
        bail!("no reports given");
    }
    let quality = reports
        .iter()
        .map(|p| output::read_json::<RunReport>(p).map(|r| r.quality))
        .collect::<Result<Vec<_>>>()?;
    let table = compare_methods(&quality)?;
    print!("{}", table.to_text());
    if let Some(dir) = output {
        output::create_dir(dir)?;
        output::write_text(&dir.join("comparison.csv"), &table.to_csv())?;
        output::write_json(&dir.join("comparison.json"), &table)?;
    }
    Ok(Outcome::Success)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DbAction {
    Save,
    Load,
    ReusePartial,
}

fn database_dir(cfg: &RunConfig, path: Option<&Path>) -> PathBuf {
    path.map(Path::to_path_buf)
        .unwrap_or_else(|| cfg.output_dir.join("database"))
}

/// Coupling-database management. Loading rebuilds the basis from the
/// stored data and writes it under `<output_dir>/db`.
pub fn db(cfg: &RunConfig, action: DbAction, path: Option<&Path>) -> Result<Outcome> {
    let sys = load_model(cfg)?;
    let dir = database_dir(cfg, path);
    let (c1, c2) = (sys.component(1), sys.component(2));
    match action {
        DbAction::Save => {
            let settings = cfg.basis_config()?;
            let built: BuiltBasis =
                build_basis(&sys, cfg.method, &settings).with_context(|| format!("method {}", cfg.method))?;
            let db = CouplingDatabase::from_built(&built, &settings, c1, c2)?;
            save_database(&db, &dir)?;
            println!(
                "saved {} database to {}: {} coupling vectors, fingerprint {}",
                db.method,
                dir.display(),
                db.coupling_vectors.len(),
                Fingerprint::of(c1, c2).summary()
            );
        }
        DbAction::Load | DbAction::ReusePartial => {
            let mode = if action == DbAction::Load {
                LoadMode::Strict
            } else {
                LoadMode::ReusePartial
            };
            let (db, status) = load_database(&dir, c1, c2, mode)?;
            println!("{status}");
            let built = db.rebuild(&sys)?;
            let out = cfg.output_dir.join("db");
            output::create_dir(&out)?;
            output::write_basis(&out, &built.basis)?;
            output::write_json(&out.join("status.json"), &status)?;
            if let LoadStatus::Partial { .. } = status {
                log::info!("coupling vectors recomputed from the stored free modes");
            }
        }
    }
    Ok(Outcome::Success)
}
