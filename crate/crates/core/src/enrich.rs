//! Residual-force quality indicator and the enrichment loop.
//!
//! Each round solves the reduced model, scores every in-band elastic mode
//! with ε and, for modes above tolerance, adds a few shift-invert Arnoldi
//! vectors targeted at that mode. The basis is then restarted from the
//! free-free columns, the current reduced-mode shapes and the new vectors.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bases::{orthogonalize, ColumnTag, Orthogonalization, ReductionBasis};
use crate::coupling::{shifted, AssembledSystem};
use crate::eigen::{mean_diag_ratio, solve_reduced, solve_reduced_deflated, BandSpec, ModeSet, RANK_TOLERANCE};
use crate::error::{Error, Result};
use crate::linalg::{self, project_out, SymmetricFactor};
use crate::parallel::{self, Exec};

/// Relative half-width of the window in which a shift counts as hitting an
/// eigenvalue of the full model.
pub const SHIFT_WINDOW: f64 = 1e-3;
/// Relative shift increase applied when the window is hit.
pub const SHIFT_NUDGE: f64 = 5e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormMode {
    /// (R_fᵀ K R_f) / ((Kφ)ᵀ K (Kφ))
    Paper,
    /// (R_fᵀ K⁻¹ R_f) / (φᵀ K φ)
    #[default]
    Flex,
}

impl std::str::FromStr for NormMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(NormMode::Paper),
            "flex" => Ok(NormMode::Flex),
            _ => Err(Error::InvalidArgument(format!("unknown norm mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrichmentConfig {
    pub epsilon_tol: f64,
    /// Arnoldi vectors per flagged mode.
    pub arnoldi_per_mode: usize,
    pub max_rounds: usize,
    pub norm_mode: NormMode,
    pub drop_tol: f64,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for EnrichmentConfig {
    fn default() -> Self {
        Self {
            epsilon_tol: 1e-6,
            arnoldi_per_mode: 3,
            max_rounds: 5,
            norm_mode: NormMode::Flex,
            drop_tol: 1e-8,
            exec: Exec::default(),
        }
    }
}

impl EnrichmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon_tol > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon_tol must be > 0, got {}",
                self.epsilon_tol
            )));
        }
        if self.arnoldi_per_mode == 0 || self.max_rounds == 0 {
            return Err(Error::InvalidArgument(
                "arnoldi_per_mode and max_rounds must be ≥ 1".into(),
            ));
        }
        Ok(())
    }
}

/// R_f = (K − (2πf)²M)φ
pub fn residual_force(sys: &AssembledSystem, frequency_hz: f64, shape: &DVector<f64>) -> DVector<f64> {
    let w2 = (TAU * frequency_hz).powi(2);
    &sys.stiffness * shape - (&sys.mass * shape) * w2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeIndicator {
    /// Index in the reduced mode set.
    pub index: usize,
    pub frequency_hz: f64,
    /// Under the configured norm.
    pub epsilon: f64,
    pub epsilon_paper: f64,
    pub epsilon_flex: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorReport {
    /// 0 for the starting basis.
    pub round: usize,
    pub norm_mode: NormMode,
    pub tolerance: f64,
    pub per_mode: Vec<ModeIndicator>,
    /// Indices with ε > tolerance.
    pub flagged: Vec<usize>,
    /// Shift s used for the flexibility norm when K is singular (K + sM).
    pub flex_regularization: Option<f64>,
}

impl IndicatorReport {
    pub fn max_epsilon(&self) -> f64 {
        self.per_mode.iter().map(|m| m.epsilon).fold(0.0, f64::max)
    }
}

/// Factorized K for the flexibility norm.
///
/// A free structure has singular K: it is then factorized as K + sM and
/// residuals are first made self-equilibrated, R − MN(NᵀR) with N the
/// M-orthonormal rigid-body modes, so that the rigid directions amplified
/// by 1/s do not pollute ε.
pub struct Flexibility {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    pub shift: Option<f64>,
    null: Option<(DMatrix<f64>, DMatrix<f64>)>,
}

/// Pivot ratio below which K is treated as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-12;
/// s / mean(diag K / diag M) for the regularized factorization.
const FLEX_SHIFT: f64 = 1e-6;
/// Eigenvalues below this fraction of mean(diag K / diag M) are rigid.
const NULL_CUT: f64 = 1e-8;

impl Flexibility {
    pub fn new(sys: &AssembledSystem) -> Result<Self> {
        if let Some(chol) = sys.stiffness.clone().cholesky() {
            let d: Vec<f64> = chol.l_dirty().diagonal().iter().map(|x| x * x).collect();
            let max = d.iter().copied().fold(0.0, f64::max);
            let min = d.iter().copied().fold(f64::INFINITY, f64::min);
            if min > SINGULAR_PIVOT_RATIO * max {
                return Ok(Self {
                    chol,
                    shift: None,
                    null: None,
                });
            }
        }
        let ratio = mean_diag_ratio(&sys.mass, &sys.stiffness);
        let s = FLEX_SHIFT * ratio;
        let chol = shifted(&sys.stiffness, &sys.mass, -s)
            .cholesky()
            .ok_or_else(|| Error::Definiteness("K + sM is not positive definite".into()))?;
        let nullity = SymmetricFactor::new(&shifted(&sys.stiffness, &sys.mass, NULL_CUT * ratio))?
            .inertia(0.0)
            .negative;
        let null = (nullity > 0).then(|| {
            let n = null_space(sys, &chol, nullity);
            let mn = &sys.mass * &n;
            (n, mn)
        });
        Ok(Self {
            chol,
            shift: Some(s),
            null,
        })
    }

    /// Number of rigid-body modes of the assembled system.
    pub fn rigid_count(&self) -> usize {
        self.null.as_ref().map_or(0, |(n, _)| n.ncols())
    }

    /// Self-equilibrated part of a force vector.
    pub fn equilibrate(&self, r: &DVector<f64>) -> DVector<f64> {
        match &self.null {
            Some((n, mn)) => r - mn * (n.transpose() * r),
            None => r.clone(),
        }
    }

    /// rᵀ K⁻¹ r on the self-equilibrated part of r.
    pub fn energy(&self, r: &DVector<f64>) -> f64 {
        let r = self.equilibrate(r);
        r.dot(&self.chol.solve(&r))
    }
}

/// M-orthonormal basis of the `dim` lowest modes by subspace iteration
/// with (K + sM)⁻¹M; the rigid directions gain a factor λ₁/s per step.
fn null_space(sys: &AssembledSystem, chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>, dim: usize) -> DMatrix<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x0e11);
    let mut x = DMatrix::from_fn(sys.n_global, dim, |_, _| rng.random_range(-1.0..1.0));
    for _ in 0..6 {
        x = chol.solve(&(&sys.mass * &x));
        x = m_orthonormalize(&sys.mass, &x);
    }
    x
}

fn m_orthonormalize(m: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    let g = linalg::symmetrize(&(x.transpose() * m * x));
    let l = g.cholesky().expect("independent iterates").l();
    let linv = l.try_inverse().expect("triangular factor is invertible");
    x * linv.transpose()
}

/// Both norms of ε for one approximate eigenpair.
pub fn epsilon_pair(sys: &AssembledSystem, flex: &Flexibility, frequency_hz: f64, shape: &DVector<f64>) -> (f64, f64) {
    let r = residual_force(sys, frequency_hz, shape);
    let k_phi = &sys.stiffness * shape;
    let paper = r.dot(&(&sys.stiffness * &r)) / k_phi.dot(&(&sys.stiffness * &k_phi));
    let flexible = flex.energy(&r) / shape.dot(&k_phi);
    (paper.max(0.0), flexible.max(0.0))
}

/// ε for every elastic mode of `modes`. The lowest modes up to the rigid-body
/// count of the assembled system are not scored: for a rigid motion ε is 0/0.
pub fn indicator(sys: &AssembledSystem, modes: &ModeSet, cfg: &EnrichmentConfig) -> Result<IndicatorReport> {
    let flex = Flexibility::new(sys)?;
    indicator_with(sys, modes, cfg, &flex, 0)
}

fn indicator_with(
    sys: &AssembledSystem,
    modes: &ModeSet,
    cfg: &EnrichmentConfig,
    flex: &Flexibility,
    round: usize,
) -> Result<IndicatorReport> {
    if modes.shapes.nrows() != sys.n_global {
        return Err(Error::InvalidArgument(format!(
            "modes have {} rows, system has {} DoF",
            modes.shapes.nrows(),
            sys.n_global
        )));
    }
    let first = modes.rigid_count.max(flex.rigid_count()).min(modes.len());
    let idx: Vec<usize> = (first..modes.len()).collect();
    let values = parallel::map(cfg.exec, &idx, |&i| {
        epsilon_pair(sys, flex, modes.frequencies[i], &modes.shape(i))
    });
    let per_mode: Vec<ModeIndicator> = idx
        .iter()
        .zip(values)
        .map(|(&i, (paper, flexible))| {
            let epsilon = match cfg.norm_mode {
                NormMode::Paper => paper,
                NormMode::Flex => flexible,
            };
            ModeIndicator {
                index: i,
                frequency_hz: modes.frequencies[i],
                epsilon,
                epsilon_paper: paper,
                epsilon_flex: flexible,
                flagged: epsilon > cfg.epsilon_tol,
            }
        })
        .collect();
    Ok(IndicatorReport {
        round,
        norm_mode: cfg.norm_mode,
        tolerance: cfg.epsilon_tol,
        flagged: per_mode.iter().filter(|m| m.flagged).map(|m| m.index).collect(),
        per_mode,
        flex_regularization: flex.shift,
    })
}

/// CSV rows (round, mode, frequency, ε, flagged) for rounds ≥ 1.
pub fn trace_csv(reports: &[IndicatorReport]) -> String {
    let mut s = String::from("round,mode,frequency_hz,epsilon,flagged\n");
    for r in reports.iter().filter(|r| r.round > 0) {
        for m in &r.per_mode {
            let _ = writeln!(
                s,
                "{},{},{:e},{:e},{}",
                r.round, m.index, m.frequency_hz, m.epsilon, m.flagged
            );
        }
    }
    s
}

/// Orthonormal Arnoldi vectors for one flagged mode, with the shift that
/// was actually used.
#[derive(Debug, Clone)]
pub struct ArnoldiBlock {
    pub target_mode: usize,
    pub shift: f64,
    pub nudged: bool,
    pub vectors: Vec<DVector<f64>>,
}

/// Up to `n` vectors of the Krylov sequence of (K − σM)⁻¹M started from the
/// residual displacement (K − σM)⁻¹R_f, each orthonormalized against `q`
/// and the vectors before it.
pub fn arnoldi_block(
    sys: &AssembledSystem,
    q: &[DVector<f64>],
    target_mode: usize,
    frequency_hz: f64,
    shape: &DVector<f64>,
    n: usize,
    drop_tol: f64,
) -> Result<ArnoldiBlock> {
    let mut sigma = (TAU * frequency_hz).powi(2);
    let inertia_below = |s: f64| -> Result<usize> {
        Ok(SymmetricFactor::new(&shifted(&sys.stiffness, &sys.mass, s))?
            .inertia(0.0)
            .negative)
    };
    let mut nudged = false;
    if inertia_below(sigma * (1.0 - SHIFT_WINDOW))? != inertia_below(sigma * (1.0 + SHIFT_WINDOW))? {
        sigma *= 1.0 + SHIFT_NUDGE;
        nudged = true;
    }
    let factor = SymmetricFactor::new(&shifted(&sys.stiffness, &sys.mass, sigma))?;
    if factor.is_singular() {
        return Err(Error::Singular(format!("K − σM at σ = {sigma:e} during enrichment")));
    }
    // Unshifted, the seed (K − σM)⁻¹R_f is φ̃ itself and already spanned.
    // Shifted, it is φ̃ plus a multiple of one inverse-iteration step and
    // becomes the first vector of the block.
    let mut block: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut w = shape.normalize();
    if nudged {
        let mut seed = factor.solve_vec(&residual_force(sys, frequency_hz, shape));
        if accept(q, &block, &mut seed, drop_tol) {
            block.push(seed.clone());
            w = seed;
        }
    }
    while block.len() < n {
        let mut v = factor.solve_vec(&(&sys.mass * &w));
        if !accept(q, &block, &mut v, drop_tol) {
            break;
        }
        block.push(v.clone());
        w = v;
    }
    Ok(ArnoldiBlock {
        target_mode,
        shift: sigma,
        nudged,
        vectors: block,
    })
}

/// Projects `v` off `q` and `block` and normalizes it; false when less than
/// `drop_tol` of it remains.
fn accept(q: &[DVector<f64>], block: &[DVector<f64>], v: &mut DVector<f64>, drop_tol: f64) -> bool {
    let pre = v.norm();
    project_out(q, v);
    project_out(block, v);
    let post = v.norm();
    if !(post > drop_tol * pre) {
        return false;
    }
    *v /= post;
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnrichStatus {
    Converged,
    /// Rounds exhausted with modes still flagged.
    Partial,
}

#[derive(Debug, Clone)]
pub struct EnrichOutcome {
    pub basis: ReductionBasis,
    /// Final reduced modes in band.
    pub modes: ModeSet,
    /// One report per evaluation, starting with the initial basis.
    pub reports: Vec<IndicatorReport>,
    pub rounds: usize,
    pub status: EnrichStatus,
    pub warnings: Vec<String>,
}

/// Runs the enrichment loop from `t0`.
pub fn enrich(
    sys: &AssembledSystem,
    t0: &ReductionBasis,
    band: BandSpec,
    cfg: &EnrichmentConfig,
) -> Result<EnrichOutcome> {
    cfg.validate()?;
    let flex = Flexibility::new(sys)?;
    let anchor = {
        let ff = t0.filter(ColumnTag::is_free_free);
        if ff.is_empty() {
            t0.clone()
        } else {
            ff
        }
    };
    let mut basis = t0.clone();
    let mut reports = Vec::new();
    let mut warnings = Vec::new();
    if let Some(s) = flex.shift {
        warnings.push(format!("stiffness is singular; flexibility norm uses K + {s:e}·M"));
    }
    let mut round = 0;
    loop {
        let modes = match solve_reduced(&basis.columns, sys, band) {
            Err(Error::Conditioning { condition_number }) => {
                let (m, deflated) = solve_reduced_deflated(&basis.columns, sys, band, RANK_TOLERANCE)?;
                warnings.push(format!(
                    "round {round}: basis condition number {condition_number:.3e}, \
                     {deflated} dependent directions deflated"
                ));
                m
            }
            r => r?,
        };
        let report = indicator_with(sys, &modes, cfg, &flex, round)?;
        let done = report.flagged.is_empty();
        let flagged = report.flagged.clone();
        log::info!(
            "enrichment round {round}: basis {} columns, max ε {:.3e}, {} flagged",
            basis.len(),
            report.max_epsilon(),
            flagged.len()
        );
        reports.push(report);
        if done || round == cfg.max_rounds {
            let status = if done {
                EnrichStatus::Converged
            } else {
                warnings.push(format!(
                    "{} modes still above tolerance after {round} rounds",
                    flagged.len()
                ));
                EnrichStatus::Partial
            };
            return Ok(EnrichOutcome {
                basis,
                modes,
                reports,
                rounds: round,
                status,
                warnings,
            });
        }
        round += 1;
        let core = orthogonalize(
            &anchor.columns,
            &anchor.tags,
            (0..modes.len()).map(|i| (modes.shape(i), ColumnTag::RitzVector { round, mode: i })),
            cfg.drop_tol,
            Orthogonalization::Full,
            None,
        );
        let q = linalg::orthonormal_columns(&core.columns, 1e-12);
        let blocks = parallel::try_map(cfg.exec, &flagged, |&i| {
            arnoldi_block(
                sys,
                &q,
                i,
                modes.frequencies[i],
                &modes.shape(i),
                cfg.arnoldi_per_mode,
                cfg.drop_tol,
            )
        })?;
        let mut candidates = Vec::new();
        for b in &blocks {
            if b.nudged {
                warnings.push(format!(
                    "round {round}: shift for mode {} was within {:.1}% of an eigenvalue, \
                     moved to σ = {:e}",
                    b.target_mode,
                    100.0 * SHIFT_WINDOW,
                    b.shift
                ));
            }
            for (step, v) in b.vectors.iter().enumerate() {
                candidates.push((
                    v.clone(),
                    ColumnTag::ArnoldiVector {
                        round,
                        target_mode: b.target_mode,
                        step: step + 1,
                    },
                ));
            }
        }
        let mut next = orthogonalize(
            &core.columns,
            &core.tags,
            candidates,
            cfg.drop_tol,
            Orthogonalization::Full,
            None,
        );
        next.dropped.splice(0..0, core.dropped);
        basis = next;
    }
}
