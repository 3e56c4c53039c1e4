//! Property checks shared by the `properties` and `acceptance` targets.
//! Every check draws its cases from a proptest runner seeded with the given
//! seed, so seeds 0 to 9 give ten reproducible randomized runs.

use std::f64::consts::TAU;

use modred::bases::{
    build_basis, orthogonalize, static_constraint_modes, svd_coupling_vectors, BasisConfig, ColumnTag, InterfaceBasis,
    Method, Orthogonalization,
};
use modred::coupling::{assemble, dynamic_stiffness, split_elastic_interaction, AssembledSystem};
use modred::eigen::{solve_free_modes, solve_full, solve_reduced, BandSpec, ModeSet};
use modred::enrich::{self, arnoldi_block, epsilon_pair, EnrichmentConfig, Flexibility};
use modred::linalg::{self, condition_number, orthonormal_columns, principal_angles, rayleigh_root};
use modred::model::{build_box_pair, build_chain_pair, BoxDivisions, ComponentModel, MaterialSpec};
use modred::parallel::Exec;
use modred::quality::{mac, pair_and_average, PairingRule};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use super::{random_matrix, random_vector, rel, rng};

pub struct Invariant {
    pub name: &'static str,
    pub check: fn(u64) -> Result<(), String>,
}

pub fn all() -> Vec<Invariant> {
    vec![
        Invariant {
            name: "generated models are symmetric, rigid and coherent",
            check: generated_models,
        },
        Invariant {
            name: "mass-orthonormality and stiffness-orthogonality",
            check: mass_orthonormality,
        },
        Invariant {
            name: "eigensolves are deterministic",
            check: eigen_determinism,
        },
        Invariant {
            name: "Rayleigh-Ritz bound",
            check: rayleigh_ritz_bound,
        },
        Invariant {
            name: "MAC bounds and scale invariance",
            check: mac_bounds,
        },
        Invariant {
            name: "MAC of mass-orthonormal modes has unit diagonal",
            check: mac_self_diagonal,
        },
        Invariant {
            name: "MAC average ignores order and sign",
            check: mac_average_invariance,
        },
        Invariant {
            name: "Gram-Schmidt idempotence",
            check: gram_schmidt_idempotence,
        },
        Invariant {
            name: "Z-split exactness",
            check: z_split_exactness,
        },
        Invariant {
            name: "Z symmetry and energy consistency",
            check: z_energy,
        },
        Invariant {
            name: "assembly commutes up to permutation",
            check: assembly_commutes,
        },
        Invariant {
            name: "Rayleigh root scale invariance",
            check: rayleigh_scale,
        },
        Invariant {
            name: "Rayleigh root of an eigenvector",
            check: rayleigh_exact,
        },
        Invariant {
            name: "indicator scale invariance",
            check: epsilon_scale,
        },
        Invariant {
            name: "condition number permutation invariance",
            check: cond_permutation,
        },
        Invariant {
            name: "static-limit equivalence",
            check: static_limit,
        },
        Invariant {
            name: "Arnoldi blocks orthonormal and off the basis",
            check: arnoldi_properties,
        },
        Invariant {
            name: "enrichment keeps MAC and the restart bound",
            check: enrichment_properties,
        },
        Invariant {
            name: "indicator soundness",
            check: indicator_soundness,
        },
    ]
}

pub fn run_all(seeds: std::ops::Range<u64>) -> Vec<(&'static str, Result<(), String>)> {
    all()
        .into_iter()
        .map(|inv| {
            let r = seeds
                .clone()
                .try_for_each(|s| (inv.check)(s).map_err(|e| format!("seed {s}: {e}")));
            (inv.name, r)
        })
        .collect()
}

fn run<S: Strategy>(
    seed: u64,
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    let mut bytes = [0u8; 32];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    let config = Config {
        cases,
        failure_persistence: None,
        max_shrink_iters: 64,
        ..Config::default()
    };
    let mut runner = TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &bytes));
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

/// A small generated model.
#[derive(Debug, Clone)]
enum Model {
    Chain { n1: usize, n2: usize, e: f64, rho: f64 },
    Boxes { d1: [usize; 3], d2: [usize; 3] },
}

impl Model {
    fn components(&self) -> (ComponentModel, ComponentModel) {
        match *self {
            Model::Chain { n1, n2, e, rho } => build_chain_pair(
                n1,
                n2,
                MaterialSpec {
                    youngs_modulus: e,
                    density: rho,
                    poisson_ratio: 0.0,
                },
            )
            .unwrap(),
            Model::Boxes { d1, d2 } => build_box_pair(
                BoxDivisions::new(d1[0], d1[1], d1[2]),
                BoxDivisions::new(d2[0], d2[1], d2[2]),
                MaterialSpec::steel(),
                0.01,
            )
            .unwrap(),
        }
    }

    fn system(&self) -> AssembledSystem {
        let (a, b) = self.components();
        assemble(&a, &b).unwrap()
    }

    fn nullity(&self) -> usize {
        match self {
            Model::Chain { .. } => 1,
            Model::Boxes { .. } => 6,
        }
    }
}

fn chain_model() -> impl Strategy<Value = Model> {
    (2usize..12, 2usize..12, 0.5f64..4.0, 0.5f64..4.0).prop_map(|(n1, n2, e, rho)| Model::Chain { n1, n2, e, rho })
}

fn box_model() -> impl Strategy<Value = Model> {
    ([1usize..3, 1usize..3, 1usize..3], 1usize..3).prop_map(|(d1, nx2)| Model::Boxes {
        d1,
        d2: [nx2, d1[1], d1[2]],
    })
}

fn any_model() -> impl Strategy<Value = Model> {
    prop_oneof![3 => chain_model(), 1 => box_model()]
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn full_modes(sys: &AssembledSystem) -> ModeSet {
    solve_full(sys, BandSpec::all()).unwrap()
}

fn max_dev_from_identity(g: &DMatrix<f64>) -> f64 {
    let n = g.nrows();
    (g - DMatrix::<f64>::identity(n, g.ncols())).amax()
}

fn generated_models(seed: u64) -> Result<(), String> {
    run(seed, 4, any_model(), |m| {
        let (c1, c2) = m.components();
        for c in [&c1, &c2] {
            check(c.stiffness == c.stiffness.transpose(), || {
                "K not exactly symmetric".into()
            })?;
            check(c.mass == c.mass.transpose(), || "M not exactly symmetric".into())?;
            let g = c.geometry.as_ref().unwrap();
            let kmax = c.stiffness.amax();
            for v in g.rigid_body_vectors() {
                let r = (&c.stiffness * &v).amax();
                check(r <= 1e-8 * kmax * v.amax(), || format!("K·v = {r:e} for a rigid field"))?;
            }
        }
        let (g1, g2) = (c1.geometry.as_ref().unwrap(), c2.geometry.as_ref().unwrap());
        check(c1.junction().len() == c2.junction().len(), || {
            "junction sizes differ".into()
        })?;
        for (&a, &b) in c1.junction().iter().zip(c2.junction()) {
            let (x, y) = (g1.node_coords[g1.dof_node(a).0], g2.node_coords[g2.dof_node(b).0]);
            let d = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) + (x[2] - y[2]).powi(2)).sqrt();
            check(d < 1e-12 * g1.element_size, || format!("junction nodes {d:e} apart"))?;
        }
        Ok(())
    })
}

fn mass_orthonormality(seed: u64) -> Result<(), String> {
    run(seed, 4, any_model(), |m| {
        let sys = m.system();
        let modes = full_modes(&sys);
        let phi = &modes.shapes;
        let g = phi.transpose() * &sys.mass * phi;
        let dev = max_dev_from_identity(&g);
        check(dev <= 1e-8, || format!("ΦᵀMΦ deviates from I by {dev:e}"))?;
        let s = phi.transpose() * &sys.stiffness * phi;
        let dmax = s.diagonal().amax();
        for i in 0..s.nrows() {
            let w2 = (TAU * modes.frequencies[i]).powi(2);
            check((s[(i, i)] - w2).abs() <= 1e-8 * dmax, || {
                format!("diag {i}: {} vs (2πf)² = {w2}", s[(i, i)])
            })?;
            for j in 0..s.ncols() {
                if i != j {
                    check(s[(i, j)].abs() <= 1e-6 * dmax, || {
                        format!("ΦᵀKΦ[{i},{j}] = {:e}", s[(i, j)])
                    })?;
                }
            }
        }
        for i in modes.elastic_indices() {
            let v = modes.shape(i);
            let kv = &sys.stiffness * &v;
            let r = &kv - modes.eigenvalues[i] * (&sys.mass * &v);
            check(r.norm() <= 1e-6 * kv.norm(), || {
                format!("mode {i} residual {:e}", r.norm())
            })?;
        }
        check(modes.frequencies.windows(2).all(|w| w[0] <= w[1]), || {
            "frequencies not ascending".into()
        })?;
        check(modes.rigid_count == m.nullity(), || {
            format!("{} rigid modes", modes.rigid_count)
        })
    })
}

fn eigen_determinism(seed: u64) -> Result<(), String> {
    run(seed, 3, any_model(), |m| {
        let sys = m.system();
        let (a, b) = (full_modes(&sys), full_modes(&sys));
        check(a.frequencies == b.frequencies, || {
            "frequencies differ between runs".into()
        })?;
        check(a.shapes == b.shapes, || "shapes differ between runs".into())?;
        for j in 0..a.len() {
            let c = a.shapes.column(j);
            let k = c.iamax();
            check(c[k] > 0.0, || format!("column {j} not sign-canonical"))?;
        }
        Ok(())
    })
}

fn rayleigh_ritz_bound(seed: u64) -> Result<(), String> {
    run(seed, 4, (any_model(), any::<u64>(), 0.0f64..1.0), |(m, data, frac)| {
        let sys = m.system();
        let n = sys.n_global;
        let r = 1 + ((n - 1) as f64 * frac) as usize;
        let t = random_matrix(n, r, &mut rng(data));
        let full = full_modes(&sys);
        let reduced = solve_reduced(&t, &sys, BandSpec::all()).unwrap();
        let lmax = full.eigenvalues.last().copied().unwrap();
        for (i, (&lr, &lf)) in reduced.eigenvalues.iter().zip(&full.eigenvalues).enumerate() {
            check(lr >= lf * (1.0 - 1e-10) - 1e-12 * lmax, || {
                format!("reduced λ{i} = {lr:e} below full λ{i} = {lf:e}")
            })?;
        }
        Ok(())
    })
}

fn mac_bounds(seed: u64) -> Result<(), String> {
    let strategy = (
        2usize..20,
        1usize..6,
        1usize..6,
        any::<u64>(),
        prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3],
        prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3],
    );
    run(seed, 16, strategy, |(n, p, q, data, alpha, beta)| {
        let mut g = rng(data);
        let (u, v) = (random_matrix(n, p, &mut g), random_matrix(n, q, &mut g));
        let m = mac(&u, &v).unwrap().values;
        check(m.iter().all(|&x| (-1e-12..=1.0 + 1e-12).contains(&x)), || {
            "MAC outside [0, 1]".into()
        })?;
        let s = mac(&u, &u).unwrap().values;
        for i in 0..p {
            check((s[(i, i)] - 1.0).abs() <= 1e-12, || {
                format!("mac(u, u) = {}", s[(i, i)])
            })?;
        }
        let scaled = mac(&(&u * alpha), &(&v * beta)).unwrap().values;
        let d = (&scaled - &m).amax();
        check(d <= 1e-12, || format!("scaling changed MAC by {d:e}"))
    })
}

fn mac_self_diagonal(seed: u64) -> Result<(), String> {
    run(seed, 4, any_model(), |m| {
        let modes = full_modes(&m.system());
        let d = mac(&modes.shapes, &modes.shapes).unwrap().values;
        for i in 0..d.nrows() {
            check((d[(i, i)] - 1.0).abs() <= 1e-12, || {
                format!("diagonal {i} = {}", d[(i, i)])
            })?;
        }
        Ok(())
    })
}

/// Flips some column signs and, when `permute`, shuffles the elastic
/// columns.
fn scramble(m: &ModeSet, data: u64, permute: bool) -> ModeSet {
    use rand::seq::SliceRandom;
    use rand::Rng;
    let mut g = rng(data);
    let mut order: Vec<usize> = m.elastic_indices().collect();
    if permute {
        order.shuffle(&mut g);
    }
    let order: Vec<usize> = (0..m.rigid_count).chain(order).collect();
    let mut out = m.select(&order);
    for j in 0..out.len() {
        if g.random_bool(0.5) {
            let mut c = out.shapes.column_mut(j);
            c *= -1.0;
        }
    }
    out
}

fn mac_average_invariance(seed: u64) -> Result<(), String> {
    let strategy = (
        chain_model(),
        any::<u64>(),
        any::<u64>(),
        prop_oneof![Just(PairingRule::Greedy), Just(PairingRule::Sorted)],
    );
    run(seed, 6, strategy, |(m, data, shuffle, rule)| {
        let sys = m.system();
        let full = full_modes(&sys);
        let n = sys.n_global;
        let t = random_matrix(n, (n / 2).max(2), &mut rng(data));
        let reduced = solve_reduced(&t, &sys, BandSpec::all()).unwrap();
        let base = pair_and_average(&full, &reduced, true, rule).unwrap();
        // Sorted pairing matches by position, so only sign flips leave it unchanged.
        let permute = rule == PairingRule::Greedy;
        let moved = pair_and_average(
            &scramble(&full, shuffle, permute),
            &scramble(&reduced, !shuffle, permute),
            true,
            rule,
        )
        .unwrap();
        check((base.mac_average - moved.mac_average).abs() <= 1e-10, || {
            format!("{} vs {}", base.mac_average, moved.mac_average)
        })
    })
}

fn external_tags(n: usize, offset: usize) -> Vec<ColumnTag> {
    (0..n).map(|i| ColumnTag::External { index: offset + i }).collect()
}

fn gram_schmidt_idempotence(seed: u64) -> Result<(), String> {
    let strategy = (6usize..30, 1usize..4, 1usize..6, any::<u64>(), any::<bool>());
    run(seed, 16, strategy, |(n, b, c, data, full)| {
        let mode = if full {
            Orthogonalization::Full
        } else {
            Orthogonalization::AgainstBase
        };
        let mut g = rng(data);
        let base = random_matrix(n, b, &mut g);
        let cands: Vec<(DVector<f64>, ColumnTag)> = (0..c)
            .map(|i| (random_vector(n, &mut g), ColumnTag::External { index: b + i }))
            .collect();
        let once = orthogonalize(&base, &external_tags(b, 0), cands, 1e-8, mode, None);
        let appended: Vec<(DVector<f64>, ColumnTag)> = (b..once.len())
            .map(|j| (once.columns.column(j).into_owned(), once.tags[j].clone()))
            .collect();
        let twice = orthogonalize(&base, &external_tags(b, 0), appended, 1e-8, mode, None);
        check(twice.dropped.is_empty(), || "second pass dropped a column".into())?;
        check(twice.len() == once.len(), || "column count changed".into())?;
        let d = (&twice.columns - &once.columns).amax();
        check(d <= 1e-12, || format!("second pass moved columns by {d:e}"))
    })
}

fn z_split_exactness(seed: u64) -> Result<(), String> {
    run(seed, 4, (any_model(), 0.0f64..2.0), |(m, w)| {
        let (c1, c2) = m.components();
        let sys = assemble(&c1, &c2).unwrap();
        let omega = w * TAU * modred::eigen::reference_frequency(&sys.mass, &sys.stiffness);
        let z = split_elastic_interaction(&c1, &c2, omega).unwrap();
        let split = z.split.as_ref().unwrap();
        let order = sys.condensed_order();
        let zg = dynamic_stiffness(&sys, omega).matrix;
        let expect = linalg::submatrix(&zg, &order, &order);
        let d = (&split.condensed() - &expect).amax();
        check(d <= 1e-12 * zg.amax(), || format!("condensed split differs by {d:e}"))?;

        // Stacked layout [i1, j1, i2, j2]; component 1 owns i1 and j1,
        // component 2 owns i2 and j2.
        let [_, j1, i2, j2] = split.block_offsets();
        let owner = |r: usize| r >= i2;
        let nz = split.elastic.nrows();
        for i in 0..nz {
            for j in 0..nz {
                if owner(i) != owner(j) {
                    check(split.elastic[(i, j)] == 0.0, || format!("Z_E[{i},{j}] off the blocks"))?;
                }
                let junction_row = (j1..i2).contains(&i) || i >= j2;
                if !junction_row {
                    check(split.interaction[(i, j)] == 0.0, || {
                        format!("Z_I[{i},{j}] off junction rows")
                    })?;
                }
            }
        }
        Ok(())
    })
}

fn z_energy(seed: u64) -> Result<(), String> {
    run(seed, 6, (any_model(), 0.0f64..2.0, any::<u64>()), |(m, w, data)| {
        let sys = m.system();
        let omega = w * TAU * modred::eigen::reference_frequency(&sys.mass, &sys.stiffness);
        let z = dynamic_stiffness(&sys, omega).matrix;
        check(z == z.transpose(), || "Z not exactly symmetric".into())?;
        let u = random_vector(sys.n_global, &mut rng(data));
        let (ek, em) = (u.dot(&(&sys.stiffness * &u)), u.dot(&(&sys.mass * &u)));
        let ez = u.dot(&(&z * &u));
        let scale = ek.abs() + omega * omega * em.abs();
        check((ez - (ek - omega * omega * em)).abs() <= 1e-12 * scale, || {
            "uᵀZu mismatch".into()
        })
    })
}

fn assembly_commutes(seed: u64) -> Result<(), String> {
    run(seed, 3, any_model(), |m| {
        let (c1, c2) = m.components();
        let a = full_modes(&assemble(&c1, &c2).unwrap());
        let b = full_modes(&assemble(&c2, &c1).unwrap());
        check(a.len() == b.len(), || "sizes differ".into())?;
        let lmax = a.eigenvalues.last().copied().unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            check((x - y).abs() <= 1e-10 * x.abs().max(1e-6 * lmax), || {
                format!("{x} vs {y}")
            })?;
        }
        Ok(())
    })
}

fn rayleigh_scale(seed: u64) -> Result<(), String> {
    let alpha = prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3];
    run(seed, 8, (any_model(), any::<u64>(), alpha), |(m, data, alpha)| {
        let sys = m.system();
        let v = random_vector(sys.n_global, &mut rng(data));
        let (a, b) = (
            rayleigh_root(&sys.mass, &sys.stiffness, &v),
            rayleigh_root(&sys.mass, &sys.stiffness, &(&v * alpha)),
        );
        check(rel(b, a) <= 1e-12, || format!("r changed from {a} to {b}"))
    })
}

fn rayleigh_exact(seed: u64) -> Result<(), String> {
    run(seed, 4, any_model(), |m| {
        let (c1, c2) = m.components();
        for c in [&c1, &c2] {
            let modes = solve_free_modes(c, BandSpec::all(), true).unwrap();
            for i in modes.elastic_indices() {
                let r = rayleigh_root(&c.mass, &c.stiffness, &modes.shape(i));
                let w = TAU * modes.frequencies[i];
                check(rel(r, w) <= 1e-10, || format!("r = {r}, 2πf = {w}"))?;
            }
        }
        Ok(())
    })
}

fn epsilon_scale(seed: u64) -> Result<(), String> {
    let alpha = prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3];
    run(seed, 6, (any_model(), any::<u64>(), alpha), |(m, data, alpha)| {
        let sys = m.system();
        let flex = Flexibility::new(&sys).unwrap();
        let t = random_matrix(sys.n_global, (sys.n_global / 2).max(m.nullity() + 1), &mut rng(data));
        let reduced = solve_reduced(&t, &sys, BandSpec::all()).unwrap();
        for i in m.nullity()..reduced.len() {
            let phi = reduced.shape(i);
            let f = reduced.frequencies[i];
            let (p1, f1) = epsilon_pair(&sys, &flex, f, &phi);
            let (p2, f2) = epsilon_pair(&sys, &flex, f, &(&phi * alpha));
            check(rel(p2, p1) <= 1e-12 && rel(f2, f1) <= 1e-12, || {
                format!("mode {i}: ({p1:e}, {f1:e}) vs ({p2:e}, {f2:e})")
            })?;
        }
        Ok(())
    })
}

fn cond_permutation(seed: u64) -> Result<(), String> {
    run(seed, 16, (2usize..30, 1usize..10, any::<u64>()), |(n, r, data)| {
        use rand::seq::SliceRandom;
        let r = r.min(n);
        let mut g = rng(data);
        let a = random_matrix(n, r, &mut g);
        let mut order: Vec<usize> = (0..r).collect();
        order.shuffle(&mut g);
        let b = DMatrix::from_fn(n, r, |i, j| a[(i, order[j])]);
        let (ca, cb) = (condition_number(&a), condition_number(&b));
        check(rel(cb, ca) <= 1e-10, || format!("{ca} vs {cb}"))
    })
}

fn static_limit(seed: u64) -> Result<(), String> {
    run(seed, 3, any_model(), |m| {
        let sys = m.system();
        let nj = sys.junction_global.len();
        let theta = svd_coupling_vectors(&sys, &InterfaceBasis::identity(nj), &[0.0], Exec::default()).unwrap();
        let cols: Vec<DVector<f64>> = theta.into_iter().map(|c| c.shape).collect();
        let a = linalg::columns_to_matrix(sys.n_global, &cols);
        let b = static_constraint_modes(&sys).unwrap();
        let worst = principal_angles(&a, &b).into_iter().fold(0.0, f64::max);
        check(worst < 1e-8, || format!("largest principal angle {worst:e} rad"))
    })
}

fn chain_band(m: &Model, frac: f64) -> BandSpec {
    let sys = m.system();
    let full = full_modes(&sys);
    let f = full.frequencies[1 + ((full.len() - 2) as f64 * frac) as usize];
    let next = full.frequencies.iter().copied().find(|&x| x > f).unwrap_or(2.0 * f);
    BandSpec::new(0.0, 0.5 * (f + next)).unwrap()
}

fn enrichment_model() -> impl Strategy<Value = (Model, f64)> {
    ((4usize..14, 4usize..14, 0.5f64..4.0, 0.5f64..4.0), 0.1f64..0.6)
        .prop_map(|((n1, n2, e, rho), frac)| (Model::Chain { n1, n2, e, rho }, frac))
}

fn arnoldi_properties(seed: u64) -> Result<(), String> {
    run(
        seed,
        4,
        (enrichment_model(), any::<u64>(), 1usize..5),
        |((m, frac), pick, n)| {
            let sys = m.system();
            let band = chain_band(&m, frac);
            let basis = build_basis(&sys, Method::Free, &BasisConfig::new(band)).unwrap().basis;
            let modes = basis.solve(&sys, band).unwrap();
            let elastic: Vec<usize> = modes.elastic_indices().collect();
            if elastic.is_empty() {
                return Ok(());
            }
            let i = elastic[(pick % elastic.len() as u64) as usize];
            let q = orthonormal_columns(&basis.columns, 1e-12);
            let block = arnoldi_block(&sys, &q, i, modes.frequencies[i], &modes.shape(i), n, 1e-8).unwrap();
            if block.vectors.is_empty() {
                return Ok(());
            }
            let g = linalg::columns_to_matrix(sys.n_global, &block.vectors);
            let dev = max_dev_from_identity(&(g.transpose() * &g));
            check(dev <= 1e-10, || format!("GᵀG deviates from I by {dev:e}"))?;
            let qm = linalg::columns_to_matrix(sys.n_global, &q);
            let off = (qm.transpose() * &g).amax();
            check(off <= 1e-10, || format!("block leaks {off:e} into the basis"))
        },
    )
}

/// MAC of each full mode with its partner, 0 when unpaired.
fn paired_macs(full: &ModeSet, reduced: &ModeSet) -> Vec<f64> {
    let p = pair_and_average(full, reduced, true, PairingRule::Greedy).unwrap();
    full.elastic_indices()
        .map(|i| p.pairs.iter().find(|q| q.full == i).map_or(0.0, |q| q.mac))
        .collect()
}

fn enrichment_properties(seed: u64) -> Result<(), String> {
    run(seed, 3, enrichment_model(), |(m, frac)| {
        let sys = m.system();
        let band = chain_band(&m, frac);
        let full = solve_full(&sys, band).unwrap();
        let t0 = build_basis(&sys, Method::Free, &BasisConfig::new(band)).unwrap().basis;
        let before = paired_macs(&full, &t0.solve(&sys, modred::quality::scoring_band(band)).unwrap());
        let cfg = EnrichmentConfig::default();
        let out = enrich::enrich(&sys, &t0, band, &cfg).unwrap();
        let (after_modes, _) =
            modred::quality::reduced_modes(&sys, &out.basis, modred::quality::scoring_band(band)).unwrap();
        let after = paired_macs(&full, &after_modes);
        for (k, (a, b)) in after.iter().zip(&before).enumerate() {
            check(*a >= b - 1e-6, || format!("mode {k}: MAC fell from {b} to {a}"))?;
        }
        if out.rounds > 0 {
            let prev = &out.reports[out.reports.len() - 2];
            let ff = t0.count(ColumnTag::is_free_free);
            let bound = ff + prev.per_mode.len() + m.nullity() + cfg.arnoldi_per_mode * prev.flagged.len();
            check(out.basis.len() <= bound, || {
                format!("basis {} exceeds restart bound {bound}", out.basis.len())
            })?;
        }
        Ok(())
    })
}

fn indicator_soundness(seed: u64) -> Result<(), String> {
    let method = prop_oneof![Just(Method::Free), Just(Method::Svd), Just(Method::Cb)];
    run(seed, 4, (enrichment_model(), method), |((m, frac), method)| {
        let sys = m.system();
        let band = chain_band(&m, frac);
        let full = solve_full(&sys, band).unwrap();
        let basis = build_basis(&sys, method, &BasisConfig::new(band)).unwrap().basis;
        let (reduced, _) = modred::quality::reduced_modes(&sys, &basis, modred::quality::scoring_band(band)).unwrap();
        let report = enrich::indicator(&sys, &reduced.in_band(&band), &EnrichmentConfig::default()).unwrap();
        let pairing = pair_and_average(&full, &reduced, true, PairingRule::Greedy).unwrap();
        for mi in &report.per_mode {
            let paired = pairing.pairs.iter().find(|p| p.reduced == mi.index);
            if mi.epsilon_flex <= 1e-8 {
                let mac = paired.map_or(0.0, |p| p.mac);
                check(mac >= 0.999, || format!("ε = {:e} but MAC {mac}", mi.epsilon_flex))?;
            }
        }
        Ok(())
    })
}
