#![allow(dead_code)]

pub mod invariants;

use std::f64::consts::TAU;

use modred::coupling::{assemble, AssembledSystem};
use modred::eigen::{solve_full, BandSpec, ModeSet};
use modred::model::{build_box_pair, build_chain_pair, BoxDivisions, ComponentModel, MaterialSpec};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_spd(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let a = random_matrix(n, n, rng);
    &a * a.transpose() + DMatrix::identity(n, n) * n as f64
}

pub fn chain(n1: usize, n2: usize) -> (ComponentModel, ComponentModel) {
    build_chain_pair(n1, n2, MaterialSpec::unit()).unwrap()
}

pub fn chain_system(n1: usize, n2: usize) -> AssembledSystem {
    let (a, b) = chain(n1, n2);
    assemble(&a, &b).unwrap()
}

pub fn steel_boxes(d1: (usize, usize, usize), d2: (usize, usize, usize)) -> (ComponentModel, ComponentModel) {
    build_box_pair(
        BoxDivisions::new(d1.0, d1.1, d1.2),
        BoxDivisions::new(d2.0, d2.1, d2.2),
        MaterialSpec::steel(),
        0.01,
    )
    .unwrap()
}

pub fn box_system(d1: (usize, usize, usize), d2: (usize, usize, usize)) -> AssembledSystem {
    let (a, b) = steel_boxes(d1, d2);
    assemble(&a, &b).unwrap()
}

/// Free-free frequencies (Hz) of a uniform lumped chain with `n` elements,
/// stiffness `k` per element and mass `m` per element split to its nodes.
pub fn lumped_free_free(n: usize, k: f64, m: f64) -> Vec<f64> {
    (0..=n)
        .map(|j| 2.0 * (k / m).sqrt() * (j as f64 * std::f64::consts::PI / (2.0 * n as f64)).sin() / TAU)
        .collect()
}

/// Same chain with one end clamped.
pub fn lumped_fixed_free(n: usize, k: f64, m: f64) -> Vec<f64> {
    (1..=n)
        .map(|j| 2.0 * (k / m).sqrt() * ((2 * j - 1) as f64 * std::f64::consts::PI / (4.0 * n as f64)).sin() / TAU)
        .collect()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// The box pair used by the comparison and enrichment criteria: 28 elastic
/// modes in band, a 36-DoF junction, and a band edge midway between two
/// well-separated full-model frequencies.
pub struct BoxCase {
    pub sys: AssembledSystem,
    pub band: BandSpec,
    pub full: ModeSet,
}

pub fn box_case() -> BoxCase {
    let sys = box_system((4, 3, 2), (5, 3, 2));
    let all = solve_full(&sys, BandSpec::new(0.0, 1.2e5).unwrap()).unwrap();
    let edge = 0.5 * (all.frequencies[33] + all.frequencies[34]);
    let band = BandSpec::new(0.0, edge).unwrap();
    let full = all.in_band(&band);
    BoxCase { sys, band, full }
}
