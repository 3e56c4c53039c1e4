mod common;

use std::f64::consts::TAU;

use common::{
    box_system, chain, chain_system, lumped_fixed_free, lumped_free_free, random_matrix, rel, rng, steel_boxes,
};
use modred::eigen::{solve_fixed_interface_modes, solve_free_modes, solve_full, solve_reduced, BandSpec};
use modred::linalg::principal_angles;
use modred::model::{build_chain_pair, MaterialSpec};
use nalgebra::DMatrix;

#[test]
fn two_mass_chain() {
    let m = DMatrix::<f64>::identity(2, 2);
    let k = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
    let modes = modred::eigen::solve_modes(&m, &k, BandSpec::all(), usize::MAX).unwrap();
    assert_eq!(modes.rigid_count, 1);
    assert!(modes.frequencies[0].abs() < 1e-6);
    assert!(rel(modes.frequencies[1], 2f64.sqrt() / TAU) <= 1e-12);
}

#[test]
fn free_box_rigid_modes_span_the_rigid_motions() {
    let (c1, _) = steel_boxes((2, 1, 1), (1, 1, 1));
    let modes = solve_free_modes(&c1, BandSpec::all(), true).unwrap();
    assert_eq!(modes.rigid_count, 6);
    let rigid = modes.shapes.columns(0, 6).into_owned();
    let geo = c1.geometry.as_ref().unwrap().rigid_body_vectors();
    let g = modred::linalg::columns_to_matrix(c1.ndof(), &geo);
    // Subspace MAC of each geometric field against the rigid span.
    for theta in principal_angles(&g, &rigid) {
        assert!(theta.cos().powi(2) >= 0.999, "angle {theta}");
    }
}

#[test]
fn twenty_element_chain_first_five_modes() {
    let (c, _) = build_chain_pair(20, 2, MaterialSpec::unit()).unwrap();
    let modes = solve_free_modes(&c, BandSpec::all(), true).unwrap();
    let expected = lumped_free_free(20, 1.0, 1.0);
    for j in 1..=5 {
        assert!(rel(modes.frequencies[j], expected[j]) <= 1e-8);
    }
}

#[test]
fn clamping_raises_the_fundamental_and_removes_rigid_modes() {
    let (c1, _) = chain(7, 7);
    let fixed = solve_fixed_interface_modes(&c1, BandSpec::all()).unwrap();
    let free = solve_free_modes(&c1, BandSpec::all(), true).unwrap();
    assert!(rel(fixed.frequencies[0], lumped_fixed_free(7, 1.0, 1.0)[0]) <= 1e-8);
    // One clamped DoF interlaces the spectra: free[k] ≤ fixed[k] ≤ free[k + 1].
    for (k, f) in fixed.frequencies.iter().enumerate() {
        assert!(free.frequencies[k] <= *f && *f <= free.frequencies[k + 1], "mode {k}");
    }
    assert!(fixed.frequencies[0] > 0.0);

    let (b1, _) = steel_boxes((1, 1, 1), (1, 1, 1));
    let clamped = solve_fixed_interface_modes(&b1, BandSpec::all()).unwrap();
    assert_eq!(clamped.rigid_count, 0);
}

#[test]
fn exact_modes_reduce_to_themselves() {
    let sys = chain_system(5, 6);
    let full = solve_full(&sys, BandSpec::all()).unwrap();
    let reduced = solve_reduced(&full.shapes, &sys, BandSpec::all()).unwrap();
    for (r, f) in reduced.frequencies.iter().zip(&full.frequencies).skip(1) {
        assert!(rel(*r, *f) <= 1e-10);
    }

    let i = 4;
    let single = solve_reduced(&full.shapes.columns(i, 1).into_owned(), &sys, BandSpec::all()).unwrap();
    assert_eq!(single.len(), 1);
    assert!(rel(single.frequencies[0], full.frequencies[i]) <= 1e-10);
}

#[test]
fn square_random_basis_preserves_the_spectrum() {
    let sys = box_system((1, 1, 1), (1, 1, 1));
    let t = random_matrix(sys.n_global, sys.n_global, &mut rng(3));
    let full = solve_full(&sys, BandSpec::all()).unwrap();
    let reduced = solve_reduced(&t, &sys, BandSpec::all()).unwrap();
    assert_eq!(reduced.rigid_count, 6);
    for (r, f) in reduced.frequencies.iter().zip(&full.frequencies).skip(6) {
        assert!(rel(*r, *f) <= 1e-8, "{r} vs {f}");
    }
}

#[test]
fn band_limits_the_returned_modes() {
    let sys = chain_system(10, 10);
    let all = solve_full(&sys, BandSpec::all()).unwrap();
    let band = BandSpec::new(0.0, 0.5 * (all.frequencies[5] + all.frequencies[6])).unwrap();
    let some = solve_full(&sys, band).unwrap();
    assert_eq!(some.len(), 6);
    assert!(BandSpec::new(1.0, 0.5).is_err());
}
