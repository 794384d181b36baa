use std::f64::consts::PI;

use displab::disk::{
    angular_variation, assemble_disk_operator, boundary_profile, disk_ground_state, max_offset, radial_sweep,
    strong_min_check, DiskGrid, MinVerdict,
};
use displab::displacement::{linspace, SolveOptions};
use displab::perturbation::laplacian_identity_diagnostic;
use displab::potential::default_case2;
use displab::{Displacement, LinearOperator, PotentialSpec, Shape};

const TOL: f64 = 1e-8;

fn opts() -> SolveOptions {
    SolveOptions::with_tol(TOL)
}

fn radial_well() -> PotentialSpec {
    PotentialSpec::well(2, -10.0, 0.25).unwrap().with_shape(Shape::Radial)
}

fn radial_bump() -> PotentialSpec {
    PotentialSpec::bump(2, 10.0, 0.25).unwrap().with_shape(Shape::Radial)
}

#[test]
fn ground_state_leaves_boundary_value_by_sign_of_energy() {
    let dg = DiskGrid::new(1.0, 48, 128).unwrap();
    let w = boundary_profile(&radial_well(), &dg, &opts()).unwrap();
    assert!(w.energy < 0.0);
    assert!(w.outer_excess.iter().all(|&x| x > 0.0), "{:?}", w.outer_excess);
    let b = boundary_profile(&radial_bump(), &dg, &opts()).unwrap();
    assert!(b.energy > 0.0);
    assert!(b.outer_excess.iter().all(|&x| x < 0.0), "{:?}", b.outer_excess);
}

#[test]
fn energy_depends_only_on_distance_from_center() {
    let dg = DiskGrid::new(1.0, 48, 128).unwrap();
    let q = radial_well();
    let s = 0.3;
    let energies: Vec<f64> = (0..4)
        .map(|k| {
            let t = k as f64 * PI / 2.0;
            let a = Displacement(vec![s * t.cos(), s * t.sin()]);
            let op = assemble_disk_operator(&dg, &q, &a).unwrap();
            displab::displacement::solve_ground(&op, &opts()).unwrap().energy
        })
        .collect();
    for e in &energies {
        assert!((e - energies[0]).abs() <= 2.0 * TOL, "{energies:?}");
    }
}

#[test]
fn centered_radial_ground_state_is_rotation_invariant() {
    let dg = DiskGrid::new(1.0, 48, 128).unwrap();
    let gs = disk_ground_state(&radial_well(), &Displacement::zero(2), &dg, &opts()).unwrap();
    assert!(angular_variation(&dg, &gs.vector) <= 1e-8);
}

#[test]
fn bump_sweep_has_the_same_pattern() {
    let dg = DiskGrid::new(1.0, 48, 128).unwrap();
    let q = radial_bump();
    let t = radial_sweep(&q, &linspace(0.0, max_offset(&q, &dg, 0.02), 6), &dg, &opts()).unwrap();
    let e = t.energies();
    assert!(e.windows(2).all(|w| w[1] < w[0]), "{e:?}");
    assert_eq!(strong_min_check(&t, 10.0 * TOL).unwrap().0, MinVerdict::NoInteriorMin);
}

#[test]
fn zero_and_case_two_potentials_are_flat() {
    let dg = DiskGrid::new(1.0, 48, 128).unwrap();
    let zero = PotentialSpec::zero(2, 0.25).unwrap().with_shape(Shape::Radial);
    let t = radial_sweep(&zero, &linspace(0.0, 0.7, 5), &dg, &opts()).unwrap();
    assert!(t.energies().iter().all(|e| e.abs() <= TOL), "{:?}", t.energies());
    assert_eq!(strong_min_check(&t, 10.0 * TOL).unwrap().0, MinVerdict::IdenticallyZero);

    let c2 = default_case2(2, 0.25, Shape::Radial).unwrap();
    let a = Displacement(vec![0.4, 0.0]);
    let gs = disk_ground_state(&c2, &a, &dg, &opts()).unwrap();
    assert!(gs.energy.abs() <= TOL);
    // constant outside the displaced support
    let outside: Vec<f64> = (0..dg.nr)
        .flat_map(|i| (0..dg.nphi).map(move |j| (i, j)))
        .filter(|&(i, j)| {
            let p = dg.point(i, j);
            ((p[0] - 0.4).powi(2) + p[1] * p[1]).sqrt() >= 0.25
        })
        .map(|(i, j)| gs.vector[i * dg.nphi + j])
        .collect();
    let mean = outside.iter().sum::<f64>() / outside.len() as f64;
    let spread = outside.iter().fold(0.0f64, |m, v| m.max((v - mean).abs()));
    assert!(spread <= 1e-6 * mean, "{spread} vs {mean}");

    let r = laplacian_identity_diagnostic(&c2, 40, &dg, 0.05, &opts()).unwrap();
    assert!(r.lhs.abs() <= 1e-5 && r.rhs().abs() <= 1e-5, "{r:?}");
}

#[test]
fn well_identity_sides_are_negative() {
    let dg = DiskGrid::new(1.0, 48, 128).unwrap();
    let r = laplacian_identity_diagnostic(&radial_well(), 40, &dg, 0.05, &opts()).unwrap();
    assert!(r.lhs < 0.0 && r.rhs() < 0.0, "{r:?}");
    assert_eq!(r.curvature_term, 0.0);
    assert!(r.tail_estimate.abs() < r.mode_sum.abs());
}

#[test]
fn refinement_converges_at_second_order() {
    let q = radial_well();
    let samples = [0.0, 0.3, 0.6];
    let sweep = |nr: usize, nphi: usize| {
        let dg = DiskGrid::new(1.0, nr, nphi).unwrap();
        radial_sweep(&q, &samples, &dg, &opts()).unwrap().energies()
    };
    let (c, m, f) = (sweep(24, 64), sweep(48, 128), sweep(96, 256));
    for i in 0..samples.len() {
        let ratio = (m[i] - c[i]).abs() / (f[i] - m[i]).abs();
        println!("a = {}: differences {:.3e} {:.3e}, ratio {ratio:.2}", samples[i], m[i] - c[i], f[i] - m[i]);
        assert!(ratio >= 3.0, "sample {i}: ratio {ratio}");
    }
}

#[test]
fn free_disk_constant_is_exact_kernel() {
    let dg = DiskGrid::new(1.0, 16, 64).unwrap();
    let zero = PotentialSpec::zero(2, 0.25).unwrap();
    let op = assemble_disk_operator(&dg, &zero, &Displacement::zero(2)).unwrap();
    let w: Vec<f64> = dg.weights().iter().map(|x| x.sqrt()).collect();
    let mut y = vec![0.0; op.dim()];
    op.apply(&w, &mut y);
    assert!(y.iter().all(|&v| v.abs() <= 1e-12), "{:?}", y.iter().fold(0.0f64, |m, v| m.max(v.abs())));
}
