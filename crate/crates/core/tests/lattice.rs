use displab::displacement::{ground_state, linspace, SolveOptions};
use displab::lattice::{
    bloch_sweep, bracketing_check, degeneracy_probe_1d, member_rng, minimizer_check, period_grid, periodic_cell_energy,
    random_config, sample_random_configs, torus_ground_energy, EnsembleStats, LatticeConfig,
};
use displab::potential::default_case2;
use displab::{Displacement, GridSpec, PotentialSpec, Shape};

const TOL: f64 = 1e-10;

fn opts() -> SolveOptions {
    SolveOptions::with_tol(TOL)
}

fn well(d: usize) -> PotentialSpec {
    PotentialSpec::well(d, -10.0, 0.3).unwrap()
}

fn corner_energy(q: &PotentialSpec, cell: &GridSpec) -> f64 {
    ground_state(q, &Displacement::corner(q.dim, q.d_max()), cell, &opts()).unwrap().energy
}

#[test]
fn no_two_torus_config_beats_the_cluster() {
    let q = well(2);
    let cell = GridSpec::unit_cube(2, 32).unwrap();
    let config = LatticeConfig::minimizer(2, 2, q.d_max()).unwrap();
    let e_min = torus_ground_energy(&q, &config, &cell, &opts()).unwrap();
    assert!((e_min - corner_energy(&q, &cell)).abs() <= 2.0 * TOL);

    let mut lowest = f64::INFINITY;
    for m in 0..100 {
        let c = random_config(&q, 2, &mut member_rng(31, m)).unwrap();
        let e = torus_ground_energy(&q, &c, &cell, &opts()).unwrap();
        lowest = lowest.min(e);
        assert!(e >= e_min - TOL, "member {m}: {e} < {e_min}");
    }
    println!("cluster {e_min:.10}, best of 100 random {lowest:.10}");
}

#[test]
fn bracketing_holds_for_adversarial_configs() {
    let q = well(2);
    let cell = GridSpec::unit_cube(2, 32).unwrap();
    let d = q.d_max();
    let same_corner = LatticeConfig::uniform(2, 2, &Displacement::corner(2, d)).unwrap();
    let zero = LatticeConfig::uniform(2, 2, &Displacement::zero(2)).unwrap();
    let alternating = LatticeConfig::new(
        2,
        2,
        vec![
            Displacement(vec![d, 0.0]),
            Displacement(vec![-d, 0.0]),
            Displacement(vec![d, 0.0]),
            Displacement(vec![-d, 0.0]),
        ],
    )
    .unwrap();
    let cluster = LatticeConfig::minimizer(2, 2, d).unwrap();
    for (name, c) in [("same-corner", same_corner), ("zero", zero), ("alternating", alternating)] {
        let r = bracketing_check(&q, &c, &cell, &opts()).unwrap();
        assert!(r.margin >= -TOL, "{name}: {}", r.margin);
    }
    // the bound is attained at the cluster configuration
    let r = bracketing_check(&q, &cluster, &cell, &opts()).unwrap();
    assert!(r.margin >= -TOL && r.margin <= 2.0 * TOL, "{}", r.margin);
}

#[test]
fn torus_of_cluster_is_the_period_cell_energy() {
    let q = well(2);
    let cell = GridSpec::unit_cube(2, 32).unwrap();
    let torus = torus_ground_energy(&q, &LatticeConfig::minimizer(2, 2, q.d_max()).unwrap(), &cell, &opts()).unwrap();
    let per = periodic_cell_energy(&q, &[0.0, 0.0], &period_grid(&cell).unwrap(), &opts()).unwrap();
    assert!((torus - per).abs() <= TOL);
}

#[test]
fn minimizer_identity_for_case_two_is_zero() {
    let q = default_case2(2, 0.3, Shape::Product).unwrap();
    let cell = GridSpec::unit_cube(2, 32).unwrap();
    let r = minimizer_check(&q, &cell, &period_grid(&cell).unwrap(), &opts()).unwrap();
    assert!(r.e_periodic.abs() <= TOL && r.e_neumann.abs() <= TOL, "{r:?}");
}

#[test]
fn ensemble_bound_and_attainment_in_1d() {
    let q = well(1);
    let cell = GridSpec::unit_cube(1, 128).unwrap();
    let stats = sample_random_configs(&q, 50, 7, 2, &cell, &opts()).unwrap();
    assert!(stats.margin() >= -TOL, "{}", stats.margin());
    let again = sample_random_configs(&q, 50, 7, 2, &cell, &opts()).unwrap();
    assert_eq!(stats.energies, again.energies);

    let at_min = torus_ground_energy(&q, &LatticeConfig::minimizer(1, 2, q.d_max()).unwrap(), &cell, &opts()).unwrap();
    assert!((at_min - stats.bound).abs() <= 2.0 * TOL, "{at_min} vs {}", stats.bound);
}

#[test]
fn ensemble_summary_is_structured() {
    let s = EnsembleStats::from_energies(7, 8, vec![-1.0, -2.0, -0.5, -1.5], -2.5);
    assert_eq!(s.min, -2.0);
    assert_eq!(s.margin(), 0.5);
    let json = s.summary_json();
    for key in ["\"seed\": 7", "\"count\": 4", "\"min\": -2.0", "\"quantiles\""] {
        assert!(json.contains(key), "{json}");
    }
    let mut csv = Vec::new();
    s.write_csv(&mut csv).unwrap();
    let csv = String::from_utf8(csv).unwrap();
    assert!(csv.starts_with("index,energy\n0,"));
    assert_eq!(csv.lines().count(), 5);
}

#[test]
fn dimer_probe_finds_the_alternating_pair() {
    let q = well(1);
    let cell = GridSpec::unit_cube(1, 128).unwrap();
    let (table, near) = degeneracy_probe_1d(&q, 5, 10.0 * TOL, &cell, &opts()).unwrap();
    assert_eq!(table.len(), 25);
    let d = q.d_max();
    // reported, not asserted to be unique
    assert!(near.iter().any(|e| e.omega == [d, -d]), "{near:?}");
}

#[test]
fn theta_zero_is_the_lowest_sampled_fiber() {
    let q = well(1);
    let period = period_grid(&GridSpec::unit_cube(1, 64).unwrap()).unwrap();
    let thetas: Vec<Vec<f64>> = linspace(0.0, std::f64::consts::PI, 5).into_iter().map(|t| vec![t]).collect();
    let e = bloch_sweep(&q, &thetas, &period, &opts()).unwrap();
    assert!(e.iter().all(|&x| x >= e[0] - TOL), "{e:?}");
}
