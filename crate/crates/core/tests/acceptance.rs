//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::process::ExitCode;
use std::time::Instant;

use displab::disk::{
    boundary_profile, max_offset, radial_sweep, strong_min_check, DiskGrid, MinVerdict,
};
use displab::displacement::{
    classify_alternative, ground_state, hole_sweep_full, linspace, outside_support_variation,
    reflection_identity_check, sweep_full, Alternative, HoleShape, SolveOptions, SweepTable,
};
use displab::eigen::{dense_oracle, lowest_eigenpairs_with, EigenOptions};
use displab::lattice::{
    bracketing_check, member_rng, minimizer_check, period_grid, random_config, sample_random_configs,
};
use displab::operator::{assemble_operator, BoundaryCondition};
use displab::perturbation::{
    corner_heuristic_2d, fh_derivative_check, laplacian_identity_diagnostic, second_order_check, DEFAULT_DELTA,
};
use displab::potential::{default_case2, Shape};
use displab::{Displacement, GridSpec, PotentialSpec};
use rand::Rng;

const TOL: f64 = 1e-10;
const DISK_TOL: f64 = 1e-8;

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

type Criterion = fn() -> Result<Outcome, displab::LabError>;

fn corners_of(t: &SweepTable, d_snap: f64) -> usize {
    t.argmin_set(1e-8)
        .iter()
        .filter(|r| r.a.0.iter().all(|v| (v.abs() - d_snap).abs() < 1e-12))
        .count()
}

/// Extremal pattern of a full 2D sweep: (argmax at 0, argmin = 4 corners,
/// worst monotone step, corner spread).
fn pattern(t: &SweepTable) -> (bool, bool, f64, f64) {
    let d_snap = t.records.iter().map(|r| r.a.0[0]).fold(0.0, f64::max);
    let at_zero = t.argmax().is_some_and(|r| r.a.0.iter().all(|&v| v == 0.0));
    let set = t.argmin_set(1e-8);
    let corners_ok = set.len() == 4 && corners_of(t, d_snap) == 4;
    let step = (0..2).map(|ax| t.monotone_margin(ax)).fold(f64::NEG_INFINITY, f64::max);
    let ce: Vec<f64> = t
        .records
        .iter()
        .filter(|r| r.a.0.iter().all(|v| (v.abs() - d_snap).abs() < 1e-12))
        .map(|r| r.e0)
        .collect();
    let lo = ce.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ce.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (at_zero, corners_ok, step, (hi - lo) / lo.abs().max(1.0))
}

fn c1_corner_minimization() -> Result<Outcome, displab::LabError> {
    let grid = GridSpec::unit_cube(2, 64)?;
    let opts = SolveOptions::with_tol(TOL);
    let families = [
        ("well", PotentialSpec::well(2, -10.0, 0.3)?),
        ("bump", PotentialSpec::bump(2, 10.0, 0.3)?),
        ("indefinite", PotentialSpec::indefinite(2, 10.0, 0.3)?),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (name, q) in families {
        let class = classify_alternative(&q, &grid, &opts)?;
        let t = sweep_full(&q, 9, &grid, &opts)?;
        let (at_zero, corners, step, spread) = pattern(&t);
        let ok = class.case == Alternative::I
            && at_zero
            && corners
            && step < -10.0 * TOL
            && spread <= 1e-8
            && t.max_residual() <= TOL
            && t.symmetry_defect() <= 2.0 * TOL;
        pass &= ok;
        parts.push(format!(
            "{name}: argmax0={at_zero} corners={corners} worst_step={step:.3e} spread={spread:.1e} sym={:.1e} Esupp={:.4}",
            t.symmetry_defect(),
            class.support_ground_energy
        ));
    }
    Ok(check(pass, parts.join("; ")))
}

fn c2_case_two_flatness() -> Result<Outcome, displab::LabError> {
    let grid = GridSpec::unit_cube(2, 64)?;
    let opts = SolveOptions::with_tol(TOL);
    let q = default_case2(2, 0.3, Shape::Product)?;
    let t = sweep_full(&q, 5, &grid, &opts)?;
    let max_e = t.energies().iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let mut worst_var = 0.0f64;
    for r in &t.records {
        let gs = ground_state(&q, &r.a, &grid, &opts)?;
        worst_var = worst_var.max(outside_support_variation(&q, &r.a, &grid, &gs.vector));
    }
    let class = classify_alternative(&q, &grid, &opts)?;
    Ok(check(
        max_e <= 1e-7 && worst_var <= 1e-8 && class.case == Alternative::II,
        format!("max|E0|={max_e:.2e} outside-variance={worst_var:.2e} support E={:.2e}", class.support_ground_energy),
    ))
}

fn c3_minimizer_identity() -> Result<Outcome, displab::LabError> {
    let opts = SolveOptions::with_tol(TOL);
    let mut pass = true;
    let mut parts = Vec::new();
    for (d, n) in [(1usize, 128usize), (2, 64)] {
        let q = PotentialSpec::well(d, -10.0, 0.3)?;
        let cell = GridSpec::unit_cube(d, n)?;
        let r = minimizer_check(&q, &cell, &period_grid(&cell)?, &opts)?;
        pass &= r.difference <= 2e-10;
        parts.push(format!("d={d}: E0per={:.12} E0N={:.12} diff={:.2e}", r.e_periodic, r.e_neumann, r.difference));
    }
    Ok(check(pass, parts.join("; ")))
}

fn c4_bracketing() -> Result<Outcome, displab::LabError> {
    let opts = SolveOptions::with_tol(TOL);
    let q2 = PotentialSpec::well(2, -10.0, 0.3)?;
    let cell2 = GridSpec::unit_cube(2, 64)?;
    let mut worst = f64::INFINITY;
    for m in 0..20 {
        let config = random_config(&q2, 2, &mut member_rng(2024, m))?;
        worst = worst.min(bracketing_check(&q2, &config, &cell2, &opts)?.margin);
    }
    let q1 = PotentialSpec::well(1, -10.0, 0.3)?;
    let cell1 = GridSpec::unit_cube(1, 128)?;
    let ens = sample_random_configs(&q1, 50, 7, 8, &cell1, &opts)?;
    Ok(check(
        worst >= -1e-9 && ens.margin() >= -1e-9,
        format!(
            "torus-minus-site worst margin={worst:.3e} over 20 configs; ensemble min={:.10} bound={:.10} margin={:.3e}",
            ens.min,
            ens.bound,
            ens.margin()
        ),
    ))
}

fn c5_reflection_identity() -> Result<Outcome, displab::LabError> {
    let opts = SolveOptions::with_tol(TOL);
    let mut worst_res = 0.0f64;
    let mut worst_var = f64::INFINITY;
    let mut cases = 0;
    for (d, n) in [(1usize, 128usize), (2, 64)] {
        let grid = GridSpec::unit_cube(d, n)?;
        for q in [PotentialSpec::well(d, -10.0, 0.3)?, PotentialSpec::bump(d, 10.0, 0.3)?] {
            for s in [0usize, 4, 8, 12] {
                let mut a = vec![0.0; d];
                a[0] = s as f64 * grid.h[0];
                let r = reflection_identity_check(&q, &Displacement(a), &grid, &opts)?;
                worst_res = worst_res.max(r.residual);
                worst_var = worst_var.min(r.quotient_neumann - r.e0_shifted);
                cases += 1;
            }
        }
    }
    Ok(check(
        worst_res <= 1e-10 && worst_var >= -TOL,
        format!("{cases} shifts: max residual={worst_res:.2e}, min(Q - E0(a))={worst_var:.3e}"),
    ))
}

fn c6_perturbation() -> Result<Outcome, displab::LabError> {
    let grid = GridSpec::unit_cube(2, 64)?;
    let opts = SolveOptions::with_tol(TOL);
    let q = PotentialSpec::well(2, -10.0, 0.3)?;
    let fh = fh_derivative_check(&q, &linspace(-0.1, 0.1, 5), &grid, DEFAULT_DELTA, &opts)?;
    let so = second_order_check(&q, 200, &grid, &opts)?;
    let fd2 = so.fd_second[0];
    let sum = so.sum_second[0];
    let rel = (fd2 - sum).abs() / sum.abs();
    let first = fh.max_first_discrepancy();
    let concave = fh.fd_second.iter().all(|&v| v <= 0.0) && fd2 <= 0.0;
    Ok(check(
        first <= 1e-4 && concave && rel <= 0.05 && so.doubling_deltas.0 > so.doubling_deltas.1,
        format!(
            "max|FD1-FH|={first:.2e}; E0''(0): FD={fd2:.6} sum(K=200)={sum:.6} rel={rel:.2e} full={:.6}; deltas K->2K {:.2e} 2K->4K {:.2e}",
            so.sum_full, so.doubling_deltas.0, so.doubling_deltas.1
        ),
    ))
}

fn c7_corner_heuristic() -> Result<Outcome, displab::LabError> {
    let grid = GridSpec::unit_cube(2, 64)?;
    let q = PotentialSpec::well(2, -10.0, 0.3)?;
    let neg = q.negated()?;
    let s = linspace(-q.d_max(), q.d_max(), 9);
    let mut at_zero = f64::NAN;
    let mut max_abs = 0.0f64;
    let mut max_at_corner = 0.0f64;
    let mut all_negative = true;
    let mut sign_invariant = true;
    for &x in &s {
        for &y in &s {
            let (a, _) = Displacement(vec![x, y]).snapped(&grid, q.d_max());
            let v = corner_heuristic_2d(&q, &a, &grid)?;
            sign_invariant &= v == corner_heuristic_2d(&neg, &a, &grid)?;
            if x == 0.0 && y == 0.0 {
                at_zero = v;
                continue;
            }
            all_negative &= v < 0.0;
            max_abs = max_abs.max(v.abs());
            if x.abs() == q.d_max() && y.abs() == q.d_max() {
                max_at_corner = max_at_corner.max(v.abs());
            }
        }
    }
    Ok(check(
        at_zero.abs() <= 1e-12 && all_negative && max_at_corner == max_abs && sign_invariant,
        format!("value(0)={at_zero:.1e}; max|value|={max_abs:.6e} at corners={}; sign-invariant={sign_invariant}", max_at_corner == max_abs),
    ))
}

fn c8_disk() -> Result<Outcome, displab::LabError> {
    let dg = DiskGrid::default_unit();
    let opts = SolveOptions::with_tol(DISK_TOL);
    let well = PotentialSpec::well(2, -10.0, 0.25)?.with_shape(Shape::Radial);
    let samples = linspace(0.0, max_offset(&well, &dg, 0.02), 7);
    let t = radial_sweep(&well, &samples, &dg, &opts)?;
    let e = t.energies();
    let decreasing = e.windows(2).all(|w| w[1] < w[0]);
    let (v_well, excess) = strong_min_check(&t, 10.0 * DISK_TOL)?;
    let c2 = default_case2(2, 0.25, Shape::Radial)?;
    let t2 = radial_sweep(&c2, &linspace(0.0, max_offset(&c2, &dg, 0.02), 7), &dg, &opts)?;
    let (v_c2, flat) = strong_min_check(&t2, 10.0 * DISK_TOL)?;
    let lid = laplacian_identity_diagnostic(&well, 40, &dg, 0.05, &opts)?;
    let zero = PotentialSpec::zero(2, 0.25)?.with_shape(Shape::Radial);
    let lz = laplacian_identity_diagnostic(&zero, 40, &dg, 0.05, &opts)?;
    let zero_ok = lz.lhs == 0.0 && lz.curvature_term == 0.0 && lz.mode_sum.abs() <= 1e-12;
    let bp = boundary_profile(&well, &dg, &opts)?;
    let pass = decreasing
        && v_well == MinVerdict::NoInteriorMin
        && v_c2 == MinVerdict::IdenticallyZero
        && lid.lhs < 0.0
        && lid.rhs() < 0.0
        && zero_ok;
    Ok(check(
        pass,
        format!(
            "well sweep decreasing={decreasing} verdict={} (min excess {excess:.3e}); case2 verdict={} (max|E0| {flat:.1e}); \
             identity lhs={:.5} rhs={:.5} (curv {:.1e}, modes {} used); zero potential terms vanish={zero_ok}; \
             outer-ring excess over boundary value {:.2e}",
            v_well.as_str(),
            v_c2.as_str(),
            lid.lhs,
            lid.rhs(),
            lid.curvature_term,
            lid.modes_used,
            bp.outer_excess[0]
        ),
    ))
}

fn random_operator(rng: &mut impl Rng, i: usize) -> Result<(String, displab::OperatorHandle, usize), displab::LabError> {
    let two_d = i % 2 == 1;
    let grid = if two_d {
        GridSpec::unit_cube(2, rng.random_range(8..=16))?
    } else {
        GridSpec::unit_cube(1, rng.random_range(32..=64))?
    };
    let n = grid.cell_count();
    let q: Vec<f64> = (0..n).map(|_| rng.random_range(-20.0..20.0)).collect();
    let bc = match (i / 2) % 4 {
        0 => BoundaryCondition::neumann(),
        1 => BoundaryCondition::periodic(),
        2 => BoundaryCondition::bloch(&(0..grid.dim).map(|_| rng.random_range(0.1..6.2)).collect::<Vec<_>>()),
        _ => {
            let mask = (0..n)
                .map(|lin| grid.point(lin).iter().all(|x| x.abs() < 0.2))
                .collect();
            BoundaryCondition::dirichlet_mask(mask)
        }
    };
    let label = format!("{:?} n={:?}", bc.kind, grid.n);
    let k = (n / 10).clamp(1, 3);
    Ok((label, assemble_operator(&grid, &q, bc)?, k))
}

fn c9_oracle_equivalence() -> Result<Outcome, displab::LabError> {
    let mut rng = member_rng(99, 0);
    let mut worst = 0.0f64;
    let mut count = 0;
    let mut kinds = std::collections::BTreeSet::new();
    for i in 0..24 {
        let (label, op, k) = random_operator(&mut rng, i)?;
        let dense = dense_oracle(&op)?;
        let it = lowest_eigenpairs_with(&op, &EigenOptions::new(k, TOL, 2000))?;
        for j in 0..k {
            worst = worst.max((it.values[j] - dense[j]).abs());
        }
        kinds.insert(label.split(' ').next().unwrap_or_default().to_string());
        count += 1;
    }
    Ok(check(worst <= 1e-8 && count >= 20, format!("{count} operators ({kinds:?}); max deviation {worst:.2e}")))
}

fn c10_dirichlet_hole() -> Result<Outcome, displab::LabError> {
    let grid = GridSpec::unit_cube(2, 64)?;
    let hole = HoleShape::Square { half_width: 0.15 };
    let t = hole_sweep_full(hole, 5, &grid, &SolveOptions::with_tol(TOL))?;
    let (at_zero, corners, _, spread) = pattern(&t);
    let min_e = t.energies().iter().copied().fold(f64::INFINITY, f64::min);
    Ok(check(
        at_zero && corners && min_e > 0.0,
        format!(
            "argmax at center={at_zero}; argmin = 4 corners={corners} (spread {spread:.1e}); min E0={min_e:.6}; max shift {:.4}",
            hole.max_shift(&grid)
        ),
    ))
}

fn main() -> ExitCode {
    let criteria: [(&str, Criterion); 10] = [
        ("corner-minimization", c1_corner_minimization),
        ("case-ii-flatness", c2_case_two_flatness),
        ("minimizer-identity", c3_minimizer_identity),
        ("neumann-bracketing", c4_bracketing),
        ("reflection-extension", c5_reflection_identity),
        ("perturbation-formulas", c6_perturbation),
        ("corner-heuristic", c7_corner_heuristic),
        ("disk-strong-minimum", c8_disk),
        ("oracle-equivalence", c9_oracle_equivalence),
        ("dirichlet-hole", c10_dirichlet_hole),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = f().unwrap_or_else(|e| check(false, format!("error: {e}")));
        let status = if outcome.pass { "PASS" } else { "FAIL" };
        if !outcome.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {name}: {status} [{:.1} s] {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            outcome.detail
        );
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
