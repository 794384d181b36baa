//! Coupling-constant perturbation theory for `-Δ + λ q` and the Laplacian
//! identity for the disk ground-state energy.

use std::f64::consts::PI;
use std::io::Write;

use crate::disk::{
    boundary_fit, disk_ground_state, ring_potential, sample_disk_potential, sector_modes, DiskGrid,
};
use crate::displacement::{solve_ground, SolveOptions};
use crate::eigen::lowest_eigenpairs_with;
use crate::error::{LabError, Result};
use crate::grid::{Displacement, GridSpec};
use crate::operator::{assemble_operator, BoundaryCondition};
use crate::par;
use crate::potential::{sample_potential, PotentialSpec};
use crate::spectral;

/// Step of the λ finite differences.
pub const DEFAULT_DELTA: f64 = 1e-3;

/// Largest number of modes accepted by the second-order sum.
pub const MAX_MODES: usize = 400;

#[derive(Debug, Clone, Default)]
pub struct PerturbReport {
    pub lambda_samples: Vec<f64>,
    pub e0_curve: Vec<f64>,
    pub fd_first: Vec<f64>,
    pub fh_first: Vec<f64>,
    pub fd_second: Vec<f64>,
    /// Truncated second-order sum per sample (NaN where not evaluated).
    pub sum_second: Vec<f64>,
    pub modes_used: usize,
    /// Sum over all modes of the grid (exact discrete second derivative).
    pub sum_full: f64,
    /// `|S(K) - S(2K)|` and `|S(2K) - S(4K)|`.
    pub doubling_deltas: (f64, f64),
    /// Smallest `E_1 - E_0` seen.
    pub min_gap: f64,
}

impl PerturbReport {
    /// Largest `|FD' - (u0, q u0)|` over the samples.
    pub fn max_first_discrepancy(&self) -> f64 {
        self.fd_first.iter().zip(&self.fh_first).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["lambda", "E0", "fd1", "fh1", "fd2", "sum2"])?;
        for i in 0..self.lambda_samples.len() {
            let f = |v: &[f64]| v.get(i).map_or_else(String::new, |x| format!("{x:.17e}"));
            wr.write_record([
                f(&self.lambda_samples),
                f(&self.e0_curve),
                f(&self.fd_first),
                f(&self.fh_first),
                f(&self.fd_second),
                f(&self.sum_second),
            ])?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "modes_used {}\nsum_full {:.10e}\ntail {:.3e}\ndelta_K_2K {:.3e}\ndelta_2K_4K {:.3e}\nmin_gap {:.6e}\n",
            self.modes_used,
            self.sum_full,
            self.sum_second.iter().find(|v| v.is_finite()).map_or(f64::NAN, |s| (self.sum_full - s).abs()),
            self.doubling_deltas.0,
            self.doubling_deltas.1,
            self.min_gap
        )
    }
}

/// `E_0(λ)` and the gap for `-Δ + λ q` (Neumann).
struct Coupled {
    grid: GridSpec,
    field: Vec<f64>,
    opts: SolveOptions,
}

impl Coupled {
    fn new(q: &PotentialSpec, grid: &GridSpec, opts: &SolveOptions) -> Result<Self> {
        let field = sample_potential(q, grid, &Displacement::zero(q.dim))?;
        Ok(Self { grid: grid.clone(), field, opts: *opts })
    }

    fn op(&self, lambda: f64) -> Result<crate::operator::OperatorHandle> {
        let f: Vec<f64> = self.field.iter().map(|v| lambda * v).collect();
        assemble_operator(&self.grid, &f, BoundaryCondition::neumann())
    }

    fn energy(&self, lambda: f64) -> Result<f64> {
        Ok(solve_ground(&self.op(lambda)?, &self.opts)?.energy)
    }

    /// `(E_0, (u_0, q u_0), E_1 - E_0)`.
    fn state(&self, lambda: f64) -> Result<(f64, f64, f64)> {
        let res = lowest_eigenpairs_with(&self.op(lambda)?, &self.opts.eigen(2))?;
        let u = &res.vectors[0];
        let qu: Vec<f64> = u.iter().zip(&self.field).map(|(a, b)| a * b).collect();
        let fh = par::dot(u, &qu) / par::dot(u, u);
        Ok((res.values[0], fh, res.values[1] - res.values[0]))
    }

    /// Five-point first and second derivatives at `lambda`.
    fn derivatives(&self, lambda: f64, delta: f64, e_mid: f64) -> Result<(f64, f64)> {
        let offs = [-2.0, -1.0, 1.0, 2.0];
        let e = par::map_slice(&offs, |&k| self.energy(lambda + k * delta))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let d1 = (e[0] - 8.0 * e[1] + 8.0 * e[2] - e[3]) / (12.0 * delta);
        let d2 = (-e[0] + 16.0 * e[1] - 30.0 * e_mid + 16.0 * e[2] - e[3]) / (12.0 * delta * delta);
        Ok((d1, d2))
    }
}

/// Compare finite-difference `E_0'(λ)` with `(u_0, q u_0)` at each sample.
pub fn fh_derivative_check(
    q: &PotentialSpec,
    lambdas: &[f64],
    grid: &GridSpec,
    delta: f64,
    opts: &SolveOptions,
) -> Result<PerturbReport> {
    let c = Coupled::new(q, grid, opts)?;
    let mut rep = PerturbReport { min_gap: f64::INFINITY, ..Default::default() };
    for &l in lambdas {
        let (e0, fh, gap) = c.state(l)?;
        if gap <= 10.0 * opts.tol {
            return Err(LabError::GapCollapse { lambda: l, gap });
        }
        let (d1, d2) = c.derivatives(l, delta, e0)?;
        rep.lambda_samples.push(l);
        rep.e0_curve.push(e0);
        rep.fh_first.push(fh);
        rep.fd_first.push(d1);
        rep.fd_second.push(d2);
        rep.sum_second.push(f64::NAN);
        rep.min_gap = rep.min_gap.min(gap);
    }
    Ok(rep)
}

/// Second-order sums `-2 Σ (u_0, q u_k)^2 / (E_k - E_0)` over the lowest
/// Neumann-Laplacian modes, sorted ascending; returns the partial sums for
/// every requested count plus the full sum.
pub fn mode_sums(q_field: &[f64], grid: &GridSpec, counts: &[usize]) -> (Vec<f64>, f64) {
    let shape = grid.shape3();
    let bases: Vec<_> = (0..grid.dim).map(|a| spectral::neumann_basis(grid.n[a], grid.h[a])).collect();
    let n = grid.cell_count();
    let u0 = 1.0 / (n as f64).sqrt();
    let mut coef: Vec<f64> = q_field.iter().map(|v| v * u0).collect();
    for (a, b) in bases.iter().enumerate() {
        spectral::transform_real(&mut coef, shape, a, b, true);
    }
    let mut terms: Vec<(f64, f64)> = (1..n)
        .map(|lin| {
            let m = [lin / (shape[1] * shape[2]), (lin / shape[2]) % shape[1], lin % shape[2]];
            let e: f64 = bases.iter().enumerate().map(|(a, b)| b.eigenvalues[m[a]]).sum();
            (e, -2.0 * coef[lin] * coef[lin] / e)
        })
        .collect();
    terms.sort_by(|x, y| x.0.total_cmp(&y.0));
    let full: f64 = terms.iter().map(|t| t.1).sum();
    let partial = counts.iter().map(|&k| terms.iter().take(k).map(|t| t.1).sum()).collect();
    (partial, full)
}

/// FD second derivative of `E_0(λ)` at 0 against the `K`-mode sum.
pub fn second_order_check(q: &PotentialSpec, k: usize, grid: &GridSpec, opts: &SolveOptions) -> Result<PerturbReport> {
    if k == 0 || k > MAX_MODES {
        return Err(LabError::InvalidRequest(format!("K must be in 1..={MAX_MODES}")));
    }
    let c = Coupled::new(q, grid, opts)?;
    let (e0, fh, gap) = c.state(0.0)?;
    let (d1, d2) = c.derivatives(0.0, DEFAULT_DELTA, e0)?;
    let (partial, full) = mode_sums(&c.field, grid, &[k, 2 * k, 4 * k]);
    Ok(PerturbReport {
        lambda_samples: vec![0.0],
        e0_curve: vec![e0],
        fd_first: vec![d1],
        fh_first: vec![fh],
        fd_second: vec![d2],
        sum_second: vec![partial[0]],
        modes_used: k,
        sum_full: full,
        doubling_deltas: ((partial[1] - partial[0]).abs(), (partial[2] - partial[1]).abs()),
        min_gap: gap,
    })
}

/// Leading-mode estimate `-(4/π^2)[(∫ q_a sin πx)^2 + (∫ q_a sin πy)^2]` on
/// the unit square by midpoint quadrature.
pub fn corner_heuristic_2d(q: &PotentialSpec, a: &Displacement, grid: &GridSpec) -> Result<f64> {
    if q.dim != 2 || grid.dim != 2 || !grid.is_unit_cube() {
        return Err(LabError::InvalidRequest("the corner heuristic needs d = 2 on the unit square".into()));
    }
    let field = sample_potential(q, grid, a)?;
    let (nx, ny) = (grid.n[0], grid.n[1]);
    let area = grid.cell_volume();
    let sx: Vec<f64> = grid.centers(0).iter().map(|&x| (PI * x).sin()).collect();
    let sy: Vec<f64> = grid.centers(1).iter().map(|&y| (PI * y).sin()).collect();
    // Mirrored cells are added pairwise first so symmetric fields cancel exactly.
    let mut ix = 0.0;
    for i in 0..nx.div_ceil(2) {
        let im = nx - 1 - i;
        for j in 0..ny {
            let v = field[i * ny + j] * sx[i];
            ix += if im != i { v + field[im * ny + j] * sx[im] } else { v };
        }
    }
    let mut iy = 0.0;
    for j in 0..ny.div_ceil(2) {
        let jm = ny - 1 - j;
        for i in 0..nx {
            let v = field[i * ny + j] * sy[j];
            iy += if jm != j { v + field[i * ny + jm] * sy[jm] } else { v };
        }
    }
    let (ix, iy) = (ix * area, iy * area);
    Ok(-(4.0 / (PI * PI)) * (ix * ix + iy * iy))
}

#[derive(Debug, Clone)]
pub struct LaplacianIdentityReport {
    /// `ΔE_0(0)` by the five-point stencil in `a`.
    pub lhs: f64,
    pub step: f64,
    /// `-2 ∫_{∂D} ∇u_0 · K ∇u_0 dS`.
    pub curvature_term: f64,
    /// Truncated mode sum `-2 Σ_k Σ_i B(u_k, ∂_i u_0)^2 / (E_k - E_0)`.
    pub mode_sum: f64,
    /// Contribution of the last half of the used modes (tail indicator).
    pub tail_estimate: f64,
    pub modes_used: usize,
    pub e0: f64,
}

impl LaplacianIdentityReport {
    pub fn rhs(&self) -> f64 {
        self.curvature_term + self.mode_sum
    }
}

/// Terms of the Laplacian identity for `E_0(a)` at `a = 0` on the disk, for a
/// rotation-invariant potential. Modes are taken from the exact angular
/// sector decomposition; `k` counts the lowest excited modes of all sectors.
pub fn laplacian_identity_diagnostic(
    q: &PotentialSpec,
    k: usize,
    dg: &DiskGrid,
    step: f64,
    opts: &SolveOptions,
) -> Result<LaplacianIdentityReport> {
    if k == 0 || k > 200 {
        return Err(LabError::InvalidRequest("K must be in 1..=200".into()));
    }
    let zero = Displacement::zero(2);
    let field = sample_disk_potential(q, &zero, dg)?;
    let qr = ring_potential(dg, &field)
        .ok_or_else(|| LabError::InvalidRequest("the potential must be rotation invariant at a = 0".into()))?;
    let pts = [[0.0, 0.0], [step, 0.0], [-step, 0.0], [0.0, step], [0.0, -step]];
    let es = par::map_slice(&pts, |p| disk_ground_state(q, &Displacement(p.to_vec()), dg, opts).map(|g| g.energy))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let lhs = (es[1] + es[2] + es[3] + es[4] - 4.0 * es[0]) / (step * step);

    let nr = dg.nr;
    let sectors: Vec<usize> = (0..=dg.nphi / 2).collect();
    let all = par::map_slice(&sectors, |&m| sector_modes(dg, &qr, m));
    let ground = &all[0];
    let e0 = ground.values[0];
    // u_0 = g(ρ) with unit norm; its radial second derivative at R.
    let g = ground.profiles.column(0);
    let sign = if g.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    let (_, g_rr) = boundary_fit(dg, sign * g[nr - 1], sign * g[nr - 2]);
    // Radial ground state: the tangential gradient vanishes on ∂D.
    let (alpha0, _) = boundary_fit(dg, sign * g[nr - 1], sign * g[nr - 2]);
    let tangential = vec![alpha0; dg.nphi];
    let curvature_term = {
        let mut acc = 0.0;
        for j in 0..dg.nphi {
            let d = (tangential[(j + 1) % dg.nphi] - tangential[(j + dg.nphi - 1) % dg.nphi]) / (2.0 * dg.radius * dg.dphi);
            acc += d * d * dg.radius * dg.dphi;
        }
        -2.0 / dg.radius * acc
    };

    // Excited modes of all sectors, ascending; multiplicity 2 for 0 < m < nphi/2.
    let mut excited: Vec<(f64, usize, usize)> = Vec::new();
    for s in &all {
        let mult = if s.m == 0 || s.m == dg.nphi / 2 { 1 } else { 2 };
        for (idx, &v) in s.values.iter().enumerate() {
            if s.m == 0 && idx == 0 {
                continue;
            }
            for _ in 0..mult {
                excited.push((v, s.m, idx));
            }
        }
    }
    excited.sort_by(|x, y| x.0.total_cmp(&y.0));
    let used = &excited[..k.min(excited.len())];
    // Only m = 1 modes pair with ∂_x u_0 = g'(ρ) cos φ and ∂_y u_0 = g'(ρ) sin φ.
    let ang: f64 = (0..dg.nphi).map(|j| dg.angle(j).cos().powi(2)).sum::<f64>() * dg.dphi;
    let terms: Vec<f64> = used
        .iter()
        .map(|&(v, m, idx)| {
            if m != 1 {
                return 0.0;
            }
            let f = all[1].profiles.column(idx);
            let (alpha, _) = boundary_fit(dg, f[nr - 1], f[nr - 2]);
            let b = alpha * g_rr * dg.radius * ang;
            -2.0 * b * b / (v - e0)
        })
        .collect();
    let mode_sum: f64 = terms.iter().sum();
    let tail_estimate: f64 = terms[terms.len() / 2..].iter().sum();
    Ok(LaplacianIdentityReport { lhs, step, curvature_term, mode_sum, tail_estimate, modes_used: used.len(), e0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::Shape;

    #[test]
    fn zero_potential_has_zero_derivatives() {
        let g = GridSpec::unit_cube(1, 64).unwrap();
        let q = PotentialSpec::zero(1, 0.3).unwrap();
        let r = second_order_check(&q, 10, &g, &SolveOptions::default()).unwrap();
        assert_eq!(r.sum_second[0], 0.0);
        assert_eq!(r.fd_second[0], 0.0);
        assert_eq!(r.fh_first[0], 0.0);
    }

    #[test]
    fn fh_at_zero_is_mean_of_q() {
        let g = GridSpec::unit_cube(1, 128).unwrap();
        let q = PotentialSpec::well(1, -10.0, 0.3).unwrap();
        let r = fh_derivative_check(&q, &[0.0], &g, DEFAULT_DELTA, &SolveOptions::default()).unwrap();
        let field = sample_potential(&q, &g, &Displacement::zero(1)).unwrap();
        let mean = field.iter().sum::<f64>() / 128.0;
        assert!((r.fh_first[0] - mean).abs() < 1e-12);
        assert!(r.max_first_discrepancy() < 1e-6);
    }

    #[test]
    fn full_mode_sum_is_exact_second_derivative() {
        let g = GridSpec::unit_cube(1, 64).unwrap();
        let q = PotentialSpec::well(1, -10.0, 0.3).unwrap();
        let r = second_order_check(&q, 20, &g, &SolveOptions::default()).unwrap();
        assert!((r.sum_full - r.fd_second[0]).abs() <= 1e-5 * r.sum_full.abs());
        assert!(r.sum_second[0] < 0.0);
    }

    #[test]
    fn corner_heuristic_symmetries() {
        let g = GridSpec::unit_cube(2, 32).unwrap();
        let q = PotentialSpec::well(2, -10.0, 0.3).unwrap();
        assert_eq!(corner_heuristic_2d(&q, &Displacement::zero(2), &g).unwrap(), 0.0);
        let a = Displacement(vec![0.125, -0.0625]);
        let v = corner_heuristic_2d(&q, &a, &g).unwrap();
        let neg = corner_heuristic_2d(&q.negated().unwrap(), &a, &g).unwrap();
        let flip = corner_heuristic_2d(&q, &Displacement(vec![-0.125, 0.0625]), &g).unwrap();
        let swap = corner_heuristic_2d(&q, &Displacement(vec![-0.0625, 0.125]), &g).unwrap();
        assert!(v < 0.0);
        assert_eq!(v, neg);
        assert!((v - flip).abs() <= 1e-14 * v.abs());
        assert!((v - swap).abs() <= 1e-14 * v.abs());
    }

    #[test]
    fn identity_terms_vanish_for_zero_potential() {
        let dg = DiskGrid::new(1.0, 16, 64).unwrap();
        let q = PotentialSpec::zero(2, 0.25).unwrap().with_shape(Shape::Radial);
        let r = laplacian_identity_diagnostic(&q, 20, &dg, 0.05, &SolveOptions::with_tol(1e-9)).unwrap();
        assert_eq!(r.lhs, 0.0);
        assert!(r.mode_sum.abs() < 1e-12);
        assert_eq!(r.curvature_term, 0.0);
    }
}
