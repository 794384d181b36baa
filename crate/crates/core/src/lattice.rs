//! Displacement configurations on finite tori, the periodic cluster
//! minimizer, Neumann bracketing, and seeded random ensembles.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::displacement::{ground_state, solve_ground, SolveOptions};
use crate::error::{LabError, Result};
use crate::grid::{Displacement, GridSpec};
use crate::operator::{assemble_operator, BoundaryCondition};
use crate::par;
use crate::potential::{sample_potential, PotentialSpec};

/// Largest torus side per dimension.
pub fn torus_budget(dim: usize) -> usize {
    match dim {
        1 => 64,
        2 => 4,
        _ => 2,
    }
}

/// One displacement per site of the `L^d` torus, sites in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeConfig {
    pub dim: usize,
    pub l: usize,
    pub omega: Vec<Displacement>,
}

impl LatticeConfig {
    pub fn new(dim: usize, l: usize, omega: Vec<Displacement>) -> Result<Self> {
        if l == 0 || omega.len() != l.pow(dim as u32) {
            return Err(LabError::InvalidRequest(format!(
                "a {dim}-dimensional torus of side {l} needs {} displacements, got {}",
                l.pow(dim as u32),
                omega.len()
            )));
        }
        if omega.iter().any(|w| w.dim() != dim) {
            return Err(LabError::InvalidRequest("displacement dimension mismatch".into()));
        }
        Ok(Self { dim, l, omega })
    }

    /// Every site displaced by the same vector.
    pub fn uniform(dim: usize, l: usize, a: &Displacement) -> Result<Self> {
        Self::new(dim, l, vec![a.clone(); l.pow(dim as u32)])
    }

    /// `ω_i = ((-1)^{i_1} d, ..., (-1)^{i_d} d)`: the 2^d-cluster configuration.
    pub fn minimizer(dim: usize, l: usize, d_max: f64) -> Result<Self> {
        if l % 2 != 0 {
            return Err(LabError::InvalidRequest(format!("the cluster configuration needs even L, got {l}")));
        }
        let omega = (0..l.pow(dim as u32))
            .map(|s| {
                let idx = site_index(s, dim, l);
                Displacement(idx.iter().map(|&i| if i % 2 == 0 { d_max } else { -d_max }).collect())
            })
            .collect();
        Self::new(dim, l, omega)
    }

    pub fn sites(&self) -> usize {
        self.omega.len()
    }

    /// Check every displacement against `q`'s admissible range.
    pub fn validate(&self, q: &PotentialSpec) -> Result<()> {
        if q.dim != self.dim {
            return Err(LabError::InvalidRequest("configuration and potential dimensions differ".into()));
        }
        self.omega.iter().try_for_each(|w| q.check_displacement(w))
    }
}

fn site_index(mut s: usize, dim: usize, l: usize) -> Vec<usize> {
    let mut idx = vec![0; dim];
    for i in (0..dim).rev() {
        idx[i] = s % l;
        s /= l;
    }
    idx
}

/// Torus grid `(-1/2, L - 1/2)^d` with `cell.n` cells per unit cell.
pub fn torus_grid(cell: &GridSpec, l: usize) -> Result<GridSpec> {
    let d = cell.dim;
    let n: Vec<usize> = cell.n.iter().map(|m| m * l).collect();
    GridSpec::new(d, &n, &vec![-0.5; d], &vec![l as f64 - 0.5; d])
}

/// `V_ω` on the torus grid. Each site block is sampled exactly like the unit
/// cube grid `cell` with displacement `ω_i`.
pub fn torus_field(q: &PotentialSpec, config: &LatticeConfig, cell: &GridSpec) -> Result<(GridSpec, Vec<f64>)> {
    if !cell.is_unit_cube() {
        return Err(LabError::InvalidGrid("the per-cell grid must cover the unit cube".into()));
    }
    config.validate(q)?;
    let grid = torus_grid(cell, config.l)?;
    let mut field = vec![0.0; grid.cell_count()];
    let blocks = par::map_slice(&config.omega, |w| sample_potential(q, cell, w));
    for (s, block) in blocks.into_iter().enumerate() {
        let block = block?;
        let site = site_index(s, config.dim, config.l);
        for (lin, v) in block.into_iter().enumerate() {
            let m = cell.multi_index(lin);
            let g: Vec<usize> = (0..config.dim).map(|a| site[a] * cell.n[a] + m[a]).collect();
            field[grid.index(&g)] = v;
        }
    }
    Ok((grid, field))
}

fn check_budget(config: &LatticeConfig) -> Result<()> {
    let b = torus_budget(config.dim);
    if config.l > b {
        return Err(LabError::Budget(format!(
            "torus side {} exceeds the limit {b} in dimension {}",
            config.l, config.dim
        )));
    }
    Ok(())
}

/// Lowest eigenvalue of `-Δ + V_ω` on the `L`-torus with periodic conditions.
pub fn torus_ground_energy(q: &PotentialSpec, config: &LatticeConfig, cell: &GridSpec, opts: &SolveOptions) -> Result<f64> {
    check_budget(config)?;
    let (grid, field) = torus_field(q, config, cell)?;
    let op = assemble_operator(&grid, &field, BoundaryCondition::periodic())?;
    Ok(solve_ground(&op, opts)?.energy)
}

/// Smallest per-axis cell count accepted for the period cell.
pub const MIN_PERIOD_CELLS: usize = 32;

/// Lowest eigenvalue of the Bloch fiber `theta` for the cluster
/// configuration on the period cell `(-1/2, 3/2)^d`.
pub fn periodic_cell_energy(q: &PotentialSpec, theta: &[f64], grid: &GridSpec, opts: &SolveOptions) -> Result<f64> {
    let d = q.dim;
    if grid.dim != d || theta.len() != d {
        return Err(LabError::InvalidRequest("dimension mismatch".into()));
    }
    let on_cell = grid.box_min.iter().all(|&v| v == -0.5) && grid.box_max.iter().all(|&v| v == 1.5);
    if !on_cell {
        return Err(LabError::InvalidGrid("period cell grid must cover (-1/2, 3/2)^d".into()));
    }
    if grid.n.iter().any(|&n| n < MIN_PERIOD_CELLS || n % 2 != 0) {
        return Err(LabError::InvalidGrid(format!(
            "period cell needs an even count of at least {MIN_PERIOD_CELLS} cells per axis, got {:?}",
            grid.n
        )));
    }
    let half: Vec<usize> = grid.n.iter().map(|n| n / 2).collect();
    let cell = GridSpec::new(d, &half, &vec![-0.5; d], &vec![0.5; d])?;
    let config = LatticeConfig::minimizer(d, 2, q.d_max())?;
    let (tg, field) = torus_field(q, &config, &cell)?;
    debug_assert_eq!(tg.n, grid.n);
    let op = assemble_operator(grid, &field, BoundaryCondition::bloch(theta))?;
    Ok(solve_ground(&op, opts)?.energy)
}

/// Period-cell grid with the same spacing as the unit cube grid `cell`.
pub fn period_grid(cell: &GridSpec) -> Result<GridSpec> {
    let d = cell.dim;
    let n: Vec<usize> = cell.n.iter().map(|m| 2 * m).collect();
    GridSpec::new(d, &n, &vec![-0.5; d], &vec![1.5; d])
}

#[derive(Debug, Clone, Serialize)]
pub struct MinimizerReport {
    /// `E_0^per` of the cluster configuration at `theta = 0`.
    pub e_periodic: f64,
    /// Neumann `E_0(a^min)` on the unit cube.
    pub e_neumann: f64,
    pub difference: f64,
}

/// Compare `E_0^per(ω^min)` with the Neumann corner energy on matched grids.
pub fn minimizer_check(q: &PotentialSpec, cell: &GridSpec, period: &GridSpec, opts: &SolveOptions) -> Result<MinimizerReport> {
    if !cell.same_spacing(period) {
        return Err(LabError::InvalidGrid("period and unit cell grids must share the spacing".into()));
    }
    let e_periodic = periodic_cell_energy(q, &vec![0.0; q.dim], period, opts)?;
    let corner = Displacement::corner(q.dim, q.d_max());
    let e_neumann = ground_state(q, &corner, cell, opts)?.energy;
    Ok(MinimizerReport { e_periodic, e_neumann, difference: (e_periodic - e_neumann).abs() })
}

#[derive(Debug, Clone, Serialize)]
pub struct BracketReport {
    pub torus: f64,
    pub min_site: f64,
    /// `torus - min_site`; bracketing requires it to be nonnegative.
    pub margin: f64,
}

/// Torus energy against the smallest per-site Neumann energy.
pub fn bracketing_check(q: &PotentialSpec, config: &LatticeConfig, cell: &GridSpec, opts: &SolveOptions) -> Result<BracketReport> {
    let torus = torus_ground_energy(q, config, cell, opts)?;
    let mut distinct: Vec<&Displacement> = Vec::new();
    for w in &config.omega {
        if !distinct.contains(&w) {
            distinct.push(w);
        }
    }
    let energies = par::map_slice(&distinct, |w| ground_state(q, w, cell, opts).map(|g| g.energy));
    let min_site = energies
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(BracketReport { torus, min_site, margin: torus - min_site })
}

/// Random generator of ensemble member `member`: one ChaCha stream per member.
pub fn member_rng(seed: u64, member: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(member);
    rng
}

/// Configuration with iid uniform displacements on `[-d_max, d_max]^d`.
pub fn random_config(q: &PotentialSpec, l: usize, rng: &mut impl Rng) -> Result<LatticeConfig> {
    let dm = q.d_max();
    let omega = (0..l.pow(q.dim as u32))
        .map(|_| Displacement((0..q.dim).map(|_| rng.random_range(-dm..=dm)).collect()))
        .collect();
    LatticeConfig::new(q.dim, l, omega)
}

#[derive(Debug, Clone, Serialize)]
pub struct EnsembleStats {
    pub seed: u64,
    pub count: usize,
    pub l: usize,
    pub energies: Vec<f64>,
    pub min: f64,
    pub mean: f64,
    /// `(p, value)` pairs of empirical quantiles.
    pub quantiles: Vec<(f64, f64)>,
    /// Neumann corner energy `E_0(a^min)`, the infimum of the spectrum.
    pub bound: f64,
}

pub const MAX_ENSEMBLE: usize = 1000;

/// Torus ground energies of `count` iid random configurations.
pub fn sample_random_configs(
    q: &PotentialSpec,
    count: usize,
    seed: u64,
    l: usize,
    cell: &GridSpec,
    opts: &SolveOptions,
) -> Result<EnsembleStats> {
    if count == 0 || count > MAX_ENSEMBLE {
        return Err(LabError::InvalidRequest(format!("ensemble size must be in 1..={MAX_ENSEMBLE}")));
    }
    let members: Vec<u64> = (0..count as u64).collect();
    let energies = par::map_slice(&members, |&m| {
        let config = random_config(q, l, &mut member_rng(seed, m))?;
        torus_ground_energy(q, &config, cell, opts)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let bound = ground_state(q, &Displacement::corner(q.dim, q.d_max()), cell, opts)?.energy;
    Ok(EnsembleStats::from_energies(seed, l, energies, bound))
}

impl EnsembleStats {
    pub fn from_energies(seed: u64, l: usize, energies: Vec<f64>, bound: f64) -> Self {
        let mut sorted = energies.clone();
        sorted.sort_by(f64::total_cmp);
        let count = energies.len();
        let quantile = |p: f64| -> f64 {
            let pos = p * (count - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
        };
        let quantiles = [0.0, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0].iter().map(|&p| (p, quantile(p))).collect();
        Self {
            seed,
            count,
            l,
            min: sorted[0],
            mean: energies.iter().sum::<f64>() / count as f64,
            energies,
            quantiles,
            bound,
        }
    }

    /// `min - bound`; the infimum bound requires it to be nonnegative.
    pub fn margin(&self) -> f64 {
        self.min - self.bound
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["index", "energy"])?;
        for (i, e) in self.energies.iter().enumerate() {
            wr.write_record([i.to_string(), format!("{e:.17e}")])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Structured summary (seed, count, min, mean, quantiles) as JSON.
    pub fn summary_json(&self) -> String {
        #[derive(Serialize)]
        struct Summary<'a> {
            seed: u64,
            count: usize,
            l: usize,
            min: f64,
            mean: f64,
            bound: f64,
            quantiles: &'a [(f64, f64)],
        }
        serde_json::to_string_pretty(&Summary {
            seed: self.seed,
            count: self.count,
            l: self.l,
            min: self.min,
            mean: self.mean,
            bound: self.bound,
            quantiles: &self.quantiles,
        })
        .expect("summary serializes")
    }
}

/// One entry of the one-dimensional degeneracy probe.
#[derive(Debug, Clone, Serialize)]
pub struct DimerEnergy {
    pub omega: [f64; 2],
    pub energy: f64,
}

/// Torus energies of all 2-periodic configurations `(ω_0, ω_1)` with values
/// on `levels` equispaced points of `[-d_max, d_max]` (d = 1). Returns the
/// full table and the entries within `band` of its minimum.
pub fn degeneracy_probe_1d(
    q: &PotentialSpec,
    levels: usize,
    band: f64,
    cell: &GridSpec,
    opts: &SolveOptions,
) -> Result<(Vec<DimerEnergy>, Vec<DimerEnergy>)> {
    if q.dim != 1 || levels < 2 {
        return Err(LabError::InvalidRequest("the dimer probe needs d = 1 and at least 2 levels".into()));
    }
    let vals = crate::displacement::linspace(-q.d_max(), q.d_max(), levels);
    let pairs: Vec<[f64; 2]> = vals.iter().flat_map(|&a| vals.iter().map(move |&b| [a, b])).collect();
    let table = par::map_slice(&pairs, |&[a, b]| -> Result<DimerEnergy> {
        let config = LatticeConfig::new(1, 2, vec![Displacement(vec![a]), Displacement(vec![b])])?;
        Ok(DimerEnergy { omega: [a, b], energy: torus_ground_energy(q, &config, cell, opts)? })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let min = table.iter().map(|e| e.energy).fold(f64::INFINITY, f64::min);
    let near = table.iter().filter(|e| e.energy - min <= band).cloned().collect();
    Ok((table, near))
}

/// Lowest fiber eigenvalue of the cluster configuration for each `theta`.
pub fn bloch_sweep(q: &PotentialSpec, thetas: &[Vec<f64>], grid: &GridSpec, opts: &SolveOptions) -> Result<Vec<f64>> {
    par::map_slice(thetas, |t| periodic_cell_energy(q, t, grid, opts)).into_iter().collect()
}
