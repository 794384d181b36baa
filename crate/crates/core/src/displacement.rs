//! Ground-state energy of `-Δ + q(x - a)` on the unit cube with Neumann
//! conditions, as a function of the displacement `a`.

use std::cmp::Ordering;
use std::io::Write;

use crate::eigen::{lowest_eigenpairs_with, EigenOptions};
use crate::error::{LabError, Result};
use crate::grid::{Displacement, GridSpec};
use crate::operator::{assemble_operator, BoundaryCondition, LinearOperator, OperatorHandle};
use crate::par;
use crate::potential::{sample_potential, PotentialKind, PotentialSpec};

/// Absolute threshold separating the two alternatives.
pub const CLASSIFY_TOL: f64 = 1e-6;

/// Solver settings shared by all experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 1000, seed: 0x5eed }
    }
}

impl SolveOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    pub fn eigen(&self, k: usize) -> EigenOptions {
        EigenOptions { k, tol: self.tol, max_iter: self.max_iter, seed: self.seed, guard: 2 }
    }
}

/// Lowest eigenpair of one operator.
#[derive(Debug, Clone)]
pub struct GroundState {
    pub energy: f64,
    pub residual: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
}

/// Lowest eigenpair of an assembled operator.
pub fn solve_ground(op: &dyn LinearOperator, opts: &SolveOptions) -> Result<GroundState> {
    let res = lowest_eigenpairs_with(op, &opts.eigen(1))?;
    Ok(GroundState {
        energy: res.values[0],
        residual: res.residuals[0],
        vector: res.vectors.into_iter().next().unwrap_or_default(),
        iterations: res.iterations,
    })
}

/// Neumann operator on `grid` for `q(x - a)`.
pub fn neumann_operator(q: &PotentialSpec, a: &Displacement, grid: &GridSpec) -> Result<OperatorHandle> {
    let field = sample_potential(q, grid, a)?;
    assemble_operator(grid, &field, BoundaryCondition::neumann())
}

/// Ground state of the Neumann problem with potential `q(x - a)`.
pub fn ground_state(q: &PotentialSpec, a: &Displacement, grid: &GridSpec, opts: &SolveOptions) -> Result<GroundState> {
    solve_ground(&neumann_operator(q, a, grid)?, opts)
}

/// `E_0(a)` at the default solver settings.
pub fn ground_energy(q: &PotentialSpec, a: &Displacement, grid: &GridSpec) -> Result<f64> {
    Ok(ground_state(q, a, grid, &SolveOptions::default())?.energy)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    /// Displacement actually used (grid-snapped).
    pub a: Displacement,
    /// Displacement as requested.
    pub requested: Displacement,
    pub snapped: bool,
    pub e0: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepMeta {
    pub grid: String,
    pub potential: String,
    pub bc: String,
    pub tol: f64,
}

/// Ordered `(a, E_0(a), residual)` records.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub records: Vec<SweepRecord>,
    pub meta: SweepMeta,
}

fn lex(a: &Displacement, b: &Displacement) -> Ordering {
    a.0.iter()
        .zip(&b.0)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| *o != Ordering::Equal)
        .unwrap_or(Ordering::Equal)
}

fn describe_grid(g: &GridSpec) -> String {
    format!("cartesian dim={} n={:?} box={:?}..{:?}", g.dim, g.n, g.box_min, g.box_max)
}

impl SweepTable {
    pub fn new(mut records: Vec<SweepRecord>, meta: SweepMeta) -> Self {
        records.sort_by(|x, y| lex(&x.a, &y.a));
        Self { records, meta }
    }

    pub fn dim(&self) -> usize {
        self.records.first().map_or(0, |r| r.a.dim())
    }

    pub fn energies(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.e0).collect()
    }

    pub fn max_residual(&self) -> f64 {
        self.records.iter().fold(0.0, |m, r| m.max(r.residual))
    }

    /// Energy at a (snapped) displacement, if sampled.
    pub fn lookup(&self, a: &[f64]) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.a.0.iter().zip(a).all(|(x, y)| (x - y).abs() <= 1e-12))
            .map(|r| r.e0)
    }

    /// Record with the largest energy.
    pub fn argmax(&self) -> Option<&SweepRecord> {
        self.records.iter().max_by(|x, y| x.e0.total_cmp(&y.e0))
    }

    /// All records within `rtol * max(1, |E_min|)` of the smallest energy.
    pub fn argmin_set(&self, rtol: f64) -> Vec<&SweepRecord> {
        let Some(min) = self.records.iter().map(|r| r.e0).min_by(f64::total_cmp) else {
            return Vec::new();
        };
        let band = rtol * min.abs().max(1.0);
        self.records.iter().filter(|r| r.e0 - min <= band).collect()
    }

    /// Largest `|E(a) - E(a')|` over sampled pairs related by flipping the
    /// sign of one coordinate.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in &self.records {
            for axis in 0..r.a.dim() {
                let mut m = r.a.0.clone();
                m[axis] = -m[axis];
                if let Some(e) = self.lookup(&m) {
                    worst = worst.max((e - r.e0).abs());
                }
            }
        }
        worst
    }

    /// Lines of records that differ only in `axis`, sorted along it. Requests
    /// that snapped to the same displacement appear once.
    fn lines(&self, axis: usize) -> Vec<Vec<&SweepRecord>> {
        let mut groups: Vec<Vec<&SweepRecord>> = Vec::new();
        for r in &self.records {
            let key = |x: &SweepRecord| -> Vec<f64> {
                x.a.0.iter().enumerate().filter(|(i, _)| *i != axis).map(|(_, v)| *v).collect()
            };
            match groups.iter_mut().find(|g| key(g[0]) == key(r)) {
                Some(g) => g.push(r),
                None => groups.push(vec![r]),
            }
        }
        for g in &mut groups {
            g.sort_by(|x, y| x.a.0[axis].total_cmp(&y.a.0[axis]));
            g.dedup_by(|x, y| x.a.0 == y.a.0);
        }
        groups
    }

    /// Largest successive difference `E(a_{k+1}) - E(a_k)` over all lines
    /// along `axis` restricted to `a_axis >= 0`. Strict decrease with margin
    /// `m` means the returned value is `< -m`.
    pub fn monotone_margin(&self, axis: usize) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for line in self.lines(axis) {
            let half: Vec<&&SweepRecord> = line.iter().filter(|r| r.a.0[axis] >= -1e-15).collect();
            for w in half.windows(2) {
                worst = worst.max(w[1].e0 - w[0].e0);
            }
        }
        worst
    }

    /// Empirical Lipschitz constant `max |ΔE| / |Δa|` along every axis line,
    /// and the largest ratio of a step to the median step of its line.
    pub fn continuity(&self) -> (f64, f64) {
        let mut lip = 0.0f64;
        let mut jump = 0.0f64;
        for axis in 0..self.dim() {
            for line in self.lines(axis) {
                let slopes: Vec<f64> = line
                    .windows(2)
                    .map(|w| ((w[1].e0 - w[0].e0) / (w[1].a.0[axis] - w[0].a.0[axis])).abs())
                    .collect();
                if slopes.is_empty() {
                    continue;
                }
                let mut sorted = slopes.clone();
                sorted.sort_by(f64::total_cmp);
                let median = sorted[sorted.len() / 2];
                for s in &slopes {
                    lip = lip.max(*s);
                    if median > 0.0 {
                        jump = jump.max(s / median);
                    }
                }
            }
        }
        (lip, jump)
    }

    /// CSV with columns `a_1..a_d, E0, residual, req_1..req_d, snapped`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let d = self.dim();
        let mut wr = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (1..=d).map(|i| format!("a_{i}")).collect();
        header.extend(["E0".to_string(), "residual".to_string()]);
        header.extend((1..=d).map(|i| format!("req_{i}")));
        header.push("snapped".into());
        wr.write_record(&header)?;
        for r in &self.records {
            let mut row: Vec<String> = r.a.0.iter().map(|v| format!("{v:.17e}")).collect();
            row.push(format!("{:.17e}", r.e0));
            row.push(format!("{:.6e}", r.residual));
            row.extend(r.requested.0.iter().map(|v| format!("{v:.17e}")));
            row.push(r.snapped.to_string());
            wr.write_record(&row)?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Whitespace columns for gnuplot; 2D sweeps get a blank line between
    /// scan lines (heatmap layout).
    pub fn write_plot_data<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# {}", self.meta.potential)?;
        writeln!(w, "# {}", self.meta.grid)?;
        let d = self.dim();
        let cols: Vec<String> = (1..=d).map(|i| format!("a_{i}")).collect();
        writeln!(w, "# {} E0 residual", cols.join(" "))?;
        let mut prev: Option<f64> = None;
        for r in &self.records {
            if d >= 2 {
                if let Some(p) = prev {
                    if p != r.a.0[0] {
                        writeln!(w)?;
                    }
                }
                prev = Some(r.a.0[0]);
            }
            let a: Vec<String> = r.a.0.iter().map(|v| format!("{v:.10e}")).collect();
            writeln!(w, "{} {:.17e} {:.3e}", a.join(" "), r.e0, r.residual)?;
        }
        Ok(())
    }
}

/// Evenly spaced samples on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

fn sweep_points(
    q: &PotentialSpec,
    grid: &GridSpec,
    points: Vec<Displacement>,
    opts: &SolveOptions,
) -> Result<SweepTable> {
    let limit = q.d_max();
    let snapped: Vec<(Displacement, Displacement, bool)> = points
        .into_iter()
        .map(|req| {
            let (a, moved) = req.snapped(grid, limit);
            (req, a, moved)
        })
        .collect();
    let solved = par::map_slice(&snapped, |(req, a, moved)| -> Result<SweepRecord> {
        let gs = ground_state(q, a, grid, opts)?;
        Ok(SweepRecord { a: a.clone(), requested: req.clone(), snapped: *moved, e0: gs.energy, residual: gs.residual })
    });
    let records = solved.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SweepTable::new(
        records,
        SweepMeta { grid: describe_grid(grid), potential: q.describe(), bc: "neumann".into(), tol: opts.tol },
    ))
}

/// `E_0` along one axis with the other coordinates fixed.
pub fn sweep_axis(
    q: &PotentialSpec,
    axis: usize,
    fixed: &[f64],
    samples: &[f64],
    grid: &GridSpec,
    opts: &SolveOptions,
) -> Result<SweepTable> {
    let d = q.dim;
    if axis >= d || fixed.len() + 1 != d {
        return Err(LabError::InvalidRequest(format!(
            "axis {axis} with {} fixed coordinates in dimension {d}",
            fixed.len()
        )));
    }
    let points = samples
        .iter()
        .map(|&s| {
            let mut v = fixed.to_vec();
            v.insert(axis, s);
            let a = Displacement(v);
            q.check_displacement(&a).map(|_| a)
        })
        .collect::<Result<Vec<_>>>()?;
    sweep_points(q, grid, points, opts)
}

/// Full tensor sweep with `per_axis` samples on `[-d_max, d_max]` per axis.
pub fn sweep_full(q: &PotentialSpec, per_axis: usize, grid: &GridSpec, opts: &SolveOptions) -> Result<SweepTable> {
    if per_axis < 3 || per_axis % 2 == 0 {
        return Err(LabError::InvalidRequest(format!("per_axis must be odd and >= 3, got {per_axis}")));
    }
    let s = linspace(-q.d_max(), q.d_max(), per_axis);
    sweep_points(q, grid, tensor_points(&s, q.dim), opts)
}

fn tensor_points(s: &[f64], d: usize) -> Vec<Displacement> {
    let total = s.len().pow(d as u32);
    (0..total)
        .map(|mut lin| {
            let mut v = vec![0.0; d];
            for i in (0..d).rev() {
                v[i] = s[lin % s.len()];
                lin /= s.len();
            }
            Displacement(v)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alternative {
    /// Strict extrema at the center and the corners.
    I,
    /// `E_0` vanishes identically.
    II,
}

#[derive(Debug, Clone)]
pub struct AlternativeReport {
    pub case: Alternative,
    /// Lowest Neumann eigenvalue of `-Δ + q` on `[-r, r]^d`.
    pub support_ground_energy: f64,
    pub tol_class: f64,
    pub warning: Option<String>,
    pub evidence: Option<String>,
}

impl AlternativeReport {
    /// Attach a one-line summary of a sweep.
    pub fn with_evidence(mut self, t: &SweepTable) -> Self {
        let e = t.energies();
        let lo = e.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = e.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.evidence = Some(format!("{} samples, E0 in [{lo:.6e}, {hi:.6e}]", e.len()));
        self
    }
}

/// Decide which alternative holds from the Neumann problem on the support.
pub fn classify_alternative(q: &PotentialSpec, grid: &GridSpec, opts: &SolveOptions) -> Result<AlternativeReport> {
    let d = q.dim;
    let n: Vec<usize> = (0..d).map(|i| ((2.0 * q.r / grid.h[i]).round() as usize).max(8)).collect();
    let sub = GridSpec::new(d, &n, &vec![-q.r; d], &vec![q.r; d])?;
    let gs = ground_state(q, &Displacement::zero(d), &sub, opts)?;
    let e = gs.energy;
    let case = if e.abs() <= CLASSIFY_TOL { Alternative::II } else { Alternative::I };
    let warning = (q.kind == PotentialKind::Tabulated && e.abs() <= 100.0 * CLASSIFY_TOL).then(|| {
        format!("support energy {e:.3e} lies within the warning band of a tabulated potential")
    });
    Ok(AlternativeReport { case, support_ground_energy: e, tol_class: CLASSIFY_TOL, warning, evidence: None })
}

/// Variance of `v` over the cells outside `[-r, r]^d + a`, relative to the
/// square of its mean there.
pub fn outside_support_variation(q: &PotentialSpec, a: &Displacement, grid: &GridSpec, v: &[f64]) -> f64 {
    let outside: Vec<f64> = (0..grid.cell_count())
        .filter(|&lin| {
            let p = grid.point(lin);
            p.iter().zip(&a.0).any(|(x, c)| (x - c).abs() >= q.r)
        })
        .map(|lin| v[lin])
        .collect();
    if outside.is_empty() {
        return 0.0;
    }
    let n = outside.len() as f64;
    let mean = outside.iter().sum::<f64>() / n;
    let var = outside.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    var / (mean * mean)
}

#[derive(Debug, Clone)]
pub struct ReflectionReport {
    pub shift_cells: i64,
    /// `E_0(0)`.
    pub e0_zero: f64,
    /// `E_0(a)`.
    pub e0_shifted: f64,
    /// Quotient of the shifted extension in the periodic window form.
    pub quotient_periodic: f64,
    /// Quotient of the shifted extension in the Neumann form on `Λ_0`.
    pub quotient_neumann: f64,
    /// `|Q_periodic(a) - Q_periodic(0)|`.
    pub residual: f64,
}

fn rayleigh(op: &dyn LinearOperator, u: &[f64]) -> f64 {
    let mut y = vec![0.0; u.len()];
    op.apply(u, &mut y);
    par::dot(u, &y) / par::dot(u, u)
}

/// Shifted reflection-extension check along axis 0.
///
/// The ground state at `a = 0` is extended by even reflection across the
/// faces of the cube (a `2n`-periodic sequence along axis 0), shifted by the
/// grid-aligned `a_1`, and restricted to the cube. Its quotient with the
/// potential `q(x - a)` is compared to the unshifted value.
pub fn reflection_identity_check(
    q: &PotentialSpec,
    a: &Displacement,
    grid: &GridSpec,
    opts: &SolveOptions,
) -> Result<ReflectionReport> {
    let d = q.dim;
    q.check_displacement(a)?;
    if a.0[1..].iter().any(|&v| v != 0.0) {
        return Err(LabError::InvalidRequest("only the first displacement component may be nonzero".into()));
    }
    let cells = a
        .grid_cells(grid)
        .ok_or_else(|| LabError::InvalidRequest(format!("shift {:?} is not a grid multiple", a.0)))?;
    let s = cells[0];
    let zero = Displacement::zero(d);
    let op0 = neumann_operator(q, &zero, grid)?;
    let psi = solve_ground(&op0, opts)?;
    let op_a = neumann_operator(q, a, grid)?;
    let ea = solve_ground(&op_a, opts)?.energy;

    let n0 = grid.n[0] as i64;
    let stride = grid.strides3()[0];
    let ext = |j: i64| -> usize {
        let m = j.rem_euclid(2 * n0);
        (if m < n0 { m } else { 2 * n0 - 1 - m }) as usize
    };
    let phi: Vec<f64> = (0..grid.cell_count())
        .map(|lin| {
            let j = (lin / stride) as i64;
            psi.vector[ext(j - s) * stride + lin % stride]
        })
        .collect();
    let per = |field: &[f64]| assemble_operator(grid, field, BoundaryCondition::periodic());
    let q_per_a = rayleigh(&per(op_a.potential())?, &phi);
    let q_per_0 = rayleigh(&per(op0.potential())?, &psi.vector);
    let q_neu = rayleigh(&op_a, &phi);
    Ok(ReflectionReport {
        shift_cells: s,
        e0_zero: psi.energy,
        e0_shifted: ea,
        quotient_periodic: q_per_a,
        quotient_neumann: q_neu,
        residual: (q_per_a - q_per_0).abs(),
    })
}

/// Reflection-symmetric hole shapes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HoleShape {
    /// `max_i |x_i| < half_width`.
    Square { half_width: f64 },
    /// `|x| < radius`.
    Round { radius: f64 },
}

impl HoleShape {
    pub fn extent(&self) -> f64 {
        match *self {
            HoleShape::Square { half_width } => half_width,
            HoleShape::Round { radius } => radius,
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match *self {
            HoleShape::Square { half_width } => x.iter().all(|t| t.abs() < half_width),
            HoleShape::Round { radius } => x.iter().map(|t| t * t).sum::<f64>() < radius * radius,
        }
    }

    /// Largest grid-aligned displacement per axis keeping the hole off the
    /// boundary cells.
    pub fn max_shift(&self, grid: &GridSpec) -> f64 {
        let h = grid.h[0];
        ((0.5 - self.extent()) / h - 1.0).floor() * h
    }

    pub fn mask(&self, grid: &GridSpec, a: &Displacement) -> Vec<bool> {
        (0..grid.cell_count())
            .map(|lin| {
                let p = grid.point(lin);
                let rel: Vec<f64> = p.iter().zip(&a.0).map(|(x, c)| (x - c).abs()).collect();
                self.contains(&rel)
            })
            .collect()
    }
}

/// `E_0(a)` of `-Δ` on the cube minus the hole shifted by `a` (Dirichlet on
/// the hole, Neumann outside).
pub fn dirichlet_hole_sweep(
    hole: HoleShape,
    samples: &[Displacement],
    grid: &GridSpec,
    opts: &SolveOptions,
) -> Result<SweepTable> {
    let limit = hole.max_shift(grid);
    if !(limit >= 0.0) || !grid.is_unit_cube() {
        return Err(LabError::InvalidRequest("hole does not fit strictly inside the unit cube".into()));
    }
    let zero = vec![0.0; grid.cell_count()];
    let prepared = samples
        .iter()
        .map(|req| {
            if req.dim() != grid.dim {
                return Err(LabError::InvalidRequest("displacement dimension mismatch".into()));
            }
            let (a, moved) = req.snapped(grid, f64::INFINITY);
            if a.0.iter().any(|v| v.abs() > limit + 1e-12) {
                return Err(LabError::InvalidBoundary(format!("hole at {:?} overlaps the boundary", a.0)));
            }
            Ok((req.clone(), a, moved))
        })
        .collect::<Result<Vec<_>>>()?;
    let solved = par::map_slice(&prepared, |(req, a, moved)| -> Result<SweepRecord> {
        let mask = hole.mask(grid, a);
        let op = assemble_operator(grid, &zero, BoundaryCondition::dirichlet_mask(mask))?;
        let gs = solve_ground(&op, opts)?;
        Ok(SweepRecord { a: a.clone(), requested: req.clone(), snapped: *moved, e0: gs.energy, residual: gs.residual })
    });
    let records = solved.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SweepTable::new(
        records,
        SweepMeta {
            grid: describe_grid(grid),
            potential: format!("hole {hole:?}").to_lowercase(),
            bc: "neumann+dirichlet-hole".into(),
            tol: opts.tol,
        },
    ))
}

/// Tensor sweep of `per_axis` samples on `[-max_shift, max_shift]^d`.
pub fn hole_sweep_full(hole: HoleShape, per_axis: usize, grid: &GridSpec, opts: &SolveOptions) -> Result<SweepTable> {
    let m = hole.max_shift(grid);
    dirichlet_hole_sweep(hole, &tensor_points(&linspace(-m, m, per_axis), grid.dim), grid, opts)
}
