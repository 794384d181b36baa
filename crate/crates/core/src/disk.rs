//! Finite-volume Neumann problem on a disk in polar coordinates.
//!
//! Cells are annular sectors: ring `i` spans `[i dr, (i+1) dr]` with center
//! radius `r_i = (i + 1/2) dr`, sector `j` is centered at angle `j dphi`.
//! The quadratic form is `Σ_faces c (u - v)^2` with radial couplings
//! `c_r(i) = (i + 1) dphi` between rings `i` and `i + 1` and angular
//! couplings `c_phi(i) = 1 / ((i + 1/2) dphi)`; there is no flux through the
//! origin and none through `r = R`. With cell areas `w = r_i dr dphi` the
//! operator `W^{-1} S + q` is symmetric in the weighted product; solvers see
//! the similar matrix `W^{-1/2} S W^{-1/2} + q`, whose vectors are
//! `y = W^{1/2} u`.

use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::displacement::{solve_ground, SolveOptions, SweepMeta, SweepRecord, SweepTable};
use crate::error::{LabError, Result};
use crate::grid::Displacement;
use crate::operator::LinearOperator;
use crate::par;
use crate::potential::{sup_norm, PotentialKind, PotentialSpec, Shape};

#[derive(Debug, Clone, PartialEq)]
pub struct DiskGrid {
    pub radius: f64,
    pub nr: usize,
    pub nphi: usize,
    pub dr: f64,
    pub dphi: f64,
}

impl DiskGrid {
    pub fn new(radius: f64, nr: usize, nphi: usize) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(LabError::InvalidGrid(format!("disk radius must be positive, got {radius}")));
        }
        if nr < 4 {
            return Err(LabError::InvalidGrid(format!("need at least 4 rings, got {nr}")));
        }
        if nphi < 64 || nphi % 2 != 0 {
            return Err(LabError::InvalidGrid(format!("nphi must be even and >= 64, got {nphi}")));
        }
        Ok(Self { radius, nr, nphi, dr: radius / nr as f64, dphi: TAU / nphi as f64 })
    }

    /// Unit disk, 96 rings, 256 sectors.
    pub fn default_unit() -> Self {
        Self::new(1.0, 96, 256).expect("valid default")
    }

    pub fn cell_count(&self) -> usize {
        self.nr * self.nphi
    }

    pub fn ring_radius(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dr
    }

    pub fn angle(&self, j: usize) -> f64 {
        j as f64 * self.dphi
    }

    /// Cartesian center of cell `(i, j)`.
    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        let (r, t) = (self.ring_radius(i), self.angle(j));
        [r * t.cos(), r * t.sin()]
    }

    /// Cell area `r_i dr dphi`.
    pub fn weight(&self, i: usize) -> f64 {
        self.ring_radius(i) * self.dr * self.dphi
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.cell_count()).map(|lin| self.weight(lin / self.nphi)).collect()
    }

    fn radial_coupling(&self, i: usize) -> f64 {
        (i as f64 + 1.0) * self.dphi
    }

    fn angular_coupling(&self, i: usize) -> f64 {
        1.0 / ((i as f64 + 0.5) * self.dphi)
    }

    /// Weighted form `Σ c (u - v)^2` applied as `S u`.
    pub fn stiffness(&self, u: &[f64], out: &mut [f64]) {
        let (nr, np) = (self.nr, self.nphi);
        par::for_each_chunk_mut(out, np, |i, ring| {
            let ca = self.angular_coupling(i);
            let base = i * np;
            for (j, o) in ring.iter_mut().enumerate() {
                let v = u[base + j];
                let left = u[base + (j + np - 1) % np];
                let right = u[base + (j + 1) % np];
                let mut acc = ((v - left) + (v - right)) * ca;
                let inner = if i > 0 { (v - u[base - np + j]) * self.radial_coupling(i - 1) } else { 0.0 };
                let outer = if i + 1 < nr { (v - u[base + np + j]) * self.radial_coupling(i) } else { 0.0 };
                acc += inner + outer;
                *o = acc;
            }
        });
    }

    /// Discrete polar Laplacian `Δ_h u = -W^{-1} S u`.
    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; u.len()];
        self.stiffness(u, &mut s);
        s.iter().enumerate().map(|(lin, v)| -v / self.weight(lin / self.nphi)).collect()
    }

    /// Radial extent of the support of `q(x - a)` must stay inside the disk.
    pub fn check_support(&self, q: &PotentialSpec, a: &Displacement) -> Result<()> {
        if q.dim != 2 || a.dim() != 2 {
            return Err(LabError::InvalidRequest("disk problems are two-dimensional".into()));
        }
        let reach = match q.shape {
            Shape::Radial => q.r,
            Shape::Product => q.r * 2f64.sqrt(),
        };
        if a.norm() + reach >= self.radius {
            return Err(LabError::InvalidRequest(format!(
                "support of the potential at |a| = {} reaches the disk boundary",
                a.norm()
            )));
        }
        Ok(())
    }
}

/// Sample `q(x - a)` on the disk cells (case-2 via the polar discrete
/// Laplacian, so the profile is an exact zero mode).
pub fn sample_disk_potential(q: &PotentialSpec, a: &Displacement, dg: &DiskGrid) -> Result<Vec<f64>> {
    dg.check_support(q, a)?;
    let rel = |lin: usize| -> Vec<f64> {
        let p = dg.point(lin / dg.nphi, lin % dg.nphi);
        vec![p[0] - a.0[0], p[1] - a.0[1]]
    };
    let n = dg.cell_count();
    if q.kind == PotentialKind::Case2 {
        let prof = q.profile().expect("case2 potential carries a profile");
        let u: Vec<f64> = (0..n)
            .map(|lin| prof.value(&rel(lin).iter().map(|t| t.abs()).collect::<Vec<_>>()))
            .collect();
        let lap = dg.laplacian(&u);
        return Ok(lap.iter().zip(&u).map(|(l, u)| l / u).collect());
    }
    Ok((0..n).map(|lin| q.eval(&rel(lin))).collect())
}

/// Symmetrized disk operator `W^{-1/2} S W^{-1/2} + q`.
pub struct DiskOperator {
    grid: DiskGrid,
    field: Vec<f64>,
    sqrt_w: Vec<f64>,
    shift: f64,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for DiskOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiskOperator").field("grid", &self.grid).finish()
    }
}

pub fn assemble_disk_operator(dg: &DiskGrid, q: &PotentialSpec, a: &Displacement) -> Result<DiskOperator> {
    let field = sample_disk_potential(q, a, dg)?;
    disk_operator_from_field(dg, field)
}

pub fn disk_operator_from_field(dg: &DiskGrid, field: Vec<f64>) -> Result<DiskOperator> {
    if field.len() != dg.cell_count() {
        return Err(LabError::ShapeMismatch { expected: dg.cell_count(), got: field.len() });
    }
    if field.iter().any(|v| !v.is_finite()) {
        return Err(LabError::NonFinite);
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(dg.nphi);
    let ifft = planner.plan_fft_inverse(dg.nphi);
    let sqrt_w = dg.weights().iter().map(|w| w.sqrt()).collect();
    let shift = 1.0 + sup_norm(&field);
    Ok(DiskOperator { grid: dg.clone(), field, sqrt_w, shift, fft, ifft })
}

impl DiskOperator {
    pub fn grid(&self) -> &DiskGrid {
        &self.grid
    }

    pub fn potential(&self) -> &[f64] {
        &self.field
    }

    /// Cell values `u = W^{-1/2} y` of a solver vector.
    pub fn to_cell_values(&self, y: &[f64]) -> Vec<f64> {
        y.iter().zip(&self.sqrt_w).map(|(v, s)| v / s).collect()
    }

    /// Shift `σ` of the preconditioner.
    pub fn shift(&self) -> f64 {
        self.shift
    }
}

impl LinearOperator for DiskOperator {
    fn dim(&self) -> usize {
        self.grid.cell_count()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let u = self.to_cell_values(x);
        self.grid.stiffness(&u, y);
        for ((o, s), (q, xv)) in y.iter_mut().zip(&self.sqrt_w).zip(self.field.iter().zip(x)) {
            *o = *o / s + q * xv;
        }
    }

    /// Exact `(W^{-1/2} S W^{-1/2} + σ)^{-1}`: FFT in angle, then one
    /// tridiagonal radial solve per angular mode.
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        let g = &self.grid;
        let (nr, np) = (g.nr, g.nphi);
        // Solve (S + σ W) v = W^{1/2} r, then z = W^{1/2} v.
        let mut spec: Vec<Complex<f64>> = r
            .iter()
            .zip(&self.sqrt_w)
            .map(|(v, s)| Complex::new(v * s, 0.0))
            .collect();
        for ring in spec.chunks_mut(np) {
            self.fft.process(ring);
        }
        let modes: Vec<usize> = (0..np).collect();
        let cols: Vec<Vec<Complex<f64>>> = par::map_slice(&modes, |&m| {
            let mu = 4.0 * (PI * m as f64 / np as f64).sin().powi(2);
            let diag: Vec<f64> = (0..nr)
                .map(|i| {
                    let inner = if i > 0 { g.radial_coupling(i - 1) } else { 0.0 };
                    let outer = if i + 1 < nr { g.radial_coupling(i) } else { 0.0 };
                    inner + outer + g.angular_coupling(i) * mu + self.shift * g.weight(i)
                })
                .collect();
            let off: Vec<f64> = (0..nr.saturating_sub(1)).map(|i| -g.radial_coupling(i)).collect();
            let rhs: Vec<Complex<f64>> = (0..nr).map(|i| spec[i * np + m]).collect();
            thomas(&diag, &off, rhs)
        });
        for (m, col) in cols.into_iter().enumerate() {
            for (i, v) in col.into_iter().enumerate() {
                spec[i * np + m] = v;
            }
        }
        let scale = 1.0 / np as f64;
        for ring in spec.chunks_mut(np) {
            self.ifft.process(ring);
        }
        for ((o, v), s) in z.iter_mut().zip(&spec).zip(&self.sqrt_w) {
            *o = v.re * scale * s;
        }
    }

    fn ground_hint(&self) -> Option<Vec<f64>> {
        Some(self.sqrt_w.clone())
    }

    fn hint_is_exact_ground(&self) -> bool {
        self.field.iter().all(|&v| v == 0.0)
    }
}

/// Symmetric tridiagonal solve with real coefficients.
fn thomas(diag: &[f64], off: &[f64], mut rhs: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut b = diag[0];
    rhs[0] /= b;
    for i in 1..n {
        c[i - 1] = off[i - 1] / b;
        b = diag[i] - off[i - 1] * c[i - 1];
        let prev = rhs[i - 1];
        rhs[i] = (rhs[i] - prev * off[i - 1]) / b;
    }
    for i in (0..n - 1).rev() {
        let next = rhs[i + 1];
        rhs[i] -= next * c[i];
    }
    rhs
}

/// Ground state on the disk; the vector is returned as cell values with
/// `Σ w u^2 = 1` and positive mean.
pub fn disk_ground_state(
    q: &PotentialSpec,
    a: &Displacement,
    dg: &DiskGrid,
    opts: &SolveOptions,
) -> Result<crate::displacement::GroundState> {
    let op = assemble_disk_operator(dg, q, a)?;
    let mut gs = solve_ground(&op, opts)?;
    gs.vector = op.to_cell_values(&gs.vector);
    Ok(gs)
}

/// `E_0` for displacements `(s, 0)`, one per sample.
pub fn radial_sweep(q: &PotentialSpec, samples: &[f64], dg: &DiskGrid, opts: &SolveOptions) -> Result<SweepTable> {
    let points: Vec<Displacement> = samples.iter().map(|&s| Displacement(vec![s, 0.0])).collect();
    for p in &points {
        dg.check_support(q, p)?;
    }
    let records = par::map_slice(&points, |a| -> Result<SweepRecord> {
        let gs = disk_ground_state(q, a, dg, opts)?;
        Ok(SweepRecord { a: a.clone(), requested: a.clone(), snapped: false, e0: gs.energy, residual: gs.residual })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable::new(
        records,
        SweepMeta {
            grid: format!("disk R={} nr={} nphi={}", dg.radius, dg.nr, dg.nphi),
            potential: q.describe(),
            bc: "disk-neumann".into(),
            tol: opts.tol,
        },
    ))
}

/// Largest admissible `|a|` for `q` on `dg`, backed off by `margin`.
pub fn max_offset(q: &PotentialSpec, dg: &DiskGrid, margin: f64) -> f64 {
    let reach = match q.shape {
        Shape::Radial => q.r,
        Shape::Product => q.r * 2f64.sqrt(),
    };
    dg.radius - reach - margin
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MinVerdict {
    NoInteriorMin,
    IdenticallyZero,
    Violation,
}

impl MinVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            MinVerdict::NoInteriorMin => "no-interior-min",
            MinVerdict::IdenticallyZero => "identically-zero",
            MinVerdict::Violation => "violation",
        }
    }
}

/// Classify a radial sweep (sorted by `|a|`, last sample nearest the
/// boundary). Returns the verdict and the smallest interior excess over the
/// boundary value.
pub fn strong_min_check(sweep: &SweepTable, tol_flat: f64) -> Result<(MinVerdict, f64)> {
    if sweep.records.len() < 5 {
        return Err(LabError::InvalidRequest(format!(
            "sweep has {} samples, need at least 5",
            sweep.records.len()
        )));
    }
    let mut recs: Vec<&SweepRecord> = sweep.records.iter().collect();
    recs.sort_by(|x, y| x.a.norm().total_cmp(&y.a.norm()));
    let (last, interior) = recs.split_last().expect("nonempty");
    if recs.iter().all(|r| r.e0.abs() <= tol_flat) {
        let worst = recs.iter().fold(0.0f64, |m, r| m.max(r.e0.abs()));
        return Ok((MinVerdict::IdenticallyZero, worst));
    }
    let excess = interior.iter().map(|r| r.e0 - last.e0).fold(f64::INFINITY, f64::min);
    let verdict = if excess > tol_flat { MinVerdict::NoInteriorMin } else { MinVerdict::Violation };
    Ok((verdict, excess))
}

/// Angular mean of the ground state on each ring.
pub fn ring_means(dg: &DiskGrid, u: &[f64]) -> Vec<f64> {
    u.chunks(dg.nphi).map(|r| r.iter().sum::<f64>() / dg.nphi as f64).collect()
}

/// Largest relative angular variance over rings.
pub fn angular_variation(dg: &DiskGrid, u: &[f64]) -> f64 {
    u.chunks(dg.nphi)
        .map(|r| {
            let m = r.iter().sum::<f64>() / r.len() as f64;
            let v = r.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / r.len() as f64;
            v / (m * m)
        })
        .fold(0.0, f64::max)
}

/// Boundary value and second normal derivative of a Neumann profile from
/// its two outermost ring values, fitting `u = α + β t^2` in `t = R - ρ`.
pub fn boundary_fit(dg: &DiskGrid, outer: f64, next: f64) -> (f64, f64) {
    let beta = (next - outer) / (2.0 * dg.dr * dg.dr);
    let alpha = outer - beta * dg.dr * dg.dr / 4.0;
    (alpha, 2.0 * beta)
}

#[derive(Debug, Clone)]
pub struct BoundaryProfile {
    pub energy: f64,
    /// Extrapolated boundary value `c`.
    pub boundary_value: f64,
    /// Ring means minus `c` for the three outermost rings (outermost first).
    pub outer_excess: [f64; 3],
}

/// Ground state near `∂D` relative to its boundary value at `a = 0`.
pub fn boundary_profile(q: &PotentialSpec, dg: &DiskGrid, opts: &SolveOptions) -> Result<BoundaryProfile> {
    let gs = disk_ground_state(q, &Displacement::zero(2), dg, opts)?;
    let means = ring_means(dg, &gs.vector);
    let n = dg.nr;
    let (c, _) = boundary_fit(dg, means[n - 1], means[n - 2]);
    Ok(BoundaryProfile {
        energy: gs.energy,
        boundary_value: c,
        outer_excess: [means[n - 1] - c, means[n - 2] - c, means[n - 3] - c],
    })
}

/// One angular sector of a rotation-invariant disk operator.
#[derive(Debug, Clone)]
pub struct SectorModes {
    /// Angular frequency.
    pub m: usize,
    pub values: Vec<f64>,
    /// Radial profiles, one column per value, normalized so that the full
    /// mode `f(ρ) cos(m φ)` (or `sin`, or `f` for `m = 0`) has unit norm.
    pub profiles: DMatrix<f64>,
}

/// Radial potential per ring, if the field is rotation invariant.
pub fn ring_potential(dg: &DiskGrid, field: &[f64]) -> Option<Vec<f64>> {
    let rings: Vec<f64> = field.chunks(dg.nphi).map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
    // sampled radial fields differ across a ring only by rounding in the polar map
    let scale = field.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let ok = field
        .chunks(dg.nphi)
        .zip(&rings)
        .all(|(r, &v)| r.iter().all(|x| (x - v).abs() <= 1e-10 * scale));
    ok.then_some(rings)
}

/// Exact eigen-decomposition of sector `m` for a radial potential.
pub fn sector_modes(dg: &DiskGrid, qring: &[f64], m: usize) -> SectorModes {
    let nr = dg.nr;
    let mu = 4.0 * (PI * m as f64 / dg.nphi as f64).sin().powi(2);
    let sw: Vec<f64> = (0..nr).map(|i| dg.weight(i).sqrt()).collect();
    let mut a = DMatrix::<f64>::zeros(nr, nr);
    for i in 0..nr {
        let inner = if i > 0 { dg.radial_coupling(i - 1) } else { 0.0 };
        let outer = if i + 1 < nr { dg.radial_coupling(i) } else { 0.0 };
        a[(i, i)] = (inner + outer + dg.angular_coupling(i) * mu) / dg.weight(i) + qring[i];
        if i + 1 < nr {
            let v = -dg.radial_coupling(i) / (sw[i] * sw[i + 1]);
            a[(i, i + 1)] = v;
            a[(i + 1, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(a);
    let mut order: Vec<usize> = (0..nr).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    // Angular norm Σ_j cos^2(m φ_j) (or 1 for m = 0), times dphi via the weights.
    let ang: f64 = if m == 0 {
        dg.nphi as f64
    } else {
        (0..dg.nphi).map(|j| (m as f64 * dg.angle(j)).cos().powi(2)).sum()
    };
    let profiles = DMatrix::from_fn(nr, nr, |i, k| {
        let col = order[k];
        // y = W^{1/2} f per sector; unit Σ y^2 per ring means Σ w f^2 = 1 in
        // units of one sector; rescale for the angular sum.
        eig.eigenvectors[(i, col)] / sw[i] / ang.sqrt()
    });
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    SectorModes { m, values, profiles }
}
