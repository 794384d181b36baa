//! Matrix-free discrete Schrödinger operators `-Δ_h + q` on Cartesian grids.

use std::f64::consts::TAU;

use crate::error::{LabError, Result};
use crate::grid::GridSpec;
use crate::par;
use crate::potential::sup_norm;
use crate::spectral::{self, ComplexBasis, RealBasis, C64};

/// A symmetric linear map on real vectors of length [`dim`](Self::dim).
///
/// Complex (Bloch) operators act on the realified vector `[re; im]`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// Approximate inverse used as preconditioner; identity by default.
    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
    /// A vector close to the ground state, used to seed the solver.
    fn ground_hint(&self) -> Option<Vec<f64>> {
        None
    }
    /// True if the operator is a realified Hermitian operator (every
    /// eigenvalue then appears twice).
    fn is_complex(&self) -> bool {
        false
    }
    /// True if the ground hint is known to be an exact eigenvector for the
    /// lowest eigenvalue (e.g. the constant for a nonnegative operator with
    /// `A 1 = 0`).
    fn hint_is_exact_ground(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BcKind {
    Neumann,
    Periodic,
    Bloch,
    DirichletMask,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryCondition {
    pub kind: BcKind,
    pub theta: Vec<f64>,
    pub mask: Vec<bool>,
}

impl BoundaryCondition {
    pub fn neumann() -> Self {
        Self { kind: BcKind::Neumann, theta: Vec::new(), mask: Vec::new() }
    }

    pub fn periodic() -> Self {
        Self { kind: BcKind::Periodic, theta: Vec::new(), mask: Vec::new() }
    }

    /// Quasi-periodic condition `u(x + L e_i) = exp(i theta_i) u(x)`.
    pub fn bloch(theta: &[f64]) -> Self {
        Self { kind: BcKind::Bloch, theta: theta.to_vec(), mask: Vec::new() }
    }

    /// Neumann outer boundary with the masked cells removed (zero Dirichlet
    /// values on the hole boundary).
    pub fn dirichlet_mask(mask: Vec<bool>) -> Self {
        Self { kind: BcKind::DirichletMask, theta: Vec::new(), mask }
    }
}

enum Precond {
    Real { bases: Vec<RealBasis>, denom: Vec<f64> },
    Complex { bases: Vec<ComplexBasis>, denom: Vec<f64> },
}

/// Assembled `-Δ_h + q` with one boundary condition. Immutable and shareable.
pub struct OperatorHandle {
    grid: GridSpec,
    field: Vec<f64>,
    bc: BoundaryCondition,
    /// Phase factors per axis (Bloch only).
    phase: [C64; 3],
    penalty: f64,
    shift: f64,
    precond: Precond,
}

impl std::fmt::Debug for OperatorHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorHandle")
            .field("grid", &self.grid)
            .field("bc", &self.bc.kind)
            .field("theta", &self.bc.theta)
            .finish()
    }
}

/// Assemble the matrix-free operator. Bloch with `theta = 0` is routed to the
/// periodic path.
pub fn assemble_operator(grid: &GridSpec, field: &[f64], bc: BoundaryCondition) -> Result<OperatorHandle> {
    let n = grid.cell_count();
    if field.len() != n {
        return Err(LabError::ShapeMismatch { expected: n, got: field.len() });
    }
    if field.iter().any(|v| !v.is_finite()) {
        return Err(LabError::NonFinite);
    }
    let mut bc = bc;
    let one = C64::new(1.0, 0.0);
    let mut phase = [one; 3];
    match bc.kind {
        BcKind::Bloch => {
            if bc.theta.len() != grid.dim {
                return Err(LabError::InvalidBoundary(format!(
                    "Bloch needs {} phases, got {}",
                    grid.dim,
                    bc.theta.len()
                )));
            }
            if bc.theta.iter().any(|t| !t.is_finite()) {
                return Err(LabError::InvalidBoundary("non-finite Bloch phase".into()));
            }
            let theta: Vec<f64> = bc.theta.iter().map(|t| t.rem_euclid(TAU)).collect();
            if theta.iter().all(|&t| t == 0.0) {
                bc = BoundaryCondition::periodic();
            } else {
                for (a, t) in theta.iter().enumerate() {
                    phase[a] = C64::new(t.cos(), t.sin());
                }
                bc.theta = theta;
            }
        }
        BcKind::DirichletMask => {
            if bc.mask.len() != n {
                return Err(LabError::ShapeMismatch { expected: n, got: bc.mask.len() });
            }
            if !bc.mask.iter().any(|&m| m) {
                return Err(LabError::InvalidBoundary("mask is empty".into()));
            }
            let shape = grid.shape3();
            for (lin, _) in bc.mask.iter().enumerate().filter(|(_, &m)| m) {
                let m = grid.multi_index(lin);
                if (0..grid.dim).any(|a| m[a] == 0 || m[a] + 1 == shape[a]) {
                    return Err(LabError::InvalidBoundary("mask touches the outer boundary".into()));
                }
            }
        }
        _ => {}
    }
    let qmax = sup_norm(field);
    let lap_max: f64 = grid.h.iter().map(|h| 4.0 / (h * h)).sum();
    let penalty = 2.0 * lap_max + qmax;
    let shift = 1.0 + qmax;
    let shape = grid.shape3();
    let precond = match bc.kind {
        BcKind::Bloch => {
            let bases: Vec<ComplexBasis> = (0..grid.dim)
                .map(|a| spectral::bloch_basis(grid.n[a], grid.h[a], bc.theta[a]))
                .collect();
            let eig: Vec<&[f64]> = bases.iter().map(|b| b.eigenvalues.as_slice()).collect();
            Precond::Complex { denom: inverse_symbol(shape, &eig, shift), bases }
        }
        kind => {
            let bases: Vec<RealBasis> = (0..grid.dim)
                .map(|a| match kind {
                    BcKind::Periodic => spectral::periodic_basis(grid.n[a], grid.h[a]),
                    _ => spectral::neumann_basis(grid.n[a], grid.h[a]),
                })
                .collect();
            let eig: Vec<&[f64]> = bases.iter().map(|b| b.eigenvalues.as_slice()).collect();
            Precond::Real { denom: inverse_symbol(shape, &eig, shift), bases }
        }
    };
    Ok(OperatorHandle { grid: grid.clone(), field: field.to_vec(), bc, phase, penalty, shift, precond })
}

fn inverse_symbol(shape: [usize; 3], eig: &[&[f64]], shift: f64) -> Vec<f64> {
    let total = shape.iter().product();
    (0..total)
        .map(|lin| {
            let m = [lin / (shape[1] * shape[2]), (lin / shape[2]) % shape[1], lin % shape[2]];
            let s: f64 = eig.iter().enumerate().map(|(a, e)| e[m[a]]).sum();
            1.0 / (s + shift)
        })
        .collect()
}

impl OperatorHandle {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn potential(&self) -> &[f64] {
        &self.field
    }

    pub fn bc(&self) -> &BoundaryCondition {
        &self.bc
    }

    /// Diagonal value placed on masked cells (above the rest of the spectrum).
    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    /// Shift `σ` of the preconditioner `(-Δ_h + σ)^{-1}`.
    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn cell_count(&self) -> usize {
        self.grid.cell_count()
    }

    fn masked(&self, lin: usize) -> bool {
        self.bc.kind == BcKind::DirichletMask && self.bc.mask[lin]
    }

    fn apply_real(&self, x: &[f64], y: &mut [f64]) {
        let shape = self.grid.shape3();
        let strides = self.grid.strides3();
        let dim = self.grid.dim;
        let periodic = self.bc.kind == BcKind::Periodic;
        let use_mask = self.bc.kind == BcKind::DirichletMask;
        let ih2: Vec<f64> = self.grid.h.iter().map(|h| 1.0 / (h * h)).collect();
        par::for_each_chunk_mut(y, strides[0], |i0, slab| {
            let base = i0 * strides[0];
            for (off, out) in slab.iter_mut().enumerate() {
                let lin = base + off;
                if use_mask && self.bc.mask[lin] {
                    *out = self.penalty * x[lin];
                    continue;
                }
                let m = [i0, off / shape[2], off % shape[2]];
                let u = x[lin];
                let mut acc = self.field[lin] * u;
                for a in 0..dim {
                    let s = strides[a];
                    let prev = if m[a] > 0 {
                        Some(lin - s)
                    } else if periodic {
                        Some(lin + (shape[a] - 1) * s)
                    } else {
                        None
                    };
                    let next = if m[a] + 1 < shape[a] {
                        Some(lin + s)
                    } else if periodic {
                        Some(lin - (shape[a] - 1) * s)
                    } else {
                        None
                    };
                    // Sum the two faces first so that mirrored cells see
                    // bitwise identical results.
                    let face = |nb: Option<usize>| match nb {
                        Some(j) if use_mask && self.bc.mask[j] => u,
                        Some(j) => u - x[j],
                        None => 0.0,
                    };
                    acc += (face(prev) + face(next)) * ih2[a];
                }
                *out = acc;
            }
        });
    }

    fn apply_bloch(&self, x: &[f64], y: &mut [f64]) {
        let n = self.grid.cell_count();
        let shape = self.grid.shape3();
        let strides = self.grid.strides3();
        let dim = self.grid.dim;
        let ih2: Vec<f64> = self.grid.h.iter().map(|h| 1.0 / (h * h)).collect();
        let (xr, xi) = x.split_at(n);
        let (yr, yi) = y.split_at_mut(n);
        let eval = |lin: usize| -> C64 {
            let m = self.grid.multi_index(lin);
            let u = C64::new(xr[lin], xi[lin]);
            let mut acc = u * self.field[lin];
            for a in 0..dim {
                let s = strides[a];
                let prev = if m[a] > 0 {
                    C64::new(xr[lin - s], xi[lin - s])
                } else {
                    let j = lin + (shape[a] - 1) * s;
                    C64::new(xr[j], xi[j]) * self.phase[a].conj()
                };
                let next = if m[a] + 1 < shape[a] {
                    C64::new(xr[lin + s], xi[lin + s])
                } else {
                    let j = lin - (shape[a] - 1) * s;
                    C64::new(xr[j], xi[j]) * self.phase[a]
                };
                acc += ((u - prev) + (u - next)) * ih2[a];
            }
            acc
        };
        let chunk = strides[0];
        par::for_each_chunk_mut(yr, chunk, |c, out| {
            for (off, o) in out.iter_mut().enumerate() {
                *o = eval(c * chunk + off).re;
            }
        });
        par::for_each_chunk_mut(yi, chunk, |c, out| {
            for (off, o) in out.iter_mut().enumerate() {
                *o = eval(c * chunk + off).im;
            }
        });
    }

    /// Discrete quadratic form `Σ_faces |∇_h u|^2 h^d + Σ q u^2 h^d` with the
    /// operator's boundary condition (real operators only).
    pub fn quadratic_form(&self, u: &[f64]) -> f64 {
        let mut y = vec![0.0; u.len()];
        self.apply_real(u, &mut y);
        par::dot(u, &y) * self.grid.cell_volume()
    }
}

impl LinearOperator for OperatorHandle {
    fn dim(&self) -> usize {
        if self.is_complex() {
            2 * self.grid.cell_count()
        } else {
            self.grid.cell_count()
        }
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim());
        if self.is_complex() {
            self.apply_bloch(x, y)
        } else {
            self.apply_real(x, y)
        }
    }

    fn precondition(&self, r: &[f64], z: &mut [f64]) {
        let shape = self.grid.shape3();
        let dim = self.grid.dim;
        match &self.precond {
            Precond::Real { bases, denom } => {
                let mut t = r.to_vec();
                if self.bc.kind == BcKind::DirichletMask {
                    for (lin, v) in t.iter_mut().enumerate() {
                        if self.bc.mask[lin] {
                            *v = 0.0;
                        }
                    }
                }
                for (a, b) in bases.iter().enumerate().take(dim) {
                    spectral::transform_real(&mut t, shape, a, b, true);
                }
                t.iter_mut().zip(denom).for_each(|(v, d)| *v *= d);
                for (a, b) in bases.iter().enumerate().take(dim) {
                    spectral::transform_real(&mut t, shape, a, b, false);
                }
                for (lin, (zo, tv)) in z.iter_mut().zip(&t).enumerate() {
                    *zo = if self.masked(lin) { r[lin] / self.penalty } else { *tv };
                }
            }
            Precond::Complex { bases, denom } => {
                let n = self.grid.cell_count();
                let mut t: Vec<C64> = (0..n).map(|i| C64::new(r[i], r[n + i])).collect();
                for (a, b) in bases.iter().enumerate().take(dim) {
                    spectral::transform_complex(&mut t, shape, a, b, true);
                }
                t.iter_mut().zip(denom).for_each(|(v, d)| *v *= *d);
                for (a, b) in bases.iter().enumerate().take(dim) {
                    spectral::transform_complex(&mut t, shape, a, b, false);
                }
                for (i, v) in t.iter().enumerate() {
                    z[i] = v.re;
                    z[n + i] = v.im;
                }
            }
        }
    }

    fn ground_hint(&self) -> Option<Vec<f64>> {
        let n = self.grid.cell_count();
        match self.bc.kind {
            BcKind::Neumann | BcKind::Periodic => Some(vec![1.0; n]),
            BcKind::DirichletMask => Some(self.bc.mask.iter().map(|&m| if m { 0.0 } else { 1.0 }).collect()),
            BcKind::Bloch => {
                // Lowest plane wave exp(i theta . j / n).
                let mut v = vec![0.0; 2 * n];
                for lin in 0..n {
                    let m = self.grid.multi_index(lin);
                    let ph: f64 = (0..self.grid.dim)
                        .map(|a| self.bc.theta[a] * m[a] as f64 / self.grid.n[a] as f64)
                        .sum();
                    v[lin] = ph.cos();
                    v[n + lin] = ph.sin();
                }
                Some(v)
            }
        }
    }

    fn is_complex(&self) -> bool {
        self.bc.kind == BcKind::Bloch
    }

    fn hint_is_exact_ground(&self) -> bool {
        matches!(self.bc.kind, BcKind::Neumann | BcKind::Periodic) && self.field.iter().all(|&v| v == 0.0)
    }
}
