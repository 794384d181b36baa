//! Lowest eigenpairs of symmetric operators.
//!
//! The iterative solver is a block LOBPCG with soft locking: the search space
//! is `[X, T R, P]` where `T` is the operator's preconditioner, `R` the block
//! residual of unconverged columns and `P` the previous update directions.

mod dense;

pub use dense::{dense_matrix, dense_oracle, DENSE_CELL_LIMIT};

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{LabError, Result};
use crate::grid::{FieldFile, FieldGeometry, GridSpec};
use crate::operator::LinearOperator;
use crate::par;

/// Relative tolerance under which adjacent eigenvalues form a multiplet.
pub const MULTIPLET_RTOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct EigenOptions {
    pub k: usize,
    pub tol: f64,
    pub max_iter: usize,
    /// Seed of the random part of the starting block.
    pub seed: u64,
    /// Extra block columns beyond `k`.
    pub guard: usize,
}

impl EigenOptions {
    pub fn new(k: usize, tol: f64, max_iter: usize) -> Self {
        Self { k, tol, max_iter, seed: 0x5eed, guard: 2 }
    }
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    /// Ascending eigenvalues.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors (realified `[re; im]` for complex operators).
    pub vectors: Vec<Vec<f64>>,
    /// `||A u - E u|| / ||u||` per pair.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Groups of indices whose values agree to [`MULTIPLET_RTOL`].
    pub multiplets: Vec<Vec<usize>>,
}

impl EigenResult {
    pub fn ground(&self) -> f64 {
        self.values[0]
    }

    /// `E_1 - E_0`, if at least two values were computed.
    pub fn gap(&self) -> Option<f64> {
        (self.values.len() > 1).then(|| self.values[1] - self.values[0])
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["index", "value", "residual"])?;
        for (i, (v, r)) in self.values.iter().zip(&self.residuals).enumerate() {
            wr.write_record([i.to_string(), format!("{v:.17e}"), format!("{r:.6e}")])?;
        }
        wr.flush()?;
        Ok(())
    }

    /// Write eigenvector `i` (real part for complex operators) as a field file.
    pub fn write_vector<W: Write>(&self, i: usize, grid: &GridSpec, w: W) -> Result<()> {
        let n = grid.cell_count();
        let v = self
            .vectors
            .get(i)
            .ok_or_else(|| LabError::InvalidRequest(format!("no eigenvector {i}")))?;
        FieldFile { geometry: FieldGeometry::Cartesian(grid.clone()), values: v[..n].to_vec() }.write_to(w)
    }
}

/// `k` lowest eigenpairs with default options.
pub fn lowest_eigenpairs(op: &dyn LinearOperator, k: usize, tol: f64, max_iter: usize) -> Result<EigenResult> {
    lowest_eigenpairs_with(op, &EigenOptions::new(k, tol, max_iter))
}

fn mgs_against(basis: &[Vec<f64>], v: &mut [f64]) {
    for b in basis {
        let c = par::dot(b, v);
        par::axpy(-c, b, v);
    }
}

/// Orthonormalize `cand` against `basis` (already orthonormal) and against
/// each other, appending survivors to `basis`. Returns the number appended.
fn extend_orthonormal(locked: &[Vec<f64>], basis: &mut Vec<Vec<f64>>, cand: Vec<Vec<f64>>) -> usize {
    let mut added = 0;
    for mut v in cand {
        let n0 = par::norm(&v);
        if !(n0 > 0.0) {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= n0);
        for _ in 0..2 {
            mgs_against(locked, &mut v);
            mgs_against(basis, &mut v);
        }
        let n1 = par::norm(&v);
        if n1 < 1e-10 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= n1);
        basis.push(v);
        added += 1;
    }
    added
}

fn apply_block(op: &dyn LinearOperator, xs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let n = op.dim();
    let out = par::map_slice(xs, |x| {
        let mut y = vec![0.0; n];
        op.apply(x, &mut y);
        y
    });
    if out.iter().any(|y| y.iter().any(|v| !v.is_finite())) {
        return Err(LabError::NonFinite);
    }
    Ok(out)
}

fn combine(cols: &[Vec<f64>], coef: &DMatrix<f64>, j: usize, rows: std::ops::Range<usize>) -> Vec<f64> {
    let n = cols[0].len();
    let mut out = vec![0.0; n];
    for i in rows {
        let c = coef[(i, j)];
        if c != 0.0 {
            par::axpy(c, &cols[i], &mut out);
        }
    }
    out
}

/// Block LOBPCG for the `k` lowest eigenpairs.
///
/// For realified complex operators every eigenvalue is doubled; the solver
/// computes `2k` real pairs and returns every other one.
pub fn lowest_eigenpairs_with(op: &dyn LinearOperator, opts: &EigenOptions) -> Result<EigenResult> {
    let n = op.dim();
    let cells = if op.is_complex() { n / 2 } else { n };
    if opts.k == 0 {
        return Err(LabError::InvalidRequest("k must be at least 1".into()));
    }
    if opts.k as f64 > 0.1 * cells as f64 {
        return Err(LabError::InvalidRequest(format!(
            "k = {} exceeds 10% of the {cells} cells",
            opts.k
        )));
    }
    if !(opts.tol > 0.0) {
        return Err(LabError::InvalidRequest("tolerance must be positive".into()));
    }
    if !op.is_complex() && op.hint_is_exact_ground() {
        if let Some(h) = op.ground_hint() {
            return solve_deflated(op, h, opts);
        }
    }
    lobpcg(op, opts, &[])
}

/// LOBPCG iteration with every block kept orthogonal to `locked`.
fn lobpcg(op: &dyn LinearOperator, opts: &EigenOptions, locked: &[Vec<f64>]) -> Result<EigenResult> {
    let n = op.dim();
    let cells = if op.is_complex() { n / 2 } else { n };
    let kk = if op.is_complex() { 2 * opts.k } else { opts.k };
    let m = (kk + opts.guard).min(n);

    // Starting block.
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start = Vec::with_capacity(m);
    if let Some(h) = op.ground_hint().filter(|_| locked.is_empty()) {
        start.push(h.clone());
        if op.is_complex() {
            // i * hint, the second copy of the same complex vector.
            let c = cells;
            let mut ih = vec![0.0; n];
            for j in 0..c {
                ih[j] = -h[c + j];
                ih[c + j] = h[j];
            }
            start.push(ih);
        }
    }
    while start.len() < m + 4 {
        start.push((0..n).map(|_| rng.random_range(-1.0..1.0)).collect());
    }
    let mut x: Vec<Vec<f64>> = Vec::with_capacity(m);
    for v in start {
        if x.len() == m {
            break;
        }
        extend_orthonormal(locked, &mut x, vec![v]);
    }
    if x.len() < m {
        return Err(LabError::InvalidRequest("could not build a starting block".into()));
    }

    let mut p: Vec<Vec<f64>> = Vec::new();
    let mut best_res = vec![f64::INFINITY; kk];
    let mut best_vals = vec![f64::NAN; kk];
    let mut iterations = 0;

    // Initial Rayleigh-Ritz on X.
    let ax = apply_block(op, &x)?;
    let (xs, _) = rayleigh_ritz(locked, &x, &ax, m);
    x = xs;

    loop {
        let ax = apply_block(op, &x)?;
        let rho: Vec<f64> = x.iter().zip(&ax).map(|(u, au)| par::dot(u, au)).collect();
        let r: Vec<Vec<f64>> = x
            .iter()
            .zip(&ax)
            .zip(&rho)
            .map(|((u, au), &l)| {
                let mut res = au.clone();
                par::axpy(-l, u, &mut res);
                res
            })
            .collect();
        let res: Vec<f64> = r.iter().map(|v| par::norm(v)).collect();
        if res.iter().chain(&rho).any(|v| !v.is_finite()) {
            return Err(LabError::NonFinite);
        }
        if res[..kk].iter().fold(0.0f64, |a, &b| a.max(b)) < best_res.iter().fold(0.0f64, |a, &b| a.max(b)) {
            best_res = res[..kk].to_vec();
            best_vals = rho[..kk].to_vec();
        }
        if res[..kk].iter().all(|&v| v <= opts.tol) {
            return Ok(finish(op, x, rho, res, iterations, kk));
        }
        if iterations >= opts.max_iter {
            return Err(LabError::NotConverged {
                iterations,
                residuals: dedup_complex(op, &best_res),
                values: dedup_complex(op, &best_vals),
            });
        }
        iterations += 1;

        let active: Vec<usize> = (0..m).filter(|&i| res[i] > 0.1 * opts.tol).collect();
        let w: Vec<Vec<f64>> = par::map_slice(&active, |&i| {
            let mut z = vec![0.0; n];
            op.precondition(&r[i], &mut z);
            z
        });
        let mut s = x.clone();
        let nw = extend_orthonormal(locked, &mut s, w);
        let np = extend_orthonormal(locked, &mut s, std::mem::take(&mut p));
        let a_extra = apply_block(op, &s[m..])?;
        let mut as_ = ax;
        as_.extend(a_extra);

        let dim_s = s.len();
        let gram: Vec<f64> = par::map_indexed(dim_s * dim_s, |idx| par::dot(&s[idx / dim_s], &as_[idx % dim_s]));
        let g = DMatrix::from_fn(dim_s, dim_s, |i, j| 0.5 * (gram[i * dim_s + j] + gram[j * dim_s + i]));
        let (_, c) = sorted_eigen(g);
        let new_x: Vec<Vec<f64>> = par::map_indexed(m, |j| combine(&s, &c, j, 0..dim_s));
        p = if nw + np > 0 {
            active.iter().map(|&j| combine(&s, &c, j, m..dim_s)).collect()
        } else {
            Vec::new()
        };
        // Restore exact orthonormality lost to rounding.
        let mut xo = Vec::with_capacity(m);
        extend_orthonormal(locked, &mut xo, new_x);
        if xo.len() < m {
            return Err(LabError::NonFinite);
        }
        x = xo;
    }
}

/// The hint is an exact ground state: return it with energy exactly zero
/// residual and solve for the remaining pairs in its orthogonal complement.
fn solve_deflated(op: &dyn LinearOperator, mut h: Vec<f64>, opts: &EigenOptions) -> Result<EigenResult> {
    let nh = par::norm(&h);
    h.iter_mut().for_each(|v| *v /= nh);
    let mut ah = vec![0.0; h.len()];
    op.apply(&h, &mut ah);
    let e0 = par::dot(&h, &ah);
    let mut r0 = ah;
    par::axpy(-e0, &h, &mut r0);
    let res0 = par::norm(&r0);
    let mut values = vec![e0];
    let mut vectors = vec![h.clone()];
    let mut residuals = vec![res0];
    let mut iterations = 0;
    if opts.k > 1 {
        let mut sub = opts.clone();
        sub.k = opts.k - 1;
        let rest = lobpcg(op, &sub, &[h])?;
        iterations = rest.iterations;
        values.extend(rest.values);
        vectors.extend(rest.vectors);
        residuals.extend(rest.residuals);
    }
    let multiplets = group_multiplets(&values);
    Ok(EigenResult { values, vectors, residuals, iterations, converged: true, multiplets })
}

fn sorted_eigen(g: DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let c = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, j| eig.eigenvectors[(r, order[j])]);
    (vals, c)
}

fn rayleigh_ritz(locked: &[Vec<f64>], x: &[Vec<f64>], ax: &[Vec<f64>], m: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let k = x.len();
    let g = DMatrix::from_fn(k, k, |i, j| 0.5 * (par::dot(&x[i], &ax[j]) + par::dot(&x[j], &ax[i])));
    let (vals, c) = sorted_eigen(g);
    let mut out = Vec::with_capacity(m);
    extend_orthonormal(locked, &mut out, (0..m).map(|j| combine(x, &c, j, 0..k)).collect());
    (out, vals)
}

fn dedup_complex(op: &dyn LinearOperator, v: &[f64]) -> Vec<f64> {
    if op.is_complex() {
        v.iter().step_by(2).copied().collect()
    } else {
        v.to_vec()
    }
}

fn finish(
    op: &dyn LinearOperator,
    x: Vec<Vec<f64>>,
    rho: Vec<f64>,
    res: Vec<f64>,
    iterations: usize,
    kk: usize,
) -> EigenResult {
    let mut order: Vec<usize> = (0..kk).collect();
    order.sort_by(|&a, &b| rho[a].total_cmp(&rho[b]));
    let step = if op.is_complex() { 2 } else { 1 };
    let picked: Vec<usize> = order.into_iter().step_by(step).collect();
    let values: Vec<f64> = picked.iter().map(|&i| rho[i]).collect();
    let residuals: Vec<f64> = picked.iter().map(|&i| res[i]).collect();
    let mut vectors: Vec<Vec<f64>> = picked.iter().map(|&i| x[i].clone()).collect();
    if !op.is_complex() {
        let sum: f64 = vectors[0].iter().sum();
        if sum < 0.0 {
            vectors[0].iter_mut().for_each(|v| *v = -*v);
        }
    }
    let multiplets = group_multiplets(&values);
    EigenResult { values, vectors, residuals, iterations, converged: true, multiplets }
}

/// Group indices of ascending `values` that agree to [`MULTIPLET_RTOL`].
pub fn group_multiplets(values: &[f64]) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if (values[*g.last().unwrap()] - v).abs() <= MULTIPLET_RTOL * v.abs().max(1.0) => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}
