//! Single-site potentials and their sampling on grids.
//!
//! Every family is supported in `[-r, r]^d`, reflection symmetric in each
//! coordinate, and evaluated through `|x_i|` so that mirrored cell centers
//! receive bitwise identical values.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::grid::{Displacement, GridSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PotentialKind {
    Well,
    Bump,
    Indefinite,
    Case2,
    Tabulated,
}

/// Whether the profile is a tensor product over axes or a function of `|x|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    #[default]
    Product,
    Radial,
}

/// Ratio between the inner and outer lobes of the indefinite family.
pub const INDEFINITE_INNER_WEIGHT: f64 = 3.0;

/// `cos^2(pi t / (2 s))` on `|t| < s`, zero elsewhere.
#[inline]
fn cos2(t: f64, s: f64) -> f64 {
    let t = t.abs();
    if t >= s {
        0.0
    } else {
        let c = (PI * t / (2.0 * s)).cos();
        c * c
    }
}

fn lobe(x: &[f64], s: f64, shape: Shape) -> f64 {
    match shape {
        Shape::Product => x.iter().map(|&t| cos2(t, s)).product(),
        Shape::Radial => cos2(radius(x), s),
    }
}

#[inline]
fn radius(x: &[f64]) -> f64 {
    x.iter().map(|t| t * t).sum::<f64>().sqrt()
}

/// A positive profile `u` that is constant near the boundary of its support
/// box. The potential `q = (Δu)/u` then has `u` as a zero-energy Neumann state.
pub trait FlatProfile: Send + Sync + fmt::Debug {
    fn value(&self, x: &[f64]) -> f64;

    /// Continuum Laplacian. The default uses a fourth-order central difference.
    fn laplacian(&self, x: &[f64]) -> f64 {
        let e = 1e-3;
        let mut p = x.to_vec();
        let f0 = self.value(x);
        let mut acc = 0.0;
        for i in 0..x.len() {
            let mut f = [0.0; 4];
            for (k, off) in [-2.0, -1.0, 1.0, 2.0].iter().enumerate() {
                p[i] = x[i] + off * e;
                f[k] = self.value(&p);
            }
            p[i] = x[i];
            acc += (-f[0] + 16.0 * f[1] - 30.0 * f0 + 16.0 * f[2] - f[3]) / (12.0 * e * e);
        }
        acc
    }
}

/// `u(x) = 1 + c * B(x / s)` where `B` is a product or radial polynomial bump
/// `(1 - t^2)^4`, flat outside the core radius `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BumpProfile {
    pub amplitude: f64,
    pub core: f64,
    pub shape: Shape,
}

#[inline]
fn bump(t: f64) -> (f64, f64, f64) {
    // value, first and second derivative of (1 - t^2)^4
    if t.abs() >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let w = 1.0 - t * t;
    let w2 = w * w;
    let w3 = w2 * w;
    (w3 * w, -8.0 * t * w3, -8.0 * w3 + 48.0 * t * t * w2)
}

impl FlatProfile for BumpProfile {
    fn value(&self, x: &[f64]) -> f64 {
        let s = self.core;
        let b = match self.shape {
            Shape::Product => x.iter().map(|&t| bump(t.abs() / s).0).product(),
            Shape::Radial => bump(radius(x) / s).0,
        };
        1.0 + self.amplitude * b
    }

    fn laplacian(&self, x: &[f64]) -> f64 {
        let s = self.core;
        match self.shape {
            Shape::Product => {
                let parts: Vec<(f64, f64, f64)> = x.iter().map(|&t| bump(t / s)).collect();
                let mut acc = 0.0;
                for i in 0..x.len() {
                    let mut term = parts[i].2 / (s * s);
                    for (j, p) in parts.iter().enumerate() {
                        if j != i {
                            term *= p.0;
                        }
                    }
                    acc += term;
                }
                self.amplitude * acc
            }
            Shape::Radial => {
                let rho = radius(x);
                let d = x.len() as f64;
                let (_, g1, g2) = bump(rho / s);
                if rho < 1e-300 {
                    // g'(0) = 0, so the radial Laplacian tends to d * g''(0)
                    return self.amplitude * d * g2 / (s * s);
                }
                self.amplitude * (g2 / (s * s) + (d - 1.0) / rho * g1 / s)
            }
        }
    }
}

/// Tabulated profile: values on the cell centers of an `n^d` grid covering
/// `[-r, r]^d`, multilinearly interpolated, tied to zero at `±r`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub n: usize,
    pub values: Vec<f64>,
}

impl Table {
    fn axis_weights(&self, t: f64, r: f64) -> [(Option<usize>, f64); 2] {
        let h = 2.0 * r / self.n as f64;
        // node positions: -r (virtual zero), centers, r (virtual zero)
        let s = (t + r) / h - 0.5;
        if s < 0.0 {
            let w = (t + r) / (0.5 * h);
            return [(None, 1.0 - w), (Some(0), w)];
        }
        let j = s.floor() as usize;
        if j + 1 >= self.n {
            let w = (r - t) / (0.5 * h);
            return [(Some(self.n - 1), w), (None, 1.0 - w)];
        }
        let f = s - j as f64;
        [(Some(j), 1.0 - f), (Some(j + 1), f)]
    }

    fn eval(&self, x: &[f64], r: f64) -> f64 {
        if x.iter().any(|t| t.abs() >= r) {
            return 0.0;
        }
        let d = x.len();
        let w: Vec<[(Option<usize>, f64); 2]> =
            x.iter().map(|&t| self.axis_weights(t.abs(), r)).collect();
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut weight = 1.0;
            let mut lin = 0usize;
            let mut valid = true;
            for (a, wa) in w.iter().enumerate() {
                let (idx, wt) = wa[(corner >> a) & 1];
                weight *= wt;
                match idx {
                    Some(i) => lin = lin * self.n + i,
                    None => valid = false,
                }
            }
            if valid {
                acc += weight * self.values[lin];
            }
        }
        acc
    }
}

/// A single-site potential definition.
#[derive(Debug, Clone)]
pub struct PotentialSpec {
    pub kind: PotentialKind,
    pub dim: usize,
    /// Coupling. For `case2` this is unused (the profile fixes the scale).
    pub depth: f64,
    /// Support half-width: `q(x) = 0` whenever `max |x_i| >= r`.
    pub r: f64,
    pub shape: Shape,
    profile: Option<Arc<dyn FlatProfile>>,
    table: Option<Table>,
}

impl PotentialSpec {
    fn validate_common(dim: usize, r: f64) -> Result<()> {
        if !(1..=3).contains(&dim) {
            return Err(LabError::InvalidPotential(format!("unsupported dim {dim}")));
        }
        if !(r > 0.0 && r < 0.5) {
            return Err(LabError::InvalidPotential(format!("support radius r = {r} not in (0, 1/2)")));
        }
        Ok(())
    }

    /// `depth * prod cos^2(pi x_i / (2r))`, `depth <= 0`.
    pub fn well(dim: usize, depth: f64, r: f64) -> Result<Self> {
        Self::validate_common(dim, r)?;
        if depth > 0.0 {
            return Err(LabError::InvalidPotential("a well needs depth <= 0".into()));
        }
        Ok(Self::plain(PotentialKind::Well, dim, depth, r))
    }

    /// Same profile as [`PotentialSpec::well`] with `depth >= 0`.
    pub fn bump(dim: usize, depth: f64, r: f64) -> Result<Self> {
        Self::validate_common(dim, r)?;
        if depth < 0.0 {
            return Err(LabError::InvalidPotential("a bump needs depth >= 0".into()));
        }
        Ok(Self::plain(PotentialKind::Bump, dim, depth, r))
    }

    /// Sign-changing family `depth * (P_r - 3 P_{r/2})`, where `P_s` is the
    /// cos^2 lobe of half-width `s`. Its mean is nonzero in every dimension.
    pub fn indefinite(dim: usize, depth: f64, r: f64) -> Result<Self> {
        Self::validate_common(dim, r)?;
        Ok(Self::plain(PotentialKind::Indefinite, dim, depth, r))
    }

    /// The identically vanishing potential.
    pub fn zero(dim: usize, r: f64) -> Result<Self> {
        Self::well(dim, 0.0, r)
    }

    pub fn tabulated(dim: usize, r: f64, table: Table) -> Result<Self> {
        Self::validate_common(dim, r)?;
        if table.n < 2 || table.values.len() != table.n.pow(dim as u32) {
            return Err(LabError::InvalidPotential(format!(
                "table needs n >= 2 and n^d = {} values, got {}",
                table.n.pow(dim as u32),
                table.values.len()
            )));
        }
        if table.values.iter().any(|v| !v.is_finite()) {
            return Err(LabError::InvalidPotential("table contains non-finite values".into()));
        }
        // reflection symmetry of the table per axis
        let n = table.n;
        let scale = table.values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for lin in 0..table.values.len() {
            let mut idx = vec![0usize; dim];
            let mut rem = lin;
            for a in (0..dim).rev() {
                idx[a] = rem % n;
                rem /= n;
            }
            for a in 0..dim {
                let mut m = idx.clone();
                m[a] = n - 1 - m[a];
                let other = m.iter().fold(0usize, |acc, &i| acc * n + i);
                if (table.values[lin] - table.values[other]).abs() > 1e-12 * scale {
                    return Err(LabError::InvalidPotential(format!(
                        "table is not reflection symmetric along axis {a}"
                    )));
                }
            }
        }
        let mut spec = Self::plain(PotentialKind::Tabulated, dim, 1.0, r);
        spec.table = Some(table);
        Ok(spec)
    }

    fn plain(kind: PotentialKind, dim: usize, depth: f64, r: f64) -> Self {
        Self { kind, dim, depth, r, shape: Shape::Product, profile: None, table: None }
    }

    /// Switch between tensor-product and radial lobes.
    pub fn with_shape(mut self, shape: Shape) -> Self {
        self.shape = shape;
        self
    }

    /// Largest admissible displacement per axis: `1/2 - r`.
    pub fn d_max(&self) -> f64 {
        0.5 - self.r
    }

    pub fn profile(&self) -> Option<&Arc<dyn FlatProfile>> {
        self.profile.as_ref()
    }

    /// Continuum value `q(x)` at a point relative to the potential center.
    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        if x.iter().any(|t| t.abs() >= self.r) {
            return 0.0;
        }
        let ax: Vec<f64> = x.iter().map(|t| t.abs()).collect();
        match self.kind {
            PotentialKind::Well | PotentialKind::Bump => self.depth * lobe(&ax, self.r, self.shape),
            PotentialKind::Indefinite => {
                self.depth
                    * (lobe(&ax, self.r, self.shape)
                        - INDEFINITE_INNER_WEIGHT * lobe(&ax, 0.5 * self.r, self.shape))
            }
            PotentialKind::Case2 => {
                let p = self.profile.as_ref().expect("case2 potential carries a profile");
                p.laplacian(&ax) / p.value(&ax)
            }
            PotentialKind::Tabulated => self.table.as_ref().expect("tabulated table").eval(&ax, self.r),
        }
    }

    /// Is `q` identically zero?
    pub fn is_zero(&self) -> bool {
        match self.kind {
            PotentialKind::Case2 => false,
            PotentialKind::Tabulated => self.table.as_ref().is_some_and(|t| t.values.iter().all(|&v| v == 0.0)),
            _ => self.depth == 0.0,
        }
    }

    /// Same potential with the coupling negated.
    pub fn negated(&self) -> Result<Self> {
        let mut s = self.clone();
        match self.kind {
            PotentialKind::Well => s.kind = PotentialKind::Bump,
            PotentialKind::Bump => s.kind = PotentialKind::Well,
            PotentialKind::Indefinite => {}
            PotentialKind::Tabulated => {
                if let Some(t) = s.table.as_mut() {
                    t.values.iter_mut().for_each(|v| *v = -*v);
                }
                return Ok(s);
            }
            PotentialKind::Case2 => {
                return Err(LabError::InvalidRequest("a case-2 potential cannot be negated".into()))
            }
        }
        s.depth = -self.depth;
        Ok(s)
    }

    /// Short human-readable descriptor.
    pub fn describe(&self) -> String {
        format!(
            "{:?} dim={} depth={} r={} shape={:?}",
            self.kind, self.dim, self.depth, self.r, self.shape
        )
        .to_lowercase()
    }

    pub fn check_displacement(&self, a: &Displacement) -> Result<()> {
        if a.dim() != self.dim {
            return Err(LabError::InvalidRequest(format!(
                "displacement has {} components, potential is {}-dimensional",
                a.dim(),
                self.dim
            )));
        }
        let d_max = self.d_max();
        for (axis, &v) in a.0.iter().enumerate() {
            if !(v.abs() <= d_max * (1.0 + 1e-12)) {
                return Err(LabError::DisplacementOutOfRange { axis, value: v, d_max });
            }
        }
        Ok(())
    }
}

/// Build the case-2 potential `q = (Δu)/u` from a flat positive profile.
///
/// The profile must be positive, reflection symmetric, and constant on the
/// shell `0.9 r <= max |x_i| <= r` (and beyond).
pub fn construct_case2_potential(u_profile: Arc<dyn FlatProfile>, r: f64, dim: usize) -> Result<PotentialSpec> {
    PotentialSpec::validate_common(dim, r)?;
    let samples = 24usize;
    let total = (2 * samples + 1).pow(dim as u32);
    let edge = u_profile.value(&vec![r; dim]);
    for lin in 0..total {
        let mut rem = lin;
        let mut x = vec![0.0; dim];
        for xi in x.iter_mut() {
            let k = rem % (2 * samples + 1);
            rem /= 2 * samples + 1;
            *xi = (k as f64 - samples as f64) / samples as f64 * 1.05 * r;
        }
        let u = u_profile.value(&x);
        if !(u > 0.0) || !u.is_finite() {
            return Err(LabError::InvalidPotential(format!("profile not positive at {x:?}")));
        }
        for a in 0..dim {
            let mut m = x.clone();
            m[a] = -m[a];
            if (u_profile.value(&m) - u).abs() > 1e-12 * u.abs() {
                return Err(LabError::InvalidPotential(format!(
                    "profile not reflection symmetric along axis {a}"
                )));
            }
        }
        let outer = x.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        if outer >= 0.9 * r && (u - edge).abs() > 1e-12 * edge.abs() {
            return Err(LabError::InvalidPotential(format!(
                "profile is not flat near the support boundary (at {x:?})"
            )));
        }
    }
    let mut spec = PotentialSpec::plain(PotentialKind::Case2, dim, 1.0, r);
    spec.profile = Some(u_profile);
    Ok(spec)
}

/// Default case-2 profile: amplitude 0.5, bump core `0.85 r`.
pub fn default_case2(dim: usize, r: f64, shape: Shape) -> Result<PotentialSpec> {
    let p = BumpProfile { amplitude: 0.5, core: 0.85 * r, shape };
    Ok(construct_case2_potential(Arc::new(p), r, dim)?.with_shape(shape))
}

/// Discrete Neumann Laplacian `Δ_h u` on a Cartesian grid (ghost reflection).
pub fn discrete_laplacian(grid: &GridSpec, u: &[f64]) -> Vec<f64> {
    let shape = grid.shape3();
    let strides = grid.strides3();
    let mut out = vec![0.0; u.len()];
    for (lin, o) in out.iter_mut().enumerate() {
        let m = grid.multi_index(lin);
        let mut acc = 0.0;
        for a in 0..grid.dim {
            let ih2 = 1.0 / (grid.h[a] * grid.h[a]);
            if m[a] > 0 {
                acc += (u[lin - strides[a]] - u[lin]) * ih2;
            }
            if m[a] + 1 < shape[a] {
                acc += (u[lin + strides[a]] - u[lin]) * ih2;
            }
        }
        *o = acc;
    }
    out
}

/// Sample `q(x - a)` at the cell centers of `grid`.
///
/// For case-2 potentials the field is `(Δ_h u_a)/u_a` with the discrete
/// Laplacian of the same grid, so `u_a` is an exact discrete zero mode.
pub fn sample_potential(spec: &PotentialSpec, grid: &GridSpec, a: &Displacement) -> Result<Vec<f64>> {
    if grid.dim != spec.dim {
        return Err(LabError::InvalidRequest(format!(
            "grid is {}-dimensional, potential is {}-dimensional",
            grid.dim, spec.dim
        )));
    }
    spec.check_displacement(a)?;
    let n = grid.cell_count();
    let rel = |lin: usize| -> Vec<f64> {
        let m = grid.multi_index(lin);
        (0..grid.dim).map(|ax| grid.center(ax, m[ax]) - a.0[ax]).collect()
    };
    match spec.kind {
        PotentialKind::Case2 => {
            let p = spec.profile.as_ref().expect("case2 potential carries a profile");
            let u: Vec<f64> = (0..n).map(|lin| p.value(&abs_vec(&rel(lin)))).collect();
            let lap = discrete_laplacian(grid, &u);
            Ok(lap.iter().zip(&u).map(|(l, u)| l / u).collect())
        }
        _ => Ok((0..n).map(|lin| spec.eval(&rel(lin))).collect()),
    }
}

/// Values of the case-2 profile `u(x - a)` on the grid (the exact zero mode).
pub fn sample_profile(spec: &PotentialSpec, grid: &GridSpec, a: &Displacement) -> Option<Vec<f64>> {
    let p = spec.profile.as_ref()?;
    Some(
        (0..grid.cell_count())
            .map(|lin| {
                let m = grid.multi_index(lin);
                let x: Vec<f64> = (0..grid.dim).map(|ax| (grid.center(ax, m[ax]) - a.0[ax]).abs()).collect();
                p.value(&x)
            })
            .collect(),
    )
}

fn abs_vec(x: &[f64]) -> Vec<f64> {
    x.iter().map(|t| t.abs()).collect()
}

/// Largest absolute value of a field.
pub fn sup_norm(field: &[f64]) -> f64 {
    field.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid2() -> GridSpec {
        GridSpec::unit_cube(2, 64).unwrap()
    }

    #[test]
    fn well_field_extremes_and_support() {
        let q = PotentialSpec::well(2, -10.0, 0.3).unwrap();
        let g = grid2();
        let f = sample_potential(&q, &g, &Displacement::zero(2)).unwrap();
        let min = f.iter().cloned().fold(f64::INFINITY, f64::min);
        // nearest cell centers sit at +-h/2 from the origin
        let c = (PI * (0.5 / 64.0) / 0.6).cos().powi(2);
        assert!((min - (-10.0 * c * c)).abs() < 1e-12);
        assert!(min < -9.9);
        for (lin, v) in f.iter().enumerate() {
            let x = g.point(lin);
            if x.iter().any(|t| t.abs() >= 0.3) {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn translated_field_keeps_multiset() {
        let q = PotentialSpec::well(2, -10.0, 0.3).unwrap();
        let g = grid2();
        let a = Displacement(vec![12.0 / 64.0, 12.0 / 64.0]);
        let f0 = sample_potential(&q, &g, &Displacement::zero(2)).unwrap();
        let fa = sample_potential(&q, &g, &a).unwrap();
        let mut s0: Vec<f64> = f0.iter().cloned().filter(|v| *v != 0.0).collect();
        let mut sa: Vec<f64> = fa.iter().cloned().filter(|v| *v != 0.0).collect();
        s0.sort_by(f64::total_cmp);
        sa.sort_by(f64::total_cmp);
        assert_eq!(s0, sa);
        // and it is a shift by 12 cells
        for i in 0..64 {
            for j in 0..64 {
                let v = fa[i * 64 + j];
                let src = if i >= 12 && j >= 12 { f0[(i - 12) * 64 + (j - 12)] } else { 0.0 };
                assert_eq!(v, src);
            }
        }
    }

    #[test]
    fn rejects_overlap() {
        let q = PotentialSpec::well(2, -10.0, 0.3).unwrap();
        let e = sample_potential(&q, &grid2(), &Displacement(vec![0.21, 0.0]));
        assert!(matches!(e, Err(LabError::DisplacementOutOfRange { axis: 0, .. })));
    }

    #[test]
    fn reflection_symmetry_of_families() {
        let fams = [
            PotentialSpec::well(2, -3.0, 0.3).unwrap(),
            PotentialSpec::indefinite(2, 4.0, 0.25).unwrap(),
            PotentialSpec::bump(2, 2.0, 0.3).unwrap().with_shape(Shape::Radial),
            default_case2(2, 0.3, Shape::Product).unwrap(),
        ];
        for q in &fams {
            for &(x, y) in &[(0.1, 0.05), (0.2, -0.13), (0.01, 0.28)] {
                let v = q.eval(&[x, y]);
                assert_eq!(v, q.eval(&[-x, y]));
                assert_eq!(v, q.eval(&[x, -y]));
            }
            assert_eq!(q.eval(&[0.3, 0.0]), 0.0);
        }
    }

    #[test]
    fn indefinite_changes_sign() {
        let q = PotentialSpec::indefinite(2, 5.0, 0.3).unwrap();
        assert!(q.eval(&[0.0, 0.0]) < 0.0);
        assert!(q.eval(&[0.2, 0.2]) > 0.0);
    }

    #[test]
    fn case2_field_matches_fd_of_profile_and_continuum() {
        let q = default_case2(2, 0.3, Shape::Product).unwrap();
        let g = grid2();
        let a = Displacement(vec![0.05, -0.1]);
        let f = sample_potential(&q, &g, &a).unwrap();
        let u = sample_profile(&q, &g, &a).unwrap();
        let lap = discrete_laplacian(&g, &u);
        for lin in 0..f.len() {
            assert_eq!(f[lin], lap[lin] / u[lin]);
        }
        // discrete and continuum q agree to O(h^2)
        let mut err = 0.0f64;
        for lin in 0..f.len() {
            let x = g.point(lin);
            let rel: Vec<f64> = x.iter().zip(&a.0).map(|(x, a)| x - a).collect();
            err = err.max((f[lin] - q.eval(&rel)).abs());
        }
        let scale = sup_norm(&f);
        assert!(err < 0.05 * scale, "err {err} vs scale {scale}");
        // sum of Δu vanishes (flux balance) and q changes sign
        let total: f64 = lap.iter().sum();
        assert!(total.abs() < 1e-9);
        assert!(f.iter().any(|v| *v > 0.0) && f.iter().any(|v| *v < 0.0));
        // support stays inside [-r, r] + a
        for lin in 0..f.len() {
            let x = g.point(lin);
            if x.iter().zip(&a.0).any(|(x, a)| (x - a).abs() >= 0.3) {
                assert_eq!(f[lin], 0.0);
            }
        }
    }

    #[test]
    fn construct_case2_rejects_bad_profiles() {
        #[derive(Debug)]
        struct NotFlat;
        impl FlatProfile for NotFlat {
            fn value(&self, x: &[f64]) -> f64 {
                2.0 + x.iter().map(|t| t * t).sum::<f64>()
            }
        }
        #[derive(Debug)]
        struct Negative;
        impl FlatProfile for Negative {
            fn value(&self, _x: &[f64]) -> f64 {
                -1.0
            }
        }
        assert!(construct_case2_potential(Arc::new(NotFlat), 0.3, 2).is_err());
        assert!(construct_case2_potential(Arc::new(Negative), 0.3, 2).is_err());
    }

    #[test]
    fn bump_profile_laplacian_matches_fd() {
        for shape in [Shape::Product, Shape::Radial] {
            let p = BumpProfile { amplitude: 0.5, core: 0.25, shape };
            #[derive(Debug)]
            struct Fd(BumpProfile);
            impl FlatProfile for Fd {
                fn value(&self, x: &[f64]) -> f64 {
                    self.0.value(x)
                }
            }
            let fd = Fd(p);
            for x in [[0.03, 0.07], [0.12, -0.05], [0.2, 0.01]] {
                let a = p.laplacian(&x);
                let b = fd.laplacian(&x);
                assert!((a - b).abs() < 1e-5 * a.abs().max(1.0), "{shape:?} {x:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn tabulated_interpolates_and_validates() {
        let n = 4;
        let vals: Vec<f64> = (0..n * n)
            .map(|l| {
                let (i, j) = (l / n, l % n);
                let c = |k: usize| if k == 0 || k == n - 1 { 1.0 } else { 2.0 };
                -c(i) * c(j)
            })
            .collect();
        let q = PotentialSpec::tabulated(2, 0.2, Table { n, values: vals.clone() }).unwrap();
        // cell-center node value reproduced
        let h = 0.4 / n as f64;
        let x0 = -0.2 + 0.5 * h;
        assert!((q.eval(&[x0, x0]) + 1.0).abs() < 1e-12);
        assert_eq!(q.eval(&[0.2, 0.0]), 0.0);
        let mut bad = vals;
        bad[0] = 5.0;
        assert!(PotentialSpec::tabulated(2, 0.2, Table { n, values: bad }).is_err());
    }
}
