//! Closed-form eigenbases of the one-dimensional second-difference matrix
//! under each boundary condition, and their application along one axis of a
//! row-major field.
//!
//! Neumann (cell-centered, ghost reflection): `cos(pi m (j + 1/2) / n)` with
//! eigenvalues `(4/h^2) sin^2(pi m / (2n))`. Periodic: real Fourier modes with
//! `(4/h^2) sin^2(pi m / n)`. Bloch with phase `theta`: plane waves
//! `exp(i (2 pi m + theta) j / n)` with `(4/h^2) sin^2((2 pi m + theta) / (2n))`.

use std::f64::consts::PI;

use nalgebra::Complex;

pub type C64 = Complex<f64>;

/// Orthonormal real eigenbasis: `matrix[j * n + m]` is entry `j` of mode `m`.
#[derive(Debug, Clone)]
pub struct RealBasis {
    pub n: usize,
    pub matrix: Vec<f64>,
    pub eigenvalues: Vec<f64>,
}

/// Orthonormal complex eigenbasis, laid out like [`RealBasis`].
#[derive(Debug, Clone)]
pub struct ComplexBasis {
    pub n: usize,
    pub matrix: Vec<C64>,
    pub eigenvalues: Vec<f64>,
}

pub fn neumann_basis(n: usize, h: f64) -> RealBasis {
    let mut matrix = vec![0.0; n * n];
    let eigenvalues = (0..n)
        .map(|m| {
            let s = (PI * m as f64 / (2.0 * n as f64)).sin();
            4.0 * s * s / (h * h)
        })
        .collect();
    for j in 0..n {
        for m in 0..n {
            let c = if m == 0 { (1.0 / n as f64).sqrt() } else { (2.0 / n as f64).sqrt() };
            matrix[j * n + m] = c * (PI * m as f64 * (j as f64 + 0.5) / n as f64).cos();
        }
    }
    RealBasis { n, matrix, eigenvalues }
}

pub fn periodic_basis(n: usize, h: f64) -> RealBasis {
    let mut matrix = vec![0.0; n * n];
    let mut eigenvalues = vec![0.0; n];
    let nf = n as f64;
    let mut col = 0;
    let mut push = |f: &dyn Fn(usize) -> f64, freq: usize, matrix: &mut Vec<f64>, eig: &mut Vec<f64>| {
        for j in 0..n {
            matrix[j * n + col] = f(j);
        }
        let s = (PI * freq as f64 / nf).sin();
        eig[col] = 4.0 * s * s / (h * h);
        col += 1;
    };
    push(&|_| (1.0 / nf).sqrt(), 0, &mut matrix, &mut eigenvalues);
    let half = (n - 1) / 2;
    for m in 1..=half {
        let w = 2.0 * PI * m as f64 / nf;
        push(&|j| (2.0 / nf).sqrt() * (w * j as f64).cos(), m, &mut matrix, &mut eigenvalues);
        push(&|j| (2.0 / nf).sqrt() * (w * j as f64).sin(), m, &mut matrix, &mut eigenvalues);
    }
    if n % 2 == 0 {
        push(
            &|j| if j % 2 == 0 { 1.0 } else { -1.0 } / nf.sqrt(),
            n / 2,
            &mut matrix,
            &mut eigenvalues,
        );
    }
    RealBasis { n, matrix, eigenvalues }
}

pub fn bloch_basis(n: usize, h: f64, theta: f64) -> ComplexBasis {
    let nf = n as f64;
    let mut matrix = vec![C64::new(0.0, 0.0); n * n];
    let eigenvalues = (0..n)
        .map(|m| {
            let s = ((2.0 * PI * m as f64 + theta) / (2.0 * nf)).sin();
            4.0 * s * s / (h * h)
        })
        .collect();
    for j in 0..n {
        for m in 0..n {
            let ph = (2.0 * PI * m as f64 + theta) * j as f64 / nf;
            matrix[j * n + m] = C64::new(ph.cos(), ph.sin()) / nf.sqrt();
        }
    }
    ComplexBasis { n, matrix, eigenvalues }
}

/// Iterate over the starting offsets of all lines along `axis`.
fn line_starts(shape: [usize; 3], axis: usize) -> impl Iterator<Item = usize> {
    let strides = [shape[1] * shape[2], shape[2], 1];
    let others: Vec<usize> = (0..3).filter(|&a| a != axis).collect();
    let (a0, a1) = (others[0], others[1]);
    (0..shape[a0]).flat_map(move |i| (0..shape[a1]).map(move |j| i * strides[a0] + j * strides[a1]))
}

/// Replace every line along `axis` by `Q^T line` (`forward`) or `Q line`.
pub fn transform_real(data: &mut [f64], shape: [usize; 3], axis: usize, basis: &RealBasis, forward: bool) {
    let n = shape[axis];
    debug_assert_eq!(n, basis.n);
    let stride = [shape[1] * shape[2], shape[2], 1][axis];
    let mut line = vec![0.0; n];
    let mut out = vec![0.0; n];
    let q = &basis.matrix;
    for start in line_starts(shape, axis) {
        for (j, l) in line.iter_mut().enumerate() {
            *l = data[start + j * stride];
        }
        if forward {
            out.iter_mut().for_each(|o| *o = 0.0);
            for (j, &v) in line.iter().enumerate() {
                let row = &q[j * n..(j + 1) * n];
                for (o, &c) in out.iter_mut().zip(row) {
                    *o += v * c;
                }
            }
        } else {
            for (j, o) in out.iter_mut().enumerate() {
                let row = &q[j * n..(j + 1) * n];
                *o = row.iter().zip(&line).map(|(c, v)| c * v).sum();
            }
        }
        for (j, &o) in out.iter().enumerate() {
            data[start + j * stride] = o;
        }
    }
}

/// Complex analogue of [`transform_real`]; `forward` applies `Q^H`.
pub fn transform_complex(data: &mut [C64], shape: [usize; 3], axis: usize, basis: &ComplexBasis, forward: bool) {
    let n = shape[axis];
    debug_assert_eq!(n, basis.n);
    let stride = [shape[1] * shape[2], shape[2], 1][axis];
    let zero = C64::new(0.0, 0.0);
    let mut line = vec![zero; n];
    let mut out = vec![zero; n];
    let q = &basis.matrix;
    for start in line_starts(shape, axis) {
        for (j, l) in line.iter_mut().enumerate() {
            *l = data[start + j * stride];
        }
        if forward {
            out.iter_mut().for_each(|o| *o = zero);
            for (j, &v) in line.iter().enumerate() {
                let row = &q[j * n..(j + 1) * n];
                for (o, c) in out.iter_mut().zip(row) {
                    *o += c.conj() * v;
                }
            }
        } else {
            for (j, o) in out.iter_mut().enumerate() {
                let row = &q[j * n..(j + 1) * n];
                *o = row.iter().zip(&line).map(|(c, v)| c * v).sum();
            }
        }
        for (j, &o) in out.iter().enumerate() {
            data[start + j * stride] = o;
        }
    }
}
