//! Dense direct-method oracle for small operators.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{LabError, Result};
use crate::operator::LinearOperator;
use crate::spectral::C64;

/// Largest cell count the oracle will materialize.
pub const DENSE_CELL_LIMIT: usize = 4096;

fn cells(op: &dyn LinearOperator) -> usize {
    if op.is_complex() {
        op.dim() / 2
    } else {
        op.dim()
    }
}

/// Materialize the operator column by column. Complex operators yield the
/// Hermitian `cells x cells` matrix; real ones have zero imaginary parts.
pub fn dense_matrix(op: &dyn LinearOperator) -> Result<DMatrix<C64>> {
    let c = cells(op);
    if c > DENSE_CELL_LIMIT {
        return Err(LabError::Budget(format!(
            "dense oracle limited to {DENSE_CELL_LIMIT} cells, operator has {c}"
        )));
    }
    let n = op.dim();
    let mut mat = DMatrix::<C64>::zeros(c, c);
    let mut e = vec![0.0; n];
    let mut y = vec![0.0; n];
    for j in 0..c {
        e[j] = 1.0;
        op.apply(&e, &mut y);
        e[j] = 0.0;
        for i in 0..c {
            let im = if op.is_complex() { y[c + i] } else { 0.0 };
            mat[(i, j)] = C64::new(y[i], im);
        }
    }
    if mat.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(LabError::NonFinite);
    }
    Ok(mat)
}

/// Full ascending spectrum by a direct symmetric/Hermitian eigensolver.
pub fn dense_oracle(op: &dyn LinearOperator) -> Result<Vec<f64>> {
    let mat = dense_matrix(op)?;
    let mut vals: Vec<f64> = if op.is_complex() {
        let herm = (&mat + mat.adjoint()) * C64::new(0.5, 0.0);
        SymmetricEigen::new(herm).eigenvalues.iter().copied().collect()
    } else {
        let re = mat.map(|v| v.re);
        let sym = (&re + re.transpose()) * 0.5;
        SymmetricEigen::new(sym).eigenvalues.iter().copied().collect()
    };
    vals.sort_by(f64::total_cmp);
    Ok(vals)
}
