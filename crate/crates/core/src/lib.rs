//! Numerical laboratory for ground-state energies of Schrödinger operators
//! `-Δ + q(x - a)` with displaced single-site potentials.

pub mod disk;
pub mod displacement;
pub mod eigen;
pub mod error;
pub mod grid;
pub mod lattice;
pub mod operator;
pub mod par;
pub mod perturbation;
pub mod potential;
pub mod spectral;

pub use eigen::{dense_oracle, lowest_eigenpairs, lowest_eigenpairs_with, EigenOptions, EigenResult};
pub use error::{LabError, Result};
pub use grid::{Displacement, GridSpec};
pub use operator::{assemble_operator, BcKind, BoundaryCondition, LinearOperator, OperatorHandle};
pub use potential::{sample_potential, PotentialKind, PotentialSpec, Shape};
