//! Spin-chain model: local spin operators, chain parameters, the
//! Hamiltonian and its eigenstates.

pub mod chain;
pub mod eigen;
pub mod hamiltonian;
mod lanczos;
pub mod spin;

pub use chain::{Basis, ChainSpec, SiteParams, Vec3, DEFAULT_DIM_CAP};
pub use eigen::{
    diagonalize, lowest_eigenvalues, truncate_spectrum, EigenOptions, Solver, Spectrum, Truncation,
};
pub use hamiltonian::{
    apply_site_operator, build_hamiltonian, embed_site_operator, Hamiltonian, SiteOp,
    SparseHermitian,
};
pub use spin::{spin_matrices, Spin, SpinMatrices};
