//! Diabolic points and magnetization-switching lifetimes of anisotropic
//! spin chains.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod constants;
pub mod diabolic;
pub mod error;
pub mod geometry;
pub mod rates;
pub mod spinmodel;
pub mod telegraph;

pub use error::{Error, Result};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub use spinmodel::{
    build_hamiltonian, diagonalize, Basis, ChainSpec, EigenOptions, Hamiltonian, SiteParams,
    Spectrum, Spin, Vec3,
};
pub use diabolic::{find_dps, DiabolicPoint, SxQuanta};
pub use geometry::{lab_to_crystal, FieldConfig, TipSite};
pub use rates::{LifetimeModel, LifetimePrediction, TransportParams};
pub use telegraph::{DwellRecord, LifetimeEstimate, TelegraphTrace};
