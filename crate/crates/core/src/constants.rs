//! Physical constants shared by every module.
//!
//! All energies in the crate are in meV, fields in tesla, temperatures in
//! kelvin and rates in 1/s.

/// Bohr magneton in meV/T.
pub const MU_B: f64 = 0.057_883_8;

/// Boltzmann constant in meV/K.
pub const K_B: f64 = 0.086_173_3;

/// Elementary charge in C.
pub const E_CHARGE: f64 = 1.602_176_634e-19;

/// Named constants, in the order they are written to run manifests.
pub const ALL: [(&str, f64, &str); 3] = [
    ("mu_b", MU_B, "meV/T"),
    ("k_b", K_B, "meV/K"),
    ("e_charge", E_CHARGE, "C"),
];
