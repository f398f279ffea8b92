//! Angular-momentum matrices for a single spin.
//!
//! Local basis ordering is `m = +S, S-1, ..., -S`, i.e. index `k` carries
//! `m = S - k`.

use faer::Mat;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spin magnitude stored as the integer `2S`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct Spin {
    two_s: u32,
}

impl Spin {
    pub fn new(s: f64) -> Result<Self> {
        let two_s = 2.0 * s;
        if !two_s.is_finite() || two_s < 0.0 || (two_s - two_s.round()).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "spin magnitude {s} is not a non-negative half-integer"
            )));
        }
        Ok(Spin {
            two_s: two_s.round() as u32,
        })
    }

    pub const fn from_twice(two_s: u32) -> Self {
        Spin { two_s }
    }

    pub fn value(self) -> f64 {
        f64::from(self.two_s) / 2.0
    }

    pub fn twice(self) -> u32 {
        self.two_s
    }

    /// Local Hilbert-space dimension `2S + 1`.
    pub fn dim(self) -> usize {
        self.two_s as usize + 1
    }

    /// Magnetic quantum number of local basis index `k`.
    pub fn m(self, k: usize) -> f64 {
        self.value() - k as f64
    }

    /// `<m+1|S+|m>`.
    pub fn raise_coefficient(self, m: f64) -> f64 {
        let s = self.value();
        (s * (s + 1.0) - m * (m + 1.0)).max(0.0).sqrt()
    }

    /// `<m-1|S-|m>`.
    pub fn lower_coefficient(self, m: f64) -> f64 {
        let s = self.value();
        (s * (s + 1.0) - m * (m - 1.0)).max(0.0).sqrt()
    }
}

impl TryFrom<f64> for Spin {
    type Error = Error;

    fn try_from(s: f64) -> Result<Self> {
        Spin::new(s)
    }
}

impl From<Spin> for f64 {
    fn from(s: Spin) -> f64 {
        s.value()
    }
}

/// Dense single-spin operators in the `m = +S..-S` basis.
#[derive(Clone, Debug)]
pub struct SpinMatrices {
    pub sz: Mat<C64>,
    pub splus: Mat<C64>,
    pub sminus: Mat<C64>,
    pub sx: Mat<C64>,
    pub sy: Mat<C64>,
}

pub fn spin_matrices(spin_magnitude: f64) -> Result<SpinMatrices> {
    let spin = Spin::new(spin_magnitude)?;
    let n = spin.dim();
    let zero = C64::new(0.0, 0.0);
    let sz = Mat::from_fn(n, n, |r, c| {
        if r == c {
            C64::new(spin.m(c), 0.0)
        } else {
            zero
        }
    });
    // S+ moves index k -> k-1 (m -> m+1).
    let splus = Mat::from_fn(n, n, |r, c| {
        if c >= 1 && r == c - 1 {
            C64::new(spin.raise_coefficient(spin.m(c)), 0.0)
        } else {
            zero
        }
    });
    let sminus = Mat::from_fn(n, n, |r, c| splus[(c, r)].conj());
    let sx = Mat::from_fn(n, n, |r, c| (splus[(r, c)] + sminus[(r, c)]) * 0.5);
    let sy = Mat::from_fn(n, n, |r, c| {
        (splus[(r, c)] - sminus[(r, c)]) * C64::new(0.0, -0.5)
    });
    Ok(SpinMatrices {
        sz,
        splus,
        sminus,
        sx,
        sy,
    })
}
