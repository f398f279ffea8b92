//! Chain parameters and the product `S_z` basis.

use log::warn;
use serde::{Deserialize, Serialize};

use super::spin::Spin;
use crate::error::{Error, Result};

/// Cartesian 3-vector in the crystal frame `(x, y, z)`.
pub type Vec3 = [f64; 3];

/// Default cap on the total Hilbert dimension.
pub const DEFAULT_DIM_CAP: usize = 1_000_000;

/// Per-atom parameters. Energies in meV, tip field in T.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteParams {
    pub spin: Spin,
    pub d: f64,
    pub e: f64,
    pub g: f64,
    #[serde(default)]
    pub tip_field: Vec3,
}

impl SiteParams {
    pub fn new(spin_magnitude: f64, d: f64, e: f64, g: f64) -> Result<Self> {
        let site = SiteParams {
            spin: Spin::new(spin_magnitude)?,
            d,
            e,
            g,
            tip_field: [0.0; 3],
        };
        site.validate()?;
        Ok(site)
    }

    /// Single Fe on Cu2N as used throughout: `S = 2`, `D = -1.87`, `E = 0.31`, `g = 2.11`.
    pub fn fe() -> Self {
        SiteParams {
            spin: Spin::from_twice(4),
            d: -1.87,
            e: 0.31,
            g: 2.11,
            tip_field: [0.0; 3],
        }
    }

    pub fn with_tip_field(mut self, tip_field: Vec3) -> Self {
        self.tip_field = tip_field;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.spin.twice() == 0 {
            return Err(Error::invalid("site spin magnitude must be positive"));
        }
        let finite = [self.d, self.e, self.g]
            .iter()
            .chain(self.tip_field.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("site parameters must be finite"));
        }
        if self.e < 0.0 {
            warn!(
                "transverse anisotropy E = {} < 0; the E >= 0 convention is assumed elsewhere",
                self.e
            );
        }
        Ok(())
    }
}

/// An open chain of `N` sites with nearest-neighbour Heisenberg couplings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    sites: Vec<SiteParams>,
    couplings: Vec<f64>,
    #[serde(default = "default_cap")]
    dim_cap: usize,
}

fn default_cap() -> usize {
    DEFAULT_DIM_CAP
}

impl ChainSpec {
    pub fn new(sites: Vec<SiteParams>, couplings: Vec<f64>) -> Result<Self> {
        Self::with_cap(sites, couplings, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(sites: Vec<SiteParams>, couplings: Vec<f64>, dim_cap: usize) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::invalid("chain needs at least one site"));
        }
        if couplings.len() + 1 != sites.len() {
            return Err(Error::invalid(format!(
                "{} sites need {} couplings, got {}",
                sites.len(),
                sites.len() - 1,
                couplings.len()
            )));
        }
        for s in &sites {
            s.validate()?;
        }
        if couplings.iter().any(|j| !j.is_finite()) {
            return Err(Error::invalid("exchange couplings must be finite"));
        }
        let chain = ChainSpec {
            sites,
            couplings,
            dim_cap,
        };
        let dim = chain.checked_dim();
        match dim {
            Some(d) if d <= dim_cap => Ok(chain),
            _ => Err(Error::invalid(format!(
                "Hilbert dimension exceeds cap {dim_cap}"
            ))),
        }
    }

    /// `n` copies of `site` joined by identical couplings `j`.
    pub fn uniform(n: usize, site: SiteParams, j: f64) -> Result<Self> {
        Self::new(vec![site; n], vec![j; n.saturating_sub(1)])
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[SiteParams] {
        &self.sites
    }

    pub fn couplings(&self) -> &[f64] {
        &self.couplings
    }

    pub fn dim_cap(&self) -> usize {
        self.dim_cap
    }

    fn checked_dim(&self) -> Option<usize> {
        self.sites
            .iter()
            .try_fold(1usize, |acc, s| acc.checked_mul(s.spin.dim()))
    }

    pub fn hilbert_dim(&self) -> usize {
        self.checked_dim().expect("dimension validated at construction")
    }

    pub fn basis(&self) -> Basis {
        Basis::new(self.sites.iter().map(|s| s.spin).collect())
    }

    /// True when the net coupling is antiferromagnetic (`sum J >= 0`);
    /// selects Neel rather than fully aligned pocket states.
    pub fn is_antiferromagnetic(&self) -> bool {
        self.couplings.iter().sum::<f64>() >= 0.0
    }

    /// Sum of site spin magnitudes.
    pub fn total_spin(&self) -> f64 {
        self.sites.iter().map(|s| s.spin.value()).sum()
    }

    /// Replace the tip field of every site.
    pub fn with_tip_fields(mut self, fields: &[Vec3]) -> Result<Self> {
        if fields.len() != self.sites.len() {
            return Err(Error::invalid("one tip field per site required"));
        }
        for (s, f) in self.sites.iter_mut().zip(fields) {
            s.tip_field = *f;
        }
        Ok(self)
    }
}

/// Product basis `|m_0, m_1, ..., m_{N-1}>`, site 0 slowest, each site
/// ordered `m = +S..-S`.
#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    spins: Vec<Spin>,
    strides: Vec<usize>,
    dim: usize,
}

impl Basis {
    pub fn new(spins: Vec<Spin>) -> Self {
        let mut strides = vec![1usize; spins.len()];
        for i in (0..spins.len().saturating_sub(1)).rev() {
            strides[i] = strides[i + 1] * spins[i + 1].dim();
        }
        let dim = spins.iter().map(|s| s.dim()).product();
        Basis {
            spins,
            strides,
            dim,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_sites(&self) -> usize {
        self.spins.len()
    }

    pub fn spin(&self, site: usize) -> Spin {
        self.spins[site]
    }

    pub fn stride(&self, site: usize) -> usize {
        self.strides[site]
    }

    /// Local index `k` of `site` in basis state `index`.
    pub fn local_index(&self, index: usize, site: usize) -> usize {
        (index / self.strides[site]) % self.spins[site].dim()
    }

    pub fn m(&self, index: usize, site: usize) -> f64 {
        self.spins[site].m(self.local_index(index, site))
    }

    /// `m_z` tuple of a basis state.
    pub fn label(&self, index: usize) -> Vec<f64> {
        (0..self.spins.len()).map(|s| self.m(index, s)).collect()
    }

    pub fn labels(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.label(i)).collect()
    }

    /// Index of the product state with the given `m` values.
    pub fn index_of(&self, ms: &[f64]) -> Result<usize> {
        if ms.len() != self.spins.len() {
            return Err(Error::invalid("m tuple length differs from site count"));
        }
        let mut idx = 0;
        for (site, (&m, spin)) in ms.iter().zip(&self.spins).enumerate() {
            let k = spin.value() - m;
            if (k - k.round()).abs() > 1e-9 || k < -1e-9 || k.round() as usize >= spin.dim() {
                return Err(Error::invalid(format!("m = {m} invalid at site {site}")));
            }
            idx += k.round() as usize * self.strides[site];
        }
        Ok(idx)
    }

    /// The two alternating fully-polarised product states, `N_A` first.
    ///
    /// `N_A` has site 0 at `-S`; for `antiparallel = false` the two states
    /// are all-down and all-up instead.
    pub fn pocket_states(&self, antiparallel: bool) -> (usize, usize) {
        let a: Vec<f64> = self
            .spins
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let sign = if antiparallel && i % 2 == 1 { 1.0 } else { -1.0 };
                sign * s.value()
            })
            .collect();
        let b: Vec<f64> = a.iter().map(|m| -m).collect();
        (
            self.index_of(&a).expect("extremal m valid"),
            self.index_of(&b).expect("extremal m valid"),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_mismatched_couplings() {
        let s = SiteParams::fe();
        assert!(ChainSpec::new(vec![s.clone(), s.clone()], vec![]).is_err());
        assert!(ChainSpec::new(vec![], vec![]).is_err());
        assert!(ChainSpec::new(vec![s.clone(), s], vec![0.7]).is_ok());
    }

    #[test]
    fn dimension_cap_is_enforced() {
        let s = SiteParams::fe();
        assert!(ChainSpec::with_cap(vec![s.clone(); 3], vec![1.0; 2], 124).is_err());
        let c = ChainSpec::with_cap(vec![s; 3], vec![1.0; 2], 125).unwrap();
        assert_eq!(c.hilbert_dim(), 125);
    }

    #[test]
    fn basis_is_site_zero_slowest() {
        let b = Basis::new(vec![Spin::from_twice(1), Spin::from_twice(4)]);
        assert_eq!(b.dim(), 10);
        assert_eq!(b.label(0), vec![0.5, 2.0]);
        assert_eq!(b.label(1), vec![0.5, 1.0]);
        assert_eq!(b.label(5), vec![-0.5, 2.0]);
        assert_eq!(b.index_of(&[-0.5, -2.0]).unwrap(), 9);
    }

    #[test]
    fn neel_states() {
        let b = Basis::new(vec![Spin::from_twice(4); 5]);
        let (a, bb) = b.pocket_states(true);
        assert_eq!(b.label(a), vec![-2.0, 2.0, -2.0, 2.0, -2.0]);
        assert_eq!(b.label(bb), vec![2.0, -2.0, 2.0, -2.0, 2.0]);
        let (a, _) = b.pocket_states(false);
        assert_eq!(b.label(a), vec![-2.0; 5]);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(SiteParams::new(2.0, f64::NAN, 0.3, 2.0).is_err());
        assert!(SiteParams::new(0.0, -1.0, 0.3, 2.0).is_err());
    }
}
