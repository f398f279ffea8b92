//! Magnet-frame to crystal-frame field conversion.
//!
//! The two-axis magnet supplies `B1` and `B2`; the crystal is rotated
//! relative to it by Tait-Bryan angles `beta` (about z), `gamma` (about x')
//! and `alpha` (about y''). Crystal axes: `z` easy, `x` hard in-plane,
//! `y` out of plane.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spinmodel::{ChainSpec, Vec3};

/// Default stage-to-magnet tilt, degrees.
pub const DEFAULT_ALPHA_TILT: f64 = 3.0;

/// Applied field and mounting angles (degrees).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldConfig {
    pub b1: f64,
    pub b2: f64,
    pub alpha_atomic: f64,
    pub alpha_tilt: f64,
    pub beta: f64,
    pub gamma: f64,
}

impl Default for FieldConfig {
    fn default() -> Self {
        FieldConfig {
            b1: 0.0,
            b2: 0.0,
            alpha_atomic: DEFAULT_ALPHA_TILT,
            alpha_tilt: DEFAULT_ALPHA_TILT,
            beta: 0.0,
            gamma: 0.0,
        }
    }
}

impl FieldConfig {
    /// Field `b1` along the magnet axis with effective angle `alpha`
    /// (degrees) and the default tilt.
    pub fn with_alpha(b1: f64, alpha: f64) -> Self {
        FieldConfig {
            b1,
            alpha_atomic: alpha + DEFAULT_ALPHA_TILT,
            ..Default::default()
        }
    }

    /// Effective `alpha = alpha_atomic - alpha_tilt`.
    pub fn alpha(&self) -> f64 {
        self.alpha_atomic - self.alpha_tilt
    }

    pub fn validate(&self) -> Result<()> {
        let angles = [
            ("alpha_atomic", self.alpha_atomic),
            ("alpha_tilt", self.alpha_tilt),
            ("alpha", self.alpha()),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ];
        for (name, a) in angles {
            if !a.is_finite() || a.abs() >= 90.0 {
                return Err(Error::invalid(format!("{name} = {a} deg outside (-90, 90)")));
            }
        }
        if !self.b1.is_finite() || !self.b2.is_finite() {
            return Err(Error::invalid("field magnitudes must be finite"));
        }
        Ok(())
    }
}

/// Crystal-frame `(Bx, By, Bz)` in tesla.
pub fn lab_to_crystal(cfg: &FieldConfig) -> Result<Vec3> {
    cfg.validate()?;
    let (sa, ca) = cfg.alpha().to_radians().sin_cos();
    let (sb, cb) = cfg.beta.to_radians().sin_cos();
    let (sg, cg) = cfg.gamma.to_radians().sin_cos();
    let (b1, b2) = (cfg.b1, cfg.b2);
    Ok([
        b1 * (ca * cb - sa * sb * sg) + b2 * (ca * sb + sa * cb * sg),
        -b1 * sb * cg + b2 * cb * cg,
        b1 * (sa * cb + ca * sb * sg) + b2 * (sa * sb - ca * cb * sg),
    ])
}

/// Small-angle form with `gamma = 0`, `B2 = 0`.
pub fn simplified_field(b1: f64, alpha: f64, beta: f64) -> Result<Vec3> {
    for (name, a) in [("alpha", alpha), ("beta", beta)] {
        if !a.is_finite() || a.abs() >= 90.0 {
            return Err(Error::invalid(format!("{name} = {a} deg outside (-90, 90)")));
        }
    }
    let (sa, ca) = alpha.to_radians().sin_cos();
    let (sb, cb) = beta.to_radians().sin_cos();
    Ok([b1 * ca * cb, -b1 * sb, b1 * sa * cb])
}

/// Field of magnitude `b` along the easy axis `z`, misaligned by `alpha`
/// degrees towards `x`.
pub fn longitudinal_field(b: f64, alpha: f64) -> Result<Vec3> {
    if !alpha.is_finite() || alpha.abs() >= 90.0 {
        return Err(Error::invalid(format!("alpha = {alpha} deg outside (-90, 90)")));
    }
    let (sa, ca) = alpha.to_radians().sin_cos();
    Ok([b * sa, 0.0, b * ca])
}

/// Where the tip field acts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TipSite {
    /// Whichever atom is under the tip.
    Probed,
    /// A fixed site index.
    #[serde(untagged)]
    Index(usize),
}

/// Per-site total fields: the crystal field plus each site's tip field.
///
/// With `probed_site = Some(p)`, every site's tip field is moved onto `p`
/// (the tip sits over one atom at a time); the magnitude used is the
/// largest tip field present in the chain.
pub fn total_site_fields(crystal_field: Vec3, chain: &ChainSpec, probed_site: Option<usize>) -> Result<Vec<Vec3>> {
    let n = chain.len();
    let mut tips: Vec<Vec3> = chain.sites().iter().map(|s| s.tip_field).collect();
    if let Some(p) = probed_site {
        if p >= n {
            return Err(Error::invalid(format!("probed site {p} out of range for {n} sites")));
        }
        let tip = tips
            .iter()
            .copied()
            .max_by(|a, b| norm(*a).total_cmp(&norm(*b)))
            .unwrap_or([0.0; 3]);
        tips = vec![[0.0; 3]; n];
        tips[p] = tip;
    }
    Ok(tips
        .into_iter()
        .map(|t| [crystal_field[0] + t[0], crystal_field[1] + t[1], crystal_field[2] + t[2]])
        .collect())
}

/// Place a z-only tip field (mT) on one site.
pub fn tip_field_vectors(n_sites: usize, site: usize, tip_field_mt: f64) -> Result<Vec<Vec3>> {
    if site >= n_sites {
        return Err(Error::invalid(format!("tip site {site} out of range for {n_sites} sites")));
    }
    let mut v = vec![[0.0; 3]; n_sites];
    v[site][2] = tip_field_mt * 1e-3;
    Ok(v)
}

fn norm(v: Vec3) -> f64 {
    (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinmodel::SiteParams;

    fn cfg(b1: f64, b2: f64, alpha: f64, beta: f64, gamma: f64) -> FieldConfig {
        FieldConfig {
            b1,
            b2,
            alpha_atomic: alpha,
            alpha_tilt: 0.0,
            beta,
            gamma,
        }
    }

    #[test]
    fn identity_rotation() {
        let b = lab_to_crystal(&cfg(1.5, 0.7, 0.0, 0.0, 0.0)).unwrap();
        assert!((b[0] - 1.5).abs() < 1e-15);
        assert!((b[1] - 0.7).abs() < 1e-15);
        assert!(b[2].abs() < 1e-15);
    }

    #[test]
    fn small_alpha_longitudinal_fraction() {
        let b = lab_to_crystal(&cfg(4.0, 0.0, 0.2, 0.0, 0.0)).unwrap();
        let ratio = b[2] / b[0];
        assert!((ratio - 0.2f64.to_radians().tan()).abs() < 1e-15);
        assert!((ratio - 0.0035).abs() < 0.0001);
    }

    #[test]
    fn beta_gives_out_of_plane_component() {
        let b = lab_to_crystal(&cfg(5.0, 0.0, 0.0, -8.0, 0.0)).unwrap();
        assert!((b[1] - 5.0 * 8f64.to_radians().sin()).abs() < 1e-14);
    }

    #[test]
    fn effective_alpha_subtracts_tilt() {
        let c = FieldConfig {
            b1: 1.0,
            alpha_atomic: 12.0,
            ..Default::default()
        };
        assert_eq!(c.alpha(), 9.0);
        assert!((FieldConfig::with_alpha(1.0, 0.2).alpha() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn simplified_direct_formula_and_guard() {
        let b = simplified_field(6.0, 5.0, -8.0).unwrap();
        assert!((b[2] - 6.0 * 5f64.to_radians().sin() * 8f64.to_radians().cos()).abs() < 1e-15);
        assert!(simplified_field(6.0, 90.0, 0.0).is_err());
        assert!(lab_to_crystal(&cfg(1.0, 0.0, 90.0, 0.0, 0.0)).is_err());
        assert!(lab_to_crystal(&cfg(1.0, 0.0, 0.0, 0.0, -95.0)).is_err());
    }

    #[test]
    fn probed_site_receives_tip_field() {
        let tip = [0.0, 0.0, -0.110];
        let mut sites = vec![SiteParams::fe(); 6];
        sites[0] = sites[0].clone().with_tip_field(tip);
        let chain = ChainSpec::new(sites, vec![1.0; 5]).unwrap();
        let f = total_site_fields([4.0, 0.0, 0.01], &chain, Some(2)).unwrap();
        assert!((f[2][2] - (0.01 - 0.110)).abs() < 1e-15);
        for (i, v) in f.iter().enumerate() {
            if i != 2 {
                assert_eq!(*v, [4.0, 0.0, 0.01]);
            }
        }
        let fixed = total_site_fields([4.0, 0.0, 0.01], &chain, None).unwrap();
        assert!((fixed[0][2] + 0.1).abs() < 1e-15);
        assert!(total_site_fields([0.0; 3], &chain, Some(6)).is_err());
    }

    #[test]
    fn tip_vectors_are_z_only() {
        let v = tip_field_vectors(5, 0, 50.0).unwrap();
        assert_eq!(v[0], [0.0, 0.0, 0.05]);
        assert!(v[1..].iter().all(|x| *x == [0.0; 3]));
        assert!(tip_field_vectors(5, 5, 1.0).is_err());
    }
}
