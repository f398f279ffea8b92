//! Spin-operator matrix elements between eigenstates.

use faer::linalg::matmul::matmul;
use faer::{Accum, Mat, Par};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::spinmodel::{apply_site_operator, SiteOp, Spectrum};

/// `<psi_f|S_a,site|psi_i>` stored as `[f][i]` over the kept states.
#[derive(Clone, Debug)]
pub struct SiteElements {
    pub site: usize,
    pub sz: Mat<C64>,
    pub splus: Mat<C64>,
}

impl SiteElements {
    pub fn len(&self) -> usize {
        self.sz.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `S-` elements; `S- = (S+)^dagger`.
    pub fn sminus(&self) -> Mat<C64> {
        self.splus.adjoint().to_owned()
    }

    pub fn sx(&self) -> Mat<C64> {
        let m = self.sminus();
        Mat::from_fn(self.len(), self.len(), |f, i| (self.splus[(f, i)] + m[(f, i)]) * 0.5)
    }

    pub fn sy(&self) -> Mat<C64> {
        let m = self.sminus();
        Mat::from_fn(self.len(), self.len(), |f, i| {
            (self.splus[(f, i)] - m[(f, i)]) * C64::new(0.0, -0.5)
        })
    }

    /// `|<f|S+|i>|^2`.
    pub fn plus_sq(&self, f: usize, i: usize) -> f64 {
        self.splus[(f, i)].norm_sqr()
    }

    /// `|<f|S-|i>|^2 = |<i|S+|f>|^2`.
    pub fn minus_sq(&self, f: usize, i: usize) -> f64 {
        self.splus[(i, f)].norm_sqr()
    }

    pub fn z_sq(&self, f: usize, i: usize) -> f64 {
        self.sz[(f, i)].norm_sqr()
    }
}

/// Matrix elements of `S_z` and `S+` at `site` between all kept states.
pub fn transition_elements(spec: &Spectrum, site: usize) -> Result<SiteElements> {
    if site >= spec.basis.n_sites() {
        return Err(Error::invalid(format!(
            "site {site} out of range for {} sites",
            spec.basis.n_sites()
        )));
    }
    let psi = spec.vectors.as_ref();
    let k = psi.ncols();
    let project = |op| {
        let applied = apply_site_operator(&spec.basis, site, op, psi);
        let mut out = Mat::<C64>::zeros(k, k);
        matmul(
            out.as_mut(),
            Accum::Replace,
            psi.adjoint(),
            applied.as_ref(),
            C64::new(1.0, 0.0),
            Par::Seq,
        );
        out
    };
    Ok(SiteElements {
        site,
        sz: project(SiteOp::Z),
        splus: project(SiteOp::Plus),
    })
}

/// `sum_{a=x,y,z} |<psi_f|S_a|psi_i>|^2` at the element's site.
pub fn scattering_intensity(el: &SiteElements, i: usize, f: usize) -> f64 {
    // |Sx|^2 + |Sy|^2 = (|S+|^2 + |S-|^2) / 2
    el.z_sq(f, i) + 0.5 * (el.plus_sq(f, i) + el.minus_sq(f, i))
}
