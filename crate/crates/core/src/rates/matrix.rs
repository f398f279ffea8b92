//! Rate matrix assembled from the three electron-scattering channels.

use faer::Mat;

use super::elements::{transition_elements, SiteElements};
use super::kernel::rate_kernel;
use super::TransportParams;
use crate::error::{Error, Result};
use crate::spinmodel::Spectrum;

/// Transition rates `W[f][i]` (1/s) between kept eigenstates.
///
/// Diagonals are zero. `tip_to_sample` and `sample_to_tip` involve only the
/// probed site; `sample_sample` sums over all sites.
#[derive(Clone, Debug)]
pub struct RateMatrix {
    pub energies: Vec<f64>,
    pub tip_to_sample: Mat<f64>,
    pub sample_to_tip: Mat<f64>,
    pub sample_sample: Mat<f64>,
    pub total: Mat<f64>,
}

impl RateMatrix {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    /// Rate from `i` to `f`.
    pub fn rate(&self, f: usize, i: usize) -> f64 {
        self.total[(f, i)]
    }

    /// Total escape rate out of `i`.
    pub fn escape_rate(&self, i: usize) -> f64 {
        (0..self.len()).filter(|&f| f != i).map(|f| self.total[(f, i)]).sum()
    }
}

/// Spin-resolved weights of one channel: `(|Sz|^2, |S+|^2, |S-|^2)` factors.
#[derive(Clone, Copy)]
struct ChannelWeights {
    z: f64,
    plus: f64,
    minus: f64,
}

impl ChannelWeights {
    fn weight(&self, el: &SiteElements, f: usize, i: usize) -> f64 {
        0.5 * (self.z * el.z_sq(f, i) + self.plus * el.plus_sq(f, i) + self.minus * el.minus_sq(f, i))
    }
}

/// Builds all three channels for the kept states of `spec`.
///
/// A tip electron tunnelling into the sample with spin up can raise the
/// atomic spin; with polarization `eta` the tip populations are
/// `(1 +- eta) / 2`. The energy handed to the electron bath for `i -> f`
/// is `E_i - E_f` plus `eV` for tip-to-sample and minus `eV` for
/// sample-to-tip events.
pub fn build_rate_matrix(spec: &Spectrum, tp: &TransportParams) -> Result<RateMatrix> {
    tp.validate()?;
    let n_sites = spec.basis.n_sites();
    if tp.probed_site >= n_sites {
        return Err(Error::invalid(format!(
            "probed site {} out of range for {n_sites} sites",
            tp.probed_site
        )));
    }
    let k = spec.len();
    let e = &spec.energies;
    let t = tp.temperature_k;
    let v = tp.bias_mv;
    let up = 0.5 * (1.0 + tp.eta);
    let down = 0.5 * (1.0 - tp.eta);
    let ts_w = ChannelWeights { z: 1.0, plus: up, minus: down };
    let st_w = ChannelWeights { z: 1.0, plus: down, minus: up };
    let ss_w = ChannelWeights { z: 1.0, plus: 0.5, minus: 0.5 };

    let elements: Vec<SiteElements> = (0..n_sites)
        .map(|s| transition_elements(spec, s))
        .collect::<Result<_>>()?;
    let probed = &elements[tp.probed_site];

    let c_tip = tp.prefactor(tp.tip_conductance());
    let c_ss = tp.prefactor(tp.substrate_conductance());

    let mut ts = Mat::<f64>::zeros(k, k);
    let mut st = Mat::<f64>::zeros(k, k);
    let mut ss = Mat::<f64>::zeros(k, k);
    for i in 0..k {
        for f in 0..k {
            if f == i {
                continue;
            }
            let de = e[i] - e[f];
            if c_tip > 0.0 {
                ts[(f, i)] = c_tip * ts_w.weight(probed, f, i) * rate_kernel(de + v, t);
                st[(f, i)] = c_tip * st_w.weight(probed, f, i) * rate_kernel(de - v, t);
            }
            if c_ss > 0.0 {
                let y: f64 = elements.iter().map(|el| ss_w.weight(el, f, i)).sum();
                ss[(f, i)] = c_ss * y * rate_kernel(de, t);
            }
        }
    }
    let total = Mat::from_fn(k, k, |f, i| ts[(f, i)] + st[(f, i)] + ss[(f, i)]);
    if total.col_iter().any(|c| c.iter().any(|x| !x.is_finite())) {
        return Err(Error::Numerical("non-finite transition rate".into()));
    }
    Ok(RateMatrix {
        energies: e.clone(),
        tip_to_sample: ts,
        sample_to_tip: st,
        sample_sample: ss,
        total,
    })
}
