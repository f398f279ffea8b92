//! Field sweeps of the predicted magnetization lifetime.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::elements::{scattering_intensity, transition_elements};
use super::matrix::build_rate_matrix;
use super::pockets::{classify_pockets, pocket_lifetimes, Pocket};
use super::{harmonic_lifetime, TransportParams};
use crate::diabolic::{sx_quanta_series, SxQuanta};
use crate::error::{Error, Result};
use crate::geometry::{lab_to_crystal, total_site_fields, FieldConfig, TipSite};
use crate::spinmodel::{
    build_hamiltonian, diagonalize, truncate_spectrum, ChainSpec, EigenOptions, Spectrum, Vec3,
};

/// Everything needed to turn an applied field into a lifetime.
#[derive(Clone, Debug)]
pub struct LifetimeModel {
    pub chain: ChainSpec,
    /// `Probed` moves the chain's tip field onto `transport.probed_site`.
    pub tip_site: TipSite,
    pub transport: TransportParams,
    pub eigen: EigenOptions,
    pub pocket_threshold: f64,
    /// Fixed number of kept states; overrides `energy_window_mev`.
    pub n_states: Option<usize>,
    /// Keep every state within this energy of the ground state (meV), and
    /// never fewer than 16. Defaults to `|V| + 15 k_B T + 2 meV`.
    pub energy_window_mev: Option<f64>,
    /// Amplitudes kept per state; `None` keeps all.
    pub n_amplitudes: Option<usize>,
    /// Label each point with ground-state `S_x` quanta.
    pub with_sx_quanta: bool,
}

impl LifetimeModel {
    pub fn new(chain: ChainSpec, transport: TransportParams) -> Self {
        LifetimeModel {
            chain,
            tip_site: TipSite::Probed,
            transport,
            eigen: EigenOptions::default(),
            pocket_threshold: 0.5,
            n_states: None,
            energy_window_mev: None,
            n_amplitudes: None,
            with_sx_quanta: true,
        }
    }

    pub fn energy_window(&self) -> f64 {
        self.energy_window_mev.unwrap_or_else(|| {
            self.transport.bias_mv.abs() + 15.0 * self.transport.kt() + 2.0
        })
    }

    fn site_fields(&self, crystal: Vec3) -> Result<Vec<Vec3>> {
        let probed = match self.tip_site {
            TipSite::Probed => Some(self.transport.probed_site),
            TipSite::Index(_) => None,
        };
        total_site_fields(crystal, &self.chain, probed)
    }

    /// Kept eigenstates at one crystal-frame field.
    pub fn spectrum(&self, crystal: Vec3) -> Result<Spectrum> {
        let h = build_hamiltonian(&self.chain, &self.site_fields(crystal)?)?;
        let dim = h.dim();
        let solve = |k: usize| {
            diagonalize(
                &h,
                &EigenOptions {
                    n_states: Some(k),
                    ..self.eigen.clone()
                },
            )
        };
        let spec = match self.n_states {
            Some(k) => solve(k.clamp(2.min(dim), dim))?,
            None => {
                let window = self.energy_window();
                let mut k = INITIAL_STATES.min(dim);
                loop {
                    let s = solve(k)?;
                    let top = s.energies[s.len() - 1] - s.energies[0];
                    if top >= window || k == dim {
                        let keep = s.energies.iter().filter(|&&e| e - s.energies[0] <= window).count();
                        break truncate_spectrum(&s, keep.max(MIN_STATES.min(k)), dim)?;
                    }
                    k = (2 * k).min(dim);
                }
            }
        };
        match self.n_amplitudes {
            Some(a) => truncate_spectrum(&spec, spec.len(), a),
            None => Ok(spec),
        }
    }
}

const INITIAL_STATES: usize = 24;
const MIN_STATES: usize = 16;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifetimePrediction {
    /// Applied crystal-frame field (T).
    pub field: Vec3,
    pub gap: f64,
    /// `sum_a |<psi_0|S_a|psi_1>|^2` at the probed site.
    pub scattering_intensity: f64,
    pub t_a: f64,
    pub t_b: f64,
    pub t_avg: f64,
    pub pocket_labels: Vec<Pocket>,
    /// `|<N_A|psi_0>|^2` and `|<N_B|psi_0>|^2`.
    pub pocket_overlap_a: f64,
    pub pocket_overlap_b: f64,
    pub kept_states: usize,
    pub sx_quanta: Option<SxQuanta>,
}

/// Lifetime at one crystal-frame field.
pub fn lifetime_point(model: &LifetimeModel, crystal: Vec3) -> Result<LifetimePrediction> {
    let spec = model.spectrum(crystal)?;
    let rates = build_rate_matrix(&spec, &model.transport)?;
    let pockets = classify_pockets(&spec, &model.chain, model.pocket_threshold)?;
    let (t_a, t_b) = pocket_lifetimes(&rates.total, &pockets)?;
    if !(t_a > 0.0 && t_b > 0.0) {
        return Err(Error::Numerical(format!("non-positive lifetime ({t_a}, {t_b})")));
    }
    let el = transition_elements(&spec, model.transport.probed_site)?;
    Ok(LifetimePrediction {
        field: crystal,
        gap: spec.energies[1] - spec.energies[0],
        scattering_intensity: scattering_intensity(&el, 0, 1),
        t_a,
        t_b,
        t_avg: harmonic_lifetime(t_a, t_b),
        pocket_overlap_a: pockets.overlap_a[0],
        pocket_overlap_b: pockets.overlap_b[0],
        pocket_labels: pockets.labels,
        kept_states: spec.len(),
        sx_quanta: None,
    })
}

/// Lifetimes along a list of magnet settings. Points run in parallel;
/// output order follows `fields`.
pub fn lifetime_curve(model: &LifetimeModel, fields: &[FieldConfig]) -> Result<Vec<LifetimePrediction>> {
    let crystal: Vec<Vec3> = fields.iter().map(lab_to_crystal).collect::<Result<_>>()?;
    lifetime_curve_crystal(model, &crystal)
}

/// As [`lifetime_curve`] but with crystal-frame fields given directly.
pub fn lifetime_curve_crystal(model: &LifetimeModel, crystal: &[Vec3]) -> Result<Vec<LifetimePrediction>> {
    model.transport.validate()?;
    let mut out: Vec<LifetimePrediction> = crystal
        .par_iter()
        .map(|&b| lifetime_point(model, b))
        .collect::<Result<_>>()?;
    if model.with_sx_quanta && !out.is_empty() {
        let bx: Vec<f64> = crystal.iter().map(|b| b[0]).collect();
        let labels = sx_quanta_series(&model.chain, &bx, &model.eigen)?;
        for (p, q) in out.iter_mut().zip(labels) {
            p.sx_quanta = Some(q);
        }
    }
    Ok(out)
}
