//! Telegraph-noise synthesis and analysis: switching trajectories, current
//! traces, switch detection and dwell-time statistics.

mod detect;
mod fit;
mod io;
mod simulate;

use serde::{Deserialize, Serialize};

use crate::constants::{K_B, MU_B};
use crate::error::{Error, Result};
use crate::rates::Pocket;

pub use detect::{detect_switches, DetectOptions};
pub use fit::{fit_dwell_times, FitMethod, LifetimeEstimate, LifetimeFit, DEFAULT_MIN_EVENTS};
pub use io::{read_trace, write_dwells, write_trace};
pub use simulate::{
    project_to_pockets, simulate_trajectory, synthesize_trace, Jump, Trajectory,
};

/// Current readout level of a dwell.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Level {
    High,
    Low,
}

/// One interval between consecutive switches.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DwellRecord {
    pub level: Level,
    /// Pocket behind the level, when the readout polarity is known.
    pub pocket: Option<Pocket>,
    /// Seconds.
    pub duration: f64,
    /// True for the first and last dwell of a trace, which are cut by its edges.
    pub censored: bool,
}

/// Selects the dwells entering a fit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DwellState {
    High,
    Low,
    A,
    B,
}

impl DwellState {
    fn matches(self, d: &DwellRecord) -> bool {
        match self {
            DwellState::High => d.level == Level::High,
            DwellState::Low => d.level == Level::Low,
            DwellState::A => d.pocket == Some(Pocket::A),
            DwellState::B => d.pocket == Some(Pocket::B),
        }
    }
}

/// Sampled current with its generating metadata.
#[derive(Clone, Debug, PartialEq)]
pub struct TelegraphTrace {
    /// pA.
    pub samples: Vec<f64>,
    pub sample_rate_hz: f64,
    pub seed: Option<u64>,
    /// Readout levels used for synthesis (pA).
    pub levels_pa: Vec<f64>,
    pub noise_rms_pa: Option<f64>,
    pub ground_truth: Option<Trajectory>,
}

impl TelegraphTrace {
    pub fn new(samples: Vec<f64>, sample_rate_hz: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
            return Err(Error::invalid("sample rate must be positive"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::invalid("trace samples must be finite"));
        }
        Ok(TelegraphTrace {
            samples,
            sample_rate_hz,
            seed: None,
            levels_pa: Vec::new(),
            noise_rms_pa: None,
            ground_truth: None,
        })
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz
    }

    /// Samples shifted so that the midpoint between the extreme levels sits at zero.
    pub fn centered(&self) -> Vec<f64> {
        let (lo, hi) = self
            .samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let mid = if self.levels_pa.len() >= 2 {
            let lo = self.levels_pa.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = self.levels_pa.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            0.5 * (lo + hi)
        } else {
            0.5 * (lo + hi)
        };
        self.samples.iter().map(|s| s - mid).collect()
    }
}

/// Labels dwells with pockets given which pocket reads as the low current.
pub fn assign_pockets(dwells: &mut [DwellRecord], low_is: Pocket) {
    let other = match low_is {
        Pocket::A => Pocket::B,
        Pocket::B => Pocket::A,
        Pocket::Other => Pocket::Other,
    };
    for d in dwells {
        d.pocket = Some(match d.level {
            Level::Low => low_is,
            Level::High => other,
        });
    }
}

/// `(T_A^-1 + T_B^-1)^-1`; an infinite lifetime drops out.
pub fn average_lifetime(t_a: f64, t_b: f64) -> Result<f64> {
    if !(t_a > 0.0 && t_b > 0.0) {
        return Err(Error::invalid("lifetimes must be positive"));
    }
    Ok(crate::rates::harmonic_lifetime(t_a, t_b))
}

/// `k_B T ln(T_H / T_L)` in ueV.
pub fn lifetime_ratio_energy(t_high: f64, t_low: f64, temperature_k: f64) -> Result<f64> {
    if !(t_high > 0.0 && t_low > 0.0) || !t_high.is_finite() || !t_low.is_finite() {
        return Err(Error::invalid("lifetimes must be positive and finite"));
    }
    if !(temperature_k > 0.0) {
        return Err(Error::invalid("temperature must be positive"));
    }
    Ok(K_B * temperature_k * (t_high / t_low).ln() * 1e3)
}

/// Effective number of uncompensated spin-2 moments, `dE / (4 g mu_B B_z)`.
pub fn unpaired_spins(delta_e_uev: f64, g: f64, bz: f64) -> Result<f64> {
    if bz == 0.0 {
        return Err(Error::Undefined("unpaired spins need B_z != 0".into()));
    }
    if !(g > 0.0) {
        return Err(Error::invalid("g must be positive"));
    }
    Ok(delta_e_uev * 1e-3 / (4.0 * g * MU_B * bz))
}

/// Energy implied by a lifetime ratio next to a quoted value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoltzmannCheck {
    pub ratio: f64,
    pub temperature_k: f64,
    pub computed_uev: f64,
    pub quoted_uev: f64,
    pub relative_discrepancy: f64,
    /// Set when the two differ by more than 10%.
    pub flagged: bool,
}

pub fn boltzmann_check(ratio: f64, temperature_k: f64, quoted_uev: f64) -> Result<BoltzmannCheck> {
    let computed = lifetime_ratio_energy(ratio, 1.0, temperature_k)?;
    let rel = (computed - quoted_uev).abs() / quoted_uev.abs();
    Ok(BoltzmannCheck {
        ratio,
        temperature_k,
        computed_uev: computed,
        quoted_uev,
        relative_discrepancy: rel,
        flagged: rel > 0.1,
    })
}
