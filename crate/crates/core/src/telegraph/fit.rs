use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::{DwellRecord, DwellState};
use crate::error::{Error, Result};

pub const DEFAULT_MIN_EVENTS: usize = 50;
const BINS_PER_DECADE: f64 = 20.0;
const MIN_R_SQUARED: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitMethod {
    HistogramFit,
    Mle,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifetimeEstimate {
    /// Seconds.
    pub t: f64,
    pub ci_95: (f64, f64),
    pub method: FitMethod,
    pub n_events: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LifetimeFit {
    /// Reported value.
    pub mle: LifetimeEstimate,
    pub histogram: Option<LifetimeEstimate>,
    /// Count-weighted R^2 of the log-linear histogram fit.
    pub histogram_r_squared: Option<f64>,
    pub poor_exponential: bool,
}

/// Exponential lifetime of the selected dwells.
///
/// Censored dwells add exposure time but no event.
pub fn fit_dwell_times(dwells: &[DwellRecord], state: DwellState, min_events: usize) -> Result<LifetimeFit> {
    let sel: Vec<&DwellRecord> = dwells.iter().filter(|d| state.matches(d)).collect();
    if sel.iter().any(|d| !(d.duration > 0.0) || !d.duration.is_finite()) {
        return Err(Error::invalid("dwell durations must be positive and finite"));
    }
    let events: Vec<f64> = sel.iter().filter(|d| !d.censored).map(|d| d.duration).collect();
    let n = events.len();
    if n < min_events.max(1) {
        return Err(Error::InsufficientData { needed: min_events.max(1), got: n });
    }
    let exposure: f64 = sel.iter().map(|d| d.duration).sum();
    let t = exposure / n as f64;
    let chi = ChiSquared::new(2.0 * n as f64).map_err(|e| Error::Numerical(e.to_string()))?;
    let mle = LifetimeEstimate {
        t,
        ci_95: (2.0 * exposure / chi.inverse_cdf(0.975), 2.0 * exposure / chi.inverse_cdf(0.025)),
        method: FitMethod::Mle,
        n_events: n,
    };
    let (histogram, r2) = match histogram_fit(&events) {
        Some((est, r2)) => (Some(est), Some(r2)),
        None => (None, None),
    };
    let poor = r2.is_none_or(|r| r < MIN_R_SQUARED);
    Ok(LifetimeFit { mle, histogram, histogram_r_squared: r2, poor_exponential: poor })
}

/// Weighted fit of `ln(density) = c - t / T` over log-spaced bins.
fn histogram_fit(events: &[f64]) -> Option<(LifetimeEstimate, f64)> {
    let lo = events.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = events.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return None;
    }
    let nbins = ((hi / lo).log10() * BINS_PER_DECADE).ceil().max(1.0) as usize;
    let step = (hi / lo).ln() / nbins as f64;
    let mut count = vec![0usize; nbins];
    let mut sum = vec![0.0; nbins];
    for &d in events {
        let k = (((d / lo).ln() / step) as usize).min(nbins - 1);
        count[k] += 1;
        sum[k] += d;
    }
    let total = events.len() as f64;
    let pts: Vec<(f64, f64, f64)> = (0..nbins)
        .filter(|&k| count[k] > 0)
        .map(|k| {
            let a = lo * (step * k as f64).exp();
            let b = lo * (step * (k + 1) as f64).exp();
            let c = count[k] as f64;
            (sum[k] / c, (c / (total * (b - a))).ln(), c)
        })
        .collect();
    if pts.len() < 3 {
        return None;
    }
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let xm = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let ym = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - xm).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - xm) * (p.1 - ym)).sum();
    let syy: f64 = pts.iter().map(|p| p.2 * (p.1 - ym).powi(2)).sum();
    if !(sxx > 0.0) {
        return None;
    }
    let slope = sxy / sxx;
    if !(slope < 0.0) {
        return None;
    }
    let sse = (syy - slope * sxy).max(0.0);
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 0.0 };
    let dof = (pts.len() - 2).max(1) as f64;
    let se_slope = (sse / dof * (pts.len() as f64 / sw) / sxx).sqrt();
    let t = -1.0 / slope;
    let se_t = se_slope * t * t;
    Some((
        LifetimeEstimate {
            t,
            ci_95: ((t - 1.96 * se_t).max(0.0), t + 1.96 * se_t),
            method: FitMethod::HistogramFit,
            n_events: events.len(),
        },
        r2,
    ))
}

#[cfg(test)]
mod tests {
    use super::super::Level;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp};

    fn record(duration: f64) -> DwellRecord {
        DwellRecord { level: Level::High, pocket: None, duration, censored: false }
    }

    #[test]
    fn exponential_mean_recovered() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let exp = Exp::new(10.0).unwrap();
        let d: Vec<DwellRecord> = (0..10_000).map(|_| record(exp.sample(&mut rng))).collect();
        let f = fit_dwell_times(&d, DwellState::High, DEFAULT_MIN_EVENTS).unwrap();
        assert!((f.mle.t - 0.1).abs() < 0.005, "{}", f.mle.t);
        assert!(f.mle.ci_95.0 < f.mle.t && f.mle.t < f.mle.ci_95.1);
        let h = f.histogram.unwrap();
        assert!((h.t - 0.1).abs() < 0.01, "{}", h.t);
        assert!(!f.poor_exponential);
    }

    #[test]
    fn degenerate_dwells_flagged() {
        let d = vec![record(0.25); 100];
        let f = fit_dwell_times(&d, DwellState::High, DEFAULT_MIN_EVENTS).unwrap();
        assert_eq!(f.mle.t, 0.25);
        assert!(f.histogram.is_none());
        assert!(f.poor_exponential);
    }

    #[test]
    fn censored_dwells_add_exposure_only() {
        let mut d = vec![record(1.0); 60];
        d.push(DwellRecord { censored: true, ..record(6.0) });
        let f = fit_dwell_times(&d, DwellState::High, DEFAULT_MIN_EVENTS).unwrap();
        assert_eq!(f.mle.n_events, 60);
        assert!((f.mle.t - 1.1).abs() < 1e-12);
    }

    #[test]
    fn too_few_events() {
        let d = vec![record(1.0); 10];
        let err = fit_dwell_times(&d, DwellState::High, DEFAULT_MIN_EVENTS).unwrap_err();
        assert!(matches!(err, Error::InsufficientData { needed: 50, got: 10 }));
        assert!(fit_dwell_times(&d, DwellState::Low, 1).is_err());
    }
}
