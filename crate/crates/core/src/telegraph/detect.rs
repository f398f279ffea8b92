use serde::{Deserialize, Serialize};

use super::{DwellRecord, Level, TelegraphTrace};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectOptions {
    /// Band between the two trigger thresholds, as a fraction of the level separation.
    pub hysteresis: f64,
    /// Dwells shorter than this many samples are merged into their neighbours.
    pub min_dwell_samples: usize,
    /// Centered boxcar width applied before triggering.
    pub smoothing_samples: usize,
    /// Required ratio of level separation to the larger in-level spread.
    pub min_bimodality: f64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        DetectOptions { hysteresis: 0.5, min_dwell_samples: 2, smoothing_samples: 5, min_bimodality: 3.0 }
    }
}

impl DetectOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.hysteresis > 0.0 && self.hysteresis < 1.0) {
            return Err(Error::invalid("hysteresis must lie in (0, 1)"));
        }
        if self.min_dwell_samples == 0 || self.smoothing_samples == 0 {
            return Err(Error::invalid("minimum dwell and smoothing width must be at least 1"));
        }
        if !(self.min_bimodality > 0.0) {
            return Err(Error::invalid("bimodality threshold must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug)]
struct Clusters {
    low: f64,
    high: f64,
    sd_low: f64,
    sd_high: f64,
    frac_high: f64,
}

/// One-dimensional 2-means, started from `hint` or the sample mean.
fn two_means(y: &[f64], hint: Option<f64>) -> Clusters {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let mut cut = hint.unwrap_or(mean);
    let mut c = Clusters { low: mean, high: mean, sd_low: 0.0, sd_high: 0.0, frac_high: 0.0 };
    for _ in 0..50 {
        let (mut sl, mut nl, mut sh, mut nh) = (0.0, 0usize, 0.0, 0usize);
        for &v in y {
            if v > cut {
                sh += v;
                nh += 1;
            } else {
                sl += v;
                nl += 1;
            }
        }
        if nl == 0 || nh == 0 {
            break;
        }
        c.low = sl / nl as f64;
        c.high = sh / nh as f64;
        c.frac_high = nh as f64 / n;
        let next = 0.5 * (c.low + c.high);
        let settled = (next - cut).abs() <= 1e-7 * (c.high - c.low);
        cut = next;
        if settled {
            break;
        }
    }
    let (mut vl, mut nl, mut vh, mut nh) = (0.0, 0usize, 0.0, 0usize);
    for &v in y {
        if v > cut {
            vh += (v - c.high).powi(2);
            nh += 1;
        } else {
            vl += (v - c.low).powi(2);
            nl += 1;
        }
    }
    c.sd_low = if nl > 0 { (vl / nl as f64).sqrt() } else { 0.0 };
    c.sd_high = if nh > 0 { (vh / nh as f64).sqrt() } else { 0.0 };
    c
}

/// Least-squares line through `(k, r[k])`.
fn line_fit(r: &[f64]) -> (f64, f64) {
    let n = r.len() as f64;
    let tm = (n - 1.0) / 2.0;
    let rm = r.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (k, &v) in r.iter().enumerate() {
        let dt = k as f64 - tm;
        sxy += dt * (v - rm);
        sxx += dt * dt;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (rm - slope * tm, slope)
}

/// Samples used to estimate the baseline; longer traces are strided.
const BASELINE_SAMPLES: usize = 1_000_000;

/// Removes a linear baseline, alternating level assignment and a line fit
/// to the in-level residuals.
fn detrend(x: &[f64]) -> (Vec<f64>, f64) {
    let stride = (x.len() / BASELINE_SAMPLES).max(1);
    let sub: Vec<f64> = x.iter().step_by(stride).copied().collect();
    let (mut a, mut b) = line_fit(&sub);
    let mut y: Vec<f64> = sub.iter().enumerate().map(|(k, v)| v - a - b * k as f64).collect();
    let mut resid = vec![0.0; sub.len()];
    let mut hint = None;
    for _ in 0..3 {
        let c = two_means(&y, hint);
        let cut = 0.5 * (c.low + c.high);
        hint = Some(cut);
        for (r, &v) in resid.iter_mut().zip(&y) {
            *r = v - if v > cut { c.high } else { c.low };
        }
        let (da, db) = line_fit(&resid);
        a += da;
        b += db;
        for (k, v) in y.iter_mut().enumerate() {
            *v -= da + db * k as f64;
        }
        let scale = (c.high - c.low).abs().max(f64::MIN_POSITIVE);
        if (da.abs() + (db * sub.len() as f64).abs()) < 1e-6 * scale {
            break;
        }
    }
    let slope = b / stride as f64;
    let out = x.iter().enumerate().map(|(k, v)| v - a - slope * k as f64).collect();
    (out, hint.unwrap_or(0.0))
}

fn boxcar(y: &[f64], width: usize) -> Vec<f64> {
    if width <= 1 {
        return y.to_vec();
    }
    let n = y.len();
    let half = width / 2;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &v in y {
        acc += v;
        prefix.push(acc);
    }
    (0..n)
        .map(|k| {
            let lo = k.saturating_sub(half);
            let hi = (k + width - half).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Finds switches between two current levels with a Schmitt trigger.
///
/// The baseline drift is removed first and the trace is smoothed with a
/// short boxcar. The first and last dwell are marked censored.
pub fn detect_switches(trace: &TelegraphTrace, opts: &DetectOptions) -> Result<Vec<DwellRecord>> {
    opts.validate()?;
    let x = &trace.samples;
    if x.len() < 2 {
        return Ok(Vec::new());
    }
    let (lo, hi) = x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if hi - lo <= 1e-12 * hi.abs().max(lo.abs()) {
        return Ok(Vec::new());
    }
    let (y, cut) = detrend(x);
    let s = boxcar(&y, opts.smoothing_samples);
    let c = two_means(&s, Some(cut));
    let sep = c.high - c.low;
    let spread = c.sd_low.max(c.sd_high);
    if !(sep > opts.min_bimodality * spread) || c.frac_high == 0.0 || c.frac_high == 1.0 {
        return Err(Error::DetectionFailure(format!(
            "no two-level structure: levels {:.4} / {:.4}, spreads {:.4} / {:.4}, high fraction {:.4}",
            c.low, c.high, c.sd_low, c.sd_high, c.frac_high
        )));
    }
    let mid = 0.5 * (c.low + c.high);
    let upper = mid + 0.5 * opts.hysteresis * sep;
    let lower = mid - 0.5 * opts.hysteresis * sep;

    let first = if s[0] > mid { Level::High } else { Level::Low };
    let mut state = first;
    let mut switches: Vec<usize> = Vec::new();
    for (k, &v) in s.iter().enumerate() {
        let flip = match state {
            Level::Low => v > upper,
            Level::High => v < lower,
        };
        if !flip {
            continue;
        }
        state = match state {
            Level::Low => Level::High,
            Level::High => Level::Low,
        };
        match switches.last() {
            Some(&prev) if k - prev < opts.min_dwell_samples => {
                switches.pop();
            }
            _ => switches.push(k),
        }
    }

    let n = x.len();
    let mut bounds = Vec::with_capacity(switches.len() + 2);
    bounds.push(0);
    bounds.extend(switches);
    bounds.push(n);
    let last = bounds.len() - 2;
    let mut level = first;
    let mut out = Vec::with_capacity(bounds.len() - 1);
    for (k, w) in bounds.windows(2).enumerate() {
        out.push(DwellRecord {
            level,
            pocket: None,
            duration: (w[1] - w[0]) as f64 / trace.sample_rate_hz,
            censored: k == 0 || k == last,
        });
        level = match level {
            Level::Low => Level::High,
            Level::High => Level::Low,
        };
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::{synthesize_trace, Jump, Trajectory};
    use super::*;

    fn steps(times: &[f64], duration: f64) -> Trajectory {
        Trajectory {
            jumps: times.iter().enumerate().map(|(k, &t)| Jump { state: k % 2, time: t }).collect(),
            duration,
            absorbed: false,
        }
    }

    #[test]
    fn clean_trace_recovers_edges() {
        let traj = steps(&[0.0, 0.1234, 0.3, 0.31, 0.7], 1.0);
        let tr = synthesize_trace(&traj, &[2.0, 5.0], 0.0, 1e4, 0.0, 0).unwrap();
        let d = detect_switches(&tr, &DetectOptions::default()).unwrap();
        assert_eq!(d.len(), 5);
        let truth = [0.1234, 0.1766, 0.01, 0.39, 0.3];
        for (dw, t) in d.iter().zip(truth) {
            assert!((dw.duration - t).abs() <= 2.0e-4 + 1e-12, "{} vs {t}", dw.duration);
        }
        assert_eq!(d[0].level, Level::Low);
        assert_eq!(d[1].level, Level::High);
        assert!(d[0].censored && d[4].censored && !d[2].censored);
    }

    #[test]
    fn constant_trace_has_no_dwells() {
        let tr = TelegraphTrace::new(vec![3.5; 1000], 1e3).unwrap();
        assert!(detect_switches(&tr, &DetectOptions::default()).unwrap().is_empty());
    }

    #[test]
    fn pure_noise_is_rejected() {
        let traj = steps(&[0.0], 10.0);
        let tr = synthesize_trace(&traj, &[1.0, 1.0], 0.5, 1e4, 0.0, 3).unwrap();
        let err = detect_switches(&tr, &DetectOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DetectionFailure(_)), "{err}");
    }

    #[test]
    fn drift_is_removed() {
        let traj = steps(&[0.0, 0.2, 0.4, 0.6, 0.8], 1.0);
        let tr = synthesize_trace(&traj, &[0.0, 1.0], 0.05, 1e4, 3.0, 5).unwrap();
        let d = detect_switches(&tr, &DetectOptions::default()).unwrap();
        assert_eq!(d.len(), 5);
    }

    #[test]
    fn rejects_bad_hysteresis() {
        let tr = TelegraphTrace::new(vec![0.0, 1.0], 1.0).unwrap();
        let opts = DetectOptions { hysteresis: 1.0, ..Default::default() };
        assert!(detect_switches(&tr, &opts).is_err());
    }
}
