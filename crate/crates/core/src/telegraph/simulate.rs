use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use super::TelegraphTrace;
use crate::error::{Error, Result};
use crate::rates::Pocket;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub state: usize,
    /// Entry time (s).
    pub time: f64,
}

/// A sampled continuous-time Markov path on `[0, duration)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub jumps: Vec<Jump>,
    pub duration: f64,
    /// The path hit a state with no exits before `duration`.
    pub absorbed: bool,
}

impl Trajectory {
    /// State occupied at time `t`.
    pub fn state_at(&self, t: f64) -> usize {
        let k = self.jumps.partition_point(|j| j.time <= t);
        self.jumps[k.saturating_sub(1)].state
    }

    /// Total time spent in each of `n` states.
    pub fn occupancy(&self, n: usize) -> Vec<f64> {
        let mut occ = vec![0.0; n];
        for (k, j) in self.jumps.iter().enumerate() {
            let end = self.jumps.get(k + 1).map_or(self.duration, |n| n.time);
            occ[j.state] += end - j.time;
        }
        occ
    }
}

/// Exact jump-process sample of the rates `W[f][i]` starting in `initial`.
pub fn simulate_trajectory(w: &Mat<f64>, initial: usize, duration: f64, seed: u64) -> Result<Trajectory> {
    let n = w.nrows();
    if w.ncols() != n || n == 0 {
        return Err(Error::invalid("rate matrix must be square and nonempty"));
    }
    if initial >= n {
        return Err(Error::invalid("initial state out of range"));
    }
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::invalid("duration must be positive"));
    }
    let exits: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&f| f != i).map(|f| w[(f, i)]).sum())
        .collect();
    if exits.iter().any(|e| !e.is_finite() || *e < 0.0) {
        return Err(Error::invalid("rates must be finite and non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut jumps = vec![Jump { state: initial, time: 0.0 }];
    let mut state = initial;
    let mut t = 0.0;
    loop {
        let out = exits[state];
        if out == 0.0 {
            return Ok(Trajectory { jumps, duration, absorbed: true });
        }
        t += Exp::new(out).expect("positive rate").sample(&mut rng);
        if t >= duration {
            return Ok(Trajectory { jumps, duration, absorbed: false });
        }
        let mut u = rng.random::<f64>() * out;
        let mut next = state;
        for f in 0..n {
            if f == state {
                continue;
            }
            next = f;
            u -= w[(f, state)];
            if u < 0.0 {
                break;
            }
        }
        state = next;
        jumps.push(Jump { state, time: t });
    }
}

/// Collapses a multi-state path onto pocket indices `0 = A`, `1 = B`.
///
/// Visits to `Other` states take the pocket they resolve into; a trailing
/// unresolved excursion keeps the pocket it left.
pub fn project_to_pockets(traj: &Trajectory, labels: &[Pocket]) -> Result<Trajectory> {
    if traj.jumps.iter().any(|j| j.state >= labels.len()) {
        return Err(Error::invalid("trajectory visits a state without a pocket label"));
    }
    let code = |p: Pocket| match p {
        Pocket::A => Some(0usize),
        Pocket::B => Some(1),
        Pocket::Other => None,
    };
    let n = traj.jumps.len();
    let mut resolved = vec![None; n];
    let mut next = None;
    for k in (0..n).rev() {
        if let Some(c) = code(labels[traj.jumps[k].state]) {
            next = Some(c);
        }
        resolved[k] = next;
    }
    let mut prev = resolved.iter().flatten().next().copied().unwrap_or(0);
    let mut jumps: Vec<Jump> = Vec::with_capacity(n);
    for (k, j) in traj.jumps.iter().enumerate() {
        let s = resolved[k].unwrap_or(prev);
        prev = s;
        if jumps.last().is_none_or(|l| l.state != s) {
            jumps.push(Jump { state: s, time: j.time });
        }
    }
    Ok(Trajectory { jumps, duration: traj.duration, absorbed: traj.absorbed })
}

/// Point-samples `traj` at `sample_rate_hz` with Gaussian noise and a
/// linear drift (pA/s).
pub fn synthesize_trace(
    traj: &Trajectory,
    levels_pa: &[f64],
    noise_rms_pa: f64,
    sample_rate_hz: f64,
    drift_pa_per_s: f64,
    seed: u64,
) -> Result<TelegraphTrace> {
    if !(sample_rate_hz > 0.0) || !sample_rate_hz.is_finite() {
        return Err(Error::invalid("sample rate must be positive"));
    }
    if !(noise_rms_pa >= 0.0) || !noise_rms_pa.is_finite() || !drift_pa_per_s.is_finite() {
        return Err(Error::invalid("noise and drift must be finite, noise >= 0"));
    }
    if traj.jumps.iter().any(|j| j.state >= levels_pa.len()) {
        return Err(Error::invalid("no readout level for a visited state"));
    }
    let n = (traj.duration * sample_rate_hz).floor() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x7e1e_9a4d);
    let noise = Normal::new(0.0, noise_rms_pa).expect("valid normal");
    let mut samples = Vec::with_capacity(n);
    let mut k = 0usize;
    for s in 0..n {
        let t = s as f64 / sample_rate_hz;
        while k + 1 < traj.jumps.len() && traj.jumps[k + 1].time <= t {
            k += 1;
        }
        let mut v = levels_pa[traj.jumps[k].state] + drift_pa_per_s * t;
        if noise_rms_pa > 0.0 {
            v += noise.sample(&mut rng);
        }
        samples.push(v);
    }
    Ok(TelegraphTrace {
        samples,
        sample_rate_hz,
        seed: Some(seed),
        levels_pa: levels_pa.to_vec(),
        noise_rms_pa: Some(noise_rms_pa),
        ground_truth: Some(traj.clone()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(r01: f64, r10: f64) -> Mat<f64> {
        Mat::from_fn(2, 2, |f, i| match (f, i) {
            (1, 0) => r01,
            (0, 1) => r10,
            _ => 0.0,
        })
    }

    #[test]
    fn deterministic_per_seed() {
        let w = two_state(10.0, 30.0);
        let a = simulate_trajectory(&w, 0, 10.0, 7).unwrap();
        let b = simulate_trajectory(&w, 0, 10.0, 7).unwrap();
        let c = simulate_trajectory(&w, 0, 10.0, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn absorbing_state_ends_early() {
        let w = two_state(5.0, 0.0);
        let t = simulate_trajectory(&w, 0, 100.0, 1).unwrap();
        assert!(t.absorbed);
        assert_eq!(t.jumps.last().unwrap().state, 1);
    }

    #[test]
    fn pocket_projection_resolves_excursions() {
        let traj = Trajectory {
            jumps: vec![
                Jump { state: 0, time: 0.0 },
                Jump { state: 2, time: 1.0 },
                Jump { state: 1, time: 1.1 },
                Jump { state: 2, time: 2.0 },
                Jump { state: 1, time: 2.1 },
                Jump { state: 2, time: 3.0 },
            ],
            duration: 4.0,
            absorbed: false,
        };
        let labels = [Pocket::A, Pocket::B, Pocket::Other];
        let p = project_to_pockets(&traj, &labels).unwrap();
        assert_eq!(
            p.jumps,
            vec![Jump { state: 0, time: 0.0 }, Jump { state: 1, time: 1.0 }]
        );
    }

    #[test]
    fn clean_trace_is_piecewise_constant() {
        let traj = Trajectory {
            jumps: vec![Jump { state: 0, time: 0.0 }, Jump { state: 1, time: 0.5 }],
            duration: 1.0,
            absorbed: false,
        };
        let tr = synthesize_trace(&traj, &[1.0, 3.0], 0.0, 100.0, 0.0, 0).unwrap();
        assert_eq!(tr.samples.len(), 100);
        assert!(tr.samples[..50].iter().all(|&x| x == 1.0));
        assert!(tr.samples[50..].iter().all(|&x| x == 3.0));
    }
}
