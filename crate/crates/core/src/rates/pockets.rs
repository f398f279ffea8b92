//! Magnetization pockets and first-passage lifetimes.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spinmodel::{ChainSpec, Spectrum};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Pocket {
    A,
    B,
    Other,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PocketAssignment {
    pub labels: Vec<Pocket>,
    /// `|<N_A|psi_n>|^2` per kept state.
    pub overlap_a: Vec<f64>,
    pub overlap_b: Vec<f64>,
    /// Set when a pocket had no state above threshold and the
    /// largest-overlap state was used instead.
    pub fallback: bool,
}

impl PocketAssignment {
    /// Lowest-energy state of a pocket.
    pub fn lowest(&self, pocket: Pocket) -> Option<usize> {
        self.labels.iter().position(|&p| p == pocket)
    }

    pub fn members(&self, pocket: Pocket) -> Vec<bool> {
        self.labels.iter().map(|&p| p == pocket).collect()
    }
}

/// Labels kept states by their weight on the two Neel (or, for
/// ferromagnetic chains, fully aligned) product states.
pub fn classify_pockets(spec: &Spectrum, chain: &ChainSpec, threshold: f64) -> Result<PocketAssignment> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::invalid("pocket threshold must lie in (0, 1)"));
    }
    if spec.len() < 2 {
        return Err(Error::invalid("pocket classification needs at least two states"));
    }
    let (na, nb) = spec.basis.pocket_states(chain.is_antiferromagnetic());
    let k = spec.len();
    let overlap_a: Vec<f64> = (0..k).map(|n| spec.vectors[(na, n)].norm_sqr()).collect();
    let overlap_b: Vec<f64> = (0..k).map(|n| spec.vectors[(nb, n)].norm_sqr()).collect();
    let mut labels: Vec<Pocket> = (0..k)
        .map(|n| {
            if overlap_a[n] > threshold && overlap_a[n] >= overlap_b[n] {
                Pocket::A
            } else if overlap_b[n] > threshold {
                Pocket::B
            } else {
                Pocket::Other
            }
        })
        .collect();
    let mut fallback = false;
    for (pocket, ov) in [(Pocket::A, &overlap_a), (Pocket::B, &overlap_b)] {
        if labels.contains(&pocket) {
            continue;
        }
        let best = (0..k)
            .filter(|&n| labels[n] == Pocket::Other)
            .max_by(|&x, &y| ov[x].total_cmp(&ov[y]));
        if let Some(n) = best {
            log::warn!(
                "no state exceeds pocket threshold {threshold} for {pocket:?}; using state {n} (weight {:.3})",
                ov[n]
            );
            labels[n] = pocket;
            fallback = true;
        }
    }
    Ok(PocketAssignment {
        labels,
        overlap_a,
        overlap_b,
        fallback,
    })
}

/// Mean first-passage time from `start` into any state flagged in `target`.
///
/// Eliminates intermediate states one by one on the embedded jump chain,
/// writing every `1 - P_kk` as a sum of positive escape probabilities so
/// that rates spread over many decades lose no precision.
pub fn mean_first_passage(w: &Mat<f64>, start: usize, target: &[bool]) -> Result<f64> {
    let n = w.nrows();
    if w.ncols() != n || target.len() != n || start >= n {
        return Err(Error::invalid("rate matrix, start and target sizes disagree"));
    }
    if target[start] {
        return Ok(0.0);
    }
    if !target.iter().any(|&t| t) {
        return Err(Error::invalid("target set is empty"));
    }
    // p[i][j]: jump probability i -> j, h[i]: mean holding time.
    let mut p = Mat::<f64>::zeros(n, n);
    let mut h = vec![0.0; n];
    for i in 0..n {
        let out: f64 = (0..n).filter(|&j| j != i).map(|j| w[(j, i)]).sum();
        if out > 0.0 {
            h[i] = 1.0 / out;
            for j in 0..n {
                if j != i {
                    p[(i, j)] = w[(j, i)] / out;
                }
            }
        } else {
            h[i] = f64::INFINITY;
        }
    }
    let mut alive: Vec<bool> = vec![true; n];
    for k in 0..n {
        if k == start || target[k] {
            continue;
        }
        let esc: f64 = (0..n).filter(|&j| j != k && alive[j]).map(|j| p[(k, j)]).sum();
        alive[k] = false;
        if esc == 0.0 {
            // Absorbing trap; any probability flowing in never reaches the target.
            for i in 0..n {
                if alive[i] && p[(i, k)] > 0.0 {
                    h[i] = f64::INFINITY;
                }
            }
            continue;
        }
        for i in 0..n {
            let pik = p[(i, k)];
            if !alive[i] || pik == 0.0 {
                continue;
            }
            h[i] += pik * h[k] / esc;
            for j in 0..n {
                if alive[j] && j != k {
                    p[(i, j)] += pik * p[(k, j)] / esc;
                }
            }
            p[(i, k)] = 0.0;
        }
    }
    let into_target: f64 = (0..n).filter(|&j| target[j]).map(|j| p[(start, j)]).sum();
    if into_target == 0.0 || !h[start].is_finite() {
        return Ok(f64::INFINITY);
    }
    Ok(h[start] / into_target)
}

/// `(T_A, T_B)` as mean first-passage times between the pockets.
pub fn pocket_lifetimes(w: &Mat<f64>, pockets: &PocketAssignment) -> Result<(f64, f64)> {
    let a0 = pockets
        .lowest(Pocket::A)
        .ok_or_else(|| Error::Undefined("no state in pocket A".into()))?;
    let b0 = pockets
        .lowest(Pocket::B)
        .ok_or_else(|| Error::Undefined("no state in pocket B".into()))?;
    let t_a = mean_first_passage(w, a0, &pockets.members(Pocket::B))?;
    let t_b = mean_first_passage(w, b0, &pockets.members(Pocket::A))?;
    Ok((t_a, t_b))
}

/// Lifetimes from the direct rates between the two lowest pocket states only.
pub fn two_level_lifetimes(w: &Mat<f64>, pockets: &PocketAssignment) -> Result<(f64, f64)> {
    let a0 = pockets
        .lowest(Pocket::A)
        .ok_or_else(|| Error::Undefined("no state in pocket A".into()))?;
    let b0 = pockets
        .lowest(Pocket::B)
        .ok_or_else(|| Error::Undefined("no state in pocket B".into()))?;
    Ok((1.0 / w[(b0, a0)], 1.0 / w[(a0, b0)]))
}
