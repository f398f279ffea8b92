//! Stationary populations of the rate equations.

use faer::Mat;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct SteadyState {
    pub populations: Vec<f64>,
    /// Number of closed communicating classes; above one the populations
    /// weight each class equally and `warning` is set.
    pub closed_classes: usize,
    pub warning: Option<String>,
}

/// Stationary distribution of `dp_f/dt = sum_i W[f][i] p_i - p_f sum_i W[i][f]`.
///
/// Uses Grassmann-Taksar-Heyman elimination, which involves no
/// subtractions and keeps full relative accuracy for rates spanning many
/// decades.
pub fn steady_state(w: &Mat<f64>) -> Result<SteadyState> {
    let n = w.nrows();
    if n == 0 || w.ncols() != n {
        return Err(Error::invalid("rate matrix must be square and nonempty"));
    }
    if (0..n).any(|f| (0..n).any(|i| i != f && !(w[(f, i)] >= 0.0) || !w[(f, i)].is_finite())) {
        return Err(Error::invalid("rates must be finite and non-negative"));
    }
    let classes = closed_classes(w);
    let mut pops = vec![0.0; n];
    for class in &classes {
        let p = gth(w, class);
        for (&s, v) in class.iter().zip(p) {
            pops[s] += v / classes.len() as f64;
        }
    }
    let warning = (classes.len() > 1).then(|| {
        let msg = format!(
            "rate matrix is reducible with {} closed classes; populations split equally",
            classes.len()
        );
        log::warn!("{msg}");
        msg
    });
    Ok(SteadyState {
        populations: pops,
        closed_classes: classes.len(),
        warning,
    })
}

/// GTH on the sub-chain `states` (assumed closed and irreducible).
fn gth(w: &Mat<f64>, states: &[usize]) -> Vec<f64> {
    let n = states.len();
    // a[i][j] = rate i -> j
    let mut a = Mat::<f64>::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            w[(states[j], states[i])]
        }
    });
    let mut s = vec![0.0; n];
    for k in (1..n).rev() {
        let sk: f64 = (0..k).map(|j| a[(k, j)]).sum();
        s[k] = sk;
        if sk == 0.0 {
            continue;
        }
        for i in 0..k {
            let aik = a[(i, k)];
            if aik == 0.0 {
                continue;
            }
            for j in 0..k {
                if j != i {
                    let akj = a[(k, j)];
                    a[(i, j)] += aik * akj / sk;
                }
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for k in 1..n {
        let inflow: f64 = (0..k).map(|i| pi[i] * a[(i, k)]).sum();
        pi[k] = if s[k] > 0.0 { inflow / s[k] } else { 0.0 };
    }
    let total: f64 = pi.iter().sum();
    pi.iter().map(|p| p / total).collect()
}

/// Closed communicating classes, each sorted, ordered by smallest member.
fn closed_classes(w: &Mat<f64>) -> Vec<Vec<usize>> {
    let n = w.nrows();
    let reach = reachability(w);
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for i in 0..n {
        if seen[i] {
            continue;
        }
        let class: Vec<usize> = (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
        for &j in &class {
            seen[j] = true;
        }
        let closed = class
            .iter()
            .all(|&s| (0..n).all(|t| !reach[s][t] || class.contains(&t)));
        if closed {
            out.push(class);
        }
    }
    out
}

fn reachability(w: &Mat<f64>) -> Vec<Vec<bool>> {
    let n = w.nrows();
    (0..n)
        .map(|start| {
            let mut seen = vec![false; n];
            seen[start] = true;
            let mut stack = vec![start];
            while let Some(i) = stack.pop() {
                for j in 0..n {
                    if !seen[j] && j != i && w[(j, i)] > 0.0 {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
            seen
        })
        .collect()
}

/// `max_f |sum_i W[f][i] p_i - p_f sum_i W[i][f]|`.
pub fn generator_residual(w: &Mat<f64>, p: &[f64]) -> f64 {
    let n = p.len();
    (0..n)
        .map(|f| {
            let gain: f64 = (0..n).filter(|&i| i != f).map(|i| w[(f, i)] * p[i]).sum();
            let loss: f64 = (0..n).filter(|&i| i != f).map(|i| w[(i, f)]).sum::<f64>() * p[f];
            (gain - loss).abs()
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_level(up: f64, down: f64) -> Mat<f64> {
        // W[f][i]
        Mat::from_fn(2, 2, |f, i| match (f, i) {
            (1, 0) => up,
            (0, 1) => down,
            _ => 0.0,
        })
    }

    #[test]
    fn symmetric_two_level() {
        let s = steady_state(&two_level(3.0, 3.0)).unwrap();
        assert!((s.populations[0] - 0.5).abs() < 1e-15);
        assert_eq!(s.closed_classes, 1);
    }

    #[test]
    fn boltzmann_two_level() {
        let x: f64 = 0.7;
        let s = steady_state(&two_level((-x).exp(), 1.0)).unwrap();
        let z = 1.0 + (-x).exp();
        assert!((s.populations[0] - 1.0 / z).abs() < 1e-15);
        assert!(generator_residual(&two_level((-x).exp(), 1.0), &s.populations) < 1e-15);
    }

    #[test]
    fn reducible_chain_warns() {
        let mut w = Mat::<f64>::zeros(4, 4);
        w[(1, 0)] = 1.0;
        w[(0, 1)] = 1.0;
        w[(3, 2)] = 2.0;
        w[(2, 3)] = 1.0;
        let s = steady_state(&w).unwrap();
        assert_eq!(s.closed_classes, 2);
        assert!(s.warning.is_some());
        let total: f64 = s.populations.iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
        assert!((s.populations[2] - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn transient_states_empty() {
        let mut w = Mat::<f64>::zeros(3, 3);
        w[(1, 0)] = 5.0;
        w[(2, 1)] = 1.0;
        w[(1, 2)] = 1.0;
        let s = steady_state(&w).unwrap();
        assert_eq!(s.populations[0], 0.0);
        assert!((s.populations[1] - 0.5).abs() < 1e-15);
    }
}
