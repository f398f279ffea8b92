//! Splitting switching rates into over-barrier and tunnelling parts.
//!
//! Model: `1/T_avg = I (r_O + r_T) + I0 r_T`, with `r_O` shared by all
//! series, `r_T` per series (one per transverse field) and `I0` either
//! fitted or supplied.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::{Mat, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lifetimes measured at several currents under fixed conditions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurrentSeries {
    /// Free-form tag, usually `B_x` in T.
    pub label: f64,
    pub current_pa: Vec<f64>,
    pub t_avg_s: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurrentFit {
    /// 1/(s pA).
    pub r_o: f64,
    pub r_o_se: f64,
    /// `r_O` implied by each series alone at the fitted `I0`.
    pub r_o_per_series: Vec<f64>,
    /// One per series, 1/(s pA).
    pub r_t: Vec<f64>,
    pub r_t_se: Vec<f64>,
    /// pA.
    pub i0: f64,
    /// Zero when `I0` was supplied.
    pub i0_se: f64,
    /// RMS relative residual of `1/T_avg`.
    pub rms_relative: f64,
}

const MAX_ITER: usize = 100;

/// Gauss-Newton fit on relative residuals of `1/T_avg`.
///
/// With one series the design is rank deficient unless `known_i0` is given.
pub fn current_decomposition_fit(series: &[CurrentSeries], known_i0: Option<f64>) -> Result<CurrentFit> {
    if series.is_empty() {
        return Err(Error::Fit("no current series".into()));
    }
    for s in series {
        if s.current_pa.len() != s.t_avg_s.len() {
            return Err(Error::invalid("current and lifetime lengths differ"));
        }
        if s.current_pa.len() < 3 {
            return Err(Error::Fit(format!(
                "series {} has {} current points, need at least 3",
                s.label,
                s.current_pa.len()
            )));
        }
        if s.t_avg_s.iter().any(|t| !(*t > 0.0) || !t.is_finite())
            || s.current_pa.iter().any(|i| !(*i >= 0.0) || !i.is_finite())
        {
            return Err(Error::invalid("lifetimes must be positive and currents non-negative"));
        }
    }
    if let Some(i0) = known_i0 {
        if !(i0 > 0.0) || !i0.is_finite() {
            return Err(Error::invalid("I0 must be positive"));
        }
    } else if series.len() < 2 {
        return Err(Error::Fit(
            "a single series cannot separate r_O, r_T and I0; supply I0 or more series".into(),
        ));
    }

    // Per-series straight lines y = a I + b.
    let lines: Vec<(f64, f64)> = series.iter().map(weighted_line).collect::<Result<_>>()?;
    let k = series.len();
    let (r_o0, i00) = match known_i0 {
        Some(i0) => {
            let r_o = lines.iter().map(|(a, b)| a - b / i0).sum::<f64>() / k as f64;
            (r_o, i0)
        }
        None => {
            // a_k = r_O + b_k / I0
            let bs: Vec<f64> = lines.iter().map(|l| l.1).collect();
            let as_: Vec<f64> = lines.iter().map(|l| l.0).collect();
            let (slope, intercept) = ols(&bs, &as_)
                .ok_or_else(|| Error::Fit("series intercepts do not vary; I0 unidentifiable".into()))?;
            if !(slope > 0.0) {
                return Err(Error::Fit("series imply non-positive I0".into()));
            }
            (intercept, 1.0 / slope)
        }
    };
    let fit_i0 = known_i0.is_none();
    let mut theta0: Vec<f64> = Vec::with_capacity(k + 2);
    theta0.push(r_o0);
    theta0.extend(lines.iter().map(|(_, b)| b / i00));
    if fit_i0 {
        theta0.push(i00);
    }
    let theta = theta0;
    let fixed_i0 = known_i0.unwrap_or(f64::NAN);
    let points: Vec<(usize, f64, f64)> = series
        .iter()
        .enumerate()
        .flat_map(|(s, ser)| {
            ser.current_pa
                .iter()
                .zip(&ser.t_avg_s)
                .map(move |(&i, &t)| (s, i, 1.0 / t))
        })
        .collect();
    let n = points.len();
    let p = theta.len();
    if n < p {
        return Err(Error::Fit(format!("{n} points for {p} parameters")));
    }

    // Work in units of the starting values so columns are comparable.
    let scale: Vec<f64> = theta
        .iter()
        .map(|t| if t.abs() > 0.0 { t.abs() } else { 1.0 })
        .collect();
    let eval = |phi: &[f64]| -> (Mat<f64>, Vec<f64>) {
        let th: Vec<f64> = phi.iter().zip(&scale).map(|(f, s)| f * s).collect();
        let i0 = if fit_i0 { th[p - 1] } else { fixed_i0 };
        let mut jac = Mat::<f64>::zeros(n, p);
        let mut res = vec![0.0; n];
        for (row, &(s, i, y)) in points.iter().enumerate() {
            let rt = th[1 + s];
            let model = i * (th[0] + rt) + i0 * rt;
            res[row] = (model - y) / y;
            jac[(row, 0)] = i / y;
            jac[(row, 1 + s)] = (i + i0) / y;
            if fit_i0 {
                jac[(row, p - 1)] = rt / y;
            }
        }
        for (c, sc) in scale.iter().enumerate() {
            for r in 0..n {
                jac[(r, c)] *= sc;
            }
        }
        (jac, res)
    };

    let mut theta: Vec<f64> = theta.iter().zip(&scale).map(|(t, s)| t / s).collect();
    let mut lambda = 1e-6;
    let (mut jac, mut res) = eval(&theta);
    let mut cost: f64 = res.iter().map(|r| r * r).sum();
    for _ in 0..MAX_ITER {
        let step = normal_step(&jac, &res, lambda)?;
        let trial: Vec<f64> = theta.iter().zip(&step).map(|(t, d)| t - d).collect();
        let (tj, tr) = eval(&trial);
        let tcost: f64 = tr.iter().map(|r| r * r).sum();
        if tcost <= cost {
            let rel = step
                .iter()
                .zip(&theta)
                .map(|(d, t)| (d / t.abs().max(1e-300)).abs())
                .fold(0.0, f64::max);
            theta = trial;
            jac = tj;
            res = tr;
            cost = tcost;
            lambda = (lambda * 0.1).max(1e-12);
            if rel < 1e-12 {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e8 {
                break;
            }
        }
    }

    let jtj = gram(&jac);
    let evals = jtj
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Fit(format!("eigen decomposition failed: {e:?}")))?;
    let (lo, hi) = (evals[0], evals[evals.len() - 1]);
    if !(lo > hi * 1e-14) {
        return Err(Error::Fit("rank-deficient design".into()));
    }
    let dof = n - p;
    let sigma2 = if dof > 0 { cost / dof as f64 } else { f64::NAN };
    let cov = jtj
        .partial_piv_lu()
        .inverse();
    let se = |j: usize| scale[j] * (sigma2 * cov[(j, j)]).max(0.0).sqrt();
    let theta: Vec<f64> = theta.iter().zip(&scale).map(|(t, s)| t * s).collect();
    let i0 = if fit_i0 { theta[p - 1] } else { fixed_i0 };
    Ok(CurrentFit {
        r_o: theta[0],
        r_o_se: se(0),
        r_o_per_series: series
            .iter()
            .map(|ser| per_series_r_o(ser, i0))
            .collect(),
        r_t: theta[1..=k].to_vec(),
        r_t_se: (1..=k).map(se).collect(),
        i0,
        i0_se: if fit_i0 { se(p - 1) } else { 0.0 },
        rms_relative: (cost / n as f64).sqrt(),
    })
}

/// One-series fit of `(r_O, r_T)` at fixed `I0`, returning `r_O`.
fn per_series_r_o(s: &CurrentSeries, i0: f64) -> f64 {
    // y = I r_O + (I + I0) r_T, relative weights
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&i, &t) in s.current_pa.iter().zip(&s.t_avg_s) {
        let y = 1.0 / t;
        let (x1, x2) = (i / y, (i + i0) / y);
        a11 += x1 * x1;
        a12 += x1 * x2;
        a22 += x2 * x2;
        b1 += x1;
        b2 += x2;
    }
    (a22 * b1 - a12 * b2) / (a11 * a22 - a12 * a12)
}

fn gram(j: &Mat<f64>) -> Mat<f64> {
    j.transpose() * j
}

/// Levenberg-damped Gauss-Newton step `(J^T J + lambda diag) d = J^T r`.
fn normal_step(j: &Mat<f64>, r: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let mut a = gram(j);
    for d in 0..a.nrows() {
        a[(d, d)] *= 1.0 + lambda;
    }
    let rv = Mat::from_fn(r.len(), 1, |i, _| r[i]);
    let g = j.transpose() * &rv;
    let x = a.partial_piv_lu().solve(&g);
    let out: Vec<f64> = (0..x.nrows()).map(|i| x[(i, 0)]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("singular normal equations".into()));
    }
    Ok(out)
}

/// Relative-weighted line through `(I, 1/T)`.
fn weighted_line(s: &CurrentSeries) -> Result<(f64, f64)> {
    let ys: Vec<f64> = s.t_avg_s.iter().map(|t| 1.0 / t).collect();
    let (mut sw, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (&x, &y) in s.current_pa.iter().zip(&ys) {
        let w = 1.0 / (y * y);
        sw += w;
        sx += w * x;
        sy += w * y;
        sxx += w * x * x;
        sxy += w * x * y;
    }
    let det = sw * sxx - sx * sx;
    if !(det > 1e-12 * sw * sxx) {
        return Err(Error::Fit(format!("series {} needs distinct currents", s.label)));
    }
    Ok(((sw * sxy - sx * sy) / det, (sxx * sy - sx * sxy) / det))
}

fn ols(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 1e-24 * (mx * mx * n).max(1e-300)) {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}
