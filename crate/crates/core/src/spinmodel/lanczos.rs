//! Block Lanczos with full reorthogonalisation for the low end of a
//! sparse Hermitian spectrum. Runs in real arithmetic when the matrix is
//! real.

use faer::linalg::matmul::matmul;
use faer::traits::ComplexField;
use faer::{Accum, Mat, MatMut, MatRef, Par, Side};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::hamiltonian::SparseHermitian;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub(crate) struct LanczosOptions {
    pub block: usize,
    /// Residual tolerance relative to the Gershgorin spectral radius.
    pub tol: f64,
    pub max_basis: usize,
    pub seed: u64,
    pub want_vectors: bool,
}

pub(crate) struct LanczosResult {
    pub values: Vec<f64>,
    pub vectors: Option<Mat<C64>>,
    pub basis_size: usize,
}

pub(crate) trait Scalar: ComplexField + Copy + Send + Sync + 'static {
    fn from_f64(x: f64) -> Self;
    fn re(self) -> f64;
    fn abs2(self) -> f64;
    fn scale(self, x: f64) -> Self;
    fn conj_(self) -> Self;
    fn to_c64(self) -> C64;
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn re(self) -> f64 {
        self
    }
    fn abs2(self) -> f64 {
        self * self
    }
    fn scale(self, x: f64) -> Self {
        self * x
    }
    fn conj_(self) -> Self {
        self
    }
    fn to_c64(self) -> C64 {
        C64::new(self, 0.0)
    }
}

impl Scalar for C64 {
    fn from_f64(x: f64) -> Self {
        C64::new(x, 0.0)
    }
    fn re(self) -> f64 {
        self.re
    }
    fn abs2(self) -> f64 {
        self.norm_sqr()
    }
    fn scale(self, x: f64) -> Self {
        self * x
    }
    fn conj_(self) -> Self {
        self.conj()
    }
    fn to_c64(self) -> C64 {
        self
    }
}

/// Lowest `k` eigenpairs of `h`.
pub(crate) fn lowest(h: &SparseHermitian, k: usize, opts: &LanczosOptions) -> Result<LanczosResult> {
    if h.is_real() {
        let (rows, cols, vals) = h.csr_real();
        run::<f64>(h, k, opts, &|x: MatRef<'_, f64>, mut out: MatMut<'_, f64>| {
            for j in 0..x.ncols() {
                let xj = x.col(j);
                for r in 0..rows.len() - 1 {
                    let mut acc = 0.0;
                    for p in rows[r]..rows[r + 1] {
                        acc += vals[p] * xj[cols[p]];
                    }
                    out[(r, j)] = acc;
                }
            }
        })
    } else {
        run::<C64>(h, k, opts, &|x: MatRef<'_, C64>, out: MatMut<'_, C64>| h.apply_into(x, out))
    }
}

type Apply<'a, T> = dyn Fn(MatRef<'_, T>, MatMut<'_, T>) + 'a;

fn run<T: Scalar>(h: &SparseHermitian, k: usize, opts: &LanczosOptions, apply: &Apply<'_, T>) -> Result<LanczosResult> {
    let n = h.dim();
    if k == 0 || k > n {
        return Err(Error::invalid(format!("cannot take {k} eigenpairs of a {n}-dim matrix")));
    }
    let b = opts.block.clamp(1, n);
    let m_max = opts.max_basis.clamp(k.min(n), n);
    let (lo, hi) = h.spectral_bounds();
    let scale = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
    let tol = opts.tol * scale;
    let one = T::from_f64(1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut q = Mat::<T>::zeros(n, m_max);
    let mut w = Mat::<T>::zeros(n, m_max);
    let mut t = Mat::<T>::zeros(m_max, m_max);
    let mut m = 0usize;
    let mut last_check = 0usize;
    let check_stride = (4 * b).max(16);

    let mut block = random_block::<T>(n, b, &mut rng);
    loop {
        let start = m;
        let take = block.ncols().min(m_max - m);
        let added = append_block(&mut q, &mut m, block.as_ref().subcols(0, take), &mut rng);
        if added > 0 {
            apply(q.as_ref().subcols(start, added), w.as_mut().subcols_mut(start, added));
            // T[:m, new] = Q^dagger (H Q_new); mirror into the lower block.
            matmul(
                t.as_mut().submatrix_mut(0, start, m, added),
                Accum::Replace,
                q.as_ref().subcols(0, m).adjoint(),
                w.as_ref().subcols(start, added),
                one,
                Par::Seq,
            );
            for c in start..m {
                for r in 0..c {
                    let v = t[(r, c)];
                    t[(c, r)] = v.conj_();
                }
                let d = t[(c, c)].re();
                t[(c, c)] = T::from_f64(d);
            }
        } else if m < m_max {
            return Err(Error::Numerical("Lanczos could not extend its basis".into()));
        }

        let ready = m >= (k + b).min(n) || m == m_max;
        if ready && (m - last_check >= check_stride || m == m_max) {
            last_check = m;
            let exact = m == n;
            let (values, vectors, resid) = ritz(q.as_ref(), w.as_ref(), t.as_ref(), m, k, opts.want_vectors, !exact)?;
            if exact || resid.iter().all(|&r| r <= tol) {
                return Ok(LanczosResult {
                    values,
                    vectors,
                    basis_size: m,
                });
            }
            if m == m_max {
                let worst = resid.iter().cloned().fold(0.0, f64::max);
                return Err(Error::Numerical(format!(
                    "Lanczos not converged with {m} basis vectors (residual {worst:.3e}, target {tol:.3e})"
                )));
            }
        }

        block = if added == 0 {
            random_block::<T>(n, b, &mut rng)
        } else {
            w.as_ref().subcols(start, added).to_owned()
        };
    }
}

#[allow(clippy::type_complexity)]
fn ritz<T: Scalar>(
    q: MatRef<'_, T>,
    w: MatRef<'_, T>,
    t: MatRef<'_, T>,
    m: usize,
    k: usize,
    want_vectors: bool,
    want_residual: bool,
) -> Result<(Vec<f64>, Option<Mat<C64>>, Vec<f64>)> {
    let eig = t
        .submatrix(0, 0, m, m)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numerical(format!("projected eigensolve failed: {e:?}")))?;
    let s = eig.S().column_vector();
    let values: Vec<f64> = (0..k).map(|i| s[i].re()).collect();
    let y = eig.U().subcols(0, k);
    let n = q.nrows();
    let one = T::from_f64(1.0);
    let mut resid = vec![0.0; k];
    let mut x = None;
    if want_vectors || want_residual {
        let mut xm = Mat::<T>::zeros(n, k);
        matmul(xm.as_mut(), Accum::Replace, q.subcols(0, m), y, one, Par::Seq);
        if want_residual {
            let mut hx = Mat::<T>::zeros(n, k);
            matmul(hx.as_mut(), Accum::Replace, w.subcols(0, m), y, one, Par::Seq);
            for (j, r) in resid.iter_mut().enumerate() {
                let th = values[j];
                *r = (0..n)
                    .map(|i| (hx[(i, j)] - xm[(i, j)].scale(th)).abs2())
                    .sum::<f64>()
                    .sqrt();
            }
        }
        if want_vectors {
            x = Some(Mat::from_fn(n, k, |r, c| xm[(r, c)].to_c64()));
        }
    }
    Ok((values, x, resid))
}

/// Orthonormalise `block` against `q[:, ..m]` and itself, appending the
/// surviving columns. Returns how many were appended.
fn append_block<T: Scalar>(q: &mut Mat<T>, m: &mut usize, block: MatRef<'_, T>, rng: &mut ChaCha8Rng) -> usize {
    let n = q.nrows();
    let start = *m;
    let mut r = block.to_owned();
    let norms0: Vec<f64> = (0..r.ncols()).map(|j| col_norm(r.as_ref(), j)).collect();
    for _ in 0..2 {
        project_out(q.as_ref().subcols(0, start), r.as_mut());
    }
    for (j, &norm0) in norms0.iter().enumerate() {
        if *m >= n || *m >= q.ncols() {
            break;
        }
        let mut v = r.as_ref().subcols(j, 1).to_owned();
        let mut reference = norm0;
        let mut accepted = false;
        for attempt in 0..4 {
            if attempt > 0 {
                v = random_block::<T>(n, 1, rng);
                reference = col_norm(v.as_ref(), 0);
                for _ in 0..2 {
                    project_out(q.as_ref().subcols(0, *m), v.as_mut());
                }
            } else {
                for _ in 0..2 {
                    project_out(q.as_ref().subcols(start, *m - start), v.as_mut());
                }
            }
            let nv = col_norm(v.as_ref(), 0);
            if reference > 0.0 && nv > 1e-8 * reference {
                for i in 0..n {
                    q[(i, *m)] = v[(i, 0)].scale(1.0 / nv);
                }
                *m += 1;
                accepted = true;
                break;
            }
        }
        if !accepted {
            break;
        }
    }
    *m - start
}

fn project_out<T: Scalar>(q: MatRef<'_, T>, mut v: MatMut<'_, T>) {
    if q.ncols() == 0 {
        return;
    }
    let mut coef = Mat::<T>::zeros(q.ncols(), v.ncols());
    matmul(coef.as_mut(), Accum::Replace, q.adjoint(), v.as_ref(), T::from_f64(1.0), Par::Seq);
    matmul(v.as_mut(), Accum::Add, q, coef.as_ref(), T::from_f64(-1.0), Par::Seq);
}

fn col_norm<T: Scalar>(v: MatRef<'_, T>, j: usize) -> f64 {
    (0..v.nrows()).map(|i| v[(i, j)].abs2()).sum::<f64>().sqrt()
}

fn random_block<T: Scalar>(n: usize, b: usize, rng: &mut ChaCha8Rng) -> Mat<T> {
    let mut m = Mat::<T>::zeros(n, b);
    for j in 0..b {
        for i in 0..n {
            let re: f64 = StandardNormal.sample(rng);
            m[(i, j)] = T::from_f64(re);
        }
    }
    m
}
