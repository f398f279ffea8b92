//! Eigenstates of a chain Hamiltonian.

use faer::{Mat, MatRef, Side};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::chain::Basis;
use super::hamiltonian::Hamiltonian;
use super::lanczos::{self, LanczosOptions};
use crate::error::{Error, Result};

/// Eigensolver selection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    #[default]
    Auto,
    Dense,
    Iterative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EigenOptions {
    /// Number of lowest states to keep; `None` keeps all.
    pub n_states: Option<usize>,
    pub solver: Solver,
    /// Largest dimension `Auto` sends to the dense solver.
    pub dense_max_dim: usize,
    /// Iterative residual tolerance relative to the spectral radius.
    pub tol: f64,
    pub block_size: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        EigenOptions {
            n_states: None,
            solver: Solver::Auto,
            dense_max_dim: 1024,
            tol: 1e-10,
            block_size: 6,
            seed: 0x5eed,
        }
    }
}

impl EigenOptions {
    pub fn lowest(n_states: usize) -> Self {
        EigenOptions {
            n_states: Some(n_states),
            ..Default::default()
        }
    }

    fn use_dense(&self, dim: usize, k: usize) -> bool {
        match self.solver {
            Solver::Dense => true,
            Solver::Iterative => k == dim,
            Solver::Auto => dim <= self.dense_max_dim || 4 * k >= dim,
        }
    }

    fn lanczos(&self, k: usize, want_vectors: bool) -> LanczosOptions {
        LanczosOptions {
            block: self.block_size.max(1),
            tol: self.tol,
            max_basis: 6 * k + 40 * self.block_size.max(1) + 200,
            seed: self.seed,
            want_vectors,
        }
    }
}

/// Lowest eigenpairs in ascending energy order.
///
/// Each eigenvector is normalised and phased so that its largest-magnitude
/// amplitude (first index on ties) is real and positive.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub energies: Vec<f64>,
    /// Basis amplitudes, one column per state.
    pub vectors: Mat<C64>,
    pub basis: Basis,
    pub truncation: Option<Truncation>,
}

/// Record of a [`truncate_spectrum`] call.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub kept_states: usize,
    pub kept_amplitudes: usize,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    /// `m_z` tuple of every basis state.
    pub fn basis_labels(&self) -> Vec<Vec<f64>> {
        self.basis.labels()
    }

    pub fn vector(&self, i: usize) -> Vec<C64> {
        (0..self.dim()).map(|r| self.vectors[(r, i)]).collect()
    }

    /// `E_1 - E_0`.
    pub fn ground_gap(&self) -> Option<f64> {
        (self.len() >= 2).then(|| self.energies[1] - self.energies[0])
    }
}

/// Diagonalise `h` with the given options.
pub fn diagonalize(h: &Hamiltonian, opts: &EigenOptions) -> Result<Spectrum> {
    let dim = h.dim();
    let k = opts.n_states.unwrap_or(dim);
    if k == 0 || k > dim {
        return Err(Error::invalid(format!(
            "requested {k} states from a {dim}-dimensional space"
        )));
    }
    let (energies, mut vectors) = if opts.use_dense(dim, k) {
        dense_pairs(h, k)?
    } else {
        let r = lanczos::lowest(&h.matrix, k, &opts.lanczos(k, true))?;
        log::debug!("Lanczos basis {} for {k} states of dim {dim}", r.basis_size);
        (r.values, r.vectors.expect("vectors requested"))
    };
    normalise_and_phase(vectors.as_mut());
    Ok(Spectrum {
        energies,
        vectors,
        basis: h.basis.clone(),
        truncation: None,
    })
}

/// Lowest `k` eigenvalues only.
pub fn lowest_eigenvalues(h: &Hamiltonian, k: usize, opts: &EigenOptions) -> Result<Vec<f64>> {
    let dim = h.dim();
    if k == 0 || k > dim {
        return Err(Error::invalid(format!(
            "requested {k} eigenvalues from a {dim}-dimensional space"
        )));
    }
    if opts.use_dense(dim, k) {
        let mut all = match h.matrix.to_dense_real() {
            Some(m) => m.self_adjoint_eigenvalues(Side::Lower),
            None => h
                .matrix
                .to_dense()
                .self_adjoint_eigenvalues(Side::Lower)
                .map(|v| v.into_iter().collect()),
        }
        .map_err(|e| Error::Numerical(format!("dense eigensolve failed: {e:?}")))?;
        all.truncate(k);
        Ok(all)
    } else {
        Ok(lanczos::lowest(&h.matrix, k, &opts.lanczos(k, false))?.values)
    }
}

/// Keep the lowest `n_states` states and, within each, the `n_amplitudes`
/// largest-magnitude amplitudes (renormalised).
pub fn truncate_spectrum(spectrum: &Spectrum, n_states: usize, n_amplitudes: usize) -> Result<Spectrum> {
    if n_states < 2 {
        return Err(Error::invalid("truncation must keep at least two states"));
    }
    if n_amplitudes == 0 {
        return Err(Error::invalid("truncation must keep at least one amplitude"));
    }
    let k = if n_states > spectrum.len() {
        log::warn!(
            "asked to keep {n_states} states but only {} are available",
            spectrum.len()
        );
        spectrum.len()
    } else {
        n_states
    };
    let dim = spectrum.dim();
    let mut vectors = spectrum.vectors.as_ref().subcols(0, k).to_owned();
    if n_amplitudes < dim {
        for c in 0..k {
            let mut order: Vec<usize> = (0..dim).collect();
            order.sort_by(|&a, &b| {
                vectors[(b, c)]
                    .norm()
                    .total_cmp(&vectors[(a, c)].norm())
                    .then(a.cmp(&b))
            });
            for &r in &order[n_amplitudes..] {
                vectors[(r, c)] = C64::new(0.0, 0.0);
            }
        }
        normalise_and_phase(vectors.as_mut());
    }
    Ok(Spectrum {
        energies: spectrum.energies[..k].to_vec(),
        vectors,
        basis: spectrum.basis.clone(),
        truncation: Some(Truncation {
            kept_states: k,
            kept_amplitudes: n_amplitudes.min(dim),
        }),
    })
}

fn dense_pairs(h: &Hamiltonian, k: usize) -> Result<(Vec<f64>, Mat<C64>)> {
    let err = |e| Error::Numerical(format!("dense eigensolve failed: {e:?}"));
    if let Some(real) = h.matrix.to_dense_real() {
        let eig = real.self_adjoint_eigen(Side::Lower).map_err(err)?;
        let s = eig.S().column_vector();
        let u = eig.U();
        let vals = (0..k).map(|i| s[i]).collect();
        let vecs = Mat::from_fn(u.nrows(), k, |r, c| C64::new(u[(r, c)], 0.0));
        Ok((vals, vecs))
    } else {
        let eig = h.matrix.to_dense().self_adjoint_eigen(Side::Lower).map_err(err)?;
        let s = eig.S().column_vector();
        let vals = (0..k).map(|i| s[i].re).collect();
        Ok((vals, eig.U().subcols(0, k).to_owned()))
    }
}

/// Normalise each column and rotate its phase so the dominant amplitude is
/// real positive.
pub fn normalise_and_phase(mut v: faer::MatMut<'_, C64>) {
    for c in 0..v.ncols() {
        let norm = (0..v.nrows())
            .map(|r| v[(r, c)].norm_sqr())
            .sum::<f64>()
            .sqrt();
        if norm == 0.0 {
            continue;
        }
        let col: Vec<C64> = (0..v.nrows()).map(|r| v[(r, c)]).collect();
        let pivot = dominant_index(&col);
        let phase = col[pivot].conj() / col[pivot].norm();
        for r in 0..v.nrows() {
            v[(r, c)] = v[(r, c)] * phase / norm;
        }
    }
}

fn dominant_index(col: &[C64]) -> usize {
    let max = col.iter().map(|x| x.norm()).fold(0.0, f64::max);
    col.iter()
        .position(|x| x.norm() >= max * (1.0 - 1e-6))
        .unwrap_or(0)
}

/// `<a|b>` for two columns.
pub fn overlap(a: MatRef<'_, C64>, i: usize, b: MatRef<'_, C64>, j: usize) -> C64 {
    (0..a.nrows()).map(|r| a[(r, i)].conj() * b[(r, j)]).sum()
}
