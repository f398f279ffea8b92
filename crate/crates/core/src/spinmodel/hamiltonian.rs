//! Chain Hamiltonian over the product basis.
//!
//! ```text
//! H = sum_i [ g_i muB B_i . S_i + D_i S_iz^2 + E_i (S_ix^2 - S_iy^2) ]
//!   + sum_i J_i S_i . S_{i+1}
//! ```
//!
//! Built directly in sparse row form; [`embed_site_operator`] provides the
//! dense Kronecker route used to cross-check it.

use faer::{Mat, MatMut, MatRef};
use num_complex::Complex64 as C64;

use super::chain::{Basis, ChainSpec, Vec3};
use crate::constants::MU_B;
use crate::error::{Error, Result};

/// Hermitian matrix in compressed sparse row form.
#[derive(Clone, Debug)]
pub struct SparseHermitian {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
    real: bool,
}

impl SparseHermitian {
    /// Assemble from per-row `(column, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, C64)>>) -> Self {
        let dim = rows.len();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(col_idx.len());
        }
        let real = values.iter().all(|v| v.im == 0.0);
        SparseHermitian {
            dim,
            row_ptr,
            col_idx,
            values,
            real,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// True when every stored entry has zero imaginary part.
    pub fn is_real(&self) -> bool {
        self.real
    }

    /// Row pointers, column indices and real parts of the stored values.
    pub fn csr_real(&self) -> (&[usize], &[usize], Vec<f64>) {
        (
            &self.row_ptr,
            &self.col_idx,
            self.values.iter().map(|v| v.re).collect(),
        )
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let row = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        match row.binary_search(&c) {
            Ok(p) => self.values[self.row_ptr[r] + p],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|r| self.get(r, r).re).collect()
    }

    /// `y = H x`.
    pub fn matvec(&self, x: &[C64], y: &mut [C64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[p] * x[self.col_idx[p]];
            }
            *yr = acc;
        }
    }

    /// `H X` for a block of column vectors.
    pub fn apply(&self, x: MatRef<'_, C64>) -> Mat<C64> {
        let mut out = Mat::<C64>::zeros(self.dim, x.ncols());
        self.apply_into(x, out.as_mut());
        out
    }

    /// Overwrite `out` with `H X`.
    pub fn apply_into(&self, x: MatRef<'_, C64>, mut out: MatMut<'_, C64>) {
        for j in 0..x.ncols() {
            let xj = x.col(j);
            for r in 0..self.dim {
                let mut acc = C64::new(0.0, 0.0);
                for p in self.row_ptr[r]..self.row_ptr[r + 1] {
                    acc += self.values[p] * xj[self.col_idx[p]];
                }
                out[(r, j)] = acc;
            }
        }
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let mut m = Mat::<C64>::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// Real part as a dense matrix; `None` if any entry is complex.
    pub fn to_dense_real(&self) -> Option<Mat<f64>> {
        if !self.real {
            return None;
        }
        let mut m = Mat::<f64>::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v.re;
            }
        }
        Some(m)
    }

    /// `max |H - H^dagger|` over stored entries.
    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    /// Gershgorin bounds on the spectrum.
    pub fn spectral_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in 0..self.dim {
            let mut radius = 0.0;
            let mut centre = 0.0;
            for (c, v) in self.row(r) {
                if c == r {
                    centre = v.re;
                } else {
                    radius += v.norm();
                }
            }
            lo = lo.min(centre - radius);
            hi = hi.max(centre + radius);
        }
        (lo, hi)
    }
}

/// A chain Hamiltonian together with the basis it is expressed in.
#[derive(Clone, Debug)]
pub struct Hamiltonian {
    pub matrix: SparseHermitian,
    pub basis: Basis,
}

impl Hamiltonian {
    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

/// Build the chain Hamiltonian in meV.
///
/// `site_fields` are the total fields (T, crystal frame, external plus
/// tip) at each site; see `geometry::total_site_fields`.
pub fn build_hamiltonian(chain: &ChainSpec, site_fields: &[Vec3]) -> Result<Hamiltonian> {
    let n = chain.len();
    if site_fields.len() != n {
        return Err(Error::invalid(format!(
            "need {n} site fields, got {}",
            site_fields.len()
        )));
    }
    if site_fields.iter().flatten().any(|b| !b.is_finite()) {
        return Err(Error::invalid("site fields must be finite"));
    }
    let basis = chain.basis();
    let sites = chain.sites();
    let couplings = chain.couplings();
    let dim = basis.dim();

    let mut rows: Vec<Vec<(usize, C64)>> = (0..dim).map(|_| Vec::new()).collect();
    let re = |v: f64| C64::new(v, 0.0);

    // Columns are initial states; H[new][old] = <new|H|old>.
    for old in 0..dim {
        let ms: Vec<f64> = basis.label(old);
        let mut diag = 0.0;
        for (i, site) in sites.iter().enumerate() {
            let spin = site.spin;
            let m = ms[i];
            let stride = basis.stride(i);
            let k = basis.local_index(old, i);
            let [bx, by, bz] = site_fields[i];
            let z = site.g * MU_B;
            diag += z * bz * m + site.d * m * m;

            // S+ : k -> k-1. Zeeman part g muB (Bx - i By)/2 S+.
            if k >= 1 {
                let c = spin.raise_coefficient(m);
                let amp = C64::new(bx, -by) * (0.5 * z * c);
                if amp.norm() != 0.0 {
                    rows[old - stride].push((old, amp));
                }
            }
            if k + 1 < spin.dim() {
                let c = spin.lower_coefficient(m);
                let amp = C64::new(bx, by) * (0.5 * z * c);
                if amp.norm() != 0.0 {
                    rows[old + stride].push((old, amp));
                }
            }
            // E (S+^2 + S-^2) / 2
            if site.e != 0.0 {
                if k >= 2 {
                    let c = spin.raise_coefficient(m) * spin.raise_coefficient(m + 1.0);
                    rows[old - 2 * stride].push((old, re(0.5 * site.e * c)));
                }
                if k + 2 < spin.dim() {
                    let c = spin.lower_coefficient(m) * spin.lower_coefficient(m - 1.0);
                    rows[old + 2 * stride].push((old, re(0.5 * site.e * c)));
                }
            }
        }
        for (i, &j) in couplings.iter().enumerate() {
            if j == 0.0 {
                continue;
            }
            let (a, b) = (i, i + 1);
            let (ma, mb) = (ms[a], ms[b]);
            let (sa, sb) = (sites[a].spin, sites[b].spin);
            let (ka, kb) = (basis.local_index(old, a), basis.local_index(old, b));
            diag += j * ma * mb;
            // J/2 (S+_a S-_b + S-_a S+_b)
            if ka >= 1 && kb + 1 < sb.dim() {
                let c = sa.raise_coefficient(ma) * sb.lower_coefficient(mb);
                let new = old - basis.stride(a) + basis.stride(b);
                rows[new].push((old, re(0.5 * j * c)));
            }
            if ka + 1 < sa.dim() && kb >= 1 {
                let c = sa.lower_coefficient(ma) * sb.raise_coefficient(mb);
                let new = old + basis.stride(a) - basis.stride(b);
                rows[new].push((old, re(0.5 * j * c)));
            }
        }
        rows[old].push((old, re(diag)));
    }

    Ok(Hamiltonian {
        matrix: SparseHermitian::from_rows(rows),
        basis,
    })
}

/// Single-site operator selector for [`apply_site_operator`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SiteOp {
    Z,
    Plus,
    Minus,
}

/// Apply `S_z`, `S+` or `S-` of one site to each column of `states`.
pub fn apply_site_operator(
    basis: &Basis,
    site: usize,
    op: SiteOp,
    states: MatRef<'_, C64>,
) -> Mat<C64> {
    let dim = basis.dim();
    let spin = basis.spin(site);
    let stride = basis.stride(site);
    let mut out = Mat::<C64>::zeros(dim, states.ncols());
    for idx in 0..dim {
        let k = basis.local_index(idx, site);
        let m = spin.m(k);
        let (target, coef) = match op {
            SiteOp::Z => (Some(idx), m),
            SiteOp::Plus if k >= 1 => (Some(idx - stride), spin.raise_coefficient(m)),
            SiteOp::Minus if k + 1 < spin.dim() => (Some(idx + stride), spin.lower_coefficient(m)),
            _ => (None, 0.0),
        };
        if let Some(t) = target {
            if coef != 0.0 {
                for c in 0..states.ncols() {
                    out[(t, c)] += states[(idx, c)] * coef;
                }
            }
        }
    }
    out
}

/// Kronecker embedding `I ⊗ ... ⊗ op ⊗ ... ⊗ I` of a local operator.
pub fn embed_site_operator(op: MatRef<'_, C64>, site: usize, chain: &ChainSpec) -> Result<Mat<C64>> {
    if site >= chain.len() {
        return Err(Error::invalid(format!(
            "site {site} out of range for {} sites",
            chain.len()
        )));
    }
    let local = chain.sites()[site].spin.dim();
    if op.nrows() != local || op.ncols() != local {
        return Err(Error::invalid(format!(
            "operator is {}x{}, site {site} needs {local}x{local}",
            op.nrows(),
            op.ncols()
        )));
    }
    let mut full = Mat::<C64>::from_fn(1, 1, |_, _| C64::new(1.0, 0.0));
    for (i, s) in chain.sites().iter().enumerate() {
        let d = s.spin.dim();
        let factor = if i == site {
            op.to_owned()
        } else {
            Mat::<C64>::identity(d, d)
        };
        full = kron(full.as_ref(), factor.as_ref());
    }
    Ok(full)
}

fn kron(a: MatRef<'_, C64>, b: MatRef<'_, C64>) -> Mat<C64> {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |r, c| a[(r / br, c / bc)] * b[(r % br, c % bc)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spinmodel::chain::SiteParams;
    use crate::spinmodel::spin::spin_matrices;

    fn fe_chain(n: usize, j: f64) -> ChainSpec {
        ChainSpec::uniform(n, SiteParams::fe(), j).unwrap()
    }

    #[test]
    fn single_fe_matrix_elements() {
        let chain = ChainSpec::new(
            vec![SiteParams::new(2.0, -1.87, 0.31, 2.11).unwrap()],
            vec![],
        )
        .unwrap();
        let h = build_hamiltonian(&chain, &[[0.0; 3]]).unwrap().matrix;
        let d = -1.87;
        let e = 0.31;
        let diag = h.diagonal();
        let want = [4.0 * d, d, 0.0, d, 4.0 * d];
        for (a, b) in diag.iter().zip(want) {
            assert!((a - b).abs() < 1e-14);
        }
        // m=+2 (k=0) <-> m=0 (k=2): E*sqrt(6); m=+1 (k=1) <-> m=-1 (k=3): 3E
        assert!((h.get(0, 2).re - e * 6f64.sqrt()).abs() < 1e-14);
        assert!((h.get(4, 2).re - e * 6f64.sqrt()).abs() < 1e-14);
        assert!((h.get(1, 3).re - 3.0 * e).abs() < 1e-14);
        assert_eq!(h.get(0, 1), C64::new(0.0, 0.0));
    }

    #[test]
    fn no_transverse_terms_gives_diagonal() {
        let site = SiteParams::new(2.0, -1.87, 0.0, 2.11).unwrap();
        let chain = ChainSpec::new(vec![site], vec![]).unwrap();
        let h = build_hamiltonian(&chain, &[[0.0; 3]]).unwrap().matrix;
        assert_eq!(h.nnz(), 5);
    }

    #[test]
    fn embedding_matches_kronecker_by_hand() {
        let half = SiteParams::new(0.5, 0.0, 0.0, 2.0).unwrap();
        let chain = ChainSpec::uniform(2, half, 0.0).unwrap();
        let m = spin_matrices(0.5).unwrap();
        let z0 = embed_site_operator(m.sz.as_ref(), 0, &chain).unwrap();
        let want = [0.5, 0.5, -0.5, -0.5];
        for (i, w) in want.iter().enumerate() {
            assert!((z0[(i, i)].re - w).abs() < 1e-15);
        }
        let z1 = embed_site_operator(m.sz.as_ref(), 1, &chain).unwrap();
        let prod = &z0 * &z1;
        let direct = kron(m.sz.as_ref(), m.sz.as_ref());
        for r in 0..4 {
            for c in 0..4 {
                assert!((prod[(r, c)] - direct[(r, c)]).norm() < 1e-15);
            }
        }
        let id = embed_site_operator(Mat::<C64>::identity(2, 2).as_ref(), 1, &chain).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let w = if r == c { 1.0 } else { 0.0 };
                assert!((id[(r, c)].re - w).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn embedding_rejects_bad_input() {
        let chain = fe_chain(2, 0.7);
        let m = spin_matrices(0.5).unwrap();
        assert!(embed_site_operator(m.sz.as_ref(), 0, &chain).is_err());
        let m2 = spin_matrices(2.0).unwrap();
        assert!(embed_site_operator(m2.sz.as_ref(), 2, &chain).is_err());
    }

    #[test]
    fn heisenberg_commutes_with_total_sz() {
        let site = SiteParams::new(2.0, -1.9, 0.0, 2.11).unwrap();
        let chain = ChainSpec::uniform(2, site, 0.8).unwrap();
        let h = build_hamiltonian(&chain, &[[0.0, 0.0, 0.3]; 2]).unwrap();
        let sz = spin_matrices(2.0).unwrap().sz;
        let tot = embed_site_operator(sz.as_ref(), 0, &chain).unwrap()
            + embed_site_operator(sz.as_ref(), 1, &chain).unwrap();
        let hd = h.matrix.to_dense();
        let comm = &hd * &tot - &tot * &hd;
        let worst = (0..25)
            .flat_map(|r| (0..25).map(move |c| (r, c)))
            .map(|(r, c)| comm[(r, c)].norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-10);
    }

    fn scaled(m: &Mat<C64>, c: f64) -> Mat<C64> {
        Mat::from_fn(m.nrows(), m.ncols(), |r, k| m[(r, k)] * c)
    }

    #[test]
    fn sparse_build_matches_kronecker_route() {
        let sites = vec![
            SiteParams::new(2.0, -2.0, 0.3, 2.5).unwrap(),
            SiteParams::new(1.5, -1.1, 0.1, 2.0).unwrap(),
            SiteParams::new(0.5, 0.0, 0.0, 1.9).unwrap(),
        ];
        let chain = ChainSpec::new(sites, vec![0.9, -0.4]).unwrap();
        let fields = [[1.0, 0.4, -0.2], [0.3, -0.7, 0.5], [2.0, 0.0, 0.1]];
        let h = build_hamiltonian(&chain, &fields).unwrap().matrix.to_dense();

        let dim = chain.hilbert_dim();
        let mut want = Mat::<C64>::zeros(dim, dim);
        let ops: Vec<_> = chain
            .sites()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let m = spin_matrices(s.spin.value()).unwrap();
                let e = |o: &Mat<C64>| embed_site_operator(o.as_ref(), i, &chain).unwrap();
                (e(&m.sx), e(&m.sy), e(&m.sz))
            })
            .collect();
        for (i, s) in chain.sites().iter().enumerate() {
            let (sx, sy, sz) = &ops[i];
            let z = s.g * MU_B;
            let [bx, by, bz] = fields[i];
            want = want
                + scaled(sx, z * bx)
                + scaled(sy, z * by)
                + scaled(sz, z * bz)
                + scaled(&(sz * sz), s.d)
                + scaled(&(sx * sx - sy * sy), s.e);
        }
        for (i, &j) in chain.couplings().iter().enumerate() {
            let (ax, ay, az) = &ops[i];
            let (bx, by, bz) = &ops[i + 1];
            want += scaled(&(ax * bx + ay * by + az * bz), j);
        }
        for r in 0..dim {
            for c in 0..dim {
                assert!((h[(r, c)] - want[(r, c)]).norm() < 1e-12, "({r},{c})");
            }
        }
    }

    #[test]
    fn site_operator_application_matches_embedding() {
        let chain = fe_chain(3, 1.0);
        let basis = chain.basis();
        let dim = basis.dim();
        let x = Mat::<C64>::from_fn(dim, 2, |r, c| C64::new((r * 7 + c) as f64 % 5.0, (r % 3) as f64));
        let m = spin_matrices(2.0).unwrap();
        for site in 0..3 {
            for (op, dense) in [
                (SiteOp::Z, &m.sz),
                (SiteOp::Plus, &m.splus),
                (SiteOp::Minus, &m.sminus),
            ] {
                let full = embed_site_operator(dense.as_ref(), site, &chain).unwrap();
                let want = &full * &x;
                let got = apply_site_operator(&basis, site, op, x.as_ref());
                for r in 0..dim {
                    for c in 0..2 {
                        assert!((want[(r, c)] - got[(r, c)]).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn rejects_wrong_field_count_and_nan() {
        let chain = fe_chain(2, 1.0);
        assert!(build_hamiltonian(&chain, &[[0.0; 3]]).is_err());
        assert!(build_hamiltonian(&chain, &[[f64::NAN, 0.0, 0.0], [0.0; 3]]).is_err());
    }
}
