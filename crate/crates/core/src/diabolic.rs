//! Diabolic points: closed form for one atom, gap tracking for chains.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use num_complex::Complex64 as C64;

use crate::constants::MU_B;
use crate::error::{Error, Result};
use crate::geometry::total_site_fields;
use crate::spinmodel::{
    apply_site_operator, build_hamiltonian, diagonalize, lowest_eigenvalues, Basis, ChainSpec,
    EigenOptions, SiteOp, SiteParams, Spectrum, Vec3,
};

/// Default gap below which a `B_z = 0` minimum counts as a crossing (meV).
pub const DEFAULT_GAP_TOL: f64 = 1e-6;

/// `B_{x,n} = n sqrt(2E(E-D)) / (g muB)` for odd `n`.
pub fn single_atom_dp(d: f64, e: f64, g: f64, n: i32) -> Result<f64> {
    if n % 2 == 0 {
        return Err(Error::invalid(format!("DP index n = {n} must be odd")));
    }
    if g == 0.0 || !g.is_finite() {
        return Err(Error::invalid("g must be finite and nonzero"));
    }
    let rad = 2.0 * e * (e - d);
    if rad < 0.0 || !rad.is_finite() {
        return Err(Error::Domain(format!("E(E - D) = {} is negative", e * (e - d))));
    }
    Ok(f64::from(n) * rad.sqrt() / (g * MU_B))
}

/// All positive single-atom DPs `n = 1, 3, ..., 2S-1` in ascending order.
pub fn single_atom_dps(site: &SiteParams) -> Result<Vec<f64>> {
    let two_s = site.spin.twice() as i32;
    (1..two_s)
        .step_by(2)
        .map(|n| single_atom_dp(site.d, site.e, site.g, n))
        .collect()
}

/// Ground-state `S_x` label.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SxQuanta {
    Integer(u32),
    /// `|sum <S_x>|` fell inside the guard band around a half-integer.
    Mixed(f64),
}

impl SxQuanta {
    pub fn integer(self) -> Option<u32> {
        match self {
            SxQuanta::Integer(n) => Some(n),
            SxQuanta::Mixed(_) => None,
        }
    }
}

impl std::fmt::Display for SxQuanta {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SxQuanta::Integer(n) => write!(f, "{n}"),
            SxQuanta::Mixed(_) => write!(f, "mixed"),
        }
    }
}

const SX_GUARD: f64 = 0.25;

/// `sum_i <psi|S_x,i|psi>` for one basis vector.
pub fn total_sx(state: &[C64], basis: &Basis) -> f64 {
    let dim = basis.dim();
    let col = faer::MatRef::from_column_major_slice(state, dim, 1);
    (0..basis.n_sites())
        .map(|site| {
            let sp = apply_site_operator(basis, site, SiteOp::Plus, col);
            // <S_x> = Re <S+>
            (0..dim).map(|r| (state[r].conj() * sp[(r, 0)]).re).sum::<f64>()
        })
        .sum()
}

/// `round(|sum_i <S_x,i>|)` with a 0.25 guard band.
pub fn rounded_sx(state: &[C64], basis: &Basis) -> SxQuanta {
    let x = total_sx(state, basis).abs();
    let r = x.round();
    if (x - r).abs() <= SX_GUARD {
        SxQuanta::Integer(r as u32)
    } else {
        SxQuanta::Mixed(x)
    }
}

/// `<psi|F|psi>` for the global flip `F|m_1..m_N> = |-m_1..-m_N>`.
///
/// `F` commutes with the Hamiltonian whenever every field is along `x`,
/// so transverse-field eigenstates have parity `+1` or `-1`; each DP
/// flips the ground-state parity.
pub fn x_parity(state: &[C64], basis: &Basis) -> f64 {
    let dim = basis.dim();
    (0..dim).map(|i| (state[i].conj() * state[dim - 1 - i]).re).sum()
}

/// Ground-state `S_x` quanta along a sequence of transverse fields.
///
/// Counts ground-state parity flips under [`x_parity`] from a reference
/// point near zero field; `B_y`, `B_z` and tip fields are dropped first so
/// the parity is exact. Points where the parity is not close to `+-1` are
/// labelled [`SxQuanta::Mixed`].
pub fn sx_quanta_series(chain: &ChainSpec, bx: &[f64], eigen: &EigenOptions) -> Result<Vec<SxQuanta>> {
    let scan = GapScan {
        eigen: eigen.clone(),
        ..GapScan::transverse(bare(chain), 0.0)
    };
    let reference = SX_REFERENCE_FIELD;
    let fields: Vec<f64> = std::iter::once(reference).chain(bx.iter().map(|b| b.abs())).collect();
    let parity: Vec<f64> = fields
        .par_iter()
        .map(|&b| {
            let s = scan.spectrum(b, 1)?;
            Ok(x_parity(&s.vector(0), &s.basis))
        })
        .collect::<Result<_>>()?;
    Ok(label_parities(&parity))
}

/// Ground-state `S_x` quanta at a single transverse field.
pub fn sx_quanta(chain: &ChainSpec, bx: f64, eigen: &EigenOptions) -> Result<SxQuanta> {
    Ok(sx_quanta_series(chain, &[bx], eigen)?[0])
}

/// Field used as the zero-quanta reference (T).
const SX_REFERENCE_FIELD: f64 = 1e-3;

fn label_parities(parity: &[f64]) -> Vec<SxQuanta> {
    let mut out = Vec::with_capacity(parity.len().saturating_sub(1));
    let mut prev = parity[0].signum();
    let mut count = 0u32;
    let valid = parity[0].abs() > 0.5;
    for &p in &parity[1..] {
        if p.abs() <= 0.5 {
            out.push(SxQuanta::Mixed(p));
            continue;
        }
        if p.signum() != prev {
            count += 1;
            prev = p.signum();
        }
        out.push(if valid {
            SxQuanta::Integer(count)
        } else {
            SxQuanta::Mixed(p)
        });
    }
    out
}

fn bare(chain: &ChainSpec) -> ChainSpec {
    let zero = vec![[0.0; 3]; chain.len()];
    chain.clone().with_tip_fields(&zero).expect("one field per site")
}

/// A located crossing (or avoided crossing when `B_z != 0`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiabolicPoint {
    pub bx: f64,
    /// 1-based ordinal among the reported points.
    pub index_j: usize,
    pub gap_at_point: f64,
    pub sx_quanta_after: SxQuanta,
}

/// Field-direction and solver settings for gap scans.
#[derive(Clone, Debug)]
pub struct GapScan {
    pub chain: ChainSpec,
    /// Field per unit `B_x`: the applied field is `bx * direction + offset`.
    pub direction: Vec3,
    pub offset: Vec3,
    pub probed_site: Option<usize>,
    pub eigen: EigenOptions,
}

impl GapScan {
    pub fn transverse(chain: ChainSpec, bz: f64) -> Self {
        GapScan {
            chain,
            direction: [1.0, 0.0, 0.0],
            offset: [0.0, 0.0, bz],
            probed_site: None,
            eigen: EigenOptions::default(),
        }
    }

    /// Applied crystal field at transverse coordinate `bx`.
    pub fn field(&self, bx: f64) -> Vec3 {
        let d = self.direction;
        let o = self.offset;
        [bx * d[0] + o[0], bx * d[1] + o[1], bx * d[2] + o[2]]
    }

    fn site_fields(&self, bx: f64) -> Result<Vec<Vec3>> {
        total_site_fields(self.field(bx), &self.chain, self.probed_site)
    }

    /// `E_1 - E_0` in meV.
    pub fn gap(&self, bx: f64) -> Result<f64> {
        let h = build_hamiltonian(&self.chain, &self.site_fields(bx)?)?;
        let e = lowest_eigenvalues(&h, 2, &self.eigen)?;
        Ok((e[1] - e[0]).max(0.0))
    }

    /// Lowest `k` eigenpairs at `bx`.
    pub fn spectrum(&self, bx: f64, k: usize) -> Result<Spectrum> {
        let h = build_hamiltonian(&self.chain, &self.site_fields(bx)?)?;
        let k = k.min(h.dim());
        diagonalize(
            &h,
            &EigenOptions {
                n_states: Some(k),
                ..self.eigen.clone()
            },
        )
    }

    /// Tunnel-splitting part of the gap, `gap * sin(2 theta)`, where
    /// `tan(theta) = |<P_B|psi_0>| / |<P_A|psi_0>|` for the two pocket
    /// product states. Equals the gap when the pockets are balanced and
    /// vanishes where the minority pocket drops out of the ground state.
    pub fn tunnel_splitting(&self, bx: f64) -> Result<f64> {
        let s = self.spectrum(bx, 2)?;
        let gap = (s.energies[1] - s.energies[0]).max(0.0);
        let (ia, ib) = s.basis.pocket_states(self.chain.is_antiferromagnetic());
        let a = s.vectors[(ia, 0)].norm();
        let b = s.vectors[(ib, 0)].norm();
        let w = a * a + b * b;
        if w == 0.0 {
            return Ok(gap);
        }
        Ok(gap * 2.0 * a * b / w)
    }

    fn has_longitudinal(&self) -> bool {
        self.direction[2] != 0.0
            || self.offset[2] != 0.0
            || self.chain.sites().iter().any(|s| s.tip_field[2] != 0.0)
    }
}

/// `E_1 - E_0` with a uniform applied field `b * field_dir`.
pub fn gap_function(chain: &ChainSpec, field_dir: Vec3, b: f64) -> Result<f64> {
    if b < 0.0 {
        return Err(Error::invalid("field magnitude must be non-negative"));
    }
    let scan = GapScan {
        direction: field_dir,
        offset: [0.0; 3],
        ..GapScan::transverse(chain.clone(), 0.0)
    };
    scan.gap(b)
}

/// Options for [`find_dps_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DpSearch {
    pub bx_range: (f64, f64),
    pub resolution: f64,
    /// Golden-section termination width (T).
    pub refine_tol: f64,
    pub gap_tol: f64,
}

impl DpSearch {
    pub fn new(bx_range: (f64, f64), resolution: f64) -> Self {
        DpSearch {
            bx_range,
            resolution,
            refine_tol: 1e-7,
            gap_tol: DEFAULT_GAP_TOL,
        }
    }
}

/// Scan `B_x` with a constant `B_z` and return the located DPs.
pub fn find_dps(chain: &ChainSpec, bx_range: (f64, f64), bz: f64, resolution: f64) -> Result<Vec<DiabolicPoint>> {
    find_dps_with(&GapScan::transverse(chain.clone(), bz), &DpSearch::new(bx_range, resolution))
}

/// Grid scan of the gap, golden-section refinement of every interior
/// local minimum, then filtering by residual gap.
pub fn find_dps_with(scan: &GapScan, search: &DpSearch) -> Result<Vec<DiabolicPoint>> {
    let (lo, hi) = search.bx_range;
    if !(lo >= 0.0 && hi > lo && search.resolution > 0.0) {
        return Err(Error::invalid(format!(
            "bad DP scan window [{lo}, {hi}] with resolution {}",
            search.resolution
        )));
    }
    let n = ((hi - lo) / search.resolution).ceil() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|k| (lo + k as f64 * search.resolution).min(hi)).collect();
    // With a longitudinal field the gap is dominated by Zeeman energy, so
    // the tunnel-splitting part is tracked instead.
    let longitudinal = scan.has_longitudinal();
    let objective = |b: f64| {
        if longitudinal {
            scan.tunnel_splitting(b)
        } else {
            scan.gap(b)
        }
    };
    let vals: Vec<f64> = grid.par_iter().map(|&b| objective(b)).collect::<Result<_>>()?;

    let brackets: Vec<(usize, f64, f64)> = (1..n.saturating_sub(1))
        .filter(|&k| vals[k] <= vals[k - 1] && vals[k] < vals[k + 1])
        .map(|k| (k, grid[k - 1], grid[k + 1]))
        .collect();

    let refined: Vec<(usize, f64, f64)> = brackets
        .par_iter()
        .map(|&(k, a, b)| golden_min(objective, a, b, search.refine_tol).map(|(x, f)| (k, x, f)))
        .collect::<Result<_>>()?;

    let mut found = Vec::new();
    for (k, bx, val) in refined {
        let keep = if longitudinal {
            // A genuine crossing drives the splitting towards zero.
            let shoulder = vals[k - 1].min(vals[k + 1]);
            val < search.gap_tol || val < DIP_FRACTION * shoulder
        } else {
            val < search.gap_tol
        };
        if keep && bx > 0.0 {
            let gap = scan.gap(bx)?;
            found.push((bx, gap));
        }
    }
    // Parity is sampled just past each DP and at the grid points between
    // them so every flip is counted once.
    let mut probes: Vec<f64> = grid.clone();
    probes.extend(found.iter().map(|&(bx, _)| bx + 0.25 * search.resolution));
    probes.sort_by(f64::total_cmp);
    probes.dedup();
    let xs: Vec<f64> = probes.iter().map(|&b| scan.field(b)[0]).collect();
    let labels = sx_quanta_series(&scan.chain, &xs, &scan.eigen)?;
    let mut out = Vec::new();
    for (j, (bx, gap)) in found.into_iter().enumerate() {
        let probe = bx + 0.25 * search.resolution;
        let at = probes
            .iter()
            .position(|&p| p == probe)
            .expect("probe inserted above");
        out.push(DiabolicPoint {
            bx,
            index_j: j + 1,
            gap_at_point: gap,
            sx_quanta_after: labels[at],
        });
    }
    Ok(out)
}

/// Refined tunnel splitting must fall below this fraction of its grid
/// neighbours to count as a crossing.
const DIP_FRACTION: f64 = 0.05;

/// Golden-section minimisation on `[a, b]`; returns `(x, f(x))`.
pub fn golden_min<F>(f: F, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(if fc < fd { (c, fc) } else { (d, fd) })
}

/// One row of the DP atlas.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtlasRow {
    pub n: usize,
    pub j_over_abs_d: f64,
    pub j: usize,
    pub bx: f64,
    pub bx_over_bx3: f64,
    pub gap: f64,
    pub sx_quanta_after: SxQuanta,
}

/// Atlas scan settings.
#[derive(Clone, Debug)]
pub struct AtlasOptions {
    /// Upper end of the scan as a multiple of the single-atom top DP.
    pub window: f64,
    pub resolution: f64,
    pub eigen: EigenOptions,
}

impl Default for AtlasOptions {
    fn default() -> Self {
        AtlasOptions {
            window: 1.1,
            resolution: 0.02,
            eigen: EigenOptions::default(),
        }
    }
}

/// DPs at `B_z = 0` for uniform chains of `base_site` over `N x J/|D|`.
///
/// Rows are ordered by `(N, J/|D|, B_x)`; cells over the dimension cap are
/// skipped with a warning.
pub fn dp_atlas(n_list: &[usize], j_over_d: &[f64], base_site: &SiteParams, opts: &AtlasOptions) -> Result<Vec<AtlasRow>> {
    let tops = single_atom_dps(base_site)?;
    let bx3 = *tops
        .last()
        .ok_or_else(|| Error::invalid("base site has no positive DPs (S < 1)"))?;
    let cells: Vec<(usize, f64)> = n_list
        .iter()
        .flat_map(|&n| j_over_d.iter().map(move |&r| (n, r)))
        .collect();
    let per_cell: Vec<Result<Vec<AtlasRow>>> = cells
        .par_iter()
        .map(|&(n, ratio)| {
            let chain = match ChainSpec::uniform(n, base_site.clone(), ratio * base_site.d.abs()) {
                Ok(c) => c,
                Err(e) => {
                    log::warn!("skipping atlas cell N={n}, J/|D|={ratio}: {e}");
                    return Ok(Vec::new());
                }
            };
            let mut scan = GapScan::transverse(chain, 0.0);
            scan.eigen = opts.eigen.clone();
            let search = DpSearch::new((opts.resolution, opts.window * bx3), opts.resolution);
            let dps = find_dps_with(&scan, &search)?;
            Ok(dps
                .into_iter()
                .map(|dp| AtlasRow {
                    n,
                    j_over_abs_d: ratio,
                    j: dp.index_j,
                    bx: dp.bx,
                    bx_over_bx3: dp.bx / bx3,
                    gap: dp.gap_at_point,
                    sx_quanta_after: dp.sx_quanta_after,
                })
                .collect())
        })
        .collect();
    let mut rows = Vec::new();
    for cell in per_cell {
        rows.extend(cell?);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_values() {
        let b1 = single_atom_dp(-1.87, 0.31, 2.11, 1).unwrap();
        let oracle = (2.0f64 * 0.31 * (0.31 + 1.87)).sqrt() / (2.11 * 0.0578838);
        assert!((b1 - oracle).abs() < 1e-12);
        assert!((b1 - 9.52).abs() < 0.01);
        assert!((single_atom_dp(-1.87, 0.31, 2.11, 3).unwrap() - 3.0 * b1).abs() < 1e-12);
        assert_eq!(single_atom_dp(-1.87, 0.0, 2.11, 5).unwrap(), 0.0);
        assert!(matches!(single_atom_dp(1.0, 0.5, 2.0, 1), Err(Error::Domain(_))));
        assert!(single_atom_dp(-1.0, 0.2, 2.0, 2).is_err());
    }

    #[test]
    fn golden_section_finds_cusp() {
        let (x, fx) = golden_min(|x| Ok((x - 0.3141).abs()), 0.0, 1.0, 1e-9).unwrap();
        assert!((x - 0.3141).abs() < 1e-8);
        assert!(fx < 1e-8);
    }
}
