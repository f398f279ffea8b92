use diabolo_core::constants::MU_B;
use diabolo_core::diabolic::{
    dp_atlas, golden_min, single_atom_dp, single_atom_dps, sx_quanta, AtlasOptions,
};
use diabolo_core::spinmodel::EigenOptions;
use diabolo_core::{find_dps, ChainSpec, SiteParams, SxQuanta};
use faer::Mat;
use proptest::prelude::*;

/// Lowest two levels of a spin-2 ion in a transverse field, built and solved
/// without the library's operator code.
fn oracle_gap(d: f64, e: f64, g: f64, bx: f64) -> f64 {
    let s = 2.0f64;
    let m = |k: usize| s - k as f64;
    let h = Mat::from_fn(5, 5, |r, c| {
        let (mr, mc) = (m(r), m(c));
        let mut v = 0.0;
        if r == c {
            v += d * mr * mr;
        }
        // S+ and S- ladders
        let lp = |mm: f64| (s * (s + 1.0) - mm * (mm + 1.0)).sqrt();
        if (mr - mc - 1.0).abs() < 1e-9 {
            v += 0.5 * g * MU_B * bx * lp(mc);
        }
        if (mc - mr - 1.0).abs() < 1e-9 {
            v += 0.5 * g * MU_B * bx * lp(mr);
        }
        if (mr - mc - 2.0).abs() < 1e-9 {
            v += 0.5 * e * lp(mc) * lp(mc + 1.0);
        }
        if (mc - mr - 2.0).abs() < 1e-9 {
            v += 0.5 * e * lp(mr) * lp(mr + 1.0);
        }
        v
    });
    let mut ev: Vec<f64> = h.self_adjoint_eigenvalues(faer::Side::Lower).unwrap();
    ev.sort_by(f64::total_cmp);
    ev[1] - ev[0]
}

#[test]
fn fe_atom_has_two_crossings_with_quanta_steps() {
    let chain = ChainSpec::new(vec![SiteParams::new(2.0, -1.87, 0.31, 2.11).unwrap()], vec![]).unwrap();
    let dps = find_dps(&chain, (0.05, 32.0), 0.0, 0.05).unwrap();
    assert_eq!(dps.len(), 2);
    assert!((dps[0].bx - 9.519).abs() < 1e-3);
    assert!((dps[1].bx - 28.557).abs() < 1e-3);
    for dp in &dps {
        assert!(dp.gap_at_point < 1e-6, "{dp:?}");
    }
    let labels: Vec<_> = dps.iter().map(|d| d.sx_quanta_after).collect();
    assert_eq!(labels, vec![SxQuanta::Integer(1), SxQuanta::Integer(2)]);
    let eig = EigenOptions::default();
    assert_eq!(sx_quanta(&chain, 5.0, &eig).unwrap(), SxQuanta::Integer(0));
    assert_eq!(sx_quanta(&chain, 20.0, &eig).unwrap(), SxQuanta::Integer(1));
}

#[test]
fn closed_form_sits_on_oracle_zeros() {
    let (d, e, g) = (-1.87, 0.31, 2.11);
    for n in [1, 3] {
        let b = single_atom_dp(d, e, g, n).unwrap();
        let at = oracle_gap(d, e, g, b);
        let off = oracle_gap(d, e, g, b + 0.05).min(oracle_gap(d, e, g, b - 0.05));
        assert!(at < 1e-9, "gap {at} at {b}");
        assert!(off > 1e3 * at.max(1e-12));
    }
}

#[test]
fn longitudinal_field_lifts_the_crossing() {
    let chain = ChainSpec::new(vec![SiteParams::new(2.0, -1.87, 0.31, 2.11).unwrap()], vec![]).unwrap();
    let dps = find_dps(&chain, (0.05, 12.0), 0.02, 0.05).unwrap();
    assert_eq!(dps.len(), 1);
    assert!(dps[0].gap_at_point > 1e-4);
    assert!((dps[0].bx - 9.519).abs() < 0.05);
}

#[test]
fn atlas_single_atom_row_matches_closed_form() {
    let site = SiteParams::new(2.0, -1.87, 0.31, 2.11).unwrap();
    let rows = dp_atlas(&[1], &[0.0], &site, &AtlasOptions::default()).unwrap();
    let closed = single_atom_dps(&site).unwrap();
    assert_eq!(rows.len(), closed.len());
    for (r, c) in rows.iter().zip(&closed) {
        assert!((r.bx - c).abs() < 1e-5);
    }
    assert!((rows.last().unwrap().bx_over_bx3 - 1.0).abs() < 1e-6);
}

#[test]
fn bad_scan_window_is_rejected() {
    let chain = ChainSpec::new(vec![SiteParams::fe()], vec![]).unwrap();
    assert!(find_dps(&chain, (5.0, 1.0), 0.0, 0.05).is_err());
    assert!(find_dps(&chain, (0.0, 1.0), 0.0, 0.0).is_err());
}

#[test]
fn golden_section_finds_parabola_minimum() {
    let (x, f) = golden_min(|x| Ok((x - 1.234).powi(2) + 0.5), 0.0, 3.0, 1e-9).unwrap();
    assert!((x - 1.234).abs() < 1e-8);
    assert!((f - 0.5).abs() < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn closed_form_matches_numeric_search(d in -3.0f64..-0.5, frac in 0.02f64..0.33, g in 1.8f64..2.6) {
        let e = frac * d.abs();
        let site = SiteParams::new(2.0, d, e, g).unwrap();
        let closed = single_atom_dps(&site).unwrap();
        let chain = ChainSpec::new(vec![site], vec![]).unwrap();
        let found = find_dps(&chain, (0.05, 1.1 * closed[1]), 0.0, 0.05).unwrap();
        prop_assert_eq!(found.len(), closed.len());
        for (f, c) in found.iter().zip(&closed) {
            prop_assert!((f.bx - c).abs() < 1e-4);
        }
    }
}
