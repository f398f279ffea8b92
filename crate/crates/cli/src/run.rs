//! Mode dispatch.

use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;

use diabolo_core::diabolic::{dp_atlas, find_dps_with, sx_quanta_series, AtlasOptions, DpSearch, GapScan};
use diabolo_core::rates::{
    build_rate_matrix, classify_pockets, current_decomposition_fit, lifetime_curve_crystal, lifetime_point,
    CurrentSeries, Pocket,
};
use diabolo_core::spinmodel::SiteParams;
use diabolo_core::telegraph::{
    assign_pockets, average_lifetime, detect_switches, fit_dwell_times, lifetime_ratio_energy, project_to_pockets,
    read_trace, simulate_trajectory, synthesize_trace, write_dwells, write_trace, DwellState, LifetimeFit,
};
use diabolo_core::{DwellRecord, TipSite};
use faer::Mat;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::config::{Generator, Mode, RunConfig};
use crate::error::{CliError, CliResult};
use crate::output::{Cell, Emitter, Table};

pub const LIFETIME_COLUMNS: [&str; 10] = [
    "Bx_T",
    "Bz_T",
    "gap_meV",
    "P01",
    "T_A_s",
    "T_B_s",
    "T_avg_s",
    "sx_quanta",
    "pocket_overlap_A",
    "pocket_overlap_B",
];

/// Runs the configured mode and returns the written files, manifest last.
pub fn run(cfg: &RunConfig) -> CliResult<Vec<PathBuf>> {
    let mut em = Emitter::new(&cfg.file.output.dir, cfg.file.output.format)?;
    let mut derived = base_derived(cfg);
    let result = match cfg.mode {
        Mode::Spectrum => spectrum(cfg, &mut em),
        Mode::DpScan => dp_scan(cfg, &mut em, &mut derived),
        Mode::Atlas => atlas(cfg, &mut em, &mut derived),
        Mode::LifetimeCurve => lifetime_curves(cfg, &mut em),
        Mode::Telegraph => telegraph(cfg, &mut em, &mut derived),
        Mode::AnalyzeTrace => analyze_trace(cfg, &mut em, &mut derived),
        Mode::FitCurrent => fit_current(cfg, &mut em, &mut derived),
    };
    if let Err(e) = &result {
        derived.insert("error".into(), json!(e.to_string()));
    }
    em.manifest(cfg, derived)?;
    result?;
    Ok(em.written().to_vec())
}

fn base_derived(cfg: &RunConfig) -> Map<String, Value> {
    let tp = &cfg.file.transport;
    let mut d = Map::new();
    d.insert("alpha_deg".into(), json!(cfg.file.field.alpha()));
    d.insert("kt_meV".into(), json!(tp.kt()));
    d.insert("bath_current_pA".into(), json!(tp.bath_current_pa()));
    d.insert("tip_conductance_uS".into(), json!(tp.tip_conductance() * 1e6));
    if let Some(c) = &cfg.chain {
        d.insert("n_sites".into(), json!(c.len()));
        d.insert("hilbert_dim".into(), json!(c.hilbert_dim()));
        if let Ok(m) = cfg.lifetime_model(tp.probed_site, tp.bias_mv) {
            let window = m.energy_window();
            d.insert("energy_window_meV".into(), json!(window));
        }
    }
    d
}

fn spectrum(cfg: &RunConfig, em: &mut Emitter) -> CliResult<()> {
    let fields = match &cfg.file.sweep {
        Some(_) => cfg.sweep_fields()?,
        None => vec![cfg.point_field()?],
    };
    let mut model = cfg.lifetime_model(cfg.file.transport.probed_site, cfg.file.transport.bias_mv)?;
    let dim = model.chain.hilbert_dim();
    model.n_states = Some(cfg.file.model.n_levels.clamp(1, dim));
    let spectra = fields
        .par_iter()
        .map(|&b| model.spectrum(b))
        .collect::<diabolo_core::Result<Vec<_>>>()?;
    let mut t = Table::new(&["Bx_T", "By_T", "Bz_T", "level", "energy_meV", "excitation_meV"]);
    for (b, s) in fields.iter().zip(&spectra) {
        for (k, e) in s.energies.iter().enumerate() {
            t.push(vec![b[0].into(), b[1].into(), b[2].into(), k.into(), (*e).into(), (e - s.energies[0]).into()]);
        }
    }
    em.table("spectrum", &t)?;
    if let [s] = spectra.as_slice() {
        let mut st = Table::new(&["level", "basis_state", "amplitude_re", "amplitude_im", "weight"]);
        for k in 0..s.len() {
            for idx in 0..s.vectors.nrows() {
                let a = s.vectors[(idx, k)];
                if a.norm_sqr() < 1e-6 {
                    continue;
                }
                let label: Vec<String> = s.basis.label(idx).iter().map(|m| format!("{m}")).collect();
                st.push(vec![
                    k.into(),
                    format!("[{}]", label.join(" ")).into(),
                    a.re.into(),
                    a.im.into(),
                    a.norm_sqr().into(),
                ]);
            }
        }
        em.table("states", &st)?;
    }
    Ok(())
}

fn dp_scan(cfg: &RunConfig, em: &mut Emitter, derived: &mut Map<String, Value>) -> CliResult<()> {
    let d = &cfg.file.dp_scan;
    let hi = d.bx_max.or(cfg.file.sweep.as_ref().map(|s| s.stop)).expect("validated");
    let mut scan = GapScan::transverse(cfg.chain()?.clone(), d.bz_t);
    if d.follow_alpha {
        scan.direction = [1.0, 0.0, cfg.file.field.alpha().to_radians().tan()];
    }
    scan.probed_site = match cfg.tip_site() {
        TipSite::Probed => Some(cfg.file.transport.probed_site),
        TipSite::Index(_) => None,
    };
    scan.eigen = cfg.file.model.eigen.clone();
    let dps = find_dps_with(&scan, &DpSearch::new((d.bx_min, hi), d.resolution))?;
    derived.insert("scan_direction".into(), json!(scan.direction));
    let mut t = Table::new(&["j", "Bx_T", "Bz_T", "gap_meV", "sx_quanta_after"]);
    for dp in &dps {
        let f = scan.field(dp.bx);
        t.push(vec![dp.index_j.into(), dp.bx.into(), f[2].into(), dp.gap_at_point.into(), dp.sx_quanta_after.to_string().into()]);
    }
    em.table("dp_scan", &t)?;
    Ok(())
}

fn atlas(cfg: &RunConfig, em: &mut Emitter, derived: &mut Map<String, Value>) -> CliResult<()> {
    let base = match &cfg.chain {
        Some(c) => {
            let s = &c.sites()[0];
            SiteParams { tip_field: [0.0; 3], ..s.clone() }
        }
        None => SiteParams::fe(),
    };
    derived.insert("atlas_base_site".into(), json!({ "d": base.d, "e": base.e, "g": base.g }));
    let a = &cfg.file.atlas;
    let opts = AtlasOptions { window: a.window, resolution: a.resolution, eigen: cfg.file.model.eigen.clone() };
    let rows = dp_atlas(&a.n, &a.j_over_abs_d, &base, &opts)?;
    let mut t = Table::new(&["N", "J_over_absD", "j", "Bx_T", "Bx_over_Bx3", "gap_meV", "sx_quanta_after"]);
    for r in &rows {
        t.push(vec![
            r.n.into(),
            r.j_over_abs_d.into(),
            r.j.into(),
            r.bx.into(),
            r.bx_over_bx3.into(),
            r.gap.into(),
            r.sx_quanta_after.to_string().into(),
        ]);
    }
    em.table("atlas", &t)?;
    Ok(())
}

/// Stem of a lifetime-curve file for one probed site and bias.
pub fn curve_stem(site: usize, bias: f64, several_biases: bool) -> String {
    if several_biases {
        format!("lifetime_curve_site{site}_V{bias}mV")
    } else {
        format!("lifetime_curve_site{site}")
    }
}

fn lifetime_curves(cfg: &RunConfig, em: &mut Emitter) -> CliResult<()> {
    let fields = cfg.sweep_fields()?;
    let labels = if cfg.file.model.sx_quanta {
        let bx: Vec<f64> = fields.iter().map(|b| b[0]).collect();
        Some(sx_quanta_series(cfg.chain()?, &bx, &cfg.file.model.eigen)?)
    } else {
        None
    };
    let biases = cfg.biases();
    for site in cfg.probed_sites() {
        for &bias in &biases {
            let model = cfg.lifetime_model(site, bias)?;
            let preds = lifetime_curve_crystal(&model, &fields)?;
            let mut t = Table::new(&LIFETIME_COLUMNS);
            for (k, p) in preds.iter().enumerate() {
                let q = labels.as_ref().map_or(Cell::Empty, |l| l[k].to_string().into());
                t.push(vec![
                    p.field[0].into(),
                    p.field[2].into(),
                    p.gap.into(),
                    p.scattering_intensity.into(),
                    p.t_a.into(),
                    p.t_b.into(),
                    p.t_avg.into(),
                    q,
                    p.pocket_overlap_a.into(),
                    p.pocket_overlap_b.into(),
                ]);
            }
            em.table(&curve_stem(site, bias, biases.len() > 1), &t)?;
        }
    }
    Ok(())
}

fn levels_by_pocket(cfg: &RunConfig) -> [f64; 2] {
    let [a, b] = cfg.file.telegraph.levels_pa;
    let (lo, hi) = (a.min(b), a.max(b));
    match cfg.file.telegraph.low_is {
        Pocket::B => [hi, lo],
        _ => [lo, hi],
    }
}

fn telegraph(cfg: &RunConfig, em: &mut Emitter, derived: &mut Map<String, Value>) -> CliResult<()> {
    let t = &cfg.file.telegraph;
    let (w, labels, predicted) = match t.rates_per_s {
        Some([ab, ba]) => (two_state(ab, ba), vec![Pocket::A, Pocket::B], (1.0 / ab, 1.0 / ba)),
        None => {
            let tp = &cfg.file.transport;
            let model = cfg.lifetime_model(tp.probed_site, tp.bias_mv)?;
            let field = cfg.point_field()?;
            let p = lifetime_point(&model, field)?;
            derived.insert("telegraph_field_T".into(), json!(field));
            match t.generator {
                Generator::TwoState => (two_state(1.0 / p.t_a, 1.0 / p.t_b), vec![Pocket::A, Pocket::B], (p.t_a, p.t_b)),
                Generator::Full => {
                    let spec = model.spectrum(field)?;
                    let rates = build_rate_matrix(&spec, &model.transport)?;
                    let pockets = classify_pockets(&spec, &model.chain, model.pocket_threshold)?;
                    (rates.total, pockets.labels, (p.t_a, p.t_b))
                }
            }
        }
    };
    let start = labels.iter().position(|&l| l == Pocket::A).unwrap_or(0);
    let traj = simulate_trajectory(&w, start, t.duration_s, t.seed)?;
    if traj.absorbed {
        log::warn!("trajectory reached an absorbing state before {} s", t.duration_s);
    }
    derived.insert("trajectory_jumps".into(), json!(traj.jumps.len()));
    derived.insert("trajectory_absorbed".into(), json!(traj.absorbed));
    let pocket_traj = project_to_pockets(&traj, &labels)?;
    let trace = synthesize_trace(
        &pocket_traj,
        &levels_by_pocket(cfg),
        t.noise_rms_pa,
        t.sample_rate_hz,
        t.drift_pa_per_s,
        t.seed,
    )?;
    if t.write_trace {
        em.with_writer("trace.txt", |w| write_trace(&trace, w))?;
    }
    let mut dwells = detect_switches(&trace, &t.detect)?;
    assign_pockets(&mut dwells, t.low_is);
    em.with_writer("dwells.csv", |w| write_dwells(&dwells, w))?;
    summarize(cfg, em, &dwells, Some(predicted), "telegraph_summary")
}

fn two_state(ab: f64, ba: f64) -> Mat<f64> {
    Mat::from_fn(2, 2, |f, i| match (f, i) {
        (1, 0) => ab,
        (0, 1) => ba,
        _ => 0.0,
    })
}

fn analyze_trace(cfg: &RunConfig, em: &mut Emitter, derived: &mut Map<String, Value>) -> CliResult<()> {
    let t = &cfg.file.telegraph;
    let path = t.input.as_ref().expect("validated");
    let file = File::open(path).map_err(|e| CliError::io(format!("opening {}", path.display()), e))?;
    let trace = read_trace(BufReader::new(file))?;
    derived.insert("trace_samples".into(), json!(trace.samples.len()));
    derived.insert("trace_sample_rate_hz".into(), json!(trace.sample_rate_hz));
    let mut dwells = detect_switches(&trace, &t.detect)?;
    assign_pockets(&mut dwells, t.low_is);
    em.with_writer("dwells.csv", |w| write_dwells(&dwells, w))?;
    summarize(cfg, em, &dwells, None, "trace_analysis")
}

/// Lifetime fits for both pockets plus the derived average and ratio energy.
fn summarize(
    cfg: &RunConfig,
    em: &mut Emitter,
    dwells: &[DwellRecord],
    predicted: Option<(f64, f64)>,
    stem: &str,
) -> CliResult<()> {
    let min = cfg.file.telegraph.min_events;
    let fit_a = fit_dwell_times(dwells, DwellState::A, min);
    let fit_b = fit_dwell_times(dwells, DwellState::B, min);
    let mut t = Table::new(&["quantity", "value", "ci_low", "ci_high", "n_events", "histogram_value", "predicted"]);
    let mut row = |name: &str, fit: &Result<LifetimeFit, diabolo_core::Error>, pred: Option<f64>| match fit {
        Ok(f) => t.push(vec![
            name.into(),
            f.mle.t.into(),
            f.mle.ci_95.0.into(),
            f.mle.ci_95.1.into(),
            f.mle.n_events.into(),
            f.histogram.map(|h| h.t).into(),
            pred.into(),
        ]),
        Err(_) => t.push(vec![name.into(), Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, pred.into()]),
    };
    row("T_A_s", &fit_a, predicted.map(|p| p.0));
    row("T_B_s", &fit_b, predicted.map(|p| p.1));
    if let (Ok(a), Ok(b)) = (&fit_a, &fit_b) {
        let avg = average_lifetime(a.mle.t, b.mle.t)?;
        let pred = predicted.map(|(x, y)| 1.0 / (1.0 / x + 1.0 / y));
        t.push(vec!["T_avg_s".into(), avg.into(), Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, pred.into()]);
        let (high, low) = match cfg.file.telegraph.low_is {
            Pocket::B => (a.mle.t, b.mle.t),
            _ => (b.mle.t, a.mle.t),
        };
        let temp = cfg.file.transport.temperature_k;
        let de = lifetime_ratio_energy(high, low, temp)?;
        t.push(vec!["T_H_over_T_L".into(), (high / low).into(), Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty]);
        t.push(vec!["delta_E_ueV".into(), de.into(), Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty, Cell::Empty]);
    }
    em.table(stem, &t)?;
    fit_a?;
    fit_b?;
    Ok(())
}

fn fit_current(cfg: &RunConfig, em: &mut Emitter, derived: &mut Map<String, Value>) -> CliResult<()> {
    let f = &cfg.file.fit_current;
    let series = match &f.input {
        Some(path) => read_current_series(path)?,
        None => simulate_current_series(cfg)?,
    };
    let mut data = Table::new(&["label", "current_pA", "T_avg_s"]);
    for s in &series {
        for (i, t) in s.current_pa.iter().zip(&s.t_avg_s) {
            data.push(vec![s.label.into(), (*i).into(), (*t).into()]);
        }
    }
    em.table("current_series", &data)?;
    let fit = current_decomposition_fit(&series, f.known_i0_pa)?;
    derived.insert("rms_relative_residual".into(), json!(fit.rms_relative));
    let mut t = Table::new(&["parameter", "label", "value", "std_error"]);
    t.push(vec!["r_O".into(), Cell::Empty, fit.r_o.into(), fit.r_o_se.into()]);
    t.push(vec!["I0_pA".into(), Cell::Empty, fit.i0.into(), fit.i0_se.into()]);
    for (k, s) in series.iter().enumerate() {
        t.push(vec!["r_T".into(), s.label.into(), fit.r_t[k].into(), fit.r_t_se[k].into()]);
        t.push(vec!["r_O_series".into(), s.label.into(), fit.r_o_per_series[k].into(), Cell::Empty]);
    }
    em.table("current_fit", &t)?;
    Ok(())
}

fn read_current_series(path: &PathBuf) -> CliResult<Vec<CurrentSeries>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    let mut series: Vec<CurrentSeries> = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let l = line.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = l.split(',').map(str::trim).collect();
        let parsed: Option<Vec<f64>> = cols.iter().map(|c| c.parse().ok()).collect();
        match (cols.len(), parsed) {
            (3, Some(v)) => match series.iter_mut().find(|s| s.label == v[0]) {
                Some(s) => {
                    s.current_pa.push(v[1]);
                    s.t_avg_s.push(v[2]);
                }
                None => series.push(CurrentSeries { label: v[0], current_pa: vec![v[1]], t_avg_s: vec![v[2]] }),
            },
            (3, None) if series.is_empty() => continue,
            _ => {
                return Err(diabolo_core::Error::Fit(format!(
                    "{}:{}: expected label,current_pA,T_avg_s",
                    path.display(),
                    no + 1
                ))
                .into())
            }
        }
    }
    Ok(series)
}

fn simulate_current_series(cfg: &RunConfig) -> CliResult<Vec<CurrentSeries>> {
    let f = &cfg.file.fit_current;
    let tp = &cfg.file.transport;
    let base = cfg.lifetime_model(tp.probed_site, tp.bias_mv)?;
    let mut out = Vec::new();
    for &bx in &f.bx_list {
        let field = diabolo_core::lab_to_crystal(&diabolo_core::FieldConfig { b1: bx, ..cfg.file.field })?;
        let t_avg = f
            .currents_pa
            .par_iter()
            .map(|&i| {
                let mut m = base.clone();
                m.transport.current_pa = i;
                lifetime_point(&m, field).map(|p| p.t_avg)
            })
            .collect::<diabolo_core::Result<Vec<f64>>>()?;
        out.push(CurrentSeries { label: bx, current_pa: f.currents_pa.clone(), t_avg_s: t_avg });
    }
    Ok(out)
}
