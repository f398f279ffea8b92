//! Run configuration: TOML layout, preset expansion, overrides and validation.

use std::path::{Path, PathBuf};

use diabolo_core::geometry::longitudinal_field;
use diabolo_core::rates::Pocket;
use diabolo_core::spinmodel::{EigenOptions, DEFAULT_DIM_CAP};
use diabolo_core::telegraph::{DetectOptions, DEFAULT_MIN_EVENTS};
use diabolo_core::{lab_to_crystal, ChainSpec, FieldConfig, LifetimeModel, SiteParams, TipSite, TransportParams, Vec3};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::presets;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Spectrum,
    DpScan,
    Atlas,
    LifetimeCurve,
    Telegraph,
    AnalyzeTrace,
    FitCurrent,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Spectrum => "spectrum",
            Mode::DpScan => "dp-scan",
            Mode::Atlas => "atlas",
            Mode::LifetimeCurve => "lifetime-curve",
            Mode::Telegraph => "telegraph",
            Mode::AnalyzeTrace => "analyze-trace",
            Mode::FitCurrent => "fit-current",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// A scalar applied to every site (or bond), or one value per site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn len(&self) -> Option<usize> {
        match self {
            OneOrMany::One(_) => None,
            OneOrMany::Many(v) => Some(v.len()),
        }
    }

    fn expand(&self, n: usize, key: &str) -> CliResult<Vec<f64>> {
        match self {
            OneOrMany::One(x) => Ok(vec![*x; n]),
            OneOrMany::Many(v) if v.len() == n => Ok(v.clone()),
            OneOrMany::Many(v) => Err(CliError::config(format!("{key}: expected {n} values, got {}", v.len()))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChainSection {
    pub n: Option<usize>,
    pub spin: f64,
    pub d: Option<OneOrMany>,
    pub e: Option<OneOrMany>,
    pub g: Option<OneOrMany>,
    pub j: Option<OneOrMany>,
    pub tip_field_mt: f64,
    pub tip_site: TipSite,
    pub dim_cap: usize,
}

impl Default for ChainSection {
    fn default() -> Self {
        ChainSection {
            n: None,
            spin: 2.0,
            d: None,
            e: None,
            g: None,
            j: None,
            tip_field_mt: 0.0,
            tip_site: TipSite::Probed,
            dim_cap: DEFAULT_DIM_CAP,
        }
    }
}

impl ChainSection {
    fn is_set(&self) -> bool {
        self.d.is_some() || self.e.is_some() || self.g.is_some() || self.n.is_some()
    }

    /// Builds the chain, with the tip field placed on the configured site
    /// (site 0 when it follows the probed atom).
    pub fn build(&self) -> CliResult<ChainSpec> {
        let per_site = [&self.d, &self.e, &self.g];
        let inferred = per_site
            .iter()
            .filter_map(|v| v.as_ref().and_then(OneOrMany::len))
            .chain(self.j.as_ref().and_then(OneOrMany::len).map(|l| l + 1))
            .max();
        let n = self
            .n
            .or(inferred)
            .ok_or_else(|| CliError::config("chain.n is required when d, e, g and j are all scalars"))?;
        if n == 0 {
            return Err(CliError::config("chain.n must be at least 1"));
        }
        let need = |v: &Option<OneOrMany>, key: &str| {
            v.as_ref().ok_or_else(|| CliError::config(format!("missing required field {key}")))?.expand(n, key)
        };
        let d = need(&self.d, "chain.d")?;
        let e = need(&self.e, "chain.e")?;
        let g = need(&self.g, "chain.g")?;
        let j = match &self.j {
            Some(j) => j.expand(n - 1, "chain.j")?,
            None if n == 1 => Vec::new(),
            None => return Err(CliError::config("missing required field chain.j")),
        };
        let mut sites = (0..n)
            .map(|i| SiteParams::new(self.spin, d[i], e[i], g[i]))
            .collect::<diabolo_core::Result<Vec<_>>>()
            .map_err(|e| CliError::config(format!("chain: {e}")))?;
        let tip = match self.tip_site {
            TipSite::Index(i) if i >= n => {
                return Err(CliError::config(format!("chain.tip_site {i} out of range for {n} sites")))
            }
            TipSite::Index(i) => i,
            TipSite::Probed => 0,
        };
        if self.tip_field_mt != 0.0 {
            sites[tip].tip_field = [0.0, 0.0, self.tip_field_mt * 1e-3];
        }
        ChainSpec::with_cap(sites, j, self.dim_cap).map_err(|e| CliError::config(format!("chain: {e}")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Magnet field `B1` swept, crystal field from the mounting angles.
    #[default]
    Transverse,
    /// Field along the easy axis, misaligned by the effective alpha.
    Longitudinal,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub axis: Axis,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    pub probed_sites: Option<Vec<usize>>,
    pub biases_mv: Option<Vec<f64>>,
}

impl SweepSection {
    pub fn values(&self) -> CliResult<Vec<f64>> {
        if !(self.step > 0.0) || !self.step.is_finite() {
            return Err(CliError::config("sweep.step must be positive"));
        }
        if !(self.stop >= self.start) || !self.start.is_finite() || !self.stop.is_finite() {
            return Err(CliError::config("sweep.stop must not be below sweep.start"));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|k| self.start + k as f64 * self.step).collect())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub n_states: Option<usize>,
    pub energy_window_mev: Option<f64>,
    pub n_amplitudes: Option<usize>,
    pub pocket_threshold: f64,
    /// Levels written by the spectrum mode.
    pub n_levels: usize,
    pub sx_quanta: bool,
    pub eigen: EigenOptions,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            n_states: None,
            energy_window_mev: None,
            n_amplitudes: None,
            pocket_threshold: 0.5,
            n_levels: 10,
            sx_quanta: true,
            eigen: EigenOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DpScanSection {
    pub bx_min: f64,
    pub bx_max: Option<f64>,
    pub resolution: f64,
    /// Constant longitudinal offset (T).
    pub bz_t: f64,
    /// Tilt the scan direction by the effective alpha, so that `B_z` grows with `B_x`.
    pub follow_alpha: bool,
}

impl Default for DpScanSection {
    fn default() -> Self {
        DpScanSection { bx_min: 0.05, bx_max: None, resolution: 0.05, bz_t: 0.0, follow_alpha: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtlasSection {
    pub n: Vec<usize>,
    pub j_over_abs_d: Vec<f64>,
    pub window: f64,
    pub resolution: f64,
}

impl Default for AtlasSection {
    fn default() -> Self {
        AtlasSection {
            n: vec![1, 2, 3],
            j_over_abs_d: vec![0.0, 0.5, 1.0, 5.0, 20.0],
            window: 1.1,
            resolution: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Generator {
    /// Two states switching with the predicted pocket lifetimes.
    #[default]
    TwoState,
    /// Every kept eigenstate, projected onto pockets for the readout.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TelegraphSection {
    pub generator: Generator,
    /// Explicit `(A -> B, B -> A)` rates in 1/s; bypasses the spin model.
    pub rates_per_s: Option<[f64; 2]>,
    pub duration_s: f64,
    pub seed: u64,
    pub sample_rate_hz: f64,
    pub noise_rms_pa: f64,
    pub drift_pa_per_s: f64,
    /// Low and high current levels (pA).
    pub levels_pa: [f64; 2],
    /// Pocket read as the low current.
    pub low_is: Pocket,
    pub min_events: usize,
    pub detect: DetectOptions,
    /// Trace file for analyze-trace.
    pub input: Option<PathBuf>,
    pub write_trace: bool,
}

impl Default for TelegraphSection {
    fn default() -> Self {
        TelegraphSection {
            generator: Generator::TwoState,
            rates_per_s: None,
            duration_s: 100.0,
            seed: 0,
            sample_rate_hz: 1e4,
            noise_rms_pa: 0.2,
            drift_pa_per_s: 0.0,
            levels_pa: [10.0, 11.0],
            low_is: Pocket::A,
            min_events: DEFAULT_MIN_EVENTS,
            detect: DetectOptions::default(),
            input: None,
            write_trace: true,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitCurrentSection {
    /// CSV with columns `label,current_pA,T_avg_s`.
    pub input: Option<PathBuf>,
    pub known_i0_pa: Option<f64>,
    /// Without an input file, simulate `T_avg` at these transverse fields...
    pub bx_list: Vec<f64>,
    /// ...and these currents.
    pub currents_pa: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub format: Format,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out"), format: Format::Csv }
    }
}

/// The file layout; every section is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub mode: Option<Mode>,
    pub preset: Option<String>,
    pub description: Option<String>,
    pub chain: ChainSection,
    pub field: FieldConfig,
    pub sweep: Option<SweepSection>,
    pub transport: TransportParams,
    pub model: ModelSection,
    pub dp_scan: DpScanSection,
    pub atlas: AtlasSection,
    pub telegraph: TelegraphSection,
    pub fit_current: FitCurrentSection,
    pub output: OutputSection,
}

/// Command-line values that replace config keys.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
    /// `section.key=value` pairs, value in TOML syntax (bare words are strings).
    pub set: Vec<String>,
}

/// A validated configuration.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub mode: Mode,
    /// Fully expanded settings, echoed into the manifest.
    pub file: ConfigFile,
    pub chain: Option<ChainSpec>,
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    load_with(Some(path), None, &Overrides::default())
}

/// Reads an optional config file, applies overrides and presets, and validates.
pub fn load_with(path: Option<&Path>, mode: Option<Mode>, ov: &Overrides) -> CliResult<RunConfig> {
    let (text, origin) = match path {
        Some(p) => {
            let t = std::fs::read_to_string(p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?;
            if t.trim().is_empty() {
                return Err(CliError::config(format!("{}: empty config file", p.display())));
            }
            (t, p.display().to_string())
        }
        None => (String::new(), "<command line>".to_string()),
    };
    parse_with(&text, &origin, mode, ov)
}

/// As [`load_with`] on config text.
pub fn parse_with(text: &str, origin: &str, mode: Option<Mode>, ov: &Overrides) -> CliResult<RunConfig> {
    let mut user: toml::Table = toml::from_str(text).map_err(|e| CliError::config(format!("{origin}: {e}")))?;
    toml::from_str::<ConfigFile>(text).map_err(|e| CliError::config(format!("{origin}: {e}")))?;
    apply_overrides(&mut user, ov)?;
    let merged = match user.get("preset") {
        Some(toml::Value::String(name)) => {
            let mut base: toml::Table = toml::from_str(presets::source(name)?)
                .map_err(|e| CliError::config(format!("preset {name}: {e}")))?;
            merge(&mut base, user);
            base
        }
        Some(other) => return Err(CliError::config(format!("preset: expected a string, got {other}"))),
        None => user,
    };
    let file: ConfigFile = toml::Value::Table(merged)
        .try_into()
        .map_err(|e| CliError::config(format!("{origin} (after presets and overrides): {e}")))?;
    validate(file, mode)
}

fn apply_overrides(t: &mut toml::Table, ov: &Overrides) -> CliResult<()> {
    let mut set = |key: &str, value: toml::Value| -> CliResult<()> { set_path(t, key, value) };
    if let Some(p) = &ov.preset {
        set("preset", toml::Value::String(p.clone()))?;
    }
    if let Some(o) = &ov.out {
        set("output.dir", toml::Value::String(o.display().to_string()))?;
    }
    if let Some(s) = ov.seed {
        let s = i64::try_from(s).map_err(|_| CliError::config("seed must fit in a signed 64-bit integer"))?;
        set("telegraph.seed", toml::Value::Integer(s))?;
    }
    if let Some(f) = ov.format {
        let name = match f {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        set("output.format", toml::Value::String(name.into()))?;
    }
    for kv in &ov.set {
        let (key, raw) = kv
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("--set '{kv}': expected key=value")))?;
        let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
            Ok(mut tbl) => tbl.remove("v").expect("parsed key"),
            Err(_) => toml::Value::String(raw.to_string()),
        };
        set(key.trim(), value)?;
    }
    Ok(())
}

fn set_path(t: &mut toml::Table, key: &str, value: toml::Value) -> CliResult<()> {
    let parts: Vec<&str> = key.split('.').collect();
    let (last, parents) = parts.split_last().expect("split yields one part");
    let mut cur = t;
    for p in parents {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::config(format!("override {key}: '{p}' is not a table")))?;
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

/// Deep merge of `top` over `base`; tables merge, everything else replaces.
fn merge(base: &mut toml::Table, top: toml::Table) {
    for (k, v) in top {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn validate(mut file: ConfigFile, mode: Option<Mode>) -> CliResult<RunConfig> {
    if let (Some(m), Some(f)) = (mode, file.mode) {
        if m != f {
            log::info!("mode '{}' from the command line replaces '{}'", m.name(), f.name());
        }
    }
    let mode = mode.or(file.mode).ok_or_else(|| CliError::config("missing required field mode"))?;
    file.mode = Some(mode);
    file.field.validate().map_err(|e| CliError::config(format!("field: {e}")))?;

    let needs_chain = match mode {
        Mode::Spectrum | Mode::DpScan | Mode::LifetimeCurve => true,
        Mode::Atlas | Mode::AnalyzeTrace => false,
        Mode::Telegraph => file.telegraph.rates_per_s.is_none(),
        Mode::FitCurrent => file.fit_current.input.is_none(),
    };
    let chain = if needs_chain || file.chain.is_set() {
        Some(file.chain.build()?)
    } else {
        None
    };
    let needs_transport = matches!(mode, Mode::LifetimeCurve | Mode::FitCurrent | Mode::Telegraph | Mode::AnalyzeTrace);
    if needs_transport && needs_chain {
        file.transport.validate().map_err(|e| CliError::config(format!("transport: {e}")))?;
    }
    if let Some(c) = &chain {
        let n = c.len();
        let mut sites = vec![file.transport.probed_site];
        if let Some(s) = file.sweep.as_ref().and_then(|s| s.probed_sites.clone()) {
            sites.extend(s);
        }
        if let Some(bad) = sites.iter().find(|&&s| s >= n) {
            return Err(CliError::config(format!("probed site {bad} out of range for {n} sites")));
        }
    }
    if let Some(s) = &file.sweep {
        s.values()?;
        if let Some(b) = &s.biases_mv {
            if b.is_empty() {
                return Err(CliError::config("sweep.biases_mv must not be empty"));
            }
        }
    }
    match mode {
        Mode::LifetimeCurve if file.sweep.is_none() => {
            return Err(CliError::config("lifetime-curve needs a [sweep] section"))
        }
        Mode::DpScan => {
            let d = &file.dp_scan;
            let hi = d.bx_max.or(file.sweep.as_ref().map(|s| s.stop));
            match hi {
                Some(h) if h > d.bx_min && d.resolution > 0.0 => {}
                Some(_) => return Err(CliError::config("dp_scan needs bx_max > bx_min and resolution > 0")),
                None => return Err(CliError::config("missing required field dp_scan.bx_max")),
            }
        }
        Mode::Atlas => {
            let a = &file.atlas;
            if a.n.is_empty() || a.j_over_abs_d.is_empty() || !(a.window > 0.0) || !(a.resolution > 0.0) {
                return Err(CliError::config("atlas needs nonempty n and j_over_abs_d, window > 0, resolution > 0"));
            }
        }
        Mode::AnalyzeTrace if file.telegraph.input.is_none() => {
            return Err(CliError::config("missing required field telegraph.input"))
        }
        Mode::Telegraph => {
            let t = &file.telegraph;
            if !(t.duration_s > 0.0) || !(t.sample_rate_hz > 0.0) || !(t.noise_rms_pa >= 0.0) {
                return Err(CliError::config("telegraph needs duration_s > 0, sample_rate_hz > 0, noise_rms_pa >= 0"));
            }
            if let Some(r) = t.rates_per_s {
                if !(r[0] > 0.0 && r[1] > 0.0) {
                    return Err(CliError::config("telegraph.rates_per_s must be positive"));
                }
            }
            if t.low_is == Pocket::Other {
                return Err(CliError::config("telegraph.low_is must be A or B"));
            }
        }
        Mode::FitCurrent => {
            let f = &file.fit_current;
            if f.input.is_none() && (f.bx_list.is_empty() || f.currents_pa.is_empty()) {
                return Err(CliError::config("fit_current needs an input file or both bx_list and currents_pa"));
            }
        }
        _ => {}
    }
    if matches!(mode, Mode::Telegraph | Mode::AnalyzeTrace) {
        file.telegraph.detect.validate().map_err(|e| CliError::config(format!("telegraph.detect: {e}")))?;
    }
    Ok(RunConfig { mode, file, chain })
}

impl RunConfig {
    pub fn chain(&self) -> CliResult<&ChainSpec> {
        self.chain.as_ref().ok_or_else(|| CliError::config("this mode needs a [chain] section"))
    }

    pub fn tip_site(&self) -> TipSite {
        self.file.chain.tip_site
    }

    /// Lifetime model with the probed site and bias replaced.
    pub fn lifetime_model(&self, probed_site: usize, bias_mv: f64) -> CliResult<LifetimeModel> {
        let m = &self.file.model;
        let mut tp = self.file.transport.clone();
        tp.probed_site = probed_site;
        tp.bias_mv = bias_mv;
        Ok(LifetimeModel {
            chain: self.chain()?.clone(),
            tip_site: self.tip_site(),
            transport: tp,
            eigen: m.eigen.clone(),
            pocket_threshold: m.pocket_threshold,
            n_states: m.n_states,
            energy_window_mev: m.energy_window_mev,
            n_amplitudes: m.n_amplitudes,
            with_sx_quanta: false,
        })
    }

    /// Crystal-frame fields along the sweep.
    pub fn sweep_fields(&self) -> CliResult<Vec<Vec3>> {
        let s = self.file.sweep.as_ref().ok_or_else(|| CliError::config("missing [sweep] section"))?;
        let field = self.file.field;
        s.values()?
            .into_iter()
            .map(|b| {
                let v = match s.axis {
                    Axis::Transverse => lab_to_crystal(&FieldConfig { b1: b, ..field }),
                    Axis::Longitudinal => longitudinal_field(b, field.alpha()),
                };
                v.map_err(CliError::from)
            })
            .collect()
    }

    /// The single crystal-frame field of the `[field]` section.
    pub fn point_field(&self) -> CliResult<Vec3> {
        Ok(lab_to_crystal(&self.file.field)?)
    }

    pub fn probed_sites(&self) -> Vec<usize> {
        self.file
            .sweep
            .as_ref()
            .and_then(|s| s.probed_sites.clone())
            .unwrap_or_else(|| vec![self.file.transport.probed_site])
    }

    pub fn biases(&self) -> Vec<f64> {
        self.file
            .sweep
            .as_ref()
            .and_then(|s| s.biases_mv.clone())
            .unwrap_or_else(|| vec![self.file.transport.bias_mv])
    }
}
