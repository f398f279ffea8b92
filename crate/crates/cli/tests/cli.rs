use std::path::Path;
use std::process::{Command, Output};

use diabolo_cli::{parse_with, run, Format, Mode, Overrides};
use diabolo_core::telegraph::{simulate_trajectory, synthesize_trace, write_trace};
use diabolo_core::TipSite;
use faer::Mat;

fn diabolo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diabolo")).args(args).output().expect("binary runs")
}

fn with_preset(name: &str, mode: Mode, set: &[&str]) -> diabolo_cli::CliResult<diabolo_cli::RunConfig> {
    let ov = Overrides {
        preset: Some(name.into()),
        set: set.iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    };
    parse_with("", "<test>", Some(mode), &ov)
}

/// Rows of a CSV keyed by the first column.
fn csv_column(path: &Path, key: &str, col: usize) -> Option<f64> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .find(|c| c[0] == key)
        .and_then(|c| c[col].parse().ok())
}

fn two_state_trace(path: &Path, seed: u64, noise: f64) {
    let w = Mat::from_fn(2, 2, |f, i| match (f, i) {
        (1, 0) => 10.0,
        (0, 1) => 30.0,
        _ => 0.0,
    });
    let traj = simulate_trajectory(&w, 0, 40.0, seed).unwrap();
    let trace = synthesize_trace(&traj, &[10.0, 11.0], noise, 1e4, 0.0, seed).unwrap();
    write_trace(&trace, std::fs::File::create(path).unwrap()).unwrap();
}

#[test]
fn presets_are_listed() {
    let out = diabolo(&["presets"]);
    assert!(out.status.success());
    let names = String::from_utf8(out.stdout).unwrap();
    for p in ["fe1-fig1a", "fe5-afm-fig2d", "fe5-afm-fig2e", "fe6-afm-fig3a", "fe5-fm-fig3b"] {
        assert!(names.lines().any(|l| l == p), "{p} missing from {names}");
    }
}

#[test]
fn afm_preset_expands() {
    let cfg = with_preset("fe5-afm-fig2d", Mode::LifetimeCurve, &[]).unwrap();
    let chain = cfg.chain().unwrap();
    assert_eq!(chain.len(), 5);
    assert!(chain.is_antiferromagnetic());
    assert_eq!(cfg.tip_site(), TipSite::Index(0));
    assert_eq!(cfg.file.transport.temperature_k, 3.0);
    assert_eq!(cfg.file.transport.rate_scale, 1.15e-2);
    assert_eq!(cfg.probed_sites(), vec![0, 1, 2]);
    let fields = cfg.sweep_fields().unwrap();
    assert_eq!(fields.len(), 81);
    assert!((fields[0][0] - 2.0 * (0.2f64).to_radians().cos()).abs() < 1e-12);
    // only site 0 carries the tip field
    assert!(chain.sites()[0].tip_field.iter().any(|&b| b != 0.0));
    assert!(chain.sites()[1..].iter().all(|s| s.tip_field == [0.0; 3]));
}

#[test]
fn fm_preset_expands() {
    let cfg = with_preset("fe5-fm-fig3b", Mode::DpScan, &[]).unwrap();
    let chain = cfg.chain().unwrap();
    assert!(!chain.is_antiferromagnetic());
    assert!(chain.couplings().iter().all(|&j| j == -0.95));
    assert_eq!(cfg.file.dp_scan.bx_min, 0.5);
    assert_eq!(cfg.file.dp_scan.bx_max, Some(7.0));
}

#[test]
fn set_overrides_preset_values() {
    let cfg = with_preset(
        "fe5-afm-fig2d",
        Mode::LifetimeCurve,
        &["transport.bias_mv=5", "sweep.probed_sites=[2]", "output.format=json"],
    )
    .unwrap();
    assert_eq!(cfg.biases(), vec![5.0]);
    assert_eq!(cfg.probed_sites(), vec![2]);
    assert_eq!(cfg.file.output.format, Format::Json);
}

#[test]
fn config_text_wins_over_preset() {
    let text = "preset = \"fe5-afm-fig2d\"\n[transport]\ntemperature_k = 1.4\n";
    let cfg = parse_with(text, "inline", Some(Mode::LifetimeCurve), &Overrides::default()).unwrap();
    assert_eq!(cfg.file.transport.temperature_k, 1.4);
    assert_eq!(cfg.file.transport.current_pa, 10.0);
}

#[test]
fn unknown_key_is_reported_with_its_line() {
    let text = "[transport]\ntemperature_k = 1.3\nbias_volts = 3.0\n";
    let err = parse_with(text, "run.toml", Some(Mode::LifetimeCurve), &Overrides::default()).unwrap_err();
    let msg = err.to_string();
    assert_eq!(err.exit_code(), 1);
    assert!(msg.contains("bias_volts") && msg.contains("line 3"), "{msg}");
}

#[test]
fn unknown_preset_is_a_config_error() {
    let err = with_preset("fe9-imaginary", Mode::Spectrum, &[]).unwrap_err();
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn empty_config_file_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.toml");
    std::fs::write(&path, "  \n").unwrap();
    let out = diabolo(&["spectrum", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty"));
}

#[test]
fn missing_trace_exits_with_io_code() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.txt");
    let out = diabolo(&[
        "analyze-trace",
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        &format!("telegraph.input=\"{}\"", missing.display()),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn pure_noise_trace_exits_with_data_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("noise.txt");
    let mut body = String::from("sample_rate_hz=1000\n");
    let mut x: u64 = 12345;
    for _ in 0..5000 {
        x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        body.push_str(&format!("{}\n", (x >> 11) as f64 / (1u64 << 53) as f64));
    }
    std::fs::write(&path, body).unwrap();
    let out = diabolo(&[
        "analyze-trace",
        "--out",
        dir.path().join("out").to_str().unwrap(),
        "--set",
        &format!("telegraph.input=\"{}\"", path.display()),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn analyze_trace_recovers_lifetimes() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.txt");
    two_state_trace(&trace, 4, 0.2);
    let out_dir = dir.path().join("out");
    let out = diabolo(&[
        "analyze-trace",
        "--out",
        out_dir.to_str().unwrap(),
        "--set",
        &format!("telegraph.input=\"{}\"", trace.display()),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = out_dir.join("trace_analysis.csv");
    let t_a = csv_column(&summary, "T_A_s", 1).unwrap();
    let t_b = csv_column(&summary, "T_B_s", 1).unwrap();
    assert!((t_a - 0.1).abs() < 0.015, "T_A {t_a}");
    assert!((t_b - 1.0 / 30.0).abs() < 0.005, "T_B {t_b}");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["mode"], "analyze-trace");
    assert_eq!(manifest["derived"]["trace_sample_rate_hz"], 1e4);
    let dwells = std::fs::read_to_string(out_dir.join("dwells.csv")).unwrap();
    assert_eq!(dwells.lines().next(), Some("state,duration_s,censored"));
}

#[test]
fn telegraph_seed_controls_output() {
    let dir = tempfile::tempdir().unwrap();
    let trace_of = |name: &str, seed: &str| {
        let out_dir = dir.path().join(name);
        let out = diabolo(&[
            "telegraph",
            "--out",
            out_dir.to_str().unwrap(),
            "--seed",
            seed,
            "--set",
            "telegraph.rates_per_s=[10.0, 30.0]",
            "--set",
            "telegraph.duration_s=20.0",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(out_dir.join("trace.txt")).unwrap()
    };
    let a = trace_of("a", "5");
    assert_eq!(a, trace_of("b", "5"));
    assert_ne!(a, trace_of("c", "6"));
}

#[test]
fn fit_current_reads_csv() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("series.csv");
    let (r_o, i0) = (0.02, 80.0);
    let mut body = String::from("label,current_pA,T_avg_s\n");
    for (label, r_t) in [(3.5, 3e-3), (4.1, 2e-5)] {
        for i in [5.0, 20.0, 80.0, 300.0] {
            body.push_str(&format!("{label},{i},{}\n", 1.0 / (i * (r_o + r_t) + i0 * r_t)));
        }
    }
    std::fs::write(&input, body).unwrap();
    let ov = Overrides {
        out: Some(dir.path().join("out")),
        set: vec![format!("fit_current.input=\"{}\"", input.display())],
        ..Default::default()
    };
    let cfg = parse_with("", "<test>", Some(Mode::FitCurrent), &ov).unwrap();
    run(&cfg).unwrap();
    let fit = dir.path().join("out").join("current_fit.csv");
    assert!((csv_column(&fit, "r_O", 2).unwrap() - r_o).abs() < 1e-6 * r_o);
    assert!((csv_column(&fit, "I0_pA", 2).unwrap() - i0).abs() < 1e-6 * i0);
}

#[test]
fn single_series_fit_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("series.csv");
    std::fs::write(&input, "1,10,0.5\n1,20,0.3\n1,40,0.2\n").unwrap();
    let out = diabolo(&[
        "fit-current",
        "--out",
        dir.path().join("out").to_str().unwrap(),
        "--set",
        &format!("fit_current.input=\"{}\"", input.display()),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn json_spectrum_is_well_formed() {
    let dir = tempfile::tempdir().unwrap();
    let out = diabolo(&[
        "spectrum",
        "--preset",
        "fe1-fig1a",
        "--format",
        "json",
        "--out",
        dir.path().to_str().unwrap(),
        "--set",
        "field.b1=0.0",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("spectrum.json")).unwrap()).unwrap();
    let rows = doc["rows"].as_array().unwrap();
    assert!(!rows.is_empty());
    assert!(doc["columns"].as_array().unwrap().len() >= 2);
}
