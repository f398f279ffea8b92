use diabolo_core::rates::Pocket;
use diabolo_core::telegraph::{
    assign_pockets, detect_switches, fit_dwell_times, project_to_pockets, read_trace, simulate_trajectory,
    synthesize_trace, write_trace, DetectOptions, DwellState, Level, Trajectory,
};
use diabolo_core::{DwellRecord, TelegraphTrace};
use faer::Mat;

fn two_state(ab: f64, ba: f64) -> Mat<f64> {
    Mat::from_fn(2, 2, |f, i| match (f, i) {
        (1, 0) => ab,
        (0, 1) => ba,
        _ => 0.0,
    })
}

/// Exact dwells of a two-state path, edges censored.
fn true_dwells(traj: &Trajectory) -> Vec<DwellRecord> {
    let n = traj.jumps.len();
    traj.jumps
        .iter()
        .enumerate()
        .map(|(k, j)| {
            let end = traj.jumps.get(k + 1).map_or(traj.duration, |x| x.time);
            DwellRecord {
                level: if j.state == 0 { Level::Low } else { Level::High },
                pocket: Some(if j.state == 0 { Pocket::A } else { Pocket::B }),
                duration: end - j.time,
                censored: k == 0 || k + 1 == n,
            }
        })
        .collect()
}

fn noisy_trace(seed: u64, duration: f64, noise: f64) -> (Trajectory, TelegraphTrace) {
    let traj = simulate_trajectory(&two_state(10.0, 30.0), 0, duration, seed).unwrap();
    let trace = synthesize_trace(&traj, &[10.0, 11.0], noise, 1e4, 0.0, seed).unwrap();
    (traj, trace)
}

#[test]
fn noisy_megasample_trace_is_not_double_counted() {
    let (traj, trace) = noisy_trace(21, 100.0, 0.3);
    assert_eq!(trace.samples.len(), 1_000_000);
    let mut dwells = detect_switches(&trace, &DetectOptions::default()).unwrap();
    let truth = traj.jumps.len();
    assert!(dwells.len() <= truth, "{} detected vs {truth} true dwells", dwells.len());
    assert!(dwells.len() as f64 >= 0.9 * truth as f64);
    assign_pockets(&mut dwells, Pocket::A);
    let a = fit_dwell_times(&dwells, DwellState::A, 50).unwrap();
    let b = fit_dwell_times(&dwells, DwellState::B, 50).unwrap();
    assert!((a.mle.t - 0.1).abs() < 0.01, "{}", a.mle.t);
    assert!((b.mle.t - 1.0 / 30.0).abs() < 0.004, "{}", b.mle.t);
}

#[test]
fn detection_is_affine_invariant() {
    let (_, trace) = noisy_trace(3, 20.0, 0.2);
    let base = detect_switches(&trace, &DetectOptions::default()).unwrap();
    let mut scaled = trace.clone();
    scaled.samples.iter_mut().for_each(|x| *x = 2.5 * *x - 7.0);
    let other = detect_switches(&scaled, &DetectOptions::default()).unwrap();
    assert_eq!(base.len(), other.len());
    for (a, b) in base.iter().zip(&other) {
        assert_eq!(a.level, b.level);
        assert!((a.duration - b.duration).abs() < 1e-9);
    }
}

#[test]
fn inverting_the_trace_swaps_levels() {
    let (_, trace) = noisy_trace(5, 20.0, 0.2);
    let base = detect_switches(&trace, &DetectOptions::default()).unwrap();
    let mut flipped = trace.clone();
    flipped.samples.iter_mut().for_each(|x| *x = -*x);
    let other = detect_switches(&flipped, &DetectOptions::default()).unwrap();
    assert_eq!(base.len(), other.len());
    for (a, b) in base.iter().zip(&other) {
        assert_ne!(a.level, b.level);
        assert!((a.duration - b.duration).abs() < 1e-9);
    }
    let mut low_a = base.clone();
    let mut high_a = other.clone();
    assign_pockets(&mut low_a, Pocket::A);
    assign_pockets(&mut high_a, Pocket::B);
    assert!(low_a.iter().zip(&high_a).all(|(x, y)| x.pocket == y.pocket));
}

#[test]
fn censored_exposure_raises_short_trace_estimates() {
    // windows a few lifetimes long, where most long dwells are cut by an edge
    let (mut mle, mut naive, mut used) = (0.0, 0.0, 0);
    for seed in 0..400 {
        let traj = simulate_trajectory(&two_state(1.0, 1.0), 0, 6.0, seed).unwrap();
        let dwells = true_dwells(&traj);
        let fit = fit_dwell_times(&dwells, DwellState::A, 1);
        let closed: Vec<f64> =
            dwells.iter().filter(|d| !d.censored && d.pocket == Some(Pocket::A)).map(|d| d.duration).collect();
        if let (Ok(f), false) = (fit, closed.is_empty()) {
            mle += f.mle.t;
            naive += closed.iter().sum::<f64>() / closed.len() as f64;
            used += 1;
        }
    }
    let (mle, naive) = (mle / used as f64, naive / used as f64);
    assert!(mle >= naive, "censored {mle}, uncensored {naive}");
}

#[test]
fn confidence_interval_covers_truth() {
    let mut covered = 0;
    let runs = 200;
    for seed in 0..runs {
        let traj = simulate_trajectory(&two_state(5.0, 5.0), 0, 40.0, 1000 + seed).unwrap();
        let f = fit_dwell_times(&true_dwells(&traj), DwellState::A, 50).unwrap();
        if f.mle.ci_95.0 <= 0.2 && 0.2 <= f.mle.ci_95.1 {
            covered += 1;
        }
    }
    let rate = covered as f64 / runs as f64;
    assert!((0.90..=0.99).contains(&rate), "coverage {rate}");
}

#[test]
fn occupancy_follows_rates() {
    let traj = simulate_trajectory(&two_state(10.0, 30.0), 0, 2000.0, 8).unwrap();
    let occ = traj.occupancy(2);
    let frac_a = occ[0] / traj.duration;
    assert!((frac_a - 0.75).abs() < 0.01, "{frac_a}");
    assert!(!traj.absorbed);
}

#[test]
fn intermediate_states_collapse_onto_pockets() {
    // A <-> X <-> B with a fast intermediate
    let w = Mat::from_fn(3, 3, |f, i| match (i, f) {
        (0, 1) | (2, 1) => 5.0,
        (1, 0) | (1, 2) => 1000.0,
        _ => 0.0,
    });
    let traj = simulate_trajectory(&w, 0, 50.0, 2).unwrap();
    let labels = [Pocket::A, Pocket::Other, Pocket::B];
    let p = project_to_pockets(&traj, &labels).unwrap();
    assert!(p.jumps.iter().all(|j| j.state < 2));
    assert!(p.jumps.windows(2).all(|w| w[0].state != w[1].state && w[0].time < w[1].time));
    // total time is preserved
    let occ = p.occupancy(2);
    assert!((occ[0] + occ[1] - 50.0).abs() < 1e-9);
}

#[test]
fn trace_file_round_trip() {
    let (_, trace) = noisy_trace(11, 0.5, 0.2);
    let mut buf = Vec::new();
    write_trace(&trace, &mut buf).unwrap();
    let back = read_trace(buf.as_slice()).unwrap();
    assert_eq!(back.samples, trace.samples);
    assert_eq!(back.sample_rate_hz, trace.sample_rate_hz);
    assert_eq!(back.seed, trace.seed);
    assert_eq!(back.levels_pa, trace.levels_pa);
}
