use std::f64::consts::TAU;

use ctclass_core::detector::{detect, overlap_score, tune_alpha, Annotations, DetectorParams};
use ctclass_core::model::{limit_cycle_radii, simulate, CtType, Regimes, SimConfig};
use ctclass_core::Trajectory;

/// Small background oscillation with 0.08-amplitude bursts in the given
/// intervals. Bursts span whole periods so they start and end at zero.
fn recording(bursts: &[(f64, f64)], t_end: f64) -> Trajectory {
    let dt = 0.001;
    let n = (t_end / dt).round() as usize + 1;
    let xs = (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            let amp = if bursts.iter().any(|&(a, b)| (a..b).contains(&t)) { 0.08 } else { 0.02 };
            amp * (TAU * 8.0 * t).sin()
        })
        .collect();
    Trajectory::new(0.0, dt, xs).unwrap()
}

#[test]
fn tuning_picks_the_smallest_alpha_that_scores_best() {
    let bursts = [(20.0, 30.0), (45.0, 53.0), (70.0, 85.0)];
    let tr = recording(&bursts, 100.0);
    let ann = Annotations::new(bursts.to_vec()).unwrap();
    let grid: Vec<f64> = (0..=14).map(|k| (30 + 5 * k) as f64 / 1000.0).collect();
    let sweep = tune_alpha(&tr, &ann, &DetectorParams::for_recording(0.05), &grid).unwrap();
    for &(alpha, score) in &sweep.scores {
        let expected = if alpha < 0.08 { 3 } else { 0 };
        assert_eq!(score, expected, "alpha = {alpha}");
    }
    assert_eq!(sweep.best, 0.03);

    let log = detect(&tr, &DetectorParams::for_recording(sweep.best)).unwrap();
    assert_eq!(log.onsets.len(), 3);
    for (&t1, &(a, _)) in log.onsets.iter().zip(&bursts) {
        assert!((t1 - a).abs() < 0.05, "{t1} vs {a}");
    }
}

/// Intervals where the model state lies outside the unstable cycle `L₋`,
/// merged across short returns and kept when they last at least `min_len`.
fn outside_unstable_cycle(tr: &Trajectory, r_minus: f64, merge: f64, min_len: f64) -> Vec<(f64, f64)> {
    let y = tr.y().unwrap();
    let mut raw: Vec<(f64, f64)> = Vec::new();
    let mut start = None;
    for (i, (&x, &y)) in tr.values().iter().zip(y).enumerate() {
        let out = x.hypot(y) > r_minus;
        match (out, start) {
            (true, None) => start = Some(tr.time(i)),
            (false, Some(s)) => {
                raw.push((s, tr.time(i)));
                start = None;
            }
            _ => {}
        }
    }
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (a, b) in raw {
        match merged.last_mut() {
            Some(last) if a - last.1 < merge => last.1 = b,
            _ => merged.push((a, b)),
        }
    }
    merged.retain(|&(a, b)| b - a >= min_len);
    merged
}

#[test]
fn default_threshold_beats_extremes_on_a_noise_induced_run() {
    let r = Regimes::default();
    let sim = SimConfig {
        t_end: 4000.0,
        seed: 21,
        ..SimConfig::default()
    };
    let p = r.params(CtType::Nct);
    let tr = simulate(&p, &r.path(CtType::Nct), &sim).unwrap();
    let r_minus = limit_cycle_radii(r.nct_mu, p.s).unwrap().r_minus.unwrap();
    let ann = Annotations::new(outside_unstable_cycle(&tr, r_minus, 1.0, 2.0)).unwrap();
    assert!(ann.len() > 5);
    let x = Trajectory::new(tr.t0(), tr.dt(), tr.values().to_vec()).unwrap();
    let score = |alpha: f64| {
        // Keep the model-scale gap α − β = 0.1.
        let p = DetectorParams {
            alpha,
            beta: alpha - 0.1,
            ..DetectorParams::default()
        };
        let log = detect(&x, &p).unwrap();
        let rep = overlap_score(&log, &ann, 0.0);
        (rep.score(), log.onsets.len())
    };
    let (mid, low, high) = (score(0.55), score(0.3), score(0.8));
    println!("annotated {}, alpha 0.3 {low:?}, 0.55 {mid:?}, 0.8 {high:?}", ann.len());
    assert_eq!(mid, (ann.len() as i64, ann.len()));
    assert!(mid.0 > low.0);
    assert!(mid.0 >= high.0);
}
