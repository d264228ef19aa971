use ctclass_core::detector::{detect, DetectorParams, EventLog, RelayDetector};
use ctclass_core::features::{feature_track, gaussian_variance, lag1_autocorr, WindowConfig};
use ctclass_core::model::{limit_cycle_radii, simulate, ModelParams, ParameterPath, SimConfig, Simulator};
use ctclass_core::Trajectory;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn quiet(s: f64, sigma: f64, omega: f64, gamma: f64) -> ModelParams {
    ModelParams {
        s,
        sigma: if s == 0.0 { 0.0 } else { s.signum() * sigma.abs() },
        nu: 0.0,
        omega,
        gamma,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn radii_solve_the_radial_equation(mu in -3.0f64..3.0, s in -3.0f64..3.0) {
        if let Some(r) = limit_cycle_radii(mu, s) {
            for x in std::iter::once(r.r_plus).chain(r.r_minus) {
                let x2 = x * x;
                let scale = mu.abs().max((s * x2).abs()).max(x2 * x2);
                prop_assert!((mu + s * x2 - x2 * x2).abs() <= 1e-12 * scale, "mu {mu} s {s} r {x}");
                prop_assert!(x > 0.0);
            }
            if let Some(rm) = r.r_minus {
                prop_assert!(rm < r.r_plus);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    /// One Euler step moves the radius like a step of the radial equation
    /// followed by the rotational inflation: `r' = sqrt(A² + (r θ' dt)²)`
    /// with `A` the radial Euler update, so the per-step gap is O(dt²).
    #[test]
    fn radial_dynamics_match_per_step(
        mu in -1.0f64..0.5, s in -1.0f64..1.5, sigma in 0.0f64..2.0,
        omega in 0.0f64..2.0, gamma in 1.0f64..10.0, theta in 0.0f64..6.283,
    ) {
        let p = quiet(s, sigma, omega, gamma);
        let cfg = SimConfig { t_end: 2.0, x0: 0.7 * theta.cos(), y0: 0.7 * theta.sin(), ..SimConfig::default() };
        let dt = cfg.dt;
        let mut sim = Simulator::new(p, ParameterPath::constant(mu), &cfg).unwrap();
        let (mut x, mut y) = (cfg.x0, cfg.y0);
        for _ in 0..2000 {
            let r = x.hypot(y);
            let r1d = r + dt * gamma * r * (mu + s * r * r - r.powi(4));
            let spin = gamma * (omega + s * p.sigma * r * r);
            let (nx, ny) = sim.advance().unwrap();
            let r2d = nx.hypot(ny);
            let b = r * spin * dt;
            prop_assert!((r2d - r1d.hypot(b)).abs() <= 1e-14, "r2d {r2d} r1d {r1d}");
            prop_assert!(r2d - r1d >= 0.0 && r2d - r1d <= b * b / r1d.abs(), "r2d {r2d} r1d {r1d}");
            x = nx;
            y = ny;
        }
    }

    #[test]
    fn origin_stability_follows_mu(mu_neg in -2.0f64..-0.05, mu_pos in 0.05f64..1.0, s in -1.0f64..1.0) {
        let cfg = SimConfig { t_end: 5.0, x0: 1e-3, y0: 0.0, ..SimConfig::default() };
        let p = quiet(s, 1.0, 1.3, 10.0);
        let decay = simulate(&p, &ParameterPath::constant(mu_neg), &cfg).unwrap();
        prop_assert!(*decay.radius().unwrap().last().unwrap() < 1e-3);
        let cfg = SimConfig { t_end: 0.5, ..cfg };
        let grow = simulate(&p, &ParameterPath::constant(mu_pos), &cfg).unwrap();
        prop_assert!(*grow.radius().unwrap().last().unwrap() > 1e-3);
    }

    #[test]
    fn simulation_is_a_pure_function(seed in any::<u64>()) {
        let cfg = SimConfig { t_end: 1.0, seed, ..SimConfig::default() };
        let p = ModelParams::default();
        let a = simulate(&p, &ParameterPath::constant(-0.22), &cfg).unwrap();
        let b = simulate(&p, &ParameterPath::constant(-0.22), &cfg).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn increment_variance_without_drift() {
    let nu = 0.18;
    // Drift scaled down until it is negligible against the noise.
    let p = ModelParams { gamma: 1e-12, nu, ..ModelParams::default() };
    let cfg = SimConfig { t_end: 1000.0, seed: 7, ..SimConfig::default() };
    let tr = simulate(&p, &ParameterPath::constant(-0.22), &cfg).unwrap();
    for series in [tr.values(), tr.y().unwrap()] {
        let inc: Vec<f64> = series.windows(2).map(|w| w[1] - w[0]).collect();
        let n = inc.len() as f64;
        let mean = inc.iter().sum::<f64>() / n;
        let var = inc.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let expected = nu * nu * cfg.dt;
        let se = expected * (2.0 / (n - 1.0)).sqrt();
        assert!((var - expected).abs() < 3.0 * se, "var {var} expected {expected} se {se}");
    }
}

/// Noisy background with bursts of random length and amplitude, and the
/// occasional jump.
fn bursty_signal(seed: u64, n: usize) -> Trajectory {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dt = 0.001;
    let mut xs = Vec::with_capacity(n);
    let mut in_burst = false;
    let mut left = rng.random_range(3000..12000);
    let mut amp = 0.9;
    let mut phase = 0.0f64;
    while xs.len() < n {
        if left == 0 {
            in_burst = !in_burst;
            left = if in_burst { rng.random_range(300..9000) } else { rng.random_range(500..12000) };
            amp = rng.random_range(0.5..1.0);
        }
        left -= 1;
        phase += 40.0 * dt;
        let noise: f64 = rng.random_range(-0.08..0.08);
        let mut v = if in_burst { amp * phase.sin() + noise } else { 0.3 * noise + 0.1 * (7.0 * phase).sin() };
        if rng.random_bool(2e-5) {
            v += 0.6;
        }
        xs.push(v);
    }
    Trajectory::new(0.0, dt, xs).unwrap()
}

fn check_log(log: &EventLog, p: &DetectorParams) -> Result<(), TestCaseError> {
    let eps = 1e-9;
    prop_assert!(log.onsets.len() == log.offsets.len() || log.onsets.len() == log.offsets.len() + 1);
    for (i, &t1) in log.onsets.iter().enumerate() {
        if let Some(&t2) = log.offsets.get(i) {
            prop_assert!(t2 >= t1 + p.tau_s - eps, "S interval [{t1}, {t2}] shorter than tau_s");
            if let Some(&next) = log.onsets.get(i + 1) {
                prop_assert!(next >= t2 + p.tau_ns - eps, "NS gap [{t2}, {next}] shorter than tau_ns");
            }
        }
    }
    // S stretches hold no onset-side records and NS stretches no offset-side ones.
    let in_s = |t: f64| log.intervals().any(|(a, b)| t > a && b.is_none_or(|b| t < b));
    for &t in log.almost_onsets.iter().chain(log.artefacts.iter().map(|(a, _)| a)) {
        prop_assert!(!in_s(t), "NS-side record at {t} inside an S interval");
    }
    for &t in &log.almost_offsets {
        prop_assert!(in_s(t), "almost-offset at {t} outside every S interval");
    }
    prop_assert!(log.t_start >= 0.0 && log.t_end >= log.t_start);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn detector_invariants(seed in any::<u64>(), chunk in 1usize..5000) {
        let tr = bursty_signal(seed, 120_000);
        let p = DetectorParams::default();
        let log = detect(&tr, &p).unwrap();
        check_log(&log, &p)?;

        let mut det = RelayDetector::new(p, 0.0).unwrap();
        for c in tr.values().chunks(chunk) {
            det.push(c);
        }
        let (_, streamed) = det.finish().unwrap();
        prop_assert_eq!(&streamed, &log);
        prop_assert_eq!(detect(&tr, &p).unwrap(), log);
    }

    /// On isolated bursts (every gap longer than τ_NS + τ_w, no lulls inside
    /// a burst) a higher on-threshold can only drop transitions.
    #[test]
    fn raising_alpha_on_isolated_bursts(
        bursts in prop::collection::vec((0.5f64..1.0, 500usize..6000, 6500usize..12000), 1..8),
        lo in 0.5f64..0.8, step in 0.01f64..0.2,
    ) {
        let mut xs = vec![0.0; 6000];
        let mut phase = 0.0f64;
        for &(amp, len, gap) in &bursts {
            // Whole periods only, so bursts start and end at zero.
            let period = (2.0 * std::f64::consts::PI / 0.04).round() as usize;
            let len = len / period * period + period;
            for _ in 0..len {
                phase += 0.04;
                xs.push(amp * phase.sin());
            }
            xs.extend(std::iter::repeat_n(0.0, gap));
        }
        let tr = Trajectory::new(0.0, 0.001, xs).unwrap();
        let base = DetectorParams::default();
        let a = detect(&tr, &DetectorParams { alpha: lo, ..base }).unwrap();
        let b = detect(&tr, &DetectorParams { alpha: lo + step, ..base }).unwrap();
        prop_assert!(b.onsets.len() <= a.onsets.len());
        // A higher threshold is crossed later within the same burst.
        prop_assert!(b.onsets.iter().all(|t| a.onsets.iter().any(|u| t >= u && t - u < 2.0)));
    }

    #[test]
    fn feature_definition_offsets(tw_k in 2usize..20, tm_extra in 1usize..60, seed in any::<u64>()) {
        let cfg = WindowConfig { t_w: tw_k as f64 * 0.1, t_m: (tw_k + tm_extra) as f64 * 0.1, ..WindowConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<f64> = (0..30_000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let tr = Trajectory::new(0.0, 0.001, xs).unwrap();
        let (t_minus, t_plus) = (-20.0, 5.0);
        let ft = feature_track(&tr, 22.0, t_minus, t_plus, &cfg).unwrap();
        let tol = 1e-9;
        prop_assert!((ft.tsp_time(0) - (t_minus + cfg.t_w)).abs() < tol);
        for i in 0..8 {
            let from = ft.defined_from(i);
            let expected = match i {
                0..=2 => t_minus + cfg.t_w,
                3 => t_minus + 2.0 * cfg.t_w,
                4..=6 => t_minus + cfg.t_w + cfg.t_m,
                _ => t_minus + 2.0 * cfg.t_w + cfg.t_m,
            };
            prop_assert!((from - expected).abs() < tol);
            if i < 4 {
                prop_assert!(ft.value(i, from).is_ok());
                prop_assert!(ft.value(i, from - 0.001).is_err());
            } else {
                // First slope grid point at or after the definition time.
                let first = (from / cfg.dm - 1e-9).ceil() * cfg.dm;
                prop_assert!(ft.value(i, first).is_ok(), "feature {i} at {first}");
                prop_assert!(ft.value(i, first - cfg.dm).is_err());
            }
        }
    }

    #[test]
    fn gv_sign_and_ac_affine_invariance(seed in any::<u64>(), a in 0.1f64..10.0, b in -5.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = 0.0;
        let xs: Vec<f64> = (0..3000).map(|_| { v = 0.9 * v + rng.random_range(-1.0..1.0); v }).collect();
        let tr = Trajectory::new(0.0, 0.001, xs.clone()).unwrap();
        let flipped = tr.with_values(xs.iter().map(|x| -x).collect()).unwrap();
        let affine = tr.with_values(xs.iter().map(|x| a * x + b).collect()).unwrap();
        let t = 2.5;
        let g = gaussian_variance(&tr, t, 1.0).unwrap();
        prop_assert!((gaussian_variance(&flipped, t, 1.0).unwrap() - g).abs() <= 1e-12 * g);
        let ac = lag1_autocorr(&tr, t, 1.0, 0.001).unwrap();
        let ac2 = lag1_autocorr(&affine, t, 1.0, 0.001).unwrap();
        prop_assert!((ac - ac2).abs() < 1e-9, "{ac} vs {ac2}");
    }
}

/// With the on-threshold also bounding the quiet stretch after an offset
/// candidate, a higher α can confirm an offset that a lower α rejects and so
/// split one S episode into two. Onset counts are therefore not monotone in α.
#[test]
fn alpha_monotonicity_counterexample() {
    let dt = 0.001;
    let mut xs = vec![0.0; 5000];
    let mut phase = 0.0f64;
    let mut burst = |xs: &mut Vec<f64>, amp: f64, secs: f64| {
        for _ in 0..(secs / dt) as usize {
            phase += 0.04;
            xs.push(amp * phase.sin());
        }
    };
    burst(&mut xs, 0.9, 3.0);
    xs.extend(std::iter::repeat_n(0.0, 2000));
    // Peaks between the two thresholds tried below.
    burst(&mut xs, 0.7, 4.0);
    xs.extend(std::iter::repeat_n(0.0, 1000));
    burst(&mut xs, 0.9, 3.0);
    xs.extend(std::iter::repeat_n(0.0, 8000));
    let tr = Trajectory::new(0.0, dt, xs).unwrap();
    let base = DetectorParams::default();
    let low = detect(&tr, &DetectorParams { alpha: 0.6, ..base }).unwrap();
    let high = detect(&tr, &DetectorParams { alpha: 0.8, ..base }).unwrap();
    assert_eq!(low.onsets.len(), 1, "{low:?}");
    assert_eq!(high.onsets.len(), 2, "{high:?}");
}
