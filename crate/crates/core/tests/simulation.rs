use rand::Rng;
use relaylab::numerics::SeedSpec;
use relaylab::simulator::{
    fit_slope, run_point, run_point_adaptive, run_sweep, run_sweep_with_threads, trial_outage, trial_stream, wilson_interval, AdaptiveStop,
    CurvePoint, OutageCurve, OutageMode, SweepSpec, SystemTemplate, Z_95,
};
use relaylab::Error;

fn template(n_s: usize, n_r: usize, n_d: usize, rate: f64) -> SystemTemplate {
    SystemTemplate {
        n_s,
        n_r,
        n_d,
        rate_bpcu: rate,
        p_r: None,
    }
}

fn spec(t: SystemTemplate, grid: &[f64], trials: u64, mode: OutageMode) -> SweepSpec {
    SweepSpec {
        config: t,
        snr_grid_db: grid.to_vec(),
        trials_per_point: trials,
        adaptive: None,
        outage_mode: mode,
        master_seed: 2024,
    }
}

#[test]
fn zero_rate_is_never_in_outage() {
    let cfg = template(2, 2, 2, 0.0).at_snr_db(10.0).unwrap();
    let count = run_point(&cfg, 0, 10_000, OutageMode::Exact, 3).unwrap();
    assert_eq!(count.outages, 0);
}

#[test]
fn bound_count_dominates_exact_count_on_shared_seeds() {
    let cfg = template(2, 2, 2, 2.0).at_snr_db(10.0).unwrap();
    let mut exact = 0;
    let mut bound = 0;
    for t in 0..20_000 {
        let seed = SeedSpec::new(5, trial_stream(0, t));
        let e = trial_outage(&cfg, OutageMode::Exact, seed).unwrap();
        let b = trial_outage(&cfg, OutageMode::Bound, seed).unwrap();
        assert!(!e || b, "trial {t}: exact outage without bound outage");
        exact += e as u64;
        bound += b as u64;
    }
    assert!(exact <= bound && exact > 0);
}

#[test]
fn very_high_snr_low_rate_has_no_outage() {
    let cfg = template(2, 2, 2, 0.42).at_snr_db(60.0).unwrap();
    assert_eq!(run_point(&cfg, 0, 100_000, OutageMode::Bound, 9).unwrap().outages, 0);
}

#[test]
fn separate_encoding_is_no_better_than_joint() {
    let cfg = template(2, 2, 2, 2.0).at_snr_db(10.0).unwrap();
    let joint = run_point(&cfg, 0, 5_000, OutageMode::Exact, 4).unwrap().outages;
    let separate = run_point(&cfg, 0, 5_000, OutageMode::Separate, 4).unwrap().outages;
    assert!(separate >= joint, "separate {separate} < joint {joint}");
}

#[test]
fn single_point_sweep_matches_run_point() {
    let s = spec(template(2, 2, 2, 2.0), &[10.0], 5_000, OutageMode::Bound);
    let curve = run_sweep(&s).unwrap();
    let direct = run_point(&s.config.at_snr_db(10.0).unwrap(), 0, 5_000, OutageMode::Bound, s.master_seed).unwrap();
    assert_eq!(curve.points[0].outages, direct.outages);
    assert_eq!(curve.points[0].trials, 5_000);
}

#[test]
fn sweeps_are_reproducible_and_thread_invariant() {
    let s = spec(template(2, 2, 2, 2.0), &[5.0, 10.0, 15.0], 20_000, OutageMode::Bound);
    let a = run_sweep_with_threads(&s, 1).unwrap();
    let b = run_sweep_with_threads(&s, 4).unwrap();
    let c = run_sweep_with_threads(&s, 3).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c);
    let exact = SweepSpec {
        outage_mode: OutageMode::Exact,
        trials_per_point: 2_000,
        ..s.clone()
    };
    assert_eq!(run_sweep_with_threads(&exact, 1).unwrap(), run_sweep_with_threads(&exact, 2).unwrap());
}

#[test]
fn adding_grid_points_does_not_perturb_earlier_ones() {
    let short = run_sweep(&spec(template(2, 2, 1, 2.0), &[5.0, 10.0], 5_000, OutageMode::Bound)).unwrap();
    let long = run_sweep(&spec(template(2, 2, 1, 2.0), &[5.0, 10.0, 15.0], 5_000, OutageMode::Bound)).unwrap();
    assert_eq!(short.points[..], long.points[..2]);
}

#[test]
fn outage_decreases_with_snr_at_high_rate() {
    let curve = run_sweep(&spec(template(2, 2, 2, 2.0), &[5.0, 10.0, 15.0, 20.0, 25.0], 1_000_000, OutageMode::Bound)).unwrap();
    for w in curve.points.windows(2) {
        assert!(w[1].p_out < w[0].p_out, "{:?}", curve.points);
    }
    for p in &curve.points {
        assert!(0.0 <= p.ci_low && p.ci_low <= p.p_out && p.p_out <= p.ci_high && p.ci_high <= 1.0);
        assert!(p.outages <= p.trials);
    }
}

#[test]
fn adaptive_points_stop_at_target_or_cap() {
    let cfg = template(2, 2, 2, 2.0).at_snr_db(10.0).unwrap();
    let c = run_point_adaptive(&cfg, 0, 1_000_000, 200, OutageMode::Bound, 1).unwrap();
    assert!(c.outages >= 200 && c.trials < 1_000_000);
    // prefix property: the adaptive count equals a fixed run of the same length
    assert_eq!(run_point(&cfg, 0, c.trials, OutageMode::Bound, 1).unwrap().outages, c.outages);
    let capped = run_point_adaptive(&template(2, 2, 2, 0.42).at_snr_db(40.0).unwrap(), 0, 50_000, 200, OutageMode::Bound, 1).unwrap();
    assert_eq!(capped.trials, 50_000);

    let s = SweepSpec {
        adaptive: Some(AdaptiveStop { target_outages: 50 }),
        ..spec(template(2, 2, 2, 2.0), &[5.0, 10.0], 200_000, OutageMode::Bound)
    };
    let curve = run_sweep(&s).unwrap();
    assert!(curve.points.iter().all(|p| p.outages >= 50 && p.trials <= 200_000));
}

#[test]
fn invalid_specs_are_rejected() {
    let good = spec(template(2, 2, 2, 2.0), &[5.0, 10.0], 1000, OutageMode::Bound);
    assert!(good.validate().is_ok());
    let bad = [
        SweepSpec { trials_per_point: 0, ..good.clone() },
        SweepSpec { trials_per_point: 99, ..good.clone() },
        SweepSpec { snr_grid_db: vec![10.0, 5.0], ..good.clone() },
        SweepSpec { snr_grid_db: vec![5.0, 5.0], ..good.clone() },
        SweepSpec { snr_grid_db: vec![], ..good.clone() },
        SweepSpec { config: template(0, 2, 2, 1.0), ..good.clone() },
        SweepSpec { config: template(2, 2, 2, -1.0), ..good.clone() },
    ];
    for s in bad {
        assert!(matches!(run_sweep(&s), Err(Error::InvalidConfig(_))), "{s:?}");
    }
}

#[test]
fn wilson_reference_and_coverage() {
    // reference from an independent implementation
    let (lo, hi) = wilson_interval(10, 100, Z_95);
    assert!((lo - 0.05522913706067509).abs() < 1e-12);
    assert!((hi - 0.17436566150491348).abs() < 1e-12);
    assert_eq!(wilson_interval(0, 100, Z_95).0, 0.0);
    assert_eq!(wilson_interval(100, 100, Z_95).1, 1.0);

    let mut rng = SeedSpec::new(77, 0).rng();
    let reps = 10_000;
    let covered = (0..reps)
        .filter(|_| {
            let k = (0..1000).filter(|_| rng.random::<f64>() < 0.1).count() as u64;
            let (lo, hi) = wilson_interval(k, 1000, Z_95);
            lo <= 0.1 && 0.1 <= hi
        })
        .count();
    let rate = covered as f64 / reps as f64;
    assert!((0.94..=0.96).contains(&rate), "coverage {rate}");
}

fn synthetic(f: impl Fn(f64) -> f64, grid: &[f64]) -> OutageCurve {
    let trials = 1u64 << 40;
    OutageCurve {
        points: grid
            .iter()
            .map(|&db| {
                let p = f(10f64.powf(db / 10.0));
                CurvePoint {
                    snr_db: db,
                    p_out: p,
                    trials,
                    outages: (p * trials as f64).round() as u64,
                    ci_low: p,
                    ci_high: p,
                }
            })
            .collect(),
        mode: OutageMode::Bound,
        config_echo: template(2, 2, 2, 2.0),
    }
}

#[test]
fn slope_of_exact_power_laws() {
    let grid = [0.0, 5.0, 10.0, 15.0, 20.0];
    let fit = fit_slope(&synthetic(|r| r.powi(-3), &grid), 20).unwrap();
    assert!((fit.d_hat - 3.0).abs() < 1e-9);
    assert!(fit.residual < 1e-18);
    assert_eq!(fit.d_theory, 1);
    let fit = fit_slope(&synthetic(|r| 5.0 / r, &grid), 20).unwrap();
    assert!((fit.d_hat - 1.0).abs() < 1e-9);
    assert!((fit.intercept - 5f64.log10()).abs() < 1e-9);
}

#[test]
fn slope_window_is_the_highest_usable_run() {
    let mut curve = synthetic(|r| r.powi(-2), &[0.0, 5.0, 10.0, 15.0, 20.0, 25.0]);
    curve.points[1].outages = 3; // starved point splits the grid
    curve.points[5].outages = 0;
    let fit = fit_slope(&curve, 20).unwrap();
    assert_eq!(fit.window, vec![10.0, 15.0, 20.0]);

    curve.points[3].outages = 0;
    match fit_slope(&curve, 20) {
        Err(Error::FitInfeasible { usable, required, counts }) => {
            assert_eq!((usable, required), (1, 3));
            assert_eq!(counts.len(), 6);
        }
        other => panic!("expected infeasible fit, got {other:?}"),
    }
}
