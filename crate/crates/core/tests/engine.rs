use proptest::prelude::*;
use retrowpt_core::experiments::{run_sweep, to_csv, SweepSpec, SweepVariable};
use retrowpt_core::*;

fn balanced(ns: usize, k: usize, ts: f64) -> SystemParams {
    let mut p = SystemParams::with_defaults(ns, ns * k);
    p.ts = ts;
    p.tc = ts / k as f64;
    p
}

fn experiment(params: SystemParams, scenario: Scenario, path: Path) -> Experiment {
    Experiment {
        params,
        harvester: HarvesterModel::default(),
        scenario,
        path,
    }
}

#[test]
fn config_round_trip_drives_identical_runs() {
    let p = balanced(3, 4, 10e-6);
    let text = to_config_string(&p, &HarvesterModel::default());
    let (q, h) = load_config(&text).unwrap();
    assert_eq!(p, q);
    let opts = RunOptions::default();
    let a = run_trials(
        &experiment(p, Scenario::Balanced, Path::Exact),
        100,
        3,
        &opts,
    )
    .unwrap();
    let b = run_trials(
        &Experiment {
            harvester: h,
            ..experiment(q, Scenario::Balanced, Path::Exact)
        },
        100,
        3,
        &opts,
    )
    .unwrap();
    assert_eq!(a, b);
}

#[test]
fn balanced_beats_pn() {
    let opts = RunOptions::default();
    let pn = run_trials(
        &experiment(
            SystemParams::with_defaults(4, 40),
            Scenario::Pn,
            Path::Exact,
        ),
        500,
        1,
        &opts,
    )
    .unwrap();
    let bal = run_trials(
        &experiment(balanced(4, 10, 5e-6), Scenario::Balanced, Path::Exact),
        500,
        1,
        &opts,
    )
    .unwrap();
    assert!(
        bal.mean_q > 5.0 * pn.mean_q,
        "{} vs {}",
        bal.mean_q,
        pn.mean_q
    );
    assert!(pn.mean_magnitude_ratio.unwrap() > 1.0);
    assert_eq!(bal.mean_magnitude_ratio, Some(0.0));
}

#[test]
fn magnitude_ratio_grows_with_tb() {
    let ratio = |ns: usize| {
        magnitude_ratio_stat(&SystemParams::with_defaults(ns, 10 * ns), 4000, 2, 0)
            .unwrap()
            .unwrap()
    };
    let (short, long) = (ratio(1), ratio(40));
    assert!(long > 1.5 * short, "{short} vs {long}");
}

#[test]
fn balanced_tb_curve_is_flat() {
    // slope of mean_q against tb: its 95% interval must straddle zero
    let tb: Vec<f64> = (1..=8).map(|n| n as f64 * 10e-6).collect();
    let mut spec = SweepSpec::new(SweepVariable::Tb, tb.clone(), balanced(1, 2, 5e-6));
    spec.trials = 2000;
    spec.paths = experiments::PathSelection::Exact;
    let rows = run_sweep(&spec, &RunOptions::default()).unwrap();
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .map(|r| (r.value, r.exact.as_ref().unwrap().mean_q))
        .unzip();
    let w: Vec<f64> = rows
        .iter()
        .map(|r| r.exact.as_ref().unwrap().stderr_q.powi(-2))
        .collect();
    let sw: f64 = w.iter().sum();
    let xm = x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let ym = y.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / sw;
    let sxx: f64 = x.iter().zip(&w).map(|(a, b)| b * (a - xm).powi(2)).sum();
    let slope = x
        .iter()
        .zip(&y)
        .zip(&w)
        .map(|((a, c), b)| b * (a - xm) * (c - ym))
        .sum::<f64>()
        / sxx;
    let se = sxx.powf(-0.5);
    assert!(slope.abs() < 1.96 * se, "slope {slope:e} +/- {se:e}");
}

#[test]
fn exact_and_asymptotic_agree_for_large_arrays() {
    for m in [100, 1000] {
        let mut p = balanced(4, 2, 5e-6);
        p.m = m;
        let opts = RunOptions::default();
        let a = run_trials(
            &experiment(p.clone(), Scenario::Balanced, Path::Exact),
            2000,
            8,
            &opts,
        )
        .unwrap();
        let b = run_trials(
            &experiment(p, Scenario::Balanced, Path::Asymptotic),
            2000,
            8,
            &opts,
        )
        .unwrap();
        let gap = (a.mean_q_rf - b.mean_q_rf).abs() / b.mean_q_rf;
        assert!(gap < 0.03, "m={m}: {gap}");
    }
}

#[test]
fn interference_free_column_matches_balanced() {
    let p = balanced(4, 2, 20e-6);
    let opts = RunOptions::default();
    for path in [Path::Exact, Path::Asymptotic] {
        let a = run_trials(
            &experiment(p.clone(), Scenario::Interference, path),
            300,
            4,
            &opts,
        )
        .unwrap();
        let b = run_trials(
            &experiment(p.clone(), Scenario::Balanced, path),
            300,
            4,
            &opts,
        )
        .unwrap();
        assert_eq!(a.mean_q, b.mean_q);
    }
}

#[test]
fn offset_curve_is_symmetric_about_half_chip() {
    let base = balanced(4, 2, 5e-6);
    let tc = base.tc;
    let values: Vec<f64> = [0.1, 0.3, 0.7, 0.9].iter().map(|f| f * tc).collect();
    let mut spec = SweepSpec::new(SweepVariable::Offset, values, base);
    spec.trials = 1000;
    let rows = run_sweep(&spec, &RunOptions::default()).unwrap();
    let q: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| {
            (
                r.exact.as_ref().unwrap().mean_q,
                r.exact.as_ref().unwrap().stderr_q,
            )
        })
        .collect();
    for (i, j) in [(0, 3), (1, 2)] {
        let tol = 3.0 * (q[i].1.powi(2) + q[j].1.powi(2)).sqrt();
        assert!((q[i].0 - q[j].0).abs() < tol, "{:?} vs {:?}", q[i], q[j]);
    }
}

#[test]
fn csv_identical_for_repeat_runs() {
    let mut spec = SweepSpec::new(SweepVariable::M, vec![100.0, 300.0], balanced(2, 2, 5e-6));
    spec.trials = 300;
    let a = to_csv(
        &spec,
        &run_sweep(
            &spec,
            &RunOptions {
                workers: 1,
                noise_free: false,
            },
        )
        .unwrap(),
    );
    let b = to_csv(
        &spec,
        &run_sweep(
            &spec,
            &RunOptions {
                workers: 2,
                noise_free: false,
            },
        )
        .unwrap(),
    );
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn reports_are_worker_independent(seed in any::<u64>(), workers in 1usize..6, ns in 1usize..6) {
        let e = experiment(SystemParams::with_defaults(ns, 10 * ns), Scenario::Pn, Path::Exact);
        let a = run_trials(&e, 24, seed, &RunOptions { workers: 1, noise_free: false }).unwrap();
        let b = run_trials(&e, 24, seed, &RunOptions { workers, noise_free: false }).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn trial_powers_are_bounded(seed in any::<u64>(), ns in 1usize..8, half in 1usize..6) {
        let p = balanced(ns, 2 * half, 5e-6);
        let d = p.derive().unwrap();
        let hi = d.gamma2 * p.pt * (p.m as f64 + 1.0 / p.m_f);
        let e = experiment(p.clone(), Scenario::Balanced, Path::Asymptotic);
        for r in trial_results(&e, 16, seed, &RunOptions::default()).unwrap() {
            prop_assert!(r.q_rf >= d.gamma2 * p.pt * (1.0 - 1e-12) && r.q_rf <= hi * (1.0 + 1e-12));
            prop_assert!(r.q >= 0.0 && r.q < HarvesterModel::default().c0);
        }
    }
}
