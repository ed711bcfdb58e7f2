use metastab::chain::{beta_matrix, ChainX, ChainY};
use metastab::simulate::{run_rng, simulate_chain, TraceEntry, TraceJumpLog};
use metastab::verify::{
    delta_negligibility, estimate_chain, exponentiality_test, ks_statistic, short_time_bound, verify, VerifyOptions,
};
use metastab::Error;
use rand_distr::{Distribution, Exp};

fn log_of(entries: &[(usize, f64)]) -> TraceJumpLog {
    let n = entries.len();
    TraceJumpLog {
        run: 0,
        entries: entries
            .iter()
            .enumerate()
            .map(|(k, &(valley, holding))| TraceEntry { valley, holding, censored: k + 1 == n, raw_holding: holding })
            .collect(),
        delta_time: 0.0,
        total_time: entries.iter().map(|e| e.1).sum(),
        steps: 0,
        theta: 1.0,
        dt: 0.0,
        first_transition_raw: None,
        censored: false,
    }
}

fn double_well_chain() -> ChainY<f64> {
    let b = 1.0 / std::f64::consts::PI;
    ChainY::new(vec![1, 2], vec![vec![0.0, b], vec![b, 0.0]], vec![8f64.powf(-0.5); 2]).unwrap()
}

fn three_state_chain() -> ChainY<f64> {
    // five wells, the deepest at 1, 3, 5
    let w = vec![
        vec![0.0, 0.4, 0.0, 0.0, 0.1],
        vec![0.4, 0.0, 0.3, 0.0, 0.0],
        vec![0.0, 0.3, 0.0, 0.5, 0.0],
        vec![0.0, 0.0, 0.5, 0.0, 0.2],
        vec![0.1, 0.0, 0.0, 0.2, 0.0],
    ];
    let x = ChainX::from_weights(w).unwrap();
    let beta = beta_matrix(&x, &[0, 2, 4]).unwrap();
    ChainY::new(vec![1, 3, 5], beta, vec![0.3, 0.5, 0.2]).unwrap()
}

#[test]
fn counting_by_hand() {
    let log = log_of(&[(1, 2.0), (2, 1.0)]);
    let emp = estimate_chain(&[log], &[1, 2]).unwrap();
    assert_eq!(emp.stats[0].jumps_to, vec![0, 1]);
    assert_eq!(emp.stats[0].time, 2.0);
    assert_eq!(emp.stats[0].rates[1], Some(0.5));
    assert_eq!(emp.stats[1].rates[0], None);
    assert_eq!(emp.censored, 1);
    assert!(estimate_chain(&[log_of(&[(7, 1.0)])], &[1, 2]).is_err());
}

#[test]
fn ks_small_samples_by_hand() {
    let e = |t: f64| 1.0 - (-t).exp();
    let u = |t: f64| t.clamp(0.0, 1.0);
    assert!((ks_statistic(&[0.5], e) - (0.5f64).exp().recip()).abs() < 1e-15);
    assert!((ks_statistic(&[2.0, 1.0], e) - e(1.0)).abs() < 1e-15);
    assert!((ks_statistic(&[0.1, 3.0, 0.2], e) - (2.0 / 3.0 - e(0.2))).abs() < 1e-15);
    assert!((ks_statistic(&[0.2, 0.4, 0.6, 0.8], u) - 0.2).abs() < 1e-15);
    assert!((ks_statistic(&[0.9], u) - 0.9).abs() < 1e-15);
}

#[test]
fn exponentiality() {
    let mut rng = run_rng(2024, 0);
    let exp = Exp::new(1.0).unwrap();
    let sample: Vec<f64> = (0..1000).map(|_| exp.sample(&mut rng)).collect();
    assert!(exponentiality_test(&sample).unwrap().p_value > 0.01);

    let ones = vec![1.0; 1000];
    let r = exponentiality_test(&ones).unwrap();
    assert!((r.statistic - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
    assert!(r.p_value < 1e-12);

    assert!(matches!(exponentiality_test(&sample[..10]), Err(Error::SampleTooSmall { got: 10, min: 50 })));
}

#[test]
fn closed_loop_passes() {
    for chain in [double_well_chain(), three_state_chain()] {
        let logs: Vec<TraceJumpLog> =
            (0..4).map(|r| simulate_chain(&chain, r as usize % chain.len(), 2500, r, &mut run_rng(7, r)).unwrap()).collect();
        let report = verify(&logs, &chain, &VerifyOptions::default()).unwrap();
        assert!(report.pass, "{:#?}", report.checks.iter().filter(|c| !c.pass).collect::<Vec<_>>());
        assert!(report.empirical.total_jumps() >= 10_000);
        for p in 0..chain.len() {
            for q in 0..chain.len() {
                if p == q {
                    continue;
                }
                let s = &report.empirical.stats[p];
                let rate = chain.rate(p, q);
                let se = rate / (s.jumps_to[q].max(1) as f64).sqrt();
                assert!((s.rates[q].unwrap() - rate).abs() <= 3.0 * se + 1e-12);
            }
        }
    }
}

#[test]
fn closed_loop_catches_a_wrong_chain() {
    let chain = double_well_chain();
    let logs = vec![simulate_chain(&chain, 0, 5000, 0, &mut run_rng(1, 0)).unwrap()];
    let b = 1.3 / std::f64::consts::PI;
    let wrong = ChainY::new(vec![1, 2], vec![vec![0.0, b], vec![b, 0.0]], chain.nu.clone()).unwrap();
    assert!(!verify(&logs, &wrong, &VerifyOptions::default()).unwrap().pass);
}

#[test]
fn interval_width_scales() {
    // four times the data halves the interval
    let chain = double_well_chain();
    let width = |n: usize| {
        let log = simulate_chain(&chain, 0, n, 0, &mut run_rng(3, n as u64)).unwrap();
        let s = &estimate_chain(&[log], &[1, 2]).unwrap().stats[0];
        s.ci.1 - s.ci.0
    };
    let ratio = width(2000) / width(8000);
    assert!((ratio / 2.0 - 1.0).abs() <= 0.2, "{ratio}");
}

#[test]
fn short_time_table() {
    let chain = double_well_chain();
    let logs: Vec<TraceJumpLog> =
        (0..20_000).map(|r| simulate_chain(&chain, 0, 1, r, &mut run_rng(5, r)).unwrap()).collect();
    let rows = short_time_bound(&logs, &chain, &[0.0, 0.01, 0.05, 0.1, 10.0]).unwrap();
    assert_eq!(rows[0].empirical, 0.0);
    assert!(rows.windows(2).all(|w| w[1].empirical >= w[0].empirical));
    assert!(rows[4].empirical > 0.999);
    assert!(rows.iter().all(|r| r.within_3_sigma), "{rows:?}");
    let r = chain.exit_rate(0);
    assert!((rows[2].predicted - (1.0 - (-r * 0.05).exp())).abs() < 1e-12);
}

#[test]
fn delta_trend() {
    let mut a = log_of(&[(1, 1.0)]);
    a.delta_time = 0.5;
    a.total_time = 1.5;
    let mut b = log_of(&[(1, 1.0)]);
    b.delta_time = 0.1;
    b.total_time = 1.1;
    let trend = delta_negligibility(&[(0.05, std::slice::from_ref(&b)), (0.1, std::slice::from_ref(&a))]).unwrap();
    assert_eq!(trend.rows[0].epsilon, 0.1);
    assert!(trend.strictly_decreasing);
    assert!(matches!(delta_negligibility(&[(0.1, std::slice::from_ref(&a))]), Err(Error::Precondition(_))));
}
