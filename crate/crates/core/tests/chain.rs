use std::f64::consts::PI;

use metastab::chain::{
    beta_matrix, build_chain_x, build_chain_y, capacity, dirichlet_x, dirichlet_y, equilibrium_potential,
    harmonic_extension, omega_from_eigenvalues, stationarity_residual, ChainSummary, ChainX, ChainY,
};
use metastab::landscape::{analyze, LandscapeOptions, SearchOptions};
use metastab::potential::{Builtin, PotentialSpec};
use metastab::Error;
use proptest::prelude::*;

fn path3(w: f64) -> ChainX<f64> {
    ChainX::from_weights(vec![vec![0.0, w, 0.0], vec![w, 0.0, w], vec![0.0, w, 0.0]]).unwrap()
}

fn graph(name: &str) -> metastab::LandscapeGraph {
    let spec = PotentialSpec::builtin(name).unwrap();
    let pot: Builtin<f64> = spec.instantiate().unwrap();
    analyze(&pot, &spec.bounding_box, &SearchOptions::default(), &LandscapeOptions::default()).unwrap()
}

#[test]
fn saddle_weights_by_hand() {
    assert!((omega_from_eigenvalues(&[-4.0]).unwrap() - 1.0 / PI).abs() < 1e-15);
    assert!((omega_from_eigenvalues(&[-2.0, 8.0]).unwrap() - 1.0 / (4.0 * PI)).abs() < 1e-15);
    assert!((omega_from_eigenvalues(&[-1.0, 1.0]).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
    assert!(omega_from_eigenvalues(&[1.0, 1.0]).is_err());
}

#[test]
fn double_well_chains() {
    let g = graph("double_well");
    let x = build_chain_x(&g).unwrap();
    assert!((x.omega[0][1] - 1.0 / PI).abs() < 1e-10);
    assert!((x.mu[0] - 0.5).abs() < 1e-15);
    assert!((capacity(&x, &[0], &[1]).unwrap() - 1.0 / PI).abs() < 1e-10);
    let y = build_chain_y(&g, &x).unwrap();
    assert!((y.beta[0][1] - 1.0 / PI).abs() < 1e-10);
    assert!((y.nu[0] - 1.0 / 8f64.sqrt()).abs() < 1e-10);
    assert!((y.rate(0, 1) - 2.0 * 2f64.sqrt() / PI).abs() < 1e-9);
    // mean holding against the Eyring-Kramers prefactor (2 pi / 4) sqrt(4 / 8)
    let ek = 2.0 * PI / 4.0 * (4.0f64 / 8.0).sqrt();
    assert!((y.mean_holding(0) - ek).abs() < 1e-9);
    assert!((y.mean_holding(0) - PI / (2.0 * 2f64.sqrt())).abs() < 1e-9);
}

#[test]
fn triple_well_2d_weights_resum() {
    let g = graph("triple_well_2d");
    let x = build_chain_x(&g).unwrap();
    let mut oracle = vec![vec![0.0; 3]; 3];
    for s in &g.saddles {
        let lam = s.point.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min).abs();
        let det: f64 = s.point.eigenvalues.iter().product();
        let w = lam / (2.0 * PI * (-det).sqrt());
        oracle[s.wells.0 - 1][s.wells.1 - 1] += w;
        oracle[s.wells.1 - 1][s.wells.0 - 1] += w;
    }
    for i in 0..3 {
        for j in 0..3 {
            assert!((x.omega[i][j] - oracle[i][j]).abs() < 1e-14);
        }
    }
    assert_eq!(x.omega[0][2], 0.0);
    let y = build_chain_y(&g, &x).unwrap();
    assert_eq!(y.s_star, vec![1, 3]);
    // series conductance through the shallow well
    let w = x.omega[0][1] * x.omega[1][2] / (x.omega[0][1] + x.omega[1][2]);
    assert!((y.beta[0][1] - w).abs() < 1e-12 * w);
}

#[test]
fn path_chain_by_hand() {
    let x = path3(0.3);
    let h = equilibrium_potential(&x, &[0], &[2]).unwrap();
    assert!((h[1] - 0.5).abs() < 1e-15 && h[0] == 1.0 && h[2] == 0.0);
    assert!((capacity(&x, &[0], &[2]).unwrap() - 0.15).abs() < 1e-15);
    let beta = beta_matrix(&x, &[0, 2]).unwrap();
    assert!((beta[0][1] - 0.15).abs() < 1e-15);
    let two = ChainX::from_weights(vec![vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap();
    assert_eq!(equilibrium_potential(&two, &[0], &[1]).unwrap(), vec![1.0, 0.0]);
}

#[test]
fn invalid_inputs() {
    let x = path3(1.0);
    assert!(matches!(equilibrium_potential(&x, &[0], &[0]), Err(Error::InvalidStateSet(_))));
    assert!(equilibrium_potential(&x, &[0], &[]).is_err());
    assert!(matches!(beta_matrix(&x, &[0]), Err(Error::InvalidStateSet(_))));
    let r = ChainX::from_weights(vec![vec![0.0, 1.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]]);
    assert!(matches!(r, Err(Error::ZeroRate(3))));
    assert!(ChainX::from_weights(vec![vec![0.0, 1.0], vec![2.0, 0.0]]).is_err());
    assert!(matches!(ChainX::<f64>::from_weights(vec![vec![0.0; 65]; 65]), Err(Error::TooManyStates(65, 64))));
}

#[test]
fn empty_pair_still_connected() {
    // 1 - 2 - 3 with no direct 1 - 3 link
    let x = path3(1.0);
    assert_eq!(x.omega[0][2], 0.0);
    assert!(x.omega_i.iter().all(|&w| w > 0.0));
}

#[test]
fn adding_a_saddle_raises_weights() {
    let x = path3(1.0);
    let mut w = x.omega.clone();
    w[0][2] = 0.2;
    w[2][0] = 0.2;
    let y = ChainX::from_weights(w).unwrap();
    assert!(y.omega[0][2] > x.omega[0][2]);
    assert!(capacity(&y, &[0], &[2]).unwrap() >= capacity(&x, &[0], &[2]).unwrap());
}

#[test]
fn summary_is_consistent() {
    let g = graph("triple_well_2d");
    let s = ChainSummary::build(&g).unwrap();
    assert_eq!(s.capacities.len(), 3);
    assert!(stationarity_residual(&s.chain_x.generator(), &s.chain_x.mu) < 1e-12);
    assert!(stationarity_residual(&s.chain_y.generator(), &s.chain_y.mu_star) < 1e-12);
}

#[test]
fn f32_chain() {
    let x = ChainX::<f32>::from_weights(vec![vec![0.0, 0.5, 0.0], vec![0.5, 0.0, 0.5], vec![0.0, 0.5, 0.0]]).unwrap();
    assert!((capacity(&x, &[0], &[2]).unwrap() - 0.25).abs() < 1e-6);
}

/// Connected random weights on `k` states: a random spanning tree plus extra edges.
fn chain_strategy() -> impl Strategy<Value = (ChainX<f64>, Vec<usize>, Vec<f64>, Vec<f64>, Vec<f64>)> {
    (2usize..=8)
        .prop_flat_map(|k| {
            (
                Just(k),
                proptest::collection::vec(0usize..100, k),
                proptest::collection::vec(0.05f64..2.0, k * k),
                proptest::collection::vec(prop::bool::weighted(0.4), k * k),
                proptest::collection::vec(-1.0f64..1.0, 3 * k),
                proptest::collection::vec(0.1f64..3.0, k),
            )
        })
        .prop_map(|(k, parents, weights, extra, vals, nu)| {
            let mut w = vec![vec![0.0; k]; k];
            for i in 1..k {
                let p = parents[i] % i;
                w[i][p] = weights[i * k + p];
                w[p][i] = w[i][p];
            }
            for i in 0..k {
                for j in (i + 1)..k {
                    if extra[i * k + j] {
                        w[i][j] = weights[i * k + j];
                        w[j][i] = w[i][j];
                    }
                }
            }
            let chain = ChainX::from_weights(w).unwrap();
            // deepest states: every other state, at least two
            let s_star: Vec<usize> = (0..k).filter(|i| i % 2 == 0 || k == 2 || *i == k - 1).collect();
            (chain, s_star, vals[..k].to_vec(), vals[k..2 * k].to_vec(), nu)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn lemma_identities((x, s_star, u_all, v_all, nu_all) in chain_strategy()) {
        let n = s_star.len();
        let u = &u_all[..n];
        let v = &v_all[..n];
        let beta = beta_matrix(&x, &s_star).unwrap();
        let y = ChainY::new((1..=n).collect(), beta.clone(), nu_all[..n].to_vec()).unwrap();
        let ut = harmonic_extension(&x, &s_star, u).unwrap();
        let vt = harmonic_extension(&x, &s_star, v).unwrap();

        let lhs = dirichlet_x(&x, &ut, &vt);
        let rhs = y.nu_star * dirichlet_y(&y, u, v);
        prop_assert!((lhs - rhs).abs() <= 1e-10 * lhs.abs().max(rhs.abs()).max(1e-12));

        // any other extension of v pairs identically with the harmonic u
        let mut v2 = vt.clone();
        for i in 0..x.len() {
            if !s_star.contains(&i) {
                v2[i] += u_all[i] + 0.5;
            }
        }
        let alt = dirichlet_x(&x, &ut, &v2);
        prop_assert!((alt - lhs).abs() <= 1e-10 * lhs.abs().max(1e-12));

        // harmonic extension obeys the maximum principle
        let sup = u.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        prop_assert!(ut.iter().all(|a| a.abs() <= sup + 1e-12));

        for p in 0..n {
            let mut e = vec![0.0; n];
            e[p] = 1.0;
            let et = harmonic_extension(&x, &s_star, &e).unwrap();
            let others: Vec<usize> = s_star.iter().copied().filter(|&s| s != s_star[p]).collect();
            let h = equilibrium_potential(&x, &[s_star[p]], &others).unwrap();
            for (a, b) in et.iter().zip(&h) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            let cap = capacity(&x, &[s_star[p]], &others).unwrap();
            prop_assert!((dirichlet_x(&x, &et, &et) - cap).abs() <= 1e-12 * cap.max(1.0));
            for q in 0..n {
                if q == p {
                    continue;
                }
                let mut e2 = vec![0.0; n];
                e2[q] = 1.0;
                let et2 = harmonic_extension(&x, &s_star, &e2).unwrap();
                prop_assert!((dirichlet_x(&x, &et, &et2) + beta[p][q]).abs() <= 1e-12 * beta[p][q].max(1.0));
                prop_assert!((dirichlet_y(&y, &e, &e2) + beta[p][q] / y.nu_star).abs() <= 1e-12);
                prop_assert!(beta[p][q] >= -1e-12 && beta[p][q] == beta[q][p]);
            }
        }

        // generators: zero row sums, stationary laws, the mean-zero identity
        let lx = x.generator();
        let ly = y.generator();
        for i in 0..x.len() {
            prop_assert!((0..x.len()).map(|j| lx.get(i, j)).sum::<f64>().abs() < 1e-12);
        }
        prop_assert!(stationarity_residual(&lx, &x.mu) < 1e-12);
        prop_assert!(stationarity_residual(&ly, &y.mu_star) < 1e-12);
        let lyf = y.apply_generator(u);
        prop_assert!(lyf.iter().zip(&y.mu_star).map(|(a, m)| a * m).sum::<f64>().abs() < 1e-12);

        // Dirichlet form against the generator, bilinearity, constants
        let lg = x.apply_generator(&vt);
        let via_gen: f64 = (0..x.len()).map(|i| -x.mu[i] * ut[i] * lg[i]).sum::<f64>();
        prop_assert!((via_gen - lhs).abs() <= 1e-12 * lhs.abs().max(1.0));
        let sum: Vec<f64> = ut.iter().zip(&vt).map(|(a, b)| a + b).collect();
        let split = dirichlet_x(&x, &ut, &ut) + dirichlet_x(&x, &ut, &vt);
        prop_assert!((dirichlet_x(&x, &ut, &sum) - split).abs() <= 1e-12 * split.abs().max(1.0));
        prop_assert!(dirichlet_x(&x, &vec![2.0; x.len()], &vt).abs() < 1e-12);
        prop_assert!(dirichlet_y(&y, u, u) >= 0.0);
    }
}
