use std::f64::consts::PI;

use metastab::asymptotics::{default_j, generator_residual_at, EpsilonScale, Model, ZMethod};
use metastab::chain::build_chain_x;
use metastab::landscape::{analyze, find_critical_points, LandscapeGraph, LandscapeOptions, Level, SearchOptions};
use metastab::potential::{Builtin, Potential, PotentialSpec};
use metastab::quadrature::QuadOptions;
use metastab::{Error, SymMatrix};
use statrs::function::erf::erf;

fn load(name: &str, opts: LandscapeOptions) -> (Builtin<f64>, LandscapeGraph) {
    let spec = PotentialSpec::builtin(name).unwrap();
    let pot: Builtin<f64> = spec.instantiate().unwrap();
    let g = analyze(&pot, &spec.bounding_box, &SearchOptions::default(), &opts).unwrap();
    (pot, g)
}

#[test]
fn j_defaults() {
    assert_eq!(default_j(1), 5.0);
    assert_eq!(default_j(2), 6.0);
    let g = EpsilonScale::with_levels(0.1, 1.0, 0.0, 1, Some(3.0));
    assert!(matches!(g, Err(Error::InvalidParameter(_))));
}

#[test]
fn gaussian_partition_function() {
    let opts = LandscapeOptions { level: Level::Fixed(1.0), allow_single: true, ..Default::default() };
    let (pot, g) = load("quadratic", opts);
    let m = Model::new(&pot, &g);
    let eps = 0.1;
    let exact = (2.0 * PI * eps).sqrt() * erf(5.0 / (2.0 * eps).sqrt());
    let z = m.partition_function(eps, ZMethod::Quadrature).unwrap();
    assert!((z / exact - 1.0).abs() < 1e-7);
    assert!((m.partition_function(eps, ZMethod::Laplace).unwrap() / (2.0 * PI * eps).sqrt() - 1.0).abs() < 1e-12);
}

#[test]
fn double_well_laplace_and_valleys() {
    let (pot, g) = load("double_well", LandscapeOptions::default());
    let m = Model::new(&pot, &g);
    let mut last_ratio = f64::INFINITY;
    let mut last_delta = f64::INFINITY;
    for eps in [0.1, 0.05, 0.02] {
        let r = m.measures(eps).unwrap();
        assert!((r.ratio - 1.0).abs() < (last_ratio - 1.0).abs());
        assert!(r.delta < last_delta);
        assert!((r.valleys[0] - r.valleys[1]).abs() < 1e-9);
        assert!(r.tail_fraction < 1e-12);
        last_ratio = r.ratio;
        last_delta = r.delta;
        if eps == 0.02 {
            assert!((r.ratio - 1.0).abs() <= 0.05);
            assert!((r.valleys[0] - r.predicted[0]).abs() <= 0.05);
            assert_eq!(r.predicted[0], 0.5);
        }
    }
    // symmetric wells: the valley mass tends to 1/2
    let small = m.measures(0.005).unwrap();
    assert!((small.valleys[0] - 0.5).abs() < 1e-3);
}

#[test]
fn normalizer_tends_to_one() {
    for (name, opts) in [
        ("double_well", LandscapeOptions::default()),
        ("triple_well_1d", LandscapeOptions::default()),
        ("triple_well_2d", LandscapeOptions::default()),
    ] {
        let (_, g) = load(name, opts);
        let mut last = 0.0;
        for eps in [0.1, 0.05, 0.02, 0.01] {
            let s = EpsilonScale::new(eps, &g, None).unwrap();
            let c = metastab::asymptotics::box_normalizer(&s);
            assert!(c > 0.0 && c <= 1.0 && c >= last);
            last = c;
        }
        assert!((last - 1.0).abs() <= 0.05);
    }
}

#[test]
fn test_function_shape() {
    let (pot, g) = load("double_well", LandscapeOptions::default());
    let m = Model::new(&pot, &g);
    let x = build_chain_x(&g).unwrap();
    let scale = EpsilonScale::new(0.02, &g, None).unwrap();
    let z = m.partition_function(0.02, ZMethod::Quadrature).unwrap();

    let flat = m.test_function(&[0.3, 0.3], &scale).unwrap();
    for k in 0..=200 {
        let t = -2.0 + 4.0 * k as f64 / 200.0;
        if pot.value(&[t]) <= g.level + scale.cap() {
            assert_eq!(flat.value(&[t]), 0.3);
        }
    }
    assert_eq!(m.dirichlet_energy(&flat, &x, z).unwrap().quadrature, 0.0);

    let tf = m.test_function(&[0.0, 1.0], &scale).unwrap();
    let vals: Vec<f64> = (0..=400).map(|k| tf.value(&[-2.0 + 4.0 * k as f64 / 400.0])).collect();
    assert!(vals.iter().all(|&v| (0.0..=1.0).contains(&v)));
    assert_eq!(vals.iter().fold(0.0f64, |a, &b| a.max(b)), 1.0);
    // half the normalised Gaussian mass at the saddle
    assert_eq!(tf.value(&[0.0]), 0.5);

    // continuity across the faces
    let b = &tf.boxes[0];
    let w = b.half_widths[0];
    for side in [-1.0, 1.0] {
        let face = side * w;
        let jump = (tf.value(&[face * (1.0 + 1e-12)]) - tf.value(&[face * (1.0 - 1e-12)])).abs();
        assert!(jump <= 1e-9, "jump {jump}");
    }
    assert!(m.test_function(&[0.0], &scale).is_err());
}

#[test]
fn triple_well_2d_faces_are_continuous() {
    let (pot, g) = load("triple_well_2d", LandscapeOptions::default());
    let m = Model::new(&pot, &g);
    let max_eps = m.max_disjoint_epsilon(0.5);
    assert!(max_eps > 0.005 && max_eps < 0.01, "{max_eps}");
    let big = EpsilonScale::new(0.05, &g, None).unwrap();
    assert!(matches!(m.test_function(&[0.0, 0.0, 1.0], &big), Err(Error::BoxesOverlap { .. })));

    let scale = EpsilonScale::new(0.005, &g, None).unwrap();
    let tf = m.test_function(&[0.0, 0.25, 1.0], &scale).unwrap();
    let lo = g.level + scale.cap();
    for b in &tf.boxes {
        let (w1, w2) = (b.half_widths[0], b.half_widths[1]);
        let mut checked = 0;
        for side in [-1.0, 1.0] {
            for k in 0..100 {
                let a2 = -w2 + 2.0 * w2 * (k as f64 + 0.5) / 100.0;
                let inner = b.point(&[side * w1 * (1.0 - 1e-12), a2]);
                let outer = b.point(&[side * w1 * (1.0 + 1e-9), a2]);
                if pot.value(&outer) > lo || pot.value(&inner) > lo {
                    continue;
                }
                checked += 1;
                let jump = (tf.value(&inner) - tf.value(&outer)).abs();
                assert!(jump <= 1e-9, "jump {jump} at {outer:?}");
            }
        }
        assert!(checked > 20);
    }
}

#[test]
fn triple_well_2d_box_levels() {
    let (pot, g) = load("triple_well_2d", LandscapeOptions::default());
    let m = Model::new(&pot, &g);
    for eps in [0.05, 0.02, 0.01] {
        let scale = EpsilonScale::new(eps, &g, None).unwrap();
        for b in m.boxes(&scale) {
            let r = m.box_level_ratio(&b, &scale).unwrap();
            assert!(r >= 1.4, "eps {eps}: {r}");
        }
    }
}

#[test]
fn double_well_dirichlet_energy() {
    let (pot, g) = load("double_well", LandscapeOptions::default());
    let m = Model::new(&pot, &g);
    let x = build_chain_x(&g).unwrap();
    let mut last = 0.0;
    for eps in [0.1, 0.05, 0.02, 0.01] {
        let scale = EpsilonScale::new(eps, &g, None).unwrap();
        let z = m.partition_function(eps, ZMethod::Quadrature).unwrap();
        let tf = m.test_function(&[0.0, 1.0], &scale).unwrap();
        let e = m.dirichlet_energy(&tf, &x, z).unwrap();
        // nu_star^{-1} D_x(q, q) = sqrt 2 / pi for q = (0, 1)
        assert!((e.target - 2f64.sqrt() / PI).abs() < 1e-9);
        assert!(e.ratio > last && e.ratio < 1.0);
        last = e.ratio;
        if eps <= 0.05 {
            assert!((e.gaussian / e.quadrature - 1.0).abs() <= 0.01);
        }
        if eps == 0.02 {
            assert!((e.ratio - 1.0).abs() <= 0.1);
        }
        assert!(e.remainder_bound < 1e-6 * e.quadrature);
    }
}

#[test]
fn double_well_residual_closed_form() {
    // U' + 4x = 4x^3 and U - 1 + 2x^2 = x^4 in the box, so the residual is
    // sqrt(2/(pi eps)) / c * 2 eps (1 - exp(-a^4/eps)) / Zs
    let (pot, g) = load("double_well", LandscapeOptions::default());
    let m = Model::new(&pot, &g);
    for eps in [0.1, 0.05, 0.02] {
        let scale = EpsilonScale::new(eps, &g, None).unwrap();
        let z = m.partition_function(eps, ZMethod::Quadrature).unwrap();
        let c = metastab::asymptotics::box_normalizer(&scale);
        let a = scale.j * scale.delta / 2.0;
        let expect = (2.0 / (PI * eps)).sqrt() / c * 2.0 * eps * (1.0 - (-a.powi(4) / eps).exp()) / z;
        let got = m.generator_residual(0, &scale, z).unwrap();
        assert!((got / expect - 1.0).abs() < 1e-6, "eps {eps}: {got} vs {expect}");
    }
}

#[test]
fn pure_quadratic_saddle_has_no_residual() {
    struct Cap;
    impl Potential<f64> for Cap {
        fn dim(&self) -> usize {
            1
        }
        fn value(&self, x: &[f64]) -> f64 {
            -2.0 * x[0] * x[0]
        }
        fn gradient(&self, x: &[f64], g: &mut [f64]) {
            g[0] = -4.0 * x[0];
        }
        fn hessian(&self, _: &[f64]) -> SymMatrix<f64> {
            SymMatrix::from_diagonal(&[-4.0])
        }
    }
    let pts = find_critical_points(&Cap, &[[-1.0, 1.0]], &SearchOptions::default()).unwrap();
    let scale = EpsilonScale::with_levels(0.05, 0.0, -1.0, 1, None).unwrap();
    let r = generator_residual_at(&Cap, &pts[0], &scale, 1.0, QuadOptions::default()).unwrap();
    assert_eq!(r, 0.0);
}

#[test]
fn triple_well_2d_residual_is_finite() {
    let (pot, g) = load("triple_well_2d", LandscapeOptions::default());
    let m = Model::new(&pot, &g);
    for eps in [0.1, 0.05] {
        let scale = EpsilonScale::new(eps, &g, None).unwrap();
        let z = m.partition_function(eps, ZMethod::Quadrature).unwrap();
        for k in 0..g.saddles.len() {
            let r = m.generator_residual(k, &scale, z).unwrap();
            assert!(r.is_finite() && r > 0.0);
        }
    }
}
