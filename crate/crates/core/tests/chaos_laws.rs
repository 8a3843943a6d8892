//! Moments of the chaos terms against quadrature and closed-form oracles.

use std::f64::consts::{FRAC_PI_4, PI};

use circleflow::chaos::{chaos_term, wiener_solution, ChaosConfig, ChaosExpansion};
use circleflow::path::{reflected_plus, rho};
use circleflow::seed::replicate_seed;
use circleflow::stats::{correlation, mean, standard_error, variance};
use circleflow::verify::first_order_variance;
use circleflow::{CirclePoint, FlowParams, FlowRealization, FourierFunction, GraphParams, GridTime, SplitLaw};
use rayon::prelude::*;

const MASTER: u64 = 42;

fn wiener(l: f64, dt: f64, horizon: f64) -> FlowParams {
    FlowParams {
        graph: GraphParams::new(l).unwrap(),
        m_plus: SplitLaw::DiracHalf,
        m_minus: SplitLaw::DiracHalf,
        dt,
        horizon,
    }
}

#[test]
fn first_chaos_is_centred_with_the_isometry_variance_and_orthogonal_to_the_second() {
    let (t, dt, n) = (0.1, 1e-4, 10_000);
    let params = wiener(PI, dt, t);
    let z = CirclePoint::new(FRAC_PI_4);
    let f = FourierFunction::cosine(1, 64);
    let cfg = ChaosConfig { n_trunc: 2, ..ChaosConfig::default() };
    let expansion = ChaosExpansion::new(&f, z, t, dt, &params.graph, &cfg).unwrap();
    let (j1, j2): (Vec<f64>, Vec<f64>) = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let real = FlowRealization::sample(&params, replicate_seed(MASTER, i)).unwrap();
            let terms = expansion.terms(real.path()).unwrap();
            (terms[1], terms[2])
        })
        .unzip();
    assert!(mean(&j1).abs() <= 3.0 * standard_error(&j1), "E J1 = {}", mean(&j1));
    let oracle = first_order_variance(&params.graph, &f, z, t).unwrap();
    let ratio = variance(&j1) / oracle;
    assert!((ratio - 1.0).abs() <= 0.05, "Var J1 / isometry = {ratio}");
    // J1 J2 is heavy tailed, so the null spread of the sample correlation is
    // the standard error of the normalized product, not 1 / sqrt(N).
    let (s1, s2) = (variance(&j1).sqrt(), variance(&j2).sqrt());
    let product: Vec<f64> = j1.iter().zip(&j2).map(|(a, b)| a * b / (s1 * s2)).collect();
    let c = correlation(&j1, &j2);
    assert!(c.abs() <= 3.0 * standard_error(&product), "corr(J1, J2) = {c}");
}

#[test]
fn constant_functions_have_no_fluctuation() {
    let params = wiener(PI / 2.0, 1e-3, 0.5);
    let one = FourierFunction::constant(1.0, 16);
    let cfg = ChaosConfig { n_trunc: 1, stride: 5, k_max: 16 };
    for i in 0..20 {
        let real = FlowRealization::sample(&params, replicate_seed(MASTER, i)).unwrap();
        let z = CirclePoint::new(0.3 * i as f64);
        assert_eq!(chaos_term(&one, z, 0.5, 1, real.path(), &params.graph, &cfg).unwrap(), 0.0);
        let k = wiener_solution(&real, z, real.path().last(), &one).unwrap();
        assert!((k - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn wiener_solution_from_the_vertex_before_rho_splits_evenly() {
    let params = wiener(2.0 * PI / 3.0, 1e-3, 1.0);
    let f = FourierFunction::cosine(2, 8).combine(1.0, &FourierFunction::sine(1, 8), 0.5).unwrap();
    let exact = |x: f64| (2.0 * x).cos() + 0.5 * x.sin();
    let mut checked = 0;
    for i in 0..200 {
        let real = FlowRealization::sample(&params, replicate_seed(MASTER, i)).unwrap();
        let path = real.path();
        let end = rho(path, GridTime(0), params.graph.l()).map_or(path.last().0, |r| r.time.0.saturating_sub(1));
        for t in (0..=end).step_by(97) {
            let w = reflected_plus(path, GridTime(0), GridTime(t));
            let got = wiener_solution(&real, CirclePoint::new(0.0), GridTime(t), &f).unwrap();
            assert!((got - 0.5 * (exact(w) + exact(-w))).abs() <= 1e-12);
            checked += 1;
        }
    }
    assert!(checked > 200);
}

#[test]
fn wiener_solution_rejects_other_laws() {
    let params = FlowParams { m_plus: SplitLaw::Uniform, ..wiener(PI, 1e-3, 0.1) };
    let real = FlowRealization::sample(&params, MASTER).unwrap();
    let f = FourierFunction::cosine(1, 8);
    assert!(wiener_solution(&real, CirclePoint::new(0.0), GridTime(10), &f).is_err());
}
