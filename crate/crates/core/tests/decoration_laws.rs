//! Marginal laws and cross-side independence of stored decorations.

use circleflow::seed::{replicate_seed, ReplicateSeeds};
use circleflow::stats::{correlation, mean, standard_error};
use circleflow::{DecorationStore, ExtremumKey, Sign, SplitLaw};

const MASTER: u64 = 42;
const N: usize = 10_000;

fn store(side: Sign, law: SplitLaw) -> DecorationStore {
    let seeds = ReplicateSeeds::from_replicate(replicate_seed(MASTER, 0));
    let seed = match side {
        Sign::Plus => seeds.plus,
        Sign::Minus => seeds.minus,
    };
    DecorationStore::new(side, law, seed)
}

fn eps(s: Sign) -> f64 {
    s.value::<f64>()
}

#[test]
fn coalescing_draws_are_deterministic_given_the_weight() {
    let s = store(Sign::Plus, SplitLaw::Coalescing);
    let u: Vec<f64> = (0..N)
        .map(|j| {
            let d = s.get(ExtremumKey::Grid(j));
            assert!(d.u == 0.0 || d.u == 1.0);
            assert_eq!(eps(d.epsilon), 2.0 * d.u - 1.0);
            d.u
        })
        .collect();
    assert!((mean(&u) - 0.5).abs() <= 0.015);
}

#[test]
fn half_weight_resamples_are_fair() {
    let key = ExtremumKey::Grid(7);
    let mut cur = store(Sign::Minus, SplitLaw::DiracHalf);
    assert_eq!(cur.get(key).u, 0.5);
    let mut ups = 0usize;
    for _ in 0..N {
        cur = cur.resample_epsilons();
        assert_eq!(cur.get(key).u, 0.5);
        ups += (cur.get(key).epsilon == Sign::Plus) as usize;
    }
    let freq = ups as f64 / N as f64;
    assert!((freq - 0.5).abs() <= 0.015, "frequency {freq}");
}

#[test]
fn sides_are_independent() {
    let (plus, minus) = (store(Sign::Plus, SplitLaw::Uniform), store(Sign::Minus, SplitLaw::Uniform));
    let (a, b): (Vec<f64>, Vec<f64>) = (0..N)
        .map(|j| (plus.get(ExtremumKey::Grid(j)).u, minus.get(ExtremumKey::Grid(j)).u))
        .unzip();
    let c = correlation(&a, &b);
    assert!(c.abs() <= 3.0 / (N as f64).sqrt(), "corr = {c}");
}

#[test]
fn marginals_match_the_law_and_signs_follow_the_weight() {
    for law in [SplitLaw::Uniform, SplitLaw::Beta(2.0)] {
        let s = store(Sign::Plus, law);
        let draws: Vec<_> = (0..N).map(|j| s.get(ExtremumKey::Grid(j))).collect();
        let u: Vec<f64> = draws.iter().map(|d| d.u).collect();
        let e: Vec<f64> = draws.iter().map(|d| eps(d.epsilon)).collect();
        assert!((mean(&u) - 0.5).abs() <= 3.0 * standard_error(&u), "{law}: E U = {}", mean(&u));
        assert!(mean(&e).abs() <= 3.0 * standard_error(&e), "{law}: E eps = {}", mean(&e));
        for bin in 0..5 {
            let (lo, hi) = (bin as f64 / 5.0, (bin + 1) as f64 / 5.0);
            let inside: Vec<_> = draws.iter().filter(|d| d.u >= lo && d.u < hi).collect();
            let n = inside.len() as f64;
            let ups = inside.iter().filter(|d| d.epsilon == Sign::Plus).count() as f64 / n;
            // Given U the sign is Bernoulli(U), so the bin frequency estimates E[U | bin].
            let target = inside.iter().map(|d| d.u).sum::<f64>() / n;
            let se = inside.iter().map(|d| d.u * (1.0 - d.u)).sum::<f64>().sqrt() / n;
            assert!((ups - target).abs() <= 3.0 * se, "{law}: bin {bin} gives {ups} vs {target}");
            if law == SplitLaw::Uniform {
                assert!((target - 0.5 * (lo + hi)).abs() <= 0.01);
            }
        }
    }
}
