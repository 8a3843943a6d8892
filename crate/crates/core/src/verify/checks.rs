//! Monte Carlo verdicts on kernels, maps and the driver.

use std::f64::consts::TAU;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{Beta, ContinuousCDF};

use crate::circle::{measure_distance, pushforward, test_function, CirclePoint, Sign, TEST_FREQUENCIES};
use crate::decorations::SplitLaw;
use crate::error::{Error, Result};
use crate::flow::{sde_residual, FlowParams, FlowRealization};
use crate::fourier::FourierFunction;
use crate::path::{level_hit, sample_path, GridTime};
use crate::seed::{derive, replicate_seed, rng, ReplicateSeeds};
use crate::stats::{
    batch_means_se, correlation, ks_distance, ks_distance_censored, mean, normal_cdf, standard_error,
};

use super::{grow_until, per_replicate, probe_points, VerificationReport};

const QUERY_STREAM: u64 = 0x5155_4552;

fn queries(seed: u64) -> ChaCha8Rng {
    rng(derive(seed, &[QUERY_STREAM]))
}

fn random_point(q: &mut ChaCha8Rng) -> CirclePoint<f64> {
    CirclePoint::new(q.random_range(0.0..TAU))
}

/// `k` distinct grid times drawn uniformly from `0..=last`, ascending.
fn random_times(q: &mut ChaCha8Rng, last: GridTime, k: usize) -> Vec<GridTime> {
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        let t = GridTime(q.random_range(0..=last.0));
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out.sort();
    out
}

/// Every kernel of `queries_per` random queries per realization has total
/// mass within 1e-12 of one and weights in `[0, 1]`.
pub fn mass_check(
    params: &FlowParams<f64>,
    replicates: usize,
    queries_per: usize,
    master: u64,
) -> Result<VerificationReport> {
    let per = per_replicate(replicates, master, |seed| {
        let real = FlowRealization::sample(params, seed)?;
        let mut q = queries(seed);
        let mut worst = 0.0f64;
        let mut bad_weight = false;
        for _ in 0..queries_per {
            let st = random_times(&mut q, real.path().last(), 2);
            let k = real.kernel(st[0], st[1], random_point(&mut q))?;
            worst = worst.max((k.total_mass() - 1.0).abs());
            bad_weight |= k.atoms().iter().any(|a| !(0.0..=1.0).contains(&a.weight));
        }
        Ok((worst, bad_weight))
    })?;
    let mut report = VerificationReport::new("mass", replicates * queries_per);
    let mut worst = 0.0f64;
    for (seed, (d, bad)) in per {
        worst = worst.max(d);
        if d > 1e-12 || bad {
            report.fail_on(seed);
        }
    }
    report.stat("max_mass_error", worst);
    Ok(report)
}

/// `d(K_{s,u}(z), K_{s,t} K_{t,u}(z)) <= 1e-9` for random `s < t < u` and the
/// probe set, one triple per realization.
pub fn flow_property_check(params: &FlowParams<f64>, replicates: usize, master: u64) -> Result<VerificationReport> {
    let per = per_replicate(replicates, master, |seed| {
        let real = FlowRealization::sample(params, seed)?;
        let stu = random_times(&mut queries(seed), real.path().last(), 3);
        let (s, t, u) = (stu[0], stu[1], stu[2]);
        let mut worst = 0.0f64;
        for z in probe_points(real.graph()) {
            let direct = real.kernel(s, u, z)?;
            let composed = pushforward(&real.kernel(s, t, z)?, |x| real.kernel(t, u, x))?;
            worst = worst.max(measure_distance(&direct, &composed));
        }
        Ok(worst)
    })?;
    let mut report = VerificationReport::new("flow-property", replicates);
    let mut worst = 0.0f64;
    for (seed, d) in per {
        worst = worst.max(d);
        if d > 1e-9 {
            report.fail_on(seed);
        }
    }
    report.stat("max_distance", worst);
    Ok(report)
}

/// Residual of the integrated equation for `f = cos` over windows of length
/// 0.5 starting at a uniform grid time of `[0, 1]`, from a uniform point.
/// Passes when the RMS falls by a factor in `[1, 2]` per halving of `dt`
/// between consecutive entries of `dts`, and each mean is within 3 SE of 0.
pub fn sde_residual_check(
    params: &FlowParams<f64>,
    dts: &[f64],
    replicates: usize,
    master: u64,
) -> Result<VerificationReport> {
    let f = FourierFunction::<f64>::cosine(1, 1);
    let mut report = VerificationReport::new("sde-residual", replicates);
    let mut rms = Vec::with_capacity(dts.len());
    for &dt in dts {
        let p = FlowParams { dt, horizon: 1.5, ..*params };
        let span = (0.5 / dt).round() as usize;
        let per = per_replicate(replicates, master, |seed| {
            let real = FlowRealization::sample(&p, seed)?;
            let mut q = queries(seed);
            let s = real.path().grid_time_at(q.random_range(0.0..1.0));
            sde_residual(&real, s, GridTime(s.0 + span), random_point(&mut q), &f)
        })?;
        let r: Vec<f64> = per.into_iter().map(|(_, r)| r).collect();
        let root = (r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64).sqrt();
        let (m, se) = (mean(&r), standard_error(&r));
        report
            .stat(&format!("rms_dt_{dt:e}"), root)
            .stat(&format!("mean_dt_{dt:e}"), m)
            .stat(&format!("se_dt_{dt:e}"), se)
            .require(m.abs() <= 3.0 * se);
        rms.push(root);
    }
    for i in 1..dts.len() {
        let halvings = (dts[i - 1] / dts[i]).log2();
        let factor = (rms[i - 1] / rms[i]).powf(1.0 / halvings);
        report
            .stat(&format!("factor_per_halving_{}", i), factor)
            .require((1.0..=2.0).contains(&factor));
    }
    Ok(report)
}

fn hitting_cdf(level: f64) -> impl Fn(f64) -> f64 {
    move |t: f64| {
        if t <= 0.0 {
            0.0
        } else {
            2.0 * (1.0 - normal_cdf(level / t.sqrt()))
        }
    }
}

/// First grid time of `W >= level`, as a time, from one path per sample;
/// censored KS distance to `2 (1 - Phi(level / sqrt(t)))` at most 0.02.
pub fn hitting_law_check(level: f64, dt: f64, horizon: f64, samples: usize, master: u64) -> Result<VerificationReport> {
    let per = per_replicate(samples, master, |seed| {
        let path = sample_path(dt, horizon, ReplicateSeeds::from_replicate(seed).path)?;
        Ok(level_hit(&path, GridTime(0), level).map(|t| t.time(dt)))
    })?;
    let hits: Vec<Option<f64>> = per.into_iter().map(|(_, h)| h).collect();
    let ks = ks_distance_censored(&hits, horizon, hitting_cdf(level));
    let mut report = VerificationReport::new("hitting-law", samples);
    report
        .stat("ks", ks)
        .stat("censored", hits.iter().filter(|h| h.is_none()).count() as f64)
        .require(ks <= 0.02);
    Ok(report)
}

/// Hitting times on one fine path per sample, read on the sub-grids of each
/// step in `dts` (coarsest first, each a multiple of the last). Passes when
/// the KS distance does not grow as the step shrinks.
pub fn hitting_refinement_check(
    level: f64,
    dts: &[f64],
    horizon: f64,
    samples: usize,
    master: u64,
) -> Result<VerificationReport> {
    let fine = *dts
        .last()
        .ok_or_else(|| Error::InvalidParameter("need at least one time step".into()))?;
    let ratios: Vec<usize> = dts.iter().map(|&d| (d / fine).round() as usize).collect();
    if dts.iter().zip(&ratios).any(|(&d, &r)| r == 0 || (d - r as f64 * fine).abs() > 1e-9 * d) {
        return Err(Error::InvalidParameter("time steps must be multiples of the finest".into()));
    }
    let per = per_replicate(samples, master, |seed| {
        let path = sample_path(fine, horizon, ReplicateSeeds::from_replicate(seed).path)?;
        let w = path.values();
        Ok(ratios
            .iter()
            .map(|&r| {
                (0..w.len())
                    .step_by(r)
                    .find(|&j| w[j] >= level)
                    .map(|j| j as f64 * fine)
            })
            .collect::<Vec<_>>())
    })?;
    let mut report = VerificationReport::new("hitting-refinement", samples);
    let mut prev = f64::INFINITY;
    for (i, &dt) in dts.iter().enumerate() {
        let hits: Vec<Option<f64>> = per.iter().map(|(_, h)| h[i]).collect();
        let ks = ks_distance_censored(&hits, horizon, hitting_cdf(level));
        report.stat(&format!("ks_dt_{dt:e}"), ks).require(ks <= prev);
        prev = ks;
    }
    Ok(report)
}

/// Side of the first range crossing from 0: the plus proportion must be
/// within 0.015 of one half, and at a plus (minus) crossing the minus (plus)
/// reflected part is exactly zero.
pub fn rho_symmetry_check(params: &FlowParams<f64>, replicates: usize, master: u64) -> Result<VerificationReport> {
    let l = params.graph.l();
    let per = per_replicate(replicates, master, |seed| {
        grow_until(params, seed, params.horizon, 64.0, |real| {
            let path = real.path();
            let origin = path.point(GridTime(0));
            let c = path.range_crossing(origin, path.point(path.last()), l)?;
            let other = match c.side {
                Sign::Plus => path.window_max(&origin, &c.point).value - c.point.value,
                Sign::Minus => c.point.value - path.window_min(&origin, &c.point).value,
            };
            Some((c.side, other))
        })
    })?;
    let mut report = VerificationReport::new("rho-symmetry", replicates);
    let (mut plus, mut decided) = (0usize, 0usize);
    for (seed, r) in per {
        match r {
            Some((side, other)) => {
                decided += 1;
                plus += usize::from(side == Sign::Plus);
                if other != 0.0 {
                    report.fail_on(seed);
                }
            }
            None => report.fail_on(seed),
        }
    }
    let p = plus as f64 / decided.max(1) as f64;
    report.stat("p_plus", p).require((p - 0.5).abs() <= 0.015);
    Ok(report)
}

fn law_cdf(law: SplitLaw) -> Result<Box<dyn Fn(f64) -> f64>> {
    match law {
        SplitLaw::Uniform => Ok(Box::new(|x: f64| x.clamp(0.0, 1.0))),
        SplitLaw::Beta(a) => {
            let b = Beta::new(a, a).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            Ok(Box::new(move |x: f64| b.cdf(x.clamp(0.0, 1.0))))
        }
        other => Err(Error::InvalidParameter(format!(
            "the split-weight law check needs a continuous law, got {other}"
        ))),
    }
}

/// Reads `U+_{0,t}` as the weight of `K_{0,t}(1)` at `e^{i W+_{0,t}}` on
/// replicates with `t` before the first range crossing and `W+_{0,t} > 0`,
/// until `samples` are accepted. KS distance to `m+` at most 0.02 and
/// `|corr(U, W_t)| <= 3 / sqrt(N)`.
pub fn u_law_check(params: &FlowParams<f64>, t: f64, samples: usize, master: u64) -> Result<VerificationReport> {
    let cdf = law_cdf(params.m_plus)?;
    let p = FlowParams { horizon: t, ..*params };
    let l = p.graph.l();
    let batch = 1024;
    let mut accepted: Vec<(f64, f64)> = Vec::with_capacity(samples);
    let mut tried = 0u64;
    while accepted.len() < samples {
        let start = tried;
        let per: Result<Vec<Option<(f64, f64)>>> = {
            use rayon::prelude::*;
            (start..start + batch)
                .into_par_iter()
                .map(|i| {
                    let real = FlowRealization::sample(&p, replicate_seed(master, i))?;
                    let path = real.path();
                    let (a, b) = (path.point(GridTime(0)), path.point(path.last()));
                    if path.range_crossing(a, b, l).is_some() {
                        return Ok(None);
                    }
                    let w_plus = b.value - path.window_min(&a, &b).value;
                    if !(w_plus > 0.0) {
                        return Ok(None);
                    }
                    let k = real.kernel(GridTime(0), path.last(), CirclePoint::new(0.0))?;
                    Ok(Some((k.weight_at(CirclePoint::new(w_plus)), b.value)))
                })
                .collect()
        };
        accepted.extend(per?.into_iter().flatten());
        tried += batch;
    }
    accepted.truncate(samples);
    let u: Vec<f64> = accepted.iter().map(|x| x.0).collect();
    let w: Vec<f64> = accepted.iter().map(|x| x.1).collect();
    let ks = ks_distance(&u, cdf);
    let corr = correlation(&u, &w);
    let bound = 3.0 / (samples as f64).sqrt();
    let mut report = VerificationReport::new("u-law", samples);
    report
        .stat("ks", ks)
        .stat("corr_u_w", corr)
        .stat("corr_bound", bound)
        .stat("acceptance_rate", samples as f64 / tried as f64)
        .require(ks <= 0.02 && corr.abs() <= bound);
    Ok(report)
}

/// Distance between the resampled empirical law of `phi_{s,t}(z)` and
/// `K_{s,t}(z)`, and its Monte Carlo scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilteringOutcome {
    /// Number of atoms of `K_{s,t}(z)`; one means the map is not random given the weights.
    pub support_size: usize,
    pub distance: f64,
    pub standard_error: f64,
    pub passed: bool,
}

/// Keeps path and split weights, redraws the branch choices `resamples`
/// times and compares the average of `delta_{phi_{s,t}(z)}` with the kernel.
/// The scale is `sqrt(sum_n 2^{-n} SE_n^2)` with `SE_n` the 50-batch-means
/// error of the `n`-th test function (fewer batches below 50 resamples),
/// matching the weights of the distance.
pub fn filtering_check(
    real: &FlowRealization<f64>,
    s: GridTime,
    t: GridTime,
    z: CirclePoint<f64>,
    resamples: usize,
) -> Result<FilteringOutcome> {
    let kernel = real.kernel(s, t, z)?;
    let family = 2 * TEST_FREQUENCIES + 1;
    let mut values = vec![Vec::with_capacity(resamples); family];
    let mut cur = real.resample_epsilons();
    for _ in 0..resamples {
        let phi = cur.map(s, t, z)?;
        for (n, col) in values.iter_mut().enumerate() {
            col.push(test_function(n + 1, phi));
        }
        cur = cur.resample_epsilons();
    }
    let (mut d2, mut se2, mut weight) = (0.0, 0.0, 1.0);
    for (n, col) in values.iter().enumerate() {
        weight *= 0.5;
        let diff = mean(col) - kernel.integrate(|x| test_function(n + 1, x));
        let se = batch_means_se(col, 50.min(resamples));
        d2 += weight * diff * diff;
        se2 += weight * se * se;
    }
    let (distance, standard_error) = (d2.sqrt(), se2.sqrt());
    let passed = distance <= 3.0 * standard_error || (distance <= 1e-12 && standard_error <= 1e-12);
    Ok(FilteringOutcome {
        support_size: kernel.support_size(),
        distance,
        standard_error,
        passed,
    })
}

/// [`filtering_check`] on `cases` realizations, each at `s = 0`, a uniform
/// grid time `t` and a uniform point.
pub fn filtering_suite(
    params: &FlowParams<f64>,
    cases: usize,
    resamples: usize,
    master: u64,
) -> Result<VerificationReport> {
    let per = per_replicate(cases, master, |seed| {
        let real = FlowRealization::sample(params, seed)?;
        let mut q = queries(seed);
        let t = GridTime(q.random_range(1..=real.path().last().0));
        filtering_check(&real, GridTime(0), t, random_point(&mut q), resamples)
    })?;
    let mut report = VerificationReport::new("filtering", cases);
    let (mut worst, mut split) = (0.0f64, 0usize);
    for (seed, o) in per {
        if o.support_size > 1 {
            split += 1;
            worst = worst.max(o.distance / o.standard_error);
        }
        if !o.passed {
            report.fail_on(seed);
        }
    }
    report
        .stat("split_cases", split as f64)
        .stat("max_distance_over_se_split", worst);
    Ok(report)
}

/// Pairs of map trajectories from a common start coincide at every grid time
/// after they first meet, and `phi_{s,t}(z)` lies in the support of `K_{s,t}(z)`.
pub fn coalescence_check(
    params: &FlowParams<f64>,
    replicates: usize,
    queries_per: usize,
    master: u64,
) -> Result<VerificationReport> {
    let tol = 1e-9;
    let per = per_replicate(replicates, master, |seed| {
        let real = FlowRealization::sample(params, seed)?;
        let mut q = queries(seed);
        let last = real.path().last();
        let s = GridTime(q.random_range(0..=last.0 / 2));
        let times: Vec<GridTime> = (s.0..=last.0).map(GridTime).collect();
        let a = real.map_along(s, random_point(&mut q), &times)?;
        let b = real.map_along(s, random_point(&mut q), &times)?;
        let meet = a.iter().zip(&b).position(|(x, y)| x.distance(*y) <= tol);
        let split_after_meeting = meet.is_some_and(|m| a[m..].iter().zip(&b[m..]).any(|(x, y)| x.distance(*y) > tol));
        let mut outside = 0usize;
        for _ in 0..queries_per {
            let st = random_times(&mut q, last, 2);
            let z = random_point(&mut q);
            let phi = real.map(st[0], st[1], z)?;
            outside += usize::from(!real.kernel(st[0], st[1], z)?.contains(phi));
        }
        Ok((meet.is_some(), split_after_meeting, outside))
    })?;
    let mut report = VerificationReport::new("coalescence", replicates);
    let (mut met, mut outside_total) = (0usize, 0usize);
    for (seed, (m, split, outside)) in per {
        met += usize::from(m);
        outside_total += outside;
        if split || outside > 0 {
            report.fail_on(seed);
        }
    }
    report
        .stat("pairs_met", met as f64)
        .stat("support_queries", (replicates * queries_per) as f64)
        .stat("maps_outside_support", outside_total as f64);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::GraphParams;
    use std::f64::consts::FRAC_PI_2;

    fn params(law: SplitLaw) -> FlowParams<f64> {
        FlowParams {
            graph: GraphParams::new(FRAC_PI_2).unwrap(),
            m_plus: law,
            m_minus: law,
            dt: 1e-3,
            horizon: 2.0,
        }
    }

    #[test]
    fn coalescing_laws_filter_exactly() {
        let real = FlowRealization::sample(&params(SplitLaw::Coalescing), 4).unwrap();
        let o = filtering_check(&real, GridTime(0), GridTime(1500), CirclePoint::new(1.0), 20).unwrap();
        assert!(o.distance < 1e-12 && o.standard_error < 1e-12 && o.passed, "{o:?}");
    }

    #[test]
    fn a_single_resample_is_degenerate() {
        // Before any range crossing, from 1 and with u = 1/2, one resample is a single atom.
        let p = FlowParams { horizon: 0.05, ..params(SplitLaw::DiracHalf) };
        let real = (0..)
            .map(|i| FlowRealization::sample(&p, i).unwrap())
            .find(|r| {
                let path = r.path();
                let (a, b) = (path.point(GridTime(0)), path.point(path.last()));
                path.range_crossing(a, b, FRAC_PI_2).is_none() && b.value > path.window_min(&a, &b).value
            })
            .unwrap();
        let t = real.path().last();
        let o = filtering_check(&real, GridTime(0), t, CirclePoint::new(0.0), 1).unwrap();
        assert!(o.distance > 0.0);
    }

    #[test]
    fn small_runs_are_reproducible() {
        let p = params(SplitLaw::Uniform);
        let a = flow_property_check(&p, 3, 42).unwrap();
        assert_eq!(a, flow_property_check(&p, 3, 42).unwrap());
        assert!(a.passed, "{a:?}");
        let m = mass_check(&p, 3, 5, 42).unwrap();
        assert!(m.passed);
        let c = coalescence_check(&FlowParams { horizon: 0.5, ..p }, 3, 5, 42).unwrap();
        assert!(c.passed, "{c:?}");
    }

    #[test]
    fn hitting_cdf_is_a_distribution() {
        let f = hitting_cdf(1.0);
        assert_eq!(f(0.0), 0.0);
        assert!((f(1.0) - 2.0 * (1.0 - normal_cdf(1.0))).abs() < 1e-15);
        assert!(f(1e6) > 0.99);
        assert!(law_cdf(SplitLaw::DiracHalf).is_err());
        assert!((law_cdf(SplitLaw::Beta(2.0)).unwrap()(0.5) - 0.5).abs() < 1e-12);
    }
}
