//! Times at which every starting point is sent to a single vertex.

use std::f64::consts::PI;

use crate::circle::{measure_distance, AtomicMeasure, CirclePoint, GraphParams, Sign};
use crate::error::{Error, Result};
use crate::flow::{FlowParams, FlowRealization};
use crate::path::{BrownianPath, PathPoint};
use crate::stats::wilson_interval;

use super::{per_replicate, probe_points, VerificationReport};

/// Settings of the collapse detectors. `delta` is only used when `l != pi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseEventConfig {
    graph: GraphParams<f64>,
    delta: f64,
}

impl CollapseEventConfig {
    pub fn new(graph: GraphParams<f64>, delta: f64) -> Result<Self> {
        let l = graph.l();
        if !graph.is_antipodal() && !(delta > 0.0 && l - delta > 0.0 && l + delta < PI) {
            return Err(Error::InvalidParameter(format!(
                "slack {delta} must satisfy 0 < l - delta < l + delta < pi for l = {l}"
            )));
        }
        Ok(Self { graph, delta })
    }

    pub fn graph(&self) -> &GraphParams<f64> {
        &self.graph
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Level `2 (pi - l)` whose hit closes a collapse window.
    pub fn level(&self) -> f64 {
        2.0 * (PI - self.graph.l())
    }
}

/// A time at which the kernel from 0 is predicted to be `delta_target` for
/// every starting point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseTime {
    pub point: PathPoint<f64>,
    pub target: CirclePoint<f64>,
}

/// Collapse times found on one path, and the number of windows examined.
#[derive(Debug, Clone, PartialEq)]
pub struct CollapseSequence {
    pub windows: usize,
    pub times: Vec<CollapseTime>,
}

/// Whether `W - W(start)` climbs `2 (pi - l)` before falling `delta` below its
/// running maximum, within the path.
pub fn detect_a(path: &BrownianPath<f64>, start: &PathPoint<f64>, cfg: &CollapseEventConfig) -> Result<bool> {
    if cfg.graph.is_antipodal() {
        return Err(Error::InvalidParameter(
            "the level-before-drawdown event needs l != pi".into(),
        ));
    }
    let end = path.point(path.last());
    Ok(path
        .level_before_drawdown(*start, end, cfg.level(), cfg.delta)
        .is_some())
}

/// For `l = pi`: alternating first times where `W+` (then `W-`, then `W+`
/// again) measured from the previous time reaches `pi`, targeting `-1` and `1`
/// in turn. For `l != pi`: windows `sigma_k -> sigma_{k+1}` with
/// `sigma_{k+1}` the hit of `2 (pi - l)` after `rho_{sigma_k}`; the window
/// counts when `rho_{sigma_k}` fires on the plus side and the level comes
/// before a drawdown of `delta`, and then targets `e^{il}`.
pub fn detect_collapse_sequence(real: &FlowRealization<f64>, cfg: &CollapseEventConfig) -> Result<CollapseSequence> {
    let path = real.path();
    let origin = path.point(crate::path::GridTime(0));
    let end = path.point(path.last());
    let g = cfg.graph;
    let mut times = Vec::new();
    let mut windows = 0;
    if g.is_antipodal() {
        let mut cur = origin;
        let mut side = Sign::Plus;
        while let Some(p) = path.reflected_crossing(cur, end, side, PI) {
            windows += 1;
            let target = match side {
                Sign::Plus => CirclePoint::new(PI),
                Sign::Minus => CirclePoint::new(0.0),
            };
            times.push(CollapseTime { point: p, target });
            side = match side {
                Sign::Plus => Sign::Minus,
                Sign::Minus => Sign::Plus,
            };
            cur = p;
        }
        return Ok(CollapseSequence { windows, times });
    }
    let mut sigma = origin;
    loop {
        let Some(rho) = path.range_crossing(sigma, end, g.l()) else {
            break;
        };
        let Some(next) = path.level_crossing(rho.point, end, cfg.level()) else {
            break;
        };
        windows += 1;
        if rho.side == Sign::Plus && detect_a(path, &rho.point, cfg)? {
            times.push(CollapseTime {
                point: next,
                target: g.vertex_l(),
            });
        }
        sigma = next;
    }
    Ok(CollapseSequence { windows, times })
}

/// Largest distance between `K_{0,time}(z)` and the target Dirac mass over
/// the probe set; infinite when some kernel has more than one atom.
fn probe_mismatch(real: &FlowRealization<f64>, time: &CollapseTime) -> Result<f64> {
    let origin = real.path().point(crate::path::GridTime(0));
    let target = AtomicMeasure::dirac(time.target);
    let mut worst = 0.0f64;
    for z in probe_points(real.graph()) {
        let k = real.kernel_between(&origin, &time.point, z)?;
        if k.support_size() != 1 {
            return Ok(f64::INFINITY);
        }
        worst = worst.max(measure_distance(&k, &target));
    }
    Ok(worst)
}

/// Runs the detector on `replicates` realizations and checks every detected
/// time on the probe set. For `l != pi` the proportion of windows that fire
/// must also have a 95% Wilson interval excluding zero.
pub fn collapse_check(
    params: &FlowParams<f64>,
    cfg: &CollapseEventConfig,
    replicates: usize,
    master: u64,
) -> Result<VerificationReport> {
    let params = FlowParams {
        graph: cfg.graph,
        ..*params
    };
    let per = per_replicate(replicates, master, |seed| {
        let real = FlowRealization::sample(&params, seed)?;
        let seq = detect_collapse_sequence(&real, cfg)?;
        let mut worst = 0.0f64;
        for t in &seq.times {
            worst = worst.max(probe_mismatch(&real, t)?);
        }
        Ok((seq.windows, seq.times.len(), worst))
    })?;
    let mut report = VerificationReport::new("collapse", replicates);
    let (mut windows, mut events, mut worst) = (0usize, 0usize, 0.0f64);
    for (seed, (w, e, d)) in per {
        windows += w;
        events += e;
        worst = worst.max(d);
        if d > 1e-9 {
            report.fail_on(seed);
        }
    }
    report
        .stat("windows", windows as f64)
        .stat("events", events as f64)
        .stat("max_probe_distance", if events == 0 { 0.0 } else { worst });
    if cfg.graph.is_antipodal() {
        report.require(events > 0);
    } else {
        let (lo, hi) = wilson_interval(events, windows, 1.96);
        report
            .stat("event_rate", events as f64 / windows.max(1) as f64)
            .stat("event_rate_ci_low", lo)
            .stat("event_rate_ci_high", hi)
            .require(lo > 0.0);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decorations::{DecorationStore, SplitLaw};

    fn graph(l: f64) -> GraphParams<f64> {
        GraphParams::new(l).unwrap()
    }

    #[test]
    fn slack_is_validated_away_from_pi() {
        let g = graph(2.0 * PI / 3.0);
        assert!(CollapseEventConfig::new(g, 0.3).is_ok());
        assert!(CollapseEventConfig::new(g, 1.2).is_err());
        assert!(CollapseEventConfig::new(g, 0.0).is_err());
        assert!(CollapseEventConfig::new(graph(PI), 0.0).is_ok());
    }

    #[test]
    fn a_event_on_monotone_and_dropping_paths() {
        let cfg = CollapseEventConfig::new(graph(2.0 * PI / 3.0), 0.3).unwrap();
        let up: Vec<f64> = (0..40).map(|j| 0.1 * j as f64).collect();
        let p = BrownianPath::from_values(0.01, up).unwrap();
        assert!(detect_a(&p, &p.point(crate::path::GridTime(0)), &cfg).unwrap());
        let drop = vec![0.0, 0.5, 0.1, 3.0];
        let p = BrownianPath::from_values(0.01, drop).unwrap();
        assert!(!detect_a(&p, &p.point(crate::path::GridTime(0)), &cfg).unwrap());
        let pi_cfg = CollapseEventConfig::new(graph(PI), 0.3).unwrap();
        assert!(detect_a(&p, &p.point(crate::path::GridTime(0)), &pi_cfg).is_err());
    }

    #[test]
    fn antipodal_sequence_alternates_targets() {
        let values = vec![0.0, -0.5, 1.0, 2.8, 3.5, 1.0, -0.5, 0.0, 3.0];
        let real = FlowRealization::new(
            BrownianPath::from_values(0.01, values).unwrap(),
            DecorationStore::new(Sign::Plus, SplitLaw::Uniform, 1),
            DecorationStore::new(Sign::Minus, SplitLaw::Uniform, 2),
            graph(PI),
        )
        .unwrap();
        let cfg = CollapseEventConfig::new(graph(PI), 0.0).unwrap();
        let seq = detect_collapse_sequence(&real, &cfg).unwrap();
        let targets: Vec<f64> = seq.times.iter().map(|t| t.target.theta()).collect();
        assert_eq!(targets, vec![PI, 0.0, PI]);
        assert!((seq.times[0].point.value - (PI - 0.5)).abs() < 1e-12);
        for t in &seq.times {
            assert_eq!(probe_mismatch(&real, t).unwrap(), 0.0);
        }
        assert_eq!(detect_collapse_sequence(&real, &cfg).unwrap(), seq);
    }
}
