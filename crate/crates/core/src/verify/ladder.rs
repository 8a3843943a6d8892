//! Support growth along the range-crossing chain: on the nested path events
//! `C_n`, the kernel from the vertex 1 has exactly `n + 1` atoms at `rho^n`.

use std::f64::consts::PI;

use crate::circle::{AtomicMeasure, CirclePoint, GraphParams, Sign};
use crate::decorations::SplitLaw;
use crate::error::{Error, Result};
use crate::flow::{FlowParams, FlowRealization, RhoChain};
use crate::path::GridTime;
use crate::stats::wilson_interval;

use super::{grow_until, per_replicate, VerificationReport};

/// Decreasing positive thresholds `alpha_1 > alpha_2 > ...` below
/// `min(l, 2 (pi - l))`, and the depth `n` of the event to detect.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderConfig {
    alpha: Vec<f64>,
    depth: usize,
}

impl LadderConfig {
    pub fn new(g: &GraphParams<f64>, alpha: Vec<f64>, depth: usize) -> Result<Self> {
        let bound = g.l().min(2.0 * (PI - g.l()));
        if depth == 0 {
            return Err(Error::InvalidParameter("ladder depth must be at least 1".into()));
        }
        if alpha.len() < depth {
            return Err(Error::InvalidParameter(format!(
                "depth {depth} needs {depth} thresholds, got {}",
                alpha.len()
            )));
        }
        if !(alpha[0] < bound) || alpha.iter().any(|&a| !(a > 0.0)) || alpha.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::InvalidParameter(format!(
                "thresholds must decrease, stay positive and start below {bound}"
            )));
        }
        Ok(Self { alpha, depth })
    }

    /// `alpha_k = alpha_1 / k`.
    pub fn harmonic(g: &GraphParams<f64>, alpha1: f64, depth: usize) -> Result<Self> {
        Self::new(g, (1..=depth).map(|k| alpha1 / k as f64).collect(), depth)
    }

    /// Harmonic thresholds from `alpha_1 = 0.9 min(l, 2 (pi - l))`.
    pub fn default_for(g: &GraphParams<f64>, depth: usize) -> Result<Self> {
        Self::harmonic(g, 0.9 * g.l().min(2.0 * (PI - g.l())), depth)
    }

    pub fn alpha(&self, k: usize) -> f64 {
        self.alpha[k - 1]
    }

    pub fn depth(&self) -> usize {
        self.depth
    }
}

/// Verdict of the ladder detector on one realization.
#[derive(Debug, Clone, PartialEq)]
pub struct LadderDetection {
    pub fired: bool,
    /// `K_{0, rho^n}(1)`; absent when the chain ends before `rho^n`.
    pub support: Option<AtomicMeasure<f64>>,
}

fn increment(chain: &RhoChain<f64>, i: usize) -> f64 {
    chain.anchors[i].value - chain.anchors[i - 1].value
}

/// Whether the event `A_i` holds on the chain, which must reach `rho^i`.
fn step_holds(chain: &RhoChain<f64>, cfg: &LadderConfig, l: f64, i: usize) -> bool {
    let side = chain.sides[i - 1];
    if i == 1 {
        return side == Sign::Plus;
    }
    let w = increment(chain, i);
    let (hi, lo) = (cfg.alpha(i - 1), cfg.alpha(i));
    if i.is_multiple_of(2) {
        side == Sign::Minus && -l + lo < w && w < -l + hi
    } else {
        side == Sign::Plus && l - hi < w && w < l - lo
    }
}

/// Number of leading events `A_1, A_2, ...` that hold, up to `depth`, and
/// whether that count is final on this chain.
fn held_prefix(chain: &RhoChain<f64>, cfg: &LadderConfig, l: f64, depth: usize) -> (usize, bool) {
    let available = chain.anchors.len() - 1;
    for i in 1..=depth {
        if i > available {
            return (i - 1, false);
        }
        if !step_holds(chain, cfg, l, i) {
            return (i - 1, true);
        }
    }
    (depth, true)
}

fn check_laws(plus: SplitLaw, minus: SplitLaw) -> Result<()> {
    for law in [plus, minus] {
        if law.has_endpoint_atoms() {
            return Err(Error::InvalidParameter(format!(
                "ladder detection needs split laws without atoms at 0 or 1, got {law}"
            )));
        }
    }
    Ok(())
}

/// Detects `C_n` for `n = cfg.depth()` from time 0 and reads the support of
/// the kernel from 1 at `rho^n`. The event itself depends on the path only.
pub fn detect_ladder(real: &FlowRealization<f64>, cfg: &LadderConfig) -> Result<LadderDetection> {
    check_laws(real.plus_store().law(), real.minus_store().law())?;
    let l = real.graph().l();
    let chain = real.rho_chain(GridTime(0));
    let (held, _) = held_prefix(&chain, cfg, l, cfg.depth);
    let support = match chain.anchors.get(cfg.depth) {
        Some(end) => Some(real.kernel_between(&chain.anchors[0], end, CirclePoint::new(0.0))?),
        None => None,
    };
    Ok(LadderDetection {
        fired: held == cfg.depth,
        support,
    })
}

/// Atoms that the kernel from 1 must carry at `rho^n` on `C_n`.
fn expected_atoms(chain: &RhoChain<f64>, l: f64, n: usize) -> Vec<f64> {
    if n == 0 {
        return vec![0.0];
    }
    if n.is_multiple_of(2) {
        vec![0.0, 2.0 * l, 2.0 * PI - l - increment(chain, n)]
    } else if n == 1 {
        vec![l, 2.0 * PI - l]
    } else {
        vec![l, 2.0 * l - increment(chain, n), 2.0 * PI - l]
    }
}

/// Largest mismatch of the support at `rho^n` with the predicted anchors:
/// infinite on a wrong atom count, else the worst angular distance.
fn support_mismatch(real: &FlowRealization<f64>, chain: &RhoChain<f64>, n: usize) -> Result<f64> {
    let k = real.kernel_between(&chain.anchors[0], &chain.anchors[n], CirclePoint::new(0.0))?;
    if k.support_size() != n + 1 {
        return Ok(f64::INFINITY);
    }
    let l = real.graph().l();
    Ok(expected_atoms(chain, l, n)
        .into_iter()
        .map(|theta| {
            let p = CirclePoint::new(theta);
            k.atoms()
                .iter()
                .map(|a| a.point.distance(p))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max))
}

/// Detects `C_1, ..., C_depth` on each replicate, growing the horizon from
/// `params.horizon` up to `horizon_cap` until the verdict is final, and checks
/// the support on every fired event.
pub fn ladder_check(
    params: &FlowParams<f64>,
    cfg: &LadderConfig,
    replicates: usize,
    horizon_cap: f64,
    master: u64,
) -> Result<VerificationReport> {
    let l = params.graph.l();
    let depth = cfg.depth;
    check_laws(params.m_plus, params.m_minus)?;
    let per = per_replicate(replicates, master, |seed| {
        let mut out = Ok((0usize, 0.0f64));
        let decided = grow_until(params, seed, params.horizon, horizon_cap, |real| {
            let chain = real.rho_chain(GridTime(0));
            let (held, final_) = held_prefix(&chain, cfg, l, depth);
            if !final_ {
                return None;
            }
            let mut worst = 0.0f64;
            for n in 1..=held {
                match support_mismatch(real, &chain, n) {
                    Ok(d) => worst = worst.max(d),
                    Err(e) => {
                        out = Err(e);
                        return Some(());
                    }
                }
            }
            out = Ok((held, worst));
            Some(())
        })?;
        let (held, worst) = out?;
        Ok((held, worst, decided.is_some()))
    })?;
    let mut report = VerificationReport::new("ladder", replicates);
    let mut fired = vec![0usize; depth + 1];
    let mut undecided = 0usize;
    let mut worst = 0.0f64;
    for (seed, (held, d, decided)) in per {
        undecided += usize::from(!decided);
        for c in fired.iter_mut().take(held + 1).skip(1) {
            *c += 1;
        }
        if held > 0 {
            worst = worst.max(d);
        }
        if d > 1e-9 {
            report.fail_on(seed);
        }
    }
    for n in 1..=depth {
        let (lo, hi) = wilson_interval(fired[n], replicates, 1.96);
        report
            .stat(&format!("fired_{n}"), fired[n] as f64)
            .stat(&format!("p_{n}_ci_low"), lo)
            .stat(&format!("p_{n}_ci_high"), hi)
            .require(lo > 0.0);
    }
    report
        .stat("undecided", undecided as f64)
        .stat("max_anchor_distance", worst);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decorations::DecorationStore;
    use crate::path::BrownianPath;

    fn g() -> GraphParams<f64> {
        GraphParams::new(2.0 * PI / 3.0).unwrap()
    }

    fn explicit(values: &[f64], law: SplitLaw) -> FlowRealization<f64> {
        FlowRealization::new(
            BrownianPath::from_values(0.01, values.to_vec()).unwrap(),
            DecorationStore::new(Sign::Plus, law, 1),
            DecorationStore::new(Sign::Minus, law, 2),
            g(),
        )
        .unwrap()
    }

    #[test]
    fn thresholds_are_validated() {
        assert!(LadderConfig::new(&g(), vec![0.5, 0.25], 2).is_ok());
        assert!(LadderConfig::new(&g(), vec![0.5, 0.6], 2).is_err());
        assert!(LadderConfig::new(&g(), vec![2.5, 0.6], 2).is_err());
        assert!(LadderConfig::new(&g(), vec![0.5], 2).is_err());
        assert!(LadderConfig::new(&g(), vec![0.5], 0).is_err());
        let d = LadderConfig::default_for(&g(), 4).unwrap();
        assert!((d.alpha(1) - 0.9 * 2.0 * PI / 3.0).abs() < 1e-15);
        assert!((d.alpha(4) - d.alpha(1) / 4.0).abs() < 1e-15);
    }

    #[test]
    fn first_rung_splits_the_vertex_in_two() {
        let l = g().l();
        // Rises straight through l, then falls by l + 0.3 from the new maximum.
        let values = [0.0, 1.0, 2.2, 1.0, 0.0, -0.5, -0.9];
        let real = explicit(&values, SplitLaw::Uniform);
        let cfg = LadderConfig::default_for(&g(), 1).unwrap();
        let d = detect_ladder(&real, &cfg).unwrap();
        assert!(d.fired);
        let support = d.support.unwrap();
        assert_eq!(support.support_size(), 2);
        assert!(support.contains(CirclePoint::new(l)) && support.contains(CirclePoint::new(-l)));
        assert!(detect_ladder(&real, &cfg).unwrap().fired);
    }

    #[test]
    fn second_rung_follows_the_window_condition() {
        let l = g().l();
        let cfg = LadderConfig::new(&g(), vec![0.5, 0.25], 2).unwrap();
        // rho^1 at W = l; then a fall of l from the maximum l + 0.1, so the
        // increment between anchors is -l + 0.1 < -l + 0.25: A_2 fails.
        let values = [0.0, l, l + 0.1, 0.05];
        let d = detect_ladder(&explicit(&values, SplitLaw::Uniform), &cfg).unwrap();
        assert!(!d.fired);
        // Maximum l + 0.3 gives increment -l + 0.3, inside (-l + 0.25, -l + 0.5).
        let values = [0.0, l, l + 0.3, 0.0];
        let real = explicit(&values, SplitLaw::Uniform);
        let d = detect_ladder(&real, &cfg).unwrap();
        assert!(d.fired);
        let chain = real.rho_chain(GridTime(0));
        assert!(support_mismatch(&real, &chain, 2).unwrap() < 1e-12);
    }

    #[test]
    fn endpoint_atoms_are_rejected() {
        let real = explicit(&[0.0, 1.0, 2.5], SplitLaw::Coalescing);
        assert!(detect_ladder(&real, &LadderConfig::default_for(&g(), 1).unwrap()).is_err());
    }
}
