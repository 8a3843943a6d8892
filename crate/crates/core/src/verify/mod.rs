//! Exact event detectors and Monte Carlo verdicts on simulated flows.
//!
//! Every check derives one seed per replicate from a master seed, so a
//! reported failing seed replays the offending replicate on its own.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circle::{CirclePoint, GraphParams};
use crate::error::{Error, Result};
use crate::flow::{FlowParams, FlowRealization};
use crate::seed::replicate_seed;

mod chaos_check;
mod checks;
mod collapse;
mod ladder;
mod reflected;

pub use chaos_check::{chaos_check, first_order_variance, ChaosCheck};
pub use checks::{
    coalescence_check, filtering_check, filtering_suite, flow_property_check, hitting_law_check,
    hitting_refinement_check, mass_check, rho_symmetry_check, sde_residual_check, u_law_check,
    FilteringOutcome,
};
pub use collapse::{
    collapse_check, detect_a, detect_collapse_sequence, CollapseEventConfig, CollapseSequence,
    CollapseTime,
};
pub use ladder::{detect_ladder, ladder_check, LadderConfig, LadderDetection};
pub use reflected::{reflected_mismatch, reflected_representation_check, skorokhod_fold};

/// Outcome of one named check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub replicates: usize,
    pub passed: bool,
    pub statistics: BTreeMap<String, f64>,
    /// Replicate seeds on which an exact assertion failed.
    pub failing_seeds: Vec<u64>,
}

impl VerificationReport {
    pub fn new(check: impl Into<String>, replicates: usize) -> Self {
        Self {
            check: check.into(),
            replicates,
            passed: true,
            statistics: BTreeMap::new(),
            failing_seeds: Vec::new(),
        }
    }

    pub fn stat(&mut self, name: &str, value: f64) -> &mut Self {
        self.statistics.insert(name.to_string(), value);
        self
    }

    pub fn require(&mut self, ok: bool) -> &mut Self {
        self.passed &= ok;
        self
    }

    pub fn fail_on(&mut self, seed: u64) {
        self.passed = false;
        self.failing_seeds.push(seed);
    }
}

/// Names accepted by the `verify` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CheckName {
    FlowProperty,
    SdeResidual,
    ULaw,
    Filtering,
    Collapse,
    Ladder,
    Reflected,
    Chaos,
    HittingLaw,
    Mass,
    RhoSymmetry,
    Coalescence,
}

impl CheckName {
    pub const ALL: [CheckName; 12] = [
        CheckName::FlowProperty,
        CheckName::SdeResidual,
        CheckName::ULaw,
        CheckName::Filtering,
        CheckName::Collapse,
        CheckName::Ladder,
        CheckName::Reflected,
        CheckName::Chaos,
        CheckName::HittingLaw,
        CheckName::Mass,
        CheckName::RhoSymmetry,
        CheckName::Coalescence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::FlowProperty => "flow-property",
            CheckName::SdeResidual => "sde-residual",
            CheckName::ULaw => "u-law",
            CheckName::Filtering => "filtering",
            CheckName::Collapse => "collapse",
            CheckName::Ladder => "ladder",
            CheckName::Reflected => "reflected",
            CheckName::Chaos => "chaos",
            CheckName::HittingLaw => "hitting-law",
            CheckName::Mass => "mass",
            CheckName::RhoSymmetry => "rho-symmetry",
            CheckName::Coalescence => "coalescence",
        }
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CheckName::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| {
                let known: Vec<_> = CheckName::ALL.iter().map(|c| c.as_str()).collect();
                Error::InvalidParameter(format!(
                    "unknown check `{s}`, expected one of {}",
                    known.join(", ")
                ))
            })
    }
}

/// Probe set: three points inside the positive edge, four inside the
/// negative edge, and the vertex 1.
pub fn probe_points(g: &GraphParams<f64>) -> Vec<CirclePoint<f64>> {
    let l = g.l();
    let gap = (2.0 * std::f64::consts::PI - l) / 5.0;
    let mut probes: Vec<_> = [0.25, 0.5, 0.75]
        .iter()
        .map(|q| CirclePoint::new(q * l))
        .collect();
    probes.extend((1..=4).map(|k| CirclePoint::new(l + k as f64 * gap)));
    probes.push(CirclePoint::new(0.0));
    probes
}

/// Samples a realization over a horizon that doubles from `start` up to
/// `cap` until `decide` returns a verdict. Paths and decorations are prefix
/// consistent, so the verdict is the one a single long sample would give.
pub(crate) fn grow_until<R>(
    params: &FlowParams<f64>,
    seed: u64,
    start: f64,
    cap: f64,
    mut decide: impl FnMut(&FlowRealization<f64>) -> Option<R>,
) -> Result<Option<R>> {
    let mut horizon = start.min(cap);
    loop {
        let real = FlowRealization::sample(&FlowParams { horizon, ..*params }, seed)?;
        if let Some(r) = decide(&real) {
            return Ok(Some(r));
        }
        if horizon >= cap {
            return Ok(None);
        }
        horizon = (2.0 * horizon).min(cap);
    }
}

/// Runs `f` on replicates `0..n` under `master`, in parallel, results in index order.
pub(crate) fn per_replicate<R: Send>(
    n: usize,
    master: u64,
    f: impl Fn(u64) -> Result<R> + Sync,
) -> Result<Vec<(u64, R)>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let seed = replicate_seed(master, i);
            f(seed).map(|r| (seed, r))
        })
        .collect()
}
