//! For `l = pi` the kernel from 1 sits on `{e^{iX}, e^{-iX}}`, with `X` the
//! driver reflected into `[0, pi]` at both ends.

use std::f64::consts::PI;

use rand::Rng;

use crate::circle::CirclePoint;
use crate::error::{Error, Result};
use crate::flow::{FlowParams, FlowRealization};
use crate::path::{BrownianPath, GridTime};
use crate::seed::{derive, rng};

use super::{per_replicate, VerificationReport};

const QUERY_STREAM: u64 = 0x5245_464c;

/// Discrete two-sided Skorokhod map of `W_{s, .}` into `[0, pi]`, read at `t`:
/// `X_{j+1} = clamp(X_j + dW_j, 0, pi)` from `X_s = 0`.
pub fn skorokhod_fold(path: &BrownianPath<f64>, s: GridTime, t: GridTime) -> f64 {
    let w = path.values();
    (s.0..t.0).fold(0.0, |x, j| (x + w[j + 1] - w[j]).clamp(0.0, PI))
}

/// Hausdorff distance, in angle, between the support of `K_{s,t}(1)` and
/// `{e^{iX}, e^{-iX}}`.
pub fn reflected_mismatch(real: &FlowRealization<f64>, s: GridTime, t: GridTime) -> Result<f64> {
    if !real.graph().is_antipodal() {
        return Err(Error::InvalidParameter(
            "the reflected representation holds for l = pi only".into(),
        ));
    }
    let x = skorokhod_fold(real.path(), s, t);
    let expected = [CirclePoint::new(x), CirclePoint::new(-x)];
    let k = real.kernel(s, t, CirclePoint::new(0.0))?;
    let nearest = |p: CirclePoint<f64>, set: &mut dyn Iterator<Item = CirclePoint<f64>>| {
        set.map(|q| q.distance(p)).fold(f64::INFINITY, f64::min)
    };
    let mut worst = 0.0f64;
    for a in k.atoms() {
        worst = worst.max(nearest(a.point, &mut expected.iter().copied()));
    }
    for e in expected {
        worst = worst.max(nearest(e, &mut k.atoms().iter().map(|a| a.point)));
    }
    Ok(worst)
}

/// On each replicate draws `s` uniform on the grid of `[0, 1]` and
/// `t = s + U[0, 2]`, and requires a support mismatch of at most `5 sqrt(dt)`.
pub fn reflected_representation_check(
    params: &FlowParams<f64>,
    replicates: usize,
    master: u64,
) -> Result<VerificationReport> {
    if !params.graph.is_antipodal() {
        return Err(Error::InvalidParameter(
            "the reflected check needs l = pi".into(),
        ));
    }
    let params = FlowParams { horizon: 3.0, ..*params };
    let tol = 5.0 * params.dt.sqrt();
    let per = per_replicate(replicates, master, |seed| {
        let real = FlowRealization::sample(&params, seed)?;
        let mut q = rng(derive(seed, &[QUERY_STREAM]));
        let path = real.path();
        let s = path.grid_time_at(q.random_range(0.0..1.0));
        let t = path.grid_time_at(s.time(params.dt) + q.random_range(0.0..2.0));
        reflected_mismatch(&real, s, t)
    })?;
    let mut report = VerificationReport::new("reflected", replicates);
    let mut worst = 0.0f64;
    for (seed, d) in per {
        worst = worst.max(d);
        if d > tol {
            report.fail_on(seed);
        }
    }
    report.stat("max_mismatch", worst).stat("tolerance", tol);
    Ok(report)
}
