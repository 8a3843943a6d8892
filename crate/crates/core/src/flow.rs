//! Path-wise evaluation of the flow of kernels `K_{s,t}(z)` and of the
//! coalescing flow of maps `phi_{s,t}(z)`.
//!
//! Between consecutive range-crossing anchors the kernel has a closed form in
//! the reflected parts `W+`, `W-` of the window; over longer windows the
//! one-interval kernels are composed along the anchor chain. All windows live
//! on the piecewise-linear interpolation of the grid path, so anchors sit
//! exactly where the running range equals `l`.

use std::sync::Arc;

use crate::circle::{epsilon, pushforward, AtomicMeasure, CirclePoint, GraphParams, Sign};
use crate::decorations::{DecorationStore, ExtremumKey, SplitLaw};
use crate::error::{Error, Result};
use crate::fourier::FourierFunction;
use crate::path::{exit_interval, exit_vertex, sample_path, BrownianPath, GridTime, PathPoint, Vertex};
use crate::scalar::Scalar;
use crate::seed::ReplicateSeeds;

/// Inputs shared by all replicates of an experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowParams<T> {
    pub graph: GraphParams<T>,
    pub m_plus: SplitLaw,
    pub m_minus: SplitLaw,
    pub dt: T,
    pub horizon: T,
}

/// Anchors `rho^0 = start < rho^1 < ...` of a window, with the side whose
/// reflected part reached `l` at each anchor after the first.
#[derive(Debug, Clone, PartialEq)]
pub struct RhoChain<T> {
    pub anchors: Vec<PathPoint<T>>,
    pub sides: Vec<Sign>,
}

impl<T: Scalar> RhoChain<T> {
    /// Index `k` of the last anchor at or before grid time `t`.
    pub fn locate(&self, t: GridTime) -> usize {
        self.anchors
            .iter()
            .rposition(|a| a.not_after_grid(t))
            .unwrap_or(0)
    }
}

enum Motion<T> {
    Moving(CirclePoint<T>),
    At(Vertex),
}

/// One path and its two decoration stores: evaluates kernels and maps on demand.
#[derive(Debug, Clone)]
pub struct FlowRealization<T> {
    path: Arc<BrownianPath<T>>,
    plus: DecorationStore<T>,
    minus: DecorationStore<T>,
    graph: GraphParams<T>,
}

impl<T: Scalar> FlowRealization<T> {
    pub fn new(
        path: BrownianPath<T>,
        plus: DecorationStore<T>,
        minus: DecorationStore<T>,
        graph: GraphParams<T>,
    ) -> Result<Self> {
        if plus.side() != Sign::Plus || minus.side() != Sign::Minus {
            return Err(Error::InvalidParameter(
                "decoration stores must be given as (plus, minus)".into(),
            ));
        }
        Ok(Self {
            path: Arc::new(path),
            plus,
            minus,
            graph,
        })
    }

    /// Samples the path and sets up empty stores from one replicate seed.
    pub fn sample(params: &FlowParams<T>, replicate_seed: u64) -> Result<Self> {
        let seeds = ReplicateSeeds::from_replicate(replicate_seed);
        let path = sample_path(params.dt, params.horizon, seeds.path)?;
        Self::new(
            path,
            DecorationStore::new(Sign::Plus, params.m_plus, seeds.plus),
            DecorationStore::new(Sign::Minus, params.m_minus, seeds.minus),
            params.graph,
        )
    }

    pub fn path(&self) -> &BrownianPath<T> {
        &self.path
    }

    pub fn graph(&self) -> &GraphParams<T> {
        &self.graph
    }

    pub fn plus_store(&self) -> &DecorationStore<T> {
        &self.plus
    }

    pub fn minus_store(&self) -> &DecorationStore<T> {
        &self.minus
    }

    /// Same path and split weights, every branch choice redrawn.
    pub fn resample_epsilons(&self) -> Self {
        Self {
            path: Arc::clone(&self.path),
            plus: self.plus.resample_epsilons(),
            minus: self.minus.resample_epsilons(),
            graph: self.graph,
        }
    }

    fn window(&self, s: GridTime, t: GridTime) -> Result<(PathPoint<T>, PathPoint<T>)> {
        self.path.check(t)?;
        if s > t {
            return Err(Error::InvalidParameter(format!(
                "window start {} after end {}",
                s.0, t.0
            )));
        }
        Ok((self.path.point(s), self.path.point(t)))
    }

    fn snap(&self, z: CirclePoint<T>) -> CirclePoint<T> {
        self.graph.nearby_vertex(z, T::merge_tol()).unwrap_or(z)
    }

    pub fn chain(&self, from: PathPoint<T>, until: PathPoint<T>) -> RhoChain<T> {
        let mut anchors = vec![from];
        let mut sides = Vec::new();
        let mut cur = from;
        while let Some(c) = self.path.range_crossing(cur, until, self.graph.l()) {
            anchors.push(c.point);
            sides.push(c.side);
            cur = c.point;
        }
        RhoChain { anchors, sides }
    }

    /// Anchor chain started at grid time `s`, truncated at the horizon.
    pub fn rho_chain(&self, s: GridTime) -> RhoChain<T> {
        self.chain(self.path.point(s), self.path.point(self.path.last()))
    }

    fn classify(&self, a: &PathPoint<T>, b: &PathPoint<T>, z: CirclePoint<T>) -> Motion<T> {
        let z = self.snap(z);
        if z == self.graph.vertex_one() {
            return Motion::At(Vertex::One);
        }
        if z == self.graph.vertex_l() {
            return Motion::At(Vertex::L);
        }
        let (lower, upper) = exit_interval(z, &self.graph);
        let tol = T::merge_tol();
        match self.path.first_exit(a, b, lower + tol, upper - tol) {
            Some((_, side)) => Motion::At(exit_vertex(z, &self.graph, side)),
            None => {
                let e = epsilon(z, &self.graph).value::<T>();
                Motion::Moving(z.rotate(e * (b.value - a.value)))
            }
        }
    }

    fn reflected_plus(&self, a: &PathPoint<T>, b: &PathPoint<T>) -> (T, ExtremumKey) {
        let m = self.path.window_min(a, b);
        ((b.value - m.value).min(self.graph.l()), ExtremumKey::of(&m))
    }

    fn reflected_minus(&self, a: &PathPoint<T>, b: &PathPoint<T>) -> (T, ExtremumKey) {
        let m = self.path.window_max(a, b);
        ((m.value - b.value).min(self.graph.l()), ExtremumKey::of(&m))
    }

    fn vertex_kernel(&self, a: &PathPoint<T>, b: &PathPoint<T>, v: Vertex) -> AtomicMeasure<T> {
        let l = self.graph.l();
        let (w, key, store, base) = match v {
            Vertex::One => {
                let (w, k) = self.reflected_plus(a, b);
                (w, k, &self.plus, T::zero())
            }
            Vertex::L => {
                let (w, k) = self.reflected_minus(a, b);
                (w, k, &self.minus, l)
            }
        };
        if w <= T::zero() {
            return AtomicMeasure::dirac(CirclePoint::new(base));
        }
        let d = store.get(key);
        AtomicMeasure::two_point(
            self.snap(CirclePoint::new(base + w)),
            self.snap(CirclePoint::new(base - w)),
            d.u,
        )
    }

    fn vertex_map(&self, a: &PathPoint<T>, b: &PathPoint<T>, v: Vertex) -> CirclePoint<T> {
        let (w, key, store, base) = match v {
            Vertex::One => {
                let (w, k) = self.reflected_plus(a, b);
                (w, k, &self.plus, T::zero())
            }
            Vertex::L => {
                let (w, k) = self.reflected_minus(a, b);
                (w, k, &self.minus, self.graph.l())
            }
        };
        if w <= T::zero() {
            return CirclePoint::new(base);
        }
        let e = store.get(key).epsilon.value::<T>();
        self.snap(CirclePoint::new(base + e * w))
    }

    fn interval_kernel(&self, a: &PathPoint<T>, b: &PathPoint<T>, z: CirclePoint<T>) -> AtomicMeasure<T> {
        match self.classify(a, b, z) {
            Motion::Moving(p) => AtomicMeasure::dirac(p),
            Motion::At(v) => self.vertex_kernel(a, b, v),
        }
    }

    fn interval_map(&self, a: &PathPoint<T>, b: &PathPoint<T>, z: CirclePoint<T>) -> CirclePoint<T> {
        match self.classify(a, b, z) {
            Motion::Moving(p) => p,
            Motion::At(v) => self.vertex_map(a, b, v),
        }
    }

    fn check_one_interval(&self, a: &PathPoint<T>, b: &PathPoint<T>) -> Result<()> {
        if let Some(c) = self.path.range_crossing(*a, *b, self.graph.l()) {
            if !c.point.coincides(b) {
                return Err(Error::BeyondRho);
            }
        }
        Ok(())
    }

    /// Closed-form kernel on a window `[a, b]` that ends no later than the
    /// first range crossing after `a`.
    pub fn one_interval_kernel(
        &self,
        a: &PathPoint<T>,
        b: &PathPoint<T>,
        z: CirclePoint<T>,
    ) -> Result<AtomicMeasure<T>> {
        self.check_one_interval(a, b)?;
        Ok(self.interval_kernel(a, b, z))
    }

    pub fn one_interval_map(
        &self,
        a: &PathPoint<T>,
        b: &PathPoint<T>,
        z: CirclePoint<T>,
    ) -> Result<CirclePoint<T>> {
        self.check_one_interval(a, b)?;
        Ok(self.interval_map(a, b, z))
    }

    /// Grid form of [`Self::one_interval_kernel`]. Rejects `t` past the
    /// interpolated range crossing, which may lie strictly inside the grid
    /// segment ending at the grid-level `rho`.
    pub fn kernel_one_interval(&self, s: GridTime, t: GridTime, z: CirclePoint<T>) -> Result<AtomicMeasure<T>> {
        let (a, b) = self.window(s, t)?;
        self.one_interval_kernel(&a, &b, z)
    }

    pub fn map_one_interval(&self, s: GridTime, t: GridTime, z: CirclePoint<T>) -> Result<CirclePoint<T>> {
        let (a, b) = self.window(s, t)?;
        self.one_interval_map(&a, &b, z)
    }

    /// `K_{a,b}(z)` for arbitrary points of the interpolated path, `a <= b`.
    pub fn kernel_between(
        &self,
        a: &PathPoint<T>,
        b: &PathPoint<T>,
        z: CirclePoint<T>,
    ) -> Result<AtomicMeasure<T>> {
        let chain = self.chain(*a, *b);
        let mut mu = AtomicMeasure::dirac(z);
        for (k, start) in chain.anchors.iter().enumerate() {
            let end = chain.anchors.get(k + 1).unwrap_or(b);
            mu = pushforward(&mu, |x| Ok(self.interval_kernel(start, end, x)))?;
        }
        Ok(mu)
    }

    pub fn map_between(&self, a: &PathPoint<T>, b: &PathPoint<T>, z: CirclePoint<T>) -> CirclePoint<T> {
        let chain = self.chain(*a, *b);
        let mut x = z;
        for (k, start) in chain.anchors.iter().enumerate() {
            let end = chain.anchors.get(k + 1).unwrap_or(b);
            x = self.interval_map(start, end, x);
        }
        x
    }

    pub fn kernel(&self, s: GridTime, t: GridTime, z: CirclePoint<T>) -> Result<AtomicMeasure<T>> {
        let (a, b) = self.window(s, t)?;
        self.kernel_between(&a, &b, z)
    }

    pub fn map(&self, s: GridTime, t: GridTime, z: CirclePoint<T>) -> Result<CirclePoint<T>> {
        let (a, b) = self.window(s, t)?;
        Ok(self.map_between(&a, &b, z))
    }

    /// Visits `K_{s,t}(z)` for each `t` of an ascending list, reusing the
    /// composed kernel up to the last anchor passed.
    pub fn kernel_walk(
        &self,
        s: GridTime,
        z: CirclePoint<T>,
        times: &[GridTime],
        mut visit: impl FnMut(GridTime, &AtomicMeasure<T>),
    ) -> Result<()> {
        let Some(&last) = times.last() else {
            return Ok(());
        };
        let (a, b) = self.window(s, last)?;
        let chain = self.chain(a, b);
        let mut k = 0;
        let mut prefix = AtomicMeasure::dirac(z);
        let mut prev = s;
        for &t in times {
            if t < prev || t < s {
                return Err(Error::InvalidParameter("times must ascend from s".into()));
            }
            prev = t;
            while k + 1 < chain.anchors.len() && chain.anchors[k + 1].not_after_grid(t) {
                let (from, to) = (&chain.anchors[k], &chain.anchors[k + 1]);
                prefix = pushforward(&prefix, |x| Ok(self.interval_kernel(from, to, x)))?;
                k += 1;
            }
            let end = self.path.point(t);
            let from = &chain.anchors[k];
            let mu = pushforward(&prefix, |x| Ok(self.interval_kernel(from, &end, x)))?;
            visit(t, &mu);
        }
        Ok(())
    }

    pub fn kernel_along(&self, s: GridTime, z: CirclePoint<T>, times: &[GridTime]) -> Result<Vec<AtomicMeasure<T>>> {
        let mut out = Vec::with_capacity(times.len());
        self.kernel_walk(s, z, times, |_, mu| out.push(mu.clone()))?;
        Ok(out)
    }

    /// `phi_{s,t}(z)` for each `t` of an ascending list.
    pub fn map_along(&self, s: GridTime, z: CirclePoint<T>, times: &[GridTime]) -> Result<Vec<CirclePoint<T>>> {
        let Some(&last) = times.last() else {
            return Ok(Vec::new());
        };
        let (a, b) = self.window(s, last)?;
        let chain = self.chain(a, b);
        let mut k = 0;
        let mut prefix = z;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            if t < s || !out.is_empty() && t < times[out.len() - 1] {
                return Err(Error::InvalidParameter("times must ascend from s".into()));
            }
            while k + 1 < chain.anchors.len() && chain.anchors[k + 1].not_after_grid(t) {
                prefix = self.interval_map(&chain.anchors[k], &chain.anchors[k + 1], prefix);
                k += 1;
            }
            out.push(self.interval_map(&chain.anchors[k], &self.path.point(t), prefix));
        }
        Ok(out)
    }
}

/// `K_{s,t}f(z) - f(z) - sum_j K_{s,t_j}(eps f')(z) dW_j - 1/2 sum_j K_{s,t_j} f''(z) dt`
/// with left-point sums over the grid of `[s, t]`. The first difference is
/// evaluated as `K_{s,t}(f - f(z))(z)`, which is the same for a probability kernel.
pub fn sde_residual<T: Scalar>(
    real: &FlowRealization<T>,
    s: GridTime,
    t: GridTime,
    z: CirclePoint<T>,
    f: &FourierFunction<T>,
) -> Result<T> {
    if s > t {
        return Err(Error::InvalidParameter("sde residual needs s <= t".into()));
    }
    let g = *real.graph();
    let d1 = f.derivative();
    let d2 = d1.derivative();
    let path = real.path();
    let dt = path.dt();
    let times: Vec<GridTime> = (s.0..=t.0).map(GridTime).collect();
    let mut ito = T::zero();
    let mut drift = T::zero();
    let mut end_value = T::zero();
    let f_z = f.eval(z);
    real.kernel_walk(s, z, &times, |u, mu| {
        if u == t {
            end_value = mu.integrate(|x| f.eval(x) - f_z);
            return;
        }
        let dw = path.value(GridTime(u.0 + 1)) - path.value(u);
        ito += mu.integrate(|x| epsilon(x, &g).value::<T>() * d1.eval(x)) * dw;
        drift += mu.integrate(|x| d2.eval(x)) * dt;
    })?;
    Ok(end_value - ito - T::lit(0.5) * drift)
}

/// Merges trajectories on a common grid: from the first index where two
/// current representatives meet, both labels follow the one with the lower
/// original index.
pub fn coalescing_wrapper<T: Scalar>(motions: &[Vec<CirclePoint<T>>]) -> Vec<Vec<CirclePoint<T>>> {
    let n = motions.len();
    let len = motions.iter().map(Vec::len).min().unwrap_or(0);
    let mut rep: Vec<usize> = (0..n).collect();
    let mut out = vec![Vec::with_capacity(len); n];
    for j in 0..len {
        for a in 0..n {
            for b in (a + 1)..n {
                let (ra, rb) = (rep[a], rep[b]);
                if ra != rb && motions[ra][j].distance(motions[rb][j]) <= T::merge_tol() {
                    let (keep, drop) = (ra.min(rb), ra.max(rb));
                    for r in rep.iter_mut() {
                        if *r == drop {
                            *r = keep;
                        }
                    }
                }
            }
        }
        for i in 0..n {
            out[i].push(motions[rep[i]][j]);
        }
    }
    out
}
