//! Brownian driver on a uniform grid.
//!
//! Grid-level queries (`reflected_plus`, `rho`, `tau`, `level_hit`) report the
//! first grid index at or after a crossing. The flow engine works on the
//! piecewise-linear interpolation of the grid values instead, so that range
//! and level crossings land exactly on their target values; [`PathPoint`]
//! represents such a point, which may sit strictly inside a grid segment.

use std::cmp::Ordering;
use std::sync::OnceLock;

use rand_distr::{Distribution, StandardNormal};

use crate::circle::{epsilon, CirclePoint, GraphParams, Sign};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GridTime(pub usize);

impl GridTime {
    pub fn index(self) -> usize {
        self.0
    }

    pub fn time<T: Scalar>(self, dt: T) -> T {
        T::from_usize(self.0) * dt
    }
}

/// A point of the interpolated path. `index` is the grid index of the point
/// itself when `on_grid`, otherwise the index closing the segment it lies in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint<T> {
    pub index: usize,
    pub on_grid: bool,
    pub value: T,
    pub time: T,
}

impl<T: Scalar> PathPoint<T> {
    fn order(&self, other: &Self) -> Ordering {
        (self.index, self.on_grid)
            .cmp(&(other.index, other.on_grid))
            .then(self.time.partial_cmp(&other.time).unwrap_or(Ordering::Equal))
    }

    pub fn is_before(&self, other: &Self) -> bool {
        self.order(other) == Ordering::Less
    }

    pub fn is_at_or_before(&self, other: &Self) -> bool {
        self.order(other) != Ordering::Greater
    }

    /// Same location on the path.
    pub fn coincides(&self, other: &Self) -> bool {
        self.index == other.index
            && self.on_grid == other.on_grid
            && (self.on_grid || (self.value - other.value).abs() <= T::merge_tol())
    }

    /// True when this point lies at or before grid time `t`.
    pub fn not_after_grid(&self, t: GridTime) -> bool {
        self.index <= t.0
    }
}

/// Result of a range scan: where the running range first reached its target,
/// and whether the new running maximum (`Plus`) or minimum (`Minus`) did it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeCrossing<T> {
    pub point: PathPoint<T>,
    pub side: Sign,
}

/// Grid-level answer of [`rho`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoHit<T> {
    pub time: GridTime,
    pub side: Sign,
    pub crossing: PathPoint<T>,
}

/// Which vertex an edge motion reached first.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Vertex {
    One,
    L,
}

/// Grid-level answer of [`tau`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VertexHit {
    pub time: GridTime,
    pub vertex: Vertex,
}

/// Earliest arg-min and arg-max over dyadic blocks of grid indices.
#[derive(Debug)]
struct RangeIndex {
    argmin: Vec<Vec<u32>>,
    argmax: Vec<Vec<u32>>,
}

impl RangeIndex {
    fn build<T: Scalar>(values: &[T]) -> Self {
        let n = values.len();
        let base: Vec<u32> = (0..n as u32).collect();
        let mut argmin = vec![base.clone()];
        let mut argmax = vec![base];
        let mut width = 1;
        while 2 * width <= n {
            let (pmin, pmax) = (&argmin[argmin.len() - 1], &argmax[argmax.len() - 1]);
            let len = n - 2 * width + 1;
            let mut lmin = Vec::with_capacity(len);
            let mut lmax = Vec::with_capacity(len);
            for i in 0..len {
                let (a, b) = (pmin[i], pmin[i + width]);
                lmin.push(if values[b as usize] < values[a as usize] { b } else { a });
                let (a, b) = (pmax[i], pmax[i + width]);
                lmax.push(if values[b as usize] > values[a as usize] { b } else { a });
            }
            argmin.push(lmin);
            argmax.push(lmax);
            width *= 2;
        }
        Self { argmin, argmax }
    }

    fn level(lo: usize, hi: usize) -> usize {
        (usize::BITS - 1 - (hi - lo + 1).leading_zeros()) as usize
    }

    /// Earliest arg-min over the inclusive range `lo..=hi`.
    fn min<T: Scalar>(&self, values: &[T], lo: usize, hi: usize) -> usize {
        let k = Self::level(lo, hi);
        let a = self.argmin[k][lo] as usize;
        let b = self.argmin[k][hi + 1 - (1 << k)] as usize;
        if values[b] < values[a] || (values[b] == values[a] && b < a) {
            b
        } else {
            a
        }
    }

    fn max<T: Scalar>(&self, values: &[T], lo: usize, hi: usize) -> usize {
        let k = Self::level(lo, hi);
        let a = self.argmax[k][lo] as usize;
        let b = self.argmax[k][hi + 1 - (1 << k)] as usize;
        if values[b] > values[a] || (values[b] == values[a] && b < a) {
            b
        } else {
            a
        }
    }
}

/// Grid values `W(j dt)`, `W(0) = 0`, with i.i.d. `N(0, dt)` increments.
#[derive(Debug, Clone)]
pub struct BrownianPath<T> {
    dt: T,
    values: Vec<T>,
    seed: u64,
    index: OnceLock<std::sync::Arc<RangeIndex>>,
}

impl<T: Scalar> PartialEq for BrownianPath<T> {
    fn eq(&self, other: &Self) -> bool {
        self.dt == other.dt && self.seed == other.seed && self.values == other.values
    }
}

/// Samples a path on `[0, horizon]`. A longer horizon with the same seed
/// extends the shorter path: the common prefix is bit-identical.
pub fn sample_path<T: Scalar>(dt: T, horizon: T, seed: u64) -> Result<BrownianPath<T>> {
    if !(dt > T::zero()) || !dt.is_finite() || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "time step {dt} and horizon {horizon} must be positive and finite"
        )));
    }
    let steps = (horizon / dt).round();
    if steps < T::one() {
        return Err(Error::InvalidParameter(format!(
            "time step {dt} exceeds horizon {horizon}"
        )));
    }
    let steps = steps.to_usize().ok_or_else(|| {
        Error::InvalidParameter(format!("horizon {horizon} / dt {dt} overflows"))
    })?;
    let mut rng = seed::rng(seed);
    let sd = dt.sqrt();
    let mut values = Vec::with_capacity(steps + 1);
    let mut w = T::zero();
    values.push(w);
    for _ in 0..steps {
        let z: f64 = StandardNormal.sample(&mut rng);
        w += sd * T::lit(z);
        values.push(w);
    }
    Ok(BrownianPath {
        dt,
        values,
        seed,
        index: OnceLock::new(),
    })
}

impl<T: Scalar> BrownianPath<T> {
    /// Wraps explicit grid values; the first value must be 0.
    pub fn from_values(dt: T, values: Vec<T>) -> Result<Self> {
        if !(dt > T::zero()) || values.len() < 2 || values[0] != T::zero() {
            return Err(Error::InvalidParameter(
                "explicit path needs dt > 0, at least two values and W(0) = 0".into(),
            ));
        }
        Ok(Self {
            dt,
            values,
            seed: 0,
            index: OnceLock::new(),
        })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn last(&self) -> GridTime {
        GridTime(self.values.len() - 1)
    }

    pub fn horizon(&self) -> T {
        self.last().time(self.dt)
    }

    pub fn value(&self, t: GridTime) -> T {
        self.values[t.0]
    }

    pub fn check(&self, t: GridTime) -> Result<()> {
        if t.0 >= self.values.len() {
            return Err(Error::BeyondHorizon {
                index: t.0,
                last: self.values.len() - 1,
            });
        }
        Ok(())
    }

    /// Grid time at or after a (non-negative) process time.
    pub fn grid_time_at(&self, time: T) -> GridTime {
        let j = (time / self.dt - T::lit(1e-9)).ceil().max(T::zero());
        GridTime(j.to_usize().unwrap_or(usize::MAX).min(self.values.len() - 1))
    }

    pub fn point(&self, t: GridTime) -> PathPoint<T> {
        PathPoint {
            index: t.0,
            on_grid: true,
            value: self.values[t.0],
            time: t.time(self.dt),
        }
    }

    fn range_index(&self) -> &RangeIndex {
        self.index
            .get_or_init(|| std::sync::Arc::new(RangeIndex::build(&self.values)))
    }

    /// Grid indices strictly between two path points (exclusive of both ends).
    fn interior(a: &PathPoint<T>, b: &PathPoint<T>) -> Option<(usize, usize)> {
        let lo = a.index + usize::from(a.on_grid);
        if b.index == 0 || lo > b.index - 1 {
            None
        } else {
            Some((lo, b.index - 1))
        }
    }

    /// Minimum of the interpolated path over `[a, b]` and where it is first attained.
    pub fn window_min(&self, a: &PathPoint<T>, b: &PathPoint<T>) -> PathPoint<T> {
        let mut best = *a;
        if let Some((lo, hi)) = Self::interior(a, b) {
            let j = self.range_index().min(&self.values, lo, hi);
            if self.values[j] < best.value {
                best = self.point(GridTime(j));
            }
        }
        if b.value < best.value {
            best = *b;
        }
        best
    }

    /// Maximum of the interpolated path over `[a, b]` and where it is first attained.
    pub fn window_max(&self, a: &PathPoint<T>, b: &PathPoint<T>) -> PathPoint<T> {
        let mut best = *a;
        if let Some((lo, hi)) = Self::interior(a, b) {
            let j = self.range_index().max(&self.values, lo, hi);
            if self.values[j] > best.value {
                best = self.point(GridTime(j));
            }
        }
        if b.value > best.value {
            best = *b;
        }
        best
    }

    /// Points of the interpolated path after `from`, up to and including `until`.
    fn walk<'a>(
        &'a self,
        from: PathPoint<T>,
        until: PathPoint<T>,
    ) -> impl Iterator<Item = PathPoint<T>> + 'a {
        let lo = from.index + usize::from(from.on_grid);
        let hi = until.index;
        let tail = from.is_before(&until).then_some(until);
        (lo..hi.max(lo))
            .map(move |j| self.point(GridTime(j)))
            .chain(tail)
    }

    fn interpolate(prev: &PathPoint<T>, next: &PathPoint<T>, target: T) -> PathPoint<T> {
        if target == next.value {
            return *next;
        }
        let frac = (target - prev.value) / (next.value - prev.value);
        PathPoint {
            index: next.index,
            on_grid: false,
            value: target,
            time: prev.time + frac * (next.time - prev.time),
        }
    }

    /// First point after `from` (up to `until`) where the running range of
    /// the interpolated path reaches `l`.
    pub fn range_crossing(
        &self,
        from: PathPoint<T>,
        until: PathPoint<T>,
        l: T,
    ) -> Option<RangeCrossing<T>> {
        let (mut lo, mut hi) = (from.value, from.value);
        let mut prev = from;
        for p in self.walk(from, until) {
            if p.value > hi {
                if p.value - lo >= l {
                    return Some(RangeCrossing {
                        point: Self::interpolate(&prev, &p, lo + l),
                        side: Sign::Plus,
                    });
                }
                hi = p.value;
            } else if p.value < lo {
                if hi - p.value >= l {
                    return Some(RangeCrossing {
                        point: Self::interpolate(&prev, &p, hi - l),
                        side: Sign::Minus,
                    });
                }
                lo = p.value;
            }
            prev = p;
        }
        None
    }

    /// First point after `from` where the reflected part on `side` reaches
    /// `level`: `W - min W` for `Plus`, `max W - W` for `Minus`.
    pub fn reflected_crossing(
        &self,
        from: PathPoint<T>,
        until: PathPoint<T>,
        side: Sign,
        level: T,
    ) -> Option<PathPoint<T>> {
        let (mut lo, mut hi) = (from.value, from.value);
        let mut prev = from;
        for p in self.walk(from, until) {
            match side {
                Sign::Plus if p.value - lo >= level => {
                    return Some(Self::interpolate(&prev, &p, lo + level));
                }
                Sign::Minus if hi - p.value >= level => {
                    return Some(Self::interpolate(&prev, &p, hi - level));
                }
                _ => {}
            }
            lo = lo.min(p.value);
            hi = hi.max(p.value);
            prev = p;
        }
        None
    }

    /// First point after `from` where `W - W(from)` reaches `level`.
    pub fn level_crossing(
        &self,
        from: PathPoint<T>,
        until: PathPoint<T>,
        level: T,
    ) -> Option<PathPoint<T>> {
        let target = from.value + level;
        let mut prev = from;
        for p in self.walk(from, until) {
            let crossed = if level >= T::zero() {
                p.value >= target
            } else {
                p.value <= target
            };
            if crossed {
                return Some(Self::interpolate(&prev, &p, target));
            }
            prev = p;
        }
        None
    }

    /// First point after `from` where `W - W(from)` reaches `level > 0`
    /// before the drawdown from its running maximum reaches `slack`.
    pub fn level_before_drawdown(
        &self,
        from: PathPoint<T>,
        until: PathPoint<T>,
        level: T,
        slack: T,
    ) -> Option<PathPoint<T>> {
        let target = from.value + level;
        let mut hi = from.value;
        let mut prev = from;
        for p in self.walk(from, until) {
            if p.value >= target {
                return Some(Self::interpolate(&prev, &p, target));
            }
            hi = hi.max(p.value);
            if hi - p.value >= slack {
                return None;
            }
            prev = p;
        }
        None
    }

    /// First grid index in `lo..=hi` whose value is `<= level`, if any.
    fn first_at_or_below(&self, lo: usize, hi: usize, level: T) -> Option<usize> {
        let index = self.range_index();
        if self.values[index.min(&self.values, lo, hi)] > level {
            return None;
        }
        let (mut a, mut b) = (lo, hi);
        while a < b {
            let mid = a + (b - a) / 2;
            if self.values[index.min(&self.values, lo, mid)] <= level {
                b = mid;
            } else {
                a = mid + 1;
            }
        }
        Some(a)
    }

    fn first_at_or_above(&self, lo: usize, hi: usize, level: T) -> Option<usize> {
        let index = self.range_index();
        if self.values[index.max(&self.values, lo, hi)] < level {
            return None;
        }
        let (mut a, mut b) = (lo, hi);
        while a < b {
            let mid = a + (b - a) / 2;
            if self.values[index.max(&self.values, lo, mid)] >= level {
                b = mid;
            } else {
                a = mid + 1;
            }
        }
        Some(a)
    }

    /// First exit of `W - W(a)` from the open interval `(lower, upper)` on
    /// `(a, b]`, with `Minus` for the lower end and `Plus` for the upper one.
    pub fn first_exit(
        &self,
        a: &PathPoint<T>,
        b: &PathPoint<T>,
        lower: T,
        upper: T,
    ) -> Option<(PathPoint<T>, Sign)> {
        let (lo_level, hi_level) = (a.value + lower, a.value + upper);
        let (mut down, mut up) = (None, None);
        if let Some((lo, hi)) = Self::interior(a, b) {
            down = self.first_at_or_below(lo, hi, lo_level);
            up = self.first_at_or_above(lo, hi, hi_level);
        }
        let hit = match (down, up) {
            (Some(d), Some(u)) if d < u => Some((d, Sign::Minus)),
            (Some(_), Some(u)) => Some((u, Sign::Plus)),
            (Some(d), None) => Some((d, Sign::Minus)),
            (None, Some(u)) => Some((u, Sign::Plus)),
            (None, None) => None,
        };
        if let Some((j, side)) = hit {
            return Some((self.point(GridTime(j)), side));
        }
        if a.is_before(b) {
            if b.value <= lo_level {
                return Some((*b, Sign::Minus));
            }
            if b.value >= hi_level {
                return Some((*b, Sign::Plus));
            }
        }
        None
    }
}

/// `W_t - min_{[s,t]} W` on the grid.
pub fn reflected_plus<T: Scalar>(path: &BrownianPath<T>, s: GridTime, t: GridTime) -> T {
    let w = &path.values[s.0..=t.0];
    let lo = w.iter().copied().fold(T::infinity(), T::min);
    path.values[t.0] - lo
}

/// `max_{[s,t]} W - W_t` on the grid.
pub fn reflected_minus<T: Scalar>(path: &BrownianPath<T>, s: GridTime, t: GridTime) -> T {
    let w = &path.values[s.0..=t.0];
    let hi = w.iter().copied().fold(T::neg_infinity(), T::max);
    hi - path.values[t.0]
}

/// First grid time at or after `s` where the running range over `[s, t]` is at least `l`.
pub fn rho<T: Scalar>(path: &BrownianPath<T>, s: GridTime, l: T) -> Option<RhoHit<T>> {
    let c = path.range_crossing(path.point(s), path.point(path.last()), l)?;
    Some(RhoHit {
        time: GridTime(c.point.index),
        side: c.side,
        crossing: c.point,
    })
}

/// First grid time at which the edge motion of `z` started at `s` reaches a vertex.
pub fn tau<T: Scalar>(
    path: &BrownianPath<T>,
    s: GridTime,
    z: CirclePoint<T>,
    g: &GraphParams<T>,
) -> Option<VertexHit> {
    let theta = z.theta();
    if theta == T::zero() {
        return Some(VertexHit {
            time: s,
            vertex: Vertex::One,
        });
    }
    if theta == g.l() {
        return Some(VertexHit {
            time: s,
            vertex: Vertex::L,
        });
    }
    let (lower, upper) = exit_interval(z, g);
    let (p, side) = path.first_exit(&path.point(s), &path.point(path.last()), lower, upper)?;
    Some(VertexHit {
        time: GridTime(p.index),
        vertex: exit_vertex(z, g, side),
    })
}

/// Interval of `W_{s,.}` values keeping the edge motion of a non-vertex `z` off the vertices.
pub fn exit_interval<T: Scalar>(z: CirclePoint<T>, g: &GraphParams<T>) -> (T, T) {
    let theta = z.theta();
    match epsilon(z, g) {
        Sign::Plus => (-theta, g.l() - theta),
        Sign::Minus => (theta - T::tau(), theta - g.l()),
    }
}

/// Vertex reached when the motion of `z` leaves its interval through `side`.
pub fn exit_vertex<T: Scalar>(z: CirclePoint<T>, g: &GraphParams<T>, side: Sign) -> Vertex {
    match (epsilon(z, g), side) {
        (Sign::Plus, Sign::Minus) | (Sign::Minus, Sign::Minus) => Vertex::One,
        (Sign::Plus, Sign::Plus) | (Sign::Minus, Sign::Plus) => Vertex::L,
    }
}

/// First grid time at or after `s` where `W - W_s` crosses `a`.
pub fn level_hit<T: Scalar>(path: &BrownianPath<T>, s: GridTime, a: T) -> Option<GridTime> {
    path.level_crossing(path.point(s), path.point(path.last()), a)
        .map(|p| GridTime(p.index))
}
