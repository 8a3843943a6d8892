//! Wiener-chaos terms of the noise-measurable solution, and the solution
//! itself as read off the flow of kernels.
//!
//! The integrand of the `n`-th term is deterministic, so it is tabulated once
//! per `(f, z, t)` on the grid simplex and then contracted with the increments
//! of each path. The tabulation runs outside-in: a covector stands for the
//! functional `g -> [P_{s_1} D P_{s_2 - s_1} ... D g](z)` and is pulled back
//! through one `D` and one heat factor per level.

use num_complex::Complex;

use crate::circle::CirclePoint;
use crate::circle::GraphParams;
use crate::error::{Error, Result};
use crate::flow::FlowRealization;
use crate::fourier::{epsilon_coefficients, FourierFunction, DEFAULT_K_MAX};
use crate::path::{BrownianPath, GridTime};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ChaosConfig {
    /// Highest chaos order kept.
    pub n_trunc: usize,
    /// Grid steps per cell of the subgrid used for orders two and up.
    pub stride: usize,
    pub k_max: usize,
}

impl Default for ChaosConfig {
    fn default() -> Self {
        Self {
            n_trunc: 3,
            stride: 10,
            k_max: DEFAULT_K_MAX,
        }
    }
}

/// Dense `(2K+1)`-vectors of Fourier coefficients and the two operators acting on them.
struct Spectral<T> {
    k_max: usize,
    // eps_hat[j] is the coefficient of frequency j - 2K.
    eps_hat: Vec<Complex<T>>,
}

impl<T: Scalar> Spectral<T> {
    fn new(g: &GraphParams<T>, k_max: usize) -> Self {
        Self {
            k_max,
            eps_hat: epsilon_coefficients(g, 2 * k_max),
        }
    }

    fn freq(&self, i: usize) -> T {
        T::from_usize(i) - T::from_usize(self.k_max)
    }

    fn heat(&self, v: &[Complex<T>], t: T) -> Vec<Complex<T>> {
        let half = T::lit(0.5);
        v.iter()
            .enumerate()
            .map(|(i, c)| {
                let k = self.freq(i);
                c * (-k * k * t * half).exp()
            })
            .collect()
    }

    fn heat_into(&self, v: &[Complex<T>], t: T, out: &mut Vec<Complex<T>>) {
        out.clear();
        let half = T::lit(0.5);
        out.extend(v.iter().enumerate().map(|(i, c)| {
            let k = self.freq(i);
            c * (-k * k * t * half).exp()
        }));
    }

    /// `(D g)_n = sum_m eps_{n-m} (i m) g_m`, truncated to `|n| <= K`.
    fn drift(&self, g: &[Complex<T>]) -> Vec<Complex<T>> {
        let k = self.k_max;
        let dg: Vec<Complex<T>> = g
            .iter()
            .enumerate()
            .map(|(i, c)| c * Complex::new(T::zero(), self.freq(i)))
            .collect();
        (0..=2 * k)
            .map(|n| {
                let mut acc = Complex::new(T::zero(), T::zero());
                for (m, d) in dg.iter().enumerate() {
                    acc += self.eps_hat[n + 2 * k - m] * d;
                }
                acc
            })
            .collect()
    }

    /// Covector `phi` of a functional `g -> Re sum phi_n (D g)_n`, pulled back to act on `g`.
    fn drift_adjoint(&self, phi: &[Complex<T>]) -> Vec<Complex<T>> {
        let k = self.k_max;
        (0..=2 * k)
            .map(|m| {
                let mut acc = Complex::new(T::zero(), T::zero());
                for (n, p) in phi.iter().enumerate() {
                    acc += self.eps_hat[n + 2 * k - m] * p;
                }
                acc * Complex::new(T::zero(), self.freq(m))
            })
            .collect()
    }

    /// Covector of `g -> [P_s g](z)`.
    fn evaluation_at(&self, z: CirclePoint<T>, s: T) -> Vec<Complex<T>> {
        let theta = z.theta();
        let half = T::lit(0.5);
        (0..=2 * self.k_max)
            .map(|i| {
                let k = self.freq(i);
                Complex::new((k * theta).cos(), (k * theta).sin()) * (-k * k * s * half).exp()
            })
            .collect()
    }
}

fn pair<T: Scalar>(phi: &[Complex<T>], v: &[Complex<T>]) -> T {
    phi.iter().zip(v).map(|(a, b)| (a * b).re).sum()
}

/// Cell boundaries `j_0 = 0 < j_1 < ... = steps` of a subgrid with the given stride.
fn cells(steps: usize, stride: usize) -> Vec<usize> {
    let mut b: Vec<usize> = (0..steps).step_by(stride).collect();
    b.push(steps);
    b
}

/// Tabulated integrands of the chaos terms of `f` at `(z, t)`.
#[derive(Debug, Clone)]
pub struct ChaosExpansion<T> {
    dt: T,
    steps: usize,
    stride: usize,
    heat_term: T,
    // orders[n - 1] holds the order-n integrand on its grid simplex, tuples in
    // lexicographic order.
    orders: Vec<Vec<T>>,
}

impl<T: Scalar> ChaosExpansion<T> {
    pub fn new(
        f: &FourierFunction<T>,
        z: CirclePoint<T>,
        t: T,
        dt: T,
        g: &GraphParams<T>,
        cfg: &ChaosConfig,
    ) -> Result<Self> {
        if !(dt > T::zero()) || !(t >= T::zero()) {
            return Err(Error::InvalidParameter(format!("need dt > 0 and t >= 0, got dt = {dt}, t = {t}")));
        }
        if cfg.stride == 0 {
            return Err(Error::InvalidParameter("subgrid stride must be at least 1".into()));
        }
        if f.k_max() != cfg.k_max {
            return Err(Error::InvalidParameter(format!(
                "test function has k_max = {}, configuration {}",
                f.k_max(),
                cfg.k_max
            )));
        }
        let ratio = t / dt;
        let steps = ratio.round();
        if (ratio - steps).abs() > T::lit(1e-6) * ratio.max(T::one()) {
            return Err(Error::InvalidParameter(format!("t = {t} is not a multiple of dt = {dt}")));
        }
        let steps = steps.to_usize().unwrap_or(0);
        let sp = Spectral::new(g, cfg.k_max);
        let heat_term = f.heat_apply(t)?.eval(z);
        let mut orders = Vec::with_capacity(cfg.n_trunc);
        for n in 1..=cfg.n_trunc {
            let bounds = if n == 1 {
                (0..=steps).collect()
            } else {
                cells(steps, cfg.stride)
            };
            orders.push(tabulate(&sp, f, z, t, dt, n, &bounds));
        }
        Ok(Self {
            dt,
            steps,
            stride: cfg.stride,
            heat_term,
            orders,
        })
    }

    pub fn n_trunc(&self) -> usize {
        self.orders.len()
    }

    /// `P_t f(z)`, the order-zero term.
    pub fn heat_term(&self) -> T {
        self.heat_term
    }

    /// Order-1 integrand `s_j -> [P_{s_j} D P_{t - s_j} f](z)` on the full grid.
    pub fn first_order_integrand(&self) -> &[T] {
        self.orders.first().map(Vec::as_slice).unwrap_or(&[])
    }

    fn check_path(&self, path: &BrownianPath<T>) -> Result<()> {
        path.check(GridTime(self.steps))?;
        if (path.dt() - self.dt).abs() > T::lit(1e-9) * self.dt {
            return Err(Error::InvalidParameter(format!(
                "path step {} differs from tabulation step {}",
                path.dt(),
                self.dt
            )));
        }
        Ok(())
    }

    /// Term of order `n` on this path; order zero is `P_t f(z)`.
    pub fn term(&self, path: &BrownianPath<T>, n: usize) -> Result<T> {
        if n > self.n_trunc() {
            return Err(Error::OrderTooHigh {
                order: n,
                max: self.n_trunc(),
            });
        }
        self.check_path(path)?;
        if n == 0 {
            return Ok(self.heat_term);
        }
        let bounds = if n == 1 {
            (0..=self.steps).collect()
        } else {
            cells(self.steps, self.stride)
        };
        let w = path.values();
        let dw: Vec<T> = bounds.windows(2).map(|b| w[b[1]] - w[b[0]]).collect();
        let table = &self.orders[n - 1];
        let mut idx = 0;
        let acc = contract(&dw, table, n, 0, T::one(), &mut idx);
        debug_assert_eq!(idx, table.len());
        Ok(acc)
    }

    /// All terms of order `0..=n_trunc` on this path.
    pub fn terms(&self, path: &BrownianPath<T>) -> Result<Vec<T>> {
        (0..=self.n_trunc()).map(|n| self.term(path, n)).collect()
    }
}

fn contract<T: Scalar>(dw: &[T], table: &[T], depth: usize, start: usize, prefix: T, idx: &mut usize) -> T {
    let mut acc = T::zero();
    for i in start..dw.len() {
        let p = prefix * dw[i];
        if depth == 1 {
            acc += table[*idx] * p;
            *idx += 1;
        } else {
            acc += contract(dw, table, depth - 1, i + 1, p, idx);
        }
    }
    acc
}

/// Integrand of order `n` at left cell points `s_i = bounds[i] * dt`, over
/// strictly increasing index tuples in lexicographic order.
fn tabulate<T: Scalar>(
    sp: &Spectral<T>,
    f: &FourierFunction<T>,
    z: CirclePoint<T>,
    t: T,
    dt: T,
    n: usize,
    bounds: &[usize],
) -> Vec<T> {
    let cells = bounds.len() - 1;
    let times: Vec<T> = bounds[..cells].iter().map(|&j| T::from_usize(j) * dt).collect();
    // inner[i] = D P_{t - s_i} f
    let inner: Vec<Vec<Complex<T>>> = times
        .iter()
        .map(|&s| sp.drift(&sp.heat(f.coeffs(), t - s)))
        .collect();
    let mut out = Vec::new();
    let mut scratch = Vec::new();
    for i1 in 0..cells {
        let phi = sp.evaluation_at(z, times[i1]);
        if n == 1 {
            out.push(pair(&phi, &inner[i1]));
        } else {
            let phi = sp.drift_adjoint(&phi);
            descend(sp, &times, &inner, n - 1, i1, phi, &mut out, &mut scratch);
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn descend<T: Scalar>(
    sp: &Spectral<T>,
    times: &[T],
    inner: &[Vec<Complex<T>>],
    remaining: usize,
    prev: usize,
    phi: Vec<Complex<T>>,
    out: &mut Vec<T>,
    scratch: &mut Vec<Complex<T>>,
) {
    for i in (prev + 1)..times.len() {
        let gap = times[i] - times[prev];
        sp.heat_into(&phi, gap, scratch);
        if remaining == 1 {
            out.push(pair(scratch, &inner[i]));
        } else {
            let next = sp.drift_adjoint(scratch);
            descend(sp, times, inner, remaining - 1, i, next, out, &mut Vec::new());
        }
    }
}

/// Order-`n` chaos term of `f` at `(z, t)` on one path.
pub fn chaos_term<T: Scalar>(
    f: &FourierFunction<T>,
    z: CirclePoint<T>,
    t: T,
    n: usize,
    path: &BrownianPath<T>,
    g: &GraphParams<T>,
    cfg: &ChaosConfig,
) -> Result<T> {
    if n > cfg.n_trunc {
        return Err(Error::OrderTooHigh {
            order: n,
            max: cfg.n_trunc,
        });
    }
    let only = ChaosConfig { n_trunc: n, ..*cfg };
    ChaosExpansion::new(f, z, t, path.dt(), g, &only)?.term(path, n)
}

/// `K_{0,t} f(z)` for the flow whose split weights are all one half.
pub fn wiener_solution<T: Scalar>(
    real: &FlowRealization<T>,
    z: CirclePoint<T>,
    t: GridTime,
    f: &FourierFunction<T>,
) -> Result<T> {
    if !real.plus_store().law().is_dirac_half() || !real.minus_store().law().is_dirac_half() {
        return Err(Error::NotWiener);
    }
    Ok(real.kernel(GridTime(0), t, z)?.integrate(|x| f.eval(x)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decorations::{DecorationStore, SplitLaw};
    use crate::circle::{epsilon, Sign};
    use crate::path::sample_path;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn cfg(n: usize) -> ChaosConfig {
        ChaosConfig {
            n_trunc: n,
            stride: 5,
            k_max: 16,
        }
    }

    #[test]
    fn order_zero_is_the_heat_term() {
        let g = GraphParams::new(FRAC_PI_2).unwrap();
        let f = FourierFunction::cosine(1, 16);
        let p = sample_path(1e-3, 0.2, 4).unwrap();
        let z = CirclePoint::new(FRAC_PI_4);
        let j0 = chaos_term(&f, z, 0.1, 0, &p, &g, &cfg(3)).unwrap();
        assert!((j0 - (-0.05f64).exp() * FRAC_PI_4.cos()).abs() < 1e-14);
    }

    #[test]
    fn constants_have_no_chaos() {
        let g = GraphParams::new(FRAC_PI_2).unwrap();
        let f = FourierFunction::constant(2.0, 16);
        let p = sample_path(1e-3, 0.2, 4).unwrap();
        let e = ChaosExpansion::new(&f, CirclePoint::new(1.0), 0.1, 1e-3, &g, &cfg(3)).unwrap();
        let terms = e.terms(&p).unwrap();
        assert_eq!(terms[0], 2.0);
        assert!(terms[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rejects_orders_past_truncation() {
        let g = GraphParams::new(PI).unwrap();
        let f = FourierFunction::cosine(1, 16);
        let p = sample_path(1e-3, 0.2, 4).unwrap();
        assert_eq!(
            chaos_term(&f, CirclePoint::new(1.0), 0.1, 4, &p, &g, &cfg(3)),
            Err(Error::OrderTooHigh { order: 4, max: 3 })
        );
    }

    // Brute-force operator sandwich, evaluated without the covector pull-back.
    fn direct_integrand(f: &FourierFunction<f64>, g: &GraphParams<f64>, z: CirclePoint<f64>, t: f64, s: &[f64]) -> f64 {
        let mut h = f.heat_apply(t - s[s.len() - 1]).unwrap();
        for k in (0..s.len()).rev() {
            let gap = if k == 0 { s[0] } else { s[k] - s[k - 1] };
            h = h.drift_apply(g).heat_apply(gap).unwrap();
        }
        h.eval(z)
    }

    #[test]
    fn tabulation_matches_direct_sandwich() {
        let g = GraphParams::new(2.0 * PI / 3.0).unwrap();
        let f = FourierFunction::cosine(2, 16);
        let z = CirclePoint::new(0.9);
        let (t, dt) = (0.04, 0.01);
        let e = ChaosExpansion::new(&f, z, t, dt, &g, &ChaosConfig { n_trunc: 3, stride: 1, k_max: 16 }).unwrap();
        let mut idx = 0;
        for a in 0..4 {
            for b in (a + 1)..4 {
                for c in (b + 1)..4 {
                    let s = [a as f64 * dt, b as f64 * dt, c as f64 * dt];
                    assert!((e.orders[2][idx] - direct_integrand(&f, &g, z, t, &s)).abs() < 1e-12);
                    idx += 1;
                }
            }
        }
        for a in 0..4 {
            let s = [a as f64 * dt];
            assert!((e.orders[0][a] - direct_integrand(&f, &g, z, t, &s)).abs() < 1e-12);
        }
    }

    #[test]
    fn contraction_matches_explicit_sums() {
        let g = GraphParams::new(FRAC_PI_2).unwrap();
        let f = FourierFunction::sine(1, 16);
        let z = CirclePoint::new(0.3);
        let p = sample_path(0.01, 0.06, 8).unwrap();
        let e = ChaosExpansion::new(&f, z, 0.06, 0.01, &g, &ChaosConfig { n_trunc: 2, stride: 2, k_max: 16 }).unwrap();
        let w = p.values();
        let cells = [0usize, 2, 4, 6];
        let dw: Vec<f64> = cells.windows(2).map(|c| w[c[1]] - w[c[0]]).collect();
        let mut expected = 0.0;
        for a in 0..3 {
            for b in (a + 1)..3 {
                let s = [cells[a] as f64 * 0.01, cells[b] as f64 * 0.01];
                expected += direct_integrand(&f, &g, z, 0.06, &s) * dw[a] * dw[b];
            }
        }
        assert!((e.term(&p, 2).unwrap() - expected).abs() < 1e-13);
        let one: f64 = (0..6)
            .map(|j| direct_integrand(&f, &g, z, 0.06, &[j as f64 * 0.01]) * (w[j + 1] - w[j]))
            .sum();
        assert!((e.term(&p, 1).unwrap() - one).abs() < 1e-13);
    }

    #[test]
    fn wiener_solution_before_the_first_crossing() {
        let g = GraphParams::new(FRAC_PI_2).unwrap();
        let path = BrownianPath::from_values(0.01, vec![0.0, -0.1, 0.2, 0.3]).unwrap();
        let real = FlowRealization::new(
            path,
            DecorationStore::new(Sign::Plus, SplitLaw::DiracHalf, 1),
            DecorationStore::new(Sign::Minus, SplitLaw::DiracHalf, 2),
            g,
        )
        .unwrap();
        let f = FourierFunction::sine(1, 8).combine(1.0, &FourierFunction::cosine(2, 8), 0.5).unwrap();
        let w_plus: f64 = 0.4;
        let expected = 0.5 * f.eval_angle(w_plus) + 0.5 * f.eval_angle(-w_plus);
        let got = wiener_solution(&real, CirclePoint::new(0.0), GridTime(3), &f).unwrap();
        assert!((got - expected).abs() < 1e-14);
        let one = FourierFunction::constant(1.0, 8);
        assert!((wiener_solution(&real, CirclePoint::new(2.0), GridTime(3), &one).unwrap() - 1.0).abs() < 1e-15);
        assert!(epsilon(CirclePoint::new(2.0), &g) == Sign::Minus);
    }

    #[test]
    fn wiener_solution_needs_half_weights() {
        let params = crate::flow::FlowParams {
            graph: GraphParams::new(FRAC_PI_2).unwrap(),
            m_plus: SplitLaw::Uniform,
            m_minus: SplitLaw::DiracHalf,
            dt: 0.01,
            horizon: 1.0,
        };
        let real = FlowRealization::sample(&params, 3).unwrap();
        let f = FourierFunction::cosine(1, 8);
        assert_eq!(
            wiener_solution(&real, CirclePoint::new(0.0), GridTime(10), &f),
            Err(Error::NotWiener)
        );
    }
}
