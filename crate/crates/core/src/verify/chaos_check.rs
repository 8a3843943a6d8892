//! Truncated chaos expansions against the noise-measurable solution.

use rayon::prelude::*;

use crate::chaos::{wiener_solution, ChaosConfig, ChaosExpansion};
use crate::circle::{epsilon, CirclePoint, GraphParams};
use crate::decorations::SplitLaw;
use crate::error::Result;
use crate::flow::{FlowParams, FlowRealization};
use crate::fourier::FourierFunction;
use crate::path::GridTime;
use crate::seed::replicate_seed;
use crate::stats::{mean, standard_error, variance};

/// Settings of the chaos comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChaosCheck {
    pub t: f64,
    pub dt: f64,
    pub z: CirclePoint<f64>,
    pub config: ChaosConfig,
}

/// Composite Simpson rule with `panels` (even) panels.
fn simpson(a: f64, b: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / panels as f64;
    let mut acc = f(a) + f(b);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// `E[g(z + sqrt(u) N)]` for a function that is smooth away from the two
/// vertices, integrating piecewise between the points where the argument
/// crosses a vertex.
fn gaussian_average(g: &GraphParams<f64>, z: f64, u: f64, f: impl Fn(f64) -> f64) -> f64 {
    let reach = 9.0;
    let sd = u.sqrt();
    let (lo, hi) = (z - reach * sd, z + reach * sd);
    let mut cuts = vec![lo, hi];
    for vertex in [0.0, g.l()] {
        let first = ((lo - vertex) / std::f64::consts::TAU).ceil() as i64;
        let last = ((hi - vertex) / std::f64::consts::TAU).floor() as i64;
        for k in first..=last {
            cuts.push(vertex + k as f64 * std::f64::consts::TAU);
        }
    }
    cuts.sort_by(f64::total_cmp);
    let density = |y: f64| {
        let x = (y - z) / sd;
        (-0.5 * x * x).exp() / (sd * (std::f64::consts::TAU).sqrt())
    };
    cuts.windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            // Midpoint nudges keep each piece on one side of its vertex.
            let span = w[1] - w[0];
            let panels = 2 * ((span / (0.01 * sd)).ceil() as usize).max(8);
            simpson(w[0], w[1], panels, |y| {
                let inside = y.clamp(w[0] + 1e-12 * span, w[1] - 1e-12 * span);
                density(y) * f(inside)
            })
        })
        .sum()
}

/// `int_0^t ([P_u D P_{t-u} f](z))^2 du`, the variance of the first chaos
/// term by the Ito isometry, with the outer heat factor as a Gaussian
/// average in angle space rather than in Fourier space.
pub fn first_order_variance(g: &GraphParams<f64>, f: &FourierFunction<f64>, z: CirclePoint<f64>, t: f64) -> Result<f64> {
    let integrand = |u: f64| -> f64 {
        let inner = f.heat_apply(t - u).expect("nonnegative heat time").derivative();
        let drift = |theta: f64| epsilon(CirclePoint::new(theta), g).value::<f64>() * inner.eval_angle(theta);
        let value = if u <= 0.0 {
            drift(z.theta())
        } else {
            gaussian_average(g, z.theta(), u, drift)
        };
        value * value
    };
    Ok(simpson(0.0, t, 200, integrand))
}

/// Per order `N`, the root mean square of `sum_{n <= N} J_n - K f(z)` over
/// Wiener realizations; passes when this decreases strictly in `N` and the
/// sample variance of `J_1` is within 5% of the isometry value.
pub fn chaos_check(
    graph: &GraphParams<f64>,
    check: &ChaosCheck,
    f: &FourierFunction<f64>,
    replicates: usize,
    master: u64,
) -> Result<super::VerificationReport> {
    let expansion = ChaosExpansion::new(f, check.z, check.t, check.dt, graph, &check.config)?;
    let params = FlowParams {
        graph: *graph,
        m_plus: SplitLaw::DiracHalf,
        m_minus: SplitLaw::DiracHalf,
        dt: check.dt,
        horizon: check.t,
    };
    let per: Vec<(Vec<f64>, f64)> = (0..replicates as u64)
        .into_par_iter()
        .map(|i| {
            let real = FlowRealization::sample(&params, replicate_seed(master, i))?;
            let terms = expansion.terms(real.path())?;
            let t = GridTime(real.path().last().0);
            Ok((terms, wiener_solution(&real, check.z, t, f)?))
        })
        .collect::<Result<_>>()?;
    let mut report = super::VerificationReport::new("chaos", replicates);
    let mut prev = f64::INFINITY;
    for order in 0..=expansion.n_trunc() {
        let sq: Vec<f64> = per
            .iter()
            .map(|(terms, exact)| {
                let partial: f64 = terms[..=order].iter().sum();
                (partial - exact).powi(2)
            })
            .collect();
        let err = mean(&sq).sqrt();
        let se = if err > 0.0 { standard_error(&sq) / (2.0 * err) } else { 0.0 };
        report
            .stat(&format!("l2_error_order_{order}"), err)
            .stat(&format!("l2_error_se_order_{order}"), se);
        if order > 0 {
            report.require(err < prev);
        }
        prev = err;
    }
    let first: Vec<f64> = per.iter().map(|(terms, _)| terms.get(1).copied().unwrap_or(0.0)).collect();
    let var = variance(&first);
    let isometry = first_order_variance(graph, f, check.z, check.t)?;
    let discrete: f64 = expansion.first_order_integrand().iter().map(|x| x * x * check.dt).sum();
    let ratio = var / isometry;
    report
        .stat("order_1_variance", var)
        .stat("isometry_variance", isometry)
        .stat("discrete_isometry_variance", discrete)
        .stat("variance_ratio", ratio)
        .require((ratio - 1.0).abs() <= 0.05);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn gaussian_average_of_smooth_and_jumping_functions() {
        let g = GraphParams::new(FRAC_PI_2).unwrap();
        let u = 0.3;
        // E cos(z + sqrt(u) N) = e^{-u/2} cos z
        let got = gaussian_average(&g, 1.0, u, f64::cos);
        assert!((got - (-u / 2.0).exp() * 1.0f64.cos()).abs() < 1e-10);
        // A unit step at the vertex 0 averages to Phi(z / sqrt(u)) near z = 0.
        let step = gaussian_average(&g, 0.2, 0.01, |y| if y.rem_euclid(2.0 * PI) < 1.0 { 1.0 } else { 0.0 });
        assert!((step - crate::stats::normal_cdf(2.0)).abs() < 1e-8);
    }

    #[test]
    fn isometry_oracle_matches_the_discrete_sum() {
        let g = GraphParams::new(FRAC_PI_2).unwrap();
        let cfg = ChaosConfig { n_trunc: 1, ..ChaosConfig::default() };
        let f = FourierFunction::<f64>::cosine(1, cfg.k_max);
        let z = CirclePoint::new(FRAC_PI_4);
        let e = ChaosExpansion::new(&f, z, 0.1, 1e-3, &g, &cfg).unwrap();
        let discrete: f64 = e.first_order_integrand().iter().map(|x| x * x * 1e-3).sum();
        let exact = first_order_variance(&g, &f, z, 0.1).unwrap();
        assert!((discrete / exact - 1.0).abs() < 0.02, "{discrete} vs {exact}");
    }
}
