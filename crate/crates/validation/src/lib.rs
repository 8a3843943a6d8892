//! The acceptance criteria at their stated scales and tolerances, plus two
//! spectral module examples that no criterion covers.
//!
//! Every criterion draws from master seed 42.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use circleflow::chaos::{ChaosConfig, ChaosExpansion};
use circleflow::circle::epsilon;
use circleflow::seed::replicate_seed;
use circleflow::stats::{correlation, standard_error, variance};
use circleflow::verify::{self, ChaosCheck, CollapseEventConfig, LadderConfig, VerificationReport};
use circleflow::{CirclePoint, FlowParams, FlowRealization, FourierFunction, GraphParams, Result, SplitLaw};

pub const MASTER: u64 = 42;

fn params(l: f64, law: SplitLaw, dt: f64, horizon: f64) -> FlowParams {
    FlowParams {
        graph: GraphParams::new(l).expect("valid length"),
        m_plus: law,
        m_minus: law,
        dt,
        horizon,
    }
}

fn merge(name: &str, parts: Vec<VerificationReport>) -> VerificationReport {
    let mut out = VerificationReport::new(name, parts.iter().map(|r| r.replicates).sum());
    for r in parts {
        out.passed &= r.passed;
        for (k, v) in r.statistics {
            out.statistics.insert(format!("{}.{}", r.check, k), v);
        }
        out.failing_seeds.extend(r.failing_seeds);
    }
    out
}

fn mass() -> Result<VerificationReport> {
    verify::mass_check(&params(2.0 * PI / 3.0, SplitLaw::Uniform, 1e-3, 5.0), 1000, 10, MASTER)
}

fn flow_property() -> Result<VerificationReport> {
    verify::flow_property_check(&params(2.0 * PI / 3.0, SplitLaw::Beta(2.0), 1e-3, 5.0), 100, MASTER)
}

fn sde_residual() -> Result<VerificationReport> {
    verify::sde_residual_check(&params(FRAC_PI_2, SplitLaw::Uniform, 1e-3, 1.5), &[1e-3, 1e-4], 1000, MASTER)
}

fn hitting_law() -> Result<VerificationReport> {
    verify::hitting_law_check(1.0, 1e-4, 4.0, 10_000, MASTER)
}

fn rho_symmetry() -> Result<VerificationReport> {
    verify::rho_symmetry_check(&params(FRAC_PI_2, SplitLaw::Uniform, 1e-4, 0.5), 10_000, MASTER)
}

fn u_law() -> Result<VerificationReport> {
    verify::u_law_check(&params(FRAC_PI_2, SplitLaw::Uniform, 1e-3, 0.5), 0.5, 10_000, MASTER)
}

fn filtering() -> Result<VerificationReport> {
    let mut parts = Vec::new();
    for law in [SplitLaw::Uniform, SplitLaw::Beta(2.0)] {
        let mut r = verify::filtering_suite(&params(FRAC_PI_2, law, 1e-3, 2.0), 10, 10_000, MASTER)?;
        r.check = format!("filtering[{law}]");
        parts.push(r);
    }
    Ok(merge("filtering", parts))
}

fn collapse() -> Result<VerificationReport> {
    let antipodal = params(PI, SplitLaw::Uniform, 1e-3, 20.0);
    let cfg = CollapseEventConfig::new(antipodal.graph, 0.0)?;
    let mut a = verify::collapse_check(&antipodal, &cfg, 1000, MASTER)?;
    a.check = "collapse[l=pi]".into();
    let generic = params(2.0 * PI / 3.0, SplitLaw::Uniform, 1e-3, 40.0);
    let cfg = CollapseEventConfig::new(generic.graph, 0.3)?;
    let mut b = verify::collapse_check(&generic, &cfg, 10_000, MASTER)?;
    b.check = "collapse[l=2pi/3]".into();
    Ok(merge("collapse", vec![a, b]))
}

fn ladder() -> Result<VerificationReport> {
    let p = params(2.0 * PI / 3.0, SplitLaw::Uniform, 1e-3, 4.0);
    let cfg = LadderConfig::default_for(&p.graph, 4)?;
    verify::ladder_check(&p, &cfg, 100_000, 64.0, MASTER)
}

fn reflected() -> Result<VerificationReport> {
    verify::reflected_representation_check(&params(PI, SplitLaw::Uniform, 1e-4, 3.0), 1000, MASTER)
}

fn chaos() -> Result<VerificationReport> {
    let g = GraphParams::new(FRAC_PI_2)?;
    let config = ChaosConfig::default();
    let check = ChaosCheck {
        t: 0.1,
        dt: 1e-4,
        z: CirclePoint::new(FRAC_PI_4),
        config,
    };
    let f = FourierFunction::cosine(1, config.k_max);
    verify::chaos_check(&g, &check, &f, 1000, MASTER)
}

fn coalescence() -> Result<VerificationReport> {
    verify::coalescence_check(&params(2.0 * PI / 3.0, SplitLaw::Uniform, 1e-3, 2.0), 100, 10, MASTER)
}

/// `(id, name, run)`.
pub type Criterion = (usize, &'static str, fn() -> Result<VerificationReport>);

pub const CRITERIA: [Criterion; 12] = [
    (1, "mass and normalization", mass),
    (2, "flow property", flow_property),
    (3, "SDE residual", sde_residual),
    (4, "hitting-time law", hitting_law),
    (5, "symmetry at rho", rho_symmetry),
    (6, "conditional law of U", u_law),
    (7, "filtering identity", filtering),
    (8, "collapse", collapse),
    (9, "support ladder", ladder),
    (10, "reflected representation", reflected),
    (11, "Wiener chaos", chaos),
    (12, "coalescence", coalescence),
];


/// Sup distance between the truncated drift of `cos` and the pointwise
/// product `eps * cos'` on a 2048-point grid, skipping a band of 0.05 rad
/// around both vertices. Passes at 1e-3.
pub fn drift_truncation() -> Result<VerificationReport> {
    let g = GraphParams::new(PI)?;
    let k_max = 64;
    let guard = 0.05;
    let drift = FourierFunction::cosine(1, k_max).drift_apply(&g);
    let mut worst = 0.0f64;
    let mut points = 0usize;
    for j in 0..2048 {
        let theta = TAU * j as f64 / 2048.0;
        let near = [0.0, g.l(), TAU].iter().any(|v| (theta - v).abs() < guard);
        if near {
            continue;
        }
        let exact = epsilon(CirclePoint::new(theta), &g).value::<f64>() * -theta.sin();
        worst = worst.max((drift.eval_angle(theta) - exact).abs());
        points += 1;
    }
    let mut report = VerificationReport::new("drift-truncation", 1);
    report
        .stat("sup_error", worst)
        .stat("grid_points", points as f64)
        .stat("k_max", k_max as f64)
        .require(worst <= 1e-3);
    Ok(report)
}

/// `|corr(J1, J2)| <= 3 / sqrt(N)` over 10^4 Wiener paths at `l = pi`,
/// `t = 0.1`, `f = cos`, `z = pi / 4`. Also reports the standard error of
/// the normalized product, the null spread of the sample correlation.
pub fn chaos_orthogonality() -> Result<VerificationReport> {
    let (t, dt, n) = (0.1, 1e-4, 10_000usize);
    let graph = GraphParams::new(PI)?;
    let params = FlowParams {
        graph,
        m_plus: SplitLaw::DiracHalf,
        m_minus: SplitLaw::DiracHalf,
        dt,
        horizon: t,
    };
    let f = FourierFunction::cosine(1, 64);
    let cfg = ChaosConfig { n_trunc: 2, ..ChaosConfig::default() };
    let expansion = ChaosExpansion::new(&f, CirclePoint::new(FRAC_PI_4), t, dt, &graph, &cfg)?;
    let mut j1 = Vec::with_capacity(n);
    let mut j2 = Vec::with_capacity(n);
    for i in 0..n as u64 {
        let real = FlowRealization::sample(&params, replicate_seed(MASTER, i))?;
        let terms = expansion.terms(real.path())?;
        j1.push(terms[1]);
        j2.push(terms[2]);
    }
    let (s1, s2) = (variance(&j1).sqrt(), variance(&j2).sqrt());
    let product: Vec<f64> = j1.iter().zip(&j2).map(|(a, b)| a * b / (s1 * s2)).collect();
    let c = correlation(&j1, &j2);
    let bound = 3.0 / (n as f64).sqrt();
    let mut report = VerificationReport::new("chaos-orthogonality", n);
    report
        .stat("correlation", c)
        .stat("bound", bound)
        .stat("product_standard_error", standard_error(&product))
        .require(c.abs() <= bound);
    Ok(report)
}
