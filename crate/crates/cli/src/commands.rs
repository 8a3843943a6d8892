//! The three commands. Replicates run on the rayon pool; rows are gathered
//! in replicate order and written by the calling thread.

use std::fs;

use anyhow::Context;
use circleflow::seed::replicate_seed;
use circleflow::verify::{self, ChaosCheck, CheckName, VerificationReport};
use circleflow::{FlowRealization, GridTime, Sign};
use rayon::prelude::*;

use crate::config::{ConfigError, RunConfig};
use crate::output::{float, report_json, Table};

/// Why a command stopped short of a verdict.
#[derive(Debug)]
pub enum Failure {
    /// Bad configuration; exit status 2.
    Config(String),
    /// Anything else that went wrong while running; exit status 1.
    Runtime(anyhow::Error),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.0)
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

impl From<circleflow::Error> for Failure {
    fn from(e: circleflow::Error) -> Self {
        match e {
            circleflow::Error::InvalidParameter(_)
            | circleflow::Error::InvalidLaw { .. }
            | circleflow::Error::NotWiener => Failure::Config(e.to_string()),
            other => Failure::Runtime(other.into()),
        }
    }
}

fn sign(s: Sign) -> &'static str {
    match s {
        Sign::Plus => "+",
        Sign::Minus => "-",
    }
}

type Rows = Vec<Vec<String>>;

/// Writes `support.csv` and `anchors.csv`; returns `true` once written.
pub fn simulate(cfg: &RunConfig) -> Result<bool, Failure> {
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let per: Vec<(Rows, Rows)> = (0..cfg.replicates as u64)
        .into_par_iter()
        .map(|r| -> Result<(Rows, Rows), circleflow::Error> {
            let real = FlowRealization::sample(&cfg.flow, replicate_seed(cfg.seed, r))?;
            let path = real.path();
            let vertex = real.graph().vertex_one();
            let mut support = Vec::new();
            for &t in &cfg.times {
                let at = path.grid_time_at(t);
                for atom in real.kernel(GridTime(0), at, vertex)?.atoms() {
                    support.push(vec![
                        r.to_string(),
                        float(at.time(cfg.flow.dt)),
                        float(atom.point.theta()),
                        float(atom.weight),
                    ]);
                }
            }
            let chain = real.rho_chain(GridTime(0));
            let anchors = chain
                .anchors
                .iter()
                .enumerate()
                .map(|(k, a)| {
                    let side = if k == 0 { "" } else { sign(chain.sides[k - 1]) };
                    vec![r.to_string(), k.to_string(), float(a.time), float(a.value), side.to_string()]
                })
                .collect();
            Ok((support, anchors))
        })
        .collect::<Result<_, _>>()?;
    let mut support = Table::create(&cfg.out.join("support.csv"), &["replicate", "t", "atom_theta", "weight"])?;
    let mut anchors = Table::create(&cfg.out.join("anchors.csv"), &["replicate", "k", "t", "w", "side"])?;
    for (s, a) in per {
        for row in s {
            support.row(row)?;
        }
        for row in a {
            anchors.row(row)?;
        }
    }
    support.finish()?;
    anchors.finish()?;
    println!(
        "simulated {} replicates into {}",
        cfg.replicates,
        cfg.out.display()
    );
    Ok(true)
}

fn chaos_settings(cfg: &RunConfig) -> ChaosCheck {
    ChaosCheck {
        t: cfg.flow.horizon,
        dt: cfg.flow.dt,
        z: cfg.z,
        config: cfg.chaos,
    }
}

fn run_check(cfg: &RunConfig, check: CheckName) -> Result<VerificationReport, Failure> {
    let (p, n, seed) = (&cfg.flow, cfg.replicates, cfg.seed);
    let report = match check {
        CheckName::Mass => verify::mass_check(p, n, 10, seed)?,
        CheckName::FlowProperty => verify::flow_property_check(p, n, seed)?,
        CheckName::SdeResidual => verify::sde_residual_check(p, &[p.dt, p.dt / 10.0], n, seed)?,
        CheckName::ULaw => verify::u_law_check(p, p.horizon, n, seed)?,
        CheckName::Filtering => verify::filtering_suite(p, n, cfg.resamples, seed)?,
        CheckName::Collapse => verify::collapse_check(p, &cfg.collapse()?, n, seed)?,
        CheckName::Ladder => verify::ladder_check(p, &cfg.ladder()?, n, 64.0, seed)?,
        CheckName::Reflected => verify::reflected_representation_check(p, n, seed)?,
        CheckName::Chaos => verify::chaos_check(&p.graph, &chaos_settings(cfg), &cfg.f, n, seed)?,
        CheckName::HittingLaw => verify::hitting_law_check(p.graph.l(), p.dt, p.horizon, n, seed)?,
        CheckName::RhoSymmetry => verify::rho_symmetry_check(p, n, seed)?,
        CheckName::Coalescence => verify::coalescence_check(p, n, 10, seed)?,
    };
    Ok(report)
}

/// Runs each configured check; writes `verify.jsonl` and `verify_summary.csv`.
pub fn verify(cfg: &RunConfig) -> Result<bool, Failure> {
    if cfg.checks.is_empty() {
        return Err(Failure::Config("checks: at least one check is required".into()));
    }
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let mut detail = String::new();
    let mut summary = Table::create(
        &cfg.out.join("verify_summary.csv"),
        &["check", "passed", "replicates", "statistic", "value"],
    )?;
    let mut all_passed = true;
    for &check in &cfg.checks {
        let report = run_check(cfg, check)?;
        all_passed &= report.passed;
        detail.push_str(&report_json(&report)?);
        detail.push('\n');
        for (k, v) in &report.statistics {
            summary.row([
                report.check.clone(),
                report.passed.to_string(),
                report.replicates.to_string(),
                k.clone(),
                float(*v),
            ])?;
        }
        println!(
            "{} {} ({} replicates)",
            if report.passed { "PASS" } else { "FAIL" },
            report.check,
            report.replicates
        );
    }
    summary.finish()?;
    fs::write(cfg.out.join("verify.jsonl"), detail)?;
    Ok(all_passed)
}

/// L2 error of each chaos truncation order against the Wiener solution;
/// writes `chaos.csv`. Passes when the errors decrease strictly or all vanish.
pub fn chaos(cfg: &RunConfig) -> Result<bool, Failure> {
    if !cfg.flow.m_plus.is_dirac_half() || !cfg.flow.m_minus.is_dirac_half() {
        return Err(Failure::Config(format!(
            "chaos: the expansion converges to the Wiener solution only, which needs m_plus = m_minus = dirac:0.5 (got {} and {})",
            cfg.flow.m_plus, cfg.flow.m_minus
        )));
    }
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let report = verify::chaos_check(&cfg.flow.graph, &chaos_settings(cfg), &cfg.f, cfg.replicates, cfg.seed)?;
    let mut table = Table::create(&cfg.out.join("chaos.csv"), &["order", "l2_error", "standard_error"])?;
    let mut errors = Vec::new();
    for order in 0..=cfg.chaos.n_trunc {
        let stat = |name: &str| report.statistics.get(&format!("{name}_{order}")).copied().unwrap_or(f64::NAN);
        let (err, se) = (stat("l2_error_order"), stat("l2_error_se_order"));
        table.row([order.to_string(), float(err), float(se)])?;
        errors.push(err);
    }
    table.finish()?;
    let vanishing = errors.iter().all(|e| *e == 0.0);
    let decreasing = errors.windows(2).all(|w| w[1] < w[0]);
    let passed = vanishing || decreasing;
    println!(
        "{} chaos: L2 errors {}",
        if passed { "PASS" } else { "FAIL" },
        errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>().join(" > ")
    );
    Ok(passed)
}
