//! Run configuration: defaults, then a JSON document, then command-line flags.

use std::f64::consts::{FRAC_PI_4, PI};
use std::path::{Path, PathBuf};

use circleflow::chaos::ChaosConfig;
use circleflow::fourier::DEFAULT_K_MAX;
use circleflow::verify::{CheckName, CollapseEventConfig, LadderConfig};
use circleflow::{CirclePoint, FlowParams, FourierFunction, GraphParams, SplitLaw};
use clap::Args;
use serde::Deserialize;

/// Settings that may come from the JSON file or from flags. Every field is
/// optional so that a file or a flag can leave it to the layer below.
#[derive(Debug, Clone, Default, Deserialize, Args)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    /// Arc length of the positive edge, in (0, pi].
    #[arg(long, global = true)]
    pub l: Option<f64>,
    /// Split law at running minima: dirac:0.5, coalescing, uniform, beta:<a>, two-atom:<u>.
    #[arg(long, global = true)]
    pub m_plus: Option<String>,
    /// Split law at running maxima.
    #[arg(long, global = true)]
    pub m_minus: Option<String>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub horizon: Option<f64>,
    #[arg(long, global = true)]
    pub replicates: Option<usize>,
    /// Master seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Comma-separated check names for `verify`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub checks: Option<Vec<String>>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub k_max: Option<usize>,
    #[arg(long, global = true)]
    pub n_trunc: Option<usize>,
    /// Grid steps per cell for chaos orders two and up.
    #[arg(long, global = true)]
    pub stride: Option<usize>,
    /// First ladder threshold; later ones are alpha1 / k.
    #[arg(long, global = true)]
    pub alpha1: Option<f64>,
    /// Drawdown slack of the collapse detector.
    #[arg(long, global = true)]
    pub delta: Option<f64>,
    #[arg(long, global = true)]
    pub ladder_depth: Option<usize>,
    /// Comma-separated sample times for `simulate`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
    /// Starting angle for the chaos expansion.
    #[arg(long, global = true)]
    pub z: Option<f64>,
    /// Test function for `chaos`: cos:<n>, sin:<n> or const:<c>.
    #[arg(long, global = true)]
    pub f: Option<String>,
    /// Epsilon resamples per case of the filtering check.
    #[arg(long, global = true)]
    pub resamples: Option<usize>,
}

impl Overrides {
    /// Fields set in `top` win over those in `self`.
    fn layered(self, top: Overrides) -> Overrides {
        macro_rules! pick {
            ($($field:ident),*) => {
                Overrides { $($field: top.$field.or(self.$field)),* }
            };
        }
        pick!(
            l, m_plus, m_minus, dt, horizon, replicates, seed, checks, out, k_max, n_trunc, stride,
            alpha1, delta, ladder_depth, times, z, f, resamples
        )
    }
}

/// Rejected configuration; the command exits with status 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<circleflow::Error> for ConfigError {
    fn from(e: circleflow::Error) -> Self {
        ConfigError(e.to_string())
    }
}

/// Fully resolved and validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub flow: FlowParams,
    pub replicates: usize,
    pub seed: u64,
    pub checks: Vec<CheckName>,
    pub out: PathBuf,
    pub chaos: ChaosConfig,
    pub alpha1: Option<f64>,
    pub delta: f64,
    pub ladder_depth: usize,
    pub times: Vec<f64>,
    pub z: CirclePoint,
    pub f: FourierFunction,
    pub resamples: usize,
}

fn read_file(path: &Path) -> Result<Overrides, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())))
}

fn law(field: &str, spec: Option<String>) -> Result<SplitLaw, ConfigError> {
    spec.as_deref()
        .unwrap_or("uniform")
        .parse()
        .map_err(|e| ConfigError(format!("{field}: {e}")))
}

fn test_function(spec: &str, k_max: usize) -> Result<FourierFunction, ConfigError> {
    let bad = || ConfigError(format!("f: expected cos:<n>, sin:<n> or const:<c>, got `{spec}`"));
    let (kind, arg) = spec.split_once(':').ok_or_else(bad)?;
    match kind.trim() {
        "cos" | "sin" => {
            let n: usize = arg.trim().parse().map_err(|_| bad())?;
            if n > k_max {
                return Err(ConfigError(format!("f: frequency {n} exceeds k_max = {k_max}")));
            }
            Ok(if kind.trim() == "cos" {
                FourierFunction::cosine(n, k_max)
            } else {
                FourierFunction::sine(n, k_max)
            })
        }
        "const" => {
            let c: f64 = arg.trim().parse().map_err(|_| bad())?;
            Ok(FourierFunction::constant(c, k_max))
        }
        _ => Err(bad()),
    }
}

impl RunConfig {
    /// Layers the file named by `config` (if any) under `flags` and validates.
    pub fn resolve(config: Option<&Path>, flags: Overrides) -> Result<Self, ConfigError> {
        let base = match config {
            Some(p) => read_file(p)?,
            None => Overrides::default(),
        };
        Self::from_overrides(base.layered(flags))
    }

    pub fn from_overrides(o: Overrides) -> Result<Self, ConfigError> {
        let l = o.l.unwrap_or(2.0 * PI / 3.0);
        if !(l > 0.0 && l <= PI) {
            return Err(ConfigError(format!("l: {l} outside (0, pi]")));
        }
        let dt = o.dt.unwrap_or(1e-3);
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(ConfigError(format!("dt: {dt} must be positive")));
        }
        let horizon = o.horizon.unwrap_or(1.0);
        if !(horizon >= dt && horizon.is_finite()) {
            return Err(ConfigError(format!("horizon: {horizon} must be at least dt = {dt}")));
        }
        let replicates = o.replicates.unwrap_or(100);
        if replicates == 0 {
            return Err(ConfigError("replicates: must be at least 1".into()));
        }
        let flow = FlowParams {
            graph: GraphParams::new(l)?,
            m_plus: law("m_plus", o.m_plus)?,
            m_minus: law("m_minus", o.m_minus)?,
            dt,
            horizon,
        };
        let checks = o
            .checks
            .unwrap_or_default()
            .iter()
            .map(|c| c.parse::<CheckName>().map_err(|e| ConfigError(format!("checks: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let defaults = ChaosConfig::default();
        let chaos = ChaosConfig {
            n_trunc: o.n_trunc.unwrap_or(defaults.n_trunc),
            stride: o.stride.unwrap_or(defaults.stride),
            k_max: o.k_max.unwrap_or(DEFAULT_K_MAX),
        };
        if chaos.stride == 0 {
            return Err(ConfigError("stride: must be at least 1".into()));
        }
        let times = o.times.unwrap_or_else(|| vec![horizon]);
        if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && **t <= horizon)) {
            return Err(ConfigError(format!("times: {t} outside [0, horizon = {horizon}]")));
        }
        let config = RunConfig {
            flow,
            replicates,
            seed: o.seed.unwrap_or(42),
            checks,
            out: o.out.unwrap_or_else(|| PathBuf::from("out")),
            chaos,
            alpha1: o.alpha1,
            delta: o.delta.unwrap_or(0.3),
            ladder_depth: o.ladder_depth.unwrap_or(4),
            times,
            z: CirclePoint::new(o.z.unwrap_or(FRAC_PI_4)),
            f: test_function(o.f.as_deref().unwrap_or("cos:1"), chaos.k_max)?,
            resamples: o.resamples.unwrap_or(1000),
        };
        config.validate_checks()?;
        Ok(config)
    }

    /// Check-specific settings are validated before anything runs.
    fn validate_checks(&self) -> Result<(), ConfigError> {
        let g = self.flow.graph;
        for check in &self.checks {
            match check {
                CheckName::Reflected if !g.is_antipodal() => {
                    return Err(ConfigError(format!(
                        "checks: reflected needs l = pi, got l = {}",
                        g.l()
                    )));
                }
                CheckName::Collapse => {
                    self.collapse()?;
                }
                CheckName::Ladder => {
                    self.ladder()?;
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn collapse(&self) -> Result<CollapseEventConfig, ConfigError> {
        let g = self.flow.graph;
        let delta = if g.is_antipodal() { 0.0 } else { self.delta };
        CollapseEventConfig::new(g, delta).map_err(|e| ConfigError(format!("delta: {e}")))
    }

    pub fn ladder(&self) -> Result<LadderConfig, ConfigError> {
        let g = self.flow.graph;
        let cfg = match self.alpha1 {
            Some(a) => LadderConfig::harmonic(&g, a, self.ladder_depth),
            None => LadderConfig::default_for(&g, self.ladder_depth),
        };
        cfg.map_err(|e| ConfigError(format!("ladder: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_win_over_the_file_layer() {
        let file = Overrides {
            l: Some(1.0),
            dt: Some(0.01),
            ..Overrides::default()
        };
        let flags = Overrides {
            dt: Some(0.02),
            ..Overrides::default()
        };
        let c = RunConfig::from_overrides(file.layered(flags)).unwrap();
        assert_eq!(c.flow.graph.l(), 1.0);
        assert_eq!(c.flow.dt, 0.02);
        assert_eq!(c.seed, 42);
    }

    #[test]
    fn rejects_out_of_range_values() {
        let bad = [
            Overrides { l: Some(4.0), ..Overrides::default() },
            Overrides { dt: Some(0.0), ..Overrides::default() },
            Overrides { replicates: Some(0), ..Overrides::default() },
            Overrides { m_plus: Some("beta:1,2".into()), ..Overrides::default() },
            Overrides { checks: Some(vec!["reflected".into()]), ..Overrides::default() },
            Overrides { checks: Some(vec!["nope".into()]), ..Overrides::default() },
            Overrides { f: Some("tan:1".into()), ..Overrides::default() },
        ];
        for o in bad {
            assert!(RunConfig::from_overrides(o).is_err());
        }
    }

    #[test]
    fn unknown_json_fields_are_rejected_with_their_name() {
        let err = serde_json::from_str::<Overrides>(r#"{"l": 1.0, "lenght": 2}"#).unwrap_err();
        assert!(err.to_string().contains("lenght"));
    }
}
