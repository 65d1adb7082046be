//! Run configuration: a flat JSON document whose keys map 1:1 onto
//! command-line flags (`n_paths` ↔ `--n-paths`). Flags win over the file.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Deserialize;

use super::CliError;
use crate::angular::FpeCoefficients;
use crate::density::Domain;
use crate::linalg::{Mat2, Vec2};
use crate::lyapunov::{McIntegrator, SweepMethod, SweepParam};
use crate::model::{rotation_scaling, GameParams};
use crate::sim::Scheme;

pub const MIN_GRID: usize = 16;
pub const MAX_GRID: usize = 1 << 20;
pub const MAX_STEP: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainArg {
    Half,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FpeArg {
    Derived,
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParamArg {
    Alpha,
    Beta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepMethodArg {
    Quadrature,
    ClosedForm,
    MonteCarlo,
    Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DensityMethodArg {
    /// General closed form, any B with nonvanishing q4.
    ClosedForm,
    /// Closed form for rotation-scaling B.
    Rotation,
    BackwardDifference,
    /// Published game density, not periodic in general.
    Printed,
    /// Published rotation-scaling density, not periodic in general.
    RotationPrinted,
}

impl DensityMethodArg {
    pub fn name(self) -> &'static str {
        match self {
            DensityMethodArg::ClosedForm => "closed-form",
            DensityMethodArg::Rotation => "rotation",
            DensityMethodArg::BackwardDifference => "backward-difference",
            DensityMethodArg::Printed => "printed",
            DensityMethodArg::RotationPrinted => "rotation-printed",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeArg {
    EulerMaruyama,
    Euler2,
    Euler2Printed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntegratorArg {
    Splitting,
    EulerMaruyama,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Text,
    Csv,
}

/// Contents of a `--config` file. Every key is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub b: Option<Mat2>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
    pub grid: Option<usize>,
    pub domain: Option<DomainArg>,
    pub fpe_coefficients: Option<FpeArg>,
    pub sweep_param: Option<SweepParamArg>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub steps: Option<usize>,
    pub sweep_method: Option<SweepMethodArg>,
    pub density_methods: Option<Vec<DensityMethodArg>>,
    pub scheme: Option<SchemeArg>,
    pub h: Option<f64>,
    pub n_steps: Option<usize>,
    pub keep_every: Option<usize>,
    pub x0: Option<Vec2>,
    pub perturbation: Option<Vec2>,
    pub deterministic: Option<bool>,
    pub seed: Option<u64>,
    pub horizon: Option<f64>,
    pub n_paths: Option<usize>,
    pub mc_integrator: Option<IntegratorArg>,
    pub burn_in: Option<f64>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
}

/// Command-line overrides, one per config key.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON config file; flags override its keys
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, allow_negative_numbers = true)]
    pub c1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub c2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub k1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub k2: Option<f64>,
    /// Noise matrix as b11,b12,b21,b22
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub b: Option<Vec<f64>>,
    /// Rotation-scaling noise b = [[alpha, -beta], [beta, alpha]]
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    /// Density grid cells
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long, value_enum)]
    pub domain: Option<DomainArg>,
    #[arg(long, value_enum)]
    pub fpe_coefficients: Option<FpeArg>,
    #[arg(long, value_enum)]
    pub sweep_param: Option<SweepParamArg>,
    #[arg(long, allow_negative_numbers = true)]
    pub from: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub to: Option<f64>,
    /// Sweep points
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, value_enum)]
    pub sweep_method: Option<SweepMethodArg>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub density_methods: Option<Vec<DensityMethodArg>>,
    #[arg(long, value_enum)]
    pub scheme: Option<SchemeArg>,
    /// Time step
    #[arg(long, allow_negative_numbers = true)]
    pub h: Option<f64>,
    #[arg(long)]
    pub n_steps: Option<usize>,
    #[arg(long)]
    pub keep_every: Option<usize>,
    /// Initial state as x1,x2 (default: the stationary state)
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub x0: Option<Vec<f64>>,
    /// Offset added to the initial state, as dx1,dx2
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub perturbation: Option<Vec<f64>>,
    /// Also integrate the noise-free system
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub deterministic: Option<bool>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo horizon T
    #[arg(long, allow_negative_numbers = true)]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub n_paths: Option<usize>,
    #[arg(long, value_enum)]
    pub mc_integrator: Option<IntegratorArg>,
    /// Fraction of the horizon discarded before averaging
    #[arg(long, allow_negative_numbers = true)]
    pub burn_in: Option<f64>,
    /// Output path prefix
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

/// Fully resolved and validated settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub game: GameParams,
    pub grid: usize,
    pub domain: Domain,
    pub fpe: FpeCoefficients,
    pub sweep_param: SweepParam,
    pub from: f64,
    pub to: f64,
    pub steps: usize,
    pub sweep_method: SweepMethod,
    pub density_methods: Vec<DensityMethodArg>,
    pub scheme: Scheme,
    pub h: f64,
    pub n_steps: usize,
    pub keep_every: usize,
    pub x0: Option<Vec2>,
    pub perturbation: Vec2,
    pub deterministic: bool,
    pub seed: u64,
    pub horizon: f64,
    pub n_paths: usize,
    pub mc_integrator: McIntegrator,
    pub burn_in: f64,
    pub output: PathBuf,
    pub format: Format,
}

pub fn load_file(path: &Path) -> Result<FileConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))
}

fn pair(name: &str, v: Option<Vec<f64>>) -> Result<Option<Vec2>, CliError> {
    match v {
        None => Ok(None),
        Some(v) if v.len() == 2 => Ok(Some([v[0], v[1]])),
        Some(v) => Err(CliError::Config(format!("--{name} takes 2 values, got {}", v.len()))),
    }
}

fn config_err(e: crate::Error) -> CliError {
    CliError::Config(e.to_string())
}

impl RunConfig {
    /// Merges `file` and `flags` over the defaults and validates the result.
    pub fn resolve(file: FileConfig, flags: &Overrides) -> Result<RunConfig, CliError> {
        let o = flags.clone();
        let flag_b = match o.b {
            None => None,
            Some(v) if v.len() == 4 => Some([[v[0], v[1]], [v[2], v[3]]]),
            Some(v) => return Err(CliError::Config(format!("--b takes 4 values, got {}", v.len()))),
        };

        let c1 = o.c1.or(file.c1).unwrap_or(0.2);
        let c2 = o.c2.or(file.c2).unwrap_or(2.0);
        let k1 = o.k1.or(file.k1).unwrap_or(0.2);
        let k2 = o.k2.or(file.k2).unwrap_or(0.4);
        let alpha = o.alpha.or(file.alpha);
        let beta = o.beta.or(file.beta);
        let explicit_b = flag_b.or(file.b);
        let b = match explicit_b {
            Some(b) => {
                if alpha.is_some() || beta.is_some() {
                    // a flag beats a file key of the other kind
                    let flag_rot = o.alpha.is_some() || o.beta.is_some();
                    match (flag_b.is_some(), flag_rot) {
                        (true, false) => b,
                        (false, true) => rotation_scaling(alpha.unwrap_or(b[0][0]), beta.unwrap_or(b[1][0])),
                        _ => {
                            return Err(CliError::Config(
                                "give either b or alpha/beta, not both".into(),
                            ))
                        }
                    }
                } else {
                    b
                }
            }
            None => rotation_scaling(alpha.unwrap_or(2.0), beta.unwrap_or(2.0)),
        };
        let game = GameParams::new(c1, c2, k1, k2, b).map_err(config_err)?;

        let cfg = RunConfig {
            game,
            grid: o.grid.or(file.grid).unwrap_or(4096),
            domain: match o.domain.or(file.domain).unwrap_or(DomainArg::Full) {
                DomainArg::Half => Domain::Half,
                DomainArg::Full => Domain::Full,
            },
            fpe: match o.fpe_coefficients.or(file.fpe_coefficients).unwrap_or(FpeArg::Derived) {
                FpeArg::Derived => FpeCoefficients::Derived,
                FpeArg::Printed => FpeCoefficients::Printed,
            },
            sweep_param: match o.sweep_param.or(file.sweep_param).unwrap_or(SweepParamArg::Alpha) {
                SweepParamArg::Alpha => SweepParam::Alpha,
                SweepParamArg::Beta => SweepParam::Beta,
            },
            from: o.from.or(file.from).unwrap_or(-3.0),
            to: o.to.or(file.to).unwrap_or(3.0),
            steps: o.steps.or(file.steps).unwrap_or(121),
            sweep_method: match o.sweep_method.or(file.sweep_method).unwrap_or(SweepMethodArg::Quadrature) {
                SweepMethodArg::Quadrature => SweepMethod::Quadrature,
                SweepMethodArg::ClosedForm => SweepMethod::ClosedForm,
                SweepMethodArg::MonteCarlo => SweepMethod::MonteCarlo,
                SweepMethodArg::Printed => SweepMethod::Printed,
            },
            density_methods: o.density_methods.or(file.density_methods).unwrap_or_else(|| {
                vec![DensityMethodArg::ClosedForm, DensityMethodArg::BackwardDifference]
            }),
            scheme: match o.scheme.or(file.scheme).unwrap_or(SchemeArg::Euler2) {
                SchemeArg::EulerMaruyama => Scheme::EulerMaruyama,
                SchemeArg::Euler2 => Scheme::Euler2,
                SchemeArg::Euler2Printed => Scheme::Euler2Printed,
            },
            h: o.h.or(file.h).unwrap_or(1e-3),
            n_steps: o.n_steps.or(file.n_steps).unwrap_or(100_000),
            keep_every: o.keep_every.or(file.keep_every).unwrap_or(100),
            x0: pair("x0", o.x0)?.or(file.x0),
            perturbation: pair("perturbation", o.perturbation)?.or(file.perturbation).unwrap_or([0.0, 0.0]),
            deterministic: o.deterministic.or(file.deterministic).unwrap_or(false),
            seed: o.seed.or(file.seed).unwrap_or(0),
            horizon: o.horizon.or(file.horizon).unwrap_or(200.0),
            n_paths: o.n_paths.or(file.n_paths).unwrap_or(256),
            mc_integrator: match o.mc_integrator.or(file.mc_integrator).unwrap_or(IntegratorArg::Splitting) {
                IntegratorArg::Splitting => McIntegrator::ExponentialSplitting,
                IntegratorArg::EulerMaruyama => McIntegrator::EulerMaruyama,
            },
            burn_in: o.burn_in.or(file.burn_in).unwrap_or(0.1),
            output: o.output.or(file.output).unwrap_or_else(|| PathBuf::from("stoch-duopoly")),
            format: o.format.or(file.format).unwrap_or_default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if !(MIN_GRID..=MAX_GRID).contains(&self.grid) {
            return bad(format!("grid must lie in [{MIN_GRID}, {MAX_GRID}], got {}", self.grid));
        }
        if self.domain == Domain::Full && self.grid % 2 != 0 {
            return bad(format!("grid must be even on the full domain, got {}", self.grid));
        }
        if !(self.h > 0.0 && self.h <= MAX_STEP) {
            return bad(format!("h must lie in (0, {MAX_STEP}], got {}", self.h));
        }
        if self.steps < 2 {
            return bad(format!("steps must be at least 2, got {}", self.steps));
        }
        if !(self.from.is_finite() && self.to.is_finite()) {
            return bad("from and to must be finite".into());
        }
        if self.density_methods.is_empty() {
            return bad("density_methods must name at least one method".into());
        }
        if self.keep_every == 0 {
            return bad("keep_every must be at least 1".into());
        }
        if self.n_paths == 0 {
            return bad("n_paths must be at least 1".into());
        }
        if !(self.horizon.is_finite() && self.horizon >= 100.0 * self.h) {
            return bad(format!(
                "horizon must be at least 100 h = {}, got {}",
                100.0 * self.h,
                self.horizon
            ));
        }
        if !(0.0..1.0).contains(&self.burn_in) {
            return bad(format!("burn_in must lie in [0, 1), got {}", self.burn_in));
        }
        let finite = |v: Vec2| v[0].is_finite() && v[1].is_finite();
        if self.x0.is_some_and(|x| !finite(x)) || !finite(self.perturbation) {
            return bad("x0 and perturbation must be finite".into());
        }
        Ok(())
    }
}
