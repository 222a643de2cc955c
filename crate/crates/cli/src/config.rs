use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use cube_transport::density::DensitySpec;
use serde::{Deserialize, Serialize};

/// Seed used when neither the config nor `CUBE_TRANSPORT_SEED` provides one.
pub const DEFAULT_SEED: u64 = 20_240_611;
pub const SEED_ENV: &str = "CUBE_TRANSPORT_SEED";
/// Largest grid accepted, in cells.
pub const MAX_CELLS: u64 = 1 << 24;
pub const MIN_POINTS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    DensityCheck,
    #[serde(rename = "verify-1d")]
    #[value(name = "verify-1d")]
    Verify1d,
    VerifyKnothe,
    Tire,
    Concentration,
    Counterexample,
    All,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = self.to_possible_value().expect("no skipped variants");
        f.write_str(s.get_name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub m: usize,
    pub ell: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            n: 2,
            m: 64,
            ell: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        ToleranceConfig {
            rel_tol: 0.05,
            abs_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonteCarloConfig {
    pub n_points: usize,
    /// Resolved from `CUBE_TRANSPORT_SEED` or [`DEFAULT_SEED`] when absent.
    pub seed: Option<u64>,
}

impl Default for MonteCarloConfig {
    fn default() -> Self {
        MonteCarloConfig {
            n_points: 1_000_000,
            seed: None,
        }
    }
}

/// Sizes of the randomized suites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub line_pairs: usize,
    pub knothe_pairs: usize,
    pub sandwich_pairs: usize,
    pub test_functions: usize,
    pub concentration_dims: Vec<usize>,
    pub counterexample_ns: Vec<usize>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            line_pairs: 50,
            knothe_pairs: 20,
            sandwich_pairs: 10,
            test_functions: 8,
            concentration_dims: vec![2, 4, 8],
            counterexample_ns: vec![256, 1024, 4096],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub source: Option<DensitySpec>,
    pub target: Option<DensitySpec>,
    pub grid: GridConfig,
    pub tolerance: ToleranceConfig,
    pub monte_carlo: MonteCarloConfig,
    pub suite: SuiteConfig,
    pub output_dir: PathBuf,
    pub plot: bool,
    pub threads: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            command: Command::All,
            source: None,
            target: None,
            grid: GridConfig::default(),
            tolerance: ToleranceConfig::default(),
            monte_carlo: MonteCarloConfig::default(),
            suite: SuiteConfig::default(),
            output_dir: PathBuf::from("out"),
            plot: false,
            threads: None,
        }
    }
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("invalid config {}: {e}", path.display())))
    }

    /// Fills in the seed from the environment or the default.
    pub fn resolve_seed(&mut self) -> Result<u64, ConfigError> {
        if let Some(seed) = self.monte_carlo.seed {
            return Ok(seed);
        }
        let seed = match std::env::var(SEED_ENV) {
            Ok(v) => v
                .trim()
                .parse()
                .map_err(|_| ConfigError(format!("{SEED_ENV}={v} is not an unsigned integer")))?,
            Err(_) => DEFAULT_SEED,
        };
        self.monte_carlo.seed = Some(seed);
        Ok(seed)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.grid;
        if g.n == 0 || g.m == 0 {
            return Err(ConfigError("grid needs n >= 1 and m >= 1".into()));
        }
        let cells = (g.m as u64).checked_pow(g.n as u32).unwrap_or(u64::MAX);
        if cells > MAX_CELLS {
            return Err(ConfigError(format!(
                "grid has m^n = {}^{} cells, limit is 2^24",
                g.m, g.n
            )));
        }
        if !(g.ell > 0.0 && g.ell.is_finite()) {
            return Err(ConfigError(format!("cube side {} must be positive", g.ell)));
        }
        if self.monte_carlo.n_points < MIN_POINTS {
            return Err(ConfigError(format!(
                "n_points = {} is below the minimum {MIN_POINTS}",
                self.monte_carlo.n_points
            )));
        }
        let t = &self.tolerance;
        if !(t.rel_tol >= 0.0 && t.abs_tol >= 0.0) {
            return Err(ConfigError("tolerances must be nonnegative".into()));
        }
        if self.threads == Some(0) {
            return Err(ConfigError("threads must be at least 1".into()));
        }
        if self.suite.concentration_dims.contains(&0) {
            return Err(ConfigError(
                "concentration dimensions must be positive".into(),
            ));
        }
        if self.suite.counterexample_ns.iter().any(|&n| n < 2) {
            return Err(ConfigError(
                "counterexample dimensions must be at least 2".into(),
            ));
        }
        Ok(())
    }
}
