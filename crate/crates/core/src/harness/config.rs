use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::integrator::{builtin_laplacian_sine, scalar_linear, DeclaredConstants, Drift, SemiLinearProblem};
use crate::noise::{HurstParameter, DEFAULT_QUADRATURE_ORDER};

/// Fine-grid sizes up to this use the exact sampler by default.
pub const EXACT_NOISE_MAX_STEPS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProblemSpec {
    /// Built-in stiff system of dimension `n`.
    LaplacianSine { n: usize },
    /// `dX = (-alpha X + f) dt + dB^H` on `[0, t_end]`.
    ScalarLinear { alpha: f64, x0: f64, t_end: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftSpec {
    Sine,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMode {
    /// `|V_N - U(T)|`
    Endpoint,
    /// `max_k |V_k - U(t_k)|` over the coarse grid.
    Sup,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    ExactCholesky,
    RiemannOracle,
}

impl fmt::Display for ErrorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ErrorMode::Endpoint => "endpoint",
            ErrorMode::Sup => "sup",
        })
    }
}

impl fmt::Display for NoiseMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseMode::ExactCholesky => "exact-cholesky",
            NoiseMode::RiemannOracle => "riemann-oracle",
        })
    }
}

impl fmt::Display for DriftSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DriftSpec::Sine => "sine",
            DriftSpec::Zero => "zero",
        })
    }
}

/// Experiment description read from a `key = value` file.
///
/// Defaults are the desk-scale profile: the built-in problem with `n = 10`,
/// `H = 0.6, 0.7, 0.8, 0.9`, coarse steps `4, 8, 16, 32, 64`, 1024 reference
/// steps, 200 paths, seed 0, sup-norm errors. `noise_mode` defaults to the exact
/// sampler for at most 64 reference steps and to the Riemann oracle above that.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub drift: DriftSpec,
    pub noise_scale: f64,
    pub hurst_values: Vec<f64>,
    pub coarse_steps: Vec<usize>,
    pub ref_steps: usize,
    pub paths: usize,
    pub seed: u64,
    pub error_mode: ErrorMode,
    noise_mode: Option<NoiseMode>,
    pub output_dir: PathBuf,
    pub quadrature_order: usize,
    /// Lipschitz constant used by the stability assessment; the problem's own when absent.
    pub lipschitz: Option<f64>,
    /// Grid size for single-trajectory and covariance dumps.
    pub steps: usize,
    /// Noise index whose covariance is dumped.
    pub noise_index: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSpec::LaplacianSine { n: 10 },
            drift: DriftSpec::Sine,
            noise_scale: 1.0,
            hurst_values: vec![0.6, 0.7, 0.8, 0.9],
            coarse_steps: vec![4, 8, 16, 32, 64],
            ref_steps: 1024,
            paths: 200,
            seed: 0,
            error_mode: ErrorMode::Sup,
            noise_mode: None,
            output_dir: PathBuf::from("out"),
            quadrature_order: DEFAULT_QUADRATURE_ORDER,
            lipschitz: None,
            steps: 64,
            noise_index: 0,
        }
    }
}

const KEYS: &[&str] = &[
    "problem",
    "n",
    "alpha",
    "x0",
    "t_end",
    "drift",
    "noise_scale",
    "hurst_values",
    "coarse_steps",
    "ref_steps",
    "paths",
    "seed",
    "error_mode",
    "noise_mode",
    "output_dir",
    "quadrature_order",
    "lipschitz",
    "steps",
    "noise_index",
];

fn parse_value<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        line,
        message: format!("malformed value '{value}' for {key}"),
    })
}

fn parse_list<T: FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(|item| parse_value(line, key, item.trim()))
        .collect()
}

fn config_err(line: usize, message: impl Into<String>) -> Error {
    Error::Config {
        line,
        message: message.into(),
    }
}

impl ExperimentConfig {
    /// Noise generator used for the reference grid.
    pub fn noise_mode(&self) -> NoiseMode {
        self.noise_mode_for(self.ref_steps)
    }

    /// The configured noise mode, or the default for a grid of `steps` steps.
    pub fn noise_mode_for(&self, steps: usize) -> NoiseMode {
        self.noise_mode.unwrap_or(if steps <= EXACT_NOISE_MAX_STEPS {
            NoiseMode::ExactCholesky
        } else {
            NoiseMode::RiemannOracle
        })
    }

    pub fn set_noise_mode(&mut self, mode: NoiseMode) {
        self.noise_mode = Some(mode);
    }

    /// 1000 paths and 2048 reference steps.
    pub fn apply_paper_scale(&mut self) {
        self.paths = 1000;
        self.ref_steps = 2048;
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen: HashMap<&str, usize> = HashMap::new();
        let mut problem_name = None;
        let (mut n, mut alpha, mut x0, mut t_end) = (None, None, None, None);

        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| config_err(line, format!("expected 'key = value', found '{content}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let key = *KEYS
                .iter()
                .find(|k| **k == key)
                .ok_or_else(|| config_err(line, format!("unknown key '{key}'")))?;
            if let Some(prev) = seen.insert(key, line) {
                return Err(config_err(line, format!("duplicate key '{key}' (first set on line {prev})")));
            }
            if value.is_empty() {
                return Err(config_err(line, format!("missing value for {key}")));
            }
            match key {
                "problem" => problem_name = Some(value.to_string()),
                "n" => n = Some(parse_value::<usize>(line, key, value)?),
                "alpha" => alpha = Some(parse_value::<f64>(line, key, value)?),
                "x0" => x0 = Some(parse_value::<f64>(line, key, value)?),
                "t_end" => t_end = Some(parse_value::<f64>(line, key, value)?),
                "drift" => {
                    cfg.drift = match value {
                        "sine" => DriftSpec::Sine,
                        "zero" => DriftSpec::Zero,
                        _ => return Err(config_err(line, format!("unknown drift '{value}'"))),
                    }
                }
                "noise_scale" => cfg.noise_scale = parse_value(line, key, value)?,
                "hurst_values" => cfg.hurst_values = parse_list(line, key, value)?,
                "coarse_steps" => cfg.coarse_steps = parse_list(line, key, value)?,
                "ref_steps" => cfg.ref_steps = parse_value(line, key, value)?,
                "paths" => cfg.paths = parse_value(line, key, value)?,
                "seed" => cfg.seed = parse_value(line, key, value)?,
                "error_mode" => {
                    cfg.error_mode = match value {
                        "endpoint" => ErrorMode::Endpoint,
                        "sup" => ErrorMode::Sup,
                        _ => return Err(config_err(line, format!("unknown error mode '{value}'"))),
                    }
                }
                "noise_mode" => {
                    cfg.noise_mode = Some(match value {
                        "exact-cholesky" => NoiseMode::ExactCholesky,
                        "riemann-oracle" => NoiseMode::RiemannOracle,
                        _ => return Err(config_err(line, format!("unknown noise mode '{value}'"))),
                    })
                }
                "output_dir" => cfg.output_dir = PathBuf::from(value),
                "quadrature_order" => cfg.quadrature_order = parse_value(line, key, value)?,
                "lipschitz" => cfg.lipschitz = Some(parse_value(line, key, value)?),
                "steps" => cfg.steps = parse_value(line, key, value)?,
                "noise_index" => cfg.noise_index = parse_value(line, key, value)?,
                _ => unreachable!("key list and match arms disagree"),
            }
        }

        let line_of = |key: &str| seen.get(key).copied().unwrap_or(0);
        let misplaced = |keys: &[&str], problem: &str| -> Result<()> {
            match keys.iter().find(|k| seen.contains_key(**k)) {
                Some(k) => Err(config_err(line_of(k), format!("key '{k}' does not apply to problem {problem}"))),
                None => Ok(()),
            }
        };
        cfg.problem = match problem_name.as_deref().unwrap_or("laplacian_sine") {
            "laplacian_sine" => {
                misplaced(&["alpha", "x0", "t_end"], "laplacian_sine")?;
                ProblemSpec::LaplacianSine { n: n.unwrap_or(10) }
            }
            "scalar_linear" => {
                misplaced(&["n"], "scalar_linear")?;
                ProblemSpec::ScalarLinear {
                    alpha: alpha.unwrap_or(1.0),
                    x0: x0.unwrap_or(1.0),
                    t_end: t_end.unwrap_or(1.0),
                }
            }
            other => return Err(config_err(line_of("problem"), format!("unknown problem '{other}'"))),
        };
        cfg.validate_with(line_of)?;
        Ok(cfg)
    }

    /// Checks the invariants; errors cite line 0 when the offending value is a default.
    pub fn validate(&self) -> Result<()> {
        self.validate_with(|_| 0)
    }

    fn validate_with(&self, line_of: impl Fn(&str) -> usize) -> Result<()> {
        match self.problem {
            ProblemSpec::LaplacianSine { n } if n == 0 => {
                return Err(config_err(line_of("n"), "n must be at least 1"));
            }
            ProblemSpec::ScalarLinear { alpha, .. } if !(alpha > 0.0) => {
                return Err(config_err(line_of("alpha"), "alpha must be positive"));
            }
            ProblemSpec::ScalarLinear { t_end, .. } if !(t_end > 0.0) || !t_end.is_finite() => {
                return Err(config_err(line_of("t_end"), "t_end must be positive"));
            }
            _ => {}
        }
        if self.hurst_values.is_empty() {
            return Err(config_err(line_of("hurst_values"), "at least one Hurst value is required"));
        }
        for &h in &self.hurst_values {
            HurstParameter::new(h).map_err(|e| config_err(line_of("hurst_values"), e.to_string()))?;
        }
        if self.coarse_steps.is_empty() || self.coarse_steps.contains(&0) {
            return Err(config_err(line_of("coarse_steps"), "coarse step counts must be positive"));
        }
        if self.ref_steps == 0 {
            return Err(config_err(line_of("ref_steps"), "ref_steps must be positive"));
        }
        let line = line_of("ref_steps").max(line_of("coarse_steps"));
        if let Some(c) = self.coarse_steps.iter().find(|&&c| self.ref_steps % c != 0) {
            return Err(config_err(line, format!("ref_steps {} is not divisible by {c}", self.ref_steps)));
        }
        let max = *self.coarse_steps.iter().max().unwrap();
        if self.ref_steps / max < 8 {
            return Err(config_err(
                line,
                format!("ref_steps {} must be at least 8 times the finest coarse grid ({max})", self.ref_steps),
            ));
        }
        if self.paths == 0 {
            return Err(config_err(line_of("paths"), "paths must be positive"));
        }
        if !self.noise_scale.is_finite() {
            return Err(config_err(line_of("noise_scale"), "noise_scale must be finite"));
        }
        if self.quadrature_order < 2 {
            return Err(config_err(line_of("quadrature_order"), "quadrature_order must be at least 2"));
        }
        if self.steps == 0 {
            return Err(config_err(line_of("steps"), "steps must be positive"));
        }
        if let Some(k) = self.lipschitz {
            if !(k >= 0.0) {
                return Err(config_err(line_of("lipschitz"), "lipschitz must be non-negative"));
            }
        }
        if self.noise_index >= self.noise_count() {
            return Err(config_err(line_of("noise_index"), "noise_index exceeds the number of noise terms"));
        }
        Ok(())
    }

    fn noise_count(&self) -> usize {
        match self.problem {
            ProblemSpec::LaplacianSine { n } => n,
            ProblemSpec::ScalarLinear { .. } => 1,
        }
    }

    /// The problem at Hurst value `h`, with drift and noise scale applied.
    pub fn build_problem(&self, h: f64) -> Result<SemiLinearProblem> {
        let hurst = HurstParameter::new(h)?;
        let drift = match self.drift {
            DriftSpec::Sine => Drift::Sine,
            DriftSpec::Zero => Drift::Zero,
        };
        let problem = match self.problem {
            ProblemSpec::LaplacianSine { n } => builtin_laplacian_sine(n, hurst)?.with_drift(drift),
            ProblemSpec::ScalarLinear { alpha, x0, t_end } => scalar_linear(alpha, drift, x0, (0.0, t_end), hurst)?
                .with_constants(DeclaredConstants {
                    lipschitz: Some(1.0),
                    growth: Some(1.0),
                    noise_bound: Some(1.0),
                    semigroup: None,
                }),
        };
        Ok(problem.with_noise_scale(self.noise_scale))
    }

    /// One `key = value` line per setting, in a fixed order.
    pub fn canonical(&self) -> String {
        let join = |v: &[String]| v.join(",");
        let mut s = String::new();
        match self.problem {
            ProblemSpec::LaplacianSine { n } => {
                let _ = writeln!(s, "problem = laplacian_sine");
                let _ = writeln!(s, "n = {n}");
            }
            ProblemSpec::ScalarLinear { alpha, x0, t_end } => {
                let _ = writeln!(s, "problem = scalar_linear");
                let _ = writeln!(s, "alpha = {alpha:?}");
                let _ = writeln!(s, "x0 = {x0:?}");
                let _ = writeln!(s, "t_end = {t_end:?}");
            }
        }
        let hurst: Vec<String> = self.hurst_values.iter().map(|h| format!("{h:?}")).collect();
        let coarse: Vec<String> = self.coarse_steps.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(s, "drift = {}", self.drift);
        let _ = writeln!(s, "noise_scale = {:?}", self.noise_scale);
        let _ = writeln!(s, "hurst_values = {}", join(&hurst));
        let _ = writeln!(s, "coarse_steps = {}", join(&coarse));
        let _ = writeln!(s, "ref_steps = {}", self.ref_steps);
        let _ = writeln!(s, "paths = {}", self.paths);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "error_mode = {}", self.error_mode);
        let _ = writeln!(s, "noise_mode = {}", self.noise_mode());
        let _ = writeln!(s, "quadrature_order = {}", self.quadrature_order);
        if let Some(k) = self.lipschitz {
            let _ = writeln!(s, "lipschitz = {k:?}");
        }
        let _ = writeln!(s, "steps = {}", self.steps);
        let _ = writeln!(s, "noise_index = {}", self.noise_index);
        s
    }

    /// FNV-1a hash of [`ExperimentConfig::canonical`]; the output directory is excluded.
    pub fn hash(&self) -> u64 {
        let mut h = crate::noise::Fnv::default();
        h.write_bytes(self.canonical().as_bytes());
        h.0
    }
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

/// Parses and validates an experiment description.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    ExperimentConfig::parse(text)
}
