//! Experiment configuration files (TOML, `version = 1`).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use rapsa_core::async_engine::DelayModel;
use rapsa_core::{BatchMode, Method, PairEval, StepSchedule};

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default = "default_name")]
    pub name: String,
    pub output_dir: Option<PathBuf>,
    pub problem: ProblemSpec,
    pub algorithm: AlgorithmSpec,
    pub schedule: ScheduleSpec,
    pub delay: Option<DelaySpec>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub report: ReportSpec,
}

fn default_name() -> String {
    "experiment".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Tridiagonal-mean linear regression.
    SyntheticLinear {
        p: usize,
        n: usize,
        #[serde(default = "default_noise")]
        noise_variance: f64,
        #[serde(default)]
        data_seed: u64,
    },
    /// Noiseless quadratic with a prescribed Hessian spectrum.
    ConditionedQuadratic {
        p: usize,
        n: usize,
        lambda_min: f64,
        lambda_max: f64,
        /// Blocks of a block-aligned eigenbasis; dense basis when absent.
        basis_blocks: Option<usize>,
        #[serde(default)]
        data_seed: u64,
    },
    /// Two Gaussian classes `N(±μ, I)` with `‖2μ‖ = separation`.
    LogisticSynthetic {
        p: usize,
        n: usize,
        #[serde(default = "default_separation")]
        separation: f64,
        /// Defaults to `1/√N`.
        lambda: Option<f64>,
        #[serde(default)]
        data_seed: u64,
        #[serde(default)]
        split_seed: u64,
    },
    /// MNIST IDX files, two digits as a binary task.
    LogisticMnist {
        /// Falls back to the `RAPSA_MNIST_DIR` environment variable.
        dir: Option<PathBuf>,
        #[serde(default = "default_digits")]
        digits: [u8; 2],
        lambda: Option<f64>,
        #[serde(default)]
        split_seed: u64,
    },
}

fn default_noise() -> f64 {
    1e-2
}

fn default_separation() -> f64 {
    5.0
}

fn default_digits() -> [u8; 2] {
    [0, 8]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmKind {
    Rapsa,
    Arapsa,
    AsyncRapsa,
    AsyncArapsa,
}

impl AlgorithmKind {
    pub fn is_async(self) -> bool {
        matches!(self, Self::AsyncRapsa | Self::AsyncArapsa)
    }

    pub fn is_accelerated(self) -> bool {
        matches!(self, Self::Arapsa | Self::AsyncArapsa)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BatchModeSpec {
    #[default]
    PerProcessor,
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PairEvalSpec {
    #[default]
    BlockLocal,
    Full,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub kind: AlgorithmKind,
    pub processors: usize,
    pub blocks: Vec<usize>,
    pub batch: usize,
    pub iterations: u64,
    #[serde(default = "one")]
    pub record_every: u64,
    /// Curvature memory `τ`, ARAPSA variants only.
    pub memory: Option<usize>,
    #[serde(default)]
    pub batch_mode: BatchModeSpec,
    #[serde(default)]
    pub pair_eval: PairEvalSpec,
    /// Asynchronous variants: run on OS threads instead of the simulator.
    #[serde(default)]
    pub threaded: bool,
    /// Starting point: every coordinate set to this value.
    #[serde(default)]
    pub init: f64,
    /// Give every block count the same features-processed budget:
    /// `iterations` and `record_every` apply to the smallest `B` and scale
    /// by `B / B_min` for the others.
    #[serde(default)]
    pub equal_features: bool,
}

impl AlgorithmSpec {
    /// `(iterations, record_every)` for a run with `blocks` blocks.
    pub fn horizon(&self, blocks: usize) -> (u64, u64) {
        if !self.equal_features {
            return (self.iterations, self.record_every);
        }
        let b_min = *self.blocks.iter().min().expect("validated non-empty") as u64;
        let scale = |v: u64| v * blocks as u64 / b_min;
        (scale(self.iterations), scale(self.record_every))
    }
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScheduleSpec {
    Constant { gamma: f64 },
    Diminishing { gamma0: f64, t0: f64 },
    Hybrid { eps: f64, t0: f64 },
}

impl ScheduleSpec {
    pub fn build(&self) -> Result<StepSchedule> {
        let s = match *self {
            ScheduleSpec::Constant { gamma } => StepSchedule::constant(gamma),
            ScheduleSpec::Diminishing { gamma0, t0 } => StepSchedule::diminishing(gamma0, t0),
            ScheduleSpec::Hybrid { eps, t0 } => StepSchedule::hybrid(eps, t0),
        };
        s.context("schedule")
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaySpec {
    pub mu: f64,
    pub sigma: f64,
    pub max_delay: u64,
}

impl DelaySpec {
    pub fn build(&self) -> Result<DelayModel> {
        DelayModel::new(self.mu, self.sigma, self.max_delay).context("delay")
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ReportSpec {
    /// Absolute gap for the iterations-to-threshold summary; defaults to
    /// `1e-3 · (F(x⁰) − F*)`.
    pub gap_threshold: Option<f64>,
    /// Accuracy `ε` and split `φ` for the minimum-iteration estimate.
    pub epsilon: Option<f64>,
    pub phi: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Rejects inconsistent combinations, naming the offending field.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            bail!(
                "version: unsupported config version {} (expected {CONFIG_VERSION})",
                self.version
            );
        }
        let a = &self.algorithm;
        if self.seeds.is_empty() {
            bail!("seeds: at least one seed is required");
        }
        if a.blocks.is_empty() {
            bail!("algorithm.blocks: at least one block count is required");
        }
        if a.processors == 0 {
            bail!("algorithm.processors: must be >= 1");
        }
        if let Some(&b) = a.blocks.iter().find(|&&b| b < a.processors) {
            bail!(
                "algorithm.blocks: {b} blocks is fewer than {} processors",
                a.processors
            );
        }
        if a.batch == 0 {
            bail!("algorithm.batch: must be >= 1");
        }
        if a.iterations == 0 {
            bail!("algorithm.iterations: must be >= 1");
        }
        if a.record_every == 0 {
            bail!("algorithm.record_every: must be >= 1");
        }
        match (a.kind.is_accelerated(), a.memory) {
            (true, None) => bail!("algorithm.memory: required for {:?}", a.kind),
            (true, Some(0)) => bail!("algorithm.memory: must be >= 1"),
            (false, Some(_)) => bail!("algorithm.memory: only valid for arapsa / async-arapsa"),
            _ => {}
        }
        if a.pair_eval != PairEvalSpec::BlockLocal && !a.kind.is_accelerated() {
            bail!("algorithm.pair_eval: only valid for arapsa / async-arapsa");
        }
        match (a.kind.is_async(), &self.delay) {
            (true, None) if !a.threaded => bail!("delay: required for simulated asynchronous runs"),
            (false, Some(_)) => bail!("delay: only valid for async-rapsa / async-arapsa"),
            (true, Some(d)) => {
                d.build()?;
            }
            _ => {}
        }
        if a.equal_features {
            let b_min = *a.blocks.iter().min().unwrap();
            if let Some(&b) = a.blocks.iter().find(|&&b| b % b_min != 0) {
                bail!("algorithm.equal_features: {b} blocks is not a multiple of the smallest count {b_min}");
            }
        }
        if a.threaded && !a.kind.is_async() {
            bail!("algorithm.threaded: only valid for async-rapsa / async-arapsa");
        }
        if a.threaded && self.delay.is_some() {
            bail!("delay: threaded runs take their delays from real execution; remove [delay]");
        }
        if a.kind.is_async() && a.batch_mode == BatchModeSpec::Shared {
            bail!("algorithm.batch_mode: shared batches are synchronous-only");
        }
        self.schedule.build()?;
        if let Some(phi) = self.report.phi {
            if !(phi > 0.0 && phi < 1.0) {
                bail!("report.phi: must lie in (0, 1)");
            }
        }
        Ok(())
    }

    pub fn method(&self) -> Method {
        match self.algorithm.memory {
            Some(memory) if self.algorithm.kind.is_accelerated() => Method::Arapsa { memory },
            _ => Method::Rapsa,
        }
    }

    pub fn batch_mode(&self) -> BatchMode {
        match self.algorithm.batch_mode {
            BatchModeSpec::PerProcessor => BatchMode::PerProcessor,
            BatchModeSpec::Shared => BatchMode::Shared,
        }
    }

    pub fn pair_eval(&self) -> PairEval {
        match self.algorithm.pair_eval {
            PairEvalSpec::BlockLocal => PairEval::BlockLocal,
            PairEvalSpec::Full => PairEval::Full,
        }
    }
}
