//! Experiment configuration: schema, defaults and the validating loader.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use edcnn::analysis::{SampleDistribution, SamplerConfig, DEFAULT_KINK_MARGIN};
use edcnn::frames::{FilterOrtho, FrameConfig, FrameMode, PoolingKind};
use edcnn::landscape::TrainConfig;
use edcnn::rng::derive_seed;
use edcnn::{LayerBank, NetworkSpec};

use crate::CliError;

/// Analyses in the order a config may request them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Analysis {
    /// Frame residuals, frame basis, perfect reconstruction, cascade check.
    Frames,
    /// `F(x) = B̃(x)B(x)ᵀx` on probe inputs.
    Representation,
    Regions,
    Lipschitz,
    Jacobian,
    Landscape,
    Train,
}

impl Analysis {
    pub const ALL: [Analysis; 7] = [
        Self::Frames,
        Self::Representation,
        Self::Regions,
        Self::Lipschitz,
        Self::Jacobian,
        Self::Landscape,
        Self::Train,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Frames => "frames",
            Self::Representation => "representation",
            Self::Regions => "regions",
            Self::Lipschitz => "lipschitz",
            Self::Jacobian => "jacobian",
            Self::Landscape => "landscape",
            Self::Train => "train",
        }
    }
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn one() -> f64 {
    1.0
}

/// Where the layer bank comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum BankSource {
    FrameFactory {
        #[serde(default = "one")]
        alpha: f64,
        /// Defaults to the network's skip flag.
        #[serde(default)]
        mode: Option<FrameMode>,
        #[serde(default)]
        pooling: PoolingKind,
        #[serde(default)]
        filters: FilterOrtho,
        #[serde(default)]
        seed: Option<u64>,
    },
    Random {
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default = "one")]
        scale: f64,
    },
    File {
        path: PathBuf,
    },
}

impl Default for BankSource {
    fn default() -> Self {
        Self::FrameFactory {
            alpha: 1.0,
            mode: None,
            pooling: PoolingKind::Identity,
            filters: FilterOrtho::Seeded,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub count: usize,
    pub distribution: SampleDistribution,
    /// Defaults to a sub-seed of the global seed.
    pub seed: Option<u64>,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self {
            count: 1000,
            distribution: SampleDistribution::Gaussian,
            seed: None,
        }
    }
}

/// Random probe inputs for representation, reconstruction and Jacobian checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSection {
    pub count: usize,
    pub seed: Option<u64>,
}

impl Default for ProbeSection {
    fn default() -> Self {
        Self {
            count: 20,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Exact algebraic identities (reconstruction, representation, frame residuals).
    pub identity: f64,
    /// Cascaded-filter block deviation.
    pub cascade: f64,
    /// Relative Frobenius error of Jacobians and gradients against finite differences.
    pub finite_difference: f64,
    /// Finite-difference step.
    pub fd_step: f64,
    /// Minimum `|pre-activation|` for derivative checks.
    pub kink_margin: f64,
    /// Relative slack of the gradient sandwich.
    pub bound_slack: f64,
    /// Additive slack of the pairwise Lipschitz check.
    pub lipschitz: f64,
    /// Losses at or below this count as zero.
    pub loss_floor: f64,
    /// Gradients above this count as non-vanishing.
    pub grad_positive: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            identity: 1e-10,
            cascade: 1e-12,
            finite_difference: 1e-5,
            fd_step: 1e-6,
            kink_margin: DEFAULT_KINK_MARGIN,
            bound_slack: 1e-8,
            lipschitz: 1e-8,
            loss_floor: 1e-6,
            grad_positive: 1e-12,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LandscapeSection {
    /// Training samples `T`.
    pub samples: usize,
    pub seed: Option<u64>,
    /// Cross-check analytic gradients against finite differences.
    pub finite_differences: bool,
}

impl Default for LandscapeSection {
    fn default() -> Self {
        Self {
            samples: 2,
            seed: None,
            finite_differences: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub samples: usize,
    pub data_seed: Option<u64>,
    pub step_size: f64,
    pub iterations: usize,
    pub target_loss: f64,
    pub checkpoint_every: usize,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let gd = TrainConfig::default();
        Self {
            samples: 2,
            data_seed: None,
            step_size: gd.step_size,
            iterations: gd.iterations,
            target_loss: gd.target_loss,
            checkpoint_every: gd.checkpoint_every,
            armijo_c1: gd.armijo_c1,
            backtrack: gd.backtrack,
            max_backtracks: gd.max_backtracks,
        }
    }
}

impl TrainSection {
    pub fn gd_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            step_size: self.step_size,
            iterations: self.iterations,
            seed,
            target_loss: self.target_loss,
            checkpoint_every: self.checkpoint_every,
            armijo_c1: self.armijo_c1,
            backtrack: self.backtrack,
            max_backtracks: self.max_backtracks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Global seed; every stochastic component derives its own sub-seed.
    pub seed: u64,
    pub network: NetworkSpec,
    #[serde(default)]
    pub bank: BankSource,
    pub analyses: Vec<Analysis>,
    /// Analyses whose checks decide the exit status.
    #[serde(default)]
    pub enforce: Vec<Analysis>,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub probes: ProbeSection,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub landscape: LandscapeSection,
    #[serde(default)]
    pub train: TrainSection,
    /// Not echoed in reports, so moving the output keeps reports identical.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// A config running one analysis with default settings.
    pub fn single(network: NetworkSpec, bank: BankSource, analysis: Analysis, seed: u64) -> Self {
        Self {
            seed,
            network,
            bank,
            analyses: vec![analysis],
            enforce: Vec::new(),
            sampler: SamplerSection::default(),
            probes: ProbeSection::default(),
            tolerances: Tolerances::default(),
            landscape: LandscapeSection::default(),
            train: TrainSection::default(),
            output_dir: None,
        }
    }

    /// Parse and validate; relative bank paths resolve against `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut cfg: Self =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("{e}")))?;
        if let BankSource::File { path } = &mut cfg.bank {
            if path.is_relative() {
                *path = base_dir.join(&*path);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_json(&text, base).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad =
            |field: &str, msg: String| Err(CliError::Config(format!("field `{field}`: {msg}")));
        if self.analyses.is_empty() {
            return bad("analyses", "at least one analysis is required".into());
        }
        for (i, a) in self.analyses.iter().enumerate() {
            if self.analyses[..i].contains(a) {
                return bad("analyses", format!("`{a}` is listed twice"));
            }
        }
        for a in &self.enforce {
            if !self.analyses.contains(a) {
                return bad(
                    "enforce",
                    format!("`{a}` is enforced but not in `analyses`"),
                );
            }
        }
        match &self.bank {
            BankSource::File { path } if !path.is_file() => {
                return bad(
                    "bank.path",
                    format!("file {} does not exist", path.display()),
                );
            }
            BankSource::FrameFactory { alpha, .. } if !(*alpha > 0.0 && alpha.is_finite()) => {
                return bad("bank.alpha", format!("must be positive, got {alpha}"));
            }
            BankSource::Random { scale, .. } if !scale.is_finite() => {
                return bad("bank.scale", format!("must be finite, got {scale}"));
            }
            _ => {}
        }
        if self.sampler.count == 0 {
            return bad("sampler.count", "must be at least 1".into());
        }
        if self.probes.count == 0 {
            return bad("probes.count", "must be at least 1".into());
        }
        if self.landscape.samples == 0 {
            return bad("landscape.samples", "must be at least 1".into());
        }
        if self.train.samples == 0 {
            return bad("train.samples", "must be at least 1".into());
        }
        Ok(())
    }

    /// Explicit seed, or the global seed hashed with the component name.
    pub fn sub_seed(&self, explicit: Option<u64>, component: &str) -> u64 {
        explicit.unwrap_or_else(|| derive_seed(self.seed, component))
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        SamplerConfig {
            count: self.sampler.count,
            distribution: self.sampler.distribution,
            seed: self.sub_seed(self.sampler.seed, "sampler"),
        }
    }

    pub fn build_bank(&self) -> Result<LayerBank, CliError> {
        let spec = &self.network;
        let bank = match &self.bank {
            BankSource::FrameFactory {
                alpha,
                mode,
                pooling,
                filters,
                seed,
            } => {
                let cfg = FrameConfig {
                    alpha: *alpha,
                    mode: mode.unwrap_or_else(|| FrameMode::for_spec(spec)),
                    pooling: *pooling,
                    filters: *filters,
                    seed: self.sub_seed(*seed, "bank"),
                };
                edcnn::frames::frame_bank(spec, &cfg)?
            }
            BankSource::Random { seed, scale } => {
                LayerBank::random(spec, self.sub_seed(*seed, "bank"), *scale)?
            }
            BankSource::File { path } => {
                let bank = LayerBank::load(path)
                    .map_err(|e| CliError::Config(format!("bank file {}: {e}", path.display())))?;
                bank.validate(spec)
                    .map_err(|e| CliError::Config(format!("bank file {}: {e}", path.display())))?;
                bank
            }
        };
        Ok(bank)
    }
}
