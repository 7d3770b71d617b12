use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use edcnn::analysis::SampleDistribution;
use edcnn::frames::{frame_residual, FrameMode, PoolingKind};
use edcnn::rng::{derive_seed, gaussian_vector, seeded_rng};
use edcnn::{Network, NetworkSpec, Nonlinearity};
use edcnn_cli::config::{Analysis, BankSource, ExperimentConfig};
use edcnn_cli::render::{report_table, residual_table};
use edcnn_cli::runner::{to_pretty, AnalysisBlock, RunOutput};
use edcnn_cli::{run, CliError, EXIT_ASSERTION, EXIT_USAGE, OUT_DIR_ENV};

/// `print!` that exits quietly when stdout is closed (e.g. piped into `head`).
macro_rules! out {
    ($($arg:tt)*) => {{
        use std::io::Write;
        if let Err(e) = write!(std::io::stdout().lock(), $($arg)*) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
            return Err(CliError::Io(e));
        }
    }};
}

macro_rules! outln {
    ($($arg:tt)*) => {{
        out!("{}\n", format_args!($($arg)*))
    }};
}

/// Encoder-decoder CNN verification toolkit.
#[derive(Parser)]
#[command(name = "edcnn", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every analysis of a JSON experiment config and write the report.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config and $EDCNN_OUT_DIR).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print frame-condition residuals, basis identity and reconstruction error.
    VerifyFrames(NetArgs),
    /// Report max ‖F(x) − x‖/‖x‖ over random inputs.
    Reconstruct {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// Linear-region census.
    Regions {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
    /// Per-region and global Lipschitz constants.
    Lipschitz {
        #[command(flatten)]
        net: NetArgs,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
    /// Analytic Jacobians against finite differences.
    Jacobian {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long, default_value_t = 20)]
        points: usize,
    },
    /// Gradient sandwich certificates and the stationarity check.
    Landscape {
        #[command(flatten)]
        net: NetArgs,
        /// Training samples T.
        #[arg(long, default_value_t = 2)]
        samples: usize,
    },
    /// Gradient descent on the filter taps.
    Train {
        #[command(flatten)]
        net: NetArgs,
        #[arg(long, default_value_t = 2)]
        samples: usize,
        #[arg(long, default_value_t = 500)]
        iterations: usize,
        #[arg(long, default_value_t = 0.1)]
        step_size: f64,
        #[arg(long, default_value_t = 0)]
        checkpoint_every: usize,
    },
    /// Pretty-print a report.json as a table.
    Report { path: PathBuf },
}

/// Parse a value through its JSON string form, so flags accept exactly the
/// names used in config files.
fn json_name<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

#[derive(Args, Clone)]
struct NetArgs {
    /// Network spec JSON: {"r": 2, "q": [1, 2], "m": [8, 8], "skip": false, "nonlinearity": "relu"}.
    #[arg(long)]
    spec: PathBuf,
    /// Override the nonlinearity: none, relu or encoder_relu.
    #[arg(long, value_parser = json_name::<Nonlinearity>)]
    nonlinearity: Option<Nonlinearity>,
    /// Shorthand for --nonlinearity none.
    #[arg(long, conflicts_with = "nonlinearity")]
    no_relu: bool,
    /// Load the layer bank from a JSON file.
    #[arg(long, conflicts_with = "random_bank")]
    bank: Option<PathBuf>,
    /// Use a Gaussian random bank instead of the frame factory.
    #[arg(long)]
    random_bank: bool,
    /// Filter scale of the random bank.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Pooling frame constant of the frame factory.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    /// Frame mode, skip or no_skip; also sets the spec's skip flag.
    #[arg(long, value_parser = json_name::<FrameMode>)]
    mode: Option<FrameMode>,
    /// Frame-factory pooling: identity, orthogonal or haar.
    #[arg(long, value_parser = json_name::<PoolingKind>, default_value = "identity")]
    pooling: PoolingKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write report files to this directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 2 when a check fails.
    #[arg(long)]
    enforce: bool,
}

#[derive(Args, Clone)]
struct SamplerArgs {
    #[arg(long, default_value_t = 1000)]
    samples: usize,
    /// gaussian, sphere or grid.
    #[arg(long, value_parser = json_name::<SampleDistribution>, default_value = "gaussian")]
    distribution: SampleDistribution,
}

impl NetArgs {
    fn spec(&self) -> Result<NetworkSpec, CliError> {
        let text = std::fs::read_to_string(&self.spec).map_err(|e| {
            CliError::Usage(format!("cannot read spec {}: {e}", self.spec.display()))
        })?;
        let mut spec: NetworkSpec = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", self.spec.display())))?;
        if let Some(mode) = self.mode {
            spec.skip = mode == FrameMode::Skip;
        }
        if self.no_relu {
            spec.nonlinearity = Nonlinearity::None;
        } else if let Some(nl) = self.nonlinearity {
            spec.nonlinearity = nl;
        }
        Ok(spec)
    }

    fn bank_source(&self) -> BankSource {
        if let Some(path) = &self.bank {
            BankSource::File { path: path.clone() }
        } else if self.random_bank {
            BankSource::Random {
                seed: None,
                scale: self.scale,
            }
        } else {
            BankSource::FrameFactory {
                alpha: self.alpha,
                mode: self.mode,
                pooling: self.pooling,
                filters: Default::default(),
                seed: None,
            }
        }
    }

    fn config(&self, analysis: Analysis) -> Result<ExperimentConfig, CliError> {
        let mut cfg =
            ExperimentConfig::single(self.spec()?, self.bank_source(), analysis, self.seed);
        if self.enforce {
            cfg.enforce = vec![analysis];
        }
        Ok(cfg)
    }
}

fn finish_single(out: &RunOutput, net: &NetArgs, analysis: Analysis) -> Result<i32, CliError> {
    if let Some(dir) = &net.out {
        out.write(dir)?;
    }
    let block: &AnalysisBlock = out.block(analysis).expect("requested analysis ran");
    if let Some(err) = &block.error {
        eprintln!("{analysis} failed: {err}");
        return Ok(if block.enforced {
            EXIT_ASSERTION
        } else {
            EXIT_USAGE
        });
    }
    Ok(out.exit_code())
}

fn print_block(out: &RunOutput, analysis: Analysis) -> Result<(), CliError> {
    let block = out.block(analysis).expect("requested analysis ran");
    out!("{}", to_pretty(block)?);
    Ok(())
}

fn single(
    net: &NetArgs,
    analysis: Analysis,
    tweak: impl FnOnce(&mut ExperimentConfig),
) -> Result<i32, CliError> {
    let mut cfg = net.config(analysis)?;
    tweak(&mut cfg);
    let out = run(&cfg)?;
    print_block(&out, analysis)?;
    finish_single(&out, net, analysis)
}

fn default_out_dir(cfg: &ExperimentConfig, flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| cfg.output_dir.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("edcnn-out"))
}

fn run_config(path: &Path, out: Option<PathBuf>) -> Result<i32, CliError> {
    let cfg = ExperimentConfig::load(path)?;
    let dir = default_out_dir(&cfg, out);
    let result = run(&cfg)?;
    result.write(&dir)?;
    for block in &result.report.analyses {
        let status = if block.passed { "PASS" } else { "FAIL" };
        let enforced = if block.enforced { " (enforced)" } else { "" };
        outln!("{status} {}{enforced}", block.name);
    }
    outln!("report written to {}", dir.join("report.json").display());
    Ok(result.exit_code())
}

fn verify_frames(net: &NetArgs) -> Result<i32, CliError> {
    let cfg = net.config(Analysis::Frames)?;
    let out = run(&cfg)?;
    let mode = FrameMode::for_spec(&cfg.network);
    out!(
        "{}",
        residual_table(&frame_residual(&cfg.network, &out.bank, mode)?)
    );
    let block = out.block(Analysis::Frames).expect("frames ran");
    for c in &block.checks {
        outln!(
            "{:<24} {:>10.3e}  {}",
            c.name,
            c.value.unwrap_or(f64::NAN),
            if c.passed { "ok" } else { "FAILED" }
        );
    }
    finish_single(&out, net, Analysis::Frames)
}

fn reconstruct(net: &NetArgs, samples: usize) -> Result<i32, CliError> {
    let cfg = net.config(Analysis::Frames)?;
    let bank = cfg.build_bank()?;
    let network = Network::build(&cfg.network, &bank)?;
    let mut rng = seeded_rng(derive_seed(cfg.seed, "reconstruct"));
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let x = gaussian_vector(&mut rng, cfg.network.input_dim());
        let y = network.output(&x)?;
        worst = worst.max((&y - &x).norm() / x.norm());
    }
    outln!("max relative reconstruction error over {samples} inputs: {worst:.3e}");
    let tol = cfg.tolerances.identity;
    if net.enforce && (worst.is_nan() || worst > tol) {
        eprintln!("reconstruction error exceeds {tol:e}");
        return Ok(EXIT_ASSERTION);
    }
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run { config, out } => run_config(&config, out),
        Command::VerifyFrames(net) => verify_frames(&net),
        Command::Reconstruct { net, samples } => reconstruct(&net, samples),
        Command::Regions { net, sampler } => single(&net, Analysis::Regions, |c| {
            c.sampler.count = sampler.samples;
            c.sampler.distribution = sampler.distribution;
        }),
        Command::Lipschitz { net, sampler } => single(&net, Analysis::Lipschitz, |c| {
            c.sampler.count = sampler.samples;
            c.sampler.distribution = sampler.distribution;
        }),
        Command::Jacobian { net, points } => {
            single(&net, Analysis::Jacobian, |c| c.probes.count = points)
        }
        Command::Landscape { net, samples } => {
            single(&net, Analysis::Landscape, |c| c.landscape.samples = samples)
        }
        Command::Train {
            net,
            samples,
            iterations,
            step_size,
            checkpoint_every,
        } => single(&net, Analysis::Train, |c| {
            c.train.samples = samples;
            c.train.iterations = iterations;
            c.train.step_size = step_size;
            c.train.checkpoint_every = checkpoint_every;
        }),
        Command::Report { path } => {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            out!("{}", report_table(&value).map_err(CliError::Config)?);
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_USAGE as u8)
        }
    }
}
