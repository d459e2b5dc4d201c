//! `fxvg` — batch front-end for the Heston–CIR variance-gamma engine.
//!
//! Precedence of settings: built-in defaults < `--config` file < flags.
//! Every run writes its outputs and a `manifest.json` into `--out-dir`.

mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fxvg_core::analytics::Normalizer;
use fxvg_core::engine::{DriftClock, Truncation};
use fxvg_core::pricing::OptionRight;
use fxvg_core::subordinator::TimeChange;

use config::{GofReference, OutputFormat, RunConfig, StyleChoice};
use manifest::CommandKind;

#[derive(Parser)]
#[command(name = "fxvg", version, about = "Monte Carlo FX option engine: Heston-CIR dynamics with variance-gamma noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate paths of (S, V, rd, rf).
    Simulate(#[command(flatten)] RunArgs),
    /// Price a strike ladder of European and/or American options on one path set.
    Price {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        contract: ContractArgs,
    },
    /// Pathwise convergence study on a common-noise refinement ladder.
    Converge {
        #[command(flatten)]
        run: RunArgs,
        /// Refinement levels m (level m uses m² steps).
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
        /// Level of the reference solution (default: 4 × the largest level).
        #[arg(long)]
        reference_level: Option<usize>,
    },
    /// Chi-square goodness of fit, ECDF and histogram of a sample.
    Gof {
        #[command(flatten)]
        run: RunArgs,
        /// File with one value per line (default: simulated log-returns).
        #[arg(long)]
        sample: Option<PathBuf>,
        /// Test this many standard normal draws instead.
        #[arg(long)]
        synthetic: Option<usize>,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long, value_enum)]
        reference: Option<GofReference>,
        /// Paths simulated for the model reference distribution.
        #[arg(long)]
        reference_paths: Option<usize>,
    },
    /// Compare model prices with an option chain (NRMSE).
    Compare {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        chain: Option<PathBuf>,
        /// `strike,price` ladder of model prices; without it the chain is priced by LSM.
        #[arg(long)]
        model_prices: Option<PathBuf>,
        #[arg(long, value_enum)]
        right: Option<RightArg>,
        #[arg(long, value_enum)]
        normalizer: Option<NormalizerArg>,
        #[arg(long)]
        lsm_degree: Option<usize>,
    },
    /// Re-run a manifest.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        /// Compare outputs byte for byte with the originals.
        #[arg(long)]
        verify: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ClockArg {
    Subordinated,
    Calendar,
}

#[derive(Clone, Copy, ValueEnum)]
enum TruncationArg {
    Full,
    Absorb,
}

#[derive(Clone, Copy, ValueEnum)]
enum TimeChangeArg {
    Gamma,
    Identity,
}

#[derive(Clone, Copy, ValueEnum)]
enum RightArg {
    Put,
    Call,
}

impl From<RightArg> for OptionRight {
    fn from(r: RightArg) -> Self {
        match r {
            RightArg::Put => OptionRight::Put,
            RightArg::Call => OptionRight::Call,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NormalizerArg {
    Range,
    Max,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    paths: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    horizon: Option<f64>,
    /// Gamma clock shape per unit time (with --beta).
    #[arg(long, requires = "beta", conflicts_with_all = ["mu", "nu"])]
    alpha: Option<f64>,
    /// Gamma clock rate (with --alpha).
    #[arg(long, requires = "alpha")]
    beta: Option<f64>,
    /// Clock mean per unit time (with --nu; default 1).
    #[arg(long, conflicts_with = "beta")]
    mu: Option<f64>,
    /// Clock variance per unit time, the variance-gamma parameter ν.
    #[arg(long, conflicts_with = "beta")]
    nu: Option<f64>,
    #[arg(long, value_enum)]
    drift_clock: Option<ClockArg>,
    #[arg(long, value_enum)]
    truncation: Option<TruncationArg>,
    #[arg(long, value_enum)]
    time_change: Option<TimeChangeArg>,
    /// Localization level n (box [1/n, n]^4).
    #[arg(long)]
    localize: Option<u32>,
    /// Worker threads (0 = all cores); results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    /// Accept zero volatilities and other degenerate parameters.
    #[arg(long)]
    allow_degenerate: bool,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    #[arg(long, value_enum)]
    format: Option<OutputFormat>,
}

#[derive(Args)]
struct ContractArgs {
    #[arg(long, value_enum)]
    style: Option<StyleChoice>,
    #[arg(long, value_enum)]
    right: Option<RightArg>,
    /// Comma-separated strikes, e.g. 95,100,105.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    strike_ladder: Option<Vec<f64>>,
    #[arg(long)]
    lsm_degree: Option<usize>,
}

impl RunArgs {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut cfg = RunConfig::load(self.config.as_deref())?;
        let s = &mut cfg.simulation;
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value {
                    $field = v;
                }
            };
        }
        set!(s.paths, self.paths);
        set!(s.steps, self.steps);
        set!(s.t0, self.t0);
        set!(s.horizon, self.horizon);
        set!(s.workers, self.workers);
        set!(s.format, self.format);
        if self.seed.is_some() {
            s.seed = self.seed;
        }
        if self.localize.is_some() {
            s.localize = self.localize;
        }
        if self.allow_degenerate {
            s.allow_degenerate = true;
        }
        set!(
            s.drift_clock,
            self.drift_clock.map(|c| match c {
                ClockArg::Subordinated => DriftClock::Subordinated,
                ClockArg::Calendar => DriftClock::Calendar,
            })
        );
        set!(
            s.truncation,
            self.truncation.map(|t| match t {
                TruncationArg::Full => Truncation::FullTruncation,
                TruncationArg::Absorb => Truncation::Absorption,
            })
        );
        set!(
            s.time_change,
            self.time_change.map(|t| match t {
                TimeChangeArg::Gamma => TimeChange::Gamma,
                TimeChangeArg::Identity => TimeChange::Identity,
            })
        );
        // A parametrization given on the command line replaces the file's.
        let sub = &mut cfg.subordinator;
        if self.alpha.is_some() || self.beta.is_some() {
            *sub = config::SubordinatorSection {
                alpha: self.alpha,
                beta: self.beta,
                ..Default::default()
            };
        } else if self.mu.is_some() || self.nu.is_some() {
            let keep_mu = sub.mu;
            let keep_nu = sub.nu;
            *sub = config::SubordinatorSection {
                mu: self.mu.or(keep_mu),
                nu: self.nu.or(keep_nu),
                ..Default::default()
            };
        }
        Ok(cfg)
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    let (kind, cfg, out_dir) = match cli.command {
        Command::Simulate(run) => (CommandKind::Simulate, run.resolve()?, run.out_dir),
        Command::Price { run, contract } => {
            let mut cfg = run.resolve()?;
            let c = &mut cfg.contract;
            if let Some(s) = contract.style {
                c.style = s;
            }
            if let Some(r) = contract.right {
                c.right = r.into();
            }
            if let Some(k) = contract.strike_ladder {
                c.strikes = k;
            }
            if let Some(d) = contract.lsm_degree {
                c.lsm_degree = d;
            }
            (CommandKind::Price, cfg, run.out_dir)
        }
        Command::Converge {
            run,
            levels,
            reference_level,
        } => {
            let mut cfg = run.resolve()?;
            if let Some(l) = levels {
                cfg.converge.levels = l;
            }
            if reference_level.is_some() {
                cfg.converge.reference_level = reference_level;
            }
            (CommandKind::Converge, cfg, run.out_dir)
        }
        Command::Gof {
            run,
            sample,
            synthetic,
            bins,
            reference,
            reference_paths,
        } => {
            let mut cfg = run.resolve()?;
            let g = &mut cfg.gof;
            if sample.is_some() {
                g.sample = sample.map(absolute);
                g.synthetic = None;
            }
            if synthetic.is_some() {
                g.synthetic = synthetic;
                g.sample = None;
            }
            if let Some(b) = bins {
                g.bins = b;
            }
            if let Some(r) = reference {
                g.reference = r;
            }
            if let Some(n) = reference_paths {
                g.reference_paths = n;
            }
            (CommandKind::Gof, cfg, run.out_dir)
        }
        Command::Compare {
            run,
            chain,
            model_prices,
            right,
            normalizer,
            lsm_degree,
        } => {
            let mut cfg = run.resolve()?;
            let c = &mut cfg.compare;
            if chain.is_some() {
                c.chain = chain.map(absolute);
            }
            if model_prices.is_some() {
                c.model_prices = model_prices.map(absolute);
            }
            if let Some(r) = right {
                c.right = r.into();
            }
            if let Some(n) = normalizer {
                c.normalizer = match n {
                    NormalizerArg::Range => Normalizer::Range,
                    NormalizerArg::Max => Normalizer::Max,
                };
            }
            if let Some(d) = lsm_degree {
                cfg.contract.lsm_degree = d;
            }
            (CommandKind::Compare, cfg, run.out_dir)
        }
        Command::Replay {
            manifest,
            out_dir,
            workers,
            verify,
        } => return commands::replay(&manifest, &out_dir, workers, verify),
    };
    let manifest = commands::run(kind, cfg, &out_dir)?;
    println!(
        "wrote {} output(s) and {} to {}",
        manifest.outputs.len(),
        manifest::MANIFEST_FILE,
        out_dir.display()
    );
    Ok(())
}

/// Input paths are stored absolute in manifests so replays work from any
/// directory.
fn absolute(p: PathBuf) -> PathBuf {
    std::path::absolute(&p).unwrap_or(p)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => error::report(&e),
    }
}
