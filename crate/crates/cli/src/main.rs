use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dmcca::{FusionStrategy, MethodKind};
use dmcca_cli::{
    cmd_extract, cmd_run, cmd_sweep, cmd_synth, resolve_config, resolve_synth_spec, Overrides,
    RunReport,
};

#[derive(Parser)]
#[command(
    name = "dmcca",
    version,
    about = "Multiset correlation fusion experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Gabor mean, Gabor std and Zernike feature tables from IDX digits.
    Extract {
        #[arg(long)]
        images: PathBuf,
        #[arg(long)]
        labels: PathBuf,
        /// Output prefix; `_gabor_mean.csv` etc. are appended.
        #[arg(long)]
        out: PathBuf,
        /// Keep only the first N samples of each class.
        #[arg(long)]
        per_class: Option<usize>,
    },
    /// Synthetic train/test tables.
    Synth {
        /// JSON synthetic spec; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "synth")]
        out: PathBuf,
    },
    /// Sweep each method and write a comparison table.
    Run(RunArgs),
    /// Like run, plus accuracy over the full eigen-spectrum.
    Sweep(RunArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Fusion {
    Sum,
    Concat,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Method(s) to run; repeat or separate with commas.
    #[arg(long, value_delimiter = ',')]
    method: Vec<MethodKind>,
    /// Sweep d = 1..=N.
    #[arg(long)]
    d_max: Option<usize>,
    #[arg(long, value_enum)]
    fusion: Option<Fusion>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training table per set, in set order.
    #[arg(long)]
    train: Vec<PathBuf>,
    /// Test table per set, in set order.
    #[arg(long)]
    test: Vec<PathBuf>,
}

impl RunArgs {
    fn overrides(&self) -> Overrides {
        Overrides {
            methods: self.method.clone(),
            d_max: self.d_max,
            fusion: self.fusion.map(|f| match f {
                Fusion::Sum => FusionStrategy::Sum,
                Fusion::Concat => FusionStrategy::Concat,
            }),
            seed: self.seed,
            out: self.out.clone(),
            train: self.train.clone(),
            test: self.test.clone(),
        }
    }
}

fn print_report(report: &RunReport) {
    print!("{}", report.comparison_csv());
    if let Some(b) = &report.baselines {
        for (i, a) in b.iter().enumerate() {
            println!("set {i} alone: {a}");
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Extract {
            images,
            labels,
            out,
            per_class,
        } => {
            for p in cmd_extract(&images, &labels, &out, per_class)? {
                println!("{}", p.display());
            }
        }
        Command::Synth { config, seed, out } => {
            let spec = resolve_synth_spec(config.as_deref(), seed)?;
            let written = cmd_synth(&spec, &out)?;
            for p in written.train.iter().chain(&written.test) {
                println!("{}", p.display());
            }
        }
        Command::Run(args) => {
            let cfg = resolve_config(args.config.as_deref(), &args.overrides())?;
            print_report(&cmd_run(&cfg)?);
        }
        Command::Sweep(args) => {
            let cfg = resolve_config(args.config.as_deref(), &args.overrides())?;
            print_report(&cmd_sweep(&cfg)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
