use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use ordembed::gradcheck::GradCheckConfig;
use ordembed::RngSeed;
use ordembed_cli::embed::{args_from_manifest, embed, EmbedArgs};
use ordembed_cli::experiment::run_config_file;
use ordembed_cli::tools::{self, GenSource, SplitSizes};
use ordembed_cli::CliError;

#[derive(Parser)]
#[command(name = "ordembed", version, about = "Ordinal embedding from triplet comparisons")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment config and write traces, summaries and plots
    Run {
        config: PathBuf,
        /// Write artifacts here instead of the configured directory
        #[arg(long)]
        output: Option<PathBuf>,
        /// Worker threads for the seeds (default: all cores)
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Fit one embedding to a comparison file
    Embed {
        #[command(flatten)]
        fit: EmbedArgs,
        /// Embedding CSV to write
        #[arg(long)]
        out: PathBuf,
        /// Manifest path (default: the embedding path with a .json extension)
        #[arg(long)]
        manifest: Option<PathBuf>,
        /// Repeat the fit recorded in a manifest; other fit flags are ignored
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Compare analytic and finite-difference loss gradients on random trials
    CheckGradients {
        /// all, or a comma-separated list of gnmds, ckl, ste, tste
        #[arg(long, default_value = "all")]
        loss: String,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
        #[arg(long, default_value_t = 10)]
        dim: usize,
        #[arg(long, default_value_t = 6)]
        objects: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Generate, corrupt or split comparison files
    #[command(subcommand)]
    Triplets(TripletsCommand),
}

#[derive(Subcommand)]
enum TripletsCommand {
    /// Sample triplets from synthetic points, a distance matrix or class labels
    Gen(GenArgs),
    /// Reverse a fraction of the comparisons
    Noise {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        rate: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split into disjoint train and test files, optionally corrupting the train part
    Split {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, requires = "test", conflicts_with = "train_fraction")]
        train: Option<usize>,
        #[arg(long, requires = "train")]
        test: Option<usize>,
        #[arg(long)]
        train_fraction: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        test_out: PathBuf,
    },
}

#[derive(Args)]
#[group(skip)]
#[command(group(ArgGroup::new("source").required(true).args(["synthetic", "distances", "eurodist", "labels"])))]
struct GenArgs {
    /// Gaussian points N(0, variance I) of size n x p
    #[arg(long)]
    synthetic: bool,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    p: usize,
    #[arg(long, default_value_t = 0.05)]
    variance: f64,
    /// Square symmetric distance matrix CSV
    #[arg(long)]
    distances: Option<PathBuf>,
    /// The bundled 21-city road distances
    #[arg(long)]
    eurodist: bool,
    /// Class labels, one per line
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Number of triplets (default: all distinct triplets)
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also write the synthetic ground-truth points
    #[arg(long)]
    truth_out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, output, jobs } => {
            if let Some(j) = jobs {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(j)
                    .build_global()
                    .map_err(|e| CliError::Config(vec![format!("--jobs: {e}")]))?;
            }
            let exp = run_config_file(&config, output.as_deref())?;
            let median = exp.median_evals_to_threshold();
            let shown = if median.is_finite() { format!("{median:.3}") } else { "-".into() };
            let diverged = exp.runs.iter().filter(|r| r.status != ordembed_cli::SeedStatus::Completed).count();
            println!(
                "{} seeds ({} diverged); median evaluations/|Q| to test error <= {}: {}",
                exp.runs.len(),
                diverged,
                exp.config.threshold,
                shown
            );
            Ok(())
        }
        Command::Embed {
            fit,
            out,
            manifest,
            replay,
        } => {
            let fit = match replay {
                Some(path) => args_from_manifest(&path)?,
                None => fit,
            };
            let report = embed(&fit, &out, manifest.as_deref())?;
            println!(
                "wrote {} ({}); held-out agreement {:.4}, training loss {:.6}",
                report.embedding_path.display(),
                report.manifest_path.display(),
                report.holdout_agreement,
                report.train_loss
            );
            Ok(())
        }
        Command::CheckGradients {
            loss,
            trials,
            tolerance,
            dim,
            objects,
            seed,
        } => {
            let kinds = tools::parse_kinds(&loss)?;
            let cfg = GradCheckConfig {
                trials,
                tolerance,
                p: dim,
                n: objects,
                seed: RngSeed(seed),
                ..Default::default()
            };
            let reports = tools::gradient_reports(&kinds, &cfg)?;
            for r in &reports {
                println!(
                    "{:<6} {} trials={} max_rel_error={:.3e} worst_trial={} redrawn={}",
                    r.kind.name(),
                    if r.passed { "PASS" } else { "FAIL" },
                    r.trials,
                    r.max_rel_error,
                    r.worst_trial,
                    r.redrawn
                );
            }
            if reports.iter().all(|r| r.passed) {
                Ok(())
            } else {
                Err(CliError::CheckFailed)
            }
        }
        Command::Triplets(TripletsCommand::Gen(a)) => {
            let source = if a.synthetic {
                GenSource::Synthetic {
                    n: a.n,
                    p: a.p,
                    variance: a.variance,
                }
            } else if a.eurodist {
                GenSource::Eurodist
            } else if let Some(path) = a.distances {
                GenSource::Distances(path)
            } else {
                GenSource::Labels(a.labels.expect("clap enforces one source"))
            };
            let count = tools::gen_command(&source, a.count, a.seed, &a.out, a.truth_out.as_deref())?;
            println!("wrote {count} comparisons to {}", a.out.display());
            Ok(())
        }
        Command::Triplets(TripletsCommand::Noise {
            input,
            n,
            rate,
            seed,
            out,
        }) => {
            let flipped = tools::noise_command(&input, n, rate, seed, &out)?;
            println!("reversed {flipped} comparisons, wrote {}", out.display());
            Ok(())
        }
        Command::Triplets(TripletsCommand::Split {
            input,
            n,
            train,
            test,
            train_fraction,
            noise,
            seed,
            train_out,
            test_out,
        }) => {
            let sizes = match (train, test, train_fraction) {
                (Some(train), Some(test), _) => SplitSizes::Counts { train, test },
                (_, _, Some(f)) => SplitSizes::Fraction(f),
                _ => return Err(CliError::Config(vec!["give --train and --test, or --train-fraction".into()])),
            };
            let (tr, te) = tools::split_command(&input, n, sizes, noise, seed, (&train_out, &test_out))?;
            println!("wrote {tr} training and {te} test comparisons");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
