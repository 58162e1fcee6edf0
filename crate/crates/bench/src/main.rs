use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use peoc_bench::config::{config_to_string, parse_config};
use peoc_bench::error::{BenchError, Result};
use peoc_bench::output::{load_snapshot, report_text, save_snapshot, write_report, OutputLayout};
use peoc_bench::runner::run_benchmark_parallel;
use peoc_bench::svg::{emit_box_svg, emit_roc_svg, emit_training_svg, training_svg, write_file, PlotSpec};
use peoc_bench::evaluate_policy;
use peoc_core::bench::{derive_seeds, BenchConfig, Stage};
use peoc_core::env::generate_level;
use peoc_core::evalx::{aggregate, group_by_classifier, parse_auc_table};
use peoc_core::ppo::{train_with_progress, PpoConfig};

/// Policy-entropy out-of-distribution classification benchmark.
#[derive(Parser, Debug)]
#[command(name = "peoc", version)]
struct Cli {
    /// Suppress progress output.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run or aggregate the benchmark.
    #[command(subcommand)]
    Bench(BenchCommand),
    /// Inspect generated levels.
    #[command(subcommand)]
    Level(LevelCommand),
    /// Train or evaluate a single policy.
    #[command(subcommand)]
    Policy(PolicyCommand),
    /// Render SVG plots from CSV outputs.
    #[command(subcommand)]
    Plot(PlotCommand),
}

#[derive(Args, Debug)]
struct ConfigArgs {
    /// Configuration file (`key = value` lines).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn load(&self) -> Result<BenchConfig> {
        let mut config = match &self.config {
            Some(path) => parse_config(path)?,
            None => BenchConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.master_seed = seed;
        }
        Ok(config)
    }
}

#[derive(Args, Debug)]
struct OutArg {
    /// Output directory.
    #[arg(long, env = "PEOC_BENCH_OUT", default_value = "peoc-out")]
    out: PathBuf,
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    /// Run all process-repeats and write the output directory.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        out: OutArg,
        /// Number of process-repeats, overrides the configuration.
        #[arg(long)]
        repeats: Option<usize>,
        /// Repeats run in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Recompute aggregate statistics and the box plot from a report.csv.
    Aggregate {
        /// Per-repeat AUC table; defaults to <out>/report.csv.
        #[arg(long)]
        input: Option<PathBuf>,
        #[command(flatten)]
        out: OutArg,
    },
}

#[derive(Subcommand, Debug)]
enum LevelCommand {
    /// Print a generated level in text form.
    Dump {
        #[arg(long)]
        seed: u64,
        /// Write to a file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Debug)]
enum PolicyCommand {
    /// Train one policy; writes training.csv, training.svg, first.bin and last.bin.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        out: OutArg,
        /// Comma-separated training level seeds; derived from the master seed when omitted.
        #[arg(long, value_delimiter = ',')]
        levels: Vec<u64>,
    },
    /// Sample episodes from a saved policy on one level.
    Eval {
        /// Snapshot file written by `policy train` or `bench run`.
        #[arg(long)]
        snapshot: PathBuf,
        /// Configuration providing the policy width.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        level_seed: u64,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        /// Action-sampling seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args, Debug)]
struct PlotArgs {
    /// Input CSV files.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    /// Output SVG file.
    #[arg(long)]
    output: PathBuf,
    #[arg(long)]
    title: Option<String>,
    #[arg(long)]
    x_label: Option<String>,
    #[arg(long)]
    y_label: Option<String>,
}

impl PlotArgs {
    fn spec(self, title: &str, x_label: &str, y_label: &str) -> PlotSpec {
        PlotSpec {
            inputs: self.inputs,
            output: self.output,
            title: self.title.unwrap_or_else(|| title.into()),
            x_label: self.x_label.unwrap_or_else(|| x_label.into()),
            y_label: self.y_label.unwrap_or_else(|| y_label.into()),
        }
    }
}

#[derive(Subcommand, Debug)]
enum PlotCommand {
    /// ROC curves from roc/*.csv files.
    Roc(PlotArgs),
    /// Return and entropy curves from a training CSV.
    Training(PlotArgs),
    /// AUC box plot from a report.csv.
    Box(PlotArgs),
}

fn stage_name(stage: Stage) -> &'static str {
    match stage {
        Stage::Training => "training policy",
        Stage::Discarded => "discarded by performance check",
        Stage::CollectingInd => "collecting in-distribution states",
        Stage::CollectingOod => "collecting out-of-distribution states",
        Stage::FittingBaselines => "fitting baselines",
        Stage::Scoring => "scoring",
        Stage::Done => "done",
    }
}

fn bench_run(config: BenchConfig, out: &Path, jobs: usize, quiet: bool) -> Result<()> {
    if jobs == 0 {
        return Err(BenchError::Usage("--jobs must be at least 1".into()));
    }
    let progress = |repeat: usize, stage: Stage| {
        if !quiet {
            eprintln!("repeat {repeat}: {}", stage_name(stage));
        }
    };
    let report = run_benchmark_parallel(&config, jobs, &progress)?;
    write_report(&report, &OutputLayout::new(out))?;
    if !quiet {
        print!("{}", report_text(&report));
    }
    Ok(())
}

fn bench_aggregate(input: &Path, out: &Path, quiet: bool) -> Result<()> {
    let text = std::fs::read_to_string(input).map_err(|e| BenchError::io(input, e))?;
    let records = parse_auc_table(&text)?;
    let stats = aggregate(&group_by_classifier(&records))?;
    let layout = OutputLayout::new(out);
    write_file(&layout.aggregate_csv(), stats.to_csv())?;
    emit_box_svg(&PlotSpec {
        inputs: vec![input.to_path_buf()],
        output: layout.box_svg(),
        title: "AUC over accepted repeats".into(),
        x_label: "classifier".into(),
        y_label: "ROC AUC".into(),
    })?;
    if !quiet {
        print!("{}", stats.to_csv());
    }
    Ok(())
}

fn policy_train(config: BenchConfig, levels: Vec<u64>, out: &Path, quiet: bool) -> Result<()> {
    let seeds = derive_seeds(config.master_seed, 0, config.m_levels);
    let ppo = PpoConfig {
        updates: config.updates(),
        level_seeds: if levels.is_empty() { seeds.level_seeds } else { levels },
        init_seed: seeds.init,
        rollout_seed: seeds.rollout,
        ..config.ppo.clone()
    };
    let trained = train_with_progress(&ppo, |p| {
        if !quiet {
            eprintln!("update {:>4}  return {:.3}  entropy {:.4}", p.update, p.mean_return, p.mean_entropy);
        }
    })?;
    write_file(&out.join("training.csv"), trained.curve.to_csv())?;
    write_file(&out.join("training.svg"), training_svg(&trained.curve, "Training"))?;
    write_file(&out.join("config.txt"), config_to_string(&config))?;
    save_snapshot(&out.join("first.bin"), &trained.after_first_update)?;
    save_snapshot(&out.join("last.bin"), &trained.after_last_update)
}

fn run(cli: Cli) -> Result<()> {
    let quiet = cli.quiet;
    match cli.command {
        Command::Bench(BenchCommand::Run { config, out, repeats, jobs }) => {
            let mut config = config.load()?;
            if let Some(n) = repeats {
                if n == 0 {
                    return Err(BenchError::Usage("--repeats must be at least 1".into()));
                }
                config.n_repeats = n;
            }
            bench_run(config, &out.out, jobs, quiet)
        }
        Command::Bench(BenchCommand::Aggregate { input, out }) => {
            let input = input.unwrap_or_else(|| OutputLayout::new(&out.out).report_csv());
            bench_aggregate(&input, &out.out, quiet)
        }
        Command::Level(LevelCommand::Dump { seed, out }) => {
            let text = generate_level(seed)?.to_text();
            match out {
                Some(path) => write_file(&path, text),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }
        Command::Policy(PolicyCommand::Train { config, out, levels }) => policy_train(config.load()?, levels, &out.out, quiet),
        Command::Policy(PolicyCommand::Eval { snapshot, config, level_seed, episodes, seed }) => {
            if episodes == 0 {
                return Err(BenchError::Usage("--episodes must be at least 1".into()));
            }
            let config = ConfigArgs { config, seed: None }.load()?;
            let params = load_snapshot(&snapshot, config.ppo.arch)?;
            let level = generate_level(level_seed)?;
            let s = evaluate_policy(&params, &level, episodes, seed)?;
            println!("episodes {}", s.episodes);
            println!("mean_return {:.4}", s.mean_return);
            println!("success_rate {:.4}", s.success_rate);
            println!("mean_length {:.2}", s.mean_length);
            println!("mean_entropy {:.6}", s.mean_entropy);
            Ok(())
        }
        Command::Plot(PlotCommand::Roc(args)) => {
            emit_roc_svg(&args.spec("ROC", "false positive rate", "true positive rate"))
        }
        Command::Plot(PlotCommand::Training(args)) => emit_training_svg(&args.spec("Training", "update", "")),
        Command::Plot(PlotCommand::Box(args)) => emit_box_svg(&args.spec("AUC per classifier", "classifier", "ROC AUC")),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
