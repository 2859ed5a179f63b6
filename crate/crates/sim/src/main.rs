use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ibpa_core::ibpa::{build_artifacts, ArtifactConfig};
use ibpa_core::io::{load_environment, read_json, save_environment, write_json, PriorFile};
use ibpa_core::model::{AuctionEnvironment, Regime};
use ibpa_core::outcome::write_outcomes;
use ibpa_core::single_agent::MenuClass;
use ibpa_estimation::io::{read_auction_log_file, read_panel_file};
use ibpa_estimation::pipeline::{estimate_values, ValueEstimationConfig};
use ibpa_estimation::slot_effects::{estimate_slot_effects, RegressionWeights, SlotEffectConfig, SlotEffects};
use ibpa_estimation::turnbull::prior_from_marginals;
use ibpa_sim::report::{write_long_csv, write_report_csv};
use ibpa_sim::synth::{self, SynthKind};
use ibpa_sim::{run_comparison, Result, SimError, SimulationConfig};

#[derive(Parser)]
#[command(name = "ibpa", version, about = "Position auctions with information bundling: estimation, curves and simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Slot and advertiser click effects from a CTR panel.
    EstimateCtr {
        #[arg(long)]
        panel: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fit without impression weights.
        #[arg(long)]
        unweighted: bool,
        /// Drop zero-click rows instead of adding half a click.
        #[arg(long)]
        drop_zero_clicks: bool,
    },
    /// Valuation distributions per inventory type from a GSP auction log.
    EstimateValues {
        #[arg(long)]
        log: PathBuf,
        /// Slot effects JSON written by estimate-ctr.
        #[arg(long, conflicts_with = "alpha")]
        slot_effects: Option<PathBuf>,
        /// Comma-separated slot effects.
        #[arg(long, value_delimiter = ',')]
        alpha: Option<Vec<f64>>,
        /// Atoms in the sampled joint prior.
        #[arg(long, default_value_t = 200)]
        atoms: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Prior JSON for use in an environment file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-type Turnbull fits as JSON.
        #[arg(long)]
        fits: Option<PathBuf>,
    },
    /// Solve revenue curves and write them as JSON.
    BuildCurves {
        #[arg(long)]
        env: PathBuf,
        #[arg(long, default_value = "full")]
        class: MenuClass,
        #[arg(long, default_value_t = 50)]
        grid: usize,
        #[arg(long, default_value = "fi-nd")]
        regime: String,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Run every configured mechanism on a common auction stream.
    Simulate(RunArgs),
    /// Like simulate, reporting changes against a baseline mechanism.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value = "gsp-fi-fd")]
        baseline: String,
    },
    /// Write a synthetic environment file.
    SynthEnv {
        #[arg(long, default_value = "rich")]
        kind: SynthKind,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// Environment JSON; defaults to the rich synthetic environment.
    #[arg(long)]
    env: Option<PathBuf>,
    /// Simulation config JSON; defaults to the standard five mechanisms.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    /// Report CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Long-format CSV for plotting.
    #[arg(long)]
    long: Option<PathBuf>,
    /// Outcome stream as JSON lines, one file per mechanism with this prefix.
    #[arg(long)]
    outcomes: Option<PathBuf>,
}

fn writer(path: &Option<PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn print_json<T: serde::Serialize>(out: &Option<PathBuf>, value: &T) -> Result<()> {
    match out {
        Some(p) => write_json(p, value)?,
        None => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

fn run(args: RunArgs, baseline: Option<String>) -> Result<()> {
    let (env, mut cfg): (AuctionEnvironment, SimulationConfig) = match (&args.env, &args.config) {
        (Some(e), c) => (load_environment(e)?, c.as_ref().map(|c| read_json(c)).transpose()?.unwrap_or_default()),
        (None, c) => {
            let cfg = c.as_ref().map(|c| read_json(c)).transpose()?.unwrap_or_else(|| SimulationConfig {
                participation: synth::rich_participation(),
                ..SimulationConfig::default()
            });
            (synth::rich(1, 48)?, cfg)
        }
    };
    if let Some(n) = args.n {
        cfg.n_auctions = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    if baseline.is_some() {
        cfg.baseline = baseline;
    }
    if let Some(b) = cfg.baseline.as_mut() {
        // accept lower-case CLI spellings such as gsp-fi-fd
        if let Some(m) = cfg.mechanisms.iter().find(|m| m.name().eq_ignore_ascii_case(b)) {
            *b = m.name();
        }
    }
    cfg.keep_outcomes = args.outcomes.is_some();
    let result = run_comparison(&env, &cfg)?;
    for w in &result.warnings {
        log::warn!("{w}");
    }
    eprint!("{}", result.report.table());
    write_report_csv(writer(&args.out)?, &result.report)?;
    if args.long.is_some() {
        write_long_csv(writer(&args.long)?, &result.report)?;
    }
    if let (Some(prefix), Some(outcomes)) = (&args.outcomes, &result.outcomes) {
        for (name, stream) in result.mechanisms.iter().zip(outcomes) {
            let path = PathBuf::from(format!("{}.{name}.jsonl", prefix.display()));
            write_outcomes(BufWriter::new(File::create(path)?), stream)?;
        }
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::EstimateCtr { panel, out, unweighted, drop_zero_clicks } => {
            let cfg = SlotEffectConfig {
                zero_click_correction: if drop_zero_clicks { None } else { Some(0.5) },
                weights: if unweighted { RegressionWeights::Unweighted } else { RegressionWeights::Impressions },
                ..SlotEffectConfig::default()
            };
            let est = estimate_slot_effects(&read_panel_file(&panel)?, &cfg)?;
            eprintln!("R² = {:.4} after {} sweeps", est.r2, est.iterations);
            print_json(&out, &est)
        }
        Command::EstimateValues { log, slot_effects, alpha, atoms, seed, out, fits } => {
            let alpha = match (slot_effects, alpha) {
                (Some(p), _) => read_json::<SlotEffects>(&p)?.alpha,
                (None, Some(a)) => a,
                (None, None) => return Err(SimError::Config("pass --slot-effects or --alpha".into())),
            };
            let est = estimate_values(&read_auction_log_file(&log)?, &alpha, &ValueEstimationConfig::default())?;
            for w in &est.warnings {
                log::warn!("{w}");
            }
            eprintln!("{} auctions used, b_max = {}", est.auctions_used, est.b_max);
            if let Some(p) = fits {
                write_json(&p, &est.fits)?;
            }
            let per_type = est
                .fits
                .iter()
                .enumerate()
                .map(|(t, f)| f.clone().ok_or_else(|| SimError::Config(format!("type {t} has no observations"))))
                .collect::<Result<Vec<_>>>()?;
            print_json(&out, &PriorFile::from_prior(&prior_from_marginals(&per_type, atoms, seed)?))
        }
        Command::BuildCurves { env, class, grid, regime, out, threads } => {
            let env = load_environment(&env)?;
            let regime = Regime::named(&regime, env.type_count())?;
            let cfg = ArtifactConfig { class, grid_size: grid, threads, ..ArtifactConfig::default() };
            let art = build_artifacts(&env, &regime, &cfg)?;
            for w in art.warnings() {
                log::warn!("{w}");
            }
            let records: Vec<_> = art
                .views()
                .flat_map(|v| (0..art.advertiser_count()).map(move |a| (v.block, v.curve(a).to_record(Some(a)))))
                .map(|(block, rec)| serde_json::json!({ "disclosure_block": block, "curve": rec }))
                .collect();
            print_json(&out, &records)
        }
        Command::Simulate(args) => run(args, None),
        Command::Compare { run: args, baseline } => run(args, Some(baseline)),
        Command::SynthEnv { kind, seed, out } => Ok(save_environment(&out, &synth::generate(kind, seed)?)?),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
