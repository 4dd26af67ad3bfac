//! Command-line driver: parameter sweeps and verification runs with CSV/JSON
//! output. All numerical work lives in the library; this binary only parses
//! flags, applies the flag > config-file > default precedence, and writes
//! tables.

use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use decay_search::analysis::VoteMode;
use decay_search::sweep::{
    self, log_grid, repetitions_report, EvolveEngine, FileConfig, GammaInput, SweepOutcome,
};
use decay_search::verify::{run_verification, DEFAULT_VERIFY_SEED};

#[derive(Parser)]
#[command(
    name = "decay-search",
    about = "Steady states and observables of quantum search with spontaneously decaying qubits",
    version
)]
struct Cli {
    /// Flat key-value config file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file (stdout when omitted).
    #[arg(long, global = true)]
    output: Option<PathBuf>,

    /// Output format.
    #[arg(long, global = true, value_enum)]
    format: Option<OutputFormat>,

    /// Worker-pool size for sweeps (defaults to the number of processors).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Seed for the randomized verification states.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Full,
    Reduced,
    Both,
    Iterate,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Bound,
    Exact,
}

#[derive(Args)]
struct GammaArgs {
    /// Absolute single-qubit decay rate Γ.
    #[arg(long)]
    gamma: Option<f64>,

    /// Scaled decay rate 2^{q/2} Γ (the regime variable; default input).
    #[arg(long, conflicts_with = "gamma")]
    scaled_gamma: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// One steady-state solve with all observables.
    Steady {
        #[arg(long)]
        qubits: Option<usize>,
        #[command(flatten)]
        gamma: GammaArgs,
    },
    /// Steady ρ_00 curves over a log-spaced scaled-Γ grid.
    SweepGamma {
        /// Register sizes, comma separated.
        #[arg(long, value_delimiter = ',')]
        qubits: Option<Vec<usize>>,
        #[arg(long)]
        from: Option<f64>,
        #[arg(long)]
        to: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Weak-decay scaling over register sizes at fixed scaled Γ.
    SweepQ {
        #[arg(long, value_delimiter = ',')]
        qubits: Option<Vec<usize>>,
        #[command(flatten)]
        gamma: GammaArgs,
    },
    /// Time evolution of the solution population from |s⟩.
    Evolve {
        #[arg(long)]
        qubits: Option<usize>,
        #[command(flatten)]
        gamma: GammaArgs,
        #[arg(long)]
        tmax: Option<f64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, value_enum)]
        engine: Option<EngineArg>,
        /// Decay interval per iteration (iterate engine).
        #[arg(long)]
        tau: Option<f64>,
    },
    /// Steady-state population distribution over the Hamming distance.
    Distribution {
        #[arg(long, value_delimiter = ',')]
        qubits: Option<Vec<usize>>,
        #[command(flatten)]
        gamma: GammaArgs,
    },
    /// Minimal majority-vote repetitions R with q ξ_R below the target.
    Repetitions {
        #[arg(long)]
        qubits: Option<usize>,
        /// Single-readout bit error rate ξ.
        #[arg(long)]
        xi: Option<f64>,
        /// Target failure probability ε.
        #[arg(long)]
        epsilon: Option<f64>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
    /// Randomized cross-checks between the full and reduced engines.
    Verify {
        /// Largest register size to check (2..=8).
        #[arg(long)]
        qmax: Option<usize>,
        /// Random states per register size.
        #[arg(long)]
        samples: Option<usize>,
    },
}

fn load_config(path: &Option<PathBuf>) -> Result<FileConfig, decay_search::Error> {
    match path {
        Some(p) => FileConfig::parse(&fs::read_to_string(p)?),
        None => Ok(FileConfig::default()),
    }
}

fn gamma_input(args: &GammaArgs, cfg: &FileConfig) -> Result<GammaInput, decay_search::Error> {
    if let Some(g) = args.gamma {
        return Ok(GammaInput::Absolute(g));
    }
    if let Some(s) = args.scaled_gamma {
        return Ok(GammaInput::Scaled(s));
    }
    if let Some(g) = cfg.get_f64("gamma")? {
        return Ok(GammaInput::Absolute(g));
    }
    if let Some(s) = cfg.get_f64("scaled-gamma")? {
        return Ok(GammaInput::Scaled(s));
    }
    Ok(GammaInput::Scaled(
        decay_search::analysis::WEAK_DECAY_SCALED_GAMMA,
    ))
}

struct Output {
    path: Option<PathBuf>,
    format: OutputFormat,
}

impl Output {
    fn write_with(
        &self,
        f: impl FnOnce(&mut dyn Write, OutputFormat) -> Result<(), decay_search::Error>,
    ) -> Result<(), decay_search::Error> {
        match &self.path {
            Some(p) => {
                let mut file = fs::File::create(p)?;
                f(&mut file, self.format)?;
                file.flush()?;
            }
            None => {
                let stdout = std::io::stdout();
                let mut lock = stdout.lock();
                f(&mut lock, self.format)?;
            }
        }
        Ok(())
    }
}

fn emit_outcome(out: &Output, outcome: &SweepOutcome) -> Result<bool, decay_search::Error> {
    out.write_with(|w, format| match format {
        OutputFormat::Csv => sweep::write_csv(w, &outcome.rows),
        OutputFormat::Json => sweep::write_json(w, &outcome.rows),
    })?;
    for failure in &outcome.failures {
        eprintln!(
            "point q = {}, scaled Γ = {} failed: {}",
            failure.q, failure.scaled_gamma, failure.message
        );
    }
    Ok(outcome.all_succeeded())
}

fn run() -> Result<bool, decay_search::Error> {
    let cli = Cli::parse();
    let cfg = load_config(&cli.config)?;
    let jobs = cli.jobs.or(cfg.get_usize("jobs")?);
    let seed = match cli.seed {
        Some(s) => s,
        None => cfg.get_u64("seed")?.unwrap_or(DEFAULT_VERIFY_SEED),
    };
    let format = cli.format.unwrap_or(match cfg.get("format") {
        Some("json") => OutputFormat::Json,
        _ => OutputFormat::Csv,
    });
    let out = Output {
        path: cli.output.clone().or_else(|| cfg.get("output").map(PathBuf::from)),
        format,
    };

    match &cli.command {
        Command::Steady { qubits, gamma } => {
            let q = qubits.or(cfg.get_usize("qubits")?).unwrap_or(6);
            let row = sweep::steady_row(q, gamma_input(gamma, &cfg)?)?;
            let outcome = SweepOutcome {
                rows: vec![row],
                failures: vec![],
            };
            emit_outcome(&out, &outcome)
        }
        Command::SweepGamma {
            qubits,
            from,
            to,
            points,
        } => {
            let q_list = qubits
                .clone()
                .or(cfg.get_usize_list("qubits")?)
                .unwrap_or_else(|| vec![6, 8, 10, 12, 16, 20, 24, 28]);
            let grid = log_grid(
                from.or(cfg.get_f64("from")?).unwrap_or(sweep::DEFAULT_GRID_FROM),
                to.or(cfg.get_f64("to")?).unwrap_or(sweep::DEFAULT_GRID_TO),
                points
                    .or(cfg.get_usize("points")?)
                    .unwrap_or(sweep::DEFAULT_GRID_POINTS),
            )?;
            let outcome = sweep::sweep_gamma(&q_list, &grid, jobs)?;
            emit_outcome(&out, &outcome)
        }
        Command::SweepQ { qubits, gamma } => {
            let q_list = qubits
                .clone()
                .or(cfg.get_usize_list("qubits")?)
                .unwrap_or_else(|| vec![6, 12, 18, 24, 30, 36]);
            let scaled = match gamma_input(gamma, &cfg)? {
                GammaInput::Scaled(s) => s,
                GammaInput::Absolute(_) => {
                    return Err(decay_search::Error::InvalidConfig(
                        "sweep-q varies q at fixed scaled Γ; use --scaled-gamma".into(),
                    ))
                }
            };
            let outcome = sweep::sweep_q(&q_list, scaled, jobs)?;
            emit_outcome(&out, &outcome)
        }
        Command::Evolve {
            qubits,
            gamma,
            tmax,
            dt,
            engine,
            tau,
        } => {
            let q = qubits.or(cfg.get_usize("qubits")?).unwrap_or(6);
            let t_max = tmax.or(cfg.get_f64("tmax")?).unwrap_or(150.0);
            let dt = dt.map(Some).unwrap_or(cfg.get_f64("dt")?);
            let engine = match engine {
                Some(EngineArg::Full) => EvolveEngine::Full,
                Some(EngineArg::Reduced) => EvolveEngine::Reduced,
                Some(EngineArg::Both) => EvolveEngine::Both,
                Some(EngineArg::Iterate) => EvolveEngine::Iterate,
                None => match cfg.get("engine") {
                    Some("full") => EvolveEngine::Full,
                    Some("both") => EvolveEngine::Both,
                    Some("iterate") => EvolveEngine::Iterate,
                    _ => EvolveEngine::Reduced,
                },
            };
            let tau = tau.or(cfg.get_f64("tau")?).unwrap_or(2.0);
            let table = sweep::evolve_table(q, gamma_input(gamma, &cfg)?, t_max, dt, engine, tau)?;
            out.write_with(|w, format| match format {
                OutputFormat::Csv => sweep::write_evolve_csv(w, &table),
                OutputFormat::Json => sweep::write_json(w, &table.rows),
            })?;
            if let Some(dev) = table.max_deviation {
                eprintln!("max |full - reduced| deviation: {dev:.3e}");
            }
            Ok(true)
        }
        Command::Distribution { qubits, gamma } => {
            let q_list = qubits
                .clone()
                .or(cfg.get_usize_list("qubits")?)
                .unwrap_or_else(|| vec![6, 12, 18, 24, 30, 36]);
            let rows = sweep::distribution_rows(&q_list, gamma_input(gamma, &cfg)?)?;
            out.write_with(|w, format| match format {
                OutputFormat::Csv => sweep::write_csv(w, &rows),
                OutputFormat::Json => sweep::write_json(w, &rows),
            })?;
            Ok(true)
        }
        Command::Repetitions {
            qubits,
            xi,
            epsilon,
            mode,
        } => {
            let q = qubits.or(cfg.get_usize("qubits")?).unwrap_or(29);
            let xi = xi.or(cfg.get_f64("xi")?).unwrap_or(0.28);
            let epsilon = epsilon.or(cfg.get_f64("epsilon")?).unwrap_or(0.05);
            let mode = match mode {
                Some(ModeArg::Bound) => VoteMode::Bound,
                Some(ModeArg::Exact) => VoteMode::Exact,
                None => match cfg.get("mode") {
                    Some("exact") => VoteMode::Exact,
                    _ => VoteMode::Bound,
                },
            };
            let report = repetitions_report(q, xi, epsilon, mode)?;
            println!(
                "minimal odd R with q ξ_R < {}: {}",
                report.epsilon, report.minimal_r
            );
            out.write_with(|w, format| match format {
                OutputFormat::Csv => sweep::write_csv(w, &report.rows),
                OutputFormat::Json => sweep::write_json(w, &report),
            })?;
            Ok(true)
        }
        Command::Verify { qmax, samples } => {
            let q_max = qmax.or(cfg.get_usize("qmax")?).unwrap_or(6);
            let samples = samples.or(cfg.get_usize("samples")?).unwrap_or(20);
            let report = run_verification(q_max, seed, samples)?;
            for check in &report.checks {
                println!(
                    "{} q={} metric={:.3e} threshold={:.1e} -> {}",
                    check.name,
                    check.q,
                    check.metric,
                    check.threshold,
                    if check.passed { "pass" } else { "FAIL" }
                );
            }
            println!(
                "verification seed {} over q <= {}: {}",
                report.seed,
                report.q_max,
                if report.all_passed { "all passed" } else { "FAILED" }
            );
            out.write_with(|w, _| sweep::write_json(w, &report))?;
            Ok(report.all_passed)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
