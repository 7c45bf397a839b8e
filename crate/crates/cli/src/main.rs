use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};

use empc::controllers::Controller;
use empc::io::{
    comparison_entry, comparison_table, execute, execute_all, load_series, parse_cases, parse_config, report_table,
    write_comparison_csv, write_run, write_timeseries, RunConfig,
};
use empc::sim::simulate;
use empc::synth::{generate, SynthParams};
use empc::timegrid::TimeGrid;
use empc::Error;

const LOG_ENV: &str = "EMPC_LOG";

const EXIT_CONFIG: u8 = 3;
const EXIT_DATA: u8 = 4;
const EXIT_SOLVER: u8 = 5;
const EXIT_IO: u8 = 6;

/// Closed-loop economic MPC for battery dispatch under monthly demand charges.
///
/// Log verbosity follows the EMPC_LOG variable (error, warn, info, debug,
/// trace; default info). Per-step solve times are logged at debug.
///
/// Exit codes: 0 success, 2 usage, 3 config, 4 data, 5 solver, 6 I/O.
#[derive(Parser)]
#[command(name = "empc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured controller over the whole horizon.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to `<[output].dir or out>/<scenario>`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Simulate several controllers on the config's data and tabulate costs.
    Compare {
        #[arg(long)]
        config: PathBuf,
        /// `all`, `shrinking`, `rolling`, or a comma list of
        /// `variant:tracking:mode:t_mpc[:t_r]`, e.g. `proposed:wt:rolling:48:48`.
        #[arg(long)]
        cases: String,
        /// Output directory; defaults to `<[output].dir or out>/compare`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic load/PV series file.
    GenData {
        #[arg(long)]
        days: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "2019-01-01")]
        start: NaiveDate,
        #[arg(long, default_value_t = 15)]
        step_minutes: u32,
    },
    /// Print the linear programs solved at step T of the closed loop.
    DumpLp {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        step: usize,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "info"))
        .format_timestamp_millis()
        .init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { config, out } => run(&config, out),
        Command::Compare { config, cases, out } => compare(&config, &cases, out),
        Command::GenData {
            days,
            seed,
            out,
            start,
            step_minutes,
        } => gen_data(days, seed, &out, start, step_minutes),
        Command::DumpLp { config, step } => dump_lp(&config, step),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Grid(_) | Error::Model(_) | Error::StepOutOfRange { .. } => EXIT_CONFIG,
        Error::Data { .. } => EXIT_DATA,
        Error::Solver { .. } | Error::SocOutOfRange { .. } => EXIT_SOLVER,
        Error::EmptyTrace(_) | Error::Io(_) | Error::Csv(_) | Error::Json(_) => EXIT_IO,
    }
}

fn default_out(cfg: &RunConfig, leaf: &str) -> PathBuf {
    cfg.output_dir().unwrap_or(Path::new("out")).join(leaf)
}

fn run(config: &Path, out: Option<PathBuf>) -> Result<(), Error> {
    let cfg = parse_config(config)?;
    let scenario = cfg.scenario()?;
    let series = load_series(&cfg)?;
    let out = out.unwrap_or_else(|| default_out(&cfg, &scenario.name));
    log::info!("{}: {} steps", scenario.name, scenario.grid.n_steps());
    let result = execute(&cfg, scenario, &series)?;
    write_run(&result, &out)?;
    print!("{}", report_table(&result.doc));
    log::info!("wrote {}", out.display());
    Ok(())
}

fn compare(config: &Path, cases: &str, out: Option<PathBuf>) -> Result<(), Error> {
    let cfg = parse_config(config)?;
    let grid = cfg.grid()?;
    let specs = parse_cases(cases, &grid, cfg.controller.lowering.into())?;
    let scenarios = specs
        .into_iter()
        .map(|s| cfg.scenario_with(s))
        .collect::<Result<Vec<_>, _>>()?;
    let series = load_series(&cfg)?;
    let out = out.unwrap_or_else(|| default_out(&cfg, "compare"));
    log::info!("{} cases over {} steps", scenarios.len(), grid.n_steps());

    let names: Vec<String> = scenarios.iter().map(|s| s.name.clone()).collect();
    let mut entries = Vec::new();
    let mut first_err = None;
    for (name, result) in names.iter().zip(execute_all(&cfg, scenarios, &series)) {
        match result.and_then(|r| write_run(&r, &out.join(name)).map(|_| r)) {
            Ok(r) => entries.push(comparison_entry(&r)),
            Err(e) => {
                log::error!("{name}: {e}");
                first_err.get_or_insert(e);
            }
        }
    }
    if !entries.is_empty() {
        let table = comparison_table(&entries);
        std::fs::create_dir_all(&out)?;
        std::fs::write(out.join("comparison.txt"), &table)?;
        write_comparison_csv(&out.join("comparison.csv"), &entries)?;
        print!("{table}");
        log::info!("wrote {}", out.display());
    }
    first_err.map_or(Ok(()), Err)
}

fn gen_data(days: usize, seed: u64, out: &Path, start: NaiveDate, step_minutes: u32) -> Result<(), Error> {
    let grid = TimeGrid::new(start, days, step_minutes).map_err(|e| Error::Config(e.to_string()))?;
    let (load, pv) = generate(&grid, seed, &SynthParams::default());
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_timeseries(out, &grid, &load, &pv)?;
    log::info!("wrote {} steps to {}", grid.n_steps(), out.display());
    Ok(())
}

fn dump_lp(config: &Path, step: usize) -> Result<(), Error> {
    let cfg = parse_config(config)?;
    let scenario = cfg.scenario()?;
    let n_steps = scenario.grid.n_steps();
    if step >= n_steps {
        return Err(Error::StepOutOfRange { t: step, n_steps });
    }
    let series = load_series(&cfg)?;
    let trace = simulate(&scenario, &series.load_kw, &series.pv_kw, step)?;
    let (x, peaks) = trace
        .last()
        .map_or((scenario.bess.soc_init, scenario.initial_peaks), |r| {
            (r.x_next, r.peaks_after)
        });
    let controller = Controller::new(scenario.controller, scenario.plant(), &series.load_kw, &series.pv_kw)?;
    let mut stdout = std::io::stdout().lock();
    for (stage, lp) in controller.stage_programs(step, x, peaks)? {
        let written = writeln!(stdout, "## {} step {step} stage {stage}", scenario.name)
            .and_then(|()| stdout.write_all(lp.to_text().as_bytes()));
        match written {
            Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => return Ok(()),
            other => other?,
        }
    }
    Ok(())
}
