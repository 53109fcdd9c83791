use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{value_parser, Arg, ArgAction, ArgMatches, Command};
use ris_freqsel::config::{load_config_file, ScenarioConfig, CONFIG_KEYS};
use ris_freqsel::harness::{
    render, run_sweep, ExperimentSpec, HarnessError, OutputFormat, Simulator, SweepAxis, DEFAULT_REALIZATIONS,
};
use ris_freqsel::selection::SelectionMethod;
use ris_freqsel::selftest::run_selftest;

fn scenario_args(cmd: Command) -> Command {
    let cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .value_parser(value_parser!(PathBuf))
            .help("Scenario file of `key = value` lines (defaults apply to missing keys)"),
    );
    CONFIG_KEYS.iter().fold(cmd, |cmd, &key| {
        cmd.arg(
            Arg::new(key)
                .long(key)
                .value_name("VALUE")
                .help_heading("Scenario overrides")
                .help(format!("Override `{key}`")),
        )
    })
}

fn run_args(cmd: Command) -> Command {
    cmd.arg(
        Arg::new("realizations")
            .long("realizations")
            .value_parser(value_parser!(usize))
            .default_value("5000")
            .help("Channel realizations per sweep point"),
    )
    .arg(
        Arg::new("threads")
            .long("threads")
            .value_parser(value_parser!(usize))
            .help("Worker threads (results do not depend on this)"),
    )
    .arg(
        Arg::new("out")
            .long("out")
            .value_name("PATH")
            .value_parser(value_parser!(PathBuf))
            .help("Output file; stdout when omitted"),
    )
    .arg(
        Arg::new("format")
            .long("format")
            .value_parser(["csv", "json"])
            .default_value("csv"),
    )
}

fn cli() -> Command {
    let simulate = run_args(scenario_args(
        Command::new("simulate")
            .about("Aggregate one operating point of the configured scenario")
            .arg(
                Arg::new("method")
                    .long("method")
                    .default_value("adjacent")
                    .help("adjacent | fixed-adjacent | random"),
            )
            .arg(
                Arg::new("sel-size")
                    .long("sel-size")
                    .value_parser(value_parser!(usize))
                    .default_value("1"),
            ),
    ));
    let sweep_n = run_args(scenario_args(
        Command::new("sweep-n")
            .about("S/I and rates versus surface size")
            .arg(Arg::new("n-list").long("n-list").required(true).help("Comma-separated surface sizes N"))
            .arg(Arg::new("sel-sizes").long("sel-sizes").default_value("1,39,199"))
            .arg(Arg::new("methods").long("methods").default_value("adjacent,random")),
    ));
    let sweep_sel = run_args(scenario_args(
        Command::new("sweep-sel")
            .about("Relative rate and S/I versus selection size")
            .arg(Arg::new("sel-list").long("sel-list").required(true).help("Comma-separated selection sizes"))
            .arg(
                Arg::new("methods")
                    .long("methods")
                    .default_value("adjacent,fixed-adjacent,random"),
            ),
    ));
    let selftest = Command::new("selftest").about("Run the invariant self-test").arg(
        Arg::new("seed")
            .long("seed")
            .value_parser(value_parser!(u64))
            .default_value("1"),
    );
    let defaults = Command::new("defaults").about("Print the default scenario file");

    Command::new("ris-freqsel")
        .about("Frequency-selective RIS reflection: link-level Monte-Carlo simulator")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(simulate)
        .subcommand(sweep_n)
        .subcommand(sweep_sel)
        .subcommand(selftest)
        .subcommand(defaults)
        .disable_help_subcommand(true)
        .arg(Arg::new("verbose").short('v').long("verbose").action(ArgAction::SetTrue).global(true))
}

fn scenario(m: &ArgMatches) -> Result<ScenarioConfig> {
    let mut cfg = match m.get_one::<PathBuf>("config") {
        Some(path) => load_config_file(path)?,
        None => ScenarioConfig::reference_scenario(),
    };
    for &key in CONFIG_KEYS {
        if let Some(value) = m.get_one::<String>(key) {
            cfg.set(key, value)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_list<T: std::str::FromStr>(m: &ArgMatches, name: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let raw = m.get_one::<String>(name).map(String::as_str).unwrap_or("");
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| anyhow!("--{name}: `{s}`: {e}")))
        .collect()
}

fn write_output(m: &ArgMatches, records: &[ris_freqsel::AggregateRecord]) -> Result<()> {
    let format: OutputFormat = m.get_one::<String>("format").map(String::as_str).unwrap_or("csv").parse()?;
    let text = render(records, format)?;
    match m.get_one::<PathBuf>("out") {
        Some(path) => std::fs::write(path, text).map_err(HarnessError::from)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn realizations(m: &ArgMatches) -> usize {
    m.get_one::<usize>("realizations").copied().unwrap_or(DEFAULT_REALIZATIONS)
}

fn threads(m: &ArgMatches) -> Option<usize> {
    m.get_one::<usize>("threads").copied()
}

fn simulate(m: &ArgMatches) -> Result<()> {
    let cfg = scenario(m)?;
    let method: SelectionMethod = m.get_one::<String>("method").map(String::as_str).unwrap_or("adjacent").parse()?;
    let size = m.get_one::<usize>("sel-size").copied().unwrap_or(1);
    let count = realizations(m);
    let sim = Simulator::new(cfg)?;
    let record = match threads(m) {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()?
            .install(|| sim.aggregate(method, size, count))?,
        None => sim.aggregate(method, size, count)?,
    };
    write_output(m, &[record])
}

fn sweep(m: &ArgMatches, axis: SweepAxis, sel_sizes: Vec<usize>) -> Result<()> {
    let spec = ExperimentSpec {
        base: scenario(m)?,
        axis,
        methods: parse_list(m, "methods")?,
        sel_sizes,
        realizations: realizations(m),
        threads: threads(m),
    };
    let records = run_sweep(&spec)?;
    write_output(m, &records)
}

fn run() -> Result<ExitCode> {
    let matches = cli().get_matches();
    let level = if matches.get_flag("verbose") { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match matches.subcommand() {
        Some(("simulate", m)) => simulate(m)?,
        Some(("sweep-n", m)) => sweep(m, SweepAxis::RisSize(parse_list(m, "n-list")?), parse_list(m, "sel-sizes")?)?,
        Some(("sweep-sel", m)) => sweep(m, SweepAxis::SelectionSize(parse_list(m, "sel-list")?), Vec::new())?,
        Some(("selftest", m)) => {
            let report = run_selftest(m.get_one::<u64>("seed").copied().unwrap_or(1));
            println!("{report}");
            if !report.passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
        Some(("defaults", _)) => print!("{}", ScenarioConfig::reference_scenario()),
        _ => unreachable!("subcommand required"),
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
