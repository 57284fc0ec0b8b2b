use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use digitfreq_cli::config::{parse_seeds, Experiment, RunConfig};
use digitfreq_cli::error::CliError;
use digitfreq_cli::report::{effective_config, replay, run};

#[derive(Parser)]
#[command(name = "digitfreq", version, about = "Digit-frequency and nonconventional-average experiments")]
struct Cli {
    /// Re-execute a stamped report and byte-compare its CSVs.
    #[arg(long, global = true, value_name = "REPORT")]
    replay: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// `a..b`, `a..=b` or `a,b,c`; overrides the config's seeds.
    #[arg(long)]
    seeds: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run whatever experiment the config names.
    Run(RunArgs),
    SllnRun(RunArgs),
    FreqCount(RunArgs),
    PairCount(RunArgs),
    DimFormula(RunArgs),
    DimEstimate(RunArgs),
    MixingReport(RunArgs),
    MixingaleDecay(RunArgs),
    ConstructPoint(RunArgs),
    CfBound(RunArgs),
    /// Same as `--replay`.
    Replay { report: PathBuf },
}

fn split(command: Command) -> Result<(Option<Experiment>, RunArgs), PathBuf> {
    use Command::*;
    Ok(match command {
        Run(a) => (None, a),
        SllnRun(a) => (Some(Experiment::SllnRun), a),
        FreqCount(a) => (Some(Experiment::FreqCount), a),
        PairCount(a) => (Some(Experiment::PairCount), a),
        DimFormula(a) => (Some(Experiment::DimFormula), a),
        DimEstimate(a) => (Some(Experiment::DimEstimate), a),
        MixingReport(a) => (Some(Experiment::MixingReport), a),
        MixingaleDecay(a) => (Some(Experiment::MixingaleDecay), a),
        ConstructPoint(a) => (Some(Experiment::ConstructPoint), a),
        CfBound(a) => (Some(Experiment::CfBound), a),
        Replay { report } => return Err(report),
    })
}

fn do_replay(report: &PathBuf, threads: Option<usize>) -> Result<(), CliError> {
    let outcome = replay(report, threads)?;
    if let Some(w) = outcome.version_warning {
        eprintln!("warning: {w}");
    }
    println!("replay matches: {} file(s)", outcome.files_checked);
    Ok(())
}

fn do_run(expected: Option<Experiment>, args: RunArgs, threads: Option<usize>) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| CliError::Parse(format!("{}: {e}", args.config.display())))?;
    let cfg = RunConfig::parse(&text)?;
    if let Some(e) = expected.filter(|&e| e != cfg.experiment) {
        return Err(CliError::Parse(format!(
            "config describes `{}`, not `{}`",
            cfg.experiment.name(),
            e.name()
        )));
    }
    let seeds = args.seeds.as_deref().map(parse_seeds).transpose()?;
    let cfg = effective_config(cfg, seeds);
    let path = run(&cfg, &args.out, threads)?;
    println!("{}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match (cli.replay, cli.command) {
        (Some(report), None) => do_replay(&report, cli.threads),
        (Some(_), Some(_)) => Err(CliError::Parse("--replay takes no subcommand".into())),
        (None, None) => Err(CliError::Parse("nothing to do; see --help".into())),
        (None, Some(cmd)) => match split(cmd) {
            Ok((expected, args)) => do_run(expected, args, cli.threads),
            Err(report) => do_replay(&report, cli.threads),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
