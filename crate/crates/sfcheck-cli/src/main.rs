//! Command-line driver: load a scenario, run the verification and print a
//! report or a per-policy trace.
//!
//! Exit status: 0 when every policy is enforced, 1 when at least one is
//! violated, 2 on configuration or I/O errors.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sfcheck_core::{
    emit_report, emit_trace, parse_scenario, verify_all, verify_policy, AbsentMode, MatchMode,
    ReportFormat, Scenario, ScenarioOptions, VerifyOptions,
};

#[derive(Parser)]
#[command(
    name = "sfcheck",
    about = "Verify security policies against service function chains",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify every policy of a scenario and print the report.
    Verify {
        /// Path to the scenario file.
        scenario: PathBuf,
        #[command(flatten)]
        opts: CommonOpts,
        /// Inline per-hop traces into the text report.
        #[arg(long)]
        trace: bool,
    },
    /// Print the hop-by-hop trace of a single policy.
    Trace {
        /// Path to the scenario file.
        scenario: PathBuf,
        /// Name of the policy to trace.
        policy: String,
        #[command(flatten)]
        opts: CommonOpts,
    },
}

#[derive(clap::Args)]
struct CommonOpts {
    /// Output format.
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
    /// Override the scenario's absent-field semantics.
    #[arg(long, value_enum)]
    absent_mode: Option<AbsentModeArg>,
    /// Override the scenario's expected-traffic match mode.
    #[arg(long, value_enum)]
    match_mode: Option<MatchModeArg>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Json,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Text => ReportFormat::Text,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum AbsentModeArg {
    Paper,
    Strict,
}

impl From<AbsentModeArg> for AbsentMode {
    fn from(m: AbsentModeArg) -> Self {
        match m {
            AbsentModeArg::Paper => AbsentMode::Paper,
            AbsentModeArg::Strict => AbsentMode::Strict,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MatchModeArg {
    Subset,
    Exact,
}

impl From<MatchModeArg> for MatchMode {
    fn from(m: MatchModeArg) -> Self {
        match m {
            MatchModeArg::Subset => MatchMode::Subset,
            MatchModeArg::Exact => MatchMode::Exact,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Verify {
            scenario,
            opts,
            trace,
        } => {
            let (loaded, name) = load_scenario(&scenario)?;
            let (verify_opts, effective) = effective_options(&loaded, &opts);
            let chain = loaded.chain().map_err(|e| e.to_string())?;
            let report = verify_all(&loaded.catalog, &chain, &loaded.policies, verify_opts);
            print!(
                "{}",
                emit_report(&name, effective, &report, opts.format.into(), trace)
            );
            Ok(if report.all_enforced() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Trace {
            scenario,
            policy,
            opts,
        } => {
            let (loaded, name) = load_scenario(&scenario)?;
            let (verify_opts, effective) = effective_options(&loaded, &opts);
            let chain = loaded.chain().map_err(|e| e.to_string())?;
            let target = loaded
                .find_policy(&policy)
                .ok_or_else(|| format!("no policy named `{policy}` in {name}"))?;
            let result = verify_policy(&loaded.catalog, &chain, target, verify_opts)
                .map_err(|e| e.to_string())?;
            print!(
                "{}",
                emit_trace(&name, effective, &result, opts.format.into())
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load_scenario(path: &Path) -> Result<(Scenario, String), String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let scenario = parse_scenario(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let name = scenario.name.clone().unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string())
    });
    Ok((scenario, name))
}

/// Merge scenario options with command-line overrides. Returns the options
/// to verify with and the effective values to stamp into the report.
fn effective_options(scenario: &Scenario, opts: &CommonOpts) -> (VerifyOptions, ScenarioOptions) {
    let absent_mode = opts
        .absent_mode
        .map(AbsentMode::from)
        .unwrap_or(scenario.options.absent_mode);
    let match_mode = opts
        .match_mode
        .map(MatchMode::from)
        .unwrap_or(scenario.options.match_mode);
    (
        VerifyOptions {
            absent_mode,
            match_mode: Some(match_mode),
        },
        ScenarioOptions {
            absent_mode,
            match_mode,
        },
    )
}
