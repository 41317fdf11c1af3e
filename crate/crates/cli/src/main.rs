//! `mmshap` command-line front end.
//!
//! Exit codes: 0 on success, 1 when a run fails, 2 for usage errors and
//! unusable inputs.

mod analysis;
mod args;
mod attribute;
mod context;
mod experiment;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use context::{Context, UsageError};

fn run(cli: Cli) -> anyhow::Result<()> {
    let ctx = Context::from_args(&cli.global)?;
    match &cli.command {
        Command::Attribute(a) => attribute::run(ctx, a),
        Command::Metrics(a) => analysis::metrics(ctx, a),
        Command::Experiment(a) => experiment::experiment(ctx, a),
        Command::ReplaceAnswers(a) => experiment::replace(ctx, a),
        Command::AblateIterations(a) => experiment::ablate(ctx, a),
        Command::Heatmap(a) => analysis::heatmap(ctx, a),
        Command::WordReport(a) => analysis::word_report_cmd(ctx, a),
        Command::RankCorr(a) => analysis::rank_corr(ctx, a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
