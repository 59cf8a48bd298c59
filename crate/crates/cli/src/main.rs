mod cli;
mod commands;
mod config;
mod overlay;

use std::process::ExitCode;

use clap::Parser;
use hardhat_core::backend::BackendError;
use hardhat_core::metrics::MetricsError;
use hardhat_core::pipelines::PipelineError;

use crate::cli::{Cli, Command};
use crate::commands::Outcome;

const EXIT_VALIDATION: u8 = 1;
const EXIT_BACKEND: u8 = 2;

/// Detector failures exit with 2, everything else with 1.
fn is_backend_failure(err: &anyhow::Error) -> bool {
    err.chain().any(|e| {
        if let Some(p) = e.downcast_ref::<PipelineError>() {
            return p.is_backend_failure();
        }
        if let Some(MetricsError::Pipeline(p)) = e.downcast_ref::<MetricsError>() {
            return p.is_backend_failure();
        }
        matches!(
            e.downcast_ref::<BackendError>(),
            Some(
                BackendError::BackendUnavailable { .. }
                    | BackendError::ProtocolError(_)
                    | BackendError::UnknownImage(_)
            )
        )
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::BuildDataset(a) => commands::build_dataset(a),
        Command::Sweep(a) => commands::sweep_cmd(a),
        Command::Run(a) => commands::run_cmd(a),
        Command::RecordFixture(a) => commands::record_fixture_cmd(a),
        Command::Overlay(a) => commands::overlay_cmd(a),
        Command::Verify(a) => commands::verify_cmd(a),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ValidationFailed) => ExitCode::from(EXIT_VALIDATION),
        Ok(Outcome::BackendFailed) => ExitCode::from(EXIT_BACKEND),
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_backend_failure(&e) {
                ExitCode::from(EXIT_BACKEND)
            } else {
                ExitCode::from(EXIT_VALIDATION)
            }
        }
    }
}
