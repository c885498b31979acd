//! Command-line pipeline and HTTP front end for `cprdraft`.

pub mod args;
mod commands;
pub mod config;
pub mod http;
pub mod manifest;

use std::ffi::OsString;

use clap::Parser;
use thiserror::Error;

use cprdraft_core::analysis::AnalysisError;
use cprdraft_core::cardset::CardsetError;
use cprdraft_core::cpr::CprError;
use cprdraft_core::dataio::DataError;
use cprdraft_core::draftsim::DraftError;
use cprdraft_core::neuralnet::NetError;
use cprdraft_core::service::ServiceError;

pub use args::{Cli, Command};

/// Exit status 1 for [`CliError::User`], 2 for [`CliError::Internal`].
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    User(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn user(msg: impl std::fmt::Display) -> Self {
        CliError::User(msg.to_string())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::User(e.to_string())
    }
}

impl From<CardsetError> for CliError {
    fn from(e: CardsetError) -> Self {
        CliError::User(format!("card database: {e}"))
    }
}

impl From<DataError> for CliError {
    fn from(e: DataError) -> Self {
        CliError::User(format!("draft data: {e}"))
    }
}

impl From<DraftError> for CliError {
    fn from(e: DraftError) -> Self {
        CliError::User(e.to_string())
    }
}

impl From<NetError> for CliError {
    fn from(e: NetError) -> Self {
        match e {
            NetError::Io(_) | NetError::Format(_) | NetError::Spec(_) => CliError::User(format!("model: {e}")),
            e => CliError::Internal(e.to_string()),
        }
    }
}

impl From<CprError> for CliError {
    fn from(e: CprError) -> Self {
        match e {
            CprError::Net(e) => e.into(),
            CprError::Data(e) => e.into(),
            CprError::NonFiniteLoss { .. } => CliError::Internal(e.to_string()),
            e => CliError::User(e.to_string()),
        }
    }
}

impl From<AnalysisError> for CliError {
    fn from(e: AnalysisError) -> Self {
        match e {
            AnalysisError::Cpr(e) => e.into(),
            AnalysisError::NoEvents | AnalysisError::Io(_) | AnalysisError::TooFew { .. } => {
                CliError::User(e.to_string())
            }
            e => CliError::Internal(e.to_string()),
        }
    }
}

impl From<ServiceError> for CliError {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::Internal(m) => CliError::Internal(m),
            e => CliError::User(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::User(format!("json: {e}"))
    }
}

/// Parses `argv` (including the program name), merging the `--config` file
/// under explicit flags, and runs the command.
pub fn run<I, T>(argv: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let merged = config::merge_config_args(&argv)?;
    let cli = match Cli::try_parse_from(&merged) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::User(e.render().to_string())),
    };
    let argv_text: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    commands::dispatch(cli, argv_text)
}
