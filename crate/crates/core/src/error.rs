use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A domain invariant was violated by user-supplied input.
    #[error("invalid {what}: {reason}")]
    Validation { what: &'static str, reason: String },

    #[error("infinite localization length: no disorder (delta_n = 0)")]
    InfiniteLocalizationLength,

    #[error("no transmission decay: mean ln T = {mean_ln_t} >= 0, localization length undefined")]
    NoDecay { mean_ln_t: f64 },

    #[error("numeric instability in {context}")]
    NumericInstability { context: &'static str },

    #[error("degenerate outgoing solutions: |W| = {wronskian:e}")]
    DegenerateSolutions { wronskian: f64 },

    #[error("degenerate mode: profile is identically zero")]
    DegenerateMode,

    #[error("degenerate fit: {0}")]
    DegenerateFit(&'static str),

    #[error("q_eff = {q_eff} is not below the loss cut-off q_loss = {q_loss}")]
    AboveLossCutoff { q_eff: f64, q_loss: f64 },

    #[error("missing data: {0}")]
    Missing(String),

    #[error("run failed: {failed} of {total} realizations failed (limit 5%)")]
    TooManyFailures { failed: usize, total: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Validation {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad configuration or input, as opposed to
    /// failures while running.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::Validation { .. } | Error::Config(_))
    }
}
