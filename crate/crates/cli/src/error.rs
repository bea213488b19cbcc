use std::fmt::Display;
use std::io;

use asttrans_core::ast_repr::AstError;
use asttrans_core::corpus::CorpusError;
use asttrans_core::metrics::MetricsError;
use asttrans_core::search::SearchError;
use asttrans_core::text_embed::EmbedError;
use asttrans_core::translator::TranslatorError;
use asttrans_core::vecfile::VecFileError;

/// Process exit status classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage,
    Data,
    Invariant,
}

impl ExitKind {
    pub fn code(self) -> u8 {
        match self {
            ExitKind::Usage => 1,
            ExitKind::Data => 2,
            ExitKind::Invariant => 3,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ExitKind,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            kind: ExitKind::Usage,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            kind: ExitKind::Data,
            message: message.into(),
        }
    }

    pub fn invariant(message: impl Into<String>) -> Self {
        CliError {
            kind: ExitKind::Invariant,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> u8 {
        self.kind.code()
    }
}

pub type CliResult<T> = Result<T, CliError>;

/// Attaches a prefix to any error convertible into [`CliError`].
pub trait Context<T> {
    fn context(self, what: impl Display) -> CliResult<T>;
}

impl<T, E: Into<CliError>> Context<T> for Result<T, E> {
    fn context(self, what: impl Display) -> CliResult<T> {
        self.map_err(|e| {
            let e: CliError = e.into();
            CliError {
                kind: e.kind,
                message: format!("{what}: {}", e.message),
            }
        })
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::data(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Io(e) => e.into(),
            CorpusError::Schema(s) => CliError::data(format!("line {}: {}", s.line, s.message)),
        }
    }
}

impl From<AstError> for CliError {
    fn from(e: AstError) -> Self {
        match e {
            AstError::Parse { .. } | AstError::UnsupportedLanguage(_) => CliError::data(e.to_string()),
            _ => CliError::invariant(e.to_string()),
        }
    }
}

impl From<TranslatorError> for CliError {
    fn from(e: TranslatorError) -> Self {
        match e {
            TranslatorError::InvalidConfig(_) => CliError::usage(e.to_string()),
            TranslatorError::ShapeMismatch(_) | TranslatorError::DivergedLoss { .. } => {
                CliError::invariant(e.to_string())
            }
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<EmbedError> for CliError {
    fn from(e: EmbedError) -> Self {
        match e {
            EmbedError::InvalidConfig(_) => CliError::usage(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<SearchError> for CliError {
    fn from(e: SearchError) -> Self {
        match e {
            SearchError::TargetDimTooLarge { .. } | SearchError::InvalidWeight(_) => CliError::usage(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::InvalidK => CliError::usage(e.to_string()),
            _ => CliError::data(e.to_string()),
        }
    }
}

impl From<VecFileError> for CliError {
    fn from(e: VecFileError) -> Self {
        CliError::data(e.to_string())
    }
}
