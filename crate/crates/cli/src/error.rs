//! Exit-code classes and the one-line stderr diagnostic.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config,
    Io,
    Provider,
    Numerical,
}

impl Kind {
    pub fn code(self) -> i32 {
        match self {
            Kind::Config => 1,
            Kind::Io => 2,
            Kind::Provider => 3,
            Kind::Numerical => 4,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Config => "config",
            Kind::Io => "io",
            Kind::Provider => "provider",
            Kind::Numerical => "numerical",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(Kind::Config, message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(Kind::Io, message)
    }

    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }

    /// `error kind=<kind> code=<n> msg="<json-escaped message>"`
    pub fn diagnostic(&self) -> String {
        format!(
            "error kind={} code={} msg={}",
            self.kind.as_str(),
            self.kind.code(),
            serde_json::Value::String(self.message.clone())
        )
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<glimpse::Error> for CliError {
    fn from(e: glimpse::Error) -> Self {
        use glimpse::Error as E;
        let kind = match &e {
            E::InvalidConfig(_) => Kind::Config,
            E::Provider(_) => Kind::Provider,
            E::DegenerateMass(_)
            | E::DegenerateVariance
            | E::EmptyPassage
            | E::EmptyPopulation
            | E::TrainingDiverged { .. } => Kind::Numerical,
            E::InvalidObservation(_)
            | E::CorruptFile(_)
            | E::VersionMismatch { .. }
            | E::Schema { .. }
            | E::MissingTruth(_)
            | E::Io(_) => Kind::Io,
        };
        Self::new(kind, e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}
