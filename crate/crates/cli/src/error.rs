use maccesec::adversary::AdversaryError;
use maccesec::codec::CodecError;
use maccesec::geo::GeoError;
use maccesec::policy::PolicyError;
use maccesec::protection::ProtectionError;
use thiserror::Error;

/// Failure classes with stable process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("ordering violation: {0}")]
    Ordering(String),
    #[error("policy error: {0}")]
    Policy(String),
    #[error("crypto error: {0}")]
    Crypto(String),
    #[error("data error: {0}")]
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::Ordering(_) => 3,
            CliError::Policy(_) => 4,
            CliError::Crypto(_) => 5,
            CliError::Data(_) => 6,
        }
    }
}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<PolicyError> for CliError {
    fn from(e: PolicyError) -> Self {
        match e {
            PolicyError::Codec(c) => c.into(),
            other => CliError::Policy(other.to_string()),
        }
    }
}

impl From<ProtectionError> for CliError {
    fn from(e: ProtectionError) -> Self {
        match e {
            ProtectionError::Policy(p) => p.into(),
            ProtectionError::KeyFile(m) => CliError::Data(format!("key file: {m}")),
            other => CliError::Crypto(other.to_string()),
        }
    }
}

impl From<GeoError> for CliError {
    fn from(e: GeoError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<AdversaryError> for CliError {
    fn from(e: AdversaryError) -> Self {
        match e {
            AdversaryError::Codec(c) => c.into(),
            AdversaryError::Policy(p) => p.into(),
            AdversaryError::Protection(p) => p.into(),
            AdversaryError::MalformedFrame(p) => CliError::Crypto(p.to_string()),
            e @ AdversaryError::UnknownField(_) => CliError::Policy(e.to_string()),
            e @ AdversaryError::InvalidScenario(_) => CliError::Parse(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<hex::FromHexError> for CliError {
    fn from(e: hex::FromHexError) -> Self {
        CliError::Parse(format!("hex: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Parse(format!("json: {e}"))
    }
}
