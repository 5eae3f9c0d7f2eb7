use thiserror::Error;

pub type Result<T> = std::result::Result<T, SimError>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid trust profile (alpha={alpha}, beta={beta})")]
    InvalidProfile { alpha: f64, beta: f64 },

    #[error("network needs at least 2 nodes, got {0}")]
    NetworkTooSmall(usize),

    #[error("delegate set is empty")]
    EmptyDelegates,

    #[error("delegate index {index} out of range for {nodes} nodes")]
    DelegateOutOfRange { index: usize, nodes: usize },

    #[error("trust separation undefined: network has no {0} nodes")]
    MissingClass(&'static str),

    #[error("length mismatch: {left} trusts vs {right} roles")]
    LengthMismatch { left: usize, right: usize },

    #[error("attribute set is empty")]
    EmptyAttributes,

    #[error("attribute `{name}` value {value} outside [{min}, {max}]")]
    AttributeOutOfRange {
        name: String,
        value: i64,
        min: i64,
        max: i64,
    },

    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),

    #[error("policy parse error at byte {pos}: {msg}")]
    PolicyParse { pos: usize, msg: String },

    #[error("ciphertext from backend `{found}` handed to backend `{expected}`")]
    BackendMismatch { expected: String, found: String },

    #[error("malformed ciphertext: {0}")]
    MalformedCiphertext(String),

    #[error("unknown {kind} `{name}`")]
    UnknownStrategy { kind: &'static str, name: String },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("not enough data: {0}")]
    Insufficient(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
