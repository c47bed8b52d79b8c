use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("empty after cleanup")]
    EmptyAfterCleanup,

    #[error("feature shape mismatch: expected {expected} rows, found {found}")]
    FeatureShape { expected: usize, found: usize },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("missing rows for {} id(s): {}", ids.len(), format_ids(ids))]
    MissingIds { ids: Vec<usize> },

    #[error("policy requires features")]
    PolicyRequiresFeatures,

    #[error("missing embeddings for {} vertex{}: {}", ids.len(), if ids.len() == 1 { "" } else { "es" }, format_ids(ids))]
    MissingEmbeddings { ids: Vec<usize> },

    #[error("external embedder failed ({status}): {stderr}")]
    ExternalCommand { status: String, stderr: String },

    #[error("class {0} has no training example")]
    ClassAbsent(u32),

    #[error("too few hyperedges: {0} positives, need at least 10")]
    TooFewHyperedges(usize),

    #[error("hypergraph too dense to sample negatives of size {size}")]
    TooDense { size: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}

fn format_ids(ids: &[usize]) -> String {
    const SHOWN: usize = 20;
    let mut s = ids
        .iter()
        .take(SHOWN)
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    if ids.len() > SHOWN {
        s.push_str(&format!(", ... ({} more)", ids.len() - SHOWN));
    }
    s
}
