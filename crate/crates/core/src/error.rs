use std::path::PathBuf;

/// Errors raised by the solvers, the evaluation code and the file I/O layer.
#[derive(Debug, thiserror::Error)]
pub enum OkmError {
    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("object {row} belongs to no cluster")]
    Coverage { row: usize },

    #[error("cluster {cluster} is empty")]
    EmptyCluster { cluster: usize },

    #[error("{}", kernel_domain_message(*.pair, *.base, *.degree))]
    KernelDomain {
        pair: Option<(usize, usize)>,
        base: f64,
        degree: f64,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: line {line}, column {column}: {message}", .path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{}: {message}", .path.display())]
    Format { path: PathBuf, message: String },

    #[error("method `{method}`, run {run}: {source}")]
    Benchmark {
        method: String,
        run: usize,
        #[source]
        source: Box<OkmError>,
    },
}

fn kernel_domain_message(pair: Option<(usize, usize)>, base: f64, degree: f64) -> String {
    let at = match pair {
        Some((i, j)) => format!(" for objects ({i}, {j})"),
        None => String::new(),
    };
    format!("polynomial kernel{at}: base {base} is negative and degree {degree} is not an integer")
}

impl OkmError {
    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            OkmError::EmptyCluster { .. } | OkmError::KernelDomain { .. } => true,
            OkmError::Benchmark { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T, E = OkmError> = std::result::Result<T, E>;
