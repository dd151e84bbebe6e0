use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("self-loop on vertex {0}")]
    SelfLoop(usize),

    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(usize, usize),

    #[error("edge endpoint {vertex} out of range for graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("edge index {index} out of range for graph with {m} edges")]
    EdgeOutOfRange { index: usize, m: usize },

    #[error("edge subset has {subset} slots but the host graph has {host} edges")]
    SubsetMismatch { subset: usize, host: usize },

    #[error("star order must be at least 1 (got {0})")]
    InvalidStarOrder(u32),

    #[error("integer overflow while computing {0}")]
    Overflow(&'static str),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error(
        "enumeration infeasible: graph has {m} edges but the enumeration cap is {cap} \
         (2^{m} subsets); raise the cap explicitly to proceed"
    )]
    EnumerationCap { m: usize, cap: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("variable index {index} out of range for {nvars} variables")]
    VariableOutOfRange { index: usize, nvars: usize },

    #[error("indices must be distinct (got {0} twice)")]
    SameIndex(usize),

    #[error("cannot differentiate a degree-0 polynomial")]
    DegreeZero,

    #[error("expected a quadratic form, got degree {0}")]
    NotQuadratic(u32),

    #[error("support is not homogeneous: found degrees {0} and {1}")]
    NotHomogeneous(u32, u32),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("host graph must be the triangle K3 (got n={n}, m={m})")]
    NotTriangleHost { n: usize, m: usize },

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("line {line}: self-loop on `{label}`")]
    ParseSelfLoop { line: usize, label: String },

    #[error("unknown dataset `{id}`; available: {available}")]
    UnknownDataset { id: String, available: String },

    #[error(
        "dataset `{id}` ({expected_n} vertices) is not bundled with this build; \
         place `{id}.edges` in a directory and pass it as the data directory"
    )]
    DatasetNotBundled { id: String, expected_n: usize },

    #[error("dataset `{id}` has {got} vertices, expected {expected}")]
    DatasetSize { id: String, expected: usize, got: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parameter file: {0}")]
    ParamsJson(#[from] serde_json::Error),
}
