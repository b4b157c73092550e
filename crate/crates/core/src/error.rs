use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph descriptor `{0}`")]
    InvalidDescriptor(String),

    #[error("graph is disconnected: {components} components (vertex {witness} unreachable from 0)")]
    Disconnected { components: usize, witness: usize },

    #[error("edge {index} ({u}, {v}): {reason}")]
    InvalidEdge {
        index: usize,
        u: usize,
        v: usize,
        reason: String,
    },

    #[error("vertex {vertex}: measure must be positive and finite")]
    InvalidMeasure { vertex: usize },

    #[error("empty manifold")]
    Empty,

    #[error("field has length {got}, expected {expected}")]
    FieldLength { expected: usize, got: usize },

    #[error("edge coefficient {value} at edge {index} outside [{lower}, {upper}]")]
    CoefficientOutOfRange {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("eigensolver failed to converge (n = {n}, matrix norm {norm:e})")]
    Eigensolver { n: usize, norm: f64 },

    #[error("symbol is undefined at eigenvalue {eigenvalue}")]
    SymbolUndefined { eigenvalue: f64 },

    #[error("L is not invertible on constants: kernel component {component:e} exceeds tolerance")]
    KernelComponent { component: f64 },

    #[error("symbol order N = {n} must be at least {min}")]
    SymbolOrder { n: u32, min: u32 },

    #[error("derived symbol exponent {beta} must be below N = {n}")]
    DerivedExponent { beta: f64, n: u32 },

    #[error("invalid quadrature: {0}")]
    Quadrature(String),

    #[error("exponents violate the Hölder relation: {0}")]
    HolderRelation(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("nonlinearity `{0}` has no Lipschitz certificate")]
    UncertifiedNonlinearity(String),

    #[error("unknown experiment `{0}`")]
    UnknownExperiment(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
