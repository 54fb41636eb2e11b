use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("cell ({row},{col}) is not in the diagram {diagram}")]
    CellNotInDiagram {
        row: usize,
        col: usize,
        diagram: String,
    },

    #[error("cell ({row},{col}) is not addable to {diagram}")]
    CellNotAddable {
        row: usize,
        col: usize,
        diagram: String,
    },

    #[error("diagram {diagram} has more than {level} rows")]
    TooManyRows { diagram: String, level: usize },

    #[error("interlacing violated: {0}")]
    Interlacing(String),

    #[error("invalid point: {0}")]
    InvalidPoint(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("step size underflow at t = {time}: state {state:?}")]
    StepUnderflow { time: f64, state: Vec<f64> },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("sampler did not converge: {0}")]
    NonConvergence(String),

    #[error("statistical test precondition failed: {0}")]
    Statistics(String),
}

pub type Result<T> = std::result::Result<T, Error>;
