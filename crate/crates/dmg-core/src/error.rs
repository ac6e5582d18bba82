use thiserror::Error;

/// Errors produced by mesh handling, assembly, map evaluation and solves.
#[derive(Error, Debug)]
pub enum Error {
    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("map error: {0}")]
    Map(String),

    #[error("singular map: |det J| = {det:.3e} <= {floor:.1e} at ({x:.6}, {y:.6})")]
    SingularMap { det: f64, floor: f64, x: f64, y: f64 },

    #[error("assembly error: {0}")]
    Assembly(String),

    #[error("solve error: {0}")]
    Solve(String),

    #[error("solver diverged: {0}")]
    Diverged(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn mesh(msg: impl Into<String>) -> Self {
        Error::Mesh(msg.into())
    }
    pub fn map(msg: impl Into<String>) -> Self {
        Error::Map(msg.into())
    }
    pub fn assembly(msg: impl Into<String>) -> Self {
        Error::Assembly(msg.into())
    }
    pub fn solve(msg: impl Into<String>) -> Self {
        Error::Solve(msg.into())
    }
    pub fn training(msg: impl Into<String>) -> Self {
        Error::Training(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
