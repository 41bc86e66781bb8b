use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid initial condition: {0}")]
    InitialCondition(String),

    #[error("generator violation: {0}")]
    Generator(#[from] crate::model::GeneratorViolation),

    #[error("invalid measurements: {0}")]
    Measurements(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("grids do not match: {0}")]
    GridMismatch(String),

    #[error("non-finite {what} at iteration {iteration}")]
    NonFinite { what: &'static str, iteration: usize },
}

macro_rules! bail {
    ($variant:ident, $($arg:tt)*) => {
        return Err($crate::error::Error::$variant(alloc::format!($($arg)*)))
    };
}
pub(crate) use bail;
