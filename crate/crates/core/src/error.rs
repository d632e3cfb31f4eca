use thiserror::Error;

/// Errors raised by the solvers and data structures in this crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("not enough coefficients: need {needed}, have {available}")]
    Length { needed: usize, available: usize },

    #[error("{what} of size {size} exceeds the dense cap {cap}")]
    Resource {
        what: &'static str,
        size: usize,
        cap: usize,
    },

    #[error("zero pivot in leaf block {leaf} at local row {row}")]
    SingularPivot { leaf: usize, row: usize },

    #[error("structure mismatch: {0}")]
    Structure(String),

    #[error("singular Sylvester operator: spectral gap {gap:e} below {threshold:e}")]
    SingularSylvester { gap: f64, threshold: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("time step {step}: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed dump: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_step(self, step: usize) -> Self {
        Error::Step {
            step,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
