use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("sample does not match the requested contract: {0}")]
    ContractViolation(String),

    #[error("allocation of {requested} values failed")]
    Allocation { requested: usize },

    #[error("no root in [{low}, {high}]: h(low) = {h_low}, h(high) = {h_high}")]
    NoRoot {
        low: f64,
        high: f64,
        h_low: f64,
        h_high: f64,
    },

    #[error("singular least-squares design: {0}")]
    SingularFit(String),
}

impl Error {
    /// True for failures of a numerical search (no bracketing root).
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NoRoot { .. } | Error::SingularFit(_))
    }
}

pub(crate) fn ensure(cond: bool, name: &'static str, value: f64, constraint: &'static str) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            constraint,
        })
    }
}
