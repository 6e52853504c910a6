use thiserror::Error;

/// Which log-normalizer argument of the closed-form divergence left the
/// valid natural-parameter region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DivergenceArgument {
    /// `gamma * theta_p`
    ScaledP,
    /// `gamma * theta_q`
    ScaledQ,
    /// `(gamma / alpha) * theta_p + (gamma / beta) * theta_q`
    Mixed,
    /// `(gamma / beta) * theta_p + (gamma / alpha) * theta_q`, symmetric form only
    MixedSwapped,
}

impl std::fmt::Display for DivergenceArgument {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            DivergenceArgument::ScaledP => "gamma*theta_p",
            DivergenceArgument::ScaledQ => "gamma*theta_q",
            DivergenceArgument::Mixed => "(gamma/alpha)*theta_p + (gamma/beta)*theta_q",
            DivergenceArgument::MixedSwapped => "(gamma/beta)*theta_p + (gamma/alpha)*theta_q",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("divergence argument {argument} invalid: component {component} = {value} is not > -1")]
    DivergenceDomain {
        argument: DivergenceArgument,
        component: usize,
        value: f64,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("total conflict between sources (C = {conflict})")]
    TotalConflict { conflict: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("sample {sample} has no present view")]
    AllViewsMissing { sample: usize },

    #[error("loss term `{term}` for sample {sample} at epoch {epoch}: {source}")]
    Loss {
        epoch: usize,
        sample: usize,
        term: String,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite loss at epoch {epoch}, batch {batch} (term `{term}`)")]
    NonFinite {
        epoch: usize,
        batch: usize,
        term: String,
    },

    #[error("model file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
