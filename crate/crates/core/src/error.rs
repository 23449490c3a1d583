use thiserror::Error;

use crate::profile::AchievabilityCondition;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{coordinate} = {value} lies outside the domain [{lo}, {hi}]")]
    OutOfDomain {
        coordinate: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("invalid function: {0}")]
    InvalidFunction(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error(
        "feasible set of type {type_index} is unbounded up to s = {search_max}; \
         raise s_search_max or check that the top budget eventually falls below cost plus profit"
    )]
    UnboundedFeasibleSet { type_index: usize, search_max: f64 },

    #[error("type {type_index} has no interior maximizer: net-value slope at 0+ is {slope}")]
    NoInteriorMaximizer { type_index: usize, slope: f64 },

    #[error("bracket error: {0}")]
    Bracket(String),

    #[error("types {lower} and {upper} produce tied qualities ({quality})")]
    QualityTie {
        lower: usize,
        upper: usize,
        quality: f64,
    },

    #[error("degenerate sensitivity at step {step}: delta = {delta} (mixed partial not positive)")]
    DegenerateSensitivity { step: usize, delta: f64 },

    #[error("empty price window at step {step}: A = {lower} > B = {upper}")]
    EmptyPriceWindow { step: usize, lower: f64, upper: f64 },

    #[error("margin not achievable: {condition} fails (margin {margin})")]
    NotAchievable {
        condition: AchievabilityCondition,
        margin: f64,
    },

    #[error("construction failed certification: {constraint} ({detail})")]
    Certification { constraint: String, detail: String },
}

/// Coarse grouping used for exit codes and error reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    ConditionFailure,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidFunction(_) | Error::InvalidScenario(_) => ErrorClass::Input,
            Error::NoInteriorMaximizer { .. }
            | Error::NotAchievable { .. }
            | Error::Certification { .. } => ErrorClass::ConditionFailure,
            Error::OutOfDomain { .. }
            | Error::UnboundedFeasibleSet { .. }
            | Error::Bracket(_)
            | Error::QualityTie { .. }
            | Error::DegenerateSensitivity { .. }
            | Error::EmptyPriceWindow { .. } => ErrorClass::Numerical,
        }
    }

    /// Short machine-readable name.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OutOfDomain { .. } => "out_of_domain",
            Error::InvalidFunction(_) => "invalid_function",
            Error::InvalidScenario(_) => "invalid_scenario",
            Error::UnboundedFeasibleSet { .. } => "unbounded_feasible_set",
            Error::NoInteriorMaximizer { .. } => "no_interior_maximizer",
            Error::Bracket(_) => "bracket",
            Error::QualityTie { .. } => "quality_tie",
            Error::DegenerateSensitivity { .. } => "degenerate_sensitivity",
            Error::EmptyPriceWindow { .. } => "empty_price_window",
            Error::NotAchievable { .. } => "not_achievable",
            Error::Certification { .. } => "certification",
        }
    }
}
