use std::path::PathBuf;

use thiserror::Error;

use crate::profile::FeatureId;
use crate::schedule::{Bin, RiskPercent, Sex};

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("cannot parse schedule: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<ScheduleError>,
    },
    #[error("feature '{feature}' has no bins")]
    EmptyTable { feature: String },
    #[error("feature '{feature}': bin {bin} is empty (min must be below max)")]
    EmptyBin { feature: String, bin: Bin },
    #[error("feature '{feature}': bins {first} and {second} overlap")]
    Overlap { feature: String, first: Bin, second: Bin },
    #[error("feature '{feature}': gap between bins {first} and {second}")]
    Gap { feature: String, first: Bin, second: Bin },
    #[error("{sex} risk table: {reason}")]
    RiskRows { sex: Sex, reason: String },
    #[error("{sex} risk table decreases at {points} points ({previous} then {current})")]
    NonMonotoneRisk { sex: Sex, points: i32, previous: RiskPercent, current: RiskPercent },
    #[error("{sex} category thresholds: {reason}")]
    Thresholds { sex: Sex, reason: String },
    #[error("no schedule for {0}")]
    MissingSex(Sex),
    #[error("more than one schedule for {0}")]
    DuplicateSex(Sex),
}

/// A single invalid field of a patient profile.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("invalid profile: {}", .fields.iter().map(|f| format!("{}: {}", f.field, f.message)).collect::<Vec<_>>().join("; "))]
pub struct ProfileError {
    pub fields: Vec<FieldError>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ScoreError {
    #[error("{feature} value {value} is outside every {sex} bin")]
    OutOfDomain { sex: Sex, feature: FeatureId, value: i32 },
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("{0} risk table is not monotone in total points; interval bounds would be unsound")]
    NonMonotoneRisk(Sex),
    #[error("{feature} tables cover different ranges for male and female")]
    IncompatibleDomains { feature: FeatureId },
    #[error("{feature}: no representative value lies inside every column")]
    EmptyDomain { feature: FeatureId },
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum ExplainError {
    #[error(transparent)]
    Profile(#[from] ProfileError),
    #[error("feature order must list every feature exactly once, got {0:?}")]
    BadOrder(Vec<FeatureId>),
    #[error("feature order does not cover mutable feature {0}")]
    OrderMissesMutable(FeatureId),
    #[error("{0} can never be mutable")]
    ImmutableFeature(FeatureId),
    #[error("profile is already in a category satisfying the target")]
    AlreadyAtTarget,
    #[error("target unreachable given immutable features")]
    Unreachable,
    #[error("no category below low")]
    NoLowerCategory,
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Explain(#[from] ExplainError),
    #[error("invariant violated for {profile}: {detail}")]
    Invariant { profile: String, detail: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed record: {0}")]
    Record(String),
}
