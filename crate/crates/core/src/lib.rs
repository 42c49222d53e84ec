//! Framingham cardiovascular risk scoring with logic-based explanations.
//!
//! The point and risk tables live in JSON schedule files ([`schedule`]).
//! On top of scoring, [`logic`] decides entailment and satisfiability of
//! category statements over partially specified profiles, [`explain`]
//! derives minimal abductive and counterfactual explanations from those
//! decisions, and [`sweep`] runs both over the exhaustive input grid.

pub mod domain;
pub mod error;
pub mod explain;
pub mod logic;
pub mod profile;
pub mod schedule;
pub mod sweep;

pub use domain::{FeatureDomain, SexDomain};
pub use error::{EngineError, ExplainError, FieldError, ProfileError, ScheduleError, ScoreError, SweepError};
pub use explain::{
    abduce, abduce_with, counterfact, counterfact_with, default_target, AbductiveExplanation, Backend,
    CounterfactualExplanation, MutabilityPolicy, TargetRule,
};
pub use logic::{CategoryPredicate, CategoryTest, Engine, PartialInstance};
pub use profile::{Assessment, FeatureId, FeatureSet, FeatureValue, PatientProfile, ScoreBreakdown};
pub use schedule::{Bin, BinTable, Percent, RiskCategory, RiskPercent, ScheduleSet, Sex, SexSchedule};
