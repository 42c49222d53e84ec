//! Quantized feature domains: one representative value per bin.
//!
//! Points are constant inside a bin, so a single representative per bin
//! stands in exactly for every value of that bin. Finite-min bins use
//! their lower bound; an open-below bin uses its upper bound minus one.

use serde::Serialize;

use crate::error::EngineError;
use crate::profile::{FeatureId, FeatureValue};
use crate::schedule::{BinTable, ScheduleSet, Sex, SexSchedule};

/// Representative values for one sex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SexDomain {
    pub age: Vec<i32>,
    pub hdl: Vec<i32>,
    pub total_chol: Vec<i32>,
    pub sbp: Vec<i32>,
}

impl SexDomain {
    fn build(schedule: &SexSchedule) -> Result<Self, EngineError> {
        Ok(Self {
            age: representatives(FeatureId::Age, &[schedule.age()])?,
            hdl: representatives(FeatureId::Hdl, &[schedule.hdl()])?,
            total_chol: representatives(FeatureId::TotalChol, &[schedule.total_chol()])?,
            // both columns share one axis; cut on the union of their boundaries
            sbp: representatives(FeatureId::Sbp, &[schedule.sbp(false), schedule.sbp(true)])?,
        })
    }

    pub fn ints(&self, feature: FeatureId) -> Option<&[i32]> {
        match feature {
            FeatureId::Age => Some(&self.age),
            FeatureId::Hdl => Some(&self.hdl),
            FeatureId::TotalChol => Some(&self.total_chol),
            FeatureId::Sbp => Some(&self.sbp),
            _ => None,
        }
    }

    /// Domain of `feature` for this sex, ascending.
    pub fn values(&self, feature: FeatureId) -> Vec<FeatureValue> {
        match feature {
            FeatureId::Sex => Sex::ALL.into_iter().map(FeatureValue::Sex).collect(),
            FeatureId::Treatment | FeatureId::Smoker | FeatureId::Diabetic => {
                vec![FeatureValue::Bool(false), FeatureValue::Bool(true)]
            }
            f => self.ints(f).expect("numeric feature").iter().copied().map(FeatureValue::Int).collect(),
        }
    }

    pub fn cardinality(&self, feature: FeatureId) -> usize {
        match feature {
            FeatureId::Sex | FeatureId::Treatment | FeatureId::Smoker | FeatureId::Diabetic => 2,
            f => self.ints(f).map_or(0, <[i32]>::len),
        }
    }

    /// Number of profiles of this sex in the full grid.
    pub fn grid_size(&self) -> usize {
        FeatureId::ALL[1..].iter().map(|f| self.cardinality(*f)).product()
    }
}

/// Representative values for both sexes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeatureDomain {
    pub male: SexDomain,
    pub female: SexDomain,
}

impl FeatureDomain {
    pub fn from_schedules(schedules: &ScheduleSet) -> Result<Self, EngineError> {
        Ok(Self {
            male: SexDomain::build(schedules.get(Sex::Male))?,
            female: SexDomain::build(schedules.get(Sex::Female))?,
        })
    }

    pub fn get(&self, sex: Sex) -> &SexDomain {
        match sex {
            Sex::Male => &self.male,
            Sex::Female => &self.female,
        }
    }
}

/// One representative per cell of the common refinement of `tables`,
/// keeping only cells that every table covers.
pub fn representatives(feature: FeatureId, tables: &[&BinTable]) -> Result<Vec<i32>, EngineError> {
    let mut cuts: Vec<i32> = tables
        .iter()
        .flat_map(|t| t.bins().iter().flat_map(|b| [b.min, b.max]))
        .flatten()
        .collect();
    cuts.sort_unstable();
    cuts.dedup();
    if cuts.is_empty() {
        return Err(EngineError::EmptyDomain { feature });
    }
    let mut reps = Vec::with_capacity(cuts.len() + 1);
    reps.push(cuts[0] - 1);
    reps.extend(cuts.iter().copied());
    reps.retain(|v| tables.iter().all(|t| t.find(*v).is_some()));
    if reps.is_empty() {
        return Err(EngineError::EmptyDomain { feature });
    }
    Ok(reps)
}
