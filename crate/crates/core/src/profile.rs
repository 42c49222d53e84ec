//! Patient profiles, feature identifiers and scoring against a schedule.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{FieldError, ProfileError, ScoreError};
use crate::schedule::{RiskCategory, RiskPercent, ScheduleSet, Sex};

/// The eight explanation features, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureId {
    Sex,
    Age,
    Hdl,
    TotalChol,
    Sbp,
    Treatment,
    Smoker,
    Diabetic,
}

impl FeatureId {
    pub const ALL: [FeatureId; 8] = [
        FeatureId::Sex,
        FeatureId::Age,
        FeatureId::Hdl,
        FeatureId::TotalChol,
        FeatureId::Sbp,
        FeatureId::Treatment,
        FeatureId::Smoker,
        FeatureId::Diabetic,
    ];

    /// Machine name, as used in JSON, CSV and CLI flags.
    pub fn key(self) -> &'static str {
        match self {
            FeatureId::Sex => "sex",
            FeatureId::Age => "age",
            FeatureId::Hdl => "hdl",
            FeatureId::TotalChol => "total_chol",
            FeatureId::Sbp => "sbp",
            FeatureId::Treatment => "treatment",
            FeatureId::Smoker => "smoker",
            FeatureId::Diabetic => "diabetic",
        }
    }

    /// Human-readable name.
    pub fn label(self) -> &'static str {
        match self {
            FeatureId::Sex => "sex",
            FeatureId::Age => "age",
            FeatureId::Hdl => "HDL cholesterol",
            FeatureId::TotalChol => "total cholesterol",
            FeatureId::Sbp => "systolic blood pressure",
            FeatureId::Treatment => "treatment for SBP",
            FeatureId::Smoker => "smoker status",
            FeatureId::Diabetic => "diabetes",
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for FeatureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl std::str::FromStr for FeatureId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        FeatureId::ALL
            .into_iter()
            .find(|f| f.key() == norm)
            .or(match norm.as_str() {
                "treated" | "treated_sbp" => Some(FeatureId::Treatment),
                "tc" | "cholesterol" => Some(FeatureId::TotalChol),
                _ => None,
            })
            .ok_or_else(|| format!("unknown feature '{s}'"))
    }
}

/// A set of features, iterated in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct FeatureSet(u8);

impl FeatureSet {
    pub const fn empty() -> Self {
        FeatureSet(0)
    }

    pub const fn all() -> Self {
        FeatureSet(0xff)
    }

    pub fn contains(self, f: FeatureId) -> bool {
        self.0 & f.bit() != 0
    }

    pub fn insert(&mut self, f: FeatureId) {
        self.0 |= f.bit();
    }

    pub fn remove(&mut self, f: FeatureId) {
        self.0 &= !f.bit();
    }

    pub fn with(mut self, f: FeatureId) -> Self {
        self.insert(f);
        self
    }

    pub fn without(mut self, f: FeatureId) -> Self {
        self.remove(f);
        self
    }

    pub fn complement(self) -> Self {
        FeatureSet(!self.0)
    }

    pub fn is_subset(self, other: FeatureSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = FeatureId> {
        FeatureId::ALL.into_iter().filter(move |f| self.contains(*f))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn from_bits(bits: u8) -> Self {
        FeatureSet(bits)
    }

    /// `key;key;...` form used in CSV records.
    pub fn to_keys(self) -> String {
        self.iter().map(FeatureId::key).collect::<Vec<_>>().join(";")
    }

    pub fn labels(self) -> Vec<&'static str> {
        self.iter().map(FeatureId::label).collect()
    }
}

impl FromIterator<FeatureId> for FeatureSet {
    fn from_iter<I: IntoIterator<Item = FeatureId>>(iter: I) -> Self {
        let mut s = FeatureSet::empty();
        for f in iter {
            s.insert(f);
        }
        s
    }
}

impl fmt::Display for FeatureSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.iter().map(FeatureId::key).collect::<Vec<_>>().join(", "))
    }
}

impl Serialize for FeatureSet {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_seq(self.iter())
    }
}

impl<'de> Deserialize<'de> for FeatureSet {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        Ok(Vec::<FeatureId>::deserialize(deserializer)?.into_iter().collect())
    }
}

/// One feature's value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FeatureValue {
    Sex(Sex),
    Int(i32),
    Bool(bool),
}

impl fmt::Display for FeatureValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureValue::Sex(s) => write!(f, "{s}"),
            FeatureValue::Int(v) => write!(f, "{v}"),
            FeatureValue::Bool(b) => write!(f, "{}", if *b { "yes" } else { "no" }),
        }
    }
}

impl Serialize for FeatureValue {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            FeatureValue::Sex(s) => s.serialize(serializer),
            FeatureValue::Int(v) => serializer.serialize_i32(*v),
            FeatureValue::Bool(b) => serializer.serialize_bool(*b),
        }
    }
}

/// Raw feature values for one individual, in model units
/// (years, mg/dL, mm Hg).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatientProfile {
    pub sex: Sex,
    pub age: i32,
    pub hdl: i32,
    pub total_chol: i32,
    pub sbp: i32,
    pub treated_sbp: bool,
    pub smoker: bool,
    pub diabetic: bool,
}

impl PatientProfile {
    pub fn get(&self, feature: FeatureId) -> FeatureValue {
        match feature {
            FeatureId::Sex => FeatureValue::Sex(self.sex),
            FeatureId::Age => FeatureValue::Int(self.age),
            FeatureId::Hdl => FeatureValue::Int(self.hdl),
            FeatureId::TotalChol => FeatureValue::Int(self.total_chol),
            FeatureId::Sbp => FeatureValue::Int(self.sbp),
            FeatureId::Treatment => FeatureValue::Bool(self.treated_sbp),
            FeatureId::Smoker => FeatureValue::Bool(self.smoker),
            FeatureId::Diabetic => FeatureValue::Bool(self.diabetic),
        }
    }

    /// Sets a feature. Panics if the value kind does not match the feature.
    pub fn set(&mut self, feature: FeatureId, value: FeatureValue) {
        match (feature, value) {
            (FeatureId::Sex, FeatureValue::Sex(s)) => self.sex = s,
            (FeatureId::Age, FeatureValue::Int(v)) => self.age = v,
            (FeatureId::Hdl, FeatureValue::Int(v)) => self.hdl = v,
            (FeatureId::TotalChol, FeatureValue::Int(v)) => self.total_chol = v,
            (FeatureId::Sbp, FeatureValue::Int(v)) => self.sbp = v,
            (FeatureId::Treatment, FeatureValue::Bool(b)) => self.treated_sbp = b,
            (FeatureId::Smoker, FeatureValue::Bool(b)) => self.smoker = b,
            (FeatureId::Diabetic, FeatureValue::Bool(b)) => self.diabetic = b,
            (f, v) => panic!("value {v:?} does not fit feature {f}"),
        }
    }

    /// Features whose values differ between the two profiles.
    pub fn diff(&self, other: &PatientProfile) -> FeatureSet {
        FeatureId::ALL.into_iter().filter(|f| self.get(*f) != other.get(*f)).collect()
    }
}

impl fmt::Display for PatientProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} age={} hdl={} tc={} sbp={}{} smoker={} diabetic={}",
            self.sex,
            self.age,
            self.hdl,
            self.total_chol,
            self.sbp,
            if self.treated_sbp { " (treated)" } else { "" },
            self.smoker,
            self.diabetic
        )
    }
}

/// Per-feature points and their sum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    pub age: i32,
    pub hdl: i32,
    pub total_chol: i32,
    pub sbp: i32,
    pub smoker: i32,
    pub diabetic: i32,
    pub total: i32,
}

/// Score, risk and category of one profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Assessment {
    pub breakdown: ScoreBreakdown,
    pub percent: RiskPercent,
    pub category: RiskCategory,
}

impl ScheduleSet {
    /// Checks the profile against the model domain, collecting every bad field.
    pub fn validate(&self, profile: &PatientProfile) -> Result<(), ProfileError> {
        let schedule = self.get(profile.sex);
        let mut fields = Vec::new();
        if profile.age < 30 {
            fields.push(FieldError::new("age", format!("{} is below the model domain (30+)", profile.age)));
        }
        for (name, value) in [("hdl", profile.hdl), ("total_chol", profile.total_chol), ("sbp", profile.sbp)] {
            if value <= 0 {
                fields.push(FieldError::new(name, format!("{value} must be positive")));
            }
        }
        if fields.is_empty() {
            let tables = [
                ("age", profile.age, schedule.age()),
                ("hdl", profile.hdl, schedule.hdl()),
                ("total_chol", profile.total_chol, schedule.total_chol()),
                ("sbp", profile.sbp, schedule.sbp(profile.treated_sbp)),
            ];
            for (name, value, table) in tables {
                if table.find(value).is_none() {
                    fields.push(FieldError::new(name, format!("{value} is outside every {} bin", profile.sex)));
                }
            }
        }
        if fields.is_empty() {
            Ok(())
        } else {
            Err(ProfileError { fields })
        }
    }

    /// Points of one feature. Sex and treatment carry no points of their own;
    /// treatment only selects the SBP column.
    pub fn feature_points(&self, sex: Sex, feature: FeatureId, profile: &PatientProfile) -> Result<i32, ScoreError> {
        let s = self.get(sex);
        let lookup = |table: &crate::schedule::BinTable, value: i32| {
            table.points(value).ok_or(ScoreError::OutOfDomain { sex, feature, value })
        };
        match feature {
            FeatureId::Sex | FeatureId::Treatment => Ok(0),
            FeatureId::Age => lookup(s.age(), profile.age),
            FeatureId::Hdl => lookup(s.hdl(), profile.hdl),
            FeatureId::TotalChol => lookup(s.total_chol(), profile.total_chol),
            FeatureId::Sbp => lookup(s.sbp(profile.treated_sbp), profile.sbp),
            FeatureId::Smoker => Ok(s.smoker().points(profile.smoker)),
            FeatureId::Diabetic => Ok(s.diabetic().points(profile.diabetic)),
        }
    }

    pub fn total_points(&self, profile: &PatientProfile) -> Result<ScoreBreakdown, ScoreError> {
        let p = |f| self.feature_points(profile.sex, f, profile);
        let mut b = ScoreBreakdown {
            age: p(FeatureId::Age)?,
            hdl: p(FeatureId::Hdl)?,
            total_chol: p(FeatureId::TotalChol)?,
            sbp: p(FeatureId::Sbp)?,
            smoker: p(FeatureId::Smoker)?,
            diabetic: p(FeatureId::Diabetic)?,
            total: 0,
        };
        b.total = b.age + b.hdl + b.total_chol + b.sbp + b.smoker + b.diabetic;
        Ok(b)
    }

    /// Risk row covering `total`. The outer rows are open-ended, so every
    /// integer total has a row.
    pub fn risk_percent(&self, sex: Sex, total: i32) -> RiskPercent {
        self.get(sex).risk().lookup(total)
    }

    pub fn categorize(&self, sex: Sex, rp: RiskPercent) -> RiskCategory {
        self.get(sex).categories().categorize(rp)
    }

    pub fn assess(&self, profile: &PatientProfile) -> Result<Assessment, ScoreError> {
        let breakdown = self.total_points(profile)?;
        let percent = self.risk_percent(profile.sex, breakdown.total);
        Ok(Assessment { breakdown, percent, category: self.categorize(profile.sex, percent) })
    }
}
