//! Point tables, risk tables and category thresholds, loaded from JSON.
//!
//! A [`ScheduleSet`] is the whole scoring model as data: one
//! [`SexSchedule`] per sex, each with banded point tables for the numeric
//! features, fixed points for the boolean features, a points-to-risk table
//! and the category thresholds. Everything is validated on load, so code
//! holding a `ScheduleSet` can rely on contiguous bins and a monotone risk
//! table.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::ScheduleError;

const BUNDLED_MALE: &str = include_str!("../schedules/male.json");
const BUNDLED_FEMALE: &str = include_str!("../schedules/female.json");

/// File names looked up by [`ScheduleSet::from_dir`].
pub const MALE_FILE: &str = "male.json";
pub const FEMALE_FILE: &str = "female.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    pub const ALL: [Sex; 2] = [Sex::Male, Sex::Female];

    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Male => "male",
            Sex::Female => "female",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Sex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Sex {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "male" | "m" => Ok(Sex::Male),
            "female" | "f" => Ok(Sex::Female),
            other => Err(format!("unknown sex '{other}' (expected male or female)")),
        }
    }
}

/// Half-open integer interval `[min, max)` carrying a point value.
/// A missing bound means the bin is open on that side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bin {
    pub min: Option<i32>,
    pub max: Option<i32>,
    pub points: i32,
}

impl Bin {
    pub fn contains(&self, value: i32) -> bool {
        self.min.is_none_or(|lo| value >= lo) && self.max.is_none_or(|hi| value < hi)
    }
}

impl fmt::Display for Bin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.min, self.max) {
            (Some(lo), Some(hi)) => write!(f, "[{lo}, {hi})")?,
            (None, Some(hi)) => write!(f, "<{hi}")?,
            (Some(lo), None) => write!(f, "{lo}+")?,
            (None, None) => write!(f, "(any)")?,
        }
        write!(f, " -> {} pts", self.points)
    }
}

/// The bins of one numeric feature, sorted ascending, disjoint and contiguous.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinTable {
    bins: Vec<Bin>,
}

impl BinTable {
    pub fn new(feature: &str, mut bins: Vec<Bin>) -> Result<Self, ScheduleError> {
        if bins.is_empty() {
            return Err(ScheduleError::EmptyTable { feature: feature.to_owned() });
        }
        for bin in &bins {
            if let (Some(lo), Some(hi)) = (bin.min, bin.max) {
                if lo >= hi {
                    return Err(ScheduleError::EmptyBin { feature: feature.to_owned(), bin: *bin });
                }
            }
        }
        // open-below bins sort first
        bins.sort_by_key(|b| (b.min.is_some(), b.min));
        for pair in bins.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let touches = match (a.max, b.min) {
                (Some(hi), Some(lo)) => hi.cmp(&lo),
                // an open end followed by anything overlaps it
                _ => Ordering::Greater,
            };
            match touches {
                Ordering::Greater => {
                    return Err(ScheduleError::Overlap { feature: feature.to_owned(), first: a, second: b })
                }
                Ordering::Less => {
                    return Err(ScheduleError::Gap { feature: feature.to_owned(), first: a, second: b })
                }
                Ordering::Equal => {}
            }
        }
        Ok(Self { bins })
    }

    pub fn bins(&self) -> &[Bin] {
        &self.bins
    }

    pub fn find(&self, value: i32) -> Option<&Bin> {
        self.bins.iter().find(|b| b.contains(value))
    }

    pub fn points(&self, value: i32) -> Option<i32> {
        self.find(value).map(|b| b.points)
    }

    /// Lowest covered value, or `None` if the table is open below.
    pub fn lower_bound(&self) -> Option<i32> {
        self.bins[0].min
    }

    /// Exclusive upper bound, or `None` if the table is open above.
    pub fn upper_bound(&self) -> Option<i32> {
        self.bins[self.bins.len() - 1].max
    }

    pub fn min_points(&self) -> i32 {
        self.bins.iter().map(|b| b.points).min().unwrap_or(0)
    }

    pub fn max_points(&self) -> i32 {
        self.bins.iter().map(|b| b.points).max().unwrap_or(0)
    }
}

impl Serialize for BinTable {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.bins.serialize(serializer)
    }
}

/// Points for a yes/no feature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoolPoints {
    #[serde(rename = "true")]
    pub yes: i32,
    #[serde(rename = "false")]
    pub no: i32,
}

impl BoolPoints {
    pub fn points(&self, flag: bool) -> i32 {
        if flag {
            self.yes
        } else {
            self.no
        }
    }
}

/// A percentage held exactly, in hundredths of a percent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Percent(i64);

impl Percent {
    pub const fn from_hundredths(h: i64) -> Self {
        Percent(h)
    }

    pub fn from_f64(value: f64) -> Option<Self> {
        if !value.is_finite() {
            return None;
        }
        let scaled = value * 100.0;
        let rounded = scaled.round();
        if (scaled - rounded).abs() > 1e-6 {
            return None;
        }
        Some(Percent(rounded as i64))
    }

    pub fn hundredths(self) -> i64 {
        self.0
    }

    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl fmt::Display for Percent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let whole = self.0 / 100;
        let frac = (self.0 % 100).abs();
        if frac == 0 {
            write!(f, "{whole}")
        } else if frac % 10 == 0 {
            write!(f, "{whole}.{}", frac / 10)
        } else {
            write!(f, "{whole}.{frac:02}")
        }
    }
}

impl Serialize for Percent {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.as_f64())
    }
}

impl<'de> Deserialize<'de> for Percent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(deserializer)?;
        Percent::from_f64(v)
            .ok_or_else(|| de::Error::custom(format!("percent {v} is not a multiple of 0.01")))
    }
}

const ONE_PERCENT: Percent = Percent(100);
const THIRTY_PERCENT: Percent = Percent(3000);

/// Ten-year risk read from the risk table. The two extremes are tags, not
/// numbers; the derived order puts `LessThanOne` below every exact value and
/// `GreaterThanThirty` above.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RiskPercent {
    LessThanOne,
    Exact(Percent),
    GreaterThanThirty,
}

impl RiskPercent {
    /// Tag used in files and on the wire: `"lt1"`, `"gt30"`, or the number.
    pub fn tag(&self) -> String {
        match self {
            RiskPercent::LessThanOne => "lt1".into(),
            RiskPercent::GreaterThanThirty => "gt30".into(),
            RiskPercent::Exact(p) => p.to_string(),
        }
    }

    pub fn parse_tag(s: &str) -> Option<Self> {
        match s {
            "lt1" => Some(RiskPercent::LessThanOne),
            "gt30" => Some(RiskPercent::GreaterThanThirty),
            other => other.parse::<f64>().ok().and_then(Percent::from_f64).map(RiskPercent::Exact),
        }
    }
}

impl fmt::Display for RiskPercent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RiskPercent::LessThanOne => f.write_str("<1%"),
            RiskPercent::GreaterThanThirty => f.write_str(">30%"),
            RiskPercent::Exact(p) => write!(f, "{p}%"),
        }
    }
}

impl Serialize for RiskPercent {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            RiskPercent::LessThanOne => serializer.serialize_str("lt1"),
            RiskPercent::GreaterThanThirty => serializer.serialize_str("gt30"),
            RiskPercent::Exact(p) => p.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for RiskPercent {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Tag(String),
            Number(f64),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Tag(s) => match s.as_str() {
                "lt1" => Ok(RiskPercent::LessThanOne),
                "gt30" => Ok(RiskPercent::GreaterThanThirty),
                other => Err(de::Error::custom(format!(
                    "unknown percent tag '{other}' (expected \"lt1\", \"gt30\" or a number)"
                ))),
            },
            Raw::Number(v) => Percent::from_f64(v)
                .map(RiskPercent::Exact)
                .ok_or_else(|| de::Error::custom(format!("percent {v} is not a multiple of 0.01"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RiskCategory {
    Low,
    Moderate,
    High,
}

impl RiskCategory {
    pub const ALL: [RiskCategory; 3] = [RiskCategory::Low, RiskCategory::Moderate, RiskCategory::High];

    pub fn as_str(self) -> &'static str {
        match self {
            RiskCategory::Low => "low",
            RiskCategory::Moderate => "moderate",
            RiskCategory::High => "high",
        }
    }

    /// The next category down, if any.
    pub fn lower(self) -> Option<RiskCategory> {
        match self {
            RiskCategory::Low => None,
            RiskCategory::Moderate => Some(RiskCategory::Low),
            RiskCategory::High => Some(RiskCategory::Moderate),
        }
    }
}

impl fmt::Display for RiskCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RiskCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(RiskCategory::Low),
            "moderate" => Ok(RiskCategory::Moderate),
            "high" => Ok(RiskCategory::High),
            other => Err(format!("unknown risk category '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryThresholds {
    #[serde(rename = "low_max_percent")]
    pub low_max: Percent,
    #[serde(rename = "high_min_percent")]
    pub high_min: Percent,
}

impl CategoryThresholds {
    /// Below `low_max` is Low, at or above `high_min` is High.
    pub fn categorize(&self, rp: RiskPercent) -> RiskCategory {
        if rp < RiskPercent::Exact(self.low_max) {
            RiskCategory::Low
        } else if rp >= RiskPercent::Exact(self.high_min) {
            RiskCategory::High
        } else {
            RiskCategory::Moderate
        }
    }
}

/// Points-to-risk rows over consecutive totals. The first row also covers
/// every lower total and the last row every higher one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RiskTable {
    first: i32,
    rows: Vec<RiskPercent>,
}

impl RiskTable {
    fn new(sex: Sex, rows: Vec<RiskRow>) -> Result<Self, ScheduleError> {
        if rows.len() < 2 {
            return Err(ScheduleError::RiskRows {
                sex,
                reason: "need at least an open-below and an open-above row".into(),
            });
        }
        let mut sorted: BTreeMap<i32, RiskPercent> = BTreeMap::new();
        for row in &rows {
            if sorted.insert(row.points, row.percent).is_some() {
                return Err(ScheduleError::RiskRows {
                    sex,
                    reason: format!("duplicate row for {} points", row.points),
                });
            }
            if let RiskPercent::Exact(p) = row.percent {
                if p < ONE_PERCENT || p > THIRTY_PERCENT {
                    return Err(ScheduleError::RiskRows {
                        sex,
                        reason: format!("row {} has exact percent {p} outside [1, 30]", row.points),
                    });
                }
            }
        }
        let first = *sorted.keys().next().expect("non-empty");
        let mut prev: Option<(i32, RiskPercent)> = None;
        for (&points, &percent) in &sorted {
            if let Some((pp, pr)) = prev {
                if points != pp + 1 {
                    return Err(ScheduleError::RiskRows {
                        sex,
                        reason: format!("no row between {pp} and {points} points"),
                    });
                }
                if percent < pr {
                    return Err(ScheduleError::NonMonotoneRisk { sex, points, previous: pr, current: percent });
                }
            }
            prev = Some((points, percent));
        }
        Ok(Self { first, rows: sorted.into_values().collect() })
    }

    pub fn lookup(&self, total: i32) -> RiskPercent {
        let idx = (total - self.first).clamp(0, self.rows.len() as i32 - 1);
        self.rows[idx as usize]
    }

    /// Rows as `(points, percent)`; the first is "or fewer", the last "or more".
    pub fn rows(&self) -> impl Iterator<Item = (i32, RiskPercent)> + '_ {
        self.rows.iter().enumerate().map(move |(i, &p)| (self.first + i as i32, p))
    }

    pub fn is_monotone(&self) -> bool {
        self.rows.windows(2).all(|w| w[0] <= w[1])
    }
}

impl Serialize for RiskTable {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<RiskRow> = self.rows().map(|(points, percent)| RiskRow { points, percent }).collect();
        rows.serialize(serializer)
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct RiskRow {
    points: i32,
    percent: RiskPercent,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeatureBlock {
    age: Vec<Bin>,
    hdl: Vec<Bin>,
    total_chol: Vec<Bin>,
    sbp_untreated: Vec<Bin>,
    sbp_treated: Vec<Bin>,
    smoker: BoolPoints,
    diabetic: BoolPoints,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleDocument {
    sex: Sex,
    features: FeatureBlock,
    risk: Vec<RiskRow>,
    categories: CategoryThresholds,
}

/// The complete model for one sex.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SexSchedule {
    pub(crate) sex: Sex,
    pub(crate) age: BinTable,
    pub(crate) hdl: BinTable,
    pub(crate) total_chol: BinTable,
    pub(crate) sbp_untreated: BinTable,
    pub(crate) sbp_treated: BinTable,
    pub(crate) smoker: BoolPoints,
    pub(crate) diabetic: BoolPoints,
    pub(crate) risk: RiskTable,
    pub(crate) categories: CategoryThresholds,
}

impl SexSchedule {
    /// Parses and validates one schedule document.
    pub fn from_json(document: &str) -> Result<Self, ScheduleError> {
        let doc: ScheduleDocument = serde_json::from_str(document)?;
        let sex = doc.sex;
        let f = doc.features;
        let c = doc.categories;
        if c.low_max >= c.high_min {
            return Err(ScheduleError::Thresholds {
                sex,
                reason: format!("low_max_percent {} must be below high_min_percent {}", c.low_max, c.high_min),
            });
        }
        for t in [c.low_max, c.high_min] {
            if t < ONE_PERCENT || t > THIRTY_PERCENT {
                return Err(ScheduleError::Thresholds { sex, reason: format!("threshold {t} outside [1, 30]") });
            }
        }
        Ok(Self {
            sex,
            age: BinTable::new("age", f.age)?,
            hdl: BinTable::new("hdl", f.hdl)?,
            total_chol: BinTable::new("total_chol", f.total_chol)?,
            sbp_untreated: BinTable::new("sbp_untreated", f.sbp_untreated)?,
            sbp_treated: BinTable::new("sbp_treated", f.sbp_treated)?,
            smoker: f.smoker,
            diabetic: f.diabetic,
            risk: RiskTable::new(sex, doc.risk)?,
            categories: c,
        })
    }

    pub fn sex(&self) -> Sex {
        self.sex
    }
    pub fn age(&self) -> &BinTable {
        &self.age
    }
    pub fn hdl(&self) -> &BinTable {
        &self.hdl
    }
    pub fn total_chol(&self) -> &BinTable {
        &self.total_chol
    }
    pub fn sbp(&self, treated: bool) -> &BinTable {
        if treated {
            &self.sbp_treated
        } else {
            &self.sbp_untreated
        }
    }
    pub fn smoker(&self) -> BoolPoints {
        self.smoker
    }
    pub fn diabetic(&self) -> BoolPoints {
        self.diabetic
    }
    pub fn risk(&self) -> &RiskTable {
        &self.risk
    }
    pub fn categories(&self) -> CategoryThresholds {
        self.categories
    }

    /// Smallest and largest achievable point totals.
    pub fn total_range(&self) -> (i32, i32) {
        let sbp_min = self.sbp_untreated.min_points().min(self.sbp_treated.min_points());
        let sbp_max = self.sbp_untreated.max_points().max(self.sbp_treated.max_points());
        let tables = [&self.age, &self.hdl, &self.total_chol];
        let lo = tables.iter().map(|t| t.min_points()).sum::<i32>()
            + sbp_min
            + self.smoker.yes.min(self.smoker.no)
            + self.diabetic.yes.min(self.diabetic.no);
        let hi = tables.iter().map(|t| t.max_points()).sum::<i32>()
            + sbp_max
            + self.smoker.yes.max(self.smoker.no)
            + self.diabetic.yes.max(self.diabetic.no);
        (lo, hi)
    }
}

/// Schedules for both sexes. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScheduleSet {
    male: SexSchedule,
    female: SexSchedule,
}

impl ScheduleSet {
    /// Builds a set from exactly one schedule per sex.
    pub fn from_schedules(schedules: Vec<SexSchedule>) -> Result<Self, ScheduleError> {
        let mut male = None;
        let mut female = None;
        for s in schedules {
            let slot = match s.sex {
                Sex::Male => &mut male,
                Sex::Female => &mut female,
            };
            if slot.is_some() {
                return Err(ScheduleError::DuplicateSex(s.sex));
            }
            *slot = Some(s);
        }
        Ok(Self {
            male: male.ok_or(ScheduleError::MissingSex(Sex::Male))?,
            female: female.ok_or(ScheduleError::MissingSex(Sex::Female))?,
        })
    }

    /// Parses one JSON document per sex, in any order.
    pub fn from_documents<S: AsRef<str>>(documents: &[S]) -> Result<Self, ScheduleError> {
        let schedules =
            documents.iter().map(|d| SexSchedule::from_json(d.as_ref())).collect::<Result<Vec<_>, _>>()?;
        Self::from_schedules(schedules)
    }

    /// Reads `male.json` and `female.json` from a directory.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self, ScheduleError> {
        let dir = dir.as_ref();
        let read = |name: &str| -> Result<SexSchedule, ScheduleError> {
            let path: PathBuf = dir.join(name);
            let text = std::fs::read_to_string(&path)
                .map_err(|source| ScheduleError::Io { path: path.clone(), source })?;
            SexSchedule::from_json(&text).map_err(|e| ScheduleError::InFile { path, source: Box::new(e) })
        };
        Self::from_schedules(vec![read(MALE_FILE)?, read(FEMALE_FILE)?])
    }

    /// The schedules compiled into the crate.
    pub fn bundled() -> Self {
        Self::from_documents(&[BUNDLED_MALE, BUNDLED_FEMALE]).expect("bundled schedules are valid")
    }

    pub fn get(&self, sex: Sex) -> &SexSchedule {
        match sex {
            Sex::Male => &self.male,
            Sex::Female => &self.female,
        }
    }

    /// Overwrites one risk row, bypassing validation.
    #[cfg(test)]
    pub(crate) fn tamper_risk_row(&mut self, sex: Sex, total: i32, percent: RiskPercent) {
        let s = match sex {
            Sex::Male => &mut self.male,
            Sex::Female => &mut self.female,
        };
        let idx = (total - s.risk.first) as usize;
        s.risk.rows[idx] = percent;
    }
}
