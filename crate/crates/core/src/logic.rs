//! Entailment and satisfiability of risk-category statements over partial
//! instances.
//!
//! A [`PartialInstance`] pins some features to a reference profile's values
//! and leaves the rest ranging over their quantized domains. Two decision
//! routes are provided:
//!
//! - enumeration ([`Engine::entails_category`], [`Engine::satisfiable`]):
//!   materialize every completion and score it through the schedule tables;
//! - interval bounds ([`Engine::entails_category_fast`],
//!   [`Engine::is_satisfiable_fast`]): the total is a sum of independent
//!   per-feature contributions (SBP and treatment taken jointly), and the
//!   risk table is monotone, so the minimum and maximum totals decide
//!   entailment and the reachable-total set decides satisfiability.
//!
//! The two routes must agree on every input; the test suites check that.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::domain::FeatureDomain;
use crate::error::{EngineError, ProfileError};
use crate::profile::{FeatureId, FeatureSet, FeatureValue, PatientProfile};
use crate::schedule::{RiskCategory, ScheduleSet, Sex, SexSchedule};

/// A monotone statement about a risk category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "op", content = "category", rename_all = "snake_case")]
pub enum CategoryPredicate {
    Equals(RiskCategory),
    AtMost(RiskCategory),
    StrictlyBelow(RiskCategory),
}

impl CategoryPredicate {
    pub fn holds(self, category: RiskCategory) -> bool {
        match self {
            CategoryPredicate::Equals(c) => category == c,
            CategoryPredicate::AtMost(c) => category <= c,
            CategoryPredicate::StrictlyBelow(c) => category < c,
        }
    }

    pub fn negate(self) -> CategoryTest {
        CategoryTest::Fails(self)
    }
}

impl fmt::Display for CategoryPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CategoryPredicate::Equals(c) => write!(f, "category = {c}"),
            CategoryPredicate::AtMost(c) => write!(f, "category <= {c}"),
            CategoryPredicate::StrictlyBelow(c) => write!(f, "category < {c}"),
        }
    }
}

/// A predicate or its negation, as a satisfiability goal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CategoryTest {
    Holds(CategoryPredicate),
    Fails(CategoryPredicate),
}

impl CategoryTest {
    pub fn passes(self, category: RiskCategory) -> bool {
        match self {
            CategoryTest::Holds(p) => p.holds(category),
            CategoryTest::Fails(p) => !p.holds(category),
        }
    }
}

impl From<CategoryPredicate> for CategoryTest {
    fn from(p: CategoryPredicate) -> Self {
        CategoryTest::Holds(p)
    }
}

/// A reference profile with some features pinned to its values.
///
/// Built through [`Engine::partial`], which validates the reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PartialInstance {
    reference: PatientProfile,
    fixed: FeatureSet,
}

impl PartialInstance {
    pub fn reference(&self) -> &PatientProfile {
        &self.reference
    }

    pub fn fixed(&self) -> FeatureSet {
        self.fixed
    }

    pub fn free(&self) -> FeatureSet {
        self.fixed.complement()
    }

    pub fn is_fixed(&self, f: FeatureId) -> bool {
        self.fixed.contains(f)
    }

    pub fn fix(self, f: FeatureId) -> Self {
        Self { fixed: self.fixed.with(f), ..self }
    }

    pub fn unfix(self, f: FeatureId) -> Self {
        Self { fixed: self.fixed.without(f), ..self }
    }

    pub fn with_fixed(self, fixed: FeatureSet) -> Self {
        Self { fixed, ..self }
    }

    fn sexes(&self) -> &'static [Sex] {
        if self.is_fixed(FeatureId::Sex) {
            match self.reference.sex {
                Sex::Male => &[Sex::Male],
                Sex::Female => &[Sex::Female],
            }
        } else {
            &Sex::ALL
        }
    }
}

/// Category per total over a sex's achievable range.
#[derive(Debug, Clone)]
struct CategoryLut {
    lo: i32,
    categories: Vec<RiskCategory>,
}

impl CategoryLut {
    fn build(schedule: &SexSchedule) -> Self {
        let (lo, hi) = schedule.total_range();
        let categories =
            (lo..=hi).map(|t| schedule.categories().categorize(schedule.risk().lookup(t))).collect();
        Self { lo, categories }
    }

    fn get(&self, total: i32) -> RiskCategory {
        self.categories[(total - self.lo) as usize]
    }
}

/// Point values each contribution group can take for one sex under a
/// partial instance. SBP and treatment form one group.
struct PointGroups {
    groups: [Vec<i32>; 6],
}

/// Decision procedures over an immutable schedule set.
#[derive(Debug, Clone)]
pub struct Engine {
    schedules: ScheduleSet,
    domains: FeatureDomain,
    luts: [CategoryLut; 2],
}

impl Engine {
    /// Refuses schedules whose risk tables are not monotone, or whose
    /// sexes cover different value ranges.
    pub fn new(schedules: ScheduleSet) -> Result<Self, EngineError> {
        for sex in Sex::ALL {
            if !schedules.get(sex).risk().is_monotone() {
                return Err(EngineError::NonMonotoneRisk(sex));
            }
        }
        let (m, f) = (schedules.get(Sex::Male), schedules.get(Sex::Female));
        let pairs = [
            (FeatureId::Age, m.age(), f.age()),
            (FeatureId::Hdl, m.hdl(), f.hdl()),
            (FeatureId::TotalChol, m.total_chol(), f.total_chol()),
            (FeatureId::Sbp, m.sbp(false), f.sbp(false)),
            (FeatureId::Sbp, m.sbp(true), f.sbp(true)),
            (FeatureId::Sbp, m.sbp(false), m.sbp(true)),
        ];
        for (feature, a, b) in pairs {
            if a.lower_bound() != b.lower_bound() || a.upper_bound() != b.upper_bound() {
                return Err(EngineError::IncompatibleDomains { feature });
            }
        }
        let domains = FeatureDomain::from_schedules(&schedules)?;
        let luts = [CategoryLut::build(m), CategoryLut::build(f)];
        Ok(Self { schedules, domains, luts })
    }

    /// Engine over the bundled schedules.
    pub fn bundled() -> Self {
        Self::new(ScheduleSet::bundled()).expect("bundled schedules are consistent")
    }

    pub fn schedules(&self) -> &ScheduleSet {
        &self.schedules
    }

    pub fn domains(&self) -> &FeatureDomain {
        &self.domains
    }

    pub fn partial(&self, reference: PatientProfile, fixed: FeatureSet) -> Result<PartialInstance, ProfileError> {
        self.schedules.validate(&reference)?;
        Ok(PartialInstance { reference, fixed })
    }

    /// Category of a full profile, via the schedule tables.
    pub fn category(&self, profile: &PatientProfile) -> RiskCategory {
        self.schedules.assess(profile).expect("profile inside the schedule domain").category
    }

    /// Every completion of `p`, in canonical order: sex outermost (male
    /// first), then the remaining features in declaration order, each
    /// domain ascending.
    pub fn completions(&self, p: &PartialInstance) -> Completions<'_> {
        Completions { engine: self, partial: *p, sex_pos: 0, axes: Vec::new(), idx: Vec::new(), active: false }
    }

    /// Brute-force entailment: every completion satisfies `pred`.
    pub fn entails_category(&self, p: &PartialInstance, pred: CategoryPredicate) -> bool {
        self.completions(p).all(|c| pred.holds(self.category(&c)))
    }

    /// First completion in canonical order passing `test`.
    pub fn satisfiable(&self, p: &PartialInstance, test: impl Into<CategoryTest>) -> Option<PatientProfile> {
        let test = test.into();
        self.completions(p).find(|c| test.passes(self.category(c)))
    }

    /// Entailment from the minimum and maximum achievable totals.
    pub fn entails_category_fast(&self, p: &PartialInstance, pred: CategoryPredicate) -> bool {
        p.sexes().iter().all(|&sex| {
            let (lo, hi) = self.point_groups(sex, p).bounds();
            let lut = &self.luts[sex.index()];
            // every predicate is an interval of the category order
            pred.holds(lut.get(lo)) && pred.holds(lut.get(hi))
        })
    }

    /// Satisfiability from the set of reachable totals.
    pub fn is_satisfiable_fast(&self, p: &PartialInstance, test: impl Into<CategoryTest>) -> bool {
        let test = test.into();
        p.sexes().iter().any(|&sex| {
            let lut = &self.luts[sex.index()];
            self.point_groups(sex, p).reachable(lut.lo, lut.categories.len()).iter().enumerate().any(
                |(i, &hit)| hit && test.passes(lut.categories[i]),
            )
        })
    }

    fn point_groups(&self, sex: Sex, p: &PartialInstance) -> PointGroups {
        let s = self.schedules.get(sex);
        let d = self.domains.get(sex);
        let r = &p.reference;
        let numeric = |f: FeatureId, table: &crate::schedule::BinTable, value: i32| -> Vec<i32> {
            if p.is_fixed(f) {
                vec![table.points(value).expect("reference inside domain")]
            } else {
                d.ints(f).unwrap().iter().map(|v| table.points(*v).expect("representative in bin")).collect()
            }
        };
        let flag = |f: FeatureId, value: bool| -> Vec<bool> {
            if p.is_fixed(f) {
                vec![value]
            } else {
                vec![false, true]
            }
        };
        let sbp_values: Vec<i32> = if p.is_fixed(FeatureId::Sbp) { vec![r.sbp] } else { d.sbp.clone() };
        let sbp: Vec<i32> = flag(FeatureId::Treatment, r.treated_sbp)
            .into_iter()
            .flat_map(|treated| {
                let table = s.sbp(treated);
                sbp_values.iter().map(move |v| table.points(*v).expect("sbp inside domain"))
            })
            .collect();
        let smoker = flag(FeatureId::Smoker, r.smoker).into_iter().map(|b| s.smoker().points(b)).collect();
        let diabetic = flag(FeatureId::Diabetic, r.diabetic).into_iter().map(|b| s.diabetic().points(b)).collect();
        PointGroups {
            groups: [
                numeric(FeatureId::Age, s.age(), r.age),
                numeric(FeatureId::Hdl, s.hdl(), r.hdl),
                numeric(FeatureId::TotalChol, s.total_chol(), r.total_chol),
                sbp,
                smoker,
                diabetic,
            ],
        }
    }
}

impl PointGroups {
    fn bounds(&self) -> (i32, i32) {
        self.groups.iter().fold((0, 0), |(lo, hi), g| {
            (lo + g.iter().min().copied().unwrap_or(0), hi + g.iter().max().copied().unwrap_or(0))
        })
    }

    /// Reachable totals as flags over `[lo, lo + len)`.
    fn reachable(&self, lo: i32, len: usize) -> Vec<bool> {
        let mut sums: Vec<i32> = vec![0];
        for g in &self.groups {
            let mut next: Vec<i32> = sums.iter().flat_map(|s| g.iter().map(move |p| s + p)).collect();
            next.sort_unstable();
            next.dedup();
            sums = next;
        }
        let mut hit = vec![false; len];
        for s in sums {
            hit[(s - lo) as usize] = true;
        }
        hit
    }
}

/// Iterator over the completions of a partial instance.
pub struct Completions<'a> {
    engine: &'a Engine,
    partial: PartialInstance,
    sex_pos: usize,
    axes: Vec<(FeatureId, Vec<FeatureValue>)>,
    idx: Vec<usize>,
    active: bool,
}

impl Iterator for Completions<'_> {
    type Item = PatientProfile;

    fn next(&mut self) -> Option<PatientProfile> {
        let sexes = self.partial.sexes();
        if !self.active {
            let &sex = sexes.get(self.sex_pos)?;
            let domain = self.engine.domains.get(sex);
            self.axes = self
                .partial
                .free()
                .iter()
                .filter(|f| *f != FeatureId::Sex)
                .map(|f| (f, domain.values(f)))
                .collect();
            self.idx = vec![0; self.axes.len()];
            self.active = true;
        }
        let mut profile = self.partial.reference;
        profile.sex = sexes[self.sex_pos];
        for ((f, values), &i) in self.axes.iter().zip(&self.idx) {
            profile.set(*f, values[i]);
        }
        // odometer, last axis fastest
        let mut carry = true;
        for pos in (0..self.axes.len()).rev() {
            self.idx[pos] += 1;
            if self.idx[pos] < self.axes[pos].1.len() {
                carry = false;
                break;
            }
            self.idx[pos] = 0;
        }
        if carry {
            self.active = false;
            self.sex_pos += 1;
        }
        Some(profile)
    }
}
