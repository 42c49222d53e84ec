//! Abductive and counterfactual explanations.
//!
//! Abduction is deletion-based: start with every feature fixed and free
//! one at a time, keeping a feature free whenever the rest still entails
//! the original category. Counterfactuals run the other way: start from
//! the immutable features and fix each mutable feature in turn as long as
//! the target stays reachable. Whatever could not be fixed is the change
//! set. Both results are subset-minimal with respect to single removals,
//! and both depend on the iteration order.

use serde::{Deserialize, Serialize};

use crate::error::ExplainError;
use crate::logic::{CategoryPredicate, Engine, PartialInstance};
use crate::profile::{FeatureId, FeatureSet, PatientProfile};
use crate::schedule::RiskCategory;

/// Which decision route the explainers query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Interval bounds and reachable totals.
    #[default]
    Fast,
    /// Enumeration of completions.
    BruteForce,
}

impl Backend {
    fn entails(self, engine: &Engine, p: &PartialInstance, pred: CategoryPredicate) -> bool {
        match self {
            Backend::Fast => engine.entails_category_fast(p, pred),
            Backend::BruteForce => engine.entails_category(p, pred),
        }
    }

    fn satisfiable(self, engine: &Engine, p: &PartialInstance, pred: CategoryPredicate) -> bool {
        match self {
            Backend::Fast => engine.is_satisfiable_fast(p, pred),
            Backend::BruteForce => engine.satisfiable(p, pred).is_some(),
        }
    }
}

/// Features a counterfactual may change. Sex and age never are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "FeatureSet", into = "FeatureSet")]
pub struct MutabilityPolicy {
    mutable: FeatureSet,
}

impl MutabilityPolicy {
    pub fn new(mutable: FeatureSet) -> Result<Self, ExplainError> {
        for f in [FeatureId::Sex, FeatureId::Age] {
            if mutable.contains(f) {
                return Err(ExplainError::ImmutableFeature(f));
            }
        }
        Ok(Self { mutable })
    }

    /// Everything except sex and age.
    pub fn age_sex_only() -> Self {
        Self { mutable: FeatureSet::all().without(FeatureId::Sex).without(FeatureId::Age) }
    }

    pub fn mutable(&self) -> FeatureSet {
        self.mutable
    }

    pub fn immutable(&self) -> FeatureSet {
        self.mutable.complement()
    }

    pub fn allows(&self, f: FeatureId) -> bool {
        self.mutable.contains(f)
    }
}

/// Diabetes is treated as immutable alongside sex and age.
impl Default for MutabilityPolicy {
    fn default() -> Self {
        Self { mutable: Self::age_sex_only().mutable.without(FeatureId::Diabetic) }
    }
}

impl TryFrom<FeatureSet> for MutabilityPolicy {
    type Error = ExplainError;
    fn try_from(s: FeatureSet) -> Result<Self, Self::Error> {
        Self::new(s)
    }
}

impl From<MutabilityPolicy> for FeatureSet {
    fn from(p: MutabilityPolicy) -> Self {
        p.mutable
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AbductiveExplanation {
    pub features: FeatureSet,
    pub category: RiskCategory,
    pub order_used: Vec<FeatureId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CounterfactualExplanation {
    pub changed: FeatureSet,
    pub target: CategoryPredicate,
    pub witness: PatientProfile,
    pub original_category: RiskCategory,
}

/// How the counterfactual target is chosen for a given category.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetRule {
    /// One category down.
    #[default]
    NextLower,
    /// A fixed category; profiles already at or below it need nothing.
    Category(RiskCategory),
}

impl TargetRule {
    /// `None` when the category already meets the rule.
    pub fn resolve(self, category: RiskCategory) -> Option<CategoryPredicate> {
        match self {
            TargetRule::NextLower => default_target(category).ok(),
            TargetRule::Category(c) if category > c => Some(CategoryPredicate::Equals(c)),
            TargetRule::Category(_) => None,
        }
    }
}

impl std::str::FromStr for TargetRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "next-lower" | "next_lower" => Ok(TargetRule::NextLower),
            other => other.parse().map(TargetRule::Category).map_err(|_| {
                format!("unknown target '{other}' (expected next-lower, low or moderate)")
            }),
        }
    }
}

pub fn default_target(category: RiskCategory) -> Result<CategoryPredicate, ExplainError> {
    category.lower().map(CategoryPredicate::Equals).ok_or(ExplainError::NoLowerCategory)
}

fn check_permutation(order: &[FeatureId]) -> Result<(), ExplainError> {
    let set: FeatureSet = order.iter().copied().collect();
    if order.len() != FeatureId::ALL.len() || set != FeatureSet::all() {
        return Err(ExplainError::BadOrder(order.to_vec()));
    }
    Ok(())
}

pub fn abduce(engine: &Engine, profile: &PatientProfile, order: &[FeatureId]) -> Result<AbductiveExplanation, ExplainError> {
    abduce_with(engine, profile, order, Backend::Fast)
}

pub fn abduce_with(
    engine: &Engine,
    profile: &PatientProfile,
    order: &[FeatureId],
    backend: Backend,
) -> Result<AbductiveExplanation, ExplainError> {
    check_permutation(order)?;
    let mut current = engine.partial(*profile, FeatureSet::all())?;
    let category = engine.category(profile);
    let goal = CategoryPredicate::Equals(category);
    for &f in order {
        let candidate = current.unfix(f);
        if backend.entails(engine, &candidate, goal) {
            current = candidate;
        }
    }
    Ok(AbductiveExplanation { features: current.fixed(), category, order_used: order.to_vec() })
}

pub fn counterfact(
    engine: &Engine,
    profile: &PatientProfile,
    target: CategoryPredicate,
    policy: &MutabilityPolicy,
    order: &[FeatureId],
) -> Result<CounterfactualExplanation, ExplainError> {
    counterfact_with(engine, profile, target, policy, order, Backend::Fast)
}

pub fn counterfact_with(
    engine: &Engine,
    profile: &PatientProfile,
    target: CategoryPredicate,
    policy: &MutabilityPolicy,
    order: &[FeatureId],
    backend: Backend,
) -> Result<CounterfactualExplanation, ExplainError> {
    let listed: FeatureSet = order.iter().copied().collect();
    if listed.len() != order.len() {
        return Err(ExplainError::BadOrder(order.to_vec()));
    }
    if let Some(missing) = policy.mutable().iter().find(|f| !listed.contains(*f)) {
        return Err(ExplainError::OrderMissesMutable(missing));
    }
    let mut kept = engine.partial(*profile, policy.immutable())?;
    let original_category = engine.category(profile);
    if target.holds(original_category) {
        return Err(ExplainError::AlreadyAtTarget);
    }
    if !backend.satisfiable(engine, &kept, target) {
        return Err(ExplainError::Unreachable);
    }
    for &f in order.iter().filter(|f| policy.allows(**f)) {
        let candidate = kept.fix(f);
        if backend.satisfiable(engine, &candidate, target) {
            kept = candidate;
        }
    }
    let witness = engine.satisfiable(&kept, target).expect("target was satisfiable for this fixed set");
    Ok(CounterfactualExplanation {
        changed: kept.free(),
        target,
        witness,
        original_category,
    })
}

/// Sufficiency and 1-minimality of an abductive set.
pub fn check_abductive(
    engine: &Engine,
    profile: &PatientProfile,
    explanation: &AbductiveExplanation,
    backend: Backend,
) -> Result<(), String> {
    let p = engine.partial(*profile, explanation.features).map_err(|e| e.to_string())?;
    let goal = CategoryPredicate::Equals(explanation.category);
    if !backend.entails(engine, &p, goal) {
        return Err(format!("{} does not entail {goal}", explanation.features));
    }
    for f in explanation.features.iter() {
        if backend.entails(engine, &p.unfix(f), goal) {
            return Err(format!("{} is redundant in {}", f, explanation.features));
        }
    }
    Ok(())
}

/// Validity and necessity of a counterfactual change set.
pub fn check_counterfactual(
    engine: &Engine,
    profile: &PatientProfile,
    explanation: &CounterfactualExplanation,
    backend: Backend,
) -> Result<(), String> {
    let changed = explanation.changed;
    let moved = profile.diff(&explanation.witness);
    if !moved.is_subset(changed) {
        return Err(format!("witness changes {moved} outside {changed}"));
    }
    if !explanation.target.holds(engine.category(&explanation.witness)) {
        return Err(format!("witness misses target {}", explanation.target));
    }
    let p = engine.partial(*profile, changed.complement()).map_err(|e| e.to_string())?;
    for f in changed.iter() {
        if backend.satisfiable(engine, &p.fix(f), explanation.target) {
            return Err(format!("{f} is unnecessary in {changed}"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedule::Sex;
    use FeatureId::*;

    fn worked() -> PatientProfile {
        PatientProfile {
            sex: Sex::Male,
            age: 70,
            hdl: 30,
            total_chol: 283,
            sbp: 170,
            treated_sbp: false,
            smoker: false,
            diabetic: true,
        }
    }

    #[test]
    fn worked_example_abduction() {
        let e = Engine::bundled();
        let a = abduce(&e, &worked(), &FeatureId::ALL).unwrap();
        assert_eq!(a.features, [Age, Sbp, Diabetic].into_iter().collect());
        assert_eq!(a.category, RiskCategory::High);
        check_abductive(&e, &worked(), &a, Backend::BruteForce).unwrap();
        let b = abduce_with(&e, &worked(), &FeatureId::ALL, Backend::BruteForce).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bad_orders_rejected() {
        let e = Engine::bundled();
        assert!(matches!(abduce(&e, &worked(), &[Age, Sbp]), Err(ExplainError::BadOrder(_))));
        let dup = [Sex, Sex, Hdl, TotalChol, Sbp, Treatment, Smoker, Diabetic];
        assert!(matches!(abduce(&e, &worked(), &dup), Err(ExplainError::BadOrder(_))));
        let r = counterfact(&e, &worked(), CategoryPredicate::Equals(RiskCategory::Moderate), &MutabilityPolicy::default(), &[Hdl]);
        assert_eq!(r.unwrap_err(), ExplainError::OrderMissesMutable(TotalChol));
    }

    #[test]
    fn policy_rejects_sex_and_age() {
        assert_eq!(MutabilityPolicy::new(FeatureSet::empty().with(Age)).unwrap_err(), ExplainError::ImmutableFeature(Age));
        assert!(MutabilityPolicy::new(FeatureSet::empty().with(Sbp)).is_ok());
        let d = MutabilityPolicy::default();
        assert_eq!(d.mutable().iter().collect::<Vec<_>>(), [Hdl, TotalChol, Sbp, Treatment, Smoker]);
        assert_eq!(MutabilityPolicy::age_sex_only().mutable().len(), 6);
    }

    #[test]
    fn default_targets() {
        assert_eq!(default_target(RiskCategory::High), Ok(CategoryPredicate::Equals(RiskCategory::Moderate)));
        assert_eq!(default_target(RiskCategory::Moderate), Ok(CategoryPredicate::Equals(RiskCategory::Low)));
        assert_eq!(default_target(RiskCategory::Low), Err(ExplainError::NoLowerCategory));
        assert_eq!(TargetRule::Category(RiskCategory::Low).resolve(RiskCategory::Low), None);
        assert_eq!("moderate".parse::<TargetRule>(), Ok(TargetRule::Category(RiskCategory::Moderate)));
    }

    #[test]
    fn already_at_target() {
        let e = Engine::bundled();
        let low = PatientProfile { age: 30, hdl: 45, total_chol: 150, sbp: 125, diabetic: false, ..worked() };
        assert_eq!(e.category(&low), RiskCategory::Low);
        assert_eq!(default_target(RiskCategory::Low), Err(ExplainError::NoLowerCategory));
        assert_eq!(TargetRule::NextLower.resolve(RiskCategory::Low), None);
        let policy = MutabilityPolicy::default();
        let r = counterfact(&e, &low, CategoryPredicate::AtMost(RiskCategory::Low), &policy, &FeatureId::ALL);
        assert_eq!(r.unwrap_err(), ExplainError::AlreadyAtTarget);
        // no category lies below low
        let r = counterfact(&e, &low, CategoryPredicate::StrictlyBelow(RiskCategory::Low), &policy, &FeatureId::ALL);
        assert_eq!(r.unwrap_err(), ExplainError::Unreachable);
    }

    #[test]
    fn unreachable_low_for_old_diabetic_man() {
        let e = Engine::bundled();
        let p = PatientProfile { age: 75, ..worked() };
        let r = counterfact(&e, &p, CategoryPredicate::Equals(RiskCategory::Low), &MutabilityPolicy::default(), &FeatureId::ALL);
        assert_eq!(r.unwrap_err(), ExplainError::Unreachable);
    }
}
