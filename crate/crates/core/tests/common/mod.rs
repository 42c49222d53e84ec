#![allow(dead_code)]

//! Test-only oracles. They enumerate assignments with plain nested loops and
//! score through the schedule tables, sharing no code with the engine's
//! completion iterator or interval bounds.

use frs_core::{CategoryPredicate, Engine, FeatureId, FeatureSet, PatientProfile, RiskCategory, Sex};

pub fn worked_example() -> PatientProfile {
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

/// Male 55, smoker, TC 210, HDL 45, SBP 150 untreated: 18 points.
pub fn eighteen_point_high() -> PatientProfile {
    PatientProfile {
        sex: Sex::Male,
        age: 55,
        hdl: 45,
        total_chol: 210,
        sbp: 150,
        treated_sbp: false,
        smoker: true,
        diabetic: false,
    }
}

fn pick<T: Copy>(fixed: bool, reference: T, domain: &[T]) -> Vec<T> {
    if fixed {
        vec![reference]
    } else {
        domain.to_vec()
    }
}

/// Every assignment agreeing with `reference` on `fixed`.
pub fn assignments(engine: &Engine, reference: &PatientProfile, fixed: FeatureSet) -> Vec<PatientProfile> {
    let mut out = Vec::new();
    for sex in pick(fixed.contains(FeatureId::Sex), reference.sex, &[Sex::Male, Sex::Female]) {
        let d = engine.domains().get(sex);
        for age in pick(fixed.contains(FeatureId::Age), reference.age, &d.age) {
            for hdl in pick(fixed.contains(FeatureId::Hdl), reference.hdl, &d.hdl) {
                for total_chol in pick(fixed.contains(FeatureId::TotalChol), reference.total_chol, &d.total_chol) {
                    for sbp in pick(fixed.contains(FeatureId::Sbp), reference.sbp, &d.sbp) {
                        for treated_sbp in pick(fixed.contains(FeatureId::Treatment), reference.treated_sbp, &[false, true]) {
                            for smoker in pick(fixed.contains(FeatureId::Smoker), reference.smoker, &[false, true]) {
                                for diabetic in pick(fixed.contains(FeatureId::Diabetic), reference.diabetic, &[false, true]) {
                                    out.push(PatientProfile { sex, age, hdl, total_chol, sbp, treated_sbp, smoker, diabetic });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

pub fn category(engine: &Engine, p: &PatientProfile) -> RiskCategory {
    engine.schedules().assess(p).unwrap().category
}

pub fn oracle_entails(engine: &Engine, reference: &PatientProfile, fixed: FeatureSet, pred: CategoryPredicate) -> bool {
    assignments(engine, reference, fixed).iter().all(|p| pred.holds(category(engine, p)))
}

pub fn oracle_satisfiable(engine: &Engine, reference: &PatientProfile, fixed: FeatureSet, pred: CategoryPredicate) -> bool {
    assignments(engine, reference, fixed).iter().any(|p| pred.holds(category(engine, p)))
}

pub fn all_subsets() -> impl Iterator<Item = FeatureSet> {
    (0u16..256).map(|b| FeatureSet::from_bits(b as u8))
}

/// Every sufficient feature set of `profile` that has no sufficient proper
/// subset, found by checking all 256 subsets.
pub fn minimal_sufficient_sets(engine: &Engine, profile: &PatientProfile) -> Vec<FeatureSet> {
    let goal = CategoryPredicate::Equals(category(engine, profile));
    let sufficient: Vec<FeatureSet> =
        all_subsets().filter(|s| oracle_entails(engine, profile, *s, goal)).collect();
    sufficient
        .iter()
        .copied()
        .filter(|s| !sufficient.iter().any(|t| t != s && t.is_subset(*s)))
        .collect()
}

/// Change sets within `mutable` that reach `target`, with no valid proper subset.
pub fn minimal_change_sets(
    engine: &Engine,
    profile: &PatientProfile,
    mutable: FeatureSet,
    target: CategoryPredicate,
) -> Vec<FeatureSet> {
    let valid: Vec<FeatureSet> = all_subsets()
        .filter(|s| s.is_subset(mutable))
        .filter(|s| oracle_satisfiable(engine, profile, s.complement(), target))
        .collect();
    valid.iter().copied().filter(|s| !valid.iter().any(|t| t != s && t.is_subset(*s))).collect()
}
