//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use frs_core::explain::{check_abductive, check_counterfactual};
use frs_core::sweep::{aggregate, generate_grid, published, sweep_collect, CounterfactualOutcome, SweepConfig};
use frs_core::{
    abduce, AbductiveExplanation, Backend, CategoryPredicate, CounterfactualExplanation, Engine, FeatureId, FeatureSet,
    RiskCategory, RiskPercent, Sex,
};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

type Check = Result<String, String>;
type Criterion = (&'static str, fn(&Engine) -> Check);

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn worked_example_score(e: &Engine) -> Check {
    let a = e.schedules().assess(&worked_example()).map_err(|x| x.to_string())?;
    ensure(a.breakdown.total == 26, format!("total {}", a.breakdown.total))?;
    ensure(a.percent == RiskPercent::GreaterThanThirty, format!("risk {}", a.percent))?;
    ensure(a.category == RiskCategory::High, format!("category {}", a.category))?;
    Ok("total 26, risk >30%, High".into())
}

fn worked_example_abduction(e: &Engine) -> Check {
    let a = abduce(e, &worked_example(), &FeatureId::ALL).map_err(|x| x.to_string())?;
    let want: FeatureSet = [FeatureId::Age, FeatureId::Sbp, FeatureId::Diabetic].into_iter().collect();
    ensure(a.features == want, format!("got {}", a.features))?;
    let minimal = minimal_sufficient_sets(e, &worked_example());
    ensure(minimal.contains(&want), format!("not minimal; minimal sets {minimal:?}"))?;
    Ok(format!("{} (minimal among 256 subsets)", a.features))
}

fn grid_cardinality(e: &Engine) -> Check {
    let male = generate_grid(e, &[Sex::Male]).count();
    let female = generate_grid(e, &[Sex::Female]).count();
    let all = generate_grid(e, &Sex::ALL).count();
    ensure((male, female, all) == (10_000, 12_000, 22_000), format!("{male} + {female} = {all}"))?;
    Ok(format!("{male} + {female} = {all}"))
}

fn full_grid_properties(e: &Engine) -> Check {
    let config = SweepConfig { verify: false, ..SweepConfig::default() };
    let start = Instant::now();
    let records = sweep_collect(e, &Sex::ALL, &config).map_err(|x| x.to_string())?;
    let sweep_time = start.elapsed();
    let mut counterfactuals = 0;
    for r in &records {
        let a = AbductiveExplanation { features: r.abductive, category: r.category, order_used: config.order.clone() };
        check_abductive(e, &r.profile, &a, Backend::Fast).map_err(|m| format!("{}: {m}", r.profile))?;
        match (&r.counterfactual, r.category) {
            (CounterfactualOutcome::Changed { changed, witness }, c) => {
                let target = CategoryPredicate::Equals(c.lower().ok_or("low instance has a change set")?);
                let cf = CounterfactualExplanation { changed: *changed, target, witness: *witness, original_category: c };
                check_counterfactual(e, &r.profile, &cf, Backend::Fast).map_err(|m| format!("{}: {m}", r.profile))?;
                ensure(
                    !changed.contains(FeatureId::Sex) && !changed.contains(FeatureId::Age),
                    format!("{}: change set {changed}", r.profile),
                )?;
                counterfactuals += 1;
            }
            (CounterfactualOutcome::AlreadyAtTarget, c) => ensure(c == RiskCategory::Low, "non-low skipped")?,
            (CounterfactualOutcome::Unreachable, c) => {
                let target = CategoryPredicate::Equals(c.lower().ok_or("low instance unreachable")?);
                let p = e.partial(r.profile, config.policy.immutable()).map_err(|x| x.to_string())?;
                ensure(!e.is_satisfiable_fast(&p, target), format!("{}: reported unreachable", r.profile))?;
            }
        }
    }
    let total = start.elapsed();
    ensure(total < Duration::from_secs(300), format!("took {total:?}"))?;
    Ok(format!(
        "{} abductive and {counterfactuals} counterfactual explanations verified; sweep {:.1}s, with checks {:.1}s",
        records.len(),
        sweep_time.as_secs_f64(),
        total.as_secs_f64()
    ))
}

fn oracle_equivalence(e: &Engine) -> Check {
    let mut rng = StdRng::seed_from_u64(2024);
    let grid: Vec<_> = generate_grid(e, &Sex::ALL).collect();
    let predicates: Vec<CategoryPredicate> = RiskCategory::ALL
        .into_iter()
        .flat_map(|c| [CategoryPredicate::Equals(c), CategoryPredicate::AtMost(c), CategoryPredicate::StrictlyBelow(c)])
        .collect();
    let mut checks = 0;
    for _ in 0..500 {
        let r = *grid.choose(&mut rng).unwrap();
        let fixed = FeatureSet::from_bits(rng.gen());
        let pred = *predicates.choose(&mut rng).unwrap();
        let p = e.partial(r, fixed).map_err(|x| x.to_string())?;
        let cats: Vec<RiskCategory> = assignments(e, &r, fixed).iter().map(|c| category(e, c)).collect();
        let entails = cats.iter().all(|c| pred.holds(*c));
        let sat_negation = cats.iter().any(|c| pred.negate().passes(*c));
        ensure(e.entails_category_fast(&p, pred) == entails, format!("{r} fixed {fixed} {pred}: fast disagrees"))?;
        ensure(e.entails_category(&p, pred) == entails, format!("{r} fixed {fixed} {pred}: enumeration disagrees"))?;
        ensure(entails == !sat_negation, "oracle duality")?;
        ensure(e.is_satisfiable_fast(&p, pred.negate()) == sat_negation, format!("{r} fixed {fixed}: duality"))?;
        ensure(e.satisfiable(&p, pred.negate()).is_some() == sat_negation, format!("{r} fixed {fixed}: witness"))?;
        checks += 1;
    }
    Ok(format!("{checks} random partial instances agree; duality holds"))
}

fn statistics(e: &Engine) -> Check {
    let records = sweep_collect(e, &Sex::ALL, &SweepConfig::default()).map_err(|x| x.to_string())?;
    let report = aggregate(&records);
    let presence = |f| report.abductive.presence.iter().find(|r| r.feature == f).map(|r| r.percent).unwrap_or(0.0);
    let ge5 = report.abductive.share_at_least_5;
    let le2 = report.counterfactual.share_at_most_2;
    let age = presence(FeatureId::Age);
    let sbp = presence(FeatureId::Sbp);
    let summary = format!("abductive >=5: {ge5:.2}%, counterfactual <=2: {le2:.2}%, age {age:.2}%, sbp {sbp:.2}%");
    ensure(ge5 >= 70.0 && le2 >= 75.0 && age >= 95.0 && sbp >= 85.0, summary.clone())?;
    let text = report.render_text();
    let mut cells: Vec<String> = Vec::new();
    cells.extend(published::ABDUCTIVE_SPARSITY.iter().map(|r| format!("{:.2}", r.1)));
    cells.extend(published::COUNTERFACTUAL_SPARSITY.iter().map(|r| format!("{:.2}", r.1)));
    for (_, count, pct) in published::ABDUCTIVE_PRESENCE.iter().chain(published::COUNTERFACTUAL_PRESENCE.iter()) {
        cells.push(count.to_string());
        cells.push(format!("{pct:.2}"));
    }
    for c in &cells {
        ensure(text.contains(c.as_str()), format!("report lacks published cell {c}"))?;
    }
    let rows = report.abductive.sparsity.iter().chain(&report.counterfactual.sparsity);
    ensure(rows.filter(|r| r.published_percent.is_some()).all(|r| r.delta.is_some()), "sparsity row without delta")?;
    let rows = report.abductive.presence.iter().chain(&report.counterfactual.presence);
    ensure(rows.filter(|r| r.published_percent.is_some()).all(|r| r.delta.is_some()), "presence row without delta")?;
    Ok(format!("{summary}; report shows {} published cells with deltas", cells.len()))
}

fn bin_representatives(e: &Engine) -> Check {
    let mut bins = 0;
    for sex in Sex::ALL {
        let s = e.schedules().get(sex);
        let d = e.domains().get(sex);
        let tables = [
            ("age", s.age(), &d.age),
            ("hdl", s.hdl(), &d.hdl),
            ("total_chol", s.total_chol(), &d.total_chol),
            ("sbp", s.sbp(false), &d.sbp),
            ("sbp treated", s.sbp(true), &d.sbp),
        ];
        for (name, t, reps) in tables {
            for b in t.bins() {
                ensure(reps.iter().any(|v| t.find(*v) == Some(b)), format!("{sex} {name} {b}: no representative"))?;
                let lo = b.min.unwrap_or_else(|| b.max.unwrap() - 50);
                let hi = b.max.map_or(lo + 50, |m| m - 1);
                ensure(lo < hi, format!("{sex} {name} {b}: single-value bin"))?;
                for v in [lo, hi, (lo + hi) / 2] {
                    ensure(t.points(v) == Some(b.points), format!("{sex} {name} {b}: {v} scores {:?}", t.points(v)))?;
                }
                bins += 1;
            }
        }
    }
    Ok(format!("{bins} bins, each has a representative and every in-bin probe scores its points"))
}

fn main() -> ExitCode {
    let e = Engine::bundled();
    let criteria: [Criterion; 7] = [
        ("worked example score", worked_example_score),
        ("worked example abductive explanation", worked_example_abduction),
        ("grid cardinality", grid_cardinality),
        ("full-grid explanation properties", full_grid_properties),
        ("oracle equivalence and duality", oracle_equivalence),
        ("explanation statistics", statistics),
        ("bin representative exactness", bin_representatives),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check(&e) {
            Ok(detail) => println!("[PASS] AC{} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] AC{} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
