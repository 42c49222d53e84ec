//! Exhaustive grid sweep and summary statistics.
//!
//! [`generate_grid`] enumerates every combination of representative values,
//! [`sweep`] explains each profile and hands records to a sink in grid
//! order, and [`Aggregator`] folds records into a [`SweepReport`].

use std::fmt::Write as _;
use std::io::{Read, Write};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{ExplainError, SweepError};
use crate::explain::{
    abduce, check_abductive, check_counterfactual, counterfact, Backend, MutabilityPolicy, TargetRule,
};
use crate::logic::Engine;
use crate::profile::{FeatureId, FeatureSet, FeatureValue, PatientProfile};
use crate::schedule::{RiskCategory, RiskPercent, Sex};

/// Every representative profile of the given sexes, sex by sex, in
/// canonical order.
pub fn generate_grid<'a>(engine: &'a Engine, sexes: &[Sex]) -> impl Iterator<Item = PatientProfile> + 'a {
    let sexes = sexes.to_vec();
    sexes.into_iter().flat_map(move |sex| {
        let d = engine.domains().get(sex);
        let seed = PatientProfile {
            sex,
            age: d.age[0],
            hdl: d.hdl[0],
            total_chol: d.total_chol[0],
            sbp: d.sbp[0],
            treated_sbp: false,
            smoker: false,
            diabetic: false,
        };
        let p = engine
            .partial(seed, FeatureSet::empty().with(FeatureId::Sex))
            .expect("representatives lie inside their bins");
        engine.completions(&p)
    })
}

pub fn grid_size(engine: &Engine, sexes: &[Sex]) -> usize {
    sexes.iter().map(|s| engine.domains().get(*s).grid_size()).sum()
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub order: Vec<FeatureId>,
    pub policy: MutabilityPolicy,
    pub target: TargetRule,
    /// Re-check every explanation against its invariants.
    pub verify: bool,
    pub chunk_size: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            order: FeatureId::ALL.to_vec(),
            policy: MutabilityPolicy::default(),
            target: TargetRule::NextLower,
            verify: true,
            chunk_size: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CounterfactualOutcome {
    Changed { changed: FeatureSet, witness: PatientProfile },
    AlreadyAtTarget,
    Unreachable,
}

impl CounterfactualOutcome {
    pub fn status(&self) -> &'static str {
        match self {
            CounterfactualOutcome::Changed { .. } => "changed",
            CounterfactualOutcome::AlreadyAtTarget => "already_at_target",
            CounterfactualOutcome::Unreachable => "unreachable",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InstanceRecord {
    pub profile: PatientProfile,
    pub total: i32,
    pub percent: RiskPercent,
    pub category: RiskCategory,
    pub abductive: FeatureSet,
    pub counterfactual: CounterfactualOutcome,
}

/// Explains one profile, optionally verifying both explanations.
pub fn explain_instance(engine: &Engine, profile: &PatientProfile, config: &SweepConfig) -> Result<InstanceRecord, SweepError> {
    let assessment = engine.schedules().assess(profile).map_err(|e| SweepError::Invariant {
        profile: profile.to_string(),
        detail: e.to_string(),
    })?;
    let abductive = abduce(engine, profile, &config.order)?;
    let invariant = |detail: String| SweepError::Invariant { profile: profile.to_string(), detail };
    if config.verify {
        check_abductive(engine, profile, &abductive, Backend::Fast).map_err(invariant)?;
    }
    let counterfactual = match config.target.resolve(assessment.category) {
        None => CounterfactualOutcome::AlreadyAtTarget,
        Some(target) => match counterfact(engine, profile, target, &config.policy, &config.order) {
            Ok(cf) => {
                if config.verify {
                    check_counterfactual(engine, profile, &cf, Backend::Fast).map_err(invariant)?;
                    if !cf.changed.is_subset(config.policy.mutable()) {
                        return Err(invariant(format!("change set {} leaves the mutable set", cf.changed)));
                    }
                }
                CounterfactualOutcome::Changed { changed: cf.changed, witness: cf.witness }
            }
            Err(ExplainError::Unreachable) => CounterfactualOutcome::Unreachable,
            Err(ExplainError::AlreadyAtTarget) => CounterfactualOutcome::AlreadyAtTarget,
            Err(e) => return Err(e.into()),
        },
    };
    Ok(InstanceRecord {
        profile: *profile,
        total: assessment.breakdown.total,
        percent: assessment.percent,
        category: assessment.category,
        abductive: abductive.features,
        counterfactual,
    })
}

/// Explains every profile of `grid`, in parallel per chunk, and passes the
/// records to `sink` in grid order. Returns the number of records.
pub fn sweep<I, F>(engine: &Engine, grid: I, config: &SweepConfig, mut sink: F) -> Result<usize, SweepError>
where
    I: IntoIterator<Item = PatientProfile>,
    F: FnMut(&InstanceRecord) -> Result<(), SweepError>,
{
    let mut grid = grid.into_iter();
    let mut count = 0;
    loop {
        let chunk: Vec<PatientProfile> = grid.by_ref().take(config.chunk_size.max(1)).collect();
        if chunk.is_empty() {
            return Ok(count);
        }
        let records: Vec<InstanceRecord> =
            chunk.par_iter().map(|p| explain_instance(engine, p, config)).collect::<Result<_, _>>()?;
        for r in &records {
            sink(r)?;
        }
        count += records.len();
    }
}

pub fn sweep_collect(engine: &Engine, sexes: &[Sex], config: &SweepConfig) -> Result<Vec<InstanceRecord>, SweepError> {
    let mut out = Vec::with_capacity(grid_size(engine, sexes));
    sweep(engine, generate_grid(engine, sexes), config, |r| {
        out.push(r.clone());
        Ok(())
    })?;
    Ok(out)
}

const CSV_HEADER: [&str; 16] = [
    "sex",
    "age",
    "hdl",
    "total_chol",
    "sbp",
    "treated_sbp",
    "smoker",
    "diabetic",
    "total_points",
    "risk_percent",
    "category",
    "abductive",
    "abductive_size",
    "cf_status",
    "cf_changed",
    "cf_witness",
];

/// Streams records as CSV, one row per instance.
pub struct RecordWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(writer: W) -> Result<Self, SweepError> {
        let mut inner = csv::Writer::from_writer(writer);
        inner.write_record(CSV_HEADER)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, r: &InstanceRecord) -> Result<(), SweepError> {
        let p = &r.profile;
        let (changed, witness) = match &r.counterfactual {
            CounterfactualOutcome::Changed { changed, witness } => (
                changed.to_keys(),
                changed.iter().map(|f| format!("{}={}", f.key(), raw_value(witness.get(f)))).collect::<Vec<_>>().join(";"),
            ),
            _ => (String::new(), String::new()),
        };
        self.inner.write_record([
            p.sex.to_string(),
            p.age.to_string(),
            p.hdl.to_string(),
            p.total_chol.to_string(),
            p.sbp.to_string(),
            p.treated_sbp.to_string(),
            p.smoker.to_string(),
            p.diabetic.to_string(),
            r.total.to_string(),
            r.percent.tag(),
            r.category.to_string(),
            r.abductive.to_keys(),
            r.abductive.len().to_string(),
            r.counterfactual.status().to_string(),
            changed,
            witness,
        ])?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W, SweepError> {
        self.inner.flush()?;
        self.inner.into_inner().map_err(|e| SweepError::Io(e.into_error()))
    }
}

fn raw_value(v: FeatureValue) -> String {
    match v {
        FeatureValue::Sex(s) => s.to_string(),
        FeatureValue::Int(i) => i.to_string(),
        FeatureValue::Bool(b) => b.to_string(),
    }
}

fn parse_value(f: FeatureId, s: &str) -> Result<FeatureValue, SweepError> {
    let bad = || SweepError::Record(format!("bad value '{s}' for {f}"));
    Ok(match f {
        FeatureId::Sex => FeatureValue::Sex(s.parse().map_err(|_| bad())?),
        FeatureId::Treatment | FeatureId::Smoker | FeatureId::Diabetic => FeatureValue::Bool(s.parse().map_err(|_| bad())?),
        _ => FeatureValue::Int(s.parse().map_err(|_| bad())?),
    })
}

fn parse_set(s: &str) -> Result<FeatureSet, SweepError> {
    s.split(';').filter(|k| !k.is_empty()).map(|k| k.parse::<FeatureId>().map_err(SweepError::Record)).collect()
}

/// Reads records written by [`RecordWriter`].
pub fn read_records<R: Read>(reader: R) -> Result<Vec<InstanceRecord>, SweepError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        if row.len() != CSV_HEADER.len() {
            return Err(SweepError::Record(format!("expected {} columns, got {}", CSV_HEADER.len(), row.len())));
        }
        let mut profile = PatientProfile {
            sex: Sex::Male,
            age: 0,
            hdl: 0,
            total_chol: 0,
            sbp: 0,
            treated_sbp: false,
            smoker: false,
            diabetic: false,
        };
        for (i, f) in FeatureId::ALL.iter().enumerate() {
            profile.set(*f, parse_value(*f, &row[i])?);
        }
        let int = |i: usize| row[i].parse::<i32>().map_err(|_| SweepError::Record(format!("bad integer '{}'", &row[i])));
        let counterfactual = match &row[13] {
            "changed" => {
                let changed = parse_set(&row[14])?;
                let mut witness = profile;
                for pair in row[15].split(';').filter(|s| !s.is_empty()) {
                    let (k, v) = pair.split_once('=').ok_or_else(|| SweepError::Record(format!("bad witness '{pair}'")))?;
                    let f: FeatureId = k.parse().map_err(SweepError::Record)?;
                    witness.set(f, parse_value(f, v)?);
                }
                CounterfactualOutcome::Changed { changed, witness }
            }
            "already_at_target" => CounterfactualOutcome::AlreadyAtTarget,
            "unreachable" => CounterfactualOutcome::Unreachable,
            other => return Err(SweepError::Record(format!("unknown status '{other}'"))),
        };
        out.push(InstanceRecord {
            profile,
            total: int(8)?,
            percent: RiskPercent::parse_tag(&row[9]).ok_or_else(|| SweepError::Record(format!("bad percent '{}'", &row[9])))?,
            category: row[10].parse().map_err(SweepError::Record)?,
            abductive: parse_set(&row[11])?,
            counterfactual,
        });
    }
    Ok(out)
}

/// Published reference figures for the full 22,000-instance grid.
pub mod published {
    use crate::profile::FeatureId;

    /// Abductive explanation size → percent of all instances.
    pub const ABDUCTIVE_SPARSITY: [(usize, f64); 6] =
        [(3, 4.00), (4, 18.14), (5, 25.15), (6, 35.97), (7, 16.05), (8, 0.70)];

    /// Feature → (count, percent of all instances) in abductive explanations.
    pub const ABDUCTIVE_PRESENCE: [(FeatureId, u32, f64); 7] = [
        (FeatureId::Age, 21_593, 98.2),
        (FeatureId::Sbp, 20_329, 92.4),
        (FeatureId::Smoker, 15_662, 71.2),
        (FeatureId::Hdl, 14_588, 66.3),
        (FeatureId::TotalChol, 13_095, 59.5),
        (FeatureId::Treatment, 11_257, 51.2),
        (FeatureId::Sex, 6_579, 29.9),
    ];

    /// Change-set size → percent of moderate/high instances.
    pub const COUNTERFACTUAL_SPARSITY: [(usize, f64); 6] =
        [(1, 47.17), (2, 35.07), (3, 13.06), (4, 3.32), (5, 0.54), (6, 0.84)];

    /// Feature → (count, percent of moderate/high instances) in change sets.
    pub const COUNTERFACTUAL_PRESENCE: [(FeatureId, u32, f64); 7] = [
        (FeatureId::Sbp, 8_330, 43.7),
        (FeatureId::TotalChol, 8_019, 42.1),
        (FeatureId::Treatment, 5_958, 31.3),
        (FeatureId::Hdl, 4_983, 26.2),
        (FeatureId::Smoker, 2_450, 12.9),
        (FeatureId::Sex, 0, 0.0),
        (FeatureId::Age, 0, 0.0),
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SparsityRow {
    pub size: usize,
    pub count: usize,
    pub percent: f64,
    pub published_percent: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PresenceRow {
    pub feature: FeatureId,
    pub count: usize,
    pub percent: f64,
    pub published_count: Option<u32>,
    pub published_percent: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AbductiveSummary {
    pub population: usize,
    pub sparsity: Vec<SparsityRow>,
    pub presence: Vec<PresenceRow>,
    /// Percent of explanations with at least five features.
    pub share_at_least_5: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CounterfactualSummary {
    /// Moderate and high instances.
    pub population: usize,
    pub explained: usize,
    pub unreachable: usize,
    pub sparsity: Vec<SparsityRow>,
    pub presence: Vec<PresenceRow>,
    /// Percent of change sets with at most two features.
    pub share_at_most_2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub instances: usize,
    pub low: usize,
    pub moderate: usize,
    pub high: usize,
    pub abductive: AbductiveSummary,
    pub counterfactual: CounterfactualSummary,
}

/// Streaming reduction of records into a [`SweepReport`].
#[derive(Debug, Clone, Default)]
pub struct Aggregator {
    instances: usize,
    by_category: [usize; 3],
    abd_sizes: [usize; 9],
    abd_presence: [usize; 8],
    cf_population: usize,
    cf_unreachable: usize,
    cf_sizes: [usize; 9],
    cf_presence: [usize; 8],
}

fn pct(count: usize, population: usize) -> f64 {
    if population == 0 {
        0.0
    } else {
        100.0 * count as f64 / population as f64
    }
}

impl Aggregator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, r: &InstanceRecord) {
        self.instances += 1;
        self.by_category[r.category as usize] += 1;
        self.abd_sizes[r.abductive.len()] += 1;
        for f in r.abductive.iter() {
            self.abd_presence[f as usize] += 1;
        }
        if r.category > RiskCategory::Low {
            self.cf_population += 1;
            match &r.counterfactual {
                CounterfactualOutcome::Changed { changed, .. } => {
                    self.cf_sizes[changed.len()] += 1;
                    for f in changed.iter() {
                        self.cf_presence[f as usize] += 1;
                    }
                }
                CounterfactualOutcome::Unreachable => self.cf_unreachable += 1,
                CounterfactualOutcome::AlreadyAtTarget => {}
            }
        }
    }

    pub fn finish(&self) -> SweepReport {
        let sparsity = |sizes: &[usize; 9], population: usize, reference: &[(usize, f64)]| -> Vec<SparsityRow> {
            (0..sizes.len())
                .filter(|&k| sizes[k] > 0 || reference.iter().any(|(s, _)| *s == k))
                .map(|k| {
                    let percent = pct(sizes[k], population);
                    let published = reference.iter().find(|(s, _)| *s == k).map(|(_, p)| *p);
                    SparsityRow { size: k, count: sizes[k], percent, published_percent: published, delta: published.map(|p| percent - p) }
                })
                .collect()
        };
        let presence = |counts: &[usize; 8], population: usize, reference: &[(FeatureId, u32, f64)]| -> Vec<PresenceRow> {
            let mut rows: Vec<PresenceRow> = FeatureId::ALL
                .iter()
                .map(|&f| {
                    let count = counts[f as usize];
                    let percent = pct(count, population);
                    let published = reference.iter().find(|(g, _, _)| *g == f);
                    PresenceRow {
                        feature: f,
                        count,
                        percent,
                        published_count: published.map(|r| r.1),
                        published_percent: published.map(|r| r.2),
                        delta: published.map(|r| percent - r.2),
                    }
                })
                .collect();
            rows.sort_by(|a, b| b.count.cmp(&a.count).then(a.feature.cmp(&b.feature)));
            rows
        };
        let abd_population = self.instances;
        let explained: usize = self.cf_sizes.iter().sum();
        SweepReport {
            instances: self.instances,
            low: self.by_category[0],
            moderate: self.by_category[1],
            high: self.by_category[2],
            abductive: AbductiveSummary {
                population: abd_population,
                sparsity: sparsity(&self.abd_sizes, abd_population, &published::ABDUCTIVE_SPARSITY),
                presence: presence(&self.abd_presence, abd_population, &published::ABDUCTIVE_PRESENCE),
                share_at_least_5: pct(self.abd_sizes[5..].iter().sum(), abd_population),
            },
            counterfactual: CounterfactualSummary {
                population: self.cf_population,
                explained,
                unreachable: self.cf_unreachable,
                sparsity: sparsity(&self.cf_sizes, explained, &published::COUNTERFACTUAL_SPARSITY),
                presence: presence(&self.cf_presence, self.cf_population, &published::COUNTERFACTUAL_PRESENCE),
                share_at_most_2: pct(self.cf_sizes[..=2].iter().sum(), explained),
            },
        }
    }
}

pub fn aggregate<'a>(records: impl IntoIterator<Item = &'a InstanceRecord>) -> SweepReport {
    let mut agg = Aggregator::new();
    for r in records {
        agg.push(r);
    }
    agg.finish()
}

fn opt(v: Option<f64>, signed: bool) -> String {
    match v {
        Some(x) if signed => format!("{x:+.2}"),
        Some(x) => format!("{x:.2}"),
        None => "-".into(),
    }
}

impl SweepReport {
    /// Plain-text tables with published figures and deltas alongside.
    pub fn render_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} instances (low {}, moderate {}, high {})", self.instances, self.low, self.moderate, self.high);
        let sparsity_table = |s: &mut String, title: &str, rows: &[SparsityRow]| {
            let _ = writeln!(s, "\n{title}");
            let _ = writeln!(s, "{:>8} {:>8} {:>9} {:>10} {:>8}", "features", "count", "%", "published", "delta");
            for r in rows {
                let _ = writeln!(
                    s,
                    "{:>8} {:>8} {:>9.2} {:>10} {:>8}",
                    r.size,
                    r.count,
                    r.percent,
                    opt(r.published_percent, false),
                    opt(r.delta, true)
                );
            }
            let sum: f64 = rows.iter().map(|r| r.percent).sum();
            let _ = writeln!(s, "{:>8} {:>8} {:>9.2}", "sum", rows.iter().map(|r| r.count).sum::<usize>(), sum);
        };
        let presence_table = |s: &mut String, title: &str, rows: &[PresenceRow]| {
            let _ = writeln!(s, "\n{title}");
            let _ = writeln!(
                s,
                "{:<24} {:>8} {:>8} {:>10} {:>10} {:>8}",
                "feature", "count", "%", "pub.count", "pub.%", "delta"
            );
            for r in rows {
                let _ = writeln!(
                    s,
                    "{:<24} {:>8} {:>8.2} {:>10} {:>10} {:>8}",
                    r.feature.label(),
                    r.count,
                    r.percent,
                    r.published_count.map_or("-".into(), |c| c.to_string()),
                    opt(r.published_percent, false),
                    opt(r.delta, true)
                );
            }
        };
        sparsity_table(&mut s, "Abductive explanation size (% of all instances)", &self.abductive.sparsity);
        let _ = writeln!(s, "explanations with >= 5 features: {:.2}% (published 77.87%)", self.abductive.share_at_least_5);
        presence_table(&mut s, "Feature presence in abductive explanations (% of all instances)", &self.abductive.presence);
        let cf = &self.counterfactual;
        sparsity_table(
            &mut s,
            &format!("Counterfactual change-set size ({} of {} moderate/high instances explained)", cf.explained, cf.population),
            &cf.sparsity,
        );
        let _ = writeln!(s, "change sets with <= 2 features: {:.2}% (published 82.24%)", cf.share_at_most_2);
        let _ = writeln!(s, "unreachable targets: {}", cf.unreachable);
        presence_table(&mut s, "Feature presence in counterfactual explanations (% of moderate/high instances)", &cf.presence);
        s
    }
}
