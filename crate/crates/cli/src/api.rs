//! Request parsing and response building shared by the command line and the
//! HTTP service, so both report identical values for identical input.

use std::collections::BTreeMap;

use frs_core::{
    abduce, counterfact, CategoryPredicate, Engine, ExplainError, FeatureId, FeatureSet, FieldError, MutabilityPolicy,
    PatientProfile, RiskCategory, RiskPercent, ScoreBreakdown, Sex, TargetRule,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

pub const UNREACHABLE: &str = "target unreachable given immutable features";

#[derive(Debug, Clone, PartialEq)]
pub enum ApiError {
    /// Field-level problems with the submitted profile or options.
    Invalid(Vec<FieldError>),
    Malformed(String),
    Unreachable { target: CategoryPredicate },
}

impl ApiError {
    pub fn field(field: &str, message: impl Into<String>) -> Self {
        ApiError::Invalid(vec![FieldError::new(field, message)])
    }

    pub fn status(&self) -> u16 {
        match self {
            ApiError::Invalid(_) | ApiError::Malformed(_) => 400,
            ApiError::Unreachable { .. } => 422,
        }
    }

    pub fn body(&self) -> Value {
        match self {
            ApiError::Invalid(fields) => json!({ "error": "invalid request", "fields": fields }),
            ApiError::Malformed(msg) => json!({ "error": msg }),
            ApiError::Unreachable { target } => json!({ "error": UNREACHABLE, "target": target }),
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ApiError::Invalid(fields) => {
                let parts: Vec<String> = fields.iter().map(|e| format!("{}: {}", e.field, e.message)).collect();
                write!(f, "invalid input: {}", parts.join("; "))
            }
            ApiError::Malformed(msg) => f.write_str(msg),
            ApiError::Unreachable { .. } => f.write_str(UNREACHABLE),
        }
    }
}

impl std::error::Error for ApiError {}

impl From<ExplainError> for ApiError {
    fn from(e: ExplainError) -> Self {
        match e {
            ExplainError::Profile(p) => ApiError::Invalid(p.fields),
            ExplainError::BadOrder(_) | ExplainError::OrderMissesMutable(_) => ApiError::field("order", e.to_string()),
            ExplainError::ImmutableFeature(_) => ApiError::field("mutability", e.to_string()),
            other => ApiError::Malformed(other.to_string()),
        }
    }
}

/// Explanation settings. Every field has a default.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExplainOptions {
    pub order: Vec<FeatureId>,
    pub policy: MutabilityPolicy,
    pub target: TargetRule,
}

impl Default for ExplainOptions {
    fn default() -> Self {
        Self { order: FeatureId::ALL.to_vec(), policy: MutabilityPolicy::default(), target: TargetRule::NextLower }
    }
}

/// `default` or `age-sex-only`.
pub fn parse_mutability(s: &str) -> Result<MutabilityPolicy, String> {
    match s {
        "default" => Ok(MutabilityPolicy::default()),
        "age-sex-only" | "age_sex_only" => Ok(MutabilityPolicy::age_sex_only()),
        other => Err(format!("unknown mutability policy '{other}' (expected default or age-sex-only)")),
    }
}

/// `next-lower`, `low` or `moderate`.
pub fn parse_target(s: &str) -> Result<TargetRule, String> {
    match s.parse::<TargetRule>()? {
        TargetRule::Category(RiskCategory::High) => Err("target high is never below a current category".into()),
        rule => Ok(rule),
    }
}

/// Features listed first are tried first; unlisted features follow in
/// canonical order.
pub fn complete_order(prefix: &[FeatureId]) -> Result<Vec<FeatureId>, String> {
    let mut seen = FeatureSet::empty();
    for f in prefix {
        if seen.contains(*f) {
            return Err(format!("{f} is listed twice"));
        }
        seen.insert(*f);
    }
    let mut order = prefix.to_vec();
    order.extend(FeatureId::ALL.into_iter().filter(|f| !seen.contains(*f)));
    Ok(order)
}

pub fn parse_order(s: &str) -> Result<Vec<FeatureId>, String> {
    let prefix = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::parse)
        .collect::<Result<Vec<FeatureId>, _>>()?;
    complete_order(&prefix)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureList {
    pub features: FeatureSet,
    pub labels: Vec<String>,
}

impl From<FeatureSet> for FeatureList {
    fn from(features: FeatureSet) -> Self {
        Self { features, labels: features.labels().into_iter().map(String::from).collect() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CounterfactualResult {
    Changed {
        target: CategoryPredicate,
        changed: FeatureList,
        witness: PatientProfile,
        witness_total: i32,
        witness_risk_percent: RiskPercent,
        witness_category: RiskCategory,
    },
    /// The profile already meets the target.
    AlreadyAtTarget { target: CategoryPredicate },
    Unreachable { target: CategoryPredicate },
    /// Nothing lies below the current category under the target rule.
    NotNeeded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub profile: PatientProfile,
    pub breakdown: ScoreBreakdown,
    pub risk_percent: RiskPercent,
    pub category: RiskCategory,
    pub abductive: FeatureList,
    pub counterfactual: CounterfactualResult,
}

pub fn counterfactual(
    engine: &Engine,
    profile: &PatientProfile,
    options: &ExplainOptions,
) -> Result<CounterfactualResult, ApiError> {
    engine.schedules().validate(profile).map_err(|e| ApiError::Invalid(e.fields))?;
    let Some(target) = options.target.resolve(engine.category(profile)) else {
        return Ok(CounterfactualResult::NotNeeded);
    };
    match counterfact(engine, profile, target, &options.policy, &options.order) {
        Ok(cf) => {
            let a = engine.schedules().assess(&cf.witness).map_err(|e| ApiError::Malformed(e.to_string()))?;
            Ok(CounterfactualResult::Changed {
                target,
                changed: cf.changed.into(),
                witness: cf.witness,
                witness_total: a.breakdown.total,
                witness_risk_percent: a.percent,
                witness_category: a.category,
            })
        }
        Err(ExplainError::AlreadyAtTarget) => Ok(CounterfactualResult::AlreadyAtTarget { target }),
        Err(ExplainError::Unreachable) => Ok(CounterfactualResult::Unreachable { target }),
        Err(e) => Err(e.into()),
    }
}

pub fn score(engine: &Engine, profile: &PatientProfile, options: &ExplainOptions) -> Result<ScoreResponse, ApiError> {
    engine.schedules().validate(profile).map_err(|e| ApiError::Invalid(e.fields))?;
    let assessment = engine.schedules().assess(profile).map_err(|e| ApiError::Malformed(e.to_string()))?;
    let abductive = abduce(engine, profile, &options.order)?;
    Ok(ScoreResponse {
        profile: *profile,
        breakdown: assessment.breakdown,
        risk_percent: assessment.percent,
        category: assessment.category,
        abductive: abductive.features.into(),
        counterfactual: counterfactual(engine, profile, options)?,
    })
}

const PROFILE_KEYS: [&str; 8] = ["sex", "age", "hdl", "total_chol", "sbp", "treated_sbp", "smoker", "diabetic"];
const OPTION_KEYS: [&str; 3] = ["order", "target", "mutability"];

fn value_kind(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "a boolean",
        Value::Number(_) => "a number",
        Value::String(_) => "a string",
        Value::Array(_) => "an array",
        Value::Object(_) => "an object",
    }
}

fn int_field(key: &str, v: &Value) -> Result<i32, FieldError> {
    v.as_i64()
        .and_then(|n| i32::try_from(n).ok())
        .ok_or_else(|| FieldError::new(key, format!("expected an integer, got {}", value_kind(v))))
}

fn bool_field(key: &str, v: &Value) -> Result<bool, FieldError> {
    v.as_bool().ok_or_else(|| FieldError::new(key, format!("expected a boolean, got {}", value_kind(v))))
}

fn sex_field(key: &str, v: &Value) -> Result<Sex, FieldError> {
    v.as_str()
        .ok_or_else(|| FieldError::new(key, format!("expected \"male\" or \"female\", got {}", value_kind(v))))?
        .parse()
        .map_err(|e: String| FieldError::new(key, e))
}

fn as_object<'a>(v: &'a Value, what: &str) -> Result<&'a Map<String, Value>, ApiError> {
    v.as_object().ok_or_else(|| ApiError::Malformed(format!("{what} must be a JSON object")))
}

fn read_profile(obj: &Map<String, Value>, prefix: &str, errors: &mut Vec<FieldError>) -> Option<PatientProfile> {
    let before = errors.len();
    let mut get = |key: &str| {
        let v = obj.get(key);
        if v.is_none() {
            errors.push(FieldError::new(format!("{prefix}{key}"), "required"));
        }
        v
    };
    let raw: Vec<Option<&Value>> = PROFILE_KEYS.iter().map(|k| get(k)).collect();
    let name = |k: &str| format!("{prefix}{k}");
    let mut take = |r: Result<(), FieldError>| {
        if let Err(mut e) = r {
            e.field = name(&e.field);
            errors.push(e);
        }
    };
    let mut p = PatientProfile {
        sex: Sex::Male,
        age: 0,
        hdl: 0,
        total_chol: 0,
        sbp: 0,
        treated_sbp: false,
        smoker: false,
        diabetic: false,
    };
    if let Some(v) = raw[0] {
        take(sex_field("sex", v).map(|x| p.sex = x));
    }
    let ints = [(1, "age"), (2, "hdl"), (3, "total_chol"), (4, "sbp")];
    for (i, key) in ints {
        if let Some(v) = raw[i] {
            take(int_field(key, v).map(|x| p.set(key.parse().unwrap(), frs_core::FeatureValue::Int(x))));
        }
    }
    let bools = [(5, "treated_sbp", FeatureId::Treatment), (6, "smoker", FeatureId::Smoker), (7, "diabetic", FeatureId::Diabetic)];
    for (i, key, f) in bools {
        if let Some(v) = raw[i] {
            take(bool_field(key, v).map(|x| p.set(f, frs_core::FeatureValue::Bool(x))));
        }
    }
    (errors.len() == before).then_some(p)
}

fn read_options(obj: &Map<String, Value>, errors: &mut Vec<FieldError>) -> ExplainOptions {
    let mut options = ExplainOptions::default();
    if let Some(v) = obj.get("order") {
        let parsed = match v {
            Value::String(s) => parse_order(s),
            Value::Array(items) => items
                .iter()
                .map(|i| i.as_str().ok_or("order entries must be strings".to_string()).and_then(str::parse))
                .collect::<Result<Vec<FeatureId>, String>>()
                .and_then(|prefix| complete_order(&prefix)),
            other => Err(format!("expected a list of features, got {}", value_kind(other))),
        };
        match parsed {
            Ok(order) => options.order = order,
            Err(e) => errors.push(FieldError::new("order", e)),
        }
    }
    let mut string_option = |key: &str| match obj.get(key) {
        None => None,
        Some(Value::String(s)) => Some(s.clone()),
        Some(other) => {
            errors.push(FieldError::new(key, format!("expected a string, got {}", value_kind(other))));
            None
        }
    };
    let target = string_option("target");
    let mutability = string_option("mutability");
    if let Some(t) = target {
        match parse_target(&t) {
            Ok(t) => options.target = t,
            Err(e) => errors.push(FieldError::new("target", e)),
        }
    }
    if let Some(m) = mutability {
        match parse_mutability(&m) {
            Ok(m) => options.policy = m,
            Err(e) => errors.push(FieldError::new("mutability", e)),
        }
    }
    options
}

fn reject_unknown(obj: &Map<String, Value>, allowed: &[&str], errors: &mut Vec<FieldError>) {
    for key in obj.keys().filter(|k| !allowed.contains(&k.as_str())) {
        errors.push(FieldError::new(key.as_str(), "unknown field"));
    }
}

fn finish<T>(value: Option<T>, errors: Vec<FieldError>) -> Result<T, ApiError> {
    match value {
        Some(v) if errors.is_empty() => Ok(v),
        _ => Err(ApiError::Invalid(errors)),
    }
}

/// A profile with optional explanation settings, all at the top level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreRequest {
    pub profile: PatientProfile,
    pub options: ExplainOptions,
}

impl ScoreRequest {
    pub fn from_json(body: &Value) -> Result<Self, ApiError> {
        let obj = as_object(body, "request body")?;
        let mut errors = Vec::new();
        let allowed: Vec<&str> = PROFILE_KEYS.iter().chain(OPTION_KEYS.iter()).copied().collect();
        reject_unknown(obj, &allowed, &mut errors);
        let profile = read_profile(obj, "", &mut errors);
        let options = read_options(obj, &mut errors);
        finish(profile.map(|profile| ScoreRequest { profile, options }), errors)
    }
}

/// A base profile plus new values for some mutable features.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WhatIfRequest {
    pub profile: PatientProfile,
    pub overrides: BTreeMap<FeatureId, frs_core::FeatureValue>,
    pub options: ExplainOptions,
}

impl WhatIfRequest {
    pub fn from_json(body: &Value) -> Result<Self, ApiError> {
        let obj = as_object(body, "request body")?;
        let mut errors = Vec::new();
        let allowed: Vec<&str> = ["profile", "overrides"].iter().chain(OPTION_KEYS.iter()).copied().collect();
        reject_unknown(obj, &allowed, &mut errors);
        let options = read_options(obj, &mut errors);
        let profile = match obj.get("profile") {
            Some(v) => read_profile(as_object(v, "profile")?, "profile.", &mut errors),
            None => {
                errors.push(FieldError::new("profile", "required"));
                None
            }
        };
        let mut overrides = BTreeMap::new();
        let empty = Map::new();
        let raw = match obj.get("overrides") {
            Some(v) => as_object(v, "overrides")?,
            None => &empty,
        };
        for (key, v) in raw {
            let name = format!("overrides.{key}");
            let feature: FeatureId = match key.parse() {
                Ok(f) => f,
                Err(e) => {
                    errors.push(FieldError::new(name, e));
                    continue;
                }
            };
            if !options.policy.allows(feature) {
                errors.push(FieldError::new(name, format!("{} is not modifiable under the active policy", feature.label())));
                continue;
            }
            let value = match feature {
                FeatureId::Treatment | FeatureId::Smoker | FeatureId::Diabetic => {
                    bool_field(&name, v).map(frs_core::FeatureValue::Bool)
                }
                _ => int_field(&name, v).map(frs_core::FeatureValue::Int),
            };
            match value {
                Ok(value) => {
                    overrides.insert(feature, value);
                }
                Err(e) => errors.push(e),
            }
        }
        finish(profile.map(|profile| WhatIfRequest { profile, overrides, options }), errors)
    }

    pub fn apply(&self) -> PatientProfile {
        let mut p = self.profile;
        for (f, v) in &self.overrides {
            p.set(*f, *v);
        }
        p
    }
}

pub fn whatif(engine: &Engine, request: &WhatIfRequest) -> Result<ScoreResponse, ApiError> {
    score(engine, &request.apply(), &request.options)
}

/// Feature domains, bins and thresholds, enough to build an input form.
pub fn schema(engine: &Engine) -> Value {
    let schedules = engine.schedules();
    let per_sex = |f: &dyn Fn(Sex) -> Value| -> Value {
        Sex::ALL.into_iter().map(|s| (s.to_string(), f(s))).collect::<Map<String, Value>>().into()
    };
    let policy = MutabilityPolicy::default();
    let features: Vec<Value> = FeatureId::ALL
        .into_iter()
        .map(|f| {
            let mut entry = json!({
                "key": f.key(),
                "label": f.label(),
                "mutable": policy.allows(f),
            });
            let extra = match f {
                FeatureId::Sex => json!({ "kind": "choice", "values": ["male", "female"] }),
                FeatureId::Treatment | FeatureId::Smoker | FeatureId::Diabetic => json!({ "kind": "boolean" }),
                FeatureId::Sbp => json!({
                    "kind": "integer",
                    "unit": "mm Hg",
                    "bins": per_sex(&|s| json!(schedules.get(s).sbp(false).bins())),
                    "treated_bins": per_sex(&|s| json!(schedules.get(s).sbp(true).bins())),
                    "domain": per_sex(&|s| json!(engine.domains().get(s).sbp)),
                }),
                _ => {
                    let (unit, table): (&str, fn(&frs_core::SexSchedule) -> &frs_core::BinTable) = match f {
                        FeatureId::Age => ("years", |t| t.age()),
                        FeatureId::Hdl => ("mg/dL", |t| t.hdl()),
                        _ => ("mg/dL", |t| t.total_chol()),
                    };
                    let domain = |s: Sex| {
                        let d = engine.domains().get(s);
                        json!(match f {
                            FeatureId::Age => &d.age,
                            FeatureId::Hdl => &d.hdl,
                            _ => &d.total_chol,
                        })
                    };
                    json!({
                        "kind": "integer",
                        "unit": unit,
                        "bins": per_sex(&|s| json!(table(schedules.get(s)).bins())),
                        "domain": per_sex(&domain),
                    })
                }
            };
            entry.as_object_mut().unwrap().extend(extra.as_object().unwrap().clone());
            entry
        })
        .collect();
    json!({
        "features": features,
        "categories": per_sex(&|s| json!(schedules.get(s).categories())),
        "targets": ["next-lower", "low", "moderate"],
        "mutability": {
            "default": MutabilityPolicy::default().mutable(),
            "age-sex-only": MutabilityPolicy::age_sex_only().mutable(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use FeatureId::*;

    #[test]
    fn partial_orders_are_completed() {
        assert_eq!(parse_order("smoker, sbp").unwrap(), [Smoker, Sbp, Sex, Age, Hdl, TotalChol, Treatment, Diabetic]);
        assert_eq!(parse_order("").unwrap(), FeatureId::ALL);
        assert!(parse_order("sbp,sbp").is_err());
        assert!(parse_order("weight").is_err());
    }

    #[test]
    fn targets_and_policies() {
        assert_eq!(parse_target("next-lower").unwrap(), TargetRule::NextLower);
        assert_eq!(parse_target("low").unwrap(), TargetRule::Category(RiskCategory::Low));
        assert!(parse_target("high").is_err());
        assert_eq!(parse_mutability("age-sex-only").unwrap(), MutabilityPolicy::age_sex_only());
        assert!(parse_mutability("everything").is_err());
    }

    #[test]
    fn whatif_applies_overrides() {
        let body = json!({
            "profile": { "sex": "female", "age": 50, "hdl": 40, "total_chol": 220, "sbp": 150,
                         "treated_sbp": true, "smoker": true, "diabetic": false },
            "overrides": { "smoker": false, "treatment": false },
        });
        let req = WhatIfRequest::from_json(&body).unwrap();
        let p = req.apply();
        assert!(!p.smoker && !p.treated_sbp);
        assert_eq!(p.sbp, 150);
    }

    #[test]
    fn error_statuses() {
        assert_eq!(ApiError::field("age", "bad").status(), 400);
        let e = ApiError::Unreachable { target: CategoryPredicate::Equals(RiskCategory::Low) };
        assert_eq!(e.status(), 422);
        assert_eq!(e.body()["error"], UNREACHABLE);
    }
}
