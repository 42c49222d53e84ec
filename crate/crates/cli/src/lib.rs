pub mod api;
pub mod service;

pub use api::{ApiError, CounterfactualResult, ExplainOptions, ScoreRequest, ScoreResponse, WhatIfRequest};
pub use service::router;
