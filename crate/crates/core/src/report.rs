//! Carrier for one measured inequality: left side, right side with the constant stripped,
//! and the resulting fitted constant.

use serde::{Deserialize, Serialize};

/// Schema tag written into every JSONL line so that `aggregate` can refuse mixed inputs.
pub const REPORT_SCHEMA: &str = "osr-report/1";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct EstimateReport {
    pub schema: String,
    pub inequality_id: String,
    pub lhs: f64,
    pub rhs_shape: f64,
    pub ratio: f64,
    /// Parameter snapshot (a serialized mode context or the relevant scalar parameters).
    pub params: serde_json::Value,
    pub resolution: usize,
}

impl EstimateReport {
    /// Builds a report; `ratio` is `lhs / rhs_shape`, and 0 when both sides vanish.
    pub fn new(id: &str, lhs: f64, rhs_shape: f64, params: serde_json::Value, resolution: usize) -> Self {
        let ratio = if lhs == 0.0 && rhs_shape == 0.0 {
            0.0
        } else if rhs_shape == 0.0 {
            f64::INFINITY
        } else {
            lhs / rhs_shape
        };
        EstimateReport {
            schema: REPORT_SCHEMA.to_string(),
            inequality_id: id.to_string(),
            lhs,
            rhs_shape,
            ratio,
            params,
            resolution,
        }
    }
}

/// Max-reduction over a list of reports: the sup ratio and the report attaining it.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SweepSummary {
    pub inequality_id: String,
    pub count: usize,
    pub sup_ratio: f64,
    pub argmax: Option<EstimateReport>,
}

pub fn summarize(id: &str, reports: &[EstimateReport]) -> SweepSummary {
    let mut best: Option<&EstimateReport> = None;
    for r in reports {
        // ties keep the earlier entry so the summary does not depend on merge order of equal ratios
        if best.map_or(true, |b| r.ratio > b.ratio) {
            best = Some(r);
        }
    }
    SweepSummary {
        inequality_id: id.to_string(),
        count: reports.len(),
        sup_ratio: best.map_or(0.0, |b| b.ratio),
        argmax: best.cloned(),
    }
}
