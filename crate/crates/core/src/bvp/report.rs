//! Condition reports shared by every certifier.

use serde::{Deserialize, Serialize};

use crate::nonsmooth::ClarkeConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Uncertain,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub point: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub point: Vec<f64>,
    pub status: Status,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub name: String,
    pub status: Status,
    /// Whether the overall verdict depends on this entry.
    pub required: bool,
    /// The measured quantity (worst case over samples).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    /// Positive exactly when the condition is met with room to spare;
    /// absent for structural verdicts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub margin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub samples: Vec<SampleOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ConditionEntry {
    /// Pass exactly when `margin > 0`.
    pub fn graded(name: &str, value: f64, margin: f64, required: bool) -> Self {
        let status = if margin > 0.0 { Status::Pass } else { Status::Fail };
        ConditionEntry {
            name: name.into(),
            status,
            required,
            value: Some(value),
            margin: Some(margin),
            witness: None,
            samples: Vec::new(),
            note: None,
        }
    }

    /// A verdict reached without a numeric margin.
    pub fn structural(name: &str, status: Status, required: bool, note: &str) -> Self {
        ConditionEntry {
            name: name.into(),
            status,
            required,
            value: None,
            margin: None,
            witness: None,
            samples: Vec::new(),
            note: Some(note.into()),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }

    pub fn with_witness(mut self, w: Option<Witness>) -> Self {
        self.witness = w;
        self
    }

    pub fn with_samples(mut self, s: Vec<SampleOutcome>) -> Self {
        self.samples = s;
        self
    }

    pub fn passed(&self) -> bool {
        self.status == Status::Pass && self.margin.is_none_or(|m| m > 0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// Which certifier produced the report.
    pub theorem: String,
    pub conditions: Vec<ConditionEntry>,
    pub overall: Status,
}

impl ConditionReport {
    pub(crate) fn new(theorem: &str) -> Self {
        ConditionReport { theorem: theorem.into(), conditions: Vec::new(), overall: Status::Uncertain }
    }

    pub(crate) fn push(&mut self, e: ConditionEntry) {
        self.conditions.push(e);
    }

    /// Pass only if every required entry passes with positive margin; fail
    /// if any required entry fails; uncertain otherwise.
    pub(crate) fn finish(mut self) -> Self {
        let required: Vec<&ConditionEntry> = self.conditions.iter().filter(|c| c.required).collect();
        self.overall = if required.iter().any(|c| c.status == Status::Fail) {
            Status::Fail
        } else if !required.is_empty() && required.iter().all(|c| c.passed()) {
            Status::Pass
        } else {
            Status::Uncertain
        };
        self
    }

    pub fn get(&self, name: &str) -> Option<&ConditionEntry> {
        self.conditions.iter().find(|c| c.name == name)
    }

    pub fn passed(&self) -> bool {
        self.overall == Status::Pass
    }
}

/// Sampling controls shared by the certifiers.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckConfig {
    pub boundary_samples: usize,
    /// Points of the time grid on `[0, T]`.
    pub time_samples: usize,
    pub tol: f64,
    pub seed: u64,
    /// Explicit boundary points; replaces the random draw when present.
    pub points: Option<Vec<Vec<f64>>>,
    pub clarke: ClarkeConfig,
    pub degree_resolution: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        CheckConfig {
            boundary_samples: 32,
            time_samples: 9,
            tol: 1e-6,
            seed: 0,
            points: None,
            clarke: ClarkeConfig::default(),
            degree_resolution: crate::degree::WINDING_RESOLUTION,
        }
    }
}

impl CheckConfig {
    /// `time_samples` points spread over `[0, T]`, endpoints included.
    pub(crate) fn closed_grid(&self, horizon: f64) -> Vec<f64> {
        let m = self.time_samples.max(2);
        (0..m).map(|i| horizon * i as f64 / (m - 1) as f64).collect()
    }

    /// Midpoints of `time_samples` equal cells of `(0, T)`.
    pub(crate) fn open_grid(&self, horizon: f64) -> Vec<f64> {
        let m = self.time_samples.max(1);
        (0..m).map(|i| horizon * (i as f64 + 0.5) / m as f64).collect()
    }
}
