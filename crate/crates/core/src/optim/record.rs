use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Objective, ObjectiveError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub index: usize,
    pub point: Vec<f64>,
    /// `NaN` when the evaluation failed; serialised as `null`.
    #[serde(with = "nan_as_null")]
    pub score: f64,
    /// `None` until the first successful evaluation.
    pub best_so_far: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub rng_seed: u64,
    pub steps: Vec<Step>,
}

impl RunRecord {
    pub fn new(rng_seed: u64) -> Self {
        RunRecord { rng_seed, steps: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn best(&self) -> Option<f64> {
        self.steps.last().and_then(|s| s.best_so_far)
    }

    /// Step with the highest score, earliest on ties.
    pub fn best_step(&self) -> Option<&Step> {
        self.steps
            .iter()
            .filter(|s| !s.score.is_nan())
            .fold(None, |acc: Option<&Step>, s| match acc {
                Some(b) if b.score >= s.score => Some(b),
                _ => Some(s),
            })
    }

    pub fn failures(&self) -> usize {
        self.steps.iter().filter(|s| s.score.is_nan()).count()
    }

    /// Evaluate `point`, append the step and return the score (`NaN` on failure).
    pub fn evaluate<O: Objective + ?Sized>(&mut self, objective: &mut O, point: Vec<f64>) -> f64 {
        let outcome = objective.evaluate(&point);
        self.push(point, outcome)
    }

    pub fn push(&mut self, point: Vec<f64>, outcome: Result<f64, ObjectiveError>) -> f64 {
        let (score, error) = match outcome {
            Ok(s) if !s.is_nan() => (s, None),
            Ok(_) => (f64::NAN, Some("objective returned NaN".to_string())),
            Err(e) => (f64::NAN, Some(e.0)),
        };
        let prev = self.best();
        let best_so_far = if score.is_nan() {
            prev
        } else {
            Some(prev.map_or(score, |b| b.max(score)))
        };
        self.steps.push(Step { index: self.steps.len(), point, score, best_so_far, error });
        score
    }

    /// `step,score,best_so_far`, with empty fields for missing values.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,score,best_so_far\n");
        for s in &self.steps {
            let score = if s.score.is_nan() { String::new() } else { format!("{:?}", s.score) };
            let best = s.best_so_far.map(|b| format!("{b:?}")).unwrap_or_default();
            let _ = writeln!(out, "{},{},{}", s.index, score, best);
        }
        out
    }
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}
