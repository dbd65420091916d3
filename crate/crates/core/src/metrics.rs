//! Corpus-level statistics: per-slot parsing accuracy, matching accuracy,
//! feasibility proportions and rater agreement.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::representation::{ScenarioRepresentation, SlotId, TrafficParticipant};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("domain error: {message}")]
pub struct DomainError {
    pub message: String,
}

impl DomainError {
    pub fn new(message: impl Into<String>) -> Self {
        DomainError {
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementAccuracy {
    /// Slot name to the fraction of cases parsed correctly.
    pub per_slot: BTreeMap<String, f64>,
    /// Unweighted mean over the 17 slots.
    pub mean: f64,
    pub cases: usize,
}

fn aligned(rep: &ScenarioRepresentation) -> Vec<&TrafficParticipant> {
    let mut ps: Vec<&TrafficParticipant> = rep.traffic_participants.iter().collect();
    ps.sort_by_key(|p| p.sort_key());
    ps
}

fn slot_correct(predicted: &ScenarioRepresentation, truth: &ScenarioRepresentation, slot: SlotId) -> bool {
    if slot.is_participant() {
        let (a, b) = (aligned(predicted), aligned(truth));
        a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.get(slot) == y.get(slot))
    } else {
        predicted.get(slot) == truth.get(slot)
    }
}

/// Per-slot accuracy of `(predicted, ground truth)` pairs. Participants are
/// aligned by (type, position) before comparison, and a participant slot is
/// correct only when every aligned participant matches.
pub fn element_accuracy(
    results: &[(ScenarioRepresentation, ScenarioRepresentation)],
) -> Result<ElementAccuracy, DomainError> {
    if results.is_empty() {
        return Err(DomainError::new("no cases to score"));
    }
    let n = results.len() as f64;
    let per_slot: BTreeMap<String, f64> = SlotId::ALL
        .into_iter()
        .map(|slot| {
            let hits = results.iter().filter(|(p, t)| slot_correct(p, t, slot)).count();
            (slot.name().to_string(), hits as f64 / n)
        })
        .collect();
    let mean = per_slot.values().sum::<f64>() / per_slot.len() as f64;
    Ok(ElementAccuracy {
        per_slot,
        mean,
        cases: results.len(),
    })
}

fn check_fraction(name: &str, v: f64) -> Result<(), DomainError> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(DomainError::new(format!("{name} must lie in [0, 1], got {v}")))
    }
}

/// Success rate of execution times average element accuracy.
pub fn matching_accuracy(success_rate: f64, avg_element_accuracy: f64) -> Result<f64, DomainError> {
    check_fraction("success rate", success_rate)?;
    check_fraction("element accuracy", avg_element_accuracy)?;
    Ok(success_rate * avg_element_accuracy)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feasibility {
    Executable,
    ReadError,
    RuntimeError,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityTally {
    pub executable: f64,
    pub read_error: f64,
    pub runtime_error: f64,
    pub total: usize,
}

pub fn feasibility_tally(outcomes: &[Feasibility]) -> Result<FeasibilityTally, DomainError> {
    if outcomes.is_empty() {
        return Err(DomainError::new("no outcomes to tally"));
    }
    let n = outcomes.len();
    let count = |f: Feasibility| outcomes.iter().filter(|o| **o == f).count();
    let read = count(Feasibility::ReadError) as f64 / n as f64;
    let runtime = count(Feasibility::RuntimeError) as f64 / n as f64;
    Ok(FeasibilityTally {
        executable: count(Feasibility::Executable) as f64 / n as f64,
        read_error: read,
        runtime_error: runtime,
        total: n,
    })
}

/// Subjects (rows) scored by raters (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingMatrix {
    scores: Vec<Vec<f64>>,
}

impl RatingMatrix {
    pub fn new(scores: Vec<Vec<f64>>) -> Result<Self, DomainError> {
        let n = scores.len();
        if n < 2 {
            return Err(DomainError::new("need at least two subjects"));
        }
        let k = scores[0].len();
        if k < 2 {
            return Err(DomainError::new("need at least two raters"));
        }
        if scores.iter().any(|r| r.len() != k) {
            return Err(DomainError::new("ragged rating matrix"));
        }
        if scores.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DomainError::new("ratings must be finite"));
        }
        Ok(RatingMatrix { scores })
    }

    pub fn subjects(&self) -> usize {
        self.scores.len()
    }

    pub fn raters(&self) -> usize {
        self.scores[0].len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.scores
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IccForm {
    /// Agreement of a single rater, ICC(2,1).
    Single,
    /// Agreement of the mean of k raters, ICC(2,k).
    Average,
}

/// Mean squares of the two-way layout: (rows, columns, residual).
fn mean_squares(m: &RatingMatrix) -> (f64, f64, f64) {
    let (n, k) = (m.subjects() as f64, m.raters() as f64);
    let rows = m.rows();
    let grand = rows.iter().flatten().sum::<f64>() / (n * k);
    let row_means: Vec<f64> = rows.iter().map(|r| r.iter().sum::<f64>() / k).collect();
    let col_means: Vec<f64> = (0..m.raters())
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n)
        .collect();
    let ss_total: f64 = rows.iter().flatten().map(|v| (v - grand).powi(2)).sum();
    let ss_rows = k * row_means.iter().map(|r| (r - grand).powi(2)).sum::<f64>();
    let ss_cols = n * col_means.iter().map(|c| (c - grand).powi(2)).sum::<f64>();
    let ss_err = (ss_total - ss_rows - ss_cols).max(0.0);
    (
        ss_rows / (n - 1.0),
        ss_cols / (k - 1.0),
        ss_err / ((n - 1.0) * (k - 1.0)),
    )
}

/// Two-way random-effects intraclass correlation, absolute agreement.
pub fn icc_two_way_random(m: &RatingMatrix, form: IccForm) -> Result<f64, DomainError> {
    let (n, k) = (m.subjects() as f64, m.raters() as f64);
    let (msr, msc, mse) = mean_squares(m);
    let denominator = match form {
        IccForm::Single => msr + (k - 1.0) * mse + k * (msc - mse) / n,
        IccForm::Average => msr + (msc - mse) / n,
    };
    let scale = msr.abs() + msc.abs() + mse.abs();
    if denominator.abs() <= 1e-12 * scale.max(1e-300) || scale == 0.0 {
        let first = m.rows()[0][0];
        if m.rows().iter().flatten().all(|v| *v == first) {
            return Ok(1.0);
        }
        return Err(DomainError::new("ICC undefined: zero denominator"));
    }
    Ok((msr - mse) / denominator)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::representation::tests::left_turn;

    #[test]
    fn accuracy_counts() {
        let truth = left_turn();
        let perfect = element_accuracy(&[(truth.clone(), truth.clone())]).unwrap();
        assert_eq!(perfect.mean, 1.0);
        assert_eq!(perfect.per_slot.len(), 17);
        let mut wrong = truth.clone();
        wrong.climate.weather_type = "rainy".into();
        let one_off = element_accuracy(&[(wrong, truth)]).unwrap();
        assert!((one_off.mean - 16.0 / 17.0).abs() < 1e-12);
        assert_eq!(one_off.per_slot["C.type"], 0.0);
        assert!(element_accuracy(&[]).is_err());
    }

    #[test]
    fn participants_aligned_before_comparison() {
        let mut truth = left_turn();
        let mut ped = truth.traffic_participants[0].clone();
        ped.participant_type = "pedestrian".into();
        truth.traffic_participants.push(ped);
        let mut predicted = truth.clone();
        predicted.traffic_participants.reverse();
        assert_eq!(element_accuracy(&[(predicted, truth)]).unwrap().mean, 1.0);
    }

    #[test]
    fn matching_accuracy_product() {
        let v = matching_accuracy(0.8731, 0.92).unwrap();
        assert!((v - 0.803252).abs() < 1e-9);
        assert_eq!(matching_accuracy(1.0, 0.7).unwrap(), 0.7);
        assert_eq!(matching_accuracy(0.0, 0.7).unwrap(), 0.0);
        assert!(matching_accuracy(1.1, 0.5).is_err());
    }

    #[test]
    fn feasibility_counts() {
        use Feasibility::*;
        let t = feasibility_tally(&[Executable, Executable, Executable, ReadError]).unwrap();
        assert_eq!((t.executable, t.read_error, t.runtime_error), (0.75, 0.25, 0.0));
        assert!(feasibility_tally(&[]).is_err());
    }

    #[test]
    fn shrout_fleiss_reference() {
        let m = RatingMatrix::new(vec![
            vec![9.0, 2.0, 5.0, 8.0],
            vec![6.0, 1.0, 3.0, 2.0],
            vec![8.0, 4.0, 6.0, 8.0],
            vec![7.0, 1.0, 2.0, 6.0],
            vec![10.0, 5.0, 6.0, 9.0],
            vec![6.0, 2.0, 4.0, 7.0],
        ])
        .unwrap();
        assert!((icc_two_way_random(&m, IccForm::Single).unwrap() - 0.29).abs() < 0.005);
        assert!((icc_two_way_random(&m, IccForm::Average).unwrap() - 0.62).abs() < 0.005);
    }

    #[test]
    fn icc_degenerate_cases() {
        let perfect = RatingMatrix::new(vec![vec![1.0, 1.0], vec![3.0, 3.0], vec![2.0, 2.0]]).unwrap();
        assert!((icc_two_way_random(&perfect, IccForm::Single).unwrap() - 1.0).abs() < 1e-12);
        let constant = RatingMatrix::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        assert_eq!(icc_two_way_random(&constant, IccForm::Average).unwrap(), 1.0);
        assert!(RatingMatrix::new(vec![vec![1.0, 2.0]]).is_err());
        assert!(RatingMatrix::new(vec![vec![1.0], vec![2.0]]).is_err());
    }
}
