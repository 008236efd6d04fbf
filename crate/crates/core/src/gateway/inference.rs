//! Event-probability estimation: threshold evidence combined by noisy-OR
//! with trust- and relevance-weighted peer input, plus a kNN vote over
//! labeled feature history.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::domain::SensorType;
use crate::environment::DIURNAL_PERIOD;

/// Linear evidence ramp for one sensor type: 0 at or below `theta_low`,
/// 1 at or above `theta_high`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdBand {
    pub theta_low: f64,
    pub theta_high: f64,
}

pub type Thresholds = BTreeMap<SensorType, ThresholdBand>;

pub fn evidence(value: f64, band: &ThresholdBand) -> f64 {
    ((value - band.theta_low) / (band.theta_high - band.theta_low)).clamp(0.0, 1.0)
}

/// External input to the noisy-OR: a peer's evidence with its trust and
/// relevance weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEvidence {
    pub evidence: f64,
    pub tau: f64,
    pub rho: f64,
}

/// Noisy-OR over local evidences (implicit weight 1) and weighted external
/// evidences: p = 1 - prod(1 - e_i) * prod(1 - tau*rho*e_j).
pub fn infer_threshold(local: &[f64], external: &[WeightedEvidence]) -> f64 {
    let mut survive = 1.0;
    for e in local {
        survive *= 1.0 - e;
    }
    for w in external {
        survive *= 1.0 - w.tau * w.rho * w.evidence;
    }
    1.0 - survive
}

pub type FeatureVector = [f64; 5];

/// Feature layout: local mean anomaly, local max anomaly, trust-weighted
/// peer anomaly, and the time-of-day phase pair.
pub fn build_features(
    local_mean_z: f64,
    local_max_z: f64,
    external: &[(f64, f64, f64)],
    t: f64,
) -> FeatureVector {
    let weight: f64 = external.iter().map(|(_, tau, rho)| tau * rho).sum();
    let peer_z = if weight > 0.0 {
        external
            .iter()
            .map(|(z, tau, rho)| tau * rho * z)
            .sum::<f64>()
            / weight
    } else {
        0.0
    };
    let phase = 2.0 * std::f64::consts::PI * t / DIURNAL_PERIOD;
    [local_mean_z, local_max_z, peer_z, phase.sin(), phase.cos()]
}

/// Bounded store of labeled feature vectors collected during warm-up.
#[derive(Debug, Clone)]
pub struct HistoryStore {
    entries: VecDeque<(FeatureVector, bool)>,
    capacity: usize,
}

impl HistoryStore {
    pub fn new(capacity: usize) -> Self {
        HistoryStore {
            entries: VecDeque::new(),
            capacity,
        }
    }

    pub fn push(&mut self, features: FeatureVector, label: bool) {
        self.entries.push_back((features, label));
        while self.entries.len() > self.capacity {
            self.entries.pop_front();
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn euclidean(a: &FeatureVector, b: &FeatureVector) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Fraction of positive labels among the k nearest stored vectors; `None`
/// until the store holds at least k entries (caller falls back to the
/// threshold estimate). Distance ties go to older entries.
pub fn infer_pattern(fv: &FeatureVector, store: &HistoryStore, k: usize) -> Option<f64> {
    if store.entries.len() < k || k == 0 {
        return None;
    }
    let mut by_distance: Vec<(f64, bool)> = store
        .entries
        .iter()
        .map(|(e, label)| (euclidean(fv, e), *label))
        .collect();
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0));
    let positives = by_distance
        .iter()
        .take(k)
        .filter(|(_, label)| *label)
        .count();
    Some(positives as f64 / k as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InferenceMode {
    ThresholdOnly,
    PatternOnly,
    #[default]
    Max,
}

/// Folds the two estimates into one probability; the pattern estimate is
/// optional because the store may not be warmed up yet.
pub fn combine_inference(p_threshold: f64, p_pattern: Option<f64>, mode: InferenceMode) -> f64 {
    match (mode, p_pattern) {
        (InferenceMode::ThresholdOnly, _) => p_threshold,
        (InferenceMode::PatternOnly, Some(p)) => p,
        (InferenceMode::PatternOnly, None) => p_threshold,
        (InferenceMode::Max, Some(p)) => p_threshold.max(p),
        (InferenceMode::Max, None) => p_threshold,
    }
}
