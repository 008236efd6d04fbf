//! Measurement validation at the gateway: syntactic bounds checks followed
//! by semantic plausibility checks against each node's own recent history.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::domain::{Measurement, SensorType};
use crate::error::{Error, Result};

pub const STD_FLOOR: f64 = 1e-9;

pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
pub fn sample_std(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Standardized deviation of `value` from a trailing window, with the
/// standard deviation floored at `STD_FLOOR` so constant windows yield a
/// huge but finite score.
pub fn anomaly_z(value: f64, window: &[f64]) -> Result<f64> {
    if window.len() < 5 {
        return Err(Error::InsufficientHistory {
            needed: 5,
            have: window.len(),
        });
    }
    Ok((value - mean(window)) / sample_std(window).max(STD_FLOOR))
}

/// Physical-plausibility limits for one sensor type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorBounds {
    pub value_min: f64,
    pub value_max: f64,
    /// Largest plausible rate of change, units per second.
    pub max_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterRules {
    #[serde(default)]
    pub bounds: BTreeMap<SensorType, SensorBounds>,
    #[serde(default = "default_z_max")]
    pub z_max: f64,
    /// Per-node trailing window of accepted values kept for the z check.
    #[serde(default = "default_window")]
    pub window: usize,
}

fn default_z_max() -> f64 {
    4.0
}

fn default_window() -> usize {
    20
}

impl Default for FilterRules {
    fn default() -> Self {
        FilterRules {
            bounds: BTreeMap::new(),
            z_max: 4.0,
            window: 20,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RejectReason {
    SyntacticNonFinite,
    SyntacticOutOfRange,
    SemanticRate,
    SemanticZScore,
}

impl RejectReason {
    pub fn is_syntactic(&self) -> bool {
        matches!(
            self,
            RejectReason::SyntacticNonFinite | RejectReason::SyntacticOutOfRange
        )
    }
}

#[derive(Debug, Clone, Default)]
struct NodeWindow {
    values: VecDeque<f64>,
    last_accepted: Option<(f64, f64)>,
}

/// Per-node accepted history backing the semantic checks.
#[derive(Debug, Clone, Default)]
pub struct FilterState {
    nodes: BTreeMap<String, NodeWindow>,
}

impl FilterState {
    /// Trailing accepted values for one node, oldest first.
    pub fn window(&self, node_id: &str) -> Vec<f64> {
        self.nodes
            .get(node_id)
            .map(|w| w.values.iter().copied().collect())
            .unwrap_or_default()
    }
}

/// Splits a batch into accepted and rejected measurements. Checks run in
/// order (non-finite, out of range, rate of change, z-score) and a rejection
/// records the first failure. Accepted values immediately extend the node's
/// window, so later measurements in the same batch see them.
pub fn monitor_filter(
    batch: Vec<Measurement>,
    rules: &FilterRules,
    state: &mut FilterState,
) -> (Vec<Measurement>, Vec<(Measurement, RejectReason)>) {
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    for m in batch {
        match check(&m, rules, state) {
            None => {
                let w = state.nodes.entry(m.node_id.clone()).or_default();
                w.values.push_back(m.value);
                while w.values.len() > rules.window {
                    w.values.pop_front();
                }
                w.last_accepted = Some((m.timestamp, m.value));
                accepted.push(m);
            }
            Some(reason) => rejected.push((m, reason)),
        }
    }
    (accepted, rejected)
}

fn check(m: &Measurement, rules: &FilterRules, state: &FilterState) -> Option<RejectReason> {
    if !m.value.is_finite() {
        return Some(RejectReason::SyntacticNonFinite);
    }
    let bounds = rules.bounds.get(&m.sensor_type);
    if let Some(b) = bounds {
        if m.value < b.value_min || m.value > b.value_max {
            return Some(RejectReason::SyntacticOutOfRange);
        }
    }
    let window = state.nodes.get(&m.node_id);
    if let (Some(b), Some(w)) = (bounds, window) {
        if let Some((t0, v0)) = w.last_accepted {
            let dt = m.timestamp - t0;
            if dt > 0.0 && (m.value - v0).abs() / dt > b.max_rate {
                return Some(RejectReason::SemanticRate);
            }
        }
    }
    if let Some(w) = window {
        if w.values.len() >= 5 {
            let values: Vec<f64> = w.values.iter().copied().collect();
            if sample_std(&values) >= STD_FLOOR {
                let z = (m.value - mean(&values)) / sample_std(&values);
                if z.abs() > rules.z_max {
                    return Some(RejectReason::SemanticZScore);
                }
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Position;

    fn temp() -> SensorType {
        SensorType::from("Temperature")
    }

    fn rules() -> FilterRules {
        FilterRules {
            bounds: [(
                temp(),
                SensorBounds {
                    value_min: -40.0,
                    value_max: 120.0,
                    max_rate: 5.0,
                },
            )]
            .into_iter()
            .collect(),
            z_max: 4.0,
            window: 20,
        }
    }

    fn m(node: &str, value: f64, t: f64) -> Measurement {
        Measurement {
            node_id: node.to_string(),
            sensor_type: temp(),
            value,
            timestamp: t,
            position: Position::new(0.0, 0.0),
        }
    }

    #[test]
    fn anomaly_z_at_the_mean_is_zero() {
        let w = [18.0, 19.0, 20.0, 21.0, 22.0];
        assert_eq!(anomaly_z(20.0, &w).unwrap(), 0.0);
    }

    #[test]
    fn anomaly_z_matches_hand_value() {
        let w = [18.0, 19.0, 20.0, 21.0, 22.0];
        let z = anomaly_z(24.0, &w).unwrap();
        assert!((z - 2.529_822).abs() < 1e-6, "z = {z}");
    }

    #[test]
    fn anomaly_z_floors_constant_windows() {
        let w = [20.0; 5];
        let z = anomaly_z(21.0, &w).unwrap();
        assert!((z - 1.0e9).abs() < 1.0, "z = {z}");
    }

    #[test]
    fn anomaly_z_needs_five_values() {
        let err = anomaly_z(20.0, &[20.0; 4]).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientHistory { needed: 5, have: 4 }
        ));
    }

    #[test]
    fn non_finite_rejected_first() {
        let mut state = FilterState::default();
        let (acc, rej) = monitor_filter(vec![m("a", f64::NAN, 0.0)], &rules(), &mut state);
        assert!(acc.is_empty());
        assert_eq!(rej[0].1, RejectReason::SyntacticNonFinite);
        assert!(rej[0].1.is_syntactic());
    }

    #[test]
    fn out_of_range_rejected() {
        let mut state = FilterState::default();
        let (_, rej) = monitor_filter(vec![m("a", 2000.0, 0.0)], &rules(), &mut state);
        assert_eq!(rej[0].1, RejectReason::SyntacticOutOfRange);
    }

    #[test]
    fn implausible_rate_rejected() {
        let mut state = FilterState::default();
        let batch = vec![m("a", 20.0, 0.0), m("a", 40.0, 1.0)];
        let (acc, rej) = monitor_filter(batch, &rules(), &mut state);
        assert_eq!(acc.len(), 1);
        assert_eq!(rej[0].1, RejectReason::SemanticRate);
    }

    #[test]
    fn outlier_versus_window_rejected() {
        let mut state = FilterState::default();
        let mut batch: Vec<Measurement> = (0..20)
            .map(|i| m("a", if i % 2 == 0 { 19.9 } else { 20.1 }, i as f64 * 60.0))
            .collect();
        batch.push(m("a", 20.05, 1200.0));
        batch.push(m("a", 21.0, 1260.0));
        let (acc, rej) = monitor_filter(batch, &rules(), &mut state);
        // 20 window builders + the in-family 20.05 (z about 0.5) pass.
        assert_eq!(acc.len(), 21);
        assert_eq!(rej.len(), 1);
        assert_eq!(rej[0].1, RejectReason::SemanticZScore);
        assert_eq!(rej[0].0.value, 21.0);
    }

    #[test]
    fn rejections_leave_windows_untouched() {
        let mut state = FilterState::default();
        monitor_filter(
            vec![m("a", 20.0, 0.0), m("a", f64::INFINITY, 60.0)],
            &rules(),
            &mut state,
        );
        assert_eq!(state.window("a"), vec![20.0]);
    }

    #[test]
    fn partition_preserves_everything() {
        let mut state = FilterState::default();
        let batch = vec![
            m("a", 20.0, 0.0),
            m("b", f64::NAN, 0.0),
            m("c", 500.0, 0.0),
            m("a", 20.2, 60.0),
        ];
        let (acc, rej) = monitor_filter(batch.clone(), &rules(), &mut state);
        assert_eq!(acc.len() + rej.len(), batch.len());
        assert_eq!(acc.len(), 2);
    }

    #[test]
    fn types_without_bounds_skip_range_checks() {
        let mut state = FilterState::default();
        let mut probe = m("a", 9999.0, 0.0);
        probe.sensor_type = SensorType::from("Exotic");
        let (acc, _) = monitor_filter(vec![probe], &rules(), &mut state);
        assert_eq!(acc.len(), 1);
    }

    #[test]
    fn window_capacity_is_enforced() {
        let mut state = FilterState::default();
        let batch: Vec<Measurement> = (0..30).map(|i| m("a", 20.0, i as f64 * 60.0)).collect();
        monitor_filter(batch, &rules(), &mut state);
        assert_eq!(state.window("a").len(), 20);
    }
}
