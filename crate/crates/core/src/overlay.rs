//! Gateway-to-gateway exchange: the summary message one EG shares about its
//! window, and a simulated transport with per-link latency and loss.

use std::collections::BTreeMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{centroid, Measurement, Position, SensorType};
use crate::gateway::filter::mean;

/// What one gateway tells its peers about a reporting window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub eg_id: String,
    pub sensor_type: SensorType,
    pub window_start: f64,
    pub window_end: f64,
    pub mean: f64,
    /// Population variance of the accepted values.
    pub variance: f64,
    pub count: usize,
    pub anomaly_z: f64,
    pub centroid: Position,
    /// Max distance from the centroid to a contributing node.
    pub coverage_radius: f64,
    pub event_prob: f64,
}

impl SummaryReport {
    /// Canonical single-line text form, fields in declaration order with
    /// fixed 6-decimal numerics; golden-file tested.
    pub fn canonical_text(&self) -> String {
        format!(
            "eg_id={} sensor_type={} window_start={:.6} window_end={:.6} mean={:.6} \
             variance={:.6} count={} anomaly_z={:.6} centroid_x={:.6} centroid_y={:.6} \
             coverage_radius={:.6} event_prob={:.6}",
            self.eg_id,
            self.sensor_type,
            self.window_start,
            self.window_end,
            self.mean,
            self.variance,
            self.count,
            self.anomaly_z,
            self.centroid.x,
            self.centroid.y,
            self.coverage_radius,
            self.event_prob
        )
    }
}

/// Builds the summary of one window from the accepted measurements of a
/// single sensor type; `None` when the window is empty.
pub fn make_summary(
    eg_id: &str,
    sensor_type: &SensorType,
    accepted: &[Measurement],
    anomaly_z: f64,
    window: (f64, f64),
    event_prob: f64,
) -> Option<SummaryReport> {
    if accepted.is_empty() {
        return None;
    }
    let values: Vec<f64> = accepted.iter().map(|m| m.value).collect();
    let m = mean(&values);
    let variance = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64;
    let positions: Vec<Position> = accepted.iter().map(|m| m.position).collect();
    let center = centroid(&positions).expect("non-empty by construction");
    let coverage_radius = positions
        .iter()
        .map(|p| p.distance_to(&center))
        .fold(0.0, f64::max);
    Some(SummaryReport {
        eg_id: eg_id.to_string(),
        sensor_type: sensor_type.clone(),
        window_start: window.0,
        window_end: window.1,
        mean: m,
        variance,
        count: accepted.len(),
        anomaly_z,
        centroid: center,
        coverage_radius,
        event_prob,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverlayLink {
    #[serde(default)]
    pub latency: f64,
    #[serde(default)]
    pub loss: f64,
}

/// Transport decision for one message: `Some(arrival time)` or dropped.
pub fn publish_one(link: &OverlayLink, t: f64, rng: &mut impl Rng) -> Option<f64> {
    if rng.gen::<f64>() < link.loss {
        None
    } else {
        Some(t + link.latency)
    }
}

#[derive(Debug, Clone)]
struct Queued {
    arrival: f64,
    sender: String,
    msg: SummaryReport,
}

/// The full exchange fabric: one seeded loss stream per directed link and
/// one inbox per gateway. Full mesh unless an adjacency list narrows it.
#[derive(Debug)]
pub struct Overlay {
    peers: Vec<String>,
    link: OverlayLink,
    adjacency: Option<Vec<(String, String)>>,
    rngs: BTreeMap<(String, String), ChaCha8Rng>,
    inboxes: BTreeMap<String, Vec<Queued>>,
    pub sent: u64,
    pub delivered: u64,
    pub dropped: u64,
}

impl Overlay {
    pub fn new(
        peers: Vec<String>,
        link: OverlayLink,
        adjacency: Option<Vec<(String, String)>>,
        mut seed_for_link: impl FnMut(&str, &str) -> u64,
    ) -> Self {
        use rand::SeedableRng;
        let mut rngs = BTreeMap::new();
        let mut inboxes = BTreeMap::new();
        for from in &peers {
            inboxes.insert(from.clone(), Vec::new());
            for to in &peers {
                if from != to {
                    let key = (from.clone(), to.clone());
                    rngs.insert(key, ChaCha8Rng::seed_from_u64(seed_for_link(from, to)));
                }
            }
        }
        Overlay {
            peers,
            link,
            adjacency,
            rngs,
            inboxes,
            sent: 0,
            delivered: 0,
            dropped: 0,
        }
    }

    fn connected(&self, from: &str, to: &str) -> bool {
        match &self.adjacency {
            None => true,
            Some(pairs) => pairs.iter().any(|(a, b)| a == from && b == to),
        }
    }

    /// Sends `msg` from its gateway to every connected peer, each over its
    /// own loss stream.
    pub fn publish(&mut self, from: &str, msg: &SummaryReport, t: f64) {
        let targets: Vec<String> = self
            .peers
            .iter()
            .filter(|to| to.as_str() != from && self.connected(from, to))
            .cloned()
            .collect();
        for to in targets {
            self.sent += 1;
            let rng = self
                .rngs
                .get_mut(&(from.to_string(), to.clone()))
                .expect("link rng exists for every pair");
            match publish_one(&self.link, t, rng) {
                Some(arrival) => {
                    self.inboxes.get_mut(&to).expect("inbox exists").push(Queued {
                        arrival,
                        sender: from.to_string(),
                        msg: msg.clone(),
                    });
                }
                None => self.dropped += 1,
            }
        }
    }

    /// Messages due at or before `t` for one gateway, ordered by
    /// (arrival time, sender id) and removed from the inbox.
    pub fn drain(&mut self, eg_id: &str, t: f64) -> Vec<SummaryReport> {
        let inbox = match self.inboxes.get_mut(eg_id) {
            Some(i) => i,
            None => return Vec::new(),
        };
        let mut due = Vec::new();
        let mut waiting = Vec::new();
        for q in inbox.drain(..) {
            if q.arrival <= t {
                due.push(q);
            } else {
                waiting.push(q);
            }
        }
        *inbox = waiting;
        due.sort_by(|a, b| {
            a.arrival
                .total_cmp(&b.arrival)
                .then_with(|| a.sender.cmp(&b.sender))
        });
        self.delivered += due.len() as u64;
        due.into_iter().map(|q| q.msg).collect()
    }

    /// Messages still in flight, for conservation checks.
    pub fn queued(&self) -> u64 {
        self.inboxes.values().map(|i| i.len() as u64).sum()
    }
}
