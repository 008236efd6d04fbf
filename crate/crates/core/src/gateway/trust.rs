//! Per-peer reliability tracking: an exponential moving average of how well
//! a peer's reported anomaly agrees with our own.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrustParams {
    /// EMA rate: weight of the newest agreement score.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Discrepancy (in z units) at or beyond which a report scores 0.
    #[serde(default = "default_delta_max")]
    pub delta_max: f64,
    /// Trust assigned to a peer never heard from before.
    #[serde(default = "default_tau0")]
    pub tau0: f64,
}

fn default_alpha() -> f64 {
    0.1
}

fn default_delta_max() -> f64 {
    4.0
}

fn default_tau0() -> f64 {
    0.5
}

impl Default for TrustParams {
    fn default() -> Self {
        TrustParams {
            alpha: 0.1,
            delta_max: 4.0,
            tau0: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustRecord {
    pub peer_id: String,
    pub tau: f64,
    pub updates: u64,
    pub last_score: f64,
}

impl TrustRecord {
    pub fn new(peer_id: impl Into<String>, params: &TrustParams) -> Self {
        TrustRecord {
            peer_id: peer_id.into(),
            tau: params.tau0,
            updates: 0,
            last_score: params.tau0,
        }
    }
}

/// One trust update from a pair of local/external anomaly scores: the
/// absolute z discrepancy maps linearly onto an agreement score in [0,1]
/// (zero at `delta_max` and beyond) which is folded into the EMA.
pub fn update_trust(
    rec: &TrustRecord,
    z_local: f64,
    z_external: f64,
    params: &TrustParams,
) -> TrustRecord {
    let delta = (z_external - z_local).abs();
    let score = (1.0 - delta / params.delta_max).max(0.0);
    let tau = ((1.0 - params.alpha) * rec.tau + params.alpha * score).clamp(0.0, 1.0);
    TrustRecord {
        peer_id: rec.peer_id.clone(),
        tau,
        updates: rec.updates + 1,
        last_score: score,
    }
}
