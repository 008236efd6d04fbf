//! Configuration search: pick the cheapest (active count, report interval)
//! pair whose quality clears the requirement implied by the current event
//! probability, tightening to alert constraints when needed.

use serde::{Deserialize, Serialize};

use crate::domain::Position;
use crate::metrics::{coverage_profile, quality_from_coverage, QualityModel, WorldRect};
use crate::wsn::{energy_rate, EnergyModel, LinkModel, NetworkConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AppType {
    EventDriven,
    Monitoring,
    Hybrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    /// Allowed report intervals, ascending, seconds.
    pub interval_set: Vec<f64>,
    pub q_min: f64,
    pub q_max: f64,
    pub app_type: AppType,
    /// Event probability at which alert handling kicks in.
    pub p_alert: f64,
    /// Hardest acceptable interval while alerting.
    pub alert_max_interval: f64,
    /// Fewest acceptable active nodes while alerting.
    pub alert_min_nodes: usize,
}

/// Quality the plan must reach: interpolates between the floor at p = 0 and
/// the ceiling at p = 1.
pub fn quality_required(p: f64, cfg: &PlannerConfig) -> f64 {
    cfg.q_min + p * (cfg.q_max - cfg.q_min)
}

/// Static context the search runs against.
#[derive(Debug, Clone, Copy)]
pub struct PlanInputs<'a> {
    /// Live nodes as (position, sensing radius), in activation priority
    /// order; the first n entries are the set that activating n nodes yields.
    pub nodes: &'a [(Position, f64)],
    pub energy: &'a EnergyModel,
    pub link: &'a LinkModel,
    pub quality: &'a QualityModel,
    pub world: &'a WorldRect,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plan {
    pub config: NetworkConfig,
    /// True when no configuration met the requirement and the max-effort
    /// fallback was returned instead.
    pub degraded: bool,
    pub required_q: f64,
    pub achieved_q: f64,
}

/// Exhaustive search over n in 1..=N and the interval set. Feasible means
/// quality at or above the requirement, plus the alert constraints when an
/// event-driven or hybrid application sees p at or past p_alert. Cheapest
/// energy wins; ties fall to higher quality, then fewer nodes, then the
/// longer interval. With nothing feasible, everything runs flat out.
pub fn plan(p: f64, cfg: &PlannerConfig, inputs: &PlanInputs) -> Plan {
    let total = inputs.nodes.len();
    debug_assert!(total >= 1, "planner needs at least one live node");
    let required_q = quality_required(p, cfg);
    let alerting = matches!(cfg.app_type, AppType::EventDriven | AppType::Hybrid)
        && p >= cfg.p_alert;
    let profile = coverage_profile(inputs.nodes, inputs.world, inputs.quality.grid_resolution);

    struct Candidate {
        energy: f64,
        q: f64,
        n: usize,
        interval: f64,
    }
    let mut best: Option<Candidate> = None;
    for n in 1..=total {
        for &interval in &cfg.interval_set {
            if alerting && (interval > cfg.alert_max_interval || n < cfg.alert_min_nodes) {
                continue;
            }
            let q = quality_from_coverage(profile[n - 1], interval, inputs.link.pdr, inputs.quality);
            if q < required_q {
                continue;
            }
            let candidate = NetworkConfig {
                n_active: n,
                report_interval: interval,
                alert_mode: alerting,
            };
            let energy = energy_rate(&candidate, total, inputs.energy);
            let wins = match &best {
                None => true,
                Some(b) => {
                    energy < b.energy
                        || (energy == b.energy
                            && (q > b.q
                                || (q == b.q
                                    && (n < b.n || (n == b.n && interval > b.interval)))))
                }
            };
            if wins {
                best = Some(Candidate {
                    energy,
                    q,
                    n,
                    interval,
                });
            }
        }
    }

    match best {
        Some(b) => Plan {
            config: NetworkConfig {
                n_active: b.n,
                report_interval: b.interval,
                alert_mode: alerting,
            },
            degraded: false,
            required_q,
            achieved_q: b.q,
        },
        None => {
            let interval = cfg.interval_set[0];
            let achieved_q =
                quality_from_coverage(profile[total - 1], interval, inputs.link.pdr, inputs.quality);
            Plan {
                config: NetworkConfig {
                    n_active: total,
                    report_interval: interval,
                    alert_mode: p >= cfg.p_alert,
                },
                degraded: true,
                required_q,
                achieved_q,
            }
        }
    }
}
