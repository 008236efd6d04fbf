//! One sensor network: node sampling with sensor noise and injected faults,
//! single-hop report delivery to the sink, and per-node battery accounting.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{Measurement, Position, SensorType};
use crate::environment::Environment;
use crate::error::{Error, Result};
use crate::seed::stable_hash;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FaultKind {
    /// Adds `magnitude` to every sample after onset.
    Bias,
    /// Repeats the last pre-onset value forever.
    Stuck,
    /// Adds `magnitude` with probability `rate` per sample after onset.
    Spike,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultSpec {
    pub kind: FaultKind,
    pub magnitude: f64,
    pub onset: f64,
    /// Spike probability per sample; ignored by the other kinds.
    #[serde(default)]
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub node_id: String,
    pub position: Position,
    pub sensor_type: SensorType,
    pub sensing_radius: f64,
    /// Initial battery, joules.
    pub battery: f64,
    #[serde(default)]
    pub fault: Option<FaultSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyModel {
    /// Draw of an active node while awake, watts.
    pub p_idle: f64,
    /// Draw of a sleeping node, watts.
    pub p_sleep: f64,
    /// Cost of taking one sample, joules.
    pub e_sample: f64,
    /// Cost of transmitting one report, joules.
    pub e_tx: f64,
}

/// The knobs a gateway can turn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub n_active: usize,
    pub report_interval: f64,
    pub alert_mode: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkModel {
    /// Packet delivery ratio node to sink.
    pub pdr: f64,
    /// Node-to-sink delay, seconds.
    pub latency: f64,
}

/// Average power of a configuration: active nodes pay idle draw plus the
/// per-report sample and transmit costs amortized over the interval, the
/// rest sleep. The planner minimizes this closed form, and a fault-free
/// loss-free run must match it.
pub fn energy_rate(cfg: &NetworkConfig, total_nodes: usize, em: &EnergyModel) -> f64 {
    let n = cfg.n_active as f64;
    let sleeping = (total_nodes - cfg.n_active) as f64;
    n * (em.p_idle + (em.e_sample + em.e_tx) / cfg.report_interval) + sleeping * em.p_sleep
}

/// Bernoulli delivery; `Some(arrival time)` on success.
pub fn deliver_report(link: &LinkModel, send_t: f64, rng: &mut impl Rng) -> Option<f64> {
    if rng.gen::<f64>() < link.pdr {
        Some(send_t + link.latency)
    } else {
        None
    }
}

#[derive(Debug, Clone)]
pub struct NodeState {
    pub spec: NodeSpec,
    pub battery: f64,
    pub alive: bool,
    pub active: bool,
    /// Report slot within the current interval, in ticks.
    phase: u64,
    /// Last clean value seen by a Stuck-faulted node before (or at) onset.
    stuck_value: Option<f64>,
}

impl NodeState {
    fn new(spec: NodeSpec) -> Self {
        let battery = spec.battery;
        NodeState {
            spec,
            battery,
            alive: battery > 0.0,
            active: false,
            phase: 0,
            stuck_value: None,
        }
    }

    fn debit(&mut self, amount: f64) -> f64 {
        let paid = amount.min(self.battery);
        self.battery -= paid;
        paid
    }
}

/// Duty-cycling selection: among live nodes, take the `n` with the most
/// battery, node id breaking ties. Re-evaluated at each reconfiguration so
/// drain rotates.
pub fn select_active(nodes: &[NodeState], n: usize) -> Result<Vec<String>> {
    let mut live: Vec<&NodeState> = nodes.iter().filter(|s| s.alive).collect();
    if n > live.len() {
        return Err(Error::InsufficientLiveNodes {
            requested: n,
            live: live.len(),
        });
    }
    live.sort_by(|a, b| {
        b.battery
            .total_cmp(&a.battery)
            .then_with(|| a.spec.node_id.cmp(&b.spec.node_id))
    });
    Ok(live
        .into_iter()
        .take(n)
        .map(|s| s.spec.node_id.clone())
        .collect())
}

#[derive(Debug)]
struct PendingReport {
    arrival: f64,
    measurement: Measurement,
}

/// Static description of one network, as a scenario declares it.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub id: String,
    pub nodes: Vec<NodeSpec>,
    pub energy: EnergyModel,
    pub link: LinkModel,
    /// Gaussian sensor noise applied on top of the true field value.
    #[serde(default)]
    pub sensor_sigma: f64,
}

/// Everything the simulator tracks for one network between ticks.
#[derive(Debug)]
pub struct NetworkState {
    pub id: String,
    pub energy_model: EnergyModel,
    pub link: LinkModel,
    pub sensor_sigma: f64,
    pub nodes: Vec<NodeState>,
    pub config: NetworkConfig,
    /// Total joules drained from all batteries since the start.
    pub energy_consumed: f64,
    pub reports_sent: u64,
    pub reports_lost: u64,
    tick_len: f64,
    rng: ChaCha8Rng,
    pending: Vec<PendingReport>,
}

impl NetworkState {
    pub fn new(
        spec: NetworkSpec,
        initial: NetworkConfig,
        tick_len: f64,
        rng: ChaCha8Rng,
    ) -> Result<Self> {
        let mut state = NetworkState {
            id: spec.id,
            energy_model: spec.energy,
            link: spec.link,
            sensor_sigma: spec.sensor_sigma,
            nodes: spec.nodes.into_iter().map(NodeState::new).collect(),
            config: initial,
            energy_consumed: 0.0,
            reports_sent: 0,
            reports_lost: 0,
            tick_len,
            rng,
            pending: Vec::new(),
        };
        state.apply_config(initial)?;
        Ok(state)
    }

    pub fn total_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn live_nodes(&self) -> usize {
        self.nodes.iter().filter(|n| n.alive).count()
    }

    pub fn live_positions(&self) -> Vec<Position> {
        self.nodes
            .iter()
            .filter(|n| n.alive)
            .map(|n| n.spec.position)
            .collect()
    }

    pub fn active_positions(&self) -> Vec<Position> {
        self.nodes
            .iter()
            .filter(|n| n.alive && n.active)
            .map(|n| n.spec.position)
            .collect()
    }

    pub fn remaining_battery(&self) -> f64 {
        self.nodes.iter().map(|n| n.battery).sum()
    }

    /// Live nodes as (position, sensing radius) in the order `select_active`
    /// would pick them, so a planner activating n nodes gets the first n.
    pub fn activation_priority(&self) -> Vec<(Position, f64)> {
        let mut live: Vec<&NodeState> = self.nodes.iter().filter(|n| n.alive).collect();
        live.sort_by(|a, b| {
            b.battery
                .total_cmp(&a.battery)
                .then_with(|| a.spec.node_id.cmp(&b.spec.node_id))
        });
        live.iter()
            .map(|n| (n.spec.position, n.spec.sensing_radius))
            .collect()
    }

    /// Currently active nodes as (position, sensing radius).
    pub fn active_footprint(&self) -> Vec<(Position, f64)> {
        self.nodes
            .iter()
            .filter(|n| n.alive && n.active)
            .map(|n| (n.spec.position, n.spec.sensing_radius))
            .collect()
    }

    /// Switches to `cfg`, reselecting the active set and recomputing report
    /// phases. Fails (rather than clamping) when `cfg.n_active` exceeds the
    /// live count, so the planner can be re-run with the reduced ceiling.
    pub fn apply_config(&mut self, cfg: NetworkConfig) -> Result<()> {
        let chosen = select_active(&self.nodes, cfg.n_active)?;
        let interval_ticks = (cfg.report_interval / self.tick_len).round().max(1.0) as u64;
        for node in &mut self.nodes {
            node.active = chosen.contains(&node.spec.node_id);
            node.phase = stable_hash(node.spec.node_id.as_bytes()) % interval_ticks;
        }
        self.config = cfg;
        Ok(())
    }

    fn sample(&mut self, idx: usize, env: &Environment, t: f64) -> Measurement {
        let noise: f64 = {
            let draw: f64 = self.rng.sample(StandardNormal);
            draw * self.sensor_sigma
        };
        let node = &mut self.nodes[idx];
        let clean = env.value(&node.spec.sensor_type, node.spec.position, t) + noise;
        let value = match &node.spec.fault {
            Some(f) if t >= f.onset => match f.kind {
                FaultKind::Bias => clean + f.magnitude,
                FaultKind::Stuck => *node.stuck_value.get_or_insert(clean),
                FaultKind::Spike => {
                    let spike: f64 = self.rng.gen();
                    if spike < f.rate {
                        clean + f.magnitude
                    } else {
                        clean
                    }
                }
            },
            _ => {
                node.stuck_value = Some(clean);
                clean
            }
        };
        Measurement {
            node_id: node.spec.node_id.clone(),
            sensor_type: node.spec.sensor_type.clone(),
            value,
            timestamp: t,
            position: node.spec.position,
        }
    }

    /// Advances one tick starting at time `t`: due nodes sample and transmit,
    /// every node pays its draw for the tick, and reports whose arrival time
    /// has come are handed to the sink.
    pub fn step(&mut self, env: &Environment, t: f64) -> Vec<Measurement> {
        let tick_idx = (t / self.tick_len).round() as u64;
        let interval_ticks = (self.config.report_interval / self.tick_len)
            .round()
            .max(1.0) as u64;
        let report_cost = self.energy_model.e_sample + self.energy_model.e_tx;

        for idx in 0..self.nodes.len() {
            let node = &self.nodes[idx];
            if !(node.alive && node.active && tick_idx % interval_ticks == node.phase) {
                continue;
            }
            if node.battery < report_cost {
                self.nodes[idx].alive = false;
                continue;
            }
            let measurement = self.sample(idx, env, t);
            self.energy_consumed += self.nodes[idx].debit(self.energy_model.e_sample);
            self.energy_consumed += self.nodes[idx].debit(self.energy_model.e_tx);
            self.reports_sent += 1;
            match deliver_report(&self.link, t, &mut self.rng) {
                Some(arrival) => self.pending.push(PendingReport {
                    arrival,
                    measurement,
                }),
                None => self.reports_lost += 1,
            }
        }

        for node in &mut self.nodes {
            if !node.alive {
                continue;
            }
            let draw = if node.active {
                self.energy_model.p_idle
            } else {
                self.energy_model.p_sleep
            } * self.tick_len;
            let paid = node.debit(draw);
            self.energy_consumed += paid;
            if paid < draw || node.battery <= 0.0 {
                node.alive = false;
            }
        }

        let mut arrived = Vec::new();
        let mut queued = Vec::new();
        for p in self.pending.drain(..) {
            if p.arrival <= t {
                arrived.push(p.measurement);
            } else {
                queued.push(p);
            }
        }
        self.pending = queued;
        arrived
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::FieldSpec;
    use rand::SeedableRng;

    fn temp() -> SensorType {
        SensorType::from("Temperature")
    }

    fn flat_env() -> Environment {
        Environment::new(
            vec![FieldSpec {
                sensor_type: temp(),
                baseline: 20.0,
                diurnal_amplitude: 0.0,
                noise_sigma: 0.0,
                noise_corr_len: 50.0,
            }],
            vec![],
            7,
        )
    }

    fn node(id: &str, battery: f64) -> NodeSpec {
        NodeSpec {
            node_id: id.to_string(),
            position: Position::new(10.0, 10.0),
            sensor_type: temp(),
            sensing_radius: 100.0,
            battery,
            fault: None,
        }
    }

    fn em() -> EnergyModel {
        EnergyModel {
            p_idle: 0.01,
            p_sleep: 0.001,
            e_sample: 0.05,
            e_tx: 0.25,
        }
    }

    fn network(nodes: Vec<NodeSpec>, cfg: NetworkConfig) -> NetworkState {
        NetworkState::new(
            NetworkSpec {
                id: "net".to_string(),
                nodes,
                energy: em(),
                link: LinkModel {
                    pdr: 1.0,
                    latency: 0.0,
                },
                sensor_sigma: 0.0,
            },
            cfg,
            1.0,
            ChaCha8Rng::seed_from_u64(3),
        )
        .unwrap()
    }

    #[test]
    fn energy_rate_matches_hand_value() {
        let cfg = NetworkConfig {
            n_active: 4,
            report_interval: 60.0,
            alert_mode: false,
        };
        let p = energy_rate(&cfg, 10, &em());
        assert!((p - 0.066).abs() < 1e-12);
    }

    #[test]
    fn energy_rate_all_asleep_boundary() {
        let cfg = NetworkConfig {
            n_active: 0,
            report_interval: 60.0,
            alert_mode: false,
        };
        assert!((energy_rate(&cfg, 10, &em()) - 0.01).abs() < 1e-12);
    }

    #[test]
    fn longer_interval_is_strictly_cheaper() {
        let mk = |dt: f64| NetworkConfig {
            n_active: 4,
            report_interval: dt,
            alert_mode: false,
        };
        assert!(energy_rate(&mk(120.0), 10, &em()) < energy_rate(&mk(60.0), 10, &em()));
    }

    #[test]
    fn select_active_prefers_battery_then_id() {
        let mut nodes: Vec<NodeState> = vec![
            NodeState::new(node("b", 10.0)),
            NodeState::new(node("a", 5.0)),
        ];
        assert_eq!(select_active(&nodes, 1).unwrap(), vec!["b"]);
        nodes[1].battery = 10.0;
        assert_eq!(select_active(&nodes, 1).unwrap(), vec!["a"]);
        nodes[0].spec.node_id = "c".to_string();
        assert_eq!(select_active(&nodes, 1).unwrap(), vec!["a"]);
        assert_eq!(select_active(&nodes, 2).unwrap(), vec!["a", "c"]);
    }

    #[test]
    fn select_active_signals_when_over_live_count() {
        let mut nodes = vec![NodeState::new(node("a", 1.0)), NodeState::new(node("b", 1.0))];
        nodes[1].alive = false;
        let err = select_active(&nodes, 2).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientLiveNodes {
                requested: 2,
                live: 1
            }
        ));
    }

    #[test]
    fn clean_sample_reads_the_field() {
        let env = flat_env();
        let mut net = network(
            vec![node("a", 1000.0)],
            NetworkConfig {
                n_active: 1,
                report_interval: 1.0,
                alert_mode: false,
            },
        );
        let reports = net.step(&env, 0.0);
        assert_eq!(reports.len(), 1);
        assert_eq!(reports[0].value, 20.0);
        assert_eq!(reports[0].node_id, "a");
    }

    #[test]
    fn bias_fault_adds_after_onset() {
        let env = flat_env();
        let mut spec = node("a", 1000.0);
        spec.fault = Some(FaultSpec {
            kind: FaultKind::Bias,
            magnitude: 15.0,
            onset: 5.0,
            rate: 0.0,
        });
        let mut net = network(
            vec![spec],
            NetworkConfig {
                n_active: 1,
                report_interval: 1.0,
                alert_mode: false,
            },
        );
        let mut values = Vec::new();
        for t in 0..10 {
            for m in net.step(&env, t as f64) {
                values.push((t, m.value));
            }
        }
        for (t, v) in values {
            if (t as f64) < 5.0 {
                assert_eq!(v, 20.0);
            } else {
                assert_eq!(v, 35.0);
            }
        }
    }

    #[test]
    fn stuck_fault_freezes_last_pre_onset_value() {
        let mut spec = node("a", 1000.0);
        spec.fault = Some(FaultSpec {
            kind: FaultKind::Stuck,
            magnitude: 0.0,
            onset: 3.0,
            rate: 0.0,
        });
        // Perturb the field after onset so a live node would read 50, not 20.
        let env_events = Environment::new(
            vec![FieldSpec {
                sensor_type: temp(),
                baseline: 20.0,
                diurnal_amplitude: 0.0,
                noise_sigma: 0.0,
                noise_corr_len: 50.0,
            }],
            vec![crate::environment::EventSpec {
                start: 4.0,
                duration: 100.0,
                center: Position::new(10.0, 10.0),
                radius: 50.0,
                intensity: [(temp(), 30.0)].into_iter().collect(),
            }],
            7,
        );
        let mut net = network(
            vec![spec],
            NetworkConfig {
                n_active: 1,
                report_interval: 1.0,
                alert_mode: false,
            },
        );
        let mut last = None;
        for t in 0..8 {
            for m in net.step(&env_events, t as f64) {
                last = Some((t, m.value));
                if t >= 3 {
                    assert_eq!(m.value, 20.0, "stuck node must repeat pre-onset value");
                }
            }
        }
        assert_eq!(last.unwrap().0, 7);
    }

    #[test]
    fn report_boundary_drains_battery_then_node_dies() {
        let em = em();
        let battery = em.e_sample + em.e_tx; // exactly one report, no idle margin
        let mut net = network(
            vec![node("a", battery)],
            NetworkConfig {
                n_active: 1,
                report_interval: 1.0,
                alert_mode: false,
            },
        );
        let env = flat_env();
        let reports = net.step(&env, 0.0);
        assert_eq!(reports.len(), 1);
        assert_eq!(net.nodes[0].battery, 0.0);
        assert!(!net.nodes[0].alive);
        let reports = net.step(&env, 1.0);
        assert!(reports.is_empty());
        assert!(net.nodes[0].battery >= 0.0);
    }

    #[test]
    fn energy_ledger_conserves_battery() {
        let mut net = network(
            (0..5).map(|i| node(&format!("n{i}"), 50.0)).collect(),
            NetworkConfig {
                n_active: 3,
                report_interval: 10.0,
                alert_mode: false,
            },
        );
        let env = flat_env();
        let initial = net.remaining_battery();
        for t in 0..500 {
            net.step(&env, t as f64);
        }
        let drained = initial - net.remaining_battery();
        assert!((drained - net.energy_consumed).abs() < 1e-9);
        assert!(net.nodes.iter().all(|n| n.battery >= 0.0));
    }

    #[test]
    fn measured_power_matches_closed_form_within_one_percent() {
        let cfg = NetworkConfig {
            n_active: 4,
            report_interval: 60.0,
            alert_mode: false,
        };
        let mut net = network(
            (0..10).map(|i| node(&format!("n{i:02}"), 1.0e6)).collect(),
            cfg,
        );
        let env = flat_env();
        let ticks = 10_000;
        for t in 0..ticks {
            net.step(&env, t as f64);
        }
        let measured = net.energy_consumed / ticks as f64;
        let predicted = energy_rate(&cfg, 10, &em());
        assert!(
            (measured - predicted).abs() / predicted < 0.01,
            "measured {measured} vs predicted {predicted}"
        );
    }

    #[test]
    fn delivery_rate_tracks_pdr() {
        let link = LinkModel {
            pdr: 0.9,
            latency: 0.0,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let delivered = (0..10_000)
            .filter(|_| deliver_report(&link, 0.0, &mut rng).is_some())
            .count();
        let rate = delivered as f64 / 10_000.0;
        assert!((rate - 0.9).abs() < 0.01, "rate {rate}");
    }

    #[test]
    fn zero_and_full_pdr_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let always = LinkModel {
            pdr: 1.0,
            latency: 2.5,
        };
        let never = LinkModel {
            pdr: 0.0,
            latency: 2.5,
        };
        for _ in 0..100 {
            assert_eq!(deliver_report(&always, 4.0, &mut rng), Some(6.5));
            assert_eq!(deliver_report(&never, 4.0, &mut rng), None);
        }
    }

    #[test]
    fn latency_defers_arrival_to_a_later_tick() {
        let mut net = NetworkState::new(
            NetworkSpec {
                id: "net".to_string(),
                nodes: vec![node("a", 1000.0)],
                energy: em(),
                link: LinkModel {
                    pdr: 1.0,
                    latency: 2.0,
                },
                sensor_sigma: 0.0,
            },
            NetworkConfig {
                n_active: 1,
                report_interval: 5.0,
                alert_mode: false,
            },
            1.0,
            ChaCha8Rng::seed_from_u64(3),
        )
        .unwrap();
        let env = flat_env();
        let mut arrivals = Vec::new();
        for t in 0..12 {
            for m in net.step(&env, t as f64) {
                arrivals.push((t, m.timestamp));
            }
        }
        assert!(!arrivals.is_empty());
        for (arrived, sent) in arrivals {
            assert_eq!(arrived as f64, sent + 2.0);
        }
    }

    #[test]
    fn one_report_attempt_per_interval() {
        let mut net = network(
            vec![node("a", 1000.0)],
            NetworkConfig {
                n_active: 1,
                report_interval: 60.0,
                alert_mode: false,
            },
        );
        let env = flat_env();
        for t in 0..600 {
            net.step(&env, t as f64);
        }
        assert_eq!(net.reports_sent, 10);
    }
}
