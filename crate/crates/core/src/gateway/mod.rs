//! The Enhanced Gateway: one controller per network running the
//! monitor-analyze-plan-execute cycle, exchanging window summaries with
//! peers, weighting them by trust and relevance, and proposing
//! configuration changes.

pub mod filter;
pub mod inference;
pub mod planner;
pub mod trust;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::domain::{relevance_weight, CouplingMatrix, Measurement, Position, RelevanceParams, SensorType};
use crate::overlay::{make_summary, SummaryReport};
use crate::wsn::NetworkConfig;

use filter::{anomaly_z, mean, monitor_filter, FilterRules, FilterState};
use inference::{
    build_features, combine_inference, evidence, infer_pattern, infer_threshold, FeatureVector,
    HistoryStore, InferenceMode, Thresholds, WeightedEvidence,
};
use planner::{plan, PlanInputs, PlannerConfig};
use trust::{update_trust, TrustParams, TrustRecord};

/// Required-quality deadband: a differing plan is suppressed while the
/// requirement has moved less than this since the last accepted plan and
/// alert status is unchanged.
pub const HYSTERESIS_Q: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct GatewayParams {
    pub rules: FilterRules,
    pub thresholds: Thresholds,
    pub trust: TrustParams,
    pub planner: PlannerConfig,
    pub inference_mode: InferenceMode,
    /// Seconds between MAPE decisions.
    pub decision_period: f64,
    pub history_capacity: usize,
    pub knn_k: usize,
}

/// What one decision produced.
#[derive(Debug, Clone)]
pub struct MapeOutcome {
    /// Present only when the gateway wants the network reconfigured.
    pub new_config: Option<NetworkConfig>,
    /// True when the plan behind this decision was the max-effort fallback.
    pub degraded: bool,
    pub summaries: Vec<SummaryReport>,
    /// True when the event probability crossed the alert level upward.
    pub alert_started: bool,
    pub p: f64,
}

#[derive(Debug)]
pub struct Gateway {
    pub id: String,
    pub network_id: String,
    pub params: GatewayParams,
    coupling: CouplingMatrix,
    relevance: RelevanceParams,
    local_types: BTreeSet<SensorType>,
    filter_state: FilterState,
    trust: BTreeMap<String, TrustRecord>,
    history: HistoryStore,
    /// Per sensor type: window means of past decisions, the z baseline.
    baselines: BTreeMap<SensorType, VecDeque<f64>>,
    /// Latest summary per (peer, sensor type).
    peer_summaries: BTreeMap<(String, String), SummaryReport>,
    arrived: Vec<SummaryReport>,
    batch: Vec<Measurement>,
    window_start: f64,
    last_p: f64,
    last_accepted_q_req: Option<f64>,
    pub accepted_count: u64,
    pub rejected_count: u64,
}

impl Gateway {
    pub fn new(
        id: impl Into<String>,
        network_id: impl Into<String>,
        local_types: BTreeSet<SensorType>,
        params: GatewayParams,
        coupling: CouplingMatrix,
        relevance: RelevanceParams,
    ) -> Self {
        let history = HistoryStore::new(params.history_capacity);
        Gateway {
            id: id.into(),
            network_id: network_id.into(),
            params,
            coupling,
            relevance,
            local_types,
            filter_state: FilterState::default(),
            trust: BTreeMap::new(),
            history,
            baselines: BTreeMap::new(),
            peer_summaries: BTreeMap::new(),
            arrived: Vec::new(),
            batch: Vec::new(),
            window_start: 0.0,
            last_p: 0.0,
            last_accepted_q_req: None,
            accepted_count: 0,
            rejected_count: 0,
        }
    }

    /// Queues internal sink arrivals for the next decision.
    pub fn receive_reports(&mut self, mut reports: Vec<Measurement>) {
        self.batch.append(&mut reports);
    }

    /// Queues a peer summary for the next decision.
    pub fn receive_summary(&mut self, summary: SummaryReport) {
        self.arrived.push(summary);
    }

    pub fn trust_table(&self) -> BTreeMap<String, f64> {
        self.trust
            .iter()
            .map(|(peer, rec)| (peer.clone(), rec.tau))
            .collect()
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    /// Relevance weight of a peer summary as seen from `own_centroid`: the
    /// strongest type coupling attenuated by centroid distance.
    fn rho_for(&self, summary: &SummaryReport, own_centroid: Position) -> f64 {
        let kappa = self
            .local_types
            .iter()
            .filter_map(|t| self.coupling.coupling(t, &summary.sensor_type).ok())
            .fold(0.0, f64::max);
        let distance = own_centroid.distance_to(&summary.centroid);
        relevance_weight(distance, kappa, &self.relevance).unwrap_or(0.0)
    }

    /// One full decision at time `t`. `own_centroid` is the centroid of the
    /// network's live nodes, `inputs` the planning context (absent when no
    /// node is live), `warm_up` freezes planning and instead records
    /// `truth_label`-labeled features into the pattern store.
    pub fn mape_tick(
        &mut self,
        t: f64,
        current: &NetworkConfig,
        own_centroid: Option<Position>,
        inputs: Option<&PlanInputs>,
        warm_up: bool,
        truth_label: bool,
    ) -> MapeOutcome {
        // Monitor: validate the window's raw arrivals.
        let batch = std::mem::take(&mut self.batch);
        let (accepted, rejected) = monitor_filter(batch, &self.params.rules, &mut self.filter_state);
        self.accepted_count += accepted.len() as u64;
        self.rejected_count += rejected.len() as u64;

        // Window statistics per sensor type.
        let mut per_type: BTreeMap<SensorType, Vec<f64>> = BTreeMap::new();
        for m in &accepted {
            per_type.entry(m.sensor_type.clone()).or_default().push(m.value);
        }
        let mut z_by_type: BTreeMap<SensorType, (f64, f64)> = BTreeMap::new();
        for (ty, values) in &per_type {
            if let Some(baseline) = self.baselines.get(ty) {
                let window: Vec<f64> = baseline.iter().copied().collect();
                let batch_mean = mean(values);
                let batch_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if let (Ok(zm), Ok(zx)) =
                    (anomaly_z(batch_mean, &window), anomaly_z(batch_max, &window))
                {
                    z_by_type.insert(ty.clone(), (zm, zx));
                }
            }
        }
        let local_z = z_by_type
            .values()
            .copied()
            .max_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));

        // Analyze, part 1: fold newly arrived peer summaries into trust.
        let arrived = std::mem::take(&mut self.arrived);
        for summary in arrived {
            let record = self
                .trust
                .entry(summary.eg_id.clone())
                .or_insert_with(|| TrustRecord::new(summary.eg_id.clone(), &self.params.trust));
            if let Some((z_local, _)) = local_z {
                *record = update_trust(record, z_local, summary.anomaly_z, &self.params.trust);
            }
            self.peer_summaries.insert(
                (summary.eg_id.clone(), summary.sensor_type.to_string()),
                summary,
            );
        }

        // Analyze, part 2: event probability from local and peer evidence.
        let mut local_evidence = Vec::new();
        for (ty, values) in &per_type {
            if let Some(band) = self.params.thresholds.get(ty) {
                let batch_max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                local_evidence.push(evidence(batch_max, band));
            }
        }
        let mut external = Vec::new();
        let mut external_z = Vec::new();
        if let Some(center) = own_centroid {
            for summary in self.peer_summaries.values() {
                let tau = self.trust[&summary.eg_id].tau;
                let rho = self.rho_for(summary, center);
                external.push(WeightedEvidence {
                    evidence: summary.event_prob,
                    tau,
                    rho,
                });
                external_z.push((summary.anomaly_z, tau, rho));
            }
        }
        let p_threshold = infer_threshold(&local_evidence, &external);
        let features: Option<FeatureVector> = local_z
            .map(|(zm, zx)| build_features(zm, zx, &external_z, t));
        let p_pattern = features
            .as_ref()
            .and_then(|fv| infer_pattern(fv, &self.history, self.params.knn_k));
        let p = combine_inference(p_threshold, p_pattern, self.params.inference_mode);

        let alert_started = p >= self.params.planner.p_alert && self.last_p < self.params.planner.p_alert;

        // Plan and execute, or collect labeled history while warmed up.
        let mut new_config = None;
        let mut degraded = false;
        if warm_up {
            if let Some(fv) = features {
                self.history.push(fv, truth_label);
            }
        } else if let Some(inputs) = inputs {
            let outcome = plan(p, &self.params.planner, inputs);
            degraded = outcome.degraded;
            let forced = current.n_active > inputs.nodes.len();
            let changed = outcome.config != *current;
            let suppressed = match self.last_accepted_q_req {
                Some(q0) => {
                    (outcome.required_q - q0).abs() < HYSTERESIS_Q
                        && outcome.config.alert_mode == current.alert_mode
                }
                None => false,
            };
            if changed && (forced || !suppressed) {
                self.last_accepted_q_req = Some(outcome.required_q);
                new_config = Some(outcome.config);
            }
        }

        // Summaries for peers, one per sensor type seen this window.
        let mut summaries = Vec::new();
        for ty in per_type.keys() {
            let of_type: Vec<Measurement> = accepted
                .iter()
                .filter(|m| &m.sensor_type == ty)
                .cloned()
                .collect();
            let z = z_by_type.get(ty).map(|(zm, _)| *zm).unwrap_or(0.0);
            if let Some(s) =
                make_summary(&self.id, ty, &of_type, z, (self.window_start, t), p)
            {
                summaries.push(s);
            }
        }

        // Advance baselines only now so this window was judged against the past.
        for (ty, values) in &per_type {
            let baseline = self.baselines.entry(ty.clone()).or_default();
            baseline.push_back(mean(values));
            while baseline.len() > self.params.rules.window {
                baseline.pop_front();
            }
        }
        self.window_start = t;
        self.last_p = p;

        MapeOutcome {
            new_config,
            degraded,
            summaries,
            alert_started,
            p,
        }
    }
}
