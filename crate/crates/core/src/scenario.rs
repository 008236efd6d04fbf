//! Scenario files: the TOML schema, its defaults, and the cross-field
//! validation that turns a parsed file into something the simulator can run.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::domain::{CouplingMatrix, RelevanceParams, SensorType};
use crate::environment::{EventSpec, FieldSpec};
use crate::error::{Error, Result};
use crate::gateway::filter::FilterRules;
use crate::gateway::inference::{InferenceMode, Thresholds};
use crate::gateway::planner::{AppType, PlannerConfig};
use crate::gateway::trust::TrustParams;
use crate::gateway::GatewayParams;
use crate::metrics::{QualityModel, WorldRect};
use crate::overlay::OverlayLink;
use crate::wsn::NetworkSpec;

fn default_tick() -> f64 {
    1.0
}

fn default_true() -> bool {
    true
}

fn default_grace() -> f64 {
    60.0
}

fn default_decision_period() -> f64 {
    30.0
}

fn default_history_capacity() -> usize {
    2000
}

fn default_knn_k() -> usize {
    5
}

fn default_interval_set() -> Vec<f64> {
    vec![10.0, 30.0, 60.0, 120.0, 300.0]
}

fn default_q_min() -> f64 {
    0.2
}

fn default_q_max() -> f64 {
    0.9
}

fn default_p_alert() -> f64 {
    0.5
}

fn default_alert_max_interval() -> f64 {
    10.0
}

fn default_grid_resolution() -> f64 {
    10.0
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    world: WorldRect,
    #[serde(default = "default_tick")]
    tick: f64,
    duration: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    warm_up: f64,
    #[serde(default = "default_true")]
    collaboration: bool,
    #[serde(default = "default_grace")]
    grace: f64,
    #[serde(default)]
    fields: Vec<FieldSpec>,
    #[serde(default)]
    events: Vec<EventSpec>,
    #[serde(default)]
    coupling: Option<RawCoupling>,
    #[serde(default)]
    relevance: Option<RelevanceParams>,
    #[serde(default)]
    overlay: Option<RawOverlay>,
    networks: Vec<NetworkSpec>,
    gateways: Vec<RawGateway>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoupling {
    /// Extra sensor types beyond the deployed ones (deployed types are
    /// always part of the matrix).
    #[serde(default)]
    types: Vec<SensorType>,
    #[serde(default)]
    pairs: Vec<RawCouplingPair>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCouplingPair {
    a: SensorType,
    b: SensorType,
    k: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOverlay {
    #[serde(default)]
    latency: f64,
    #[serde(default)]
    loss: f64,
    /// Directed gateway pairs allowed to exchange summaries; absent means
    /// full mesh.
    #[serde(default)]
    adjacency: Option<Vec<(String, String)>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGateway {
    id: String,
    network: String,
    #[serde(default = "default_decision_period")]
    decision_period: f64,
    #[serde(default)]
    inference_mode: InferenceMode,
    #[serde(default = "default_history_capacity")]
    history_capacity: usize,
    #[serde(default = "default_knn_k")]
    knn_k: usize,
    #[serde(default)]
    filter: FilterRules,
    thresholds: Thresholds,
    #[serde(default)]
    trust: TrustParams,
    planner: RawPlanner,
    #[serde(default)]
    quality: RawQuality,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPlanner {
    #[serde(default = "default_interval_set")]
    interval_set: Vec<f64>,
    #[serde(default = "default_q_min")]
    q_min: f64,
    #[serde(default = "default_q_max")]
    q_max: f64,
    app_type: AppType,
    #[serde(default = "default_p_alert")]
    p_alert: f64,
    #[serde(default = "default_alert_max_interval")]
    alert_max_interval: f64,
    /// Defaults to half the network's nodes, rounded up.
    #[serde(default)]
    alert_min_nodes: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawQuality {
    /// Defaults to the smallest planner interval.
    #[serde(default)]
    ref_interval: Option<f64>,
    #[serde(default = "default_grid_resolution")]
    grid_resolution: f64,
    #[serde(default = "default_weight")]
    w_c: f64,
    #[serde(default = "default_weight")]
    w_f: f64,
    #[serde(default = "default_weight")]
    w_d: f64,
}

impl Default for RawQuality {
    fn default() -> Self {
        RawQuality {
            ref_interval: None,
            grid_resolution: default_grid_resolution(),
            w_c: default_weight(),
            w_f: default_weight(),
            w_d: default_weight(),
        }
    }
}

/// One gateway bound to its network, with every knob resolved.
#[derive(Debug, Clone)]
pub struct GatewaySpec {
    pub id: String,
    pub network: String,
    pub params: GatewayParams,
    pub quality: QualityModel,
}

/// A fully validated scenario. `gateways[i]` manages `networks[i]`.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub world: WorldRect,
    pub tick: f64,
    pub duration: f64,
    pub seed: u64,
    pub warm_up: f64,
    pub collaboration: bool,
    /// Seconds after an event's end during which an alert still counts as
    /// detecting it.
    pub grace: f64,
    pub fields: Vec<FieldSpec>,
    pub events: Vec<EventSpec>,
    pub coupling: CouplingMatrix,
    pub relevance: RelevanceParams,
    pub overlay_link: OverlayLink,
    pub adjacency: Option<Vec<(String, String)>>,
    pub networks: Vec<NetworkSpec>,
    pub gateways: Vec<GatewaySpec>,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text =
        fs::read_to_string(path).map_err(|source| Error::io(path.display().to_string(), source))?;
    parse_scenario(&text)
}

pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let raw: RawScenario =
        toml::from_str(text).map_err(|e| Error::scenario("scenario", e.to_string()))?;
    build(raw)
}

fn err<T>(location: impl Into<String>, message: impl Into<String>) -> Result<T> {
    Err(Error::scenario(location, message))
}

fn check_finite(value: f64, location: &str) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        err(location, format!("must be finite, got {value}"))
    }
}

fn check_positive(value: f64, location: &str) -> Result<()> {
    check_finite(value, location)?;
    if value > 0.0 {
        Ok(())
    } else {
        err(location, format!("must be positive, got {value}"))
    }
}

fn check_non_negative(value: f64, location: &str) -> Result<()> {
    check_finite(value, location)?;
    if value >= 0.0 {
        Ok(())
    } else {
        err(location, format!("must not be negative, got {value}"))
    }
}

fn check_unit(value: f64, location: &str) -> Result<()> {
    check_finite(value, location)?;
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        err(location, format!("must lie in [0, 1], got {value}"))
    }
}

fn is_tick_multiple(value: f64, tick: f64) -> bool {
    let ratio = value / tick;
    (ratio - ratio.round()).abs() < 1e-9
}

fn build(raw: RawScenario) -> Result<Scenario> {
    check_positive(raw.world.width, "world.width")?;
    check_positive(raw.world.height, "world.height")?;
    check_positive(raw.tick, "tick")?;
    check_non_negative(raw.duration, "duration")?;
    if !is_tick_multiple(raw.duration, raw.tick) {
        return err("duration", "must be a multiple of tick");
    }
    check_non_negative(raw.warm_up, "warm_up")?;
    if raw.warm_up > raw.duration {
        return err("warm_up", "must not exceed duration");
    }
    check_non_negative(raw.grace, "grace")?;

    let mut field_types = BTreeSet::new();
    for (i, f) in raw.fields.iter().enumerate() {
        let loc = format!("fields[{i}]");
        check_finite(f.baseline, &format!("{loc}.baseline"))?;
        check_finite(f.diurnal_amplitude, &format!("{loc}.diurnal_amplitude"))?;
        check_non_negative(f.noise_sigma, &format!("{loc}.noise_sigma"))?;
        check_positive(f.noise_corr_len, &format!("{loc}.noise_corr_len"))?;
        if !field_types.insert(f.sensor_type.clone()) {
            return err(
                format!("{loc}.sensor_type"),
                format!("duplicate field for sensor type '{}'", f.sensor_type),
            );
        }
    }

    for (i, e) in raw.events.iter().enumerate() {
        let loc = format!("events[{i}]");
        check_non_negative(e.start, &format!("{loc}.start"))?;
        check_positive(e.duration, &format!("{loc}.duration"))?;
        check_positive(e.radius, &format!("{loc}.radius"))?;
        for (ty, intensity) in &e.intensity {
            check_finite(*intensity, &format!("{loc}.intensity.{ty}"))?;
            if !field_types.contains(ty) {
                return err(
                    format!("{loc}.intensity"),
                    format!("no field defined for sensor type '{ty}'"),
                );
            }
        }
    }

    if raw.networks.is_empty() {
        return err("networks", "at least one network is required");
    }
    let mut network_ids = BTreeSet::new();
    let mut deployed_all = BTreeSet::new();
    for (i, n) in raw.networks.iter().enumerate() {
        let loc = format!("networks[{i}]");
        if n.id.is_empty() {
            return err(format!("{loc}.id"), "must not be empty");
        }
        if !network_ids.insert(n.id.clone()) {
            return err(format!("{loc}.id"), format!("duplicate network id '{}'", n.id));
        }
        check_non_negative(n.sensor_sigma, &format!("{loc}.sensor_sigma"))?;
        check_non_negative(n.energy.p_idle, &format!("{loc}.energy.p_idle"))?;
        check_non_negative(n.energy.p_sleep, &format!("{loc}.energy.p_sleep"))?;
        check_non_negative(n.energy.e_sample, &format!("{loc}.energy.e_sample"))?;
        check_non_negative(n.energy.e_tx, &format!("{loc}.energy.e_tx"))?;
        if n.energy.p_sleep > n.energy.p_idle {
            return err(
                format!("{loc}.energy.p_sleep"),
                "sleep draw must not exceed idle draw",
            );
        }
        check_unit(n.link.pdr, &format!("{loc}.link.pdr"))?;
        check_non_negative(n.link.latency, &format!("{loc}.link.latency"))?;
        if n.nodes.is_empty() {
            return err(format!("{loc}.nodes"), "at least one node is required");
        }
        let mut node_ids = BTreeSet::new();
        for (j, node) in n.nodes.iter().enumerate() {
            let nloc = format!("{loc}.nodes[{j}]");
            if !node_ids.insert(node.node_id.clone()) {
                return err(
                    format!("{nloc}.node_id"),
                    format!("duplicate node id '{}'", node.node_id),
                );
            }
            check_finite(node.position.x, &format!("{nloc}.position.x"))?;
            check_finite(node.position.y, &format!("{nloc}.position.y"))?;
            check_positive(node.sensing_radius, &format!("{nloc}.sensing_radius"))?;
            check_positive(node.battery, &format!("{nloc}.battery"))?;
            if !field_types.contains(&node.sensor_type) {
                return err(
                    format!("{nloc}.sensor_type"),
                    format!("no field defined for sensor type '{}'", node.sensor_type),
                );
            }
            deployed_all.insert(node.sensor_type.clone());
            if let Some(fault) = &node.fault {
                check_finite(fault.magnitude, &format!("{nloc}.fault.magnitude"))?;
                check_non_negative(fault.onset, &format!("{nloc}.fault.onset"))?;
                check_unit(fault.rate, &format!("{nloc}.fault.rate"))?;
            }
        }
    }

    let mut gateway_ids = BTreeSet::new();
    let mut gateway_by_network: BTreeMap<String, usize> = BTreeMap::new();
    for (i, g) in raw.gateways.iter().enumerate() {
        let loc = format!("gateways[{i}]");
        if g.id.is_empty() {
            return err(format!("{loc}.id"), "must not be empty");
        }
        if !gateway_ids.insert(g.id.clone()) {
            return err(format!("{loc}.id"), format!("duplicate gateway id '{}'", g.id));
        }
        if !network_ids.contains(&g.network) {
            return err(
                format!("{loc}.network"),
                format!("unknown network '{}'", g.network),
            );
        }
        if let Some(prev) = gateway_by_network.insert(g.network.clone(), i) {
            return err(
                format!("{loc}.network"),
                format!(
                    "network '{}' already has gateway '{}'",
                    g.network, raw.gateways[prev].id
                ),
            );
        }
    }
    for id in &network_ids {
        if !gateway_by_network.contains_key(id) {
            return err("gateways", format!("network '{id}' has no gateway"));
        }
    }

    let mut gateways = Vec::with_capacity(raw.networks.len());
    for net in &raw.networks {
        let gi = gateway_by_network[&net.id];
        let g = &raw.gateways[gi];
        let loc = format!("gateways[{gi}]");

        check_positive(g.decision_period, &format!("{loc}.decision_period"))?;
        if !is_tick_multiple(g.decision_period, raw.tick) {
            return err(
                format!("{loc}.decision_period"),
                "must be a multiple of tick",
            );
        }
        if g.history_capacity == 0 {
            return err(format!("{loc}.history_capacity"), "must be at least 1");
        }
        if g.knn_k == 0 {
            return err(format!("{loc}.knn_k"), "must be at least 1");
        }

        let deployed: BTreeSet<SensorType> = net
            .nodes
            .iter()
            .map(|node| node.sensor_type.clone())
            .collect();

        check_positive(g.filter.z_max, &format!("{loc}.filter.z_max"))?;
        if g.filter.window == 0 {
            return err(format!("{loc}.filter.window"), "must be at least 1");
        }
        for ty in &deployed {
            if !g.filter.bounds.contains_key(ty) {
                return err(
                    format!("{loc}.filter.bounds"),
                    format!("missing entry for sensor type '{ty}'"),
                );
            }
        }
        for (ty, b) in &g.filter.bounds {
            let bloc = format!("{loc}.filter.bounds.{ty}");
            check_finite(b.value_min, &format!("{bloc}.value_min"))?;
            check_finite(b.value_max, &format!("{bloc}.value_max"))?;
            if b.value_min >= b.value_max {
                return err(bloc, "value_min must be below value_max");
            }
            check_positive(b.max_rate, &format!("{bloc}.max_rate"))?;
        }

        for ty in &deployed {
            if !g.thresholds.contains_key(ty) {
                return err(
                    format!("{loc}.thresholds"),
                    format!("missing entry for sensor type '{ty}'"),
                );
            }
        }
        for (ty, band) in &g.thresholds {
            let tloc = format!("{loc}.thresholds.{ty}");
            check_finite(band.theta_low, &format!("{tloc}.theta_low"))?;
            check_finite(band.theta_high, &format!("{tloc}.theta_high"))?;
            if band.theta_low >= band.theta_high {
                return err(tloc, "theta_low must be below theta_high");
            }
        }

        check_unit(g.trust.alpha, &format!("{loc}.trust.alpha"))?;
        if g.trust.alpha == 0.0 {
            return err(format!("{loc}.trust.alpha"), "must be positive");
        }
        check_positive(g.trust.delta_max, &format!("{loc}.trust.delta_max"))?;
        check_unit(g.trust.tau0, &format!("{loc}.trust.tau0"))?;

        let ploc = format!("{loc}.planner");
        if g.planner.interval_set.is_empty() {
            return err(format!("{ploc}.interval_set"), "must not be empty");
        }
        for (k, iv) in g.planner.interval_set.iter().enumerate() {
            let iloc = format!("{ploc}.interval_set[{k}]");
            check_positive(*iv, &iloc)?;
            if !is_tick_multiple(*iv, raw.tick) {
                return err(iloc, "must be a multiple of tick");
            }
            if k > 0 && g.planner.interval_set[k - 1] >= *iv {
                return err(iloc, "intervals must be strictly ascending");
            }
        }
        check_unit(g.planner.q_min, &format!("{ploc}.q_min"))?;
        check_unit(g.planner.q_max, &format!("{ploc}.q_max"))?;
        if g.planner.q_min >= g.planner.q_max {
            return err(format!("{ploc}.q_min"), "must be below q_max");
        }
        check_unit(g.planner.p_alert, &format!("{ploc}.p_alert"))?;
        check_positive(
            g.planner.alert_max_interval,
            &format!("{ploc}.alert_max_interval"),
        )?;
        let total_nodes = net.nodes.len();
        let alert_min_nodes = g.planner.alert_min_nodes.unwrap_or(total_nodes.div_ceil(2));
        if alert_min_nodes == 0 {
            return err(format!("{ploc}.alert_min_nodes"), "must be at least 1");
        }
        if alert_min_nodes > total_nodes {
            return err(
                format!("{ploc}.alert_min_nodes"),
                format!("exceeds the network's {total_nodes} nodes"),
            );
        }

        let qloc = format!("{loc}.quality");
        let ref_interval = g.quality.ref_interval.unwrap_or(g.planner.interval_set[0]);
        check_positive(ref_interval, &format!("{qloc}.ref_interval"))?;
        check_positive(g.quality.grid_resolution, &format!("{qloc}.grid_resolution"))?;
        check_non_negative(g.quality.w_c, &format!("{qloc}.w_c"))?;
        check_non_negative(g.quality.w_f, &format!("{qloc}.w_f"))?;
        check_non_negative(g.quality.w_d, &format!("{qloc}.w_d"))?;

        gateways.push(GatewaySpec {
            id: g.id.clone(),
            network: g.network.clone(),
            params: GatewayParams {
                rules: g.filter.clone(),
                thresholds: g.thresholds.clone(),
                trust: g.trust,
                planner: PlannerConfig {
                    interval_set: g.planner.interval_set.clone(),
                    q_min: g.planner.q_min,
                    q_max: g.planner.q_max,
                    app_type: g.planner.app_type,
                    p_alert: g.planner.p_alert,
                    alert_max_interval: g.planner.alert_max_interval,
                    alert_min_nodes,
                },
                inference_mode: g.inference_mode,
                decision_period: g.decision_period,
                history_capacity: g.history_capacity,
                knn_k: g.knn_k,
            },
            quality: QualityModel {
                ref_interval,
                grid_resolution: g.quality.grid_resolution,
                w_c: g.quality.w_c,
                w_f: g.quality.w_f,
                w_d: g.quality.w_d,
            },
        });
    }

    let raw_coupling = raw.coupling.unwrap_or(RawCoupling {
        types: Vec::new(),
        pairs: Vec::new(),
    });
    let mut matrix_types = field_types.clone();
    matrix_types.extend(raw_coupling.types.iter().cloned());
    let coupling = CouplingMatrix::new(
        matrix_types,
        raw_coupling
            .pairs
            .iter()
            .map(|p| (p.a.clone(), p.b.clone(), p.k)),
    )
    .map_err(|e| Error::scenario("coupling.pairs", e.to_string()))?;
    let deployed_vec: Vec<&SensorType> = deployed_all.iter().collect();
    for (i, a) in deployed_vec.iter().enumerate() {
        for b in &deployed_vec[i + 1..] {
            if coupling.coupling(a, b).is_err() {
                return err(
                    "coupling.pairs",
                    format!("missing coupling for pair ('{a}', '{b}')"),
                );
            }
        }
    }

    let relevance = raw.relevance.unwrap_or_default();
    check_positive(relevance.d0, "relevance.d0")?;

    let raw_overlay = raw.overlay.unwrap_or(RawOverlay {
        latency: 0.0,
        loss: 0.0,
        adjacency: None,
    });
    check_non_negative(raw_overlay.latency, "overlay.latency")?;
    check_unit(raw_overlay.loss, "overlay.loss")?;
    if let Some(adjacency) = &raw_overlay.adjacency {
        for (k, (from, to)) in adjacency.iter().enumerate() {
            let aloc = format!("overlay.adjacency[{k}]");
            if !gateway_ids.contains(from) {
                return err(aloc, format!("unknown gateway '{from}'"));
            }
            if !gateway_ids.contains(to) {
                return err(aloc, format!("unknown gateway '{to}'"));
            }
            if from == to {
                return err(aloc, "a gateway cannot link to itself");
            }
        }
    }

    Ok(Scenario {
        world: raw.world,
        tick: raw.tick,
        duration: raw.duration,
        seed: raw.seed,
        warm_up: raw.warm_up,
        collaboration: raw.collaboration,
        grace: raw.grace,
        fields: raw.fields,
        events: raw.events,
        coupling,
        relevance,
        overlay_link: OverlayLink {
            latency: raw_overlay.latency,
            loss: raw_overlay.loss,
        },
        adjacency: raw_overlay.adjacency,
        networks: raw.networks,
        gateways,
    })
}
