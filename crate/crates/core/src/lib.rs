//! Deterministic simulator of co-located wireless sensor networks whose
//! gateways exchange trust-weighted summaries and reconfigure their own
//! networks to trade energy against measurement quality.

pub mod domain;
pub mod environment;
pub mod error;
pub mod gateway;
pub mod metrics;
pub mod overlay;
pub mod scenario;
pub mod seed;
pub mod sim;
pub mod wsn;

pub use domain::{
    centroid, centroid_distance, relevance_weight, CouplingMatrix, Measurement, Position,
    RelevanceParams, SensorType,
};
pub use environment::{
    event_active, field_value, Environment, EventSpec, FieldSpec, GroundTruthEvent, GroundTruthLog,
};
pub use error::{Error, Result};
pub use gateway::filter::{
    anomaly_z, monitor_filter, FilterRules, FilterState, RejectReason, SensorBounds,
};
pub use gateway::inference::{
    build_features, combine_inference, evidence, infer_pattern, infer_threshold, FeatureVector,
    HistoryStore, InferenceMode, ThresholdBand, Thresholds, WeightedEvidence,
};
pub use gateway::planner::{plan, quality_required, AppType, Plan, PlanInputs, PlannerConfig};
pub use gateway::trust::{update_trust, TrustParams, TrustRecord};
pub use gateway::{Gateway, GatewayParams, MapeOutcome};
pub use metrics::{
    coverage, coverage_profile, covered_fraction, detection_latency, emit_csv, quality,
    quality_from_coverage, Alert, DetectionReport, EventOutcome, NetworkCounters, QualityModel,
    RunMetrics, TimeseriesRow, WorldRect,
};
pub use overlay::{make_summary, publish_one, Overlay, OverlayLink, SummaryReport};
pub use scenario::{load_scenario, parse_scenario, GatewaySpec, Scenario};
pub use sim::{compare, run, write_compare_csv, CompareReport, CompareRow, RunResult};
pub use wsn::{
    deliver_report, energy_rate, select_active, EnergyModel, FaultKind, FaultSpec, LinkModel,
    NetworkConfig, NetworkSpec, NetworkState, NodeSpec, NodeState,
};
