//! Scoring and output: area coverage, the composite measurement-quality
//! index, detection latency against ground truth, and CSV emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::Position;
use crate::environment::GroundTruthLog;
use crate::error::{Error, Result};

/// Deployment area, origin at (0, 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldRect {
    pub width: f64,
    pub height: f64,
}

/// Parameters of the quality index Q = C^wc * freshness^wf * pdr^wd.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityModel {
    /// Interval granting full freshness credit; longer intervals decay it.
    pub ref_interval: f64,
    /// Cell size of the coverage grid, metres.
    pub grid_resolution: f64,
    pub w_c: f64,
    pub w_f: f64,
    pub w_d: f64,
}

fn grid_cells(extent: f64, resolution: f64) -> usize {
    ((extent / resolution).ceil() as usize).max(1)
}

/// Fraction of grid cell centers within sensing range of at least one of
/// the given nodes, each with its own radius.
pub fn covered_fraction(nodes: &[(Position, f64)], world: &WorldRect, resolution: f64) -> f64 {
    if nodes.is_empty() {
        return 0.0;
    }
    let nx = grid_cells(world.width, resolution);
    let ny = grid_cells(world.height, resolution);
    let mut covered = 0usize;
    for ix in 0..nx {
        for iy in 0..ny {
            let center = Position::new(
                (ix as f64 + 0.5) * resolution,
                (iy as f64 + 0.5) * resolution,
            );
            if nodes
                .iter()
                .any(|(p, r)| p.distance_to(&center) <= *r)
            {
                covered += 1;
            }
        }
    }
    covered as f64 / (nx * ny) as f64
}

/// Coverage of a set of equal-range nodes.
pub fn coverage(
    positions: &[Position],
    sensing_radius: f64,
    world: &WorldRect,
    resolution: f64,
) -> f64 {
    let nodes: Vec<(Position, f64)> = positions.iter().map(|p| (*p, sensing_radius)).collect();
    covered_fraction(&nodes, world, resolution)
}

/// Coverage of every prefix of `nodes` in one sweep: element k is the
/// coverage of the first k+1 nodes. The planner evaluates all candidate
/// active-set sizes against this.
pub fn coverage_profile(
    nodes: &[(Position, f64)],
    world: &WorldRect,
    resolution: f64,
) -> Vec<f64> {
    let nx = grid_cells(world.width, resolution);
    let ny = grid_cells(world.height, resolution);
    let total = (nx * ny) as f64;
    let mut covered = vec![false; nx * ny];
    let mut count = 0usize;
    let mut profile = Vec::with_capacity(nodes.len());
    for (p, r) in nodes {
        for ix in 0..nx {
            for iy in 0..ny {
                let idx = ix * ny + iy;
                if covered[idx] {
                    continue;
                }
                let center = Position::new(
                    (ix as f64 + 0.5) * resolution,
                    (iy as f64 + 0.5) * resolution,
                );
                if p.distance_to(&center) <= *r {
                    covered[idx] = true;
                    count += 1;
                }
            }
        }
        profile.push(count as f64 / total);
    }
    profile
}

/// Quality with the coverage factor already known; the planner reuses this
/// against its incremental coverage profile so both paths agree exactly.
pub fn quality_from_coverage(c: f64, report_interval: f64, pdr: f64, qm: &QualityModel) -> f64 {
    let freshness = (qm.ref_interval / report_interval).min(1.0);
    c.powf(qm.w_c) * freshness.powf(qm.w_f) * pdr.powf(qm.w_d)
}

/// Composite quality of running the given active nodes at `report_interval`
/// under delivery ratio `pdr`.
pub fn quality(
    active: &[(Position, f64)],
    report_interval: f64,
    pdr: f64,
    qm: &QualityModel,
    world: &WorldRect,
) -> f64 {
    let c = covered_fraction(active, world, qm.grid_resolution);
    quality_from_coverage(c, report_interval, pdr, qm)
}

/// One gateway alert, tied to the network it controls.
#[derive(Debug, Clone, PartialEq)]
pub struct Alert {
    pub eg_id: String,
    pub network_id: String,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventOutcome {
    pub event_id: usize,
    pub start: f64,
    pub end: f64,
    pub latency: Option<f64>,
    pub detecting_eg: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub events: Vec<EventOutcome>,
    pub false_alerts: u64,
}

/// Scores alerts against ground truth: an event is detected by the first
/// alert inside [start, end + grace]; alerts inside no such window are
/// false alerts.
pub fn detection_latency(
    ground_truth: &GroundTruthLog,
    alerts: &[(String, f64)],
    grace: f64,
) -> DetectionReport {
    let mut sorted: Vec<&(String, f64)> = alerts.iter().collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let events = ground_truth
        .iter()
        .map(|ev| {
            let hit = sorted
                .iter()
                .find(|(_, t)| ev.start <= *t && *t <= ev.end + grace);
            EventOutcome {
                event_id: ev.event_id,
                start: ev.start,
                end: ev.end,
                latency: hit.map(|(_, t)| t - ev.start),
                detecting_eg: hit.map(|(eg, _)| eg.clone()),
            }
        })
        .collect();
    let false_alerts = sorted
        .iter()
        .filter(|(_, t)| {
            !ground_truth
                .iter()
                .any(|ev| ev.start <= *t && *t <= ev.end + grace)
        })
        .count() as u64;
    DetectionReport {
        events,
        false_alerts,
    }
}

/// One per-network sample of the run state at a tick boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeseriesRow {
    pub tick: u64,
    pub network_id: String,
    pub power_w: f64,
    pub energy_j: f64,
    pub q: f64,
    pub p: f64,
    pub n_active: usize,
    pub report_interval: f64,
    pub alert: bool,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NetworkCounters {
    pub accepted: u64,
    pub rejected: u64,
    pub reports_sent: u64,
    pub reports_lost: u64,
}

/// Everything a finished run yields for scoring and emission.
#[derive(Debug, Clone, Default)]
pub struct RunMetrics {
    /// Network ids in scenario order; fixes row order in the outputs.
    pub network_ids: Vec<String>,
    pub timeseries: Vec<TimeseriesRow>,
    pub alerts: Vec<Alert>,
    pub ground_truth: GroundTruthLog,
    pub grace: f64,
    pub dropped_summaries: u64,
    pub counters: BTreeMap<String, NetworkCounters>,
}

impl RunMetrics {
    pub fn total_energy(&self, network_id: &str) -> f64 {
        self.timeseries
            .iter()
            .rev()
            .find(|r| r.network_id == network_id)
            .map(|r| r.energy_j)
            .unwrap_or(0.0)
    }

    pub fn mean_q(&self, network_id: &str) -> f64 {
        let qs: Vec<f64> = self
            .timeseries
            .iter()
            .filter(|r| r.network_id == network_id)
            .map(|r| r.q)
            .collect();
        if qs.is_empty() {
            0.0
        } else {
            qs.iter().sum::<f64>() / qs.len() as f64
        }
    }

    /// Alert stream (eg_id, t) restricted to one network.
    pub fn network_alerts(&self, network_id: &str) -> Vec<(String, f64)> {
        self.alerts
            .iter()
            .filter(|a| a.network_id == network_id)
            .map(|a| (a.eg_id.clone(), a.t))
            .collect()
    }

    pub fn all_alerts(&self) -> Vec<(String, f64)> {
        self.alerts.iter().map(|a| (a.eg_id.clone(), a.t)).collect()
    }
}

pub fn fmt_num(x: f64) -> String {
    format!("{x:.6}")
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    fs::write(path, content).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Writes timeseries.csv, events.csv, and summary.csv into `dir`.
pub fn emit_csv(metrics: &RunMetrics, dir: &Path) -> Result<()> {
    let empty_run = metrics.timeseries.is_empty();

    let mut ts = String::from(
        "tick,network_id,power_w,energy_j,q,p,n_active,report_interval,alert\n",
    );
    for r in &metrics.timeseries {
        writeln!(
            ts,
            "{},{},{},{},{},{},{},{},{}",
            r.tick,
            r.network_id,
            fmt_num(r.power_w),
            fmt_num(r.energy_j),
            fmt_num(r.q),
            fmt_num(r.p),
            r.n_active,
            fmt_num(r.report_interval),
            r.alert
        )
        .expect("string write");
    }
    write_file(&dir.join("timeseries.csv"), &ts)?;

    let mut ev = String::from("event_id,start,end,detected,latency_s,detecting_eg\n");
    if !empty_run {
        let report = detection_latency(&metrics.ground_truth, &metrics.all_alerts(), metrics.grace);
        for e in &report.events {
            writeln!(
                ev,
                "{},{},{},{},{},{}",
                e.event_id,
                fmt_num(e.start),
                fmt_num(e.end),
                e.latency.is_some(),
                e.latency.map(fmt_num).unwrap_or_default(),
                e.detecting_eg.clone().unwrap_or_default()
            )
            .expect("string write");
        }
    }
    write_file(&dir.join("events.csv"), &ev)?;

    let mut sm = String::from("network_id,total_energy_j,mean_q,detections,misses,false_alerts\n");
    if !empty_run {
        for id in &metrics.network_ids {
            let report =
                detection_latency(&metrics.ground_truth, &metrics.network_alerts(id), metrics.grace);
            let detections = report.events.iter().filter(|e| e.latency.is_some()).count();
            let misses = report.events.len() - detections;
            writeln!(
                sm,
                "{},{},{},{},{},{}",
                id,
                fmt_num(metrics.total_energy(id)),
                fmt_num(metrics.mean_q(id)),
                detections,
                misses,
                report.false_alerts
            )
            .expect("string write");
        }
    }
    write_file(&dir.join("summary.csv"), &sm)?;
    Ok(())
}
