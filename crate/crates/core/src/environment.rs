//! Synthetic ground truth: a spatial field per sensor type (baseline plus a
//! diurnal swing and spatially correlated noise) perturbed by scheduled
//! events with linear radial falloff.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{Position, SensorType};
use crate::seed::{derive_seed, hash_to_unit_normal, mix_coords};

/// Seconds in the diurnal cycle driving the sinusoidal term.
pub const DIURNAL_PERIOD: f64 = 86_400.0;

/// Shape of the true field for one sensor type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub sensor_type: SensorType,
    pub baseline: f64,
    #[serde(default)]
    pub diurnal_amplitude: f64,
    /// Standard deviation of the correlated noise term.
    #[serde(default)]
    pub noise_sigma: f64,
    /// Grid resolution of the noise: positions in the same cell at the same
    /// whole second see the same draw.
    #[serde(default = "default_noise_corr_len")]
    pub noise_corr_len: f64,
}

fn default_noise_corr_len() -> f64 {
    50.0
}

/// A transient disturbance (fire, gas release, ...) centered somewhere in
/// the world, fading linearly to zero at `radius`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventSpec {
    pub start: f64,
    pub duration: f64,
    pub center: Position,
    pub radius: f64,
    /// Peak additive delta per sensor type at the event center.
    pub intensity: BTreeMap<SensorType, f64>,
}

impl EventSpec {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }

    pub fn is_active(&self, t: f64) -> bool {
        self.start <= t && t < self.end()
    }
}

/// What actually happened during a run, for scoring detections.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthEvent {
    pub event_id: usize,
    pub start: f64,
    pub end: f64,
}

pub type GroundTruthLog = Vec<GroundTruthEvent>;

/// Ids (list indices) of events active at `t`; active on `[start, end)`.
pub fn event_active(events: &[EventSpec], t: f64) -> Vec<usize> {
    events
        .iter()
        .enumerate()
        .filter(|(_, e)| e.is_active(t))
        .map(|(i, _)| i)
        .collect()
}

/// True field value at a position and time. The noise term is a stateless
/// hash of (seed, noise grid cell, whole second), so repeat queries agree
/// and nearby positions share a draw.
pub fn field_value(
    spec: &FieldSpec,
    events: &[EventSpec],
    pos: Position,
    t: f64,
    noise_seed: u64,
) -> f64 {
    let mut v = spec.baseline
        + spec.diurnal_amplitude * (2.0 * std::f64::consts::PI * t / DIURNAL_PERIOD).sin();
    for event in events.iter().filter(|e| e.is_active(t)) {
        if let Some(&delta) = event.intensity.get(&spec.sensor_type) {
            let falloff = (1.0 - pos.distance_to(&event.center) / event.radius).max(0.0);
            v += delta * falloff;
        }
    }
    if spec.noise_sigma > 0.0 {
        let cell_x = (pos.x / spec.noise_corr_len).floor() as i64;
        let cell_y = (pos.y / spec.noise_corr_len).floor() as i64;
        let h = mix_coords(noise_seed, &[cell_x, cell_y, t.floor() as i64]);
        v += spec.noise_sigma * hash_to_unit_normal(h);
    }
    v
}

/// All fields and events of a run, with one independent noise stream per
/// sensor type derived from the master seed.
#[derive(Debug, Clone)]
pub struct Environment {
    fields: BTreeMap<SensorType, FieldSpec>,
    events: Vec<EventSpec>,
    noise_seeds: BTreeMap<SensorType, u64>,
}

impl Environment {
    pub fn new(fields: Vec<FieldSpec>, events: Vec<EventSpec>, master_seed: u64) -> Self {
        let mut map = BTreeMap::new();
        let mut noise_seeds = BTreeMap::new();
        for f in fields {
            let seed = derive_seed(master_seed, &format!("field:{}", f.sensor_type));
            noise_seeds.insert(f.sensor_type.clone(), seed);
            map.insert(f.sensor_type.clone(), f);
        }
        Environment {
            fields: map,
            events,
            noise_seeds,
        }
    }

    pub fn has_field(&self, sensor_type: &SensorType) -> bool {
        self.fields.contains_key(sensor_type)
    }

    /// Field value for a configured sensor type. Scenario validation
    /// guarantees every deployed type has a field.
    pub fn value(&self, sensor_type: &SensorType, pos: Position, t: f64) -> f64 {
        let spec = self
            .fields
            .get(sensor_type)
            .unwrap_or_else(|| panic!("no field configured for sensor type {sensor_type}"));
        field_value(spec, &self.events, pos, t, self.noise_seeds[sensor_type])
    }

    pub fn events(&self) -> &[EventSpec] {
        &self.events
    }

    pub fn active_event_ids(&self, t: f64) -> Vec<usize> {
        event_active(&self.events, t)
    }

    pub fn ground_truth(&self) -> GroundTruthLog {
        self.events
            .iter()
            .enumerate()
            .map(|(i, e)| GroundTruthEvent {
                event_id: i,
                start: e.start,
                end: e.end(),
            })
            .collect()
    }
}
