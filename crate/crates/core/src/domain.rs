//! Shared vocabulary: sensor types, positions, measurements, and the
//! cross-network relevance model (semantic coupling attenuated by distance).

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Kind of physical quantity a node measures ("Temperature", "CO2", ...).
///
/// Open-ended on purpose: scenarios may introduce new types without code
/// changes, as long as the coupling matrix covers every pair they use.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SensorType(pub String);

impl SensorType {
    pub fn new(name: impl Into<String>) -> Self {
        SensorType(name.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SensorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SensorType {
    fn from(s: &str) -> Self {
        SensorType(s.to_string())
    }
}

/// Point in the shared 2D deployment area, metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance_to(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// One raw sensor reading as it leaves a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub node_id: String,
    pub sensor_type: SensorType,
    pub value: f64,
    /// Simulation time of the sample, seconds.
    pub timestamp: f64,
    pub position: Position,
}

/// Symmetric semantic-coupling coefficients between sensor types.
///
/// Same-type coupling is implicitly 1. Cross-type pairs must be listed
/// explicitly (0 is a valid, meaningful entry); looking up an unlisted pair
/// is a configuration error, not a silent zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CouplingMatrix {
    types: BTreeSet<SensorType>,
    entries: BTreeMap<(SensorType, SensorType), f64>,
}

impl CouplingMatrix {
    /// Builds a matrix over `types` with the given cross-type coefficients.
    /// Pair order is irrelevant; duplicate pairs with conflicting values and
    /// coefficients outside [0, 1] are rejected.
    pub fn new(
        types: impl IntoIterator<Item = SensorType>,
        pairs: impl IntoIterator<Item = (SensorType, SensorType, f64)>,
    ) -> Result<Self> {
        let types: BTreeSet<SensorType> = types.into_iter().collect();
        let mut entries = BTreeMap::new();
        for (a, b, k) in pairs {
            if !(0.0..=1.0).contains(&k) || !k.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "coupling ({a}, {b}) = {k} outside [0, 1]"
                )));
            }
            if !types.contains(&a) || !types.contains(&b) {
                return Err(Error::InvalidArgument(format!(
                    "coupling ({a}, {b}) references a sensor type missing from the type set"
                )));
            }
            if a == b && k != 1.0 {
                return Err(Error::InvalidArgument(format!(
                    "same-type coupling ({a}, {a}) must be 1, got {k}"
                )));
            }
            let key = Self::key(&a, &b);
            if let Some(&prev) = entries.get(&key) {
                if prev != k {
                    return Err(Error::InvalidArgument(format!(
                        "conflicting coupling values for ({a}, {b}): {prev} vs {k}"
                    )));
                }
            }
            entries.insert(key, k);
        }
        Ok(CouplingMatrix { types, entries })
    }

    fn key(a: &SensorType, b: &SensorType) -> (SensorType, SensorType) {
        if a <= b {
            (a.clone(), b.clone())
        } else {
            (b.clone(), a.clone())
        }
    }

    pub fn types(&self) -> impl Iterator<Item = &SensorType> {
        self.types.iter()
    }

    pub fn contains_type(&self, t: &SensorType) -> bool {
        self.types.contains(t)
    }

    /// Coupling coefficient for a pair of sensor types.
    pub fn coupling(&self, a: &SensorType, b: &SensorType) -> Result<f64> {
        let missing = |a: &SensorType, b: &SensorType| Error::UnknownCoupling {
            a: a.to_string(),
            b: b.to_string(),
        };
        if !self.types.contains(a) {
            return Err(missing(a, b));
        }
        if !self.types.contains(b) {
            return Err(missing(a, b));
        }
        if a == b {
            return Ok(1.0);
        }
        self.entries
            .get(&Self::key(a, b))
            .copied()
            .ok_or_else(|| missing(a, b))
    }
}

/// Tuning for distance attenuation of cross-network relevance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelevanceParams {
    /// Attenuation length scale, metres.
    #[serde(default = "default_d0")]
    pub d0: f64,
}

fn default_d0() -> f64 {
    500.0
}

impl Default for RelevanceParams {
    fn default() -> Self {
        RelevanceParams { d0: 500.0 }
    }
}

/// Relevance of information from a network `distance` metres away whose
/// sensor type couples to ours with coefficient `coupling`:
/// `coupling * exp(-distance / d0)`.
pub fn relevance_weight(distance: f64, coupling: f64, params: &RelevanceParams) -> Result<f64> {
    if !(distance.is_finite() && distance >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "relevance distance must be finite and non-negative, got {distance}"
        )));
    }
    if !(0.0..=1.0).contains(&coupling) || !coupling.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "relevance coupling must lie in [0, 1], got {coupling}"
        )));
    }
    if !(params.d0.is_finite() && params.d0 > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "relevance d0 must be finite and positive, got {}",
            params.d0
        )));
    }
    Ok(coupling * (-distance / params.d0).exp())
}

/// Centroid of a non-empty set of positions.
pub fn centroid(positions: &[Position]) -> Result<Position> {
    if positions.is_empty() {
        return Err(Error::InvalidArgument(
            "centroid of an empty position set".to_string(),
        ));
    }
    let n = positions.len() as f64;
    let (sx, sy) = positions
        .iter()
        .fold((0.0, 0.0), |(sx, sy), p| (sx + p.x, sy + p.y));
    Ok(Position::new(sx / n, sy / n))
}

/// Distance between the centroids of two non-empty position sets.
pub fn centroid_distance(a: &[Position], b: &[Position]) -> Result<f64> {
    Ok(centroid(a)?.distance_to(&centroid(b)?))
}
