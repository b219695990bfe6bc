use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{PhysicalNetwork, ServiceRequest};
use crate::cost_model::{self, CostError, LatencyLevel, LatencyTable};

/// Scenario file: the physical network, the requested services and an optional latency
/// table override.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub network: PhysicalNetwork,
    pub services: ServiceRequest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency_table: Option<Vec<LatencyLevel>>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed scenario {path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Scenario {
    pub fn new(network: PhysicalNetwork, services: ServiceRequest) -> Self {
        Scenario { network, services, latency_table: None }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization is infallible")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text)
            .map_err(|source| ScenarioError::Json { path: path.display().to_string(), source })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
        let path = path.as_ref();
        fs::write(path, self.to_json() + "\n")
            .map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })
    }

    /// Capacity the latency table is built against: the smallest node traffic capacity.
    pub fn table_capacity(&self) -> f64 {
        self.network
            .nodes()
            .iter()
            .map(|n| n.traffic_capacity)
            .fold(f64::INFINITY, f64::min)
    }

    /// The override table when present, otherwise the default M/M/1 table.
    pub fn latency_table(&self) -> Result<LatencyTable, CostError> {
        let capacity = self.table_capacity();
        match &self.latency_table {
            Some(levels) => LatencyTable::from_levels(levels.clone(), capacity),
            None => cost_model::build_latency_table(
                capacity,
                cost_model::DEFAULT_PACKET_SIZE_BYTES,
                cost_model::DEFAULT_LATENCY_STEP_KBPS,
            ),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_top_level_key_rejected() {
        let text = r#"{"network":{"area":{"width":1,"height":1},"max_link_distance":1,"nodes":[],"links":[]},
                       "services":{"bps":[]},"extra":1}"#;
        let err = Scenario::from_json(text).unwrap_err();
        assert!(err.to_string().contains("unknown field"), "{err}");
    }

    #[test]
    fn unknown_nested_key_rejected() {
        let text = r#"{"network":{"area":{"width":1,"height":1},"max_link_distance":1,"nodes":[],"links":[],"colour":2},
                       "services":{"bps":[]}}"#;
        assert!(Scenario::from_json(text).is_err());
    }

    #[test]
    fn override_table_is_used() {
        let text = r#"{"network":{"area":{"width":1,"height":1},"max_link_distance":1,"nodes":[],"links":[]},
                       "services":{"bps":[]},
                       "latency_table":[{"lambda_kbps":10,"w_ms":2},{"lambda_kbps":20,"w_ms":3}]}"#;
        let sc = Scenario::from_json(text).unwrap();
        let table = sc.latency_table().unwrap();
        assert_eq!(table.levels().len(), 2);
        assert_eq!(table.node_latency(15.0).unwrap(), 3.0);
    }
}
