//! Network description files and time-grid specifications.
//!
//! A network file is a JSON object:
//!
//! ```json
//! {
//!   "nodes": 3,
//!   "arrival_rates": [1.0, 0.0, 0.0],
//!   "service_rates": [2.0, 2.0, 2.0],
//!   "routing": [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]]
//! }
//! ```
//!
//! `routing` is row-major: `routing[j][l]` is the probability of moving from
//! node `j` to node `l`. Unknown fields are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SojournError};
use crate::network::NetworkSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkFile {
    pub nodes: usize,
    pub arrival_rates: Vec<f64>,
    pub service_rates: Vec<f64>,
    pub routing: Vec<Vec<f64>>,
}

impl NetworkFile {
    pub fn into_spec(self) -> Result<NetworkSpec> {
        if self.arrival_rates.len() != self.nodes
            || self.service_rates.len() != self.nodes
            || self.routing.len() != self.nodes
        {
            return Err(SojournError::InvalidSpec(format!(
                "field lengths do not match \"nodes\": {}",
                self.nodes
            )));
        }
        NetworkSpec::new(self.arrival_rates, self.service_rates, self.routing)
    }
}

impl From<&NetworkSpec> for NetworkFile {
    fn from(spec: &NetworkSpec) -> Self {
        Self {
            nodes: spec.nodes(),
            arrival_rates: spec.arrival_rates().to_vec(),
            service_rates: spec.service_rates().to_vec(),
            routing: spec.routing().to_vec(),
        }
    }
}

/// Parses and validates a network description.
pub fn parse_network(json: &str) -> Result<NetworkSpec> {
    let file: NetworkFile =
        serde_json::from_str(json).map_err(|e| SojournError::InvalidSpec(format!("network JSON: {e}")))?;
    file.into_spec()
}

pub fn network_to_json(spec: &NetworkSpec) -> String {
    serde_json::to_string_pretty(&NetworkFile::from(spec)).expect("network serializes")
}

/// Inclusive linear grid `start:stop:count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            n => {
                let step = (self.stop - self.start) / (n - 1) as f64;
                (0..n)
                    .map(|i| if i == n - 1 { self.stop } else { self.start + step * i as f64 })
                    .collect()
            }
        }
    }
}

impl std::str::FromStr for GridSpec {
    type Err = SojournError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || SojournError::InvalidGrid(format!("expected start:stop:count, got {s:?}"));
        let parts: Vec<&str> = s.split(':').collect();
        let [start, stop, count] = parts.as_slice() else {
            return Err(bad());
        };
        let start: f64 = start.trim().parse().map_err(|_| bad())?;
        let stop: f64 = stop.trim().parse().map_err(|_| bad())?;
        let count: usize = count.trim().parse().map_err(|_| bad())?;
        if !start.is_finite() || !stop.is_finite() || start < 0.0 || stop < start || count == 0 {
            return Err(bad());
        }
        Ok(Self { start, stop, count })
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TANDEM: &str = r#"{"nodes": 3, "arrival_rates": [1, 0, 0], "service_rates": [2, 2, 2],
        "routing": [[0, 1, 0], [0, 0, 1], [0, 0, 0]]}"#;

    #[test]
    fn parses_tandem() {
        let spec = parse_network(TANDEM).unwrap();
        assert!(spec.is_tandem());
        let again = parse_network(&network_to_json(&spec)).unwrap();
        assert_eq!(spec, again);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(parse_network("{").is_err());
        assert!(parse_network(r#"{"nodes": 1, "arrival_rates": [NaN], "service_rates": [2], "routing": [[0]]}"#).is_err());
        assert!(matches!(
            parse_network(r#"{"nodes": 1, "arrival_rates": [-1], "service_rates": [2], "routing": [[0]]}"#),
            Err(SojournError::NegativeRate(_))
        ));
        assert!(parse_network(r#"{"nodes": 2, "arrival_rates": [1], "service_rates": [2], "routing": [[0]]}"#).is_err());
        assert!(parse_network(r#"{"nodes": 1, "arrival_rates": [1], "service_rates": [2], "routing": [[0]], "x": 1}"#).is_err());
    }

    #[test]
    fn grid_spec() {
        let g: GridSpec = "0:10:101".parse().unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 101);
        assert_eq!(pts[0], 0.0);
        assert_eq!(pts[100], 10.0);
        assert!((pts[37] - 3.7).abs() < 1e-12);
        assert_eq!("2:2:1".parse::<GridSpec>().unwrap().points(), vec![2.0]);
        for bad in ["0:10", "a:1:2", "5:1:10", "0:1:0", "-1:1:3"] {
            assert!(bad.parse::<GridSpec>().is_err(), "{bad}");
        }
    }
}
