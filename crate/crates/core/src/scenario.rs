//! Scenario files: the JSON document an operator hands to the engine.
//!
//! ```json
//! {
//!   "version": 1,
//!   "graph": { "inline": "a b\nb c" },
//!   "algorithm": "synafi",
//!   "b": 1,
//!   "scheme": [ { "node": "b", "round": 2 } ],
//!   "broadcasts": [ { "node": "a", "round": 1, "msg": 1, "payload": "hi" } ],
//!   "round_limit": 40,
//!   "parities": { "a": false },
//!   "seed": 0
//! }
//! ```
//!
//! `graph` is either an inline edge list or `{ "path": "graph.txt" }`
//! resolved relative to the scenario file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::algorithms::Algorithm;
use crate::engine::{Broadcast, ScenarioConfig};
use crate::graph::{Graph, GraphError, NodeId};
use crate::message::Message;
use crate::scheme::{AvailabilityScheme, SchemeError};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed scenario: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported format version {0} (expected {FORMAT_VERSION})")]
    Version(u32),
    #[error("unknown algorithm '{0}'")]
    UnknownAlgorithm(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    version: u32,
    graph: GraphSource,
    algorithm: String,
    #[serde(default = "default_capacity")]
    b: u32,
    #[serde(default)]
    scheme: Vec<BlockedPair>,
    #[serde(default)]
    broadcasts: Vec<BroadcastEntry>,
    #[serde(default)]
    round_limit: Option<u32>,
    #[serde(default)]
    parities: BTreeMap<String, bool>,
    #[serde(default)]
    seed: u64,
}

fn default_capacity() -> u32 {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
enum GraphSource {
    #[serde(rename = "inline")]
    Inline(String),
    #[serde(rename = "path")]
    Path(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockedPair {
    pub node: String,
    pub round: u32,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BroadcastEntry {
    node: String,
    round: u32,
    msg: u64,
    #[serde(default)]
    payload: String,
}

/// Loads and validates a scenario file from disk.
pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_scenario(&text, base)
}

/// Parses a scenario document; `base` anchors relative graph paths.
pub fn parse_scenario(text: &str, base: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    if file.version != FORMAT_VERSION {
        return Err(ScenarioError::Version(file.version));
    }

    let graph = match &file.graph {
        GraphSource::Inline(text) => Graph::from_edge_list(text)?,
        GraphSource::Path(rel) => {
            let path = base.join(rel);
            let text = std::fs::read_to_string(&path)
                .map_err(|source| ScenarioError::Io { path, source })?;
            Graph::from_edge_list(&text)?
        }
    };

    let algorithm = Algorithm::parse(&file.algorithm)
        .ok_or_else(|| ScenarioError::UnknownAlgorithm(file.algorithm.clone()))?;

    let scheme = AvailabilityScheme::new(
        file.scheme
            .iter()
            .map(|p| Ok((graph.node_or_err(&p.node)?, p.round)))
            .collect::<Result<Vec<_>, GraphError>>()?,
    )?;

    let broadcasts = file
        .broadcasts
        .iter()
        .map(|b| {
            Ok(Broadcast {
                node: graph.node_or_err(&b.node)?,
                round: b.round,
                message: Message::new(b.msg, b.payload.clone()),
            })
        })
        .collect::<Result<Vec<_>, GraphError>>()?;

    let initial_parities = file
        .parities
        .iter()
        .map(|(name, &p)| Ok((graph.node_or_err(name)?, p)))
        .collect::<Result<BTreeMap<NodeId, bool>, GraphError>>()?;

    Ok(ScenarioConfig {
        graph,
        scheme,
        algorithm,
        capacity: file.b,
        broadcasts,
        round_limit: file.round_limit,
        initial_parities,
        seed: file.seed,
    })
}

/// Parses a standalone scheme file: a JSON list of `{node, round}` objects.
pub fn parse_scheme_file(text: &str, g: &Graph) -> Result<AvailabilityScheme, ScenarioError> {
    let pairs: Vec<BlockedPair> = serde_json::from_str(text)?;
    Ok(AvailabilityScheme::new(
        pairs
            .iter()
            .map(|p| Ok((g.node_or_err(&p.node)?, p.round)))
            .collect::<Result<Vec<_>, GraphError>>()?,
    )?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algorithms::SelectionPolicy;

    #[test]
    fn parses_a_full_scenario() {
        let text = r#"{
            "version": 1,
            "graph": { "inline": "a b\nb c" },
            "algorithm": "multi:fair",
            "b": 2,
            "scheme": [ { "node": "b", "round": 2 } ],
            "broadcasts": [ { "node": "a", "round": 1, "msg": 7, "payload": "x" } ],
            "parities": { "c": false },
            "seed": 9
        }"#;
        let cfg = parse_scenario(text, Path::new(".")).unwrap();
        assert_eq!(cfg.graph.n(), 3);
        assert_eq!(
            cfg.algorithm,
            Algorithm::Multi(SelectionPolicy::FairRoundRobin)
        );
        assert_eq!(cfg.capacity, 2);
        assert_eq!(cfg.scheme.fault_count(), 1);
        assert_eq!(cfg.broadcasts.len(), 1);
        assert_eq!(cfg.broadcasts[0].message.payload, "x");
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.initial_parities.len(), 1);
    }

    #[test]
    fn rejects_wrong_version_and_unknown_fields() {
        let text = r#"{ "version": 2, "graph": { "inline": "a b" }, "algorithm": "synaf" }"#;
        assert!(matches!(
            parse_scenario(text, Path::new(".")),
            Err(ScenarioError::Version(2))
        ));

        let text =
            r#"{ "version": 1, "graph": { "inline": "a b" }, "algorithm": "synaf", "bogus": 1 }"#;
        assert!(matches!(
            parse_scenario(text, Path::new(".")),
            Err(ScenarioError::Json(_))
        ));
    }

    #[test]
    fn rejects_unknown_algorithm_and_node() {
        let text = r#"{ "version": 1, "graph": { "inline": "a b" }, "algorithm": "zap" }"#;
        assert!(matches!(
            parse_scenario(text, Path::new(".")),
            Err(ScenarioError::UnknownAlgorithm(_))
        ));

        let text = r#"{
            "version": 1, "graph": { "inline": "a b" }, "algorithm": "synaf",
            "broadcasts": [ { "node": "zz", "round": 1, "msg": 1 } ]
        }"#;
        assert!(matches!(
            parse_scenario(text, Path::new(".")),
            Err(ScenarioError::Graph(GraphError::UnknownNode(_)))
        ));
    }

    #[test]
    fn scheme_file_round_trip() {
        let g = Graph::from_edge_list("a b\nb c").unwrap();
        let s = parse_scheme_file(r#"[ { "node": "b", "round": 2 } ]"#, &g).unwrap();
        assert_eq!(s.fault_count(), 1);
        assert!(!s.is_available(g.node("b").unwrap(), 2));
    }
}
