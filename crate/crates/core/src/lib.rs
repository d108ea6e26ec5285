//! Deterministic simulator and verification toolkit for the amnesiac-flooding
//! family of synchronous broadcast algorithms.
//!
//! Amnesiac flooding (`synaf`) is a stateless broadcast: every round, a node
//! forwards a message to exactly those neighbors it did not receive it from in
//! the same round. The toolkit covers the variants for intermittent channels
//! (`synafi`, parity-split sender buffers) and for multi-message broadcast
//! under bounded channel capacity (`multi:smallest`, `multi:fair`, message
//! table with per-parity sender lists), plus the intentionally broken
//! deferred variant (`naive`) that demonstrates why the parity split is
//! needed.
//!
//! Three layers:
//! * [`engine`] executes scenarios in synchronous rounds (messages sent in
//!   round `i` are received in round `i + 1`) and produces a canonical
//!   [`trace::Trace`].
//! * [`oracle`] builds the proof structures — the double cover of the graph
//!   with respect to the originator and the layered execution graph induced
//!   by an availability scheme — and certifies traces against them.
//! * [`metrics`] checks every finished trace against the exact message-count
//!   and round-bound guarantees of the algorithm family.

pub mod algorithms;
pub mod engine;
pub mod graph;
pub mod message;
pub mod metrics;
pub mod oracle;
pub mod scenario;
pub mod scheme;
pub mod trace;

pub use algorithms::{Algorithm, SelectionPolicy};
pub use engine::{run_scenario, run_with_artifacts, RunArtifacts, RunOptions, ScenarioConfig};
pub use graph::{Graph, NodeId};
pub use message::{Message, MessageId, SenderSet};
pub use scheme::AvailabilityScheme;
pub use trace::{Event, EventKind, Outcome, Trace};
