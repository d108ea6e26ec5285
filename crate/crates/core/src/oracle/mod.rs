//! Executable proof machinery.
//!
//! The termination argument for the algorithm family rests on two graph
//! constructions, both built here so that simulator runs can be certified
//! against them:
//!
//! * [`DoubleCover`] — two copies of the base graph with every cross edge
//!   (endpoints equidistant from the originator) rerouted between the
//!   copies. The result is bipartite, and a plain flooding run on the base
//!   graph corresponds to breadth-first layers of the cover.
//! * [`LayeredGraph`] — the layer-by-layer unrolling of a run under an
//!   availability scheme. A blocked send appears as a dummy vertex that adds
//!   exactly two edges and lets the blocked copy reappear two layers (one
//!   parity period) later. Sends in round `i` correspond one-to-one with the
//!   copy-to-copy edges from layer `i - 1` to layer `i`, and each copy's
//!   originator set equals the sender buffer the node holds when its send
//!   phase starts.
//!
//! The checkers compare a recorded trace against these structures and report
//! every mismatch; the source-extension builder reduces staggered
//! multi-source broadcasts to a simultaneous broadcast on a path-extended
//! graph.

mod checks;
mod double_cover;
mod layered;

pub use checks::{
    build_source_extension, check_edge_counts, check_m_equals_originator,
    check_multisource_equivalence, check_send_equivalence, render_oracle_reports,
    sample_materializing_scheme, EdgeCountReport, MultiSourceReport, OriginatorMismatch,
    OriginatorReport, SendEquivalenceReport, SourceExtension,
};
pub use double_cover::{CoverNode, DoubleCover};
pub use layered::{build_layered, LayeredGraph, LgKind, LgVertexId, OracleError};
