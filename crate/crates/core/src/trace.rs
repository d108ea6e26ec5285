//! Execution traces: the ordered event log every oracle and metric consumes.
//!
//! Events within a round are kept in a canonical order — `(kind, node, peer,
//! message)` with kinds ordered broadcast, send, receive, deliver — so that
//! identical scenario configurations serialize to byte-identical trace files.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::graph::{Graph, NodeId};
use crate::message::MessageId;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum EventKind {
    Broadcast,
    Send,
    Receive,
    Deliver,
}

/// One trace event. For sends `node` is the sender and `peer` the receiver;
/// for receives `node` is the receiver and `peer` the sender; broadcasts and
/// delivers carry no peer.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Event {
    pub round: u32,
    pub kind: EventKind,
    pub node: NodeId,
    pub peer: Option<NodeId>,
    pub msg: MessageId,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Outcome {
    /// The run reached quiescence: no in-flight messages, no buffered state.
    Terminated {
        last_activity_round: u32,
    },
    RoundLimitExceeded {
        round_limit: u32,
    },
    /// A configuration repeated at matching parity after the last blocked
    /// round: the run would loop forever.
    CycleDetected {
        first_round: u32,
        repeat_round: u32,
    },
    /// A broadcast was injected at a node that had already received the same
    /// message id in an earlier round. The run continues, but the usual
    /// guarantees no longer apply.
    PreconditionViolated {
        node: NodeId,
        msg: MessageId,
        round: u32,
    },
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("message {0} does not occur in the trace")]
    UnknownMessage(MessageId),
    #[error("message {msg} was never received by node index {node}")]
    NotDelivered { msg: MessageId, node: NodeId },
}

#[derive(Clone, Debug)]
pub struct Trace {
    pub events: Vec<Event>,
    pub outcome: Outcome,
}

impl Trace {
    /// Restores the canonical global order after events were appended in
    /// execution-phase order.
    pub(crate) fn canonicalize(&mut self) {
        self.events.sort();
    }

    pub fn sends(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.kind == EventKind::Send)
    }

    pub fn receives(&self) -> impl Iterator<Item = &Event> {
        self.events.iter().filter(|e| e.kind == EventKind::Receive)
    }

    pub fn message_ids(&self) -> BTreeSet<MessageId> {
        self.events.iter().map(|e| e.msg).collect()
    }

    pub fn first_broadcast_round(&self, msg: MessageId) -> Option<u32> {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::Broadcast && e.msg == msg)
            .map(|e| e.round)
            .min()
    }

    pub fn origins(&self, msg: MessageId) -> BTreeSet<NodeId> {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::Broadcast && e.msg == msg)
            .map(|e| e.node)
            .collect()
    }

    pub fn first_receive_round(&self, msg: MessageId, node: NodeId) -> Option<u32> {
        self.receives()
            .filter(|e| e.msg == msg && e.node == node)
            .map(|e| e.round)
            .min()
    }

    /// Rounds until `node` first holds the message, measured from the
    /// earliest broadcast of the id. Originators count as delivered at 0.
    pub fn delivery_time(&self, msg: MessageId, node: NodeId) -> Result<u32, TraceError> {
        let start = self
            .first_broadcast_round(msg)
            .ok_or(TraceError::UnknownMessage(msg))?;
        if self.origins(msg).contains(&node) {
            return Ok(0);
        }
        let got = self
            .first_receive_round(msg, node)
            .ok_or(TraceError::NotDelivered { msg, node })?;
        Ok(got.saturating_sub(start))
    }

    /// Rounds until all activity caused by the broadcast has ceased; 0 when
    /// the message never produced a receive (single-node graph).
    pub fn termination_time(&self, msg: MessageId) -> Result<u32, TraceError> {
        let start = self
            .first_broadcast_round(msg)
            .ok_or(TraceError::UnknownMessage(msg))?;
        let last = self
            .receives()
            .filter(|e| e.msg == msg)
            .map(|e| e.round)
            .max()
            .unwrap_or(start);
        Ok(last.saturating_sub(start))
    }

    /// Number of forwards of the message: every send event counts, the
    /// originator's initial sends included.
    pub fn forward_count(&self, msg: MessageId) -> usize {
        self.sends().filter(|e| e.msg == msg).count()
    }

    /// Every send in round `i` must pair with exactly one receive in round
    /// `i + 1`, and vice versa.
    pub fn check_conservation(&self) -> Result<(), String> {
        let mut sends: Vec<(u32, NodeId, NodeId, MessageId)> = self
            .sends()
            .map(|e| (e.round + 1, e.node, e.peer.unwrap(), e.msg))
            .collect();
        let mut recvs: Vec<(u32, NodeId, NodeId, MessageId)> = self
            .receives()
            .map(|e| (e.round, e.peer.unwrap(), e.node, e.msg))
            .collect();
        sends.sort();
        recvs.sort();
        if sends == recvs {
            Ok(())
        } else {
            Err(format!(
                "sends and receives do not pair up: {} sends vs {} receives",
                sends.len(),
                recvs.len()
            ))
        }
    }

    /// Serializes to the JSON-lines trace format: a header line, one event
    /// per line, and a trailing outcome record.
    pub fn to_jsonl(&self, g: &Graph) -> String {
        let mut out = String::new();
        out.push_str("{\"format\":\"amflood-trace\",\"version\":1}\n");
        let name = |v: NodeId| serde_json::to_string(g.name(v)).unwrap();
        for e in &self.events {
            match e.kind {
                EventKind::Broadcast => writeln!(
                    out,
                    "{{\"round\":{},\"kind\":\"broadcast\",\"node\":{},\"msg\":{}}}",
                    e.round,
                    name(e.node),
                    e.msg
                ),
                EventKind::Send => writeln!(
                    out,
                    "{{\"round\":{},\"kind\":\"send\",\"from\":{},\"to\":{},\"msg\":{}}}",
                    e.round,
                    name(e.node),
                    name(e.peer.unwrap()),
                    e.msg
                ),
                EventKind::Receive => writeln!(
                    out,
                    "{{\"round\":{},\"kind\":\"receive\",\"from\":{},\"to\":{},\"msg\":{}}}",
                    e.round,
                    name(e.peer.unwrap()),
                    name(e.node),
                    e.msg
                ),
                EventKind::Deliver => writeln!(
                    out,
                    "{{\"round\":{},\"kind\":\"deliver\",\"node\":{},\"msg\":{}}}",
                    e.round,
                    name(e.node),
                    e.msg
                ),
            }
            .unwrap();
        }
        match self.outcome {
            Outcome::Terminated {
                last_activity_round,
            } => writeln!(
                out,
                "{{\"outcome\":\"terminated\",\"last_activity_round\":{last_activity_round}}}"
            ),
            Outcome::RoundLimitExceeded { round_limit } => writeln!(
                out,
                "{{\"outcome\":\"round_limit_exceeded\",\"round_limit\":{round_limit}}}"
            ),
            Outcome::CycleDetected {
                first_round,
                repeat_round,
            } => writeln!(
                out,
                "{{\"outcome\":\"cycle_detected\",\"first_round\":{first_round},\"repeat_round\":{repeat_round}}}"
            ),
            Outcome::PreconditionViolated { node, msg, round } => writeln!(
                out,
                "{{\"outcome\":\"precondition_violated\",\"node\":{},\"msg\":{},\"round\":{}}}",
                name(node),
                msg,
                round
            ),
        }
        .unwrap();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn nid(i: usize) -> NodeId {
        NodeId::from_index(i)
    }

    fn ev(round: u32, kind: EventKind, node: usize, peer: Option<usize>, msg: u64) -> Event {
        Event {
            round,
            kind,
            node: nid(node),
            peer: peer.map(nid),
            msg: MessageId(msg),
        }
    }

    fn sample() -> Trace {
        // a broadcasts msg 1 in round 1 on the path a-b.
        let mut t = Trace {
            events: vec![
                ev(1, EventKind::Broadcast, 0, None, 1),
                ev(1, EventKind::Send, 0, Some(1), 1),
                ev(2, EventKind::Receive, 1, Some(0), 1),
                ev(2, EventKind::Deliver, 1, None, 1),
            ],
            outcome: Outcome::Terminated {
                last_activity_round: 2,
            },
        };
        t.canonicalize();
        t
    }

    #[test]
    fn delivery_and_termination_times() {
        let t = sample();
        assert_eq!(t.delivery_time(MessageId(1), nid(1)).unwrap(), 1);
        assert_eq!(t.delivery_time(MessageId(1), nid(0)).unwrap(), 0);
        assert_eq!(t.termination_time(MessageId(1)).unwrap(), 1);
        assert!(matches!(
            t.delivery_time(MessageId(9), nid(0)),
            Err(TraceError::UnknownMessage(_))
        ));
    }

    #[test]
    fn conservation_detects_unmatched_send() {
        let mut t = sample();
        assert!(t.check_conservation().is_ok());
        t.events.retain(|e| e.kind != EventKind::Receive);
        assert!(t.check_conservation().is_err());
    }

    #[test]
    fn jsonl_shape() {
        let g = Graph::from_edge_list("a b").unwrap();
        let text = sample().to_jsonl(&g);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines[0].contains("amflood-trace"));
        assert_eq!(
            lines[2],
            "{\"round\":1,\"kind\":\"send\",\"from\":\"a\",\"to\":\"b\",\"msg\":1}"
        );
        assert!(lines[5].contains("\"outcome\":\"terminated\""));
        for line in lines {
            serde_json::from_str::<serde_json::Value>(line).unwrap();
        }
    }
}
