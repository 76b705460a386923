//! Nexus replication between KBMS nodes: a node that commits to be a nexus
//! for a term receives every statement using it, either by being listed
//! directly or through a directory node.

mod codec;
mod node;
mod sim;

pub use codec::{decode, decode_stream, encode, CodecError};
pub use node::{DeliveryStatus, Node, Outgoing, QueryReport, RouteReport};
pub use sim::{
    run_harness, run_scenario, run_scenario_with, Direct, HarnessReport, Scenario, ScenarioError, SharedNode, Sim, SimOptions,
    Transport,
};

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::fl::{StatementGraph, Term};

pub const DEFAULT_TTL: u32 = 8;
pub const MAX_RETRIES: u32 = 3;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.into())
    }
}

/// How a node reaches the nexus set of a term.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Routing {
    SelfNexus,
    NexusList(BTreeSet<NodeId>),
    DirectoryRef(NodeId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    Advertise,
    PutStatement,
    Query,
    Results,
    WhoIsNexus,
    NexusAnswer,
    Ack,
}

impl MessageKind {
    pub const ALL: [MessageKind; 7] = [
        MessageKind::Advertise,
        MessageKind::PutStatement,
        MessageKind::Query,
        MessageKind::Results,
        MessageKind::WhoIsNexus,
        MessageKind::NexusAnswer,
        MessageKind::Ack,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MessageKind::Advertise => "advertise",
            MessageKind::PutStatement => "put",
            MessageKind::Query => "query",
            MessageKind::Results => "results",
            MessageKind::WhoIsNexus => "who_is_nexus",
            MessageKind::NexusAnswer => "nexus_answer",
            MessageKind::Ack => "ack",
        }
    }
}

/// One replication message. `hash` is the statement id for statement
/// traffic and a correlation key for queries; `payload` depends on `kind`:
///
/// | kind | payload |
/// |---|---|
/// | advertise, who_is_nexus | term |
/// | put | author TAB FL |
/// | query | FL |
/// | results | lines of author TAB FL |
/// | nexus_answer | term TAB comma-separated nodes |
/// | ack | outcome code |
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Message {
    pub kind: MessageKind,
    /// Node that started the exchange; answers go back to it.
    pub origin: NodeId,
    pub ttl: u32,
    pub hash: String,
    pub payload: String,
}

/// Terms that route a statement: formal terms other than built-ins.
pub fn routable_terms(g: &StatementGraph) -> BTreeSet<Term> {
    g.formal_terms()
        .into_iter()
        .filter(|t| !t.source.is_empty() && !t.is_thing())
        .collect()
}
