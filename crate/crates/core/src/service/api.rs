//! Request and response bodies, the error classes clients branch on, and
//! the client trait shared by the in-process and the remote driver.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::federation::NodeId;
use crate::fl::FlError;
use crate::kb::KbError;
use crate::protocol::{AddOutcome, Argumentation, CorrectiveLink, Rejection, RemoveOutcome};
use crate::store::{LinkId, ObjectId, ObjectKind, Subgraph, UserId};
use crate::valuation::{Criterion, Evaluation, RateError, UsefulnessScores};

/// Error classes with stable codes: `transport`, `syntax`,
/// `protocol_violation`, `not_found` and `invalid_argument`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum ApiError {
    #[error("transport: {message}")]
    Transport { message: String },
    #[error("{message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("rejected ({}): {rejection}", rejection.code())]
    ProtocolViolation { rejection: Rejection },
    #[error("not found: {what}")]
    NotFound { what: String },
    #[error("invalid argument: {message}")]
    InvalidArgument { message: String },
}

impl ApiError {
    pub fn class(&self) -> &'static str {
        match self {
            ApiError::Transport { .. } => "transport",
            ApiError::Syntax { .. } => "syntax",
            ApiError::ProtocolViolation { .. } => "protocol_violation",
            ApiError::NotFound { .. } => "not_found",
            ApiError::InvalidArgument { .. } => "invalid_argument",
        }
    }

    /// Reason code of a protocol violation.
    pub fn reason(&self) -> Option<&'static str> {
        match self {
            ApiError::ProtocolViolation { rejection } => Some(rejection.code()),
            _ => None,
        }
    }

    pub fn transport(e: impl std::fmt::Display) -> Self {
        ApiError::Transport { message: e.to_string() }
    }

    pub fn invalid(e: impl std::fmt::Display) -> Self {
        ApiError::InvalidArgument { message: e.to_string() }
    }
}

impl From<FlError> for ApiError {
    fn from(e: FlError) -> Self {
        let (line, column) = e.position().unwrap_or((0, 0));
        ApiError::Syntax {
            line,
            column,
            message: e.to_string(),
        }
    }
}

impl From<Rejection> for ApiError {
    fn from(r: Rejection) -> Self {
        match r {
            Rejection::UnknownId { id } => ApiError::NotFound { what: id },
            rejection => ApiError::ProtocolViolation { rejection },
        }
    }
}

impl From<KbError> for ApiError {
    fn from(e: KbError) -> Self {
        match e {
            KbError::Syntax(e) => e.into(),
            KbError::Rate(RateError::UnknownObject(id)) => ApiError::NotFound { what: id.to_string() },
            KbError::Rate(e @ RateError::OutOfRange(_)) => ApiError::invalid(e),
            KbError::UnknownObject(what) => ApiError::NotFound { what },
            KbError::Journal(e) => ApiError::transport(e),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryRequest {
    /// FL statement the results must specialize.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub authors: Option<Vec<UserId>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_user_score: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_usefulness: Option<f64>,
    #[serde(default)]
    pub offset: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub id: ObjectId,
    pub kind: ObjectKind,
    pub author: UserId,
    pub text: String,
    /// Usefulness; statements only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

/// Hits generals first, with the specialization edges (child, parent)
/// among them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryAnswer {
    pub hits: Vec<Hit>,
    pub edges: Vec<(ObjectId, ObjectId)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Accepted {
    pub id: ObjectId,
    pub links: Vec<LinkId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub actor: UserId,
    pub text: String,
    pub outcome: AddOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectView {
    pub id: ObjectId,
    pub kind: ObjectKind,
    pub author: UserId,
    pub creator: UserId,
    pub text: String,
    pub live: bool,
    pub generalizations: Vec<ObjectId>,
    pub specializations: Vec<ObjectId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Health {
    pub node: NodeId,
    pub seq: u64,
    pub objects: usize,
    pub statements: usize,
}

/// A codec record addressed to a node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub to: NodeId,
    pub record: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Parsed {
    pub canonical: String,
    pub pretty: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Request {
    Submit {
        author: UserId,
        fl: String,
        #[serde(default, skip_serializing_if = "Vec::is_empty")]
        links: Vec<CorrectiveLink>,
    },
    /// Argumentation sentence split into linked statements.
    SubmitStructured { author: UserId, fl: String },
    Remove { author: UserId, id: ObjectId },
    Query(QueryRequest),
    Rate {
        rater: UserId,
        object: ObjectId,
        criterion: Criterion,
        value: f64,
    },
    Scores,
    Hierarchy,
    Neighborhood { id: ObjectId, depth: usize },
    Argumentation { id: ObjectId },
    Object { id: ObjectId },
    Advertise { term: String },
    WhoIsNexus { term: String },
    /// Route a statement to the nexus nodes of its terms.
    Publish { author: UserId, fl: String },
    /// One codec record from a peer.
    Replicate { from: NodeId, record: String },
    /// Like `replicate`, but the records the node sends on are returned to
    /// the caller instead of being dispatched.
    Relay { from: NodeId, record: String },
    Health,
    Dump,
    Parse { fl: String },
    ExportLogic { fl: String },
    Subsumes { general: String, specific: String },
}

impl Request {
    pub fn is_mutation(&self) -> bool {
        matches!(
            self,
            Request::Submit { .. }
                | Request::SubmitStructured { .. }
                | Request::Remove { .. }
                | Request::Rate { .. }
                | Request::Advertise { .. }
                | Request::Publish { .. }
                | Request::Replicate { .. }
                | Request::Relay { .. }
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Response {
    Accepted(Accepted),
    Steps(Vec<Step>),
    Removed(RemoveOutcome),
    Query(QueryAnswer),
    Rated(Evaluation),
    Scores(UsefulnessScores),
    Hierarchy(Vec<(ObjectId, ObjectId)>),
    Neighborhood(Subgraph),
    Argumentation(Argumentation),
    Object(ObjectView),
    Advertised(bool),
    Nexus(Vec<NodeId>),
    Published(BTreeMap<NodeId, String>),
    Replicated(usize),
    Relayed(Vec<Envelope>),
    Health(Health),
    Dump(String),
    Parsed(Parsed),
    Logic(String),
    Subsumes(bool),
}

/// One line on the wire in each direction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reply {
    Ok(Response),
    Error(ApiError),
}

macro_rules! expect {
    ($r:expr, $v:ident) => {
        match $r? {
            Response::$v(x) => Ok(x),
            other => Err(ApiError::transport(format!("unexpected response {other:?}"))),
        }
    };
}

/// Operations of a KBMS node. Both drivers implement [`KbApi::call`]; the
/// typed methods are shared.
pub trait KbApi {
    fn call(&mut self, req: Request) -> Result<Response, ApiError>;

    fn submit(&mut self, author: &UserId, fl: &str, links: &[CorrectiveLink]) -> Result<Accepted, ApiError> {
        expect!(
            self.call(Request::Submit {
                author: author.clone(),
                fl: fl.into(),
                links: links.to_vec(),
            }),
            Accepted
        )
    }

    fn submit_structured(&mut self, author: &UserId, fl: &str) -> Result<Vec<Step>, ApiError> {
        expect!(
            self.call(Request::SubmitStructured {
                author: author.clone(),
                fl: fl.into(),
            }),
            Steps
        )
    }

    fn remove(&mut self, author: &UserId, id: &ObjectId) -> Result<RemoveOutcome, ApiError> {
        expect!(
            self.call(Request::Remove {
                author: author.clone(),
                id: *id,
            }),
            Removed
        )
    }

    fn query(&mut self, q: &QueryRequest) -> Result<QueryAnswer, ApiError> {
        expect!(self.call(Request::Query(q.clone())), Query)
    }

    fn rate(&mut self, rater: &UserId, object: &ObjectId, criterion: Criterion, value: f64) -> Result<Evaluation, ApiError> {
        expect!(
            self.call(Request::Rate {
                rater: rater.clone(),
                object: *object,
                criterion,
                value,
            }),
            Rated
        )
    }

    fn scores(&mut self) -> Result<UsefulnessScores, ApiError> {
        expect!(self.call(Request::Scores), Scores)
    }

    fn hierarchy(&mut self) -> Result<Vec<(ObjectId, ObjectId)>, ApiError> {
        expect!(self.call(Request::Hierarchy), Hierarchy)
    }

    fn neighborhood(&mut self, id: &ObjectId, depth: usize) -> Result<Subgraph, ApiError> {
        expect!(self.call(Request::Neighborhood { id: *id, depth }), Neighborhood)
    }

    fn argumentation(&mut self, id: &ObjectId) -> Result<Argumentation, ApiError> {
        expect!(self.call(Request::Argumentation { id: *id }), Argumentation)
    }

    fn object(&mut self, id: &ObjectId) -> Result<ObjectView, ApiError> {
        expect!(self.call(Request::Object { id: *id }), Object)
    }

    fn advertise(&mut self, term: &str) -> Result<bool, ApiError> {
        expect!(self.call(Request::Advertise { term: term.into() }), Advertised)
    }

    fn who_is_nexus(&mut self, term: &str) -> Result<Vec<NodeId>, ApiError> {
        expect!(self.call(Request::WhoIsNexus { term: term.into() }), Nexus)
    }

    fn publish(&mut self, author: &UserId, fl: &str) -> Result<BTreeMap<NodeId, String>, ApiError> {
        expect!(
            self.call(Request::Publish {
                author: author.clone(),
                fl: fl.into(),
            }),
            Published
        )
    }

    fn replicate(&mut self, from: &NodeId, record: &str) -> Result<usize, ApiError> {
        expect!(
            self.call(Request::Replicate {
                from: from.clone(),
                record: record.into(),
            }),
            Replicated
        )
    }

    fn relay(&mut self, from: &NodeId, record: &str) -> Result<Vec<Envelope>, ApiError> {
        expect!(
            self.call(Request::Relay {
                from: from.clone(),
                record: record.into(),
            }),
            Relayed
        )
    }

    fn health(&mut self) -> Result<Health, ApiError> {
        expect!(self.call(Request::Health), Health)
    }

    fn dump(&mut self) -> Result<String, ApiError> {
        expect!(self.call(Request::Dump), Dump)
    }

    fn parse(&mut self, fl: &str) -> Result<Parsed, ApiError> {
        expect!(self.call(Request::Parse { fl: fl.into() }), Parsed)
    }

    fn export_logic(&mut self, fl: &str) -> Result<String, ApiError> {
        expect!(self.call(Request::ExportLogic { fl: fl.into() }), Logic)
    }

    fn subsumes(&mut self, general: &str, specific: &str) -> Result<bool, ApiError> {
        expect!(
            self.call(Request::Subsumes {
                general: general.into(),
                specific: specific.into(),
            }),
            Subsumes
        )
    }
}
