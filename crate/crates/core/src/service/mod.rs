//! The KBMS over a socket: newline-delimited JSON requests and replies,
//! journal-replay persistence and federation intake.

mod api;
mod client;
mod server;
mod transport;

pub use api::{
    Accepted, ApiError, Envelope, Health, Hit, KbApi, ObjectView, Parsed, QueryAnswer, QueryRequest, Reply, Request, Response, Step,
};
pub use client::{LocalClient, RemoteClient};
pub use server::{serve, serve_service, ServiceHandle};
pub use transport::{ServiceTransport, Wire};

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use crate::federation::{decode, encode, DeliveryStatus, Node, NodeId, Outgoing};
use crate::fl::{canonical_text, export_logic, parse, parse_term, print};
use crate::kb::{Clock, Kb, SystemClock};
use crate::protocol::{AddOutcome, JournalError, RemoveOutcome};
use crate::store::{AuthorFilter, ObjectKind, QueryFilter, ScoreView};
use crate::valuation::{ParamsError, ValuationParams};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServiceConfig {
    pub listen: String,
    /// In-memory KB when unset.
    pub journal: Option<PathBuf>,
    pub node_id: NodeId,
    pub params: Option<PathBuf>,
    /// Addresses of the nodes this one sends replication traffic to.
    pub peers: BTreeMap<NodeId, String>,
    pub directory: Option<NodeId>,
    pub is_directory: bool,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            listen: "127.0.0.1:0".into(),
            journal: None,
            node_id: NodeId("kbms".into()),
            params: None,
            peers: BTreeMap::new(),
            directory: None,
            is_directory: false,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("journal corrupt at seq {seq}: {reason}")]
    JournalCorrupt { seq: u64, reason: String },
    #[error("params file: {0}")]
    Params(#[from] ParamsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<JournalError> for ServiceError {
    fn from(e: JournalError) -> Self {
        match e {
            JournalError::Corrupt { seq, reason } => ServiceError::JournalCorrupt { seq, reason },
            JournalError::Io(e) => ServiceError::Io(e),
        }
    }
}

/// One node's state behind a single lock: every request, local or from a
/// peer, is applied in turn.
pub struct Service {
    node: Arc<Mutex<Node>>,
    id: NodeId,
    params: ValuationParams,
    peers: BTreeMap<NodeId, String>,
}

fn status_code(s: &DeliveryStatus) -> String {
    match s {
        DeliveryStatus::Pending => "pending".into(),
        DeliveryStatus::Accepted => "accepted".into(),
        DeliveryStatus::Duplicate => "duplicate".into(),
        DeliveryStatus::Rejected(c) => format!("rejected:{c}"),
        DeliveryStatus::Failed => "failed".into(),
    }
}

impl Service {
    pub fn new(node: Node, params: ValuationParams) -> Self {
        Service::shared(Arc::new(Mutex::new(node)), params)
    }

    /// Serves a node that others, such as a simulator, also hold.
    pub fn shared(node: Arc<Mutex<Node>>, params: ValuationParams) -> Self {
        let id = node.lock().unwrap_or_else(|p| p.into_inner()).id.clone();
        Service {
            id,
            node,
            params,
            peers: BTreeMap::new(),
        }
    }

    pub fn with_peers(mut self, peers: BTreeMap<NodeId, String>) -> Self {
        self.peers = peers;
        self
    }

    /// Replays the journal, if any, and loads the parameters file.
    pub fn open(config: &ServiceConfig) -> Result<Self, ServiceError> {
        Service::open_with_clock(config, Box::new(SystemClock))
    }

    pub fn open_with_clock(config: &ServiceConfig, clock: Box<dyn Clock>) -> Result<Self, ServiceError> {
        let params = match &config.params {
            Some(p) => {
                let p = ValuationParams::parse(&std::fs::read_to_string(p)?)?;
                p.validate()?;
                p
            }
            None => ValuationParams::default(),
        };
        let kb = match &config.journal {
            Some(path) => Kb::open(path, clock)?,
            None => Kb::with_clock(clock),
        };
        let mut node = Node::with_kb(config.node_id.clone(), kb);
        if config.is_directory {
            node.set_directory(true);
        }
        if config.directory.is_some() {
            node.set_default_directory(config.directory.clone());
        }
        Ok(Service::new(node, params).with_peers(config.peers.clone()))
    }

    pub fn id(&self) -> &NodeId {
        &self.id
    }

    pub fn params(&self) -> &ValuationParams {
        &self.params
    }

    fn lock(&self) -> MutexGuard<'_, Node> {
        self.node.lock().unwrap_or_else(|p| p.into_inner())
    }

    /// Runs `f` on the node under the lock.
    pub fn with_node<T>(&self, f: impl FnOnce(&mut Node) -> T) -> T {
        f(&mut self.lock())
    }

    /// Sends replication traffic; failed deliveries go back to the node.
    fn dispatch(&self, outs: Vec<Outgoing>) {
        for o in outs {
            let sent = match self.peers.get(&o.to) {
                Some(addr) => RemoteClient::connect(addr)
                    .and_then(|mut c| c.replicate(&self.id, &encode(&o.msg)))
                    .is_ok(),
                None => false,
            };
            if !sent {
                self.lock().delivery_failed(&o.to, o.msg);
            }
        }
    }

    pub fn handle(&self, req: Request) -> Result<Response, ApiError> {
        let (resp, outs) = self.apply(req)?;
        self.dispatch(outs);
        Ok(resp)
    }

    fn apply(&self, req: Request) -> Result<(Response, Vec<Outgoing>), ApiError> {
        let mut node = self.lock();
        let none = Vec::new();
        let r = match req {
            Request::Submit { author, fl, links } => {
                let g = parse(&fl)?;
                match node.kb_mut().submit_add(&author, &g, &links)? {
                    AddOutcome::Accepted { id, links } => Response::Accepted(Accepted { id, links }),
                    AddOutcome::Rejected(r) => return Err(r.into()),
                }
            }
            Request::SubmitStructured { author, fl } => {
                let g = parse(&fl)?;
                let steps = node.kb_mut().submit_structured(&author, &g)?;
                Response::Steps(
                    steps
                        .into_iter()
                        .map(|s| Step {
                            actor: s.actor,
                            text: s.text,
                            outcome: s.outcome,
                        })
                        .collect(),
                )
            }
            Request::Remove { author, id } => match node.kb_mut().submit_remove(&author, &id)? {
                RemoveOutcome::Rejected(r) => return Err(r.into()),
                ok => Response::Removed(ok),
            },
            Request::Query(q) => Response::Query(self.query(node.kb(), &q)?),
            Request::Rate {
                rater,
                object,
                criterion,
                value,
            } => Response::Rated(node.kb_mut().rate(&rater, &object, criterion, value)?),
            Request::Scores => Response::Scores(node.kb().compute_usefulness(&self.params)),
            Request::Hierarchy => Response::Hierarchy(node.kb().store().hierarchy_edges()),
            Request::Neighborhood { id, depth } => Response::Neighborhood(
                node.kb()
                    .store()
                    .neighborhood(&id, depth)
                    .map_err(crate::kb::KbError::from)?,
            ),
            Request::Argumentation { id } => Response::Argumentation(node.kb().list_disagreements(&id)?),
            Request::Object { id } => {
                let o = node
                    .kb()
                    .store()
                    .get(&id)
                    .ok_or_else(|| ApiError::NotFound { what: id.to_string() })?;
                Response::Object(ObjectView {
                    id: o.id,
                    kind: o.kind,
                    author: o.author.clone(),
                    creator: o.creator.clone(),
                    text: o.payload.text(),
                    live: o.is_live(),
                    generalizations: o.direct_generalizations.iter().copied().collect(),
                    specializations: o.direct_specializations.iter().copied().collect(),
                })
            }
            Request::Advertise { term } => {
                let t = parse_term(&term)?;
                let fresh = !node.is_nexus(&t);
                let outs = node.advertise(&t);
                return Ok((Response::Advertised(fresh), outs));
            }
            Request::WhoIsNexus { term } => {
                let t = parse_term(&term)?;
                Response::Nexus(node.who_is_nexus(&t).into_iter().collect())
            }
            Request::Publish { author, fl } => {
                let g = parse(&fl)?;
                let (hash, outs) = node.route_add(&author, &g)?;
                drop(node);
                self.dispatch(outs);
                let node = self.lock();
                let mut report = BTreeMap::new();
                if let Some(r) = node.reports().get(&hash) {
                    for (n, s) in &r.nexus {
                        report.insert(n.clone(), status_code(s));
                    }
                    if r.stored_locally {
                        report.insert(self.id.clone(), "stored".into());
                    }
                }
                return Ok((Response::Published(report), none));
            }
            Request::Replicate { from, record } => {
                let msg = decode(&record).map_err(ApiError::invalid)?;
                let outs = node.handle(&from, msg);
                return Ok((Response::Replicated(outs.len()), outs));
            }
            Request::Relay { from, record } => {
                let msg = decode(&record).map_err(ApiError::invalid)?;
                Response::Relayed(
                    node.handle(&from, msg)
                        .into_iter()
                        .map(|o| Envelope {
                            to: o.to,
                            record: encode(&o.msg),
                        })
                        .collect(),
                )
            }
            Request::Health => Response::Health(Health {
                node: node.id.clone(),
                seq: node.kb().seq(),
                objects: node.kb().store().objects().count(),
                statements: node.kb().store().live_statements().count(),
            }),
            Request::Dump => Response::Dump(node.kb().dump()),
            Request::Parse { fl } => {
                let g = parse(&fl)?;
                Response::Parsed(Parsed {
                    canonical: canonical_text(&g),
                    pretty: print(&g),
                })
            }
            Request::ExportLogic { fl } => Response::Logic(export_logic(&parse(&fl)?).text()),
            Request::Subsumes { general, specific } => {
                let (a, b) = (parse(&general)?, parse(&specific)?);
                Response::Subsumes(node.kb().store().subsumes(&a, &b))
            }
        };
        Ok((r, none))
    }

    fn query(&self, kb: &Kb, q: &QueryRequest) -> Result<QueryAnswer, ApiError> {
        let spec_of = q.spec.as_deref().map(parse).transpose()?;
        let authors = match (&q.authors, q.min_user_score) {
            (Some(_), Some(_)) => return Err(ApiError::invalid("give either authors or min_user_score")),
            (Some(a), None) => Some(AuthorFilter::AnyOf(a.iter().cloned().collect::<BTreeSet<_>>())),
            (None, Some(s)) => Some(AuthorFilter::MinUserScore(s)),
            (None, None) => None,
        };
        let f = QueryFilter {
            spec_of,
            authors,
            min_usefulness: q.min_usefulness,
            offset: q.offset,
            limit: q.limit,
        };
        let scores = kb.compute_usefulness(&self.params);
        let res = kb.store().query(
            &f,
            ScoreView {
                statements: Some(&scores.statement_score),
                users: Some(&scores.user_score),
            },
        );
        let hits = res
            .objects
            .iter()
            .filter_map(|id| kb.store().get(id))
            .map(|o| Hit {
                id: o.id,
                kind: o.kind,
                author: o.author.clone(),
                text: o.payload.text(),
                score: if o.kind == ObjectKind::StatementObject {
                    Some(scores.statement_score.get(&o.id).copied().unwrap_or(0.0))
                } else {
                    None
                },
            })
            .collect();
        Ok(QueryAnswer { hits, edges: res.edges })
    }
}

#[cfg(test)]
mod tests;
