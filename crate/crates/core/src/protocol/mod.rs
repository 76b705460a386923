//! Cooperative editing rules: what an addition or removal must satisfy,
//! how argumentation sentences split into linked objects, and how the
//! disagreement structure around an object is read back.

mod journal;

pub use journal::{Action, Details, EditEvent, Journal, JournalError, Recorded};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::fl::{ConceptNode, NodeHead, StatementGraph, Term};
use crate::store::{
    Annotation, Conflict, LinkId, LinkKind, LinkTarget, ObjectId, ObjectKind, Store, StoreError, Timestamp, UserId,
};

/// Link submitted together with a new statement. The new statement is the
/// source; `meta` links attach further objects to this link.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectiveLink {
    pub kind: LinkKind,
    pub target: LinkTarget,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub meta: Vec<MetaLink>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annotations: Vec<Annotation>,
}

impl CorrectiveLink {
    pub fn new(kind: LinkKind, target: ObjectId) -> Self {
        CorrectiveLink {
            kind,
            target: LinkTarget::Object(target),
            meta: Vec::new(),
            annotations: Vec::new(),
        }
    }

    pub fn on_link(kind: LinkKind, target: LinkId) -> Self {
        CorrectiveLink {
            kind,
            target: LinkTarget::Link(target),
            meta: Vec::new(),
            annotations: Vec::new(),
        }
    }

    pub fn with_meta(mut self, m: MetaLink) -> Self {
        self.meta.push(m);
        self
    }
}

/// Link from an existing object to the enclosing link.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaLink {
    pub kind: LinkKind,
    pub source: ObjectId,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub meta: Vec<MetaLink>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Rejection {
    #[error("already entailed by own statement {with}")]
    Redundant { with: ObjectId },
    #[error("contradicts itself or own statement")]
    SelfInconsistent { with: Option<ObjectId> },
    #[error("contradicts {with}; state the disagreement with a corrective or objection link")]
    MissingCorrectiveLink { with: ObjectId },
    #[error("link target {target} does not exist")]
    UnknownLinkTarget { target: String },
    #[error("placement would make it both above and below {with}")]
    CycleWouldForm { with: ObjectId },
    #[error("violates the type hierarchy: {detail}")]
    OntologyViolation { detail: String },
    #[error("owned by {owner}")]
    NotOwner { owner: UserId },
    #[error("no live object {id}")]
    UnknownId { id: String },
}

impl Rejection {
    /// Stable machine-readable reason code.
    pub fn code(&self) -> &'static str {
        match self {
            Rejection::Redundant { .. } => "redundant",
            Rejection::SelfInconsistent { .. } => "self_inconsistent",
            Rejection::MissingCorrectiveLink { .. } => "missing_corrective_link",
            Rejection::UnknownLinkTarget { .. } => "unknown_link_target",
            Rejection::CycleWouldForm { .. } => "cycle_would_form",
            Rejection::OntologyViolation { .. } => "ontology_violation",
            Rejection::NotOwner { .. } => "not_owner",
            Rejection::UnknownId { .. } => "unknown_id",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AddOutcome {
    Accepted { id: ObjectId, links: Vec<LinkId> },
    Rejected(Rejection),
}

impl AddOutcome {
    pub fn id(&self) -> Option<ObjectId> {
        match self {
            AddOutcome::Accepted { id, .. } => Some(*id),
            AddOutcome::Rejected(_) => None,
        }
    }

    pub fn is_accepted(&self) -> bool {
        matches!(self, AddOutcome::Accepted { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RemoveOutcome {
    Removed,
    ClonedTo(UserId),
    Rejected(Rejection),
}

fn target_exists(store: &Store, t: &LinkTarget) -> bool {
    match t {
        LinkTarget::Object(id) => store.is_live(id),
        LinkTarget::Link(l) => store
            .link(*l)
            .map(|r| store.is_live(&r.source))
            .unwrap_or(false),
    }
}

fn check_meta(store: &Store, meta: &[MetaLink]) -> Result<(), Rejection> {
    for m in meta {
        if !store.is_live(&m.source) {
            return Err(Rejection::UnknownLinkTarget {
                target: m.source.to_string(),
            });
        }
        check_meta(store, &m.meta)?;
    }
    Ok(())
}

/// Decides whether `actor` may add `g` with `links`, without changing anything.
pub fn check_add(
    store: &Store,
    actor: &UserId,
    g: &StatementGraph,
    links: &[CorrectiveLink],
) -> Result<(), Rejection> {
    for l in links {
        if !target_exists(store, &l.target) {
            return Err(Rejection::UnknownLinkTarget {
                target: l.target.to_string(),
            });
        }
        for a in &l.annotations {
            if !store.is_live(&a.object) {
                return Err(Rejection::UnknownLinkTarget {
                    target: a.object.to_string(),
                });
            }
        }
        check_meta(store, &l.meta)?;
    }
    // the same text by the same creator, possibly handed to someone else since
    let own = ObjectId::for_statement(g, actor);
    if store.is_live(&own) {
        return Err(Rejection::Redundant { with: own });
    }
    let conflicts = store.detect_conflicts(g, actor);
    if conflicts.contains(&Conflict::Unsatisfiable) {
        return Err(Rejection::SelfInconsistent { with: None });
    }
    for c in &conflicts {
        let Conflict::Inconsistent(with) = c else { continue };
        let o = store.object(with).expect("conflicts name stored objects");
        if o.kind == ObjectKind::TermObject {
            return Err(Rejection::OntologyViolation {
                detail: format!("clashes with {}", o.payload.text()),
            });
        }
        if o.author == *actor {
            return Err(Rejection::SelfInconsistent { with: Some(*with) });
        }
        let stated = links
            .iter()
            .any(|l| l.kind.is_disagreement() && l.target == LinkTarget::Object(*with));
        if !stated {
            return Err(Rejection::MissingCorrectiveLink { with: *with });
        }
    }
    if let Some(Conflict::Redundant(with)) = conflicts.iter().find(|c| matches!(c, Conflict::Redundant(_))) {
        return Err(Rejection::Redundant { with: *with });
    }
    Ok(())
}

fn add_meta(
    store: &mut Store,
    meta: &[MetaLink],
    on: LinkId,
    actor: &UserId,
    at: Timestamp,
    out: &mut Vec<LinkId>,
) -> Result<(), StoreError> {
    for m in meta {
        let id = store.add_link(m.kind, m.source, LinkTarget::Link(on), actor, at, Vec::new())?;
        out.push(id);
        add_meta(store, &m.meta, id, actor, at, out)?;
    }
    Ok(())
}

/// Checks and, when allowed, stores `g` with its links.
pub fn apply_add(
    store: &mut Store,
    actor: &UserId,
    g: &StatementGraph,
    links: &[CorrectiveLink],
    at: Timestamp,
) -> AddOutcome {
    if let Err(r) = check_add(store, actor, g, links) {
        return AddOutcome::Rejected(r);
    }
    let declared: Vec<(LinkKind, ObjectId)> = links
        .iter()
        .filter_map(|l| match l.target {
            LinkTarget::Object(t) => Some((l.kind, t)),
            LinkTarget::Link(_) => None,
        })
        .collect();
    let id = match store.insert_statement(g, actor, at, &declared) {
        Ok(id) => id,
        Err(StoreError::CycleWouldForm { with, .. }) => {
            return AddOutcome::Rejected(Rejection::CycleWouldForm { with });
        }
        Err(StoreError::Ontology(e)) => {
            return AddOutcome::Rejected(Rejection::OntologyViolation { detail: e.to_string() });
        }
        Err(StoreError::AlreadyLive(with)) => {
            return AddOutcome::Rejected(Rejection::Redundant { with });
        }
        Err(e) => {
            return AddOutcome::Rejected(Rejection::UnknownLinkTarget { target: e.to_string() });
        }
    };
    let mut made = Vec::new();
    for l in links {
        let lid = store
            .add_link(l.kind, id, l.target, actor, at, l.annotations.clone())
            .expect("targets checked and placement already applied");
        made.push(lid);
        add_meta(store, &l.meta, lid, actor, at, &mut made).expect("meta sources checked");
    }
    AddOutcome::Accepted { id, links: made }
}

/// Users other than the owner who rely on `id`, earliest dependency first.
pub fn dependants(store: &Store, id: &ObjectId) -> Vec<UserId> {
    let Ok(obj) = store.object(id) else {
        return Vec::new();
    };
    let mut found: Vec<(Timestamp, u64, UserId)> = Vec::new();
    for l in store.links() {
        if !store.is_live(&l.source) {
            continue;
        }
        let relies = match l.target {
            LinkTarget::Object(t) => t == *id,
            LinkTarget::Link(m) => store
                .link(m)
                .map(|m| m.source == *id || m.target == LinkTarget::Object(*id))
                .unwrap_or(false),
        } || l.annotations.iter().any(|a| a.object == *id);
        if relies && l.author != obj.author {
            found.push((l.created_at, l.id.0, l.author.clone()));
        }
    }
    if let Some(t) = obj.payload.term() {
        for o in store.live_statements() {
            if o.author != obj.author && o.payload.statement().is_some_and(|g| g.formal_terms().contains(t)) {
                found.push((o.created_at, 0, o.author.clone()));
            }
        }
    }
    found.sort();
    let mut seen = BTreeSet::new();
    found
        .into_iter()
        .map(|(_, _, u)| u)
        .filter(|u| seen.insert(u.clone()))
        .collect()
}

/// Tombstones `id`, or hands it to the earliest dependant when others rely on it.
pub fn apply_remove(store: &mut Store, actor: &UserId, id: &ObjectId) -> RemoveOutcome {
    let Some(obj) = store.get(id).filter(|o| o.is_live() && *id != store.root()) else {
        return RemoveOutcome::Rejected(Rejection::UnknownId { id: id.to_string() });
    };
    if obj.author != *actor {
        return RemoveOutcome::Rejected(Rejection::NotOwner {
            owner: obj.author.clone(),
        });
    }
    match dependants(store, id).into_iter().next() {
        Some(heir) => {
            store.reassign(id, &heir).expect("object exists");
            RemoveOutcome::ClonedTo(heir)
        }
        None => {
            store.tombstone(id).expect("object is live");
            RemoveOutcome::Removed
        }
    }
}

// ---- argumentation sentences ----

/// Where a planned link points: an earlier step's object, the link that an
/// earlier step created, or something already stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlanRef {
    Step(usize),
    LinkOf(usize),
    Existing(LinkTarget),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedLink {
    pub kind: LinkKind,
    pub target: PlanRef,
    /// Relation and the step whose object annotates the link.
    pub annotations: Vec<(Term, usize)>,
}

/// One statement of a split sentence, submitted in order.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedAdd {
    pub actor: UserId,
    pub graph: StatementGraph,
    pub link: Option<PlannedLink>,
}

fn unwrap_statement(n: &ConceptNode) -> ConceptNode {
    match &n.head {
        NodeHead::Statement(g) if n.quantifier.is_none() && n.variable.is_none() && n.attachments.is_empty() => {
            g.root.clone()
        }
        _ => n.clone(),
    }
}

fn author_name(n: &ConceptNode) -> Option<String> {
    match &n.head {
        NodeHead::Type(t) => Some(t.name.clone()),
        NodeHead::Literal(crate::fl::Literal::Str(s)) => Some(s.clone()),
        _ => None,
    }
}

struct Planner {
    submitter: UserId,
    steps: Vec<PlannedAdd>,
}

impl Planner {
    fn node(&mut self, node: &ConceptNode, owner: UserId, link: Option<PlannedLink>) -> usize {
        let node = unwrap_statement(node);
        let (split, kept): (Vec<_>, Vec<_>) = node
            .attachments
            .iter()
            .cloned()
            .partition(|e| !e.inverse && LinkKind::from_relation(&e.relation).is_some());
        let mut root = node.clone();
        root.attachments = kept;
        let step = self.steps.len();
        self.steps.push(PlannedAdd {
            actor: owner,
            graph: StatementGraph::new(root),
            link,
        });
        for e in &split {
            self.edge(e, PlanRef::Step(step));
        }
        step
    }

    fn edge(&mut self, e: &crate::fl::RelationEdge, target: PlanRef) {
        let kind = LinkKind::from_relation(&e.relation).expect("split edges name link kinds");
        let mut owner = self.submitter.clone();
        let mut annotations = Vec::new();
        let mut nested = Vec::new();
        for m in &e.meta {
            if m.relation.has_local_name("author") {
                if let Some(a) = author_name(&m.destination) {
                    owner = UserId(a);
                }
            } else if LinkKind::from_relation(&m.relation).is_some() && !m.inverse {
                nested.push(m);
            } else {
                let s = self.node(&m.destination, self.submitter.clone(), None);
                annotations.push((m.relation.clone(), s));
            }
        }
        let link = PlannedLink {
            kind,
            target,
            annotations,
        };
        let child = self.node(&e.destination, owner, Some(link));
        for m in nested {
            self.edge(m, PlanRef::LinkOf(child));
        }
    }
}

/// Splits a sentence whose edges name link kinds (`argument:`,
/// `objection:`, ...) into one statement per linked node. `author:` on a
/// link gives that link and its source node another owner; other link meta
/// becomes links on the link, remaining meta becomes annotations.
pub fn decompose(g: &StatementGraph, submitter: &UserId) -> Vec<PlannedAdd> {
    let mut p = Planner {
        submitter: submitter.clone(),
        steps: Vec::new(),
    };
    p.node(&g.root, submitter.clone(), None);
    p.steps
}

// ---- disagreement structure ----

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgNode {
    pub link: LinkId,
    pub kind: LinkKind,
    pub source: ObjectId,
    pub source_text: String,
    /// Author of the link.
    pub author: UserId,
    pub annotations: Vec<Annotation>,
    /// Links whose target is this node's source object.
    pub on_source: Vec<ArgNode>,
    /// Links whose target is this link.
    pub on_link: Vec<ArgNode>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Argumentation {
    pub object: ObjectId,
    pub links: Vec<ArgNode>,
}

impl Argumentation {
    /// Number of links in the whole structure.
    pub fn size(&self) -> usize {
        fn count(n: &ArgNode) -> usize {
            1 + n.on_source.iter().map(count).sum::<usize>() + n.on_link.iter().map(count).sum::<usize>()
        }
        self.links.iter().map(count).sum()
    }
}

fn arg_nodes(store: &Store, target: LinkTarget, path: &mut Vec<ObjectId>) -> Vec<ArgNode> {
    let mut out = Vec::new();
    for l in store.links() {
        if l.target != target || !store.is_live(&l.source) {
            continue;
        }
        let cyclic = path.contains(&l.source);
        path.push(l.source);
        let on_source = if cyclic {
            Vec::new()
        } else {
            arg_nodes(store, LinkTarget::Object(l.source), path)
        };
        let on_link = arg_nodes(store, LinkTarget::Link(l.id), path);
        path.pop();
        out.push(ArgNode {
            link: l.id,
            kind: l.kind,
            source: l.source,
            source_text: store.object(&l.source).map(|o| o.payload.text()).unwrap_or_default(),
            author: l.author.clone(),
            annotations: l.annotations.clone(),
            on_source,
            on_link,
        });
    }
    out
}

/// Links around `id`: what targets it, what targets those sources and
/// what targets the links themselves.
pub fn list_disagreements(store: &Store, id: &ObjectId) -> Result<Argumentation, StoreError> {
    if !store.is_live(id) {
        return Err(StoreError::UnknownId(*id));
    }
    let mut path = vec![*id];
    Ok(Argumentation {
        object: *id,
        links: arg_nodes(store, LinkTarget::Object(*id), &mut path),
    })
}
