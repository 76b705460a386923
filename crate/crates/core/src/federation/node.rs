use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::fl::{canonical_text, parse, parse_term, StatementGraph, Term};
use crate::kb::{Kb, LogicalClock};
use crate::protocol::{check_add, AddOutcome, Rejection};
use crate::store::{ObjectId, QueryFilter, Store, Timestamp, UserId};
use crate::valuation::ValuationParams;

use super::{routable_terms, Message, MessageKind, NodeId, Routing, DEFAULT_TTL};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outgoing {
    pub to: NodeId,
    pub msg: Message,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeliveryStatus {
    Pending,
    Accepted,
    Duplicate,
    Rejected(String),
    Failed,
}

/// What became of one routed statement, as seen from its origin.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteReport {
    pub id: ObjectId,
    pub author: UserId,
    pub text: String,
    pub nexus: BTreeMap<NodeId, DeliveryStatus>,
    /// Terms for which no nexus could be found.
    pub unrouted: BTreeSet<Term>,
    pub stored_locally: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryReport {
    pub spec: String,
    pub asked: BTreeSet<NodeId>,
    pub responded: BTreeSet<NodeId>,
    pub unreachable: BTreeSet<NodeId>,
    /// Merged results by id: author and canonical text.
    pub results: BTreeMap<ObjectId, (UserId, String)>,
}

impl QueryReport {
    pub fn is_partial(&self) -> bool {
        !self.unreachable.is_empty()
    }

    /// Merged results in hierarchy order, generals first.
    pub fn ordered(&self) -> Vec<(ObjectId, UserId, String)> {
        let mut store = Store::default();
        for (author, text) in self.results.values() {
            if let Ok(g) = parse(text) {
                let _ = store.insert_statement(&g, author, Timestamp(1), &[]);
            }
        }
        let spec = parse(&self.spec).ok();
        let hits = store.query(
            &QueryFilter {
                spec_of: spec,
                ..QueryFilter::default()
            },
            Default::default(),
        );
        let mut out: Vec<(ObjectId, UserId, String)> = hits
            .objects
            .iter()
            .filter_map(|id| self.results.get(id).map(|(a, t)| (*id, a.clone(), t.clone())))
            .collect();
        for (id, (a, t)) in &self.results {
            if !out.iter().any(|(x, _, _)| x == id) {
                out.push((*id, a.clone(), t.clone()));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Lookup {
    key: String,
    term: Term,
    tries: u32,
}

/// One KBMS taking part in replication.
#[derive(Debug)]
pub struct Node {
    pub id: NodeId,
    kb: Kb,
    routing: BTreeMap<Term, Routing>,
    default_directory: Option<NodeId>,
    is_directory: bool,
    directory: BTreeMap<Term, BTreeSet<NodeId>>,
    seen: BTreeSet<String>,
    unrouted: BTreeSet<Term>,
    pending: BTreeMap<String, (UserId, String)>,
    reports: BTreeMap<String, RouteReport>,
    queries: BTreeMap<u64, QueryReport>,
    lookups: Vec<Lookup>,
    failed: Vec<Outgoing>,
    next_corr: u64,
    ttl_drops: u64,
    pub ttl: u32,
}

fn query_key(corr: u64) -> String {
    format!("q{corr}")
}

fn ack_status(code: &str) -> DeliveryStatus {
    match code {
        "accepted" => DeliveryStatus::Accepted,
        "duplicate" => DeliveryStatus::Duplicate,
        other => DeliveryStatus::Rejected(other.strip_prefix("rejected:").unwrap_or(other).to_string()),
    }
}

impl Node {
    pub fn new(id: impl Into<String>) -> Self {
        Node::with_kb(NodeId(id.into()), Kb::with_clock(Box::new(LogicalClock::default())))
    }

    /// Wraps an existing KB; its advertisements become routing entries.
    pub fn with_kb(id: NodeId, kb: Kb) -> Self {
        let mut n = Node {
            id,
            kb,
            routing: BTreeMap::new(),
            default_directory: None,
            is_directory: false,
            directory: BTreeMap::new(),
            seen: BTreeSet::new(),
            unrouted: BTreeSet::new(),
            pending: BTreeMap::new(),
            reports: BTreeMap::new(),
            queries: BTreeMap::new(),
            lookups: Vec::new(),
            failed: Vec::new(),
            next_corr: 1,
            ttl_drops: 0,
            ttl: DEFAULT_TTL,
        };
        let ads: Vec<(String, String)> = n.kb.advertised().iter().cloned().collect();
        for (term, node) in ads {
            let Ok(t) = parse_term(&term) else { continue };
            if node == n.id.0 {
                n.routing.insert(t.clone(), Routing::SelfNexus);
            } else {
                n.is_directory = true;
            }
            n.directory.entry(t).or_default().insert(NodeId(node));
        }
        n
    }

    pub fn kb(&self) -> &Kb {
        &self.kb
    }

    pub fn kb_mut(&mut self) -> &mut Kb {
        &mut self.kb
    }

    pub fn set_directory(&mut self, on: bool) {
        self.is_directory = on;
    }

    pub fn is_directory(&self) -> bool {
        self.is_directory
    }

    pub fn set_default_directory(&mut self, d: Option<NodeId>) {
        self.default_directory = d;
    }

    pub fn set_route(&mut self, term: Term, r: Routing) {
        self.routing.insert(term, r);
    }

    /// The routing entry in force for `term`, the default directory otherwise.
    pub fn routing(&self, term: &Term) -> Option<Routing> {
        self.routing
            .get(term)
            .cloned()
            .or_else(|| self.default_directory.clone().map(Routing::DirectoryRef))
    }

    pub fn is_nexus(&self, term: &Term) -> bool {
        self.routing.get(term) == Some(&Routing::SelfNexus)
    }

    pub fn nexus_terms(&self) -> BTreeSet<Term> {
        self.routing
            .iter()
            .filter(|(_, r)| **r == Routing::SelfNexus)
            .map(|(t, _)| t.clone())
            .collect()
    }

    pub fn unrouted(&self) -> &BTreeSet<Term> {
        &self.unrouted
    }

    pub fn ttl_drops(&self) -> u64 {
        self.ttl_drops
    }

    pub fn reports(&self) -> &BTreeMap<String, RouteReport> {
        &self.reports
    }

    pub fn query_report(&self, corr: u64) -> Option<&QueryReport> {
        self.queries.get(&corr)
    }

    fn msg(&self, kind: MessageKind, hash: impl Into<String>, payload: impl Into<String>) -> Message {
        Message {
            kind,
            origin: self.id.clone(),
            ttl: self.ttl,
            hash: hash.into(),
            payload: payload.into(),
        }
    }

    fn send(&self, to: &NodeId, m: Message) -> Outgoing {
        Outgoing { to: to.clone(), msg: m }
    }

    /// Known nexus nodes for `term` when this node acts as a directory.
    pub fn who_is_nexus(&self, term: &Term) -> BTreeSet<NodeId> {
        let mut set = self.directory.get(term).cloned().unwrap_or_default();
        if self.is_nexus(term) {
            set.insert(self.id.clone());
        }
        set
    }

    /// Commits this node to be a nexus for `term` and tells its directories.
    pub fn advertise(&mut self, term: &Term) -> Vec<Outgoing> {
        let previous = self.routing.insert(term.clone(), Routing::SelfNexus);
        let _ = self
            .kb
            .advertise(&UserId(self.id.0.clone()), &term.to_string(), &self.id.0);
        if self.is_directory {
            self.directory.entry(term.clone()).or_default().insert(self.id.clone());
        }
        let mut dirs: BTreeSet<NodeId> = self.default_directory.iter().cloned().collect();
        if let Some(Routing::DirectoryRef(d)) = previous {
            dirs.insert(d);
        }
        dirs.remove(&self.id);
        dirs.iter()
            .map(|d| self.send(d, self.msg(MessageKind::Advertise, "-", term.to_string())))
            .collect()
    }

    fn store_local(&mut self, author: &UserId, text: &str) -> Option<AddOutcome> {
        let g = parse(text).ok()?;
        let id = ObjectId::for_statement(&g, author);
        if self.kb.store().is_live(&id) {
            return None;
        }
        self.kb.submit_add(author, &g, &[]).ok()
    }

    fn put(&mut self, hash: &str, to: &NodeId) -> Option<Outgoing> {
        let (author, text) = self.pending.get(hash)?.clone();
        let report = self.reports.get_mut(hash)?;
        if report.nexus.contains_key(to) {
            return None;
        }
        report.nexus.insert(to.clone(), DeliveryStatus::Pending);
        Some(self.send(to, self.msg(MessageKind::PutStatement, hash, format!("{author}\t{text}"))))
    }

    fn mark_unrouted(&mut self, hash: &str, term: &Term) {
        if self.is_nexus(term) {
            return;
        }
        self.unrouted.insert(term.clone());
        let Some((author, text)) = self.pending.get(hash).cloned() else { return };
        if let Some(r) = self.reports.get_mut(hash) {
            r.unrouted.insert(term.clone());
        }
        if self.store_local(&author, &text).is_some() {
            if let Some(r) = self.reports.get_mut(hash) {
                r.stored_locally = true;
            }
        }
    }

    /// Sends `g` to the nexus of each of its terms. The origin's own edit
    /// rules run first; a statement routed before is offered again.
    pub fn route_add(&mut self, author: &UserId, g: &StatementGraph) -> Result<(String, Vec<Outgoing>), Rejection> {
        let text = canonical_text(g);
        let g = parse(&text).map_err(|e| Rejection::UnknownLinkTarget { target: e.to_string() })?;
        let id = ObjectId::for_statement(&g, author);
        let hash = id.to_string();
        let again = self.pending.contains_key(&hash);
        if !again {
            check_add(self.kb.store(), author, &g, &[])?;
            self.pending.insert(hash.clone(), (author.clone(), text.clone()));
            self.reports.insert(
                hash.clone(),
                RouteReport {
                    id,
                    author: author.clone(),
                    text: text.clone(),
                    nexus: BTreeMap::new(),
                    unrouted: BTreeSet::new(),
                    stored_locally: false,
                },
            );
        } else if let Some(r) = self.reports.get_mut(&hash) {
            r.nexus.clear();
        }
        let mut out = Vec::new();
        for t in routable_terms(&g) {
            match self.routing(&t) {
                Some(Routing::SelfNexus) => {
                    self.seen.insert(hash.clone());
                    if self.store_local(author, &text).is_some() {
                        let r = self.reports.get_mut(&hash).expect("report exists");
                        r.stored_locally = true;
                    }
                    // other nexus nodes for the term still need it
                    if self.is_directory {
                        for n in self.who_is_nexus(&t) {
                            if n != self.id {
                                out.extend(self.put(&hash, &n));
                            }
                        }
                    } else if let Some(d) = self.default_directory.clone().filter(|d| *d != self.id) {
                        self.lookups.push(Lookup {
                            key: hash.clone(),
                            term: t.clone(),
                            tries: 0,
                        });
                        out.push(self.send(&d, self.msg(MessageKind::WhoIsNexus, hash.clone(), t.to_string())));
                    }
                }
                Some(Routing::NexusList(list)) => {
                    for n in list {
                        if n == self.id {
                            self.seen.insert(hash.clone());
                            self.store_local(author, &text);
                        } else if let Some(o) = self.put(&hash, &n) {
                            out.push(o);
                        }
                    }
                }
                Some(Routing::DirectoryRef(d)) if d != self.id => {
                    self.lookups.push(Lookup {
                        key: hash.clone(),
                        term: t.clone(),
                        tries: 0,
                    });
                    out.push(self.send(&d, self.msg(MessageKind::WhoIsNexus, hash.clone(), t.to_string())));
                }
                Some(Routing::DirectoryRef(_)) => {
                    let list = self.who_is_nexus(&t);
                    if list.is_empty() {
                        self.mark_unrouted(&hash, &t);
                    }
                    for n in list {
                        if n == self.id {
                            self.store_local(author, &text);
                        } else if let Some(o) = self.put(&hash, &n) {
                            out.push(o);
                        }
                    }
                }
                None => self.mark_unrouted(&hash, &t),
            }
        }
        Ok((hash, out))
    }

    /// Asks the nexus of each term of `spec` for its specializations.
    /// Local results are always included.
    pub fn route_query(&mut self, spec: &StatementGraph) -> (u64, Vec<Outgoing>) {
        let corr = self.next_corr;
        self.next_corr += 1;
        let key = query_key(corr);
        let text = canonical_text(spec);
        let mut report = QueryReport {
            spec: text.clone(),
            asked: BTreeSet::new(),
            responded: BTreeSet::new(),
            unreachable: BTreeSet::new(),
            results: BTreeMap::new(),
        };
        self.merge_local(&mut report);
        let mut targets = BTreeSet::new();
        let mut out = Vec::new();
        for t in routable_terms(spec) {
            match self.routing(&t) {
                Some(Routing::SelfNexus) | None => {}
                Some(Routing::NexusList(list)) => targets.extend(list),
                Some(Routing::DirectoryRef(d)) if d != self.id => {
                    self.lookups.push(Lookup {
                        key: key.clone(),
                        term: t.clone(),
                        tries: 0,
                    });
                    out.push(self.send(&d, self.msg(MessageKind::WhoIsNexus, key.clone(), t.to_string())));
                }
                Some(Routing::DirectoryRef(_)) => targets.extend(self.who_is_nexus(&t)),
            }
        }
        targets.remove(&self.id);
        for n in targets {
            report.asked.insert(n.clone());
            out.push(self.send(&n, self.msg(MessageKind::Query, key.clone(), text.clone())));
        }
        self.queries.insert(corr, report);
        (corr, out)
    }

    fn local_results(&self, spec_text: &str) -> Vec<(ObjectId, UserId, String)> {
        let Ok(spec) = parse(spec_text) else {
            return Vec::new();
        };
        let hits = self.kb.query(
            &QueryFilter {
                spec_of: Some(spec),
                ..QueryFilter::default()
            },
            &ValuationParams::default(),
        );
        hits.objects
            .iter()
            .filter_map(|id| self.kb.store().get(id))
            .map(|o| (o.id, o.author.clone(), o.payload.text()))
            .collect()
    }

    fn merge_local(&self, report: &mut QueryReport) {
        for (id, a, t) in self.local_results(&report.spec) {
            report.results.insert(id, (a, t));
        }
    }

    pub fn handle(&mut self, from: &NodeId, m: Message) -> Vec<Outgoing> {
        match m.kind {
            MessageKind::Advertise => {
                if self.is_directory {
                    if let Ok(t) = parse_term(&m.payload) {
                        self.directory.entry(t).or_default().insert(m.origin.clone());
                        let _ = self
                            .kb
                            .advertise(&UserId(m.origin.0.clone()), &m.payload, &m.origin.0);
                    }
                }
                Vec::new()
            }
            MessageKind::PutStatement => {
                let code = self.intake(&m);
                vec![self.send(&m.origin, self.msg(MessageKind::Ack, m.hash.clone(), code))]
            }
            MessageKind::Query => {
                let lines: Vec<String> = self
                    .local_results(&m.payload)
                    .into_iter()
                    .map(|(_, a, t)| format!("{a}\t{}", t.replace('\n', " ")))
                    .collect();
                vec![self.send(&m.origin, self.msg(MessageKind::Results, m.hash.clone(), lines.join("\n")))]
            }
            MessageKind::Results => {
                let corr = m.hash.strip_prefix('q').and_then(|c| c.parse().ok());
                if let Some(r) = corr.and_then(|c| self.queries.get_mut(&c)) {
                    r.responded.insert(from.clone());
                    for line in m.payload.lines() {
                        let Some((a, t)) = line.split_once('\t') else { continue };
                        let Ok(g) = parse(t) else { continue };
                        let author = UserId(a.to_string());
                        let id = ObjectId::for_statement(&g, &author);
                        r.results.insert(id, (author, canonical_text(&g)));
                    }
                }
                Vec::new()
            }
            MessageKind::WhoIsNexus => self.answer_lookup(m),
            MessageKind::NexusAnswer => self.on_answer(m),
            MessageKind::Ack => {
                if let Some(r) = self.reports.get_mut(&m.hash) {
                    r.nexus.insert(from.clone(), ack_status(&m.payload));
                }
                Vec::new()
            }
        }
    }

    /// Applies a replicated statement through this node's own edit rules.
    fn intake(&mut self, m: &Message) -> String {
        let Some((author, text)) = m.payload.split_once('\t') else {
            return "rejected:malformed".into();
        };
        if self.seen.contains(&m.hash) {
            return "duplicate".into();
        }
        let Ok(g) = parse(text) else {
            return "rejected:syntax".into();
        };
        let author = UserId(author.to_string());
        if self.kb.store().is_live(&ObjectId::for_statement(&g, &author)) {
            self.seen.insert(m.hash.clone());
            return "duplicate".into();
        }
        self.seen.insert(m.hash.clone());
        match self.kb.submit_add(&author, &g, &[]) {
            Ok(AddOutcome::Accepted { .. }) => "accepted".into(),
            Ok(AddOutcome::Rejected(r)) => format!("rejected:{}", r.code()),
            Err(e) => format!("rejected:{e}"),
        }
    }

    fn answer_lookup(&mut self, m: Message) -> Vec<Outgoing> {
        let Ok(t) = parse_term(&m.payload) else {
            return Vec::new();
        };
        let known = self.who_is_nexus(&t);
        if known.is_empty() {
            if let Some(Routing::DirectoryRef(d)) = self.routing.get(&t).cloned() {
                if d != self.id {
                    if m.ttl <= 1 {
                        self.ttl_drops += 1;
                        return Vec::new();
                    }
                    let fwd = Message { ttl: m.ttl - 1, ..m };
                    return vec![self.send(&d, fwd)];
                }
            }
        }
        let mut list: BTreeSet<NodeId> = known;
        if let Some(Routing::NexusList(l)) = self.routing.get(&t) {
            list.extend(l.iter().cloned());
        }
        let names: Vec<String> = list.iter().map(|n| n.0.clone()).collect();
        let payload = format!("{}\t{}", t, names.join(","));
        vec![self.send(&m.origin, self.msg(MessageKind::NexusAnswer, m.hash, payload))]
    }

    fn on_answer(&mut self, m: Message) -> Vec<Outgoing> {
        let Some((term, list)) = m.payload.split_once('\t') else {
            return Vec::new();
        };
        let Ok(t) = parse_term(term) else {
            return Vec::new();
        };
        let Some(pos) = self.lookups.iter().position(|l| l.key == m.hash && l.term == t) else {
            return Vec::new();
        };
        self.lookups.remove(pos);
        let nodes: BTreeSet<NodeId> = list.split(',').filter(|s| !s.is_empty()).map(NodeId::from).collect();
        let mut out = Vec::new();
        if let Some(corr) = m.hash.strip_prefix('q').and_then(|c| c.parse::<u64>().ok()) {
            let text = match self.queries.get(&corr) {
                Some(r) => r.spec.clone(),
                None => return out,
            };
            for n in nodes {
                if n == self.id {
                    continue;
                }
                let r = self.queries.get_mut(&corr).expect("checked above");
                if r.asked.insert(n.clone()) {
                    out.push(self.send(&n, self.msg(MessageKind::Query, m.hash.clone(), text.clone())));
                }
            }
            return out;
        }
        if nodes.is_empty() {
            self.mark_unrouted(&m.hash, &t);
        }
        for n in nodes {
            if n == self.id {
                if let Some((a, text)) = self.pending.get(&m.hash).cloned() {
                    self.seen.insert(m.hash.clone());
                    self.store_local(&a, &text);
                }
            } else if let Some(o) = self.put(&m.hash, &n) {
                out.push(o);
            }
        }
        out
    }

    /// Called when a message could not be delivered after all retries.
    pub fn delivery_failed(&mut self, to: &NodeId, m: Message) {
        match m.kind {
            MessageKind::PutStatement => {
                if let Some(r) = self.reports.get_mut(&m.hash) {
                    r.nexus.insert(to.clone(), DeliveryStatus::Failed);
                }
                self.failed.push(Outgoing { to: to.clone(), msg: m });
            }
            MessageKind::Advertise => self.failed.push(Outgoing { to: to.clone(), msg: m }),
            MessageKind::Query => {
                let corr = m.hash.strip_prefix('q').and_then(|c| c.parse::<u64>().ok());
                if let Some(r) = corr.and_then(|c| self.queries.get_mut(&c)) {
                    r.unreachable.insert(to.clone());
                }
            }
            _ => {}
        }
    }

    /// Re-offers failed deliveries and repeats unanswered lookups; a lookup
    /// unanswered three times leaves its term unrouted.
    pub fn anti_entropy(&mut self) -> Vec<Outgoing> {
        let mut out = Vec::new();
        for o in std::mem::take(&mut self.failed) {
            if o.msg.kind == MessageKind::PutStatement {
                if let Some(r) = self.reports.get_mut(&o.msg.hash) {
                    r.nexus.insert(o.to.clone(), DeliveryStatus::Pending);
                }
            }
            out.push(o);
        }
        let lookups = std::mem::take(&mut self.lookups);
        for mut l in lookups {
            l.tries += 1;
            if l.tries > 2 {
                if !l.key.starts_with('q') {
                    self.mark_unrouted(&l.key, &l.term);
                }
                continue;
            }
            let dir = match self.routing(&l.term) {
                Some(Routing::DirectoryRef(d)) => Some(d),
                Some(Routing::SelfNexus) => self.default_directory.clone(),
                _ => None,
            };
            if let Some(d) = dir {
                out.push(self.send(&d, self.msg(MessageKind::WhoIsNexus, l.key.clone(), l.term.to_string())));
            }
            self.lookups.push(l);
        }
        out
    }

    pub fn has_work(&self) -> bool {
        !self.failed.is_empty() || !self.lookups.is_empty()
    }

    /// Live statement ids mentioning `term`.
    pub fn statements_mentioning(&self, term: &Term) -> BTreeSet<ObjectId> {
        self.kb
            .store()
            .live_statements()
            .filter(|o| o.payload.statement().is_some_and(|g| routable_terms(g).contains(term)))
            .map(|o| o.id)
            .collect()
    }

    pub fn holds(&self, author: &UserId, g: &StatementGraph) -> bool {
        self.kb.store().is_live(&ObjectId::for_statement(g, author))
    }

    /// Order-independent state summary: live statements with owners,
    /// advertisements and directory entries.
    pub fn digest(&self) -> String {
        let mut s = String::new();
        for o in self.kb.store().live_statements() {
            s.push_str(&format!("{} {}\n", o.id, o.author));
        }
        for (t, n) in self.kb.advertised() {
            s.push_str(&format!("nexus {t} {n}\n"));
        }
        for (t, set) in &self.directory {
            for n in set {
                s.push_str(&format!("dir {t} {n}\n"));
            }
        }
        s
    }
}
