//! In-process network of nodes with a seeded scheduler, and the scenario
//! scripts that drive it.
//!
//! Scenario commands, one per line (`#` starts a comment):
//!
//! ```text
//! node A [directory]          create and start a node
//! start A | stop A
//! default-directory A|* D     directory used for terms without a route
//! route A p#man list B,C      explicit nexus list
//! route A p#man dir D         explicit directory
//! advertise A p#man
//! add C p "<FL>"              route a statement by author p from C
//! query C "<FL>"              queries are numbered from 1
//! duplicate 0.3               probability of delivering a message twice
//! quiesce                     deliver everything, then anti-entropy
//! expect holds A p "<FL>" | expect lacks A p "<FL>" | expect count A 2
//! expect query 1 contains p "<FL>" | expect query 1 partial B
//! expect query 1 complete | expect ttl-drops 1 | expect unrouted C p#name
//! ```
//!
//! After the script the network is quiesced and every nexus of every term
//! is checked to hold exactly the accepted statements mentioning it.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex, MutexGuard};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fl::{parse, parse_term, StatementGraph, Term};
use crate::store::{ObjectId, UserId};

use super::node::{Node, Outgoing, QueryReport};
use super::{routable_terms, Message, NodeId, Routing, MAX_RETRIES};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("scenario line {line}: {message}")]
pub struct ScenarioError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Expect {
    Holds { node: NodeId, author: UserId, fl: String },
    Lacks { node: NodeId, author: UserId, fl: String },
    Count { node: NodeId, n: usize },
    QueryContains { query: usize, author: UserId, fl: String },
    QueryPartial { query: usize, node: NodeId },
    QueryComplete { query: usize },
    TtlDrops { min: u64 },
    Unrouted { node: NodeId, term: Term },
}

#[derive(Debug, Clone, PartialEq)]
enum Command {
    Node { id: NodeId, directory: bool },
    Start(NodeId),
    Stop(NodeId),
    DefaultDirectory { node: Option<NodeId>, dir: NodeId },
    Route { node: NodeId, term: Term, routing: Routing },
    Advertise { node: NodeId, term: Term },
    Add { node: NodeId, author: UserId, fl: String },
    Query { node: NodeId, fl: String },
    Duplicate(f64),
    Quiesce,
    Expect(Expect),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    commands: Vec<(usize, Command)>,
}

fn words(line: &str, n: usize) -> Result<Vec<String>, ScenarioError> {
    let err = |m: &str| ScenarioError {
        line: n,
        message: m.into(),
    };
    let mut out = Vec::new();
    let mut chars = line.chars().peekable();
    loop {
        while chars.peek().is_some_and(|c| c.is_whitespace()) {
            chars.next();
        }
        let Some(&c) = chars.peek() else { break };
        if c == '#' {
            break;
        }
        let mut w = String::new();
        if c == '"' {
            chars.next();
            loop {
                match chars.next() {
                    None => return Err(err("unterminated quote")),
                    Some('"') => break,
                    Some('\\') => match chars.next() {
                        Some('n') => w.push('\n'),
                        Some(e) => w.push(e),
                        None => return Err(err("dangling escape")),
                    },
                    Some(x) => w.push(x),
                }
            }
        } else {
            while let Some(&x) = chars.peek() {
                if x.is_whitespace() {
                    break;
                }
                w.push(x);
                chars.next();
            }
        }
        out.push(w);
    }
    Ok(out)
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Scenario, ScenarioError> {
        let mut commands = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let n = i + 1;
            let w = words(line, n)?;
            if w.is_empty() {
                continue;
            }
            let err = |m: String| ScenarioError { line: n, message: m };
            let arity = |k: usize| {
                if w.len() == k {
                    Ok(())
                } else {
                    Err(err(format!("{} expects {} arguments", w[0], k - 1)))
                }
            };
            let node = |s: &str| NodeId(s.to_string());
            let term = |s: &str| parse_term(s).map_err(|e| err(format!("bad term {s:?}: {e}")));
            let fl = |s: &str| -> Result<String, ScenarioError> {
                parse(s).map_err(|e| err(format!("bad FL: {e}")))?;
                Ok(s.to_string())
            };
            let num = |s: &str| s.parse::<usize>().map_err(|_| err(format!("bad number {s:?}")));
            let cmd = match w[0].as_str() {
                "node" => {
                    if w.len() != 2 && !(w.len() == 3 && w[2] == "directory") {
                        return Err(err("node expects an id and optionally `directory`".into()));
                    }
                    Command::Node {
                        id: node(&w[1]),
                        directory: w.len() == 3,
                    }
                }
                "start" => {
                    arity(2)?;
                    Command::Start(node(&w[1]))
                }
                "stop" => {
                    arity(2)?;
                    Command::Stop(node(&w[1]))
                }
                "default-directory" => {
                    arity(3)?;
                    Command::DefaultDirectory {
                        node: (w[1] != "*").then(|| node(&w[1])),
                        dir: node(&w[2]),
                    }
                }
                "route" => {
                    arity(5)?;
                    let routing = match w[3].as_str() {
                        "list" => Routing::NexusList(w[4].split(',').filter(|s| !s.is_empty()).map(node).collect()),
                        "dir" => Routing::DirectoryRef(node(&w[4])),
                        "self" => Routing::SelfNexus,
                        other => return Err(err(format!("unknown route kind {other:?}"))),
                    };
                    Command::Route {
                        node: node(&w[1]),
                        term: term(&w[2])?,
                        routing,
                    }
                }
                "advertise" => {
                    arity(3)?;
                    Command::Advertise {
                        node: node(&w[1]),
                        term: term(&w[2])?,
                    }
                }
                "add" => {
                    arity(4)?;
                    Command::Add {
                        node: node(&w[1]),
                        author: UserId(w[2].clone()),
                        fl: fl(&w[3])?,
                    }
                }
                "query" => {
                    arity(3)?;
                    Command::Query {
                        node: node(&w[1]),
                        fl: fl(&w[2])?,
                    }
                }
                "duplicate" => {
                    arity(2)?;
                    let r: f64 = w[1].parse().map_err(|_| err("bad rate".into()))?;
                    if !(0.0..=1.0).contains(&r) {
                        return Err(err("rate must be in [0, 1]".into()));
                    }
                    Command::Duplicate(r)
                }
                "quiesce" => {
                    arity(1)?;
                    Command::Quiesce
                }
                "expect" => {
                    let what = w.get(1).map(String::as_str).unwrap_or("");
                    let e = match what {
                        "holds" | "lacks" => {
                            arity(5)?;
                            let (node, author, fl) = (node(&w[2]), UserId(w[3].clone()), fl(&w[4])?);
                            if what == "holds" {
                                Expect::Holds { node, author, fl }
                            } else {
                                Expect::Lacks { node, author, fl }
                            }
                        }
                        "count" => {
                            arity(4)?;
                            Expect::Count {
                                node: node(&w[2]),
                                n: num(&w[3])?,
                            }
                        }
                        "query" => {
                            let q = num(w.get(2).map(String::as_str).unwrap_or(""))?;
                            match w.get(3).map(String::as_str) {
                                Some("contains") => {
                                    arity(6)?;
                                    Expect::QueryContains {
                                        query: q,
                                        author: UserId(w[4].clone()),
                                        fl: fl(&w[5])?,
                                    }
                                }
                                Some("partial") => {
                                    arity(5)?;
                                    Expect::QueryPartial {
                                        query: q,
                                        node: node(&w[4]),
                                    }
                                }
                                Some("complete") => {
                                    arity(4)?;
                                    Expect::QueryComplete { query: q }
                                }
                                _ => return Err(err("expect query <n> contains|partial|complete".into())),
                            }
                        }
                        "ttl-drops" => {
                            arity(3)?;
                            Expect::TtlDrops { min: num(&w[2])? as u64 }
                        }
                        "unrouted" => {
                            arity(4)?;
                            Expect::Unrouted {
                                node: node(&w[2]),
                                term: term(&w[3])?,
                            }
                        }
                        other => return Err(err(format!("unknown expectation {other:?}"))),
                    };
                    Command::Expect(e)
                }
                other => return Err(err(format!("unknown command {other:?}"))),
            };
            commands.push((n, cmd));
        }
        Ok(Scenario { commands })
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimOptions {
    pub seed: u64,
    /// Overrides every `duplicate` line when set.
    pub duplicate: Option<f64>,
}

#[derive(Debug, Clone)]
struct Envelope {
    from: NodeId,
    to: NodeId,
    msg: Message,
    attempt: u32,
    ready_at: u64,
    duplicate: bool,
}

/// A node the simulator shares with whatever delivers its messages.
pub type SharedNode = Arc<Mutex<Node>>;

fn lock(n: &SharedNode) -> MutexGuard<'_, Node> {
    n.lock().unwrap_or_else(|p| p.into_inner())
}

/// Carries one message to a node and returns what the node sends on.
pub trait Transport {
    fn deliver(&mut self, node: &SharedNode, from: &NodeId, msg: Message) -> Result<Vec<Outgoing>, String>;
}

/// Hands messages straight to the node.
#[derive(Debug, Default, Clone, Copy)]
pub struct Direct;

impl Transport for Direct {
    fn deliver(&mut self, node: &SharedNode, from: &NodeId, msg: Message) -> Result<Vec<Outgoing>, String> {
        Ok(lock(node).handle(from, msg))
    }
}

/// Nodes plus the messages in flight between them.
pub struct Sim {
    nodes: BTreeMap<NodeId, SharedNode>,
    transport: Box<dyn Transport>,
    up: BTreeSet<NodeId>,
    queue: Vec<Envelope>,
    rng: ChaCha8Rng,
    now: u64,
    duplicate: f64,
    fixed_duplicate: Option<f64>,
    trace: Vec<String>,
    delivered: u64,
    /// Statements that passed their origin's rules, with their terms.
    accepted: BTreeMap<ObjectId, BTreeSet<Term>>,
    queries: Vec<(NodeId, u64)>,
}

impl Sim {
    pub fn new(opts: &SimOptions) -> Self {
        Sim::with_transport(opts, Box::new(Direct))
    }

    pub fn with_transport(opts: &SimOptions, transport: Box<dyn Transport>) -> Self {
        Sim {
            nodes: BTreeMap::new(),
            transport,
            up: BTreeSet::new(),
            queue: Vec::new(),
            rng: ChaCha8Rng::seed_from_u64(opts.seed),
            now: 0,
            duplicate: opts.duplicate.unwrap_or(0.0),
            fixed_duplicate: opts.duplicate,
            trace: Vec::new(),
            delivered: 0,
            accepted: BTreeMap::new(),
            queries: Vec::new(),
        }
    }

    pub fn add_node(&mut self, id: NodeId, directory: bool) {
        let mut n = Node::new(id.0.clone());
        n.set_directory(directory);
        self.nodes.insert(id.clone(), Arc::new(Mutex::new(n)));
        self.up.insert(id);
    }

    pub fn node(&self, id: &NodeId) -> Option<MutexGuard<'_, Node>> {
        self.nodes.get(id).map(lock)
    }

    pub fn set_up(&mut self, id: &NodeId, up: bool) {
        if up {
            self.up.insert(id.clone());
        } else {
            self.up.remove(id);
        }
    }

    pub fn trace(&self) -> &[String] {
        &self.trace
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    fn enqueue(&mut self, from: &NodeId, out: Vec<Outgoing>) {
        for o in out {
            self.queue.push(Envelope {
                from: from.clone(),
                to: o.to,
                msg: o.msg,
                attempt: 0,
                ready_at: self.now + 1,
                duplicate: false,
            });
        }
    }

    pub fn advertise(&mut self, node: &NodeId, term: &Term) {
        let out = self.node(node).map(|mut n| n.advertise(term));
        if let Some(out) = out {
            self.enqueue(node, out);
        }
    }

    pub fn route_add(&mut self, node: &NodeId, author: &UserId, g: &StatementGraph) -> bool {
        let Some(mut n) = self.node(node) else { return false };
        let r = n.route_add(author, g);
        drop(n);
        match r {
            Ok((_, out)) => {
                self.accepted
                    .insert(ObjectId::for_statement(g, author), routable_terms(g));
                self.enqueue(node, out);
                true
            }
            Err(_) => false,
        }
    }

    /// Starts a query; returns its number (from 1).
    pub fn route_query(&mut self, node: &NodeId, spec: &StatementGraph) -> usize {
        let started = self.node(node).map(|mut n| n.route_query(spec));
        if let Some((corr, out)) = started {
            self.enqueue(node, out);
            self.queries.push((node.clone(), corr));
        }
        self.queries.len()
    }

    pub fn query_report(&self, number: usize) -> Option<QueryReport> {
        let (node, corr) = self.queries.get(number.checked_sub(1)?)?;
        self.node(node)?.query_report(*corr).cloned()
    }

    /// Delivers one message; false when nothing is in flight.
    pub fn step(&mut self) -> bool {
        if self.queue.is_empty() {
            return false;
        }
        let earliest = self.queue.iter().map(|e| e.ready_at).min().expect("queue not empty");
        self.now = self.now.max(earliest);
        let ready: Vec<usize> = (0..self.queue.len())
            .filter(|&i| self.queue[i].ready_at <= self.now)
            .collect();
        let pick = ready[self.rng.gen_range(0..ready.len())];
        let env = self.queue.remove(pick);
        let short: String = env.msg.hash.chars().take(8).collect();
        let head = format!(
            "{:>5} {}->{} {} ttl={} {}",
            self.now,
            env.from,
            env.to,
            env.msg.kind.name(),
            env.msg.ttl,
            short
        );
        if !self.up.contains(&env.to) || !self.nodes.contains_key(&env.to) {
            if env.attempt < MAX_RETRIES {
                self.trace.push(format!("{head} down, retry {}", env.attempt + 1));
                self.queue.push(Envelope {
                    attempt: env.attempt + 1,
                    ready_at: self.now + (1 << env.attempt),
                    ..env
                });
            } else {
                self.trace.push(format!("{head} down, failed"));
                if let Some(mut n) = self.node(&env.from) {
                    n.delivery_failed(&env.to, env.msg);
                }
            }
            self.now += 1;
            return true;
        }
        self.trace
            .push(if env.duplicate { format!("{head} dup") } else { head });
        self.delivered += 1;
        if !env.duplicate && self.duplicate > 0.0 && self.rng.gen_bool(self.duplicate) {
            let later = self.now + self.rng.gen_range(1..=3);
            self.queue.push(Envelope {
                ready_at: later,
                duplicate: true,
                ..env.clone()
            });
        }
        let to = env.to.clone();
        let node = self.nodes[&to].clone();
        match self.transport.deliver(&node, &env.from, env.msg.clone()) {
            Ok(out) => self.enqueue(&to, out),
            Err(e) => {
                self.trace.push(format!("{:>5} transport error: {e}", self.now));
                if let Some(mut n) = self.node(&env.from) {
                    n.delivery_failed(&to, env.msg);
                }
            }
        }
        self.now += 1;
        true
    }

    /// Runs until nothing is in flight and anti-entropy has nothing left to offer.
    pub fn quiesce(&mut self) {
        for _ in 0..10 {
            while self.step() {}
            let mut any = false;
            let ids: Vec<NodeId> = self.up.iter().cloned().collect();
            for id in ids {
                let Some(mut n) = self.node(&id) else { continue };
                let out = n.anti_entropy();
                drop(n);
                any |= !out.is_empty();
                self.enqueue(&id, out);
            }
            if !any {
                return;
            }
        }
        while self.step() {}
    }

    /// Per nexus and term: does it hold exactly the accepted statements
    /// mentioning the term? Nodes that are down are skipped.
    pub fn convergence(&self) -> Vec<(String, bool)> {
        let mut out = Vec::new();
        for n in self.nodes.values().map(lock) {
            if !self.up.contains(&n.id) {
                continue;
            }
            for t in n.nexus_terms() {
                let want: BTreeSet<ObjectId> = self
                    .accepted
                    .iter()
                    .filter(|(_, terms)| terms.contains(&t))
                    .map(|(id, _)| *id)
                    .collect();
                let have = n.statements_mentioning(&t);
                let ok = want == have;
                let detail = if ok {
                    format!("{} statements", have.len())
                } else {
                    format!(
                        "missing {}, unexpected {}",
                        want.difference(&have).count(),
                        have.difference(&want).count()
                    )
                };
                out.push((format!("nexus {} holds all statements on {t}: {detail}", n.id), ok));
            }
        }
        out
    }

    pub fn ttl_drops(&self) -> u64 {
        self.nodes.values().map(|n| lock(n).ttl_drops()).sum()
    }

    /// Node digests, for comparing runs.
    pub fn digests(&self) -> BTreeMap<NodeId, String> {
        self.nodes.iter().map(|(k, n)| (k.clone(), lock(n).digest())).collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HarnessReport {
    pub trace: Vec<String>,
    pub checks: Vec<(String, bool)>,
    pub delivered: u64,
    pub digests: BTreeMap<NodeId, String>,
}

impl HarnessReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|(_, ok)| *ok)
    }

    pub fn summary(&self) -> String {
        let failed = self.checks.iter().filter(|(_, ok)| !ok).count();
        if failed == 0 {
            format!("all checks passed ({} checks)", self.checks.len())
        } else {
            format!("{failed} of {} checks failed", self.checks.len())
        }
    }
}

fn check(sim: &Sim, e: &Expect) -> (String, bool) {
    let holds = |node: &NodeId, author: &UserId, fl: &str| {
        let g = parse(fl).expect("validated when parsed");
        sim.node(node).is_some_and(|n| n.holds(author, &g))
    };
    let canonical = |fl: &str| crate::fl::canonical_text(&parse(fl).expect("validated when parsed"));
    match e {
        Expect::Holds { node, author, fl } => (format!("{node} holds {fl:?} by {author}"), holds(node, author, fl)),
        Expect::Lacks { node, author, fl } => (format!("{node} lacks {fl:?} by {author}"), !holds(node, author, fl)),
        Expect::Count { node, n } => {
            let have = sim
                .node(node)
                .map(|x| x.kb().store().live_statements().count())
                .unwrap_or(0);
            (format!("{node} holds {n} statements (has {have})"), have == *n)
        }
        Expect::QueryContains { query, author, fl } => {
            let want = canonical(fl);
            let ok = sim
                .query_report(*query)
                .is_some_and(|r| r.ordered().iter().any(|(_, a, t)| a == author && *t == want));
            (format!("query {query} returns {fl:?} by {author}"), ok)
        }
        Expect::QueryPartial { query, node } => {
            let ok = sim.query_report(*query).is_some_and(|r| r.unreachable.contains(node));
            (format!("query {query} is partial, missing {node}"), ok)
        }
        Expect::QueryComplete { query } => {
            let ok = sim.query_report(*query).is_some_and(|r| !r.is_partial());
            (format!("query {query} is complete"), ok)
        }
        Expect::TtlDrops { min } => {
            let d = sim.ttl_drops();
            (format!("at least {min} messages stopped by ttl (saw {d})"), d >= *min)
        }
        Expect::Unrouted { node, term } => {
            let ok = sim.node(node).is_some_and(|n| n.unrouted().contains(term));
            (format!("{node} flags {term} unrouted"), ok)
        }
    }
}

pub fn run_scenario(s: &Scenario, opts: &SimOptions) -> Result<HarnessReport, ScenarioError> {
    run_scenario_with(s, opts, Box::new(Direct))
}

/// Runs a scenario with messages carried by `transport`.
pub fn run_scenario_with(
    s: &Scenario,
    opts: &SimOptions,
    transport: Box<dyn Transport>,
) -> Result<HarnessReport, ScenarioError> {
    let mut sim = Sim::with_transport(opts, transport);
    let mut checks = Vec::new();
    for (line, cmd) in &s.commands {
        let missing = |id: &NodeId| ScenarioError {
            line: *line,
            message: format!("unknown node {id}"),
        };
        let known = |sim: &Sim, id: &NodeId| {
            if sim.nodes.contains_key(id) {
                Ok(())
            } else {
                Err(missing(id))
            }
        };
        match cmd {
            Command::Node { id, directory } => sim.add_node(id.clone(), *directory),
            Command::Start(id) => {
                known(&sim, id)?;
                sim.set_up(id, true);
            }
            Command::Stop(id) => {
                known(&sim, id)?;
                sim.set_up(id, false);
            }
            Command::DefaultDirectory { node, dir } => match node {
                Some(id) => {
                    known(&sim, id)?;
                    sim.node(id)
                        .expect("known")
                        .set_default_directory(Some(dir.clone()));
                }
                None => {
                    for mut n in sim.nodes.values().map(lock) {
                        if n.id != *dir {
                            n.set_default_directory(Some(dir.clone()));
                        }
                    }
                }
            },
            Command::Route { node, term, routing } => {
                known(&sim, node)?;
                sim.node(node)
                    .expect("known")
                    .set_route(term.clone(), routing.clone());
            }
            Command::Advertise { node, term } => {
                known(&sim, node)?;
                sim.advertise(node, term);
            }
            Command::Add { node, author, fl } => {
                known(&sim, node)?;
                let g = parse(fl).expect("validated when parsed");
                sim.route_add(node, author, &g);
            }
            Command::Query { node, fl } => {
                known(&sim, node)?;
                let g = parse(fl).expect("validated when parsed");
                sim.route_query(node, &g);
            }
            Command::Duplicate(r) => {
                if sim.fixed_duplicate.is_none() {
                    sim.duplicate = *r;
                }
            }
            Command::Quiesce => sim.quiesce(),
            Command::Expect(e) => checks.push(check(&sim, e)),
        }
    }
    sim.quiesce();
    checks.extend(sim.convergence());
    Ok(HarnessReport {
        trace: sim.trace.clone(),
        checks,
        delivered: sim.delivered,
        digests: sim.digests(),
    })
}

pub fn run_harness(text: &str, seed: u64) -> Result<HarnessReport, ScenarioError> {
    run_scenario(
        &Scenario::parse(text)?,
        &SimOptions {
            seed,
            duplicate: None,
        },
    )
}
