//! A knowledge base: store, ratings and advertisements behind the edit
//! protocol, with every change journaled before it is acknowledged.

use std::collections::BTreeSet;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::fl::{canonical_text, parse, FlError, StatementGraph, Term};
use crate::protocol::{
    apply_add, apply_remove, decompose, list_disagreements, AddOutcome, Argumentation, CorrectiveLink, Details,
    EditEvent, Journal, JournalError, PlanRef, Recorded, Rejection, RemoveOutcome,
};
use crate::protocol::{Action, MetaLink};
use crate::store::{
    Annotation, LinkTarget, ObjectId, QueryFilter, QueryResult, ScoreView, Store, StoreError, Timestamp, UserId,
};
use crate::valuation::{
    compute_usefulness, Criterion, Evaluation, Network, RateError, Ratings, UsefulnessScores, ValuationParams,
};

pub trait Clock: Send {
    fn now(&mut self) -> Timestamp;
}

/// Wall-clock milliseconds.
#[derive(Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&mut self) -> Timestamp {
        let ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0);
        Timestamp(ms)
    }
}

/// Counter starting at 1, for reproducible journals.
#[derive(Debug, Default)]
pub struct LogicalClock(pub u64);

impl Clock for LogicalClock {
    fn now(&mut self) -> Timestamp {
        self.0 += 1;
        Timestamp(self.0)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum KbError {
    #[error(transparent)]
    Syntax(#[from] FlError),
    #[error(transparent)]
    Rate(#[from] RateError),
    #[error("unknown object {0}")]
    UnknownObject(String),
    #[error(transparent)]
    Journal(#[from] JournalError),
}

impl From<StoreError> for KbError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::UnknownId(id) => KbError::UnknownObject(id.to_string()),
            StoreError::UnknownLink(l) => KbError::UnknownObject(l.to_string()),
            other => KbError::UnknownObject(other.to_string()),
        }
    }
}

/// Outcome of one statement of a split sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StepOutcome {
    pub actor: UserId,
    pub text: String,
    pub outcome: AddOutcome,
}

pub struct Kb {
    store: Store,
    ratings: Ratings,
    journal: Journal,
    clock: Box<dyn Clock>,
    last: Timestamp,
    /// (term, node) pairs advertised through this KB.
    advertised: BTreeSet<(String, String)>,
    /// Timestamp to use instead of the clock while replaying.
    replaying: Option<Timestamp>,
}

impl std::fmt::Debug for Kb {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Kb")
            .field("objects", &self.store.objects().count())
            .field("events", &self.journal.events().len())
            .finish()
    }
}

impl Default for Kb {
    fn default() -> Self {
        Kb::new()
    }
}

impl Kb {
    pub fn new() -> Self {
        Kb::with_clock(Box::new(SystemClock))
    }

    pub fn with_clock(clock: Box<dyn Clock>) -> Self {
        Kb {
            store: Store::default(),
            ratings: Ratings::new(),
            journal: Journal::new(),
            clock,
            last: Timestamp(0),
            advertised: BTreeSet::new(),
            replaying: None,
        }
    }

    /// Rebuilds a KB from a journal file and keeps appending to it.
    pub fn open(path: &Path, clock: Box<dyn Clock>) -> Result<Kb, JournalError> {
        let events = Journal::read(path)?;
        let mut kb = Kb::replay_with(&events, clock)?;
        kb.journal.attach(path)?;
        Ok(kb)
    }

    pub fn replay(events: &[EditEvent]) -> Result<Kb, JournalError> {
        Kb::replay_with(events, Box::new(SystemClock))
    }

    /// Re-applies every event and checks it yields the recorded outcome.
    pub fn replay_with(events: &[EditEvent], clock: Box<dyn Clock>) -> Result<Kb, JournalError> {
        let mut kb = Kb::with_clock(clock);
        for e in events {
            if e.seq != kb.journal.next_seq() {
                return Err(JournalError::corrupt(e.seq, "sequence gap"));
            }
            if e.timestamp <= kb.last {
                return Err(JournalError::corrupt(e.seq, "timestamps must increase"));
            }
            kb.replaying = Some(e.timestamp);
            let ok = kb.reapply(e);
            kb.replaying = None;
            match ok {
                Ok(true) => {}
                Ok(false) => return Err(JournalError::corrupt(e.seq, "outcome differs from the record")),
                Err(KbError::Journal(j)) => return Err(j),
                Err(other) => return Err(JournalError::corrupt(e.seq, other.to_string())),
            }
        }
        Ok(kb)
    }

    fn reapply(&mut self, e: &EditEvent) -> Result<bool, KbError> {
        match &e.details {
            Details::Add { fl, links, outcome } => {
                let g = parse(fl)?;
                let got = self.submit_add(&e.actor, &g, links)?;
                let same = match (&got, outcome) {
                    (AddOutcome::Accepted { id, .. }, Recorded::Accepted) => id.to_string() == e.object,
                    (AddOutcome::Rejected(a), Recorded::Rejected(b)) => a == b,
                    _ => false,
                };
                Ok(same)
            }
            Details::Remove { .. } | Details::Clone { .. } => {
                let id: ObjectId = e
                    .object
                    .parse()
                    .map_err(|_| KbError::UnknownObject(e.object.clone()))?;
                let got = self.submit_remove(&e.actor, &id)?;
                let same = match (&got, &e.details) {
                    (RemoveOutcome::Removed, Details::Remove { outcome: Recorded::Removed }) => true,
                    (RemoveOutcome::Rejected(a), Details::Remove { outcome: Recorded::Rejected(b) }) => a == b,
                    (RemoveOutcome::ClonedTo(u), Details::Clone { to }) => u == to,
                    _ => false,
                };
                Ok(same)
            }
            Details::Rate { criterion, value } => {
                let id: ObjectId = e
                    .object
                    .parse()
                    .map_err(|_| KbError::UnknownObject(e.object.clone()))?;
                self.rate(&e.actor, &id, criterion.clone(), *value)?;
                Ok(true)
            }
            Details::Advertise { term, node } => {
                self.advertise(&e.actor, term, node)?;
                Ok(true)
            }
        }
    }

    fn tick(&mut self) -> Timestamp {
        let t = match self.replaying {
            Some(t) => t,
            None => self.clock.now().max(Timestamp(self.last.0 + 1)),
        };
        self.last = t;
        t
    }

    fn record(&mut self, at: Timestamp, actor: &UserId, action: Action, object: String, details: Details) -> Result<(), KbError> {
        let e = EditEvent {
            seq: self.journal.next_seq(),
            timestamp: at,
            actor: actor.clone(),
            action,
            object,
            details,
        };
        self.journal.append(e)?;
        Ok(())
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn ratings(&self) -> &Ratings {
        &self.ratings
    }

    pub fn journal(&self) -> &Journal {
        &self.journal
    }

    pub fn advertised(&self) -> &BTreeSet<(String, String)> {
        &self.advertised
    }

    /// Sequence number of the last journaled event.
    pub fn seq(&self) -> u64 {
        self.journal.next_seq() - 1
    }

    /// Adds one statement under the edit rules. Rejections are journaled too,
    /// so a replay can check that they repeat.
    pub fn submit_add(
        &mut self,
        actor: &UserId,
        g: &StatementGraph,
        links: &[CorrectiveLink],
    ) -> Result<AddOutcome, KbError> {
        let at = self.tick();
        let text = canonical_text(g);
        // parse the canonical text so the live and replayed payloads agree
        let g = parse(&text)?;
        let outcome = apply_add(&mut self.store, actor, &g, links, at);
        let (object, recorded) = match &outcome {
            AddOutcome::Accepted { id, .. } => (id.to_string(), Recorded::Accepted),
            AddOutcome::Rejected(r) => (ObjectId::for_statement(&g, actor).to_string(), Recorded::Rejected(r.clone())),
        };
        self.record(
            at,
            actor,
            Action::Add,
            object,
            Details::Add {
                fl: text,
                links: links.to_vec(),
                outcome: recorded,
            },
        )?;
        Ok(outcome)
    }

    pub fn submit_text(&mut self, actor: &UserId, fl: &str, links: &[CorrectiveLink]) -> Result<AddOutcome, KbError> {
        let g = parse(fl)?;
        self.submit_add(actor, &g, links)
    }

    /// Splits an argumentation sentence into linked statements and submits
    /// them in order. Steps whose link target was rejected are rejected too.
    pub fn submit_structured(&mut self, actor: &UserId, g: &StatementGraph) -> Result<Vec<StepOutcome>, KbError> {
        let plan = decompose(g, actor);
        let mut objects: Vec<Option<ObjectId>> = Vec::new();
        let mut first_link: Vec<Option<crate::store::LinkId>> = Vec::new();
        let mut out = Vec::new();
        for step in &plan {
            let mut links = Vec::new();
            let mut missing = None;
            if let Some(pl) = &step.link {
                let target = match pl.target {
                    PlanRef::Step(i) => objects[i].map(LinkTarget::Object),
                    PlanRef::LinkOf(i) => first_link[i].map(LinkTarget::Link),
                    PlanRef::Existing(t) => Some(t),
                };
                let mut annotations = Vec::new();
                for (rel, i) in &pl.annotations {
                    match objects[*i] {
                        Some(object) => annotations.push(Annotation {
                            relation: rel.clone(),
                            object,
                        }),
                        None => missing = Some(format!("step {i}")),
                    }
                }
                match target {
                    Some(target) => links.push(CorrectiveLink {
                        kind: pl.kind,
                        target,
                        meta: Vec::<MetaLink>::new(),
                        annotations,
                    }),
                    None => missing = Some("rejected step".into()),
                }
            }
            let outcome = match missing {
                Some(target) => AddOutcome::Rejected(Rejection::UnknownLinkTarget { target }),
                None => self.submit_add(&step.actor, &step.graph, &links)?,
            };
            let (id, link) = match &outcome {
                AddOutcome::Accepted { id, links } => (Some(*id), links.first().copied()),
                AddOutcome::Rejected(_) => (None, None),
            };
            objects.push(id);
            first_link.push(link);
            out.push(StepOutcome {
                actor: step.actor.clone(),
                text: canonical_text(&step.graph),
                outcome,
            });
        }
        Ok(out)
    }

    pub fn submit_remove(&mut self, actor: &UserId, id: &ObjectId) -> Result<RemoveOutcome, KbError> {
        let at = self.tick();
        let outcome = apply_remove(&mut self.store, actor, id);
        let (action, details) = match &outcome {
            RemoveOutcome::Removed => (
                Action::Remove,
                Details::Remove {
                    outcome: Recorded::Removed,
                },
            ),
            RemoveOutcome::ClonedTo(to) => (Action::Clone, Details::Clone { to: to.clone() }),
            RemoveOutcome::Rejected(r) => (
                Action::Remove,
                Details::Remove {
                    outcome: Recorded::Rejected(r.clone()),
                },
            ),
        };
        self.record(at, actor, action, id.to_string(), details)?;
        Ok(outcome)
    }

    pub fn rate(&mut self, rater: &UserId, object: &ObjectId, criterion: Criterion, value: f64) -> Result<Evaluation, KbError> {
        if !self.store.is_live(object) {
            return Err(RateError::UnknownObject(*object).into());
        }
        if !(-1.0..=1.0).contains(&value) {
            return Err(RateError::OutOfRange(value).into());
        }
        let at = self.tick();
        let e = Evaluation {
            rater: rater.clone(),
            object: *object,
            criterion: criterion.clone(),
            value,
            timestamp: at,
        };
        self.record(at, rater, Action::Rate, object.to_string(), Details::Rate { criterion, value })?;
        Ok(self.ratings.rate(&self.store, e)?.clone())
    }

    /// Records that `node` is a nexus for `term`.
    pub fn advertise(&mut self, actor: &UserId, term: &str, node: &str) -> Result<bool, KbError> {
        let t: Term = crate::fl::parse_term(term)?;
        let key = (t.to_string(), node.to_string());
        if self.advertised.contains(&key) {
            return Ok(false);
        }
        let at = self.tick();
        self.store.ensure_term(&t, at);
        self.record(
            at,
            actor,
            Action::Advertise,
            ObjectId::for_term(&t).to_string(),
            Details::Advertise {
                term: key.0.clone(),
                node: key.1.clone(),
            },
        )?;
        self.advertised.insert(key);
        Ok(true)
    }

    pub fn list_disagreements(&self, id: &ObjectId) -> Result<Argumentation, KbError> {
        Ok(list_disagreements(&self.store, id)?)
    }

    pub fn network(&self) -> Network {
        Network::from_store(&self.store, &self.ratings)
    }

    pub fn compute_usefulness(&self, params: &ValuationParams) -> UsefulnessScores {
        compute_usefulness(&self.network(), params)
    }

    /// Query; scores are computed only when the filter needs them.
    pub fn query(&self, f: &QueryFilter, params: &ValuationParams) -> QueryResult {
        let needs_scores = f.min_usefulness.is_some()
            || matches!(f.authors, Some(crate::store::AuthorFilter::MinUserScore(_)));
        if needs_scores {
            let s = self.compute_usefulness(params);
            self.store.query(
                f,
                ScoreView {
                    statements: Some(&s.statement_score),
                    users: Some(&s.user_score),
                },
            )
        } else {
            self.store.query(f, ScoreView::default())
        }
    }

    /// Complete state listing; two KBs with equal dumps are the same KB.
    pub fn dump(&self) -> String {
        let mut s = self.store.dump();
        s.push_str(&self.ratings.dump());
        for (t, n) in &self.advertised {
            s.push_str(&format!("nexus {t} {n}\n"));
        }
        s
    }
}
