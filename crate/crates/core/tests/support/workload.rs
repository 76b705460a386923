//! Randomized edit workload run through any client, with an independent
//! model of what the KB must look like afterwards.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use kbms::protocol::{CorrectiveLink, Journal, Rejection, RemoveOutcome};
use kbms::service::{ApiError, KbApi, QueryRequest};
use kbms::store::{LinkKind, ObjectId, UserId};
use kbms::valuation::Criterion;
use kbms::Kb;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const USERS: [&str; 5] = ["ann", "bob", "cy", "dee", "eve"];
const TYPES: [&str; 3] = ["man", "dog", "robot"];
const PARTS: [&str; 2] = ["leg", "arm"];
const NAMES: [&str; 4] = ["Joe", "Rex", "Ada", "Max"];

/// Statement templates with their meaning spelled out, so conflicts can
/// be decided without the KB.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Template {
    AtMost { x: usize, y: usize, k: u32 },
    AtLeast { x: usize, y: usize, k: u32 },
    Some { x: usize, y: usize, k: u32 },
    Named { x: usize, name: usize },
}

impl Template {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let (x, y, k) = (rng.gen_range(0..3), rng.gen_range(0..2), rng.gen_range(1..=3));
        match rng.gen_range(0..4) {
            0 => Template::AtMost { x, y, k },
            1 => Template::AtLeast { x, y, k },
            2 => Template::Some { x, y, k },
            _ => Template::Named {
                x,
                name: rng.gen_range(0..NAMES.len()),
            },
        }
    }

    pub fn fl(self) -> String {
        match self {
            Template::AtMost { x, y, k } => format!("every p#{} has for p#part at most {k} p#{}", TYPES[x], PARTS[y]),
            Template::AtLeast { x, y, k } => format!("every p#{} has for p#part at least {k} p#{}", TYPES[x], PARTS[y]),
            Template::Some { x, y, k } => format!("a p#{} p#part: {k} p#{}", TYPES[x], PARTS[y]),
            Template::Named { x, name } => format!("a p#{} p#name: \"{}\"", TYPES[x], NAMES[name]),
        }
    }

    /// Upper bound on parts of type y of every x, if the template sets one.
    fn upper(self) -> Option<(usize, usize, u32)> {
        match self {
            Template::AtMost { x, y, k } => Some((x, y, k)),
            _ => None,
        }
    }

    /// Parts some x (or every x) must have.
    fn lower(self) -> Option<(usize, usize, u32)> {
        match self {
            Template::AtLeast { x, y, k } | Template::Some { x, y, k } => Some((x, y, k)),
            _ => None,
        }
    }

    /// Whether the two cannot both hold, types being non-empty.
    pub fn conflicts(self, other: Template) -> bool {
        let clash = |a: Template, b: Template| match (a.upper(), b.lower()) {
            (Some((x, y, hi)), Some((x2, y2, lo))) => x == x2 && y == y2 && lo > hi,
            _ => false,
        };
        clash(self, other) || clash(other, self)
    }
}

#[derive(Debug, Default)]
pub struct WorkloadReport {
    pub submissions: usize,
    pub accepted: usize,
    pub rejected: BTreeMap<String, usize>,
    pub removals: usize,
    pub clones: usize,
    pub not_owner: usize,
    pub ratings: usize,
    pub live: usize,
    pub violations: Vec<String>,
}

impl WorkloadReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    fn violation(&mut self, s: String) {
        if self.violations.len() < 20 {
            self.violations.push(s);
        }
    }
}

struct Entry {
    template: Template,
    owner: UserId,
    live: bool,
}

fn reason(e: &ApiError) -> String {
    e.reason().map(str::to_string).unwrap_or_else(|| e.class().to_string())
}

/// Runs `submissions` adds and removes (plus some ratings) from five
/// users and checks the edit rules against the model as it goes.
pub fn run(api: &mut dyn KbApi, rng: &mut ChaCha8Rng, submissions: usize) -> WorkloadReport {
    let users: Vec<UserId> = USERS.iter().map(|u| UserId::from(*u)).collect();
    let mut model: BTreeMap<ObjectId, Entry> = BTreeMap::new();
    let mut r = WorkloadReport::default();
    while r.submissions < submissions {
        let roll = rng.gen_range(0..10);
        let user = users.choose(rng).expect("users").clone();
        let live: Vec<ObjectId> = model.iter().filter(|(_, e)| e.live).map(|(k, _)| *k).collect();
        if roll < 7 || live.is_empty() {
            let t = Template::random(rng);
            let fl = t.fl();
            let mut links: Vec<CorrectiveLink> = Vec::new();
            // answer each missing-link rejection by objecting explicitly
            for _ in 0..4 {
                r.submissions += 1;
                match api.submit(&user, &fl, &links) {
                    Ok(a) => {
                        r.accepted += 1;
                        if model.get(&a.id).is_some_and(|e| e.live) {
                            r.violation(format!("{} accepted twice", a.id));
                        }
                        model.insert(
                            a.id,
                            Entry {
                                template: t,
                                owner: user.clone(),
                                live: true,
                            },
                        );
                        break;
                    }
                    Err(e) => {
                        *r.rejected.entry(reason(&e)).or_default() += 1;
                        match e {
                            ApiError::ProtocolViolation {
                                rejection: Rejection::MissingCorrectiveLink { with },
                            } => {
                                let kind = *[LinkKind::Objection, LinkKind::Correction].choose(rng).expect("kinds");
                                links.push(CorrectiveLink::new(kind, with));
                            }
                            ApiError::ProtocolViolation { .. } => break,
                            other => {
                                r.violation(format!("add {fl:?} failed outside the protocol: {other}"));
                                break;
                            }
                        }
                    }
                }
            }
        } else if roll < 9 {
            r.submissions += 1;
            let id = *live.choose(rng).expect("non-empty");
            let owner = model[&id].owner.clone();
            let relying: BTreeSet<UserId> = match api.argumentation(&id) {
                Ok(a) => a.links.iter().map(|n| n.author.clone()).filter(|u| *u != owner).collect(),
                Err(e) => {
                    r.violation(format!("argumentation of live {id}: {e}"));
                    continue;
                }
            };
            match api.remove(&user, &id) {
                Err(e) if e.reason() == Some("not_owner") => {
                    r.not_owner += 1;
                    if user == owner {
                        r.violation(format!("owner {user} refused removal of {id}"));
                    }
                }
                Err(e) => r.violation(format!("remove {id} by {user}: {e}")),
                Ok(_) if user != owner => r.violation(format!("{user} removed {id} owned by {owner}")),
                Ok(RemoveOutcome::Removed) => {
                    r.removals += 1;
                    if !relying.is_empty() {
                        r.violation(format!("{id} destroyed although {relying:?} rely on it"));
                    }
                    model.get_mut(&id).expect("tracked").live = false;
                }
                Ok(RemoveOutcome::ClonedTo(to)) => {
                    r.clones += 1;
                    if !relying.contains(&to) {
                        r.violation(format!("{id} handed to {to}, not one of {relying:?}"));
                    }
                    model.get_mut(&id).expect("tracked").owner = to;
                }
                Ok(RemoveOutcome::Rejected(rej)) => r.violation(format!("rejection {rej} returned as success")),
            }
        } else {
            let id = *live.choose(rng).expect("non-empty");
            let v = (rng.gen_range(-10..=10) as f64) / 10.0;
            match api.rate(&user, &id, Criterion::Veracity, v) {
                Ok(_) => r.ratings += 1,
                Err(e) => r.violation(format!("rating {id}: {e}")),
            }
        }
    }

    // loss-lessness: every accepted statement is live with its owner unless
    // that owner removed it
    for (id, e) in &model {
        match api.object(id) {
            Ok(o) => {
                if o.live != e.live {
                    r.violation(format!("{id} live={} but model says {}", o.live, e.live));
                }
                if e.live && o.author != e.owner {
                    r.violation(format!("{id} owned by {} but model says {}", o.author, e.owner));
                }
            }
            Err(err) => r.violation(format!("{id} lost: {err}")),
        }
    }
    let listed: BTreeSet<ObjectId> = match api.query(&QueryRequest::default()) {
        Ok(q) => q
            .hits
            .iter()
            .filter(|h| h.kind == kbms::store::ObjectKind::StatementObject)
            .map(|h| h.id)
            .collect(),
        Err(e) => {
            r.violation(format!("listing statements: {e}"));
            BTreeSet::new()
        }
    };
    let expected: BTreeSet<ObjectId> = model.iter().filter(|(_, e)| e.live).map(|(k, _)| *k).collect();
    if listed != expected {
        r.violation(format!("{} statements listed, model has {}", listed.len(), expected.len()));
    }
    r.live = expected.len();

    // every live contradictory pair carries an explicit disagreement link
    let mut linked: BTreeSet<(ObjectId, ObjectId)> = BTreeSet::new();
    for id in &expected {
        if let Ok(a) = api.argumentation(id) {
            for n in a.links.iter().filter(|n| n.kind.is_disagreement()) {
                linked.insert((n.source, *id));
                linked.insert((*id, n.source));
            }
        }
    }
    let ids: Vec<&ObjectId> = expected.iter().collect();
    for (i, a) in ids.iter().enumerate() {
        for b in &ids[i + 1..] {
            if model[*a].template.conflicts(model[*b].template) && !linked.contains(&(**a, **b)) {
                r.violation(format!(
                    "{a} ({}) and {b} ({}) contradict without a link",
                    model[*a].owner, model[*b].owner
                ));
            }
        }
    }
    r
}

/// Rebuilds a KB from the journal file and compares it with the live one.
pub fn replay_matches(api: &mut dyn KbApi, journal: &Path) -> Result<(), String> {
    let text = std::fs::read_to_string(journal).map_err(|e| e.to_string())?;
    let events = Journal::read(journal).map_err(|e| e.to_string())?;
    let kb = Kb::replay(&events).map_err(|e| e.to_string())?;
    if kb.journal().text() != text {
        return Err("re-serialized journal differs from the file".into());
    }
    let live = api.dump().map_err(|e| e.to_string())?;
    if kb.dump() != live {
        return Err("replayed dump differs from the running KB".into());
    }
    Ok(())
}
