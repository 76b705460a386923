//! Random argumentation networks built through a real KB, with the same
//! network kept in oracle form.

use std::collections::BTreeMap;

use kbms::protocol::{AddOutcome, CorrectiveLink};
use kbms::service::KbApi;
use kbms::store::{LinkId, LinkKind, LinkTarget, ObjectId, UserId};
use kbms::valuation::{Criterion, Network};
use kbms::{Kb, LogicalClock};
use rand::Rng;

use super::valuation_oracle::{Link, Net, Target};

pub struct Built {
    pub kb: Kb,
    pub net: Net,
    pub ids: Vec<ObjectId>,
    pub users: Vec<UserId>,
}

/// Where a fixture network is written: a KB directly or a client.
trait Sink {
    fn add(&mut self, author: &UserId, text: &str, links: &[CorrectiveLink]) -> (ObjectId, Vec<LinkId>);
    fn rate(&mut self, rater: &UserId, id: &ObjectId, c: Criterion, v: f64);
}

impl Sink for Kb {
    fn add(&mut self, author: &UserId, text: &str, links: &[CorrectiveLink]) -> (ObjectId, Vec<LinkId>) {
        match self.submit_text(author, text, links).unwrap() {
            AddOutcome::Accepted { id, links } => (id, links),
            other => panic!("fixture statement rejected: {other:?}"),
        }
    }

    fn rate(&mut self, rater: &UserId, id: &ObjectId, c: Criterion, v: f64) {
        Kb::rate(self, rater, id, c, v).unwrap();
    }
}

struct Api<'a>(&'a mut dyn KbApi);

impl Sink for Api<'_> {
    fn add(&mut self, author: &UserId, text: &str, links: &[CorrectiveLink]) -> (ObjectId, Vec<LinkId>) {
        let a = self.0.submit(author, text, links).unwrap();
        (a.id, a.links)
    }

    fn rate(&mut self, rater: &UserId, id: &ObjectId, c: Criterion, v: f64) {
        self.0.rate(rater, id, c, v).unwrap();
    }
}

pub fn random_network(rng: &mut impl Rng, max_statements: usize, max_users: usize) -> Built {
    let mut kb = Kb::with_clock(Box::new(LogicalClock::default()));
    let (net, ids, users) = build(&mut kb, rng, max_statements, max_users);
    Built { kb, net, ids, users }
}

/// The same networks as [`random_network`], written through a client.
pub fn random_network_via(
    api: &mut dyn KbApi,
    rng: &mut impl Rng,
    max_statements: usize,
    max_users: usize,
) -> (Net, Vec<ObjectId>, Vec<UserId>) {
    build(&mut Api(api), rng, max_statements, max_users)
}

fn build(
    kb: &mut dyn Sink,
    rng: &mut impl Rng,
    max_statements: usize,
    max_users: usize,
) -> (Net, Vec<ObjectId>, Vec<UserId>) {
    let users: Vec<UserId> = (0..rng.gen_range(1..=max_users))
        .map(|i| UserId::new(format!("u{i}")))
        .collect();
    let n = rng.gen_range(1..=max_statements);
    let mut net = Net {
        users: users.len(),
        given: vec![0; users.len()],
        ..Net::default()
    };
    let mut ids = Vec::new();
    let mut link_ids: Vec<LinkId> = Vec::new();
    for i in 0..n {
        let owner = rng.gen_range(0..users.len());
        let mut links = Vec::new();
        let mut planned = Vec::new();
        if i > 0 {
            for _ in 0..rng.gen_range(0..=2) {
                if !link_ids.is_empty() && rng.gen_bool(0.25) {
                    let l = rng.gen_range(0..link_ids.len());
                    links.push(CorrectiveLink::on_link(LinkKind::Objection, link_ids[l]));
                    planned.push(Link {
                        supports: false,
                        source: i,
                        target: Target::Link(l),
                    });
                } else {
                    let j = rng.gen_range(0..i);
                    let kind = [LinkKind::Argument, LinkKind::Objection, LinkKind::Correction][rng.gen_range(0..3)];
                    links.push(CorrectiveLink::new(kind, ids[j]));
                    planned.push(Link {
                        supports: kind == LinkKind::Argument,
                        source: i,
                        target: Target::Statement(j),
                    });
                }
            }
        }
        let text = format!("\"claim number {i}\"");
        let (id, made) = kb.add(&users[owner], &text, &links);
        ids.push(id);
        link_ids.extend(made);
        net.owner.push(owner);
        net.links.extend(planned);
    }
    let mut veracity: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut other: BTreeMap<(usize, usize), ()> = BTreeMap::new();
    for _ in 0..rng.gen_range(0..=3 * n) {
        let r = rng.gen_range(0..users.len());
        let s = rng.gen_range(0..n);
        let v: f64 = if rng.gen_bool(0.3) {
            [-1.0, -0.5, 0.0, 0.5, 1.0][rng.gen_range(0..5)]
        } else {
            rng.gen_range(-1.0..=1.0)
        };
        if rng.gen_bool(0.8) {
            kb.rate(&users[r], &ids[s], Criterion::Veracity, v);
            veracity.insert((r, s), v);
        } else {
            kb.rate(&users[r], &ids[s], Criterion::Originality, v);
            other.insert((r, s), ());
        }
    }
    for (r, _) in veracity.keys().chain(other.keys()) {
        net.given[*r] += 1;
    }
    net.veracity = veracity.into_iter().map(|((r, s), v)| (r, s, v)).collect();
    (net, ids, users)
}

/// Oracle form of a module network; statements and users in map order.
pub fn net_from(network: &Network) -> (Net, Vec<ObjectId>, Vec<UserId>) {
    let ids: Vec<ObjectId> = network.statements.keys().copied().collect();
    let users: Vec<UserId> = network.users.iter().cloned().collect();
    let si = |id: &ObjectId| ids.iter().position(|x| x == id).unwrap();
    let ui = |u: &UserId| users.iter().position(|x| x == u).unwrap();
    let lpos: Vec<LinkId> = network.links.iter().map(|l| l.id).collect();
    let net = Net {
        users: users.len(),
        owner: ids.iter().map(|id| ui(&network.statements[id])).collect(),
        veracity: network.veracity.iter().map(|(u, s, v)| (ui(u), si(s), *v)).collect(),
        given: users
            .iter()
            .map(|u| network.given.get(u).copied().unwrap_or(0))
            .collect(),
        links: network
            .links
            .iter()
            .map(|l| Link {
                supports: l.supports,
                source: si(&l.source),
                target: match l.target {
                    LinkTarget::Object(o) => Target::Statement(si(&o)),
                    LinkTarget::Link(m) => Target::Link(lpos.iter().position(|x| *x == m).unwrap()),
                },
            })
            .collect(),
    };
    (net, ids, users)
}
