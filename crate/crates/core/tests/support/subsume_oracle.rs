//! Model enumeration for star-shaped statements over two types `A ⊒ B` and
//! two unrelated relations. An individual is summarized by its own type
//! class (untyped, A only, A and B) and, per relation and successor class,
//! how many successors it has. Bounds never exceed 3, so counts saturate at
//! 4 without losing any distinction. Domains are unbounded: a refuting model
//! may add any individuals it needs, as long as they are consistent.

use kbms::fl::{ConceptNode, Quantifier, RelationEdge, StatementGraph, Term};
use kbms::store::Ontology;
use rand::Rng;

pub const CLASSES: usize = 3;
pub const RELS: usize = 2;
pub const MAX_COUNT: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ty {
    A,
    B,
    Thing,
}

impl Ty {
    fn holds(self, class: usize) -> bool {
        match self {
            Ty::Thing => true,
            Ty::A => class >= 1,
            Ty::B => class == 2,
        }
    }

    fn term(self) -> Term {
        match self {
            Ty::A => Term::formal("o", "A"),
            Ty::B => Term::formal("o", "B"),
            Ty::Thing => Term::thing(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub rel: usize,
    pub dest: Ty,
    pub lo: u32,
    pub hi: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Shape {
    pub universal: bool,
    pub root: Ty,
    pub edges: Vec<Edge>,
}

pub fn ontology() -> Ontology {
    let mut o = Ontology::new();
    o.add_subtype(Ty::A.term(), Term::thing()).unwrap();
    o.add_subtype(Ty::B.term(), Ty::A.term()).unwrap();
    o
}

impl Shape {
    pub fn to_graph(&self) -> StatementGraph {
        let q = if self.universal {
            Quantifier::Universal
        } else {
            Quantifier::Existential
        };
        let mut root = ConceptNode::typed(Some(q), self.root.term());
        for e in &self.edges {
            let rel = Term::formal("o", format!("r{}", e.rel + 1));
            let dq = Quantifier::cardinality(e.lo, e.hi);
            root.attachments
                .push(RelationEdge::new(rel, ConceptNode::typed(Some(dq), e.dest.term())));
        }
        StatementGraph::new(root)
    }
}

#[derive(Debug, Clone, Copy)]
struct Profile {
    class: usize,
    counts: [[u32; CLASSES]; RELS],
}

impl Profile {
    fn count(&self, rel: usize, dest: Ty) -> u32 {
        (0..CLASSES)
            .filter(|&c| dest.holds(c))
            .map(|c| self.counts[rel][c])
            .sum()
    }

    fn satisfies(&self, edges: &[Edge]) -> bool {
        edges.iter().all(|e| {
            let n = self.count(e.rel, e.dest);
            n >= e.lo && e.hi.is_none_or(|h| n <= h)
        })
    }

    fn used_classes(&self) -> [bool; CLASSES] {
        let mut used = [false; CLASSES];
        for (c, u) in used.iter_mut().enumerate() {
            *u = (0..RELS).any(|r| self.counts[r][c] > 0);
        }
        used
    }
}

fn all_profiles() -> Vec<Profile> {
    let per = MAX_COUNT + 1;
    let slots = CLASSES * RELS;
    let mut out = Vec::new();
    for class in 0..CLASSES {
        for mut idx in 0..per.pow(slots as u32) {
            let mut counts = [[0u32; CLASSES]; RELS];
            for r in 0..RELS {
                for c in 0..CLASSES {
                    counts[r][c] = (idx % per) as u32;
                    idx /= per;
                }
            }
            out.push(Profile { class, counts });
        }
    }
    out
}

pub struct Oracle {
    profiles: Vec<Profile>,
}

impl Default for Oracle {
    fn default() -> Self {
        Oracle {
            profiles: all_profiles(),
        }
    }
}

impl Oracle {
    /// Greatest set of classes that can be populated by individuals meeting
    /// `allowed`, whose successors are in turn populated from the same set.
    fn fillable(&self, allowed: &dyn Fn(&Profile) -> bool) -> [bool; CLASSES] {
        let ok: Vec<&Profile> = self.profiles.iter().filter(|p| allowed(p)).collect();
        let mut fill = [true; CLASSES];
        loop {
            let mut next = [false; CLASSES];
            for p in &ok {
                if !next[p.class] && closed(p, &fill) {
                    next[p.class] = true;
                }
            }
            if next == fill {
                return fill;
            }
            fill = next;
        }
    }

    /// Whether every model of `specific` is a model of `general`.
    pub fn entails(&self, specific: &Shape, general: &Shape) -> bool {
        // constraint every individual of a universal specific must meet
        let req = |p: &Profile| {
            !specific.universal || !specific.root.holds(p.class) || p.satisfies(&specific.edges)
        };
        let root_ok = |p: &Profile| specific.root.holds(p.class) && p.satisfies(&specific.edges);
        if !general.universal {
            let g_ok = |p: &Profile| general.root.holds(p.class) && p.satisfies(&general.edges);
            let avoid = |p: &Profile| !g_ok(p) && req(p);
            let fill = self.fillable(&avoid);
            let refutable = if specific.universal {
                fill.iter().any(|&f| f)
            } else {
                self.profiles
                    .iter()
                    .any(|p| root_ok(p) && !g_ok(p) && closed(p, &fill))
            };
            !refutable
        } else {
            let fill = self.fillable(&req);
            let violator = self.profiles.iter().any(|p| {
                general.root.holds(p.class)
                    && !p.satisfies(&general.edges)
                    && req(p)
                    && closed(p, &fill)
            });
            let model_exists =
                specific.universal || self.profiles.iter().any(|p| root_ok(p) && closed(p, &fill));
            if !model_exists {
                return true;
            }
            !violator
        }
    }
}

fn closed(p: &Profile, fill: &[bool; CLASSES]) -> bool {
    p.used_classes()
        .iter()
        .zip(fill)
        .all(|(&used, &f)| !used || f)
}

pub fn random_edge(rng: &mut impl Rng) -> Edge {
    let dest = [Ty::A, Ty::B, Ty::Thing][rng.gen_range(0..3)];
    let (lo, hi) = match rng.gen_range(0..4) {
        0 => (1, None),
        1 => (rng.gen_range(0..=3), None),
        _ => {
            let a = rng.gen_range(0..=3);
            let b = rng.gen_range(a..=3);
            (a, Some(b))
        }
    };
    Edge {
        rel: rng.gen_range(0..RELS),
        dest,
        lo,
        hi,
    }
}

/// At most four nodes: the root and up to three destinations.
pub fn random_shape(rng: &mut impl Rng) -> Shape {
    let n = rng.gen_range(0..=3);
    Shape {
        universal: rng.gen_bool(0.5),
        root: if rng.gen_bool(0.5) { Ty::A } else { Ty::B },
        edges: (0..n).map(|_| random_edge(rng)).collect(),
    }
}

/// A shape obtained from `s` by steps that usually specialize it, so that
/// pairs are not overwhelmingly unrelated.
pub fn perturb(s: &Shape, rng: &mut impl Rng) -> Shape {
    let mut out = s.clone();
    for _ in 0..rng.gen_range(1..=2) {
        match rng.gen_range(0..6) {
            0 => out.root = if rng.gen_bool(0.5) { Ty::A } else { Ty::B },
            1 if out.edges.len() < 3 => out.edges.push(random_edge(rng)),
            2 if !out.edges.is_empty() => {
                let i = rng.gen_range(0..out.edges.len());
                out.edges.remove(i);
            }
            3 if !out.edges.is_empty() => {
                let i = rng.gen_range(0..out.edges.len());
                let e = &mut out.edges[i];
                e.lo = (e.lo + rng.gen_range(0..=1)).min(3);
                e.hi = match e.hi {
                    Some(h) => Some(h.saturating_sub(rng.gen_range(0..=1)).max(e.lo)),
                    None if rng.gen_bool(0.3) => Some(e.lo.max(rng.gen_range(0..=3))),
                    None => None,
                };
            }
            4 if !out.edges.is_empty() => {
                let i = rng.gen_range(0..out.edges.len());
                out.edges[i].dest = [Ty::A, Ty::B, Ty::Thing][rng.gen_range(0..3)];
            }
            _ => out.universal = rng.gen_bool(0.5),
        }
    }
    out
}

/// `count` pairs, half of them related by perturbation.
pub fn random_pairs(rng: &mut impl Rng, count: usize) -> Vec<(Shape, Shape)> {
    (0..count)
        .map(|_| {
            let g = random_shape(rng);
            let s = if rng.gen_bool(0.5) {
                perturb(&g, rng)
            } else {
                random_shape(rng)
            };
            (g, s)
        })
        .collect()
}
