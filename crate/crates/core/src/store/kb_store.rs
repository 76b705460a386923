use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::fl::{ConceptNode, NodeHead, StatementGraph, Term};

use super::link::{Annotation, Direction, LinkId, LinkKind, LinkRecord, LinkTarget};
use super::object::{term_author, KbObject, ObjectId, ObjectKind, Payload, Placement, Timestamp, UserId};
use super::ontology::{Ontology, OntologyError};
use super::subsume::{conflicting, subsumes, unsatisfiable};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StoreError {
    #[error("unknown object {0}")]
    UnknownId(ObjectId),
    #[error("unknown link {0}")]
    UnknownLink(LinkId),
    #[error("{object} would be both above and below {with}")]
    CycleWouldForm { object: ObjectId, with: ObjectId },
    #[error("object {0} is already present")]
    AlreadyLive(ObjectId),
    #[error(transparent)]
    Ontology(#[from] OntologyError),
}

/// Why a new statement clashes with the KB.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "with", rename_all = "snake_case")]
pub enum Conflict {
    /// A statement by the same author already entails the new one.
    Redundant(ObjectId),
    /// The new statement and this one cannot both hold.
    Inconsistent(ObjectId),
    /// The new statement contradicts itself.
    Unsatisfiable,
}

/// First conflict by severity, or none.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "with", rename_all = "snake_case")]
pub enum ConflictReport {
    None,
    Redundant(ObjectId),
    Inconsistent(ObjectId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AuthorFilter {
    AnyOf(BTreeSet<UserId>),
    MinUserScore(f64),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryFilter {
    pub spec_of: Option<StatementGraph>,
    pub authors: Option<AuthorFilter>,
    pub min_usefulness: Option<f64>,
    #[serde(default)]
    pub offset: usize,
    #[serde(default)]
    pub limit: Option<usize>,
}

/// Scores used by usefulness filters. Missing entries count as 0.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScoreView<'a> {
    pub statements: Option<&'a BTreeMap<ObjectId, f64>>,
    pub users: Option<&'a BTreeMap<UserId, f64>>,
}

impl ScoreView<'_> {
    fn statement(&self, id: &ObjectId) -> f64 {
        self.statements.and_then(|m| m.get(id)).copied().unwrap_or(0.0)
    }

    fn user(&self, u: &UserId) -> f64 {
        self.users.and_then(|m| m.get(u)).copied().unwrap_or(0.0)
    }
}

/// Matching objects, generals first, with the specialization edges
/// (`child`, `parent`) induced among them.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryResult {
    pub objects: Vec<ObjectId>,
    pub edges: Vec<(ObjectId, ObjectId)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    /// From specific to general.
    Specialization,
    /// From a statement to a term it mentions.
    Uses,
    /// From link source to link target object.
    Link(LinkKind),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgraph {
    pub nodes: Vec<ObjectId>,
    pub edges: Vec<(ObjectId, ObjectId, EdgeKind)>,
}

/// Terms and statements in one specialization hierarchy rooted at `thing`.
#[derive(Debug, Clone)]
pub struct Store {
    objects: BTreeMap<ObjectId, KbObject>,
    /// Placement order, used when the hierarchy is rebuilt.
    order: Vec<ObjectId>,
    links: BTreeMap<LinkId, LinkRecord>,
    next_link: u64,
    ontology: Ontology,
    /// (specific, general) pairs asserted by links rather than derived.
    declared: BTreeSet<(ObjectId, ObjectId)>,
}

impl Default for Store {
    fn default() -> Self {
        Store::new(Ontology::bootstrap())
    }
}

fn subtype_assertions(g: &StatementGraph) -> Vec<(Term, Term)> {
    let mut out = Vec::new();
    g.root.visit(&mut |n: &ConceptNode| {
        let NodeHead::Type(parent) = &n.head else { return };
        for e in &n.attachments {
            if e.relation.has_local_name("subtype") && !e.inverse {
                if let NodeHead::Type(child) = &e.destination.head {
                    if parent.is_formal() && child.is_formal() {
                        out.push((child.clone(), parent.clone()));
                    }
                }
            }
        }
    });
    out
}

impl Store {
    pub fn new(ontology: Ontology) -> Self {
        let root = ObjectId::root();
        let mut objects = BTreeMap::new();
        objects.insert(
            root,
            KbObject {
                id: root,
                kind: ObjectKind::TermObject,
                payload: Payload::Term(Term::thing()),
                author: UserId::system(),
                creator: UserId::system(),
                created_at: Timestamp(0),
                direct_generalizations: BTreeSet::new(),
                direct_specializations: BTreeSet::new(),
                tombstoned: false,
            },
        );
        Store {
            objects,
            order: vec![root],
            links: BTreeMap::new(),
            next_link: 1,
            ontology,
            declared: BTreeSet::new(),
        }
    }

    pub fn root(&self) -> ObjectId {
        ObjectId::root()
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    pub fn get(&self, id: &ObjectId) -> Option<&KbObject> {
        self.objects.get(id)
    }

    pub fn object(&self, id: &ObjectId) -> Result<&KbObject, StoreError> {
        self.objects.get(id).ok_or(StoreError::UnknownId(*id))
    }

    pub fn is_live(&self, id: &ObjectId) -> bool {
        self.objects.get(id).is_some_and(KbObject::is_live)
    }

    /// All objects, tombstoned included, in id order.
    pub fn objects(&self) -> impl Iterator<Item = &KbObject> {
        self.objects.values()
    }

    pub fn live(&self) -> impl Iterator<Item = &KbObject> {
        self.objects.values().filter(|o| o.is_live())
    }

    pub fn live_statements(&self) -> impl Iterator<Item = &KbObject> {
        self.live().filter(|o| o.kind == ObjectKind::StatementObject)
    }

    pub fn links(&self) -> impl Iterator<Item = &LinkRecord> {
        self.links.values()
    }

    pub fn link(&self, id: LinkId) -> Result<&LinkRecord, StoreError> {
        self.links.get(&id).ok_or(StoreError::UnknownLink(id))
    }

    pub fn subsumes(&self, general: &StatementGraph, specific: &StatementGraph) -> bool {
        subsumes(general, specific, &self.ontology)
    }

    fn is_placed(&self, o: &KbObject) -> bool {
        o.is_live() && (o.id == ObjectId::root() || !o.direct_generalizations.is_empty())
    }

    // ---- placement ----

    /// Current placement of a stored object.
    pub fn classify(&self, id: &ObjectId) -> Result<Placement, StoreError> {
        let o = self.object(id)?;
        Ok(Placement {
            direct_generalizations: o.direct_generalizations.clone(),
            direct_specializations: o.direct_specializations.clone(),
        })
    }

    /// Placement a statement by `author` would receive, without storing it.
    pub fn placement_for(
        &self,
        g: &StatementGraph,
        author: &UserId,
        declared: &[(LinkKind, ObjectId)],
    ) -> Result<Placement, StoreError> {
        let id = ObjectId::for_statement(g, author);
        if self.is_live(&id) {
            return self.classify(&id);
        }
        let mut extra = BTreeSet::new();
        for (kind, target) in declared {
            self.object(target)?;
            match kind.placement() {
                Some(Direction::SourceBelowTarget) => {
                    extra.insert((id, *target));
                }
                Some(Direction::TargetBelowSource) => {
                    extra.insert((*target, id));
                }
                None => {}
            }
        }
        self.compute_placement(id, &Payload::Statement(g.clone()), &extra)
    }

    fn ancestors_of(&self, id: ObjectId) -> BTreeSet<ObjectId> {
        self.closure(id, |o| &o.direct_generalizations)
    }

    fn descendants_of(&self, id: ObjectId) -> BTreeSet<ObjectId> {
        self.closure(id, |o| &o.direct_specializations)
    }

    fn closure(&self, id: ObjectId, next: impl Fn(&KbObject) -> &BTreeSet<ObjectId>) -> BTreeSet<ObjectId> {
        let mut out = BTreeSet::new();
        let mut todo = vec![id];
        while let Some(x) = todo.pop() {
            if let Some(o) = self.objects.get(&x) {
                for y in next(o) {
                    if out.insert(*y) {
                        todo.push(*y);
                    }
                }
            }
        }
        out
    }

    fn compute_placement(
        &self,
        id: ObjectId,
        payload: &Payload,
        extra_declared: &BTreeSet<(ObjectId, ObjectId)>,
    ) -> Result<Placement, StoreError> {
        let root = ObjectId::root();
        let mut supers = BTreeSet::from([root]);
        let mut subs = BTreeSet::new();
        let mut equivalents = BTreeSet::new();
        for o in self.objects.values() {
            if o.id == id || o.id == root || !self.is_placed(o) {
                continue;
            }
            let (up, down) = match (payload, &o.payload) {
                (Payload::Statement(g), Payload::Statement(x)) => {
                    let formal = !g.is_informal_root() && !x.is_informal_root();
                    if formal || g == x {
                        (self.subsumes(x, g), self.subsumes(g, x))
                    } else {
                        (false, false)
                    }
                }
                (Payload::Term(t), Payload::Term(x)) => {
                    (self.ontology.is_subtype(t, x), self.ontology.is_subtype(x, t))
                }
                _ => (false, false),
            };
            match (up, down) {
                (true, true) => {
                    equivalents.insert(o.id);
                }
                (true, false) => {
                    supers.insert(o.id);
                }
                (false, true) => {
                    subs.insert(o.id);
                }
                _ => {}
            }
        }
        for (s, g) in self.declared.iter().chain(extra_declared) {
            if *s == id && self.is_live(g) {
                supers.insert(*g);
                equivalents.remove(g);
            }
            if *g == id && self.is_live(s) {
                subs.insert(*s);
                equivalents.remove(s);
            }
        }
        let mut up = BTreeSet::new();
        for s in &supers {
            up.insert(*s);
            up.extend(self.ancestors_of(*s));
        }
        let mut down = BTreeSet::new();
        for s in &subs {
            down.insert(*s);
            down.extend(self.descendants_of(*s));
        }
        for e in &equivalents {
            up.remove(e);
            down.remove(e);
        }
        if let Some(with) = up.intersection(&down).next() {
            return Err(StoreError::CycleWouldForm { object: id, with: *with });
        }
        let parents = up
            .iter()
            .filter(|x| {
                !self.objects[x]
                    .direct_specializations
                    .iter()
                    .any(|c| up.contains(c))
            })
            .copied()
            .collect();
        let children = down
            .iter()
            .filter(|y| {
                !self.objects[y]
                    .direct_generalizations
                    .iter()
                    .any(|p| down.contains(p))
            })
            .copied()
            .collect();
        Ok(Placement {
            direct_generalizations: parents,
            direct_specializations: children,
        })
    }

    /// Links `id` into the hierarchy at `placement`, dropping direct links
    /// the new object makes redundant.
    fn attach(&mut self, id: ObjectId, placement: Placement) {
        let mut up = BTreeSet::new();
        for p in &placement.direct_generalizations {
            up.insert(*p);
            up.extend(self.ancestors_of(*p));
        }
        let mut down = BTreeSet::new();
        for c in &placement.direct_specializations {
            down.insert(*c);
            down.extend(self.descendants_of(*c));
        }
        for y in &down {
            let gens: Vec<ObjectId> = self.objects[y]
                .direct_generalizations
                .intersection(&up)
                .copied()
                .collect();
            for x in gens {
                self.unlink(x, *y);
            }
        }
        for p in &placement.direct_generalizations {
            self.objects.get_mut(p).expect("placed").direct_specializations.insert(id);
        }
        for c in &placement.direct_specializations {
            self.objects.get_mut(c).expect("placed").direct_generalizations.insert(id);
        }
        let o = self.objects.get_mut(&id).expect("inserted");
        o.direct_generalizations = placement.direct_generalizations;
        o.direct_specializations = placement.direct_specializations;
    }

    fn unlink(&mut self, parent: ObjectId, child: ObjectId) {
        if let Some(p) = self.objects.get_mut(&parent) {
            p.direct_specializations.remove(&child);
        }
        if let Some(c) = self.objects.get_mut(&child) {
            c.direct_generalizations.remove(&parent);
        }
    }

    /// Removes `id` from the hierarchy, reconnecting its parents to its
    /// children where no other path remains.
    fn detach(&mut self, id: ObjectId) {
        let (gens, specs) = {
            let o = &self.objects[&id];
            (o.direct_generalizations.clone(), o.direct_specializations.clone())
        };
        for g in &gens {
            self.unlink(*g, id);
        }
        for s in &specs {
            self.unlink(id, *s);
        }
        for g in &gens {
            for s in &specs {
                if !self.descendants_of(*g).contains(s) {
                    self.objects.get_mut(g).expect("live").direct_specializations.insert(*s);
                    self.objects.get_mut(s).expect("live").direct_generalizations.insert(*g);
                }
            }
        }
    }

    fn place(&mut self, id: ObjectId) -> Result<(), StoreError> {
        let payload = self.objects[&id].payload.clone();
        let placement = self.compute_placement(id, &payload, &BTreeSet::new())?;
        self.attach(id, placement);
        Ok(())
    }

    /// Recomputes every placement from scratch, in insertion order.
    pub fn rebuild_hierarchy(&mut self) {
        for o in self.objects.values_mut() {
            o.direct_generalizations.clear();
            o.direct_specializations.clear();
        }
        let order: Vec<ObjectId> = self.order.clone();
        for id in order {
            if id == ObjectId::root() || !self.is_live(&id) {
                continue;
            }
            if self.place(id).is_err() {
                // declared links that became contradictory are ignored
                let payload = self.objects[&id].payload.clone();
                let kept: BTreeSet<_> = self
                    .declared
                    .iter()
                    .filter(|(s, g)| *s != id && *g != id)
                    .copied()
                    .collect();
                let saved = std::mem::replace(&mut self.declared, kept);
                let placement = self
                    .compute_placement(id, &payload, &BTreeSet::new())
                    .unwrap_or_else(|_| Placement {
                        direct_generalizations: BTreeSet::from([ObjectId::root()]),
                        direct_specializations: BTreeSet::new(),
                    });
                self.declared = saved;
                self.attach(id, placement);
            }
        }
    }

    // ---- insertion ----

    /// Creates the term object (and its ancestors) if missing.
    pub fn ensure_term(&mut self, t: &Term, at: Timestamp) -> Option<ObjectId> {
        if !t.is_formal() {
            return None;
        }
        let id = ObjectId::for_term(t);
        if self.is_live(&id) {
            return Some(id);
        }
        self.ontology.ensure(t);
        for parent in self.ontology.direct_parents(t) {
            self.ensure_term(&parent, at);
        }
        let author = term_author(t);
        self.objects.insert(
            id,
            KbObject {
                id,
                kind: ObjectKind::TermObject,
                payload: Payload::Term(t.clone()),
                author: author.clone(),
                creator: author,
                created_at: at,
                direct_generalizations: BTreeSet::new(),
                direct_specializations: BTreeSet::new(),
                tombstoned: false,
            },
        );
        self.order.push(id);
        self.place(id).expect("ontology is acyclic");
        Some(id)
    }

    /// Stores a statement, placing it by subsumption and by the placement
    /// kinds among `declared` (link kind, target). Nothing changes on error.
    pub fn insert_statement(
        &mut self,
        g: &StatementGraph,
        author: &UserId,
        at: Timestamp,
        declared: &[(LinkKind, ObjectId)],
    ) -> Result<ObjectId, StoreError> {
        let id = ObjectId::for_statement(g, author);
        if self.is_live(&id) {
            return Err(StoreError::AlreadyLive(id));
        }
        let mut onto = self.ontology.clone();
        let mut onto_changed = false;
        for (child, parent) in subtype_assertions(g) {
            onto_changed |= onto.add_subtype(child, parent)?;
        }
        let mut extra = BTreeSet::new();
        for (kind, target) in declared {
            self.object(target)?;
            match kind.placement() {
                Some(Direction::SourceBelowTarget) => {
                    extra.insert((id, *target));
                }
                Some(Direction::TargetBelowSource) => {
                    extra.insert((*target, id));
                }
                None => {}
            }
        }
        let payload = Payload::Statement(g.clone());
        let placement = self.compute_placement(id, &payload, &extra)?;

        self.ontology = onto;
        for t in g.formal_terms() {
            if !t.is_thing() {
                self.ensure_term(&t, at);
            }
        }
        self.declared.extend(extra);
        match self.objects.get_mut(&id) {
            Some(o) => {
                o.tombstoned = false;
                o.author = author.clone();
                self.order.retain(|x| *x != id);
            }
            None => {
                self.objects.insert(
                    id,
                    KbObject {
                        id,
                        kind: ObjectKind::StatementObject,
                        payload,
                        author: author.clone(),
                        creator: author.clone(),
                        created_at: at,
                        direct_generalizations: BTreeSet::new(),
                        direct_specializations: BTreeSet::new(),
                        tombstoned: false,
                    },
                );
            }
        }
        self.order.push(id);
        if onto_changed {
            self.rebuild_hierarchy();
        } else {
            // terms created above never relate to statements
            self.attach(id, placement);
        }
        Ok(id)
    }

    /// Records a link. Placement kinds also re-place the source.
    pub fn add_link(
        &mut self,
        kind: LinkKind,
        source: ObjectId,
        target: LinkTarget,
        author: &UserId,
        at: Timestamp,
        annotations: Vec<Annotation>,
    ) -> Result<LinkId, StoreError> {
        self.object(&source)?;
        match target {
            LinkTarget::Object(t) => {
                self.object(&t)?;
            }
            LinkTarget::Link(l) => {
                self.link(l)?;
            }
        }
        if let (LinkTarget::Object(t), Some(dir)) = (target, kind.placement()) {
            let pair = match dir {
                Direction::SourceBelowTarget => (source, t),
                Direction::TargetBelowSource => (t, source),
            };
            if !self.declared.contains(&pair) && self.is_live(&source) {
                let payload = self.objects[&source].payload.clone();
                let extra = BTreeSet::from([pair]);
                self.detach(source);
                match self.compute_placement(source, &payload, &extra) {
                    Ok(p) => {
                        self.declared.insert(pair);
                        self.attach(source, p);
                    }
                    Err(e) => {
                        self.place(source).expect("previous placement was valid");
                        return Err(e);
                    }
                }
            }
        }
        let id = LinkId(self.next_link);
        self.next_link += 1;
        self.links.insert(
            id,
            LinkRecord {
                id,
                kind,
                source,
                target,
                author: author.clone(),
                created_at: at,
                annotations,
            },
        );
        Ok(id)
    }

    /// Tombstones an object and repairs the hierarchy around it.
    pub fn tombstone(&mut self, id: &ObjectId) -> Result<(), StoreError> {
        if !self.is_live(id) || *id == ObjectId::root() {
            return Err(StoreError::UnknownId(*id));
        }
        self.detach(*id);
        self.objects.get_mut(id).expect("live").tombstoned = true;
        Ok(())
    }

    pub fn reassign(&mut self, id: &ObjectId, owner: &UserId) -> Result<(), StoreError> {
        let o = self.objects.get_mut(id).ok_or(StoreError::UnknownId(*id))?;
        o.author = owner.clone();
        Ok(())
    }

    // ---- conflicts ----

    pub fn detect_conflicts(&self, g: &StatementGraph, author: &UserId) -> Vec<Conflict> {
        let mut out = Vec::new();
        if unsatisfiable(g, &self.ontology) {
            out.push(Conflict::Unsatisfiable);
        }
        let mut onto = self.ontology.clone();
        for (child, parent) in subtype_assertions(g) {
            match onto.add_subtype(child.clone(), parent) {
                Ok(_) => {}
                Err(OntologyError::Disjoint { a, .. }) => {
                    out.push(Conflict::Inconsistent(ObjectId::for_term(&a)));
                }
                Err(OntologyError::Cycle { parent, .. }) => {
                    out.push(Conflict::Inconsistent(ObjectId::for_term(&parent)));
                }
            }
        }
        for o in self.live_statements() {
            let Payload::Statement(x) = &o.payload else { continue };
            if o.author == *author && (x == g || (!x.is_informal_root() && self.subsumes(g, x))) {
                out.push(Conflict::Redundant(o.id));
            }
            if conflicting(g, x, &self.ontology) {
                out.push(Conflict::Inconsistent(o.id));
            }
        }
        out
    }

    pub fn detect_conflict(&self, g: &StatementGraph, author: &UserId) -> ConflictReport {
        let all = self.detect_conflicts(g, author);
        if let Some(id) = all.iter().find_map(|c| match c {
            Conflict::Inconsistent(id) => Some(*id),
            _ => None,
        }) {
            return ConflictReport::Inconsistent(id);
        }
        all.iter()
            .find_map(|c| match c {
                Conflict::Redundant(id) => Some(ConflictReport::Redundant(*id)),
                _ => None,
            })
            .unwrap_or(ConflictReport::None)
    }

    // ---- queries ----

    pub fn query(&self, f: &QueryFilter, scores: ScoreView<'_>) -> QueryResult {
        let mut hits: BTreeSet<ObjectId> = BTreeSet::new();
        for o in self.live_statements() {
            let Payload::Statement(x) = &o.payload else { continue };
            if let Some(spec) = &f.spec_of {
                if !self.subsumes(spec, x) {
                    continue;
                }
            }
            match &f.authors {
                Some(AuthorFilter::AnyOf(set)) if !set.contains(&o.author) => continue,
                Some(AuthorFilter::MinUserScore(min)) if scores.user(&o.author) < *min => continue,
                _ => {}
            }
            if let Some(min) = f.min_usefulness {
                if scores.statement(&o.id) < min {
                    continue;
                }
            }
            hits.insert(o.id);
        }
        let ordered = self.hierarchy_order(&hits);
        let page: Vec<ObjectId> = ordered
            .into_iter()
            .skip(f.offset)
            .take(f.limit.unwrap_or(usize::MAX))
            .collect();
        let kept: BTreeSet<ObjectId> = page.iter().copied().collect();
        QueryResult {
            edges: self.induced_edges(&kept),
            objects: page,
        }
    }

    /// Generals before specifics: by depth of the longest path to the root,
    /// then by id.
    fn hierarchy_order(&self, set: &BTreeSet<ObjectId>) -> Vec<ObjectId> {
        let mut depth: BTreeMap<ObjectId, usize> = BTreeMap::new();
        fn depth_of(s: &Store, id: ObjectId, memo: &mut BTreeMap<ObjectId, usize>) -> usize {
            if let Some(d) = memo.get(&id) {
                return *d;
            }
            let d = s.objects[&id]
                .direct_generalizations
                .iter()
                .map(|p| depth_of(s, *p, memo) + 1)
                .max()
                .unwrap_or(0);
            memo.insert(id, d);
            d
        }
        let mut v: Vec<(usize, ObjectId)> = set.iter().map(|id| (depth_of(self, *id, &mut depth), *id)).collect();
        v.sort();
        v.into_iter().map(|(_, id)| id).collect()
    }

    /// Transitive reduction of the hierarchy restricted to `set`.
    pub fn induced_edges(&self, set: &BTreeSet<ObjectId>) -> Vec<(ObjectId, ObjectId)> {
        let above: BTreeMap<ObjectId, BTreeSet<ObjectId>> = set
            .iter()
            .map(|id| {
                let anc: BTreeSet<ObjectId> = self.ancestors_of(*id).intersection(set).copied().collect();
                (*id, anc)
            })
            .collect();
        let mut edges = Vec::new();
        for (child, ancs) in &above {
            for parent in ancs {
                let via_other = ancs.iter().any(|mid| mid != parent && above[mid].contains(parent));
                if !via_other {
                    edges.push((*child, *parent));
                }
            }
        }
        edges
    }

    fn uses(&self, o: &KbObject) -> Vec<ObjectId> {
        match &o.payload {
            Payload::Statement(g) => g
                .formal_terms()
                .iter()
                .filter(|t| !t.is_thing())
                .map(ObjectId::for_term)
                .filter(|id| self.is_live(id))
                .collect(),
            Payload::Term(_) => Vec::new(),
        }
    }

    /// Objects within `depth` hops over specialization, term-use and link
    /// edges, with the edges among them.
    pub fn neighborhood(&self, id: &ObjectId, depth: usize) -> Result<Subgraph, StoreError> {
        self.object(id)?;
        let mut adjacency: BTreeMap<ObjectId, BTreeSet<(ObjectId, ObjectId, EdgeKind)>> = BTreeMap::new();
        let mut add = |a: ObjectId, b: ObjectId, k: EdgeKind| {
            adjacency.entry(a).or_default().insert((a, b, k));
            adjacency.entry(b).or_default().insert((a, b, k));
        };
        for o in self.live() {
            for p in &o.direct_generalizations {
                add(o.id, *p, EdgeKind::Specialization);
            }
            for t in self.uses(o) {
                add(o.id, t, EdgeKind::Uses);
            }
        }
        for l in self.links.values() {
            if let Some(t) = self.link_target_object(l.target) {
                if self.is_live(&l.source) && self.is_live(&t) {
                    add(l.source, t, EdgeKind::Link(l.kind));
                }
            }
        }
        let mut seen = BTreeSet::from([*id]);
        let mut edges = BTreeSet::new();
        let mut frontier = VecDeque::from([(*id, 0usize)]);
        while let Some((x, d)) = frontier.pop_front() {
            if d == depth {
                continue;
            }
            for e in adjacency.get(&x).into_iter().flatten() {
                let other = if e.0 == x { e.1 } else { e.0 };
                if seen.insert(other) {
                    frontier.push_back((other, d + 1));
                }
            }
        }
        for x in &seen {
            for e in adjacency.get(x).into_iter().flatten() {
                if seen.contains(&e.0) && seen.contains(&e.1) {
                    edges.insert(*e);
                }
            }
        }
        Ok(Subgraph {
            nodes: seen.into_iter().collect(),
            edges: edges.into_iter().collect(),
        })
    }

    /// Object a link ultimately points at, following links to links.
    pub fn link_target_object(&self, mut t: LinkTarget) -> Option<ObjectId> {
        for _ in 0..=self.links.len() {
            match t {
                LinkTarget::Object(id) => return Some(id),
                LinkTarget::Link(l) => t = self.links.get(&l)?.target,
            }
        }
        None
    }

    // ---- export ----

    /// `child<TAB>parent` lines for every live direct link, sorted.
    pub fn hierarchy_edges(&self) -> Vec<(ObjectId, ObjectId)> {
        let mut v = Vec::new();
        for o in self.live() {
            for p in &o.direct_generalizations {
                v.push((o.id, *p));
            }
        }
        v
    }

    pub fn hierarchy_text(&self) -> String {
        let mut s = String::new();
        for (c, p) in self.hierarchy_edges() {
            let _ = writeln!(s, "{c}\t{p}");
        }
        s
    }

    /// Live statements as FL, one per line, generals first.
    pub fn export_fl(&self) -> String {
        let ids: BTreeSet<ObjectId> = self.live_statements().map(|o| o.id).collect();
        let mut s = String::new();
        for id in self.hierarchy_order(&ids) {
            let o = &self.objects[&id];
            let text = o.payload.text().replace('\n', " ");
            let _ = writeln!(s, "// {} by {}\n{}", o.id, o.author, text);
        }
        s
    }

    /// Complete deterministic state listing; equal dumps mean equal stores.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let q = |t: &str| serde_json::to_string(t).expect("strings serialize");
        for o in self.objects.values() {
            let _ = writeln!(
                s,
                "object {} {:?} author={} creator={} at={} {}",
                o.id,
                o.kind,
                q(o.author.as_str()),
                q(o.creator.as_str()),
                o.created_at,
                if o.tombstoned { "tombstoned" } else { "live" }
            );
            let _ = writeln!(s, "  payload {}", q(&o.payload.text()));
            for g in &o.direct_generalizations {
                let _ = writeln!(s, "  gen {g}");
            }
        }
        for l in self.links.values() {
            let _ = write!(
                s,
                "link {} {} {} -> {} author={} at={}",
                l.id,
                l.kind,
                l.source,
                l.target,
                q(l.author.as_str()),
                l.created_at
            );
            for a in &l.annotations {
                let _ = write!(s, " {}={}", q(&a.relation.to_string()), a.object);
            }
            s.push('\n');
        }
        for (sp, g) in &self.declared {
            let _ = writeln!(s, "declared {sp} {g}");
        }
        for t in self.ontology.terms() {
            for p in self.ontology.direct_parents(t) {
                let _ = writeln!(s, "onto {} {}", q(&t.to_string()), q(&p.to_string()));
            }
        }
        for (a, b) in self.ontology.disjoint_pairs() {
            let _ = writeln!(s, "disjoint {} {}", q(&a.to_string()), q(&b.to_string()));
        }
        s
    }

    /// Checks acyclicity, transitive reduction and reachability from the
    /// root. Returns the first violation found.
    pub fn check_hierarchy(&self) -> Result<(), String> {
        let root = ObjectId::root();
        for o in self.live() {
            if self.descendants_of(o.id).contains(&o.id) {
                return Err(format!("cycle through {}", o.id));
            }
            if o.id != root && !self.ancestors_of(o.id).contains(&root) {
                return Err(format!("{} unreachable from the root", o.id));
            }
            for p in &o.direct_generalizations {
                if !self.is_live(p) {
                    return Err(format!("{} has dead parent {p}", o.id));
                }
                if !self.objects[p].direct_specializations.contains(&o.id) {
                    return Err(format!("asymmetric link {} -> {p}", o.id));
                }
                let others = o.direct_generalizations.iter().filter(|x| *x != p);
                for q in others {
                    if self.ancestors_of(*q).contains(p) {
                        return Err(format!("{} -> {p} duplicates a longer path", o.id));
                    }
                }
            }
        }
        for o in self.objects.values().filter(|o| o.tombstoned) {
            if !o.direct_generalizations.is_empty() || !o.direct_specializations.is_empty() {
                return Err(format!("tombstoned {} still linked", o.id));
            }
        }
        Ok(())
    }
}
