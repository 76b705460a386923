//! Ratings and the default usefulness measure: a damped fixed point over
//! the argumentation structure, alternating statement and user scores.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::store::{LinkId, LinkKind, LinkTarget, ObjectId, Store, Timestamp, UserId};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Criterion {
    Veracity,
    Originality,
    Significance,
    Usefulness,
    Other(String),
}

impl Criterion {
    pub fn name(&self) -> &str {
        match self {
            Criterion::Veracity => "veracity",
            Criterion::Originality => "originality",
            Criterion::Significance => "significance",
            Criterion::Usefulness => "usefulness",
            Criterion::Other(s) => s,
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "veracity" => Criterion::Veracity,
            "originality" => Criterion::Originality,
            "significance" => Criterion::Significance,
            "usefulness" => Criterion::Usefulness,
            other => Criterion::Other(other.to_string()),
        })
    }
}

impl Serialize for Criterion {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for Criterion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(s.parse().unwrap_or_else(|e| match e {}))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub rater: UserId,
    pub object: ObjectId,
    pub criterion: Criterion,
    pub value: f64,
    pub timestamp: Timestamp,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RateError {
    #[error("unknown object {0}")]
    UnknownObject(ObjectId),
    #[error("rating {0} outside [-1, 1]")]
    OutOfRange(f64),
}

/// Live evaluations, one per (object, rater, criterion).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Ratings {
    live: BTreeMap<(ObjectId, UserId, Criterion), Evaluation>,
}

impl Ratings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Stores `e`, replacing any earlier rating with the same key.
    pub fn rate(&mut self, store: &Store, e: Evaluation) -> Result<&Evaluation, RateError> {
        if !store.is_live(&e.object) {
            return Err(RateError::UnknownObject(e.object));
        }
        if !(-1.0..=1.0).contains(&e.value) {
            return Err(RateError::OutOfRange(e.value));
        }
        let key = (e.object, e.rater.clone(), e.criterion.clone());
        self.live.insert(key.clone(), e);
        Ok(&self.live[&key])
    }

    pub fn get(&self, object: &ObjectId, rater: &UserId, c: &Criterion) -> Option<&Evaluation> {
        self.live.get(&(*object, rater.clone(), c.clone()))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Evaluation> {
        self.live.values()
    }

    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    pub fn dump(&self) -> String {
        let mut s = String::new();
        for e in self.live.values() {
            let _ = writeln!(
                s,
                "rating {} {} {} {:?} at={}",
                e.object,
                serde_json::to_string(e.rater.as_str()).expect("strings serialize"),
                e.criterion,
                e.value,
                e.timestamp
            );
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValuationParams {
    /// Weight of arguments and objections relative to direct ratings.
    pub depth_damping: f64,
    /// Exponent applied to user scores to weight their ratings.
    pub user_weight_exponent: f64,
    pub user_mix: f64,
    pub participation_mix: f64,
    /// How strongly objections on a link reduce its validity.
    pub link_attenuation: f64,
    /// Lower bound of a rater's weight.
    pub weight_floor: f64,
    /// Ratings given for full participation.
    pub participation_saturation: f64,
    pub max_iters: usize,
    pub tolerance: f64,
}

impl Default for ValuationParams {
    fn default() -> Self {
        ValuationParams {
            depth_damping: 0.5,
            user_weight_exponent: 0.5,
            user_mix: 0.8,
            participation_mix: 0.2,
            link_attenuation: 0.5,
            weight_floor: 0.01,
            participation_saturation: 10.0,
            max_iters: 200,
            tolerance: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParamsError {
    #[error("line {0}: expected key=value")]
    Malformed(usize),
    #[error("unknown parameter {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {value:?}")]
    BadValue { key: String, value: String },
    #[error("{0}")]
    OutOfRange(String),
}

impl ValuationParams {
    pub fn validate(&self) -> Result<(), ParamsError> {
        let bad = |s: &str| Err(ParamsError::OutOfRange(s.into()));
        if !(self.depth_damping > 0.0 && self.depth_damping <= 1.0) {
            return bad("depth_damping must be in (0, 1]");
        }
        if !(self.user_weight_exponent > 0.0 && self.user_weight_exponent.is_finite()) {
            return bad("user_weight_exponent must be positive");
        }
        if !(0.0..=1.0).contains(&self.user_mix) || !(0.0..=1.0).contains(&self.participation_mix) {
            return bad("user_mix and participation_mix must be in [0, 1]");
        }
        if (self.user_mix + self.participation_mix - 1.0).abs() > 1e-9 {
            return bad("user_mix + participation_mix must be 1");
        }
        if !(0.0..=1.0).contains(&self.link_attenuation) {
            return bad("link_attenuation must be in [0, 1]");
        }
        if !(self.weight_floor > 0.0 && self.weight_floor <= 1.0) {
            return bad("weight_floor must be in (0, 1]");
        }
        if !(self.participation_saturation > 0.0) {
            return bad("participation_saturation must be positive");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        Ok(())
    }

    /// Reads `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ParamsError> {
        let mut p = ValuationParams::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(ParamsError::Malformed(i + 1))?;
            let (k, v) = (k.trim(), v.trim());
            let bad = || ParamsError::BadValue {
                key: k.into(),
                value: v.into(),
            };
            let f = || v.parse::<f64>().map_err(|_| bad());
            match k {
                "depth_damping" => p.depth_damping = f()?,
                "user_weight_exponent" => p.user_weight_exponent = f()?,
                "user_mix" => p.user_mix = f()?,
                "participation_mix" => p.participation_mix = f()?,
                "link_attenuation" => p.link_attenuation = f()?,
                "weight_floor" => p.weight_floor = f()?,
                "participation_saturation" => p.participation_saturation = f()?,
                "max_iters" => p.max_iters = v.parse().map_err(|_| bad())?,
                "tolerance" => p.tolerance = f()?,
                _ => return Err(ParamsError::UnknownKey(k.into())),
            }
        }
        p.validate()?;
        Ok(p)
    }

    pub fn to_text(&self) -> String {
        format!(
            "depth_damping = {}\nuser_weight_exponent = {}\nuser_mix = {}\nparticipation_mix = {}\n\
             link_attenuation = {}\nweight_floor = {}\nparticipation_saturation = {}\nmax_iters = {}\ntolerance = {:e}\n",
            self.depth_damping,
            self.user_weight_exponent,
            self.user_mix,
            self.participation_mix,
            self.link_attenuation,
            self.weight_floor,
            self.participation_saturation,
            self.max_iters,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UsefulnessScores {
    pub statement_score: BTreeMap<ObjectId, f64>,
    pub user_score: BTreeMap<UserId, f64>,
    pub iterations_run: usize,
    pub converged: bool,
}

impl UsefulnessScores {
    /// `object-id<TAB>score` lines, sorted by id.
    pub fn export(&self) -> String {
        let mut s = String::new();
        for (id, v) in &self.statement_score {
            let _ = writeln!(s, "{id}\t{v}");
        }
        s
    }
}

/// Font scale for a score: 0.5 at -1, 1 at 0, 2 at +1, linear on each side.
pub fn display_weight(score: f64) -> f64 {
    let s = score.clamp(-1.0, 1.0);
    if s < 0.0 {
        1.0 + 0.5 * s
    } else {
        1.0 + s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetLink {
    pub id: LinkId,
    /// True for arguments, false for objections and corrections.
    pub supports: bool,
    pub source: ObjectId,
    pub target: LinkTarget,
}

/// Everything the fixed point reads, detached from the store.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Network {
    /// Scored statements and their owners.
    pub statements: BTreeMap<ObjectId, UserId>,
    pub users: BTreeSet<UserId>,
    /// Veracity ratings: (rater, statement, value).
    pub veracity: Vec<(UserId, ObjectId, f64)>,
    /// Live ratings given per user, all criteria.
    pub given: BTreeMap<UserId, usize>,
    pub links: Vec<NetLink>,
}

impl Network {
    pub fn from_store(store: &Store, ratings: &Ratings) -> Self {
        let mut n = Network::default();
        for o in store.live_statements() {
            n.statements.insert(o.id, o.author.clone());
            n.users.insert(o.author.clone());
        }
        for e in ratings.iter() {
            if !store.is_live(&e.object) {
                continue;
            }
            *n.given.entry(e.rater.clone()).or_default() += 1;
            n.users.insert(e.rater.clone());
            if e.criterion == Criterion::Veracity && n.statements.contains_key(&e.object) {
                n.veracity.push((e.rater.clone(), e.object, e.value));
            }
        }
        for l in store.links() {
            if !n.statements.contains_key(&l.source) {
                continue;
            }
            let supports = match l.kind {
                LinkKind::Argument => true,
                k if k.is_disagreement() => false,
                _ => continue,
            };
            n.users.insert(l.author.clone());
            n.links.push(NetLink {
                id: l.id,
                supports,
                source: l.source,
                target: l.target,
            });
        }
        n
    }
}

/// Iterate of the fixed point.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValuationState {
    pub effective: BTreeMap<ObjectId, f64>,
    pub user: BTreeMap<UserId, f64>,
}

impl ValuationState {
    pub fn initial(n: &Network) -> Self {
        ValuationState {
            effective: n.statements.keys().map(|id| (*id, 0.0)).collect(),
            user: n.users.iter().map(|u| (u.clone(), 0.5)).collect(),
        }
    }
}

/// One Jacobi step: direct ratings weighted by current user scores,
/// effective scores from the previous effective scores, then user scores
/// from the new effective scores.
pub fn step(n: &Network, p: &ValuationParams, s: &ValuationState) -> ValuationState {
    let eff = |id: &ObjectId| s.effective.get(id).copied().unwrap_or(0.0).max(0.0);

    let mut num: BTreeMap<ObjectId, f64> = BTreeMap::new();
    let mut den: BTreeMap<ObjectId, f64> = BTreeMap::new();
    for (rater, id, v) in &n.veracity {
        let us = s.user.get(rater).copied().unwrap_or(0.5);
        let w = us.powf(p.user_weight_exponent).max(p.weight_floor);
        *num.entry(*id).or_default() += w * v;
        *den.entry(*id).or_default() += w;
    }

    let mut attack: BTreeMap<LinkId, f64> = BTreeMap::new();
    for l in &n.links {
        if let (false, LinkTarget::Link(on)) = (l.supports, l.target) {
            *attack.entry(on).or_default() += eff(&l.source);
        }
    }
    let validity = |id: LinkId| (1.0 - p.link_attenuation * attack.get(&id).copied().unwrap_or(0.0)).clamp(0.0, 1.0);

    let mut pull: BTreeMap<ObjectId, f64> = BTreeMap::new();
    for l in &n.links {
        let LinkTarget::Object(t) = l.target else { continue };
        let sign = if l.supports { 1.0 } else { -1.0 };
        *pull.entry(t).or_default() += sign * eff(&l.source) * validity(l.id);
    }

    let mut effective = BTreeMap::new();
    for id in n.statements.keys() {
        let direct = match den.get(id) {
            Some(d) if *d > 0.0 => num[id] / d,
            _ => 0.0,
        };
        let v = direct + p.depth_damping * pull.get(id).copied().unwrap_or(0.0);
        effective.insert(*id, v.clamp(-1.0, 1.0));
    }

    let mut sums: BTreeMap<&UserId, (f64, usize)> = BTreeMap::new();
    for (id, owner) in &n.statements {
        let e = sums.entry(owner).or_default();
        e.0 += effective[id];
        e.1 += 1;
    }
    let mut user = BTreeMap::new();
    for u in &n.users {
        let mean = match sums.get(u) {
            Some((sum, count)) if *count > 0 => sum / *count as f64,
            _ => 0.0,
        };
        let given = n.given.get(u).copied().unwrap_or(0) as f64;
        let participation = (given / p.participation_saturation).min(1.0);
        let v = p.user_mix * (1.0 + mean) / 2.0 + p.participation_mix * participation;
        user.insert(u.clone(), v.clamp(0.0, 1.0));
    }
    ValuationState { effective, user }
}

fn max_delta(a: &ValuationState, b: &ValuationState) -> f64 {
    let e = a
        .effective
        .iter()
        .map(|(k, v)| (v - b.effective.get(k).copied().unwrap_or(0.0)).abs());
    let u = a.user.iter().map(|(k, v)| (v - b.user.get(k).copied().unwrap_or(0.0)).abs());
    e.chain(u).fold(0.0, f64::max)
}

pub fn compute_usefulness(n: &Network, p: &ValuationParams) -> UsefulnessScores {
    let mut s = ValuationState::initial(n);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < p.max_iters {
        iterations += 1;
        let next = step(n, p, &s);
        let delta = max_delta(&next, &s);
        s = next;
        if delta < p.tolerance {
            converged = true;
            break;
        }
    }
    UsefulnessScores {
        statement_score: s.effective,
        user_score: s.user,
        iterations_run: iterations,
        converged,
    }
}

/// Weighted mean of one non-veracity criterion per object, using final user
/// scores as weights. Criteria are never combined.
pub fn criterion_mean(
    ratings: &Ratings,
    criterion: &Criterion,
    scores: &UsefulnessScores,
    p: &ValuationParams,
) -> BTreeMap<ObjectId, f64> {
    let mut acc: BTreeMap<ObjectId, (f64, f64)> = BTreeMap::new();
    for e in ratings.iter().filter(|e| e.criterion == *criterion) {
        let us = scores.user_score.get(&e.rater).copied().unwrap_or(0.5);
        let w = us.powf(p.user_weight_exponent).max(p.weight_floor);
        let a = acc.entry(e.object).or_default();
        a.0 += w * e.value;
        a.1 += w;
    }
    acc.into_iter().map(|(k, (n, d))| (k, n / d)).collect()
}
