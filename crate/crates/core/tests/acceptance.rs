//! Acceptance run: one PASS/FAIL line per criterion. Every criterion runs
//! through the in-process client and through a socket service, and the
//! last line compares what the two drivers observed.

mod support;

use std::fmt::Display;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use kbms::corpus;
use kbms::federation::{run_scenario_with, Node, Scenario, SimOptions};
use kbms::fl::canonical_text;
use kbms::service::{
    serve_service, ApiError, KbApi, LocalClient, QueryRequest, RemoteClient, Request, Response, Service,
    ServiceConfig, ServiceHandle, ServiceTransport, Wire,
};
use kbms::store::{LinkKind, ObjectKind, UserId};
use kbms::valuation::{Criterion, ValuationParams};
use kbms::LogicalClock;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use support::subsume_oracle::{self as so, Oracle};
use support::valuation_fixture::random_network_via;
use support::valuation_oracle::solve;
use support::workload;

const SCORE_TOLERANCE: f64 = 1e-9;
const SUBSUMPTION_PAIRS: usize = 1_000;
const WORKLOAD_SUBMISSIONS: usize = 10_000;
const VALUATION_NETWORKS: u64 = 100;
const FEDERATION_SEEDS: u64 = 5;
const SCENARIOS: [&str; 4] = ["convergence_basic", "dup_delivery", "node_down", "ttl_loop"];

/// The Joe sentence as first written in KIF, with `%` separating source
/// and name.
const JOE_KIF: &str = r#"(exists ((?m p%man) (?l p%leg)) (and (p%name ?m "Joe") (p%part ?m ?l)))"#;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Driver {
    InProcess,
    Service,
}

impl Driver {
    fn name(self) -> &'static str {
        match self {
            Driver::InProcess => "in-process",
            Driver::Service => "service",
        }
    }

    fn wire(self) -> Wire {
        match self {
            Driver::InProcess => Wire::InProcess,
            Driver::Service => Wire::Socket,
        }
    }

    fn connect(self, service: Service) -> Result<Client, String> {
        Ok(match self {
            Driver::InProcess => Client {
                api: Box::new(LocalClient::new(service)),
                _server: None,
            },
            Driver::Service => {
                let server = serve_service(Arc::new(service), "127.0.0.1:0").ctx("listen")?;
                let api = RemoteClient::connect(&server.addr().to_string()).ctx("connect")?;
                Client {
                    api: Box::new(api),
                    _server: Some(server),
                }
            }
        })
    }

    fn fresh(self) -> Result<Client, String> {
        self.connect(Service::new(Node::new("acceptance"), ValuationParams::default()))
    }
}

struct Client {
    api: Box<dyn KbApi>,
    _server: Option<ServiceHandle>,
}

impl KbApi for Client {
    fn call(&mut self, req: Request) -> Result<Response, ApiError> {
        self.api.call(req)
    }
}

trait Ctx<T> {
    fn ctx(self, what: &str) -> Result<T, String>;
}

impl<T, E: Display> Ctx<T> for Result<T, E> {
    fn ctx(self, what: &str) -> Result<T, String> {
        self.map_err(|e| format!("{what}: {e}"))
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn sha(s: &str) -> String {
    hex::encode(Sha256::digest(s.as_bytes()))
}

/// What one driver saw: a summary for the report line and a fingerprint
/// the other driver must reproduce.
struct Run {
    detail: String,
    fingerprint: String,
}

// ---- FL corpus ----

fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden/corpus")
        .join(format!("{name}.fl"))
}

fn fl_corpus(d: Driver) -> Result<Run, String> {
    let mut api = d.fresh()?;
    let mut canon = String::new();
    for (name, text) in corpus::ALL {
        let first = api.parse(text).ctx(name)?;
        let again = api.parse(&first.pretty).ctx(&format!("{name} reprinted"))?;
        let fixed = api.parse(&first.canonical).ctx(&format!("{name} canonical"))?;
        ensure(again.canonical == first.canonical, || format!("{name} changes when reprinted"))?;
        ensure(fixed.canonical == first.canonical && fixed.pretty == first.canonical, || {
            format!("{name}: canonical text is not a fixed point")
        })?;
        let path = golden_path(name);
        if std::env::var_os("UPDATE_GOLDEN").is_some() {
            std::fs::create_dir_all(path.parent().expect("has parent")).ctx("golden dir")?;
            std::fs::write(&path, format!("{}\n", first.canonical)).ctx("golden")?;
        }
        let want = std::fs::read_to_string(&path).ctx(&format!("golden {}", path.display()))?;
        ensure(want.trim_end() == first.canonical, || {
            format!("{name} differs from golden:\n{}\n{}", want.trim_end(), first.canonical)
        })?;
        canon.push_str(&first.canonical);
        canon.push('\n');
    }
    let chain = api.parse(corpus::JOE_CHAIN).ctx("joe")?.canonical;
    let frame = api.parse(corpus::JOE_FRAME).ctx("joe")?.canonical;
    ensure(chain == frame, || "the two Joe forms differ".into())?;
    Ok(Run {
        detail: format!("{} sentences parse, round-trip and match goldens", corpus::ALL.len()),
        fingerprint: canon,
    })
}

// ---- logic export ----

#[derive(Debug, Clone, PartialEq, Eq)]
enum Sx {
    Atom(String),
    List(Vec<Sx>),
}

fn read_sx(text: &str) -> Result<Sx, String> {
    let mut toks = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' | ')' => {
                toks.push(c.to_string());
                chars.next();
            }
            '"' => {
                let mut s = String::from('"');
                chars.next();
                while let Some(c) = chars.next() {
                    s.push(c);
                    if c == '\\' {
                        s.extend(chars.next());
                    } else if c == '"' {
                        break;
                    }
                }
                toks.push(s);
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' {
                        break;
                    }
                    s.push(c);
                    chars.next();
                }
                toks.push(s);
            }
        }
    }
    let mut pos = 0;
    let sx = read_tokens(&toks, &mut pos)?;
    ensure(pos == toks.len(), || format!("trailing input in {text}"))?;
    Ok(sx)
}

fn read_tokens(toks: &[String], pos: &mut usize) -> Result<Sx, String> {
    let t = toks.get(*pos).ok_or("unexpected end")?;
    *pos += 1;
    match t.as_str() {
        "(" => {
            let mut items = Vec::new();
            while toks.get(*pos).map(String::as_str) != Some(")") {
                items.push(read_tokens(toks, pos)?);
            }
            *pos += 1;
            Ok(Sx::List(items))
        }
        ")" => Err("unbalanced )".into()),
        _ => Ok(Sx::Atom(t.clone())),
    }
}

/// Bound variables renamed in binding order; `src%name` read as `src#name`.
fn normalize(sx: &Sx, scope: &mut Vec<(String, String)>, next: &mut usize) -> Sx {
    match sx {
        Sx::Atom(a) if a.starts_with('?') => Sx::Atom(
            scope
                .iter()
                .rev()
                .find(|(v, _)| v == a)
                .map(|(_, n)| n.clone())
                .unwrap_or_else(|| a.clone()),
        ),
        Sx::Atom(a) if !a.starts_with('"') => Sx::Atom(a.replacen('%', "#", 1)),
        Sx::Atom(a) => Sx::Atom(a.clone()),
        Sx::List(items) => {
            let quantifier = matches!(items.first(), Some(Sx::Atom(q)) if q == "exists" || q == "forall");
            if let (true, Some(Sx::List(binders))) = (quantifier, items.get(1)) {
                let depth = scope.len();
                let mut renamed = Vec::new();
                for b in binders {
                    let (var, rest) = match b {
                        Sx::List(v) if !v.is_empty() => (&v[0], &v[1..]),
                        other => (other, &[][..]),
                    };
                    let fresh = format!("?v{next}");
                    *next += 1;
                    let rest: Vec<Sx> = rest.iter().map(|x| normalize(x, scope, next)).collect();
                    if let Sx::Atom(v) = var {
                        scope.push((v.clone(), fresh.clone()));
                    }
                    let mut l = vec![Sx::Atom(fresh)];
                    l.extend(rest);
                    renamed.push(Sx::List(l));
                }
                let mut out = vec![items[0].clone(), Sx::List(renamed)];
                out.extend(items[2..].iter().map(|x| normalize(x, scope, next)));
                scope.truncate(depth);
                Sx::List(out)
            } else {
                Sx::List(items.iter().map(|x| normalize(x, scope, next)).collect())
            }
        }
    }
}

fn normal_form(text: &str) -> Result<Sx, String> {
    Ok(normalize(&read_sx(text)?, &mut Vec::new(), &mut 0))
}

fn logic_export(d: Driver) -> Result<Run, String> {
    let mut api = d.fresh()?;
    let want = normal_form(JOE_KIF)?;
    // the comparison must see through names but not through structure
    let renamed = normal_form(r#"(exists ((?a p#man) (?b p#leg)) (and (p#name ?a "Joe") (p#part ?a ?b)))"#)?;
    let swapped = normal_form(r#"(exists ((?m p#man) (?l p#leg)) (and (p#name ?m "Joe") (p#part ?l ?m)))"#)?;
    ensure(renamed == want && swapped != want, || "normalization is not discriminating".into())?;
    let mut out = String::new();
    for fl in [corpus::JOE_CHAIN, corpus::JOE_FRAME] {
        let got = api.export_logic(fl).ctx("export")?;
        ensure(normal_form(&got)? == want, || format!("{got} does not match {JOE_KIF}"))?;
        out = got;
    }
    Ok(Run {
        detail: format!("Joe exports as {out}"),
        fingerprint: out,
    })
}

// ---- subsumption ----

fn subsumption(d: Driver) -> Result<Run, String> {
    let mut api = d.fresh()?;
    api.submit(&UserId::from("o"), "o#A subtype: o#B", &[]).ctx("ontology")?;
    let oracle = Oracle::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let pairs = so::random_pairs(&mut rng, SUBSUMPTION_PAIRS);
    let mut verdicts = String::with_capacity(pairs.len());
    let (mut agree, mut entailed) = (0, 0);
    let mut first_miss = None;
    for (g, s) in &pairs {
        let got = api
            .subsumes(&canonical_text(&g.to_graph()), &canonical_text(&s.to_graph()))
            .ctx("subsumes")?;
        let want = oracle.entails(s, g);
        entailed += want as usize;
        if got == want {
            agree += 1;
        } else if first_miss.is_none() {
            first_miss = Some(format!("general {g:?} specific {s:?}: got {got}"));
        }
        verdicts.push(if got { '1' } else { '0' });
    }
    ensure(agree == pairs.len(), || {
        format!("{agree}/{} agree; first miss {}", pairs.len(), first_miss.unwrap_or_default())
    })?;
    Ok(Run {
        detail: format!("{agree}/{} pairs agree with model enumeration ({entailed} entailed)", pairs.len()),
        fingerprint: verdicts,
    })
}

// ---- edit protocol ----

fn edit_protocol(d: Driver) -> Result<Run, String> {
    let dir = tempfile::tempdir().ctx("tempdir")?;
    let journal = dir.path().join("kb.journal");
    let config = ServiceConfig {
        journal: Some(journal.clone()),
        ..ServiceConfig::default()
    };
    let service = Service::open_with_clock(&config, Box::new(LogicalClock::default())).ctx("open")?;
    let mut api = d.connect(service)?;
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let r = workload::run(&mut api, &mut rng, WORKLOAD_SUBMISSIONS);
    ensure(r.ok(), || format!("{} violations: {:?}", r.violations.len(), r.violations))?;
    ensure(r.submissions >= WORKLOAD_SUBMISSIONS, || format!("only {} submissions", r.submissions))?;
    let missing_link = r.rejected.get("missing_corrective_link").copied().unwrap_or(0);
    ensure(r.not_owner > 0 && missing_link > 0, || {
        format!("workload never hit not_owner ({}) or a missing link ({missing_link})", r.not_owner)
    })?;
    workload::replay_matches(&mut api, &journal).ctx("replay")?;
    let dump = api.dump().ctx("dump")?;
    let text = std::fs::read_to_string(&journal).ctx("journal")?;
    Ok(Run {
        detail: format!(
            "{} submissions by {} users: {} accepted, {} refused as not_owner, {} needed a corrective link, {} removed, {} cloned; replay identical",
            r.submissions,
            workload::USERS.len(),
            r.accepted,
            r.not_owner,
            missing_link,
            r.removals,
            r.clones
        ),
        fingerprint: format!("{:?} {} {}", r.rejected, sha(&dump), sha(&text)),
    })
}

// ---- valuation ----

fn meta_objection(d: Driver) -> Result<(f64, f64), String> {
    let mut api = d.fresh()?;
    let p = UserId::from("p");
    api.submit_structured(&p, corpus::ARGUMENTATION).ctx("argumentation")?;
    let statements: Vec<_> = api
        .query(&QueryRequest::default())
        .ctx("listing")?
        .hits
        .into_iter()
        .filter(|h| h.kind == ObjectKind::StatementObject)
        .map(|h| h.id)
        .collect();
    let mut rule = None;
    for id in statements {
        let a = api.argumentation(&id).ctx("argumentation")?;
        if a.links.len() == 2 {
            rule = Some((id, a));
        }
    }
    let (rule, arg) = rule.ok_or("no statement carries both the argument and the objection")?;
    let argument = arg.links.iter().find(|n| n.kind == LinkKind::Argument).ok_or("no argument")?;
    let objection = arg.links.iter().find(|n| n.kind == LinkKind::Objection).ok_or("no objection")?;
    let meta = objection.on_link.first().ok_or("objection has no meta-objection")?;
    let r = UserId::from("r");
    api.rate(&r, &argument.source, Criterion::Veracity, 1.0).ctx("rate")?;
    api.rate(&r, &objection.source, Criterion::Veracity, 1.0).ctx("rate")?;
    api.rate(&p, &meta.source, Criterion::Veracity, 1.0).ctx("rate")?;
    let with = api.scores().ctx("scores")?.statement_score[&rule];
    let owner = api.object(&meta.source).ctx("meta")?.author;
    let outcome = api.remove(&owner, &meta.source).ctx("ablation")?;
    ensure(outcome == kbms::protocol::RemoveOutcome::Removed, || format!("ablation gave {outcome:?}"))?;
    let without = api.scores().ctx("scores")?.statement_score[&rule];
    Ok((with, without))
}

fn valuation(d: Driver) -> Result<Run, String> {
    let params = ValuationParams::default();
    let mut gap = 0.0f64;
    let mut fingerprint = String::new();
    for seed in 0..VALUATION_NETWORKS {
        let mut api = d.fresh()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (net, ids, users) = random_network_via(&mut api, &mut rng, 10, 5);
        let got = api.scores().ctx("scores")?;
        let want = solve(&net, params.max_iters, params.tolerance);
        for (i, id) in ids.iter().enumerate() {
            let v = got.statement_score.get(id).ok_or_else(|| format!("seed {seed}: {id} unscored"))?;
            gap = gap.max((v - want.effective[i]).abs());
        }
        for (i, u) in users.iter().enumerate() {
            if let Some(v) = got.user_score.get(u) {
                gap = gap.max((v - want.user[i]).abs());
            }
        }
        ensure(gap < SCORE_TOLERANCE, || format!("seed {seed}: gap {gap:e}"))?;
        fingerprint.push_str(&serde_json::to_string(&got.statement_score).ctx("json")?);
    }
    let (with, without) = meta_objection(d)?;
    ensure(with > without, || format!("meta-objection gives {with} vs ablated {without}"))?;
    fingerprint.push_str(&format!("{with} {without}"));
    Ok(Run {
        detail: format!(
            "{VALUATION_NETWORKS} networks within {gap:.1e} of the oracle; meta-objection lifts rule {without:.4} -> {with:.4}"
        ),
        fingerprint: sha(&fingerprint),
    })
}

// ---- federation ----

fn federation(d: Driver) -> Result<Run, String> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios");
    let mut fingerprint = String::new();
    let mut checks = 0;
    for name in SCENARIOS {
        let text = std::fs::read_to_string(dir.join(format!("{name}.scn"))).ctx(name)?;
        let nodes = text.lines().filter(|l| l.starts_with("node ")).count();
        ensure(nodes >= 5, || format!("{name} has only {nodes} nodes"))?;
        let s = Scenario::parse(&text).ctx(name)?;
        for seed in 0..FEDERATION_SEEDS {
            for duplicate in [None, Some(0.5)] {
                let opts = SimOptions { seed, duplicate };
                let run = || run_scenario_with(&s, &opts, Box::new(ServiceTransport::new(d.wire()))).ctx(name);
                let a = run()?;
                let failed: Vec<_> = a.checks.iter().filter(|(_, ok)| !ok).map(|(c, _)| c.clone()).collect();
                ensure(failed.is_empty(), || format!("{name} seed {seed}: {failed:?}"))?;
                ensure(a.checks.iter().any(|(c, _)| c.starts_with("nexus ")), || {
                    format!("{name}: no nexus was checked")
                })?;
                ensure(run()?.trace == a.trace, || format!("{name} seed {seed}: trace not reproducible"))?;
                checks += a.checks.len();
                fingerprint.push_str(&a.trace.join("\n"));
                fingerprint.push_str(&format!("{:?}", a.digests));
            }
        }
    }
    Ok(Run {
        detail: format!(
            "{} scenarios x {FEDERATION_SEEDS} seeds, with and without duplication: {checks} checks hold, traces reproducible",
            SCENARIOS.len()
        ),
        fingerprint: sha(&fingerprint),
    })
}

// ---- report ----

struct Criterion_ {
    name: &'static str,
    limit: Duration,
    run: fn(Driver) -> Result<Run, String>,
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

fn main() -> ExitCode {
    let criteria = [
        Criterion_ { name: "fl corpus golden suite", limit: Duration::from_secs(1), run: fl_corpus },
        Criterion_ { name: "logic export matches KIF", limit: Duration::from_secs(60), run: logic_export },
        Criterion_ { name: "subsumption vs brute force", limit: Duration::from_secs(60), run: subsumption },
        Criterion_ { name: "edit protocol invariants", limit: Duration::from_secs(120), run: edit_protocol },
        Criterion_ { name: "valuation oracle equivalence", limit: Duration::from_secs(30), run: valuation },
        Criterion_ { name: "federation convergence", limit: Duration::from_secs(60), run: federation },
    ];
    let drivers = [Driver::InProcess, Driver::Service];
    let mut all_pass = true;
    let mut parity_pass = true;
    let mut parity_notes = Vec::new();
    for c in &criteria {
        let mut runs = Vec::new();
        for d in drivers {
            let start = Instant::now();
            let r = (c.run)(d);
            runs.push((d, r, start.elapsed()));
        }
        let mut problems = Vec::new();
        for (d, r, t) in &runs {
            match r {
                Err(e) => problems.push(format!("{}: {e}", d.name())),
                Ok(_) if *t >= c.limit => problems.push(format!("{}: took {} (limit {})", d.name(), secs(*t), secs(c.limit))),
                Ok(_) => {}
            }
        }
        let timing = runs
            .iter()
            .map(|(d, _, t)| format!("{} {}", d.name(), secs(*t)))
            .collect::<Vec<_>>()
            .join(", ");
        let pass = problems.is_empty();
        all_pass &= pass;
        if pass {
            let detail = runs[0].1.as_ref().map(|r| r.detail.clone()).unwrap_or_default();
            println!("PASS  {}: {detail} [{timing}; limit {}]", c.name, secs(c.limit));
        } else {
            println!("FAIL  {}: {} [{timing}; limit {}]", c.name, problems.join("; "), secs(c.limit));
        }
        match (&runs[0].1, &runs[1].1) {
            (Ok(a), Ok(b)) if a.fingerprint == b.fingerprint => {}
            (Ok(_), Ok(_)) => {
                parity_pass = false;
                parity_notes.push(format!("{} observed differently", c.name));
            }
            _ => {
                parity_pass = false;
                parity_notes.push(format!("{} did not pass on both", c.name));
            }
        }
    }
    parity_pass &= all_pass;
    if parity_pass {
        println!(
            "PASS  service parity: all {} criteria pass through both drivers with identical observations",
            criteria.len()
        );
    } else {
        println!("FAIL  service parity: {}", parity_notes.join("; "));
    }
    if all_pass && parity_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
