//! Command-line front end. Every command maps onto one service request and
//! runs against a journal file (`--kb`) or a running service (`--server`).
//!
//! Exit codes: 0 success, 1 failed scenario checks, 2 usage or invalid
//! argument, 3 protocol violation, 4 syntax error, 5 transport, 6 not
//! found, 7 corrupt journal.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::federation::{run_scenario, NodeId, Scenario, SimOptions};
use crate::protocol::{ArgNode, CorrectiveLink, Journal, RemoveOutcome};
use crate::service::{
    serve, ApiError, KbApi, LocalClient, QueryRequest, RemoteClient, Response, Service, ServiceConfig, ServiceError,
};
use crate::store::{LinkKind, LinkTarget, ObjectId, UserId};
use crate::valuation::Criterion;
use crate::Kb;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Machine,
}

#[derive(Debug, Parser)]
#[command(name = "kbms", version, about = "Collaborative knowledge base management")]
pub struct Cli {
    /// Journal file of a local KB.
    #[arg(long, global = true, conflicts_with = "server")]
    kb: Option<PathBuf>,
    /// Address of a running service.
    #[arg(long, global = true)]
    server: Option<String>,
    #[arg(long, global = true, value_enum, default_value = "text")]
    format: Format,
    /// Valuation parameters file (key = value lines).
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    /// Author of submissions and ratings.
    #[arg(long, global = true, default_value = "anonymous")]
    user: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the canonical form of an FL statement.
    Parse { fl: String },
    /// Print the logic translation of an FL statement.
    ExportLogic { fl: String },
    /// Submit a statement as --user.
    Add(AddArgs),
    /// Remove a statement owned by --user.
    Remove { id: String },
    /// Search the specialization hierarchy.
    Query(QueryArgs),
    /// Rate an object on a criterion, value in [-1, 1].
    Rate {
        id: String,
        criterion: String,
        #[arg(allow_negative_numbers = true)]
        value: f64,
    },
    /// Usefulness of every statement and user.
    Scores,
    /// Direct specialization edges.
    Hierarchy,
    /// Arguments, objections and corrections on a statement.
    Argumentation { id: String },
    /// Run the KB as a newline-delimited JSON service.
    Serve(ServeArgs),
    /// Replay a journal and report the first bad record.
    JournalVerify { path: Option<PathBuf> },
    /// Federation requests to a running node.
    #[command(subcommand)]
    Peer(PeerCommand),
    /// Federation scenarios on the simulated network.
    #[command(subcommand)]
    Scenario(ScenarioCommand),
}

#[derive(Debug, Args)]
struct AddArgs {
    fl: String,
    /// `kind=target`, target being an object id or a link id like `l3`.
    #[arg(long = "link")]
    links: Vec<String>,
    /// Split an argumentation sentence into linked statements.
    #[arg(long)]
    structured: bool,
}

#[derive(Debug, Args)]
struct QueryArgs {
    /// Only specializations of this FL statement.
    #[arg(long)]
    spec: Option<String>,
    /// Only objects by these authors (repeatable).
    #[arg(long = "author")]
    authors: Vec<String>,
    /// Only objects whose author scores at least this.
    #[arg(long, allow_negative_numbers = true)]
    min_user_score: Option<f64>,
    /// Only statements scoring at least this.
    #[arg(long, allow_negative_numbers = true)]
    min_usefulness: Option<f64>,
    #[arg(long, default_value_t = 0)]
    offset: usize,
    #[arg(long)]
    limit: Option<usize>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7878")]
    listen: String,
    #[arg(long, default_value = "kbms")]
    node_id: String,
    /// `id=address` of a peer node.
    #[arg(long = "peer")]
    peers: Vec<String>,
    /// Directory node for terms without a route.
    #[arg(long)]
    directory: Option<String>,
    #[arg(long)]
    is_directory: bool,
}

#[derive(Debug, Subcommand)]
enum PeerCommand {
    /// Commit this node to be a nexus for a term.
    Advertise { term: String },
    /// Nexus nodes known for a term.
    List { term: String },
    /// Send a statement to the nexus nodes of its terms.
    Publish { fl: String },
}

#[derive(Debug, Subcommand)]
enum ScenarioCommand {
    /// Run a scenario file and print its trace and checks.
    Run {
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Duplicate each message with this probability.
        #[arg(long)]
        duplicate: Option<f64>,
    },
}

enum Failure {
    Api(ApiError),
    Usage(String),
    Corrupt(String),
    Checks,
}

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        Failure::Api(e)
    }
}

impl From<ServiceError> for Failure {
    fn from(e: ServiceError) -> Self {
        match e {
            ServiceError::JournalCorrupt { .. } => Failure::Corrupt(e.to_string()),
            ServiceError::Params(p) => Failure::Usage(p.to_string()),
            ServiceError::Io(e) => Failure::Api(ApiError::transport(e)),
        }
    }
}

pub fn exit_code(e: &ApiError) -> i32 {
    match e {
        ApiError::InvalidArgument { .. } => 2,
        ApiError::ProtocolViolation { .. } => 3,
        ApiError::Syntax { .. } => 4,
        ApiError::Transport { .. } => 5,
        ApiError::NotFound { .. } => 6,
    }
}

fn client(cli: &Cli) -> Result<Box<dyn KbApi>, Failure> {
    if let Some(addr) = &cli.server {
        return Ok(Box::new(RemoteClient::connect(addr)?));
    }
    let config = ServiceConfig {
        journal: cli.kb.clone(),
        params: cli.params.clone(),
        ..Default::default()
    };
    Ok(Box::new(LocalClient::new(Service::open(&config)?)))
}

fn object_id(s: &str) -> Result<ObjectId, Failure> {
    s.parse().map_err(|_| Failure::Usage(format!("not an object id: {s}")))
}

fn link_flag(s: &str) -> Result<CorrectiveLink, Failure> {
    let (kind, target) = s
        .split_once('=')
        .ok_or_else(|| Failure::Usage(format!("expected kind=target, got {s}")))?;
    let kind: LinkKind = kind.parse().map_err(|e| Failure::Usage(format!("{e}")))?;
    let target = match target.parse() {
        Ok(l) => LinkTarget::Link(l),
        Err(_) => LinkTarget::Object(object_id(target)?),
    };
    Ok(CorrectiveLink {
        kind,
        target,
        meta: Vec::new(),
        annotations: Vec::new(),
    })
}

fn machine(out: &mut dyn Write, r: &Response) -> std::io::Result<()> {
    writeln!(out, "{}", serde_json::to_string(r).expect("responses serialize"))
}

fn arg_tree(out: &mut dyn Write, n: &ArgNode, depth: usize, on_link: bool) -> std::io::Result<()> {
    let pad = "  ".repeat(depth);
    let mark = if on_link { "on link: " } else { "" };
    writeln!(
        out,
        "{pad}{mark}{} {} [{} by {}] {}",
        n.kind.name(),
        n.link,
        n.source,
        n.author,
        n.source_text.replace('\n', " ")
    )?;
    for a in &n.annotations {
        writeln!(out, "{pad}  __ {}: {}", a.relation, a.object)?;
    }
    for m in &n.on_link {
        arg_tree(out, m, depth + 1, true)?;
    }
    for m in &n.on_source {
        arg_tree(out, m, depth + 1, false)?;
    }
    Ok(())
}

fn text(out: &mut dyn Write, r: &Response) -> std::io::Result<()> {
    match r {
        Response::Accepted(a) => {
            write!(out, "accepted {}", a.id)?;
            for l in &a.links {
                write!(out, " {l}")?;
            }
            writeln!(out)
        }
        Response::Steps(steps) => {
            for s in steps {
                match &s.outcome {
                    crate::protocol::AddOutcome::Accepted { id, .. } => {
                        writeln!(out, "accepted {id} by {}: {}", s.actor, s.text.replace('\n', " "))?
                    }
                    crate::protocol::AddOutcome::Rejected(r) => {
                        writeln!(out, "rejected {} by {}: {r}", r.code(), s.actor)?
                    }
                }
            }
            Ok(())
        }
        Response::Removed(RemoveOutcome::ClonedTo(u)) => writeln!(out, "ownership passed to {u}"),
        Response::Removed(_) => writeln!(out, "removed"),
        Response::Query(q) => {
            for h in &q.hits {
                let score = h.score.map(|s| format!("{s:.4}")).unwrap_or_else(|| "-".into());
                writeln!(out, "{}\t{score}\t{}\t{}", h.id, h.author, h.text.replace('\n', " "))?;
            }
            Ok(())
        }
        Response::Rated(e) => writeln!(out, "{} rated {} {} = {}", e.rater, e.object, e.criterion, e.value),
        Response::Scores(s) => {
            write!(out, "{}", s.export())?;
            for (u, v) in &s.user_score {
                writeln!(out, "user {u}\t{v}")?;
            }
            Ok(())
        }
        Response::Hierarchy(edges) => {
            for (c, p) in edges {
                writeln!(out, "{c}\t{p}")?;
            }
            Ok(())
        }
        Response::Argumentation(a) => {
            writeln!(out, "{}", a.object)?;
            for n in &a.links {
                arg_tree(out, n, 1, false)?;
            }
            Ok(())
        }
        Response::Advertised(true) => writeln!(out, "advertised"),
        Response::Advertised(false) => writeln!(out, "already a nexus"),
        Response::Nexus(nodes) => {
            for n in nodes {
                writeln!(out, "{n}")?;
            }
            Ok(())
        }
        Response::Published(report) => {
            for (n, s) in report {
                writeln!(out, "{n}\t{s}")?;
            }
            Ok(())
        }
        Response::Parsed(p) => writeln!(out, "{}", p.pretty),
        Response::Logic(s) => writeln!(out, "{s}"),
        other => machine(out, other),
    }
}

fn run_inner(cli: &Cli, out: &mut dyn Write) -> Result<(), Failure> {
    let user = UserId::new(cli.user.clone());
    let emit = |out: &mut dyn Write, r: Response| -> Result<(), Failure> {
        let res = match cli.format {
            Format::Text => text(out, &r),
            Format::Machine => machine(out, &r),
        };
        res.map_err(|e| Failure::Api(ApiError::transport(e)))
    };
    match &cli.command {
        Command::Serve(s) => {
            let mut peers = BTreeMap::new();
            for p in &s.peers {
                let (id, addr) = p
                    .split_once('=')
                    .ok_or_else(|| Failure::Usage(format!("expected id=address, got {p}")))?;
                peers.insert(NodeId::from(id), addr.to_string());
            }
            let config = ServiceConfig {
                listen: s.listen.clone(),
                journal: cli.kb.clone(),
                node_id: NodeId(s.node_id.clone()),
                params: cli.params.clone(),
                peers,
                directory: s.directory.as_deref().map(NodeId::from),
                is_directory: s.is_directory,
            };
            let handle = serve(&config)?;
            let _ = writeln!(out, "listening on {}", handle.addr());
            let _ = out.flush();
            handle.wait();
            Ok(())
        }
        Command::JournalVerify { path } => {
            let path = path
                .clone()
                .or_else(|| cli.kb.clone())
                .ok_or_else(|| Failure::Usage("journal-verify needs a path or --kb".into()))?;
            let events = Journal::read(&path).map_err(|e| Failure::Corrupt(e.to_string()))?;
            Kb::replay(&events).map_err(|e| Failure::Corrupt(e.to_string()))?;
            let _ = writeln!(out, "ok: {} records", events.len());
            Ok(())
        }
        Command::Scenario(ScenarioCommand::Run { file, seed, duplicate }) => {
            let text = std::fs::read_to_string(file).map_err(|e| Failure::Usage(format!("{}: {e}", file.display())))?;
            let scenario = Scenario::parse(&text).map_err(|e| Failure::Usage(e.to_string()))?;
            let report = run_scenario(
                &scenario,
                &SimOptions {
                    seed: *seed,
                    duplicate: *duplicate,
                },
            )
            .map_err(|e| Failure::Usage(e.to_string()))?;
            match cli.format {
                Format::Text => {
                    for l in &report.trace {
                        let _ = writeln!(out, "{l}");
                    }
                    for (c, ok) in &report.checks {
                        let _ = writeln!(out, "{} {c}", if *ok { "ok    " } else { "FAILED" });
                    }
                    let _ = writeln!(out, "{}", report.summary());
                }
                Format::Machine => {
                    let checks: Vec<_> = report
                        .checks
                        .iter()
                        .map(|(c, ok)| serde_json::json!({"check": c, "passed": ok}))
                        .collect();
                    let v = serde_json::json!({
                        "trace": report.trace,
                        "checks": checks,
                        "passed": report.passed(),
                    });
                    let _ = writeln!(out, "{v}");
                }
            }
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Checks)
            }
        }
        cmd => {
            let mut api = client(cli)?;
            let r = match cmd {
                Command::Parse { fl } => Response::Parsed(api.parse(fl)?),
                Command::ExportLogic { fl } => Response::Logic(api.export_logic(fl)?),
                Command::Add(a) if a.structured => Response::Steps(api.submit_structured(&user, &a.fl)?),
                Command::Add(a) => {
                    let links = a.links.iter().map(|l| link_flag(l)).collect::<Result<Vec<_>, _>>()?;
                    Response::Accepted(api.submit(&user, &a.fl, &links)?)
                }
                Command::Remove { id } => Response::Removed(api.remove(&user, &object_id(id)?)?),
                Command::Query(q) => Response::Query(api.query(&QueryRequest {
                    spec: q.spec.clone(),
                    authors: (!q.authors.is_empty()).then(|| q.authors.iter().map(|a| UserId::new(a.clone())).collect()),
                    min_user_score: q.min_user_score,
                    min_usefulness: q.min_usefulness,
                    offset: q.offset,
                    limit: q.limit,
                })?),
                Command::Rate { id, criterion, value } => {
                    let c: Criterion = criterion.parse().unwrap_or_else(|e| match e {});
                    Response::Rated(api.rate(&user, &object_id(id)?, c, *value)?)
                }
                Command::Scores => Response::Scores(api.scores()?),
                Command::Hierarchy => Response::Hierarchy(api.hierarchy()?),
                Command::Argumentation { id } => Response::Argumentation(api.argumentation(&object_id(id)?)?),
                Command::Peer(PeerCommand::Advertise { term }) => Response::Advertised(api.advertise(term)?),
                Command::Peer(PeerCommand::List { term }) => Response::Nexus(api.who_is_nexus(term)?),
                Command::Peer(PeerCommand::Publish { fl }) => Response::Published(api.publish(&user, fl)?),
                Command::Serve(_) | Command::JournalVerify { .. } | Command::Scenario(_) => unreachable!("handled above"),
            };
            emit(out, r)
        }
    }
}

/// Runs one invocation and returns its exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return code;
        }
    };
    match run_inner(&cli, out) {
        Ok(()) => 0,
        Err(Failure::Checks) => 1,
        Err(Failure::Usage(m)) => {
            let _ = writeln!(err, "error: {m}");
            2
        }
        Err(Failure::Corrupt(m)) => {
            let _ = writeln!(err, "error: {m}");
            7
        }
        Err(Failure::Api(e)) => {
            let _ = match cli.format {
                Format::Text => writeln!(err, "error[{}]: {e}", e.class()),
                Format::Machine => writeln!(err, "{}", serde_json::to_string(&e).expect("errors serialize")),
            };
            exit_code(&e)
        }
    }
}
