use std::sync::Arc;

use super::*;
use crate::corpus;
use crate::kb::LogicalClock;
use crate::store::UserId;

fn config(dir: &tempfile::TempDir) -> ServiceConfig {
    ServiceConfig {
        journal: Some(dir.path().join("kb.journal")),
        node_id: "n1".into(),
        ..Default::default()
    }
}

fn drivers() -> (LocalClient, RemoteClient, ServiceHandle) {
    let local = LocalClient::new(Service::new(Node::new("local"), ValuationParams::default()));
    let remote = Service::new(Node::new("remote"), ValuationParams::default());
    let handle = serve_service(Arc::new(remote), "127.0.0.1:0").unwrap();
    let client = RemoteClient::connect(&handle.addr().to_string()).unwrap();
    (local, client, handle)
}

#[test]
fn error_classes_match_across_drivers() {
    let (mut local, mut remote, _h) = drivers();
    let p = UserId::from("p");
    let q = UserId::from("q");
    let apis: [&mut dyn KbApi; 2] = [&mut local, &mut remote];
    let mut seen = Vec::new();
    for api in apis {
        let a = api.submit(&p, corpus::JOE_FRAME, &[]).unwrap();
        let e = api.submit(&p, "a p#man p#name: ", &[]).unwrap_err();
        let ApiError::Syntax { line, column, .. } = e else { panic!("{e:?}") };
        assert!(line >= 1 && column >= 1);
        let e = api.remove(&q, &a.id).unwrap_err();
        assert_eq!((e.class(), e.reason()), ("protocol_violation", Some("not_owner")));
        let e = api.object(&crate::store::ObjectId::for_term(&parse_term("p#nothing").unwrap())).unwrap_err();
        assert_eq!(e.class(), "not_found");
        let e = api.rate(&q, &a.id, crate::valuation::Criterion::Veracity, 2.0).unwrap_err();
        assert_eq!(e.class(), "invalid_argument");
        let e = api.submit(&p, corpus::JOE_FRAME, &[]).unwrap_err();
        assert_eq!(e.reason(), Some("redundant"));
        api.rate(&q, &a.id, crate::valuation::Criterion::Veracity, 0.5).unwrap();
        seen.push((a.id, api.scores().unwrap(), api.hierarchy().unwrap()));
    }
    assert_eq!(seen[0], seen[1]);
}

#[test]
fn mutations_are_journaled_before_the_reply() {
    let dir = tempfile::tempdir().unwrap();
    let svc = Service::open_with_clock(&config(&dir), Box::new(LogicalClock::default())).unwrap();
    let mut api = LocalClient::new(svc);
    let p = UserId::from("p");
    let lines = || {
        std::fs::read_to_string(dir.path().join("kb.journal"))
            .unwrap_or_default()
            .lines()
            .count()
    };
    let a = api.submit(&p, corpus::JOE_FRAME, &[]).unwrap();
    assert_eq!(lines(), 1);
    api.submit(&p, corpus::JOE_FRAME, &[]).unwrap_err();
    assert_eq!(lines(), 2);
    api.rate(&p, &a.id, crate::valuation::Criterion::Veracity, 1.0).unwrap();
    assert_eq!(lines(), 3);
    api.advertise("p#man").unwrap();
    assert_eq!(lines(), 4);
    api.remove(&p, &a.id).unwrap();
    assert_eq!(lines(), 5);
    assert_eq!(api.health().unwrap().seq, 5);
}

#[test]
fn restart_replays_to_the_same_dump() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&dir);
    let empty = serve(&cfg).unwrap();
    let mut c = RemoteClient::connect(&empty.addr().to_string()).unwrap();
    assert_eq!(c.health().unwrap().statements, 0);
    let steps = c
        .submit_structured(&"p".into(), corpus::ARGUMENTATION)
        .unwrap();
    assert!(steps.iter().all(|s| s.outcome.is_accepted()));
    let before = c.dump().unwrap();
    drop(c);
    empty.shutdown();

    let again = serve(&cfg).unwrap();
    let mut c = RemoteClient::connect(&again.addr().to_string()).unwrap();
    assert_eq!(c.dump().unwrap(), before);
}

#[test]
fn corrupt_journal_refuses_to_start() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(&dir);
    {
        let svc = Service::open(&cfg).unwrap();
        let mut api = LocalClient::new(svc);
        api.submit(&"p".into(), corpus::JOE_FRAME, &[]).unwrap();
        api.submit(&"p".into(), corpus::MEN_AT_MOST_TWO_LEGS, &[]).unwrap();
        api.submit(&"q".into(), "a p#dog", &[]).unwrap();
    }
    let path = cfg.journal.clone().unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines[1] = "2|garbage";
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    match Service::open(&cfg) {
        Err(ServiceError::JournalCorrupt { seq, .. }) => assert_eq!(seq, 2),
        Err(e) => panic!("{e}"),
        Ok(_) => panic!("started on a corrupt journal"),
    }
}

#[test]
fn statements_replicate_between_running_services() {
    // D is the directory, A the nexus for p#man and p#leg, C publishes.
    let listen = |id: &str, dir: bool| {
        let mut node = Node::new(id);
        node.set_directory(dir);
        if !dir {
            node.set_default_directory(Some("D".into()));
        }
        node
    };
    let ids = ["D", "A", "C"];
    let listeners: Vec<std::net::TcpListener> =
        ids.iter().map(|_| std::net::TcpListener::bind("127.0.0.1:0").unwrap()).collect();
    let peers: BTreeMap<NodeId, String> = ids
        .iter()
        .zip(&listeners)
        .map(|(i, l)| (NodeId::from(*i), l.local_addr().unwrap().to_string()))
        .collect();
    drop(listeners);
    let handles: Vec<ServiceHandle> = ids
        .iter()
        .map(|i| {
            let svc = Service::new(listen(i, *i == "D"), ValuationParams::default()).with_peers(peers.clone());
            serve_service(Arc::new(svc), &peers[&NodeId::from(*i)]).unwrap()
        })
        .collect();
    let client = |i: &str| RemoteClient::connect(&peers[&NodeId::from(i)]).unwrap();
    for t in ["p#man", "p#leg", "p#part", "p#name"] {
        assert!(client("A").advertise(t).unwrap());
    }
    assert_eq!(client("D").who_is_nexus("p#man").unwrap(), vec![NodeId::from("A")]);
    let report = client("C").publish(&"p".into(), corpus::JOE_FRAME).unwrap();
    assert_eq!(report.get(&NodeId::from("A")).map(String::as_str), Some("accepted"));
    let hits = client("A")
        .query(&QueryRequest {
            spec: Some("a p#man".into()),
            ..Default::default()
        })
        .unwrap();
    assert!(hits.hits.iter().any(|h| h.author == UserId::from("p")));
    assert_eq!(client("C").health().unwrap().statements, 0);
    drop(handles);
}
