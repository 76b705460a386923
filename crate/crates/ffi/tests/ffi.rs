use std::ffi::{c_char, CStr, CString};
use std::ptr;

use kbms_ffi::*;

const JOE: &str = r#"a p#man with p#name "Joe" and has for p#part a p#leg"#;
const AT_MOST_TWO: &str = "every p#man has for p#part at most 2 p#leg";
const AT_LEAST_THREE: &str = "every p#man has for p#part at least 3 p#leg";

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn take(p: *mut c_char) -> String {
    unsafe {
        assert!(!p.is_null());
        let s = CStr::from_ptr(p).to_str().unwrap().to_string();
        kbms_string_free(p);
        s
    }
}

fn last_error(h: *const KbmsHandle) -> Option<String> {
    unsafe {
        let p = kbms_last_error(h);
        (!p.is_null()).then(|| CStr::from_ptr(p).to_str().unwrap().to_string())
    }
}

fn open(path: Option<&str>) -> *mut KbmsHandle {
    unsafe {
        let mut h = ptr::null_mut();
        let p = path.map(c);
        let st = kbms_open(p.as_ref().map_or(ptr::null(), |p| p.as_ptr()), &mut h);
        assert_eq!(st, KbmsStatus::Ok);
        h
    }
}

fn submit(h: *mut KbmsHandle, author: &str, fl: &str) -> Result<String, KbmsStatus> {
    unsafe {
        let mut out = ptr::null_mut();
        match kbms_submit(h, c(author).as_ptr(), c(fl).as_ptr(), &mut out) {
            KbmsStatus::Ok => Ok(take(out)),
            st => Err(st),
        }
    }
}

#[test]
fn parse_and_export_need_no_handle() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(kbms_parse(c(JOE).as_ptr(), &mut out), KbmsStatus::Ok);
        assert_eq!(take(out), r#"a p#man p#name: "Joe", p#part: a p#leg;"#);

        assert_eq!(kbms_export_logic(c(JOE).as_ptr(), &mut out), KbmsStatus::Ok);
        let kif = take(out);
        assert!(kif.starts_with("(exists"), "{kif}");

        assert_eq!(kbms_parse(c("a p#man with").as_ptr(), &mut out), KbmsStatus::Syntax);
        assert_eq!(kbms_parse(ptr::null(), &mut out), KbmsStatus::NullPointer);
        assert_eq!(kbms_parse(c(JOE).as_ptr(), ptr::null_mut()), KbmsStatus::NullPointer);
    }
}

#[test]
fn submit_rate_score_remove() {
    unsafe {
        let h = open(None);
        let id = submit(h, "ann", JOE).unwrap();
        assert_eq!(id.len(), 32);

        let (cid, crit) = (c(&id), c("veracity"));
        assert_eq!(kbms_rate(h, c("bob").as_ptr(), cid.as_ptr(), crit.as_ptr(), 1.0), KbmsStatus::Ok);
        assert_eq!(
            kbms_rate(h, c("bob").as_ptr(), cid.as_ptr(), crit.as_ptr(), 3.0),
            KbmsStatus::InvalidArgument
        );
        assert!(last_error(h).unwrap().contains("invalid_argument"));

        let mut score = f64::NAN;
        assert_eq!(kbms_score(h, cid.as_ptr(), &mut score), KbmsStatus::Ok);
        assert!(score.is_finite());
        assert_eq!(last_error(h), None);

        let mut cloned = -1;
        assert_eq!(
            kbms_remove(h, c("bob").as_ptr(), cid.as_ptr(), &mut cloned),
            KbmsStatus::ProtocolViolation
        );
        assert!(last_error(h).unwrap().contains("not_owner"));
        assert_eq!(kbms_remove(h, c("ann").as_ptr(), cid.as_ptr(), &mut cloned), KbmsStatus::Ok);
        assert_eq!(cloned, 0);
        assert_eq!(kbms_score(h, cid.as_ptr(), &mut score), KbmsStatus::NotFound);
        assert_eq!(kbms_score(h, c("zz").as_ptr(), &mut score), KbmsStatus::InvalidArgument);
        kbms_close(h);
    }
}

#[test]
fn conflicting_submission_is_a_protocol_violation() {
    unsafe {
        let h = open(None);
        submit(h, "ann", AT_MOST_TWO).unwrap();
        assert_eq!(submit(h, "bob", AT_LEAST_THREE), Err(KbmsStatus::ProtocolViolation));
        assert!(last_error(h).unwrap().contains("missing_corrective_link"));
        assert_eq!(submit(h, "bob", "a p#man with"), Err(KbmsStatus::Syntax));
        kbms_close(h);
    }
}

#[test]
fn generic_call_speaks_the_service_protocol() {
    unsafe {
        let h = open(None);
        let id = submit(h, "ann", JOE).unwrap();
        let mut out = ptr::null_mut();
        let req = c(&format!(r#"{{"op":"object","id":"{id}"}}"#));
        assert_eq!(kbms_call(h, req.as_ptr(), &mut out), KbmsStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(v["kind"], "object");
        assert_eq!(v["value"]["author"], "ann");

        assert_eq!(kbms_call(h, c(r#"{"op":"health"}"#).as_ptr(), &mut out), KbmsStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
        assert_eq!(v["value"]["statements"], 1);

        assert_eq!(kbms_call(h, c("{").as_ptr(), &mut out), KbmsStatus::InvalidArgument);
        assert_eq!(kbms_call(h, c(r#"{"op":"nope"}"#).as_ptr(), &mut out), KbmsStatus::InvalidArgument);
        kbms_close(h);
    }
}

#[test]
fn null_handles_are_refused() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(
            kbms_call(ptr::null_mut(), c(r#"{"op":"health"}"#).as_ptr(), &mut out),
            KbmsStatus::NullPointer
        );
        assert!(kbms_last_error(ptr::null()).is_null());
        assert_eq!(kbms_open(ptr::null(), ptr::null_mut()), KbmsStatus::NullPointer);
        kbms_close(ptr::null_mut());
        kbms_string_free(ptr::null_mut());
    }
}

#[test]
fn journal_survives_reopen_and_corruption_is_reported() {
    unsafe {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("kb.journal");
        let p = path.to_str().unwrap();

        let h = open(Some(p));
        let id = submit(h, "ann", JOE).unwrap();
        kbms_close(h);

        let h = open(Some(p));
        let mut out = ptr::null_mut();
        let req = c(&format!(r#"{{"op":"object","id":"{id}"}}"#));
        assert_eq!(kbms_call(h, req.as_ptr(), &mut out), KbmsStatus::Ok);
        take(out);
        kbms_close(h);

        std::fs::write(&path, "not a journal\n").unwrap();
        let mut h = ptr::null_mut();
        assert_eq!(kbms_open(c(p).as_ptr(), &mut h), KbmsStatus::JournalCorrupt);
        assert!(h.is_null());
    }
}

#[test]
fn header_declares_every_entry_point() {
    let header = include_str!("../include/kbms.h");
    for f in [
        "kbms_open",
        "kbms_close",
        "kbms_call",
        "kbms_submit",
        "kbms_remove",
        "kbms_rate",
        "kbms_score",
        "kbms_parse",
        "kbms_export_logic",
        "kbms_string_free",
        "kbms_last_error",
        "KBMS_STATUS_JOURNAL_CORRUPT = 7",
        "typedef struct KbmsHandle KbmsHandle",
    ] {
        assert!(header.contains(f), "header lacks {f}");
    }
}
