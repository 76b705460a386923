//! C interface to a kbms knowledge base.
//!
//! A `KbmsHandle` owns one KB, in memory or backed by a journal file. Calls
//! return a `KbmsStatus`; on failure `kbms_last_error` describes the most
//! recent error on that handle. Strings returned through `out` pointers are
//! owned by the caller and released with `kbms_string_free`.
//!
//! `kbms_call` accepts any service request as JSON (`{"op": "submit", ...}`)
//! and returns the JSON response body, so everything the service offers is
//! reachable from C.
//!
//! # Safety
//!
//! Every function takes raw pointers from the caller. String arguments must
//! be null or NUL-terminated and valid for the duration of the call. `out`
//! pointers must be null or writable. A handle must come from `kbms_open`,
//! must not be used after `kbms_close`, and must not be used by two threads
//! at once.

#![allow(clippy::missing_safety_doc)]

use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use kbms::service::{ApiError, KbApi, LocalClient, Request, Service, ServiceConfig, ServiceError};
use kbms::store::{ObjectId, UserId};

/// Result of every call. Values match the command-line exit codes where
/// both have the same meaning.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KbmsStatus {
    Ok = 0,
    InvalidArgument = 2,
    ProtocolViolation = 3,
    Syntax = 4,
    Transport = 5,
    NotFound = 6,
    JournalCorrupt = 7,
    NullPointer = 8,
    InvalidUtf8 = 9,
    Panic = 10,
}

impl From<&ApiError> for KbmsStatus {
    fn from(e: &ApiError) -> Self {
        match e {
            ApiError::InvalidArgument { .. } => KbmsStatus::InvalidArgument,
            ApiError::ProtocolViolation { .. } => KbmsStatus::ProtocolViolation,
            ApiError::Syntax { .. } => KbmsStatus::Syntax,
            ApiError::Transport { .. } => KbmsStatus::Transport,
            ApiError::NotFound { .. } => KbmsStatus::NotFound,
        }
    }
}

/// Opaque KB handle.
pub struct KbmsHandle {
    client: LocalClient,
    last_error: Option<CString>,
}

struct Failure(KbmsStatus, String);

impl From<ApiError> for Failure {
    fn from(e: ApiError) -> Self {
        let detail = serde_json::to_string(&e).unwrap_or_else(|_| e.to_string());
        Failure(KbmsStatus::from(&e), detail)
    }
}

fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(KbmsStatus::NullPointer, format!("{what} is null")));
    }
    // SAFETY: the caller passes a NUL-terminated string that outlives the call.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure(KbmsStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

fn give(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("NULs removed").into_raw()
}

fn put(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(KbmsStatus::NullPointer, "out is null".into()));
    }
    // SAFETY: checked non-null; the caller provides a writable slot.
    unsafe { *out = give(s) };
    Ok(())
}

fn object_id(p: *const c_char) -> Result<ObjectId, Failure> {
    let s = text(p, "id")?;
    s.parse()
        .map_err(|_| Failure(KbmsStatus::InvalidArgument, format!("not an object id: {s}")))
}

/// Runs `f` on the handle, recording any error on it.
fn with_handle(h: *mut KbmsHandle, f: impl FnOnce(&mut KbmsHandle) -> Result<(), Failure>) -> KbmsStatus {
    if h.is_null() {
        return KbmsStatus::NullPointer;
    }
    // SAFETY: non-null handles come from kbms_open and are not shared across threads by contract.
    let handle = unsafe { &mut *h };
    let r = catch_unwind(AssertUnwindSafe(|| f(handle)))
        .unwrap_or_else(|_| Err(Failure(KbmsStatus::Panic, "internal panic".into())));
    match r {
        Ok(()) => {
            handle.last_error = None;
            KbmsStatus::Ok
        }
        Err(Failure(status, msg)) => {
            handle.last_error = CString::new(msg.replace('\0', " ")).ok();
            status
        }
    }
}

fn without_handle(f: impl FnOnce() -> Result<(), Failure>) -> KbmsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KbmsStatus::Ok,
        Ok(Err(Failure(status, _))) => status,
        Err(_) => KbmsStatus::Panic,
    }
}

/// Opens a KB. `journal_path` may be null for an in-memory KB; otherwise
/// the journal is replayed and later edits are appended to it.
#[no_mangle]
pub unsafe extern "C" fn kbms_open(journal_path: *const c_char, out: *mut *mut KbmsHandle) -> KbmsStatus {
    without_handle(|| {
        if out.is_null() {
            return Err(Failure(KbmsStatus::NullPointer, "out is null".into()));
        }
        let journal = if journal_path.is_null() {
            None
        } else {
            Some(PathBuf::from(text(journal_path, "journal_path")?))
        };
        let config = ServiceConfig {
            journal,
            ..Default::default()
        };
        let service = Service::open(&config).map_err(|e| match e {
            ServiceError::JournalCorrupt { .. } => Failure(KbmsStatus::JournalCorrupt, e.to_string()),
            other => Failure(KbmsStatus::Transport, other.to_string()),
        })?;
        let h = Box::new(KbmsHandle {
            client: LocalClient::new(service),
            last_error: None,
        });
        // SAFETY: checked non-null above.
        unsafe { *out = Box::into_raw(h) };
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn kbms_close(h: *mut KbmsHandle) {
    if !h.is_null() {
        // SAFETY: h came from kbms_open and is not used again by the caller.
        drop(unsafe { Box::from_raw(h) });
    }
}

/// Frees a string returned by this library. Null is ignored.
#[no_mangle]
pub unsafe extern "C" fn kbms_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: s came from CString::into_raw in this library.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Description of the last failed call on `h` (JSON for service errors),
/// or null. Valid until the next call on `h`.
#[no_mangle]
pub unsafe extern "C" fn kbms_last_error(h: *const KbmsHandle) -> *const c_char {
    if h.is_null() {
        return ptr::null();
    }
    // SAFETY: non-null handles come from kbms_open.
    match unsafe { &(*h).last_error } {
        Some(s) => s.as_ptr(),
        None => ptr::null(),
    }
}

/// Sends one JSON request and stores the JSON response in `out`.
#[no_mangle]
pub unsafe extern "C" fn kbms_call(h: *mut KbmsHandle, request_json: *const c_char, out: *mut *mut c_char) -> KbmsStatus {
    with_handle(h, |h| {
        let req: Request = serde_json::from_str(text(request_json, "request_json")?)
            .map_err(|e| Failure(KbmsStatus::InvalidArgument, format!("bad request: {e}")))?;
        let resp = h.client.call(req)?;
        put(out, serde_json::to_string(&resp).expect("responses serialize"))
    })
}

/// Adds an FL statement by `author`; its id (32 hex digits) goes to `out_id`.
#[no_mangle]
pub unsafe extern "C" fn kbms_submit(
    h: *mut KbmsHandle,
    author: *const c_char,
    fl: *const c_char,
    out_id: *mut *mut c_char,
) -> KbmsStatus {
    with_handle(h, |h| {
        let author = UserId::new(text(author, "author")?);
        let a = h.client.submit(&author, text(fl, "fl")?, &[])?;
        put(out_id, a.id.to_string())
    })
}

/// Removes a statement owned by `author`. Sets `cloned` to 1 when others
/// relied on it and ownership passed to them instead.
#[no_mangle]
pub unsafe extern "C" fn kbms_remove(h: *mut KbmsHandle, author: *const c_char, id: *const c_char, cloned: *mut i32) -> KbmsStatus {
    with_handle(h, |h| {
        let author = UserId::new(text(author, "author")?);
        let out = h.client.remove(&author, &object_id(id)?)?;
        if !cloned.is_null() {
            let c = matches!(out, kbms::protocol::RemoveOutcome::ClonedTo(_));
            // SAFETY: checked non-null.
            unsafe { *cloned = i32::from(c) };
        }
        Ok(())
    })
}

/// Records a rating in [-1, 1].
#[no_mangle]
pub unsafe extern "C" fn kbms_rate(
    h: *mut KbmsHandle,
    rater: *const c_char,
    id: *const c_char,
    criterion: *const c_char,
    value: f64,
) -> KbmsStatus {
    with_handle(h, |h| {
        let rater = UserId::new(text(rater, "rater")?);
        let c = text(criterion, "criterion")?.parse().unwrap_or_else(|e| match e {});
        h.client.rate(&rater, &object_id(id)?, c, value)?;
        Ok(())
    })
}

/// Current usefulness of a statement.
#[no_mangle]
pub unsafe extern "C" fn kbms_score(h: *mut KbmsHandle, id: *const c_char, out: *mut f64) -> KbmsStatus {
    with_handle(h, |h| {
        let id = object_id(id)?;
        let scores = h.client.scores()?;
        let v = *scores.statement_score.get(&id).ok_or_else(|| Failure::from(ApiError::NotFound {
            what: id.to_string(),
        }))?;
        if out.is_null() {
            return Err(Failure(KbmsStatus::NullPointer, "out is null".into()));
        }
        // SAFETY: checked non-null.
        unsafe { *out = v };
        Ok(())
    })
}

/// Canonical form of an FL statement. Needs no handle.
#[no_mangle]
pub unsafe extern "C" fn kbms_parse(fl: *const c_char, out: *mut *mut c_char) -> KbmsStatus {
    without_handle(|| {
        let g = kbms::fl::parse(text(fl, "fl")?).map_err(|e| Failure::from(ApiError::from(e)))?;
        put(out, kbms::fl::canonical_text(&g))
    })
}

/// Logic translation of an FL statement. Needs no handle.
#[no_mangle]
pub unsafe extern "C" fn kbms_export_logic(fl: *const c_char, out: *mut *mut c_char) -> KbmsStatus {
    without_handle(|| {
        let g = kbms::fl::parse(text(fl, "fl")?).map_err(|e| Failure::from(ApiError::from(e)))?;
        put(out, kbms::fl::export_logic(&g).text())
    })
}
