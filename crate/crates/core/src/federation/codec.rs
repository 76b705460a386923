//! Length-prefixed text records: `<bytes>\n<kind>|<origin>|<ttl>|<hash>|<payload>`.
//! The payload is last, so it may contain `|`.

use super::{Message, MessageKind, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CodecError {
    #[error("bad length prefix")]
    Length,
    #[error("record shorter than its length prefix")]
    Truncated,
    #[error("malformed record: {0}")]
    Record(String),
}

pub fn encode(m: &Message) -> String {
    let record = format!(
        "{}|{}|{}|{}|{}",
        m.kind.name(),
        m.origin,
        m.ttl,
        m.hash,
        m.payload
    );
    format!("{}\n{record}", record.len())
}

fn parse_record(r: &str) -> Result<Message, CodecError> {
    let bad = || CodecError::Record(r.chars().take(60).collect());
    let mut parts = r.splitn(5, '|');
    let mut next = || parts.next().ok_or_else(bad);
    let kind_name = next()?;
    let kind = MessageKind::ALL
        .into_iter()
        .find(|k| k.name() == kind_name)
        .ok_or_else(bad)?;
    let origin = NodeId(next()?.to_string());
    let ttl = next()?.parse().map_err(|_| bad())?;
    let hash = next()?.to_string();
    let payload = next()?.to_string();
    if origin.0.is_empty() || origin.0.contains('\n') {
        return Err(bad());
    }
    Ok(Message {
        kind,
        origin,
        ttl,
        hash,
        payload,
    })
}

/// Decodes one record from the front of `s`, returning the rest.
pub fn decode_stream(s: &str) -> Result<(Message, &str), CodecError> {
    let (len, rest) = s.split_once('\n').ok_or(CodecError::Length)?;
    let len: usize = len.trim().parse().map_err(|_| CodecError::Length)?;
    if rest.len() < len || !rest.is_char_boundary(len) {
        return Err(CodecError::Truncated);
    }
    let (record, rest) = rest.split_at(len);
    Ok((parse_record(record)?, rest))
}

/// Decodes exactly one record.
pub fn decode(s: &str) -> Result<Message, CodecError> {
    let (m, rest) = decode_stream(s)?;
    if !rest.is_empty() {
        return Err(CodecError::Record("trailing data".into()));
    }
    Ok(m)
}
