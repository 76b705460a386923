//! Append-only edit journal. One event per line:
//! `seq|timestamp|actor|action|object-id|details`, where `details` is JSON.
//! `%`, `|`, CR and LF inside fields are percent-escaped.

use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::store::{Timestamp, UserId};

use super::{CorrectiveLink, Rejection};
use crate::valuation::Criterion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Add,
    Remove,
    Clone,
    Rate,
    Advertise,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::Add => "add",
            Action::Remove => "remove",
            Action::Clone => "clone",
            Action::Rate => "rate",
            Action::Advertise => "advertise",
        }
    }
}

impl FromStr for Action {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Ok(match s {
            "add" => Action::Add,
            "remove" => Action::Remove,
            "clone" => Action::Clone,
            "rate" => Action::Rate,
            "advertise" => Action::Advertise,
            _ => return Err(()),
        })
    }
}

/// Recorded result of a submission, checked again on replay.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recorded {
    Accepted,
    Removed,
    Rejected(Rejection),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Details {
    Add {
        fl: String,
        links: Vec<CorrectiveLink>,
        outcome: Recorded,
    },
    Remove {
        outcome: Recorded,
    },
    Clone {
        to: UserId,
    },
    Rate {
        criterion: Criterion,
        value: f64,
    },
    Advertise {
        term: String,
        node: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditEvent {
    pub seq: u64,
    pub timestamp: Timestamp,
    pub actor: UserId,
    pub action: Action,
    /// Object id, or `-` when the event has no object.
    pub object: String,
    pub details: Details,
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '%' => out.push_str("%25"),
            '|' => out.push_str("%7C"),
            '\n' => out.push_str("%0A"),
            '\r' => out.push_str("%0D"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Option<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '%' {
            out.push(c);
            continue;
        }
        let code: String = chars.by_ref().take(2).collect();
        out.push(match code.as_str() {
            "25" => '%',
            "7C" => '|',
            "0A" => '\n',
            "0D" => '\r',
            _ => return None,
        });
    }
    Some(out)
}

impl fmt::Display for EditEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let details = serde_json::to_string(&self.details).map_err(|_| fmt::Error)?;
        write!(
            f,
            "{}|{}|{}|{}|{}|{}",
            self.seq,
            self.timestamp,
            escape(self.actor.as_str()),
            self.action.name(),
            escape(&self.object),
            escape(&details)
        )
    }
}

#[derive(Debug, thiserror::Error)]
pub enum JournalError {
    /// First record that cannot be read or does not replay to its recorded outcome.
    #[error("journal corrupt at seq {seq}: {reason}")]
    Corrupt { seq: u64, reason: String },
    #[error("journal i/o: {0}")]
    Io(#[from] io::Error),
}

impl JournalError {
    pub fn corrupt(seq: u64, reason: impl Into<String>) -> Self {
        JournalError::Corrupt {
            seq,
            reason: reason.into(),
        }
    }
}

impl EditEvent {
    /// Parses one line; `expected_seq` names the record in errors when the
    /// line is too damaged to carry its own number.
    pub fn parse_line(line: &str, expected_seq: u64) -> Result<EditEvent, JournalError> {
        let bad = |why: &str| JournalError::corrupt(expected_seq, why);
        let fields: Vec<&str> = line.split('|').collect();
        if fields.len() != 6 {
            return Err(bad("expected 6 fields"));
        }
        let seq: u64 = fields[0].parse().map_err(|_| bad("bad seq"))?;
        if seq != expected_seq {
            return Err(bad("sequence gap"));
        }
        let timestamp = Timestamp(fields[1].parse().map_err(|_| bad("bad timestamp"))?);
        let actor = UserId(unescape(fields[2]).ok_or_else(|| bad("bad escape"))?);
        let action: Action = fields[3].parse().map_err(|_| bad("bad action"))?;
        let object = unescape(fields[4]).ok_or_else(|| bad("bad escape"))?;
        let raw = unescape(fields[5]).ok_or_else(|| bad("bad escape"))?;
        let details: Details = serde_json::from_str(&raw).map_err(|e| bad(&format!("bad details: {e}")))?;
        let matches = matches!(
            (&details, action),
            (Details::Add { .. }, Action::Add)
                | (Details::Remove { .. }, Action::Remove)
                | (Details::Clone { .. }, Action::Clone)
                | (Details::Rate { .. }, Action::Rate)
                | (Details::Advertise { .. }, Action::Advertise)
        );
        if !matches {
            return Err(bad("details do not match action"));
        }
        Ok(EditEvent {
            seq,
            timestamp,
            actor,
            action,
            object,
            details,
        })
    }
}

/// In-memory event list, mirrored to a file when one is attached.
#[derive(Debug, Default)]
pub struct Journal {
    events: Vec<EditEvent>,
    sink: Option<(PathBuf, File)>,
}

impl Journal {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reads all events of a journal file; a missing file is an empty journal.
    pub fn read(path: &Path) -> Result<Vec<EditEvent>, JournalError> {
        let file = match File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        Self::read_from(BufReader::new(file))
    }

    pub fn read_from(r: impl BufRead) -> Result<Vec<EditEvent>, JournalError> {
        let mut out = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let seq = out.len() as u64 + 1;
            out.push(EditEvent::parse_line(&line, seq)?);
        }
        Ok(out)
    }

    pub fn parse(text: &str) -> Result<Vec<EditEvent>, JournalError> {
        Self::read_from(text.as_bytes())
    }

    /// Appends future events to `path`.
    pub fn attach(&mut self, path: &Path) -> Result<(), JournalError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        self.sink = Some((path.to_path_buf(), file));
        Ok(())
    }

    pub fn path(&self) -> Option<&Path> {
        self.sink.as_ref().map(|(p, _)| p.as_path())
    }

    pub fn next_seq(&self) -> u64 {
        self.events.len() as u64 + 1
    }

    /// Writes and flushes the event before it becomes visible.
    pub fn append(&mut self, e: EditEvent) -> Result<(), JournalError> {
        if let Some((_, f)) = &mut self.sink {
            writeln!(f, "{e}")?;
            f.flush()?;
        }
        self.events.push(e);
        Ok(())
    }

    pub fn events(&self) -> &[EditEvent] {
        &self.events
    }

    pub fn text(&self) -> String {
        let mut s = String::new();
        for e in &self.events {
            s.push_str(&e.to_string());
            s.push('\n');
        }
        s
    }
}
