pub mod cli;
pub mod corpus;
pub mod federation;
pub mod fl;
pub mod kb;
pub mod protocol;
pub mod service;
pub mod store;
pub mod valuation;

pub use kb::{Clock, Kb, KbError, LogicalClock, SystemClock};
