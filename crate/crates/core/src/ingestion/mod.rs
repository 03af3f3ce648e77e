//! Getting data in and decisions out: the JSON dump format, the Jira REST
//! fetcher that produces dumps, and the append-only decision log.

mod decisions;
mod dump;
pub mod jira;

pub use decisions::{
    replay, DecisionKind, DecisionLog, DecisionRecord, DecisionSink, LogContents, LogError, Replay,
};
pub use dump::{load_dump, read_dump_file, write_dump, DumpError, IssueDump};
