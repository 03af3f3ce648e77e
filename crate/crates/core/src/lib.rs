//! Issue link maps over an issue tracker dump.
//!
//! The crate is organised bottom-up: [`model`] holds the shared domain types,
//! [`graph`] keeps the link multigraph as versioned snapshots, [`detection`]
//! recommends missing links, [`consistency`] checks release plans,
//! [`ingestion`] reads dumps, Jira projects and the decision log, and
//! [`service`] ties them together into the views served over HTTP and
//! printed by the CLI.

pub mod consistency;
pub mod detection;
pub mod graph;
pub mod ingestion;
pub mod model;
pub mod service;

pub use model::{Issue, IssueKey, IssueType, Link, LinkOrigin, LinkType, Priority, ReleaseOrder};
