//! Fixture generators and reference oracles shared by the test suites.
//!
//! The oracles are deliberately naive and work on plain indices and strings
//! so that they share no code with the implementation they check.

pub mod checks;
pub mod fixtures;
pub mod oracle;

use linkmap_core::IssueKey;

pub fn key(text: &str) -> IssueKey {
    text.parse().expect("fixture key")
}
