//! Append-only JSON-lines log of accept/reject decisions.

use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::detection::{Decision, DecisionBook};
use crate::graph::LinkGraph;
use crate::model::{IssueKey, Link, LinkOrigin, LinkType};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionKind {
    Accepted,
    Rejected,
}

/// One line of the decision log. `link_type` is present exactly when the
/// decision is an accept.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub source: IssueKey,
    pub candidate: IssueKey,
    pub decision: DecisionKind,
    #[serde(rename = "type", default, skip_serializing_if = "Option::is_none")]
    pub link_type: Option<LinkType>,
    pub timestamp: DateTime<Utc>,
}

impl DecisionRecord {
    pub fn is_well_formed(&self) -> bool {
        (self.decision == DecisionKind::Accepted) == self.link_type.is_some()
    }
}

/// Destination for decisions as they are taken.
pub trait DecisionSink {
    fn append(&mut self, record: &DecisionRecord) -> io::Result<()>;
}

impl DecisionSink for Vec<DecisionRecord> {
    fn append(&mut self, record: &DecisionRecord) -> io::Result<()> {
        self.push(record.clone());
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum LogError {
    #[error("decision log {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("decision log {path}, line {line}: {message}")]
    Corrupt {
        path: String,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Default)]
pub struct LogContents {
    pub records: Vec<DecisionRecord>,
    pub warnings: Vec<String>,
}

/// File-backed decision log. Each record is written as a single line and
/// synced before `append` returns; a record torn by a crash is dropped the
/// next time the log is opened.
pub struct DecisionLog {
    path: PathBuf,
    file: File,
}

impl DecisionLog {
    pub fn open(path: &Path) -> Result<Self, LogError> {
        let io_err = |source| LogError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(io_err)?;
        let complete = complete_prefix_len(&mut file).map_err(io_err)?;
        if complete < file.metadata().map_err(io_err)?.len() {
            tracing::warn!(path = %path.display(), "dropping torn record at end of decision log");
            file.set_len(complete).map_err(io_err)?;
        }
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Reads every complete record. A missing file is an empty log; an
    /// unterminated last line is reported as a warning and skipped.
    pub fn read(path: &Path) -> Result<LogContents, LogError> {
        let file = match File::open(path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(LogContents::default()),
            Err(source) => {
                return Err(LogError::Io {
                    path: path.display().to_string(),
                    source,
                })
            }
        };
        let mut reader = BufReader::new(file);
        let mut contents = LogContents::default();
        let mut line = String::new();
        let mut number = 0;
        loop {
            line.clear();
            let read = reader.read_line(&mut line).map_err(|source| LogError::Io {
                path: path.display().to_string(),
                source,
            })?;
            if read == 0 {
                break;
            }
            number += 1;
            if !line.ends_with('\n') {
                contents
                    .warnings
                    .push(format!("line {number}: unterminated record skipped"));
                break;
            }
            if line.trim().is_empty() {
                continue;
            }
            let corrupt = |message: String| LogError::Corrupt {
                path: path.display().to_string(),
                line: number,
                message,
            };
            let record: DecisionRecord =
                serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
            if !record.is_well_formed() {
                return Err(corrupt("link type must be present exactly for accepted decisions".into()));
            }
            contents.records.push(record);
        }
        Ok(contents)
    }
}

fn complete_prefix_len(file: &mut File) -> io::Result<u64> {
    let mut bytes = Vec::new();
    file.seek(SeekFrom::Start(0))?;
    file.read_to_end(&mut bytes)?;
    Ok(bytes
        .iter()
        .rposition(|&b| b == b'\n')
        .map_or(0, |i| i as u64 + 1))
}

impl DecisionSink for DecisionLog {
    fn append(&mut self, record: &DecisionRecord) -> io::Result<()> {
        let mut line = serde_json::to_vec(record)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()
    }
}

#[derive(Debug)]
pub struct Replay {
    pub graph: LinkGraph,
    pub book: DecisionBook,
    /// Accepted links that were added to the graph.
    pub applied: usize,
    pub warnings: Vec<String>,
}

/// Re-applies logged decisions on top of `graph`. Records naming unknown
/// issues are skipped with a warning; accepted links already present are
/// left as they are, so replaying twice equals replaying once.
pub fn replay(graph: &LinkGraph, records: &[DecisionRecord]) -> Replay {
    let mut graph = graph.clone();
    let mut book = DecisionBook::default();
    let mut warnings = Vec::new();
    let mut applied = 0;
    for (i, record) in records.iter().enumerate() {
        let missing: Vec<String> = [&record.source, &record.candidate]
            .into_iter()
            .filter(|k| !graph.contains(k))
            .map(ToString::to_string)
            .collect();
        if !missing.is_empty() {
            warnings.push(format!(
                "decision {}: skipped, unknown issue {}",
                i + 1,
                missing.join(", ")
            ));
            continue;
        }
        let decision = match (record.decision, record.link_type) {
            (DecisionKind::Accepted, Some(link_type)) => Decision::Accept(link_type),
            (DecisionKind::Rejected, None) => Decision::Reject,
            _ => {
                warnings.push(format!("decision {}: skipped, malformed record", i + 1));
                continue;
            }
        };
        if let Decision::Accept(link_type) = decision {
            if graph
                .link_between(&record.source, &record.candidate, link_type)
                .is_none()
            {
                let added = Link::new(
                    record.source.clone(),
                    record.candidate.clone(),
                    link_type,
                    LinkOrigin::UserAccepted,
                )
                .map_err(|e| e.to_string())
                .and_then(|link| graph.add_link(link).map_err(|e| e.to_string()));
                match added {
                    Ok(next) => {
                        graph = next;
                        applied += 1;
                    }
                    Err(e) => {
                        warnings.push(format!("decision {}: skipped, {e}", i + 1));
                        continue;
                    }
                }
            }
        }
        book.record(&record.source, &record.candidate, decision);
    }
    Replay {
        graph,
        book,
        applied,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Issue, IssueType};

    fn key(s: &str) -> IssueKey {
        s.parse().unwrap()
    }

    fn graph() -> LinkGraph {
        LinkGraph::build(
            ["Q-1", "Q-2", "Q-3"].map(|k| Issue::new(key(k), IssueType::Bug, k)),
            vec![],
        )
        .unwrap()
    }

    fn accepted(a: &str, b: &str, t: LinkType) -> DecisionRecord {
        DecisionRecord {
            source: key(a),
            candidate: key(b),
            decision: DecisionKind::Accepted,
            link_type: Some(t),
            timestamp: "2026-01-02T03:04:05Z".parse().unwrap(),
        }
    }

    fn rejected(a: &str, b: &str) -> DecisionRecord {
        DecisionRecord {
            decision: DecisionKind::Rejected,
            link_type: None,
            ..accepted(a, b, LinkType::Relates)
        }
    }

    #[test]
    fn record_wire_format() {
        let json = serde_json::to_string(&accepted("Q-1", "Q-2", LinkType::Duplicates)).unwrap();
        assert_eq!(
            json,
            r#"{"source":"Q-1","candidate":"Q-2","decision":"accepted","type":"duplicates","timestamp":"2026-01-02T03:04:05Z"}"#
        );
        let json = serde_json::to_string(&rejected("Q-1", "Q-3")).unwrap();
        assert!(!json.contains("type"));
    }

    #[test]
    fn append_then_replay_on_fresh_graph() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("decisions.jsonl");
        let mut log = DecisionLog::open(&path).unwrap();
        log.append(&accepted("Q-1", "Q-2", LinkType::Duplicates)).unwrap();
        log.append(&rejected("Q-1", "Q-3")).unwrap();
        drop(log);

        let contents = DecisionLog::read(&path).unwrap();
        assert_eq!(contents.records.len(), 2);
        let out = replay(&graph(), &contents.records);
        assert!(out.warnings.is_empty());
        let link = out.graph.link_between(&key("Q-1"), &key("Q-2"), LinkType::Duplicates).unwrap();
        assert_eq!(link.origin, LinkOrigin::UserAccepted);
        assert!(out.book.is_rejected(&key("Q-3"), &key("Q-1")));
    }

    #[test]
    fn torn_tail_is_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("decisions.jsonl");
        let mut log = DecisionLog::open(&path).unwrap();
        log.append(&accepted("Q-1", "Q-2", LinkType::Requires)).unwrap();
        drop(log);
        // simulate a crash halfway through the second append
        let second = serde_json::to_string(&rejected("Q-1", "Q-3")).unwrap();
        OpenOptions::new()
            .append(true)
            .open(&path)
            .unwrap()
            .write_all(&second.as_bytes()[..second.len() / 2])
            .unwrap();

        let contents = DecisionLog::read(&path).unwrap();
        assert_eq!(contents.records.len(), 1);
        assert_eq!(contents.warnings.len(), 1);

        let mut log = DecisionLog::open(&path).unwrap();
        log.append(&rejected("Q-2", "Q-3")).unwrap();
        let contents = DecisionLog::read(&path).unwrap();
        assert!(contents.warnings.is_empty());
        assert_eq!(contents.records.len(), 2);
        assert_eq!(contents.records[1], rejected("Q-2", "Q-3"));
    }

    #[test]
    fn corrupt_middle_line_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("decisions.jsonl");
        std::fs::write(&path, "not json\n{}\n").unwrap();
        assert!(matches!(DecisionLog::read(&path), Err(LogError::Corrupt { line: 1, .. })));
        let bad = r#"{"source":"Q-1","candidate":"Q-2","decision":"accepted","timestamp":"2026-01-02T03:04:05Z"}"#;
        std::fs::write(&path, format!("{bad}\n")).unwrap();
        assert!(matches!(DecisionLog::read(&path), Err(LogError::Corrupt { .. })));
    }

    #[test]
    fn missing_log_is_empty() {
        let dir = tempfile::tempdir().unwrap();
        assert!(DecisionLog::read(&dir.path().join("none.jsonl")).unwrap().records.is_empty());
    }

    #[test]
    fn replay_skips_unknown_keys_and_is_idempotent() {
        let records = vec![
            accepted("Q-1", "Q-2", LinkType::Duplicates),
            accepted("Q-1", "Q-99", LinkType::Requires),
            rejected("Q-2", "Q-3"),
        ];
        let once = replay(&graph(), &records);
        assert_eq!(once.warnings.len(), 1);
        assert!(once.warnings[0].contains("Q-99"));
        let twice = replay(&once.graph, &records);
        assert_eq!(twice.applied, 0);
        assert_eq!(
            once.graph.links().collect::<Vec<_>>(),
            twice.graph.links().collect::<Vec<_>>()
        );
        assert_eq!(once.book, twice.book);
    }
}
