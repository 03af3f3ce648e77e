use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{GraphError, LinkGraph};
use crate::model::{Issue, IssueKey, Link, LinkOrigin, LinkType, ReleaseOrder};

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("dump parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("dump integrity error at {location}: {message}")]
    Integrity { location: String, message: String },
}

fn integrity(location: impl Into<String>, message: impl Into<String>) -> DumpError {
    DumpError::Integrity {
        location: location.into(),
        message: message.into(),
    }
}

#[derive(Serialize, Deserialize)]
struct ProjectDoc {
    code: String,
    #[serde(default)]
    releases: Vec<String>,
}

fn is_imported(origin: &LinkOrigin) -> bool {
    *origin == LinkOrigin::Imported
}

#[derive(Serialize, Deserialize)]
struct LinkDoc {
    source: IssueKey,
    target: IssueKey,
    #[serde(rename = "type")]
    link_type: LinkType,
    #[serde(default, skip_serializing_if = "is_imported")]
    origin: LinkOrigin,
}

#[derive(Serialize, Deserialize)]
struct DumpDoc {
    projects: Vec<ProjectDoc>,
    #[serde(default)]
    issues: Vec<Issue>,
    #[serde(default)]
    links: Vec<LinkDoc>,
}

/// Validated tracker export: release orders, issues and links with full
/// referential integrity.
#[derive(Debug, Clone, PartialEq)]
pub struct IssueDump {
    pub projects: Vec<ReleaseOrder>,
    pub issues: Vec<Issue>,
    pub links: Vec<Link>,
}

impl IssueDump {
    /// Checks the invariants `load_dump` guarantees.
    pub fn validate(&self) -> Result<(), DumpError> {
        let mut orders: HashMap<&str, &ReleaseOrder> = HashMap::new();
        for (i, order) in self.projects.iter().enumerate() {
            if orders.insert(order.project(), order).is_some() {
                return Err(integrity(
                    format!("projects[{i}]"),
                    format!("project {} is declared twice", order.project()),
                ));
            }
        }
        let mut keys: HashSet<&IssueKey> = HashSet::new();
        for (i, issue) in self.issues.iter().enumerate() {
            let at = || format!("issues[{i}] ({})", issue.key);
            let Some(order) = orders.get(issue.project.as_str()) else {
                return Err(integrity(at(), format!("project {} is not declared", issue.project)));
            };
            if issue.key.project() != issue.project {
                return Err(integrity(
                    at(),
                    format!("key does not belong to project {}", issue.project),
                ));
            }
            if let Some(release) = &issue.release {
                if !order.contains(release) {
                    return Err(integrity(
                        at(),
                        format!("release {release:?} is not in the release order of {}", issue.project),
                    ));
                }
            }
            if !keys.insert(&issue.key) {
                return Err(integrity(at(), format!("issue {} is listed twice", issue.key)));
            }
        }
        let mut seen = HashSet::new();
        for (i, link) in self.links.iter().enumerate() {
            let at = format!("links[{i}]");
            for end in [&link.source, &link.target] {
                if !keys.contains(end) {
                    return Err(integrity(at, format!("link endpoint {end} is not a declared issue")));
                }
            }
            if link.source == link.target {
                return Err(integrity(at, format!("link from {} to itself", link.source)));
            }
            if !seen.insert(link.id()) {
                return Err(integrity(at, format!("duplicate link {link}")));
            }
        }
        Ok(())
    }

    /// Release orders keyed by project code.
    pub fn orders(&self) -> BTreeMap<String, ReleaseOrder> {
        self.projects
            .iter()
            .map(|o| (o.project().to_string(), o.clone()))
            .collect()
    }

    pub fn to_graph(&self) -> Result<LinkGraph, GraphError> {
        LinkGraph::build(self.issues.iter().cloned(), self.links.iter().cloned())
    }
}

/// Parses and validates a dump document.
pub fn load_dump(reader: impl Read) -> Result<IssueDump, DumpError> {
    let doc: DumpDoc = serde_json::from_reader(reader).map_err(|e| DumpError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let projects = doc
        .projects
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            ReleaseOrder::new(p.code, p.releases)
                .map_err(|e| integrity(format!("projects[{i}]"), e.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let links = doc
        .links
        .into_iter()
        .map(|l| Link {
            source: l.source,
            target: l.target,
            link_type: l.link_type,
            origin: l.origin,
        })
        .collect();
    let dump = IssueDump {
        projects,
        issues: doc.issues,
        links,
    };
    dump.validate()?;
    Ok(dump)
}

pub fn read_dump_file(path: &Path) -> Result<IssueDump, DumpError> {
    let file = File::open(path).map_err(|source| DumpError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_dump(BufReader::new(file))
}

/// Writes a dump in the same format `load_dump` reads.
pub fn write_dump(dump: &IssueDump, writer: impl Write) -> serde_json::Result<()> {
    let doc = DumpDoc {
        projects: dump
            .projects
            .iter()
            .map(|o| ProjectDoc {
                code: o.project().to_string(),
                releases: o.releases().to_vec(),
            })
            .collect(),
        issues: dump.issues.clone(),
        links: dump
            .links
            .iter()
            .map(|l| LinkDoc {
                source: l.source.clone(),
                target: l.target.clone(),
                link_type: l.link_type,
                origin: l.origin,
            })
            .collect(),
    };
    serde_json::to_writer_pretty(writer, &doc)
}
