//! Export of one project from a Jira-compatible REST API (`/rest/api/2`)
//! into an [`IssueDump`].
//!
//! Only the fields the link map needs are requested. Priority, issue type
//! and link type names are mapped through fixed tables; link phrases are
//! read from the side of the link the issue is on, so `is duplicated by` on
//! one issue and `duplicates` on the other land on the same stored link.

use std::collections::HashSet;
use std::thread;
use std::time::Duration;

use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use super::{DumpError, IssueDump};
use crate::model::{Issue, IssueKey, IssueType, Link, LinkOrigin, LinkType, Priority, ReleaseOrder};

pub const TOKEN_ENV: &str = "JIRA_TOKEN";
pub const BASE_URL_ENV: &str = "JIRA_BASE_URL";
pub const USER_ENV: &str = "JIRA_USER";

const SEARCH_FIELDS: &str = "summary,description,comment,priority,fixVersions,issuelinks,issuetype,status";

/// Rank used when Jira reports no priority or one the table does not know.
pub const FALLBACK_PRIORITY: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Credentials {
    Anonymous,
    Bearer(String),
    Basic { user: String, token: String },
}

impl Credentials {
    /// Basic auth when a user is given, bearer token otherwise.
    pub fn from_parts(user: Option<String>, token: Option<String>) -> Self {
        match (user, token) {
            (Some(user), Some(token)) => Credentials::Basic { user, token },
            (None, Some(token)) => Credentials::Bearer(token),
            _ => Credentials::Anonymous,
        }
    }

    fn header(&self) -> Option<String> {
        use base64::Engine;
        let encode = |text: &str| base64::engine::general_purpose::STANDARD.encode(text);
        match self {
            Credentials::Anonymous => None,
            Credentials::Bearer(token) => Some(format!("Bearer {token}")),
            Credentials::Basic { user, token } => Some(format!("Basic {}", encode(&format!("{user}:{token}")))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("HTTP status {0}")]
    Status(u16),
    #[error("network error: {0}")]
    Network(String),
    #[error("invalid response body: {0}")]
    Body(String),
}

impl TransportError {
    fn retryable(&self) -> bool {
        match self {
            TransportError::Status(s) => *s == 429 || *s >= 500,
            TransportError::Network(_) => true,
            TransportError::Body(_) => false,
        }
    }
}

/// GET of a path (with query) relative to the tracker base URL.
pub trait JiraTransport {
    fn get(&self, path_and_query: &str) -> Result<Value, TransportError>;
}

pub struct HttpTransport {
    agent: ureq::Agent,
    base_url: String,
    auth: Option<String>,
}

impl HttpTransport {
    pub fn new(base_url: &str, credentials: &Credentials) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        Self {
            agent,
            base_url: base_url.trim_end_matches('/').to_string(),
            auth: credentials.header(),
        }
    }
}

impl JiraTransport for HttpTransport {
    fn get(&self, path_and_query: &str) -> Result<Value, TransportError> {
        let mut request = self
            .agent
            .get(format!("{}{}", self.base_url, path_and_query))
            .header("Accept", "application/json");
        if let Some(auth) = &self.auth {
            request = request.header("Authorization", auth);
        }
        let mut response = request.call().map_err(|e| TransportError::Network(e.to_string()))?;
        let status = response.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(TransportError::Status(status));
        }
        response
            .body_mut()
            .with_config()
            .limit(256 * 1024 * 1024)
            .read_json::<Value>()
            .map_err(|e| TransportError::Body(e.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum JiraError {
    #[error("authentication failed (HTTP {status})")]
    Auth { status: u16 },
    #[error("{error} (after {retries} retries)")]
    Transport { error: TransportError, retries: u32 },
    #[error("pagination inconsistency: total changed from {expected} to {found} during fetch")]
    PaginationShift { expected: u64, found: u64 },
    #[error("pagination inconsistency: empty page at offset {start_at} of {total}")]
    PaginationGap { start_at: u64, total: u64 },
    #[error("unexpected response shape: {0}")]
    Malformed(String),
    #[error(transparent)]
    Dump(#[from] DumpError),
}

#[derive(Debug, Clone)]
pub struct FetchOptions {
    pub page_size: u32,
    pub max_retries: u32,
    pub retry_delay: Duration,
}

impl Default for FetchOptions {
    fn default() -> Self {
        Self {
            page_size: 100,
            max_retries: 3,
            retry_delay: Duration::from_millis(500),
        }
    }
}

#[derive(Debug)]
pub struct FetchOutcome {
    pub dump: IssueDump,
    pub warnings: Vec<String>,
}

/// Maps a Jira priority name to a rank. Accepts the canonical labels of
/// [`Priority`], `Pn: ...` style names and the stock Jira scheme.
pub fn priority_from_name(name: &str) -> Option<Priority> {
    let name = name.trim();
    if let Some(rest) = name.strip_prefix(['P', 'p']) {
        let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
        let after = &rest[digits.len()..];
        if !digits.is_empty() && (after.is_empty() || after.starts_with([':', ' ', '-'])) {
            return digits.parse().ok().and_then(|r| Priority::new(r).ok());
        }
    }
    if let Some(p) = Priority::from_label(name) {
        return Some(p);
    }
    let rank = match name.to_ascii_lowercase().as_str() {
        "highest" => 0,
        "high" => 1,
        "major" => 2,
        "medium" | "normal" => 3,
        "minor" => 4,
        "trivial" | "lowest" => 5,
        _ => return None,
    };
    Priority::new(rank).ok()
}

pub fn issue_type_from_name(name: &str) -> IssueType {
    match name.trim().to_ascii_lowercase().as_str() {
        "epic" => IssueType::Epic,
        "story" | "user story" => IssueType::Story,
        "task" | "sub-task" | "subtask" | "technical task" => IssueType::Task,
        "bug" | "defect" => IssueType::Bug,
        "new feature" | "feature" | "feature request" | "suggestion" | "improvement" => {
            IssueType::FeatureRequest
        }
        _ => IssueType::Other,
    }
}

/// Which endpoint of a mapped link is the issue reporting it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkSide {
    /// The reporting issue is the stored source.
    Source,
    /// The other issue is the stored source.
    Target,
}

/// Maps the phrase shown on the reporting issue's side of a Jira link.
pub fn link_from_phrase(phrase: &str) -> Option<(LinkType, LinkSide)> {
    use LinkSide::*;
    use LinkType::*;
    Some(match phrase.trim().to_ascii_lowercase().as_str() {
        "duplicates" | "is a duplicate of" => (Duplicates, Source),
        "is duplicated by" => (Duplicates, Target),
        "requires" | "depends on" | "is blocked by" => (Requires, Source),
        "is required by" | "is required for" | "is depended on by" | "blocks" => (Requires, Target),
        "is parent of" | "is parent task of" | "is epic of" | "work breakdown" | "is broken down into" => {
            (ParentChild, Source)
        }
        "is child of" | "is subtask of" | "is part of" | "is work breakdown of" => (ParentChild, Target),
        "relates to" | "is related to" | "is similar to" | "similar" | "relates" => (Relates, Source),
        _ => return None,
    })
}

#[derive(Deserialize)]
struct Named {
    name: Option<String>,
}

#[derive(Deserialize)]
struct CommentBody {
    body: Option<String>,
}

#[derive(Deserialize, Default)]
struct CommentPage {
    #[serde(default)]
    comments: Vec<CommentBody>,
}

#[derive(Deserialize)]
struct LinkedIssue {
    key: String,
}

#[derive(Deserialize)]
struct JiraLinkType {
    name: Option<String>,
    inward: Option<String>,
    outward: Option<String>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct JiraLink {
    #[serde(rename = "type")]
    link_type: JiraLinkType,
    inward_issue: Option<LinkedIssue>,
    outward_issue: Option<LinkedIssue>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct Fields {
    summary: Option<String>,
    description: Option<String>,
    comment: Option<CommentPage>,
    priority: Option<Named>,
    #[serde(default)]
    fix_versions: Vec<Named>,
    #[serde(default)]
    issuelinks: Vec<JiraLink>,
    issuetype: Option<Named>,
    status: Option<Named>,
}

#[derive(Deserialize)]
struct JiraIssue {
    key: String,
    fields: Fields,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct SearchPage {
    total: u64,
    #[serde(default)]
    issues: Vec<JiraIssue>,
}

fn get_with_retry(
    transport: &dyn JiraTransport,
    path: &str,
    options: &FetchOptions,
) -> Result<Value, JiraError> {
    let mut retries = 0;
    loop {
        match transport.get(path) {
            Ok(v) => return Ok(v),
            Err(TransportError::Status(status @ (401 | 403))) => return Err(JiraError::Auth { status }),
            Err(e) if e.retryable() && retries < options.max_retries => {
                retries += 1;
                tracing::warn!(%path, retries, error = %e, "retrying tracker request");
                thread::sleep(options.retry_delay * retries);
            }
            Err(error) => return Err(JiraError::Transport { error, retries }),
        }
    }
}

fn encode_query(text: &str) -> String {
    text.bytes()
        .map(|b| match b {
            b'A'..=b'Z' | b'a'..=b'z' | b'0'..=b'9' | b'-' | b'_' | b'.' | b'~' => (b as char).to_string(),
            _ => format!("%{b:02X}"),
        })
        .collect()
}

/// Fetches every issue of `project` with its release order and links.
pub fn fetch_project(
    transport: &dyn JiraTransport,
    project: &str,
    options: &FetchOptions,
) -> Result<FetchOutcome, JiraError> {
    let mut warnings = Vec::new();
    let versions = get_with_retry(transport, &format!("/rest/api/2/project/{project}/versions"), options)?;
    let versions: Vec<Named> =
        serde_json::from_value(versions).map_err(|e| JiraError::Malformed(format!("versions: {e}")))?;
    let mut releases: Vec<String> = Vec::new();
    for name in versions.into_iter().filter_map(|v| v.name) {
        if !releases.contains(&name) {
            releases.push(name);
        }
    }
    let order = ReleaseOrder::new(project, releases).map_err(|e| JiraError::Malformed(e.to_string()))?;

    let jql = encode_query(&format!("project = {project} ORDER BY key ASC"));
    let mut raw_issues: Vec<JiraIssue> = Vec::new();
    let mut expected_total: Option<u64> = None;
    loop {
        let start_at = raw_issues.len() as u64;
        let path = format!(
            "/rest/api/2/search?jql={jql}&startAt={start_at}&maxResults={}&fields={SEARCH_FIELDS}",
            options.page_size
        );
        let page: SearchPage = serde_json::from_value(get_with_retry(transport, &path, options)?)
            .map_err(|e| JiraError::Malformed(format!("search page at {start_at}: {e}")))?;
        match expected_total {
            None => expected_total = Some(page.total),
            Some(expected) if expected != page.total => {
                return Err(JiraError::PaginationShift {
                    expected,
                    found: page.total,
                })
            }
            _ => {}
        }
        if start_at >= page.total {
            break;
        }
        if page.issues.is_empty() {
            return Err(JiraError::PaginationGap {
                start_at,
                total: page.total,
            });
        }
        raw_issues.extend(page.issues);
        if raw_issues.len() as u64 >= page.total {
            break;
        }
    }

    let mut issues = Vec::new();
    let mut keys = HashSet::new();
    let mut pending_links: Vec<(IssueKey, IssueKey, LinkType)> = Vec::new();
    for raw in raw_issues {
        let key: IssueKey = match raw.key.parse() {
            Ok(k) => k,
            Err(_) => {
                warnings.push(format!("skipped issue with malformed key {:?}", raw.key));
                continue;
            }
        };
        if key.project() != project {
            warnings.push(format!("skipped {key}: not in project {project}"));
            continue;
        }
        if !keys.insert(key.clone()) {
            warnings.push(format!("skipped repeated issue {key}"));
            continue;
        }
        let f = raw.fields;
        let priority = match f.priority.and_then(|p| p.name) {
            Some(name) => priority_from_name(&name).unwrap_or_else(|| {
                warnings.push(format!("{key}: unknown priority {name:?}, using rank {FALLBACK_PRIORITY}"));
                Priority::new(FALLBACK_PRIORITY.into()).expect("valid rank")
            }),
            None => {
                warnings.push(format!("{key}: no priority, using rank {FALLBACK_PRIORITY}"));
                Priority::new(FALLBACK_PRIORITY.into()).expect("valid rank")
            }
        };
        let release = f.fix_versions.into_iter().filter_map(|v| v.name).next();
        let release = match release {
            Some(r) if !order.contains(&r) => {
                warnings.push(format!("{key}: fix version {r:?} is not a project version, left unscheduled"));
                None
            }
            other => other,
        };
        for link in f.issuelinks {
            let (phrase, other) = match (link.outward_issue, link.inward_issue) {
                (Some(o), _) => (link.link_type.outward, o.key),
                (None, Some(i)) => (link.link_type.inward, i.key),
                (None, None) => continue,
            };
            let mapped = phrase
                .as_deref()
                .and_then(link_from_phrase)
                .or_else(|| link.link_type.name.as_deref().and_then(link_from_phrase));
            let (link_type, side) = mapped.unwrap_or_else(|| {
                warnings.push(format!(
                    "{key}: unmapped link type {:?}, stored as relates",
                    phrase.as_deref().or(link.link_type.name.as_deref()).unwrap_or("")
                ));
                (LinkType::Relates, LinkSide::Source)
            });
            let Ok(other) = other.parse::<IssueKey>() else {
                warnings.push(format!("{key}: skipped link to malformed key {other:?}"));
                continue;
            };
            let (source, target) = match side {
                LinkSide::Source => (key.clone(), other),
                LinkSide::Target => (other, key.clone()),
            };
            pending_links.push((source, target, link_type));
        }
        issues.push(Issue {
            project: project.to_string(),
            issue_type: f
                .issuetype
                .and_then(|t| t.name)
                .map_or(IssueType::Other, |n| issue_type_from_name(&n)),
            status: f.status.and_then(|s| s.name).unwrap_or_default(),
            title: f.summary.unwrap_or_default(),
            description: f.description.unwrap_or_default(),
            comments: f
                .comment
                .unwrap_or_default()
                .comments
                .into_iter()
                .filter_map(|c| c.body)
                .collect(),
            priority,
            release,
            key,
        });
    }

    let mut seen = HashSet::new();
    let mut links = Vec::new();
    for (source, target, link_type) in pending_links {
        if source == target {
            continue;
        }
        if let Some(missing) = [&source, &target].into_iter().find(|k| !keys.contains(*k)) {
            warnings.push(format!("dropped link {source} -> {target}: {missing} is outside the export"));
            continue;
        }
        let link = Link {
            source,
            target,
            link_type,
            origin: LinkOrigin::Imported,
        };
        if seen.insert(link.id()) {
            links.push(link);
        }
    }

    let dump = IssueDump {
        projects: vec![order],
        issues,
        links,
    };
    dump.validate()?;
    Ok(FetchOutcome { dump, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;
    use std::cell::RefCell;
    use std::collections::VecDeque;

    /// Serves canned responses in order and records the requested paths.
    struct Scripted {
        responses: RefCell<VecDeque<Result<Value, TransportError>>>,
        requests: RefCell<Vec<String>>,
    }

    impl Scripted {
        fn new(responses: Vec<Result<Value, TransportError>>) -> Self {
            Self {
                responses: RefCell::new(responses.into()),
                requests: RefCell::new(Vec::new()),
            }
        }
    }

    impl JiraTransport for Scripted {
        fn get(&self, path: &str) -> Result<Value, TransportError> {
            self.requests.borrow_mut().push(path.to_string());
            self.responses.borrow_mut().pop_front().expect("unexpected request")
        }
    }

    fn quick() -> FetchOptions {
        FetchOptions {
            page_size: 2,
            max_retries: 2,
            retry_delay: Duration::ZERO,
        }
    }

    fn raw_issue(key: &str, links: Value) -> Value {
        json!({"key": key, "fields": {
            "summary": format!("title {key}"),
            "description": null,
            "comment": {"comments": [{"body": "see QT-1"}]},
            "priority": {"name": "P1: Critical"},
            "fixVersions": [{"name": "6.0"}, {"name": "6.1"}],
            "issuelinks": links,
            "issuetype": {"name": "Bug"},
            "status": {"name": "Open"}
        }})
    }

    fn dup_type() -> Value {
        json!({"name": "Duplicate", "inward": "is duplicated by", "outward": "duplicates"})
    }

    #[test]
    fn empty_project() {
        let t = Scripted::new(vec![Ok(json!([])), Ok(json!({"startAt": 0, "maxResults": 2, "total": 0, "issues": []}))]);
        let out = fetch_project(&t, "QT", &quick()).unwrap();
        assert!(out.dump.issues.is_empty());
        assert!(out.dump.projects[0].releases().is_empty());
    }

    #[test]
    fn paginates_and_maps_fields() {
        let t = Scripted::new(vec![
            Ok(json!([{"name": "6.0"}, {"name": "6.1"}])),
            Ok(json!({"total": 3, "issues": [
                raw_issue("QT-1", json!([{"type": dup_type(), "inwardIssue": {"key": "QT-2"}}])),
                raw_issue("QT-2", json!([{"type": dup_type(), "outwardIssue": {"key": "QT-1"}}])),
            ]})),
            Ok(json!({"total": 3, "issues": [
                raw_issue("QT-3", json!([{"type": {"name": "Cloners", "inward": "is cloned by", "outward": "clones"},
                                          "outwardIssue": {"key": "QT-1"}},
                                         {"type": dup_type(), "outwardIssue": {"key": "OTHER-4"}}])),
            ]})),
        ]);
        let out = fetch_project(&t, "QT", &quick()).unwrap();
        let requests = t.requests.borrow();
        assert!(requests[1].contains("startAt=0") && requests[2].contains("startAt=2"));
        assert!(requests[1].contains("jql=project%20%3D%20QT%20ORDER%20BY%20key%20ASC"));

        let dump = out.dump;
        assert_eq!(dump.issues.len(), 3);
        let first = &dump.issues[0];
        assert_eq!(first.title, "title QT-1");
        assert_eq!(first.description, "");
        assert_eq!(first.comments, vec!["see QT-1"]);
        assert_eq!(first.priority.rank(), 1);
        assert_eq!(first.release.as_deref(), Some("6.0"));
        assert_eq!(first.issue_type, IssueType::Bug);
        assert_eq!(first.status, "Open");

        // both sides of the duplicate collapse to QT-2 duplicates QT-1
        let dups: Vec<_> = dump.links.iter().filter(|l| l.link_type == LinkType::Duplicates).collect();
        assert_eq!(dups.len(), 1);
        assert_eq!((dups[0].source.to_string(), dups[0].target.to_string()), ("QT-2".into(), "QT-1".into()));
        assert!(dump.links.iter().any(|l| l.link_type == LinkType::Relates && l.source.to_string() == "QT-3"));
        assert!(out.warnings.iter().any(|w| w.contains("clones")));
        assert!(out.warnings.iter().any(|w| w.contains("OTHER-4")));
    }

    #[test]
    fn total_shift_is_an_error() {
        let t = Scripted::new(vec![
            Ok(json!([])),
            Ok(json!({"total": 3, "issues": [raw_issue("QT-1", json!([])), raw_issue("QT-2", json!([]))]})),
            Ok(json!({"total": 4, "issues": [raw_issue("QT-3", json!([]))]})),
        ]);
        assert!(matches!(
            fetch_project(&t, "QT", &quick()),
            Err(JiraError::PaginationShift { expected: 3, found: 4 })
        ));
    }

    #[test]
    fn retries_then_surfaces_count() {
        let t = Scripted::new(vec![
            Err(TransportError::Network("reset".into())),
            Err(TransportError::Status(503)),
            Ok(json!([])),
            Ok(json!({"total": 0, "issues": []})),
        ]);
        assert!(fetch_project(&t, "QT", &quick()).is_ok());

        let t = Scripted::new(vec![
            Err(TransportError::Network("reset".into())),
            Err(TransportError::Network("reset".into())),
            Err(TransportError::Network("reset".into())),
        ]);
        match fetch_project(&t, "QT", &quick()) {
            Err(JiraError::Transport { retries, .. }) => assert_eq!(retries, 2),
            other => panic!("{other:?}"),
        }

        let t = Scripted::new(vec![Err(TransportError::Status(401))]);
        assert!(matches!(fetch_project(&t, "QT", &quick()), Err(JiraError::Auth { status: 401 })));
    }

    #[test]
    fn priority_table_round_trips_names() {
        for p in Priority::all() {
            assert_eq!(priority_from_name(p.label()), Some(p));
            assert_eq!(priority_from_name(&format!("P{}: {}", p.rank(), p.label())), Some(p));
        }
        assert_eq!(priority_from_name("Blocker").map(Priority::rank), Some(0));
        assert_eq!(priority_from_name("Trivial").map(Priority::rank), Some(5));
        assert_eq!(priority_from_name("Not Evaluated"), None);
        assert_eq!(priority_from_name("P9"), None);
        assert_eq!(priority_from_name("Paper"), None);
    }

    #[test]
    fn unknown_priority_falls_back_to_middle() {
        let mut issue = raw_issue("QT-1", json!([]));
        issue["fields"]["priority"] = json!({"name": "Not Evaluated"});
        let t = Scripted::new(vec![Ok(json!([{"name": "6.0"}])), Ok(json!({"total": 1, "issues": [issue]}))]);
        let out = fetch_project(&t, "QT", &quick()).unwrap();
        assert_eq!(out.dump.issues[0].priority.rank(), FALLBACK_PRIORITY);
        assert!(out.warnings.iter().any(|w| w.contains("Not Evaluated")));
    }

    #[test]
    fn both_link_directions_map_to_one_stored_direction() {
        for (outward, inward, t) in [
            ("duplicates", "is duplicated by", LinkType::Duplicates),
            ("depends on", "is depended on by", LinkType::Requires),
            ("is blocked by", "blocks", LinkType::Requires),
            ("requires", "is required by", LinkType::Requires),
            ("is parent of", "is child of", LinkType::ParentChild),
        ] {
            assert_eq!(link_from_phrase(outward), Some((t, LinkSide::Source)));
            assert_eq!(link_from_phrase(inward), Some((t, LinkSide::Target)));
        }
    }

    #[test]
    fn basic_auth_header() {
        let c = Credentials::from_parts(Some("Aladdin".into()), Some("open sesame".into()));
        assert_eq!(c.header().unwrap(), "Basic QWxhZGRpbjpvcGVuIHNlc2FtZQ==");
        assert_eq!(Credentials::from_parts(None, Some("t".into())).header().unwrap(), "Bearer t");
    }
}
