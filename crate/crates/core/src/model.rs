//! Domain types shared across the crate: issue keys, priorities, release
//! orders, issues and typed links.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("malformed issue key {0:?}")]
    MalformedKey(String),
    #[error("malformed project code {0:?}")]
    MalformedProject(String),
    #[error("priority rank {0} is outside 0..=5")]
    InvalidPriority(i64),
    #[error("release {release:?} is listed twice for project {project}")]
    DuplicateRelease { project: String, release: String },
    #[error("release {release:?} is not in the release order of project {project}")]
    UnknownRelease { project: String, release: String },
    #[error("unknown issue type {0:?}")]
    UnknownIssueType(String),
    #[error("unknown link type {0:?}")]
    UnknownLinkType(String),
    #[error("link from {0} to itself")]
    SelfLink(IssueKey),
}

pub(crate) fn is_project_code(code: &str) -> bool {
    let mut chars = code.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_uppercase())
        && chars.all(|c| c.is_ascii_uppercase() || c.is_ascii_digit())
}

/// Tracker issue identifier in canonical `PROJECT-NUMBER` form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IssueKey {
    project: String,
    number: u64,
}

impl IssueKey {
    pub fn new(project: impl Into<String>, number: u64) -> Result<Self, ModelError> {
        let project = project.into();
        if !is_project_code(&project) {
            return Err(ModelError::MalformedProject(project));
        }
        if number == 0 {
            return Err(ModelError::MalformedKey(format!("{project}-0")));
        }
        Ok(Self { project, number })
    }

    pub fn project(&self) -> &str {
        &self.project
    }

    pub fn number(&self) -> u64 {
        self.number
    }
}

/// Parses a key in canonical form only: uppercase project code, a single
/// dash, and a positive number without leading zeros.
pub fn parse_issue_key(text: &str) -> Result<IssueKey, ModelError> {
    let malformed = || ModelError::MalformedKey(text.to_string());
    let (project, number) = text.split_once('-').ok_or_else(malformed)?;
    if !is_project_code(project)
        || number.is_empty()
        || !number.bytes().all(|b| b.is_ascii_digit())
        || number.starts_with('0')
    {
        return Err(malformed());
    }
    let number = number.parse::<u64>().map_err(|_| malformed())?;
    Ok(IssueKey {
        project: project.to_string(),
        number,
    })
}

impl FromStr for IssueKey {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_issue_key(s)
    }
}

impl fmt::Display for IssueKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.project, self.number)
    }
}

impl Serialize for IssueKey {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for IssueKey {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse_issue_key(&text).map_err(serde::de::Error::custom)
    }
}

const PRIORITY_LABELS: [&str; 6] = [
    "Blocker",
    "Critical",
    "Important",
    "Somewhat important",
    "Low",
    "Not important",
];

/// Six ranked priority levels, rank 0 being the most urgent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Priority(u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorityCmp {
    Higher,
    Equal,
    Lower,
}

impl Priority {
    pub const LEVELS: u8 = 6;

    pub fn new(rank: i64) -> Result<Self, ModelError> {
        u8::try_from(rank)
            .ok()
            .filter(|r| *r < Self::LEVELS)
            .map(Priority)
            .ok_or(ModelError::InvalidPriority(rank))
    }

    pub fn rank(self) -> u8 {
        self.0
    }

    pub fn label(self) -> &'static str {
        PRIORITY_LABELS[self.0 as usize]
    }

    /// Inverse of [`Priority::label`], ignoring case.
    pub fn from_label(label: &str) -> Option<Self> {
        PRIORITY_LABELS
            .iter()
            .position(|l| l.eq_ignore_ascii_case(label.trim()))
            .map(|i| Priority(i as u8))
    }

    pub fn all() -> impl Iterator<Item = Priority> {
        (0..Self::LEVELS).map(Priority)
    }
}

/// How `a` relates to `b`: `Higher` means `a` is more urgent.
pub fn compare_priority(a: Priority, b: Priority) -> PriorityCmp {
    match a.0.cmp(&b.0) {
        Ordering::Less => PriorityCmp::Higher,
        Ordering::Equal => PriorityCmp::Equal,
        Ordering::Greater => PriorityCmp::Lower,
    }
}

impl Serialize for Priority {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_u8(self.0)
    }
}

impl<'de> Deserialize<'de> for Priority {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rank = i64::deserialize(deserializer)?;
        Priority::new(rank).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Priority {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{} {}", self.0, self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ReleaseCmp {
    Earlier,
    Same,
    Later,
    Uncomparable,
}

/// Per-project release sequence, earliest first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReleaseOrder {
    project: String,
    releases: Vec<String>,
}

impl ReleaseOrder {
    pub fn new(project: impl Into<String>, releases: Vec<String>) -> Result<Self, ModelError> {
        let project = project.into();
        if !is_project_code(&project) {
            return Err(ModelError::MalformedProject(project));
        }
        for (i, name) in releases.iter().enumerate() {
            if releases[..i].contains(name) {
                return Err(ModelError::DuplicateRelease {
                    project,
                    release: name.clone(),
                });
            }
        }
        Ok(Self { project, releases })
    }

    pub fn project(&self) -> &str {
        &self.project
    }

    pub fn releases(&self) -> &[String] {
        &self.releases
    }

    pub fn position(&self, release: &str) -> Option<usize> {
        self.releases.iter().position(|r| r == release)
    }

    pub fn contains(&self, release: &str) -> bool {
        self.position(release).is_some()
    }

    /// Slot of an optional release; unscheduled issues sort after every
    /// named release.
    fn slot(&self, release: Option<&str>) -> Result<usize, ModelError> {
        match release {
            None => Ok(self.releases.len()),
            Some(name) => self.position(name).ok_or_else(|| ModelError::UnknownRelease {
                project: self.project.clone(),
                release: name.to_string(),
            }),
        }
    }

    /// Compares two releases of this project. Never `Uncomparable`.
    pub fn compare(&self, a: Option<&str>, b: Option<&str>) -> Result<ReleaseCmp, ModelError> {
        let (a, b) = (self.slot(a)?, self.slot(b)?);
        Ok(match a.cmp(&b) {
            Ordering::Less => ReleaseCmp::Earlier,
            Ordering::Equal => ReleaseCmp::Same,
            Ordering::Greater => ReleaseCmp::Later,
        })
    }
}

/// Compares releases that may come from different projects' orders.
/// Releases from different orders are `Uncomparable`.
pub fn compare_release(
    a: Option<&str>,
    a_order: &ReleaseOrder,
    b: Option<&str>,
    b_order: &ReleaseOrder,
) -> Result<ReleaseCmp, ModelError> {
    a_order.slot(a)?;
    b_order.slot(b)?;
    if a_order.project != b_order.project {
        return Ok(ReleaseCmp::Uncomparable);
    }
    a_order.compare(a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IssueType {
    Epic,
    Story,
    Task,
    Bug,
    FeatureRequest,
    Other,
}

impl IssueType {
    pub const ALL: [IssueType; 6] = [
        IssueType::Epic,
        IssueType::Story,
        IssueType::Task,
        IssueType::Bug,
        IssueType::FeatureRequest,
        IssueType::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IssueType::Epic => "epic",
            IssueType::Story => "story",
            IssueType::Task => "task",
            IssueType::Bug => "bug",
            IssueType::FeatureRequest => "feature-request",
            IssueType::Other => "other",
        }
    }
}

impl FromStr for IssueType {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let folded: String = s
            .chars()
            .filter(|c| !matches!(c, '-' | '_' | ' '))
            .flat_map(char::to_lowercase)
            .collect();
        Ok(match folded.as_str() {
            "epic" => IssueType::Epic,
            "story" => IssueType::Story,
            "task" => IssueType::Task,
            "bug" => IssueType::Bug,
            "featurerequest" => IssueType::FeatureRequest,
            "other" => IssueType::Other,
            _ => return Err(ModelError::UnknownIssueType(s.to_string())),
        })
    }
}

impl fmt::Display for IssueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub key: IssueKey,
    pub project: String,
    #[serde(rename = "type")]
    pub issue_type: IssueType,
    #[serde(default)]
    pub status: String,
    pub title: String,
    #[serde(default)]
    pub description: String,
    #[serde(default)]
    pub comments: Vec<String>,
    pub priority: Priority,
    #[serde(default)]
    pub release: Option<String>,
}

impl Issue {
    /// Issue with empty text fields, priority "Somewhat important" and no
    /// release. Mostly useful for fixtures.
    pub fn new(key: IssueKey, issue_type: IssueType, title: impl Into<String>) -> Self {
        Self {
            project: key.project().to_string(),
            key,
            issue_type,
            status: String::new(),
            title: title.into(),
            description: String::new(),
            comments: Vec::new(),
            priority: Priority(3),
            release: None,
        }
    }

    pub fn with_priority(mut self, priority: Priority) -> Self {
        self.priority = priority;
        self
    }

    pub fn with_release(mut self, release: Option<&str>) -> Self {
        self.release = release.map(str::to_string);
        self
    }

    pub fn with_description(mut self, description: impl Into<String>) -> Self {
        self.description = description.into();
        self
    }

    pub fn with_comment(mut self, comment: impl Into<String>) -> Self {
        self.comments.push(comment.into());
        self
    }
}

/// Link semantics. Directed types read source→target as parent→child,
/// dependent→required and duplicate→original.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkType {
    ParentChild,
    Requires,
    Duplicates,
    Relates,
}

impl LinkType {
    pub const ALL: [LinkType; 4] = [
        LinkType::ParentChild,
        LinkType::Requires,
        LinkType::Duplicates,
        LinkType::Relates,
    ];

    pub fn is_directed(self) -> bool {
        !matches!(self, LinkType::Relates)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LinkType::ParentChild => "parent-child",
            LinkType::Requires => "requires",
            LinkType::Duplicates => "duplicates",
            LinkType::Relates => "relates",
        }
    }
}

impl FromStr for LinkType {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LinkType::ALL
            .into_iter()
            .find(|t| t.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ModelError::UnknownLinkType(s.to_string()))
    }
}

impl fmt::Display for LinkType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinkOrigin {
    #[default]
    Imported,
    UserAccepted,
    Inherited,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Link {
    pub source: IssueKey,
    pub target: IssueKey,
    #[serde(rename = "type")]
    pub link_type: LinkType,
    #[serde(default)]
    pub origin: LinkOrigin,
}

/// Identity of a link for uniqueness: `(source, target, type)`, with the
/// endpoints of a symmetric `Relates` link put in key order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LinkId {
    pub source: IssueKey,
    pub target: IssueKey,
    pub link_type: LinkType,
}

impl Link {
    pub fn new(
        source: IssueKey,
        target: IssueKey,
        link_type: LinkType,
        origin: LinkOrigin,
    ) -> Result<Self, ModelError> {
        if source == target {
            return Err(ModelError::SelfLink(source));
        }
        Ok(Self {
            source,
            target,
            link_type,
            origin,
        })
    }

    pub fn id(&self) -> LinkId {
        let (source, target) = if !self.link_type.is_directed() && self.target < self.source {
            (self.target.clone(), self.source.clone())
        } else {
            (self.source.clone(), self.target.clone())
        };
        LinkId {
            source,
            target,
            link_type: self.link_type,
        }
    }

    pub fn touches(&self, key: &IssueKey) -> bool {
        &self.source == key || &self.target == key
    }

    /// The endpoint opposite `key`, if `key` is an endpoint.
    pub fn other(&self, key: &IssueKey) -> Option<&IssueKey> {
        if &self.source == key {
            Some(&self.target)
        } else if &self.target == key {
            Some(&self.source)
        } else {
            None
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -[{}]-> {}", self.source, self.link_type, self.target)
    }
}
