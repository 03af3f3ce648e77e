use std::collections::HashSet;

use linkmap_core::graph::UNBOUNDED;
use linkmap_core::ingestion::IssueDump;
use linkmap_core::{Issue, IssueKey, IssueType, Link, LinkOrigin, LinkType, Priority, ReleaseOrder};
use rand::rngs::StdRng;
use rand::seq::IndexedRandom;
use rand::Rng;

use crate::key;

pub const RELEASES: [&str; 4] = ["1.0", "2.0", "3.0", "4.0"];

pub fn issue(key_text: &str, rank: i64, release: Option<&str>) -> Issue {
    Issue::new(key(key_text), IssueType::Task, format!("issue {key_text}"))
        .with_priority(Priority::new(rank).unwrap())
        .with_release(release)
}

pub fn link(source: &str, target: &str, link_type: LinkType) -> Link {
    Link::new(key(source), key(target), link_type, LinkOrigin::Imported).unwrap()
}

/// Builds and validates a dump; `projects` pairs a code with its releases.
pub fn dump(projects: &[(&str, &[&str])], issues: Vec<Issue>, links: Vec<Link>) -> IssueDump {
    let projects = projects
        .iter()
        .map(|(code, releases)| ReleaseOrder::new(*code, releases.iter().map(|r| r.to_string()).collect()).unwrap())
        .collect();
    let dump = IssueDump {
        projects,
        issues,
        links,
    };
    dump.validate().expect("fixture must be a valid dump");
    dump
}

fn plain_issues(project: &str, range: std::ops::RangeInclusive<u64>) -> Vec<Issue> {
    range.map(|i| issue(&format!("{project}-{i}"), 3, None)).collect()
}

/// QTBUG-1 has three direct neighbours and nineteen issues reachable from it
/// in total. QTBUG-21..26 form unrelated components.
pub fn transitive_dump() -> IssueDump {
    use LinkType::*;
    let edges = [
        (1, 2, ParentChild),
        (3, 1, Requires),
        (1, 4, Relates),
        (2, 5, ParentChild),
        (2, 6, ParentChild),
        (6, 7, Requires),
        (3, 8, Duplicates),
        (8, 9, ParentChild),
        (9, 10, Requires),
        (4, 11, Requires),
        (11, 12, ParentChild),
        (12, 13, ParentChild),
        (13, 14, Relates),
        (5, 15, Requires),
        (15, 16, Duplicates),
        (16, 17, ParentChild),
        (10, 18, Relates),
        (18, 19, ParentChild),
        (19, 20, Requires),
        (7, 15, Relates),
        (14, 20, Requires),
        (21, 22, ParentChild),
        (23, 24, Requires),
        (24, 25, Relates),
    ];
    let links = edges
        .iter()
        .map(|(a, b, t)| link(&format!("QTBUG-{a}"), &format!("QTBUG-{b}"), *t))
        .collect();
    dump(&[("QTBUG", &[])], plain_issues("QTBUG", 1..=26), links)
}

/// `G-1 - G-2 - ... - G-n` joined by requires links.
pub fn chain_dump(n: u64) -> IssueDump {
    let links = (1..n)
        .map(|i| link(&format!("G-{i}"), &format!("G-{}", i + 1), LinkType::Requires))
        .collect();
    dump(&[("G", &[])], plain_issues("G", 1..=n), links)
}

fn random_links(rng: &mut StdRng, keys: &[IssueKey], count: usize, types: &[(LinkType, u32)]) -> Vec<Link> {
    let mut seen = HashSet::new();
    let mut links = Vec::new();
    if keys.len() < 2 {
        return links;
    }
    for _ in 0..count {
        let a = rng.random_range(0..keys.len());
        let b = rng.random_range(0..keys.len());
        if a == b {
            continue;
        }
        let link_type = types.choose_weighted(rng, |(_, w)| *w).unwrap().0;
        let link = Link::new(keys[a].clone(), keys[b].clone(), link_type, LinkOrigin::Imported).unwrap();
        if seen.insert(link.id()) {
            links.push(link);
        }
    }
    links
}

/// Up to 60 issues in project `G` with random links of every type.
pub fn random_graph(rng: &mut StdRng) -> IssueDump {
    let n = rng.random_range(1..=60u64);
    let issues = plain_issues("G", 1..=n);
    let keys: Vec<IssueKey> = issues.iter().map(|i| i.key.clone()).collect();
    let m = rng.random_range(0..=(n as usize * 3 / 2));
    let types = [
        (LinkType::ParentChild, 1),
        (LinkType::Requires, 1),
        (LinkType::Duplicates, 1),
        (LinkType::Relates, 1),
    ];
    let links = random_links(rng, &keys, m, &types);
    dump(&[("G", &[])], issues, links)
}

fn random_release(rng: &mut StdRng, releases: &[&'static str]) -> Option<&'static str> {
    if rng.random_bool(0.2) {
        None
    } else {
        Some(releases[rng.random_range(0..releases.len())])
    }
}

/// A consistency scope of at most 25 issues: mostly project `PRJ`,
/// sometimes a few issues of `OTH` with its own release order. Returns the
/// dump, a center and a depth.
pub fn random_scope(rng: &mut StdRng) -> (IssueDump, IssueKey, usize) {
    const OTHER: [&str; 2] = ["a", "b"];
    let n = rng.random_range(2..=25u64);
    let others = if rng.random_bool(0.3) { rng.random_range(1..=3u64).min(n - 1) } else { 0 };
    let mut issues = Vec::new();
    for i in 1..=n - others {
        let release = random_release(rng, &RELEASES);
        issues.push(issue(&format!("PRJ-{i}"), rng.random_range(0..=5), release));
    }
    for i in 1..=others {
        let release = random_release(rng, &OTHER);
        issues.push(issue(&format!("OTH-{i}"), rng.random_range(0..=5), release));
    }
    let keys: Vec<IssueKey> = issues.iter().map(|i| i.key.clone()).collect();
    let m = rng.random_range(0..=(2 * n as usize));
    let types = [
        (LinkType::ParentChild, 30),
        (LinkType::Requires, 30),
        (LinkType::Duplicates, 25),
        (LinkType::Relates, 15),
    ];
    let links = random_links(rng, &keys, m, &types);
    let center = keys[rng.random_range(0..keys.len())].clone();
    let depth = match rng.random_range(0..5) {
        0 => UNBOUNDED,
        d => d,
    };
    (dump(&[("PRJ", &RELEASES), ("OTH", &OTHER)], issues, links), center, depth)
}

const WORDS: [&str; 16] = [
    "crash", "widget", "dock", "resize", "font", "render", "window", "qml", "timer", "network", "socket", "layout",
    "scroll", "memory", "leak", "paint",
];

fn sentence(rng: &mut StdRng, max: usize) -> String {
    let n = rng.random_range(0..=max);
    (0..n).map(|_| *WORDS.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// `n` issues of project `DUP` drawn from a small vocabulary so that
/// overlaps, exact copies and ties are common. A few issues are linked.
pub fn random_corpus(rng: &mut StdRng, n: u64) -> IssueDump {
    let mut issues: Vec<Issue> = Vec::new();
    for i in 1..=n {
        let key_text = format!("DUP-{i}");
        let copy = i > 1 && rng.random_bool(0.15);
        let (title, description) = if copy {
            let src = &issues[rng.random_range(0..issues.len())];
            (src.title.clone(), src.description.clone())
        } else {
            (sentence(rng, 4), sentence(rng, 8))
        };
        issues.push(
            Issue::new(key(&key_text), IssueType::Bug, title)
                .with_description(description)
                .with_priority(Priority::new(rng.random_range(0..=5)).unwrap()),
        );
    }
    let keys: Vec<IssueKey> = issues.iter().map(|i| i.key.clone()).collect();
    let m = rng.random_range(0..=n as usize / 2);
    let links = random_links(rng, &keys, m, &[(LinkType::Relates, 1), (LinkType::Duplicates, 1)]);
    dump(&[("DUP", &[])], issues, links)
}

/// A large single-project dump with `issues` issues and `links` distinct
/// random links.
pub fn scale_dump(rng: &mut StdRng, issues: u64, links: usize) -> IssueDump {
    let all: Vec<Issue> = (1..=issues)
        .map(|i| {
            let release = random_release(rng, &RELEASES);
            Issue::new(key(&format!("QTBUG-{i}")), IssueType::ALL[rng.random_range(0..6)], sentence(rng, 6))
                .with_description(sentence(rng, 20))
                .with_priority(Priority::new(rng.random_range(0..=5)).unwrap())
                .with_release(release)
        })
        .collect();
    let keys: Vec<IssueKey> = all.iter().map(|i| i.key.clone()).collect();
    let types = [
        (LinkType::ParentChild, 3),
        (LinkType::Requires, 3),
        (LinkType::Duplicates, 1),
        (LinkType::Relates, 3),
    ];
    let mut out = Vec::new();
    while out.len() < links {
        out = random_links(rng, &keys, links + links / 10, &types);
    }
    out.truncate(links);
    dump(&[("QTBUG", &RELEASES)], all, out)
}

/// QT-1 mentions QT-2 (unlinked), itself, QT-3 (already linked), and keys
/// that do not exist.
pub fn cross_reference_dump() -> IssueDump {
    let source = Issue::new(key("QT-1"), IssueType::Bug, "Dock widget flickers")
        .with_description("Reported against QT-1 itself on Linux.")
        .with_comment("This looks like a duplicate of QT-2, same stack trace.")
        .with_comment("Related to QT-3 and maybe FOO-1 or QT-99.");
    let issues = vec![
        source,
        Issue::new(key("QT-2"), IssueType::Bug, "Crash in timer event"),
        Issue::new(key("QT-3"), IssueType::Task, "Network socket layout"),
        Issue::new(key("QT-4"), IssueType::Task, "Memory leak in qml engine"),
    ];
    dump(&[("QT", &[])], issues, vec![link("QT-1", "QT-3", LinkType::Relates)])
}

fn rule_dump(issues: Vec<Issue>, links: Vec<Link>) -> IssueDump {
    dump(&[("R", &["1.0", "2.0", "3.0"])], issues, links)
}

/// Parent R-1 (P1, 2.0) with child R-2 (P1, 3.0 or 1.0).
pub fn child_release_fixture(violating: bool) -> IssueDump {
    let child = if violating { "3.0" } else { "1.0" };
    rule_dump(
        vec![issue("R-1", 1, Some("2.0")), issue("R-2", 1, Some(child))],
        vec![link("R-1", "R-2", LinkType::ParentChild)],
    )
}

/// R-1 (P1, 1.0) requires R-2 (P1, 2.0 or 1.0).
pub fn required_release_fixture(violating: bool) -> IssueDump {
    let required = if violating { "2.0" } else { "1.0" };
    rule_dump(
        vec![issue("R-1", 1, Some("1.0")), issue("R-2", 1, Some(required))],
        vec![link("R-1", "R-2", LinkType::Requires)],
    )
}

/// R-1 (P1, 2.0) requires R-2 (P3 or P0, 1.0).
pub fn required_priority_fixture(violating: bool) -> IssueDump {
    let rank = if violating { 3 } else { 0 };
    rule_dump(
        vec![issue("R-1", 1, Some("2.0")), issue("R-2", rank, Some("1.0"))],
        vec![link("R-1", "R-2", LinkType::Requires)],
    )
}

/// R-3 duplicates R-2, R-2 is a child of R-1 (P1, 1.0). The duplicate is
/// scheduled for 2.0, so only the inherited edge R-1 -> R-3 violates.
pub fn inherited_violation_fixture() -> IssueDump {
    rule_dump(
        vec![issue("R-1", 1, Some("1.0")), issue("R-2", 1, Some("1.0")), issue("R-3", 1, Some("2.0"))],
        vec![link("R-1", "R-2", LinkType::ParentChild), link("R-3", "R-2", LinkType::Duplicates)],
    )
}
