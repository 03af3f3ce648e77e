use std::fmt::Write;

use linkmap_core::graph::GraphStats;
use linkmap_core::service::{ConsistencyView, RecommendationView};

pub fn recommendations(recs: &[RecommendationView]) -> String {
    let mut out = String::new();
    for r in recs {
        let _ = writeln!(
            out,
            "{} -> {}  {}  {:.3}  {}",
            r.source,
            r.candidate,
            r.evidence.as_str(),
            r.score,
            r.evidence_detail
        );
    }
    out
}

pub fn consistency(views: &[ConsistencyView]) -> String {
    let mut out = String::new();
    let mut total = 0;
    for v in views {
        let depth = v.depth.map_or("unbounded".to_string(), |d| format!("depth {d}"));
        let verdict = if v.consistent {
            "consistent".to_string()
        } else {
            format!("inconsistent, {} violation(s)", v.violations.len())
        };
        let _ = writeln!(out, "{} ({depth}, {} issues): {verdict}", v.center, v.scope.len());
        for violation in &v.violations {
            let _ = writeln!(
                out,
                "  {}  {} -> {}  {}",
                violation.rule.as_str(),
                violation.link.source,
                violation.link.target,
                violation.explanation
            );
        }
        for (project, releases) in &v.releases_in_scope {
            let _ = writeln!(out, "  releases {project}: {}", releases.join(", "));
        }
        for notice in &v.notices {
            let _ = writeln!(out, "  note: {notice}");
        }
        total += v.violations.len();
    }
    let verdict = if total == 0 { "consistent" } else { "inconsistent" };
    let _ = writeln!(out, "{verdict}: {total} violation(s) in {} scope(s)", views.len());
    out
}

pub fn stats(s: &GraphStats) -> String {
    format!(
        "issues: {}\nlinks: {}\nissues with links: {}\ncomponents: {}\nlargest component: {}\nlargest component diameter: {}\n",
        s.issue_count,
        s.link_count,
        s.issues_with_links,
        s.component_count,
        s.largest_component,
        s.largest_component_diameter
    )
}
