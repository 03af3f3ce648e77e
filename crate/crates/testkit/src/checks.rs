//! Implementation-versus-oracle comparisons. Each returns a description of
//! the first discrepancy found.

use std::collections::{BTreeMap, BTreeSet};

use linkmap_core::consistency::check_consistency;
use linkmap_core::detection::{detect_duplicates, recommend, DecisionBook, SimilarityIndex, DEFAULT_K, SIMILARITY_THRESHOLD};
use linkmap_core::graph::{LinkGraph, UNBOUNDED};
use linkmap_core::ingestion::IssueDump;
use linkmap_core::{IssueKey, LinkOrigin};

use crate::oracle::{self, Indexed};

pub type Check = Result<(), String>;

fn ensure(ok: bool, message: impl FnOnce() -> String) -> Check {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

/// Neighbourhood distances and edges for every center at depths 0..=3 and
/// unbounded, component membership, per-component diameters and the stats
/// summary.
pub fn graph_metrics(dump: &IssueDump) -> Check {
    let graph = dump.to_graph().map_err(|e| e.to_string())?;
    let ix = Indexed::new(dump);
    let matrix = ix.matrix();
    let apsp = matrix.floyd_warshall();
    for (c, center) in ix.keys.iter().enumerate() {
        for depth in [0, 1, 2, 3, UNBOUNDED] {
            let sub = graph.neighborhood(center, depth).map_err(|e| e.to_string())?;
            let expected: BTreeMap<IssueKey, usize> = matrix
                .bfs(c, depth)
                .into_iter()
                .enumerate()
                .filter_map(|(i, d)| d.map(|d| (ix.keys[i].clone(), d)))
                .collect();
            ensure(sub.nodes == expected, || format!("distances from {center} at depth {depth}"))?;
            let mut edges: Vec<(IssueKey, IssueKey)> = ix
                .edges
                .iter()
                .filter(|(a, b)| expected.contains_key(&ix.keys[*a]) && expected.contains_key(&ix.keys[*b]))
                .map(|(a, b)| (ix.keys[*a].clone(), ix.keys[*b].clone()))
                .collect();
            edges.sort();
            let mut got: Vec<(IssueKey, IssueKey)> =
                sub.edges.iter().map(|l| (l.source.clone(), l.target.clone())).collect();
            got.sort();
            ensure(got == edges, || format!("induced edges around {center} at depth {depth}"))?;
        }
    }

    let components: Vec<BTreeSet<IssueKey>> = oracle::union_find(ix.keys.len(), &ix.edges)
        .into_iter()
        .map(|c| c.into_iter().map(|i| ix.keys[i].clone()).collect())
        .collect();
    let mut got = graph.components();
    got.sort_by(|a, b| a.first().cmp(&b.first()));
    let mut want = components.clone();
    want.sort_by(|a, b| a.first().cmp(&b.first()));
    ensure(got == want, || "component membership".into())?;
    for key in &ix.keys {
        let mine = graph.connected_component(key).map_err(|e| e.to_string())?;
        ensure(want.contains(&mine), || format!("component of {key}"))?;
    }

    let diameter = |component: &BTreeSet<IssueKey>| -> usize {
        let members: Vec<usize> = component.iter().map(|k| ix.index[k]).collect();
        members
            .iter()
            .flat_map(|&i| members.iter().map(move |&j| (i, j)))
            .map(|(i, j)| apsp[i][j].expect("same component"))
            .max()
            .unwrap_or(0)
    };
    for component in &want {
        let mine = graph.longest_shortest_distance(component).map_err(|e| e.to_string())?;
        ensure(mine == diameter(component), || {
            format!("diameter of component containing {}", component.first().unwrap())
        })?;
    }

    let stats = graph.stats();
    let largest = want.iter().map(BTreeSet::len).max().unwrap_or(0);
    let largest_diameter = want
        .iter()
        .filter(|c| c.len() == largest)
        .map(diameter)
        .next()
        .unwrap_or(0);
    let with_links: BTreeSet<usize> = ix.edges.iter().flat_map(|(a, b)| [*a, *b]).collect();
    let expected = (
        ix.keys.len(),
        ix.edges.len(),
        with_links.len(),
        want.len(),
        largest,
        largest_diameter,
    );
    let actual = (
        stats.issue_count,
        stats.link_count,
        stats.issues_with_links,
        stats.component_count,
        stats.largest_component,
        stats.largest_component_diameter,
    );
    ensure(actual == expected, || format!("stats {actual:?} != oracle {expected:?}"))
}

/// The checker's verdict and violation multiset against the per-edge rule
/// oracle run after fixpoint inheritance.
pub fn consistency(dump: &IssueDump, center: &IssueKey, depth: usize) -> Check {
    let graph = dump.to_graph().map_err(|e| e.to_string())?;
    let scope = graph.neighborhood(center, depth).map_err(|e| e.to_string())?;
    let report = check_consistency(&graph, &scope, &dump.orders()).map_err(|e| e.to_string())?;
    let nodes: BTreeSet<IssueKey> = scope.nodes.keys().cloned().collect();
    let expected = oracle::consistency_violations(dump, &nodes);
    let mut actual: Vec<oracle::OracleViolation> = report
        .violations
        .iter()
        .map(|v| {
            (rule_name(v.rule), v.link.source.clone(), v.link.target.clone(), v.link.origin == LinkOrigin::Inherited)
        })
        .collect();
    actual.sort();
    ensure(report.consistent == expected.is_empty(), || {
        format!("verdict around {center} (depth {depth}): checker {} oracle {}", report.consistent, expected.is_empty())
    })?;
    ensure(actual == expected, || {
        format!("violations around {center} (depth {depth}): checker {actual:?} oracle {expected:?}")
    })?;
    for v in &report.violations {
        ensure(nodes.contains(&v.link.source) && nodes.contains(&v.link.target), || {
            format!("violation {} leaves the scope", v.link)
        })?;
    }
    Ok(())
}

fn rule_name(rule: linkmap_core::consistency::Rule) -> &'static str {
    use linkmap_core::consistency::Rule::*;
    match rule {
        ChildRelease => "child-release",
        RequiredRelease => "required-release",
        RequiredPriority => "required-priority",
    }
}

fn index_of(dump: &IssueDump, graph: &LinkGraph) -> Result<SimilarityIndex, String> {
    let project = dump.projects[0].project().to_string();
    SimilarityIndex::build(&project, graph.issues().filter(|i| i.project == project)).map_err(|e| e.to_string())
}

/// Self-similarity, symmetry, and the top-5 lists for every issue against
/// the brute-force ranking. Assumes a single-project dump.
pub fn similarity(dump: &IssueDump) -> Check {
    let graph = dump.to_graph().map_err(|e| e.to_string())?;
    let index = index_of(dump, &graph)?;
    let issues: Vec<_> = dump.issues.iter().collect();
    let scores = oracle::pairwise_similarity(&issues);
    let book = DecisionBook::default();
    for a in &dump.issues {
        let nonempty = !(linkmap_core::detection::tokenize(&a.title).is_empty()
            && linkmap_core::detection::tokenize(&a.description).is_empty());
        let own = index.similarity(&a.key, &a.key).map_err(|e| e.to_string())?;
        let want = if nonempty { 1.0 } else { 0.0 };
        ensure((own - want).abs() <= 1e-9, || format!("sim({0},{0}) = {own}", a.key))?;
        for b in &dump.issues {
            let ab = index.similarity(&a.key, &b.key).map_err(|e| e.to_string())?;
            let ba = index.similarity(&b.key, &a.key).map_err(|e| e.to_string())?;
            ensure((ab - ba).abs() < 1e-9, || format!("asymmetric {} {}", a.key, b.key))?;
            let oracle = scores[&(a.key.clone(), b.key.clone())];
            ensure((ab - oracle).abs() <= 1e-9, || format!("sim({}, {}) = {ab}, oracle {oracle}", a.key, b.key))?;
        }
        let expected = oracle::top_k(dump, &scores, &a.key, DEFAULT_K, SIMILARITY_THRESHOLD);
        for (label, got) in [
            ("detect_duplicates", detect_duplicates(&index, &a.key, &graph, DEFAULT_K)),
            ("recommend", recommend(&a.key, &index, &graph, &book, DEFAULT_K)),
        ] {
            let got = got.map_err(|e| e.to_string())?;
            let keys: Vec<&IssueKey> = got.iter().map(|r| &r.candidate).collect();
            let want: Vec<&IssueKey> = expected.iter().map(|(k, _)| k).collect();
            ensure(keys == want, || format!("{label} for {}: {keys:?} oracle {want:?}", a.key))?;
            for (r, (_, s)) in got.iter().zip(&expected) {
                ensure((r.score - s).abs() <= 1e-9, || format!("{label} score for {}", r.candidate))?;
            }
        }
    }
    Ok(())
}
