//! Acceptance gate: each criterion prints one PASS/FAIL line. The process
//! exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use axum::http::StatusCode;
use common::{get, has_edge, post, workspace};
use linkmap_api::{router, ApiConfig};
use linkmap_core::consistency::{check_consistency, Rule};
use linkmap_core::detection::{detect_cross_references, recommend, DecisionBook, Evidence, SimilarityIndex};
use linkmap_core::graph::UNBOUNDED;
use linkmap_core::ingestion::{read_dump_file, write_dump, IssueDump};
use linkmap_core::service::{Workspace, DEFAULT_MAX_DEPTH};
use linkmap_core::LinkOrigin;
use linkmap_testkit::oracle::{self, Indexed};
use linkmap_testkit::{checks, fixtures, key};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::json;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn within(elapsed: Duration, limit: Duration, detail: String) -> Outcome {
    if elapsed < limit {
        Ok(format!("{detail}, {elapsed:.2?} < {limit:?}"))
    } else {
        Err(format!("{detail}, took {elapsed:.2?}, limit {limit:?}"))
    }
}

fn expect(ok: bool, message: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(message())
    }
}

fn transitive_map(rt: &tokio::runtime::Runtime) -> Outcome {
    let start = Instant::now();
    let dump = fixtures::transitive_dump();
    let ix = Indexed::new(&dump);
    let closure = ix.matrix().transitive_closure();
    let center = key("QTBUG-1");
    let reachable: BTreeSet<String> = (0..ix.keys.len())
        .filter(|&j| closure[ix.index[&center]][j])
        .map(|j| ix.keys[j].to_string())
        .collect();
    expect(reachable.len() == 20, || format!("closure oracle found {} issues", reachable.len()))?;

    let graph = dump.to_graph().map_err(|e| e.to_string())?;
    let unbounded: BTreeSet<String> =
        graph.neighborhood(&center, UNBOUNDED).unwrap().nodes.keys().map(|k| k.to_string()).collect();
    expect(unbounded == reachable, || "unbounded neighbourhood differs from closure".into())?;

    let app = common::app(&dump);
    let (one, six) = rt.block_on(async {
        (get(&app, "/issues/QTBUG-1/map?depth=1").await.1, get(&app, "/issues/QTBUG-1/map?depth=6").await.1)
    });
    let count = |v: &serde_json::Value| v["nodes"].as_array().map_or(0, Vec::len);
    expect(count(&one) == 4, || format!("depth-1 map has {} nodes", count(&one)))?;
    let deep: BTreeSet<String> =
        six["nodes"].as_array().unwrap().iter().map(|n| n["key"].as_str().unwrap().to_string()).collect();
    expect(deep == reachable, || format!("depth-6 map has {} nodes", deep.len()))?;
    within(start.elapsed(), Duration::from_secs(1), "depth 1 -> 4 nodes, unbounded -> 20 nodes".into())
}

fn graph_metrics() -> Outcome {
    let start = Instant::now();
    let mut nodes = 0;
    for seed in 0..100 {
        let dump = fixtures::random_graph(&mut StdRng::seed_from_u64(seed));
        nodes += dump.issues.len();
        checks::graph_metrics(&dump).map_err(|e| format!("seed {seed}: {e}"))?;
    }
    within(start.elapsed(), Duration::from_secs(30), format!("100 graphs, {nodes} nodes, 0 mismatches"))
}

fn consistency_oracle() -> Outcome {
    let start = Instant::now();
    let mut violations = 0;
    let mut inconsistent = 0;
    for seed in 0..200 {
        let (dump, center, depth) = fixtures::random_scope(&mut StdRng::seed_from_u64(1_000 + seed));
        checks::consistency(&dump, &center, depth).map_err(|e| format!("seed {seed}: {e}"))?;
        let graph = dump.to_graph().unwrap();
        let scope = graph.neighborhood(&center, depth).unwrap();
        let nodes = scope.nodes.keys().cloned().collect();
        let found = oracle::consistency_violations(&dump, &nodes).len();
        violations += found;
        inconsistent += usize::from(found > 0);
    }
    expect(inconsistent > 0 && inconsistent < 200, || format!("degenerate corpus: {inconsistent}/200 inconsistent"))?;
    within(
        start.elapsed(),
        Duration::from_secs(30),
        format!("200 scopes, {inconsistent} inconsistent, {violations} violations, 0 discrepancies"),
    )
}

fn rule_fixtures() -> Outcome {
    let run = |dump: &IssueDump| {
        let graph = dump.to_graph().unwrap();
        let scope = graph.neighborhood(&key("R-1"), UNBOUNDED).unwrap();
        let report = check_consistency(&graph, &scope, &dump.orders()).unwrap();
        report
            .violations
            .into_iter()
            .map(|v| (v.rule, v.link.source.to_string(), v.link.target.to_string(), v.link.origin))
            .collect::<Vec<_>>()
    };
    let pair = |rule| vec![(rule, "R-1".to_string(), "R-2".to_string(), LinkOrigin::Imported)];
    let cases = [
        ("child-release violating", run(&fixtures::child_release_fixture(true)), pair(Rule::ChildRelease)),
        ("child-release satisfying", run(&fixtures::child_release_fixture(false)), vec![]),
        ("required-release violating", run(&fixtures::required_release_fixture(true)), pair(Rule::RequiredRelease)),
        ("required-release satisfying", run(&fixtures::required_release_fixture(false)), vec![]),
        ("required-priority violating", run(&fixtures::required_priority_fixture(true)), pair(Rule::RequiredPriority)),
        ("required-priority satisfying", run(&fixtures::required_priority_fixture(false)), vec![]),
        (
            "inherited child-release",
            run(&fixtures::inherited_violation_fixture()),
            vec![(Rule::ChildRelease, "R-1".into(), "R-3".into(), LinkOrigin::Inherited)],
        ),
    ];
    for (name, got, want) in &cases {
        expect(got == want, || format!("{name}: got {got:?}"))?;
    }
    Ok(format!("{} fixtures, each flagged exactly as expected", cases.len()))
}

fn similarity() -> Outcome {
    let corpus = fixtures::random_corpus(&mut StdRng::seed_from_u64(30), 30);
    let graph = corpus.to_graph().unwrap();
    let index = SimilarityIndex::build("DUP", graph.issues()).unwrap();
    let mut worst = 0.0f64;
    for a in &corpus.issues {
        for b in &corpus.issues {
            let d = (index.similarity(&a.key, &b.key).unwrap() - index.similarity(&b.key, &a.key).unwrap()).abs();
            worst = worst.max(d);
        }
    }
    expect(worst < 1e-9, || format!("asymmetry {worst}"))?;
    checks::similarity(&corpus)?;

    let mut nonempty = 0;
    for seed in 0..50 {
        let mut rng = StdRng::seed_from_u64(5_000 + seed);
        let n = rng.random_range(2..=30);
        let dump = fixtures::random_corpus(&mut rng, n);
        checks::similarity(&dump).map_err(|e| format!("corpus {seed}: {e}"))?;
        let graph = dump.to_graph().unwrap();
        let index = SimilarityIndex::build("DUP", graph.issues()).unwrap();
        nonempty += dump
            .issues
            .iter()
            .filter(|i| !recommend(&i.key, &index, &graph, &DecisionBook::default(), 5).unwrap().is_empty())
            .count();
    }
    expect(nonempty > 0, || "no corpus produced a recommendation".into())?;
    Ok(format!(
        "self 1 +/- 1e-9, max asymmetry {worst:e} on 30 issues, top-5 equal to brute force on 50 corpora ({nonempty} non-empty lists)"
    ))
}

fn cross_references() -> Outcome {
    let dump = fixtures::cross_reference_dump();
    let graph = dump.to_graph().unwrap();
    let recs = detect_cross_references(graph.issue(&key("QT-1")).unwrap(), &graph);
    let got: Vec<String> = recs.iter().map(|r| r.candidate.to_string()).collect();
    expect(got == ["QT-2"], || format!("recommended {got:?}"))?;
    let rec = &recs[0];
    expect(rec.evidence == Evidence::CrossReference && rec.score == 1.0, || "wrong evidence or score".into())?;
    expect(rec.evidence_detail.contains("duplicate of QT-2"), || format!("excerpt {:?}", rec.evidence_detail))?;
    Ok("1 recommendation (QT-2); 0 for self, already-linked QT-3, absent QT-99 and FOO-1".into())
}

fn accept_reject_loop(rt: &tokio::runtime::Runtime) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let log = dir.path().join("decisions.jsonl");
    let mut dump = fixtures::cross_reference_dump();
    dump.issues[0].comments.push("Might also be QT-4.".into());
    let config = ApiConfig::default();
    let app = router(workspace(&dump, Some(&log)), &config);
    rt.block_on(async {
        let (status, _) = post(&app, "/issues/QT-1/recommendations/QT-2", json!({"decision": "accept"})).await;
        expect(status == StatusCode::BAD_REQUEST, || format!("accept without type returned {status}"))?;
        let (status, body) =
            post(&app, "/issues/QT-1/recommendations/QT-2", json!({"decision": "accept", "type": "duplicates"})).await;
        expect(status == StatusCode::OK, || format!("accept returned {status}: {body}"))?;
        let (_, map) = get(&app, "/issues/QT-1/map?depth=1").await;
        expect(has_edge(&map, "QT-1", "QT-2", "duplicates"), || "accepted edge missing from next map".into())?;
        let (status, _) = post(&app, "/issues/QT-1/recommendations/QT-4", json!({"decision": "reject"})).await;
        expect(status == StatusCode::OK, || format!("reject returned {status}"))?;
        let (_, recs) = get(&app, "/issues/QT-1/recommendations").await;
        expect(recs.as_array().unwrap().iter().all(|r| r["candidate"] != "QT-4"), || "rejected pair recommended".into())
    })?;

    let replayed = router(workspace(&dump, Some(&log)), &config);
    rt.block_on(async {
        let (_, map) = get(&replayed, "/issues/QT-1/map?depth=1").await;
        let edge = map["edges"].as_array().unwrap().iter().find(|e| e["target"] == "QT-2").cloned();
        expect(
            edge.is_some_and(|e| e["type"] == "duplicates" && e["origin"] == "user-accepted"),
            || "accepted edge lost on replay".into(),
        )?;
        let (_, recs) = get(&replayed, "/issues/QT-1/recommendations").await;
        expect(recs.as_array().unwrap().iter().all(|r| r["candidate"] != "QT-4"), || "rejection lost on replay".into())?;
        let (status, _) = post(&replayed, "/issues/QT-1/recommendations/QT-4", json!({"decision": "accept", "type": "relates"})).await;
        expect(status == StatusCode::CONFLICT, || format!("re-deciding a rejected pair returned {status}"))
    })?;
    Ok("accept without type -> 400, accept -> edge in next map, reject suppresses, both survive replay".into())
}

fn scale(rt: &tokio::runtime::Runtime) -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("scale.json");
    let mut rng = StdRng::seed_from_u64(10_000);
    let dump = fixtures::scale_dump(&mut rng, 10_000, 8_000);
    write_dump(&dump, std::io::BufWriter::new(std::fs::File::create(&path).unwrap())).map_err(|e| e.to_string())?;

    let start = Instant::now();
    let loaded = read_dump_file(&path).map_err(|e| e.to_string())?;
    let ws = Workspace::open(&loaded, None, DEFAULT_MAX_DEPTH).map_err(|e| e.to_string())?.workspace;
    let load = start.elapsed();
    expect(ws.snapshot().issue_count() == 10_000 && ws.snapshot().link_count() == 8_000, || "wrong counts".into())?;

    let app = router(std::sync::Arc::new(ws), &ApiConfig::default());
    let mut slowest = Duration::ZERO;
    let mut largest = 0;
    rt.block_on(async {
        for _ in 0..25 {
            let center = format!("QTBUG-{}", rng.random_range(1..=10_000));
            let t = Instant::now();
            let (status, body) = get(&app, &format!("/issues/{center}/map?depth=3")).await;
            slowest = slowest.max(t.elapsed());
            assert_eq!(status, StatusCode::OK);
            largest = largest.max(body["nodes"].as_array().unwrap().len());
        }
    });
    let limit = Duration::from_secs(5);
    expect(load < limit, || format!("load took {load:.2?}, limit {limit:?}"))?;
    within(
        slowest,
        Duration::from_millis(100),
        format!("10000 issues / 8000 links loaded in {load:.2?} < {limit:?}; slowest of 25 depth-3 maps ({largest} nodes max)"),
    )
}

fn main() {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build().unwrap();
    let criteria: Vec<Criterion> = vec![
        ("transitive-map fixture", Box::new(|| transitive_map(&rt))),
        ("graph-metrics equivalence", Box::new(graph_metrics)),
        ("consistency oracle equivalence", Box::new(consistency_oracle)),
        ("rule fixtures", Box::new(rule_fixtures)),
        ("similarity properties", Box::new(similarity)),
        ("cross-reference detection", Box::new(cross_references)),
        ("accept/reject loop", Box::new(|| accept_reject_loop(&rt))),
        ("scale sanity", Box::new(|| scale(&rt))),
    ];
    let mut failed = 0;
    for (name, run) in &criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|panic| {
            let message = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {message}"))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
