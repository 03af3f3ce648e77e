mod common;

use std::collections::BTreeSet;

use axum::http::{Method, Request, StatusCode};
use common::{app, get, has_edge, post, raw, workspace};
use linkmap_api::{router, ApiConfig};
use linkmap_core::ingestion::IssueDump;
use linkmap_testkit::fixtures;
use linkmap_testkit::oracle::union_find;
use rand::rngs::StdRng;
use rand::SeedableRng;
use serde_json::{json, Value};
use tower::ServiceExt;

#[tokio::test]
async fn issue_detail() {
    let app = app(&fixtures::cross_reference_dump());
    let (status, body) = get(&app, "/issues/QT-1").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["title"], "Dock widget flickers");
    assert_eq!(body["priority"]["rank"], 3);
    assert_eq!(body["release"], Value::Null);
    assert!(body.get("comments").is_none());

    let (_, body) = get(&app, "/issues/QT-1?comments=true").await;
    assert_eq!(body["comments"].as_array().unwrap().len(), 2);

    let (status, body) = get(&app, "/issues/QTBUG-999999").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["code"], "unknown-issue");
    let (status, body) = get(&app, "/issues/bad%20key").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["code"], "malformed-key");
    let (status, _) = get(&app, "/issues/QT-1?comments=maybe").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn map_depths() {
    let app = app(&fixtures::chain_dump(5));
    let (status, body) = get(&app, "/issues/G-1/map?depth=0").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["nodes"].as_array().unwrap().len(), 1);
    assert!(body["edges"].as_array().unwrap().is_empty());

    let (_, body) = get(&app, "/issues/G-1/map?depth=2").await;
    let distances: Vec<u64> = body["nodes"].as_array().unwrap().iter().map(|n| n["distance"].as_u64().unwrap()).collect();
    assert_eq!(distances, [0, 1, 2]);
    assert_eq!(body["depth"], 2);

    let (_, body) = get(&app, "/issues/G-1/map").await;
    assert_eq!(body["depth"], 2);

    let (status, body) = get(&app, "/issues/G-1/map?depth=7").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(body["max_depth"], 6);
    assert!(body["message"].as_str().unwrap().contains('6'));

    for bad in ["depth=-1", "depth=two", "type=spaceship", "priority=9", "priority=3-1", "project=lower"] {
        let (status, body) = get(&app, &format!("/issues/G-1/map?{bad}")).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{bad}: {body}");
    }
    let (status, _) = get(&app, "/issues/G-99/map").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn map_node_set_matches_edge_endpoints() {
    let dump = fixtures::transitive_dump();
    let app = app(&dump);
    for depth in 0..=6 {
        let (_, body) = get(&app, &format!("/issues/QTBUG-1/map?depth={depth}")).await;
        let nodes: BTreeSet<&str> = body["nodes"].as_array().unwrap().iter().map(|n| n["key"].as_str().unwrap()).collect();
        let mut ends: BTreeSet<&str> = body["edges"]
            .as_array()
            .unwrap()
            .iter()
            .flat_map(|e| [e["source"].as_str().unwrap(), e["target"].as_str().unwrap()])
            .collect();
        ends.insert("QTBUG-1");
        assert_eq!(nodes, ends, "depth {depth}");
        let keys: Vec<&str> = body["nodes"].as_array().unwrap().iter().map(|n| n["key"].as_str().unwrap()).collect();
        let mut sorted = keys.clone();
        sorted.sort_by_key(|k| k.trim_start_matches("QTBUG-").parse::<u32>().unwrap());
        assert_eq!(keys, sorted);
    }
}

#[tokio::test]
async fn map_filters() {
    let mut dump = fixtures::chain_dump(4);
    dump.issues[1].issue_type = linkmap_core::IssueType::Bug;
    dump.issues[1].priority = linkmap_core::Priority::new(1).unwrap();
    let app = app(&dump);
    let (status, body) = get(&app, "/issues/G-1/map?depth=3&type=bug").await;
    assert_eq!(status, StatusCode::OK);
    let keys: Vec<&str> = body["nodes"].as_array().unwrap().iter().map(|n| n["key"].as_str().unwrap()).collect();
    assert_eq!(keys, ["G-1", "G-2"]);
    assert_eq!(body["filter"]["type"], json!(["bug"]));
    let (_, body) = get(&app, "/issues/G-1/map?depth=3&priority=0-1").await;
    assert_eq!(body["nodes"].as_array().unwrap().len(), 2);
    let (_, body) = get(&app, "/issues/G-1/map?depth=3").await;
    assert_eq!(body["nodes"].as_array().unwrap().len(), 4);
    assert_eq!(body["filter"], json!({}));
}

#[tokio::test]
async fn recommendations_and_decisions() {
    let app = app(&fixtures::cross_reference_dump());
    let (status, body) = get(&app, "/issues/QT-1/recommendations").await;
    assert_eq!(status, StatusCode::OK);
    let first = &body[0];
    assert_eq!(first["candidate"], "QT-2");
    assert_eq!(first["evidence"], "cross-reference");
    assert!(first["evidence_detail"].as_str().unwrap().contains("QT-2"));
    assert_eq!(first["state"], "pending");

    let (_, body) = get(&app, "/issues/QT-4/recommendations").await;
    assert_eq!(body, json!([]));
    let (status, _) = get(&app, "/issues/QT-77/recommendations").await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let uri = "/issues/QT-1/recommendations/QT-2";
    let (status, body) = post(&app, uri, json!({"decision": "accept"})).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::BAD_REQUEST, Some("missing-link-type")));
    let (status, _) = post(&app, uri, json!({"decision": "accept", "type": "sideways"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = post(&app, uri, json!({"verdict": "accept"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let (_, before) = get(&app, "/stats").await;
    let (_, map_before) = get(&app, "/issues/QT-1/map?depth=1").await;
    let (status, body) = post(&app, uri, json!({"decision": "accept", "type": "duplicates"})).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["version"].as_u64(), map_before["version"].as_u64().map(|v| v + 1));
    let (_, map) = get(&app, "/issues/QT-1/map?depth=1").await;
    assert!(has_edge(&map, "QT-1", "QT-2", "duplicates"));
    let (_, after) = get(&app, "/stats").await;
    assert_eq!(after["link_count"].as_u64().unwrap(), before["link_count"].as_u64().unwrap() + 1);

    let (status, body) = post(&app, uri, json!({"decision": "reject"})).await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::CONFLICT, Some("already-decided")));
    let (status, _) = post(&app, "/issues/QT-1/recommendations/QT-4", json!({"decision": "reject"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = post(&app, "/issues/QT-1/recommendations/QT-404", json!({"decision": "reject"})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn rejection_suppresses_the_pair() {
    let app = app(&fixtures::cross_reference_dump());
    let (status, _) = post(&app, "/issues/QT-1/recommendations/QT-2", json!({"decision": "reject"})).await;
    assert_eq!(status, StatusCode::OK);
    let (_, body) = get(&app, "/issues/QT-1/recommendations").await;
    assert!(body.as_array().unwrap().iter().all(|r| r["candidate"] != "QT-2"));
    let (_, map) = get(&app, "/issues/QT-1/map?depth=1").await;
    assert!(!has_edge(&map, "QT-1", "QT-2", "duplicates"));
}

#[tokio::test]
async fn consistency_reports() {
    let (_, body) = get(&app(&fixtures::chain_dump(2)), "/issues/G-1/consistency?depth=0").await;
    assert_eq!(body["consistent"], true);
    assert_eq!(body["violations"], json!([]));

    let (status, body) = get(&app(&fixtures::child_release_fixture(true)), "/issues/R-1/consistency").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["consistent"], false);
    let v = &body["violations"].as_array().unwrap();
    assert_eq!(v.len(), 1);
    assert_eq!(v[0]["rule"], "child-release");
    let explanation = v[0]["explanation"].as_str().unwrap();
    assert!(explanation.contains("R-1") && explanation.contains("R-2"), "{explanation}");
    assert_eq!(body["releases_in_scope"], json!({"R": ["2.0", "3.0"]}));

    let inherited = app(&fixtures::inherited_violation_fixture());
    let (_, body) = get(&inherited, "/issues/R-1/consistency?depth=2").await;
    let v = &body["violations"][0];
    assert_eq!((v["link"]["source"].as_str(), v["link"]["target"].as_str()), (Some("R-1"), Some("R-3")));
    assert_eq!(v["link"]["origin"], "inherited");

    let (status, _) = get(&inherited, "/issues/R-1/consistency?depth=9").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn stats_endpoint() {
    let empty = IssueDump {
        projects: vec![],
        issues: vec![],
        links: vec![],
    };
    let (_, body) = get(&app(&empty), "/stats").await;
    assert_eq!(
        body,
        json!({"issue_count": 0, "link_count": 0, "issues_with_links": 0, "component_count": 0,
               "largest_component": 0, "largest_component_diameter": 0})
    );
    let (_, body) = get(&app(&fixtures::chain_dump(4)), "/stats").await;
    assert_eq!((body["largest_component"].as_u64(), body["largest_component_diameter"].as_u64()), (Some(4), Some(3)));

    let dump = fixtures::random_graph(&mut StdRng::seed_from_u64(7));
    let (_, body) = get(&app(&dump), "/stats").await;
    let ix = linkmap_testkit::oracle::Indexed::new(&dump);
    let components = union_find(ix.keys.len(), &ix.edges);
    assert_eq!(body["component_count"].as_u64().unwrap() as usize, components.len());
    assert_eq!(
        body["largest_component"].as_u64().unwrap() as usize,
        components.iter().map(|c| c.len()).max().unwrap()
    );
}

#[tokio::test]
async fn reads_never_change_the_version_and_are_deterministic() {
    let dump = fixtures::cross_reference_dump();
    let first = app(&dump);
    let second = app(&dump);
    let uris = [
        "/issues/QT-1",
        "/issues/QT-1?comments=true",
        "/issues/QT-1/map?depth=2",
        "/issues/QT-1/recommendations",
        "/issues/QT-1/consistency",
        "/stats",
    ];
    let version = |app| async move { get(&app, "/issues/QT-1/map").await.1["version"].clone() };
    let v0 = version(first.clone()).await;
    for uri in uris {
        let a = raw(&first, Method::GET, uri, None).await;
        let b = raw(&first, Method::GET, uri, None).await;
        let c = raw(&second, Method::GET, uri, None).await;
        assert_eq!(a, b, "{uri}");
        assert_eq!(a, c, "{uri}");
    }
    assert_eq!(version(first.clone()).await, v0);
}

#[tokio::test]
async fn base_path_and_cors() {
    let config = ApiConfig {
        base_path: "/api/".into(),
        cors_origin: Some("http://ui.example".into()),
    };
    let app = router(workspace(&fixtures::chain_dump(3), None), &config);
    let (status, _) = get(&app, "/api/stats").await;
    assert_eq!(status, StatusCode::OK);
    let (status, body) = get(&app, "/stats").await;
    assert_eq!((status, body["code"].as_str()), (StatusCode::NOT_FOUND, Some("no-route")));

    let request = Request::builder()
        .uri("/api/stats")
        .header("origin", "http://ui.example")
        .body(axum::body::Body::empty())
        .unwrap();
    let response = app.oneshot(request).await.unwrap();
    assert_eq!(response.headers()["access-control-allow-origin"], "http://ui.example");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_reads_during_decisions() {
    let dump = fixtures::random_corpus(&mut StdRng::seed_from_u64(11), 30);
    let app = app(&dump);
    let mut tasks = Vec::new();
    for i in 0..16 {
        let app = app.clone();
        tasks.push(tokio::spawn(async move {
            let key = format!("DUP-{}", i % 30 + 1);
            for _ in 0..10 {
                let (status, _) = get(&app, &format!("/issues/{key}/map?depth=3")).await;
                assert_eq!(status, StatusCode::OK);
            }
        }));
    }
    let mut accepted = 0;
    for i in 1..=30 {
        let (_, recs) = get(&app, &format!("/issues/DUP-{i}/recommendations")).await;
        if let Some(candidate) = recs[0]["candidate"].as_str() {
            let (status, _) =
                post(&app, &format!("/issues/DUP-{i}/recommendations/{candidate}"), json!({"decision": "accept", "type": "relates"}))
                    .await;
            assert_eq!(status, StatusCode::OK);
            accepted += 1;
        }
    }
    for t in tasks {
        t.await.unwrap();
    }
    let (_, stats) = get(&app, "/stats").await;
    assert_eq!(stats["link_count"].as_u64().unwrap() as usize, dump.links.len() + accepted);
}
