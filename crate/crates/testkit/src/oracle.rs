#![allow(clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet, VecDeque};

use linkmap_core::detection::tokenize;
use linkmap_core::ingestion::IssueDump;
use linkmap_core::{Issue, IssueKey};

/// Undirected adjacency matrix over dense indices.
pub struct Matrix {
    pub n: usize,
    pub adj: Vec<Vec<bool>>,
}

impl Matrix {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![vec![false; n]; n];
        for &(a, b) in edges {
            adj[a][b] = true;
            adj[b][a] = true;
        }
        Self { n, adj }
    }

    /// Hop distances from `src`, `None` beyond `limit` or unreachable.
    pub fn bfs(&self, src: usize, limit: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        dist[src] = Some(0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let d = dist[u].unwrap();
            if d == limit {
                continue;
            }
            for v in 0..self.n {
                if self.adj[u][v] && dist[v].is_none() {
                    dist[v] = Some(d + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// All-pairs shortest hop counts.
    pub fn floyd_warshall(&self) -> Vec<Vec<Option<usize>>> {
        let n = self.n;
        let mut d: Vec<Vec<Option<usize>>> = (0..n)
            .map(|i| (0..n).map(|j| if i == j { Some(0) } else if self.adj[i][j] { Some(1) } else { None }).collect())
            .collect();
        for k in 0..n {
            for i in 0..n {
                let Some(ik) = d[i][k] else { continue };
                for j in 0..n {
                    if let Some(kj) = d[k][j] {
                        if d[i][j].is_none_or(|ij| ik + kj < ij) {
                            d[i][j] = Some(ik + kj);
                        }
                    }
                }
            }
        }
        d
    }

    /// Boolean reachability (Warshall).
    pub fn transitive_closure(&self) -> Vec<Vec<bool>> {
        let n = self.n;
        let mut r: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| i == j || self.adj[i][j]).collect()).collect();
        for k in 0..n {
            for i in 0..n {
                if r[i][k] {
                    for j in 0..n {
                        if r[k][j] {
                            r[i][j] = true;
                        }
                    }
                }
            }
        }
        r
    }
}

/// Components by union-find, each as a sorted index set, ordered by their
/// smallest member.
pub fn union_find(n: usize, edges: &[(usize, usize)]) -> Vec<BTreeSet<usize>> {
    fn find(parent: &mut [usize], x: usize) -> usize {
        let mut root = x;
        while parent[root] != root {
            root = parent[root];
        }
        let mut x = x;
        while parent[x] != root {
            let next = parent[x];
            parent[x] = root;
            x = next;
        }
        root
    }
    let mut parent: Vec<usize> = (0..n).collect();
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().insert(i);
    }
    let mut out: Vec<_> = groups.into_values().collect();
    out.sort_by_key(|c| *c.first().unwrap());
    out
}

/// Dense index view of a dump: issues in dump order, links as index pairs.
pub struct Indexed {
    pub keys: Vec<IssueKey>,
    pub index: HashMap<IssueKey, usize>,
    pub edges: Vec<(usize, usize)>,
}

impl Indexed {
    pub fn new(dump: &IssueDump) -> Self {
        let keys: Vec<IssueKey> = dump.issues.iter().map(|i| i.key.clone()).collect();
        let index: HashMap<_, _> = keys.iter().cloned().enumerate().map(|(i, k)| (k, i)).collect();
        let edges = dump.links.iter().map(|l| (index[&l.source], index[&l.target])).collect();
        Self { keys, index, edges }
    }

    pub fn matrix(&self) -> Matrix {
        Matrix::new(self.keys.len(), &self.edges)
    }
}

/// An oracle-side violation: (rule name, source, target, carried by an inherited edge).
pub type OracleViolation = (&'static str, IssueKey, IssueKey, bool);

type Triple = (IssueKey, IssueKey, &'static str);

fn type_name(link_type: linkmap_core::LinkType) -> &'static str {
    use linkmap_core::LinkType::*;
    match link_type {
        ParentChild => "parent-child",
        Requires => "requires",
        Duplicates => "duplicates",
        Relates => "relates",
    }
}

fn canonical(t: Triple) -> Triple {
    if t.2 == "relates" && t.1 < t.0 {
        (t.1, t.0, t.2)
    } else {
        t
    }
}

/// One round of duplicate inheritance: for each `D duplicates O`, every
/// non-duplicate edge touching `O` is re-pointed at `D`.
pub fn inherit_once(edges: &BTreeSet<Triple>) -> BTreeSet<Triple> {
    let mut out = edges.clone();
    for (d, o, t) in edges {
        if *t != "duplicates" {
            continue;
        }
        for (s, e, u) in edges {
            if *u == "duplicates" {
                continue;
            }
            let moved = if s == o {
                (d.clone(), e.clone(), *u)
            } else if e == o {
                (s.clone(), d.clone(), *u)
            } else {
                continue;
            };
            if moved.0 != moved.1 {
                out.insert(canonical(moved));
            }
        }
    }
    out
}

pub fn inherit_to_fixpoint(edges: &BTreeSet<Triple>) -> BTreeSet<Triple> {
    let mut current = edges.clone();
    loop {
        let next = inherit_once(&current);
        if next == current {
            return current;
        }
        current = next;
    }
}

/// Every violation in the scope induced by `nodes`, evaluated edge by edge
/// after inheritance. Releases compare by position, unscheduled last;
/// release rules only apply within one project.
pub fn consistency_violations(dump: &IssueDump, nodes: &BTreeSet<IssueKey>) -> Vec<OracleViolation> {
    let issues: HashMap<&IssueKey, &Issue> = dump.issues.iter().map(|i| (&i.key, i)).collect();
    let orders: HashMap<&str, &[String]> = dump.projects.iter().map(|o| (o.project(), o.releases())).collect();
    let slot = |issue: &Issue| -> usize {
        let releases = orders[issue.project.as_str()];
        match &issue.release {
            None => releases.len(),
            Some(r) => releases.iter().position(|x| x == r).expect("declared release"),
        }
    };
    let original: BTreeSet<Triple> = dump
        .links
        .iter()
        .filter(|l| nodes.contains(&l.source) && nodes.contains(&l.target))
        .map(|l| canonical((l.source.clone(), l.target.clone(), type_name(l.link_type))))
        .collect();
    let mut out = Vec::new();
    for edge in inherit_to_fixpoint(&original) {
        let inherited = !original.contains(&edge);
        let (a, b) = (issues[&edge.0], issues[&edge.1]);
        let same_project = a.project == b.project;
        let (ra, rb) = (a.priority.rank(), b.priority.rank());
        match edge.2 {
            "parent-child" => {
                if same_project && rb <= ra && slot(b) > slot(a) {
                    out.push(("child-release", edge.0.clone(), edge.1.clone(), inherited));
                }
            }
            "requires" => {
                if same_project && slot(b) > slot(a) {
                    out.push(("required-release", edge.0.clone(), edge.1.clone(), inherited));
                }
                if rb > ra {
                    out.push(("required-priority", edge.0.clone(), edge.1.clone(), inherited));
                }
            }
            _ => {}
        }
    }
    out.sort();
    out
}

/// Brute-force TF-IDF cosine between every pair of `issues`, rounded to
/// nine decimals. Title tokens count twice; idf = ln(1 + N/df).
pub fn pairwise_similarity(issues: &[&Issue]) -> HashMap<(IssueKey, IssueKey), f64> {
    let n = issues.len() as f64;
    let tf: Vec<HashMap<String, f64>> = issues
        .iter()
        .map(|i| {
            let mut m = HashMap::new();
            for t in tokenize(&i.title) {
                *m.entry(t).or_insert(0.0) += 2.0;
            }
            for t in tokenize(&i.description) {
                *m.entry(t).or_insert(0.0) += 1.0;
            }
            m
        })
        .collect();
    let mut df: HashMap<&str, f64> = HashMap::new();
    for m in &tf {
        for t in m.keys() {
            *df.entry(t.as_str()).or_insert(0.0) += 1.0;
        }
    }
    let weights: Vec<HashMap<&str, f64>> = tf
        .iter()
        .map(|m| m.iter().map(|(t, f)| (t.as_str(), f * (1.0 + n / df[t.as_str()]).ln())).collect())
        .collect();
    let norms: Vec<f64> = weights.iter().map(|w| w.values().map(|x| x * x).sum::<f64>().sqrt()).collect();
    let mut out = HashMap::new();
    for (i, a) in issues.iter().enumerate() {
        for (j, b) in issues.iter().enumerate() {
            let score = if norms[i] == 0.0 || norms[j] == 0.0 {
                0.0
            } else {
                let dot: f64 = weights[i]
                    .iter()
                    .filter_map(|(t, x)| weights[j].get(t).map(|y| x * y))
                    .sum();
                (dot / (norms[i] * norms[j])).clamp(0.0, 1.0)
            };
            out.insert((a.key.clone(), b.key.clone()), (score * 1e9).round() / 1e9);
        }
    }
    out
}

/// Top-`k` duplicate candidates for `source` by exhaustive ranking: same
/// project, not linked to the source in any direction, score at least
/// `threshold`; descending score, then ascending key.
pub fn top_k(
    dump: &IssueDump,
    scores: &HashMap<(IssueKey, IssueKey), f64>,
    source: &IssueKey,
    k: usize,
    threshold: f64,
) -> Vec<(IssueKey, f64)> {
    let project = &dump.issues.iter().find(|i| &i.key == source).unwrap().project;
    let linked: HashSet<&IssueKey> = dump
        .links
        .iter()
        .filter_map(|l| {
            if &l.source == source {
                Some(&l.target)
            } else if &l.target == source {
                Some(&l.source)
            } else {
                None
            }
        })
        .collect();
    let mut hits: Vec<(IssueKey, f64)> = dump
        .issues
        .iter()
        .filter(|i| &i.key != source && &i.project == project && !linked.contains(&i.key))
        .map(|i| (i.key.clone(), scores[&(source.clone(), i.key.clone())]))
        .filter(|(_, s)| *s >= threshold)
        .collect();
    hits.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    hits.truncate(k);
    hits
}
