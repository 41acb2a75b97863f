//! Loop-erased walks, Wilson's algorithm and the matrix-tree count.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::loops::path_weight;
use crate::matrix::{inverse_real, with_rounding_slack, WeightMatrix};
use crate::stats::ComplexSum;

/// Total random-walk steps allowed while sampling one spanning tree.
pub const WILSON_STEP_CAP: u64 = 100_000_000;
/// Largest graph accepted by [`enumerate_spanning_trees`].
pub const MAX_ENUMERATION_VERTICES: usize = 8;
/// Allowed distance of a determinant from the nearest integer.
pub const COUNT_ROUNDING_TOL: f64 = 1e-6;

/// Chronological loop erasure.
///
/// With `j_0` the last visit to `w_0` and `j_{k+1}` the last visit to
/// `w_{j_k + 1}`, the result is `[w_{j_0}, ..., w_{j_k}]` where `j_k = n`.
pub fn loop_erase(path: &[usize]) -> Vec<usize> {
    let Some(&first) = path.first() else {
        return Vec::new();
    };
    let size = path.iter().max().map_or(0, |m| m + 1);
    let mut last = vec![0usize; size];
    for (j, &s) in path.iter().enumerate() {
        last[s] = j;
    }
    let n = path.len() - 1;
    let mut j = last[first];
    let mut out = vec![path[j]];
    while j < n {
        j = last[path[j + 1]];
        out.push(path[j]);
    }
    out
}

pub fn is_self_avoiding(path: &[usize]) -> bool {
    let mut seen = std::collections::HashSet::with_capacity(path.len());
    path.iter().all(|s| seen.insert(*s))
}

/// Weights on `A-bar = A + boundary`, for walks started in the interior `A`
/// and stopped on first reaching the boundary.
#[derive(Debug, Clone)]
pub struct BoundaryProblem {
    q: WeightMatrix,
    in_interior: Vec<bool>,
    interior: Vec<usize>,
}

impl BoundaryProblem {
    /// `interior` lists the sites of `A`; the rest of the space is the
    /// boundary. The restriction of `q` to `A` must be acceptable.
    pub fn new(q: WeightMatrix, interior: &[usize]) -> Result<Self> {
        let n = q.len();
        let mut in_interior = vec![false; n];
        for &x in interior {
            if x >= n {
                return Err(Error::UnknownSite(x.to_string()));
            }
            in_interior[x] = true;
        }
        if in_interior.iter().all(|&b| b) {
            return Err(Error::InvalidSpace("boundary must be nonempty".into()));
        }
        let mut interior: Vec<usize> = (0..n).filter(|&x| in_interior[x]).collect();
        interior.dedup();
        if interior.is_empty() {
            return Err(Error::InvalidSpace("interior must be nonempty".into()));
        }
        q.restrict_indices(&interior)?.require_acceptable()?;
        Ok(Self {
            q,
            in_interior,
            interior,
        })
    }

    pub fn weights(&self) -> &WeightMatrix {
        &self.q
    }

    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn boundary(&self) -> Vec<usize> {
        (0..self.q.len()).filter(|&x| !self.in_interior[x]).collect()
    }

    pub fn is_interior(&self, x: usize) -> bool {
        self.in_interior[x]
    }

    /// Checks `eta` is self-avoiding, runs through `A` and ends on the boundary.
    pub fn check_target(&self, eta: &[usize]) -> Result<()> {
        if eta.len() < 2 {
            return Err(Error::InvalidPath("path needs at least one step".into()));
        }
        if let Some(bad) = eta.iter().find(|&&x| x >= self.q.len()) {
            return Err(Error::UnknownSite(bad.to_string()));
        }
        if !is_self_avoiding(eta) {
            return Err(Error::InvalidPath("path is not self-avoiding".into()));
        }
        let (last, body) = eta.split_last().expect("nonempty");
        if self.is_interior(*last) || !body.iter().all(|&x| self.is_interior(x)) {
            return Err(Error::InvalidPath(
                "path must stay in the interior and end on the boundary".into(),
            ));
        }
        Ok(())
    }

    /// Every self-avoiding path from `start` through `A` to the boundary
    /// using present edges.
    pub fn self_avoiding_targets(&self, start: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let mut path = vec![start];
        self.extend_targets(&mut path, &mut out);
        out
    }

    fn extend_targets(&self, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let z = *path.last().expect("nonempty");
        for y in 0..self.q.len() {
            if !self.q.has_edge(z, y) || path.contains(&y) {
                continue;
            }
            path.push(y);
            if self.is_interior(y) {
                self.extend_targets(path, out);
            } else {
                out.push(path.clone());
            }
            path.pop();
        }
    }
}

/// Loop-erased measure from the loop-measure formula:
/// `Q(eta) prod_{j<k} G_{A_j}(eta_j, eta_j)`, `A_j = A \ {eta_0..eta_{j-1}}`.
pub fn lerw_measure_formula(problem: &BoundaryProblem, eta: &[usize]) -> Result<Complex64> {
    problem.check_target(eta)?;
    let q = problem.weights();
    let mut remaining = problem.interior().to_vec();
    let mut product = path_weight(q, eta);
    for &x in &eta[..eta.len() - 1] {
        let pos = remaining.iter().position(|&r| r == x).expect("interior site");
        product *= q.restricted_greens_diagonal(&remaining, pos)?;
        remaining.remove(pos);
    }
    Ok(product)
}

/// A brute-force path sum with a bound on what was left out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteForceSum {
    pub value: Complex64,
    pub tail_bound: f64,
}

/// Sums `Q(w)` over paths `w` from `eta_0` to the boundary of length at most
/// `max_length` whose chronological loop erasure is `eta`.
pub fn lerw_measure_bruteforce(problem: &BoundaryProblem, eta: &[usize], max_length: usize) -> Result<BruteForceSum> {
    problem.check_target(eta)?;
    let table = lerw_bruteforce_table(problem, eta[0], max_length)?;
    let value = table.get(eta).copied().unwrap_or_default();
    let tail_bound = lerw_tail_bound(problem, eta[0], *eta.last().expect("nonempty"), max_length)?;
    Ok(BruteForceSum { value, tail_bound })
}

/// One enumeration of all paths from `start` of length at most
/// `max_length`, grouped by loop erasure.
pub fn lerw_bruteforce_table(
    problem: &BoundaryProblem,
    start: usize,
    max_length: usize,
) -> Result<BTreeMap<Vec<usize>, Complex64>> {
    if !problem.is_interior(start) {
        return Err(Error::InvalidPath("start must be an interior site".into()));
    }
    let q = problem.weights();
    let boundary = problem.boundary();
    let interior = problem.interior();
    let mut sums: BTreeMap<Vec<usize>, ComplexSum> = BTreeMap::new();
    let mut path = vec![start];

    fn walk(
        q: &WeightMatrix,
        interior: &[usize],
        boundary: &[usize],
        max_length: usize,
        path: &mut Vec<usize>,
        weight: Complex64,
        sums: &mut BTreeMap<Vec<usize>, ComplexSum>,
    ) {
        let z = *path.last().expect("nonempty");
        let steps = path.len() - 1;
        if steps + 1 > max_length {
            return;
        }
        for &b in boundary {
            if q.has_edge(z, b) {
                path.push(b);
                sums.entry(loop_erase(path)).or_default().add(weight * q.get(z, b));
                path.pop();
            }
        }
        for &y in interior {
            if q.has_edge(z, y) {
                path.push(y);
                walk(q, interior, boundary, max_length, path, weight * q.get(z, y), sums);
                path.pop();
            }
        }
    }

    walk(
        q,
        interior,
        &boundary,
        max_length,
        &mut path,
        Complex64::new(1.0, 0.0),
        &mut sums,
    );
    Ok(sums.into_iter().map(|(k, v)| (k, v.value())).collect())
}

/// Bound on `sum |Q(w)|` over paths from `start` to `end` (a boundary site)
/// longer than `max_length`: `e_start' |Q_A|^L (I - |Q_A|)^{-1} |Q(., end)|`.
pub fn lerw_tail_bound(problem: &BoundaryProblem, start: usize, end: usize, max_length: usize) -> Result<f64> {
    let interior = problem.interior();
    let k = interior.len();
    let abs = problem.weights().abs_matrix();
    let inner = DMatrix::from_fn(k, k, |i, j| abs[(interior[i], interior[j])]);
    let exit = DVector::from_fn(k, |i, _| abs[(interior[i], end)]);
    let s = interior
        .iter()
        .position(|&x| x == start)
        .ok_or_else(|| Error::InvalidPath("start must be an interior site".into()))?;
    let resolvent = inverse_real(&(DMatrix::identity(k, k) - &inner))?;
    let tail = inner.pow(max_length as u32) * resolvent * exit;
    Ok(with_rounding_slack(tail[s]))
}

/// A finite simple undirected graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleGraph {
    labels: Vec<String>,
    adj: Vec<Vec<usize>>,
    edges: Vec<(usize, usize)>,
}

impl SimpleGraph {
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::with_labels((0..n).map(|i| i.to_string()).collect(), edges)
    }

    pub fn with_labels(labels: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(Error::InvalidGraph("graph has no vertices".into()));
        }
        let mut adj = vec![Vec::new(); n];
        let mut canon = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!("edge ({a}, {b}) out of range")));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop at {a}")));
            }
            let e = (a.min(b), a.max(b));
            if canon.contains(&e) {
                return Err(Error::InvalidGraph(format!("duplicate edge ({a}, {b})")));
            }
            canon.push(e);
            adj[a].push(b);
            adj[b].push(a);
        }
        for row in &mut adj {
            row.sort_unstable();
        }
        canon.sort_unstable();
        Ok(Self {
            labels,
            adj,
            edges: canon,
        })
    }

    pub fn complete(n: usize) -> Self {
        let edges: Vec<_> = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).collect();
        Self::new(n, &edges).expect("complete graph")
    }

    pub fn cycle(n: usize) -> Self {
        let edges: Vec<_> = (0..n).map(|a| (a, (a + 1) % n)).collect();
        Self::new(n, &edges).expect("cycle graph")
    }

    pub fn path(n: usize) -> Self {
        let edges: Vec<_> = (1..n).map(|a| (a - 1, a)).collect();
        Self::new(n, &edges).expect("path graph")
    }

    /// A random spanning tree by uniform attachment plus each remaining edge
    /// with probability `extra`. Always connected.
    pub fn random_connected<R: Rng + ?Sized>(n: usize, extra: f64, rng: &mut R) -> Self {
        let mut edges = Vec::new();
        for v in 1..n {
            edges.push((rng.random_range(0..v), v));
        }
        for a in 0..n {
            for b in a + 1..n {
                if !edges.contains(&(a, b)) && rng.random_bool(extra) {
                    edges.push((a, b));
                }
            }
        }
        Self::new(n, &edges).expect("random graph")
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.adj[x]
    }

    pub fn degree(&self, x: usize) -> usize {
        self.adj[x].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&b).is_ok()
    }

    pub fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.len()];
        seen[0] = true;
        let mut queue = VecDeque::from([0]);
        let mut count = 1;
        while let Some(x) = queue.pop_front() {
            for &y in &self.adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    count += 1;
                    queue.push_back(y);
                }
            }
        }
        count == self.len()
    }

    /// Simple random walk weights `Q(x, y) = 1/d(x)` for adjacent `x, y`.
    pub fn walk_matrix(&self) -> WeightMatrix {
        let n = self.len();
        let m = DMatrix::from_fn(n, n, |x, y| {
            if self.has_edge(x, y) {
                1.0 / self.degree(x) as f64
            } else {
                0.0
            }
        });
        WeightMatrix::from_real(&m).expect("walk matrix")
    }

    /// `D - K` with the row and column of `root` removed.
    pub fn reduced_laplacian(&self, root: usize) -> DMatrix<f64> {
        let rest: Vec<usize> = (0..self.len()).filter(|&x| x != root).collect();
        let k = rest.len();
        DMatrix::from_fn(k, k, |i, j| {
            let (x, y) = (rest[i], rest[j]);
            if x == y {
                self.degree(x) as f64
            } else if self.has_edge(x, y) {
                -1.0
            } else {
                0.0
            }
        })
    }

    fn check_vertex(&self, x: usize) -> Result<()> {
        if x < self.len() {
            Ok(())
        } else {
            Err(Error::UnknownSite(x.to_string()))
        }
    }
}

/// A spanning tree oriented towards its root.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpanningTree {
    root: usize,
    parent: Vec<Option<usize>>,
}

impl SpanningTree {
    pub fn from_parents(root: usize, parent: Vec<Option<usize>>) -> Result<Self> {
        let tree = Self { root, parent };
        tree.check_shape()?;
        Ok(tree)
    }

    /// Orient an undirected edge set towards `root`.
    pub fn from_edges(n: usize, root: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if edges.len() + 1 != n {
            return Err(Error::InvalidGraph("a spanning tree has n - 1 edges".into()));
        }
        let mut adj = vec![Vec::new(); n];
        for &(a, b) in edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        let mut parent = vec![None; n];
        let mut seen = vec![false; n];
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(x) = queue.pop_front() {
            for &y in &adj[x] {
                if !seen[y] {
                    seen[y] = true;
                    parent[y] = Some(x);
                    queue.push_back(y);
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::InvalidGraph("edges do not span".into()));
        }
        Self::from_parents(root, parent)
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn parent(&self, x: usize) -> Option<usize> {
        self.parent[x]
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Edges as sorted `(min, max)` pairs.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut e: Vec<_> = self
            .parent
            .iter()
            .enumerate()
            .filter_map(|(x, p)| p.map(|p| (x.min(p), x.max(p))))
            .collect();
        e.sort_unstable();
        e
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.parent.len();
        if self.root >= n || self.parent[self.root].is_some() {
            return Err(Error::InvalidGraph("root must have no parent".into()));
        }
        for start in 0..n {
            let mut x = start;
            let mut hops = 0;
            while x != self.root {
                x = self.parent[x].ok_or_else(|| Error::InvalidGraph(format!("vertex {x} is detached")))?;
                hops += 1;
                if hops > n {
                    return Err(Error::InvalidGraph("parent map has a cycle".into()));
                }
            }
        }
        Ok(())
    }

    /// Whether every tree edge is an edge of `graph`.
    pub fn is_spanning_tree_of(&self, graph: &SimpleGraph) -> bool {
        self.len() == graph.len()
            && self.check_shape().is_ok()
            && self.edges().iter().all(|&(a, b)| graph.has_edge(a, b))
    }
}

/// Wilson's algorithm: from the least-index vertex not yet in the tree, run
/// simple random walk until it hits the tree, erase its loops
/// chronologically and graft the result.
pub fn wilson_sample<R: Rng + ?Sized>(graph: &SimpleGraph, root: usize, rng: &mut R) -> Result<SpanningTree> {
    graph.check_vertex(root)?;
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    let n = graph.len();
    let mut in_tree = vec![false; n];
    let mut parent = vec![None; n];
    in_tree[root] = true;
    let mut steps: u64 = 0;
    let mut walk = Vec::new();
    for start in 0..n {
        if in_tree[start] {
            continue;
        }
        walk.clear();
        walk.push(start);
        let mut x = start;
        while !in_tree[x] {
            steps += 1;
            if steps > WILSON_STEP_CAP {
                return Err(Error::WalkCapExceeded { cap: WILSON_STEP_CAP });
            }
            let nbrs = graph.neighbors(x);
            x = nbrs[rng.random_range(0..nbrs.len())];
            walk.push(x);
        }
        let branch = loop_erase(&walk);
        for e in branch.windows(2) {
            parent[e[0]] = Some(e[1]);
            in_tree[e[0]] = true;
        }
    }
    SpanningTree::from_parents(root, parent)
}

/// Number of spanning trees as `det(D - K)` with the root removed.
pub fn tree_count_det(graph: &SimpleGraph, root: usize) -> Result<u64> {
    graph.check_vertex(root)?;
    if !graph.is_connected() {
        return Err(Error::Disconnected);
    }
    if graph.len() == 1 {
        return Ok(1);
    }
    let det = graph.reduced_laplacian(root).lu().determinant();
    let rounded = det.round();
    if (det - rounded).abs() >= COUNT_ROUNDING_TOL || rounded < 0.0 {
        return Err(Error::NumericalFailure(format!(
            "tree determinant {det} is not an integer"
        )));
    }
    Ok(rounded as u64)
}

/// Probability that Wilson's algorithm outputs any given tree,
/// `[prod_{x != root} d(x)]^{-1} F(A')` with `F(A') = 1/det(I - Q_{A'})`.
pub fn wilson_tree_probability(graph: &SimpleGraph, root: usize) -> Result<f64> {
    graph.check_vertex(root)?;
    if graph.len() == 1 {
        return Ok(1.0);
    }
    let rest: Vec<usize> = (0..graph.len()).filter(|&x| x != root).collect();
    let q = graph.walk_matrix().restrict_indices(&rest)?;
    let f = crate::loops::f_exact(&q)?;
    let degrees: f64 = rest.iter().map(|&x| graph.degree(x) as f64).product();
    Ok(f.re / degrees)
}

/// All spanning trees by filtering edge subsets of size `n - 1`; each is
/// rooted at vertex 0.
pub fn enumerate_spanning_trees(graph: &SimpleGraph) -> Result<Vec<SpanningTree>> {
    let n = graph.len();
    if n > MAX_ENUMERATION_VERTICES {
        return Err(Error::TooLarge(format!(
            "{n} vertices; enumeration is limited to {MAX_ENUMERATION_VERTICES}"
        )));
    }
    let edges = graph.edges();
    let mut out = Vec::new();
    let mut chosen = Vec::with_capacity(n - 1);
    choose_acyclic(edges, 0, n - 1, n, &mut chosen, &mut out)?;
    Ok(out)
}

fn choose_acyclic(
    edges: &[(usize, usize)],
    from: usize,
    needed: usize,
    n: usize,
    chosen: &mut Vec<(usize, usize)>,
    out: &mut Vec<SpanningTree>,
) -> Result<()> {
    if chosen.len() == needed {
        if is_forest(n, chosen) {
            out.push(SpanningTree::from_edges(n, 0, chosen)?);
        }
        return Ok(());
    }
    let left = needed - chosen.len();
    for i in from..edges.len() {
        if edges.len() - i < left {
            break;
        }
        chosen.push(edges[i]);
        choose_acyclic(edges, i + 1, needed, n, chosen, out)?;
        chosen.pop();
    }
    Ok(())
}

fn is_forest(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], mut x: usize) -> usize {
        while p[x] != x {
            p[x] = p[p[x]];
            x = p[x];
        }
        x
    }
    for &(a, b) in edges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            return false;
        }
        parent[ra] = rb;
    }
    true
}
