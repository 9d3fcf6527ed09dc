use serde::Serialize;
use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use super::graph::MetricGraph;
use crate::error::{Error, Result};

/// Paths joining `source` to `sink` inside the graph's node rectangle.
/// Node sets are given as local indices of the graph.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveFamily {
    source: Vec<bool>,
    sink: Vec<bool>,
}

impl CurveFamily {
    pub fn new(graph: &MetricGraph, source: Vec<usize>, sink: Vec<usize>) -> Result<Self> {
        let n = graph.node_count();
        let mut s = vec![false; n];
        let mut t = vec![false; n];
        for k in source {
            if k >= n {
                return Err(Error::Precondition(format!("source node {k} outside the region")));
            }
            s[k] = true;
        }
        for k in sink {
            if k >= n {
                return Err(Error::Precondition(format!("sink node {k} outside the region")));
            }
            if s[k] {
                return Err(Error::Precondition(format!("node {k} is both source and sink")));
            }
            t[k] = true;
        }
        Ok(CurveFamily { source: s, sink: t })
    }

    /// Family selected by predicates on grid node positions.
    pub fn from_predicates(
        graph: &MetricGraph,
        source: impl Fn([f64; 2]) -> bool,
        sink: impl Fn([f64; 2]) -> bool,
    ) -> Result<Self> {
        let rect = *graph.rect();
        let d = *graph.domain();
        let mut s = Vec::new();
        let mut t = Vec::new();
        for k in 0..graph.node_count() {
            let (i, j) = rect.grid(k);
            let p = d.node(i, j);
            if source(p) {
                s.push(k);
            } else if sink(p) {
                t.push(k);
            }
        }
        CurveFamily::new(graph, s, t)
    }

    pub fn source_count(&self) -> usize {
        self.source.iter().filter(|b| **b).count()
    }

    pub fn sink_count(&self) -> usize {
        self.sink.iter().filter(|b| **b).count()
    }
}

/// Solver settings for [`discrete_modulus`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModulusOptions {
    /// Stop once every path has `rho`-length at least `1 - tol`.
    pub tol: f64,
    pub max_rounds: usize,
    /// Violated paths added per round.
    pub paths_per_round: usize,
    pub max_sweeps: usize,
}

impl ModulusOptions {
    pub fn with_tol(tol: f64) -> Self {
        ModulusOptions {
            tol,
            ..Default::default()
        }
    }
}

impl Default for ModulusOptions {
    fn default() -> Self {
        ModulusOptions {
            tol: 1e-3,
            max_rounds: 400,
            paths_per_round: 4096,
            max_sweeps: 20_000,
        }
    }
}

/// Result of [`discrete_modulus`].
#[derive(Debug, Clone, Serialize)]
pub struct ModulusResult {
    /// `sum rho(v)^2 a(v)` of the returned density.
    pub value: f64,
    /// Density on the nodes of the graph's region (local order); empty for
    /// a family without paths.
    pub density: Vec<f64>,
    /// Paths (local node indices) whose constraints carry a positive multiplier.
    pub active_paths: Vec<Vec<usize>>,
    pub iterations: usize,
    /// Shortest `rho`-length of any family path at termination.
    pub shortest_path: f64,
    /// Dual lower bound on the discrete modulus.
    pub lower_bound: f64,
    /// Energy of `rho / shortest_path`, an upper bound on the discrete modulus.
    pub upper_bound: f64,
    pub certificate_gap: f64,
}

impl ModulusResult {
    fn empty() -> Self {
        ModulusResult {
            value: 0.0,
            density: Vec::new(),
            active_paths: Vec::new(),
            iterations: 0,
            shortest_path: f64::INFINITY,
            lower_bound: 0.0,
            upper_bound: 0.0,
            certificate_gap: 0.0,
        }
    }
}

struct Constraint {
    path: Vec<usize>,
    entries: Vec<(u32, f64)>,
    /// `c^T Q^-1 c` with `Q = 2 diag(a)`.
    qnorm: f64,
}

struct ShortestPaths {
    dist: Vec<f64>,
    pred: Vec<u32>,
}

/// Relative length window of the seed paths.
const SEED_SLACK: f64 = 0.05;

const NO_PRED: u32 = u32::MAX;

/// Multi-source Dijkstra from `start`; nodes in `stop` are reached but not
/// expanded. Ties break on the smaller node index.
fn shortest_paths(graph: &MetricGraph, weights: &[f64], start: &[bool], stop: &[bool]) -> ShortestPaths {
    let n = graph.node_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![NO_PRED; n];
    let mut done = vec![false; n];
    let mut heap = BinaryHeap::new();
    for (k, s) in start.iter().enumerate() {
        if *s {
            dist[k] = 0.0;
            heap.push(Reverse((0u64, k as u32)));
        }
    }
    while let Some(Reverse((dbits, u))) = heap.pop() {
        let u = u as usize;
        if done[u] {
            continue;
        }
        done[u] = true;
        if stop[u] {
            continue;
        }
        let du = f64::from_bits(dbits);
        for &e in &graph.adjacency[u] {
            let edge = &graph.edges[e as usize];
            let v = if edge.a as usize == u { edge.b } else { edge.a } as usize;
            if done[v] || start[v] {
                continue;
            }
            let nd = du + weights[e as usize];
            if nd < dist[v] || (nd == dist[v] && (u as u32) < pred[v]) {
                dist[v] = nd;
                pred[v] = u as u32;
                // nonnegative floats order like their bit patterns
                heap.push(Reverse((nd.to_bits(), v as u32)));
            }
        }
    }
    ShortestPaths { dist, pred }
}

/// Nodes from the tree root to `end`.
fn trace(sp: &ShortestPaths, end: usize) -> Vec<usize> {
    let mut path = vec![end];
    let mut k = end;
    while sp.pred[k] != NO_PRED {
        k = sp.pred[k] as usize;
        path.push(k);
    }
    path.reverse();
    path
}

fn edge_between(graph: &MetricGraph, a: usize, b: usize) -> usize {
    graph.adjacency[a]
        .iter()
        .copied()
        .find(|&e| {
            let edge = &graph.edges[e as usize];
            (edge.a as usize == a && edge.b as usize == b) || (edge.a as usize == b && edge.b as usize == a)
        })
        .expect("consecutive path nodes share an edge") as usize
}

fn constraint_for(graph: &MetricGraph, path: Vec<usize>, inv2a: &[f64]) -> Constraint {
    let mut entries: Vec<(u32, f64)> = Vec::new();
    for w in path.windows(2) {
        let e = edge_between(graph, w[0], w[1]);
        entries.extend_from_slice(graph.edge_stencil(e));
    }
    entries.sort_by_key(|&(k, _)| k);
    let mut merged: Vec<(u32, f64)> = Vec::with_capacity(entries.len());
    for (k, c) in entries {
        match merged.last_mut() {
            Some(last) if last.0 == k => last.1 += c,
            _ => merged.push((k, c)),
        }
    }
    let qnorm = merged.iter().map(|&(k, c)| c * c * inv2a[k as usize]).sum();
    Constraint {
        path,
        entries: merged,
        qnorm,
    }
}

/// One Hildreth step on constraint `c`; returns its KKT violation before the step.
#[inline]
fn hildreth_step(c: &Constraint, l: &mut f64, rho: &mut [f64], inv2a: &[f64]) -> f64 {
    let s: f64 = c.entries.iter().map(|&(k, v)| v * rho[k as usize]).sum();
    let viol = if *l > 0.0 { (1.0 - s).abs() } else { (1.0 - s).max(0.0) };
    let next = (*l + (1.0 - s) / c.qnorm).max(0.0);
    let delta = next - *l;
    if delta != 0.0 {
        for &(k, v) in &c.entries {
            rho[k as usize] += delta * v * inv2a[k as usize];
        }
        *l = next;
    }
    viol
}

/// Hildreth's dual coordinate ascent on `min rho^T A rho` subject to the
/// accumulated path constraints `c^T rho >= 1`, until every KKT violation is
/// below `tol`. Between full sweeps only the working set (positive
/// multiplier or violated) is swept. Returns the number of sweeps.
fn hildreth(
    constraints: &[Constraint],
    lambda: &mut [f64],
    rho: &mut [f64],
    inv2a: &[f64],
    tol: f64,
    max_sweeps: usize,
) -> usize {
    let mut sweeps = 0;
    while sweeps < max_sweeps {
        let mut worst = 0.0f64;
        let mut working = Vec::new();
        for (i, (c, l)) in constraints.iter().zip(lambda.iter_mut()).enumerate() {
            let viol = hildreth_step(c, l, rho, inv2a);
            worst = worst.max(viol);
            if *l > 0.0 || viol > 0.0 {
                working.push(i);
            }
        }
        sweeps += 1;
        if worst < tol {
            break;
        }
        for _ in 0..64 {
            if sweeps >= max_sweeps {
                break;
            }
            let mut w = 0.0f64;
            for &i in &working {
                w = w.max(hildreth_step(&constraints[i], &mut lambda[i], rho, inv2a));
            }
            sweeps += 1;
            if w < 0.5 * tol {
                break;
            }
        }
    }
    sweeps
}

/// Violated paths that together cover as many distinct nodes as possible.
///
/// Every node `v` yields the shortest family path through it, of length
/// `d_source(v) + d_sink(v)`; candidates are taken in order of length,
/// skipping those whose through-node already lies on a chosen path.
fn violated_paths(
    from_source: &ShortestPaths,
    from_sink: &ShortestPaths,
    family: &CurveFamily,
    threshold: f64,
    limit: usize,
) -> Vec<Vec<usize>> {
    let n = from_source.dist.len();
    let mut candidates: Vec<(f64, usize)> = (0..n)
        .filter_map(|v| {
            let len = from_source.dist[v] + from_sink.dist[v];
            (len < threshold).then_some((len, v))
        })
        .collect();
    candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut covered = vec![false; n];
    let mut out = Vec::new();
    for (_, v) in candidates {
        if out.len() >= limit {
            break;
        }
        if covered[v] {
            continue;
        }
        let mut path = if family.source[v] { vec![v] } else { trace(from_source, v) };
        if !family.sink[v] {
            let mut tail = trace(from_sink, v);
            tail.pop();
            tail.reverse();
            path.extend(tail);
        }
        for &k in &path {
            covered[k] = true;
        }
        out.push(path);
    }
    out
}

/// Discrete modulus of a path family by constraint generation.
///
/// Each round computes `rho`-distances from the source set and from the
/// sink set; violated paths become constraints of the restricted quadratic
/// program, which is re-solved warm. The loop stops when every path has
/// `rho`-length at least `1 - tol`.
pub fn discrete_modulus(graph: &MetricGraph, family: &CurveFamily, opts: ModulusOptions) -> Result<ModulusResult> {
    discrete_modulus_seeded(graph, family, opts, None)
}

/// [`discrete_modulus`] with the initial constraints taken from the
/// near-shortest paths of a guessed density `seed` (local node order).
/// The result does not depend on the seed beyond the stopping tolerance.
pub fn discrete_modulus_seeded(
    graph: &MetricGraph,
    family: &CurveFamily,
    opts: ModulusOptions,
    seed: Option<&[f64]>,
) -> Result<ModulusResult> {
    if !(opts.tol > 0.0 && opts.tol <= 1e-2) {
        return Err(Error::Precondition(format!("tolerance {} must lie in (0, 1e-2]", opts.tol)));
    }
    let n = graph.node_count();
    if family.source.len() != n {
        return Err(Error::Precondition("curve family belongs to a different graph".into()));
    }
    let areas = graph.areas();
    let inv2a: Vec<f64> = areas.iter().map(|a| 0.5 / a).collect();
    let mut rho = vec![0.0; n];
    let mut lambda: Vec<f64> = Vec::new();
    let mut constraints: Vec<Constraint> = Vec::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut upper = f64::INFINITY;
    let mut lower = 0.0f64;
    let final_tol = 0.1 * opts.tol;

    if let Some(seed) = seed.filter(|s| s.len() == n && s.iter().any(|r| *r > 0.0)) {
        let weights = graph.edge_weights(seed);
        let from_source = shortest_paths(graph, &weights, &family.source, &family.sink);
        let from_sink = shortest_paths(graph, &weights, &family.sink, &family.source);
        let shortest = (0..n)
            .filter(|&k| family.sink[k])
            .map(|k| from_source.dist[k])
            .fold(f64::INFINITY, f64::min);
        if shortest > 0.0 && shortest.is_finite() {
            let near = shortest * (1.0 + SEED_SLACK);
            for path in violated_paths(&from_source, &from_sink, family, near, opts.paths_per_round) {
                if seen.insert(path.clone()) {
                    constraints.push(constraint_for(graph, path, &inv2a));
                    lambda.push(0.0);
                }
            }
            hildreth(&constraints, &mut lambda, &mut rho, &inv2a, 10.0 * final_tol, opts.max_sweeps);
        }
    }

    for round in 0..opts.max_rounds {
        let weights = graph.edge_weights(&rho);
        let from_source = shortest_paths(graph, &weights, &family.source, &family.sink);
        let shortest = (0..n)
            .filter(|&k| family.sink[k])
            .map(|k| from_source.dist[k])
            .fold(f64::INFINITY, f64::min);
        if !shortest.is_finite() {
            return Ok(ModulusResult::empty());
        }
        let energy = energy_of(&rho, areas);
        if shortest > 0.0 {
            upper = upper.min(energy / (shortest * shortest));
        }
        if shortest >= 1.0 - opts.tol {
            let active_paths = constraints
                .iter()
                .zip(&lambda)
                .filter(|(_, l)| **l > 0.0)
                .map(|(c, _)| c.path.clone())
                .collect();
            return Ok(ModulusResult {
                value: energy,
                density: rho,
                active_paths,
                iterations: round,
                shortest_path: shortest,
                lower_bound: lower,
                upper_bound: upper,
                certificate_gap: (upper - lower).max(0.0),
            });
        }
        // solve loosely while far from admissible
        let inner_tol = final_tol.max(0.1 * (1.0 - shortest));
        let from_sink = shortest_paths(graph, &weights, &family.sink, &family.source);
        let mut added = 0;
        for path in violated_paths(&from_source, &from_sink, family, 1.0 - inner_tol, opts.paths_per_round) {
            if seen.insert(path.clone()) {
                constraints.push(constraint_for(graph, path, &inv2a));
                lambda.push(0.0);
                added += 1;
            }
        }
        // with nothing new to add, only a tighter inner solve can make progress
        let tol = if added == 0 { 1e-3 * final_tol } else { inner_tol };
        hildreth(&constraints, &mut lambda, &mut rho, &inv2a, tol, opts.max_sweeps);
        lower = lower.max(lambda.iter().sum::<f64>() - energy_of(&rho, areas));
    }
    Err(Error::IterationCap {
        rounds: opts.max_rounds,
        lower,
        upper,
    })
}

fn energy_of(rho: &[f64], areas: &[f64]) -> f64 {
    rho.iter().zip(areas).map(|(r, a)| r * r * a).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norm_field::{lp_field, GridDomain};

    fn side_family(g: &MetricGraph) -> CurveFamily {
        let d = *g.domain();
        CurveFamily::from_predicates(g, |p| p[0] <= d.x0() + 1e-12, |p| p[0] >= d.x1() - 1e-12).unwrap()
    }

    #[test]
    fn unit_square_modulus() {
        let d = GridDomain::unit_square(17).unwrap();
        let g = MetricGraph::new(&lp_field(d, 2.0).unwrap()).unwrap();
        let r = discrete_modulus(&g, &side_family(&g), ModulusOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 2e-2, "{}", r.value);
        assert!(r.lower_bound <= r.value + 1e-12 && r.value <= r.upper_bound + 1e-12);
        let recomputed: f64 = r.density.iter().zip(g.areas()).map(|(p, a)| p * p * a).sum();
        assert!((recomputed - r.value).abs() <= 1e-12 * r.value);
    }

    #[test]
    fn empty_source_has_zero_modulus() {
        let d = GridDomain::unit_square(9).unwrap();
        let g = MetricGraph::new(&lp_field(d, 2.0).unwrap()).unwrap();
        let fam = CurveFamily::new(&g, vec![], vec![0, 1]).unwrap();
        let r = discrete_modulus(&g, &fam, ModulusOptions::default()).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.density.is_empty());
    }

    #[test]
    fn rejects_bad_tolerance_and_overlap() {
        let d = GridDomain::unit_square(5).unwrap();
        let g = MetricGraph::new(&lp_field(d, 2.0).unwrap()).unwrap();
        assert!(CurveFamily::new(&g, vec![0], vec![0]).is_err());
        let fam = side_family(&g);
        assert!(discrete_modulus(&g, &fam, ModulusOptions::with_tol(0.5)).is_err());
    }
}
