use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::convex_kernel::Norm2;
use crate::error::{Error, Result};
use crate::norm_field::{GridDomain, NormField};

/// Largest step of the lattice stencil, in grid units.
pub const STENCIL_RADIUS: i64 = 3;

/// An inclusive rectangle of node indices `[i0, i1] x [j0, j1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeRect {
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
}

impl NodeRect {
    pub fn full(d: &GridDomain) -> Self {
        NodeRect {
            i0: 0,
            i1: d.nx() - 1,
            j0: 0,
            j1: d.ny() - 1,
        }
    }

    /// Nodes whose coordinates lie in `[x0, x1] x [y0, y1]`.
    pub fn covering(d: &GridDomain, x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self> {
        let eps = 1e-9;
        let lo = |v: f64, o: f64, h: f64| ((v - o) / h - eps).ceil().max(0.0) as usize;
        let hi = |v: f64, o: f64, h: f64, n: usize| {
            (((v - o) / h + eps).floor().max(0.0) as usize).min(n - 1)
        };
        let r = NodeRect {
            i0: lo(x0, d.x0(), d.hx()),
            i1: hi(x1, d.x0(), d.hx(), d.nx()),
            j0: lo(y0, d.y0(), d.hy()),
            j1: hi(y1, d.y0(), d.hy(), d.ny()),
        };
        if !(x1 > x0 && y1 > y0) || !d.contains([x0, y0]) || !d.contains([x1, y1]) {
            return Err(Error::Precondition(format!(
                "rectangle [{x0}, {x1}] x [{y0}, {y1}] is not inside the field domain"
            )));
        }
        if r.i1 < r.i0 + 1 || r.j1 < r.j0 + 1 {
            return Err(Error::Precondition(format!(
                "rectangle [{x0}, {x1}] x [{y0}, {y1}] covers fewer than 2x2 nodes"
            )));
        }
        Ok(r)
    }

    pub fn width(&self) -> usize {
        self.i1 - self.i0 + 1
    }

    pub fn height(&self) -> usize {
        self.j1 - self.j0 + 1
    }

    pub fn len(&self) -> usize {
        self.width() * self.height()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, i: i64, j: i64) -> bool {
        i >= self.i0 as i64 && i <= self.i1 as i64 && j >= self.j0 as i64 && j <= self.j1 as i64
    }

    /// Local index of grid node `(i, j)`.
    #[inline]
    pub fn local(&self, i: usize, j: usize) -> usize {
        (j - self.j0) * self.width() + (i - self.i0)
    }

    #[inline]
    pub fn grid(&self, k: usize) -> (usize, usize) {
        (self.i0 + k % self.width(), self.j0 + k / self.width())
    }
}

/// An undirected edge with the stencil that integrates a node density along it.
#[derive(Debug, Clone)]
pub(crate) struct Edge {
    pub a: u32,
    pub b: u32,
    pub start: u32,
    pub end: u32,
}

/// Grid graph with lengths and areas taken from a norm field.
///
/// Edges join each node to every node reachable by a primitive lattice step
/// of at most [`STENCIL_RADIUS`] cells. Densities live on nodes; the
/// `rho`-length of an edge is its field length times the trapezoid-rule
/// average of the (bilinearly interpolated) density along the segment.
#[derive(Debug, Clone)]
pub struct MetricGraph {
    domain: GridDomain,
    rect: NodeRect,
    pub(crate) edges: Vec<Edge>,
    pub(crate) stencil: Vec<(u32, f64)>,
    /// For each local node, the incident edge ids.
    pub(crate) adjacency: Vec<Vec<u32>>,
    lengths: Vec<f64>,
    areas: Vec<f64>,
}

/// Primitive steps `(dx, dy)`, one per undirected direction.
pub fn stencil_steps() -> Vec<(i64, i64)> {
    let mut steps = Vec::new();
    for dx in 0..=STENCIL_RADIUS {
        for dy in -STENCIL_RADIUS..=STENCIL_RADIUS {
            if (dx == 0 && dy <= 0) || gcd(dx, dy.abs()) != 1 {
                continue;
            }
            steps.push((dx, dy));
        }
    }
    steps
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl MetricGraph {
    pub fn new(field: &NormField) -> Result<Self> {
        MetricGraph::restricted(field, NodeRect::full(field.domain()))
    }

    /// The graph on the nodes of `rect` only.
    pub fn restricted(field: &NormField, rect: NodeRect) -> Result<Self> {
        let d = *field.domain();
        if rect.i1 >= d.nx() || rect.j1 >= d.ny() || rect.i1 <= rect.i0 || rect.j1 <= rect.j0 {
            return Err(Error::Precondition(format!("node rectangle {rect:?} is not inside the grid")));
        }
        let (hx, hy) = (d.hx(), d.hy());
        let l2_area = Norm2::euclidean(field.samples()).unit_ball_area();

        let n = rect.len();
        let mut areas = Vec::with_capacity(n);
        for k in 0..n {
            let (i, j) = rect.grid(k);
            let wx = if i == rect.i0 || i == rect.i1 { 0.5 } else { 1.0 };
            let wy = if j == rect.j0 || j == rect.j1 { 0.5 } else { 1.0 };
            let m = field.norm(i, j);
            areas.push(wx * wy * hx * hy * (l2_area / m.unit_ball_area()));
        }

        let steps = stencil_steps();
        let mut edges = Vec::new();
        let mut stencil = Vec::new();
        let mut lengths = Vec::new();
        let mut adjacency = vec![Vec::new(); n];
        for k in 0..n {
            let (i, j) = rect.grid(k);
            for &(dx, dy) in &steps {
                let (ti, tj) = (i as i64 + dx, j as i64 + dy);
                if !rect.contains(ti, tj) {
                    continue;
                }
                let (ti, tj) = (ti as usize, tj as usize);
                let v = Complex64::new(dx as f64 * hx, dy as f64 * hy);
                let len = 0.5 * (field.norm(i, j).eval_c(v) + field.norm(ti, tj).eval_c(v));
                let m = dx.abs().max(dy.abs());
                let start = stencil.len() as u32;
                for s in 0..=m {
                    let w = if s == 0 || s == m { 0.5 / m as f64 } else { 1.0 / m as f64 };
                    // one coordinate of every sample is an integer
                    let (num_x, num_y) = (dx * s, dy * s);
                    let (bx, fx) = (num_x.div_euclid(m), num_x.rem_euclid(m));
                    let (by, fy) = (num_y.div_euclid(m), num_y.rem_euclid(m));
                    let base_i = i as i64 + bx;
                    let base_j = j as i64 + by;
                    let mut push = |pi: i64, pj: i64, weight: f64| {
                        if weight != 0.0 {
                            stencil.push((rect.local(pi as usize, pj as usize) as u32, len * w * weight));
                        }
                    };
                    if fx == 0 && fy == 0 {
                        push(base_i, base_j, 1.0);
                    } else if fx == 0 {
                        let t = fy as f64 / m as f64;
                        push(base_i, base_j, 1.0 - t);
                        push(base_i, base_j + 1, t);
                    } else {
                        let t = fx as f64 / m as f64;
                        push(base_i, base_j, 1.0 - t);
                        push(base_i + 1, base_j, t);
                    }
                }
                let end = stencil.len() as u32;
                let id = edges.len() as u32;
                let b = rect.local(ti, tj);
                edges.push(Edge {
                    a: k as u32,
                    b: b as u32,
                    start,
                    end,
                });
                lengths.push(len);
                adjacency[k].push(id);
                adjacency[b].push(id);
            }
        }
        Ok(MetricGraph {
            domain: d,
            rect,
            edges,
            stencil,
            adjacency,
            lengths,
            areas,
        })
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn rect(&self) -> &NodeRect {
        &self.rect
    }

    pub fn node_count(&self) -> usize {
        self.rect.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Field length of every edge.
    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    /// Endpoints (local indices) of an edge.
    pub fn endpoints(&self, e: usize) -> (usize, usize) {
        (self.edges[e].a as usize, self.edges[e].b as usize)
    }

    /// Area weight `a(v)` of every local node.
    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    /// `rho`-length of every edge for a local density.
    pub fn edge_weights(&self, rho: &[f64]) -> Vec<f64> {
        self.edges
            .iter()
            .map(|e| {
                self.stencil[e.start as usize..e.end as usize]
                    .iter()
                    .map(|&(k, c)| c * rho[k as usize])
                    .sum()
            })
            .collect()
    }

    pub(crate) fn edge_stencil(&self, e: usize) -> &[(u32, f64)] {
        let e = &self.edges[e];
        &self.stencil[e.start as usize..e.end as usize]
    }
}
