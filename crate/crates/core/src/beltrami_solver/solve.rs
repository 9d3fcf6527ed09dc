use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::banded::BandedHermitian;
use crate::norm_field::{ComplexGrid, GridDomain, GridMap};
use crate::error::{Error, Result};

/// Largest `|mu|` the solver accepts.
pub const MU_LIMIT: f64 = 0.96;

/// Relative residual above which [`solve_beltrami`] logs a warning.
pub const RESIDUAL_WARNING: f64 = 1e-3;

/// Correction steps applied after the normal-equation solve.
const REFINEMENT_STEPS: usize = 2;

/// A node whose image is prescribed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub node: (usize, usize),
    pub image: [f64; 2],
}

impl Anchor {
    pub fn new(node: (usize, usize), image: [f64; 2]) -> Self {
        Anchor { node, image }
    }

    /// Anchor that keeps `node` at its own position.
    pub fn fixed(domain: &GridDomain, node: (usize, usize)) -> Self {
        Anchor {
            node,
            image: domain.node(node.0, node.1),
        }
    }
}

/// `f_zbar = mu f_z` on a grid, normalized by two or three anchors.
///
/// Two anchors fix the similarity freedom of the discrete problem; a third is
/// matched exactly as well and then also fixes the affine part.
#[derive(Debug, Clone, PartialEq)]
pub struct BeltramiProblem {
    mu: ComplexGrid,
    anchors: Vec<Anchor>,
}

impl BeltramiProblem {
    pub fn new(mu: ComplexGrid, anchors: Vec<Anchor>) -> Result<Self> {
        let sup = mu.max_abs();
        if !(sup <= MU_LIMIT) {
            return Err(Error::Precondition(format!(
                "sup |mu| = {sup} exceeds the solver limit {MU_LIMIT}"
            )));
        }
        let d = mu.domain;
        if !(2..=3).contains(&anchors.len()) {
            return Err(Error::Precondition(format!(
                "need 2 or 3 anchors, got {}",
                anchors.len()
            )));
        }
        for (k, a) in anchors.iter().enumerate() {
            if a.node.0 >= d.nx() || a.node.1 >= d.ny() {
                return Err(Error::Precondition(format!(
                    "anchor node {:?} outside the {}x{} grid",
                    a.node,
                    d.nx(),
                    d.ny()
                )));
            }
            if !(a.image[0].is_finite() && a.image[1].is_finite()) {
                return Err(Error::Precondition("anchor image is not finite".into()));
            }
            if anchors[..k].iter().any(|b| b.node == a.node || b.image == a.image) {
                return Err(Error::Precondition("anchors must be distinct".into()));
            }
        }
        if anchors.len() == 3 {
            let p: Vec<[f64; 2]> = anchors.iter().map(|a| d.node(a.node.0, a.node.1)).collect();
            let cross = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
            if cross.abs() <= 1e-12 * d.hx() * d.hy() {
                return Err(Error::Precondition("anchor nodes are collinear".into()));
            }
        }
        Ok(BeltramiProblem { mu, anchors })
    }

    /// Anchors the bottom-left and bottom-right corners at their own positions.
    pub fn normalized(mu: ComplexGrid) -> Result<Self> {
        let d = mu.domain;
        let anchors = vec![Anchor::fixed(&d, (0, 0)), Anchor::fixed(&d, (d.nx() - 1, 0))];
        BeltramiProblem::new(mu, anchors)
    }

    pub fn mu(&self) -> &ComplexGrid {
        &self.mu
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }
}

/// Solution of a [`BeltramiProblem`].
#[derive(Debug, Clone)]
pub struct BeltramiSolution {
    pub map: GridMap,
    /// `|f_zbar - mu f_z|_2 / |f_z|_2` over all triangles.
    pub residual: f64,
}

/// The corner triangles of a cell, as (x-difference, y-difference) node pairs
/// in local corner numbering `0 = (i, j)`, `1 = (i+1, j)`, `2 = (i, j+1)`, `3 = (i+1, j+1)`.
const CORNERS: [((usize, usize), (usize, usize)); 4] = [
    ((0, 1), (0, 2)),
    ((0, 1), (1, 3)),
    ((2, 3), (0, 2)),
    ((2, 3), (1, 3)),
];

/// Nodes and coefficients `c` with `sum c_n f_n = sqrt(area) (f_zbar - mu f_z)`
/// on one corner triangle.
fn triangle_row(
    corner: usize,
    mu: Complex64,
    hx: f64,
    hy: f64,
    scale: f64,
) -> [(usize, Complex64); 4] {
    let alpha = (1.0 - mu) * 0.5 * scale / hx;
    let beta = Complex64::i() * (1.0 + mu) * 0.5 * scale / hy;
    let ((xa, xb), (ya, yb)) = CORNERS[corner];
    let mut row = [(0usize, Complex64::new(0.0, 0.0)); 4];
    for (k, slot) in row.iter_mut().enumerate() {
        slot.0 = k;
    }
    row[xa].1 -= alpha;
    row[xb].1 += alpha;
    row[ya].1 -= beta;
    row[yb].1 += beta;
    row
}

fn cell_nodes(d: &GridDomain, i: usize, j: usize) -> [usize; 4] {
    [d.index(i, j), d.index(i + 1, j), d.index(i, j + 1), d.index(i + 1, j + 1)]
}

fn cell_mu(mu: &ComplexGrid, nodes: &[usize; 4]) -> Complex64 {
    nodes.iter().map(|&k| mu.values[k]).sum::<Complex64>() * 0.25
}

/// Least-squares solution of the discrete Beltrami equation.
///
/// Each grid cell contributes its four corner triangles, on which a map is
/// represented by the linear interpolant of its three vertex values; the
/// scheme is exact on affine maps.
pub fn solve_beltrami(problem: &BeltramiProblem) -> Result<BeltramiSolution> {
    let mu = &problem.mu;
    let d = mu.domain;
    let (nx, ny) = (d.nx(), d.ny());
    let (hx, hy) = (d.hx(), d.hy());
    let scale = (0.5 * hx * hy).sqrt();
    let n = d.len();
    let mut h = BandedHermitian::zeros(n, nx + 1);

    for j in 0..ny - 1 {
        for i in 0..nx - 1 {
            let nodes = cell_nodes(&d, i, j);
            let m = cell_mu(mu, &nodes);
            for corner in 0..4 {
                let row = triangle_row(corner, m, hx, hy, scale);
                for &(a, ca) in &row {
                    if ca == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for &(b, cb) in &row {
                        if cb == Complex64::new(0.0, 0.0) || nodes[b] > nodes[a] {
                            continue;
                        }
                        h.add_lower(nodes[a], nodes[b], ca.conj() * cb);
                    }
                }
            }
        }
    }

    let mut rhs = vec![Complex64::new(0.0, 0.0); n];
    let pinned: Vec<(usize, Complex64)> = problem
        .anchors
        .iter()
        .map(|a| (d.index(a.node.0, a.node.1), Complex64::new(a.image[0], a.image[1])))
        .collect();
    let bw = nx + 1;
    for &(p, fp) in &pinned {
        let lo = p.saturating_sub(bw);
        let hi = (p + bw).min(n - 1);
        for a in lo..=hi {
            if a != p {
                rhs[a] -= h.get(a, p) * fp;
            }
        }
    }
    for &(p, fp) in &pinned {
        h.pin(p);
        rhs[p] = fp;
    }

    let chol = h.factor()?;
    let mut f = chol.solve(&rhs);
    // corrected semi-normal equations: the normal residual is formed from the
    // rows themselves, which removes the squared conditioning of the solve
    for _ in 0..REFINEMENT_STEPS {
        let mut g = normal_residual(mu, &f, scale);
        for &(p, _) in &pinned {
            g[p] = Complex64::new(0.0, 0.0);
        }
        let delta = chol.solve(&g);
        for (fk, dk) in f.iter_mut().zip(&delta) {
            *fk -= dk;
        }
    }
    let residual = relative_residual(mu, &f);
    if residual > RESIDUAL_WARNING {
        log::warn!("Beltrami residual {residual:.3e} exceeds {RESIDUAL_WARNING:e}");
    }
    let map = GridMap::new(d, f.iter().map(|z| [z.re, z.im]).collect())?;
    Ok(BeltramiSolution { map, residual })
}

/// `A^H A f` for the scaled triangle rows `A` of the least-squares system.
fn normal_residual(mu: &ComplexGrid, f: &[Complex64], scale: f64) -> Vec<Complex64> {
    let d = mu.domain;
    let (hx, hy) = (d.hx(), d.hy());
    let mut g = vec![Complex64::new(0.0, 0.0); f.len()];
    for j in 0..d.ny() - 1 {
        for i in 0..d.nx() - 1 {
            let nodes = cell_nodes(&d, i, j);
            let m = cell_mu(mu, &nodes);
            for corner in 0..4 {
                let row = triangle_row(corner, m, hx, hy, scale);
                let r: Complex64 = row.iter().map(|&(k, c)| c * f[nodes[k]]).sum();
                for &(k, c) in &row {
                    g[nodes[k]] += c.conj() * r;
                }
            }
        }
    }
    g
}

fn relative_residual(mu: &ComplexGrid, f: &[Complex64]) -> f64 {
    let d = mu.domain;
    let (hx, hy) = (d.hx(), d.hy());
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..d.ny() - 1 {
        for i in 0..d.nx() - 1 {
            let nodes = cell_nodes(&d, i, j);
            let m = cell_mu(mu, &nodes);
            for corner in 0..4 {
                let r: Complex64 = triangle_row(corner, m, hx, hy, 1.0)
                    .iter()
                    .map(|&(k, c)| c * f[nodes[k]])
                    .sum();
                let ((xa, xb), (ya, yb)) = CORNERS[corner];
                let fx = (f[nodes[xb]] - f[nodes[xa]]) / hx;
                let fy = (f[nodes[yb]] - f[nodes[ya]]) / hy;
                let fz = 0.5 * (fx - Complex64::i() * fy);
                num += r.norm_sqr();
                den += fz.norm_sqr();
            }
        }
    }
    if den == 0.0 {
        return f64::INFINITY;
    }
    (num / den).sqrt()
}

/// `amplitude * exp(1 - 1 / (1 - s^2))` for `s = |z - c| / rho < 1` and zero
/// beyond, centred in the domain with `rho` 0.45 times the shorter side.
pub fn radial_bump(domain: GridDomain, amplitude: Complex64) -> ComplexGrid {
    let c = [0.5 * (domain.x0() + domain.x1()), 0.5 * (domain.y0() + domain.y1())];
    let rho = 0.45 * (domain.x1() - domain.x0()).min(domain.y1() - domain.y0());
    ComplexGrid::from_fn(domain, |p| {
        let s = (p[0] - c[0]).hypot(p[1] - c[1]) / rho;
        if s < 1.0 {
            amplitude * (1.0 - 1.0 / (1.0 - s * s)).exp()
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Largest deviation between the cell-wise Beltrami coefficient of `map`
/// (from its 2x2 stencil) and the cell average of `mu`.
pub fn self_consistency(mu: &ComplexGrid, map: &GridMap) -> f64 {
    let d = mu.domain;
    let mut worst = 0.0f64;
    for j in 0..d.ny() - 1 {
        for i in 0..d.nx() - 1 {
            let nodes = cell_nodes(&d, i, j);
            let rec = map.cell_beltrami(i, j);
            worst = worst.max((rec - cell_mu(mu, &nodes)).norm());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_mu_with_three_anchors_is_identity() {
        let d = GridDomain::unit_square(9).unwrap();
        let anchors = vec![
            Anchor::new((0, 0), [0.0, 0.0]),
            Anchor::new((8, 0), [1.0, 0.0]),
            Anchor::new((0, 8), [0.0, 1.0]),
        ];
        let p = BeltramiProblem::new(ComplexGrid::constant(d, c(0.0, 0.0)), anchors).unwrap();
        let sol = solve_beltrami(&p).unwrap();
        for (v, node) in sol.map.values().iter().zip(d.nodes()) {
            assert!((v[0] - node[0]).abs() < 1e-12 && (v[1] - node[1]).abs() < 1e-12);
        }
        assert!(sol.residual < 1e-12);
    }

    #[test]
    fn constant_mu_is_reproduced() {
        let d = GridDomain::new(-1.0, -1.0, 1.0, 1.0, 17, 13).unwrap();
        let mu = c(0.4, -0.3);
        let f = |p: [f64; 2]| {
            let z = c(p[0], p[1]);
            z + mu * z.conj()
        };
        let anchors = vec![
            Anchor::new((0, 0), { let w = f(d.node(0, 0)); [w.re, w.im] }),
            Anchor::new((16, 12), { let w = f(d.node(16, 12)); [w.re, w.im] }),
        ];
        let p = BeltramiProblem::new(ComplexGrid::constant(d, mu), anchors).unwrap();
        let sol = solve_beltrami(&p).unwrap();
        for (v, node) in sol.map.values().iter().zip(d.nodes()) {
            let w = f(node);
            assert!((c(v[0], v[1]) - w).norm() < 1e-10);
        }
        assert!(self_consistency(p.mu(), &sol.map) < 1e-10);
    }

    #[test]
    fn rejects_bad_problems() {
        let d = GridDomain::unit_square(5).unwrap();
        let mu = ComplexGrid::constant(d, c(0.97, 0.0));
        assert!(BeltramiProblem::normalized(mu).is_err());
        let mu = ComplexGrid::constant(d, c(0.0, 0.0));
        let one = vec![Anchor::fixed(&d, (0, 0))];
        assert!(BeltramiProblem::new(mu.clone(), one).is_err());
        let collinear = vec![
            Anchor::fixed(&d, (0, 0)),
            Anchor::fixed(&d, (2, 2)),
            Anchor::fixed(&d, (4, 4)),
        ];
        assert!(BeltramiProblem::new(mu, collinear).is_err());
    }
}
