use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use super::domain::GridDomain;
use crate::convex_kernel::Mat2;
use crate::error::{Error, Result};

/// A discrete map sampled at the nodes of a grid.
///
/// Each cell is split along its `(i, j)`–`(i+1, j+1)` diagonal into two
/// triangles; the map is piecewise linear on that triangulation, and all
/// triangles must carry the same nonzero orientation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridMap {
    domain: GridDomain,
    values: Vec<[f64; 2]>,
    #[serde(skip)]
    orientation: f64,
}

/// Location of a point in the image triangulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageLocation {
    pub cell: (usize, usize),
    /// 0 for the triangle below the diagonal, 1 above.
    pub triangle: usize,
    pub barycentric: [f64; 3],
}

impl GridMap {
    pub fn new(domain: GridDomain, values: Vec<[f64; 2]>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::InvalidField(format!(
                "grid map has {} values for {} nodes",
                values.len(),
                domain.len()
            )));
        }
        if values.iter().any(|v| !(v[0].is_finite() && v[1].is_finite())) {
            return Err(Error::InvalidField("grid map has non-finite values".into()));
        }
        let mut map = GridMap {
            domain,
            values,
            orientation: 0.0,
        };
        map.orientation = map.check_orientation()?;
        Ok(map)
    }

    pub fn from_fn(domain: GridDomain, f: impl Fn([f64; 2]) -> [f64; 2]) -> Result<Self> {
        GridMap::new(domain, domain.nodes().map(f).collect())
    }

    pub fn identity(domain: GridDomain) -> Self {
        GridMap::from_fn(domain, |p| p).expect("identity is coherent")
    }

    pub fn linear(domain: GridDomain, a: Mat2) -> Result<Self> {
        GridMap::from_fn(domain, |p| a.apply(p))
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn values(&self) -> &[[f64; 2]] {
        &self.values
    }

    pub fn value(&self, i: usize, j: usize) -> [f64; 2] {
        self.values[self.domain.index(i, j)]
    }

    /// `+1` for orientation-preserving maps, `-1` otherwise.
    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    fn triangle(&self, i: usize, j: usize, t: usize) -> [[f64; 2]; 3] {
        let a = self.value(i, j);
        let c = self.value(i + 1, j + 1);
        if t == 0 {
            [a, self.value(i + 1, j), c]
        } else {
            [a, c, self.value(i, j + 1)]
        }
    }

    fn triangle_source(&self, i: usize, j: usize, t: usize) -> [[f64; 2]; 3] {
        let d = &self.domain;
        if t == 0 {
            [d.node(i, j), d.node(i + 1, j), d.node(i + 1, j + 1)]
        } else {
            [d.node(i, j), d.node(i + 1, j + 1), d.node(i, j + 1)]
        }
    }

    fn check_orientation(&self) -> Result<f64> {
        let (nx, ny) = (self.domain.nx(), self.domain.ny());
        let mut sign = 0.0;
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                for t in 0..2 {
                    let a = signed_area(&self.triangle(i, j, t));
                    let s = if a > 0.0 {
                        1.0
                    } else if a < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    if s == 0.0 || (sign != 0.0 && s != sign) {
                        return Err(Error::FoldedCell { i, j });
                    }
                    sign = s;
                }
            }
        }
        Ok(sign)
    }

    /// Differential at a node: central differences inside, second-order
    /// one-sided differences on the boundary.
    pub fn node_differential(&self, i: usize, j: usize) -> Mat2 {
        let d = &self.domain;
        let dx = derivative(d.nx(), i, d.hx(), |k| self.value(k, j));
        let dy = derivative(d.ny(), j, d.hy(), |k| self.value(i, k));
        Mat2::new(dx[0], dy[0], dx[1], dy[1])
    }

    /// Differential of a cell from its 2x2 corner stencil.
    pub fn cell_differential(&self, i: usize, j: usize) -> Mat2 {
        let d = &self.domain;
        let (p00, p10, p01, p11) = (
            self.value(i, j),
            self.value(i + 1, j),
            self.value(i, j + 1),
            self.value(i + 1, j + 1),
        );
        let dx = |c: usize| 0.5 * ((p10[c] - p00[c]) + (p11[c] - p01[c])) / d.hx();
        let dy = |c: usize| 0.5 * ((p01[c] - p00[c]) + (p11[c] - p10[c])) / d.hy();
        Mat2::new(dx(0), dy(0), dx(1), dy(1))
    }

    /// Cell-wise Beltrami coefficient `f_zbar / f_z` from the 2x2 stencil.
    pub fn cell_beltrami(&self, i: usize, j: usize) -> Complex64 {
        self.cell_differential(i, j).beltrami_coefficient()
    }

    /// Bilinear interpolation of the node values at `p`.
    pub fn evaluate(&self, p: [f64; 2]) -> Option<[f64; 2]> {
        let (i, j, s, t) = self.domain.locate(p)?;
        let w = [(1.0 - s) * (1.0 - t), s * (1.0 - t), (1.0 - s) * t, s * t];
        let v = [
            self.value(i, j),
            self.value(i + 1, j),
            self.value(i, j + 1),
            self.value(i + 1, j + 1),
        ];
        let mut out = [0.0; 2];
        for (wk, vk) in w.iter().zip(&v) {
            out[0] += wk * vk[0];
            out[1] += wk * vk[1];
        }
        Some(out)
    }

    /// `self ∘ inner`: evaluates this map at the images of `inner`.
    pub fn compose(&self, inner: &GridMap) -> Result<GridMap> {
        let d = inner.domain;
        let mut values = Vec::with_capacity(d.len());
        for (k, p) in inner.values.iter().enumerate() {
            let (i, j) = d.coords(k);
            let v = self.evaluate(*p).ok_or(Error::OutsideDomain {
                i,
                j,
                x: p[0],
                y: p[1],
            })?;
            values.push(v);
        }
        GridMap::new(d, values)
    }

    /// Axis-aligned bounding box of the image: `[xmin, ymin, xmax, ymax]`.
    pub fn image_bounds(&self) -> [f64; 4] {
        let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for v in &self.values {
            b[0] = b[0].min(v[0]);
            b[1] = b[1].min(v[1]);
            b[2] = b[2].max(v[0]);
            b[3] = b[3].max(v[1]);
        }
        b
    }

    fn barycentric(&self, i: usize, j: usize, t: usize, p: [f64; 2]) -> [f64; 3] {
        let tri = self.triangle(i, j, t);
        let area = signed_area(&tri);
        let sub = |a: [f64; 2], b: [f64; 2]| signed_area(&[p, a, b]) / area;
        [sub(tri[1], tri[2]), sub(tri[2], tri[0]), sub(tri[0], tri[1])]
    }

    /// Finds the image triangle containing `p` by walking from `hint`,
    /// falling back to a full scan if the walk leaves the mesh.
    pub fn locate_image(&self, p: [f64; 2], hint: Option<ImageLocation>) -> Option<ImageLocation> {
        const EPS: f64 = -1e-10;
        let (nx, ny) = (self.domain.nx(), self.domain.ny());
        let (mut i, mut j, mut t) = match hint {
            Some(h) => (h.cell.0, h.cell.1, h.triangle),
            None => ((nx - 1) / 2, (ny - 1) / 2, 0),
        };
        for _ in 0..4 * (nx + ny) {
            let b = self.barycentric(i, j, t, p);
            let (worst, wv) = b
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (k, v)| if *v < acc.1 { (k, *v) } else { acc });
            if wv >= EPS {
                return Some(ImageLocation {
                    cell: (i, j),
                    triangle: t,
                    barycentric: b,
                });
            }
            // cross the edge opposite the most negative coordinate
            let next = match (t, worst) {
                (0, 0) => (i + 1 < nx - 1).then(|| (i + 1, j, 1)),
                (0, 1) => Some((i, j, 1)),
                (0, _) => (j > 0).then(|| (i, j.wrapping_sub(1), 1)),
                (_, 0) => (j + 1 < ny - 1).then(|| (i, j + 1, 0)),
                (_, 1) => (i > 0).then(|| (i.wrapping_sub(1), j, 0)),
                (_, _) => Some((i, j, 0)),
            };
            match next {
                Some(n) => (i, j, t) = n,
                None => break,
            }
        }
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                for t in 0..2 {
                    let b = self.barycentric(i, j, t, p);
                    if b.iter().all(|v| *v >= EPS) {
                        return Some(ImageLocation {
                            cell: (i, j),
                            triangle: t,
                            barycentric: b,
                        });
                    }
                }
            }
        }
        None
    }

    /// Preimage of an image point under the piecewise-linear map.
    pub fn inverse_point(&self, p: [f64; 2], hint: Option<ImageLocation>) -> Result<([f64; 2], ImageLocation)> {
        let loc = self
            .locate_image(p, hint)
            .ok_or(Error::OutsideImage { x: p[0], y: p[1] })?;
        let src = self.triangle_source(loc.cell.0, loc.cell.1, loc.triangle);
        let b = loc.barycentric;
        let x = b[0] * src[0][0] + b[1] * src[1][0] + b[2] * src[2][0];
        let y = b[0] * src[0][1] + b[1] * src[1][1] + b[2] * src[2][1];
        Ok(([x, y], loc))
    }

    /// Samples the inverse map on the nodes of `target`, which must lie in the image.
    pub fn inverse_on(&self, target: GridDomain) -> Result<GridMap> {
        let mut values = Vec::with_capacity(target.len());
        let mut hint = None;
        for p in target.nodes() {
            let (q, loc) = self.inverse_point(p, hint)?;
            hint = Some(loc);
            values.push(q);
        }
        GridMap::new(target, values)
    }

    /// CSV with header `i,j,x,y,u,v` (node indices, node position, image point).
    pub fn to_csv(&self) -> String {
        let mut s = String::from("i,j,x,y,u,v\n");
        for (k, v) in self.values.iter().enumerate() {
            let (i, j) = self.domain.coords(k);
            let p = self.domain.node(i, j);
            let _ = writeln!(
                s,
                "{i},{j},{:.17e},{:.17e},{:.17e},{:.17e}",
                p[0], p[1], v[0], v[1]
            );
        }
        s
    }

    /// Parses [`GridMap::to_csv`] output over a known domain.
    pub fn from_csv(domain: GridDomain, text: &str) -> Result<Self> {
        let mut values = vec![None; domain.len()];
        for (line_no, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let cols: Vec<&str> = line.split(',').map(str::trim).collect();
            if cols.len() != 6 {
                return Err(Error::Parse(format!("line {}: expected 6 columns", line_no + 1)));
            }
            let idx = |c: &str| {
                c.parse::<usize>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", line_no + 1)))
            };
            let num = |c: &str| {
                c.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", line_no + 1)))
            };
            let (i, j) = (idx(cols[0])?, idx(cols[1])?);
            if i >= domain.nx() || j >= domain.ny() {
                return Err(Error::Parse(format!("line {}: node ({i}, {j}) out of range", line_no + 1)));
            }
            values[domain.index(i, j)] = Some([num(cols[4])?, num(cols[5])?]);
        }
        let values: Option<Vec<_>> = values.into_iter().collect();
        let values = values.ok_or_else(|| Error::Parse("grid map CSV is missing nodes".into()))?;
        GridMap::new(domain, values)
    }

    /// SVG polylines of the image grid lines.
    pub fn to_svg(&self) -> String {
        let b = self.image_bounds();
        let w = (b[2] - b[0]).max(1e-12);
        let h = (b[3] - b[1]).max(1e-12);
        let scale = 800.0 / w.max(h);
        let tx = |v: [f64; 2]| ((v[0] - b[0]) * scale + 10.0, (b[3] - v[1]) * scale + 10.0);
        let mut s = format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{:.0}\">\n",
            w * scale + 20.0,
            h * scale + 20.0
        );
        let (nx, ny) = (self.domain.nx(), self.domain.ny());
        let mut line = |pts: Vec<[f64; 2]>| {
            let coords: Vec<String> = pts
                .into_iter()
                .map(|v| {
                    let (x, y) = tx(v);
                    format!("{x:.3},{y:.3}")
                })
                .collect();
            let _ = writeln!(
                s,
                "<polyline fill=\"none\" stroke=\"black\" stroke-width=\"0.5\" points=\"{}\"/>",
                coords.join(" ")
            );
        };
        for j in 0..ny {
            line((0..nx).map(|i| self.value(i, j)).collect());
        }
        for i in 0..nx {
            line((0..ny).map(|j| self.value(i, j)).collect());
        }
        s.push_str("</svg>\n");
        s
    }
}

impl<'de> Deserialize<'de> for GridMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            domain: GridDomain,
            values: Vec<[f64; 2]>,
        }
        let raw = Raw::deserialize(d)?;
        GridMap::new(raw.domain, raw.values).map_err(serde::de::Error::custom)
    }
}

fn signed_area(t: &[[f64; 2]; 3]) -> f64 {
    0.5 * ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1]))
}

fn derivative(n: usize, k: usize, h: f64, v: impl Fn(usize) -> [f64; 2]) -> [f64; 2] {
    let comb = |terms: &[(usize, f64)]| {
        let mut out = [0.0; 2];
        for &(m, c) in terms {
            let p = v(m);
            out[0] += c * p[0];
            out[1] += c * p[1];
        }
        [out[0] / h, out[1] / h]
    };
    if n == 2 {
        return comb(&[(0, -1.0), (1, 1.0)]);
    }
    if k == 0 {
        comb(&[(0, -1.5), (1, 2.0), (2, -0.5)])
    } else if k + 1 == n {
        comb(&[(k - 2, 0.5), (k - 1, -2.0), (k, 1.5)])
    } else {
        comb(&[(k - 1, -0.5), (k + 1, 0.5)])
    }
}
