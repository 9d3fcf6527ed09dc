use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::PI;

use super::domain::GridDomain;
use super::grid_map::GridMap;
use crate::convex_kernel::{
    distance_ellipse, is_spd, linear_dilatations, Dilatations, LinearMap2, Mat2, Norm2,
    DEFAULT_SAMPLES,
};
use crate::error::{Error, Result};

/// Largest identity distortion against `l2` accepted at a node.
pub const ANISOTROPY_LIMIT: f64 = 50.0;

/// A norm at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct NormField {
    domain: GridDomain,
    norms: Vec<Norm2>,
}

impl NormField {
    pub fn new(domain: GridDomain, norms: Vec<Norm2>) -> Result<Self> {
        if norms.len() != domain.len() {
            return Err(Error::InvalidField(format!(
                "{} norms for {} nodes",
                norms.len(),
                domain.len()
            )));
        }
        let n = norms[0].n();
        if norms.iter().any(|m| m.n() != n) {
            return Err(Error::InvalidField("node norms differ in sample count".into()));
        }
        let checked = distinct(&norms);
        let distortions: Vec<f64> = checked
            .reps
            .par_iter()
            .map(|&k| norms[k].identity_distortion())
            .collect();
        for (c, &k) in checked.reps.iter().enumerate() {
            if !(distortions[c] <= ANISOTROPY_LIMIT) {
                let (i, j) = domain.coords(k);
                return Err(Error::AnisotropyGuard {
                    i,
                    j,
                    distortion: distortions[c],
                    limit: ANISOTROPY_LIMIT,
                });
            }
        }
        Ok(NormField { domain, norms })
    }

    pub fn constant(domain: GridDomain, m: &Norm2) -> Result<Self> {
        NormField::new(domain, vec![m.clone(); domain.len()])
    }

    /// Builds a field node by node from a position-dependent constructor.
    pub fn from_fn(domain: GridDomain, f: impl Fn([f64; 2]) -> Result<Norm2> + Sync) -> Result<Self> {
        let norms: Result<Vec<Norm2>> = (0..domain.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = domain.coords(k);
                f(domain.node(i, j))
            })
            .collect();
        NormField::new(domain, norms?)
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn norms(&self) -> &[Norm2] {
        &self.norms
    }

    pub fn norm(&self, i: usize, j: usize) -> &Norm2 {
        &self.norms[self.domain.index(i, j)]
    }

    pub fn samples(&self) -> usize {
        self.norms[0].n()
    }

    /// The norm at an arbitrary point, as the bilinear convex combination of
    /// the four surrounding node norms.
    pub fn interpolate(&self, p: [f64; 2]) -> Option<Norm2> {
        let (i, j, s, t) = self.domain.locate(p)?;
        let corners = [
            ((1.0 - s) * (1.0 - t), self.norm(i, j)),
            (s * (1.0 - t), self.norm(i + 1, j)),
            ((1.0 - s) * t, self.norm(i, j + 1)),
            (s * t, self.norm(i + 1, j + 1)),
        ];
        let active: Vec<(f64, &Norm2)> = corners.into_iter().filter(|(w, _)| *w > 0.0).collect();
        if active.iter().all(|(_, m)| *m == active[0].1) {
            return Some(active[0].1.clone());
        }
        Some(Norm2::combine(&active).expect("convex combination of valid norms"))
    }

    /// Multiplies each node norm by `c(x) > 0`.
    pub fn conformally_scaled(&self, c: impl Fn([f64; 2]) -> f64 + Sync) -> Result<Self> {
        let d = self.domain;
        let norms: Result<Vec<Norm2>> = (0..d.len())
            .into_par_iter()
            .map(|k| {
                let (i, j) = d.coords(k);
                self.norms[k].scaled(c(d.node(i, j)))
            })
            .collect();
        NormField::new(d, norms?)
    }
}

/// Index of the first node carrying each distinct norm, and the class of every node.
pub(crate) struct Distinct {
    pub reps: Vec<usize>,
    pub class: Vec<usize>,
}

pub(crate) fn distinct(norms: &[Norm2]) -> Distinct {
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut reps = Vec::new();
    let mut class = Vec::with_capacity(norms.len());
    let mut last: Option<(usize, usize)> = None;
    for (k, m) in norms.iter().enumerate() {
        // runs of equal neighbours are common; skip the hash for them
        if let Some((lk, lc)) = last {
            if norms[lk] == *m {
                class.push(lc);
                continue;
            }
        }
        let c = *seen.entry(m.key()).or_insert_with(|| {
            reps.push(k);
            reps.len() - 1
        });
        class.push(c);
        last = Some((k, c));
    }
    Distinct { reps, class }
}

/// The constant field of the `l_p` gauge.
pub fn lp_field(domain: GridDomain, p: f64) -> Result<NormField> {
    NormField::constant(domain, &Norm2::lp(DEFAULT_SAMPLES, p)?)
}

/// The field of Riemannian norms `v -> sqrt(v^T g(x) v)`.
pub fn riemannian_field(
    domain: GridDomain,
    g: impl Fn([f64; 2]) -> [[f64; 2]; 2] + Sync,
) -> Result<NormField> {
    NormField::from_fn(domain, |p| {
        let gp = g(p);
        if !is_spd(gp) {
            let (i, j) = nearest_node(&domain, p);
            return Err(Error::NotSpd { i, j });
        }
        Norm2::riemannian(DEFAULT_SAMPLES, gp)
    })
}

fn nearest_node(d: &GridDomain, p: [f64; 2]) -> (usize, usize) {
    let i = ((p[0] - d.x0()) / d.hx()).round().clamp(0.0, (d.nx() - 1) as f64) as usize;
    let j = ((p[1] - d.y0()) / d.hy()).round().clamp(0.0, (d.ny() - 1) as f64) as usize;
    (i, j)
}

/// Pulls `field` back along `psi`: the node norm at `y` is the interpolated
/// field norm at `psi(y)` composed with `D psi(y)`.
pub fn pullback_field(field: &NormField, psi: &GridMap) -> Result<NormField> {
    let d = *psi.domain();
    let norms: Result<Vec<Norm2>> = (0..d.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = d.coords(k);
            let x = psi.values()[k];
            let m = field.interpolate(x).ok_or(Error::OutsideDomain {
                i,
                j,
                x: x[0],
                y: x[1],
            })?;
            m.pullback(&psi.node_differential(i, j))
        })
        .collect();
    NormField::new(d, norms?)
}

/// Smooth cutoff: 1 for `s <= 0`, 0 for `s >= 1`.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        return 1.0;
    }
    if s >= 1.0 {
        return 0.0;
    }
    let psi = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
    let a = psi(1.0 - s);
    a / (a + psi(s))
}

/// `phi inner + (1 - phi) outer` with `phi` a smooth bump equal to 1 on
/// `B(center, r)` and 0 outside `B(center, 2r)`.
pub fn blended_field(
    domain: GridDomain,
    center: [f64; 2],
    r: f64,
    inner: &Norm2,
    outer: &Norm2,
) -> Result<NormField> {
    if !(r > 0.0) || !domain.contains_disk(center, 3.0 * r) {
        return Err(Error::Precondition(format!(
            "B(({}, {}), 3 * {r}) must lie inside the domain",
            center[0], center[1]
        )));
    }
    if inner.n() != outer.n() {
        return Err(Error::InvalidField("inner and outer norms differ in sample count".into()));
    }
    NormField::from_fn(domain, |p| {
        let dist = (p[0] - center[0]).hypot(p[1] - center[1]);
        let phi = smooth_step((dist - r) / r);
        if phi == 1.0 {
            Ok(inner.clone())
        } else if phi == 0.0 {
            Ok(outer.clone())
        } else {
            Norm2::combine(&[(phi, inner), (1.0 - phi, outer)])
        }
    })
}

/// Complex values on the nodes of a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexGrid {
    pub domain: GridDomain,
    pub values: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn new(domain: GridDomain, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::InvalidField(format!(
                "{} values for {} nodes",
                values.len(),
                domain.len()
            )));
        }
        Ok(ComplexGrid { domain, values })
    }

    pub fn from_fn(domain: GridDomain, f: impl Fn([f64; 2]) -> Complex64) -> Self {
        ComplexGrid {
            domain,
            values: domain.nodes().map(f).collect(),
        }
    }

    pub fn constant(domain: GridDomain, c: Complex64) -> Self {
        ComplexGrid {
            domain,
            values: vec![c; domain.len()],
        }
    }

    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.values[self.domain.index(i, j)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Node-wise Beltrami coefficients of a field.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeltramiField {
    pub mu: ComplexGrid,
    /// Nodes whose distance-ellipse search hit a flat landscape.
    pub degenerate: Vec<bool>,
    /// `(4/pi K_I - 1) / (4/pi K_I + 1)` for the field's largest inner dilatation.
    pub bound: f64,
}

impl BeltramiField {
    pub fn max_abs(&self) -> f64 {
        self.mu.max_abs()
    }

    pub fn any_degenerate(&self) -> bool {
        self.degenerate.iter().any(|d| *d)
    }
}

/// Distance-ellipse Beltrami coefficient of every node norm.
pub fn beltrami_field(field: &NormField) -> BeltramiField {
    let classes = distinct(&field.norms);
    let per_class: Vec<(Complex64, bool)> = classes
        .reps
        .par_iter()
        .map(|&k| {
            let de = distance_ellipse(&field.norms[k]);
            (de.ellipse.mu, de.degenerate)
        })
        .collect();
    let values = classes.class.iter().map(|&c| per_class[c].0).collect();
    let degenerate = classes.class.iter().map(|&c| per_class[c].1).collect();
    let k_inner = global_dilatations(&dilatation_fields(field)).k_inner;
    let q = 4.0 / PI * k_inner;
    BeltramiField {
        mu: ComplexGrid {
            domain: field.domain,
            values,
        },
        degenerate,
        bound: (q - 1.0) / (q + 1.0),
    }
}

/// Pointwise outer and inner dilatations of `D id: (R^2, l2) -> (R^2, field)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DilatationField {
    pub domain: GridDomain,
    pub k_outer: Vec<f64>,
    pub k_inner: Vec<f64>,
}

impl DilatationField {
    pub fn at(&self, i: usize, j: usize) -> Dilatations {
        let k = self.domain.index(i, j);
        Dilatations {
            outer: self.k_outer[k],
            inner: self.k_inner[k],
        }
    }

    pub fn distortion(&self, k: usize) -> f64 {
        (self.k_outer[k] * self.k_inner[k]).sqrt()
    }
}

/// Dilatations of the identity from the sampled Euclidean norm into each node norm.
pub fn dilatation_fields(field: &NormField) -> DilatationField {
    let l2 = Norm2::euclidean(field.samples());
    let id = LinearMap2::identity();
    let classes = distinct(&field.norms);
    let per_class: Vec<Dilatations> = classes
        .reps
        .par_iter()
        .map(|&k| linear_dilatations(&id, &l2, &field.norms[k]))
        .collect();
    DilatationField {
        domain: field.domain,
        k_outer: classes.class.iter().map(|&c| per_class[c].outer).collect(),
        k_inner: classes.class.iter().map(|&c| per_class[c].inner).collect(),
    }
}

/// Global (maximal) dilatations of a field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalDilatations {
    pub k_outer: f64,
    pub k_inner: f64,
    pub distortion: f64,
}

pub fn global_dilatations(d: &DilatationField) -> GlobalDilatations {
    let k_outer = d.k_outer.iter().cloned().fold(0.0, f64::max);
    let k_inner = d.k_inner.iter().cloned().fold(0.0, f64::max);
    let product = d
        .k_outer
        .iter()
        .zip(&d.k_inner)
        .map(|(a, b)| a * b)
        .fold(0.0, f64::max);
    GlobalDilatations {
        k_outer,
        k_inner,
        distortion: product.sqrt(),
    }
}

/// The pushforward of `field` along `f`: at each node the norm `M o (D f)^-1`.
pub(crate) fn pushforward_norms(field: &NormField, f: &GridMap) -> Result<NormField> {
    let d = *f.domain();
    let norms: Result<Vec<Norm2>> = (0..d.len())
        .into_par_iter()
        .map(|k| {
            let (i, j) = d.coords(k);
            let inv: Mat2 = f
                .node_differential(i, j)
                .inverse()
                .ok_or(Error::FoldedCell {
                    i: i.min(d.nx() - 2),
                    j: j.min(d.ny() - 2),
                })?;
            field.norms[k].pullback(&inv)
        })
        .collect();
    NormField::new(d, norms?)
}
