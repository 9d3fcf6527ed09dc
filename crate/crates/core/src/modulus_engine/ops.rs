use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::graph::{MetricGraph, NodeRect};
use super::modulus::{discrete_modulus_seeded, CurveFamily, ModulusOptions, ModulusResult};
use crate::error::{Error, Result};
use crate::norm_field::{pullback_field, GridMap, NormField};

/// An axis-parallel quadrilateral `[x0, x1] x [y0, y1]`; its four boundary
/// arcs are the sides of the rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quad {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Quad {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Quad { x0, y0, x1, y1 }
    }
}

/// Round annulus `r <= |x - center| <= big_r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Annulus {
    pub center: [f64; 2],
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
}

/// Moduli of the two side-to-side families of a quadrilateral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadModuli {
    /// Paths from the left side to the right side.
    pub horizontal: f64,
    /// Paths from the bottom side to the top side.
    pub vertical: f64,
}

impl QuadModuli {
    pub fn product(&self) -> f64 {
        self.horizontal * self.vertical
    }
}

/// Grids with fewer nodes per side are solved directly.
const COARSEST: usize = 40;

/// The field on every other node, when both node counts are odd.
fn coarsened(field: &NormField) -> Option<NormField> {
    let d = field.domain();
    if d.nx() % 2 == 0 || d.ny() % 2 == 0 || d.nx().min(d.ny()) < COARSEST {
        return None;
    }
    let (nx, ny) = ((d.nx() + 1) / 2, (d.ny() + 1) / 2);
    let coarse = d.with_resolution(nx, ny).ok()?;
    let mut norms = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            norms.push(field.norm(2 * i, 2 * j).clone());
        }
    }
    NormField::new(coarse, norms).ok()
}

/// Bilinear interpolation of a coarse density onto the nodes of `fine`.
fn prolongate(coarse: &MetricGraph, rho: &[f64], fine: &MetricGraph) -> Vec<f64> {
    let (dc, rc) = (coarse.domain(), *coarse.rect());
    let (df, rf) = (fine.domain(), *fine.rect());
    let at = |i: usize, j: usize| rho[rc.local(i.clamp(rc.i0, rc.i1), j.clamp(rc.j0, rc.j1))];
    (0..fine.node_count())
        .map(|k| {
            let (i, j) = rf.grid(k);
            match dc.locate(df.node(i, j)) {
                Some((ci, cj, s, t)) => {
                    (1.0 - s) * (1.0 - t) * at(ci, cj)
                        + s * (1.0 - t) * at(ci + 1, cj)
                        + (1.0 - s) * t * at(ci, cj + 1)
                        + s * t * at(ci + 1, cj + 1)
                }
                None => 0.0,
            }
        })
        .collect()
}

/// Solves the family built by `setup` on `field`, seeded by the solution
/// on the coarsened field.
fn solve_multilevel<F>(field: &NormField, setup: &F, opts: ModulusOptions) -> Result<(MetricGraph, ModulusResult)>
where
    F: Fn(&NormField) -> Result<(MetricGraph, CurveFamily)>,
{
    let (graph, family) = setup(field)?;
    let seed = match coarsened(field) {
        Some(coarse) => match solve_multilevel(&coarse, setup, opts) {
            Ok((cg, cr)) if !cr.density.is_empty() => Some(prolongate(&cg, &cr.density, &graph)),
            _ => None,
        },
        None => None,
    };
    let result = discrete_modulus_seeded(&graph, &family, opts, seed.as_deref())?;
    Ok((graph, result))
}

fn quad_graph(field: &NormField, quad: &Quad) -> Result<MetricGraph> {
    let rect = NodeRect::covering(field.domain(), quad.x0, quad.y0, quad.x1, quad.y1)?;
    MetricGraph::restricted(field, rect)
}

/// Left-to-right (`vertical == false`) or bottom-to-top paths of the graph region.
fn side_family(g: &MetricGraph, vertical: bool) -> Result<CurveFamily> {
    let r = *g.rect();
    let w = r.width();
    let h = r.height();
    if vertical {
        // corners belong to two sides; give them to the left/right pair only
        let bottom: Vec<usize> = (1..w - 1).collect();
        let top: Vec<usize> = (1..w - 1).map(|i| (h - 1) * w + i).collect();
        CurveFamily::new(g, bottom, top)
    } else {
        let left: Vec<usize> = (0..h).map(|j| j * w).collect();
        let right: Vec<usize> = (0..h).map(|j| j * w + w - 1).collect();
        CurveFamily::new(g, left, right)
    }
}

/// Left-to-right and bottom-to-top moduli of a quadrilateral of the field.
pub fn quadrilateral_moduli(field: &NormField, quad: &Quad, opts: ModulusOptions) -> Result<QuadModuli> {
    let [h, v] = quadrilateral_modulus_results(field, quad, opts)?;
    Ok(QuadModuli {
        horizontal: h.value,
        vertical: v.value,
    })
}

/// Full solver results for the horizontal and vertical families of a
/// quadrilateral. Densities and paths use the local order of the node
/// rectangle `NodeRect::covering(field.domain(), ..)` of the quad.
pub fn quadrilateral_modulus_results(
    field: &NormField,
    quad: &Quad,
    opts: ModulusOptions,
) -> Result<[ModulusResult; 2]> {
    let solve = |vertical: bool| {
        let setup = |f: &NormField| {
            let g = quad_graph(f, quad)?;
            let fam = side_family(&g, vertical)?;
            Ok((g, fam))
        };
        solve_multilevel(field, &setup, opts).map(|(_, r)| r)
    };
    let (h, v) = rayon::join(|| solve(false), || solve(true));
    Ok([h?, v?])
}

/// Modulus of the paths joining `B(center, r)` to the complement of `B(center, R)`.
pub fn annulus_modulus(field: &NormField, annulus: &Annulus, opts: ModulusOptions) -> Result<ModulusResult> {
    let Annulus { center, r, big_r } = *annulus;
    if !(r > 0.0 && big_r > r) {
        return Err(Error::Precondition(format!("annulus radii must satisfy 0 < r < R, got r = {r}, R = {big_r}")));
    }
    if !field.domain().contains_disk(center, big_r) {
        return Err(Error::Precondition(format!(
            "B(({}, {}), {big_r}) is not inside the field domain",
            center[0], center[1]
        )));
    }
    let dist = move |p: [f64; 2]| (p[0] - center[0]).hypot(p[1] - center[1]);
    let setup = |f: &NormField| {
        let g = MetricGraph::new(f)?;
        let fam = CurveFamily::from_predicates(&g, |p| dist(p) <= r, |p| dist(p) >= big_r)?;
        Ok((g, fam))
    };
    let (_, result) = solve_multilevel(field, &setup, opts)?;
    if result.density.is_empty() {
        log::warn!("annulus inner disk of radius {r} contains no grid node");
    }
    Ok(result)
}

/// Reciprocality data of a field: quadrilateral products and point decay.
#[derive(Debug, Clone, Serialize)]
pub struct ReciprocalityReport {
    pub quads: Vec<(Quad, QuadModuli)>,
    /// Largest product of opposite-side moduli.
    pub kappa_upper: f64,
    /// Reciprocal of the smallest product.
    pub kappa_lower: f64,
    /// `(r, modulus)` for the annuli, ordered by decreasing `r`.
    pub point_decay: Vec<(f64, f64)>,
    /// Whether the point-decay moduli decrease as `r` shrinks.
    pub decay_monotone: bool,
}

pub fn reciprocality_report(
    field: &NormField,
    quads: &[Quad],
    annuli: &[Annulus],
    opts: ModulusOptions,
) -> Result<ReciprocalityReport> {
    let moduli: Result<Vec<QuadModuli>> = quads
        .par_iter()
        .map(|q| quadrilateral_moduli(field, q, opts))
        .collect();
    let moduli = moduli?;
    let products: Vec<f64> = moduli.iter().map(|m| m.product()).collect();
    let kappa_upper = products.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let kappa_lower = 1.0 / products.iter().cloned().fold(f64::INFINITY, f64::min);

    let mut sorted: Vec<Annulus> = annuli.to_vec();
    sorted.sort_by(|a, b| b.r.total_cmp(&a.r));
    let decay: Result<Vec<(f64, f64)>> = sorted
        .par_iter()
        .map(|a| Ok((a.r, annulus_modulus(field, a, opts)?.value)))
        .collect();
    let point_decay = decay?;
    let decay_monotone = point_decay.windows(2).all(|w| w[1].1 <= w[0].1);
    Ok(ReciprocalityReport {
        quads: quads.iter().copied().zip(moduli).collect(),
        kappa_upper,
        kappa_lower,
        point_decay,
        decay_monotone,
    })
}

/// Modulus-based dilatation estimate of a grid map between two fields.
#[derive(Debug, Clone, Serialize)]
pub struct QcEstimate {
    /// Source modulus over image modulus, per quadrilateral and family
    /// (horizontal then vertical).
    pub ratios: Vec<f64>,
    /// Largest ratio: estimate of the outer dilatation.
    pub max_ratio: f64,
    /// Largest inverse ratio: estimate of the inner dilatation.
    pub max_inverse_ratio: f64,
}

/// Compares moduli of quadrilaterals in `field1` with the moduli of their
/// images under `map` in `field2`.
///
/// The image modulus is computed on the source grid with the pulled-back
/// field `map^* field2`, which has the same moduli as the image quadrilateral.
pub fn qc_estimate(
    field1: &NormField,
    map: &GridMap,
    field2: &NormField,
    quads: &[Quad],
    opts: ModulusOptions,
) -> Result<QcEstimate> {
    if map.domain() != field1.domain() {
        return Err(Error::Precondition("map and source field use different grids".into()));
    }
    let pulled = pullback_field(field2, map)?;
    let pairs: Result<Vec<(QuadModuli, QuadModuli)>> = quads
        .par_iter()
        .map(|q| Ok((quadrilateral_moduli(field1, q, opts)?, quadrilateral_moduli(&pulled, q, opts)?)))
        .collect();
    let mut ratios = Vec::new();
    for (src, img) in pairs? {
        ratios.push(src.horizontal / img.horizontal);
        ratios.push(src.vertical / img.vertical);
    }
    let max_ratio = ratios.iter().cloned().fold(0.0, f64::max);
    let max_inverse_ratio = ratios.iter().map(|r| 1.0 / r).fold(0.0, f64::max);
    Ok(QcEstimate {
        ratios,
        max_ratio,
        max_inverse_ratio,
    })
}
