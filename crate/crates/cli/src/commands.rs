use std::path::Path;

use num_complex::Complex64;
use serde::Deserialize;
use serde_json::{json, Value};

use isoforge_core::beltrami_solver::{
    isothermal_coordinates, radial_bump, self_consistency, solve_beltrami, BeltramiProblem,
};
use isoforge_core::convex_kernel::{banach_mazur_distance, distance_ellipse, Mat2, Norm2};
use isoforge_core::modulus_engine::{
    annulus_modulus, quadrilateral_modulus_results, reciprocality_report, Annulus, ModulusOptions,
    ModulusResult, NodeRect, Quad,
};
use isoforge_core::norm_field::{
    blended_field, field_from_json, ComplexGrid, DilatationField, GridDomain, GridMap, NormField,
};

use crate::failure::Failure;
use crate::output::Sink;
use crate::{FieldArgs, GridArgs, OutArgs};

const MIN_NODES: usize = 17;
const DEFAULT_NODES: usize = 65;

/// Tolerance of the annulus verification.
const ANNULUS_TOL: f64 = 5e-2;

fn numbers(text: &str, count: usize, what: &str) -> Result<Vec<f64>, Failure> {
    let v: Result<Vec<f64>, _> = text.split(',').map(|s| s.trim().parse::<f64>()).collect();
    match v {
        Ok(v) if v.len() == count && v.iter().all(|x| x.is_finite()) => Ok(v),
        _ => Err(Failure::parse(format!(
            "{what} needs {count} comma-separated finite numbers, got '{text}'"
        ))),
    }
}

fn sink(out: &OutArgs) -> Result<Sink, Failure> {
    if out.svg && out.out.is_none() {
        return Err(Failure::precondition("--svg needs --out"));
    }
    Sink::new(out.out.clone())
}

fn grid_domain(grid: &GridArgs, fallback: Option<&GridDomain>) -> Result<GridDomain, Failure> {
    let nx = grid.nx.or(fallback.map(|d| d.nx())).unwrap_or(DEFAULT_NODES);
    let ny = grid.ny.or(if grid.nx.is_some() { None } else { fallback.map(|d| d.ny()) }).unwrap_or(nx);
    if nx < MIN_NODES || ny < MIN_NODES {
        return Err(Failure::precondition(format!(
            "resolution {nx}x{ny} is below {MIN_NODES} nodes per side"
        )));
    }
    let [x0, y0, x1, y1] = match (&grid.domain, fallback) {
        (Some(text), _) => {
            let v = numbers(text, 4, "--domain")?;
            [v[0], v[1], v[2], v[3]]
        }
        (None, Some(d)) => [d.x0(), d.y0(), d.x1(), d.y1()],
        (None, None) => [-1.0, -1.0, 1.0, 1.0],
    };
    Ok(GridDomain::new(x0, y0, x1, y1, nx, ny)?)
}

/// Builds the field named by `--field`, resampled to any resolution override.
fn load_field(args: &FieldArgs) -> Result<NormField, Failure> {
    let path = Path::new(&args.field);
    if path.is_file() {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        let field = field_from_json(&text)?;
        let domain = grid_domain(&args.grid, Some(field.domain()))?;
        if domain == *field.domain() {
            return Ok(field);
        }
        let resampled = NormField::from_fn(domain, |p| {
            field
                .interpolate(p)
                .ok_or_else(|| isoforge_core::Error::Precondition(format!("({}, {}) is outside the field file's domain", p[0], p[1])))
        })?;
        return Ok(resampled);
    }
    let domain = grid_domain(&args.grid, None)?;
    if let Some(parts) = args.field.strip_prefix("blend:") {
        let (inner, outer) = parts
            .split_once('/')
            .ok_or_else(|| Failure::parse(format!("blend preset needs '<inner>/<outer>', got '{parts}'")))?;
        let inner = Norm2::preset(inner, args.samples)?;
        let outer = Norm2::preset(outer, args.samples)?;
        let center = [0.5 * (domain.x0() + domain.x1()), 0.5 * (domain.y0() + domain.y1())];
        let side = (domain.x1() - domain.x0()).min(domain.y1() - domain.y0());
        return Ok(blended_field(domain, center, side / 6.5, &inner, &outer)?);
    }
    let norm = Norm2::preset(&args.field, args.samples)?;
    Ok(NormField::constant(domain, &norm)?)
}

fn mat(m: &Mat2) -> Value {
    json!([[m.a11, m.a12], [m.a21, m.a22]])
}

fn complex(z: Complex64) -> Value {
    json!([z.re, z.im])
}

pub fn bm_distance(m: &str, n: &str, samples: usize, out: &OutArgs) -> Result<(), Failure> {
    let sink = sink(out)?;
    let nm = Norm2::preset(m, samples)?;
    let nn = Norm2::preset(n, samples)?;
    let bm = banach_mazur_distance(&nm, &nn)?;
    let ellipse = |norm: &Norm2| {
        let de = distance_ellipse(norm);
        json!({
            "mu": complex(de.ellipse.mu),
            "scale": de.ellipse.scale,
            "distortion_to_l2": de.distortion,
            "degenerate": de.degenerate,
        })
    };
    sink.report(
        "bm-distance",
        json!({
            "m": m,
            "n": n,
            "samples": samples,
            "distance": bm.distance,
            "witness": mat(&bm.witness.matrix()),
            "distance_ellipse_m": ellipse(&nm),
            "distance_ellipse_n": ellipse(&nn),
        }),
    )
}

fn parse_mu(spec: &str, domain: GridDomain) -> Result<ComplexGrid, Failure> {
    if let Some(v) = spec.strip_prefix("const:") {
        let v = numbers(v, 2, "const mu")?;
        return Ok(ComplexGrid::constant(domain, Complex64::new(v[0], v[1])));
    }
    if let Some(v) = spec.strip_prefix("bump:") {
        let v = numbers(v, 1, "bump mu")?;
        return Ok(radial_bump(domain, Complex64::new(v[0], 0.0)));
    }
    Err(Failure::parse(format!("mu must be 'const:<re>,<im>' or 'bump:<amplitude>', got '{spec}'")))
}

fn map_artifacts(sink: &Sink, out: &OutArgs, name: &str, map: &GridMap) -> Result<(), Failure> {
    sink.artifact(&format!("{name}.csv"), &map.to_csv())?;
    if out.svg {
        sink.artifact(&format!("{name}.svg"), &map.to_svg())?;
    }
    Ok(())
}

pub fn beltrami(mu: &str, grid: &GridArgs, out: &OutArgs) -> Result<(), Failure> {
    let sink = sink(out)?;
    let domain = grid_domain(grid, None)?;
    let mu = parse_mu(mu, domain)?;
    let problem = BeltramiProblem::normalized(mu)?;
    let sol = solve_beltrami(&problem)?;
    map_artifacts(&sink, out, "map", &sol.map)?;
    sink.report(
        "beltrami",
        json!({
            "nx": domain.nx(),
            "ny": domain.ny(),
            "mu_max": problem.mu().max_abs(),
            "solver_residual": sol.residual,
            "self_consistency": self_consistency(problem.mu(), &sol.map),
        }),
    )
}

fn dilatation_csv(d: &DilatationField) -> String {
    let mut s = String::from("i,j,x,y,k_outer,k_inner,distortion\n");
    for k in 0..d.domain.len() {
        let (i, j) = d.domain.coords(k);
        let p = d.domain.node(i, j);
        s.push_str(&format!(
            "{i},{j},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            p[0],
            p[1],
            d.k_outer[k],
            d.k_inner[k],
            d.distortion(k)
        ));
    }
    s
}

pub fn uniformize(args: &FieldArgs, out: &OutArgs) -> Result<(), Failure> {
    let sink = sink(out)?;
    let field = load_field(args)?;
    let r = isothermal_coordinates(&field)?;
    map_artifacts(&sink, out, "coords", &r.coords)?;
    sink.artifact("dilatations.csv", &dilatation_csv(&r.dilatations))?;
    let d = field.domain();
    sink.report(
        "uniformize",
        json!({
            "field": args.field,
            "nx": d.nx(),
            "ny": d.ny(),
            "mu_max": r.mu.max_abs(),
            "degenerate_nodes": r.degenerate_nodes,
            "solver_residual": r.solver_residual,
            "residual_mu_max": r.max_residual_mu(),
            "dilatations": {
                "k_outer": r.global.k_outer,
                "k_inner": r.global.k_inner,
                "distortion": r.global.distortion,
            },
        }),
    )
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Item {
    Quad(Quad),
    Annulus(Annulus),
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Failure::parse(format!("{}: {e}", path.display())))
}

fn options(tol: f64) -> Result<ModulusOptions, Failure> {
    if !(tol > 0.0 && tol <= 1e-2) {
        return Err(Failure::precondition(format!("--tol {tol} must lie in (0, 1e-2]")));
    }
    Ok(ModulusOptions::with_tol(tol))
}

fn modulus_json(r: &ModulusResult, with_paths: bool, rect: &NodeRect, domain: &GridDomain) -> Value {
    let mut v = json!({
        "value": r.value,
        "iterations": r.iterations,
        "gap": r.certificate_gap,
        "lower_bound": r.lower_bound,
        "upper_bound": r.upper_bound,
        "shortest_path": if r.shortest_path.is_finite() { json!(r.shortest_path) } else { Value::Null },
    });
    if with_paths {
        let paths: Vec<Value> = r
            .active_paths
            .iter()
            .map(|p| {
                Value::Array(
                    p.iter()
                        .map(|&k| {
                            let (i, j) = rect.grid(k);
                            let q = domain.node(i, j);
                            json!([q[0], q[1]])
                        })
                        .collect(),
                )
            })
            .collect();
        v["paths"] = Value::Array(paths);
    }
    v
}

pub fn modulus(
    args: &FieldArgs,
    quads: &[String],
    annuli: &[String],
    spec: Option<&Path>,
    with_paths: bool,
    tol: f64,
    out: &OutArgs,
) -> Result<(), Failure> {
    let sink = sink(out)?;
    let mut items = Vec::new();
    for q in quads {
        let v = numbers(q, 4, "--quad")?;
        items.push(Item::Quad(Quad::new(v[0], v[1], v[2], v[3])));
    }
    for a in annuli {
        let v = numbers(a, 4, "--annulus")?;
        items.push(Item::Annulus(Annulus {
            center: [v[0], v[1]],
            r: v[2],
            big_r: v[3],
        }));
    }
    if let Some(path) = spec {
        items.extend(read_json::<Vec<Item>>(path)?);
    }
    if items.is_empty() {
        return Err(Failure::precondition("no quadrilateral or annulus given"));
    }
    let opts = options(tol)?;
    let field = load_field(args)?;
    let d = *field.domain();
    let mut results = Vec::new();
    for item in &items {
        results.push(match item {
            Item::Quad(q) => {
                let [h, v] = quadrilateral_modulus_results(&field, q, opts)?;
                let rect = NodeRect::covering(&d, q.x0, q.y0, q.x1, q.y1)?;
                json!({
                    "quad": q,
                    "horizontal": modulus_json(&h, with_paths, &rect, &d),
                    "vertical": modulus_json(&v, with_paths, &rect, &d),
                    "product": h.value * v.value,
                })
            }
            Item::Annulus(a) => {
                let r = annulus_modulus(&field, a, opts)?;
                json!({
                    "annulus": a,
                    "modulus": modulus_json(&r, with_paths, &NodeRect::full(&d), &d),
                })
            }
        });
    }
    sink.report(
        "modulus",
        json!({
            "field": args.field,
            "nx": d.nx(),
            "ny": d.ny(),
            "tol": tol,
            "results": results,
        }),
    )
}

#[derive(Debug, Deserialize)]
struct ReciprocitySpec {
    quads: Vec<Quad>,
    annuli: Vec<Annulus>,
}

/// The whole domain, a central square and a central 2:1 rectangle, plus
/// annuli about the centre with `R` fixed and `r = R e^-k`, `k = 1..4`.
fn default_samples(d: &GridDomain) -> ReciprocitySpec {
    let (cx, cy) = (0.5 * (d.x0() + d.x1()), 0.5 * (d.y0() + d.y1()));
    let (w, h) = (d.x1() - d.x0(), d.y1() - d.y0());
    let s = w.min(h);
    let big_r = 0.4 * s;
    ReciprocitySpec {
        quads: vec![
            Quad::new(d.x0(), d.y0(), d.x1(), d.y1()),
            Quad::new(cx - 0.25 * s, cy - 0.25 * s, cx + 0.25 * s, cy + 0.25 * s),
            Quad::new(cx - 0.4 * s, cy - 0.2 * s, cx + 0.4 * s, cy + 0.2 * s),
        ],
        annuli: (1..=4)
            .map(|k| Annulus {
                center: [cx, cy],
                r: big_r * (-(k as f64)).exp(),
                big_r,
            })
            .collect(),
    }
}

pub fn reciprocality(args: &FieldArgs, spec: Option<&Path>, tol: f64, out: &OutArgs) -> Result<(), Failure> {
    let sink = sink(out)?;
    let opts = options(tol)?;
    let field = load_field(args)?;
    let samples = match spec {
        Some(path) => read_json::<ReciprocitySpec>(path)?,
        None => default_samples(field.domain()),
    };
    let rep = reciprocality_report(&field, &samples.quads, &samples.annuli, opts)?;
    let quads: Vec<Value> = rep
        .quads
        .iter()
        .map(|(q, m)| json!({"quad": q, "horizontal": m.horizontal, "vertical": m.vertical, "product": m.product()}))
        .collect();
    let decay: Vec<Value> = rep.point_decay.iter().map(|(r, m)| json!({"r": r, "modulus": m})).collect();
    let d = field.domain();
    sink.report(
        "reciprocality",
        json!({
            "field": args.field,
            "nx": d.nx(),
            "ny": d.ny(),
            "tol": tol,
            "quads": quads,
            "kappa_upper": rep.kappa_upper,
            "kappa_lower": rep.kappa_lower,
            "point_decay": decay,
            "decay_monotone": rep.decay_monotone,
        }),
    )
}

fn parse_exponent(p: &str) -> Result<f64, Failure> {
    let v = match p.trim() {
        "inf" | "infinity" | "Inf" => f64::INFINITY,
        s => s.parse::<f64>().map_err(|_| Failure::parse(format!("--p must be a number or 'inf', got '{p}'")))?,
    };
    if !(v >= 1.0) {
        return Err(Failure::precondition(format!("--p {v} must be at least 1")));
    }
    Ok(v)
}

pub fn verify_annulus(p: &str, r: f64, nx: usize, samples: usize, out: &OutArgs) -> Result<(), Failure> {
    let sink = sink(out)?;
    let p = parse_exponent(p)?;
    if !(r > 1.0 && r.is_finite()) {
        return Err(Failure::precondition(format!("outer radius {r} must exceed the inner radius 1")));
    }
    if nx < MIN_NODES {
        return Err(Failure::precondition(format!("resolution {nx} is below {MIN_NODES} nodes per side")));
    }
    let norm = Norm2::lp(samples, p)?;
    let domain = GridDomain::centered_square(r, nx)?;
    let field = NormField::constant(domain, &norm)?;
    let iso = isothermal_coordinates(&field)?;
    let bm = banach_mazur_distance(&norm, &Norm2::euclidean(samples))?.distance;

    let mut csv = String::from("i,j,x,y,distortion\n");
    let (mut lo, mut hi, mut worst) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    let mut count = 0usize;
    for k in 0..domain.len() {
        let (i, j) = domain.coords(k);
        let q = domain.node(i, j);
        let radius = q[0].hypot(q[1]);
        if !(1.0..=r).contains(&radius) {
            continue;
        }
        let dist = iso.dilatations.distortion(k);
        lo = lo.min(dist);
        hi = hi.max(dist);
        worst = worst.max((dist - bm).abs());
        count += 1;
        csv.push_str(&format!("{i},{j},{:.17e},{:.17e},{:.17e}\n", q[0], q[1], dist));
    }
    sink.artifact("distortion.csv", &csv)?;
    if out.svg {
        sink.artifact("coords.svg", &iso.coords.to_svg())?;
    }
    let constant = hi - lo <= ANNULUS_TOL;
    let matches = worst <= ANNULUS_TOL;
    let passed = count > 0 && constant && matches;
    sink.report(
        "verify-annulus",
        json!({
            "p": if p.is_finite() { json!(p) } else { json!("inf") },
            "r": r,
            "nx": nx,
            "annulus_nodes": count,
            "bm_distance": bm,
            "distortion_min": lo,
            "distortion_max": hi,
            "max_deviation_from_bm": worst,
            "residual_mu_max": iso.max_residual_mu(),
            "tolerance": ANNULUS_TOL,
            "constant": constant,
            "matches_bm_distance": matches,
            "passed": passed,
        }),
    )?;
    if passed {
        Ok(())
    } else {
        Err(Failure::verification(format!(
            "distortion range [{lo}, {hi}] vs Banach-Mazur distance {bm} (tolerance {ANNULUS_TOL})"
        )))
    }
}
