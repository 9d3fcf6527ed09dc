use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use super::linear::Mat2;
use crate::error::{Error, Result};

/// Default number of radial samples of a norm.
pub const DEFAULT_SAMPLES: usize = 256;

/// A symmetric convex gauge on the plane, stored as the radii of its unit
/// sphere along `N` equally spaced directions `theta_k = 2 pi k / N`.
///
/// The unit ball is the convex polygon with vertices `r_k (cos theta_k, sin theta_k)`;
/// every quantity (evaluation, area, operator norms) is computed exactly for
/// that polygon.
#[derive(Clone)]
pub struct Norm2 {
    gauge: Arc<[f64]>,
    dirs: Arc<[Complex64]>,
}

impl fmt::Debug for Norm2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Norm2")
            .field("n", &self.gauge.len())
            .field("r_min", &self.min_radius())
            .field("r_max", &self.max_radius())
            .finish()
    }
}

impl PartialEq for Norm2 {
    fn eq(&self, other: &Self) -> bool {
        self.gauge == other.gauge
    }
}

/// Unit directions for `n` samples, built from one octant so that axis and
/// diagonal directions are exact and `u_{k + n/2} = -u_k` bit for bit.
pub(crate) fn unit_directions(n: usize) -> Arc<[Complex64]> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<[Complex64]>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("direction cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let q = n / 4;
            let step = 2.0 * PI / n as f64;
            let first_quadrant = |m: usize| -> (f64, f64) {
                if 2 * m == q {
                    (FRAC_1_SQRT_2, FRAC_1_SQRT_2)
                } else if 2 * m < q {
                    let t = m as f64 * step;
                    (t.cos(), t.sin())
                } else {
                    let t = (q - m) as f64 * step;
                    (t.sin(), t.cos())
                }
            };
            (0..n)
                .map(|k| {
                    let (c, s) = first_quadrant(k % q);
                    let (x, y) = match k / q {
                        0 => (c, s),
                        1 => (-s, c),
                        2 => (-c, -s),
                        _ => (s, -c),
                    };
                    Complex64::new(x, y)
                })
                .collect()
        })
        .clone()
}

#[inline]
pub(crate) fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

impl Norm2 {
    /// Builds a norm from radial samples, checking symmetry, positivity and convexity.
    pub fn from_gauge(gauge: Vec<f64>) -> Result<Self> {
        let n = gauge.len();
        if n < 8 || n % 4 != 0 {
            return Err(Error::InvalidNorm(format!(
                "sample count {n} must be a multiple of 4 and at least 8"
            )));
        }
        if let Some(k) = gauge.iter().position(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidNorm(format!(
                "radius {} at sample {k} is not positive and finite",
                gauge[k]
            )));
        }
        let r_max = gauge.iter().cloned().fold(0.0, f64::max);
        let half = n / 2;
        for k in 0..half {
            if (gauge[k] - gauge[k + half]).abs() > 1e-9 * r_max {
                return Err(Error::InvalidNorm(format!(
                    "gauge is not centrally symmetric at sample {k}"
                )));
            }
        }
        let norm = Norm2 {
            gauge: gauge.into(),
            dirs: unit_directions(n),
        };
        norm.check_convex()?;
        Ok(norm)
    }

    /// Samples the gauge `f` (a norm on the plane) along the unit directions.
    pub fn from_fn(n: usize, f: impl Fn([f64; 2]) -> f64) -> Result<Self> {
        if n < 8 || n % 4 != 0 {
            return Err(Error::InvalidNorm(format!(
                "sample count {n} must be a multiple of 4 and at least 8"
            )));
        }
        let dirs = unit_directions(n);
        let half = n / 2;
        let mut gauge = vec![0.0; n];
        for k in 0..half {
            let u = dirs[k];
            let r = 1.0 / f([u.re, u.im]);
            gauge[k] = r;
            gauge[k + half] = r;
        }
        Norm2::from_gauge(gauge)
    }

    pub fn euclidean(n: usize) -> Self {
        static CACHE: OnceLock<Mutex<HashMap<usize, Norm2>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().expect("euclidean cache poisoned");
        guard
            .entry(n)
            .or_insert_with(|| Norm2::lp(n, 2.0).expect("l2 gauge is valid"))
            .clone()
    }

    /// The `l_p` norm for `1 <= p <= infinity`.
    pub fn lp(n: usize, p: f64) -> Result<Self> {
        if p.is_nan() || p < 1.0 {
            return Err(Error::InvalidNorm(format!("l_p requires p >= 1, got {p}")));
        }
        if p.is_infinite() {
            return Norm2::from_fn(n, |v| v[0].abs().max(v[1].abs()));
        }
        if p == 1.0 {
            return Norm2::from_fn(n, |v| v[0].abs() + v[1].abs());
        }
        if p == 2.0 {
            return Norm2::from_fn(n, |v| (v[0] * v[0] + v[1] * v[1]).sqrt());
        }
        Norm2::from_fn(n, |v| {
            let (x, y) = (v[0].abs(), v[1].abs());
            let m = x.max(y);
            if m == 0.0 {
                return 0.0;
            }
            m * ((x / m).powf(p) + (y / m).powf(p)).powf(1.0 / p)
        })
    }

    /// The ellipse norm `v -> |A v|_2`.
    pub fn ellipse(n: usize, a: Mat2) -> Result<Self> {
        if !a.is_invertible() {
            return Err(Error::SingularMap { det: a.det() });
        }
        Norm2::from_fn(n, |v| {
            let w = a.apply(v);
            w[0].hypot(w[1])
        })
    }

    /// The Riemannian norm `v -> sqrt(v^T g v)` of a symmetric positive-definite `g`.
    pub fn riemannian(n: usize, g: [[f64; 2]; 2]) -> Result<Self> {
        if !is_spd(g) {
            return Err(Error::InvalidNorm("metric tensor is not SPD".into()));
        }
        let off = 0.5 * (g[0][1] + g[1][0]);
        Norm2::from_fn(n, |v| {
            (g[0][0] * v[0] * v[0] + 2.0 * off * v[0] * v[1] + g[1][1] * v[1] * v[1]).sqrt()
        })
    }

    /// Parses a named preset: `l1`, `l2`, `linf`, `lp:<p>` or `ellipse:<a11,a12,a21,a22>`.
    pub fn preset(name: &str, n: usize) -> Result<Self> {
        let name = name.trim();
        match name {
            "l1" => Norm2::lp(n, 1.0),
            "l2" => Ok(Norm2::euclidean(n)),
            "linf" => Norm2::lp(n, f64::INFINITY),
            _ => {
                if let Some(p) = name.strip_prefix("lp:") {
                    let p = parse_exponent(p)?;
                    Norm2::lp(n, p)
                } else if let Some(entries) = name.strip_prefix("ellipse:") {
                    let v = parse_list(entries)?;
                    if v.len() != 4 {
                        return Err(Error::Parse(format!(
                            "ellipse preset needs 4 entries, got {}",
                            v.len()
                        )));
                    }
                    Norm2::ellipse(n, Mat2::new(v[0], v[1], v[2], v[3]))
                } else {
                    Err(Error::Parse(format!("unknown norm preset '{name}'")))
                }
            }
        }
    }

    pub fn n(&self) -> usize {
        self.gauge.len()
    }

    pub fn gauge(&self) -> &[f64] {
        &self.gauge
    }

    pub fn directions(&self) -> &[Complex64] {
        &self.dirs
    }

    pub fn min_radius(&self) -> f64 {
        self.gauge.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_radius(&self) -> f64 {
        self.gauge.iter().cloned().fold(0.0, f64::max)
    }

    #[inline]
    pub fn vertex(&self, k: usize) -> Complex64 {
        self.dirs[k] * self.gauge[k]
    }

    /// Vertices of the unit-sphere polygon in counter-clockwise order.
    pub fn vertices(&self) -> Vec<Complex64> {
        (0..self.n()).map(|k| self.vertex(k)).collect()
    }

    /// Outer normals `n_j` of the polygon edges, scaled so that the edge lies on
    /// `<n_j, x> = 1`. The gauge is `M(v) = max_j <n_j, v>`.
    pub fn edge_normals(&self) -> Vec<Complex64> {
        let n = self.n();
        (0..n).map(|j| self.edge_normal(j, (j + 1) % n)).collect()
    }

    #[inline]
    fn edge_normal(&self, j: usize, next: usize) -> Complex64 {
        let p = self.vertex(j);
        let q = self.vertex(next);
        let d = q - p;
        Complex64::new(d.im, -d.re) / cross(p, q)
    }

    /// Evaluates the gauge at `v`.
    pub fn evaluate(&self, v: [f64; 2]) -> f64 {
        self.eval_c(Complex64::new(v[0], v[1]))
    }

    pub(crate) fn eval_c(&self, v: Complex64) -> f64 {
        if v.re == 0.0 && v.im == 0.0 {
            return 0.0;
        }
        let n = self.n();
        let mut theta = v.im.atan2(v.re);
        if theta < 0.0 {
            theta += 2.0 * PI;
        }
        let k = ((theta * n as f64 / (2.0 * PI)) as usize).min(n - 1);
        let mut best = f64::NEG_INFINITY;
        for j in [k + n - 1, k, k + 1] {
            let j = j % n;
            let nrm = self.edge_normal(j, (j + 1) % n);
            best = best.max(nrm.re * v.re + nrm.im * v.im);
        }
        best
    }

    fn check_convex(&self) -> Result<()> {
        let n = self.n();
        let r = self.max_radius();
        let tol = 1e-12 * r * r;
        for k in 0..n {
            let prev = self.vertex((k + n - 1) % n);
            let cur = self.vertex(k);
            let next = self.vertex((k + 1) % n);
            if cross(cur - prev, next - cur) < -tol {
                return Err(Error::InvalidNorm(format!(
                    "unit sphere polygon is not convex at sample {k}"
                )));
            }
        }
        Ok(())
    }

    /// Returns the norm `v -> self(m v)`, resampled.
    pub fn pullback(&self, m: &Mat2) -> Result<Norm2> {
        if !m.is_invertible() {
            return Err(Error::SingularMap { det: m.det() });
        }
        Norm2::from_fn(self.n(), |v| self.evaluate(m.apply(v)))
    }

    /// Returns `c * self` for `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Norm2> {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::InvalidNorm(format!("scale factor {c} must be positive")));
        }
        Norm2::from_gauge(self.gauge.iter().map(|r| r / c).collect())
    }

    /// Convex combination `sum w_i M_i` of norms sharing a sample count.
    ///
    /// Weights must be nonnegative with a positive sum; the result is a norm.
    pub fn combine(parts: &[(f64, &Norm2)]) -> Result<Norm2> {
        let n = parts
            .first()
            .map(|(_, m)| m.n())
            .ok_or_else(|| Error::InvalidNorm("empty combination".into()))?;
        if parts.iter().any(|(w, m)| m.n() != n || !(*w >= 0.0)) {
            return Err(Error::InvalidNorm(
                "combination needs nonnegative weights and equal sample counts".into(),
            ));
        }
        let mut inv = vec![0.0; n];
        for (w, m) in parts {
            if *w == 0.0 {
                continue;
            }
            for (acc, r) in inv.iter_mut().zip(m.gauge.iter()) {
                *acc += w / r;
            }
        }
        Norm2::from_gauge(inv.into_iter().map(|s| 1.0 / s).collect())
    }

    /// Area of the unit ball, by the shoelace formula on the sample polygon.
    pub fn unit_ball_area(&self) -> f64 {
        let n = self.n();
        let mut twice = 0.0;
        for k in 0..n {
            twice += cross(self.vertex(k), self.vertex((k + 1) % n));
        }
        0.5 * twice
    }

    /// Jacobian `pi / area({M <= 1})` of the norm.
    pub fn jacobian(&self) -> f64 {
        PI / self.unit_ball_area()
    }

    /// Distortion of the identity map between this norm and the exact Euclidean norm.
    pub fn identity_distortion(&self) -> f64 {
        let out = self.vertices().iter().map(|p| p.norm()).fold(0.0, f64::max);
        let inn = self.edge_normals().iter().map(|p| p.norm()).fold(0.0, f64::max);
        out * inn
    }

    /// Stable bit-level key used to deduplicate identical norms.
    pub(crate) fn key(&self) -> Vec<u64> {
        self.gauge.iter().map(|r| r.to_bits()).collect()
    }
}

pub(crate) fn is_spd(g: [[f64; 2]; 2]) -> bool {
    let sym = (g[0][1] - g[1][0]).abs() <= 1e-12 * (g[0][1].abs() + g[1][0].abs() + 1.0);
    let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
    sym && g[0][0] > 0.0 && det > 0.0 && g[1][1].is_finite() && g[0][0].is_finite()
}

fn parse_exponent(s: &str) -> Result<f64> {
    let s = s.trim();
    if matches!(s, "inf" | "infinity" | "Inf") {
        return Ok(f64::INFINITY);
    }
    s.parse::<f64>()
        .map_err(|e| Error::Parse(format!("bad exponent '{s}': {e}")))
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("bad number '{t}': {e}")))
        })
        .collect()
}

/// JSON form `{"n": N, "gauge": [r_0, ..., r_{N-1}]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Norm2Json {
    pub n: usize,
    pub gauge: Vec<f64>,
}

impl From<&Norm2> for Norm2Json {
    fn from(m: &Norm2) -> Self {
        Norm2Json {
            n: m.n(),
            gauge: m.gauge.to_vec(),
        }
    }
}

impl TryFrom<Norm2Json> for Norm2 {
    type Error = Error;

    fn try_from(j: Norm2Json) -> Result<Self> {
        if j.n != j.gauge.len() {
            return Err(Error::Parse(format!(
                "declared n = {} but gauge has {} samples",
                j.n,
                j.gauge.len()
            )));
        }
        Norm2::from_gauge(j.gauge)
    }
}

impl Serialize for Norm2 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        Norm2Json::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Norm2 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let j = Norm2Json::deserialize(d)?;
        Norm2::try_from(j).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const N: usize = DEFAULT_SAMPLES;

    #[test]
    fn evaluates_presets() {
        let l2 = Norm2::euclidean(N);
        let linf = Norm2::lp(N, f64::INFINITY).unwrap();
        let l1 = Norm2::lp(N, 1.0).unwrap();
        assert!((l2.evaluate([3.0, 4.0]) - 5.0).abs() < 5.0 * 1e-4);
        assert!((linf.evaluate([1.0, 1.0]) - 1.0).abs() < 1e-14);
        assert!((l1.evaluate([0.5, -0.5]) - 1.0).abs() < 1e-14);
        assert_eq!(l2.evaluate([0.0, 0.0]), 0.0);
        // axis evaluation of the sampled Euclidean norm is exact
        assert_eq!(l2.evaluate([0.25, 0.0]), 0.25);
        assert_eq!(l2.evaluate([0.0, -0.5]), 0.5);
    }

    #[test]
    fn evaluation_is_symmetric_and_homogeneous() {
        let m = Norm2::lp(N, 3.0).unwrap();
        for &(x, y) in &[(0.3, 0.9), (-1.2, 0.1), (2.0, -2.0)] {
            let a = m.evaluate([x, y]);
            assert!((a - m.evaluate([-x, -y])).abs() < 1e-14);
            assert!((2.5 * a - m.evaluate([2.5 * x, 2.5 * y])).abs() < 1e-13);
        }
    }

    #[test]
    fn unit_ball_areas() {
        let a2 = Norm2::euclidean(N).unit_ball_area();
        assert!((a2 - PI).abs() / PI < 2e-4);
        let a_inf = Norm2::lp(N, f64::INFINITY).unwrap().unit_ball_area();
        assert!((a_inf - 4.0).abs() < 1e-12);
        let a1 = Norm2::lp(N, 1.0).unwrap().unit_ball_area();
        assert!((a1 - 2.0).abs() < 1e-12);
    }

    #[test]
    fn jacobians() {
        assert!((Norm2::euclidean(N).jacobian() - 1.0).abs() < 2e-4);
        let j_inf = Norm2::lp(N, f64::INFINITY).unwrap().jacobian();
        assert!((j_inf - PI / 4.0).abs() < 1e-12);
        let j1 = Norm2::lp(N, 1.0).unwrap().jacobian();
        assert!((j1 - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_gauges() {
        assert!(Norm2::from_gauge(vec![1.0; 10]).is_err());
        assert!(Norm2::from_gauge(vec![1.0; 6]).is_err());
        let mut g = vec![1.0; 16];
        g[3] = -1.0;
        assert!(Norm2::from_gauge(g).is_err());
        let mut g = vec![1.0; 16];
        g[3] = 1.5;
        assert!(Norm2::from_gauge(g).is_err(), "asymmetric");
        let mut g = vec![1.0; 16];
        g[3] = 0.5;
        g[11] = 0.5;
        assert!(Norm2::from_gauge(g).is_err(), "dent breaks convexity");
        assert!(Norm2::lp(N, 0.5).is_err());
    }

    #[test]
    fn directions_are_exactly_symmetric() {
        let d = unit_directions(N);
        for k in 0..N / 2 {
            assert_eq!(d[k + N / 2], -d[k]);
        }
        assert_eq!(d[N / 4], Complex64::new(0.0, 1.0));
        assert_eq!(d[N / 8].re, d[N / 8].im);
    }

    #[test]
    fn presets_parse() {
        assert!(Norm2::preset("lp:1.5", N).is_ok());
        assert!(Norm2::preset("lp:inf", N).is_ok());
        let e = Norm2::preset("ellipse:2,0,0,1", N).unwrap();
        assert!((e.evaluate([1.0, 0.0]) - 2.0).abs() < 1e-14);
        assert!(matches!(Norm2::preset("l7", N), Err(Error::Parse(_))));
        assert!(Norm2::preset("ellipse:1,2,3", N).is_err());
    }

    #[test]
    fn combination_is_a_norm() {
        let l2 = Norm2::euclidean(N);
        let linf = Norm2::lp(N, f64::INFINITY).unwrap();
        let c = Norm2::combine(&[(0.3, &linf), (0.7, &l2)]).unwrap();
        let v = [0.4, -0.9];
        let expect = 0.3 * linf.evaluate(v) + 0.7 * l2.evaluate(v);
        assert!((c.evaluate(v) - expect).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip() {
        let m = Norm2::lp(16, 3.0).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: Norm2 = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
        assert!(serde_json::from_str::<Norm2>(r#"{"n": 8, "gauge": [1,1,1,1]}"#).is_err());
    }
}
