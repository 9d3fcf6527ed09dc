//! Banach–Mazur distances, distance ellipses and John ellipses of planar norms.
//!
//! The distance ellipse of a norm `M` is described by the unique `mu` in the
//! unit disk for which `T = id + mu conj` minimizes the distortion
//! `|T|_{M -> l2} |T^-1|_{l2 -> M}`. For a polygonal norm with vertices `p_k`
//! and edge normals `n_j` both factors have closed forms:
//!
//! ```text
//! |T|      = max_k |p_k + mu conj(p_k)|
//! |T^-1|   = max_j |n_j - mu conj(n_j)| / (1 - |mu|^2)
//! ```
//!
//! so the search is a two-parameter minimization over the disk.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_4, PI};

use super::linear::{LinearMap2, Mat2};
use super::norm::Norm2;
use super::ops::matrix_operator_norm;
use super::optimize::NelderMead;
use crate::error::{Error, Result};

/// Largest admissible `|mu|` of an [`Ellipse2`].
pub const MU_CAP: f64 = 0.999;

/// Radius of the disk covered by the coarse grid of the `mu` search.
const GRID_RADIUS: f64 = 0.95;
const GRID_SIZE: usize = 21;
/// Distortion variation below which the landscape counts as flat.
const FLAT_TOLERANCE: f64 = 1e-9;
/// Rotations scanned between the two distance ellipses, and how many of the
/// best are refined.
const ROTATION_SCAN: usize = 64;
const ROTATION_SEEDS: usize = 6;

/// The ellipse norm `v -> scale |v + mu conj(v)|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse2 {
    pub mu: Complex64,
    pub scale: f64,
}

impl Ellipse2 {
    pub fn new(mu: Complex64, scale: f64) -> Result<Self> {
        if !(mu.norm() <= MU_CAP) {
            return Err(Error::Precondition(format!(
                "|mu| = {} exceeds the cap {MU_CAP}",
                mu.norm()
            )));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::Precondition(format!("ellipse scale {scale} must be positive")));
        }
        Ok(Ellipse2 { mu, scale })
    }

    pub fn evaluate(&self, v: [f64; 2]) -> f64 {
        let z = Complex64::new(v[0], v[1]);
        self.scale * (z + self.mu * z.conj()).norm()
    }

    /// The linear map `scale (id + mu conj)`, which sends this ellipse norm to `l2`.
    pub fn matrix(&self) -> Mat2 {
        Mat2::from_complex_pair(Complex64::new(self.scale, 0.0), self.mu * self.scale)
    }

    pub fn area(&self) -> f64 {
        PI / (self.scale * self.scale * (1.0 - self.mu.norm_sqr()))
    }

    pub fn to_norm(&self, n: usize) -> Result<Norm2> {
        Norm2::from_fn(n, |v| self.evaluate(v))
    }
}

/// Result of [`distance_ellipse`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceEllipse {
    pub ellipse: Ellipse2,
    /// Distortion of the witness `T = id + mu conj` into the Euclidean norm.
    pub distortion: f64,
    /// Set when the distortion was flat (within 1e-9) over a region of `mu`;
    /// `mu` is then the centroid of that region.
    pub degenerate: bool,
}

impl DistanceEllipse {
    /// The Banach–Mazur minimizer `scale (id + mu conj)` from the norm to `l2`.
    pub fn witness(&self) -> LinearMap2 {
        LinearMap2::new(self.ellipse.matrix()).expect("|mu| < 1 gives an invertible map")
    }
}

/// Polygon data needed by the closed-form distortion.
struct Profile {
    vertices: Vec<Complex64>,
    normals: Vec<Complex64>,
}

impl Profile {
    fn new(m: &Norm2) -> Self {
        // normalizing by the largest radius makes the search independent of a
        // global scale factor on the norm
        let s = m.max_radius();
        Profile {
            vertices: m.vertices().iter().map(|p| p / s).collect(),
            normals: m.edge_normals().iter().map(|q| q * s).collect(),
        }
    }

    fn outer(&self, mu: Complex64) -> f64 {
        max_twisted(&self.vertices, mu)
    }

    fn inner(&self, mu: Complex64) -> f64 {
        max_twisted(&self.normals, -mu)
    }

    fn distortion(&self, mu: Complex64) -> f64 {
        let d = 1.0 - mu.norm_sqr();
        if !(d > 1.0 - MU_CAP * MU_CAP) {
            return f64::INFINITY;
        }
        self.outer(mu) * self.inner(mu) / d
    }

    fn john_objective(&self, mu: Complex64) -> f64 {
        let d = 1.0 - mu.norm_sqr();
        if !(d > 1.0 - MU_CAP * MU_CAP) {
            return f64::INFINITY;
        }
        2.0 * self.inner(mu).ln() - d.ln()
    }
}

#[inline]
fn max_twisted(points: &[Complex64], mu: Complex64) -> f64 {
    let mut best = 0.0f64;
    for p in points {
        let w = p + mu * p.conj();
        best = best.max(w.norm_sqr());
    }
    best.sqrt()
}

fn to_mu(x: &[f64]) -> Complex64 {
    Complex64::new(x[0], x[1])
}

/// Minimizes `f` over the `mu` disk: coarse grid, then Nelder–Mead from the
/// best grid points.
fn search_disk(f: &dyn Fn(Complex64) -> f64) -> (Complex64, f64) {
    let h = 2.0 * GRID_RADIUS / (GRID_SIZE - 1) as f64;
    let mut samples = Vec::with_capacity(GRID_SIZE * GRID_SIZE);
    for i in 0..GRID_SIZE {
        for j in 0..GRID_SIZE {
            let mu = Complex64::new(-GRID_RADIUS + i as f64 * h, -GRID_RADIUS + j as f64 * h);
            if mu.norm() <= GRID_RADIUS + 1e-12 {
                samples.push((mu, f(mu)));
            }
        }
    }
    samples.sort_by(|a, b| {
        a.1.total_cmp(&b.1)
            .then(a.0.re.total_cmp(&b.0.re))
            .then(a.0.im.total_cmp(&b.0.im))
    });
    let nm = NelderMead {
        x_tol: 1e-11,
        f_tol: 1e-15,
        max_iterations: 2000,
    };
    let objective = |x: &[f64]| f(to_mu(x));
    let mut best = (samples[0].0, samples[0].1);
    let mut seeds: Vec<Complex64> = vec![samples[0].0];
    // a second, well separated seed guards against a misleading coarse grid
    if let Some(s) = samples.iter().find(|s| (s.0 - samples[0].0).norm() > 2.5 * h) {
        seeds.push(s.0);
    }
    for seed in seeds {
        let m = nm.minimize_with_restarts(objective, &[seed.re, seed.im], 0.5 * h, 3);
        if m.value < best.1 {
            best = (to_mu(&m.x), m.value);
        }
    }
    best
}

/// If the landscape is flat around `mu`, returns the centroid of the flat region.
fn flat_region_centroid(f: &dyn Fn(Complex64) -> f64, mu: Complex64, value: f64) -> Option<Complex64> {
    let probe = 1e-4;
    let flat = (0..8).all(|k| {
        let dir = Complex64::from_polar(probe, k as f64 * FRAC_PI_4);
        (f(mu + dir) - value).abs() < FLAT_TOLERANCE
    });
    if !flat {
        return None;
    }
    let span = 0.05;
    let steps = 21;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut count = 0usize;
    for i in 0..steps {
        for j in 0..steps {
            let off = Complex64::new(
                -span + 2.0 * span * i as f64 / (steps - 1) as f64,
                -span + 2.0 * span * j as f64 / (steps - 1) as f64,
            );
            let p = mu + off;
            if p.norm() < MU_CAP && f(p) < value + FLAT_TOLERANCE {
                sum += p;
                count += 1;
            }
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// The distance ellipse of `m`: the Beltrami coefficient `mu_M` of the unique
/// Banach–Mazur minimizer of the form `id + mu conj` into the Euclidean plane,
/// and the scale with `|scale T|_{M -> l2} = 1`.
pub fn distance_ellipse(m: &Norm2) -> DistanceEllipse {
    let profile = Profile::new(m);
    let f = |mu: Complex64| profile.distortion(mu);
    let (mut mu, mut value) = search_disk(&f);
    let mut degenerate = false;
    if let Some(c) = flat_region_centroid(&f, mu, value) {
        mu = c;
        value = f(c);
        degenerate = true;
    }
    if mu.norm() > MU_CAP {
        mu *= MU_CAP / mu.norm();
        value = f(mu);
    }
    let t = Mat2::from_complex_pair(Complex64::new(1.0, 0.0), mu);
    let scale = 1.0 / super::ops::operator_norm_to_euclidean(&t, m);
    DistanceEllipse {
        ellipse: Ellipse2 { mu, scale },
        distortion: value.max(1.0),
        degenerate,
    }
}

/// `rho(M, l2)` through the distance-ellipse reduction.
pub fn euclidean_distance(m: &Norm2) -> f64 {
    distance_ellipse(m).distortion
}

/// Distortion of `id + mu conj` from `m` into the exact Euclidean plane.
pub fn twisted_distortion(m: &Norm2, mu: Complex64) -> f64 {
    Profile::new(m).distortion(mu)
}

/// The maximal-area ellipse inscribed in the unit ball of `m`.
pub fn john_ellipse(m: &Norm2) -> Ellipse2 {
    let profile = Profile::new(m);
    let f = |mu: Complex64| profile.john_objective(mu);
    let (mu, _) = search_disk(&f);
    let mu = if mu.norm() > MU_CAP {
        mu * (MU_CAP / mu.norm())
    } else {
        mu
    };
    // smallest scale with {E <= 1} inside {M <= 1}: |T^-1|_{l2 -> M}
    let t = Mat2::from_complex_pair(Complex64::new(1.0, 0.0), mu);
    let scale = super::ops::operator_norm_from_euclidean(&t.inverse().expect("|mu| < 1"), m);
    Ellipse2 { mu, scale }
}

/// Result of [`banach_mazur_distance`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BanachMazur {
    pub distance: f64,
    /// Minimizer normalized to `|det| = 1`.
    pub witness: LinearMap2,
}

fn matrix_distortion(s: &Mat2, m: &Norm2, n: &Norm2) -> f64 {
    match s.inverse() {
        Some(inv) => matrix_operator_norm(s, m, n) * matrix_operator_norm(&inv, n, m),
        None => f64::INFINITY,
    }
}

fn unit_det(s: Mat2) -> Mat2 {
    s.scale(1.0 / s.det().abs().sqrt())
}

/// Multiplicative Banach–Mazur distance `min |S| |S^-1|` over invertible `S`
/// from `(R^2, m)` to `(R^2, n)`, by multi-start Nelder–Mead over 2x2 matrices.
pub fn banach_mazur_distance(m: &Norm2, n: &Norm2) -> Result<BanachMazur> {
    let em = distance_ellipse(m).ellipse.matrix();
    let en_inv = distance_ellipse(n)
        .ellipse
        .matrix()
        .inverse()
        .expect("distance ellipse map is invertible");
    let reflect = Mat2::diag(1.0, -1.0);

    // both distance ellipses map to l2, so rotations of l2 between them give
    // candidates; scan the half turn for each orientation
    let mut scan: Vec<(Mat2, f64)> = Vec::with_capacity(2 * ROTATION_SCAN);
    for k in 0..ROTATION_SCAN {
        let r = Mat2::rotation(PI * k as f64 / ROTATION_SCAN as f64);
        for s in [en_inv * r * em, en_inv * r * reflect * em] {
            scan.push((s, matrix_distortion(&s, m, n)));
        }
    }
    scan.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut seeds = vec![
        Mat2::IDENTITY,
        Mat2::new(1.0, 1.0, 0.0, 1.0),
        Mat2::new(1.0, -1.0, 0.0, 1.0),
    ];
    seeds.extend(scan.iter().take(ROTATION_SEEDS).map(|(s, _)| *s));

    let nm = NelderMead {
        x_tol: 1e-10,
        f_tol: 1e-14,
        max_iterations: 6000,
    };
    let objective = |x: &[f64]| matrix_distortion(&Mat2::new(x[0], x[1], x[2], x[3]), m, n);

    let mut best: Option<(Mat2, f64)> = None;
    let mut any_converged = false;
    let mut iterations = 0;
    for seed in seeds {
        let s = unit_det(seed);
        let start = [s.a11, s.a12, s.a21, s.a22];
        let res = nm.minimize_with_restarts(objective, &start, 0.1, 3);
        iterations += res.iterations;
        any_converged |= res.converged;
        let cand = Mat2::new(res.x[0], res.x[1], res.x[2], res.x[3]);
        if best.map_or(true, |(_, v)| res.value < v) && res.value.is_finite() {
            best = Some((cand, res.value));
        }
    }
    let (s, value) = best.ok_or(Error::NonConvergence {
        iterations,
        best: f64::INFINITY,
    })?;
    if !any_converged {
        return Err(Error::NonConvergence {
            iterations,
            best: value,
        });
    }
    let witness = LinearMap2::new(unit_det(s))?;
    Ok(BanachMazur {
        distance: value.max(1.0),
        witness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex_kernel::ops::{linear_dilatations, linear_distortion};
    use std::f64::consts::SQRT_2;

    const N: usize = 256;

    #[test]
    fn round_and_square_have_zero_mu() {
        let de = distance_ellipse(&Norm2::euclidean(N));
        assert!(de.ellipse.mu.norm() < 1e-6, "{de:?}");
        assert!((de.distortion - 1.0).abs() < 1e-4);
        let de = distance_ellipse(&Norm2::lp(N, f64::INFINITY).unwrap());
        assert!(de.ellipse.mu.norm() < 1e-6, "{de:?}");
        assert!((de.distortion - SQRT_2).abs() < 1e-9);
        assert!(!de.degenerate);
    }

    #[test]
    fn ellipse_norm_recovers_its_beltrami_coefficient() {
        let a = Mat2::new(1.0, 0.4, -0.3, 1.7);
        let de = distance_ellipse(&Norm2::ellipse(N, a).unwrap());
        let expect = a.beltrami_coefficient();
        assert!((de.ellipse.mu - expect).norm() < 2e-4, "{de:?} vs {expect}");
        assert!((de.distortion - 1.0).abs() < 1e-3);
    }

    #[test]
    fn witness_is_normalized() {
        let m = Norm2::lp(N, 1.3).unwrap();
        let de = distance_ellipse(&m);
        let l2 = Norm2::euclidean(N);
        let w = de.witness();
        let op = super::super::ops::operator_norm(&w, &m, &l2);
        assert!((op - 1.0).abs() < 1e-4);
        assert!((linear_distortion(&w, &m, &l2) - de.distortion).abs() < 1e-4);
    }

    #[test]
    fn john_ellipse_presets() {
        let e = john_ellipse(&Norm2::euclidean(N));
        assert!(e.mu.norm() < 1e-6 && (e.scale - 1.0).abs() < 1e-4);
        let e = john_ellipse(&Norm2::lp(N, f64::INFINITY).unwrap());
        assert!(e.mu.norm() < 1e-6 && (e.scale - 1.0).abs() < 1e-9, "{e:?}");
    }

    #[test]
    fn bm_distance_between_l1_and_linf_is_one() {
        let l1 = Norm2::lp(N, 1.0).unwrap();
        let linf = Norm2::lp(N, f64::INFINITY).unwrap();
        let bm = banach_mazur_distance(&l1, &linf).unwrap();
        assert!((bm.distance - 1.0).abs() < 1e-6, "{bm:?}");
        let k = linear_dilatations(&bm.witness, &l1, &linf);
        assert!((k.distortion() - bm.distance).abs() < 1e-9);
    }

    #[test]
    fn ellipse_type_checks_cap() {
        assert!(Ellipse2::new(Complex64::new(0.9995, 0.0), 1.0).is_err());
        assert!(Ellipse2::new(Complex64::new(0.5, 0.0), 0.0).is_err());
        let e = Ellipse2::new(Complex64::new(0.2, 0.1), 2.0).unwrap();
        let m = e.matrix();
        let v = [0.3, -0.7];
        let w = m.apply(v);
        assert!((w[0].hypot(w[1]) - e.evaluate(v)).abs() < 1e-14);
    }
}
