#![allow(dead_code)]

use std::f64::consts::PI;

use isoforge_core::convex_kernel::{Mat2, Norm2, DEFAULT_SAMPLES};
use num_complex::Complex64;
use proptest::prelude::*;

/// Angles used by the brute-force oracles.
pub const ORACLE_ANGLES: usize = 4096;

pub fn unit(theta: f64) -> [f64; 2] {
    [theta.cos(), theta.sin()]
}

/// Exact `l_p` norm.
pub fn lp(v: [f64; 2], p: f64) -> f64 {
    let (a, b) = (v[0].abs(), v[1].abs());
    if p.is_infinite() {
        a.max(b)
    } else {
        (a.powf(p) + b.powf(p)).powf(1.0 / p)
    }
}

pub fn apply(m: &Mat2, v: [f64; 2]) -> [f64; 2] {
    [m.a11 * v[0] + m.a12 * v[1], m.a21 * v[0] + m.a22 * v[1]]
}

pub fn euclid(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// `sup cod(L v) / dom(v)` over a fine set of directions.
pub fn brute_operator_norm(l: &Mat2, dom: impl Fn([f64; 2]) -> f64, cod: impl Fn([f64; 2]) -> f64) -> f64 {
    (0..ORACLE_ANGLES)
        .map(|k| {
            let v = unit(2.0 * PI * k as f64 / ORACLE_ANGLES as f64);
            cod(apply(l, v)) / dom(v)
        })
        .fold(0.0, f64::max)
}

/// `|T| |T^-1|` for `T = id + mu conj` from the norm `m` into the Euclidean plane.
pub fn brute_mu_distortion(m: &impl Fn([f64; 2]) -> f64, mu: Complex64) -> f64 {
    let t = Mat2::new(1.0 + mu.re, mu.im, mu.im, 1.0 - mu.re);
    let inv = t.inverse().unwrap();
    brute_operator_norm(&t, m, euclid) * brute_operator_norm(&inv, euclid, m)
}

/// Minimizes [`brute_mu_distortion`] over a square grid of `mu` values of the
/// given `step` around `center`, `half` steps to each side.
pub fn brute_mu_search(
    m: &impl Fn([f64; 2]) -> f64,
    center: Complex64,
    step: f64,
    half: i32,
) -> (Complex64, f64) {
    let mut best = (center, f64::INFINITY);
    for a in -half..=half {
        for b in -half..=half {
            let mu = center + Complex64::new(a as f64 * step, b as f64 * step);
            if mu.norm() >= 0.95 {
                continue;
            }
            let d = brute_mu_distortion(m, mu);
            if d < best.1 {
                best = (mu, d);
            }
        }
    }
    best
}

/// Coarse-to-fine brute-force distance ellipse of a norm.
pub fn brute_distance_ellipse(m: &impl Fn([f64; 2]) -> f64) -> (Complex64, f64) {
    let mut best = brute_mu_search(m, Complex64::new(0.0, 0.0), 0.1, 9);
    for step in [1e-2, 1e-3] {
        best = brute_mu_search(m, best.0, step, 10);
    }
    best
}

/// Convex symmetric gauge `max(|B v|, max_i |a_i . v|)`.
#[derive(Debug, Clone)]
pub struct RandomGauge {
    pub b: Mat2,
    pub facets: Vec<[f64; 2]>,
}

impl RandomGauge {
    pub fn eval(&self, v: [f64; 2]) -> f64 {
        let e = euclid(apply(&self.b, v));
        self.facets
            .iter()
            .map(|a| (a[0] * v[0] + a[1] * v[1]).abs())
            .fold(e, f64::max)
    }

    pub fn norm(&self) -> Norm2 {
        Norm2::from_fn(DEFAULT_SAMPLES, |v| self.eval(v)).expect("random gauge is a norm")
    }
}

pub fn random_gauge() -> impl Strategy<Value = RandomGauge> {
    let b = (0.5f64..2.0, 0.5f64..2.0, -0.6f64..0.6, 0.0..PI).prop_map(|(s1, s2, shear, rot)| {
        let r = Mat2::rotation(rot);
        r * Mat2::new(s1, shear, 0.0, s2)
    });
    let facet = (0.0..PI, 0.8f64..3.0).prop_map(|(t, r)| [r * t.cos(), r * t.sin()]);
    (b, prop::collection::vec(facet, 0..4)).prop_map(|(b, facets)| RandomGauge { b, facets })
}

pub fn random_invertible() -> impl Strategy<Value = Mat2> {
    (-2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0, -2.0f64..2.0)
        .prop_map(|(a, b, c, d)| Mat2::new(a, b, c, d))
        .prop_filter("well conditioned", |m| {
            let s = m.spectral_norm();
            m.det().abs() > 0.05 * s * s
        })
}

/// Rotations by a multiple of the sample spacing composed with a scaling;
/// their pullbacks permute the gauge samples.
pub fn sample_symmetry() -> impl Strategy<Value = Mat2> {
    (0usize..DEFAULT_SAMPLES, 0.3f64..3.0, any::<bool>()).prop_map(|(k, s, neg)| {
        let r = Mat2::rotation(2.0 * PI * k as f64 / DEFAULT_SAMPLES as f64);
        let s = if neg { -s } else { s };
        Mat2::new(s * r.a11, s * r.a12, s * r.a21, s * r.a22)
    })
}

/// Largest relative deviation of a sampled norm from the exact gauge `f`.
pub fn sampling_error(m: &Norm2, f: impl Fn([f64; 2]) -> f64) -> f64 {
    (0..ORACLE_ANGLES)
        .map(|k| {
            let v = unit(2.0 * PI * k as f64 / ORACLE_ANGLES as f64);
            (m.evaluate(v) / f(v) - 1.0).abs()
        })
        .fold(0.0, f64::max)
}
