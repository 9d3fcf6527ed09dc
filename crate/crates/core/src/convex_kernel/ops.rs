use serde::{Deserialize, Serialize};

use super::linear::{LinearMap2, Mat2};
use super::norm::Norm2;

/// Pointwise outer and inner dilatation of a linear map between normed planes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dilatations {
    pub outer: f64,
    pub inner: f64,
}

impl Dilatations {
    /// `sqrt(K_O K_I)`, which equals `|L| |L^-1|`.
    pub fn distortion(&self) -> f64 {
        (self.outer * self.inner).sqrt()
    }

    pub fn max(&self) -> f64 {
        self.outer.max(self.inner)
    }
}

/// `sup { cod(L v) : dom(v) = 1 }`.
///
/// `v -> cod(L v)` is convex, so the supremum over the polygonal unit sphere
/// of `dom` is attained at one of its vertices.
pub fn operator_norm(l: &LinearMap2, dom: &Norm2, cod: &Norm2) -> f64 {
    matrix_operator_norm(&l.matrix(), dom, cod)
}

pub(crate) fn matrix_operator_norm(m: &Mat2, dom: &Norm2, cod: &Norm2) -> f64 {
    let mut best = 0.0f64;
    for k in 0..dom.n() {
        best = best.max(cod.eval_c(m.apply_c(dom.vertex(k))));
    }
    best
}

/// Operator norm from `(R^2, dom)` into the exact Euclidean plane.
pub fn operator_norm_to_euclidean(m: &Mat2, dom: &Norm2) -> f64 {
    (0..dom.n())
        .map(|k| m.apply_c(dom.vertex(k)).norm())
        .fold(0.0, f64::max)
}

/// Operator norm from the exact Euclidean plane into `(R^2, cod)`:
/// `sup_{|w|=1} max_j <n_j, m w> = max_j |m^T n_j|`.
pub fn operator_norm_from_euclidean(m: &Mat2, cod: &Norm2) -> f64 {
    let mt = m.transpose();
    cod.edge_normals()
        .iter()
        .map(|nj| mt.apply_c(*nj).norm())
        .fold(0.0, f64::max)
}

/// Jacobian of `L: (R^2, dom) -> (R^2, cod)`: `|det L| J2(cod) / J2(dom)`.
pub fn linear_jacobian(l: &LinearMap2, dom: &Norm2, cod: &Norm2) -> f64 {
    l.det().abs() * dom.unit_ball_area() / cod.unit_ball_area()
}

/// `K_O = |L|^2 / J` and `K_I = |L^-1|^2 J`.
pub fn linear_dilatations(l: &LinearMap2, dom: &Norm2, cod: &Norm2) -> Dilatations {
    let forward = operator_norm(l, dom, cod);
    let backward = operator_norm(&l.inverse(), cod, dom);
    let j = linear_jacobian(l, dom, cod);
    Dilatations {
        outer: forward * forward / j,
        inner: backward * backward * j,
    }
}

/// `|L| |L^-1|` between the two norms.
pub fn linear_distortion(l: &LinearMap2, dom: &Norm2, cod: &Norm2) -> f64 {
    operator_norm(l, dom, cod) * operator_norm(&l.inverse(), cod, dom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, SQRT_2};

    const N: usize = 256;

    fn l2() -> Norm2 {
        Norm2::euclidean(N)
    }
    fn linf() -> Norm2 {
        Norm2::lp(N, f64::INFINITY).unwrap()
    }

    #[test]
    fn operator_norm_examples() {
        let id = LinearMap2::identity();
        assert!((operator_norm(&id, &linf(), &l2()) - SQRT_2).abs() < 1e-12);
        assert!((operator_norm(&id, &l2(), &linf()) - 1.0).abs() < 1e-12);
        let d = LinearMap2::from_entries(2.0, 0.0, 0.0, 1.0).unwrap();
        assert!((operator_norm(&d, &l2(), &l2()) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn jacobian_examples() {
        let id = LinearMap2::identity();
        assert!((linear_jacobian(&id, &l2(), &linf()) - FRAC_PI_4).abs() < 2e-4);
        assert!((linear_jacobian(&id, &linf(), &l2()) - 4.0 / PI).abs() < 3e-4);
        let d = LinearMap2::from_entries(2.0, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(linear_jacobian(&d, &l2(), &l2()), 2.0);
    }

    #[test]
    fn dilatation_examples() {
        let id = LinearMap2::identity();
        let k = linear_dilatations(&id, &l2(), &l2());
        assert!((k.outer - 1.0).abs() < 1e-12 && (k.inner - 1.0).abs() < 1e-12);
        let k = linear_dilatations(&id, &linf(), &l2());
        assert!((k.outer - FRAC_PI_2).abs() < 1e-3, "{k:?}");
        assert!((k.inner - 4.0 / PI).abs() < 1e-3, "{k:?}");
        let d = LinearMap2::from_entries(2.0, 0.0, 0.0, 1.0).unwrap();
        let k = linear_dilatations(&d, &l2(), &l2());
        assert!((k.outer - 2.0).abs() < 1e-12 && (k.inner - 2.0).abs() < 1e-12);
    }

    #[test]
    fn euclidean_variants_agree_with_sampled_l2() {
        let m = Mat2::new(1.3, 0.4, -0.2, 0.8);
        let p3 = Norm2::lp(N, 3.0).unwrap();
        let a = operator_norm_to_euclidean(&m, &p3);
        let b = matrix_operator_norm(&m, &p3, &l2());
        assert!((a - b).abs() / a < 1e-4);
        let a = operator_norm_from_euclidean(&m, &p3);
        let b = matrix_operator_norm(&m, &l2(), &p3);
        assert!((a - b).abs() / a < 1e-4);
    }
}
