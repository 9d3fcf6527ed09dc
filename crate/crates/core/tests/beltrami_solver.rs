use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use isoforge_core::beltrami_solver::*;
use isoforge_core::convex_kernel::*;
use isoforge_core::norm_field::*;
use num_complex::Complex64;
use proptest::prelude::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn z(p: [f64; 2]) -> Complex64 {
    c(p[0], p[1])
}

/// The similarity `w -> a w + b` sending `g0` to `p0` and `g1` to `p1`.
fn similarity(g0: Complex64, g1: Complex64, p0: Complex64, p1: Complex64) -> impl Fn(Complex64) -> Complex64 {
    let a = (p1 - p0) / (g1 - g0);
    let b = p0 - a * g0;
    move |w| a * w + b
}

fn max_node_gap(map: &GridMap, f: impl Fn([f64; 2]) -> Complex64) -> f64 {
    let d = *map.domain();
    map.values()
        .iter()
        .zip(d.nodes())
        .map(|(v, p)| (z(*v) - f(p)).norm())
        .fold(0.0, f64::max)
}

fn wavy_field(d: GridDomain) -> NormField {
    riemannian_field(d, |p| {
        let s = 1.0 + 0.3 * (1.5 * p[0]).sin();
        let t = 0.25 * (1.2 * p[1]).cos();
        let m = Mat2::new(s, t, 0.0, 1.0);
        let g = m.transpose() * m;
        [[g.a11, g.a12], [g.a21, g.a22]]
    })
    .unwrap()
}

#[test]
fn zero_mu_gives_the_anchoring_affine_map() {
    let d = GridDomain::unit_square(17).unwrap();
    let anchors = vec![
        Anchor::new((0, 0), [0.0, 0.0]),
        Anchor::new((16, 0), [1.0, 0.0]),
        Anchor::new((0, 16), [0.0, 1.0]),
    ];
    let p = BeltramiProblem::new(ComplexGrid::constant(d, c(0.0, 0.0)), anchors).unwrap();
    let sol = solve_beltrami(&p).unwrap();
    assert!(max_node_gap(&sol.map, z) < 1e-12);

    let p = BeltramiProblem::normalized(ComplexGrid::constant(d, c(0.0, 0.0))).unwrap();
    assert!(max_node_gap(&solve_beltrami(&p).unwrap().map, z) < 1e-10);
}

#[test]
fn constant_mu_example_at_default_resolution() {
    let d = GridDomain::centered_square(1.0, 65).unwrap();
    let mu = c(0.3, -0.2);
    let p = BeltramiProblem::normalized(ComplexGrid::constant(d, mu)).unwrap();
    let sol = solve_beltrami(&p).unwrap();
    assert!(sol.residual <= 1e-3);
    let g = |w: Complex64| w + mu * w.conj();
    let (p0, p1) = (z(d.node(0, 0)), z(d.node(64, 0)));
    let s = similarity(g(p0), g(p1), p0, p1);
    assert!(max_node_gap(&sol.map, |p| s(g(z(p)))) < 1e-10);
}

#[test]
fn rejects_bad_problems() {
    let d = GridDomain::unit_square(9).unwrap();
    assert!(BeltramiProblem::normalized(ComplexGrid::constant(d, c(0.97, 0.0))).is_err());
    let collinear = vec![
        Anchor::new((0, 0), [0.0, 0.0]),
        Anchor::new((4, 4), [0.5, 0.5]),
        Anchor::new((8, 8), [1.0, 1.0]),
    ];
    assert!(BeltramiProblem::new(ComplexGrid::constant(d, c(0.0, 0.0)), collinear).is_err());
    let single = vec![Anchor::new((0, 0), [0.0, 0.0])];
    assert!(BeltramiProblem::new(ComplexGrid::constant(d, c(0.0, 0.0)), single).is_err());
}

#[test]
fn radial_bump_is_self_consistent() {
    let d = GridDomain::centered_square(1.0, 129).unwrap();
    let mu = radial_bump(d, c(0.3, 0.0));
    assert!((mu.max_abs() - 0.3).abs() < 1e-12);
    let sol = solve_beltrami(&BeltramiProblem::normalized(mu.clone()).unwrap()).unwrap();
    let err = self_consistency(&mu, &sol.map);
    assert!(err <= 5e-2, "{err}");
    assert!(sol.map.orientation() > 0.0);
}

#[test]
fn euclidean_field_coordinates() {
    let d = GridDomain::centered_square(1.0, 33).unwrap();
    let r = isothermal_coordinates(&lp_field(d, 2.0).unwrap()).unwrap();
    assert!(max_node_gap(&r.coords, z) < 1e-10);
    assert!(r.max_residual_mu() < 1e-6);
    assert!(r.dilatations.k_outer.iter().chain(&r.dilatations.k_inner).all(|k| (k - 1.0).abs() < 1e-9));
}

fn ellipse_coordinates(a: Mat2) -> (IsothermalResult, f64) {
    let d = GridDomain::centered_square(1.0, 33).unwrap();
    let r = isothermal_coordinates(&NormField::constant(d, &Norm2::ellipse(DEFAULT_SAMPLES, a).unwrap()).unwrap()).unwrap();
    // A itself straightens the ellipse field; any other solution differs by a similarity
    let lin = |p: [f64; 2]| z(a.apply(p));
    let (p0, p1) = (d.node(0, 0), d.node(32, 0));
    let s = similarity(lin(p0), lin(p1), z(p0), z(p1));
    let gap = max_node_gap(&r.coords, |p| s(lin(p)));
    (r, gap)
}

#[test]
fn ellipse_field_coordinates_are_linear() {
    let (r, gap) = ellipse_coordinates(Mat2::diag(2.0, 1.0));
    assert!(gap < 1e-6, "{gap}");
    assert!(r.max_residual_mu() <= 1e-6, "{}", r.max_residual_mu());
    assert!((r.global.distortion - 1.0).abs() < 1e-3, "{:?}", r.global);

    // off the axes the field coefficient and the pushforward both carry the
    // resampling error of the sampled ellipse
    let a = Mat2::new(1.6, 0.5, -0.2, 0.9);
    let (r, gap) = ellipse_coordinates(a);
    assert!((r.mu.values[0] - a.beltrami_coefficient()).norm() < 1e-4);
    assert!(gap < 5e-4, "{gap}");
    assert!(r.max_residual_mu() <= 5e-5, "{}", r.max_residual_mu());
    assert!((r.global.distortion - 1.0).abs() < 1e-3, "{:?}", r.global);
}

#[test]
fn linf_field_coordinates_saturate_the_bounds() {
    let d = GridDomain::centered_square(1.0, 33).unwrap();
    let r = isothermal_coordinates(&lp_field(d, f64::INFINITY).unwrap()).unwrap();
    assert!(max_node_gap(&r.coords, z) < 1e-9);
    assert!((r.global.k_outer / (4.0 / PI) - 1.0).abs() < 2e-4, "{:?}", r.global);
    assert!((r.global.k_inner / FRAC_PI_2 - 1.0).abs() < 2e-4, "{:?}", r.global);
    assert!((r.global.distortion - SQRT_2).abs() < 1e-6);
}

#[test]
fn smooth_field_meets_the_isothermal_targets() {
    let d = GridDomain::centered_square(1.0, 65).unwrap();
    let r = isothermal_coordinates(&wavy_field(d)).unwrap();
    assert!(r.max_residual_mu() <= 5e-2, "{}", r.max_residual_mu());
    assert!(r.global.k_outer <= 4.0 / PI + 5e-2);
    assert!(r.global.k_inner <= FRAC_PI_2 + 5e-2);
}

#[test]
fn uniqueness_examples() {
    let d = GridDomain::centered_square(1.0, 33).unwrap();
    let f = lp_field(d, 2.0).unwrap();
    let r1 = isothermal_coordinates(&f).unwrap();
    let r2 = isothermal_coordinates(&f).unwrap();
    assert!(uniqueness_check(&r1, &r2).unwrap().max_coefficient < 1e-12);

    let quarter = |p: [f64; 2]| [-p[1], p[0]];
    let anchors = vec![
        Anchor::new((0, 0), quarter(d.node(0, 0))),
        Anchor::new((32, 0), quarter(d.node(32, 0))),
        Anchor::new((0, 32), quarter(d.node(0, 32))),
    ];
    let rotated = isothermal_coordinates_with(&f, anchors).unwrap();
    assert!(max_node_gap(&rotated.coords, |p| z(quarter(p))) < 1e-10);
    assert!(uniqueness_check(&r1, &rotated).unwrap().max_coefficient < 1e-9);

    let other = GridDomain::centered_square(1.0, 17).unwrap();
    let small = isothermal_coordinates(&lp_field(other, 2.0).unwrap()).unwrap();
    assert!(uniqueness_check(&r1, &small).is_err());
}

#[test]
fn fixed_point_of_isothermal_coordinates() {
    let d = GridDomain::centered_square(1.0, 65).unwrap();
    let first = isothermal_coordinates(&wavy_field(d)).unwrap();
    let again = isothermal_coordinates(&first.pushforward).unwrap();
    let gap = max_node_gap(&again.coords, z);
    assert!(gap <= 5e-2, "{gap}");
}

#[test]
fn dilatation_sandwich() {
    let d = GridDomain::centered_square(1.0, 65).unwrap();
    let l2 = Norm2::euclidean(DEFAULT_SAMPLES);
    let linf = Norm2::lp(DEFAULT_SAMPLES, f64::INFINITY).unwrap();
    for field in [
        blended_field(d, [0.0, 0.0], 0.25, &linf, &l2).unwrap(),
        wavy_field(d),
        lp_field(d, 1.0).unwrap(),
    ] {
        let r = isothermal_coordinates(&field).unwrap();
        for k in 0..d.len() {
            let rho = euclidean_distance(&field.norms()[k]);
            let (ko, ki) = (r.dilatations.k_outer[k], r.dilatations.k_inner[k]);
            assert!(2.0 / PI * rho * rho - 5e-2 <= ko && ko <= 4.0 / PI + 5e-2, "node {k}: {ko} vs {rho}");
            assert!(PI / 4.0 * rho * rho - 5e-2 <= ki && ki <= FRAC_PI_2 + 5e-2, "node {k}: {ki} vs {rho}");
        }
    }
}

#[test]
fn residual_decreases_under_refinement() {
    let residual = |n: usize| {
        let d = GridDomain::centered_square(1.0, n).unwrap();
        isothermal_coordinates(&wavy_field(d)).unwrap().max_residual_mu()
    };
    let (coarse, fine) = (residual(33), residual(65));
    assert!(coarse / fine >= 1.5, "{coarse} -> {fine}");
}

fn random_anchor_pair(n: usize) -> impl Strategy<Value = [(usize, usize); 2]> {
    ((0..n, 0..n), (0..n, 0..n)).prop_filter("distinct, well separated nodes", move |(a, b)| {
        let (dx, dy) = (a.0 as f64 - b.0 as f64, a.1 as f64 - b.1 as f64);
        dx.hypot(dy) >= n as f64 / 4.0
    }).prop_map(|(a, b)| [a, b])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn constant_mu_is_exact(re in -0.9f64..0.9, im in -0.9f64..0.9, nx in 9usize..40, ny in 9usize..40) {
        let mu = c(re, im);
        prop_assume!(mu.norm() <= 0.9);
        let d = GridDomain::new(-1.0, -0.5, 1.5, 1.0, nx, ny).unwrap();
        let sol = solve_beltrami(&BeltramiProblem::normalized(ComplexGrid::constant(d, mu)).unwrap()).unwrap();
        let g = |w: Complex64| w + mu * w.conj();
        let (p0, p1) = (z(d.node(0, 0)), z(d.node(nx - 1, 0)));
        let s = similarity(g(p0), g(p1), p0, p1);
        prop_assert!(max_node_gap(&sol.map, |p| s(g(z(p)))) < 1e-8);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn coordinates_differ_by_conformal_maps(first in random_anchor_pair(33), second in random_anchor_pair(33)) {
        let d = GridDomain::centered_square(1.0, 33).unwrap();
        let field = wavy_field(d);
        let anchors = |pair: [(usize, usize); 2]| pair.iter().map(|n| Anchor::fixed(&d, *n)).collect();
        let r1 = isothermal_coordinates_with(&field, anchors(first)).unwrap();
        let r2 = isothermal_coordinates_with(&field, anchors(second)).unwrap();
        let report = uniqueness_check(&r1, &r2).unwrap();
        prop_assert!(report.max_coefficient <= 5e-2, "{:?}", report);
    }
}
