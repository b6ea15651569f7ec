use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;
use rte_kernel_lab::kernels::{assemble, g2d, g3d, g3d_l2_norm_over_box, KernelMode};
use rte_kernel_lab::separability::midpoint_samples;
use rte_kernel_lab::special::legendre_real;
use rte_kernel_lab::{BoxDomain, Medium, Point, ScalarField};

fn plane(sigma: f64) -> Medium {
    Medium::absorbing(BoxDomain::rect(-3.0, 3.0, -3.0, 3.0).unwrap(), ScalarField::Constant(sigma))
}

fn cube_medium() -> Medium {
    Medium::absorbing(BoxDomain::cuboid((0.0, 2.5), (0.0, 2.5), (0.0, 2.5)).unwrap(), ScalarField::Constant(1.0))
}

#[test]
fn g2d_agrees_with_a_scalar_composition() {
    // Independent pipeline: E = exp(-σ r) for constant σ, phase from the
    // polar angle computed by hand.
    let m = plane(1.0);
    for (x, y, n) in [((0.0, 1.0), (0.0, 0.0), 2i64), ((0.3, -0.2), (1.1, 0.9), 5), ((-1.0, 0.5), (2.0, 0.5), -3)] {
        let (dx, dy): (f64, f64) = (x.0 - y.0, x.1 - y.1);
        let r = (dx * dx + dy * dy).sqrt();
        let theta = if dx == 0.0 { PI / 2.0 * dy.signum() } else { dy.atan2(dx) };
        let expect = Complex64::new(0.0, -(n as f64) * theta).exp() * ((-r).exp() / r);
        let got = g2d(&m, n, &Point::new2(x.0, x.1), &Point::new2(y.0, y.1)).unwrap();
        assert!((got - expect).norm() < 1e-15, "{got} vs {expect}");
    }
    let v = g2d(&m, 2, &Point::new2(0.0, 1.0), &Point::new2(0.0, 0.0)).unwrap();
    assert!((v + Complex64::new((-1.0f64).exp(), 0.0)).norm() < 1e-15);
}

#[test]
fn g3d_zonal_kernels_follow_legendre_along_the_axis() {
    let m = cube_medium();
    let y = Point::new3(1.0, 1.0, 0.5);
    let x = Point::new3(1.0, 1.0, 2.0);
    for r in 0..6usize {
        let v = g3d(&m, r, 0, &x, &y).unwrap();
        let expect = ((2 * r + 1) as f64 / (4.0 * PI)).sqrt() * legendre_real(r, 1.0) * (-1.5f64).exp() / 2.25;
        assert!((v.re - expect).abs() < 1e-14 && v.im.abs() < 1e-15);
    }
}

#[test]
fn one_by_one_matrix_is_the_pointwise_kernel() {
    let m = plane(0.7);
    let (x, y) = (Point::new2(0.1, 0.2), Point::new2(-1.0, 1.3));
    for n in [-4i64, 0, 7] {
        let k = assemble(&m, KernelMode::TwoD { n }, &[x], &[y]).unwrap();
        assert_eq!((k.nrows(), k.ncols()), (1, 1));
        assert_eq!(k.get(0, 0), g2d(&m, n, &x, &y).unwrap());
    }
}

#[test]
fn opposite_modes_are_conjugate_matrices() {
    let m = plane(1.0);
    let xs = midpoint_samples(&BoxDomain::rect(0.0, 1.0, 0.0, 1.0).unwrap(), 6);
    let ys = midpoint_samples(&BoxDomain::rect(1.25, 2.25, 0.5, 1.5).unwrap(), 5);
    for n in [1i64, 4, 9] {
        let a = assemble(&m, KernelMode::TwoD { n }, &xs, &ys).unwrap();
        let b = assemble(&m, KernelMode::TwoD { n: -n }, &xs, &ys).unwrap();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                assert_eq!(b.get(i, j), a.get(i, j).conj());
            }
        }
    }
}

fn weighted_norm(ppd: usize) -> f64 {
    let m = Medium::absorbing(BoxDomain::rect(0.0, 2.25, 0.0, 1.5).unwrap(), ScalarField::Constant(1.0));
    let xs = midpoint_samples(&BoxDomain::rect(0.0, 1.0, 0.0, 1.0).unwrap(), ppd);
    let ys = midpoint_samples(&BoxDomain::rect(1.25, 2.25, 0.5, 1.5).unwrap(), ppd);
    let mut k = assemble(&m, KernelMode::TwoD { n: 0 }, &xs, &ys).unwrap();
    let w = vec![1.0 / (ppd * ppd) as f64; ppd * ppd];
    k.apply_weights(&w, &w).unwrap();
    k.frobenius_norm()
}

#[test]
fn weighted_frobenius_norm_is_resolved_at_sixteen_points_per_side() {
    let coarse = weighted_norm(16);
    let fine = weighted_norm(64);
    assert!((coarse - fine).abs() <= 0.02 * fine, "{coarse} vs {fine}");
    assert!(weighted_norm(32).is_finite());
}

#[test]
fn zonal_kernel_norm_stays_bounded_in_the_degree() {
    let m = cube_medium();
    let x = BoxDomain::cuboid((0.0, 1.0), (0.0, 1.0), (0.0, 1.0)).unwrap();
    let y = Point::new3(2.0, 2.0, 2.0);
    let norms: Vec<f64> =
        [8usize, 16, 32, 64].iter().map(|&n| g3d_l2_norm_over_box(&m, n, 0, &x, &y, 64).unwrap()).collect();
    let (lo, hi) = norms.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    assert!(hi <= 2.0 * lo, "{norms:?}");
    // The lattice resolves the highest degree.
    let coarser = g3d_l2_norm_over_box(&m, 64, 0, &x, &y, 48).unwrap();
    assert!((coarser - norms[3]).abs() <= 1e-3 * norms[3]);
}

fn plane_point() -> impl Strategy<Value = Point> {
    (-3.0..=3.0f64, -3.0..=3.0f64).prop_map(|(a, b)| Point::new2(a, b))
}

fn cube_point() -> impl Strategy<Value = Point> {
    (0.0..=2.5f64, 0.0..=2.5f64, 0.0..=2.5f64).prop_map(|(a, b, c)| Point::new3(a, b, c))
}

proptest! {
    #[test]
    fn modulus_does_not_depend_on_the_mode(x in plane_point(), y in plane_point(), n in -40i64..40) {
        prop_assume!(x.distance(&y) > 1e-6);
        let m = plane(0.8);
        let a = g2d(&m, n, &x, &y).unwrap().norm();
        let b = g2d(&m, 0, &x, &y).unwrap().norm();
        prop_assert!((a - b).abs() <= 1e-12);
    }

    #[test]
    fn zonal_3d_kernels_are_real(x in cube_point(), y in cube_point(), r in 0usize..20) {
        prop_assume!(x.distance(&y) > 1e-6);
        let v = g3d(&cube_medium(), r, 0, &x, &y).unwrap();
        prop_assert!(v.im == 0.0);
    }
}
