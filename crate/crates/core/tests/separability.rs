use std::sync::OnceLock;

use faer::Mat;
use num_complex::Complex64;
use proptest::prelude::*;
use rte_kernel_lab::kernels::{assemble, KernelMode};
use rte_kernel_lab::separability::{
    correlation, correlation_decay_study, epsilon_rank, epsilon_rank_from_singular_values, fit_loglog,
    midpoint_samples, nominal_truncation, pca_lower_bound, rank_growth_study, required_points_per_dim,
    separable_harmonic_3d, separable_kernel_taylor, separable_kernel_taylor_with, separable_phase_2d, singular_values,
    AttenuatedDistance, ConstantKernel, CorrelationStudy, RankCriterion, RankStudy, SmoothKernel,
};
use rte_kernel_lab::special::{gegenbauer, legendre_monomial_coefficients};
use rte_kernel_lab::{BoxDomain, Dim, Error, Medium, Point, ScalarField};

fn plane() -> Medium {
    Medium::absorbing(BoxDomain::rect(-1.0, 5.0, -1.0, 5.0).unwrap(), ScalarField::Constant(1.0))
}

fn fig2_x() -> BoxDomain {
    BoxDomain::unit_square()
}

fn fig2_y() -> BoxDomain {
    BoxDomain::rect(1.25, 2.25, 0.5, 1.5).unwrap()
}

// ---------------------------------------------------------------------------
// Independent SVD: one-sided (Hestenes) Jacobi on the columns.

fn jacobi_singular_values(m: &Mat<Complex64>) -> Vec<f64> {
    let (rows, cols) = (m.nrows(), m.ncols());
    let mut a: Vec<Vec<Complex64>> = (0..cols).map(|j| (0..rows).map(|i| m[(i, j)]).collect()).collect();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha: f64 = a[p].iter().map(|v| v.norm_sqr()).sum();
                let beta: f64 = a[q].iter().map(|v| v.norm_sqr()).sum();
                let gamma: Complex64 = a[p].iter().zip(&a[q]).map(|(x, y)| x.conj() * y).sum();
                let g = gamma.norm();
                if g <= 1e-15 * (alpha * beta).sqrt() || g == 0.0 {
                    continue;
                }
                rotated = true;
                // Rotate a_q into phase with a_p, then apply a real rotation.
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..rows {
                    let ap = a[p][i];
                    let b = a[q][i] * phase.conj();
                    a[p][i] = ap * c - b * s;
                    a[q][i] = (ap * s + b * c) * phase;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sv: Vec<f64> = a.iter().map(|col| col.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()).collect();
    sv.sort_by(|x, y| y.total_cmp(x));
    sv
}

/// Smallest `r` whose Frobenius tail is within `ε` of the total, by trying
/// every `r` from zero.
fn brute_force_rank(sv: &[f64], eps: f64) -> usize {
    let total: f64 = sv.iter().map(|s| s * s).sum();
    (0..=sv.len()).find(|&r| sv[r..].iter().map(|s| s * s).sum::<f64>().sqrt() <= eps * total.sqrt()).unwrap()
}

#[test]
fn epsilon_rank_agrees_with_a_jacobi_svd() {
    let medium = plane();
    for (n, px, py) in [(3i64, 12, 14), (10, 12, 14), (0, 10, 10), (25, 14, 13)] {
        let xs = midpoint_samples(&fig2_x(), px);
        let ys = midpoint_samples(&fig2_y(), py);
        let k = assemble(&medium, KernelMode::TwoD { n }, &xs, &ys).unwrap();
        assert!(k.nrows() <= 200 && k.ncols() <= 200);
        let oracle = jacobi_singular_values(&k.entries);
        let sv = singular_values(&k.entries).unwrap();
        for (a, b) in sv.iter().zip(&oracle) {
            assert!((a - b).abs() <= 1e-12 * oracle[0], "{a} vs {b}");
        }
        for eps in [0.3, 1e-1, 1e-2, 1e-4, 1e-6, 1e-8] {
            assert_eq!(epsilon_rank(&k, eps).unwrap(), brute_force_rank(&oracle, eps), "n = {n}, ε = {eps}");
        }
    }
}

#[test]
fn epsilon_rank_examples() {
    let xs = midpoint_samples(&fig2_x(), 4);
    let ys = midpoint_samples(&fig2_y(), 3);
    let mut k = assemble(&plane(), KernelMode::TwoD { n: 2 }, &xs, &ys).unwrap();
    assert_eq!(epsilon_rank(&k, 1.0).unwrap(), 0);
    let u: Vec<Complex64> = (0..16).map(|i| Complex64::new(1.0 + i as f64, -0.3 * i as f64)).collect();
    let v: Vec<Complex64> = (0..9).map(|j| Complex64::from_polar(1.0 + j as f64, 0.4 * j as f64)).collect();
    k.entries = Mat::from_fn(16, 9, |i, j| u[i] * v[j]);
    for eps in [0.9, 1e-3, 1e-12] {
        assert_eq!(epsilon_rank(&k, eps).unwrap(), 1);
    }
}

fn kernel_spectrum() -> &'static Vec<f64> {
    static SV: OnceLock<Vec<f64>> = OnceLock::new();
    SV.get_or_init(|| {
        let xs = midpoint_samples(&fig2_x(), 16);
        let ys = midpoint_samples(&fig2_y(), 16);
        singular_values(&assemble(&plane(), KernelMode::TwoD { n: 8 }, &xs, &ys).unwrap().entries).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]
    #[test]
    fn epsilon_rank_is_monotone(a in -12.0..0.0f64, b in -12.0..0.0f64) {
        let (e1, e2) = (10f64.powf(a.min(b)), 10f64.powf(a.max(b)));
        let sv = kernel_spectrum();
        for c in [RankCriterion::Frobenius, RankCriterion::Spectral] {
            let (r1, r2) = (epsilon_rank_from_singular_values(sv, e1, c), epsilon_rank_from_singular_values(sv, e2, c));
            prop_assert!(r1 >= r2);
            prop_assert!(r1 <= sv.len());
        }
    }
}

// ---------------------------------------------------------------------------
// Correlation.

fn y_point() -> impl Strategy<Value = Point> {
    (1.25..=2.25f64, 0.5..=1.5f64).prop_map(|(a, b)| Point::new2(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]
    #[test]
    fn correlation_is_bounded_by_one(y1 in y_point(), y2 in y_point(), n in 0usize..40) {
        let ppd = required_points_per_dim(n, &fig2_x(), &y1, &y2);
        let c = correlation(&plane(), n, &fig2_x(), &y1, &y2, ppd).unwrap();
        prop_assert!(c.norm() <= 1.0 + 1e-10);
    }
}

#[test]
fn correlation_examples() {
    let (y1, y2) = (Point::new2(2.0, 0.0), Point::new2(2.0, 0.5));
    let same = correlation(&plane(), 17, &fig2_x(), &y1, &y1, 64).unwrap();
    assert!((same - 1.0).norm() <= 1e-14);
    let c0 = correlation(&plane(), 0, &fig2_x(), &y1, &y2, 64).unwrap();
    assert!(c0.re > 0.0 && c0.im == 0.0);
    match correlation(&plane(), 400, &fig2_x(), &y1, &y2, 64) {
        Err(Error::Resolution { required, given }) => assert!(required > 64 && given == 64),
        other => panic!("expected a resolution error, got {other:?}"),
    }
    let inside = Point::new2(0.5, 0.5);
    assert!(correlation(&plane(), 3, &fig2_x(), &inside, &y2, 64).is_err());
}

#[test]
fn short_sweeps_are_refused_by_the_fit() {
    let mut s = CorrelationStudy::new(fig2_x(), Point::new2(2.0, 0.0), Point::new2(2.0, 0.5));
    s.n_values = Some(vec![10, 20, 300]);
    assert!(matches!(correlation_decay_study(&plane(), &s), Err(Error::Fit(_))));
}

#[test]
fn log_log_fit_recovers_power_laws() {
    let xs: Vec<f64> = (1..20).map(|k| 10.0 + 7.0 * k as f64).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x.powf(-1.5)).collect();
    let f = fit_loglog(&xs, &ys).unwrap();
    assert!((f.slope + 1.5).abs() < 1e-12);
    assert!((f.intercept - 3f64.ln()).abs() < 1e-10);
    assert!(fit_loglog(&[1.0], &[1.0]).is_err());
}

// ---------------------------------------------------------------------------
// Rank growth and the correlation-matrix bound.

#[test]
fn ranks_grow_slowly_in_one_over_epsilon() {
    let medium = Medium::absorbing(
        BoxDomain::rect(0.0, 2.25, 0.0, 1.5).unwrap(),
        ScalarField::Linear { base: 1.0, gradient: [0.2, 0.1, 0.0] },
    );
    let mut s = RankStudy::new(fig2_x(), fig2_y(), vec![4]);
    s.epsilons = vec![1e-2, 1e-4, 1e-8];
    let p = rank_growth_study(&medium, &s).unwrap();
    let r: Vec<usize> = p.ranks.iter().map(|r| r[0]).collect();
    assert!(r[0] <= r[1] && r[1] <= r[2]);
    assert!(r[2] <= p.matrix_sizes[0].0.min(p.matrix_sizes[0].1));
    assert!(r[2] as f64 / r[0] as f64 <= 6.0, "{r:?}");
}

#[test]
fn rank_study_enforces_the_resolution_rule() {
    let mut s = RankStudy::new(fig2_x(), fig2_y(), vec![8]);
    s.points_per_unit = Some(10.0);
    assert!(matches!(rank_growth_study(&plane(), &s), Err(Error::Resolution { .. })));
}

#[test]
fn correlation_matrix_bound_values() {
    let medium = plane();
    // Few, strongly correlated points.
    let p = pca_lower_bound(&medium, 2, &fig2_x(), &fig2_y(), 0.5, &[0.5]).unwrap();
    assert_eq!(p.ranks, vec![(0.5, 1)]);
    let mut ranks = Vec::new();
    for n in [8usize, 16, 32] {
        let p = pca_lower_bound(&medium, n, &fig2_x(), &fig2_y(), 0.5, &[1e-2]).unwrap();
        assert!((p.trace - p.m_delta as f64).abs() <= 1e-10);
        assert!(p.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        ranks.push((p.m_delta, p.ranks[0].1));
    }
    // Frozen from a direct computation; the rank stays a large fraction of
    // the number of sample points M_δ ~ n^{2(1−δ)}.
    assert_eq!(ranks, vec![(9, 7), (16, 13), (36, 28)]);
}

// ---------------------------------------------------------------------------
// Constructive approximations.

fn exact_phase(n: i64) -> impl Fn(&Point, &Point) -> rte_kernel_lab::Result<Complex64> + Sync {
    move |x: &Point, y: &Point| {
        let w = x.sub(y);
        Ok(Complex64::from_polar(1.0, -(n as f64) * w.y().atan2(w.x())))
    }
}

#[test]
fn phase_construction_examples() {
    let x = fig2_x();
    let y = x.translate(&Point::new2(3.0, 0.0));
    let a0 = separable_phase_2d(0, 1e-6, &x, &y).unwrap();
    assert_eq!(a0.term_count(), 1);
    assert_eq!(a0.guaranteed_sup_error, 0.0);
    assert_eq!(a0.eval(&Point::new2(0.2, 0.7), &Point::new2(3.4, 0.1)), Complex64::new(1.0, 0.0));

    let a = separable_phase_2d(4, 1e-6, &x, &y).unwrap();
    let xs = midpoint_samples(&x, 64);
    let ys = midpoint_samples(&y, 64);
    let measured = a.measured_sup_error(&xs, &ys, exact_phase(4)).unwrap();
    assert!(measured <= 1e-6, "{measured}");
    assert!(a.guaranteed_sup_error >= measured);
    let big_n = a.nominal_truncation.unwrap();
    assert!(a.term_count() <= (2 * big_n + 1).pow(2));
    assert!(a.truncation[0] <= big_n);

    let near = x.translate(&Point::new2(1.1, 0.0));
    assert!(matches!(separable_phase_2d(2, 1e-4, &x, &near), Err(Error::Admissibility(_))));
}

#[test]
fn phase_factors_are_separated() {
    let x = fig2_x();
    let y = x.translate(&Point::new2(3.0, 0.0));
    let a = separable_phase_2d(3, 1e-8, &x, &y).unwrap();
    let px = Point::new2(0.31, 0.77);
    let left: Vec<Complex64> = (0..a.term_count()).map(|l| a.eval_left(l, &px)).collect();
    // The same left values serve every y; perturbing y leaves them alone.
    for (dy, dz) in [(0.0, 0.0), (0.013, -0.02), (0.4, 0.9)] {
        let py = Point::new2(3.2 + dy, 0.1 + dz);
        let s: Complex64 = left.iter().enumerate().map(|(l, f)| f * a.eval_right(l, &py)).sum();
        assert!((s - a.eval(&px, &py)).norm() <= 1e-12);
        assert!((s - exact_phase(3)(&px, &py).unwrap()).norm() <= 1e-8);
    }
    for l in 0..a.term_count() {
        assert_eq!(a.eval_left(l, &px), left[l]);
    }
}

#[test]
fn phase_truncation_grows_logarithmically() {
    let x = fig2_x();
    let y = x.translate(&Point::new2(3.0, 0.0));
    let n4 = separable_phase_2d(4, 1e-4, &x, &y).unwrap().truncation[0];
    let n8 = separable_phase_2d(4, 1e-8, &x, &y).unwrap().truncation[0];
    assert!(n8 >= n4);
    assert!((n8 - n4) as f64 <= 2.0 * 1e4f64.ln() / 2f64.ln());
    assert_eq!(nominal_truncation(4, 1e-4), 8 + 10);
}

#[test]
fn constant_kernel_needs_one_term_per_cell_pair() {
    let k = ConstantKernel { dim: Dim::Two, value: 2.5 };
    let y = BoxDomain::rect(2.0, 3.0, 0.0, 1.0).unwrap();
    let a = separable_kernel_taylor_with(&k, 3, 1e-6, &fig2_x(), &y).unwrap();
    assert_eq!(Some(a.term_count()), a.cell_pairs);
    let xs = midpoint_samples(&fig2_x(), 8);
    let ys = midpoint_samples(&y, 8);
    assert_eq!(a.measured_sup_error(&xs, &ys, |_, _| Ok(Complex64::new(2.5, 0.0))).unwrap(), 0.0);
}

#[test]
fn taylor_construction_accuracy_and_cell_scaling() {
    let medium = plane();
    let y = BoxDomain::rect(2.0, 3.0, 0.0, 1.0).unwrap();
    let kernel = AttenuatedDistance::from_medium(&medium).unwrap();
    let xs = midpoint_samples(&fig2_x(), 32);
    let ys = midpoint_samples(&y, 32);
    let mut pairs = Vec::new();
    for eps in [1e-2, 1e-4] {
        let a = separable_kernel_taylor(&medium, 3, eps, &fig2_x(), &y).unwrap();
        // Independent target: e^{−r}/r for σ_t ≡ 1.
        let measured = a
            .measured_sup_error(&xs, &ys, |p, q| {
                let r = p.distance(q);
                Ok(Complex64::new((-r).exp() / r, 0.0))
            })
            .unwrap();
        assert!(measured <= eps, "ε = {eps}: {measured}");
        assert!(a.guaranteed_sup_error >= measured);
        assert!((kernel.eval(&xs[0], &ys[0]) - (-xs[0].distance(&ys[0])).exp() / xs[0].distance(&ys[0])).abs() < 1e-15);
        pairs.push(a.cell_pairs.unwrap() as f64);
    }
    // ε^{−2d/(k+1)} with d = 2, k = 3: a factor 100 from 1e−2 to 1e−4.
    let ratio = pairs[1] / pairs[0];
    assert!((25.0..=400.0).contains(&ratio), "ratio {ratio}");
}

fn y10(x: &Point, y: &Point) -> f64 {
    let d = x.sub(y);
    (3.0 / (4.0 * std::f64::consts::PI)).sqrt() * d.z() / d.norm()
}

#[test]
fn harmonic_construction_for_the_first_degree() {
    let x = BoxDomain::unit_cube();
    let y = x.translate(&Point::new3(2.5, 2.5, 2.5));
    let (a, tr) = separable_harmonic_3d(1, 1e-4, &x, &y).unwrap();
    assert_eq!(tr.orders.len(), 2);
    let xs = midpoint_samples(&x, 20);
    let ys = midpoint_samples(&y, 20);
    let measured = a.measured_sup_error(&xs, &ys, |p, q| Ok(Complex64::new(y10(p, q), 0.0))).unwrap();
    assert!(measured <= 1e-4, "{measured}");
    assert!(a.guaranteed_sup_error >= measured);
}

#[test]
fn harmonic_term_counts_are_quartic_in_the_truncation() {
    let x = BoxDomain::unit_cube();
    let y = x.translate(&Point::new3(2.5, 2.5, 2.5));
    for n in [2usize, 4, 8] {
        let (a, _) = separable_harmonic_3d(n, 1e-4, &x, &y).unwrap();
        let big_n = nominal_truncation(n, 1e-4) as f64;
        assert!((a.term_count() as f64) <= big_n.powi(4) / 8.0, "n = {n}: {} terms", a.term_count());
    }
    assert!(matches!(separable_harmonic_3d(13, 1e-4, &x, &y), Err(Error::Range(_))));
}

#[test]
fn harmonic_per_degree_errors_fit_the_budget() {
    let n = 2usize;
    let eps = 1e-4;
    let x = BoxDomain::unit_cube();
    let y = x.translate(&Point::new3(2.5, 2.5, 2.5));
    let (_, tr) = separable_harmonic_3d(n, eps, &x, &y).unwrap();
    let c = legendre_monomial_coefficients(n).unwrap();
    let norm = ((2 * n + 1) as f64 / (4.0 * std::f64::consts::PI)).sqrt();
    let sum_c: f64 = c.iter().map(|v| v.abs()).sum();
    assert!(sum_c <= 3f64.powi(n as i32));
    // Budget chain: each degree within |c_nk| ε/3^n, all together within ε.
    for k in 0..=n {
        assert!(tr.bounds[k] <= c[k].abs() * eps / 3f64.powi(n as i32) * (1.0 + 1e-12));
    }
    // Measured per-degree truncation errors of
    // (x_z − y_z)^k |x − y|^{−k} ≈ (x_z − y_z)^k |y|^{−k} Σ_{s≤N_k} C_s^{k/2}(Δ)(|x|/|y|)^s
    // with the origin at the centre of X.
    let origin = x.center();
    let xs = midpoint_samples(&x, 6);
    let ys = midpoint_samples(&y, 6);
    let mut measured = vec![0.0f64; n + 1];
    for p in &xs {
        for q in &ys {
            let (u, v) = (p.sub(&origin), q.sub(&origin));
            let (ru, rv) = (u.norm(), v.norm());
            let delta = if ru == 0.0 { 1.0 } else { u.dot(&v) / (ru * rv) };
            let dz = p.z() - q.z();
            let dist = p.distance(q);
            for k in 1..=n {
                let lambda = k as f64 / 2.0;
                let series: f64 =
                    (0..=tr.orders[k]).map(|s| gegenbauer(s, lambda, delta) * (ru / rv).powi(s as i32)).sum::<f64>()
                        / rv.powi(k as i32);
                let e = norm * c[k].abs() * (dz.powi(k as i32) * (dist.powi(-(k as i32)) - series)).abs();
                measured[k] = measured[k].max(e);
            }
        }
    }
    for k in 0..=n {
        assert!(measured[k] <= tr.bounds[k] * (1.0 + 1e-9) + 1e-15, "k = {k}: {} > {}", measured[k], tr.bounds[k]);
    }
    assert!(measured.iter().sum::<f64>() <= eps);
}
