//! Self-checks of the special-function layer, run by `verify-special`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rte_kernel_lab::special::{
    legendre, legendre_real, mu_constant, spherical_harmonic_standard, wigner3j, yn0_limit, yn0_weighted_integral,
    SphereRule,
};
use rte_kernel_lab::Result;

pub struct Check {
    pub name: &'static str,
    pub parameter: String,
    pub value: f64,
    pub reference: f64,
    pub error: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn pass(&self) -> bool {
        self.error.is_finite() && self.error <= self.tolerance
    }
}

fn factorial(k: i64) -> f64 {
    (1..=k).map(|i| i as f64).product()
}

/// Racah's formula with plain factorials, without the log-space scaling of
/// the library routine.
fn racah_direct(j1: i64, j2: i64, j3: i64, m1: i64, m2: i64, m3: i64) -> f64 {
    if m1 + m2 + m3 != 0 || m1.abs() > j1 || m2.abs() > j2 || m3.abs() > j3 || j3 < (j1 - j2).abs() || j3 > j1 + j2 {
        return 0.0;
    }
    let delta =
        factorial(j1 + j2 - j3) * factorial(j1 - j2 + j3) * factorial(-j1 + j2 + j3) / factorial(j1 + j2 + j3 + 1);
    let pref = (delta
        * factorial(j1 + m1)
        * factorial(j1 - m1)
        * factorial(j2 + m2)
        * factorial(j2 - m2)
        * factorial(j3 + m3)
        * factorial(j3 - m3))
    .sqrt();
    let mut sum = 0.0;
    for t in 0..=(j1 + j2 + j3) {
        let args = [t, j3 - j2 + t + m1, j3 - j1 + t - m2, j1 + j2 - j3 - t, j1 - t - m1, j2 - t + m2];
        if args.iter().any(|&a| a < 0) {
            continue;
        }
        let den: f64 = args.iter().map(|&a| factorial(a)).product();
        sum += if t % 2 == 0 { 1.0 } else { -1.0 } / den;
    }
    let sign = if (j1 - j2 - m3).rem_euclid(2) == 1 { -1.0 } else { 1.0 };
    sign * pref * sum
}

/// Deterministic, well-spread unit directions (spherical Fibonacci lattice).
fn directions(count: usize, offset: f64) -> Vec<(f64, f64)> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            (z.acos(), (golden * i as f64 + offset).rem_euclid(2.0 * PI))
        })
        .collect()
}

fn unit(theta: f64, phi: f64) -> [f64; 3] {
    [theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()]
}

pub fn run_checks() -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    // Wigner 3j against the direct formula, all arguments with j ≤ 10.
    let mut worst: f64 = 0.0;
    let mut count = 0usize;
    for j1 in 0..=10i64 {
        for j2 in 0..=10 {
            for j3 in (j1 - j2).abs()..=(j1 + j2).min(10) {
                for m1 in -j1..=j1 {
                    for m2 in -j2..=j2 {
                        let m3 = -m1 - m2;
                        if m3.abs() > j3 {
                            continue;
                        }
                        let a = wigner3j(j1, j2, j3, m1, m2, m3);
                        let b = racah_direct(j1, j2, j3, m1, m2, m3);
                        worst = worst.max((a - b).abs());
                        count += 1;
                    }
                }
            }
        }
    }
    checks.push(Check {
        name: "wigner3j_direct_formula",
        parameter: format!("j<=10 ({count} symbols)"),
        value: worst,
        reference: 0.0,
        error: worst,
        tolerance: 1e-12,
    });

    // Orthogonality Σ_{m1,m2} (2j3+1) (j1 j2 j3; m1 m2 m3)(j1 j2 j3'; m1 m2 m3) = δ_{j3 j3'}.
    let mut worst: f64 = 0.0;
    for j1 in 0..=6i64 {
        for j2 in 0..=6 {
            for j3 in (j1 - j2).abs()..=j1 + j2 {
                for j3p in (j1 - j2).abs()..=j1 + j2 {
                    for m3 in -j3.min(j3p)..=j3.min(j3p) {
                        let mut s = 0.0;
                        for m1 in -j1..=j1 {
                            let m2 = -m1 - m3;
                            if m2.abs() > j2 {
                                continue;
                            }
                            s += wigner3j(j1, j2, j3, m1, m2, m3) * wigner3j(j1, j2, j3p, m1, m2, m3);
                        }
                        let target = if j3 == j3p { 1.0 } else { 0.0 };
                        worst = worst.max(((2 * j3 + 1) as f64 * s - target).abs());
                    }
                }
            }
        }
    }
    checks.push(Check {
        name: "wigner3j_orthogonality",
        parameter: "j1,j2<=6".into(),
        value: worst,
        reference: 0.0,
        error: worst,
        tolerance: 1e-12,
    });

    // Addition theorem: Σ_m Y_nm(v) Y*_nm(v') = (2n+1)/4π P_n(v·v').
    let a = directions(100, 0.0);
    let b = directions(100, 1.234);
    for n in 0..=10usize {
        let mut worst: f64 = 0.0;
        for (&(t1, p1), &(t2, p2)) in a.iter().zip(b.iter().rev()) {
            let mut s = Complex64::new(0.0, 0.0);
            for m in -(n as i64)..=n as i64 {
                s += spherical_harmonic_standard(n, m, t1, p1)? * spherical_harmonic_standard(n, m, t2, p2)?.conj();
            }
            let (u, v) = (unit(t1, p1), unit(t2, p2));
            let c = (u[0] * v[0] + u[1] * v[1] + u[2] * v[2]).clamp(-1.0, 1.0);
            let target = (2 * n + 1) as f64 / (4.0 * PI) * legendre_real(n, c);
            worst = worst.max((s - target).norm());
        }
        checks.push(Check {
            name: "addition_theorem",
            parameter: format!("n={n}"),
            value: worst,
            reference: 0.0,
            error: worst,
            tolerance: 1e-9,
        });
    }

    // Product contraction Y_nm Y*_kl = Σ_{r,s} μ Y_rs.
    let mut worst: f64 = 0.0;
    let dirs = directions(20, 0.5);
    for n in 0..=3i64 {
        for k in 0..=3i64 {
            for m in -n..=n {
                for l in -k..=k {
                    for &(t, p) in &dirs {
                        let direct = spherical_harmonic_standard(n as usize, m, t, p)?
                            * spherical_harmonic_standard(k as usize, l, t, p)?.conj();
                        let mut sum = Complex64::new(0.0, 0.0);
                        for r in (n - k).abs()..=n + k {
                            let s = m - l;
                            if s.abs() > r {
                                continue;
                            }
                            sum += spherical_harmonic_standard(r as usize, s, t, p)? * mu_constant(n, m, k, l, r, s);
                        }
                        worst = worst.max((sum - direct).norm());
                    }
                }
            }
        }
    }
    checks.push(Check {
        name: "mu_contraction",
        parameter: "n,k<=3".into(),
        value: worst,
        reference: 0.0,
        error: worst,
        tolerance: 1e-10,
    });

    // sup_{|z|=1} |P_n(z)| is attained at z = ±i and is at most 3^n.
    for n in 0..=20usize {
        let samples = 4096;
        let sup = (0..samples)
            .map(|i| legendre(n, Complex64::from_polar(1.0, 2.0 * PI * i as f64 / samples as f64)).norm())
            .fold(0.0, f64::max);
        let at_i = legendre(n, Complex64::new(0.0, 1.0)).norm();
        let bound = 3f64.powi(n as i32);
        // Sampling includes z = i exactly, so sup ≥ |P_n(i)|; any excess
        // over it, or |P_n(i)| above 3^n, is an error.
        let excess = (sup - at_i).max(0.0) / at_i;
        let over = (at_i - bound).max(0.0) / bound;
        checks.push(Check {
            name: "legendre_unit_circle_sup",
            parameter: format!("n={n}"),
            value: sup,
            reference: at_i,
            error: excess.max(over),
            tolerance: 1e-12,
        });
    }

    // ∫|Y_n0|² θ dσ → (1/2π²) ∫∫ θ dφ dθ = π/2.
    let n = 200;
    let rule = SphereRule::for_degree(n);
    let value = yn0_weighted_integral(|t, _| t, n, rule);
    let limit = yn0_limit(|t, _| t, rule);
    checks.push(Check {
        name: "yn0_limit",
        parameter: format!("n={n}, f=theta"),
        value,
        reference: limit,
        error: ((value - limit) / limit).abs(),
        tolerance: 0.05,
    });
    Ok(checks)
}
