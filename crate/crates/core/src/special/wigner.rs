use std::sync::OnceLock;

const LN_FACT_TABLE: usize = 4096;

fn ln_fact_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(LN_FACT_TABLE);
        t.push(0.0);
        let mut acc = 0.0f64;
        for k in 1..LN_FACT_TABLE {
            acc += (k as f64).ln();
            t.push(acc);
        }
        t
    })
}

/// `ln(k!)`, tabulated for small `k` and extended by direct summation.
pub fn ln_factorial(k: usize) -> f64 {
    let t = ln_fact_table();
    if k < t.len() {
        return t[k];
    }
    let mut acc = t[t.len() - 1];
    for i in t.len()..=k {
        acc += (i as f64).ln();
    }
    acc
}

fn lnf(k: i64) -> f64 {
    debug_assert!(k >= 0);
    ln_factorial(k as usize)
}

/// A Wigner 3j symbol together with its value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Wigner3j {
    pub j1: i64,
    pub j2: i64,
    pub j3: i64,
    pub m1: i64,
    pub m2: i64,
    pub m3: i64,
    pub value: f64,
}

impl Wigner3j {
    pub fn new(j1: i64, j2: i64, j3: i64, m1: i64, m2: i64, m3: i64) -> Self {
        Wigner3j { j1, j2, j3, m1, m2, m3, value: wigner3j(j1, j2, j3, m1, m2, m3) }
    }

    /// Whether the selection rules allow a nonzero value.
    pub fn allowed(&self) -> bool {
        selection_ok(self.j1, self.j2, self.j3, self.m1, self.m2, self.m3)
    }
}

fn selection_ok(j1: i64, j2: i64, j3: i64, m1: i64, m2: i64, m3: i64) -> bool {
    j1 >= 0
        && j2 >= 0
        && j3 >= 0
        && m1 + m2 + m3 == 0
        && m1.abs() <= j1
        && m2.abs() <= j2
        && m3.abs() <= j3
        && (j1 - j2).abs() <= j3
        && j3 <= j1 + j2
}

/// Wigner 3j symbol for integer arguments via the Racah single-sum formula.
///
/// The factorial prefactor is accumulated in log space so that values stay
/// representable up to `j ≈ 50`. Returns 0 whenever a selection rule fails.
pub fn wigner3j(j1: i64, j2: i64, j3: i64, m1: i64, m2: i64, m3: i64) -> f64 {
    if !selection_ok(j1, j2, j3, m1, m2, m3) {
        return 0.0;
    }
    // (j1 j2 j3; 0 0 0) vanishes for odd J.
    if m1 == 0 && m2 == 0 && (j1 + j2 + j3) % 2 != 0 {
        return 0.0;
    }
    let ln_delta = lnf(j1 + j2 - j3) + lnf(j1 - j2 + j3) + lnf(-j1 + j2 + j3) - lnf(j1 + j2 + j3 + 1);
    let ln_pref =
        0.5 * (ln_delta + lnf(j1 + m1) + lnf(j1 - m1) + lnf(j2 + m2) + lnf(j2 - m2) + lnf(j3 + m3) + lnf(j3 - m3));
    let t_min = 0.max(j2 - j3 - m1).max(j1 - j3 + m2);
    let t_max = (j1 + j2 - j3).min(j1 - m1).min(j2 + m2);
    let mut sum = 0.0;
    for t in t_min..=t_max {
        let ln_den = lnf(t)
            + lnf(j3 - j2 + t + m1)
            + lnf(j3 - j1 + t - m2)
            + lnf(j1 + j2 - j3 - t)
            + lnf(j1 - t - m1)
            + lnf(j2 - t + m2);
        let term = (ln_pref - ln_den).exp();
        if t % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
    }
    if (j1 - j2 - m3).rem_euclid(2) == 1 {
        -sum
    } else {
        sum
    }
}

/// Contraction constant `μ^{nkr}_{mls}` for products of standard-normalized
/// spherical harmonics:
///
/// `Y_nm Y*_kl = Σ_{r,s} μ^{nkr}_{mls} Y_rs`.
///
/// Zero outside the selection rules `m − l − s = 0`, `|n − k| ≤ r ≤ n + k`.
pub fn mu_constant(n: i64, m: i64, k: i64, l: i64, r: i64, s: i64) -> f64 {
    if m - l - s != 0 || r < (n - k).abs() || r > n + k {
        return 0.0;
    }
    let a = wigner3j(n, k, r, m, -l, -s);
    if a == 0.0 {
        return 0.0;
    }
    let b = wigner3j(n, k, r, 0, 0, 0);
    let sign = if (s + l).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    let norm = (((2 * n + 1) * (2 * k + 1) * (2 * r + 1)) as f64 / (4.0 * std::f64::consts::PI)).sqrt();
    norm * sign * a * b
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_values() {
        assert!((wigner3j(0, 0, 0, 0, 0, 0) - 1.0).abs() < 1e-15);
        assert!((wigner3j(1, 1, 0, 0, 0, 0) + 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert_eq!(wigner3j(1, 1, 1, 0, 0, 0), 0.0);
        assert_eq!(wigner3j(1, 1, 3, 0, 0, 0), 0.0);
        assert_eq!(wigner3j(1, 1, 1, 1, 1, 0), 0.0);
        assert!(!Wigner3j::new(2, 2, 1, 2, 0, 0).allowed());
    }

    #[test]
    fn orthogonality_row() {
        let (j1, j2, j3, m3) = (2, 2, 1, 0);
        let mut s = 0.0;
        for m1 in -j1..=j1 {
            for m2 in -j2..=j2 {
                let w = wigner3j(j1, j2, j3, m1, m2, m3);
                s += (2 * j3 + 1) as f64 * w * w;
            }
        }
        assert!((s - 1.0).abs() < 1e-13);
    }

    #[test]
    fn column_permutations() {
        for j1 in 0..=5i64 {
            for j2 in 0..=5i64 {
                for j3 in 0..=5i64 {
                    for m1 in -j1..=j1 {
                        for m2 in -j2..=j2 {
                            let m3 = -m1 - m2;
                            let v = wigner3j(j1, j2, j3, m1, m2, m3);
                            let odd = if (j1 + j2 + j3) % 2 == 0 { 1.0 } else { -1.0 };
                            // cyclic permutations are even
                            assert!((wigner3j(j2, j3, j1, m2, m3, m1) - v).abs() < 1e-13);
                            assert!((wigner3j(j3, j1, j2, m3, m1, m2) - v).abs() < 1e-13);
                            // transpositions and sign flip carry (-1)^J
                            assert!((wigner3j(j2, j1, j3, m2, m1, m3) - odd * v).abs() < 1e-13);
                            assert!((wigner3j(j1, j3, j2, m1, m3, m2) - odd * v).abs() < 1e-13);
                            assert!((wigner3j(j1, j2, j3, -m1, -m2, -m3) - odd * v).abs() < 1e-13);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn mu_trivial_cases() {
        let inv = (1.0 / (4.0 * std::f64::consts::PI)).sqrt();
        assert!((mu_constant(0, 0, 0, 0, 0, 0) - inv).abs() < 1e-15);
        assert_eq!(mu_constant(1, 0, 1, 0, 1, 0), 0.0);
        assert_eq!(mu_constant(1, 1, 1, 0, 0, 0), 0.0);
        assert_eq!(mu_constant(1, 0, 1, 0, 3, 0), 0.0);
    }

    #[test]
    fn ln_factorial_extends_table() {
        let direct: f64 = (1..=5000).map(|k| (k as f64).ln()).sum();
        assert!((ln_factorial(5000) - direct).abs() < 1e-9 * direct);
        assert!((ln_factorial(10) - 3628800f64.ln()).abs() < 1e-13);
    }
}
