use num_complex::Complex64;

use super::gegenbauer::GegenbauerTable;
use crate::error::Result;

/// `P_n(z)` by the three-term recurrence, valid for complex arguments.
pub fn legendre(n: usize, z: Complex64) -> Complex64 {
    let mut p0 = Complex64::new(1.0, 0.0);
    if n == 0 {
        return p0;
    }
    let mut p1 = z;
    for k in 1..n {
        let kf = k as f64;
        let p2 = (z * p1 * (2.0 * kf + 1.0) - p0 * kf) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// `P_n(x)` for real `x`.
pub fn legendre_real(n: usize, x: f64) -> f64 {
    let mut p0 = 1.0;
    if n == 0 {
        return p0;
    }
    let mut p1 = x;
    for k in 1..n {
        let kf = k as f64;
        let p2 = ((2.0 * kf + 1.0) * x * p1 - kf * p0) / (kf + 1.0);
        p0 = p1;
        p1 = p2;
    }
    p1
}

/// `[P_0(x), ..., P_nmax(x)]`.
pub fn legendre_all(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(nmax + 1);
    out.push(1.0);
    if nmax == 0 {
        return out;
    }
    out.push(x);
    for k in 1..nmax {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * out[k] - kf * out[k - 1]) / (kf + 1.0);
        out.push(next);
    }
    out
}

/// Monomial coefficients of `P_n = C_n^{1/2}`: entry `k` multiplies `x^k`.
pub fn legendre_monomial_coefficients(n: usize) -> Result<Vec<f64>> {
    let table = GegenbauerTable::new(0.5, n)?;
    Ok(table.row(n).to_vec())
}
