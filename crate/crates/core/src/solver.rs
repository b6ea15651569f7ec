//! Nyström discretization and solution of the 2D coupled moment system
//! `(I − LD) U = LQ`, plus an independent discrete-ordinates reference.
//!
//! Moments follow `u(x, θ) = Σ_n u_n(x) e^{inθ}` with `n ∈ J = {|n| < M}`.
//! The operator `L` has Toeplitz blocks `L_kn = K_{k−n}` with
//!
//! `(K_d f)(x) = (1/2π) ∫ E(x, y)/|x − y| e^{−idθ} f(y) dy`,
//!
//! and `D` multiplies moment `n` by `σ_s χ_|n|`. Only `K_d` with
//! `0 ≤ d ≤ 2(M − 1)` is stored; `K_{−d}` is its entrywise conjugate.

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Dim, Grid, Point};
use crate::kernels::pair_2d;
use crate::medium::{Medium, ScalarField};
use crate::phase::{positivity_check, PhaseExpansion, DEFAULT_POSITIVITY_SAMPLES};
use crate::quadrature::SegmentQuadrature;

/// Angular Fourier moments `u_n`, `|n| < M`, on the cells of a grid.
#[derive(Clone, Debug)]
pub struct MomentField {
    grid: Grid,
    m: usize,
    /// `values[n + M − 1][cell]`.
    values: Vec<Vec<Complex64>>,
}

impl MomentField {
    pub fn zeros(grid: &Grid, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter("moment count M must be at least 1".into()));
        }
        Ok(MomentField { grid: grid.clone(), m, values: vec![vec![Complex64::new(0.0, 0.0); grid.len()]; 2 * m - 1] })
    }

    /// Builds a field from source moments with `n ≥ 0`; the negative modes
    /// are filled in by conjugation so the result lies in `V`.
    pub fn from_sources(grid: &Grid, m: usize, sources: &[SourceMoment]) -> Result<Self> {
        let mut f = Self::zeros(grid, m)?;
        for src in sources {
            if src.n < 0 || src.n as usize >= m {
                return Err(Error::InvalidParameter(format!(
                    "source moment n = {} outside 0..{m}; supply n >= 0, negative modes follow by conjugation",
                    src.n
                )));
            }
            if src.n == 0 && src.im.is_some() {
                return Err(Error::InvalidParameter("the n = 0 source moment must be real".into()));
            }
            for (i, p) in grid.centers().iter().enumerate() {
                let v = Complex64::new(src.re.eval(p), src.im.as_ref().map_or(0.0, |f| f.eval(p)));
                *f.at_mut(src.n, i) += v;
                if src.n != 0 {
                    *f.at_mut(-src.n, i) += v.conj();
                }
            }
        }
        Ok(f)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Number of retained moments `M` (so `J` has `2M − 1` entries).
    pub fn moments(&self) -> usize {
        self.m
    }

    pub fn modes(&self) -> impl Iterator<Item = i64> {
        let m = self.m as i64;
        -(m - 1)..m
    }

    fn slot(&self, n: i64) -> usize {
        (n + self.m as i64 - 1) as usize
    }

    pub fn mode(&self, n: i64) -> &[Complex64] {
        &self.values[self.slot(n)]
    }

    pub fn mode_mut(&mut self, n: i64) -> &mut [Complex64] {
        let s = self.slot(n);
        &mut self.values[s]
    }

    pub fn at(&self, n: i64, cell: usize) -> Complex64 {
        self.values[self.slot(n)][cell]
    }

    pub fn at_mut(&mut self, n: i64, cell: usize) -> &mut Complex64 {
        let s = self.slot(n);
        &mut self.values[s][cell]
    }

    /// `max |u_{−n} − conj(u_n)|` over modes and cells.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for n in 0..self.m as i64 {
            for (a, b) in self.mode(n).iter().zip(self.mode(-n)) {
                worst = worst.max((b - a.conj()).norm());
            }
        }
        worst
    }

    /// Orthogonal projection onto `V`: `u_n ← (u_n + conj(u_{−n}))/2`.
    pub fn symmetrize(&mut self) {
        let m = self.m as i64;
        for n in 0..m {
            let (pos, neg) = (self.slot(n), self.slot(-n));
            for i in 0..self.grid.len() {
                let a = self.values[pos][i];
                let b = self.values[neg][i];
                let v = (a + b.conj()) * 0.5;
                self.values[pos][i] = v;
                self.values[neg][i] = v.conj();
            }
        }
    }

    /// `‖u‖_V = (Σ_n ∫ |u_n|²)^{1/2}` with the midpoint rule.
    pub fn norm(&self) -> f64 {
        let s: f64 = self.values.iter().flatten().map(|v| v.norm_sqr()).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    /// `L²` norm of a single mode.
    pub fn mode_norm(&self, n: i64) -> f64 {
        let s: f64 = self.mode(n).iter().map(|v| v.norm_sqr()).sum();
        (s * self.grid.cell_volume()).sqrt()
    }

    fn axpy(&mut self, a: f64, other: &MomentField) {
        for (x, y) in self.values.iter_mut().flatten().zip(other.values.iter().flatten()) {
            *x += y * a;
        }
    }

    fn dot(&self, other: &MomentField) -> Complex64 {
        let mut s = Complex64::new(0.0, 0.0);
        for (x, y) in self.values.iter().flatten().zip(other.values.iter().flatten()) {
            s += x.conj() * y;
        }
        s * self.grid.cell_volume()
    }

    /// CSV with columns `n, x, y, re, im`, one row per mode and cell.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "n,x,y,re,im")?;
        for n in self.modes() {
            for (p, v) in self.grid.centers().iter().zip(self.mode(n)) {
                writeln!(w, "{n},{:.17e},{:.17e},{:.17e},{:.17e}", p.x(), p.y(), v.re, v.im)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Raw little-endian export: `u64` mode count `2M − 1`, `u64` cell
    /// counts per axis, then per mode (from `−(M−1)`) the cell values as
    /// `(re, im)` `f64` pairs in grid order.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        w.write_all(&((2 * self.m - 1) as u64).to_le_bytes())?;
        for &c in self.grid.cells_per_dim() {
            w.write_all(&(c as u64).to_le_bytes())?;
        }
        for v in self.values.iter().flatten() {
            w.write_all(&v.re.to_le_bytes())?;
            w.write_all(&v.im.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }
}

/// One source moment `q_n = re + i·im` for `n ≥ 0`.
#[derive(Clone, Debug)]
pub struct SourceMoment {
    pub n: i64,
    pub re: ScalarField,
    pub im: Option<ScalarField>,
}

impl SourceMoment {
    pub fn real(n: i64, re: ScalarField) -> Self {
        SourceMoment { n, re, im: None }
    }
}

/// Dense `N × N` block stored row-major.
#[derive(Clone, Debug)]
struct Block {
    data: Vec<Complex64>,
}

/// Discretized `L` and `D` for a grid, medium and phase expansion.
#[derive(Clone, Debug)]
pub struct OperatorSystem {
    grid: Grid,
    medium: Medium,
    phase: PhaseExpansion,
    /// `kernels[d]` holds `K_d`, `d = 0..=2(M−1)`.
    kernels: Vec<Block>,
    sigma_s: Vec<f64>,
}

/// Options for [`assemble_system_with`].
#[derive(Clone, Debug)]
pub struct AssemblyOptions {
    /// Refuse to allocate kernel storage beyond this many bytes.
    pub memory_budget: usize,
    pub quadrature: SegmentQuadrature,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        AssemblyOptions { memory_budget: 2 << 30, quadrature: SegmentQuadrature::default() }
    }
}

pub fn assemble_system(grid: &Grid, medium: &Medium, phase: &PhaseExpansion) -> Result<OperatorSystem> {
    assemble_system_with(grid, medium, phase, &AssemblyOptions::default())
}

/// Nyström-midpoint assembly. Off-diagonal entries are
/// `(1/2π) G_d(x_i, x_j) h²`. The singular self-cell is replaced by the
/// integral over the disc of equal area (`R = h/√π`), which equals
/// `(1 − e^{−σ_t R})/σ_t` for `d = 0` and vanishes for `d ≠ 0`.
pub fn assemble_system_with(
    grid: &Grid,
    medium: &Medium,
    phase: &PhaseExpansion,
    opts: &AssemblyOptions,
) -> Result<OperatorSystem> {
    if phase.dim() != Dim::Two || grid.domain().dim() != Dim::Two {
        return Err(Error::InvalidParameter("the moment system is two-dimensional".into()));
    }
    if !grid.is_square() {
        return Err(Error::InvalidParameter("grid cells must be square".into()));
    }
    let m = phase.terms();
    let distinct = 2 * m - 1;
    let n = grid.len();
    let bytes = distinct
        .checked_mul(n)
        .and_then(|v| v.checked_mul(n))
        .and_then(|v| v.checked_mul(std::mem::size_of::<Complex64>()))
        .unwrap_or(usize::MAX);
    if bytes > opts.memory_budget {
        return Err(Error::Resource(format!(
            "{distinct} kernel blocks of {n}x{n} need {bytes} bytes, budget is {}",
            opts.memory_budget
        )));
    }
    for p in grid.centers() {
        medium.domain().check_contains(p)?;
    }
    let h = grid.h()[0];
    let w = h * h / (2.0 * PI);
    let radius = h / PI.sqrt();
    let centers = grid.centers();
    let quad = &opts.quadrature;
    // Amplitude and angle are shared by all d, so compute each row once and
    // expand into every block.
    let rows: Vec<Vec<Vec<Complex64>>> = centers
        .par_iter()
        .enumerate()
        .map(|(i, x)| {
            let mut out = vec![vec![Complex64::new(0.0, 0.0); n]; distinct];
            for (j, y) in centers.iter().enumerate() {
                if i == j {
                    let st = medium.sigma_t().eval(x);
                    let self_cell = if st.abs() * radius < 1e-8 {
                        radius * (1.0 - 0.5 * st * radius)
                    } else {
                        (1.0 - (-st * radius).exp()) / st
                    };
                    out[0][j] = Complex64::new(self_cell, 0.0);
                    continue;
                }
                let (amp, theta) = pair_2d(medium, quad, x, y);
                for (d, row) in out.iter_mut().enumerate() {
                    row[j] = Complex64::from_polar(amp * w, -(d as f64) * theta);
                }
            }
            out
        })
        .collect();
    let mut kernels: Vec<Block> = (0..distinct).map(|_| Block { data: Vec::with_capacity(n * n) }).collect();
    for row in rows {
        for (d, r) in row.into_iter().enumerate() {
            kernels[d].data.extend(r);
        }
    }
    let sigma_s = centers.iter().map(|p| medium.sigma_s().eval(p)).collect();
    Ok(OperatorSystem { grid: grid.clone(), medium: medium.clone(), phase: phase.clone(), kernels, sigma_s })
}

impl OperatorSystem {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn medium(&self) -> &Medium {
        &self.medium
    }

    pub fn phase(&self) -> &PhaseExpansion {
        &self.phase
    }

    pub fn moments(&self) -> usize {
        self.phase.terms()
    }

    /// Number of stored (computed) kernel blocks, `2M − 1`.
    pub fn stored_kernel_count(&self) -> usize {
        self.kernels.len()
    }

    /// Number of distinct kernels `K_d`, `|d| ≤ 2(M − 1)`, i.e. `4M − 3`.
    pub fn distinct_kernel_count(&self) -> usize {
        2 * self.kernels.len() - 1
    }

    /// Entry `(i, j)` of `K_d` for any sign of `d`.
    pub fn kernel_entry(&self, d: i64, i: usize, j: usize) -> Complex64 {
        let n = self.grid.len();
        let v = self.kernels[d.unsigned_abs() as usize].data[i * n + j];
        if d < 0 {
            v.conj()
        } else {
            v
        }
    }

    /// Dense `K_d` (row-major) for any sign of `d`; mainly for inspection.
    pub fn kernel_block(&self, d: i64) -> Vec<Complex64> {
        let b = &self.kernels[d.unsigned_abs() as usize].data;
        if d < 0 {
            b.iter().map(|v| v.conj()).collect()
        } else {
            b.clone()
        }
    }

    /// `D` applied to a field: mode `n` times `σ_s χ_|n|`.
    pub fn apply_d(&self, u: &MomentField) -> MomentField {
        let mut out = u.clone();
        for n in u.modes() {
            let chi = self.phase.chi_abs(n);
            for (v, s) in out.mode_mut(n).iter_mut().zip(&self.sigma_s) {
                *v *= chi * s;
            }
        }
        out
    }

    /// `L` applied to a field, `(Lw)_k = Σ_n K_{k−n} w_n`. Parallel over
    /// grid rows; every output entry is reduced in a fixed order.
    pub fn apply_l(&self, w: &MomentField) -> MomentField {
        let n = self.grid.len();
        let m = self.moments() as i64;
        let modes: Vec<i64> = (-(m - 1)..m).collect();
        let inputs: Vec<&[Complex64]> = modes.iter().map(|&k| w.mode(k)).collect();
        // rows[i][slot(k)]
        let rows: Vec<Vec<Complex64>> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut acc = vec![Complex64::new(0.0, 0.0); modes.len()];
                for (d, block) in self.kernels.iter().enumerate() {
                    let row = &block.data[i * n..(i + 1) * n];
                    let d = d as i64;
                    for (ks, &k) in modes.iter().enumerate() {
                        // K_{k−n} with k − n = +d and (d > 0) k − n = −d.
                        let np = k - d;
                        if np > -m && np < m {
                            let src = inputs[(np + m - 1) as usize];
                            let mut s = Complex64::new(0.0, 0.0);
                            for (a, b) in row.iter().zip(src) {
                                s += a * b;
                            }
                            acc[ks] += s;
                        }
                        let nm = k + d;
                        if d > 0 && nm > -m && nm < m {
                            let src = inputs[(nm + m - 1) as usize];
                            let mut s = Complex64::new(0.0, 0.0);
                            for (a, b) in row.iter().zip(src) {
                                s += a.conj() * b;
                            }
                            acc[ks] += s;
                        }
                    }
                }
                acc
            })
            .collect();
        let mut out = MomentField {
            grid: self.grid.clone(),
            m: m as usize,
            values: vec![vec![Complex64::new(0.0, 0.0); n]; modes.len()],
        };
        for (i, r) in rows.into_iter().enumerate() {
            for (ks, v) in r.into_iter().enumerate() {
                out.values[ks][i] = v;
            }
        }
        out
    }

    /// `L^*`: because `K_d^T = (−1)^d K_d`, the adjoint is `Φ L Φ` with
    /// `Φ = diag((−1)^n)`.
    fn apply_l_adjoint(&self, w: &MomentField) -> MomentField {
        let mut phi_w = w.clone();
        flip_odd(&mut phi_w);
        let mut out = self.apply_l(&phi_w);
        flip_odd(&mut out);
        out
    }

    /// `LD u`.
    pub fn apply_ld(&self, u: &MomentField) -> MomentField {
        self.apply_l(&self.apply_d(u))
    }

    fn check_field(&self, u: &MomentField) -> Result<()> {
        if u.m != self.moments() || u.grid.len() != self.grid.len() {
            return Err(Error::InvalidParameter(format!(
                "moment field with M = {} on {} cells does not match system with M = {} on {} cells",
                u.m,
                u.grid.len(),
                self.moments(),
                self.grid.len()
            )));
        }
        Ok(())
    }
}

fn flip_odd(u: &mut MomentField) {
    let m = u.m as i64;
    for n in -(m - 1)..m {
        if n % 2 != 0 {
            for v in u.mode_mut(n) {
                *v = -*v;
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Richardson iteration `U ← LDU + LQ`.
    FixedPoint,
    /// Restarted GMRES on `(I − LD)U = LQ`.
    Krylov,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub method: SolveMethod,
    /// Relative residual target `‖(I − LD)U − LQ‖ ≤ tol ‖LQ‖`.
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    /// Also run the power iteration for `‖LD‖` and store it in the report.
    pub estimate_contraction: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            method: SolveMethod::FixedPoint,
            tol: 1e-8,
            max_iter: 500,
            restart: 30,
            estimate_contraction: false,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub method: SolveMethod,
    pub iterations: usize,
    /// Relative residuals, one per iteration (first entry: initial guess).
    pub residual_history: Vec<f64>,
    pub final_residual: f64,
    pub contraction_estimate: Option<f64>,
    /// False when the truncated phase function takes negative values; the
    /// solve proceeds but the contraction argument no longer applies.
    pub phase_nonneg: bool,
    pub wall_time: f64,
}

/// Solves `(I − LD)U = LQ`.
pub fn solve(sys: &OperatorSystem, q: &MomentField, opts: &SolveOptions) -> Result<(MomentField, SolveReport)> {
    sys.check_field(q)?;
    let start = Instant::now();
    let phase_nonneg = positivity_check(&sys.phase, DEFAULT_POSITIVITY_SAMPLES)?.nonneg;
    let mut lq = sys.apply_l(q);
    lq.symmetrize();
    let scale = lq.norm();
    let (u, iterations, history) = if scale == 0.0 {
        (MomentField::zeros(&sys.grid, sys.moments())?, 0, vec![0.0])
    } else {
        match opts.method {
            SolveMethod::FixedPoint => fixed_point(sys, &lq, scale, opts)?,
            SolveMethod::Krylov => gmres(sys, &lq, scale, opts)?,
        }
    };
    let contraction_estimate = if opts.estimate_contraction { Some(contraction_estimate(sys)) } else { None };
    let report = SolveReport {
        method: opts.method,
        iterations,
        final_residual: *history.last().unwrap(),
        residual_history: history,
        contraction_estimate,
        phase_nonneg,
        wall_time: start.elapsed().as_secs_f64(),
    };
    Ok((u, report))
}

fn fixed_point(
    sys: &OperatorSystem,
    lq: &MomentField,
    scale: f64,
    opts: &SolveOptions,
) -> Result<(MomentField, usize, Vec<f64>)> {
    let mut u = lq.clone();
    let mut history = Vec::new();
    for it in 0..=opts.max_iter {
        let mut next = sys.apply_ld(&u);
        next.axpy(1.0, lq);
        next.symmetrize();
        // Residual of the current iterate is exactly u − (LDu + LQ).
        let mut diff = u.clone();
        diff.axpy(-1.0, &next);
        let res = diff.norm() / scale;
        history.push(res);
        if res <= opts.tol {
            return Ok((u, it, history));
        }
        if !res.is_finite() {
            break;
        }
        u = next;
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, last_residual: *history.last().unwrap(), history })
}

fn apply_a(sys: &OperatorSystem, u: &MomentField) -> MomentField {
    let mut out = sys.apply_ld(u);
    for (o, x) in out.values.iter_mut().flatten().zip(u.values.iter().flatten()) {
        *o = x - *o;
    }
    out
}

fn residual(sys: &OperatorSystem, u: &MomentField, b: &MomentField) -> f64 {
    let mut r = apply_a(sys, u);
    r.axpy(-1.0, b);
    r.norm()
}

/// Restarted GMRES with modified Gram–Schmidt and Givens rotations. After
/// each cycle the iterate is projected onto `V`; since `I − LD` commutes
/// with the conjugate-symmetry map this never increases the residual.
fn gmres(
    sys: &OperatorSystem,
    b: &MomentField,
    scale: f64,
    opts: &SolveOptions,
) -> Result<(MomentField, usize, Vec<f64>)> {
    let restart = opts.restart.max(1);
    let mut x = MomentField::zeros(&sys.grid, sys.moments())?;
    let mut history = vec![1.0];
    let mut total = 0usize;
    let zero = Complex64::new(0.0, 0.0);
    while total < opts.max_iter {
        let mut r = b.clone();
        r.axpy(-1.0, &apply_a(sys, &x));
        let beta = r.norm();
        if beta / scale <= opts.tol {
            break;
        }
        let mut basis: Vec<MomentField> = Vec::with_capacity(restart + 1);
        let mut v0 = r;
        v0.scale_by(1.0 / beta);
        basis.push(v0);
        let mut hcols: Vec<Vec<Complex64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<Complex64> = Vec::new();
        let mut g = vec![Complex64::new(beta, 0.0)];
        for j in 0..restart {
            if total >= opts.max_iter {
                break;
            }
            total += 1;
            let mut w = apply_a(sys, &basis[j]);
            let mut h = vec![zero; j + 2];
            for (i, vi) in basis.iter().enumerate() {
                let hij = vi.dot(&w);
                h[i] = hij;
                w.axpy_c(-hij, vi);
            }
            let wn = w.norm();
            h[j + 1] = Complex64::new(wn, 0.0);
            for i in 0..j {
                let (a, bb) = (h[i], h[i + 1]);
                h[i] = a * cs[i] + sn[i] * bb;
                h[i + 1] = -sn[i].conj() * a + bb * cs[i];
            }
            let (c, s, rr) = givens(h[j], h[j + 1]);
            h[j] = rr;
            h[j + 1] = zero;
            cs.push(c);
            sn.push(s);
            let gj = g[j];
            g[j] = gj * c;
            g.push(-s.conj() * gj);
            hcols.push(h);
            let est = g[j + 1].norm() / scale;
            history.push(est);
            if est <= opts.tol || wn == 0.0 {
                break;
            }
            let mut next = w;
            next.scale_by(1.0 / wn);
            basis.push(next);
        }
        let k = hcols.len();
        let mut y = vec![zero; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for l in i + 1..k {
                s -= hcols[l][i] * y[l];
            }
            y[i] = s / hcols[i][i];
        }
        for (yi, vi) in y.iter().zip(&basis) {
            x.axpy_c(*yi, vi);
        }
        x.symmetrize();
        let true_res = residual(sys, &x, b) / scale;
        *history.last_mut().unwrap() = true_res;
        if true_res <= opts.tol {
            return Ok((x, total, history));
        }
        if !true_res.is_finite() {
            break;
        }
    }
    let true_res = residual(sys, &x, b) / scale;
    if true_res <= opts.tol {
        return Ok((x, total, history));
    }
    Err(Error::NoConvergence { iterations: total, last_residual: true_res, history })
}

/// Complex Givens rotation zeroing `b` against `a`.
fn givens(a: Complex64, b: Complex64) -> (f64, Complex64, Complex64) {
    let (na, nb) = (a.norm(), b.norm());
    if nb == 0.0 {
        return (1.0, Complex64::new(0.0, 0.0), a);
    }
    if na == 0.0 {
        return (0.0, (b / nb).conj(), Complex64::new(nb, 0.0));
    }
    let r = na.hypot(nb);
    let phase = a / na;
    let c = na / r;
    let s = phase * b.conj() / r;
    (c, s, phase * r)
}

impl MomentField {
    fn scale_by(&mut self, a: f64) {
        for v in self.values.iter_mut().flatten() {
            *v *= a;
        }
    }

    fn axpy_c(&mut self, a: Complex64, other: &MomentField) {
        for (x, y) in self.values.iter_mut().flatten().zip(other.values.iter().flatten()) {
            *x += a * y;
        }
    }
}

/// Power-iteration estimate of `‖LD‖` on `V`.
///
/// `LD` commutes with the conjugate-symmetry map, so the norm over `V`
/// coincides with the norm of the complex operator; the iteration runs on
/// `(LD)^*(LD)` starting from a deterministic vector in `V`.
pub fn contraction_estimate(sys: &OperatorSystem) -> f64 {
    if sys.sigma_s.iter().all(|&s| s == 0.0) {
        return 0.0;
    }
    let mut v = MomentField::zeros(&sys.grid, sys.moments()).expect("M >= 1");
    for n in v.modes().collect::<Vec<_>>() {
        for (i, x) in v.mode_mut(n).iter_mut().enumerate() {
            let t = 0.37 * i as f64 + 1.3 * n as f64;
            *x = Complex64::new(1.0 + 0.25 * t.sin(), 0.2 * n as f64 * t.cos());
        }
    }
    v.symmetrize();
    let nv = v.norm();
    v.scale_by(1.0 / nv);
    let mut est = 0.0;
    for _ in 0..200 {
        let ldv = sys.apply_ld(&v);
        let mut w = sys.apply_d(&sys.apply_l_adjoint(&ldv));
        w.symmetrize();
        let lambda = v.dot(&w).re;
        let new_est = lambda.max(0.0).sqrt();
        let nw = w.norm();
        if nw == 0.0 {
            return 0.0;
        }
        w.scale_by(1.0 / nw);
        v = w;
        if (new_est - est).abs() <= 1e-9 * new_est {
            est = new_est;
            break;
        }
        est = new_est;
    }
    est
}

/// Bilinear interpolation of a cell-centred grid function, extrapolating
/// linearly in the half cell next to the boundary.
fn bilinear_weights(grid: &Grid, p: &Point) -> [(usize, f64); 4] {
    let (nx, ny) = (grid.cells_per_dim()[0], grid.cells_per_dim()[1]);
    let (hx, hy) = (grid.h()[0], grid.h()[1]);
    let lo = grid.domain().lo();
    let locate = |v: f64, lo: f64, h: f64, n: usize| -> (usize, f64) {
        if n == 1 {
            return (0, 0.0);
        }
        let s = (v - lo) / h - 0.5;
        let i = (s.floor().max(0.0) as usize).min(n - 2);
        (i, s - i as f64)
    };
    let (i, tx) = locate(p.x(), lo.x(), hx, nx);
    let (j, ty) = locate(p.y(), lo.y(), hy, ny);
    let i1 = if nx == 1 { i } else { i + 1 };
    let j1 = if ny == 1 { j } else { j + 1 };
    [
        (j * nx + i, (1.0 - tx) * (1.0 - ty)),
        (j * nx + i1, tx * (1.0 - ty)),
        (j1 * nx + i, (1.0 - tx) * ty),
        (j1 * nx + i1, tx * ty),
    ]
}

/// Options for [`discrete_ordinates_reference`].
#[derive(Clone, Debug)]
pub struct OrdinatesOptions {
    pub directions: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for OrdinatesOptions {
    fn default() -> Self {
        OrdinatesOptions { directions: 64, tol: 1e-10, max_iter: 500 }
    }
}

/// Source iteration on the characteristic form
/// `u(x, θ) = ∫_0^{τ−} E(x, x − lv) φ(x − lv, θ) dl`,
/// `φ = Σ_n e^{inθ}(σ_s χ_|n| u_n + q_n)`.
///
/// Rays are integrated with the composite trapezoid rule (step at most
/// `h/2`), moments between cell centres are interpolated bilinearly, and
/// moments are recovered by the trapezoid rule over `N` uniform angles.
/// Sources are evaluated pointwise from their fields.
pub fn discrete_ordinates_reference(
    grid: &Grid,
    medium: &Medium,
    phase: &PhaseExpansion,
    sources: &[SourceMoment],
    opts: &OrdinatesOptions,
) -> Result<(MomentField, usize)> {
    if opts.directions < 8 {
        return Err(Error::InvalidParameter(format!("need at least 8 directions, got {}", opts.directions)));
    }
    if phase.dim() != Dim::Two {
        return Err(Error::InvalidParameter("discrete ordinates reference is two-dimensional".into()));
    }
    let m = phase.terms();
    // Validates the source list against M.
    MomentField::from_sources(grid, m, sources)?;
    let quad = SegmentQuadrature::default();
    let nd = opts.directions;
    let dirs: Vec<f64> = (0..nd).map(|j| 2.0 * PI * j as f64 / nd as f64).collect();
    let hmin = grid.h()[0].min(grid.h()[1]);
    let dom = *grid.domain();
    let mi = m as i64;
    let modes: Vec<i64> = (-(mi - 1)..mi).collect();
    let chis: Vec<f64> = modes.iter().map(|&n| phase.chi_abs(n)).collect();
    let source_at = |p: &Point| -> Vec<Complex64> {
        let mut q = vec![Complex64::new(0.0, 0.0); modes.len()];
        for s in sources {
            let v = Complex64::new(s.re.eval(p), s.im.as_ref().map_or(0.0, |f| f.eval(p)));
            q[(s.n + mi - 1) as usize] += v;
            if s.n != 0 {
                q[(-s.n + mi - 1) as usize] += v.conj();
            }
        }
        q
    };

    let sweep = |u: &MomentField| -> MomentField {
        let rows: Vec<Vec<Complex64>> = grid
            .centers()
            .par_iter()
            .map(|x| {
                let mut moments = vec![Complex64::new(0.0, 0.0); modes.len()];
                for &theta in &dirs {
                    let (vy, vx) = theta.sin_cos();
                    // Distance to the boundary going backwards along −v.
                    let mut tau = f64::INFINITY;
                    for (c, v, lo, hi) in
                        [(x.x(), vx, dom.lo().x(), dom.hi().x()), (x.y(), vy, dom.lo().y(), dom.hi().y())]
                    {
                        if v > 1e-15 {
                            tau = tau.min((c - lo) / v);
                        } else if v < -1e-15 {
                            tau = tau.min((c - hi) / v);
                        }
                    }
                    let steps = ((tau / (0.5 * hmin)).ceil() as usize).max(1);
                    let dl = tau / steps as f64;
                    let phases: Vec<Complex64> =
                        modes.iter().map(|&n| Complex64::from_polar(1.0, n as f64 * theta)).collect();
                    let mut ray = Complex64::new(0.0, 0.0);
                    for s in 0..=steps {
                        let l = s as f64 * dl;
                        let y = Point::new2(x.x() - l * vx, x.y() - l * vy);
                        let e = medium.attenuation_unchecked(x, &y, &quad);
                        let ss = medium.sigma_s().eval(&y);
                        let q = source_at(&y);
                        let wts = bilinear_weights(grid, &y);
                        let mut phi = Complex64::new(0.0, 0.0);
                        for (k, &n) in modes.iter().enumerate() {
                            let mut un = Complex64::new(0.0, 0.0);
                            for &(c, w) in &wts {
                                un += u.at(n, c) * w;
                            }
                            phi += phases[k] * (un * (ss * chis[k]) + q[k]);
                        }
                        let tw = if s == 0 || s == steps { 0.5 } else { 1.0 };
                        ray += phi * (e * tw * dl);
                    }
                    for (k, mo) in moments.iter_mut().enumerate() {
                        *mo += ray * phases[k].conj();
                    }
                }
                moments.iter().map(|v| v / nd as f64).collect()
            })
            .collect();
        let mut out = MomentField::zeros(grid, m).expect("M >= 1");
        for (i, r) in rows.into_iter().enumerate() {
            for (k, v) in r.into_iter().enumerate() {
                out.values[k][i] = v;
            }
        }
        out.symmetrize();
        out
    };

    let mut u = MomentField::zeros(grid, m)?;
    let mut history = Vec::new();
    for it in 1..=opts.max_iter {
        let next = sweep(&u);
        let mut diff = next.clone();
        diff.axpy(-1.0, &u);
        let nn = next.norm();
        let rel = if nn == 0.0 { 0.0 } else { diff.norm() / nn };
        history.push(rel);
        u = next;
        if rel <= opts.tol || medium_is_nonscattering(medium, grid) {
            return Ok((u, it));
        }
    }
    Err(Error::NoConvergence { iterations: opts.max_iter, last_residual: *history.last().unwrap(), history })
}

fn medium_is_nonscattering(medium: &Medium, grid: &Grid) -> bool {
    match medium.sigma_s().as_constant() {
        Some(c) => c == 0.0,
        None => grid.centers().iter().all(|p| medium.sigma_s().eval(p) == 0.0),
    }
}
