//! TOML run files: medium, phase, grid, sources and solver settings, plus
//! the study descriptions used by the command-line front end.
//!
//! Raster files hold a little-endian header `u64 d` followed by `d` `u64`
//! sample counts, then the samples as little-endian `f64` on the node lattice
//! spanning the domain, first coordinate varying fastest (row-major with one
//! row per `y` value).

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoxDomain, Dim, Grid, Point};
use crate::medium::{Medium, MediumBounds, RasterField, ScalarField};
use crate::phase::{delta_m_transform, hg_coefficients, PhaseExpansion};
use crate::separability::{CorrelationStudy, RankCriterion, RankStudy};
use crate::solver::{OrdinatesOptions, SolveMethod, SolveOptions, SourceMoment};

/// Axis-aligned box given by its corners.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxSpec {
    pub fn to_domain(&self) -> Result<BoxDomain> {
        BoxDomain::new(Point::from_slice(&self.lo)?, Point::from_slice(&self.hi)?)
    }

    pub fn from_domain(b: &BoxDomain) -> Self {
        BoxSpec { lo: b.lo().coords().to_vec(), hi: b.hi().coords().to_vec() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Constant {
        value: f64,
    },
    Linear {
        base: f64,
        gradient: Vec<f64>,
    },
    /// Raster file, resolved relative to the run file's directory.
    Raster {
        path: PathBuf,
    },
}

impl FieldSpec {
    pub fn to_field(&self, domain: &BoxDomain, base_dir: &Path) -> Result<ScalarField> {
        match self {
            FieldSpec::Constant { value } => Ok(ScalarField::Constant(*value)),
            FieldSpec::Linear { base, gradient } => {
                let d = domain.dim().value();
                if gradient.len() != d {
                    return Err(Error::Config(format!(
                        "linear field gradient has {} components, domain has dimension {d}",
                        gradient.len()
                    )));
                }
                let mut g = [0.0; 3];
                g[..d].copy_from_slice(gradient);
                Ok(ScalarField::Linear { base: *base, gradient: g })
            }
            FieldSpec::Raster { path } => {
                let full = if path.is_absolute() { path.clone() } else { base_dir.join(path) };
                Ok(ScalarField::Raster(read_raster(&full, *domain)?))
            }
        }
    }
}

/// Reads a raster file (see the module documentation for the layout).
pub fn read_raster(path: &Path, domain: BoxDomain) -> Result<RasterField> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::Config(format!("cannot read raster {}: {e}", path.display())))?;
    let word = |i: usize| -> Result<[u8; 8]> {
        bytes
            .get(8 * i..8 * i + 8)
            .map(|s| s.try_into().expect("8-byte slice"))
            .ok_or_else(|| Error::Config(format!("raster {} is truncated", path.display())))
    };
    let d = u64::from_le_bytes(word(0)?) as usize;
    if d != domain.dim().value() {
        return Err(Error::Config(format!(
            "raster {} has {d} dimensions, domain has {}",
            path.display(),
            domain.dim().value()
        )));
    }
    let dims: Vec<usize> =
        (0..d).map(|k| word(1 + k).map(|w| u64::from_le_bytes(w) as usize)).collect::<Result<_>>()?;
    let total: usize = dims.iter().product();
    let header = 1 + d;
    if bytes.len() != 8 * (header + total) {
        return Err(Error::Config(format!(
            "raster {} should hold {total} samples after its header, found {} bytes",
            path.display(),
            bytes.len() - 8 * header
        )));
    }
    let data = (0..total).map(|i| word(header + i).map(f64::from_le_bytes)).collect::<Result<_>>()?;
    RasterField::new(domain, dims, data)
}

/// Writes a raster file in the layout accepted by [`read_raster`].
pub fn write_raster(path: &Path, dims: &[usize], data: &[f64]) -> Result<()> {
    let mut out = Vec::with_capacity(8 * (1 + dims.len() + data.len()));
    out.extend_from_slice(&(dims.len() as u64).to_le_bytes());
    for &n in dims {
        out.extend_from_slice(&(n as u64).to_le_bytes());
    }
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    pub sigma0: f64,
    pub sigma1: f64,
    pub k0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSpec {
    /// Defaults to a box enclosing the study geometry where one exists.
    #[serde(default)]
    pub domain: Option<BoxSpec>,
    pub sigma_t: FieldSpec,
    #[serde(default)]
    pub sigma_s: Option<FieldSpec>,
    /// Admissibility constants; when absent, a medium with `σ_s` is only
    /// checked for `0 ≤ σ_s < σ_t` at its validation lattice.
    #[serde(default)]
    pub bounds: Option<BoundsSpec>,
}

impl MediumSpec {
    pub fn constant(sigma_t: f64) -> Self {
        MediumSpec { domain: None, sigma_t: FieldSpec::Constant { value: sigma_t }, sigma_s: None, bounds: None }
    }

    /// Builds the medium. Without `σ_s` the medium is purely absorbing and
    /// only its attenuation is used.
    pub fn build(&self, fallback_domain: Option<BoxDomain>, base_dir: &Path) -> Result<Medium> {
        let domain = match (&self.domain, fallback_domain) {
            (Some(b), _) => b.to_domain()?,
            (None, Some(d)) => d,
            (None, None) => return Err(Error::Config("medium.domain is required".into())),
        };
        let sigma_t = self.sigma_t.to_field(&domain, base_dir)?;
        let Some(ss) = &self.sigma_s else {
            return Ok(Medium::absorbing(domain, sigma_t));
        };
        let sigma_s = ss.to_field(&domain, base_dir)?;
        let bounds = match &self.bounds {
            Some(b) => MediumBounds { sigma0: b.sigma0, sigma1: b.sigma1, k0: b.k0 },
            None => infer_bounds(&domain, &sigma_t, &sigma_s)?,
        };
        Medium::new(domain, sigma_t, sigma_s, bounds)
    }
}

/// Tightest constants observed on a coarse lattice; the full validation
/// lattice then confirms them.
fn infer_bounds(domain: &BoxDomain, st: &ScalarField, ss: &ScalarField) -> Result<MediumBounds> {
    let grid = Grid::uniform(*domain, 32)?;
    let (mut s0, mut s1, mut k0) = (f64::INFINITY, 0.0f64, 0.0f64);
    for p in grid.centers().iter().chain([domain.lo(), domain.hi()].iter()) {
        let (t, s) = (st.eval(p), ss.eval(p));
        s0 = s0.min(s);
        s1 = s1.max(t);
        if t > 0.0 {
            k0 = k0.max(s / t);
        }
    }
    // Slack for samples between lattice points; validation rejects fields
    // that still break the bounds.
    Ok(MediumBounds { sigma0: (s0 * 0.999).max(0.0), sigma1: s1 * 1.001, k0: (k0 * 1.001).min(0.999_999) })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseSpec {
    Isotropic,
    Hg {
        g: f64,
        terms: usize,
        #[serde(default)]
        delta_m: bool,
    },
    Rayleigh,
    Custom {
        chi: Vec<f64>,
    },
}

/// A phase expansion together with the forward-peak weight removed by δ-M.
#[derive(Clone, Debug)]
pub struct BuiltPhase {
    pub expansion: PhaseExpansion,
    pub forward_weight: f64,
}

impl PhaseSpec {
    pub fn build(&self, dim: Dim) -> Result<BuiltPhase> {
        let expansion = match self {
            PhaseSpec::Isotropic => PhaseExpansion::isotropic(dim),
            PhaseSpec::Hg { g, terms, delta_m: true } => {
                let d = delta_m_transform(*g, *terms, dim)?;
                return Ok(BuiltPhase { expansion: d.expansion, forward_weight: d.forward_weight });
            }
            PhaseSpec::Hg { g, terms, delta_m: false } => hg_coefficients(*g, *terms, dim)?,
            PhaseSpec::Rayleigh => {
                if dim != Dim::Three {
                    return Err(Error::Config("the Rayleigh phase function is three-dimensional".into()));
                }
                PhaseExpansion::rayleigh()
            }
            PhaseSpec::Custom { chi } => PhaseExpansion::new(dim, chi.clone())?,
        };
        Ok(BuiltPhase { expansion, forward_weight: 0.0 })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub n: i64,
    pub re: FieldSpec,
    #[serde(default)]
    pub im: Option<FieldSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub method: SolveMethod,
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
    pub estimate_contraction: bool,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let d = SolveOptions::default();
        SolverSpec {
            method: d.method,
            tol: d.tol,
            max_iter: d.max_iter,
            restart: d.restart,
            estimate_contraction: d.estimate_contraction,
        }
    }
}

impl SolverSpec {
    pub fn options(&self) -> SolveOptions {
        SolveOptions {
            method: self.method,
            tol: self.tol,
            max_iter: self.max_iter,
            restart: self.restart,
            estimate_contraction: self.estimate_contraction,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReferenceSpec {
    pub directions: usize,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        let d = OrdinatesOptions::default();
        ReferenceSpec { directions: d.directions, tol: d.tol, max_iter: d.max_iter }
    }
}

impl ReferenceSpec {
    pub fn options(&self) -> OrdinatesOptions {
        OrdinatesOptions { directions: self.directions, tol: self.tol, max_iter: self.max_iter }
    }
}

/// A 2D moment-system solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSpec {
    pub medium: MediumSpec,
    pub phase: PhaseSpec,
    /// Cells per dimension.
    pub cells: Vec<usize>,
    #[serde(default)]
    pub sources: Vec<SourceSpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    /// When present, the discrete-ordinates reference is also run and
    /// compared against.
    #[serde(default)]
    pub reference: Option<ReferenceSpec>,
}

/// Everything needed to call the solver, resolved from a [`SolveSpec`].
#[derive(Debug)]
pub struct SolveSetup {
    pub grid: Grid,
    pub medium: Medium,
    pub phase: PhaseExpansion,
    pub sources: Vec<SourceMoment>,
}

impl SolveSpec {
    pub fn build(&self, base_dir: &Path) -> Result<SolveSetup> {
        let medium = self.medium.build(None, base_dir)?;
        let domain = *medium.domain();
        if domain.dim() != Dim::Two {
            return Err(Error::Config("solve2d needs a two-dimensional medium domain".into()));
        }
        let phase = self.phase.build(Dim::Two)?;
        let medium = if phase.forward_weight > 0.0 { medium.delta_m_scaled(phase.forward_weight) } else { medium };
        let grid = Grid::new(domain, &self.cells)?;
        let sources = self
            .sources
            .iter()
            .map(|s| {
                Ok(SourceMoment {
                    n: s.n,
                    re: s.re.to_field(&domain, base_dir)?,
                    im: s.im.as_ref().map(|f| f.to_field(&domain, base_dir)).transpose()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(SolveSetup { grid, medium, phase: phase.expansion, sources })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationSpec {
    pub x: BoxSpec,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    #[serde(default = "default_n_tilde_max")]
    pub n_tilde_max: f64,
    #[serde(default = "default_fit_decades")]
    pub fit_decades: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub n_values: Option<Vec<usize>>,
}

fn default_n_tilde_max() -> f64 {
    150.0
}
fn default_fit_decades() -> f64 {
    1.0
}
fn default_samples() -> usize {
    64
}

impl CorrelationSpec {
    pub fn study(&self) -> Result<CorrelationStudy> {
        let mut s =
            CorrelationStudy::new(self.x.to_domain()?, Point::from_slice(&self.y1)?, Point::from_slice(&self.y2)?);
        s.n_tilde_max = self.n_tilde_max;
        s.fit_decades = self.fit_decades;
        s.samples = self.samples;
        s.n_values = self.n_values.clone();
        Ok(s)
    }

    /// Smallest box containing `X`, `y1` and `y2`.
    pub fn bounding_box(&self) -> Result<BoxDomain> {
        let x = self.x.to_domain()?;
        enclose(&[x.lo(), x.hi(), Point::from_slice(&self.y1)?, Point::from_slice(&self.y2)?])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankGrowthSpec {
    pub x: BoxSpec,
    pub y: BoxSpec,
    pub n_values: Vec<usize>,
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub criterion: RankCriterion,
    #[serde(default)]
    pub points_per_unit: Option<f64>,
}

fn default_epsilons() -> Vec<f64> {
    vec![1e-2, 1e-4, 1e-8]
}

impl RankGrowthSpec {
    pub fn study(&self) -> Result<RankStudy> {
        let mut s = RankStudy::new(self.x.to_domain()?, self.y.to_domain()?, self.n_values.clone());
        s.epsilons = self.epsilons.clone();
        s.criterion = self.criterion;
        s.points_per_unit = self.points_per_unit;
        Ok(s)
    }

    pub fn bounding_box(&self) -> Result<BoxDomain> {
        let (x, y) = (self.x.to_domain()?, self.y.to_domain()?);
        enclose(&[x.lo(), x.hi(), y.lo(), y.hi()])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PcaSpec {
    pub x: BoxSpec,
    pub y: BoxSpec,
    pub n_values: Vec<usize>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_pca_epsilons")]
    pub epsilons: Vec<f64>,
}

fn default_delta() -> f64 {
    0.5
}
fn default_pca_epsilons() -> Vec<f64> {
    vec![0.5, 1e-2]
}

impl PcaSpec {
    pub fn bounding_box(&self) -> Result<BoxDomain> {
        let (x, y) = (self.x.to_domain()?, self.y.to_domain()?);
        enclose(&[x.lo(), x.hi(), y.lo(), y.hi()])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparableKind {
    Phase2d,
    Taylor,
    Harmonic3d,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeparableSpec {
    pub kind: SeparableKind,
    pub x: BoxSpec,
    pub y: BoxSpec,
    /// Mode index (phase and harmonic constructions).
    #[serde(default)]
    pub n: usize,
    #[serde(default = "default_separable_eps")]
    pub eps: f64,
    /// Polynomial degree of the Taylor construction.
    #[serde(default = "default_degree")]
    pub degree: usize,
    /// Sample points per dimension of the dense error check.
    #[serde(default)]
    pub check_points_per_dim: Option<usize>,
}

fn default_separable_eps() -> f64 {
    1e-6
}
fn default_degree() -> usize {
    3
}

impl SeparableSpec {
    pub fn bounding_box(&self) -> Result<BoxDomain> {
        let (x, y) = (self.x.to_domain()?, self.y.to_domain()?);
        enclose(&[x.lo(), x.hi(), y.lo(), y.hi()])
    }
}

/// A study or solve description. Exactly one of the sections is used by
/// each command; `medium` applies to the studies (`σ_t ≡ 1` if absent).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    #[serde(default)]
    pub medium: Option<MediumSpec>,
    #[serde(default)]
    pub correlation: Option<CorrelationSpec>,
    #[serde(default)]
    pub rank_growth: Option<RankGrowthSpec>,
    #[serde(default)]
    pub pca_bound: Option<PcaSpec>,
    #[serde(default)]
    pub separable: Option<SeparableSpec>,
    #[serde(default)]
    pub solve: Option<SolveSpec>,
}

impl RunFile {
    /// Parses TOML text; syntax and schema errors carry line and column.
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(describe_toml_error(text, &e)))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Medium for a study, defaulting to `σ_t ≡ 1` over the given box.
    pub fn study_medium(&self, bounding: BoxDomain, base_dir: &Path) -> Result<Medium> {
        let spec = self.medium.clone().unwrap_or_else(|| MediumSpec::constant(1.0));
        spec.build(Some(bounding), base_dir)
    }
}

fn describe_toml_error(text: &str, e: &toml::de::Error) -> String {
    let msg = e.message().to_string();
    match e.span() {
        Some(span) => {
            let (line, col) = line_col(text, span.start);
            format!("line {line}, column {col}: {msg}")
        }
        None => msg,
    }
}

/// 1-based line and column of a byte offset.
pub fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(before.chars().count(), |i| before[i + 1..].chars().count()) + 1;
    (line, col)
}

fn enclose(points: &[Point]) -> Result<BoxDomain> {
    let d = points[0].dim().value();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for p in points {
        if p.dim().value() != d {
            return Err(Error::Config("study geometry mixes dimensions".into()));
        }
        for k in 0..d {
            lo[k] = lo[k].min(p.coords()[k]);
            hi[k] = hi[k].max(p.coords()[k]);
        }
    }
    BoxDomain::new(Point::from_slice(&lo)?, Point::from_slice(&hi)?)
}
