//! Measurement outcome samplers: per-copy homodyne outcomes and two-copy
//! beam-splitter (x, p) pairs.
//!
//! Randomness comes from ChaCha8 substreams keyed by SHA-256(seed, label)
//! with the chunk index as stream id, so results never depend on how many
//! workers consumed the chunks.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fock_oracle;
use crate::phase_space::{self, Axis, Field2D, GridSpec, Table};
use crate::states::{ReflectionSymmetry, StateModel};

/// Samples generated per RNG substream.
pub const CHUNK: usize = 1 << 16;
const MAX_NEGATIVE_MASS: f64 = 1e-6;

/// A keyed family of independent random streams.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedStream {
    seed: u64,
    label: String,
}

impl SeedStream {
    pub fn new(seed: u64, label: impl Into<String>) -> Self {
        SeedStream { seed, label: label.into() }
    }

    pub fn child(&self, part: impl fmt::Display) -> Self {
        SeedStream { seed: self.seed, label: format!("{}/{}", self.label, part) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn rng(&self, index: u64) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(self.label.as_bytes());
        let key: [u8; 32] = h.finalize().into();
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(index);
        rng
    }
}

/// Inverse-CDF sampler over piecewise-constant cells centred on grid nodes,
/// with a guide table for O(1) expected lookups.
#[derive(Clone, Debug)]
pub struct Tabulated1D {
    lower: f64,
    step: f64,
    cdf: Vec<f64>,
    guide: Vec<u32>,
}

impl Tabulated1D {
    pub fn from_weights(lower: f64, step: f64, weights: &[f64]) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptySamples);
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::NonFinite("tabulated weights".into()));
        }
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in weights {
            acc += w.max(0.0) / total;
            cdf.push(acc);
        }
        let last = cdf.len() - 1;
        cdf[last] = 1.0;
        let n = cdf.len();
        let mut guide = Vec::with_capacity(n);
        let mut i = 0usize;
        for j in 0..n {
            let target = j as f64 / n as f64;
            while i < last && cdf[i] <= target {
                i += 1;
            }
            guide.push(i as u32);
        }
        Ok(Tabulated1D { lower, step, cdf, guide })
    }

    /// From a density table on a 1D grid; node i is the centre of its cell.
    pub fn from_table(table: &Table) -> Result<Self> {
        if table.grid.rank() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: table.grid.rank() });
        }
        let mut t = table.clone();
        t.clip_and_normalize(MAX_NEGATIVE_MASS)?;
        let a = t.grid.axes[0];
        Tabulated1D::from_weights(a.lower() - 0.5 * a.step(), a.step(), &t.values)
    }

    #[inline]
    fn locate(&self, u: f64) -> (usize, f64) {
        let n = self.cdf.len();
        let mut i = self.guide[((u * n as f64) as usize).min(n - 1)] as usize;
        while self.cdf[i] < u && i + 1 < n {
            i += 1;
        }
        let prev = if i == 0 { 0.0 } else { self.cdf[i - 1] };
        let width = self.cdf[i] - prev;
        let frac = if width > 0.0 { ((u - prev) / width).clamp(0.0, 1.0) } else { 0.5 };
        (i, frac)
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let (i, frac) = self.locate(u);
        self.lower + (i as f64 + frac) * self.step
    }
}

/// Two-axis sampler: x from the marginal, then p from the conditional row.
#[derive(Clone, Debug)]
pub struct Tabulated2D {
    rows: Tabulated1D,
    cols: Vec<Tabulated1D>,
}

impl Tabulated2D {
    /// From a real density on a two-axis grid (row-major, x axis slowest).
    pub fn from_table(table: &Table) -> Result<Self> {
        if table.grid.rank() != 2 {
            return Err(Error::DimensionMismatch { expected: 2, got: table.grid.rank() });
        }
        let mut t = table.clone();
        t.clip_and_normalize(MAX_NEGATIVE_MASS)?;
        let (ax, ap) = (t.grid.axes[0], t.grid.axes[1]);
        let ny = ap.points;
        let marginal: Vec<f64> = t.values.chunks(ny).map(|r| r.iter().sum()).collect();
        let rows = Tabulated1D::from_weights(ax.lower() - 0.5 * ax.step(), ax.step(), &marginal)?;
        let cols = t
            .values
            .chunks(ny)
            .map(|r| {
                if r.iter().sum::<f64>() > 0.0 {
                    Tabulated1D::from_weights(ap.lower() - 0.5 * ap.step(), ap.step(), r)
                } else {
                    // never selected: the marginal weight is zero
                    Tabulated1D::from_weights(ap.lower() - 0.5 * ap.step(), ap.step(), &[1.0])
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Tabulated2D { rows, cols })
    }

    pub fn from_field(field: &Field2D) -> Result<Self> {
        Tabulated2D::from_table(&field.real_table())
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let u: f64 = rng.random();
        let (i, frac) = self.rows.locate(u);
        let x = self.rows.lower + (i as f64 + frac) * self.rows.step;
        (x, self.cols[i].sample(rng))
    }
}

/// Chooses a mixture branch by weight.
#[derive(Clone, Debug)]
struct Categorical {
    cdf: Vec<f64>,
}

impl Categorical {
    fn new(weights: &[f64]) -> Self {
        let total: f64 = weights.iter().sum();
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = weights
            .iter()
            .map(|w| {
                acc += w / total;
                acc
            })
            .collect();
        if let Some(last) = cdf.last_mut() {
            *last = 1.0;
        }
        Categorical { cdf }
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if self.cdf.len() == 1 {
            return 0;
        }
        let u: f64 = rng.random();
        self.cdf.iter().position(|&c| u < c).unwrap_or(self.cdf.len() - 1)
    }
}

/// Lower-triangular Cholesky factor of a small symmetric positive matrix.
fn cholesky(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    cov.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Validation("covariance not positive definite".into()))
}

#[inline]
fn gaussian_vector<R: Rng + ?Sized>(l: &DMatrix<f64>, rng: &mut R, z: &mut [f64], out: &mut [f64]) {
    let n = z.len();
    for v in z.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    for i in 0..n {
        let mut s = 0.0;
        for j in 0..=i {
            s += l[(i, j)] * z[j];
        }
        out[i] = s;
    }
}

/// Zero-mean Gaussian branches (weight, 2k×2k covariance) of a Gaussian,
/// a mixture of Gaussians or a product of such.
pub fn gaussian_components(state: &StateModel) -> Option<Vec<(f64, DMatrix<f64>)>> {
    if let Some(cov) = state.covariance() {
        return Some(vec![(1.0, cov.clone())]);
    }
    if let Some(parts) = state.mixture_components() {
        let mut out = Vec::new();
        for (w, s) in parts {
            for (w2, c) in gaussian_components(s)? {
                out.push((w * w2, c));
            }
        }
        return Some(out);
    }
    if let Some(factors) = state.product_factors() {
        let mut acc: Vec<(f64, DMatrix<f64>)> = vec![(1.0, DMatrix::zeros(0, 0))];
        for f in factors {
            let parts = gaussian_components(f)?;
            let mut next = Vec::with_capacity(acc.len() * parts.len());
            for (w1, c1) in &acc {
                for (w2, c2) in &parts {
                    let n1 = c1.nrows();
                    let n2 = c2.nrows();
                    let mut m = DMatrix::zeros(n1 + n2, n1 + n2);
                    m.view_mut((0, 0), (n1, n1)).copy_from(c1);
                    m.view_mut((n1, n1), (n2, n2)).copy_from(c2);
                    next.push((w1 * w2, m));
                }
            }
            acc = next;
        }
        return Some(acc);
    }
    None
}

/// Coordinate extent outside which quadrature densities are negligible.
fn quadrature_extent(state: &StateModel) -> f64 {
    if let Some(parts) = gaussian_components(state) {
        let max_var = parts
            .iter()
            .map(|(_, c)| nalgebra::SymmetricEigen::new(c.clone()).eigenvalues.max())
            .fold(0.0, f64::max);
        return 9.0 * max_var.sqrt();
    }
    if let Some(parts) = state.mixture_components() {
        return parts.iter().map(|(_, s)| quadrature_extent(s)).fold(0.0, f64::max);
    }
    if let Some(f) = state.product_factors() {
        return f.iter().map(quadrature_extent).fold(0.0, f64::max);
    }
    use crate::states::StateSpec;
    let levels = match state.spec() {
        StateSpec::Fock { n } => *n as f64,
        StateSpec::Cat { amplitude, .. } => amplitude[0].hypot(amplitude[1]).powi(2) + 6.0,
        StateSpec::Binomial { coefficients } => coefficients.len() as f64,
        StateSpec::Gkp { truncation_dim, .. } => *truncation_dim as f64,
        StateSpec::FockMatrix { dim, .. } => *dim as f64,
        _ => 10.0,
    };
    (2.0 * levels + 1.0).sqrt() + 7.0
}

/// Homodyne sampler for fixed per-mode phases.
#[derive(Clone, Debug)]
pub struct HomodyneSampler {
    modes: usize,
    kind: HomodyneKind,
}

#[derive(Clone, Debug)]
enum HomodyneKind {
    /// Cholesky factors of quadrature covariances per branch.
    Gaussian { branches: Categorical, factors: Vec<DMatrix<f64>> },
    Mixture { branches: Categorical, parts: Vec<HomodyneSampler> },
    Product(Vec<HomodyneSampler>),
    Table1(Tabulated1D),
    Table2(Tabulated2D),
}

impl HomodyneSampler {
    pub fn new(state: &StateModel, phases: &[f64]) -> Result<Self> {
        let k = state.modes();
        if phases.len() != k {
            return Err(Error::DimensionMismatch { expected: k, got: phases.len() });
        }
        if let Some(parts) = gaussian_components(state) {
            let mut a = DMatrix::<f64>::zeros(k, 2 * k);
            for (j, th) in phases.iter().enumerate() {
                a[(j, 2 * j)] = th.cos();
                a[(j, 2 * j + 1)] = th.sin();
            }
            let factors = parts
                .iter()
                .map(|(_, c)| cholesky(&(&a * c * a.transpose())))
                .collect::<Result<Vec<_>>>()?;
            let weights: Vec<f64> = parts.iter().map(|(w, _)| *w).collect();
            return Ok(HomodyneSampler { modes: k, kind: HomodyneKind::Gaussian { branches: Categorical::new(&weights), factors } });
        }
        if let Some(parts) = state.mixture_components() {
            let weights: Vec<f64> = parts.iter().map(|(w, _)| *w).collect();
            let samplers = parts.iter().map(|(_, s)| HomodyneSampler::new(s, phases)).collect::<Result<Vec<_>>>()?;
            return Ok(HomodyneSampler { modes: k, kind: HomodyneKind::Mixture { branches: Categorical::new(&weights), parts: samplers } });
        }
        if let Some(factors) = state.product_factors() {
            let mut offset = 0;
            let mut parts = Vec::new();
            for f in factors {
                parts.push(HomodyneSampler::new(f, &phases[offset..offset + f.modes()])?);
                offset += f.modes();
            }
            return Ok(HomodyneSampler { modes: k, kind: HomodyneKind::Product(parts) });
        }
        let extent = quadrature_extent(state);
        match k {
            1 => {
                let grid = GridSpec::line(extent, 8192)?;
                let table = state.quadrature_pdf(phases, &grid)?;
                Ok(HomodyneSampler { modes: 1, kind: HomodyneKind::Table1(Tabulated1D::from_table(&table)?) })
            }
            2 => {
                let grid = GridSpec::square(extent, 512)?;
                let table = state.quadrature_pdf(phases, &grid)?;
                Ok(HomodyneSampler { modes: 2, kind: HomodyneKind::Table2(Tabulated2D::from_table(&table)?) })
            }
            _ => Err(Error::Unsupported(format!("homodyne sampling of an entangled {k}-mode {} state", state.family()))),
        }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Writes one outcome per mode into `out`.
    #[inline]
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match &self.kind {
            HomodyneKind::Gaussian { branches, factors } => {
                let l = &factors[branches.sample(rng)];
                let mut z = [0.0f64; 8];
                if out.len() <= 8 {
                    gaussian_vector(l, rng, &mut z[..out.len()], out);
                } else {
                    let mut zv = vec![0.0; out.len()];
                    gaussian_vector(l, rng, &mut zv, out);
                }
            }
            HomodyneKind::Mixture { branches, parts } => parts[branches.sample(rng)].sample_into(rng, out),
            HomodyneKind::Product(parts) => {
                let mut offset = 0;
                for p in parts {
                    p.sample_into(rng, &mut out[offset..offset + p.modes]);
                    offset += p.modes;
                }
            }
            HomodyneKind::Table1(t) => out[0] = t.sample(rng),
            HomodyneKind::Table2(t) => {
                let (a, b) = t.sample(rng);
                out[0] = a;
                out[1] = b;
            }
        }
    }

    /// Single-mode convenience.
    #[inline]
    pub fn sample1<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut out = [0.0];
        self.sample_into(rng, &mut out);
        out[0]
    }
}

/// `n` homodyne outcomes at the given phases, row-major (n × k).
pub fn homodyne_sample(state: &StateModel, phases: &[f64], n: usize, stream: &SeedStream) -> Result<Vec<f64>> {
    let sampler = HomodyneSampler::new(state, phases)?;
    let k = sampler.modes();
    let mut out = vec![0.0; n * k];
    out.par_chunks_mut(CHUNK * k).enumerate().for_each(|(ci, chunk)| {
        let mut rng = stream.rng(ci as u64);
        for row in chunk.chunks_mut(k) {
            sampler.sample_into(&mut rng, row);
        }
    });
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SamplerBackend {
    GaussianAnalytic,
    FftCharacteristic {
        #[serde(default = "default_fft_half_width")]
        half_width: f64,
        #[serde(default = "default_fft_points")]
        points: usize,
    },
    FockExact {
        #[serde(default = "default_joint_dim")]
        dim: usize,
        #[serde(default = "default_fft_half_width")]
        half_width: f64,
        #[serde(default = "default_fock_points")]
        points: usize,
    },
}

fn default_fft_half_width() -> f64 {
    phase_space::DEFAULT_HALF_WIDTH
}

fn default_fft_points() -> usize {
    phase_space::DEFAULT_POINTS
}

fn default_fock_points() -> usize {
    256
}

fn default_joint_dim() -> usize {
    fock_oracle::DEFAULT_JOINT_DIM
}

impl SamplerBackend {
    pub fn fft() -> Self {
        SamplerBackend::FftCharacteristic { half_width: default_fft_half_width(), points: default_fft_points() }
    }

    pub fn fock() -> Self {
        SamplerBackend::FockExact { dim: default_joint_dim(), half_width: default_fft_half_width(), points: default_fock_points() }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            SamplerBackend::GaussianAnalytic => "gaussian-analytic",
            SamplerBackend::FftCharacteristic { .. } => "fft-characteristic",
            SamplerBackend::FockExact { .. } => "fock-exact",
        }
    }

    /// Gaussian families get the exact sampler, everything else the FFT one.
    pub fn auto(state: &StateModel) -> Self {
        if gaussian_components(state).is_some() {
            SamplerBackend::GaussianAnalytic
        } else {
            SamplerBackend::fft()
        }
    }
}

impl FromStr for SamplerBackend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian-analytic" => Ok(SamplerBackend::GaussianAnalytic),
            "fft-characteristic" => Ok(SamplerBackend::fft()),
            "fock-exact" => Ok(SamplerBackend::fock()),
            other => Err(Error::invalid("backend", format!("unknown backend `{other}`"))),
        }
    }
}

impl fmt::Display for SamplerBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Exact joint density of one (x, p) pair for a single-mode state after the
/// two-copy circuit, by inverting φ(s, t) = C(α) C(ᾱU), α = (s + it)/2.
pub fn pair_density_fft(state: &StateModel, symmetry: &ReflectionSymmetry, half_width: f64, points: usize) -> Result<Field2D> {
    if state.modes() != 1 {
        return Err(Error::Unsupported("FFT pair density for multimode states".into()));
    }
    let axis = Axis::fft(0.0, half_width, points)?;
    let k = axis.reciprocal();
    let grid = GridSpec::new(vec![k, k])?;
    let phi = Field2D::from_fn(grid, |s, t| {
        let alpha = Complex64::new(s, t) * 0.5;
        let reflected = symmetry.reflect(&crate::states::PhasePoint::single(alpha)).components()[0];
        state.characteristic1(alpha) * state.characteristic1(reflected)
    })?;
    phase_space::wigner_from_characteristic(&phi)
}

/// Fock-exact pair density on a square grid.
pub fn pair_density_fock(state: &StateModel, symmetry: &ReflectionSymmetry, dim: usize, half_width: f64, points: usize) -> Result<Field2D> {
    if state.modes() != 1 {
        return Err(Error::Unsupported("Fock pair density for multimode states".into()));
    }
    let u = symmetry.unitary()[(0, 0)];
    let rho = state.to_fock(dim, 1e-6)?;
    let grid = GridSpec::square(half_width, points)?;
    fock_oracle::joint_bs_pdf(&rho, u.arg(), &grid)
}

#[derive(Clone, Debug)]
enum PairGroup {
    /// Both copies drawn from Wigner Gaussians; `rot` maps the port-1 copy.
    Gaussian {
        branches: Categorical,
        factors: Vec<DMatrix<f64>>,
        rot: DMatrix<f64>,
        modes: usize,
    },
    Table(Tabulated2D),
}

/// Sampler of (x_j, p_j) outcome pairs from two copies per mode pair.
#[derive(Clone, Debug)]
pub struct PairSampler {
    modes: usize,
    groups: Vec<PairGroup>,
    backend: SamplerBackend,
    rotation: ReflectionSymmetry,
    state_hash: String,
}

/// Real 2k×2k map applied to a Wigner sample so its characteristic becomes C(βU).
fn rotation_map(u: &DMatrix<Complex64>) -> DMatrix<f64> {
    let k = u.nrows();
    let mut m = DMatrix::zeros(2 * k, 2 * k);
    for i in 0..k {
        for j in 0..k {
            let (x, y) = (u[(i, j)].re, u[(i, j)].im);
            // x'_i = Σ_j X_ij x_j + Y_ij p_j,  p'_i = Σ_j −Y_ij x_j + X_ij p_j
            m[(2 * i, 2 * j)] = x;
            m[(2 * i, 2 * j + 1)] = y;
            m[(2 * i + 1, 2 * j)] = -y;
            m[(2 * i + 1, 2 * j + 1)] = x;
        }
    }
    m
}

impl PairSampler {
    pub fn new(state: &StateModel, rotation: &ReflectionSymmetry, backend: &SamplerBackend) -> Result<Self> {
        if rotation.modes() != state.modes() {
            return Err(Error::DimensionMismatch { expected: state.modes(), got: rotation.modes() });
        }
        let groups = Self::build_groups(state, rotation.unitary(), backend)?;
        Ok(PairSampler {
            modes: state.modes(),
            groups,
            backend: backend.clone(),
            rotation: rotation.clone(),
            state_hash: state.hash(),
        })
    }

    fn build_groups(state: &StateModel, u: &DMatrix<Complex64>, backend: &SamplerBackend) -> Result<Vec<PairGroup>> {
        let k = state.modes();
        if let SamplerBackend::GaussianAnalytic = backend {
            let parts = gaussian_components(state).ok_or_else(|| {
                Error::Unsupported(format!("gaussian-analytic backend for a {} state", state.family()))
            })?;
            let weights: Vec<f64> = parts.iter().map(|(w, _)| *w).collect();
            let factors = parts.iter().map(|(_, c)| cholesky(c)).collect::<Result<Vec<_>>>()?;
            return Ok(vec![PairGroup::Gaussian { branches: Categorical::new(&weights), factors, rot: rotation_map(u), modes: k }]);
        }
        if let Some(factors) = state.product_factors() {
            let mut groups = Vec::new();
            let mut offset = 0;
            for f in factors {
                let m = f.modes();
                for i in 0..k {
                    for j in 0..k {
                        let inside_i = i >= offset && i < offset + m;
                        let inside_j = j >= offset && j < offset + m;
                        if inside_i != inside_j && u[(i, j)].norm() > 1e-14 {
                            return Err(Error::Unsupported("rotation mixes product factors".into()));
                        }
                    }
                }
                let block = u.view((offset, offset), (m, m)).into_owned();
                groups.extend(Self::build_groups(f, &block, backend)?);
                offset += m;
            }
            return Ok(groups);
        }
        if k != 1 {
            return Err(Error::Unsupported(format!("{} backend for an entangled {k}-mode state", backend.tag())));
        }
        let sym = ReflectionSymmetry::new(u.clone())?;
        let field = match backend {
            SamplerBackend::FftCharacteristic { half_width, points } => pair_density_fft(state, &sym, *half_width, *points)?,
            SamplerBackend::FockExact { dim, half_width, points } => pair_density_fock(state, &sym, *dim, *half_width, *points)?,
            SamplerBackend::GaussianAnalytic => unreachable!(),
        };
        Ok(vec![PairGroup::Table(Tabulated2D::from_field(&field)?)])
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn backend(&self) -> &SamplerBackend {
        &self.backend
    }

    pub fn rotation(&self) -> &ReflectionSymmetry {
        &self.rotation
    }

    pub fn state_hash(&self) -> &str {
        &self.state_hash
    }

    /// Writes one pair per mode: xs[j], ps[j].
    #[inline]
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, xs: &mut [f64], ps: &mut [f64]) {
        let mut offset = 0;
        for g in &self.groups {
            match g {
                PairGroup::Table(t) => {
                    let (x, p) = t.sample(rng);
                    xs[offset] = x;
                    ps[offset] = p;
                    offset += 1;
                }
                PairGroup::Gaussian { branches, factors, rot, modes } => {
                    let n = 2 * modes;
                    let mut z = [0.0f64; 8];
                    let mut w1 = [0.0f64; 8];
                    let mut w2 = [0.0f64; 8];
                    let mut w1r = [0.0f64; 8];
                    if n > 8 {
                        unimplemented!("Gaussian pair sampling above four modes");
                    }
                    gaussian_vector(&factors[branches.sample(rng)], rng, &mut z[..n], &mut w1[..n]);
                    gaussian_vector(&factors[branches.sample(rng)], rng, &mut z[..n], &mut w2[..n]);
                    for i in 0..n {
                        w1r[i] = (0..n).map(|j| rot[(i, j)] * w1[j]).sum();
                    }
                    for j in 0..*modes {
                        xs[offset + j] = (w1r[2 * j] + w2[2 * j]) / SQRT_2;
                        ps[offset + j] = (-w1r[2 * j + 1] + w2[2 * j + 1]) / SQRT_2;
                    }
                    offset += modes;
                }
            }
        }
    }
}

/// Materialized pair outcomes (row-major n × k).
#[derive(Clone, Debug, PartialEq)]
pub struct PairSampleBatch {
    pub xs: Vec<f64>,
    pub ps: Vec<f64>,
    pub modes: usize,
    pub copies_consumed: u64,
    pub state_hash: String,
    pub backend: String,
    pub rotation: Vec<Complex64>,
    pub seed: u64,
}

impl PairSampleBatch {
    pub fn len(&self) -> usize {
        self.xs.len() / self.modes.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.xs.is_empty()
    }

    /// CSV dump with provenance comment lines.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "# state_hash={} backend={} seed={}", self.state_hash, self.backend, self.seed)?;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["pair_index".to_string()];
        for j in 0..self.modes {
            if self.modes == 1 {
                header.push("x".into());
                header.push("p".into());
            } else {
                header.push(format!("x_{}", j + 1));
                header.push(format!("p_{}", j + 1));
            }
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row = vec![i.to_string()];
            for j in 0..self.modes {
                row.push(format!("{:e}", self.xs[i * self.modes + j]));
                row.push(format!("{:e}", self.ps[i * self.modes + j]));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Draws `n_pairs` pairs; the rotation applied to the port-1 copy is `rotation`.
pub fn pair_sample(
    state: &StateModel,
    rotation: &ReflectionSymmetry,
    n_pairs: usize,
    backend: &SamplerBackend,
    stream: &SeedStream,
) -> Result<PairSampleBatch> {
    let sampler = PairSampler::new(state, rotation, backend)?;
    let k = sampler.modes();
    let mut xs = vec![0.0; n_pairs * k];
    let mut ps = vec![0.0; n_pairs * k];
    xs.par_chunks_mut(CHUNK * k)
        .zip(ps.par_chunks_mut(CHUNK * k))
        .enumerate()
        .for_each(|(ci, (cx, cp))| {
            let mut rng = stream.rng(ci as u64);
            for (x, p) in cx.chunks_mut(k).zip(cp.chunks_mut(k)) {
                sampler.sample_into(&mut rng, x, p);
            }
        });
    Ok(PairSampleBatch {
        xs,
        ps,
        modes: k,
        copies_consumed: 2 * n_pairs as u64,
        state_hash: sampler.state_hash.clone(),
        backend: backend.tag().to_string(),
        rotation: rotation.unitary().iter().copied().collect(),
        seed: stream.seed(),
    })
}

/// Mean of exp(−2i Σ_j (Re α_j x_j + Im α_j p_j)) over a batch.
pub fn fourier_statistic(batch: &PairSampleBatch, alpha: &[Complex64]) -> Result<Complex64> {
    if batch.is_empty() {
        return Err(Error::EmptySamples);
    }
    if alpha.len() != batch.modes {
        return Err(Error::DimensionMismatch { expected: batch.modes, got: alpha.len() });
    }
    let k = batch.modes;
    let (mut re, mut im) = (0.0, 0.0);
    for (x, p) in batch.xs.chunks(k).zip(batch.ps.chunks(k)) {
        let phase: f64 = (0..k).map(|j| alpha[j].re * x[j] + alpha[j].im * p[j]).sum::<f64>() * 2.0;
        let (s, c) = phase.sin_cos();
        re += c;
        im -= s;
    }
    let n = batch.len() as f64;
    Ok(Complex64::new(re / n, im / n))
}

/// Kolmogorov–Smirnov distance of samples to a reference CDF.
pub fn ks_distance(samples: &mut [f64], cdf: impl Fn(f64) -> f64) -> f64 {
    samples.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = samples.len() as f64;
    samples
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

#[allow(dead_code)]
fn unit_normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / SQRT_2))
}

/// Abramowitz–Stegun 7.1.26 is too coarse for KS checks; use the series/continued
/// fraction split instead.
pub(crate) fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x < 2.5 {
        // Maclaurin series
        let mut term = x;
        let mut sum = x;
        let x2 = x * x;
        for n in 1..200 {
            term *= -x2 / n as f64;
            let add = term / (2 * n + 1) as f64;
            sum += add;
            if add.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        2.0 / PI.sqrt() * sum
    } else {
        // continued fraction for erfc
        let mut f = 0.0;
        for k in (1..60).rev() {
            f = (k as f64 / 2.0) / (x + f);
        }
        1.0 - (-x * x).exp() / PI.sqrt() / (x + f)
    }
}
