//! Estimators built on two-copy beam-splitter statistics: products,
//! squares, sign resolution, point-value learning and observable
//! expectations, together with the sample-size planners and copy ledger.

use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{HomodyneSampler, PairSampler, SamplerBackend, SeedStream, CHUNK};
use crate::states::{PhasePoint, ReflectionSymmetry, StateModel};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const LANES: usize = 8;
/// Longest run evaluated by the phase recurrence before re-seeding with sincos.
const MAX_RUN: usize = 256;

fn check_unit_interval(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must lie in (0, 1), got {v}")))
    }
}

/// Pair rounds so that every one of `m_points` product estimates is within
/// ε with joint probability at least 1 − δ.
pub fn plan_product_samples(epsilon: f64, delta: f64, m_points: usize) -> Result<u64> {
    check_unit_interval("epsilon", epsilon)?;
    check_unit_interval("delta", delta)?;
    if m_points == 0 {
        return Err(Error::invalid("m_points", "must be positive"));
    }
    let n = (8.0 / (epsilon * epsilon) * (4.0 * m_points as f64 / delta).ln()).ceil();
    Ok((n as u64).max(1))
}

/// Copies per sign bank: ⌈(144/ε²) ln(4M/δ)⌉.
pub fn plan_sign_samples(epsilon: f64, delta: f64, m_points: usize) -> Result<u64> {
    check_unit_interval("epsilon", epsilon)?;
    check_unit_interval("delta", delta)?;
    if m_points == 0 {
        return Err(Error::invalid("m_points", "must be positive"));
    }
    let n = (144.0 / (epsilon * epsilon) * (4.0 * m_points as f64 / delta).ln()).ceil();
    Ok((n as u64).max(1))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnPlan {
    pub epsilon: f64,
    pub delta: f64,
    pub m_points: usize,
    /// Pair rounds for the square estimates.
    pub n1_pairs: u64,
    /// Copies per sign bank.
    pub n2_copies: u64,
}

impl LearnPlan {
    pub fn new(epsilon: f64, delta: f64, m_points: usize) -> Result<Self> {
        Ok(LearnPlan {
            epsilon,
            delta,
            m_points,
            n1_pairs: plan_product_samples(epsilon * epsilon / 18.0, delta / 2.0, m_points)?,
            n2_copies: plan_sign_samples(epsilon, delta, m_points)?,
        })
    }

    /// 2·N₁ + 2·N₂.
    pub fn quantum_copies(&self) -> u64 {
        2 * self.n1_pairs + 2 * self.n2_copies
    }

    /// Margin the sign statistic must clear.
    pub fn sign_margin(&self) -> f64 {
        SQRT_2 * self.epsilon / 12.0
    }

    /// Union-bound failure budget M·exp(−N₂ε′²/4) for one sign bank.
    pub fn union_bound_budget(&self) -> f64 {
        let e = self.sign_margin();
        self.m_points as f64 * (-(self.n2_copies as f64) * e * e / 4.0).exp()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    Product,
    Square,
    Point,
    Observable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    Zero,
    RealSign,
    ImagSign,
}

impl Branch {
    pub fn tag(self) -> &'static str {
        match self {
            Branch::Zero => "zero",
            Branch::RealSign => "real-sign",
            Branch::ImagSign => "imag-sign",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Component {
    Real,
    Imag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignOutcome {
    pub value: i8,
    pub component: Component,
    pub alpha: PhasePoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateRecord {
    pub alpha: PhasePoint,
    pub value: Complex64,
    pub target_kind: TargetKind,
    pub epsilon: f64,
    pub delta: f64,
    pub copies: u64,
    pub branch: Option<Branch>,
    /// Intermediate square estimate for point records.
    pub square: Option<Complex64>,
}

/// Quantum-accounted copies next to the classical draws actually simulated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CopyLedger {
    pub product_copies: u64,
    pub sign_copies_real: u64,
    pub sign_copies_imag: u64,
    pub simulation_draws: u64,
}

impl CopyLedger {
    pub fn quantum_total(&self) -> u64 {
        self.product_copies + self.sign_copies_real + self.sign_copies_imag
    }

    pub fn merge(&self, other: &CopyLedger) -> CopyLedger {
        CopyLedger {
            product_copies: self.product_copies + other.product_copies,
            sign_copies_real: self.sign_copies_real + other.sign_copies_real,
            sign_copies_imag: self.sign_copies_imag + other.sign_copies_imag,
            simulation_draws: self.simulation_draws + other.simulation_draws,
        }
    }
}

/// √|z|·e^{iθ/2} with θ = arg z taken in [−π, π).
pub fn principal_root(z: Complex64) -> Complex64 {
    let mut theta = z.arg();
    if theta >= PI {
        theta = -PI;
    }
    Complex64::from_polar(z.norm().sqrt(), theta / 2.0)
}

/// Case analysis on a square estimate at target accuracy ε.
pub fn select_branch(square: Complex64, epsilon: f64) -> Branch {
    if square.norm() <= 4.0 * epsilon * epsilon / 9.0 {
        Branch::Zero
    } else if principal_root(square).re.abs() >= SQRT_2 * epsilon / 3.0 {
        Branch::RealSign
    } else {
        Branch::ImagSign
    }
}

/// Picks ±c so the resolved component carries the measured sign.
pub fn resolve_point(square: Complex64, branch: Branch, sign: i8) -> Complex64 {
    let c = principal_root(square);
    let s = f64::from(sign.signum());
    match branch {
        Branch::Zero => ZERO,
        Branch::RealSign => c * (s * c.re.signum()),
        Branch::ImagSign => c * (s * c.im.signum()),
    }
}

#[derive(Clone, Debug)]
struct Run {
    first: usize,
    len: usize,
    start: Vec<Complex64>,
    step: Vec<Complex64>,
}

/// Query points split into runs with a constant increment, so that the
/// Fourier statistic along a run costs one complex multiply per point.
#[derive(Clone, Debug)]
pub struct PointSet {
    modes: usize,
    points: Vec<PhasePoint>,
    runs: Vec<Run>,
}

impl PointSet {
    pub fn new(points: Vec<PhasePoint>) -> Result<Self> {
        let modes = points.first().ok_or_else(|| Error::invalid("points", "empty point set"))?.modes();
        if let Some(p) = points.iter().find(|p| p.modes() != modes) {
            return Err(Error::DimensionMismatch { expected: modes, got: p.modes() });
        }
        let mut runs = Vec::new();
        let mut i = 0;
        while i < points.len() {
            let start = points[i].components().to_vec();
            let mut len = 1;
            let mut step = vec![ZERO; modes];
            if i + 1 < points.len() {
                step = diff(&points[i + 1], &points[i]);
                len = 2;
                while i + len < points.len() && len < MAX_RUN {
                    let d = diff(&points[i + len], &points[i + len - 1]);
                    let scale = 1.0 + d.iter().chain(&step).map(|z| z.norm()).fold(0.0, f64::max);
                    if d.iter().zip(&step).any(|(a, b)| (a - b).norm() > 1e-12 * scale) {
                        break;
                    }
                    len += 1;
                }
            }
            runs.push(Run { first: i, len, start, step });
            i += len;
        }
        Ok(PointSet { modes, points, runs })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn points(&self) -> &[PhasePoint] {
        &self.points
    }

    /// Adds Σ_i exp(−2i Σ_j (Re α_j x_ij + Im α_j p_ij)) for every point into `acc`.
    pub fn accumulate(&self, xs: &[f64], ps: &[f64], acc: &mut [Complex64]) {
        let k = self.modes;
        let n = xs.len() / k;
        let mut lane_re = Vec::new();
        let mut lane_im = Vec::new();
        for run in &self.runs {
            lane_re.clear();
            lane_re.resize(run.len * LANES, 0.0);
            lane_im.clear();
            lane_im.resize(run.len * LANES, 0.0);
            let mut block = 0;
            while block < n {
                let mut zr = [0.0; LANES];
                let mut zi = [0.0; LANES];
                let mut wr = [1.0; LANES];
                let mut wi = [0.0; LANES];
                for l in 0..LANES {
                    let i = block + l;
                    if i >= n {
                        break;
                    }
                    let (mut phi, mut dphi) = (0.0, 0.0);
                    for j in 0..k {
                        let (x, p) = (xs[i * k + j], ps[i * k + j]);
                        phi += run.start[j].re * x + run.start[j].im * p;
                        dphi += run.step[j].re * x + run.step[j].im * p;
                    }
                    let (s, c) = (-2.0 * phi).sin_cos();
                    zr[l] = c;
                    zi[l] = s;
                    let (s, c) = (-2.0 * dphi).sin_cos();
                    wr[l] = c;
                    wi[l] = s;
                }
                advance(&mut lane_re, &mut lane_im, run.len, zr, zi, wr, wi);
                block += LANES;
            }
            for m in 0..run.len {
                let re: f64 = lane_re[m * LANES..(m + 1) * LANES].iter().sum();
                let im: f64 = lane_im[m * LANES..(m + 1) * LANES].iter().sum();
                acc[run.first + m] += Complex64::new(re, im);
            }
        }
    }
}

/// Adds z·w^m to lane accumulator m for m < len.
fn advance(re: &mut [f64], im: &mut [f64], len: usize, zr: [f64; LANES], zi: [f64; LANES], wr: [f64; LANES], wi: [f64; LANES]) {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("fma") {
            // SAFETY: the required CPU features were detected at runtime.
            unsafe { advance_avx2(re, im, len, zr, zi, wr, wi) };
            return;
        }
    }
    advance_generic(re, im, len, zr, zi, wr, wi)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2,fma")]
unsafe fn advance_avx2(re: &mut [f64], im: &mut [f64], len: usize, zr: [f64; LANES], zi: [f64; LANES], wr: [f64; LANES], wi: [f64; LANES]) {
    advance_generic(re, im, len, zr, zi, wr, wi)
}

#[inline(always)]
fn advance_generic(
    re: &mut [f64],
    im: &mut [f64],
    len: usize,
    mut zr: [f64; LANES],
    mut zi: [f64; LANES],
    wr: [f64; LANES],
    wi: [f64; LANES],
) {
    for (ar, ai) in re.chunks_exact_mut(LANES).zip(im.chunks_exact_mut(LANES)).take(len) {
        let ar: &mut [f64; LANES] = ar.try_into().expect("lane block");
        let ai: &mut [f64; LANES] = ai.try_into().expect("lane block");
        for l in 0..LANES {
            ar[l] += zr[l];
            ai[l] += zi[l];
        }
        let mut nr = [0.0; LANES];
        let mut ni = [0.0; LANES];
        for l in 0..LANES {
            nr[l] = zr[l] * wr[l] - zi[l] * wi[l];
            ni[l] = zr[l] * wi[l] + zi[l] * wr[l];
        }
        zr = nr;
        zi = ni;
    }
}

fn diff(a: &PhasePoint, b: &PhasePoint) -> Vec<Complex64> {
    a.components().iter().zip(b.components()).map(|(x, y)| x - y).collect()
}

/// Streams `n_pairs` pair samples chunk by chunk and returns the Fourier
/// statistic at every point. Chunks own their RNG substream, so the result
/// is independent of the worker count.
pub fn fourier_means(sampler: &PairSampler, points: &PointSet, n_pairs: u64, stream: &SeedStream) -> Result<Vec<Complex64>> {
    if n_pairs == 0 {
        return Err(Error::EmptySamples);
    }
    if points.modes() != sampler.modes() {
        return Err(Error::DimensionMismatch { expected: sampler.modes(), got: points.modes() });
    }
    let k = sampler.modes();
    let chunks = n_pairs.div_ceil(CHUNK as u64);
    let partial: Vec<Vec<Complex64>> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let count = (n_pairs - ci * CHUNK as u64).min(CHUNK as u64) as usize;
            let mut rng = stream.rng(ci);
            let mut xs = vec![0.0; count * k];
            let mut ps = vec![0.0; count * k];
            for (x, p) in xs.chunks_mut(k).zip(ps.chunks_mut(k)) {
                sampler.sample_into(&mut rng, x, p);
            }
            let mut acc = vec![ZERO; points.len()];
            points.accumulate(&xs, &ps, &mut acc);
            acc
        })
        .collect();
    let mut total = vec![ZERO; points.len()];
    for acc in partial {
        for (t, a) in total.iter_mut().zip(acc) {
            *t += a;
        }
    }
    let n = n_pairs as f64;
    Ok(total.into_iter().map(|z| z / n).collect())
}

/// Uses the given symmetry, else the state's declared one, and validates it.
pub fn resolve_symmetry(state: &StateModel, given: Option<&ReflectionSymmetry>) -> Result<ReflectionSymmetry> {
    let sym = match given {
        Some(s) => s.clone(),
        None => state.symmetry().ok_or(Error::MissingSymmetry)?,
    };
    sym.validate(state)?;
    Ok(sym)
}

/// Product estimates C(α)C(ᾱ) at many points from one pair batch.
pub fn estimate_product_points(
    state: &StateModel,
    points: &[PhasePoint],
    n_pairs: u64,
    backend: &SamplerBackend,
    stream: &SeedStream,
) -> Result<Vec<Complex64>> {
    let sampler = PairSampler::new(state, &ReflectionSymmetry::identity(state.modes()), backend)?;
    fourier_means(&sampler, &PointSet::new(points.to_vec())?, n_pairs, stream)
}

pub fn estimate_product(
    state: &StateModel,
    alpha: &PhasePoint,
    n_pairs: u64,
    backend: &SamplerBackend,
    stream: &SeedStream,
) -> Result<EstimateRecord> {
    let value = estimate_product_points(state, std::slice::from_ref(alpha), n_pairs, backend, stream)?[0];
    Ok(EstimateRecord {
        alpha: alpha.clone(),
        value,
        target_kind: TargetKind::Product,
        epsilon: f64::NAN,
        delta: f64::NAN,
        copies: 2 * n_pairs,
        branch: None,
        square: None,
    })
}

/// Square estimates C(α)² at many points; the port-1 copy is rotated by the symmetry.
pub fn estimate_square_points(
    state: &StateModel,
    symmetry: &ReflectionSymmetry,
    points: &[PhasePoint],
    n_pairs: u64,
    backend: &SamplerBackend,
    stream: &SeedStream,
) -> Result<Vec<Complex64>> {
    let sampler = PairSampler::new(state, symmetry, backend)?;
    fourier_means(&sampler, &PointSet::new(points.to_vec())?, n_pairs, stream)
}

pub fn estimate_square(
    state: &StateModel,
    symmetry: Option<&ReflectionSymmetry>,
    alpha: &PhasePoint,
    n_pairs: u64,
    backend: &SamplerBackend,
    stream: &SeedStream,
) -> Result<EstimateRecord> {
    let sym = resolve_symmetry(state, symmetry)?;
    let value = estimate_square_points(state, &sym, std::slice::from_ref(alpha), n_pairs, backend, stream)?[0];
    Ok(EstimateRecord {
        alpha: alpha.clone(),
        value,
        target_kind: TargetKind::Square,
        epsilon: f64::NAN,
        delta: f64::NAN,
        copies: 2 * n_pairs,
        branch: None,
        square: None,
    })
}

/// Empirical means of cos(√2 Σ|α_j|q_j) and sin(·) over homodyne draws at phases arg α_j.
pub fn sign_statistics(sampler: &HomodyneSampler, alpha: &PhasePoint, n_copies: u64, stream: &SeedStream) -> (f64, f64) {
    let k = alpha.modes();
    let mags: Vec<f64> = alpha.components().iter().map(|a| SQRT_2 * a.norm()).collect();
    let chunks = n_copies.div_ceil(CHUNK as u64);
    let partial: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let count = (n_copies - ci * CHUNK as u64).min(CHUNK as u64);
            let mut rng = stream.rng(ci);
            let mut q = vec![0.0; k];
            let (mut c, mut s) = (0.0, 0.0);
            for _ in 0..count {
                sampler.sample_into(&mut rng, &mut q);
                let arg: f64 = mags.iter().zip(&q).map(|(m, v)| m * v).sum();
                let (sn, cs) = arg.sin_cos();
                c += cs;
                s += sn;
            }
            (c, s)
        })
        .collect();
    let (c, s) = partial.into_iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let n = n_copies as f64;
    (c / n, s / n)
}

fn phases_of(alpha: &PhasePoint) -> Vec<f64> {
    alpha.components().iter().map(|a| a.arg()).collect()
}

/// +1 iff the cos-mean is positive (real) or the sin-mean is negative (imag); ties give −1.
pub fn sign_from_statistics(component: Component, cos_mean: f64, sin_mean: f64) -> i8 {
    match component {
        Component::Real if cos_mean > 0.0 => 1,
        Component::Imag if sin_mean < 0.0 => 1,
        _ => -1,
    }
}

pub fn sign_component(
    state: &StateModel,
    alpha: &PhasePoint,
    component: Component,
    n_copies: u64,
    stream: &SeedStream,
) -> Result<SignOutcome> {
    if n_copies == 0 {
        return Err(Error::invalid("n_copies", "must be at least 1"));
    }
    let sampler = HomodyneSampler::new(state, &phases_of(alpha))?;
    let (c, s) = sign_statistics(&sampler, alpha, n_copies, stream);
    Ok(SignOutcome { value: sign_from_statistics(component, c, s), component, alpha: alpha.clone() })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnOutcome {
    pub records: Vec<EstimateRecord>,
    pub ledger: CopyLedger,
    pub plan: LearnPlan,
    /// Analytic union-bound failure budget per sign bank.
    pub union_bound_budget: f64,
}

/// Sample sizes for `learn_points`; `None` uses the planner.
#[derive(Clone, Copy, Debug, Default)]
pub struct LearnOverrides {
    pub n1_pairs: Option<u64>,
    pub n2_copies: Option<u64>,
}

/// Point-value learning with branch resolution.
pub fn learn_points(
    state: &StateModel,
    symmetry: Option<&ReflectionSymmetry>,
    points: &[PhasePoint],
    epsilon: f64,
    delta: f64,
    backend: &SamplerBackend,
    stream: &SeedStream,
) -> Result<LearnOutcome> {
    learn_points_with(state, symmetry, points, epsilon, delta, backend, stream, LearnOverrides::default())
}

#[allow(clippy::too_many_arguments)]
pub fn learn_points_with(
    state: &StateModel,
    symmetry: Option<&ReflectionSymmetry>,
    points: &[PhasePoint],
    epsilon: f64,
    delta: f64,
    backend: &SamplerBackend,
    stream: &SeedStream,
    overrides: LearnOverrides,
) -> Result<LearnOutcome> {
    Learner::new(state, symmetry, backend)?.learn(points, epsilon, delta, stream, overrides)
}

/// Samplers for one state, reusable across repeated learning runs.
pub struct Learner {
    state: StateModel,
    pairs: PairSampler,
    homodyne: Mutex<HashMap<Vec<u64>, Arc<HomodyneSampler>>>,
}

impl Learner {
    pub fn new(state: &StateModel, symmetry: Option<&ReflectionSymmetry>, backend: &SamplerBackend) -> Result<Self> {
        let sym = resolve_symmetry(state, symmetry)?;
        Ok(Learner { state: state.clone(), pairs: PairSampler::new(state, &sym, backend)?, homodyne: Mutex::new(HashMap::new()) })
    }

    pub fn state(&self) -> &StateModel {
        &self.state
    }

    pub fn pair_sampler(&self) -> &PairSampler {
        &self.pairs
    }

    /// Homodyne sampler at the phases arg α_j, built once per phase setting.
    pub fn homodyne(&self, alpha: &PhasePoint) -> Result<Arc<HomodyneSampler>> {
        let phases = phases_of(alpha);
        let key: Vec<u64> = phases.iter().map(|v| v.to_bits()).collect();
        if let Some(s) = self.homodyne.lock().expect("sampler cache").get(&key) {
            return Ok(s.clone());
        }
        let s = Arc::new(HomodyneSampler::new(&self.state, &phases)?);
        self.homodyne.lock().expect("sampler cache").insert(key, s.clone());
        Ok(s)
    }

    pub fn learn(
        &self,
        points: &[PhasePoint],
        epsilon: f64,
        delta: f64,
        stream: &SeedStream,
        overrides: LearnOverrides,
    ) -> Result<LearnOutcome> {
        let mut plan = LearnPlan::new(epsilon, delta, points.len().max(1))?;
        if let Some(n) = overrides.n1_pairs {
            plan.n1_pairs = n.max(1);
        }
        if let Some(n) = overrides.n2_copies {
            plan.n2_copies = n.max(1);
        }
        let squares = fourier_means(&self.pairs, &PointSet::new(points.to_vec())?, plan.n1_pairs, &stream.child("square"))?;
        let samplers = points.iter().map(|p| self.homodyne(p)).collect::<Result<Vec<_>>>()?;

        let real_bank = stream.child("sign-real");
        let imag_bank = stream.child("sign-imag");
        let quantum = plan.quantum_copies();
        let records: Vec<EstimateRecord> = points
            .par_iter()
            .enumerate()
            .map(|(i, alpha)| {
                let (cr, sr) = sign_statistics(&samplers[i], alpha, plan.n2_copies, &real_bank.child(i));
                let (ci, si) = sign_statistics(&samplers[i], alpha, plan.n2_copies, &imag_bank.child(i));
                let branch = select_branch(squares[i], epsilon);
                let sign = match branch {
                    Branch::Zero => 1,
                    Branch::RealSign => sign_from_statistics(Component::Real, cr, sr),
                    Branch::ImagSign => sign_from_statistics(Component::Imag, ci, si),
                };
                EstimateRecord {
                    alpha: alpha.clone(),
                    value: resolve_point(squares[i], branch, sign),
                    target_kind: TargetKind::Point,
                    epsilon,
                    delta,
                    copies: quantum,
                    branch: Some(branch),
                    square: Some(squares[i]),
                }
            })
            .collect();
        let ledger = CopyLedger {
            product_copies: 2 * plan.n1_pairs,
            sign_copies_real: plan.n2_copies,
            sign_copies_imag: plan.n2_copies,
            simulation_draws: 2 * plan.n1_pairs + 2 * plan.n2_copies * points.len() as u64,
        };
        Ok(LearnOutcome { records, ledger, union_bound_budget: plan.union_bound_budget(), plan })
    }
}

/// Axis-aligned box in ℂᵏ: per mode, bounds on Re α and Im α.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseBox {
    pub re: Vec<[f64; 2]>,
    pub im: Vec<[f64; 2]>,
}

impl PhaseBox {
    pub fn square(modes: usize, half_width: f64) -> Self {
        PhaseBox { re: vec![[-half_width, half_width]; modes], im: vec![[-half_width, half_width]; modes] }
    }

    pub fn modes(&self) -> usize {
        self.re.len()
    }

    fn bounds(&self) -> Vec<[f64; 2]> {
        self.re.iter().zip(&self.im).flat_map(|(r, i)| [*r, *i]).collect()
    }

    pub fn volume(&self) -> f64 {
        self.bounds().iter().map(|b| b[1] - b[0]).product()
    }

    pub fn validate(&self) -> Result<()> {
        if self.re.len() != self.im.len() || self.re.is_empty() {
            return Err(Error::invalid("region", "re and im bounds must cover the same nonzero number of modes"));
        }
        if self.bounds().iter().any(|b| !(b[1] > b[0]) || !b[0].is_finite() || !b[1].is_finite()) {
            return Err(Error::invalid("region", "each interval needs finite lower < upper"));
        }
        Ok(())
    }

    pub fn contains(&self, alpha: &PhasePoint) -> bool {
        alpha.components().iter().enumerate().all(|(j, a)| {
            a.re >= self.re[j][0] && a.re <= self.re[j][1] && a.im >= self.im[j][0] && a.im <= self.im[j][1]
        })
    }

    /// n^{2k} points on a grid with cell-relative offset `shift` per dimension,
    /// with Re α₁ varying fastest.
    pub fn lattice(&self, n: usize, shift: &[f64]) -> Vec<PhasePoint> {
        let b = self.bounds();
        let d = b.len();
        let total = n.pow(d as u32);
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            let coords: Vec<f64> = (0..d)
                .map(|t| b[t][0] + (idx[t] as f64 + shift[t]) * (b[t][1] - b[t][0]) / n as f64)
                .collect();
            out.push(PhasePoint::from_coords(&coords));
            for i in idx.iter_mut() {
                *i += 1;
                if *i < n {
                    break;
                }
                *i = 0;
            }
        }
        out
    }
}

impl PhasePoint {
    /// From interleaved (Re α₁, Im α₁, Re α₂, …).
    pub fn from_coords(coords: &[f64]) -> PhasePoint {
        PhasePoint::new(coords.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect())
            .expect("coordinates describe at least one mode")
    }
}

/// Result of fixing the Fourier–Weyl constant on a reference pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    /// Per-mode constant c with tr(ρO) = c^k ∫ C_ρ(α) C_O(−α) d^{2k}α.
    pub c_norm: f64,
    pub integral: f64,
    pub trace: f64,
}

/// Midpoint-rule ∫ C_ρ(α) C_O(−α) d²α over a single-mode square box.
pub fn overlap_integral(rho: &StateModel, obs_cf: &(dyn Fn(&PhasePoint) -> Complex64 + Sync), half_width: f64, n: usize) -> Result<Complex64> {
    if rho.modes() != 1 {
        return Err(Error::Unsupported("overlap quadrature beyond one mode".into()));
    }
    let h = 2.0 * half_width / n as f64;
    let sum: Complex64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = -half_width + (i as f64 + 0.5) * h;
            (0..n)
                .map(|j| {
                    let y = -half_width + (j as f64 + 0.5) * h;
                    let a = PhasePoint::single(Complex64::new(x, y));
                    rho.characteristic1(a.components()[0]) * obs_cf(&a.neg())
                })
                .sum::<Complex64>()
        })
        .sum();
    Ok(sum * h * h)
}

/// Calibrates c_norm on the (vacuum, vacuum) pair against the Fock-space trace.
pub fn calibrate_c_norm() -> Result<Calibration> {
    let vac = StateModel::vacuum(1)?;
    let rho = vac.to_fock(crate::fock_oracle::DEFAULT_DIM, 1e-12)?;
    let trace = rho.expectation(rho.matrix())?.re;
    let obs = vac.clone();
    let integral = overlap_integral(&vac, &move |a: &PhasePoint| obs.characteristic1(a.components()[0]), 8.0, 800)?.re;
    Ok(Calibration { c_norm: trace / integral, integral, trace })
}

/// c^k ∫ over a square outer box minus `region` of C_ρ(α)C_O(−α), single mode.
pub fn tail_integral(
    rho: &StateModel,
    obs_cf: &(dyn Fn(&PhasePoint) -> Complex64 + Sync),
    region: &PhaseBox,
    c_norm: f64,
) -> Result<Complex64> {
    if region.modes() != 1 || rho.modes() != 1 {
        return Err(Error::Unsupported("tail quadrature beyond one mode".into()));
    }
    let reach = region.bounds().iter().map(|b| b[0].abs().max(b[1].abs())).fold(0.0, f64::max);
    let outer = 2.0 * reach + 6.0;
    let n = 1200;
    let h = 2.0 * outer / n as f64;
    let sum: Complex64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let x = -outer + (i as f64 + 0.5) * h;
            let mut s = ZERO;
            for j in 0..n {
                let y = -outer + (j as f64 + 0.5) * h;
                let a = PhasePoint::single(Complex64::new(x, y));
                if !region.contains(&a) {
                    s += rho.characteristic1(a.components()[0]) * obs_cf(&a.neg());
                }
            }
            s
        })
        .sum();
    Ok(sum * h * h * c_norm)
}

#[derive(Clone, Debug)]
pub struct ObservableSettings {
    pub epsilon: f64,
    pub delta: f64,
    /// Accuracy of the point estimates; defaults to ε/(4|A|).
    pub learn_epsilon: Option<f64>,
    pub pilot_points: usize,
    /// Cap on the second-pass point count.
    pub max_points: Option<usize>,
    pub c_norm: f64,
    pub backend: SamplerBackend,
    pub check_tail: bool,
}

impl ObservableSettings {
    pub fn new(epsilon: f64, delta: f64, backend: SamplerBackend) -> Self {
        ObservableSettings {
            epsilon,
            delta,
            learn_epsilon: None,
            pilot_points: 256,
            max_points: None,
            c_norm: 1.0 / PI,
            backend,
            check_tail: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObservableOutcome {
    pub record: EstimateRecord,
    pub sigma_m: f64,
    pub m_requested: usize,
    pub m_used: usize,
    pub learn_epsilon: f64,
    pub region_volume: f64,
    pub tail: Option<Complex64>,
    pub ledger: CopyLedger,
}

fn lattice_side(m: usize, dims: usize) -> usize {
    let mut n = (m as f64).powf(1.0 / dims as f64).floor().max(1.0) as usize;
    while n.pow(dims as u32) < m {
        n += 1;
    }
    n
}

/// Two-pass observable estimate o = c^k |A|/M Σ Ĉ(α_i) C_O(−α_i).
///
/// Points are a randomly shifted lattice over the box, so each point is
/// marginally uniform on A and consecutive points share a constant increment.
pub fn estimate_observable(
    state: &StateModel,
    symmetry: Option<&ReflectionSymmetry>,
    obs_cf: &(dyn Fn(&PhasePoint) -> Complex64 + Sync),
    region: &PhaseBox,
    settings: &ObservableSettings,
    stream: &SeedStream,
) -> Result<ObservableOutcome> {
    region.validate()?;
    check_unit_interval("epsilon", settings.epsilon)?;
    check_unit_interval("delta", settings.delta)?;
    if region.modes() != state.modes() {
        return Err(Error::DimensionMismatch { expected: state.modes(), got: region.modes() });
    }
    let k = state.modes();
    let volume = region.volume();
    let tail = if settings.check_tail {
        let t = tail_integral(state, obs_cf, region, settings.c_norm)?;
        if t.norm() >= settings.epsilon / 2.0 {
            return Err(Error::TailCondition { tail: t.norm(), bound: settings.epsilon / 2.0 });
        }
        Some(t)
    } else {
        None
    };
    let learn_eps = settings.learn_epsilon.unwrap_or(settings.epsilon / (4.0 * volume));
    let scale = settings.c_norm.powi(k as i32) * volume;
    let dims = 2 * k;

    let run = |m: usize, label: &str| -> Result<(Vec<Complex64>, LearnOutcome)> {
        let n = lattice_side(m, dims);
        let mut rng = stream.child(label).child("shift").rng(0);
        let shift: Vec<f64> = (0..dims).map(|_| rng.random::<f64>()).collect();
        let points = region.lattice(n, &shift);
        let out = learn_points(state, symmetry, &points, learn_eps, settings.delta, &settings.backend, &stream.child(label))?;
        let summands = out.records.iter().map(|r| r.value * obs_cf(&r.alpha.neg())).collect();
        Ok((summands, out))
    };

    let (pilot, pilot_out) = run(settings.pilot_points.max(2), "pilot")?;
    let mean = pilot.iter().map(|z| z.re).sum::<f64>() / pilot.len() as f64;
    let var = pilot.iter().map(|z| (z.re - mean).powi(2)).sum::<f64>() / (pilot.len() - 1) as f64;
    if !var.is_finite() {
        return Err(Error::NonFinite("pilot variance".into()));
    }
    let sigma = var.sqrt();
    let requested = ((16.0 * var * volume * volume / (settings.epsilon * settings.epsilon)).ceil() as usize).max(1);
    let target = settings.max_points.map_or(requested, |cap| requested.min(cap));
    let (summands, final_out) = run(target, "final")?;
    let m_used = summands.len();
    let value = summands.iter().sum::<Complex64>() * (scale / m_used as f64);
    let ledger = pilot_out.ledger.merge(&final_out.ledger);
    Ok(ObservableOutcome {
        record: EstimateRecord {
            alpha: PhasePoint::zero(k),
            value,
            target_kind: TargetKind::Observable,
            epsilon: settings.epsilon,
            delta: settings.delta,
            copies: ledger.quantum_total(),
            branch: None,
            square: None,
        },
        sigma_m: sigma,
        m_requested: requested,
        m_used,
        learn_epsilon: learn_eps,
        region_volume: volume,
        tail,
        ledger,
    })
}

/// Provenance carried on every results row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub state_hash: String,
    pub backend: String,
    pub seed: u64,
}

/// Per-point results CSV.
pub fn write_results_csv<W: std::io::Write>(
    out: W,
    records: &[EstimateRecord],
    truths: Option<&[Complex64]>,
    ledger: Option<&CopyLedger>,
    provenance: &Provenance,
) -> Result<()> {
    let k = records.first().map_or(1, |r| r.alpha.modes());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = Vec::new();
    for j in 1..=k {
        header.push(format!("alpha_re_{j}"));
        header.push(format!("alpha_im_{j}"));
    }
    for h in [
        "target", "est_re", "est_im", "truth_re", "truth_im", "abs_err", "branch", "copies_quantum", "draws_simulated",
        "state_hash", "backend", "seed",
    ] {
        header.push(h.into());
    }
    w.write_record(&header)?;
    for (i, r) in records.iter().enumerate() {
        let mut row: Vec<String> = Vec::new();
        for a in r.alpha.components() {
            row.push(format!("{:e}", a.re));
            row.push(format!("{:e}", a.im));
        }
        let kind = serde_json::to_value(r.target_kind)?.as_str().unwrap_or_default().to_string();
        row.push(kind);
        row.push(format!("{:e}", r.value.re));
        row.push(format!("{:e}", r.value.im));
        match truths.map(|t| t[i]) {
            Some(t) => {
                row.push(format!("{:e}", t.re));
                row.push(format!("{:e}", t.im));
                row.push(format!("{:e}", (r.value - t).norm()));
            }
            None => row.extend([String::new(), String::new(), String::new()]),
        }
        row.push(r.branch.map_or("", |b| b.tag()).to_string());
        row.push(r.copies.to_string());
        row.push(ledger.map_or(r.copies, |l| l.simulation_draws).to_string());
        row.push(provenance.state_hash.clone());
        row.push(provenance.backend.clone());
        row.push(provenance.seed.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
