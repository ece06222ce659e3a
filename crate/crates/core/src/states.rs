//! Continuous-variable state families: exact characteristic functions,
//! quadrature densities, reflection symmetries and Fock truncations.
//!
//! Convention: x̂ = (â+â†)/√2, p̂ = (â−â†)/(√2 i) (vacuum variance 1/2) and
//! C_ρ(α) = tr(ρ D(−iα)) = ⟨exp(−i(x x̂ + p p̂))⟩ with α = (x + ip)/√2.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fock_oracle::TruncatedDensityMatrix;
use crate::phase_space::{GridSpec, Table};
use crate::special;

pub const MAX_FOCK_N: usize = 64;
/// Largest d^{2k} × 16 bytes accepted for a dense truncated density matrix.
pub const MEMORY_BUDGET_BYTES: usize = 512 << 20;
const SYMMETRY_TOL: f64 = 1e-8;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// A point α ∈ ℂᵏ of k-mode phase space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhasePoint {
    components: Vec<Complex64>,
}

impl PhasePoint {
    pub fn new(components: Vec<Complex64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::invalid("alpha", "a phase point needs at least one mode"));
        }
        if components.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("phase point component".into()));
        }
        Ok(PhasePoint { components })
    }

    /// Single-mode point. Panics on non-finite input.
    pub fn single(alpha: Complex64) -> Self {
        PhasePoint::new(vec![alpha]).expect("finite phase-space amplitude")
    }

    pub fn zero(modes: usize) -> Self {
        PhasePoint { components: vec![ZERO; modes.max(1)] }
    }

    pub fn modes(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Complex64] {
        &self.components
    }

    pub fn conj(&self) -> Self {
        PhasePoint { components: self.components.iter().map(|z| z.conj()).collect() }
    }

    pub fn neg(&self) -> Self {
        PhasePoint { components: self.components.iter().map(|z| -z).collect() }
    }

    pub fn norm(&self) -> f64 {
        self.components.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Row-vector product αU.
    pub fn times(&self, u: &DMatrix<Complex64>) -> Self {
        let k = self.modes();
        let components = (0..k)
            .map(|j| (0..k).map(|i| self.components[i] * u[(i, j)]).sum())
            .collect();
        PhasePoint { components }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureComponent {
    pub weight: f64,
    pub state: StateSpec,
}

/// Serializable description of a state; the `family` key selects the variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    Vacuum {
        #[serde(default = "one_mode")]
        modes: usize,
    },
    /// Covariance R(θ) diag(1/(2r²), r²/2) R(θ)ᵀ: squeezed along angle θ for r > 1.
    SqueezedVacuum {
        r: f64,
        #[serde(default)]
        theta: f64,
    },
    Gaussian {
        modes: usize,
        covariance: Vec<Vec<f64>>,
    },
    Fock {
        n: usize,
    },
    /// N(|β⟩ + parity |−β⟩); `amplitude` is [Re β, Im β].
    Cat {
        amplitude: [f64; 2],
        parity: i8,
    },
    /// Fock amplitudes as [re, im] pairs.
    Binomial {
        coefficients: Vec<[f64; 2]>,
    },
    Gkp {
        delta: f64,
        logical: u8,
        truncation_dim: usize,
    },
    Mixture {
        components: Vec<MixtureComponent>,
    },
    Product {
        factors: Vec<StateSpec>,
    },
    /// Row-major density matrix on dim^modes levels.
    FockMatrix {
        dim: usize,
        modes: usize,
        re: Vec<f64>,
        im: Vec<f64>,
    },
}

fn one_mode() -> usize {
    1
}

#[derive(Clone, Debug)]
struct Cat {
    beta: Complex64,
    parity: f64,
    norm2: f64,
}

#[derive(Clone, Debug)]
enum Repr {
    Gaussian(DMatrix<f64>),
    Fock(usize),
    Cat(Cat),
    Pure(Vec<Complex64>),
    Matrix { dim: usize, modes: usize, rho: DMatrix<Complex64> },
    Mixture(Vec<(f64, StateModel)>),
    Product(Vec<StateModel>),
}

/// Immutable runtime state built from a [`StateSpec`].
#[derive(Clone, Debug)]
pub struct StateModel {
    spec: StateSpec,
    repr: Repr,
    modes: usize,
}

/// The k×k unitary U with C_ρ(α) = C_ρ(ᾱU).
#[derive(Clone, Debug, PartialEq)]
pub struct ReflectionSymmetry {
    unitary: DMatrix<Complex64>,
}

impl ReflectionSymmetry {
    pub fn new(unitary: DMatrix<Complex64>) -> Result<Self> {
        if unitary.nrows() != unitary.ncols() || unitary.nrows() == 0 {
            return Err(Error::invalid("unitary", "must be a non-empty square matrix"));
        }
        let k = unitary.nrows();
        let dev = (unitary.adjoint() * &unitary - DMatrix::<Complex64>::identity(k, k))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if dev > 1e-10 {
            return Err(Error::invalid("unitary", format!("U U† deviates from identity by {dev:.3e}")));
        }
        Ok(ReflectionSymmetry { unitary })
    }

    pub fn identity(modes: usize) -> Self {
        ReflectionSymmetry { unitary: DMatrix::identity(modes, modes) }
    }

    /// Single-mode U = e^{iφ}.
    pub fn phase(phi: f64) -> Self {
        ReflectionSymmetry { unitary: DMatrix::from_element(1, 1, Complex64::from_polar(1.0, phi)) }
    }

    pub fn diagonal(phases: &[f64]) -> Self {
        let k = phases.len();
        let mut u = DMatrix::zeros(k, k);
        for (j, &phi) in phases.iter().enumerate() {
            u[(j, j)] = Complex64::from_polar(1.0, phi);
        }
        ReflectionSymmetry { unitary: u }
    }

    pub fn unitary(&self) -> &DMatrix<Complex64> {
        &self.unitary
    }

    pub fn modes(&self) -> usize {
        self.unitary.nrows()
    }

    pub fn is_identity(&self) -> bool {
        let k = self.modes();
        (0..k).all(|i| (0..k).all(|j| (self.unitary[(i, j)] - if i == j { ONE } else { ZERO }).norm() < 1e-15))
    }

    /// ᾱU, the point whose characteristic value the rotated copy contributes.
    pub fn reflect(&self, alpha: &PhasePoint) -> PhasePoint {
        alpha.conj().times(&self.unitary)
    }

    /// Largest |C(α) − C(ᾱU)| over a deterministic probe set with |α| ≤ 3.
    pub fn probe_deviation(&self, state: &StateModel) -> Result<f64> {
        if self.modes() != state.modes() {
            return Err(Error::DimensionMismatch { expected: state.modes(), got: self.modes() });
        }
        let mut worst: f64 = 0.0;
        for alpha in probe_points(state.modes()) {
            let a = state.characteristic(&alpha)?;
            let b = state.characteristic(&self.reflect(&alpha))?;
            worst = worst.max((a - b).norm());
        }
        Ok(worst)
    }

    pub fn validate(&self, state: &StateModel) -> Result<()> {
        let dev = self.probe_deviation(state)?;
        if dev > SYMMETRY_TOL {
            return Err(Error::Validation(format!("declared reflection symmetry fails by {dev:.3e}")));
        }
        Ok(())
    }
}

/// Deterministic probe set: polar grid for one mode, a lattice of products for two.
pub fn probe_points(modes: usize) -> Vec<PhasePoint> {
    let radii = [0.2, 0.55, 0.9, 1.3, 1.8, 2.4, 3.0];
    let mut single = Vec::new();
    for (ri, &r) in radii.iter().enumerate() {
        for k in 0..12 {
            let angle = (k as f64 + 0.37 * ri as f64) * PI / 6.0;
            single.push(Complex64::from_polar(r, angle));
        }
    }
    match modes {
        1 => single.into_iter().map(PhasePoint::single).collect(),
        _ => {
            let mut out = Vec::new();
            for (i, &a) in single.iter().enumerate().step_by(5) {
                let mut comps = vec![a];
                for m in 1..modes {
                    comps.push(single[(i * 7 + 3 * m) % single.len()] * 0.8);
                }
                out.push(PhasePoint { components: comps });
            }
            out
        }
    }
}

fn rotation2(theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
}

fn squeezed_covariance(r: f64, theta: f64) -> DMatrix<f64> {
    let rot = rotation2(theta);
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0 / (2.0 * r * r), r * r / 2.0]));
    &rot * diag * rot.transpose()
}

/// Symplectic eigenvalues of a 2k×2k covariance in (x₁,p₁,…) ordering.
pub fn symplectic_eigenvalues(cov: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = cov.nrows();
    let eig = SymmetricEigen::new(cov.clone());
    if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
        return Err(Error::Validation("covariance is not positive definite".into()));
    }
    let sqrt = &eig.eigenvectors
        * DMatrix::from_diagonal(&eig.eigenvalues.map(f64::sqrt))
        * eig.eigenvectors.transpose();
    let mut omega = DMatrix::<f64>::zeros(n, n);
    for j in 0..n / 2 {
        omega[(2 * j, 2 * j + 1)] = 1.0;
        omega[(2 * j + 1, 2 * j)] = -1.0;
    }
    let m = &sqrt * omega.transpose() * cov * &omega * &sqrt;
    let m = (&m + m.transpose()) * 0.5;
    let mut nu: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().map(|l| l.max(0.0).sqrt()).collect();
    nu.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(nu.into_iter().step_by(2).collect())
}

fn validate_covariance(cov: &DMatrix<f64>) -> Result<()> {
    let n = cov.nrows();
    if n == 0 || !n.is_multiple_of(2) || cov.ncols() != n {
        return Err(Error::invalid("covariance", "must be a square 2k×2k matrix"));
    }
    if cov.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("covariance entry".into()));
    }
    let asym = (cov - cov.transpose()).abs().max();
    if asym > 1e-12 {
        return Err(Error::Validation(format!("covariance asymmetric by {asym:.3e}")));
    }
    let nu = symplectic_eigenvalues(cov)?;
    if nu.iter().any(|&v| v < 0.5 - 1e-9) {
        return Err(Error::Validation(format!("symplectic eigenvalues {nu:?} violate the uncertainty bound 1/2")));
    }
    Ok(())
}

/// Amplitudes of the binomial code word |μ_L⟩ with spacing S+1 and order N:
/// Σ_{p ≡ μ mod 2} √(C(N+1, p)/2^N) |p(S+1)⟩.
pub fn binomial_code_coefficients(spacing: usize, order: usize, logical: u8) -> Vec<Complex64> {
    let top = (order + 1) * (spacing + 1);
    let mut out = vec![ZERO; top + 1];
    let ln_2n = order as f64 * std::f64::consts::LN_2;
    for p in (logical as usize % 2..=order + 1).step_by(2) {
        let ln_binom = special::ln_factorial(order + 1) - special::ln_factorial(p) - special::ln_factorial(order + 1 - p);
        out[p * (spacing + 1)] = c((0.5 * (ln_binom - ln_2n)).exp(), 0.0);
    }
    out
}

fn gkp_coefficients(delta: f64, logical: u8, dim: usize) -> Vec<Complex64> {
    // c_n ∝ e^{−Δ² n} Σ_s ψ_n(√π (2s + μ))
    let mu = logical as f64;
    let reach = (2.0 * dim as f64).sqrt() + 12.0;
    let s_max = (reach / (2.0 * PI.sqrt())).ceil() as i64 + 1;
    let mut amps = vec![0.0; dim];
    let mut psi = vec![0.0; dim];
    for s in -s_max..=s_max {
        let q = PI.sqrt() * (2.0 * s as f64 + mu);
        special::hermite_functions_into(q, &mut psi);
        for (a, p) in amps.iter_mut().zip(&psi) {
            *a += p;
        }
    }
    let mut out: Vec<Complex64> = amps
        .iter()
        .enumerate()
        .map(|(n, a)| c(a * (-delta * delta * n as f64).exp(), 0.0))
        .collect();
    let norm = out.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    for z in &mut out {
        *z /= norm;
    }
    out
}

fn cat_coefficients(cat: &Cat, dim: usize) -> Vec<Complex64> {
    let n = cat.norm2.sqrt();
    let env = (-0.5 * cat.beta.norm_sqr()).exp();
    let mut term = c(env, 0.0);
    let mut out = Vec::with_capacity(dim);
    for k in 0..dim {
        if k > 0 {
            term *= cat.beta / (k as f64).sqrt();
        }
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        out.push(term * (n * (1.0 + cat.parity * sign)));
    }
    out
}

fn outer(v: &[Complex64]) -> DMatrix<Complex64> {
    let d = v.len();
    DMatrix::from_fn(d, d, |m, n| v[m] * v[n].conj())
}

/// Phase φ with ρ_mn e^{−i(m−n)φ} real for all m, n, preferring the smallest |φ|.
fn fock_reflection_phase(rho: &DMatrix<Complex64>) -> Option<f64> {
    let d = rho.nrows();
    let scale = rho.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = 1e-10 * scale.max(1e-300);
    let mut best = (0usize, 0usize, 0.0f64);
    for m in 0..d {
        for n in 0..m {
            let v = rho[(m, n)].norm();
            if v > best.2 {
                best = (m, n, v);
            }
        }
    }
    if best.2 <= tol {
        return Some(0.0);
    }
    let (m0, n0, _) = best;
    let diff = (m0 - n0) as f64;
    let base = rho[(m0, n0)].arg();
    let passes = |phi: f64| {
        (0..d).all(|m| {
            (0..m).all(|n| (rho[(m, n)] * Complex64::from_polar(1.0, -((m - n) as f64) * phi)).im.abs() <= tol)
        })
    };
    let mut candidates: Vec<f64> = (0..(m0 - n0))
        .map(|k| {
            let phi = (base + k as f64 * PI) / diff;
            // map into (−π/2, π/2]
            let mut p = phi.rem_euclid(PI);
            if p > PI / 2.0 {
                p -= PI;
            }
            p
        })
        .collect();
    candidates.sort_by(|a, b| a.abs().partial_cmp(&b.abs()).unwrap());
    candidates.into_iter().find(|&phi| passes(phi))
}

impl StateModel {
    pub fn from_spec(spec: StateSpec) -> Result<Self> {
        let (repr, modes) = build_repr(&spec)?;
        Ok(StateModel { spec, repr, modes })
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: StateSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        StateModel::from_spec(spec)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(&self.spec).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Hex SHA-256 of the canonical TOML form of the spec.
    pub fn hash(&self) -> String {
        let text = self.to_toml_string().unwrap_or_else(|_| format!("{:?}", self.spec));
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn spec(&self) -> &StateSpec {
        &self.spec
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn family(&self) -> &'static str {
        match self.spec {
            StateSpec::Vacuum { .. } => "vacuum",
            StateSpec::SqueezedVacuum { .. } => "squeezed-vacuum",
            StateSpec::Gaussian { .. } => "gaussian",
            StateSpec::Fock { .. } => "fock",
            StateSpec::Cat { .. } => "cat",
            StateSpec::Binomial { .. } => "binomial",
            StateSpec::Gkp { .. } => "gkp",
            StateSpec::Mixture { .. } => "mixture",
            StateSpec::Product { .. } => "product",
            StateSpec::FockMatrix { .. } => "fock-matrix",
        }
    }

    pub fn vacuum(modes: usize) -> Result<Self> {
        StateModel::from_spec(StateSpec::Vacuum { modes })
    }

    pub fn squeezed_vacuum(r: f64, theta: f64) -> Result<Self> {
        StateModel::from_spec(StateSpec::SqueezedVacuum { r, theta })
    }

    pub fn gaussian(covariance: &DMatrix<f64>) -> Result<Self> {
        let rows = (0..covariance.nrows())
            .map(|i| (0..covariance.ncols()).map(|j| covariance[(i, j)]).collect())
            .collect();
        StateModel::from_spec(StateSpec::Gaussian { modes: covariance.nrows() / 2, covariance: rows })
    }

    pub fn fock(n: usize) -> Result<Self> {
        StateModel::from_spec(StateSpec::Fock { n })
    }

    pub fn cat(beta: Complex64, parity: i8) -> Result<Self> {
        StateModel::from_spec(StateSpec::Cat { amplitude: [beta.re, beta.im], parity })
    }

    pub fn binomial(coefficients: &[Complex64]) -> Result<Self> {
        StateModel::from_spec(StateSpec::Binomial {
            coefficients: coefficients.iter().map(|z| [z.re, z.im]).collect(),
        })
    }

    pub fn gkp(delta: f64, logical: u8, truncation_dim: usize) -> Result<Self> {
        StateModel::from_spec(StateSpec::Gkp { delta, logical, truncation_dim })
    }

    pub fn mixture(components: Vec<(f64, StateModel)>) -> Result<Self> {
        StateModel::from_spec(StateSpec::Mixture {
            components: components
                .into_iter()
                .map(|(weight, s)| MixtureComponent { weight, state: s.spec })
                .collect(),
        })
    }

    pub fn product(factors: Vec<StateModel>) -> Result<Self> {
        StateModel::from_spec(StateSpec::Product { factors: factors.into_iter().map(|f| f.spec).collect() })
    }

    pub fn fock_matrix(rho: &TruncatedDensityMatrix) -> Result<Self> {
        let m = rho.matrix();
        let n = m.nrows();
        let mut re = Vec::with_capacity(n * n);
        let mut im = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                re.push(m[(i, j)].re);
                im.push(m[(i, j)].im);
            }
        }
        StateModel::from_spec(StateSpec::FockMatrix { dim: rho.dim(), modes: rho.modes(), re, im })
    }

    /// Mixture components with weights, when this is a mixture.
    pub fn mixture_components(&self) -> Option<&[(f64, StateModel)]> {
        match &self.repr {
            Repr::Mixture(c) => Some(c),
            _ => None,
        }
    }

    pub fn product_factors(&self) -> Option<&[StateModel]> {
        match &self.repr {
            Repr::Product(f) => Some(f),
            _ => None,
        }
    }

    /// Covariance matrix, when the state is a zero-mean Gaussian.
    pub fn covariance(&self) -> Option<&DMatrix<f64>> {
        match &self.repr {
            Repr::Gaussian(cov) => Some(cov),
            _ => None,
        }
    }

    /// True when every mixture branch or product factor is Gaussian.
    pub fn is_gaussian_family(&self) -> bool {
        match &self.repr {
            Repr::Gaussian(_) => true,
            Repr::Mixture(c) => c.iter().all(|(_, s)| s.is_gaussian_family()),
            Repr::Product(f) => f.iter().all(|s| s.is_gaussian_family()),
            _ => false,
        }
    }

    /// C_ρ(α).
    pub fn characteristic(&self, alpha: &PhasePoint) -> Result<Complex64> {
        if alpha.modes() != self.modes {
            return Err(Error::DimensionMismatch { expected: self.modes, got: alpha.modes() });
        }
        Ok(self.cf(alpha.components()))
    }

    /// Single-mode shortcut; panics if the state has more than one mode.
    pub fn characteristic1(&self, alpha: Complex64) -> Complex64 {
        assert_eq!(self.modes, 1, "characteristic1 on a multimode state");
        self.cf(&[alpha])
    }

    fn cf(&self, alpha: &[Complex64]) -> Complex64 {
        if alpha.iter().all(|z| *z == ZERO) {
            return match &self.repr {
                // exact 1 for the analytic families
                Repr::Matrix { rho, .. } => rho.trace(),
                _ => ONE,
            };
        }
        match &self.repr {
            Repr::Gaussian(cov) => {
                let k = alpha.len();
                let mut xi = vec![0.0; 2 * k];
                for (j, a) in alpha.iter().enumerate() {
                    xi[2 * j] = SQRT_2 * a.re;
                    xi[2 * j + 1] = SQRT_2 * a.im;
                }
                let mut q = 0.0;
                for i in 0..2 * k {
                    for j in 0..2 * k {
                        q += xi[i] * cov[(i, j)] * xi[j];
                    }
                }
                c((-0.5 * q).exp(), 0.0)
            }
            Repr::Fock(n) => {
                let x = alpha[0].norm_sqr();
                c((-0.5 * x).exp() * special::laguerre(*n, 0, x), 0.0)
            }
            Repr::Cat(cat) => {
                let gamma = c(0.0, -1.0) * alpha[0];
                let branches = [(cat.beta, 1.0), (-cat.beta, cat.parity)];
                let mut total = ZERO;
                for &(u, su) in &branches {
                    for &(v, sv) in &branches {
                        // ρ = N² Σ s_u s_v |u⟩⟨v|, tr(ρD) = N² Σ s_u s_v ⟨v|D|u⟩
                        total += special::coherent_displacement_element(v, gamma, u) * (su * sv);
                    }
                }
                total * cat.norm2
            }
            Repr::Pure(coeffs) => {
                let d = coeffs.len();
                let gamma = c(0.0, -1.0) * alpha[0];
                let dm = special::displacement_matrix(d, gamma);
                let mut total = ZERO;
                for m in 0..d {
                    if coeffs[m] == ZERO {
                        continue;
                    }
                    let row = &dm[m * d..(m + 1) * d];
                    let dv: Complex64 = row.iter().zip(coeffs).map(|(a, b)| a * b).sum();
                    total += coeffs[m].conj() * dv;
                }
                total
            }
            Repr::Matrix { dim, modes, rho } => {
                let d = *dim;
                let gamma: Vec<Complex64> = alpha.iter().map(|a| c(0.0, -1.0) * a).collect();
                if *modes == 1 {
                    let dm = special::displacement_matrix(d, gamma[0]);
                    let mut total = ZERO;
                    for m in 0..d {
                        for n in 0..d {
                            total += rho[(n, m)] * dm[m * d + n];
                        }
                    }
                    total
                } else {
                    let d1 = special::displacement_matrix(d, gamma[0]);
                    let d2 = special::displacement_matrix(d, gamma[1]);
                    let mut total = ZERO;
                    for m1 in 0..d {
                        for n1 in 0..d {
                            let a = d1[m1 * d + n1];
                            if a == ZERO {
                                continue;
                            }
                            for m2 in 0..d {
                                for n2 in 0..d {
                                    total += rho[(n1 * d + n2, m1 * d + m2)] * a * d2[m2 * d + n2];
                                }
                            }
                        }
                    }
                    total
                }
            }
            Repr::Mixture(parts) => parts.iter().map(|(w, s)| s.cf(alpha) * *w).sum(),
            Repr::Product(factors) => {
                let mut offset = 0;
                let mut total = ONE;
                for f in factors {
                    total *= f.cf(&alpha[offset..offset + f.modes]);
                    offset += f.modes;
                }
                total
            }
        }
    }

    /// Density of x_θ = cos θ x̂ + sin θ p̂ at q for a single-mode state.
    pub fn quadrature_density1(&self, theta: f64, q: f64) -> f64 {
        match &self.repr {
            Repr::Gaussian(cov) => {
                let (s, co) = theta.sin_cos();
                let var = co * co * cov[(0, 0)] + 2.0 * s * co * cov[(0, 1)] + s * s * cov[(1, 1)];
                (-(q * q) / (2.0 * var)).exp() / (2.0 * PI * var).sqrt()
            }
            Repr::Fock(n) => {
                let psi = special::hermite_functions(q, n + 1);
                psi[*n] * psi[*n]
            }
            Repr::Cat(cat) => {
                let rot = Complex64::from_polar(1.0, -theta);
                let b = cat.beta * rot;
                let amp = special::coherent_wavefunction(b, q) + special::coherent_wavefunction(-b, q) * cat.parity;
                cat.norm2 * amp.norm_sqr()
            }
            Repr::Pure(coeffs) => {
                let psi = special::hermite_functions(q, coeffs.len());
                let step = Complex64::from_polar(1.0, -theta);
                let mut phase = ONE;
                let mut amp = ZERO;
                for (cn, p) in coeffs.iter().zip(&psi) {
                    amp += cn * phase * *p;
                    phase *= step;
                }
                amp.norm_sqr()
            }
            Repr::Matrix { dim, rho, .. } => {
                let psi = special::hermite_functions(q, *dim);
                let step = Complex64::from_polar(1.0, -theta);
                let mut v = Vec::with_capacity(*dim);
                let mut phase = ONE;
                for p in &psi {
                    v.push(phase * *p);
                    phase *= step;
                }
                let mut total = ZERO;
                for m in 0..*dim {
                    for n in 0..*dim {
                        total += v[m] * rho[(m, n)] * v[n].conj();
                    }
                }
                total.re
            }
            Repr::Mixture(parts) => parts.iter().map(|(w, s)| w * s.quadrature_density1(theta, q)).sum(),
            Repr::Product(factors) => factors[0].quadrature_density1(theta, q),
        }
    }

    /// Joint density of per-mode quadratures at the given phases, tabulated on `grid`.
    pub fn quadrature_pdf(&self, phases: &[f64], grid: &GridSpec) -> Result<Table> {
        if phases.len() != self.modes {
            return Err(Error::DimensionMismatch { expected: self.modes, got: phases.len() });
        }
        if grid.rank() != self.modes {
            return Err(Error::DimensionMismatch { expected: self.modes, got: grid.rank() });
        }
        let table = match self.modes {
            1 => Table::from_fn(grid.clone(), |q| self.quadrature_density1(phases[0], q[0])),
            2 => self.quadrature_table2(phases, grid)?,
            k => return Err(Error::Unsupported(format!("quadrature tables for {k} modes"))),
        };
        table.check_mass(1e-8)?;
        Ok(table)
    }

    fn quadrature_table2(&self, phases: &[f64], grid: &GridSpec) -> Result<Table> {
        let (a1, a2) = (grid.axes[0], grid.axes[1]);
        let q1s = a1.nodes();
        let q2s = a2.nodes();
        let values = match &self.repr {
            Repr::Gaussian(cov) => {
                let rows: Vec<[f64; 4]> = phases
                    .iter()
                    .enumerate()
                    .map(|(j, th)| {
                        let mut row = [0.0; 4];
                        row[2 * j] = th.cos();
                        row[2 * j + 1] = th.sin();
                        row
                    })
                    .collect();
                let mut s = [[0.0; 2]; 2];
                for (i, ri) in rows.iter().enumerate() {
                    for (j, rj) in rows.iter().enumerate() {
                        for a in 0..4 {
                            for b in 0..4 {
                                s[i][j] += ri[a] * cov[(a, b)] * rj[b];
                            }
                        }
                    }
                }
                let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
                if !(det > 0.0) {
                    return Err(Error::Validation("singular quadrature covariance".into()));
                }
                let inv = [[s[1][1] / det, -s[0][1] / det], [-s[1][0] / det, s[0][0] / det]];
                let norm = 1.0 / (2.0 * PI * det.sqrt());
                let mut out = Vec::with_capacity(grid.len());
                for &x in &q1s {
                    for &y in &q2s {
                        let quad = inv[0][0] * x * x + 2.0 * inv[0][1] * x * y + inv[1][1] * y * y;
                        out.push(norm * (-0.5 * quad).exp());
                    }
                }
                out
            }
            Repr::Product(factors) if factors.len() == 2 => {
                let f1: Vec<f64> = q1s.iter().map(|&q| factors[0].quadrature_density1(phases[0], q)).collect();
                let f2: Vec<f64> = q2s.iter().map(|&q| factors[1].quadrature_density1(phases[1], q)).collect();
                f1.iter().flat_map(|a| f2.iter().map(move |b| a * b)).collect()
            }
            Repr::Mixture(parts) => {
                let mut out = vec![0.0; grid.len()];
                for (w, s) in parts {
                    let t = s.quadrature_table2(phases, grid)?;
                    for (o, v) in out.iter_mut().zip(&t.values) {
                        *o += w * v;
                    }
                }
                out
            }
            Repr::Matrix { dim, modes: 2, rho } => {
                let d = *dim;
                let amps = |theta: f64, q: f64| -> Vec<Complex64> {
                    let psi = special::hermite_functions(q, d);
                    let step = Complex64::from_polar(1.0, -theta);
                    let mut phase = ONE;
                    psi.iter()
                        .map(|p| {
                            let v = phase * *p;
                            phase *= step;
                            v
                        })
                        .collect()
                };
                let v2s: Vec<Vec<Complex64>> = q2s.iter().map(|&q| amps(phases[1], q)).collect();
                let mut out = Vec::with_capacity(grid.len());
                let mut k = DMatrix::<Complex64>::zeros(d, d);
                for &q1 in &q1s {
                    let v1 = amps(phases[0], q1);
                    // K_{m2 n2} = Σ v1_{m1} ρ_{(m1 m2),(n1 n2)} conj(v1_{n1})
                    k.fill(ZERO);
                    for m1 in 0..d {
                        for n1 in 0..d {
                            let w = v1[m1] * v1[n1].conj();
                            for m2 in 0..d {
                                for n2 in 0..d {
                                    k[(m2, n2)] += w * rho[(m1 * d + m2, n1 * d + n2)];
                                }
                            }
                        }
                    }
                    for v2 in &v2s {
                        let mut total = ZERO;
                        for m2 in 0..d {
                            for n2 in 0..d {
                                total += v2[m2] * k[(m2, n2)] * v2[n2].conj();
                            }
                        }
                        out.push(total.re);
                    }
                }
                out
            }
            _ => return Err(Error::Unsupported(format!("two-mode quadrature table for {}", self.family()))),
        };
        Table::new(grid.clone(), values)
    }

    /// The declared reflection symmetry, if any.
    pub fn symmetry(&self) -> Option<ReflectionSymmetry> {
        if let StateSpec::SqueezedVacuum { theta, .. } = self.spec {
            return Some(ReflectionSymmetry::phase(2.0 * theta));
        }
        match &self.repr {
            Repr::Gaussian(cov) => gaussian_symmetry(cov),
            Repr::Fock(_) => Some(ReflectionSymmetry::identity(1)),
            Repr::Cat(cat) => Some(ReflectionSymmetry::phase(2.0 * cat.beta.arg())),
            Repr::Pure(coeffs) => fock_reflection_phase(&outer(coeffs)).map(|phi| ReflectionSymmetry::phase(2.0 * phi)),
            Repr::Matrix { modes: 1, rho, .. } => {
                fock_reflection_phase(rho).map(|phi| ReflectionSymmetry::phase(2.0 * phi))
            }
            Repr::Matrix { modes, rho, .. } => {
                let real = rho.iter().all(|z| z.im.abs() <= 1e-12);
                real.then(|| ReflectionSymmetry::identity(*modes))
            }
            Repr::Mixture(parts) => {
                let mut candidates = vec![ReflectionSymmetry::identity(self.modes)];
                candidates.extend(parts.iter().filter_map(|(_, s)| s.symmetry()));
                candidates
                    .into_iter()
                    .find(|u| u.probe_deviation(self).map(|d| d <= SYMMETRY_TOL).unwrap_or(false))
            }
            Repr::Product(factors) => {
                let mut u = DMatrix::<Complex64>::zeros(self.modes, self.modes);
                let mut offset = 0;
                for f in factors {
                    let s = f.symmetry()?;
                    u.view_mut((offset, offset), (f.modes, f.modes)).copy_from(s.unitary());
                    offset += f.modes;
                }
                Some(ReflectionSymmetry { unitary: u })
            }
        }
    }

    /// Density matrix truncated to `dim` levels per mode.
    pub fn to_fock(&self, dim: usize, tail_tol: f64) -> Result<TruncatedDensityMatrix> {
        if dim < 2 {
            return Err(Error::invalid("dim", "truncation needs at least two levels"));
        }
        if self.modes > 2 {
            return Err(Error::Unsupported(format!("Fock truncation of {} modes", self.modes)));
        }
        let size = dim.pow(self.modes as u32);
        if size.saturating_mul(size).saturating_mul(16) > MEMORY_BUDGET_BYTES {
            return Err(Error::MemoryBudget(format!("{} modes at dim {dim}", self.modes)));
        }
        let rho = self.fock_matrix_raw(dim)?;
        TruncatedDensityMatrix::with_tail_check(dim, self.modes, rho, tail_tol)
    }

    fn fock_matrix_raw(&self, dim: usize) -> Result<DMatrix<Complex64>> {
        let pad = |v: &[Complex64]| -> Vec<Complex64> {
            let mut out = vec![ZERO; dim];
            for (o, x) in out.iter_mut().zip(v) {
                *o = *x;
            }
            out
        };
        Ok(match &self.repr {
            Repr::Gaussian(cov) => {
                if self.modes == 1 {
                    gaussian_fock_single(cov, dim)?
                } else {
                    let cross = cov.view((0, 2), (2, 2)).abs().max();
                    if cross > 1e-14 {
                        return Err(Error::Unsupported(
                            "Fock truncation of correlated two-mode Gaussian states".into(),
                        ));
                    }
                    let a = gaussian_fock_single(&cov.view((0, 0), (2, 2)).into_owned(), dim)?;
                    let b = gaussian_fock_single(&cov.view((2, 2), (2, 2)).into_owned(), dim)?;
                    a.kronecker(&b)
                }
            }
            Repr::Fock(n) => {
                let mut m = DMatrix::zeros(dim, dim);
                if *n < dim {
                    m[(*n, *n)] = ONE;
                }
                m
            }
            Repr::Cat(cat) => outer(&cat_coefficients(cat, dim)),
            Repr::Pure(coeffs) => outer(&pad(coeffs)),
            Repr::Matrix { dim: d0, modes, rho } => {
                let size = dim.pow(*modes as u32);
                DMatrix::from_fn(size, size, |i, j| {
                    let split = |k: usize| -> Option<usize> {
                        if *modes == 1 {
                            (k < *d0).then_some(k)
                        } else {
                            let (a, b) = (k / dim, k % dim);
                            (a < *d0 && b < *d0).then_some(a * d0 + b)
                        }
                    };
                    match (split(i), split(j)) {
                        (Some(a), Some(b)) => rho[(a, b)],
                        _ => ZERO,
                    }
                })
            }
            Repr::Mixture(parts) => {
                let size = dim.pow(self.modes as u32);
                let mut m = DMatrix::zeros(size, size);
                for (w, s) in parts {
                    m += s.fock_matrix_raw(dim)? * c(*w, 0.0);
                }
                m
            }
            Repr::Product(factors) => {
                let mut m = DMatrix::from_element(1, 1, ONE);
                for f in factors {
                    m = m.kronecker(&f.fock_matrix_raw(dim)?);
                }
                m
            }
        })
    }
}

fn gaussian_symmetry(cov: &DMatrix<f64>) -> Option<ReflectionSymmetry> {
    let k = cov.nrows() / 2;
    if k == 1 {
        let (a, b, d) = (cov[(0, 0)], cov[(0, 1)], cov[(1, 1)]);
        if b.abs() <= 1e-15 * (a.abs() + d.abs()) {
            return Some(ReflectionSymmetry::identity(1));
        }
        // reflection about the minor (squeezed) principal axis
        let theta = 0.5 * (2.0 * b).atan2(a - d) + PI / 2.0;
        return Some(ReflectionSymmetry::phase(2.0 * theta));
    }
    let no_cross = (0..k).all(|i| (0..k).all(|j| cov[(2 * i, 2 * j + 1)].abs() <= 1e-15));
    if no_cross {
        return Some(ReflectionSymmetry::identity(k));
    }
    let block_diag = (0..k).all(|i| {
        (0..k).all(|j| i == j || (0..2).all(|a| (0..2).all(|b| cov[(2 * i + a, 2 * j + b)].abs() <= 1e-15)))
    });
    if block_diag {
        let phases: Vec<f64> = (0..k)
            .map(|j| {
                let (a, b, d) = (cov[(2 * j, 2 * j)], cov[(2 * j, 2 * j + 1)], cov[(2 * j + 1, 2 * j + 1)]);
                (2.0 * b).atan2(a - d)
            })
            .collect();
        return Some(ReflectionSymmetry::diagonal(&phases));
    }
    None
}

/// Squeezed thermal decomposition ρ = S(ζ) ρ_th S(ζ)† evaluated by matrix
/// exponentials on a padded space, then cut to `dim` levels.
fn gaussian_fock_single(cov: &DMatrix<f64>, dim: usize) -> Result<DMatrix<Complex64>> {
    let eig = SymmetricEigen::new(cov.clone());
    let (i_min, i_max) = if eig.eigenvalues[0] <= eig.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let (l1, l2) = (eig.eigenvalues[i_min], eig.eigenvalues[i_max]);
    let v = eig.eigenvectors.column(i_min);
    let theta = v[1].atan2(v[0]);
    let nu = (l1 * l2).sqrt();
    let s = 0.25 * (l2 / l1).ln();
    let nbar = (nu - 0.5).max(0.0);
    let padded = dim + dim.max(40);
    let zeta = Complex64::from_polar(s, 2.0 * theta);
    let mut gen = DMatrix::<Complex64>::zeros(padded, padded);
    for n in 0..padded - 2 {
        // (ζ̄ a² − ζ a†²)/2
        let amp = ((n + 1) as f64 * (n + 2) as f64).sqrt() * 0.5;
        gen[(n, n + 2)] = zeta.conj() * amp;
        gen[(n + 2, n)] = -zeta * amp;
    }
    let squeeze = gen.exp();
    let mut rho = DMatrix::<Complex64>::zeros(dim, dim);
    let mut weight_left = 1.0;
    for k in 0..dim {
        let p = if nbar == 0.0 {
            if k == 0 {
                1.0
            } else {
                0.0
            }
        } else {
            (nbar / (nbar + 1.0)).powi(k as i32) / (nbar + 1.0)
        };
        if p == 0.0 {
            break;
        }
        let col: Vec<Complex64> = (0..dim).map(|m| squeeze[(m, k)]).collect();
        rho += outer(&col) * c(p, 0.0);
        weight_left -= p;
        if weight_left < 1e-16 {
            break;
        }
    }
    Ok(rho)
}

fn build_repr(spec: &StateSpec) -> Result<(Repr, usize)> {
    Ok(match spec {
        StateSpec::Vacuum { modes } => {
            if *modes == 0 {
                return Err(Error::invalid("modes", "must be at least 1"));
            }
            (Repr::Gaussian(DMatrix::identity(2 * modes, 2 * modes) * 0.5), *modes)
        }
        StateSpec::SqueezedVacuum { r, theta } => {
            if !(*r > 0.0) || !r.is_finite() || !theta.is_finite() {
                return Err(Error::invalid("r", format!("squeezing parameter must be positive, got {r}")));
            }
            (Repr::Gaussian(squeezed_covariance(*r, *theta)), 1)
        }
        StateSpec::Gaussian { modes, covariance } => {
            let n = 2 * modes;
            if *modes == 0 || covariance.len() != n || covariance.iter().any(|row| row.len() != n) {
                return Err(Error::invalid("covariance", format!("expected a {n}×{n} matrix")));
            }
            let cov = DMatrix::from_fn(n, n, |i, j| covariance[i][j]);
            validate_covariance(&cov)?;
            (Repr::Gaussian(cov), *modes)
        }
        StateSpec::Fock { n } => {
            if *n > MAX_FOCK_N {
                return Err(Error::invalid("n", format!("photon number above {MAX_FOCK_N}")));
            }
            (Repr::Fock(*n), 1)
        }
        StateSpec::Cat { amplitude, parity } => {
            let beta = c(amplitude[0], amplitude[1]);
            if !beta.re.is_finite() || !beta.im.is_finite() {
                return Err(Error::NonFinite("cat amplitude".into()));
            }
            if *parity != 1 && *parity != -1 {
                return Err(Error::invalid("parity", "must be +1 or -1"));
            }
            let parity = *parity as f64;
            let denom = 2.0 * (1.0 + parity * (-2.0 * beta.norm_sqr()).exp());
            if !(denom > 1e-12) {
                return Err(Error::invalid("amplitude", "odd cat with zero amplitude is not normalizable"));
            }
            (Repr::Cat(Cat { beta, parity, norm2: 1.0 / denom }), 1)
        }
        StateSpec::Binomial { coefficients } => {
            if coefficients.is_empty() {
                return Err(Error::invalid("coefficients", "empty amplitude list"));
            }
            let v: Vec<Complex64> = coefficients.iter().map(|p| c(p[0], p[1])).collect();
            let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum();
            if (norm - 1.0).abs() > 1e-10 {
                return Err(Error::Validation(format!("squared amplitudes sum to {norm}")));
            }
            (Repr::Pure(v), 1)
        }
        StateSpec::Gkp { delta, logical, truncation_dim } => {
            if !(*delta > 0.0) {
                return Err(Error::invalid("delta", "must be positive"));
            }
            if *logical > 1 {
                return Err(Error::invalid("logical", "must be 0 or 1"));
            }
            if *truncation_dim < 2 {
                return Err(Error::invalid("truncation_dim", "must be at least 2"));
            }
            (Repr::Pure(gkp_coefficients(*delta, *logical, *truncation_dim)), 1)
        }
        StateSpec::Mixture { components } => {
            if components.is_empty() {
                return Err(Error::invalid("components", "empty mixture"));
            }
            let total: f64 = components.iter().map(|c| c.weight).sum();
            if components.iter().any(|c| !(c.weight >= 0.0)) || (total - 1.0).abs() > 1e-12 {
                return Err(Error::Validation(format!("mixture weights must be nonnegative and sum to 1 (sum {total})")));
            }
            let parts = components
                .iter()
                .map(|c| Ok((c.weight, StateModel::from_spec(c.state.clone())?)))
                .collect::<Result<Vec<_>>>()?;
            let modes = parts[0].1.modes;
            if parts.iter().any(|(_, s)| s.modes != modes) {
                return Err(Error::Validation("mixture components differ in mode count".into()));
            }
            (Repr::Mixture(parts), modes)
        }
        StateSpec::Product { factors } => {
            if factors.is_empty() {
                return Err(Error::invalid("factors", "empty product"));
            }
            let parts = factors
                .iter()
                .map(|f| StateModel::from_spec(f.clone()))
                .collect::<Result<Vec<_>>>()?;
            let modes = parts.iter().map(|p| p.modes).sum();
            (Repr::Product(parts), modes)
        }
        StateSpec::FockMatrix { dim, modes, re, im } => {
            if *modes == 0 || *modes > 2 {
                return Err(Error::invalid("modes", "fock-matrix supports one or two modes"));
            }
            let size = dim.pow(*modes as u32);
            if re.len() != size * size || im.len() != size * size {
                return Err(Error::DimensionMismatch { expected: size * size, got: re.len().min(im.len()) });
            }
            let rho = DMatrix::from_fn(size, size, |i, j| c(re[i * size + j], im[i * size + j]));
            let checked = TruncatedDensityMatrix::new(*dim, *modes, rho, 1e-9)?;
            (Repr::Matrix { dim: *dim, modes: *modes, rho: checked.matrix().clone() }, *modes)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn shipped() -> Vec<StateModel> {
        let kitten = binomial_code_coefficients(1, 1, 0);
        vec![
            StateModel::vacuum(1).unwrap(),
            StateModel::squeezed_vacuum(1.4, 0.3).unwrap(),
            StateModel::fock(3).unwrap(),
            StateModel::cat(c(1.5, 0.0), 1).unwrap(),
            StateModel::cat(c(0.8, 0.6), -1).unwrap(),
            StateModel::binomial(&kitten).unwrap(),
            StateModel::gkp(0.4, 0, 40).unwrap(),
            StateModel::mixture(vec![
                (0.5, StateModel::squeezed_vacuum(1.3, 0.2).unwrap()),
                (0.5, StateModel::squeezed_vacuum(1.3, -0.2).unwrap()),
            ])
            .unwrap(),
            StateModel::product(vec![StateModel::fock(1).unwrap(), StateModel::squeezed_vacuum(1.2, 0.5).unwrap()])
                .unwrap(),
        ]
    }

    #[test]
    fn characteristic_is_one_at_origin() {
        for s in shipped() {
            let z = s.characteristic(&PhasePoint::zero(s.modes())).unwrap();
            assert_eq!(z, ONE, "{}", s.family());
        }
    }

    #[test]
    fn vacuum_value_at_one() {
        let s = StateModel::vacuum(1).unwrap();
        let v = s.characteristic1(c(1.0, 0.0));
        assert!((v.re - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn squeezed_member_matches_coordinate_formula() {
        let (r, th) = (2.5, 0.7);
        let s = StateModel::squeezed_vacuum(r, th).unwrap();
        let (x, p) = (0.4, -1.1);
        let alpha = c(x / SQRT_2, p / SQRT_2);
        let expected = (-(x * th.cos() + p * th.sin()).powi(2) / (4.0 * r * r)
            - (r * r / 4.0) * (x * th.sin() - p * th.cos()).powi(2))
        .exp();
        assert!((s.characteristic1(alpha).re - expected).abs() < 1e-14);
    }

    #[test]
    fn fock_one_has_laguerre_zero() {
        let s = StateModel::fock(1).unwrap();
        assert!(s.characteristic1(c(0.0, 1.0)).norm() < 1e-15);
        let v = s.characteristic1(c(SQRT_2, 0.0));
        assert!((v.re + (-1.0f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn fock_state_as_pure_vector_agrees_with_laguerre_form() {
        let mut v = vec![ZERO; 6];
        v[4] = ONE;
        let pure = StateModel::binomial(&v).unwrap();
        let fock = StateModel::fock(4).unwrap();
        for a in probe_points(1) {
            let d = (pure.characteristic(&a).unwrap() - fock.characteristic(&a).unwrap()).norm();
            assert!(d < 1e-12);
        }
    }

    #[test]
    fn superposition_is_imaginary_at_root_two() {
        let h = 1.0 / SQRT_2;
        let s = StateModel::binomial(&[c(h, 0.0), c(h, 0.0)]).unwrap();
        let a: f64 = 1.3;
        let v = s.characteristic1(c(a, 0.0));
        let expected = c((2.0 - a * a) / 2.0, -a) * (-a * a / 2.0).exp();
        assert!((v - expected).norm() < 1e-14);
        let at = s.characteristic1(c(SQRT_2, 0.0));
        assert!(at.re.abs() < 1e-15 && at.im < -0.5);
    }

    #[test]
    fn quadrature_densities_normalize() {
        let grid = GridSpec::line(14.0, 2048).unwrap();
        for s in shipped().into_iter().filter(|s| s.modes() == 1) {
            for &theta in &[0.0, 0.9, PI / 2.0] {
                let t = s.quadrature_pdf(&[theta], &grid).unwrap();
                assert!((t.mass() - 1.0).abs() < 1e-6, "{} θ={theta} mass {}", s.family(), t.mass());
                assert!(t.min() >= 0.0);
            }
        }
    }

    #[test]
    fn fock_one_quadrature_density_closed_form() {
        let s = StateModel::fock(1).unwrap();
        for &q in &[-1.5f64, 0.0, 0.3, 2.2] {
            let expected = 2.0 * q * q * (-q * q).exp() / PI.sqrt();
            assert!((s.quadrature_density1(1.1, q) - expected).abs() < 1e-14);
        }
    }

    #[test]
    fn two_mode_product_table_normalizes() {
        let s = &shipped()[8];
        let grid = GridSpec::square(8.0, 128).unwrap();
        let t = s.quadrature_pdf(&[0.0, 0.4], &grid).unwrap();
        assert!((t.mass() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn small_grid_is_rejected() {
        let s = StateModel::cat(c(2.0, 0.0), 1).unwrap();
        let grid = GridSpec::line(2.0, 128).unwrap();
        assert!(matches!(s.quadrature_pdf(&[0.0], &grid), Err(Error::GridTooSmall { .. })));
    }

    #[test]
    fn declared_symmetries_pass_probe_checks() {
        for s in shipped() {
            let sym = s.symmetry().unwrap_or_else(|| panic!("{} lacks a symmetry", s.family()));
            sym.validate(&s).unwrap();
        }
    }

    #[test]
    fn squeezed_symmetry_is_double_angle() {
        let s = StateModel::squeezed_vacuum(1.7, 0.35).unwrap();
        let u = s.symmetry().unwrap().unitary()[(0, 0)];
        assert!((u - Complex64::from_polar(1.0, 0.7)).norm() < 1e-12);
    }

    #[test]
    fn rotated_superposition_symmetry_found_from_fock_phases() {
        let phi: f64 = 0.4;
        let h = 1.0 / SQRT_2;
        let s = StateModel::binomial(&[c(h, 0.0), Complex64::from_polar(h, phi)]).unwrap();
        let sym = s.symmetry().unwrap();
        assert!((sym.unitary()[(0, 0)] - Complex64::from_polar(1.0, 2.0 * phi)).norm() < 1e-12);
        sym.validate(&s).unwrap();
    }

    #[test]
    fn entangled_two_mode_gaussian_symmetry() {
        // two-mode squeezed vacuum has x–p block structure without cross terms
        let r: f64 = 0.3;
        let (ch, sh) = ((2.0 * r).cosh() / 2.0, (2.0 * r).sinh() / 2.0);
        let cov = DMatrix::from_row_slice(4, 4, &[ch, 0.0, sh, 0.0, 0.0, ch, 0.0, -sh, sh, 0.0, ch, 0.0, 0.0, -sh, 0.0, ch]);
        let s = StateModel::gaussian(&cov).unwrap();
        let sym = s.symmetry().unwrap();
        assert!(sym.is_identity());
        sym.validate(&s).unwrap();
    }

    #[test]
    fn unphysical_covariance_rejected() {
        let cov = DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.0, 0.5]);
        assert!(StateModel::gaussian(&cov).is_err());
    }

    #[test]
    fn spec_round_trips_through_toml() {
        for s in shipped() {
            let text = s.to_toml_string().unwrap();
            let back = StateModel::from_toml_str(&text).unwrap();
            assert_eq!(back.spec(), s.spec());
            assert_eq!(back.to_toml_string().unwrap(), text);
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = "family = \"fock\"\nn = 2\ncolour = 3\n";
        assert!(StateModel::from_toml_str(text).is_err());
        let ok = "family = \"cat\"\namplitude = [2.0, 0.0]\nparity = 1\n";
        assert_eq!(StateModel::from_toml_str(ok).unwrap().family(), "cat");
    }

    #[test]
    fn kitten_code_words() {
        let zero = binomial_code_coefficients(1, 1, 0);
        let one = binomial_code_coefficients(1, 1, 1);
        assert!((zero[0].re - 1.0 / SQRT_2).abs() < 1e-15 && (zero[4].re - 1.0 / SQRT_2).abs() < 1e-15);
        assert!((one[2].re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vacuum_and_fock_truncations() {
        let v = StateModel::vacuum(1).unwrap().to_fock(10, 1e-12).unwrap();
        assert!((v.matrix()[(0, 0)] - ONE).norm() < 1e-12);
        assert!(v.matrix().iter().enumerate().all(|(i, z)| i == 0 || z.norm() < 1e-12));
        let f = StateModel::fock(2).unwrap().to_fock(10, 0.0).unwrap();
        assert_eq!(f.matrix()[(2, 2)], ONE);
        let cat = StateModel::cat(c(2.0, 0.0), 1).unwrap().to_fock(40, 1e-8).unwrap();
        assert!(cat.trace() >= 1.0 - 1e-8);
    }

    #[test]
    fn correlated_two_mode_gaussian_truncation_unsupported() {
        let r: f64 = 0.3;
        let (ch, sh) = ((2.0 * r).cosh() / 2.0, (2.0 * r).sinh() / 2.0);
        let cov = DMatrix::from_row_slice(4, 4, &[ch, 0.0, sh, 0.0, 0.0, ch, 0.0, -sh, sh, 0.0, ch, 0.0, 0.0, -sh, 0.0, ch]);
        let s = StateModel::gaussian(&cov).unwrap();
        assert!(matches!(s.to_fock(10, 1e-3), Err(Error::Unsupported(_))));
    }

    proptest! {
        #[test]
        fn hermitian_symmetry_and_bound(re in -6.0f64..6.0, im in -6.0f64..6.0, which in 0usize..9) {
            let states = shipped();
            let s = &states[which];
            let mut comps = vec![c(re, im) / 1.5f64.max((re * re + im * im).sqrt() / 6.0)];
            if s.modes() == 2 {
                comps.push(c(im * 0.5, -re * 0.3));
            }
            let a = PhasePoint::new(comps).unwrap();
            let v = s.characteristic(&a).unwrap();
            let w = s.characteristic(&a.neg()).unwrap();
            prop_assert!((w - v.conj()).norm() < 1e-10);
            prop_assert!(v.norm() <= 1.0 + 1e-9);
        }

        #[test]
        fn product_factorizes(a in -3.0f64..3.0, b in -3.0f64..3.0, x in -3.0f64..3.0, y in -3.0f64..3.0) {
            let f1 = StateModel::cat(c(1.0, 0.5), 1).unwrap();
            let f2 = StateModel::squeezed_vacuum(1.3, 0.2).unwrap();
            let prod = StateModel::product(vec![f1.clone(), f2.clone()]).unwrap();
            let joint = prod.characteristic(&PhasePoint::new(vec![c(a, b), c(x, y)]).unwrap()).unwrap();
            let split = f1.characteristic1(c(a, b)) * f2.characteristic1(c(x, y));
            prop_assert!((joint - split).norm() < 1e-10);
        }
    }
}
