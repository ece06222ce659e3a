//! Brute-force truncated Fock-space backend.
//!
//! Everything here is built from matrices: annihilation operators, matrix
//! exponentials for displacements and the balanced beam splitter, and
//! explicit phase rotations. It is the reference the analytic state
//! families are checked against.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_4, PI, SQRT_2};
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::phase_space::{Field2D, GridSpec, Table};
use crate::special::hermite_functions;
use crate::states::{PhasePoint, StateModel};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

pub const DEFAULT_DIM: usize = 40;
pub const DEFAULT_JOINT_DIM: usize = 24;

/// Extra levels used when exponentiating, so the retained block is exact to
/// rounding for states well inside it.
fn padded_dim(dim: usize) -> usize {
    2 * dim + 32
}

#[derive(Clone, Debug)]
pub struct TruncatedDensityMatrix {
    dim: usize,
    modes: usize,
    matrix: DMatrix<Complex64>,
}

impl TruncatedDensityMatrix {
    /// Validates Hermiticity, positivity and trace ∈ [1 − tail_tol, 1 + 1e−10].
    pub fn new(dim: usize, modes: usize, matrix: DMatrix<Complex64>, tail_tol: f64) -> Result<Self> {
        Self::with_tail_check(dim, modes, matrix, tail_tol)
    }

    pub fn with_tail_check(dim: usize, modes: usize, matrix: DMatrix<Complex64>, tail_tol: f64) -> Result<Self> {
        if modes == 0 || modes > 2 {
            return Err(Error::invalid("modes", "truncated matrices support one or two modes"));
        }
        let size = dim.pow(modes as u32);
        if matrix.nrows() != size || matrix.ncols() != size {
            return Err(Error::DimensionMismatch { expected: size, got: matrix.nrows() });
        }
        let herm = (&matrix - matrix.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > 1e-10 {
            return Err(Error::Validation(format!("density matrix not Hermitian ({herm:.3e})")));
        }
        let rho = TruncatedDensityMatrix { dim, modes, matrix };
        let trace = rho.trace();
        if trace > 1.0 + 1e-10 {
            return Err(Error::Validation(format!("trace {trace} exceeds 1")));
        }
        if 1.0 - trace > tail_tol {
            return Err(Error::TailMass { tail: 1.0 - trace, tolerance: tail_tol });
        }
        let min_eig = rho.min_eigenvalue();
        if min_eig < -1e-9 {
            return Err(Error::Validation(format!("negative eigenvalue {min_eig:.3e}")));
        }
        Ok(rho)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// Probability mass lost to truncation.
    pub fn tail(&self) -> f64 {
        1.0 - self.trace()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        // Hermitian eigenvalues through the real symmetric embedding [[A, −B], [B, A]].
        let n = self.matrix.nrows();
        let mut big = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            for j in 0..n {
                let z = self.matrix[(i, j)];
                big[(i, j)] = z.re;
                big[(i + n, j + n)] = z.re;
                big[(i, j + n)] = -z.im;
                big[(i + n, j)] = z.im;
            }
        }
        let big = (&big + big.transpose()) * 0.5;
        SymmetricEigen::new(big).eigenvalues.min()
    }

    pub fn kron(&self, other: &TruncatedDensityMatrix) -> Result<TruncatedDensityMatrix> {
        if self.modes != 1 || other.modes != 1 || self.dim != other.dim {
            return Err(Error::Unsupported("tensor product of single-mode matrices with equal dims only".into()));
        }
        Ok(TruncatedDensityMatrix {
            dim: self.dim,
            modes: 2,
            matrix: self.matrix.kronecker(&other.matrix),
        })
    }

    /// tr(ρ O).
    pub fn expectation(&self, op: &DMatrix<Complex64>) -> Result<Complex64> {
        if op.nrows() != self.matrix.nrows() || op.ncols() != self.matrix.ncols() {
            return Err(Error::DimensionMismatch { expected: self.matrix.nrows(), got: op.nrows() });
        }
        Ok((0..op.nrows())
            .map(|i| (0..op.nrows()).map(|j| self.matrix[(i, j)] * op[(j, i)]).sum::<Complex64>())
            .sum())
    }
}

#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub dim: usize,
    pub modes: usize,
    pub matrix: DMatrix<Complex64>,
    pub unitary: bool,
    /// max |(U†U − I)_ij| on the retained block; zero for non-unitary operators.
    pub leakage: f64,
}

impl OperatorMatrix {
    fn unitary(dim: usize, modes: usize, matrix: DMatrix<Complex64>) -> Self {
        let n = matrix.nrows();
        let leakage = (matrix.adjoint() * &matrix - DMatrix::<Complex64>::identity(n, n))
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        OperatorMatrix { dim, modes, matrix, unitary: true, leakage }
    }
}

pub fn annihilation(dim: usize) -> Result<OperatorMatrix> {
    if dim < 2 {
        return Err(Error::invalid("dim", "must be at least 2"));
    }
    let mut m = DMatrix::zeros(dim, dim);
    for n in 1..dim {
        m[(n - 1, n)] = Complex64::new((n as f64).sqrt(), 0.0);
    }
    Ok(OperatorMatrix { dim, modes: 1, matrix: m, unitary: false, leakage: 0.0 })
}

/// D(β) = exp(βa† − β̄a), exponentiated on a padded space and cut to `dim`.
pub fn displacement(beta: Complex64, dim: usize) -> Result<OperatorMatrix> {
    if dim < 2 {
        return Err(Error::invalid("dim", "must be at least 2"));
    }
    if beta.norm() > dim as f64 / 8.0 {
        return Err(Error::ConvergenceGuard(format!("|β| = {} exceeds dim/8 = {}", beta.norm(), dim as f64 / 8.0)));
    }
    let p = padded_dim(dim);
    let a = annihilation(p)?.matrix;
    let gen = a.adjoint() * beta - &a * beta.conj();
    let full = gen.exp();
    let block = full.view((0, 0), (dim, dim)).into_owned();
    Ok(OperatorMatrix::unitary(dim, 1, block))
}

pub fn phase_rotation(theta: f64, dim: usize) -> OperatorMatrix {
    let m = DMatrix::from_fn(dim, dim, |i, j| if i == j { Complex64::from_polar(1.0, theta * i as f64) } else { ZERO });
    OperatorMatrix { dim, modes: 1, matrix: m, unitary: true, leakage: 0.0 }
}

/// Spectral form of exp(t(a† − a)) on the padded space: with S = diag(iⁿ),
/// i(a† − a) = S J S† where J is real symmetric tridiagonal, so
/// D(|β|e^{iφ})_mn = e^{i(φ+π/2)(m−n)} Σ_k Q_mk Q_nk e^{−i|β|λ_k}.
#[derive(Debug)]
pub struct DisplacementCache {
    dim: usize,
    padded: usize,
    q: DMatrix<f64>,
    lambda: Vec<f64>,
}

impl DisplacementCache {
    pub fn new(dim: usize) -> Self {
        let padded = padded_dim(dim);
        let mut j = DMatrix::<f64>::zeros(padded, padded);
        for n in 0..padded - 1 {
            let v = ((n + 1) as f64).sqrt();
            j[(n + 1, n)] = v;
            j[(n, n + 1)] = v;
        }
        let eig = SymmetricEigen::new(j);
        DisplacementCache { dim, padded, q: eig.eigenvectors, lambda: eig.eigenvalues.iter().copied().collect() }
    }

    /// Shared cache per dimension.
    pub fn shared(dim: usize) -> Arc<DisplacementCache> {
        static CACHES: OnceLock<Mutex<HashMap<usize, Arc<DisplacementCache>>>> = OnceLock::new();
        let map = CACHES.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = map.lock().expect("cache lock");
        guard.entry(dim).or_insert_with(|| Arc::new(DisplacementCache::new(dim))).clone()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Rows [0, rows) and columns [0, cols) of D(β) on the padded space.
    pub fn block(&self, beta: Complex64, rows: usize, cols: usize) -> DMatrix<Complex64> {
        let t = beta.norm();
        let phi = beta.arg() + PI / 2.0;
        let e: Vec<Complex64> = self.lambda.iter().map(|l| Complex64::from_polar(1.0, -t * l)).collect();
        let p = self.padded;
        let mut out = DMatrix::zeros(rows, cols);
        let mut scaled = vec![ZERO; p];
        for n in 0..cols {
            for k in 0..p {
                scaled[k] = e[k] * self.q[(n, k)];
            }
            for m in 0..rows {
                let s: Complex64 = scaled.iter().enumerate().map(|(k, v)| v * self.q[(m, k)]).sum();
                out[(m, n)] = s * Complex64::from_polar(1.0, phi * (m as f64 - n as f64));
            }
        }
        out
    }

    pub fn padded(&self) -> usize {
        self.padded
    }
}

/// C_ρ(α) = tr(ρ D(−iα)) by explicit matrix traces.
pub fn characteristic_trace(rho: &TruncatedDensityMatrix, alpha: &PhasePoint) -> Result<Complex64> {
    if alpha.modes() != rho.modes() {
        return Err(Error::DimensionMismatch { expected: rho.modes(), got: alpha.modes() });
    }
    let d = rho.dim();
    for a in alpha.components() {
        if a.norm() > d as f64 / 8.0 {
            return Err(Error::ConvergenceGuard(format!("|α| = {} exceeds dim/8", a.norm())));
        }
    }
    let cache = DisplacementCache::shared(d);
    let blocks: Vec<DMatrix<Complex64>> = alpha
        .components()
        .iter()
        .map(|a| cache.block(Complex64::new(0.0, -1.0) * a, d, d))
        .collect();
    let m = rho.matrix();
    let mut total = ZERO;
    if rho.modes() == 1 {
        let dm = &blocks[0];
        for i in 0..d {
            for j in 0..d {
                total += m[(i, j)] * dm[(j, i)];
            }
        }
    } else {
        let full = blocks[0].kronecker(&blocks[1]);
        let n = d * d;
        for i in 0..n {
            for j in 0..n {
                total += m[(i, j)] * full[(j, i)];
            }
        }
    }
    Ok(total)
}

/// W(x, p) = (1/π) tr(ρ D(α) Π D(α)†) with α = (x + ip)/√2.
pub fn wigner_displaced_parity(rho: &TruncatedDensityMatrix, x: f64, p: f64) -> Result<f64> {
    if rho.modes() != 1 {
        return Err(Error::Unsupported("Wigner values for more than one mode".into()));
    }
    let d = rho.dim();
    let cache = DisplacementCache::shared(d);
    let alpha = Complex64::new(x, p) / SQRT_2;
    let pad = cache.padded();
    // Σ_k (−1)^k ⟨k|D(−α) ρ D(−α)†|k⟩
    let xm = cache.block(-alpha, pad, d);
    let y = &xm * rho.matrix();
    let mut total = 0.0;
    for k in 0..pad {
        let mut s = ZERO;
        for m in 0..d {
            s += y[(k, m)] * xm[(k, m)].conj();
        }
        total += if k % 2 == 0 { s.re } else { -s.re };
    }
    Ok(total / PI)
}

/// Homodyne density of x_θ: p(q) = ⟨q| R(θ)† ρ R(θ) |q⟩ with R = e^{iθn̂}.
pub fn homodyne_pdf(rho: &TruncatedDensityMatrix, theta: f64, grid: &GridSpec) -> Result<Table> {
    if rho.modes() != 1 || grid.rank() != 1 {
        return Err(Error::Unsupported("oracle homodyne densities are single-mode".into()));
    }
    let d = rho.dim();
    let r = phase_rotation(theta, d).matrix;
    let rotated = r.adjoint() * rho.matrix() * &r;
    let table = Table::from_fn(grid.clone(), |q| {
        let psi = hermite_functions(q[0], d);
        let mut total = ZERO;
        for m in 0..d {
            for n in 0..d {
                total += rotated[(m, n)] * psi[m] * psi[n];
            }
        }
        total.re
    });
    let tol = (rho.tail() + 1e-6).max(1e-6);
    if (table.mass() - rho.trace()).abs() > tol {
        return Err(Error::GridTooSmall { mass: table.mass(), tolerance: tol });
    }
    Ok(table)
}

/// Per-sector blocks of BS = exp(π/4 (a₁†a₂ − a₁a₂†)), restricted to both
/// modes below `dim`. Sector N has basis |k, N−k⟩.
struct BeamSplitterSectors {
    dim: usize,
    /// (first retained k, block over retained k values)
    blocks: Vec<(usize, DMatrix<f64>)>,
}

impl BeamSplitterSectors {
    fn new(dim: usize) -> Self {
        let mut blocks = Vec::with_capacity(2 * dim - 1);
        for n_tot in 0..=2 * (dim - 1) {
            let size = n_tot + 1;
            let mut g = DMatrix::<f64>::zeros(size, size);
            for k in 0..size {
                if k < n_tot {
                    g[(k + 1, k)] += FRAC_PI_4 * (((k + 1) * (n_tot - k)) as f64).sqrt();
                }
                if k > 0 {
                    g[(k - 1, k)] -= FRAC_PI_4 * ((k * (n_tot - k + 1)) as f64).sqrt();
                }
            }
            let u = g.exp();
            let lo = n_tot.saturating_sub(dim - 1);
            let hi = n_tot.min(dim - 1);
            blocks.push((lo, u.view((lo, lo), (hi - lo + 1, hi - lo + 1)).into_owned()));
        }
        BeamSplitterSectors { dim, blocks }
    }

    fn index(&self, n_tot: usize, k: usize) -> usize {
        k * self.dim + (n_tot - k)
    }

    fn dense(&self) -> DMatrix<Complex64> {
        let n = self.dim * self.dim;
        let mut m = DMatrix::zeros(n, n);
        for (n_tot, (lo, b)) in self.blocks.iter().enumerate() {
            for i in 0..b.nrows() {
                for j in 0..b.ncols() {
                    m[(self.index(n_tot, lo + i), self.index(n_tot, lo + j))] = Complex64::new(b[(i, j)], 0.0);
                }
            }
        }
        m
    }

    /// B ρ B† exploiting the block structure.
    fn conjugate(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let n = self.dim * self.dim;
        let mut out = DMatrix::zeros(n, n);
        for (na, (la, ba)) in self.blocks.iter().enumerate() {
            let ia: Vec<usize> = (0..ba.nrows()).map(|i| self.index(na, la + i)).collect();
            for (nb, (lb, bb)) in self.blocks.iter().enumerate() {
                let ib: Vec<usize> = (0..bb.nrows()).map(|i| self.index(nb, lb + i)).collect();
                let sub = DMatrix::from_fn(ia.len(), ib.len(), |i, j| rho[(ia[i], ib[j])]);
                if sub.iter().all(|z| *z == ZERO) {
                    continue;
                }
                let left = ba.map(|v| Complex64::new(v, 0.0));
                let right = bb.transpose().map(|v| Complex64::new(v, 0.0));
                let res = left * sub * right;
                for i in 0..ia.len() {
                    for j in 0..ib.len() {
                        out[(ia[i], ib[j])] = res[(i, j)];
                    }
                }
            }
        }
        out
    }
}

/// Balanced beam splitter on two modes of `dim` levels each (index m₁·dim + m₂).
pub fn beam_splitter(dim: usize) -> Result<OperatorMatrix> {
    if dim < 2 {
        return Err(Error::invalid("dim", "must be at least 2"));
    }
    if dim.pow(4) * 16 > crate::states::MEMORY_BUDGET_BYTES {
        return Err(Error::MemoryBudget(format!("two-mode operator at dim {dim}")));
    }
    Ok(OperatorMatrix::unitary(dim, 2, BeamSplitterSectors::new(dim).dense()))
}

/// Output state of the two-copy circuit: port-1 copy rotated by e^{−iφ n̂}
/// (so that it contributes C(ᾱU) with U = e^{iφ}), then the beam splitter.
pub fn two_copy_output(rho: &TruncatedDensityMatrix, u_phase: f64) -> Result<TruncatedDensityMatrix> {
    if rho.modes() != 1 {
        return Err(Error::Unsupported("two-copy circuit for single-mode states".into()));
    }
    let d = rho.dim();
    let r = phase_rotation(-u_phase, d).matrix;
    let rotated = &r * rho.matrix() * r.adjoint();
    let input = rotated.kronecker(rho.matrix());
    let out = BeamSplitterSectors::new(d).conjugate(&input);
    Ok(TruncatedDensityMatrix { dim: d, modes: 2, matrix: out })
}

/// Joint density of (x on mode 1, p on mode 2) after the two-copy circuit.
pub fn joint_bs_pdf(rho: &TruncatedDensityMatrix, u_phase: f64, grid: &GridSpec) -> Result<Field2D> {
    if grid.rank() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: grid.rank() });
    }
    let out = two_copy_output(rho, u_phase)?;
    let d = rho.dim();
    let m = out.matrix();
    let (ax, ap) = (grid.axes[0], grid.axes[1]);
    // momentum amplitudes ⟨p|n⟩ = (−i)ⁿ ψ_n(p)
    let mom: Vec<Vec<Complex64>> = ap
        .nodes()
        .iter()
        .map(|&p| {
            let psi = hermite_functions(p, d);
            let mut ph = ONE;
            psi.iter()
                .map(|v| {
                    let z = ph * *v;
                    ph *= Complex64::new(0.0, -1.0);
                    z
                })
                .collect()
        })
        .collect();
    let mut values = Vec::with_capacity(grid.len());
    let mut k = DMatrix::<Complex64>::zeros(d, d);
    for x in ax.nodes() {
        let psi = hermite_functions(x, d);
        k.fill(ZERO);
        for m1 in 0..d {
            for n1 in 0..d {
                let w = psi[m1] * psi[n1];
                if w == 0.0 {
                    continue;
                }
                for m2 in 0..d {
                    for n2 in 0..d {
                        k[(m2, n2)] += m[(m1 * d + m2, n1 * d + n2)] * w;
                    }
                }
            }
        }
        for a in &mom {
            let mut total = ZERO;
            for m2 in 0..d {
                let mut row = ZERO;
                for n2 in 0..d {
                    row += k[(m2, n2)] * a[n2].conj();
                }
                total += a[m2] * row;
            }
            values.push(Complex64::new(total.re, 0.0));
        }
    }
    let field = Field2D::new(grid.clone(), values)?;
    let mass = field.integral().re;
    let tol = 1e-5 + out.tail().max(0.0);
    if (mass - out.trace()).abs() > tol || mass < 1.0 - tol - 1e-5 {
        return Err(Error::GridTooSmall { mass, tolerance: tol });
    }
    Ok(field)
}

/// One analytic-versus-trace comparison of the fixture suite.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OracleComparison {
    pub fixture: String,
    pub dim: usize,
    pub points: usize,
    pub max_abs_diff: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// 200 probe points: 10 radii in (0, 3] by 20 angles, offset per ring.
pub fn oracle_probe_grid() -> Vec<PhasePoint> {
    let mut out = Vec::with_capacity(200);
    for ri in 0..10 {
        let r = 0.3 * (ri + 1) as f64;
        for k in 0..20 {
            let angle = (k as f64 + 0.29 * ri as f64) * PI / 10.0;
            out.push(PhasePoint::single(Complex64::from_polar(r, angle)));
        }
    }
    out
}

/// Named single-mode fixtures checked by [`oracle_suite`].
pub fn oracle_fixtures() -> Result<Vec<(String, StateModel)>> {
    let mut out = vec![("vacuum".to_string(), StateModel::vacuum(1)?)];
    for (r, theta) in [(1.5, 0.0), (0.7, 0.4), (1.2, -1.1)] {
        out.push((format!("squeezed r={r} theta={theta}"), StateModel::squeezed_vacuum(r, theta)?));
    }
    for n in 0..=5 {
        out.push((format!("fock n={n}"), StateModel::fock(n)?));
    }
    for (beta, parity) in [(Complex64::new(2.0, 0.0), 1), (Complex64::new(2.0, 0.0), -1), (Complex64::from_polar(1.5, 0.7), 1)] {
        out.push((format!("cat beta={beta} parity={parity}"), StateModel::cat(beta, parity)?));
    }
    out.push(("binomial S=1 N=2 logical 0".into(), StateModel::binomial(&crate::states::binomial_code_coefficients(1, 2, 0))?));
    Ok(out)
}

/// Compares every fixture's analytic characteristic function against the
/// truncated trace on the probe grid at each dimension.
pub fn oracle_suite(dims: &[usize], tolerance: f64) -> Result<Vec<OracleComparison>> {
    let grid = oracle_probe_grid();
    let mut out = Vec::new();
    for (name, state) in oracle_fixtures()? {
        for &dim in dims {
            let rho = state.to_fock(dim, 1e-8)?;
            let mut worst: f64 = 0.0;
            for a in &grid {
                let exact = state.characteristic(a)?;
                let traced = characteristic_trace(&rho, a)?;
                worst = worst.max((exact - traced).norm());
            }
            out.push(OracleComparison {
                fixture: name.clone(),
                dim,
                points: grid.len(),
                max_abs_diff: worst,
                tolerance,
                passed: worst <= tolerance,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::StateModel;

    fn vacuum(dim: usize) -> TruncatedDensityMatrix {
        StateModel::vacuum(1).unwrap().to_fock(dim, 1e-12).unwrap()
    }

    #[test]
    fn annihilation_structure() {
        let a = annihilation(3).unwrap().matrix;
        assert_eq!(a[(0, 1)].re, 1.0);
        assert!((a[(1, 2)].re - SQRT_2).abs() < 1e-15);
        let comm = &a * a.adjoint() - a.adjoint() * &a;
        for i in 0..2 {
            assert!((comm[(i, i)] - ONE).norm() < 1e-14);
        }
        assert!((comm[(2, 2)].re + 2.0).abs() < 1e-14);
        let vac = DMatrix::from_fn(3, 1, |i, _| if i == 0 { ONE } else { ZERO });
        assert!((a * vac).iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn displacement_basics() {
        let id = displacement(ZERO, 10).unwrap();
        assert!((id.matrix - DMatrix::<Complex64>::identity(10, 10)).iter().all(|z| z.norm() < 1e-14));
        let d = displacement(ONE, 24).unwrap();
        assert!((d.matrix[(0, 0)].re - (-0.5f64).exp()).abs() < 1e-8);
        let dm = displacement(-ONE, 24).unwrap();
        let prod = &d.matrix * &dm.matrix;
        // exact on the low block where neither factor leaks
        for i in 0..6 {
            for j in 0..6 {
                let e = if i == j { ONE } else { ZERO };
                assert!((prod[(i, j)] - e).norm() < 1e-7);
            }
        }
        assert!(matches!(displacement(Complex64::new(3.0, 0.0), 16), Err(Error::ConvergenceGuard(_))));
    }

    #[test]
    fn spectral_and_pade_displacements_agree() {
        let beta = Complex64::new(0.9, -1.3);
        let pade = displacement(beta, 24).unwrap().matrix;
        let spec = DisplacementCache::new(24).block(beta, 24, 24);
        let worst = (&pade - &spec).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(worst < 1e-10, "{worst}");
        let closed = crate::special::displacement_matrix(24, beta);
        for m in 0..24 {
            for n in 0..24 {
                assert!((spec[(m, n)] - closed[m * 24 + n]).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn phase_rotation_action() {
        assert!((phase_rotation(0.0, 5).matrix - DMatrix::<Complex64>::identity(5, 5)).iter().all(|z| z.norm() == 0.0));
        let r = phase_rotation(PI, 4).matrix;
        assert!((r[(1, 1)] + ONE).norm() < 1e-15);
        let a = annihilation(6).unwrap().matrix;
        let theta = 0.7;
        let r = phase_rotation(theta, 6).matrix;
        let conj = &r * &a * r.adjoint();
        let expected = &a * Complex64::from_polar(1.0, -theta);
        assert!((conj - expected).iter().all(|z| z.norm() < 1e-12));
        let conj2 = r.adjoint() * &a * &r;
        let expected2 = &a * Complex64::from_polar(1.0, theta);
        assert!((conj2 - expected2).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn beam_splitter_heisenberg_action_and_number_conservation() {
        let dim = 10;
        let bs = beam_splitter(dim).unwrap().matrix;
        let a = annihilation(dim).unwrap().matrix;
        let id = DMatrix::<Complex64>::identity(dim, dim);
        let a1 = a.kronecker(&id);
        let a2 = id.kronecker(&a);
        let h1 = bs.adjoint() * &a1 * &bs;
        let h2 = bs.adjoint() * &a2 * &bs;
        let t1 = (&a1 + &a2) / Complex64::new(SQRT_2, 0.0);
        let t2 = (&a2 - &a1) / Complex64::new(SQRT_2, 0.0);
        // interior: total photon number below dim − 1
        for i in 0..dim * dim {
            for j in 0..dim * dim {
                let (ni, nj) = (i / dim + i % dim, j / dim + j % dim);
                if ni + 1 < dim && nj + 1 < dim {
                    assert!((h1[(i, j)] - t1[(i, j)]).norm() < 1e-7);
                    assert!((h2[(i, j)] - t2[(i, j)]).norm() < 1e-7);
                }
            }
        }
        let n_tot = DMatrix::from_fn(dim * dim, dim * dim, |i, j| {
            if i == j {
                Complex64::new((i / dim + i % dim) as f64, 0.0)
            } else {
                ZERO
            }
        });
        let comm = &bs * &n_tot - &n_tot * &bs;
        assert!(comm.iter().all(|z| z.norm() < 1e-8));
        // |1,0⟩ → (|1,0⟩ − |0,1⟩)/√2
        let col: Vec<Complex64> = (0..dim * dim).map(|i| bs[(i, dim)]).collect();
        assert!((col[dim].re - 1.0 / SQRT_2).abs() < 1e-12);
        assert!((col[1].re + 1.0 / SQRT_2).abs() < 1e-12);
        assert!((bs[(0, 0)] - ONE).norm() < 1e-14);
    }

    #[test]
    fn measured_observables_commute_after_the_beam_splitter() {
        let dim = 8;
        let a = annihilation(dim).unwrap().matrix;
        let x = (&a + a.adjoint()) / Complex64::new(SQRT_2, 0.0);
        let p = (&a - a.adjoint()) / Complex64::new(0.0, SQRT_2);
        let id = DMatrix::<Complex64>::identity(dim, dim);
        let x1 = x.kronecker(&id);
        let p2 = id.kronecker(&p);
        let comm = &x1 * &p2 - &p2 * &x1;
        assert!(comm.iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn characteristic_trace_examples() {
        let v = vacuum(40);
        let c = characteristic_trace(&v, &PhasePoint::single(ONE)).unwrap();
        assert!((c.re - (-0.5f64).exp()).abs() < 1e-10);
        let f1 = StateModel::fock(1).unwrap().to_fock(40, 0.0).unwrap();
        let c1 = characteristic_trace(&f1, &PhasePoint::single(Complex64::from_polar(1.0, 0.3))).unwrap();
        assert!(c1.norm() < 1e-6);
        let z = characteristic_trace(&f1, &PhasePoint::zero(1)).unwrap();
        assert!((z.re - f1.trace()).abs() < 1e-14);
    }

    #[test]
    fn wigner_of_fock_one_at_origin() {
        let f1 = StateModel::fock(1).unwrap().to_fock(20, 0.0).unwrap();
        let w = wigner_displaced_parity(&f1, 0.0, 0.0).unwrap();
        assert!((w + 1.0 / PI).abs() < 1e-10);
        let v = vacuum(20);
        let w = wigner_displaced_parity(&v, 0.5, -0.7).unwrap();
        assert!((w - (-(0.25 + 0.49f64)).exp() / PI).abs() < 1e-10);
    }

    #[test]
    fn homodyne_of_thermal_mixture() {
        let mut m = DMatrix::zeros(6, 6);
        m[(0, 0)] = Complex64::new(0.5, 0.0);
        m[(1, 1)] = Complex64::new(0.5, 0.0);
        let rho = TruncatedDensityMatrix::new(6, 1, m, 0.0).unwrap();
        let grid = GridSpec::line(8.0, 256).unwrap();
        let t = homodyne_pdf(&rho, 0.4, &grid).unwrap();
        for (i, v) in t.values.iter().enumerate() {
            let q = grid.axes[0].node(i);
            let psi = hermite_functions(q, 2);
            assert!((v - 0.5 * (psi[0] * psi[0] + psi[1] * psi[1])).abs() < 1e-14);
        }
        assert!((t.mass() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn joint_pdf_of_vacuum_is_product_normal() {
        let grid = GridSpec::square(6.0, 48).unwrap();
        let f = joint_bs_pdf(&vacuum(12), 0.0, &grid).unwrap();
        let (ax, ap) = (grid.axes[0], grid.axes[1]);
        for i in 0..ax.points {
            for j in 0..ap.points {
                let (x, p) = (ax.node(i), ap.node(j));
                let expected = (-x * x - p * p).exp() / PI;
                assert!((f.at(i, j).re - expected).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fourier_weyl_reconstruction_of_small_state() {
        // ρ = (1/π) ∫ d²α C(α) D(−iα)†
        let h = 1.0 / SQRT_2;
        let s = StateModel::binomial(&[Complex64::new(h, 0.0), Complex64::new(0.0, h)]).unwrap();
        let dim = 6;
        let rho = s.to_fock(dim, 1e-12).unwrap();
        let step = 0.08;
        let half = 7.0;
        let n = (2.0 * half / step) as usize;
        let mut rec = DMatrix::<Complex64>::zeros(dim, dim);
        for i in 0..n {
            for j in 0..n {
                let a = Complex64::new(-half + (i as f64 + 0.5) * step, -half + (j as f64 + 0.5) * step);
                let cval = s.characteristic1(a);
                let dm = crate::special::displacement_matrix(dim, Complex64::new(0.0, -1.0) * a);
                for m in 0..dim {
                    for k in 0..dim {
                        rec[(m, k)] += cval * dm[k * dim + m].conj() * (step * step / PI);
                    }
                }
            }
        }
        let worst = (&rec - rho.matrix()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn oracle_suite_passes_at_both_dims() {
        let rows = oracle_suite(&[40, 56], 1e-6).unwrap();
        assert_eq!(rows.len(), 2 * oracle_fixtures().unwrap().len());
        for r in &rows {
            assert!(r.passed, "{} at dim {}: {:e}", r.fixture, r.dim, r.max_abs_diff);
        }
    }
}
