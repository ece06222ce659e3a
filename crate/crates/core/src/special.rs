//! Special functions shared by the analytic state families and the oracle.

use num_complex::Complex64;

const PI_QUARTER_INV: f64 = 0.751_125_544_464_942_5; // π^{-1/4}

/// Position-space Fock wavefunctions ψ_0(q)..ψ_{count-1}(q) for x̂ = (a+a†)/√2.
pub fn hermite_functions(q: f64, count: usize) -> Vec<f64> {
    let mut out = vec![0.0; count];
    hermite_functions_into(q, &mut out);
    out
}

pub fn hermite_functions_into(q: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = PI_QUARTER_INV * (-0.5 * q * q).exp();
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * q * out[0];
    }
    for n in 1..out.len().saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] = (2.0 / (nf + 1.0)).sqrt() * q * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
}

/// Generalized Laguerre polynomial L_n^{(a)}(x) by three-term recurrence.
pub fn laguerre(n: usize, a: usize, x: f64) -> f64 {
    let a = a as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - x;
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0 + a - x) * cur - (kf + a) * prev) / (kf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

pub fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// Closed-form ⟨m|D(γ)|n⟩ for D(γ) = exp(γa† − γ̄a).
pub fn displacement_element(m: usize, n: usize, gamma: Complex64) -> Complex64 {
    let x = gamma.norm_sqr();
    let envelope = (-0.5 * x).exp();
    let (lo, hi, base) = if m >= n {
        (n, m, gamma)
    } else {
        (m, n, -gamma.conj())
    };
    let diff = hi - lo;
    let ratio = (0.5 * (ln_factorial(lo) - ln_factorial(hi))).exp();
    base.powu(diff as u32) * (ratio * envelope * laguerre(lo, diff, x))
}

/// All elements ⟨m|D(γ)|n⟩ for m, n < dim, row-major.
///
/// Walks each diagonal m − n = ±a with the Laguerre recurrence in the lower
/// index, so the whole block costs O(dim²).
pub fn displacement_matrix(dim: usize, gamma: Complex64) -> Vec<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    let mut out = vec![zero; dim * dim];
    let x = gamma.norm_sqr();
    if x == 0.0 {
        for k in 0..dim {
            out[k * dim + k] = Complex64::new(1.0, 0.0);
        }
        return out;
    }
    // Far outside the retained block every element underflows.
    if x > 2.0 * dim as f64 + 1000.0 {
        return out;
    }
    let mag = x.sqrt();
    let unit = gamma / mag;
    let ln_mag = mag.ln();
    let mut phase = Complex64::new(1.0, 0.0);
    let mut ln_fact_a = 0.0;
    for a in 0..dim {
        if a > 0 {
            phase *= unit;
            ln_fact_a += (a as f64).ln();
        }
        let lower_phase = if a % 2 == 0 { phase.conj() } else { -phase.conj() };
        let af = a as f64;
        let mut pref = (af * ln_mag - 0.5 * ln_fact_a - 0.5 * x).exp();
        let mut l_prev = 0.0;
        let mut l_cur = 1.0;
        for k in 0..dim - a {
            if k > 0 {
                let kf = (k - 1) as f64;
                let next = ((2.0 * kf + 1.0 + af - x) * l_cur - (kf + af) * l_prev) / (kf + 1.0);
                l_prev = l_cur;
                l_cur = next;
                pref *= ((k as f64) / (k as f64 + af)).sqrt();
            }
            let v = pref * l_cur;
            out[(k + a) * dim + k] = phase * v;
            if a > 0 {
                out[k * dim + k + a] = lower_phase * v;
            }
        }
    }
    out
}

/// ⟨u|v⟩ for coherent states.
pub fn coherent_overlap(u: Complex64, v: Complex64) -> Complex64 {
    (-0.5 * u.norm_sqr() - 0.5 * v.norm_sqr() + u.conj() * v).exp()
}

/// ⟨u|D(γ)|v⟩ for coherent states |u⟩, |v⟩.
pub fn coherent_displacement_element(u: Complex64, gamma: Complex64, v: Complex64) -> Complex64 {
    let phase = 0.5 * (gamma * v.conj() - gamma.conj() * v);
    phase.exp() * coherent_overlap(u, gamma + v)
}

/// Position wavefunction ⟨q|γ⟩ of the coherent state |γ⟩ = D(γ)|0⟩.
pub fn coherent_wavefunction(gamma: Complex64, q: f64) -> Complex64 {
    let q0 = std::f64::consts::SQRT_2 * gamma.re;
    let p0 = std::f64::consts::SQRT_2 * gamma.im;
    let d = q - q0;
    let arg = Complex64::new(-0.5 * d * d, p0 * q - gamma.re * gamma.im);
    arg.exp() * PI_QUARTER_INV
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn hermite_functions_are_orthonormal() {
        let h = 0.01;
        let count = 8;
        let mut gram = vec![0.0; count * count];
        let mut q = -12.0;
        while q < 12.0 {
            let psi = hermite_functions(q, count);
            for i in 0..count {
                for j in 0..count {
                    gram[i * count + j] += psi[i] * psi[j] * h;
                }
            }
            q += h;
        }
        for i in 0..count {
            for j in 0..count {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(gram[i * count + j], expected, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn laguerre_low_orders() {
        assert_abs_diff_eq!(laguerre(1, 0, 1.0), 0.0);
        assert_abs_diff_eq!(laguerre(2, 0, 2.0), 1.0 - 4.0 + 2.0, epsilon = 1e-14);
        // L_2^{(1)}(x) = (x^2 - 6x + 6)/2
        assert_abs_diff_eq!(laguerre(2, 1, 3.0), (9.0 - 18.0 + 6.0) / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn displacement_elements_match_coherent_amplitudes() {
        let g = Complex64::new(0.7, -0.4);
        let n_max = 12;
        for m in 0..n_max {
            let coherent = (-0.5 * g.norm_sqr()).exp() * g.powu(m as u32)
                / ln_factorial(m).mul_add(0.5, 0.0).exp();
            let got = displacement_element(m, 0, g);
            assert_abs_diff_eq!(got.re, coherent.re, epsilon = 1e-13);
            assert_abs_diff_eq!(got.im, coherent.im, epsilon = 1e-13);
        }
        let e01 = displacement_element(0, 1, g);
        let expected = -g.conj() * (-0.5 * g.norm_sqr()).exp();
        assert_abs_diff_eq!(e01.re, expected.re, epsilon = 1e-14);
        assert_abs_diff_eq!(e01.im, expected.im, epsilon = 1e-14);
    }

    #[test]
    fn displacement_matrix_matches_elementwise_form() {
        for &g in &[
            Complex64::new(0.3, 0.2),
            Complex64::new(-1.7, 2.1),
            Complex64::new(0.0, -3.0),
        ] {
            let dim = 30;
            let fast = displacement_matrix(dim, g);
            for m in 0..dim {
                for n in 0..dim {
                    let slow = displacement_element(m, n, g);
                    assert!((fast[m * dim + n] - slow).norm() < 1e-12, "({m},{n}) {g}");
                }
            }
        }
    }

    #[test]
    fn displacement_matrix_columns_are_nearly_unit() {
        let dim = 60;
        let g = Complex64::new(1.1, -0.8);
        let d = displacement_matrix(dim, g);
        for n in 0..10 {
            let norm: f64 = (0..dim).map(|m| d[m * dim + n].norm_sqr()).sum();
            assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn coherent_wavefunction_has_unit_norm() {
        let g = Complex64::new(1.3, -0.6);
        let h = 0.005;
        let mut norm = 0.0;
        let mut mean = 0.0;
        let mut q = -15.0;
        while q < 15.0 {
            let p = coherent_wavefunction(g, q).norm_sqr();
            norm += p * h;
            mean += q * p * h;
            q += h;
        }
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(mean, std::f64::consts::SQRT_2 * g.re, epsilon = 1e-9);
    }
}
