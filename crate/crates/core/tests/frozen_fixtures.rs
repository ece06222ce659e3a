//! Frozen reference values for the even/odd cat with β = 2.
//!
//! The oracle below evaluates tr(ρ D(−iα)) from coherent-state overlaps
//! ⟨a|b⟩ = exp(−|a|²/2 − |b|²/2 + āb) and
//! ⟨b₁|D(γ)|b₂⟩ = ⟨b₁|γ + b₂⟩ exp((γ b̄₂ − γ̄ b₂)/2). It shares no code with
//! the library; the table was produced by it once and is checked both ways.

use cvlearn::fock_oracle::characteristic_trace;
use cvlearn::{Complex64, PhasePoint, StateModel};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn overlap(a: Complex64, b: Complex64) -> Complex64 {
    (-0.5 * a.norm_sqr() - 0.5 * b.norm_sqr() + a.conj() * b).exp()
}

fn displaced_element(b1: Complex64, g: Complex64, b2: Complex64) -> Complex64 {
    overlap(b1, g + b2) * ((g * b2.conj() - g.conj() * b2) * 0.5).exp()
}

fn coherent_oracle(beta: Complex64, parity: f64, alpha: Complex64) -> Complex64 {
    let g = c(0.0, -1.0) * alpha;
    let kets = [(1.0, beta), (parity, -beta)];
    let mut num = c(0.0, 0.0);
    let mut norm = c(0.0, 0.0);
    for (c1, b1) in kets {
        for (c2, b2) in kets {
            num += c1 * c2 * displaced_element(b1, g, b2);
            norm += c1 * c2 * overlap(b1, b2);
        }
    }
    num / norm
}

// (parity, α, C(α))
const FROZEN: [(f64, [f64; 2], f64); 16] = [
    (1.0, [0.0, 0.0], 1.0),
    (1.0, [0.5, 0.0], -0.366829192058415),
    (1.0, [1.0, 0.0], -0.3961185452422025),
    (1.0, [1.5, 0.0], 0.3117259889956164),
    (1.0, [-2.0, 0.0], -0.019639300105439374),
    (1.0, [0.7, 0.4], -0.6799285954902088),
    (1.0, [-0.3, 1.1], 0.19623469799409804),
    (1.0, [0.0, 2.5], 0.2061939972569841),
    (-1.0, [0.0, 0.0], 1.0),
    (-1.0, [0.5, 0.0], -0.367667677768667),
    (-1.0, [1.0, 0.0], -0.39679147365885453),
    (-1.0, [1.5, 0.0], 0.3117173133844708),
    (-1.0, [-2.0, 0.0], -0.019743311359299964),
    (-1.0, [0.7, 0.4], -0.681634805571038),
    (-1.0, [-0.3, 1.1], 0.1820952295449642),
    (-1.0, [0.0, 2.5], -0.11842902890360268),
];

#[test]
fn oracle_reproduces_frozen_table() {
    for (parity, a, want) in FROZEN {
        let got = coherent_oracle(c(2.0, 0.0), parity, c(a[0], a[1]));
        assert!((got - c(want, 0.0)).norm() < 1e-13, "parity {parity} at {a:?}: {got}");
    }
}

#[test]
fn analytic_cat_matches_frozen_table() {
    for (parity, a, want) in FROZEN {
        let s = StateModel::cat(c(2.0, 0.0), parity as i8).unwrap();
        let got = s.characteristic(&PhasePoint::single(c(a[0], a[1]))).unwrap();
        assert!((got - c(want, 0.0)).norm() < 1e-12, "parity {parity} at {a:?}: {got}");
    }
}

#[test]
fn truncated_trace_matches_frozen_table() {
    for parity in [1i8, -1] {
        let s = StateModel::cat(c(2.0, 0.0), parity).unwrap();
        let rho = s.to_fock(40, 1e-10).unwrap();
        for (p, a, want) in FROZEN.iter().filter(|f| f.0 == parity as f64) {
            let got = characteristic_trace(&rho, &PhasePoint::single(c(a[0], a[1]))).unwrap();
            assert!((got - c(*want, 0.0)).norm() < 1e-8, "parity {p} at {a:?}: {got}");
        }
    }
}

#[test]
fn off_axis_oracle_agreement() {
    // rotated amplitude: the table above only covers real β
    let beta = Complex64::from_polar(1.5, 0.7);
    let s = StateModel::cat(beta, 1).unwrap();
    for k in 0..24 {
        let alpha = Complex64::from_polar(0.15 * k as f64, 0.9 * k as f64);
        let want = coherent_oracle(beta, 1.0, alpha);
        let got = s.characteristic(&PhasePoint::single(alpha)).unwrap();
        assert!((got - want).norm() < 1e-12, "{alpha}: {got} vs {want}");
    }
}
