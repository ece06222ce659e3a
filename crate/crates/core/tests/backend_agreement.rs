use cvlearn::sampling::{pair_sample, SamplerBackend, SeedStream};
use cvlearn::stats::ks_two_sample;
use cvlearn::{Complex64, ReflectionSymmetry, StateModel};

fn marginal_ks(state: &StateModel, rotation: &ReflectionSymmetry, a: &SamplerBackend, b: &SamplerBackend, n: usize) -> (f64, f64) {
    let x = pair_sample(state, rotation, n, a, &SeedStream::new(1, "backend-a")).unwrap();
    let y = pair_sample(state, rotation, n, b, &SeedStream::new(2, "backend-b")).unwrap();
    let (_, px) = ks_two_sample(&x.xs, &y.xs).unwrap();
    let (_, pp) = ks_two_sample(&x.ps, &y.ps).unwrap();
    (px, pp)
}

#[test]
fn gaussian_sampler_agrees_with_fft_for_rotated_squeezed_pairs() {
    let s = StateModel::squeezed_vacuum(1.4, 0.35).unwrap();
    let sym = s.symmetry().unwrap();
    let (px, pp) = marginal_ks(&s, &sym, &SamplerBackend::GaussianAnalytic, &SamplerBackend::fft(), 40_000);
    assert!(px > 1e-3 && pp > 1e-3, "p-values {px} {pp}");
}

#[test]
fn fock_exact_agrees_with_fft_for_a_small_cat() {
    let s = StateModel::cat(Complex64::new(1.0, 0.0), 1).unwrap();
    let id = ReflectionSymmetry::identity(1);
    let fock = SamplerBackend::FockExact { dim: 20, half_width: 8.0, points: 256 };
    let (px, pp) = marginal_ks(&s, &id, &fock, &SamplerBackend::fft(), 40_000);
    assert!(px > 1e-3 && pp > 1e-3, "p-values {px} {pp}");
}

#[test]
fn batches_are_reproducible_and_stream_dependent() {
    let s = StateModel::fock(2).unwrap();
    let id = ReflectionSymmetry::identity(1);
    let a = pair_sample(&s, &id, 5000, &SamplerBackend::fft(), &SeedStream::new(9, "r")).unwrap();
    let b = pair_sample(&s, &id, 5000, &SamplerBackend::fft(), &SeedStream::new(9, "r")).unwrap();
    let c = pair_sample(&s, &id, 5000, &SamplerBackend::fft(), &SeedStream::new(9, "r").child(0)).unwrap();
    assert_eq!(a.xs, b.xs);
    assert_eq!(a.ps, b.ps);
    assert_ne!(a.xs, c.xs);
    assert_eq!(a.copies_consumed, 10_000);
}
