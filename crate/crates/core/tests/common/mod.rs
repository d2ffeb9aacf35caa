#![allow(dead_code)]

use qfc_core::plant::{MarkovianNoise, Oscillator, SystemModel};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// Oscillator model with ω_p = ω_s and the given dimensionless A, B and μ.
/// S_ZZ = μ/√(B² − A²), S_ZF = S_ZZ(A − ω_p²), S_FF = S_ZZ(B² − 2Aω_p² + ω_p⁴)
/// in units ω_p = 1 rescaled to the chosen ω_p.
pub fn model_from_ab(a: f64, b: f64, mu: f64, omega_p: f64) -> SystemModel {
    let (a, b) = (a * omega_p * omega_p, b * omega_p * omega_p);
    let w2 = omega_p * omega_p;
    let s_zz = mu / (b * b - a * a).sqrt();
    let s_zf = s_zz * (a - w2);
    let s_ff = s_zz * (b * b - 2.0 * a * w2 + w2 * w2);
    SystemModel::new(
        Oscillator::new(omega_p, 0.0).unwrap(),
        MarkovianNoise::new(s_zz, s_ff, s_zf).unwrap(),
    )
    .unwrap()
}

/// Random valid model with μ ∈ [1, 10], A/B ∈ [−1, 0.999], B ∈ [0.5, 3] and
/// ω_p ∈ [0.3, 3].
pub fn random_model(rng: &mut ChaCha8Rng) -> SystemModel {
    let mu = rng.random_range(1.0..10.0);
    let ratio = rng.random_range(-1.0..0.999);
    let b = rng.random_range(0.5..3.0);
    let omega_p = rng.random_range(0.3..3.0);
    model_from_ab(ratio * b, b, mu, omega_p)
}
