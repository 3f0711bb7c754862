//! Seeded random inputs for the property suites.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use regretlab_core::{PayoffSignal, SinusoidTerm, Waveform};

pub const ACTION_COUNTS: [usize; 3] = [2, 3, 5];
pub const MAX_TERMS: usize = 3;
pub const AMPLITUDE_RANGE: f64 = 2.0;
pub const OMEGA_RANGE: (f64, f64) = (0.1, 5.0);

/// Independent stream for trial `trial` under `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub fn action_count(rng: &mut impl Rng) -> usize {
    ACTION_COUNTS[rng.gen_range(0..ACTION_COUNTS.len())]
}

pub fn vector(rng: &mut impl Rng, n: usize, half_width: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-half_width..=half_width)).collect()
}

pub fn sinusoid_term(rng: &mut impl Rng, n: usize) -> SinusoidTerm {
    SinusoidTerm {
        amplitude: vector(rng, n, AMPLITUDE_RANGE),
        omega: rng.gen_range(OMEGA_RANGE.0..=OMEGA_RANGE.1),
        phase: rng.gen_range(0.0..std::f64::consts::TAU),
        waveform: if rng.gen_bool(0.5) { Waveform::Sin } else { Waveform::Cos },
    }
}

/// Constant offset plus one to three sinusoids.
pub fn payoff_signal(rng: &mut impl Rng, n: usize) -> PayoffSignal {
    let terms = (0..rng.gen_range(1..=MAX_TERMS)).map(|_| sinusoid_term(rng, n)).collect();
    PayoffSignal::analytic(vector(rng, n, AMPLITUDE_RANGE), terms).expect("generated signal is valid")
}
