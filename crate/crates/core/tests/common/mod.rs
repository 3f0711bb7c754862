#![allow(dead_code)]

use proptest::prelude::*;
use regretlab_core::{PayoffSignal, SinusoidTerm, Waveform};

/// Random multi-sine payoff: up to three terms, amplitudes in [-2, 2],
/// frequencies in [0.1, 5].
pub fn payoff_signal(n: usize) -> impl Strategy<Value = PayoffSignal> {
    let term = (
        prop::collection::vec(-2.0..2.0f64, n),
        0.1..5.0f64,
        0.0..std::f64::consts::TAU,
        prop::bool::ANY,
    )
        .prop_map(|(amplitude, omega, phase, sin)| SinusoidTerm {
            amplitude,
            omega,
            phase,
            waveform: if sin { Waveform::Sin } else { Waveform::Cos },
        });
    (prop::collection::vec(-1.0..1.0f64, n), prop::collection::vec(term, 1..=3))
        .prop_map(|(offset, terms)| PayoffSignal::analytic(offset, terms).unwrap())
}

pub fn action_count() -> impl Strategy<Value = usize> {
    prop::sample::select(vec![2usize, 3, 5])
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
