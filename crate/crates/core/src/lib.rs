//! Simulation toolkit for quantum Loschmidt-echo (fidelity) decay in chaotic
//! model systems, together with the classical correlation functions that the
//! echo of a wide incoherent mixture tracks.
//!
//! Two models are covered:
//!
//! * the quantum kicked rotor on a torus ([`hilbert`], [`qkr`]) with its
//!   classical counterpart, the standard map ([`classical_rotor`]);
//! * a periodically driven quartic oscillator treated semiclassically in the
//!   coherent-state plane ([`oscillator`]), with number-basis populations of
//!   diagonal coherent-state mixtures in [`glauber`].
//!
//! All Monte Carlo estimators use per-sample counter-based random streams and
//! fixed-order reductions, so results are bit-identical across thread counts.

pub mod classical_rotor;
pub mod error;
pub mod glauber;
pub mod hilbert;
pub mod oscillator;
pub mod qkr;
pub mod rng;
pub mod series;

pub use error::{EchoError, Result};

/// C-style `%.12e` formatting (two-digit signed exponent), used by every
/// text emitter so outputs are byte-stable.
pub fn fmt_e(x: f64) -> String {
    let s = format!("{:.12e}", x);
    let (mantissa, exp) = s.split_once('e').expect("exponential format");
    let (sign, digits) = match exp.strip_prefix('-') {
        Some(d) => ('-', d),
        None => ('+', exp),
    };
    format!("{mantissa}e{sign}{digits:0>2}")
}
pub use hilbert::{PacketMixture, QuantumState, Region, TorusGrid};
pub use qkr::{EchoRecord, RotorParams};
pub use series::{DecaySeries, FitResult};
