//! Canonical heights for random iteration of rational maps on `P^1(Q)`.
//!
//! A finite set `S` of rational maps with a probability vector (or the
//! unicritical families `z^d + c`) acts on `P^1(Q)` through i.i.d. words.
//! This crate computes, in exact integer arithmetic with certified error
//! radii:
//!
//! * canonical heights along a word and expected canonical heights
//!   ([`heights`]),
//! * a terminating decision for points of expected height zero
//!   ([`stability`]),
//! * Green functions and local canonical heights per place ([`local`]),
//! * Zsigmondy sets of orbits ([`zsigmondy`]),
//! * the Riccati invariants of polynomials over `F_p(t)` ([`riccati`]).

pub mod arith;
pub mod error;
pub mod estimate;
pub mod heights;
mod linalg;
pub mod local;
pub mod maps;
pub mod measure;
pub mod riccati;
pub mod stability;
pub mod zsigmondy;

pub use arith::{log_bigint, valuation, weil_height, ExactRational, ProjectivePoint};
pub use error::{Error, Result};
pub use estimate::{Estimate, EstimateKind, GreenValue, HeightEstimate};
pub use maps::{bad_primes, compose, HeightControlCertificate, RationalMapLift};
pub use measure::{
    DegreeLaw, GeneratingSystem, MapSource, Sampler, SequencePrefix, SystemConstants, UnicriticalFamily, Word,
};
pub use heights::{canonical_height, expected_height_exact, expected_height_mc, Limits};
pub use local::{DivisorForm, Place};
pub use riccati::{FpPolySelfMap, FpRatFunc};
pub use stability::{stable_closure, StabilityVerdict};
pub use zsigmondy::{OrbitTable, ZsigmondyReport};
