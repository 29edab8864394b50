//! Reduced-dimension multiuser detection (RD-MUD) toolkit.
//!
//! A synchronous multiuser system has `N` known signature waveforms of which
//! only `K << N` are active in a symbol interval. Instead of a matched-filter
//! bank with one correlator per user, an RD-MUD front-end correlates the
//! received signal with `M << N` linear combinations of the biorthogonal
//! signatures, chosen through a coefficient matrix `A` with unit-norm columns.
//! The discrete equivalent of that front-end is
//!
//! ```text
//!   y = A R b + w,        w ~ N(0, sigma^2 A G^{-1} A^H)
//! ```
//!
//! where `G` is the signature Gram matrix, `R = diag(r_1..r_N)` the known
//! channel gains and `b` a ternary symbol vector in {-1, 0, +1}^N. The
//! conventional MF-bank output `z = G R b + u` with `u ~ N(0, sigma^2 G)` is
//! kept as the baseline model.
//!
//! The crate provides:
//!
//! * [`model`] — the two observation models with exact colored-noise
//!   synthesis, and the noise-whitening transform `(A G^{-1} A^H)^{-1/2}`;
//! * [`factory`] — measurement-matrix generation (Gaussian, random partial
//!   DFT, Kerdock sets), min-coherence search, coherence and the Welch bound,
//!   Gold-code and spectrum-specified Gram matrices;
//! * [`detect`] — the RDD / RDDt / RDDF / RDDFt detectors, RD-LS and RD-MMSE
//!   symbol stages, exhaustive RD-ML, the conventional decorrelator, and
//!   whitened variants;
//! * [`bounds`] — closed-form recovery conditions, threshold ranges and
//!   probability-of-symbol-error bounds driven by the coherence of `A`;
//! * [`mc`] — reproducible, trial-parallel Monte Carlo estimation of the
//!   probability-of-symbol-error and threshold tuning;
//! * [`matfile`] — the `RDMUD-MAT v1` text format for matrices and vectors.
//!
//! All randomness flows through counter-style keyed streams ([`rng`]), so
//! every result is bit-reproducible for a fixed master seed regardless of
//! thread count.

pub mod bounds;
pub mod detect;
pub mod error;
pub mod factory;
pub mod kerdock;
pub mod matfile;
pub mod mc;
pub mod model;
pub mod rng;

pub use error::{Error, Result};
pub use model::{
    AmplitudeProfile, FrontEndObservation, GramMatrix, MatrixKind, MeasurementMatrix, NoiseModel,
    SymbolVector,
};

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex64;
