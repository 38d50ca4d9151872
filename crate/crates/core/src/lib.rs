//! Monophonic source separation learned from two-microphone mixtures.
//!
//! The crate covers the full computational pipeline: STFT analysis/synthesis,
//! anechoic two-microphone scene simulation, normalized phase difference
//! features, K-means clustering, binary time-frequency masks, a recurrent
//! embedding network trained with a clustering affinity loss, K-means
//! separation on the embedding space, and SDR-based evaluation.
//!
//! Everything here is pure computation over in-memory buffers; file IO,
//! dataset materialization and the command line live in the companion
//! `mixclust` crate.

#![no_std]
#![deny(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;


pub mod clustering;
pub mod complex;
pub mod dsp;
pub mod eval;
pub mod error;

pub mod features;
pub mod fft;

pub mod masks;
pub mod mat;
mod math;
pub mod model;

pub mod rng;
pub mod separation;

pub mod spatial;
pub mod synth;

pub use complex::Complex;
pub use error::{Error, Result};
pub use mat::Mat;
