//! Benchmark of tonotopic membrane encoding against spectral transforms for
//! resolving close tones and classifying short vowel windows.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod experiments;
pub mod io;
pub mod membrane;
pub mod nn;
pub mod rng;
pub mod signals;
pub mod spectral;

pub use error::{Error, Result};
