//! Desk-scale simulator and signal-processing library for multiperson
//! sensing with a space-time-coded RIS: harmonic beam synthesis, binary
//! particle-swarm coding optimization, synthetic multiperson echo
//! generation, two-indicator human detection, and vital-sign estimation
//! through an improved variational mode decomposition.

pub mod bench;
pub mod bpso;
pub mod detect;
pub mod dsp;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod ris;
pub mod scene;
pub mod vmd;

pub use error::{CoreError, Result};
