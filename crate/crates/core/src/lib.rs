//! Adaptive singular value shrinkage for low-rank matrix denoising.
//!
//! The adaptive trace norm (ATN) shrinker `lambda * max(1 - (tau/lambda)^gamma, 0)`
//! interpolates between soft (`gamma = 1`) and hard (`gamma -> inf`)
//! thresholding. Its parameters are chosen by SURE when the noise level is
//! known and by generalized SURE otherwise.

pub mod cli;
pub mod error;
pub mod seed;
pub mod selection;
pub mod shrinkers;
pub mod simbench;
pub mod spectral;

pub use error::{Error, Result};
pub use selection::{Selection, SelectionGrid, SelectionRule, SpectrumKernel, SureBreakdown};
pub use shrinkers::{AspectRatio, NoiseEnergy, NoiseLevel, ShrinkerSpec};
pub use spectral::{decompose, reconstruct, RealMatrix, SpectralDecomposition};
