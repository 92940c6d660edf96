//! Measures on windows, their Fourier coefficients and sampled statistics.

pub mod character;
pub mod handle;
pub mod experiment;
pub mod stats;

pub use character::{phase_to_complex, CharacterSpec, Psi};
pub use handle::{Distribution, Law, MeasureHandle, Pin, Prob, SiteLaw, ENUMERATION_LIMIT};

pub use stats::{block_entropy, fourier, fourier_sweep, haar_criterion, mixing_statistic, Budget, Estimate, FourierRow, HaarVerdict, MixingResult};
pub use experiment::{rigidity_experiment, Classification, RigidityOptions, RigidityReport};
