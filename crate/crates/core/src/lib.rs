//! Rotated spectral principal component analysis.
//!
//! The pipeline runs a Morlet continuous wavelet transform over every site of
//! a gridded field, builds one Hermitian cross-spectral matrix per scale,
//! extracts complex eigenvector pairs, and rotates each pair so that its
//! spatial phase field is as close to a plane wave as possible. Band-limited
//! mode time series are recovered by inverse wavelet synthesis.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the common double-precision case.

pub mod error;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod periodogram;
pub mod reconstruct;
pub mod rotation;
pub mod scalar;
pub mod spectra;
pub mod surrogate;
pub mod synth;
pub mod wavelet;

pub use error::{Error, Result};
pub use grid::{build_laplacian, deseasonalize, FieldSeries, LaplacianStencil, SpatialGrid};
pub use io::{load_field_series, save_field_series, PayloadFormat};
pub use periodogram::{periodogram_cross_spectral_matrix, PeriodogramConfig, Window};
pub use reconstruct::{
    align_pc_phase, decompose_bands, estimate_propagation_speed, reconstruct_band,
    reconstruct_mode, BandDecomposition, SpeedEstimate,
};
pub use rotation::{
    optimize_rotation, PhaseCost, RotatedPair, RotationOptions, RotationParams, Weighting,
};
pub use scalar::{Cplx, Real};
pub use spectra::{
    band_eigen, classical_pca, hermitian_eigen, wavelet_cross_spectral_matrix, CoiPolicy,
    CrossSpectralMatrix, EigenModes, Estimator, PCSeries, SpectralSettings,
};
pub use surrogate::surrogate_baseline;
pub use synth::{generate_two_wave_system, TwoWaveSystem, WaveConfig, WaveformSpec};
pub use wavelet::{cwt, icwt, MorletParams, Padding, ScaleSet, WaveletCoeffs, DEFAULT_F0};

pub type FieldSeries64 = FieldSeries<f64>;
pub type FieldSeries32 = FieldSeries<f32>;
pub type EigenModes64 = EigenModes<f64>;
pub type EigenModes32 = EigenModes<f32>;
pub type CrossSpectralMatrix64 = CrossSpectralMatrix<f64>;
pub type CrossSpectralMatrix32 = CrossSpectralMatrix<f32>;
pub type WaveletCoeffs64 = WaveletCoeffs<f64>;
pub type WaveletCoeffs32 = WaveletCoeffs<f32>;
pub type RotatedPair64 = RotatedPair<f64>;
pub type RotatedPair32 = RotatedPair<f32>;
pub type TwoWaveSystem64 = TwoWaveSystem<f64>;
pub type TwoWaveSystem32 = TwoWaveSystem<f32>;
