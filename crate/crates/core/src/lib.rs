//! Finite-blocklength rate-distortion analysis for distributed sources:
//! exact information-density spectra, achievable rate regions with
//! distortion-constrained test channels, and a Monte Carlo random-binning
//! codec for checking operational error probabilities against those regions.

pub mod classical;
pub mod codec;
pub mod error;
pub mod model;
pub mod prob;
pub mod region;
pub mod spectrum;

pub use error::{Error, Result};
pub use model::{SequenceLaw, SourceKind, SourceModel};
pub use codec::{
    assign_bins, build_quantizer, decode, run_experiment, BinMap, Codebook, CodecConfig,
    DecodeOutcome, ErrorStats, Quantizer, Slacks, Thresholds,
};
pub use prob::{Alphabet, Attachment, Channel, JointPmf, Variable};
pub use region::{
    corner_recons, mixed_region, optimal_recon, search_region, wyner_ziv_rate, ChannelSystem,
    DistortionMeasure,
    FrontierCorner, ReconMap, RegionFrontier, SearchParams,
};
pub use spectrum::{
    density_spectrum, divergence_tail_check, spectral_proxies, DensityKind, DensitySpectrum,
    SpectralEstimate, TailCheck,
};
