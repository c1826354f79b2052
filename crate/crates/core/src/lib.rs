//! Near-field channel and source position estimation for uniform linear
//! arrays from the joint autocorrelation and cross-correlation of the
//! received pilots.

// `!(x > 0.0)` style checks are used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod array_model;
pub mod autocorr;
pub mod crlb;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod metrics;
pub mod music;
pub mod polar_grid;
pub mod signal_io;

pub use array_model::{
    channel_exact, channel_quadratic, params_from_position, position_from_params, rayleigh_distance,
    synthesize_received, ArrayConfig, ChannelParams, ModelTag, ReceivedSignal, ResolvedPosition,
    SourcePosition,
};
pub use autocorr::{autocorr_spectrum, AutocorrSpectrum};
pub use error::{JacError, Result};
pub use estimators::{jac_estimate, Estimate, GdConfig, IsfConfig, JacConfig, Method};
pub use music::MusicConfig;
