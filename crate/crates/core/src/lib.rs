//! Singular systems of underspread linear time-varying channels.
//!
//! A channel is a sum of delayed, Doppler-shifted taps ([`channel`]). It is
//! sampled into a finite block matrix ([`discretize`]) whose singular
//! system ([`spectral`]) is predicted from the spreading function's symbol
//! by level curves and the area rule ([`wkb`]), checked against
//! reassigned time-frequency distributions of the numeric singular
//! vectors ([`tfa`]) and exercised by a singular-mode link ([`linksim`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod discretize;
pub mod dsp;
pub mod error;
pub mod io;
pub mod linksim;
pub mod manifest;
pub mod rng;
pub mod spectral;
pub mod tfa;
pub mod wkb;

pub use channel::{ChannelModel, ExperimentConfig, Tap};
pub use discretize::ChannelMatrix;
pub use error::{Error, Result};
pub use linksim::{LinkConfig, LinkReport};
pub use manifest::RunManifest;
pub use num_complex::Complex64;
pub use spectral::SvdResult;
pub use tfa::TFDistribution;
pub use wkb::{Bubble, EigenfunctionModel, TFGrid};
