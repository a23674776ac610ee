//! Discriminative mutual-information estimation and capacity/decoder learning
//! on synthetic channels.
//!
//! The crate is organized around a handful of small, composable pieces:
//!
//! - [`nn`]: a dense feed-forward network with exact reverse-mode gradients
//!   and an Adam optimizer. Every trainable object in the crate sits on top
//!   of it.
//! - [`sampling`]: seeded, splittable randomness, joint-batch construction,
//!   and the derangement/permutation machinery that turns a joint batch into
//!   product-of-marginals pairs.
//! - [`divergence`]: the catalog of f-divergence generators, their Fenchel
//!   conjugates, and all training value functions (KL/GAN/HD-DIME, γ-DIME,
//!   MINE, NWJ, SMILE, CPC).
//! - [`estimators`]: binds a discriminator network, an objective, and a
//!   sampling strategy into a trainable MI estimator, plus oracle-ratio
//!   readouts and the closed-form variance/permutation formulas used for
//!   validation.
//! - [`channels`]: synthetic stochastic channels and noise models with
//!   closed-form true-MI oracles where they exist.
//! - [`cortical`]: the cooperative generator/discriminator capacity learner
//!   with its capacity readout and input-distribution analysis.
//! - [`mind`]: the supervised maximum-mutual-information neural decoder with
//!   posterior, entropy, and error-probability readouts, plus genie MAP/MaxL
//!   oracles.
//!
//! All internal math is in nats and 64-bit floats; the decoder module reports
//! entropies in bits (its conventional unit) and says so in its types.

pub mod channels;
pub mod cortical;
pub mod divergence;
pub mod error;
pub mod estimators;
pub mod mind;
pub mod nn;
pub mod sampling;

pub use error::{Error, Result};
