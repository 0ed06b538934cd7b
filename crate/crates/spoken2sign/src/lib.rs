//! Spoken-language-to-sign-language translation at desk scale.
//!
//! The pipeline has three stages:
//!
//! 1. **Dictionary construction** — continuous signing videos are segmented
//!    into isolated signs by CTC forced alignment over ingested posterior
//!    matrices ([`align`]), and the transition gaps between signs are mined
//!    as co-articulation training samples.
//! 2. **3D sign estimation** — a simplified parametric skeleton
//!    ([`skeleton`]) is fitted to 2D keypoint streams by minimizing a robust
//!    reprojection objective with unseen/upright/smoothness regularizers
//!    ([`objective`]) using L-BFGS ([`fitter`]). Fitted signs are stored in a
//!    gloss-keyed dictionary ([`dictionary`]).
//! 3. **Translation** — text becomes a gloss sequence, each gloss retrieves
//!    its best 3D sign, and a small learned connector ([`connector`])
//!    predicts the duration of each co-articulation so adjacent signs can be
//!    stitched by interpolation ([`pipeline`]).
//!
//! By-products: seeded 3D keypoint augmentation, multi-view projection, and
//! the 2D-KL / TC evaluation metrics.

pub mod align;
pub mod connector;
pub mod dictionary;
mod error;
pub mod fitter;
pub mod formats;
pub mod objective;
pub mod pipeline;
pub mod skeleton;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
