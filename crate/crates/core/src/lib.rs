//! Core of the Meta-IFD Ethereum fraud detection pipeline.
//!
//! Everything in this crate is pure computation over in-memory data and
//! builds under `no_std` with `alloc`. File formats, snapshots, checkpoints
//! and the command line live in the `metaifd` companion crate.
//!
//! The pipeline, in order:
//!
//! 1. [`record`]: raw interaction records, account types and labels.
//! 2. [`heig`]: the heterogeneous interaction graph, meta-interactions,
//!    14-dimensional account features and two-hop neighbor sampling.
//! 3. [`icvae`]: the interaction-aware conditional VAE used to generate
//!    extra interaction features per meta-interaction.
//! 4. [`multiview`]: type-specific encoding, intra-view pooling and
//!    inter-view self-attention.
//! 5. [`propagation`]: two rounds of interaction feature passing and the
//!    prediction head.
//! 6. [`contrast`]: the triplet margin regularizer over meta-interaction
//!    encodings.
//! 7. [`trainer`]: joint objective, splits, early stopping, metrics.
//!
//! [`synth`] generates seed-deterministic graphs with planted fraud motifs and
//! [`report`] produces the tables behind the distribution and margin plots.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod contrast;
pub mod error;
pub mod heig;
pub mod icvae;
pub mod linalg;
pub mod multiview;
pub mod optim;
pub mod params;
pub mod propagation;
pub mod record;
pub mod report;
pub mod rng;
pub mod synth;
pub mod tape;
pub mod trainer;

pub use error::{Error, Result};
pub use heig::{Heig, MetaInteraction};
pub use linalg::Matrix;
pub use record::{AccountType, Address, InteractionKind, InteractionRecord};

/// Width of the manual account feature vector.
pub const FEATURE_DIM: usize = 14;
