//! One-Class-One-Network (OCON) classification of vowel phonemes and speaker
//! groups from formant measurements.
//!
//! The pipeline is:
//!
//! 1. [`dataset`]: ingest formant tables, decode `m10ae`-style filenames,
//!    drop records with failed measurements, split and fold.
//! 2. [`features`]: formant/F0 ratios, min-max scaling, histograms, and the
//!    portable [`container`] format.
//! 3. [`neural`]: a hand-differentiated one-hidden-layer MLP with dropout,
//!    batch-norm, L2 and Adam/RMSProp.
//! 4. [`ocon`]: balanced per-class subset encoding, the bank of binary
//!    classifiers, and the ArgMax / MaxNet decision heads.
//! 5. [`trainer`] and [`search`]: early-stopped per-class training and the
//!    staged grid search.
//! 6. [`metrics`], [`report`] and [`profiling`]: evaluation and energy
//!    accounting.
//!
//! Everything is deterministic given a master seed; see [`seed`].

pub mod checkpoint;
pub mod container;
pub mod dataset;
pub mod error;
pub mod features;
pub mod metrics;
pub mod neural;
pub mod ocon;
pub mod profiling;
pub mod report;
pub mod search;
pub mod seed;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};

/// Version of this crate, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
