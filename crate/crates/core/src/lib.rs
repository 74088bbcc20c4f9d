//! Full-spectrum vibration maps and real-time degradation tracking for
//! rolling bearings.
//!
//! The pipeline runs in the order of the modules below:
//!
//! 1. [`ingest`] reads IMS-style ASCII recordings (or synthesizes a seeded
//!    run-to-failure campaign),
//! 2. [`preprocess`] turns each recording into a smoothed magnitude spectrum,
//! 3. [`similarity`] computes pairwise distances between spectra,
//! 4. [`embed`] projects them onto the plane with classical MDS or t-SNE,
//! 5. [`rtdt`] builds a reference map from early data and tracks new spectra
//!    against it, raising an alert when the averaged warning factor crosses
//!    a threshold,
//! 6. [`render`] writes SVG figures.
//!
//! ```
//! use bearingmap::ingest::{synth_run_to_failure, SynthConfig};
//! use bearingmap::preprocess::{preprocess_set, PreprocessConfig};
//!
//! let cfg = SynthConfig { n_recordings: 4, segment_len: 2048, stage_boundaries: vec![1, 2, 3], ..Default::default() };
//! let set = synth_run_to_failure(&cfg).unwrap();
//! let spectra = preprocess_set(&set, 0, &PreprocessConfig::for_segment(2048)).unwrap();
//! assert_eq!(spectra.len(), 4);
//! ```

pub mod embed;
mod error;
pub mod ingest;
pub mod preprocess;
pub mod render;
pub mod rtdt;
pub mod similarity;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/recordings.md")]
    mod recordings {}
    #[doc = include_str!("../../../book/src/spectra.md")]
    mod spectra {}
    #[doc = include_str!("../../../book/src/distances.md")]
    mod distances {}
    #[doc = include_str!("../../../book/src/maps.md")]
    mod maps {}
    #[doc = include_str!("../../../book/src/tracking.md")]
    mod tracking {}
    #[doc = include_str!("../../../book/src/figures.md")]
    mod figures {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
