//! Detection engine for locating every occurrence of a graphical pattern
//! (product front, logo) in a shelf photograph.
//!
//! The pipeline: scale/rotation-aware local features are matched between
//! pattern and scene, accepted correspondences become weighted votes in a
//! scene-sized vote space, windowed local maxima of the vote image yield
//! candidate object centers, votes around each candidate are aggregated in
//! two passes and judged by a cascade of filters, and accepted detections
//! are erased from the vote space so further instances can surface. A size
//! cascade of halved patterns covers scale, and a second detection phase
//! re-runs the search with a pattern cropped from the scene itself.
//!
//! Modules follow the processing order:
//!
//! 1. [`imagecore`] — raster primitives (decode/encode, color, resize, blur,
//!    normalized cross-correlation, subimage extraction).
//! 2. [`features`] — feature points with descriptors, built-in extractor and
//!    a JSON interchange format for external extractors.
//! 3. [`matching`] — descriptor index, match filtering, adjacency-weighted
//!    vote construction.
//! 4. [`votespace`] — vote buckets, the vote image, proposition detection,
//!    erasure.
//! 5. [`aggregation`] — two-pass vote aggregation and envelope estimation.
//! 6. [`filtercascade`] — the six accept/reject filters.
//! 7. [`pipeline`] — size cascade, per-pattern detection loop, two-phase
//!    protocol, consolidation.
//! 8. [`evalkit`] — synthetic scene generation and detection metrics.

pub mod aggregation;
pub mod circstats;
pub mod config;
pub mod evalkit;
pub mod features;
pub mod filtercascade;
pub mod geometry;
pub mod imagecore;
pub mod matching;
pub mod pipeline;
pub mod votespace;

pub use config::RunConfig;
pub use geometry::Envelope;
pub use imagecore::RasterImage;
