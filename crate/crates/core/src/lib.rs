//! Online selection of small, stable feature sets from high-dimensional
//! telemetry streams.
//!
//! The crate is organised bottom-up:
//!
//! - [`trace`] loads CSV traces into a [`DesignMatrix`] and applies min-max
//!   scaling plus low-variance removal.
//! - [`ranking`] orders features with one of three back-ends: relevance over
//!   cosine redundancy (ARR), Laplacian score (LS) or forest importances (TB).
//! - [`forest`] is the regression forest behind TB and the prediction protocols.
//! - [`osfs`] is the online engine that grows the sample window and the
//!   feature-set size until the top-k set stops changing.
//! - [`evaluation`] implements NMAE and the online/offline evaluation
//!   protocols plus the multi-start study runner.
//! - [`synth`] generates traces with planted informative features.

pub mod error;
pub mod evaluation;
pub mod forest;
pub mod osfs;
pub mod ranking;
pub mod seed;
pub mod synth;
pub mod trace;

pub use error::{Error, Result};
pub use evaluation::{ExperimentReport, NmaeReport, SimilarityTable};
pub use forest::RegressionForest;
pub use osfs::{FeedStatus, OsfsConfig, OsfsResult, OsfsState, Termination};
pub use ranking::{FeatureSet, RankMethod, RankedFeatureList};
pub use synth::{LoadPattern, SynthSpec};
pub use trace::{DesignMatrix, FeatureId, PreprocessReport, Sample};
