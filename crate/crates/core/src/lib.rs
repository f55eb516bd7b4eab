//! Context-aware delayed agglomerative segmentation.
//!
//! Given an over-segmented label volume and a stack of per-voxel class
//! probabilities, this crate clusters the over-segmented regions back into
//! whole cells. The pieces:
//!
//! - [`rag`]: region adjacency graph construction and merge mutation.
//! - [`hist`] / [`features`]: constant-time-mergeable boundary statistics and
//!   the per-edge feature vectors fed to the boundary predictor.
//! - [`predictor`] / [`training`]: a from-scratch depth-limited random forest
//!   plus the iterative training regimes.
//! - [`agglomerate`]: the standard and delayed clustering engines with an
//!   optional lazy queue-update mode.
//! - [`context`]: the two-phase cytoplasm/mitochondria pipeline.
//! - [`eval`]: split variation-of-information and split Rand error.
//! - [`io`], [`watershed`], [`synth`]: volume I/O, marker-based watershed
//!   over-segmentation and a deterministic synthetic data generator.

pub mod agglomerate;
pub mod context;
pub mod error;
pub mod eval;
pub mod features;
pub mod hist;
pub mod io;
pub mod predictor;
pub mod rag;
pub mod rng;
pub mod synth;
pub mod training;
pub mod volume;
pub mod watershed;

pub use agglomerate::{
    agglomerate_delayed, agglomerate_standard, agglomerate_with, mean_boundary_confidence,
    AgglomConfig, AllEdges, CandidateFilter, Confidence, Counters, EngineHooks,
    ForestConfidence, MeanBoundaryConfidence, MergeTrace, NoHooks, Policy, TraceEntry,
};
pub use context::{
    agglomerate_mito, mito_confidence, overlap_ratio, partition_superpixels,
    run_context_pipeline, run_single_phase, ContextConfig, CytoCytoEdges, MitoCytoEdges,
    PipelineConfig, PipelineOutput,
};
pub use error::Error;
pub use eval::{contingency, split_re, split_vi, ContingencyTable, SplitRand, SplitVi};
pub use features::{edge_features, feature_len};
pub use hist::MomentHistogram;
pub use io::{read_field, read_labels, read_volume, write_field, write_labels, write_volume, Volume};
pub use predictor::{train_forest, Forest, ForestParams};
pub use rag::{relabel_volume, EdgeKey, RegionGraph, RegionId, RegionType};
pub use synth::{synth_generate, SynthOutput, SynthParams};
pub use training::{
    assign_gt_labels, initial_training_set, iterative_train, GtAssignment, IterTrainConfig,
    LabelPolicy, TrainingSet, TrainingSummary,
};
pub use volume::{FieldVolume, LabelVolume, ProbabilityStack, PIPELINE_CHANNELS};
pub use watershed::watershed;

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
