//! Dynamic attention masks.
//!
//! Attention maps are captured from a causal transformer, averaged over a
//! corpus, amplified (Box-Cox by default) and thresholded into per-head
//! "true masks". Diagonal and vertical line patterns found in those masks
//! extend them to sequences longer than the capture length, and the masks
//! are applied as structured-sparse attention.
//!
//! Module map:
//! - [`tensor`], [`damt`]: dense maps, bit-packed masks, the DAMT file format
//! - [`capture`], [`corpus`]: toy model forward pass and map accumulation
//! - [`amplify`]: stabilization, the nine transforms, global min-shift
//! - [`maskgen`]: true masks, pattern pool, match scores, extended masks
//! - [`sparse`]: mask selection, masked softmax, sparse attention, FLOPs
//! - [`config`], [`render`], [`pipeline`]: orchestration used by the CLI

pub mod amplify;
pub mod capture;
pub mod config;
pub mod corpus;
pub mod damt;
pub mod error;
pub mod exec;
pub mod maskgen;
pub mod pipeline;
pub mod render;
pub mod sparse;
pub mod tensor;

pub use amplify::{apply_transform, box_cox, shift_nonnegative, stabilize, yeo_johnson, TransformKind};
pub use capture::{effective_pcl, toy_forward, AttentionAccumulator, ToyModel, ToyModelConfig};
pub use config::PipelineConfig;
pub use damt::{read_tensor, write_tensor, Tensor};
pub use error::{DamError, Result};
pub use exec::Exec;
pub use maskgen::{
    build_extended, force_self_attend, gen_pattern, match_patterns, match_score, true_mask, MatchedSet, PatternId,
    PatternKind, PatternMatch,
};
pub use sparse::{efficiency_report, masked_softmax, select_mask, sparse_attention, AttentionInputs, EfficiencyReport};
pub use tensor::{BitMask, DenseMap, PerHead};
