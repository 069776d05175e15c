//! High-resolution sparse attention warping.
//!
//! An engine for attention-based image warping driven by cross-domain
//! feature correspondence. Instead of scoring every query/key pixel pair
//! (quadratic in resolution), a randomized propagation procedure samples a
//! small key index set per query; softmax attention over those keys drives
//! a deformable-style bilinear gather. A dense all-pairs implementation is
//! included as the verification oracle, together with a local-editing
//! pipeline (semantic penalties, masked compositing), a cycle-consistency
//! metric, and a manipulation-dataset synthesizer.

pub mod attention;
pub mod error;
pub mod grid;
pub mod io;
pub mod pipeline;
pub mod provider;
pub mod rng;
pub mod sampler;
pub mod synth;
pub mod warp;

pub use attention::{
    cycle_loss, dense_argmax_field, dense_warp, similarity, AttentionConfig, CorrespondenceField,
};
pub use error::{Error, Result};
pub use grid::{
    bilinear_footprint, bilinear_resize, bilinear_sample, normalize_location_wise, Coord,
    FeatureMap, Image, LabelMap, Mask,
};
pub use io::{
    load_image, load_label_map, load_mask, load_tensor, save_image, save_label_map, save_mask,
    save_tensor,
};
pub use pipeline::{
    apply_augment_features, apply_augment_image, apply_augment_labels, augment_pair,
    augment_pair_in_range, composite_local, eval_metrics, prepare_features, resize_image,
    warp_full, AugmentRecord, FeatureSource, Metrics, PipelineConfig, PipelineOutput,
};
pub use provider::{
    handcrafted_image_features, label_onehot_features, synthetic_distinct_features,
    translate_features, upsample_features, Guidance, ProviderConfig,
};
pub use sampler::{
    constrained_score, expected_evaluations, sample_key_indices, window_schedule, KeyIndexSets,
    ParticleField, PropagationMode, SampleOutput, SamplerConfig, ScoreConstraints,
};
pub use synth::{
    floodfill_component, hull_area, solidity, synth_manipulation_pair, AffineSample, Region,
    SynthConfig, SynthPair, SynthRecord,
};
pub use warp::{
    attention_keys, dedupe_keys, keys_to_tensor, sparse_attention_weights, sparse_attentive_warp,
    sparse_warp, QueryKeys, WarpResult,
};
