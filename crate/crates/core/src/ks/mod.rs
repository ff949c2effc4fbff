//! Staged Cantor families, atomic stage measures and the measure pipeline.

pub mod cantor;
pub mod pipeline;
pub mod setspec;
pub mod stage;

pub use cantor::{
    build_cantor, check_family_chain, continuity_violations, l1_char_distance, stage_measure, Atom, ClosedArc,
    DiscreteMeasure, IntervalFamily, Placement, PointRule,
};
pub use pipeline::{build_ks_pipeline, rigidity_profile, spiral_targets, PipelineConfig, PipelineReport};
pub use setspec::SetSpec;
pub use stage::{q_set, q_verdict, refine_stage, Caps, StageRecord};
