//! Automatic modulation classification from I/Q frames.
//!
//! Each frame is mapped to a feature vector made of spectral descriptors of
//! spatio-temporal k-NN graphs over its constellation ([`graphify`]) and
//! classical statistics ([`statfeat`]). A boosted-tree gate ([`router`])
//! estimates the SNR band and softly mixes per-band experts. Each expert
//! first appends projected class probabilities ([`lnt`]) and then applies a
//! boosted-tree classifier ([`gbt`]). [`pipeline`] ties these together.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` / `*32` aliases below fix the precision.

pub mod bands;
pub mod error;
pub mod frames;
pub mod gbt;
pub mod graphify;
pub mod linalg;
pub mod lnt;
pub mod pipeline;
pub mod router;
pub mod scalar;
pub mod statfeat;

pub use bands::{default_bands, SnrBands};
pub use error::{Error, Result};
pub use frames::{
    load_dataset, normalize_frame, read_dataset, save_dataset, synthesize_dataset, synthesize_frame, write_dataset,
    Dataset, IqFrame, ModulationScheme, SynthConfig,
};
pub use gbt::{BoostedEnsemble, SplitMode, TrainParams};
pub use graphify::{extract_graph_features, GraphConfig, GraphFeatureConfig, Metric, StGraph};
pub use lnt::{LntBlock, LntConfig};
pub use pipeline::{
    complexity_report, evaluate, load_bundle, save_bundle, train_pipeline, ComplexityReport, EvalReport,
    FeatureExtractor, GamcBundle, PipelineConfig,
};
pub use router::{CqiModel, Expert, MoeModel};
pub use scalar::Scalar;
pub use statfeat::{extract_stat_features, StatConfig};

pub type IqFrame64 = IqFrame<f64>;
pub type IqFrame32 = IqFrame<f32>;
pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
pub type StGraph64 = StGraph<f64>;
pub type StGraph32 = StGraph<f32>;
pub type BoostedEnsemble64 = BoostedEnsemble<f64>;
pub type BoostedEnsemble32 = BoostedEnsemble<f32>;
pub type LntBlock64 = LntBlock<f64>;
pub type LntBlock32 = LntBlock<f32>;
pub type MoeModel64 = MoeModel<f64>;
pub type MoeModel32 = MoeModel<f32>;
pub type GamcBundle64 = GamcBundle<f64>;
pub type GamcBundle32 = GamcBundle<f32>;
