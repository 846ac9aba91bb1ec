pub mod analyze;
pub mod data;
pub mod evaluate;
pub mod features;
pub mod model;

pub use analyze::{AnalyzeArgs, IngestAnnotationsArgs, PlotDataArgs, SynthAnnotationsArgs};
pub use data::{SegmentArgs, SynthDataArgs};
pub use evaluate::{DiversityArgs, EvaluateArgs, MirrorArgs};
pub use features::{ExtractFeaturesArgs, FitNormalizerArgs};
pub use model::{GradCheckArgs, PredictArgs, SampleArgs, TrainArgs};
