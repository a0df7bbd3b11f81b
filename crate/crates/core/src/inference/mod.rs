//! Demographics and identity inferred from recovered attributes.

mod cv;
mod features;
mod models;

pub use cv::{cross_validate, CvReport, FoldResult, Sample};
pub use features::{assemble_features, feature_index, FeatureVector, FEATURE_NAMES, FEATURE_VERSION, LANGUAGES};
pub use models::{
    attribute_features, build_identity_index, fit, identify_user, infer, FittedModel, InferenceError, Label,
    ModelParams, Normalization, Prediction, TreeNode, IDENTITY_FEATURES, MIN_EXAMPLES,
};
