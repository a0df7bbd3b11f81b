//! Grouped k-fold cross-validation: a user's sessions never straddle the
//! train/test split.

use super::features::FeatureVector;
use super::models::{fit, infer, InferenceError, Label, Prediction};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub user_id: String,
    pub features: FeatureVector,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub train_users: BTreeSet<String>,
    pub test_users: BTreeSet<String>,
    pub n_test: usize,
    /// Accuracy for classifiers, mean absolute error for regressors.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub attribute: String,
    pub metric: String,
    pub folds: Vec<FoldResult>,
    /// Pooled over all held-out predictions.
    pub score: f64,
}

impl CvReport {
    pub fn users_disjoint(&self) -> bool {
        self.folds.iter().all(|f| f.train_users.is_disjoint(&f.test_users))
    }
}

pub fn cross_validate(attribute: &str, samples: &[Sample], folds: usize, seed: u64) -> Result<CvReport, InferenceError> {
    let mut users: Vec<String> = samples.iter().map(|s| s.user_id.clone()).collect::<BTreeSet<_>>().into_iter().collect();
    if folds < 2 || users.len() < folds {
        return Err(InferenceError::TooFewExamples(users.len()));
    }
    users.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut out = Vec::with_capacity(folds);
    let (mut hit, mut abs_err, mut total) = (0usize, 0.0, 0usize);
    let mut metric = "accuracy";
    for k in 0..folds {
        let test_users: BTreeSet<String> = users.iter().skip(k).step_by(folds).cloned().collect();
        let (test, train): (Vec<&Sample>, Vec<&Sample>) = samples.iter().partition(|s| test_users.contains(&s.user_id));
        let train_users: BTreeSet<String> = train.iter().map(|s| s.user_id.clone()).collect();
        let leaked: Vec<String> = train_users.intersection(&test_users).cloned().collect();
        if !leaked.is_empty() {
            return Err(InferenceError::UserLeak(leaked));
        }
        let data: Vec<(FeatureVector, Label)> = train.iter().map(|s| (s.features.clone(), s.label.clone())).collect();
        let model = fit(attribute, &data)?;
        let (mut fold_hit, mut fold_err) = (0usize, 0.0);
        for s in &test {
            match (infer(&model, &s.features)?, &s.label) {
                (Prediction::Class { label, .. }, Label::Class(truth)) => fold_hit += usize::from(&label == truth),
                (Prediction::Number { value }, Label::Number(truth)) => {
                    metric = "mae";
                    fold_err += (value - truth).abs();
                }
                _ => return Err(InferenceError::LabelKind(attribute.into())),
            }
        }
        hit += fold_hit;
        abs_err += fold_err;
        total += test.len();
        let n = test.len().max(1) as f64;
        let score = if metric == "mae" { fold_err / n } else { fold_hit as f64 / n };
        out.push(FoldResult { train_users, test_users, n_test: test.len(), score });
    }
    let n = total.max(1) as f64;
    let score = if metric == "mae" { abs_err / n } else { hit as f64 / n };
    Ok(CvReport { attribute: attribute.into(), metric: metric.into(), folds: out, score })
}
