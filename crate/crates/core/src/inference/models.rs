use super::features::{feature_index, FeatureVector, FEATURE_NAMES, FEATURE_VERSION};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MIN_EXAMPLES: usize = 10;
const L2: f64 = 1e-3;
const LEARNING_RATE: f64 = 0.5;
const EPOCHS: usize = 2000;
const TREE_MAX_DEPTH: usize = 6;
const TREE_MIN_LEAF: usize = 3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("labels are constant")]
    DegenerateLabels,
    #[error("need at least {MIN_EXAMPLES} examples, got {0}")]
    TooFewExamples(usize),
    #[error("no model defined for attribute {0:?}")]
    UnknownAttribute(String),
    #[error("feature version {got} does not match model version {expected}")]
    FeatureVersionMismatch { expected: u32, got: u32 },
    #[error("label type does not fit the {0} model")]
    LabelKind(String),
    #[error("identity index is empty")]
    EmptyIndex,
    #[error("probe lacks {0:?}")]
    IncompleteProbe(Vec<String>),
    #[error("model is not a {0}")]
    WrongModelKind(&'static str),
    #[error("invalid model file: {0}")]
    InvalidModel(String),
    #[error("train and test share users {0:?}")]
    UserLeak(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Label {
    Class(String),
    Number(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Classifier,
    Regressor,
}

/// Inputs per inferable attribute. Voice features are not modeled.
pub fn attribute_features(attribute: &str) -> Option<&'static [&'static str]> {
    Some(match attribute {
        "gender" => &["height_m", "wingspan_m", "ipd_m"],
        "ethnicity" => &[
            "height_m", "ipd_m", "lang_hi", "lang_zh", "lang_fr", "lang_ja", "lang_ru", "lang_es", "lang_pt", "lang_ar",
        ],
        "disability" => &["moca_total", "reaction_time_s", "fitness_low"],
        "age" => &["session_duration_s", "reaction_time_s", "close_vision"],
        _ => return None,
    })
}

pub const IDENTITY_FEATURES: [&str; 7] =
    ["height_m", "wingspan_m", "moca_total", "ipd_m", "close_vision", "far_vision", "reaction_time_s"];

fn attribute_kind(attribute: &str) -> Option<Kind> {
    match attribute {
        "gender" | "ethnicity" | "disability" => Some(Kind::Classifier),
        "age" => Some(Kind::Regressor),
        _ => None,
    }
}

/// Per-feature z-score statistics from the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalization {
    fn fit(rows: &[&FeatureVector], idx: &[usize]) -> Self {
        let (mut mean, mut std) = (Vec::new(), Vec::new());
        for &i in idx {
            let v: Vec<f64> = rows.iter().filter_map(|r| r.values[i]).collect();
            let m = if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
            let var = if v.is_empty() { 0.0 } else { v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64 };
            mean.push(m);
            std.push(if var > 0.0 { var.sqrt() } else { 1.0 });
        }
        Normalization { mean, std }
    }

    /// Missing values sit at the training mean.
    fn apply(&self, fv: &FeatureVector, idx: &[usize]) -> Vec<f64> {
        idx.iter()
            .enumerate()
            .map(|(k, &i)| fv.values[i].map_or(0.0, |x| (x - self.mean[k]) / self.std[k]))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Leaf { value: f64, n: usize },
    Split { feature: usize, threshold: f64, left: Box<TreeNode>, right: Box<TreeNode> },
}

impl TreeNode {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf { value, .. } => *value,
            TreeNode::Split { feature, threshold, left, right } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelParams {
    LinearClassifier { classes: Vec<String>, weights: Vec<Vec<f64>>, bias: Vec<f64> },
    DecisionTreeRegressor { root: TreeNode },
    NearestNeighborIndex { user_ids: Vec<String>, vectors: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub attribute: String,
    pub feature_version: u32,
    pub features: Vec<String>,
    pub normalization: Normalization,
    pub params: ModelParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Prediction {
    Class { label: String, confidence: f64 },
    Number { value: f64 },
}

fn check_version(fv: &FeatureVector) -> Result<(), InferenceError> {
    if fv.version != FEATURE_VERSION || fv.values.len() != FEATURE_NAMES.len() {
        return Err(InferenceError::FeatureVersionMismatch { expected: FEATURE_VERSION, got: fv.version });
    }
    Ok(())
}

fn indices(names: &[&str]) -> Vec<usize> {
    names.iter().map(|n| feature_index(n).expect("known feature")).collect()
}

impl FittedModel {
    fn index(&self) -> Result<Vec<usize>, InferenceError> {
        self.features
            .iter()
            .map(|n| feature_index(n).ok_or_else(|| InferenceError::InvalidModel(format!("unknown feature {n}"))))
            .collect()
    }

    pub fn from_json(s: &str) -> Result<Self, InferenceError> {
        let m: FittedModel = serde_json::from_str(s).map_err(|e| InferenceError::InvalidModel(e.to_string()))?;
        m.index()?;
        let d = m.features.len();
        if m.normalization.mean.len() != d || m.normalization.std.len() != d {
            return Err(InferenceError::InvalidModel("normalization dimension mismatch".into()));
        }
        if m.feature_version != FEATURE_VERSION {
            return Err(InferenceError::FeatureVersionMismatch { expected: FEATURE_VERSION, got: m.feature_version });
        }
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}

pub fn fit(attribute: &str, population: &[(FeatureVector, Label)]) -> Result<FittedModel, InferenceError> {
    let names = attribute_features(attribute).ok_or_else(|| InferenceError::UnknownAttribute(attribute.into()))?;
    let kind = attribute_kind(attribute).expect("features imply kind");
    if population.len() < MIN_EXAMPLES {
        return Err(InferenceError::TooFewExamples(population.len()));
    }
    for (fv, _) in population {
        check_version(fv)?;
    }
    let idx = indices(names);
    let rows: Vec<&FeatureVector> = population.iter().map(|p| &p.0).collect();
    let normalization = Normalization::fit(&rows, &idx);
    let xs: Vec<Vec<f64>> = rows.iter().map(|r| normalization.apply(r, &idx)).collect();
    let params = match kind {
        Kind::Classifier => {
            let labels: Vec<&str> = population
                .iter()
                .map(|p| match &p.1 {
                    Label::Class(c) => Ok(c.as_str()),
                    Label::Number(_) => Err(InferenceError::LabelKind("classifier".into())),
                })
                .collect::<Result<_, _>>()?;
            fit_softmax(&xs, &labels)?
        }
        Kind::Regressor => {
            let ys: Vec<f64> = population
                .iter()
                .map(|p| match p.1 {
                    Label::Number(y) => Ok(y),
                    Label::Class(_) => Err(InferenceError::LabelKind("regressor".into())),
                })
                .collect::<Result<_, _>>()?;
            if ys.iter().all(|y| *y == ys[0]) {
                return Err(InferenceError::DegenerateLabels);
            }
            let order: Vec<usize> = (0..ys.len()).collect();
            ModelParams::DecisionTreeRegressor { root: grow(&xs, &ys, order, 0) }
        }
    };
    Ok(FittedModel {
        attribute: attribute.to_string(),
        feature_version: FEATURE_VERSION,
        features: names.iter().map(|s| s.to_string()).collect(),
        normalization,
        params,
    })
}

fn logits(w: &[Vec<f64>], b: &[f64], x: &[f64]) -> Vec<f64> {
    w.iter().zip(b).map(|(wk, bk)| bk + wk.iter().zip(x).map(|(a, c)| a * c).sum::<f64>()).collect()
}

fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Multinomial logistic regression, L2-penalized, full-batch gradient
/// descent from zero weights.
fn fit_softmax(xs: &[Vec<f64>], labels: &[&str]) -> Result<ModelParams, InferenceError> {
    let mut classes: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
    classes.sort();
    classes.dedup();
    if classes.len() < 2 {
        return Err(InferenceError::DegenerateLabels);
    }
    let y: Vec<usize> = labels.iter().map(|l| classes.iter().position(|c| c == l).expect("present")).collect();
    let (k, d, n) = (classes.len(), xs[0].len(), xs.len() as f64);
    let mut w = vec![vec![0.0; d]; k];
    let mut b = vec![0.0; k];
    for _ in 0..EPOCHS {
        let mut gw = vec![vec![0.0; d]; k];
        let mut gb = vec![0.0; k];
        for (x, &yi) in xs.iter().zip(&y) {
            let p = softmax(&logits(&w, &b, x));
            for c in 0..k {
                let err = p[c] - if c == yi { 1.0 } else { 0.0 };
                gb[c] += err;
                for j in 0..d {
                    gw[c][j] += err * x[j];
                }
            }
        }
        for c in 0..k {
            b[c] -= LEARNING_RATE * gb[c] / n;
            for j in 0..d {
                w[c][j] -= LEARNING_RATE * (gw[c][j] / n + L2 * w[c][j]);
            }
        }
    }
    Ok(ModelParams::LinearClassifier { classes, weights: w, bias: b })
}

fn mean_of(ys: &[f64], rows: &[usize]) -> f64 {
    rows.iter().map(|&i| ys[i]).sum::<f64>() / rows.len() as f64
}

/// CART regression tree on squared error.
fn grow(xs: &[Vec<f64>], ys: &[f64], rows: Vec<usize>, depth: usize) -> TreeNode {
    let leaf = TreeNode::Leaf { value: mean_of(ys, &rows), n: rows.len() };
    if depth >= TREE_MAX_DEPTH || rows.len() < 2 * TREE_MIN_LEAF {
        return leaf;
    }
    let sse = |s: f64, s2: f64, n: f64| s2 - s * s / n;
    let (tot, tot2) = rows.iter().fold((0.0, 0.0), |(a, b), &i| (a + ys[i], b + ys[i] * ys[i]));
    let mut best: Option<(f64, usize, f64)> = None;
    let base = sse(tot, tot2, rows.len() as f64);
    #[allow(clippy::needless_range_loop)]
    for f in 0..xs[0].len() {
        let mut order = rows.clone();
        order.sort_by(|&a, &b| xs[a][f].total_cmp(&xs[b][f]).then(a.cmp(&b)));
        let (mut s, mut s2) = (0.0, 0.0);
        for k in 0..order.len() - 1 {
            let y = ys[order[k]];
            s += y;
            s2 += y * y;
            let nl = k + 1;
            let nr = order.len() - nl;
            let (a, c) = (xs[order[k]][f], xs[order[k + 1]][f]);
            if nl < TREE_MIN_LEAF || nr < TREE_MIN_LEAF || a == c {
                continue;
            }
            let cost = sse(s, s2, nl as f64) + sse(tot - s, tot2 - s2, nr as f64);
            if best.is_none_or(|b| cost < b.0) {
                best = Some((cost, f, 0.5 * (a + c)));
            }
        }
    }
    match best {
        Some((cost, feature, threshold)) if cost < base - 1e-12 => {
            let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| xs[i][feature] <= threshold);
            TreeNode::Split {
                feature,
                threshold,
                left: Box::new(grow(xs, ys, l, depth + 1)),
                right: Box::new(grow(xs, ys, r, depth + 1)),
            }
        }
        _ => leaf,
    }
}

/// Classifier confidence is the logistic of the gap between the two
/// largest logits.
pub fn infer(model: &FittedModel, features: &FeatureVector) -> Result<Prediction, InferenceError> {
    check_version(features)?;
    if model.feature_version != features.version {
        return Err(InferenceError::FeatureVersionMismatch { expected: model.feature_version, got: features.version });
    }
    let idx = model.index()?;
    let x = model.normalization.apply(features, &idx);
    match &model.params {
        ModelParams::LinearClassifier { classes, weights, bias } => {
            let z = logits(weights, bias, &x);
            let mut order: Vec<usize> = (0..z.len()).collect();
            order.sort_by(|&a, &b| z[b].total_cmp(&z[a]).then(a.cmp(&b)));
            let margin = z[order[0]] - z[order[1]];
            Ok(Prediction::Class { label: classes[order[0]].clone(), confidence: 1.0 / (1.0 + (-margin).exp()) })
        }
        ModelParams::DecisionTreeRegressor { root } => Ok(Prediction::Number { value: root.predict(&x) }),
        ModelParams::NearestNeighborIndex { .. } => Err(InferenceError::WrongModelKind("classifier or regressor")),
    }
}

fn missing_identity(fv: &FeatureVector) -> Vec<String> {
    IDENTITY_FEATURES.iter().filter(|n| fv.get(n).is_none()).map(|n| n.to_string()).collect()
}

/// Nearest-neighbour index over z-scored identity features. Statistics
/// come from the enrolled vectors.
pub fn build_identity_index(enrolled: &[(String, FeatureVector)]) -> Result<FittedModel, InferenceError> {
    if enrolled.is_empty() {
        return Err(InferenceError::EmptyIndex);
    }
    for (_, fv) in enrolled {
        check_version(fv)?;
        let missing = missing_identity(fv);
        if !missing.is_empty() {
            return Err(InferenceError::IncompleteProbe(missing));
        }
    }
    let idx = indices(&IDENTITY_FEATURES);
    let rows: Vec<&FeatureVector> = enrolled.iter().map(|e| &e.1).collect();
    let normalization = Normalization::fit(&rows, &idx);
    let vectors = rows.iter().map(|r| normalization.apply(r, &idx)).collect();
    Ok(FittedModel {
        attribute: "identity".into(),
        feature_version: FEATURE_VERSION,
        features: IDENTITY_FEATURES.iter().map(|s| s.to_string()).collect(),
        normalization,
        params: ModelParams::NearestNeighborIndex { user_ids: enrolled.iter().map(|e| e.0.clone()).collect(), vectors },
    })
}

pub fn identify_user(index: &FittedModel, probe: &FeatureVector) -> Result<(String, f64), InferenceError> {
    let ModelParams::NearestNeighborIndex { user_ids, vectors } = &index.params else {
        return Err(InferenceError::WrongModelKind("nearest-neighbor-index"));
    };
    if user_ids.is_empty() {
        return Err(InferenceError::EmptyIndex);
    }
    check_version(probe)?;
    let missing = missing_identity(probe);
    if !missing.is_empty() {
        return Err(InferenceError::IncompleteProbe(missing));
    }
    let x = index.normalization.apply(probe, &index.index()?);
    let (best, d2) = vectors
        .iter()
        .enumerate()
        .map(|(i, v)| (i, v.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>()))
        .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
        .expect("non-empty");
    Ok((user_ids[best].clone(), d2.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(pairs: &[(&str, f64)]) -> FeatureVector {
        let mut v = FeatureVector::empty();
        for (n, x) in pairs {
            v.set(n, *x);
        }
        v
    }

    fn toy_gender() -> Vec<(FeatureVector, Label)> {
        (0..20)
            .map(|i| {
                let male = i % 2 == 0;
                let h = if male { 1.9 } else { 1.5 } + 0.001 * i as f64;
                let v = fv(&[("height_m", h), ("wingspan_m", h), ("ipd_m", 0.063)]);
                (v, Label::Class(if male { "male" } else { "female" }.into()))
            })
            .collect()
    }

    #[test]
    fn separable_toy_set() {
        let data = toy_gender();
        let m = fit("gender", &data).unwrap();
        for (x, y) in &data {
            let Prediction::Class { label, .. } = infer(&m, x).unwrap() else { panic!() };
            assert_eq!(Label::Class(label), *y);
        }
        let centroid = fv(&[("height_m", 1.909), ("wingspan_m", 1.909), ("ipd_m", 0.063)]);
        let Prediction::Class { label, confidence } = infer(&m, &centroid).unwrap() else { panic!() };
        assert_eq!(label, "male");
        assert!(confidence > 0.9, "{confidence}");
    }

    #[test]
    fn degenerate_and_small_inputs() {
        let mut data = toy_gender();
        for d in &mut data {
            d.1 = Label::Class("male".into());
        }
        assert_eq!(fit("gender", &data).unwrap_err(), InferenceError::DegenerateLabels);
        assert_eq!(fit("gender", &data[..5]).unwrap_err(), InferenceError::TooFewExamples(5));
        assert!(matches!(fit("shoe_size", &data), Err(InferenceError::UnknownAttribute(_))));
    }

    #[test]
    fn tree_recovers_step_and_is_reproducible() {
        let data: Vec<(FeatureVector, Label)> = (0..40)
            .map(|i| {
                let d = 600.0 + 10.0 * i as f64;
                (fv(&[("session_duration_s", d)]), Label::Number(if i < 20 { 20.0 } else { 40.0 }))
            })
            .collect();
        let m = fit("age", &data).unwrap();
        let a = infer(&m, &data[3].0).unwrap();
        assert_eq!(a, Prediction::Number { value: 20.0 });
        assert_eq!(infer(&m, &data[3].0).unwrap(), a);
        let ModelParams::DecisionTreeRegressor { root } = &m.params else { panic!() };
        assert!(root.depth() <= TREE_MAX_DEPTH);
    }

    #[test]
    fn version_mismatch() {
        let m = fit("gender", &toy_gender()).unwrap();
        let mut v = toy_gender()[0].0.clone();
        v.version = 99;
        assert!(matches!(infer(&m, &v), Err(InferenceError::FeatureVersionMismatch { .. })));
    }

    #[test]
    fn model_json_round_trip() {
        let m = fit("gender", &toy_gender()).unwrap();
        assert_eq!(FittedModel::from_json(&m.to_json()).unwrap(), m);
        let mut bad = m.clone();
        bad.normalization.mean.pop();
        assert!(FittedModel::from_json(&bad.to_json()).is_err());
    }

    fn identity_vec(h: f64, ipd: f64) -> FeatureVector {
        fv(&[
            ("height_m", h),
            ("wingspan_m", h),
            ("moca_total", 28.0),
            ("ipd_m", ipd),
            ("close_vision", 1.0),
            ("far_vision", 1.0),
            ("reaction_time_s", 0.25),
        ])
    }

    #[test]
    fn identity_lookup() {
        let enrolled: Vec<(String, FeatureVector)> =
            (0..5).map(|i| (format!("u{i}"), identity_vec(1.6 + 0.05 * i as f64, 0.060 + 0.001 * i as f64))).collect();
        let idx = build_identity_index(&enrolled).unwrap();
        assert_eq!(identify_user(&idx, &enrolled[3].1).unwrap(), ("u3".to_string(), 0.0));
        let mut probe = enrolled[2].1.clone();
        probe.values[feature_index("ipd_m").unwrap()] = None;
        assert_eq!(identify_user(&idx, &probe), Err(InferenceError::IncompleteProbe(vec!["ipd_m".into()])));
        assert_eq!(build_identity_index(&[]).unwrap_err(), InferenceError::EmptyIndex);
    }
}
