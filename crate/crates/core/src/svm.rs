//! One-vs-all linear SVMs trained by dual coordinate descent, with
//! cross-validated choice of the regularization constant and window-averaged
//! recording classification.
//!
//! Each binary problem minimizes `0.5 |w|^2 + (C / n) sum_i max(0, 1 - y_i w.x_i)`
//! over standardized features augmented with a constant 1 (the bias).
//! Dividing `C` by the sample count keeps the solution unchanged when every
//! training sample is duplicated.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{extract_windows, Waveform};
use crate::error::{Error, Result};
use crate::features::{extract_features, FeatureOptions};
use crate::network::{NetworkConfig, Parameters};

pub const DEFAULT_C_GRID: [f64; 5] = [0.01, 0.1, 1.0, 10.0, 100.0];
pub const DEFAULT_FOLDS: usize = 5;

#[derive(Debug, Clone)]
pub struct SvmOptions {
    pub c_grid: Vec<f64>,
    pub folds: usize,
    /// Stop once the duality gap is at most `tolerance * max(1, primal)`.
    pub tolerance: f64,
    pub max_epochs: usize,
    pub seed: u64,
}

impl Default for SvmOptions {
    fn default() -> Self {
        Self {
            c_grid: DEFAULT_C_GRID.to_vec(),
            folds: DEFAULT_FOLDS,
            tolerance: 1e-4,
            max_epochs: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub classes: Vec<String>,
    /// One weight vector per class, in standardized feature space.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub c: f64,
    pub feature_mean: Vec<f64>,
    pub feature_scale: Vec<f64>,
    /// Mean cross-validated accuracy per candidate `C`.
    #[serde(default)]
    pub cv_accuracy: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Per-dimension mean and population standard deviation; constant
    /// dimensions keep scale 1.
    pub fn fit(rows: &[&[f32]]) -> Result<Self> {
        let n = rows.len();
        let dim = rows.first().map_or(0, |r| r.len());
        if n == 0 || dim == 0 {
            return Err(Error::Empty("svm features"));
        }
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, &v) in mean.iter_mut().zip(r.iter()) {
                *m += v as f64;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, &v), m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v as f64 - m).powi(2);
            }
        }
        let scale = var
            .iter()
            .map(|s| {
                let sd = (s / n as f64).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn apply(&self, x: &[f32]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(&v, (m, s))| (v as f64 - m) / s)
            .collect()
    }
}

/// A trained binary classifier `w.x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BinarySvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub epochs: usize,
    pub gap: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dual coordinate descent for the hinge-loss SVM with labels `y ∈ {±1}`.
pub fn train_binary(x: &[Vec<f64>], y: &[f64], c: f64, options: &SvmOptions, seed: u64) -> Result<BinarySvm> {
    let n = x.len();
    if n == 0 {
        return Err(Error::Empty("svm training set"));
    }
    if !(c > 0.0) {
        return Err(Error::Svm(format!("C must be positive, got {c}")));
    }
    let dim = x[0].len();
    let upper = c / n as f64;
    // diagonal of Q with the constant bias feature
    let qii: Vec<f64> = x.iter().map(|r| dot(r, r) + 1.0).collect();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; dim];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gap = f64::INFINITY;
    let mut epochs = 0;
    while epochs < options.max_epochs {
        epochs += 1;
        order.shuffle(&mut rng);
        for &i in &order {
            let g = y[i] * (dot(&w, &x[i]) + b) - 1.0;
            let new = (alpha[i] - g / qii[i]).clamp(0.0, upper);
            let delta = new - alpha[i];
            if delta != 0.0 {
                alpha[i] = new;
                let s = delta * y[i];
                for (wj, xj) in w.iter_mut().zip(&x[i]) {
                    *wj += s * xj;
                }
                b += s;
            }
        }
        let norm = dot(&w, &w) + b * b;
        let hinge: f64 = x
            .iter()
            .zip(y)
            .map(|(r, &yi)| (1.0 - yi * (dot(&w, r) + b)).max(0.0))
            .sum();
        let primal = 0.5 * norm + upper * hinge;
        let dual = alpha.iter().sum::<f64>() - 0.5 * norm;
        gap = primal - dual;
        if gap <= options.tolerance * primal.max(1.0) {
            break;
        }
    }
    Ok(BinarySvm {
        weights: w,
        bias: b,
        epochs,
        gap,
    })
}

fn class_index(labels: &[String]) -> Result<(Vec<String>, Vec<usize>)> {
    let classes: Vec<String> = labels
        .iter()
        .cloned()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    if classes.len() < 2 {
        return Err(Error::Svm(format!(
            "need at least two classes, found {}",
            classes.len()
        )));
    }
    let idx = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label collected"))
        .collect();
    Ok((classes, idx))
}

fn check_rows(features: &[Vec<f32>], labels: usize) -> Result<usize> {
    if features.len() != labels {
        return Err(Error::ShapeMismatch {
            dimension: "labels per feature vector",
            expected: features.len(),
            actual: labels,
        });
    }
    let dim = features.first().map_or(0, Vec::len);
    if dim == 0 {
        return Err(Error::Empty("svm features"));
    }
    for f in features {
        if f.len() != dim {
            return Err(Error::ShapeMismatch {
                dimension: "feature dimension",
                expected: dim,
                actual: f.len(),
            });
        }
        if f.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("svm features"));
        }
    }
    if features.iter().all(|f| f == &features[0]) {
        return Err(Error::Svm("all feature vectors are identical".into()));
    }
    Ok(dim)
}

fn fit_ova(
    features: &[&[f32]],
    targets: &[usize],
    classes: &[String],
    c: f64,
    options: &SvmOptions,
) -> Result<SvmModel> {
    let standardizer = Standardizer::fit(features)?;
    let x: Vec<Vec<f64>> = features.iter().map(|f| standardizer.apply(f)).collect();
    let mut weights = Vec::with_capacity(classes.len());
    let mut biases = Vec::with_capacity(classes.len());
    for k in 0..classes.len() {
        let y: Vec<f64> = targets.iter().map(|&t| if t == k { 1.0 } else { -1.0 }).collect();
        let m = train_binary(&x, &y, c, options, options.seed.wrapping_add(k as u64))?;
        weights.push(m.weights);
        biases.push(m.bias);
    }
    Ok(SvmModel {
        classes: classes.to_vec(),
        weights,
        biases,
        c,
        feature_mean: standardizer.mean,
        feature_scale: standardizer.scale,
        cv_accuracy: Vec::new(),
    })
}

/// Assigns whole groups to folds, stratified by each group's label.
pub fn fold_assignment(targets: &[usize], groups: &[String], folds: usize, seed: u64) -> Vec<usize> {
    let mut by_class: BTreeMap<usize, Vec<&String>> = BTreeMap::new();
    let mut seen = std::collections::BTreeSet::new();
    for (t, g) in targets.iter().zip(groups) {
        if seen.insert(g) {
            by_class.entry(*t).or_default().push(g);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold_of: BTreeMap<&String, usize> = BTreeMap::new();
    let mut next = 0;
    for members in by_class.values_mut() {
        members.shuffle(&mut rng);
        for g in members.iter() {
            fold_of.insert(g, next % folds);
            next += 1;
        }
    }
    groups.iter().map(|g| fold_of[g]).collect()
}

/// Trains one-vs-all classifiers with `C` chosen by k-fold cross-validated
/// accuracy (ties go to the smaller `C`). Samples sharing a group id, such
/// as windows of one recording, always land in the same fold.
pub fn svm_train_grouped(
    features: &[Vec<f32>],
    labels: &[String],
    groups: Option<&[String]>,
    options: &SvmOptions,
) -> Result<SvmModel> {
    check_rows(features, labels.len())?;
    let (classes, targets) = class_index(labels)?;
    let mut grid = options.c_grid.clone();
    if grid.is_empty() || grid.iter().any(|c| !(*c > 0.0)) {
        return Err(Error::Svm("C grid must be non-empty and positive".into()));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let own: Vec<String>;
    let groups = match groups {
        Some(g) if g.len() == features.len() => g,
        Some(g) => {
            return Err(Error::ShapeMismatch {
                dimension: "group ids",
                expected: features.len(),
                actual: g.len(),
            })
        }
        None => {
            own = (0..features.len()).map(|i| i.to_string()).collect();
            &own
        }
    };
    let distinct = groups.iter().collect::<std::collections::BTreeSet<_>>().len();
    let folds = options.folds.min(distinct);
    let rows: Vec<&[f32]> = features.iter().map(Vec::as_slice).collect();

    let mut cv = Vec::with_capacity(grid.len());
    let mut best = (grid[0], f64::NEG_INFINITY);
    if folds >= 2 && grid.len() > 1 {
        let fold = fold_assignment(&targets, groups, folds, options.seed);
        for &c in &grid {
            let mut correct = 0usize;
            for f in 0..folds {
                let train: Vec<usize> = (0..rows.len()).filter(|&i| fold[i] != f).collect();
                let test: Vec<usize> = (0..rows.len()).filter(|&i| fold[i] == f).collect();
                let tr_rows: Vec<&[f32]> = train.iter().map(|&i| rows[i]).collect();
                let tr_targets: Vec<usize> = train.iter().map(|&i| targets[i]).collect();
                let model = fit_ova(&tr_rows, &tr_targets, &classes, c, options)?;
                for &i in &test {
                    if predict_index(&svm_predict(&model, rows[i])?) == targets[i] {
                        correct += 1;
                    }
                }
            }
            let acc = correct as f64 / rows.len() as f64;
            cv.push((c, acc));
            if acc > best.1 {
                best = (c, acc);
            }
        }
    }
    let mut model = fit_ova(&rows, &targets, &classes, best.0, options)?;
    model.cv_accuracy = cv;
    Ok(model)
}

pub fn svm_train(features: &[Vec<f32>], labels: &[String], options: &SvmOptions) -> Result<SvmModel> {
    svm_train_grouped(features, labels, None, options)
}

/// Raw one-vs-all margins, one per class.
pub fn svm_predict(model: &SvmModel, features: &[f32]) -> Result<Vec<f64>> {
    if features.len() != model.feature_mean.len() {
        return Err(Error::ShapeMismatch {
            dimension: "feature dimension",
            expected: model.feature_mean.len(),
            actual: features.len(),
        });
    }
    let x: Vec<f64> = features
        .iter()
        .zip(model.feature_mean.iter().zip(&model.feature_scale))
        .map(|(&v, (m, s))| (v as f64 - m) / s)
        .collect();
    Ok(model
        .weights
        .iter()
        .zip(&model.biases)
        .map(|(w, b)| dot(w, &x) + b)
        .collect())
}

/// Index of the largest score; ties resolve to the earliest class.
pub fn predict_index(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class_index: usize,
    pub label: String,
    /// Per-class scores averaged over windows.
    pub mean_scores: Vec<f64>,
}

/// Averages per-window margins and picks the best class.
pub fn classify_windows(model: &SvmModel, windows: &[Vec<f32>]) -> Result<Prediction> {
    if windows.is_empty() {
        return Err(Error::Empty("recording windows"));
    }
    let mut mean = vec![0.0; model.classes.len()];
    for w in windows {
        for (m, s) in mean.iter_mut().zip(svm_predict(model, w)?) {
            *m += s;
        }
    }
    mean.iter_mut().for_each(|m| *m /= windows.len() as f64);
    let class_index = predict_index(&mean);
    Ok(Prediction {
        class_index,
        label: model.classes[class_index].clone(),
        mean_scores: mean,
    })
}

/// Windows a preprocessed recording, extracts features at `layer` and
/// classifies by the mean window score.
#[allow(clippy::too_many_arguments)]
pub fn classify_recording(
    model: &SvmModel,
    net: &NetworkConfig,
    params: &Parameters<f32>,
    layer: &str,
    waveform: &Waveform,
    window_seconds: f64,
    overlap: f64,
    options: FeatureOptions,
) -> Result<Prediction> {
    let windows = extract_windows(waveform, window_seconds, overlap)?;
    let ids: Vec<String> = (0..windows.len()).map(|i| i.to_string()).collect();
    let feats: Vec<Vec<f32>> = extract_features(net, params, layer, &windows, &ids, options)?
        .into_iter()
        .map(|f| f.values)
        .collect();
    classify_windows(model, &feats)
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    pub classes: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn new(classes: Vec<String>) -> Self {
        let n = classes.len();
        Self {
            classes,
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let correct: usize = (0..self.classes.len()).map(|i| self.counts[i][i]).sum();
        correct as f64 / self.total().max(1) as f64
    }

    pub fn class_accuracy(&self, class: usize) -> Option<f64> {
        let n: usize = self.counts[class].iter().sum();
        (n > 0).then(|| self.counts[class][class] as f64 / n as f64)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("true\\predicted,{}\n", self.classes.join(","));
        for (name, row) in self.classes.iter().zip(&self.counts) {
            let cells: Vec<String> = row.iter().map(usize::to_string).collect();
            out.push_str(&format!("{name},{}\n", cells.join(",")));
        }
        out
    }
}
