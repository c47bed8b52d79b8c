use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::metrics::{accuracy, mean_std};
use crate::error::{Error, Result};
use crate::matrix::{dot, Matrix};
use crate::rng;

/// Disjoint train / test partition of sample indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub fraction: f64,
    pub seed: u64,
}

impl Split {
    /// Random split with `round(fraction * n)` training samples (at least one
    /// per class when possible). If the draw misses a class, the first test
    /// sample of that class is swapped with a training sample of the most
    /// represented class, so the training size stays fixed.
    pub fn new(labels: &[u32], num_classes: usize, fraction: f64, seed: u64) -> Result<Split> {
        if !(0.0..=1.0).contains(&fraction) {
            return Err(Error::invalid(format!(
                "train fraction {fraction} outside [0, 1]"
            )));
        }
        let n = labels.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng::stream(seed, &[0x5b11]));
        let t = ((fraction * n as f64).round() as usize).clamp(num_classes.min(n), n);
        let (train, test) = order.split_at_mut(t);

        for c in 0..num_classes as u32 {
            if train.iter().any(|&i| labels[i] == c) {
                continue;
            }
            let Some(ti) = test.iter().position(|&i| labels[i] == c) else {
                continue;
            };
            let mut counts = vec![0usize; num_classes];
            for &i in train.iter() {
                counts[labels[i] as usize] += 1;
            }
            let donor = (0..num_classes).max_by_key(|&k| counts[k]).unwrap();
            if counts[donor] < 2 {
                continue;
            }
            let tr = train
                .iter()
                .rposition(|&i| labels[i] as usize == donor)
                .unwrap();
            std::mem::swap(&mut train[tr], &mut test[ti]);
        }
        Ok(Split {
            train: train.to_vec(),
            test: test.to_vec(),
            fraction,
            seed,
        })
    }
}

/// How inputs are rescaled after centring.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scaling {
    /// One factor for all columns, so the mean squared row norm is 1.
    /// Commutes with rotations of the input space.
    Global,
    /// Each column to unit variance. Invariant to rescaling any column, but
    /// not to rotations.
    PerFeature,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogisticParams {
    pub learning_rate: f64,
    pub epochs: usize,
    /// Coefficient of `0.5 * ||W||^2` (bias unpenalised).
    pub l2: f64,
    pub scaling: Scaling,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            learning_rate: 1.0,
            epochs: 1000,
            l2: 1e-3,
            scaling: Scaling::Global,
        }
    }
}

/// Multinomial logistic regression on centred, rescaled inputs.
///
/// Inputs are shifted by the training mean and divided by the scale chosen
/// by [`Scaling`], both fitted on the training rows.
#[derive(Clone, Debug, PartialEq)]
pub struct LogisticModel {
    /// `num_classes x d`.
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub center: Vec<f64>,
    /// Per-column divisor.
    pub scale: Vec<f64>,
    pub trained: bool,
}

fn softmax_in_place(z: &mut [f64]) {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for v in z.iter_mut() {
        *v = (*v - m).exp();
        s += *v;
    }
    z.iter_mut().for_each(|v| *v /= s);
}

/// Mean cross-entropy of `(weights, bias)` on `x`, plus `0.5 * l2 * ||W||^2`,
/// and its gradient with respect to the weights and the bias.
pub fn cross_entropy(
    weights: &Matrix,
    bias: &[f64],
    x: &Matrix,
    y: &[u32],
    l2: f64,
) -> (f64, Matrix, Vec<f64>) {
    let c = weights.rows();
    let d = weights.cols();
    let n = x.rows() as f64;
    let mut gw = Matrix::zeros(c, d);
    let mut gb = vec![0.0; c];
    let mut loss = 0.0;
    let mut z = vec![0.0; c];
    for (row, &label) in x.iter_rows().zip(y) {
        for k in 0..c {
            z[k] = dot(weights.row(k), row) + bias[k];
        }
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        loss += lse - z[label as usize];
        softmax_in_place(&mut z);
        z[label as usize] -= 1.0;
        for k in 0..c {
            gb[k] += z[k] / n;
            for (g, xi) in gw.row_mut(k).iter_mut().zip(row) {
                *g += z[k] * xi / n;
            }
        }
    }
    let mut reg = 0.0;
    for (g, w) in gw.as_mut_slice().iter_mut().zip(weights.as_slice()) {
        *g += l2 * w;
        reg += w * w;
    }
    (loss / n + 0.5 * l2 * reg, gw, gb)
}

impl LogisticModel {
    fn transform_row(&self, row: &[f64], out: &mut [f64]) {
        for (((o, x), m), s) in out.iter_mut().zip(row).zip(&self.center).zip(&self.scale) {
            *o = (x - m) / s;
        }
    }

    pub fn transform(&self, x: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(x.rows(), x.cols());
        for i in 0..x.rows() {
            self.transform_row(x.row(i), out.row_mut(i));
        }
        out
    }

    pub fn num_classes(&self) -> usize {
        self.bias.len()
    }

    /// Class probabilities for each row.
    pub fn predict_proba(&self, x: &Matrix) -> Matrix {
        let c = self.num_classes();
        let mut out = Matrix::zeros(x.rows(), c);
        let mut buf = vec![0.0; x.cols()];
        for i in 0..x.rows() {
            self.transform_row(x.row(i), &mut buf);
            let z = out.row_mut(i);
            for k in 0..c {
                z[k] = dot(self.weights.row(k), &buf) + self.bias[k];
            }
            softmax_in_place(z);
        }
        out
    }

    pub fn predict(&self, x: &Matrix) -> Vec<u32> {
        let p = self.predict_proba(x);
        p.iter_rows()
            .map(|r| {
                let mut best = 0;
                for k in 1..r.len() {
                    if r[k] > r[best] {
                        best = k;
                    }
                }
                best as u32
            })
            .collect()
    }
}

/// Largest eigenvalue of `x^T x / n` by power iteration.
fn top_eigenvalue(x: &Matrix) -> f64 {
    let d = x.cols();
    if d == 0 || x.rows() == 0 {
        return 0.0;
    }
    let n = x.rows() as f64;
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut lambda = 0.0;
    for _ in 0..100 {
        let mut next = vec![0.0; d];
        for row in x.iter_rows() {
            let t = dot(row, &v);
            for (a, r) in next.iter_mut().zip(row) {
                *a += t * r / n;
            }
        }
        lambda = dot(&next, &next).sqrt();
        if lambda == 0.0 {
            return 0.0;
        }
        next.iter_mut().for_each(|a| *a /= lambda);
        v = next;
    }
    lambda
}

/// Fits multinomial logistic regression by full-batch gradient descent.
///
/// The step is `learning_rate` divided by a bound on the loss curvature, so
/// rates up to about 2 are stable whatever the input scale.
pub fn train_classifier(
    x: &Matrix,
    y: &[u32],
    num_classes: usize,
    params: &LogisticParams,
) -> Result<LogisticModel> {
    if x.rows() != y.len() {
        return Err(Error::Dimension(format!(
            "{} rows for {} labels",
            x.rows(),
            y.len()
        )));
    }
    let mut present = vec![false; num_classes];
    for &l in y {
        if l as usize >= num_classes {
            return Err(Error::invalid(format!(
                "label {l} outside 0..{num_classes}"
            )));
        }
        present[l as usize] = true;
    }
    if let Some(c) = present.iter().position(|p| !p) {
        return Err(Error::ClassAbsent(c as u32));
    }
    if !x.is_finite() {
        return Err(Error::invalid("training inputs contain non-finite values"));
    }

    let d = x.cols();
    let n = x.rows() as f64;
    let mut center = vec![0.0; d];
    for row in x.iter_rows() {
        for (c, v) in center.iter_mut().zip(row) {
            *c += v / n;
        }
    }
    let mut ss = vec![0.0; d];
    for row in x.iter_rows() {
        for ((s, v), c) in ss.iter_mut().zip(row).zip(&center) {
            *s += (v - c) * (v - c) / n;
        }
    }
    let guard = |s: f64| if s > 0.0 && s.is_finite() { s } else { 1.0 };
    let scale = match params.scaling {
        Scaling::Global => vec![guard(ss.iter().sum::<f64>().sqrt()); d],
        Scaling::PerFeature => ss.iter().map(|s| guard(s.sqrt())).collect(),
    };

    let mut model = LogisticModel {
        weights: Matrix::zeros(num_classes, d),
        bias: vec![0.0; num_classes],
        center,
        scale,
        trained: false,
    };
    let xt = model.transform(x);
    // The loss curvature is at most the top eigenvalue of the (centred)
    // input second moment, or 1 along the bias.
    let step = params.learning_rate / (top_eigenvalue(&xt).max(1.0) + params.l2);
    for _ in 0..params.epochs {
        let (_, gw, gb) = cross_entropy(&model.weights, &model.bias, &xt, y, params.l2);
        for (w, g) in model.weights.as_mut_slice().iter_mut().zip(gw.as_slice()) {
            *w -= step * g;
        }
        for (b, g) in model.bias.iter_mut().zip(&gb) {
            *b -= step * g;
        }
    }
    if !model.weights.is_finite() || model.bias.iter().any(|b| !b.is_finite()) {
        return Err(Error::invalid(
            "classifier diverged; lower the learning rate",
        ));
    }
    model.trained = true;
    Ok(model)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassificationReport {
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// Trains on `fraction` of the samples and tests on the rest, `num_splits`
/// times with seeds derived from `seed`. `x` holds one row per sample.
pub fn evaluate_classification(
    x: &Matrix,
    labels: &[u32],
    num_classes: usize,
    num_splits: usize,
    fraction: f64,
    seed: u64,
    params: &LogisticParams,
) -> Result<ClassificationReport> {
    if x.rows() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} rows for {} labels",
            x.rows(),
            labels.len()
        )));
    }
    let accuracies = (0..num_splits)
        .into_par_iter()
        .map(|s| {
            let split = Split::new(
                labels,
                num_classes,
                fraction,
                rng::derive(seed, &[s as u64]),
            )?;
            let ytr: Vec<u32> = split.train.iter().map(|&i| labels[i]).collect();
            let yte: Vec<u32> = split.test.iter().map(|&i| labels[i]).collect();
            let model = train_classifier(&x.select_rows(&split.train), &ytr, num_classes, params)?;
            Ok(accuracy(&model.predict(&x.select_rows(&split.test)), &yte))
        })
        .collect::<Result<Vec<f64>>>()?;
    let (mean, std) = mean_std(&accuracies);
    Ok(ClassificationReport {
        accuracies,
        mean,
        std,
    })
}
