//! Linear classification and domain-discrepancy diagnostics.
//!
//! Features are matrices with one row per sample.

use log::warn;
use nalgebra::Cholesky;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{Error, Matrix, Result};

/// Ridge regression with an unregularised intercept.
///
/// Minimises `(1/N) Σ ‖y_n − Wᵀx_n − b‖² + ridge ‖W‖²`, so duplicating the
/// training set leaves the solution unchanged. Solved in the primal when
/// `D ≤ N` and through the `N x N` kernel system otherwise.
fn ridge_solve(x: &Matrix, y: &Matrix, ridge: f64) -> Result<(Matrix, Vec<f64>)> {
    let (n, dim) = x.shape();
    let x_mean: Vec<f64> = x.column_iter().map(|c| c.sum() / n as f64).collect();
    let y_mean: Vec<f64> = y.column_iter().map(|c| c.sum() / n as f64).collect();
    let mut xc = x.clone();
    for (j, mu) in x_mean.iter().enumerate() {
        xc.column_mut(j).add_scalar_mut(-mu);
    }
    let mut yc = y.clone();
    for (j, mu) in y_mean.iter().enumerate() {
        yc.column_mut(j).add_scalar_mut(-mu);
    }
    let shift = ridge * n as f64;
    let w = if dim <= n {
        let mut gram = xc.transpose() * &xc;
        for i in 0..dim {
            gram[(i, i)] += shift;
        }
        let chol =
            Cholesky::new(gram).ok_or_else(|| Error::RankDeficient("ridge normal equations are singular".into()))?;
        chol.solve(&(xc.transpose() * &yc))
    } else {
        let mut kernel = &xc * xc.transpose();
        for i in 0..n {
            kernel[(i, i)] += shift;
        }
        let chol =
            Cholesky::new(kernel).ok_or_else(|| Error::RankDeficient("ridge kernel system is singular".into()))?;
        xc.transpose() * chol.solve(&yc)
    };
    let bias = (0..y.ncols())
        .map(|c| y_mean[c] - x_mean.iter().zip(w.column(c).iter()).map(|(m, v)| m * v).sum::<f64>())
        .collect();
    Ok((w, bias))
}

/// One-vs-rest linear model; `weights` is `(D + 1) x C` with the bias in
/// the last row.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    pub weights: Matrix,
    pub class_count: usize,
}

/// Closed-form one-vs-rest ridge regression on ±1 targets.
pub fn train_classifier(features: &Matrix, labels: &[usize], ridge: f64) -> Result<LinearClassifier> {
    let (n, dim) = features.shape();
    if labels.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {n} samples",
            labels.len()
        )));
    }
    if !(ridge > 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidConfig(format!("ridge = {ridge} must be positive")));
    }
    let class_count = labels.iter().max().map_or(0, |m| m + 1).max(2);
    if n < class_count {
        return Err(Error::InvalidConfig(format!("{n} samples for {class_count} classes")));
    }
    let targets = Matrix::from_fn(n, class_count, |i, c| if labels[i] == c { 1.0 } else { -1.0 });
    let (w, bias) = ridge_solve(features, &targets, ridge)?;
    let mut weights = Matrix::zeros(dim + 1, class_count);
    weights.view_mut((0, 0), (dim, class_count)).copy_from(&w);
    for (c, b) in bias.iter().enumerate() {
        weights[(dim, c)] = *b;
    }
    Ok(LinearClassifier { weights, class_count })
}

impl LinearClassifier {
    pub fn scores(&self, features: &Matrix) -> Result<Matrix> {
        let dim = self.weights.nrows() - 1;
        if features.ncols() != dim {
            return Err(Error::DimensionMismatch(format!(
                "{}-dim features for a {dim}-dim classifier",
                features.ncols()
            )));
        }
        let mut s = features * self.weights.rows(0, dim);
        for mut row in s.row_iter_mut() {
            row += self.weights.row(dim);
        }
        Ok(s)
    }

    /// Arg-max class per row; ties go to the lowest class index.
    pub fn predict(&self, features: &Matrix) -> Result<Vec<usize>> {
        let s = self.scores(features)?;
        Ok(s.row_iter()
            .map(|row| {
                let mut best = 0;
                for c in 1..row.len() {
                    if row[c] > row[best] {
                        best = c;
                    }
                }
                best
            })
            .collect())
    }
}

pub fn accuracy(clf: &LinearClassifier, features: &Matrix, labels: &[usize]) -> Result<f64> {
    if labels.len() != features.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} samples",
            labels.len(),
            features.nrows()
        )));
    }
    if labels.is_empty() {
        return Err(Error::InvalidConfig("accuracy of an empty set".into()));
    }
    let pred = clf.predict(features)?;
    let hits = pred.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / labels.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ADistanceOptions {
    pub folds: usize,
    pub seed: u64,
    pub ridge: f64,
}

impl Default for ADistanceOptions {
    fn default() -> Self {
        ADistanceOptions {
            folds: 5,
            seed: 0,
            ridge: 1.0,
        }
    }
}

/// Fold index of each member of a group of `n`, depending only on
/// `(seed, n)`. Both domains use the same rule, so exchanging them maps
/// folds onto folds.
fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (n as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng);
    let mut fold = vec![0; n];
    for (pos, &i) in perm.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

/// Training rows in a canonical order (lexicographic by content) so the
/// fitted model does not depend on which domain was listed first.
fn canonical_order(rows: &mut [(Vec<f64>, f64)]) {
    rows.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.total_cmp(&b.1))
    });
}

/// Proxy A-distance `2(1 − 2ε)` clamped to `[0, 2]`, with `ε` the
/// stratified k-fold error of a linear classifier separating `a` from `b`.
pub fn a_distance(a: &Matrix, b: &Matrix, opts: &ADistanceOptions) -> Result<f64> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "feature widths {} and {} differ",
            a.ncols(),
            b.ncols()
        )));
    }
    let smallest = a.nrows().min(b.nrows());
    if smallest < 2 {
        return Err(Error::InvalidConfig("each set needs at least two samples".into()));
    }
    if opts.folds < 2 {
        return Err(Error::InvalidConfig("at least two folds are required".into()));
    }
    let folds = if opts.folds > smallest {
        warn!("reducing A-distance folds from {} to {smallest}", opts.folds);
        smallest
    } else {
        opts.folds
    };
    let fold_a = fold_assignment(a.nrows(), folds, opts.seed);
    let fold_b = fold_assignment(b.nrows(), folds, opts.seed);
    let dim = a.ncols();

    let mut errors = 0usize;
    for f in 0..folds {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (m, folds_of, target) in [(a, &fold_a, -1.0), (b, &fold_b, 1.0)] {
            for (i, &fi) in folds_of.iter().enumerate() {
                let row: Vec<f64> = m.row(i).iter().copied().collect();
                if fi == f {
                    test.push((row, target));
                } else {
                    train.push((row, target));
                }
            }
        }
        canonical_order(&mut train);
        let x = Matrix::from_fn(train.len(), dim, |i, j| train[i].0[j]);
        let y = Matrix::from_fn(train.len(), 1, |i, _| train[i].1);
        let (w, bias) = ridge_solve(&x, &y, opts.ridge)?;
        for (row, target) in &test {
            let score: f64 = row.iter().zip(w.column(0).iter()).map(|(p, q)| p * q).sum::<f64>() + bias[0];
            let predicted = if score > 0.0 { 1.0 } else { -1.0 };
            if predicted != *target {
                errors += 1;
            }
        }
    }
    let eps = errors as f64 / (a.nrows() + b.nrows()) as f64;
    Ok((2.0 * (1.0 - 2.0 * eps)).clamp(0.0, 2.0))
}

/// Within- and between-class A-distances and their ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassDivergence {
    pub d_a_w: f64,
    pub d_a_b: f64,
    pub j_s: f64,
}

/// Domain-level and class-level discrepancy of one feature space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscrepancyReport {
    pub d_a: f64,
    pub d_a_w: f64,
    pub d_a_b: f64,
    pub j_s: f64,
}

impl DiscrepancyReport {
    pub fn new(d_a: f64, class: ClassDivergence) -> Self {
        DiscrepancyReport {
            d_a,
            d_a_w: class.d_a_w,
            d_a_b: class.d_a_b,
            j_s: class.j_s,
        }
    }
}

fn class_rows(feats: &Matrix, labels: &[usize], class: usize) -> Matrix {
    let idx: Vec<usize> = labels
        .iter()
        .enumerate()
        .filter(|(_, &l)| l == class)
        .map(|(i, _)| i)
        .collect();
    Matrix::from_fn(idx.len(), feats.ncols(), |i, j| feats[(idx[i], j)])
}

/// Floor applied to the between-class divergence before taking the ratio.
pub const BETWEEN_CLASS_FLOOR: f64 = 1e-6;

/// `d_A^w` averages, over classes `i`, the A-distance between class `i` of
/// `reference` and class `i` of `compared`; `d_A^b` averages the A-distance
/// over ordered pairs of distinct classes within `compared`;
/// `J_s = d_A^w / max(d_A^b, 1e-6)`.
///
/// Passing the aligned source as `compared` measures how far each class
/// moved under the alignment; passing labelled target features measures
/// how well source and target classes coincide.
pub fn class_divergence(
    reference: &Matrix,
    reference_labels: &[usize],
    compared: &Matrix,
    compared_labels: &[usize],
    opts: &ADistanceOptions,
) -> Result<ClassDivergence> {
    if reference_labels.len() != reference.nrows() || compared_labels.len() != compared.nrows() {
        return Err(Error::DimensionMismatch(
            "label count does not match feature rows".into(),
        ));
    }
    let classes = reference_labels
        .iter()
        .chain(compared_labels)
        .max()
        .map_or(0, |m| m + 1);
    if classes < 2 {
        return Err(Error::InvalidConfig(
            "class divergence needs at least two classes".into(),
        ));
    }
    let mut ref_classes = Vec::with_capacity(classes);
    let mut cmp_classes = Vec::with_capacity(classes);
    for c in 0..classes {
        let r = class_rows(reference, reference_labels, c);
        let m = class_rows(compared, compared_labels, c);
        if r.nrows() < 2 || m.nrows() < 2 {
            return Err(Error::InvalidConfig(format!("class {c} has fewer than two samples")));
        }
        ref_classes.push(r);
        cmp_classes.push(m);
    }
    let mut within = 0.0;
    for c in 0..classes {
        within += a_distance(&ref_classes[c], &cmp_classes[c], opts)?;
    }
    let d_a_w = within / classes as f64;
    // a_distance is symmetric, so each unordered pair counts twice.
    let mut between = 0.0;
    for i in 0..classes {
        for j in i + 1..classes {
            between += 2.0 * a_distance(&cmp_classes[i], &cmp_classes[j], opts)?;
        }
    }
    let d_a_b = between / (classes * (classes - 1)) as f64;
    Ok(ClassDivergence {
        d_a_w,
        d_a_b,
        j_s: d_a_w / d_a_b.max(BETWEEN_CLASS_FLOOR),
    })
}
