//! Linear one-vs-rest max-margin classifier over feature vectors.
//!
//! Features are standardised column-wise (population variance). Each class
//! gets a linear scorer trained against the other two by minimising the
//! L2-regularised hinge loss
//!
//! ```text
//! J(w) = λ/2 |w|² + (1/n) Σ max(0, 1 − yᵢ w·x̃ᵢ),    λ = 1/(C n)
//! ```
//!
//! with stochastic subgradient steps of size `1/(λ t)` over a seeded
//! per-epoch sample order. `x̃` is the scaled vector with a constant 1
//! appended, so the bias is part of `w` and is regularised with it. The
//! iterate with the lowest objective seen at the end of any epoch is kept.
//! Prediction is the argmax of the three scores; ties go to the lowest class
//! index.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{feature_vector_with_t_m, FeatureTrack, SvmType};
use crate::model::{derive_seed, CtType};

const N_CLASSES: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub label: CtType,
    /// Shifted time at which the features were taken.
    pub t: f64,
    pub source_id: String,
}

/// A feature track with its known transition type.
#[derive(Debug, Clone)]
pub struct LabeledTrack {
    pub track: FeatureTrack,
    pub label: CtType,
    pub t1: f64,
    pub source_id: String,
}

/// Per-column standardisation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Scaler {
    pub fn fit<R: AsRef<[f64]>>(rows: &[R]) -> Result<Scaler> {
        if rows.len() < 2 {
            return Err(Error::InsufficientData("scaler needs at least two samples".into()));
        }
        let f = rows[0].as_ref().len();
        let n = rows.len() as f64;
        let mut mean = vec![0.0; f];
        for r in rows {
            let r = r.as_ref();
            if r.len() != f {
                return Err(Error::LengthMismatch {
                    expected: f,
                    got: r.len(),
                });
            }
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; f];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r.as_ref()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let mut std = Vec::with_capacity(f);
        for (column, s) in var.into_iter().enumerate() {
            let sd = (s / n).sqrt();
            if !(sd > 0.0 && sd.is_finite()) {
                return Err(Error::DegenerateFeature { column });
            }
            std.push(sd);
        }
        Ok(Scaler { mean, std })
    }

    pub fn identity(n: usize) -> Scaler {
        Scaler {
            mean: vec![0.0; n],
            std: vec![1.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.mean.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean.is_empty()
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.len() {
            return Err(Error::LengthMismatch {
                expected: self.len(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect())
    }
}

/// Training settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Hyper {
    /// Inverse regularisation strength.
    pub c: f64,
    pub epochs: usize,
    /// Seed for the per-epoch sample order.
    pub seed: u64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            c: 1.0,
            epochs: 200,
            seed: 0,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::invalid("C must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("at least one epoch is required"));
        }
        Ok(())
    }
}

/// What a model was trained on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub svm_type: SvmType,
    pub t_m: f64,
    /// Shifted time at which training features were taken.
    pub t_eval: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub meta: ModelMeta,
    pub hyper: Hyper,
    pub scaler: Scaler,
    /// One weight vector per class, in class-index order.
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl SvmModel {
    pub fn n_features(&self) -> usize {
        self.scaler.len()
    }

    /// Class scores for a raw (unscaled) feature vector.
    pub fn scores(&self, x: &[f64]) -> Result<[f64; N_CLASSES]> {
        let z = self.scaler.apply(x)?;
        Ok(self.scores_scaled(&z))
    }

    fn scores_scaled(&self, z: &[f64]) -> [f64; N_CLASSES] {
        std::array::from_fn(|c| dot(&self.weights[c], z) + self.biases[c])
    }

    pub fn predict(&self, x: &[f64]) -> Result<CtType> {
        Ok(argmax(&self.scores(x)?))
    }

    pub fn accuracy(&self, samples: &[LabeledSample]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::InsufficientData("no samples to score".into()));
        }
        let mut hits = 0usize;
        for s in samples {
            if self.predict(&s.features)? == s.label {
                hits += 1;
            }
        }
        Ok(hits as f64 / samples.len() as f64)
    }

    /// `m[true][predicted]` counts.
    pub fn confusion(&self, samples: &[LabeledSample]) -> Result<[[usize; N_CLASSES]; N_CLASSES]> {
        let mut m = [[0; N_CLASSES]; N_CLASSES];
        for s in samples {
            m[s.label.index()][self.predict(&s.features)?.index()] += 1;
        }
        Ok(m)
    }

    /// The same scorers behind an identity scaler, for inputs that have
    /// already been standardised with `self.scaler`.
    pub fn prescaled(&self) -> SvmModel {
        SvmModel {
            scaler: Scaler::identity(self.n_features()),
            ..self.clone()
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn argmax(scores: &[f64; N_CLASSES]) -> CtType {
    let mut best = 0;
    for c in 1..N_CLASSES {
        if scores[c] > scores[best] {
            best = c;
        }
    }
    CtType::from_index(best).expect("class index in range")
}

/// Indices of a class-stratified split; each class contributes
/// `round(frac · n_class)` samples to the training part. Both index lists
/// are sorted.
pub fn stratified_split(labels: &[CtType], frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for class in CtType::ALL {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 1, class.index() as u64));
        idx.shuffle(&mut rng);
        let k = (frac * idx.len() as f64).round() as usize;
        train.extend_from_slice(&idx[..k]);
        test.extend_from_slice(&idx[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn objective(w: &[f64], xs: &[Vec<f64>], ys: &[f64], lambda: f64) -> f64 {
    let hinge: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (1.0 - y * dot(w, x)).max(0.0))
        .sum();
    0.5 * lambda * dot(w, w) + hinge / xs.len() as f64
}

/// Train one binary scorer on augmented vectors; returns the best weights
/// and the best-so-far objective after every epoch.
fn fit_binary(xs: &[Vec<f64>], ys: &[f64], hyper: &Hyper, stream: u64) -> (Vec<f64>, Vec<f64>) {
    let n = xs.len();
    let d = xs[0].len();
    let lambda = 1.0 / (hyper.c * n as f64);
    let radius = 1.0 / lambda.sqrt();
    let mut w = vec![0.0; d];
    let mut best = w.clone();
    let mut best_obj = objective(&w, xs, ys, lambda);
    let mut history = Vec::with_capacity(hyper.epochs);
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(hyper.seed, 2, stream));
    let mut t = 0u64;
    for _ in 0..hyper.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let margin = ys[i] * dot(&w, &xs[i]);
            let shrink = 1.0 - eta * lambda;
            w.iter_mut().for_each(|v| *v *= shrink);
            if margin < 1.0 {
                for (v, x) in w.iter_mut().zip(&xs[i]) {
                    *v += eta * ys[i] * x;
                }
            }
            let norm = dot(&w, &w).sqrt();
            if norm > radius {
                let k = radius / norm;
                w.iter_mut().for_each(|v| *v *= k);
            }
        }
        let obj = objective(&w, xs, ys, lambda);
        if obj < best_obj {
            best_obj = obj;
            best.clone_from(&w);
        }
        history.push(best_obj);
    }
    (best, history)
}

/// Result of fitting on a set of samples.
#[derive(Debug, Clone)]
pub struct Fit {
    pub model: SvmModel,
    /// Best-so-far training objective per epoch, one list per class.
    pub objective: Vec<Vec<f64>>,
}

/// Fit scaler and scorers on `samples` (all of them are training data).
pub fn fit(samples: &[LabeledSample], hyper: &Hyper, meta: ModelMeta) -> Result<Fit> {
    hyper.validate()?;
    for class in CtType::ALL {
        if !samples.iter().any(|s| s.label == class) {
            return Err(Error::MissingClass(class));
        }
    }
    let rows: Vec<&[f64]> = samples.iter().map(|s| s.features.as_slice()).collect();
    let scaler = Scaler::fit(&rows)?;
    let xs: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| {
            let mut z = scaler.apply(r)?;
            z.push(1.0);
            Ok(z)
        })
        .collect::<Result<_>>()?;
    let f = scaler.len();
    let mut weights = Vec::with_capacity(N_CLASSES);
    let mut biases = Vec::with_capacity(N_CLASSES);
    let mut objective = Vec::with_capacity(N_CLASSES);
    for class in CtType::ALL {
        let ys: Vec<f64> = samples
            .iter()
            .map(|s| if s.label == class { 1.0 } else { -1.0 })
            .collect();
        let (mut w, hist) = fit_binary(&xs, &ys, hyper, class.index() as u64);
        biases.push(w[f]);
        w.truncate(f);
        weights.push(w);
        objective.push(hist);
    }
    Ok(Fit {
        model: SvmModel {
            meta,
            hyper: *hyper,
            scaler,
            weights,
            biases,
        },
        objective,
    })
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: SvmModel,
    pub test_accuracy: f64,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub objective: Vec<Vec<f64>>,
}

/// Stratified 70/30 split, fit on the 70 %, score on the 30 %.
pub fn train(samples: &[LabeledSample], split_seed: u64, hyper: &Hyper, meta: ModelMeta) -> Result<TrainReport> {
    let labels: Vec<CtType> = samples.iter().map(|s| s.label).collect();
    let (train_idx, test_idx) = stratified_split(&labels, 0.7, split_seed);
    let tr: Vec<LabeledSample> = train_idx.iter().map(|&i| samples[i].clone()).collect();
    let te: Vec<LabeledSample> = test_idx.iter().map(|&i| samples[i].clone()).collect();
    let fit = fit(&tr, hyper, meta)?;
    let test_accuracy = fit.model.accuracy(&te)?;
    Ok(TrainReport {
        model: fit.model,
        test_accuracy,
        train_idx,
        test_idx,
        objective: fit.objective,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpiReport {
    pub baseline: f64,
    /// Mean accuracy drop per feature.
    pub mean: Vec<f64>,
    /// Population standard deviation of the drop per feature.
    pub std: Vec<f64>,
    pub n_perms: usize,
}

/// Accuracy drop when one feature column of `test` is randomly permuted,
/// averaged over `n_perms` permutations per feature.
pub fn permutation_importance(model: &SvmModel, test: &[LabeledSample], n_perms: usize, seed: u64) -> Result<MpiReport> {
    if test.is_empty() {
        return Err(Error::InsufficientData("permutation importance needs test samples".into()));
    }
    if n_perms == 0 {
        return Err(Error::invalid("at least one permutation is required"));
    }
    let baseline = model.accuracy(test)?;
    let f = model.n_features();
    let mut rows: Vec<Vec<f64>> = test.iter().map(|s| s.features.clone()).collect();
    let mut mean = Vec::with_capacity(f);
    let mut std = Vec::with_capacity(f);
    for j in 0..f {
        let original: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let mut drops = Vec::with_capacity(n_perms);
        for p in 0..n_perms {
            let mut col = original.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, j as u64, p as u64));
            col.shuffle(&mut rng);
            for (r, v) in rows.iter_mut().zip(&col) {
                r[j] = *v;
            }
            let mut hits = 0usize;
            for (r, s) in rows.iter().zip(test) {
                if model.predict(r)? == s.label {
                    hits += 1;
                }
            }
            drops.push(baseline - hits as f64 / test.len() as f64);
        }
        for (r, v) in rows.iter_mut().zip(&original) {
            r[j] = *v;
        }
        let m = drops.iter().sum::<f64>() / n_perms as f64;
        let v = drops.iter().map(|d| (d - m) * (d - m)).sum::<f64>() / n_perms as f64;
        mean.push(m);
        std.push(v.sqrt());
    }
    Ok(MpiReport {
        baseline,
        mean,
        std,
        n_perms,
    })
}

/// Feature vectors of every track at shifted time `t`.
pub fn samples_at(tracks: &[LabeledTrack], t: f64, svm_type: SvmType, t_m: f64) -> Result<Vec<LabeledSample>> {
    tracks
        .iter()
        .map(|lt| {
            Ok(LabeledSample {
                features: feature_vector_with_t_m(&lt.track, t, svm_type, t_m)?,
                label: lt.label,
                t,
                source_id: lt.source_id.clone(),
            })
        })
        .collect()
}

/// Held-out accuracy at each `T` in `t_grid`, with an independent model and
/// a fresh stratified split per `T` (split seed derived from `split_seed`
/// and the grid position).
pub fn accuracy_curve(
    tracks: &[LabeledTrack],
    svm_type: SvmType,
    t_m: f64,
    t_grid: &[f64],
    hyper: &Hyper,
    split_seed: u64,
) -> Result<Vec<(f64, f64)>> {
    accuracy_curve_with(|t| samples_at(tracks, t, svm_type, t_m), svm_type, t_m, t_grid, hyper, split_seed)
}

/// [`accuracy_curve`] with the samples at each `T` supplied by the caller.
pub fn accuracy_curve_with<F>(
    mut samples_for: F,
    svm_type: SvmType,
    t_m: f64,
    t_grid: &[f64],
    hyper: &Hyper,
    split_seed: u64,
) -> Result<Vec<(f64, f64)>>
where
    F: FnMut(f64) -> Result<Vec<LabeledSample>>,
{
    t_grid
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let samples = samples_for(t)?;
            let meta = ModelMeta {
                svm_type,
                t_m,
                t_eval: t,
            };
            let r = train(&samples, curve_split_seed(split_seed, k), hyper, meta)?;
            Ok((t, r.test_accuracy))
        })
        .collect()
}

/// Split seed used for the `k`-th point of an accuracy curve.
pub fn curve_split_seed(split_seed: u64, k: usize) -> u64 {
    derive_seed(split_seed, 3, k as u64)
}
