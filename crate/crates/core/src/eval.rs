//! Accuracy metric, Majority and ContextAVG baselines, and the per-epoch
//! runtime benchmark.

use serde::Serialize;

use rand::distributions::{Distribution, Uniform};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{label_counts, Instance, Polarity};
use crate::embed::EmbeddingTable;
use crate::error::{Error, Result};
use crate::linalg::{add, matvec, scale, softmax, Matrix, Vector};
use crate::model::{forward, predict, LocationMode, MemNetParams, ModelConfig, NUM_CLASSES};
use crate::train::TrainConfig;

/// Confusion counts indexed [gold][predicted]; accuracy is the trace over
/// the total, so the two can never disagree.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct EvalReport {
    pub confusion: [[usize; NUM_CLASSES]; NUM_CLASSES],
    pub count: usize,
}

impl EvalReport {
    pub fn accuracy(&self) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        let correct: usize = (0..NUM_CLASSES).map(|i| self.confusion[i][i]).sum();
        correct as f64 / self.count as f64
    }

    pub fn correct(&self) -> usize {
        (0..NUM_CLASSES).map(|i| self.confusion[i][i]).sum()
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "accuracy {:.4} ({}/{})\n",
            self.accuracy(),
            self.correct(),
            self.count
        ));
        out.push_str(&format!(
            "{:<10} {:>9} {:>9} {:>9}\n",
            "gold\\pred", "positive", "negative", "neutral"
        ));
        for (i, p) in Polarity::ALL.iter().enumerate() {
            out.push_str(&format!(
                "{:<10} {:>9} {:>9} {:>9}\n",
                p.name(),
                self.confusion[i][0],
                self.confusion[i][1],
                self.confusion[i][2]
            ));
        }
        out
    }
}

/// Fraction of exactly correct predictions, with the full confusion table.
pub fn accuracy(predictions: &[Polarity], golds: &[Polarity]) -> Result<EvalReport> {
    if predictions.len() != golds.len() {
        return Err(Error::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut report = EvalReport {
        count: predictions.len(),
        ..Default::default()
    };
    for (p, g) in predictions.iter().zip(golds) {
        report.confusion[g.index()][p.index()] += 1;
    }
    Ok(report)
}

/// Run a trained memory network over a dataset.
pub fn evaluate_model(
    params: &MemNetParams,
    table: &EmbeddingTable,
    instances: &[Instance],
) -> Result<EvalReport> {
    let mut predictions = Vec::with_capacity(instances.len());
    let mut golds = Vec::with_capacity(instances.len());
    for inst in instances {
        let trace = forward(inst, table, params)?;
        predictions.push(predict(&trace));
        golds.push(inst.label);
    }
    accuracy(&predictions, &golds)
}

/// The most frequent training label wins; ties break toward the lower class
/// index.
pub fn majority_label(train: &[Instance]) -> Polarity {
    let counts = label_counts(train);
    let mut best = 0;
    for i in 1..NUM_CLASSES {
        if counts[i] > counts[best] {
            best = i;
        }
    }
    Polarity::from_index(best)
}

/// Assign the majority training label to every test instance.
pub fn majority_baseline(train: &[Instance], test: &[Instance]) -> Result<EvalReport> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let label = majority_label(train);
    let predictions = vec![label; test.len()];
    let golds: Vec<Polarity> = test.iter().map(|i| i.label).collect();
    accuracy(&predictions, &golds)
}

/// Shallow baseline: mean of context embeddings plus the aspect vector, fed
/// to a softmax layer. Structurally a one-hop memory network with uniform
/// attention, an identity query path and no location encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextAvgModel {
    pub weights: Matrix,
    pub bias: Vector,
}

impl ContextAvgModel {
    pub fn init(dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new(-0.01, 0.01);
        let weights = Matrix::from_flat(
            (0..NUM_CLASSES * dim).map(|_| dist.sample(&mut rng)).collect(),
            NUM_CLASSES,
            dim,
        );
        let bias = Vector::from_vec((0..NUM_CLASSES).map(|_| dist.sample(&mut rng)).collect());
        ContextAvgModel { weights, bias }
    }

    /// Mean context embedding plus the aspect vector.
    pub fn feature(instance: &Instance, table: &EmbeddingTable) -> Result<Vector> {
        let context: Vec<usize> = instance.context_indices().collect();
        if context.is_empty() {
            return Err(Error::NoContextTokens);
        }
        let mut mean = Vector::zeros(table.dim());
        for &i in &context {
            mean.add_scaled(&table.embed_token(&instance.tokens[i].text), 1.0);
        }
        let mean = scale(&mean, 1.0 / context.len() as f64);
        Ok(add(&mean, &table.aspect_vector(instance)))
    }

    pub fn probabilities(&self, instance: &Instance, table: &EmbeddingTable) -> Result<Vector> {
        let x = Self::feature(instance, table)?;
        Ok(softmax(&add(&matvec(&self.weights, &x), &self.bias)))
    }

    pub fn predict(&self, instance: &Instance, table: &EmbeddingTable) -> Result<Polarity> {
        let probs = self.probabilities(instance, table)?;
        let mut best = 0;
        for i in 1..probs.len() {
            if probs[i] > probs[best] {
                best = i;
            }
        }
        Ok(Polarity::from_index(best))
    }
}

/// Train the ContextAVG baseline with the same per-instance SGD recipe as
/// the memory network.
pub fn train_context_avg(
    train: &[Instance],
    table: &EmbeddingTable,
    config: &TrainConfig,
) -> Result<ContextAvgModel> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut model = ContextAvgModel::init(table.dim(), config.seed);
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e3779b97f4a7c15);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for _ in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut shuffle_rng);
        }
        for &idx in &order {
            let inst = &train[idx];
            let x = ContextAvgModel::feature(inst, table)?;
            let probs = softmax(&add(&matvec(&model.weights, &x), &model.bias));
            // softmax-regression gradient: (P - y) x^T
            let mut delta = probs;
            delta[inst.label.index()] -= 1.0;
            model
                .weights
                .add_scaled_outer(&delta, &x, -config.learning_rate);
            model.bias.add_scaled(&delta, -config.learning_rate);
        }
    }
    Ok(model)
}

/// Train and evaluate the ContextAVG baseline.
pub fn context_avg_baseline(
    train: &[Instance],
    test: &[Instance],
    table: &EmbeddingTable,
    config: &TrainConfig,
) -> Result<EvalReport> {
    let model = train_context_avg(train, table, config)?;
    let mut predictions = Vec::with_capacity(test.len());
    let mut golds = Vec::with_capacity(test.len());
    for inst in test {
        predictions.push(model.predict(inst, table)?);
        golds.push(inst.label);
    }
    accuracy(&predictions, &golds)
}

/// One row of the runtime table.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub hops: usize,
    /// Median wall-clock seconds per training epoch.
    pub seconds: f64,
}

/// Median seconds per training epoch for each hop count, identical
/// configuration otherwise. `reps` epochs are timed per point (at least 3
/// for a stable median).
pub fn bench_epochs(
    dataset: &[Instance],
    table: &EmbeddingTable,
    hop_list: &[usize],
    mode: LocationMode,
    reps: usize,
    config: &TrainConfig,
) -> Result<Vec<BenchRow>> {
    if hop_list.is_empty() {
        return Ok(Vec::new());
    }
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let reps = reps.max(1);
    let mut rows = Vec::with_capacity(hop_list.len());
    for &hops in hop_list {
        let model = ModelConfig::new(table.dim(), hops, mode);
        let bench_config = TrainConfig {
            epochs: reps,
            ..*config
        };
        let outcome = crate::train::train(dataset, table, model, &bench_config)?;
        let mut times: Vec<f64> = outcome.log.iter().map(|r| r.seconds).collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        rows.push(BenchRow {
            hops,
            seconds: median(&times),
        });
    }
    Ok(rows)
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Coefficient of determination of the least-squares line through the
/// points, for checking that epoch cost grows linearly in hops.
pub fn linear_fit_r2(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    assert!(points.len() >= 2, "need at least two points to fit");
    let mean_x: f64 = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y: f64 = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in points {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
        syy += (y - mean_y) * (y - mean_y);
    }
    if syy == 0.0 {
        return 1.0;
    }
    (sxy * sxy) / (sxx * syy)
}

pub fn render_bench_table(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:>4} {:>14}\n", "hops", "seconds/epoch"));
    for row in rows {
        out.push_str(&format!("{:>4} {:>14.4}\n", row.hops, row.seconds));
    }
    out
}
