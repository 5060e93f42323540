//! Supernet training with per-group batches.
//!
//! Pairs are classified into complexity groups once, by dataset-level score
//! cutpoints. Every batch is drawn from a single group and trained at that
//! group's width; groups take turns round-robin within an epoch.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exec::Executor;
use crate::image::Image;
use crate::math::mix_seed;
use crate::nn::{Adam, Gradients, SupernetSpec, SupernetWeights, WidthList};
use crate::router::{classify_by_threshold, dataset_thresholds, Thresholds};

/// One Adam step on the width-`width` slice. Per-sample gradients may be
/// computed in parallel by `exec`; they are summed in batch order.
pub fn train_step<E: Executor>(
    weights: &mut SupernetWeights,
    adam: &mut Adam,
    width: f64,
    batch: &[(&Image, &Image)],
    lr: f64,
    exec: &E,
) -> Result<f64> {
    let Some(&(first, _)) = batch.first() else {
        return Err(Error::EmptyBatch);
    };
    for (moire, clean) in batch {
        first.check_same_dims(moire)?;
        moire.check_same_dims(clean)?;
    }
    let view = weights.slice(width)?;
    let results = exec.map(batch.len(), |i| view.backward(batch[i].0, batch[i].1));
    let mut total = Gradients::zeros(&view);
    let mut loss = 0.0;
    for r in results {
        let (l, g) = r?;
        loss += l;
        total.add_assign(&g);
    }
    drop(view);
    let n = batch.len() as f64;
    loss /= n;
    if !loss.is_finite() {
        return Err(Error::Diverged(loss));
    }
    total.scale(1.0 / n);
    adam.update(weights, &total, lr);
    Ok(loss)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainPair {
    pub moire: Image,
    pub clean: Image,
    /// Moiré score of `moire`.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdSource {
    /// `k/M` quantiles of the training scores.
    Quantiles,
    Fixed(Thresholds),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub widths: WidthList,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub thresholds: ThresholdSource,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            widths: WidthList::default(),
            epochs: 10,
            batch_size: 8,
            learning_rate: 1e-3,
            seed: 0,
            thresholds: ThresholdSource::Quantiles,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochLog {
    pub epoch: usize,
    pub width: f64,
    pub mean_loss: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub weights: SupernetWeights,
    pub thresholds: Thresholds,
    /// Pair indices per group.
    pub groups: Vec<Vec<usize>>,
    /// Groups that had no members and were never trained.
    pub skipped_groups: Vec<usize>,
    pub log: Vec<EpochLog>,
}

pub fn train_supernet<E: Executor>(
    pairs: &[TrainPair],
    spec: SupernetSpec,
    cfg: &TrainConfig,
    exec: &E,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<TrainOutcome> {
    if pairs.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if cfg.batch_size == 0 {
        return Err(Error::EmptyBatch);
    }
    let m = cfg.widths.len();
    let scores: Vec<f64> = pairs.iter().map(|p| p.score).collect();
    let thresholds = match &cfg.thresholds {
        ThresholdSource::Quantiles => dataset_thresholds(&scores, m)?,
        ThresholdSource::Fixed(t) if t.num_groups() == m => t.clone(),
        ThresholdSource::Fixed(t) => {
            return Err(Error::ThresholdCount {
                cutpoints: t.cutpoints().len(),
                groups: m,
            })
        }
    };
    let mut groups = vec![Vec::new(); m];
    for (i, &s) in scores.iter().enumerate() {
        groups[classify_by_threshold(s, &thresholds)].push(i);
    }
    let skipped_groups: Vec<usize> = (0..m).filter(|&g| groups[g].is_empty()).collect();

    let mut weights = SupernetWeights::init(spec, cfg.seed);
    let mut adam = Adam::new(&weights);
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 1));
    let widths = cfg.widths.as_slice();
    let mut log = Vec::new();

    for epoch in 0..cfg.epochs {
        let batches: Vec<Vec<Vec<usize>>> = groups
            .iter()
            .map(|members| {
                let mut order = members.clone();
                order.shuffle(&mut rng);
                order.chunks(cfg.batch_size).map(<[usize]>::to_vec).collect()
            })
            .collect();
        let rounds = batches.iter().map(Vec::len).max().unwrap_or(0);
        let mut loss_sum = vec![0.0; m];
        let mut seen = vec![0usize; m];
        for round in 0..rounds {
            for (g, group_batches) in batches.iter().enumerate() {
                let Some(indices) = group_batches.get(round) else {
                    continue;
                };
                let batch: Vec<(&Image, &Image)> = indices
                    .iter()
                    .map(|&i| (&pairs[i].moire, &pairs[i].clean))
                    .collect();
                let loss = train_step(&mut weights, &mut adam, widths[g], &batch, cfg.learning_rate, exec)?;
                loss_sum[g] += loss * batch.len() as f64;
                seen[g] += batch.len();
            }
        }
        for g in (0..m).filter(|&g| seen[g] > 0) {
            let entry = EpochLog {
                epoch,
                width: widths[g],
                mean_loss: loss_sum[g] / seen[g] as f64,
            };
            on_epoch(&entry);
            log.push(entry);
        }
    }
    Ok(TrainOutcome {
        weights,
        thresholds,
        groups,
        skipped_groups,
        log,
    })
}
