use std::path::PathBuf;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{save_params, Gradients, Network, NnError, Result, Scalar};

/// One input pair with its class: 0 = success, 1 = failure.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub depth: Vec<f32>,
    pub gripper: Vec<f32>,
    pub label: usize,
}

/// Random-access sample provider; lets callers build inputs lazily.
pub trait SampleSource: Sync {
    fn len(&self) -> usize;
    fn sample(&self, index: usize) -> Sample;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub struct VecSource(pub Vec<Sample>);

impl SampleSource for VecSource {
    fn len(&self) -> usize {
        self.0.len()
    }
    fn sample(&self, index: usize) -> Sample {
        self.0[index].clone()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub weight_decay: f64,
    /// Training stops after the first epoch that ends past this budget.
    pub max_seconds: Option<f64>,
    /// Parameters are written here after every epoch.
    pub checkpoint: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            momentum: 0.9,
            batch_size: 32,
            epochs: 20,
            seed: 1,
            weight_decay: 0.0,
            max_seconds: None,
            checkpoint: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0) || !(0.0..1.0).contains(&self.momentum) {
            return Err(NnError::Config("learning rate must be non-negative and momentum in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(NnError::Config("batch size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean training loss with dropout active.
    pub train_loss: f64,
    pub verify_loss: Option<f64>,
    /// `[tp, fp, fn, tn]` on the verify split at the 0.5 threshold.
    pub verify_confusion: Option<[usize; 4]>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub stopped_by_budget: bool,
}

fn to_scalar<T: Scalar>(v: &[f32]) -> Vec<T> {
    v.iter().map(|&x| T::from_f64(x as f64)).collect()
}

/// Mean loss and `[tp, fp, fn, tn]` with success predicted when `y0 > 0.5`.
pub fn evaluate<T: Scalar>(net: &Network<T>, source: &dyn SampleSource) -> Result<(f64, [usize; 4])> {
    let rows: Vec<(f64, bool, bool)> = (0..source.len())
        .into_par_iter()
        .map(|i| {
            let s = source.sample(i);
            let logits = net.logits(&to_scalar(&s.depth), &to_scalar(&s.gripper))?;
            let (loss, _) = super::cross_entropy(&logits, s.label);
            let p = super::softmax(&logits);
            Ok((loss.to_f64(), p[0].to_f64() > 0.5, s.label == 0))
        })
        .collect::<Result<_>>()?;
    let mut m = [0usize; 4];
    let mut total = 0.0;
    for (loss, predicted, actual) in rows {
        total += loss;
        let k = match (predicted, actual) {
            (true, true) => 0,
            (true, false) => 1,
            (false, true) => 2,
            (false, false) => 3,
        };
        m[k] += 1;
    }
    Ok((total / source.len().max(1) as f64, m))
}

/// Mini-batch SGD with momentum on the cross-entropy loss.
///
/// Per-sample gradients may be computed in parallel but are summed in sample
/// order, and every dropout mask is drawn from a stream keyed by epoch and
/// position, so results do not depend on the thread count.
pub fn train<T: Scalar>(
    net: &mut Network<T>,
    train_set: &dyn SampleSource,
    verify: Option<&dyn SampleSource>,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(NnError::Config("training split is empty".into()));
    }
    let start = Instant::now();
    let lr = T::from_f64(config.learning_rate);
    let mu = T::from_f64(config.momentum);
    let decay = T::from_f64(config.weight_decay);
    let mut velocity = Gradients::zeros_like(net);
    let mut report = TrainReport {
        epochs: Vec::new(),
        stopped_by_budget: false,
    };
    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch_no, batch) in order.chunks(config.batch_size).enumerate() {
            let base = batch_no * config.batch_size;
            let net_ref = &*net;
            let results: Vec<(T, Gradients<T>)> = batch
                .par_iter()
                .enumerate()
                .map(|(k, &i)| {
                    let s = train_set.sample(i);
                    let mut drop_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_d409);
                    drop_rng.set_stream(((epoch as u64) << 32) | (base + k) as u64);
                    net_ref.loss_and_grad(&to_scalar(&s.depth), &to_scalar(&s.gripper), s.label, Some(&mut drop_rng))
                })
                .collect::<Result<_>>()?;
            let mut sum = Gradients::zeros_like(net);
            let mut batch_loss = 0.0;
            for (loss, g) in &results {
                batch_loss += loss.to_f64();
                sum.add(g);
            }
            if !batch_loss.is_finite() {
                return Err(NnError::Divergence {
                    epoch,
                    batch: batch_no,
                    loss: batch_loss,
                });
            }
            total += batch_loss;
            let scale = T::ONE / T::from_f64(batch.len() as f64);
            for ((p, v), g) in net.params.iter_mut().zip(&mut velocity.tensors).zip(&sum.tensors) {
                for ((pv, vv), &gv) in p.data.iter_mut().zip(&mut v.data).zip(&g.data) {
                    *vv = mu * *vv - lr * (gv * scale + decay * *pv);
                    *pv += *vv;
                }
            }
        }
        let (verify_loss, verify_confusion) = match verify {
            Some(v) if !v.is_empty() => {
                let (l, m) = evaluate(net, v)?;
                (Some(l), Some(m))
            }
            _ => (None, None),
        };
        let stats = EpochStats {
            epoch,
            train_loss: total / train_set.len() as f64,
            verify_loss,
            verify_confusion,
            seconds: start.elapsed().as_secs_f64(),
        };
        log::info!(
            "epoch {epoch}: train loss {:.4}, verify loss {:?}, confusion {:?}",
            stats.train_loss,
            stats.verify_loss,
            stats.verify_confusion
        );
        report.epochs.push(stats);
        if let Some(path) = &config.checkpoint {
            save_params(net, path)?;
        }
        if config.max_seconds.is_some_and(|s| start.elapsed().as_secs_f64() > s) {
            report.stopped_by_budget = epoch + 1 < config.epochs;
            break;
        }
    }
    Ok(report)
}
