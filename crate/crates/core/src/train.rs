//! Minibatch training: per-example tapes evaluated in parallel, gradients
//! averaged in a fixed order, Adam updates. Same seed, same machine, same
//! weights, bit for bit.

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::{split_dataset, PairDataset};
use crate::error::{DataError, Error, TensorError};
use crate::featurize::{featurize, FeaturizedDrug};
use crate::metrics::{compute_metrics, Metrics};
use crate::model::{bind, forward_on_tape, Hyperparams, ModelParams};
use crate::scalar::Scalar;
use crate::smiles::parse_smiles;
use crate::tensor::adam::Adam;
use crate::tensor::tape::Tape;
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub hp: Hyperparams,
    pub lr: f64,
    pub epochs: usize,
    pub steps_per_epoch: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// When set, this fraction of rows trains and the rest scores
    /// validation metrics after every epoch.
    pub val_fraction: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hp: Hyperparams::default(),
            lr: 0.001,
            epochs: 100,
            steps_per_epoch: 200,
            batch_size: 64,
            seed: 42,
            val_fraction: None,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), Error> {
        if self.epochs == 0 || self.steps_per_epoch == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "epochs, steps per epoch, and batch size must all be at least 1".to_string(),
            ));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive and finite, got {}",
                self.lr
            )));
        }
        Ok(())
    }
}

/// A featurized pair. Drugs are shared, so a SMILES string appearing in
/// many rows is parsed and featurized once.
#[derive(Debug, Clone)]
pub struct EncodedPair<T> {
    pub a: Arc<FeaturizedDrug<T>>,
    pub b: Arc<FeaturizedDrug<T>>,
    pub label: u8,
}

/// Parses and featurizes every pair, caching by SMILES string. Failures
/// name the first row that references the offending string.
pub fn encode_dataset<T: Scalar>(
    dataset: &PairDataset,
    max_nodes: usize,
) -> Result<Vec<EncodedPair<T>>, DataError> {
    let mut cache: HashMap<String, Arc<FeaturizedDrug<T>>> = HashMap::new();
    let mut encoded = Vec::with_capacity(dataset.len());
    for (i, pair) in dataset.pairs.iter().enumerate() {
        let row = i + 1;
        let mut lookup = |smiles: &str| -> Result<Arc<FeaturizedDrug<T>>, DataError> {
            if let Some(hit) = cache.get(smiles) {
                return Ok(hit.clone());
            }
            let encode = || -> Result<FeaturizedDrug<T>, Error> {
                let graph = parse_smiles(smiles)?;
                Ok(featurize(&graph, max_nodes)?)
            };
            let drug = encode().map_err(|e| DataError::MalformedRow {
                row,
                reason: format!("{smiles:?}: {e}"),
            })?;
            let drug = Arc::new(drug);
            cache.insert(smiles.to_string(), drug.clone());
            Ok(drug)
        };
        encoded.push(EncodedPair {
            a: lookup(&pair.smiles_a)?,
            b: lookup(&pair.smiles_b)?,
            label: pair.label,
        });
    }
    Ok(encoded)
}

/// Scores every pair with the current weights, in parallel.
pub fn score_pairs<T: Scalar>(
    params: &ModelParams<T>,
    encoded: &[EncodedPair<T>],
) -> Result<(Vec<f64>, Vec<u8>), TensorError> {
    let scores = encoded
        .par_iter()
        .map(|pair| {
            let mut tape = Tape::new();
            let bound = bind(&mut tape, params)?;
            let artifacts = forward_on_tape(&mut tape, &bound, &pair.a, &pair.b)?;
            Ok(tape.value(artifacts.probability).item().to_f64())
        })
        .collect::<Result<Vec<f64>, TensorError>>()?;
    let labels = encoded.iter().map(|p| p.label).collect();
    Ok((scores, labels))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub mean_loss: f64,
    /// Present when a validation split exists and holds both classes.
    pub val: Option<Metrics>,
}

#[derive(Debug)]
pub struct TrainOutcome<T> {
    pub params: ModelParams<T>,
    pub history: Vec<EpochRecord>,
}

/// Loss and per-parameter gradients for one example, computed on its own
/// tape so examples parallelize freely.
fn example_grads<T: Scalar>(
    params: &ModelParams<T>,
    pair: &EncodedPair<T>,
) -> Result<(f64, Vec<Tensor<T>>), TensorError> {
    let mut tape = Tape::new();
    let bound = bind(&mut tape, params)?;
    let artifacts = forward_on_tape(&mut tape, &bound, &pair.a, &pair.b)?;
    let label = T::from_usize(usize::from(pair.label));
    let loss = tape.bce_loss(artifacts.probability, label)?;
    tape.backward(loss)?;
    let grads = bound
        .ids()
        .iter()
        .map(|&id| tape.grad_cloned_or_zeros(id))
        .collect();
    Ok((tape.value(loss).item().to_f64(), grads))
}

/// One optimizer step over a batch: examples run in parallel, then their
/// gradients fold in batch order so the averaged update never depends on
/// thread scheduling.
fn train_step<T: Scalar>(
    params: &mut ModelParams<T>,
    adam: &mut Adam<T>,
    lr: f64,
    batch: &[&EncodedPair<T>],
) -> Result<f64, TensorError> {
    let results = batch
        .par_iter()
        .map(|pair| example_grads(params, pair))
        .collect::<Result<Vec<_>, _>>()?;
    let scale = T::from_f64(1.0 / batch.len() as f64);
    let mut mean_loss = 0.0;
    let mut mean_grads: Option<Vec<Tensor<T>>> = None;
    for (loss, grads) in results {
        mean_loss += loss;
        match &mut mean_grads {
            None => mean_grads = Some(grads),
            Some(acc) => {
                for (a, g) in acc.iter_mut().zip(&grads) {
                    a.add_in_place(g);
                }
            }
        }
    }
    let mut mean_grads = mean_grads.expect("batch is nonempty");
    for g in &mut mean_grads {
        g.scale_in_place(scale);
    }
    adam.step(T::from_f64(lr), &mut params.tensors_mut(), &mean_grads)?;
    Ok(mean_loss / batch.len() as f64)
}

fn shuffled_indices(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let bound = (i + 1) as u64;
        let limit = u64::MAX - u64::MAX % bound;
        let j = loop {
            let draw = rng.next_u64();
            if draw < limit {
                break (draw % bound) as usize;
            }
        };
        indices.swap(i, j);
    }
    indices
}

/// Trains a fresh model on the dataset. `progress` fires once per epoch,
/// after its record is final.
pub fn train<T: Scalar>(
    dataset: &PairDataset,
    config: &TrainConfig,
    mut progress: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<T>, Error> {
    config.validate()?;
    let (n_neg, n_pos) = dataset.class_counts();
    if n_neg == 0 || n_pos == 0 {
        return Err(DataError::SingleClass.into());
    }
    let (train_set, val_set) = match config.val_fraction {
        Some(fraction) => {
            let (t, v) = split_dataset(dataset, fraction, config.seed)?;
            (t, Some(v))
        }
        None => (dataset.clone(), None),
    };
    let train_pairs = encode_dataset::<T>(&train_set, config.hp.max_nodes)?;
    let val_pairs = match &val_set {
        Some(v) => Some(encode_dataset::<T>(v, config.hp.max_nodes)?),
        None => None,
    };

    let mut params = ModelParams::<T>::init(config.hp, config.seed);
    let mut adam = Adam::<T>::new();
    // Stream 1 keeps the shuffle draws independent of the stream-0 draws
    // that initialized the weights.
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(config.seed);
    shuffle_rng.set_stream(1);

    let n = train_pairs.len();
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        let order = shuffled_indices(n, &mut shuffle_rng);
        let mut loss_sum = 0.0;
        for step in 0..config.steps_per_epoch {
            let batch: Vec<&EncodedPair<T>> = (0..config.batch_size)
                .map(|k| &train_pairs[order[(step * config.batch_size + k) % n]])
                .collect();
            loss_sum +=
                train_step(&mut params, &mut adam, config.lr, &batch).map_err(Error::Tensor)?;
        }
        let val = match &val_pairs {
            Some(pairs) => {
                let (scores, labels) = score_pairs(&params, pairs).map_err(Error::Tensor)?;
                let has_both = labels.contains(&0) && labels.contains(&1);
                if has_both {
                    Some(compute_metrics(&scores, &labels, 0.5)?)
                } else {
                    None
                }
            }
            None => None,
        };
        let record = EpochRecord {
            epoch,
            mean_loss: loss_sum / config.steps_per_epoch as f64,
            val,
        };
        progress(&record);
        history.push(record);
    }
    Ok(TrainOutcome { params, history })
}

/// Writes the per-epoch history as CSV. Validation columns appear when
/// any epoch has them; epochs without stay blank.
pub fn write_history(path: &Path, history: &[EpochRecord]) -> Result<(), DataError> {
    let any_val = history.iter().any(|r| r.val.is_some());
    let mut out = String::from(if any_val {
        "epoch,mean_loss,val_roc_auc,val_f1,val_aupr\n"
    } else {
        "epoch,mean_loss\n"
    });
    for r in history {
        match (&r.val, any_val) {
            (Some(m), _) => out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{:.6}\n",
                r.epoch, r.mean_loss, m.roc_auc, m.f1, m.aupr
            )),
            (None, true) => out.push_str(&format!("{},{:.6},,,\n", r.epoch, r.mean_loss)),
            (None, false) => out.push_str(&format!("{},{:.6}\n", r.epoch, r.mean_loss)),
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Pair;

    fn tiny_hp() -> Hyperparams {
        Hyperparams {
            gcn_layers: 2,
            gcn_units: 6,
            fc_layers: 2,
            fc_units: 8,
            max_nodes: 10,
            shared_degree_weights: false,
            share_attention_w: false,
        }
    }

    fn toy_dataset() -> PairDataset {
        // Positives pair an acid with an alcohol; negatives are plain
        // hydrocarbons. Separable from composition alone.
        let positives = ["CC(=O)O", "CCC(=O)O", "OC(=O)C", "CC(=O)OC"];
        let alcohols = ["CO", "CCO", "OCC", "CCCO"];
        let hydrocarbons = ["CC", "CCC", "CCCC", "C"];
        let mut pairs = Vec::new();
        for (i, p) in positives.iter().enumerate() {
            pairs.push(Pair {
                smiles_a: p.to_string(),
                smiles_b: alcohols[i].to_string(),
                label: 1,
            });
        }
        for (i, h) in hydrocarbons.iter().enumerate() {
            pairs.push(Pair {
                smiles_a: h.to_string(),
                smiles_b: hydrocarbons[(i + 1) % hydrocarbons.len()].to_string(),
                label: 0,
            });
        }
        PairDataset { pairs }
    }

    fn quick_config() -> TrainConfig {
        TrainConfig {
            hp: tiny_hp(),
            lr: 0.01,
            epochs: 2,
            steps_per_epoch: 4,
            batch_size: 4,
            seed: 5,
            val_fraction: None,
        }
    }

    #[test]
    fn encoding_caches_repeated_smiles() {
        let ds = PairDataset {
            pairs: vec![
                Pair {
                    smiles_a: "CCO".into(),
                    smiles_b: "CC".into(),
                    label: 1,
                },
                Pair {
                    smiles_a: "CCO".into(),
                    smiles_b: "C".into(),
                    label: 0,
                },
            ],
        };
        let encoded = encode_dataset::<f64>(&ds, 10).unwrap();
        assert!(Arc::ptr_eq(&encoded[0].a, &encoded[1].a));
        assert!(!Arc::ptr_eq(&encoded[0].b, &encoded[1].b));
    }

    #[test]
    fn encoding_names_the_row_with_the_bad_smiles() {
        let ds = PairDataset {
            pairs: vec![
                Pair {
                    smiles_a: "CCO".into(),
                    smiles_b: "CC".into(),
                    label: 1,
                },
                Pair {
                    smiles_a: "C1CC".into(),
                    smiles_b: "CC".into(),
                    label: 0,
                },
            ],
        };
        let err = encode_dataset::<f64>(&ds, 10).unwrap_err();
        match err {
            DataError::MalformedRow { row, reason } => {
                assert_eq!(row, 2);
                assert!(reason.contains("C1CC"));
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn training_runs_and_reports_every_epoch() {
        let mut seen = Vec::new();
        let outcome =
            train::<f64>(&toy_dataset(), &quick_config(), |r| seen.push(r.epoch)).unwrap();
        assert_eq!(outcome.history.len(), 2);
        assert_eq!(seen, vec![1, 2]);
        assert!(outcome.history.iter().all(|r| r.mean_loss.is_finite()));
    }

    #[test]
    fn same_seed_trains_to_bitwise_identical_weights() {
        let a = train::<f64>(&toy_dataset(), &quick_config(), |_| {}).unwrap();
        let b = train::<f64>(&toy_dataset(), &quick_config(), |_| {}).unwrap();
        assert_eq!(a.params.values(), b.params.values());
        assert_eq!(a.history, b.history);

        let mut other = quick_config();
        other.seed = 6;
        let c = train::<f64>(&toy_dataset(), &other, |_| {}).unwrap();
        assert_ne!(a.params.values(), c.params.values());
    }

    #[test]
    fn loss_falls_on_a_separable_toy_problem() {
        let mut config = quick_config();
        config.epochs = 6;
        config.steps_per_epoch = 8;
        let outcome = train::<f64>(&toy_dataset(), &config, |_| {}).unwrap();
        let first = outcome.history.first().unwrap().mean_loss;
        let last = outcome.history.last().unwrap().mean_loss;
        assert!(last < first, "loss went from {first} to {last}");
    }

    #[test]
    fn single_class_datasets_are_rejected() {
        let mut ds = toy_dataset();
        ds.pairs.retain(|p| p.label == 1);
        let err = train::<f64>(&ds, &quick_config(), |_| {}).unwrap_err();
        assert!(matches!(err, Error::Data(DataError::SingleClass)));
    }

    #[test]
    fn degenerate_configs_are_rejected() {
        let mut config = quick_config();
        config.batch_size = 0;
        assert!(matches!(
            train::<f64>(&toy_dataset(), &config, |_| {}),
            Err(Error::Config(_))
        ));
        let mut config = quick_config();
        config.lr = 0.0;
        assert!(matches!(
            train::<f64>(&toy_dataset(), &config, |_| {}),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn validation_split_reports_metrics() {
        let mut config = quick_config();
        config.val_fraction = Some(0.5);
        let outcome = train::<f64>(&toy_dataset(), &config, |_| {}).unwrap();
        // The 50/50 split of this balanced set leaves both classes on each
        // side for this seed; all epochs then carry metrics.
        let with_val = outcome.history.iter().filter(|r| r.val.is_some()).count();
        assert_eq!(with_val, outcome.history.len());
        for r in &outcome.history {
            let m = r.val.unwrap();
            assert!(m.roc_auc >= 0.0 && m.roc_auc <= 1.0);
        }
    }

    #[test]
    fn history_csv_has_one_row_per_epoch() {
        let outcome = train::<f64>(&toy_dataset(), &quick_config(), |_| {}).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.csv");
        write_history(&path, &outcome.history).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "epoch,mean_loss");
        assert_eq!(lines.len(), 1 + outcome.history.len());
        assert!(lines[1].starts_with("1,"));
    }

    #[test]
    fn scoring_matches_single_pair_inference() {
        let outcome = train::<f64>(&toy_dataset(), &quick_config(), |_| {}).unwrap();
        let encoded = encode_dataset::<f64>(&toy_dataset(), 10).unwrap();
        let (scores, labels) = score_pairs(&outcome.params, &encoded).unwrap();
        assert_eq!(scores.len(), 8);
        assert_eq!(labels, toy_dataset().labels());
        let single = crate::model::forward(&outcome.params, &encoded[0].a, &encoded[0].b).unwrap();
        assert_eq!(single.probability, scores[0]);
    }
}
