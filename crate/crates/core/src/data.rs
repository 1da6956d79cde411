//! Labeled SMILES-pair datasets: CSV loading, negative sampling, and
//! deterministic splits.

use std::collections::HashSet;
use std::path::Path;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::DataError;

/// One labeled drug pair. `label` is 1 for interacting, 0 for not.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pair {
    pub smiles_a: String,
    pub smiles_b: String,
    pub label: u8,
}

#[derive(Debug, Clone, Default)]
pub struct PairDataset {
    pub pairs: Vec<Pair>,
}

impl PairDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn labels(&self) -> Vec<u8> {
        self.pairs.iter().map(|p| p.label).collect()
    }

    /// (negatives, positives)
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.pairs.iter().filter(|p| p.label == 1).count();
        (self.pairs.len() - pos, pos)
    }

    /// Every distinct SMILES string, in first-seen order.
    pub fn unique_smiles(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for pair in &self.pairs {
            for s in [&pair.smiles_a, &pair.smiles_b] {
                if seen.insert(s.clone()) {
                    out.push(s.clone());
                }
            }
        }
        out
    }
}

/// Reads a `smiles_a,smiles_b,label` CSV with a header row. Column order
/// is free and extra columns are ignored; rows are validated but the
/// SMILES strings are not parsed here.
pub fn load_pairs(path: &Path) -> Result<PairDataset, DataError> {
    if !path.exists() {
        return Err(DataError::FileNotFound {
            path: path.display().to_string(),
        });
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(false)
        .from_path(path)
        .map_err(|e| DataError::MalformedRow {
            row: 0,
            reason: e.to_string(),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| DataError::MalformedRow {
            row: 0,
            reason: e.to_string(),
        })?
        .clone();
    let column = |name: &str| -> Result<usize, DataError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MalformedRow {
                row: 0,
                reason: format!("missing column {name:?} in header"),
            })
    };
    let col_a = column("smiles_a")?;
    let col_b = column("smiles_b")?;
    let col_label = column("label")?;
    let mut pairs = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| DataError::MalformedRow {
            row,
            reason: e.to_string(),
        })?;
        let field = |col: usize, name: &str| -> Result<&str, DataError> {
            let value = record.get(col).unwrap_or("");
            if value.is_empty() {
                return Err(DataError::MalformedRow {
                    row,
                    reason: format!("empty {name}"),
                });
            }
            Ok(value)
        };
        let smiles_a = field(col_a, "smiles_a")?.to_string();
        let smiles_b = field(col_b, "smiles_b")?.to_string();
        let label = match field(col_label, "label")? {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(DataError::MalformedRow {
                    row,
                    reason: format!("label must be 0 or 1, got {other:?}"),
                })
            }
        };
        pairs.push(Pair {
            smiles_a,
            smiles_b,
            label,
        });
    }
    if pairs.is_empty() {
        return Err(DataError::EmptyInput);
    }
    Ok(PairDataset { pairs })
}

/// Writes pairs back out in the same CSV format `load_pairs` reads.
/// SMILES strings never contain commas or quotes, so no escaping applies.
pub fn write_pairs(path: &Path, pairs: &[Pair]) -> Result<(), DataError> {
    let mut out = String::from("smiles_a,smiles_b,label\n");
    for p in pairs {
        out.push_str(&format!("{},{},{}\n", p.smiles_a, p.smiles_b, p.label));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Unordered pair key, so (a,b) and (b,a) collide.
fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Unbiased uniform index in `0..bound` by rejection sampling.
fn uniform_index(rng: &mut ChaCha8Rng, bound: usize) -> usize {
    debug_assert!(bound > 0);
    let bound = bound as u64;
    let limit = u64::MAX - u64::MAX % bound;
    loop {
        let draw = rng.next_u64();
        if draw < limit {
            return (draw % bound) as usize;
        }
    }
}

fn shuffled_indices(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = uniform_index(rng, i + 1);
        indices.swap(i, j);
    }
    indices
}

/// Draws `n` label-0 pairs uniformly from the distinct unordered pairs of
/// `pool` that are neither self-pairs nor present (in either order) in
/// `known`. Fails with `PoolExhausted` when fewer than `n` such pairs
/// exist.
pub fn sample_negatives(
    pool: &[String],
    known: &[Pair],
    n: usize,
    seed: u64,
) -> Result<Vec<Pair>, DataError> {
    let distinct: Vec<&String> = {
        let mut seen = HashSet::new();
        pool.iter().filter(|s| seen.insert(s.as_str())).collect()
    };
    let m = distinct.len();
    let mut taken: HashSet<(String, String)> = known
        .iter()
        .map(|p| pair_key(&p.smiles_a, &p.smiles_b))
        .collect();
    let known_in_pool = {
        let pool_set: HashSet<&str> = distinct.iter().map(|s| s.as_str()).collect();
        taken
            .iter()
            .filter(|(a, b)| {
                a != b && pool_set.contains(a.as_str()) && pool_set.contains(b.as_str())
            })
            .count()
    };
    let available = m * m.saturating_sub(1) / 2 - known_in_pool;
    if available < n {
        return Err(DataError::PoolExhausted {
            requested: n,
            available,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let i = uniform_index(&mut rng, m);
        let j = uniform_index(&mut rng, m);
        if i == j {
            continue;
        }
        let key = pair_key(distinct[i], distinct[j]);
        if taken.insert(key) {
            out.push(Pair {
                smiles_a: distinct[i].clone(),
                smiles_b: distinct[j].clone(),
                label: 0,
            });
        }
    }
    Ok(out)
}

/// Shuffles and splits into (train, held-out) with `train_fraction` of the
/// rows in train. Both sides are guaranteed nonempty.
pub fn split_dataset(
    dataset: &PairDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(PairDataset, PairDataset), DataError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DataError::BadSplitFraction {
            fraction: train_fraction,
        });
    }
    let n = dataset.len();
    if n < 2 {
        return Err(DataError::EmptyInput);
    }
    let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = shuffled_indices(n, &mut rng);
    let take = |ix: &[usize]| PairDataset {
        pairs: ix.iter().map(|&i| dataset.pairs[i].clone()).collect(),
    };
    Ok((take(&order[..n_train]), take(&order[n_train..])))
}

/// One cross-validation fold: `(train_indices, val_indices)`.
pub type Fold = (Vec<usize>, Vec<usize>);

/// K-fold assignment over `n` rows. The first `n % k` folds hold one
/// extra row, and every row lands in exactly one validation fold.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>, DataError> {
    if k < 2 || k > n {
        return Err(DataError::BadFoldCount { folds: k, rows: n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let order = shuffled_indices(n, &mut rng);
    let base = n / k;
    let extra = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        let val: Vec<usize> = order[start..start + size].to_vec();
        let train: Vec<usize> = order[..start]
            .iter()
            .chain(order[start + size..].iter())
            .copied()
            .collect();
        folds.push((train, val));
        start += size;
    }
    Ok(folds)
}
