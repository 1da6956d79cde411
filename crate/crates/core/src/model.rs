//! The Siamese interaction model.
//!
//! Both drugs run through one shared graph-convolutional stack. Each
//! layer's node representations are aligned across the pair, pooled into
//! per-drug attention weights, and gathered into layer vectors; the layer
//! vectors sum into one vector per drug. The concatenated pair feeds a
//! small relu feed-forward head ending in a sigmoid interaction
//! probability.
//!
//! Model files are versioned, checksummed, and always store `f64` values
//! regardless of the in-memory scalar type.

use std::io::{Read, Write};
use std::path::Path;

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::attention::{attention_weights, attentive_gather, soft_alignment};
use crate::error::{Error, ModelError, TensorError};
use crate::featurize::{featurize, FeaturizedDrug, ATOM_FEATURES, DEGREE_BUCKETS};
use crate::gcn::run_encoder;
use crate::scalar::Scalar;
use crate::smiles::parse_smiles;
use crate::tensor::init::xavier_uniform;
use crate::tensor::tape::{Activation, Tape, ValueId};
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"DDIG";
const FORMAT_VERSION: u32 = 1;

/// Architecture switches. `max_nodes` is the training-time padding budget;
/// stored weights are independent of it, so inference may featurize at any
/// width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hyperparams {
    pub gcn_layers: usize,
    pub gcn_units: usize,
    pub fc_layers: usize,
    pub fc_units: usize,
    pub max_nodes: usize,
    /// One convolution matrix per layer instead of one per degree bucket.
    pub shared_degree_weights: bool,
    /// One alignment projection shared by all layers instead of one each.
    pub share_attention_w: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            gcn_layers: 4,
            gcn_units: 50,
            fc_layers: 3,
            fc_units: 100,
            max_nodes: crate::featurize::DEFAULT_MAX_NODES,
            shared_degree_weights: false,
            share_attention_w: false,
        }
    }
}

impl Hyperparams {
    fn degree_bank_size(&self) -> usize {
        if self.shared_degree_weights {
            1
        } else {
            DEGREE_BUCKETS
        }
    }

    fn attention_count(&self) -> usize {
        if self.share_attention_w {
            1
        } else {
            self.gcn_layers
        }
    }

    /// Fields that must match for stored weights to be usable; everything
    /// except the padding budget.
    fn architecture_fields(&self) -> (usize, usize, usize, usize, bool, bool) {
        (
            self.gcn_layers,
            self.gcn_units,
            self.fc_layers,
            self.fc_units,
            self.shared_degree_weights,
            self.share_attention_w,
        )
    }
}

/// A named weight tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter<T> {
    pub name: String,
    pub value: Tensor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcLayer<T> {
    pub weight: Parameter<T>,
    pub bias: Parameter<T>,
}

/// All trainable weights. Enumeration order (convolution banks by layer
/// then degree, attention projections, head layers, output layer) is the
/// canonical order used by the optimizer, gradient collection, and the
/// file format.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<T> {
    pub hp: Hyperparams,
    pub gcn: Vec<Vec<Parameter<T>>>,
    pub attention: Vec<Parameter<T>>,
    pub fc: Vec<FcLayer<T>>,
    pub out: FcLayer<T>,
}

impl<T: Scalar> ModelParams<T> {
    /// Xavier-initialized weights, zero biases, drawn from one seeded
    /// stream in canonical order.
    pub fn init(hp: Hyperparams, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut gcn = Vec::with_capacity(hp.gcn_layers);
        for layer in 0..hp.gcn_layers {
            let d_in = if layer == 0 {
                ATOM_FEATURES
            } else {
                hp.gcn_units
            };
            let bank = (0..hp.degree_bank_size())
                .map(|d| Parameter {
                    name: format!("gcn{layer}.deg{d}"),
                    value: xavier_uniform(d_in, hp.gcn_units, &mut rng),
                })
                .collect();
            gcn.push(bank);
        }
        let attention = (0..hp.attention_count())
            .map(|layer| Parameter {
                name: format!("attn{layer}"),
                value: xavier_uniform(hp.gcn_units, hp.gcn_units, &mut rng),
            })
            .collect();
        let mut fc = Vec::with_capacity(hp.fc_layers);
        for i in 0..hp.fc_layers {
            let d_in = if i == 0 {
                2 * hp.gcn_units
            } else {
                hp.fc_units
            };
            fc.push(FcLayer {
                weight: Parameter {
                    name: format!("fc{i}.w"),
                    value: xavier_uniform(d_in, hp.fc_units, &mut rng),
                },
                bias: Parameter {
                    name: format!("fc{i}.b"),
                    value: Tensor::zeros(&[hp.fc_units]),
                },
            });
        }
        let out = FcLayer {
            weight: Parameter {
                name: "out.w".to_string(),
                value: xavier_uniform(hp.fc_units, 1, &mut rng),
            },
            bias: Parameter {
                name: "out.b".to_string(),
                value: Tensor::zeros(&[1]),
            },
        };
        ModelParams {
            hp,
            gcn,
            attention,
            fc,
            out,
        }
    }

    /// All-zero weights with the same structure; useful as a neutral model
    /// whose every prediction is exactly 0.5.
    pub fn zeros(hp: Hyperparams) -> Self {
        let mut params = Self::init(hp, 0);
        params.visit_mut(|p| p.value.fill(T::zero()));
        params
    }

    pub fn visit(&self, mut f: impl FnMut(&Parameter<T>)) {
        for bank in &self.gcn {
            for p in bank {
                f(p);
            }
        }
        for p in &self.attention {
            f(p);
        }
        for layer in &self.fc {
            f(&layer.weight);
            f(&layer.bias);
        }
        f(&self.out.weight);
        f(&self.out.bias);
    }

    pub fn visit_mut(&mut self, mut f: impl FnMut(&mut Parameter<T>)) {
        for bank in &mut self.gcn {
            for p in bank {
                f(p);
            }
        }
        for p in &mut self.attention {
            f(p);
        }
        for layer in &mut self.fc {
            f(&mut layer.weight);
            f(&mut layer.bias);
        }
        f(&mut self.out.weight);
        f(&mut self.out.bias);
    }

    /// Mutable references to every value tensor, canonical order. This is
    /// the shape the optimizer consumes.
    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        for bank in &mut self.gcn {
            for p in bank {
                out.push(&mut p.value);
            }
        }
        for p in &mut self.attention {
            out.push(&mut p.value);
        }
        for layer in &mut self.fc {
            out.push(&mut layer.weight.value);
            out.push(&mut layer.bias.value);
        }
        out.push(&mut self.out.weight.value);
        out.push(&mut self.out.bias.value);
        out
    }

    /// Total scalar entries across all parameters.
    pub fn n_parameters(&self) -> usize {
        let mut total = 0;
        self.visit(|p| total += p.value.len());
        total
    }

    /// Cloned values in canonical order.
    pub fn values(&self) -> Vec<Tensor<T>> {
        let mut out = Vec::new();
        self.visit(|p| out.push(p.value.clone()));
        out
    }

    /// Overwrites all values from tensors in canonical order.
    pub fn set_values(&mut self, tensors: &[Tensor<T>]) -> Result<(), TensorError> {
        let mut count = 0;
        self.visit(|_| count += 1);
        if tensors.len() != count {
            return Err(TensorError::ShapeMismatch {
                op: "set_values",
                detail: format!("{} tensors for {} parameters", tensors.len(), count),
            });
        }
        let mut idx = 0;
        let mut err = None;
        self.visit_mut(|p| {
            if err.is_none() {
                if p.value.shape() != tensors[idx].shape() {
                    err = Some(TensorError::ShapeMismatch {
                        op: "set_values",
                        detail: format!(
                            "{}: {:?} vs {:?}",
                            p.name,
                            p.value.shape(),
                            tensors[idx].shape()
                        ),
                    });
                } else {
                    p.value = tensors[idx].clone();
                }
            }
            idx += 1;
        });
        match err {
            Some(e) => Err(e),
            None => Ok(()),
        }
    }
}

/// Tape handles for every parameter, in canonical order within each group.
pub struct BoundParams {
    pub gcn: Vec<Vec<ValueId>>,
    pub attention: Vec<ValueId>,
    pub fc: Vec<(ValueId, ValueId)>,
    pub out: (ValueId, ValueId),
}

impl BoundParams {
    /// Flat canonical enumeration matching [`ModelParams::visit`].
    pub fn ids(&self) -> Vec<ValueId> {
        let mut ids = Vec::new();
        for bank in &self.gcn {
            ids.extend_from_slice(bank);
        }
        ids.extend_from_slice(&self.attention);
        for &(w, b) in &self.fc {
            ids.push(w);
            ids.push(b);
        }
        ids.push(self.out.0);
        ids.push(self.out.1);
        ids
    }
}

/// Registers every parameter as a borrowed tape leaf.
pub fn bind<'p, T: Scalar>(
    tape: &mut Tape<'p, T>,
    params: &'p ModelParams<T>,
) -> Result<BoundParams, TensorError> {
    let mut gcn = Vec::with_capacity(params.gcn.len());
    for bank in &params.gcn {
        let ids = bank
            .iter()
            .map(|p| tape.input(&p.value))
            .collect::<Result<Vec<_>, _>>()?;
        gcn.push(ids);
    }
    let attention = params
        .attention
        .iter()
        .map(|p| tape.input(&p.value))
        .collect::<Result<Vec<_>, _>>()?;
    let mut fc = Vec::with_capacity(params.fc.len());
    for layer in &params.fc {
        fc.push((
            tape.input(&layer.weight.value)?,
            tape.input(&layer.bias.value)?,
        ));
    }
    let out = (
        tape.input(&params.out.weight.value)?,
        tape.input(&params.out.bias.value)?,
    );
    Ok(BoundParams {
        gcn,
        attention,
        fc,
        out,
    })
}

/// Feed-forward head over the two drug vectors: concat, relu layers, then
/// a sigmoid probability (returned as a one-element tensor).
pub fn head_on_tape<'p, T: Scalar>(
    tape: &mut Tape<'p, T>,
    bound: &BoundParams,
    h_a: ValueId,
    h_b: ValueId,
) -> Result<ValueId, TensorError> {
    let joint = tape.concat(h_a, h_b)?;
    let width = tape.value(joint).len();
    let mut z = tape.reshape(joint, &[1, width])?;
    for &(w, b) in &bound.fc {
        let prod = tape.matmul(z, w)?;
        let cols = tape.value(prod).shape()[1];
        let b_row = tape.reshape(b, &[1, cols])?;
        let pre = tape.add(prod, b_row)?;
        z = tape.activation(Activation::Relu, pre)?;
    }
    let prod = tape.matmul(z, bound.out.0)?;
    let b_row = tape.reshape(bound.out.1, &[1, 1])?;
    let logit = tape.add(prod, b_row)?;
    let p = tape.activation(Activation::Sigmoid, logit)?;
    tape.reshape(p, &[1])
}

/// Tape handles produced by one full forward pass.
pub struct ForwardArtifacts {
    /// One-element probability tensor.
    pub probability: ValueId,
    /// Per-layer attention weight vectors for drug A and drug B.
    pub sigmas: Vec<(ValueId, ValueId)>,
    pub h_a: ValueId,
    pub h_b: ValueId,
}

/// Runs the Siamese forward pass on an existing tape. Both drugs go
/// through the same bound weights, which is what makes the encoder shared.
pub fn forward_on_tape<'p, T: Scalar>(
    tape: &mut Tape<'p, T>,
    bound: &BoundParams,
    drug_a: &'p FeaturizedDrug<T>,
    drug_b: &'p FeaturizedDrug<T>,
) -> Result<ForwardArtifacts, TensorError> {
    let reps_a = run_encoder(tape, drug_a, &bound.gcn)?;
    let reps_b = run_encoder(tape, drug_b, &bound.gcn)?;
    let mut sigmas = Vec::with_capacity(reps_a.len());
    let mut h_a: Option<ValueId> = None;
    let mut h_b: Option<ValueId> = None;
    for layer in 0..reps_a.len() {
        let w = bound.attention[layer % bound.attention.len()];
        let alignment = soft_alignment(
            tape,
            reps_a[layer],
            reps_b[layer],
            w,
            &drug_a.node_mask,
            &drug_b.node_mask,
        )?;
        let (sigma_a, sigma_b) = attention_weights(tape, &alignment)?;
        let ga = attentive_gather(tape, sigma_a, reps_a[layer])?;
        let gb = attentive_gather(tape, sigma_b, reps_b[layer])?;
        h_a = Some(match h_a {
            Some(acc) => tape.add(acc, ga)?,
            None => ga,
        });
        h_b = Some(match h_b {
            Some(acc) => tape.add(acc, gb)?,
            None => gb,
        });
        sigmas.push((sigma_a, sigma_b));
    }
    let h_a = h_a.ok_or(TensorError::InvalidArgument {
        op: "forward",
        detail: "model has no convolution layers".to_string(),
    })?;
    let h_b = h_b.expect("populated alongside h_a");
    let probability = head_on_tape(tape, bound, h_a, h_b)?;
    Ok(ForwardArtifacts {
        probability,
        sigmas,
        h_a,
        h_b,
    })
}

/// Attention distribution over one drug pair at one encoder layer.
/// `layer` is 1-based. Entries beyond each drug's atom count are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights<T> {
    pub layer: usize,
    pub sigma_a: Vec<T>,
    pub sigma_b: Vec<T>,
}

/// Extracted results of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<T> {
    pub probability: T,
    pub attention: Vec<AttentionWeights<T>>,
    pub h_a: Vec<T>,
    pub h_b: Vec<T>,
    pub n_atoms_a: usize,
    pub n_atoms_b: usize,
}

/// One inference pass over a featurized pair.
pub fn forward<T: Scalar>(
    params: &ModelParams<T>,
    drug_a: &FeaturizedDrug<T>,
    drug_b: &FeaturizedDrug<T>,
) -> Result<Prediction<T>, TensorError> {
    let mut tape = Tape::new();
    let bound = bind(&mut tape, params)?;
    let artifacts = forward_on_tape(&mut tape, &bound, drug_a, drug_b)?;
    let attention = artifacts
        .sigmas
        .iter()
        .enumerate()
        .map(|(i, &(sa, sb))| AttentionWeights {
            layer: i + 1,
            sigma_a: tape.value(sa).data().to_vec(),
            sigma_b: tape.value(sb).data().to_vec(),
        })
        .collect();
    Ok(Prediction {
        probability: tape.value(artifacts.probability).item(),
        attention,
        h_a: tape.value(artifacts.h_a).data().to_vec(),
        h_b: tape.value(artifacts.h_b).data().to_vec(),
        n_atoms_a: drug_a.n_atoms,
        n_atoms_b: drug_b.n_atoms,
    })
}

/// Parses, featurizes, and scores a SMILES pair. With `symmetrize`, the
/// probability is the average of both orientations; attention weights are
/// reported for the written orientation.
pub fn predict_pair<T: Scalar>(
    params: &ModelParams<T>,
    smiles_a: &str,
    smiles_b: &str,
    symmetrize: bool,
) -> Result<Prediction<T>, Error> {
    let graph_a = parse_smiles(smiles_a)?;
    let graph_b = parse_smiles(smiles_b)?;
    let drug_a = featurize(&graph_a, params.hp.max_nodes)?;
    let drug_b = featurize(&graph_b, params.hp.max_nodes)?;
    let mut prediction = forward(params, &drug_a, &drug_b).map_err(ModelError::from)?;
    if symmetrize {
        let reversed = forward(params, &drug_b, &drug_a).map_err(ModelError::from)?;
        let half = T::from_f64(0.5);
        prediction.probability = (prediction.probability + reversed.probability) * half;
    }
    Ok(prediction)
}

/// Binary cross-entropy against a 0/1 label, with the same clamping as the
/// differentiable loss op.
pub fn cross_entropy<T: Scalar>(probability: T, label: u8) -> T {
    let clamp = T::from_f64(1e-12).max(T::epsilon());
    let p = probability.max(clamp).min(T::one() - clamp);
    let y = T::from_usize(usize::from(label));
    -(y * p.ln() + (T::one() - y) * (T::one() - p).ln())
}

fn corrupt(reason: impl Into<String>) -> ModelError {
    ModelError::CorruptFile {
        reason: reason.into(),
    }
}

/// Serializes parameters: magic, format version, hyperparameters, every
/// tensor as named `f64` little-endian data, then a SHA-256 checksum of all
/// preceding bytes.
pub fn save<T: Scalar>(params: &ModelParams<T>, path: &Path) -> Result<(), ModelError> {
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let hp = &params.hp;
    for field in [
        hp.gcn_layers,
        hp.gcn_units,
        hp.fc_layers,
        hp.fc_units,
        hp.max_nodes,
    ] {
        buf.extend_from_slice(&(field as u32).to_le_bytes());
    }
    let flags = u8::from(hp.shared_degree_weights) | (u8::from(hp.share_attention_w) << 1);
    buf.push(flags);
    let mut count = 0u32;
    params.visit(|_| count += 1);
    buf.extend_from_slice(&count.to_le_bytes());
    params.visit(|p| {
        let name = p.name.as_bytes();
        buf.extend_from_slice(&(name.len() as u16).to_le_bytes());
        buf.extend_from_slice(name);
        buf.push(p.value.shape().len() as u8);
        for &dim in p.value.shape() {
            buf.extend_from_slice(&(dim as u32).to_le_bytes());
        }
        buf.extend_from_slice(&(p.value.len() as u64).to_le_bytes());
        for &v in p.value.data() {
            buf.extend_from_slice(&v.to_f64().to_le_bytes());
        }
    });
    let digest = Sha256::digest(&buf);
    buf.extend_from_slice(&digest);
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    Ok(())
}

struct FileCursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> FileCursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        if self.pos + n > self.buf.len() {
            return Err(corrupt("file ends mid-record"));
        }
        let slice = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, ModelError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ModelError> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }

    fn f64(&mut self) -> Result<f64, ModelError> {
        Ok(f64::from_le_bytes(
            self.take(8)?.try_into().expect("8 bytes"),
        ))
    }
}

/// Reads a model file, verifying magic, version, checksum, and that the
/// stored tensors exactly match the architecture its header declares.
pub fn load<T: Scalar>(path: &Path) -> Result<ModelParams<T>, ModelError> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    if buf.len() < MAGIC.len() + 4 + 32 {
        return Err(corrupt("file too short"));
    }
    let (body, checksum) = buf.split_at(buf.len() - 32);
    let digest = Sha256::digest(body);
    if digest.as_slice() != checksum {
        return Err(corrupt("checksum mismatch"));
    }
    let mut cur = FileCursor { buf: body, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = cur.u32()?;
    if version != FORMAT_VERSION {
        return Err(ModelError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let gcn_layers = cur.u32()? as usize;
    let gcn_units = cur.u32()? as usize;
    let fc_layers = cur.u32()? as usize;
    let fc_units = cur.u32()? as usize;
    let max_nodes = cur.u32()? as usize;
    let flags = cur.u8()?;
    let hp = Hyperparams {
        gcn_layers,
        gcn_units,
        fc_layers,
        fc_units,
        max_nodes,
        shared_degree_weights: flags & 1 != 0,
        share_attention_w: flags & 2 != 0,
    };
    if gcn_layers == 0 || gcn_units == 0 || fc_units == 0 {
        return Err(corrupt("degenerate architecture in header"));
    }
    let count = cur.u32()? as usize;
    let mut params = ModelParams::<T>::zeros(hp);
    let mut expected = 0usize;
    params.visit(|_| expected += 1);
    if count != expected {
        return Err(corrupt(format!(
            "header declares {count} tensors, architecture needs {expected}"
        )));
    }
    let mut loaded: Vec<(String, Tensor<T>)> = Vec::with_capacity(count);
    for _ in 0..count {
        let name_len = cur.u16()? as usize;
        let name = String::from_utf8(cur.take(name_len)?.to_vec())
            .map_err(|_| corrupt("tensor name is not utf-8"))?;
        let rank = cur.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(cur.u32()? as usize);
        }
        let len = cur.u64()? as usize;
        if len != shape.iter().product::<usize>() {
            return Err(corrupt(format!(
                "tensor {name}: length does not match shape"
            )));
        }
        let mut data = Vec::with_capacity(len);
        for _ in 0..len {
            data.push(T::from_f64(cur.f64()?));
        }
        let tensor = Tensor::from_vec(&shape, data).map_err(|e| corrupt(e.to_string()))?;
        if !tensor.all_finite() {
            return Err(corrupt(format!("tensor {name} contains non-finite values")));
        }
        loaded.push((name, tensor));
    }
    if cur.pos != body.len() {
        return Err(corrupt("trailing bytes after last tensor"));
    }
    let mut idx = 0;
    let mut err: Option<ModelError> = None;
    params.visit_mut(|p| {
        if err.is_some() {
            return;
        }
        let (name, tensor) = &loaded[idx];
        if *name != p.name {
            err = Some(corrupt(format!("expected tensor {}, found {name}", p.name)));
        } else if tensor.shape() != p.value.shape() {
            err = Some(corrupt(format!(
                "tensor {name}: shape {:?} does not match architecture {:?}",
                tensor.shape(),
                p.value.shape()
            )));
        } else {
            p.value = tensor.clone();
        }
        idx += 1;
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(params)
}

/// Loads a model and insists its architecture matches `expected`. The
/// padding budget may differ: stored weights are node-count-independent.
pub fn load_compatible<T: Scalar>(
    path: &Path,
    expected: &Hyperparams,
) -> Result<ModelParams<T>, ModelError> {
    let params = load::<T>(path)?;
    if params.hp.architecture_fields() != expected.architecture_fields() {
        return Err(ModelError::IncompatibleHyperparameters {
            reason: format!("file has {:?}, expected {:?}", params.hp, expected),
        });
    }
    Ok(params)
}
