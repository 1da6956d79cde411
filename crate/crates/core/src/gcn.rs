//! Graph-convolutional encoder with degree-indexed weights.
//!
//! One layer aggregates each node with its neighbors (self plus neighbor
//! sum), multiplies the aggregate by a weight matrix chosen by the node's
//! degree, and applies relu. Padded rows stay exactly zero through every
//! layer. A softmax readout over atoms and layers is available as the
//! non-attentive baseline pooling.

use crate::error::TensorError;
use crate::featurize::FeaturizedDrug;
use crate::scalar::Scalar;
use crate::tensor::tape::{Activation, Tape, ValueId};

/// Applies one convolution layer. `weights` is the degree-indexed bank: one
/// matrix per degree bucket, or a single shared matrix.
pub fn gcn_layer<'p, T: Scalar>(
    tape: &mut Tape<'p, T>,
    reps: ValueId,
    drug: &'p FeaturizedDrug<T>,
    weights: &[ValueId],
) -> Result<ValueId, TensorError> {
    let aggregated = tape.neighbor_sum(reps, &drug.adjacency, drug.n_atoms)?;
    let select: Vec<usize> = if weights.len() == 1 {
        vec![0; drug.n_atoms]
    } else {
        drug.degrees[..drug.n_atoms].to_vec()
    };
    let pre = tape.select_matmul(aggregated, weights, &select, drug.n_atoms)?;
    tape.activation(Activation::Relu, pre)
}

/// Runs the full stack over a drug's features and returns every layer's
/// node representations, in layer order.
pub fn run_encoder<'p, T: Scalar>(
    tape: &mut Tape<'p, T>,
    drug: &'p FeaturizedDrug<T>,
    layers: &[Vec<ValueId>],
) -> Result<Vec<ValueId>, TensorError> {
    let mut reps = tape.input(&drug.node_features)?;
    let mut outputs = Vec::with_capacity(layers.len());
    for weights in layers {
        reps = gcn_layer(tape, reps, drug, weights)?;
        outputs.push(reps);
    }
    Ok(outputs)
}

/// Baseline readout: for each layer, project node representations, softmax
/// each live node's projection, and sum the distributions over live nodes
/// and layers into one graph vector.
pub fn graph_gather_softmax<'p, T: Scalar>(
    tape: &mut Tape<'p, T>,
    layer_reps: &[ValueId],
    gather_weights: &[ValueId],
    node_mask: &[u8],
) -> Result<ValueId, TensorError> {
    if layer_reps.len() != gather_weights.len() || layer_reps.is_empty() {
        return Err(TensorError::ShapeMismatch {
            op: "graph_gather_softmax",
            detail: format!(
                "{} layer outputs vs {} gather matrices",
                layer_reps.len(),
                gather_weights.len()
            ),
        });
    }
    let mut total: Option<ValueId> = None;
    for (&reps, &w) in layer_reps.iter().zip(gather_weights.iter()) {
        let scores = tape.matmul(reps, w)?;
        let probs = tape.softmax_rows(scores)?;
        let layer_sum = tape.row_sum_masked(probs, node_mask)?;
        total = Some(match total {
            Some(t) => tape.add(t, layer_sum)?,
            None => layer_sum,
        });
    }
    Ok(total.expect("at least one layer checked above"))
}
