//! Attentive pooling between two drugs' node representations.
//!
//! For each encoder layer, a soft alignment `P = tanh(A W B^T)` scores every
//! atom pair across the two drugs. Row- and column-wise max-pooling over the
//! live region turns `P` into per-atom logits, and masked softmax turns the
//! logits into attention weights that are exactly zero on padding. The
//! weighted sum of node representations is the drug's vector for that layer.

use crate::error::TensorError;
use crate::scalar::Scalar;
use crate::tensor::tape::{Activation, Tape, ValueId};

/// Tape-resident alignment matrix plus the masks that define its live block.
pub struct Alignment {
    pub p: ValueId,
    pub mask_a: Vec<u8>,
    pub mask_b: Vec<u8>,
}

/// Builds the alignment `P[i][j] = tanh(a_i . W . b_j)` where `a_i`, `b_j`
/// are node representation rows. Entries touching padded rows are zero
/// because padded representations are zero.
pub fn soft_alignment<'p, T: Scalar>(
    tape: &mut Tape<'p, T>,
    reps_a: ValueId,
    reps_b: ValueId,
    w: ValueId,
    mask_a: &[u8],
    mask_b: &[u8],
) -> Result<Alignment, TensorError> {
    let aw = tape.matmul(reps_a, w)?;
    let bt = tape.transpose(reps_b)?;
    let scores = tape.matmul(aw, bt)?;
    let p = tape.activation(Activation::Tanh, scores)?;
    Ok(Alignment {
        p,
        mask_a: mask_a.to_vec(),
        mask_b: mask_b.to_vec(),
    })
}

/// Pools the alignment into one attention distribution per drug:
/// each A-atom's logit is its best alignment against live B atoms (and
/// symmetrically for B), normalized by masked softmax.
pub fn attention_weights<'p, T: Scalar>(
    tape: &mut Tape<'p, T>,
    alignment: &Alignment,
) -> Result<(ValueId, ValueId), TensorError> {
    let row_logits = tape.max_cols_masked(alignment.p, &alignment.mask_b)?;
    let sigma_a = tape.masked_softmax(row_logits, &alignment.mask_a)?;
    let p_t = tape.transpose(alignment.p)?;
    let col_logits = tape.max_cols_masked(p_t, &alignment.mask_a)?;
    let sigma_b = tape.masked_softmax(col_logits, &alignment.mask_b)?;
    Ok((sigma_a, sigma_b))
}

/// Attention-weighted sum of node representations: `sum_v sigma[v] * reps[v]`.
pub fn attentive_gather<'p, T: Scalar>(
    tape: &mut Tape<'p, T>,
    sigma: ValueId,
    reps: ValueId,
) -> Result<ValueId, TensorError> {
    let n = tape.value(sigma).len();
    let row = tape.reshape(sigma, &[1, n])?;
    let gathered = tape.matmul(row, reps)?;
    let units = tape.value(gathered).len();
    tape.reshape(gathered, &[units])
}
