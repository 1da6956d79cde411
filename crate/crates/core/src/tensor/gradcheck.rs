//! Central finite-difference verification of reverse-mode gradients.

use rayon::prelude::*;

use super::Tensor;
use crate::error::TensorError;
use crate::scalar::Scalar;

/// Worst observed disagreement between analytic and numeric gradients.
#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport<T> {
    pub max_rel_err: T,
    /// `(tensor index, flat entry index)` of the worst entry.
    pub worst: (usize, usize),
}

/// Relative error with a small absolute floor so near-zero gradients do not
/// divide by near-zero magnitudes.
fn rel_err<T: Scalar>(analytic: T, numeric: T) -> T {
    let denom = analytic.abs().max(numeric.abs()).max(T::from_f64(1e-6));
    (analytic - numeric).abs() / denom
}

/// Compares `analytic` against central differences of `f` at `point`,
/// entry by entry: `(f(x + h e) - f(x - h e)) / (2h)`.
///
/// `f` must be a deterministic function of `point` alone. Entries are
/// evaluated in parallel; each evaluation works on its own copy of the
/// point, so `f` is never invoked on a half-perturbed input.
pub fn grad_check<T, F>(
    f: &F,
    point: &[Tensor<T>],
    analytic: &[Tensor<T>],
    step: T,
) -> Result<GradCheckReport<T>, TensorError>
where
    T: Scalar,
    F: Fn(&[Tensor<T>]) -> Result<T, TensorError> + Sync,
{
    if point.len() != analytic.len() {
        return Err(TensorError::ShapeMismatch {
            op: "grad_check",
            detail: format!(
                "{} point tensors vs {} gradient tensors",
                point.len(),
                analytic.len()
            ),
        });
    }
    for (p, a) in point.iter().zip(analytic.iter()) {
        if p.shape() != a.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "grad_check",
                detail: format!("point {:?} vs gradient {:?}", p.shape(), a.shape()),
            });
        }
    }
    let entries: Vec<(usize, usize)> = point
        .iter()
        .enumerate()
        .flat_map(|(ti, t)| (0..t.len()).map(move |ei| (ti, ei)))
        .collect();

    let errors = entries
        .par_iter()
        .map(|&(ti, ei)| {
            let mut local: Vec<Tensor<T>> = point.to_vec();
            let orig = local[ti].data()[ei];
            local[ti].data_mut()[ei] = orig + step;
            let plus = f(&local)?;
            local[ti].data_mut()[ei] = orig - step;
            let minus = f(&local)?;
            local[ti].data_mut()[ei] = orig;
            let numeric = (plus - minus) / (step + step);
            let err = rel_err(analytic[ti].data()[ei], numeric);
            Ok((err, (ti, ei)))
        })
        .collect::<Result<Vec<_>, TensorError>>()?;

    let mut report = GradCheckReport {
        max_rel_err: T::zero(),
        worst: (0, 0),
    };
    for (err, at) in errors {
        if err > report.max_rel_err {
            report.max_rel_err = err;
            report.worst = at;
        }
    }
    Ok(report)
}
