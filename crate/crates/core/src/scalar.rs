//! Scalar abstraction for the numeric core.
//!
//! Everything numeric in this crate is generic over [`Scalar`] so the whole
//! pipeline can run in `f32` or `f64`. The crate root exports `f64` aliases;
//! model files always store `f64` regardless of the in-memory type.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::Float;

/// Floating-point element type for tensors, parameters, and losses.
///
/// `from_f64`/`to_f64` round through `f64`, which is lossless for both
/// supported types in the value ranges this crate produces.
pub trait Scalar: Float + Sum + Debug + Display + Send + Sync + 'static {
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;

    /// Literal helper for integer constants (counts, denominators).
    fn from_usize(n: usize) -> Self {
        Self::from_f64(n as f64)
    }
}

impl Scalar for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }

    fn to_f64(self) -> f64 {
        f64::from(self)
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }

    fn to_f64(self) -> f64 {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_f64() {
        let x = 0.123456789012345_f64;
        assert_eq!(<f64 as Scalar>::from_f64(x).to_f64(), x);
    }

    #[test]
    fn roundtrip_f32_within_precision() {
        let x = 0.25_f32;
        assert_eq!(<f32 as Scalar>::from_f64(x.to_f64()), x);
    }

    #[test]
    fn from_usize_is_exact_for_small_counts() {
        assert_eq!(<f64 as Scalar>::from_usize(65), 65.0);
        assert_eq!(<f32 as Scalar>::from_usize(100), 100.0);
    }
}
