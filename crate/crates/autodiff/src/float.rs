use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

/// Numeric precision of a computation graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrecisionMode {
    /// 32-bit, used for all training and inference.
    Standard,
    /// 64-bit, used only for gradient verification.
    Verification,
}

/// Element type of a [`crate::Graph`].
pub trait Float:
    num_traits::Float
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + 'static
{
    const PRECISION: PrecisionMode;

    /// Additive mask value for blocked attention entries. Large enough that
    /// `exp(logit + MASK_SENTINEL - row_max)` underflows to exactly zero,
    /// finite so that gradients never see `inf - inf`.
    const MASK_SENTINEL: Self;

    fn from_f32(x: f32) -> Self;
    fn from_f64(x: f64) -> Self;
    fn as_f32(self) -> f32;
    fn as_f64(self) -> f64;

    fn from_usize(x: usize) -> Self {
        Self::from_f64(x as f64)
    }

    /// True if an additive-mask entry marks a blocked position.
    fn is_blocked(self) -> bool {
        self <= Self::MASK_SENTINEL * Self::from_f64(0.5)
    }
}

impl Float for f32 {
    const PRECISION: PrecisionMode = PrecisionMode::Standard;
    const MASK_SENTINEL: Self = -1.0e30;

    fn from_f32(x: f32) -> Self {
        x
    }
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn as_f32(self) -> f32 {
        self
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Float for f64 {
    const PRECISION: PrecisionMode = PrecisionMode::Verification;
    const MASK_SENTINEL: Self = -1.0e30;

    fn from_f32(x: f32) -> Self {
        x as f64
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn as_f32(self) -> f32 {
        self as f32
    }
    fn as_f64(self) -> f64 {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sentinel_underflows_to_zero() {
        assert_eq!((f32::MASK_SENTINEL - 50.0).exp(), 0.0);
        assert_eq!((f64::MASK_SENTINEL - 50.0).exp(), 0.0);
        assert!(f32::MASK_SENTINEL.is_blocked());
        assert!(!0.0f32.is_blocked());
        assert!(!(-1e6f64).is_blocked());
    }
}
