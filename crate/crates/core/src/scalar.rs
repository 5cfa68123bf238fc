// SPDX-License-Identifier: Apache-2.0

//! Floating point abstraction shared by every numerical kernel.

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Real scalar: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    /// Converts a count or index.
    #[inline]
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
