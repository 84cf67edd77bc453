//! Minimal deterministic numerical kernel.
//!
//! Everything here is generic over [`Real`] so the same code runs in `f32`
//! for training and in `f64` for finite-difference gradient checks. All
//! reductions sum left to right in index order, which makes results
//! bitwise reproducible.

mod activation;
mod gradcheck;
mod linear;
mod optim;
mod rng;
mod tensor;

pub use activation::{
    cross_entropy, dropout, dropout_backward, relu, relu_backward, softmax,
    softmax_cross_entropy_grad, DropoutMask, PROB_FLOOR,
};
pub use gradcheck::{grad_check, GradCheckReport, DEFAULT_EPS};
pub use linear::LinearLayer;
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState};
pub use rng::SeededRng;
pub use tensor::{DenseMatrix, DenseVector};

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Scalar type the numeric kernel is generic over (`f32` or `f64`).
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
