//! Path-wise simulation of the flow of kernels and the coalescing flow of maps
//! solving Tanaka's equation on the circle with two vertices, at angles 0 and
//! `l`, plus the statistical and exact checks of their properties.
//!
//! The core is generic over the scalar type (`f32` or `f64`); the aliases at
//! the crate root fix `f64`, which is what the verification suite and the CLI use.

pub mod chaos;
pub mod circle;
pub mod decorations;
pub mod error;
pub mod flow;
pub mod fourier;
pub mod path;
pub mod scalar;
pub mod seed;
pub mod stats;
pub mod verify;

pub use decorations::{ExtremumKey, SplitLaw};
pub use error::{Error, Result};
pub use path::GridTime;
pub use scalar::Scalar;
pub use circle::Sign;

pub type CirclePoint = circle::CirclePoint<f64>;
pub type GraphParams = circle::GraphParams<f64>;
pub type AtomicMeasure = circle::AtomicMeasure<f64>;
pub type BrownianPath = path::BrownianPath<f64>;
pub type PathPoint = path::PathPoint<f64>;
pub type DecorationStore = decorations::DecorationStore<f64>;
pub type FlowRealization = flow::FlowRealization<f64>;
pub type FlowParams = flow::FlowParams<f64>;
pub type FourierFunction = fourier::FourierFunction<f64>;
