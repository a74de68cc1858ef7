//! Minimal tensor and automatic-differentiation toolkit used by the networks.

pub mod conv;
pub mod gradcheck;
pub mod graph;
pub mod layers;
pub mod optim;
pub mod params;
pub mod tensor;

pub use graph::{Gradients, Graph, Var};
pub use optim::Adam;
pub use params::{ParamKind, ParamStore};
pub use tensor::Tensor;
