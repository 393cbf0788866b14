//! Reverse-mode automatic differentiation over dense 64-bit arrays.
//!
//! A [`Graph`] records operations as they are applied to [`Tensor`] handles.
//! Trainable weights live in a [`ParameterSet`] and enter a graph through
//! [`Graph::param`]; after [`Graph::backward`] their gradients are collected
//! with [`Graph::accumulate_param_grads`].

mod array;
pub mod checkpoint;
pub mod gradcheck;
mod graph;
mod params;

pub use array::Array;
pub use checkpoint::{load_checkpoint, restore_into, save_checkpoint};
pub use gradcheck::{grad_check, relative_error, GradCheckReport};
pub use graph::{Graph, Tensor};
pub use params::{ParamGrads, ParamId, ParameterSet};
