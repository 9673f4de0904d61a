//! Dispersing billiards on the flat torus and the structure of their tangential
//! singularities: grazing-safe billiard map, tangency manifolds in line space,
//! resolution charts, tube-volume estimates and tangency-count experiments.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod billiard;
pub mod error;
pub mod genericity;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod measure;
pub mod rng;
pub mod singularity;
pub mod stats;
pub mod roots;

pub use error::{Error, Result};
