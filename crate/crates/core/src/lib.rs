//! Parts-based shape warping for one-shot transfer of object placement skills.
//!
//! Objects are split into named parts. Each part category gets a small
//! generative shape model (a canonical cloud plus a PCA deformation basis
//! learned from non-rigid registrations). A single demonstration is reduced to
//! interaction points between parts of the two objects, which are transported
//! to novel objects through the shape models and recomposed into one rigid
//! placement.

pub mod cli;
pub mod error;
pub mod eval;
pub mod geom;
pub mod registration;
pub mod shapemodel;
pub mod synth;
pub mod transfer;

pub use error::{Error, Result};
