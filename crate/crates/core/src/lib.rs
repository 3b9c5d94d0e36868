//! Thin periodic layer with frictional contact between two elastic blocks.
//!
//! Finite-element tools for the fixed-eps contact problem (Tresca friction,
//! unilateral gaps on cracks), the unfolding operators on the layer, cell
//! correctors with the effective interface stiffness, and the homogenized
//! transmission problem.

// Index loops mirror the tensor notation in the element kernels, and
// negated float comparisons are how NaN gets rejected.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod contact;
pub mod dofs;
pub mod error;
pub mod expr;
pub mod fem;
pub mod geometry;
pub mod harness;
pub mod homogenize;
pub mod linsolve;
pub mod mesh;
pub mod rigid;
pub mod sparse;
pub mod unfolding;
pub mod vtk;

pub use error::{Error, Result};
