//! Jack-polynomial particle dynamics, their β-Dyson diffusion limits, and a
//! statistical harness that checks the exact identities and limit laws at
//! desk scale.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod combinatorics;
pub mod ctmc;
pub mod diffusion;
pub mod ensembles;
pub mod error;
pub mod jack;
pub mod logvalue;
pub mod quadrature;
pub mod rng;
pub mod statcheck;
pub mod verify;

pub use combinatorics::{
    addable_cells, arm_leg, interlaces, rescale_array, rescale_level, ArmLeg, Cell, ConePoint,
    InterlacingArray, Partition, ScalingParams, WeylPoint,
};
pub use error::{Error, Result};
pub use jack::Theta;
pub use logvalue::LogValue;
