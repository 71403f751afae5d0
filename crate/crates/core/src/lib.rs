//! Layered constellations, constant-composition codes and the
//! information/energy trade-off over a complex AWGN channel.

// `!(x > 0.0)` is used on purpose so that NaN inputs are rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod achievable;
pub mod codebook;
pub mod constellation;
pub mod converse;
pub mod energy;
pub mod error;
pub mod exec;
pub mod frontier;
pub mod simulate;
