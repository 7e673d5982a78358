//! Simulation and control stack for a trellis fruit-picking robot.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod geometry;
pub mod harness;
pub mod perception;
pub mod planning;
pub mod raster;
pub mod rng;
pub mod tracking;
pub mod world;
