//! Markov-chain block coordinate descent.
//!
//! The block index sequence of a coordinate method is drawn from a Markov
//! chain on a graph whose nodes are the blocks, rather than i.i.d. or
//! cyclically. This crate provides:
//!
//! - [`chain`]: graphs, transition schedules, stationary distributions,
//!   mixing times and walk sampling;
//! - [`objective`]: block-structured smooth objectives, separable proximal
//!   terms and the concrete problem instances;
//! - [`solver`]: exact, inexact and proximal coordinate iterations with
//!   trace recording and pathwise inequality audits;
//! - [`dca`]: dual coordinate ascent, including the empirical-frequency
//!   variant for sample spaces reached only through a Markov chain;
//! - [`dmdp`]: discounted MDP policy evaluation;
//! - [`analysis`]: rate constants, expectation envelopes and rate fits.

pub mod analysis;
pub mod chain;
pub mod dca;
pub mod dmdp;
pub mod linalg;
pub mod objective;
pub mod rng;
pub mod select;
pub mod solver;

pub use nalgebra::{DMatrix, DVector};
