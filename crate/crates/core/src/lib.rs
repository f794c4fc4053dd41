//! Wave mechanics on uniform grids, twice over: the usual linear Schrödinger
//! evolution, and the classical limit obtained by dropping the quantum
//! potential from the polar-form equations of motion.
//!
//! Both evolutions share one state representation (`fields`), one stepping
//! harness (`dynamics`), and one set of diagnostics (`observables`), so a
//! linear run and its classical twin can be compared sample by sample.
//! `trajectories` integrates guidance-velocity and Newtonian paths through
//! recorded runs, and `statistics` covers position measurements on the
//! positive-amplitude states the classical theory singles out.

pub mod dynamics;
pub mod fields;
pub mod numerics;
pub mod observables;
pub mod statistics;
pub mod trajectories;

pub use fields::{Boundary, Grid, PhysicalConstants};
