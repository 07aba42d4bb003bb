//! Reliability-aware power-grid planning.
//!
//! Two paths over the same grid description:
//!
//! * the conventional path parses (or generates) a resistive power-grid
//!   netlist, assembles the nodal conductance system and solves it for node
//!   voltages, branch currents and IR drop;
//! * the learned path extracts `(x, y, I_d, w)` samples, trains a multilayer
//!   perceptron to predict interconnect widths from floorplan features, and
//!   estimates IR drop from the predicted widths with Ohm's and Kirchhoff's
//!   laws instead of a global linear solve.
//!
//! [`reliability`] holds the closed-form sizing rules shared by both paths and
//! [`metrics`] compares their results.

pub mod cli;
pub mod dataset;
pub mod error;
pub mod floorplan;
pub mod metrics;
pub mod netlist;
pub mod neuralnet;
pub mod reliability;
pub mod solver;

pub use error::{Error, Result};
pub use floorplan::Floorplan;
pub use netlist::{PowerGridNetlist, SyntheticGridSpec};
pub use solver::GridSolution;
