//! Closed-loop economic MPC for grid-connected battery dispatch under monthly
//! demand charges.
//!
//! The crate is organised bottom-up:
//!
//! * [`timegrid`] - the discrete calendar, billing months, on-peak periods and
//!   the shrinking/rolling horizon windows.
//! * [`tariff`] - energy and demand-charge costs and the monthly peak tracker.
//! * [`optimizer`] - a piecewise-linear model builder, its LP lowering and a
//!   bounded revised simplex solver.
//! * [`controllers`] - the traditional EMPC, the reference stage and the
//!   reference-tracking MPC stage.
//! * [`sim`] - the closed-loop harness and monthly cost settlement.
//! * [`io`] - series files, scenario configuration and report emission.

pub mod controllers;
pub mod error;
pub mod io;
pub mod optimizer;
pub mod parallel;
pub mod sim;
pub mod synth;
pub mod tariff;
pub mod timegrid;

pub use error::{Error, Result};
