//! Stability analysis of a stochastic Cournot duopoly.
//!
//! The game is linearized about its stationary state, giving a planar linear
//! SDE `dX = A X dt + B X dw`. Its almost-sure stability is decided by the
//! sign of the top Lyapunov exponent, computed here from the stationary
//! density of the phase angle or by direct simulation.

pub mod angular;
pub mod cli;
pub mod density;
pub mod error;
pub mod export;
pub mod linalg;
pub mod lyapunov;
pub mod model;
pub mod quadrature;
pub mod sim;

pub use error::{Error, Result};
