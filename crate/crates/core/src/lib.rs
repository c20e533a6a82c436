//! Numerical laboratory for the focusing cubic Klein-Gordon equation
//! `w_tt - Delta w + w = w^3` in three space dimensions near the ground-state energy.
//!
//! The state is carried in complexified form `u = D w - i w_t` with `D = sqrt(1 - Delta)`,
//! which turns the equation into `u_t = i D u - i u1^3`, `u1 = D^{-1} Re u`.

pub mod boosts;
pub mod classifier;
pub mod decomposition;
pub mod error;
pub mod evolution;
pub mod field;
pub mod functionals;
pub mod ground_state;
pub mod harness;
pub mod linearization;
pub mod numerics;

pub use error::{Error, Result};
pub use field::{BoxGrid, Complex64, Field, Form, Grid, Multiplier, RadialGrid};
