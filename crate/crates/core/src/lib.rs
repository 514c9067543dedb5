//! Matched-asymptotic approximate solutions for periodic roll-waves of
//! hyperbolic balance laws under small viscosity, together with the numerical
//! machinery that certifies their properties: viscous shock profiles,
//! outer/inner correctors with shock coupling, the assembled approximate
//! solution and its residual, resolved viscous simulations, Green's-function
//! bounds and Evans-function stability.

pub mod assembly;
pub mod cli;
pub mod corrector;
pub mod error;
pub mod evans;
pub mod green;
pub mod io;
pub mod numerics;
pub mod profile;
pub mod system;
pub mod viscous;

pub use error::{Error, Result};
