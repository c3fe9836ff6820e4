//! Bloch dispersion near a simple Neumann eigenvalue for a waveguide cut by a
//! periodic array of thin cracks.
//!
//! The cell is `[0, 1] x [-H/2, H/2]`; neighbouring cells communicate only
//! through the window `|y| < epsilon` on the lines `x = 0` and `x = 1`.

pub mod asymptotics;
pub mod cell;
pub mod cheb;
pub mod error;
pub mod fd;
pub mod green;
pub mod pencil;
pub mod series;

pub use cell::{CellSpec, EigenPair, ModeIndex};
pub use error::{Error, Result};
