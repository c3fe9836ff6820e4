use thiserror::Error;

use crate::cell::ModeIndex;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid cell: {0}")]
    InvalidCell(String),

    #[error("point ({x}, {y}) lies outside the cell [0,1] x [-{half}, {half}]")]
    OutsideCell { x: f64, y: f64, half: f64 },

    #[error("mode {mode} is degenerate: {colliding:?} share the eigenvalue {energy}")]
    DegenerateMode {
        mode: ModeIndex,
        colliding: Vec<ModeIndex>,
        energy: f64,
    },

    #[error("spectral parameter z = {z} resonates with a Neumann eigenvalue (nu = {nu})")]
    Resonance { nu: f64, z: f64 },

    #[error("kernel evaluated on its diagonal y = y' = {0}")]
    SingularPoint(f64),

    #[error("no dispersion root in [{lo}, {hi}] (smallest singular value {sigma_min:e})")]
    NoRootInBracket { lo: f64, hi: f64, sigma_min: f64 },

    #[error("fixed-point iteration did not converge after {iterations} steps (last step {last_step:e})")]
    NonConvergence { iterations: usize, last_step: f64 },

    #[error("window resolved by {nodes} grid nodes; at least 4 are required")]
    WindowUnderResolved { nodes: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
