//! Closed-form Neumann spectral data of the rectangular unit cell
//! `[0, 1] x [-H/2, H/2]`.
//!
//! The eigenfunctions of the decoupled cell are products of cosines,
//!
//! ```text
//! phi_{m,n}(x, y) = sqrt(a_m a_n / H) cos(m pi x) cos(n pi (y + H/2) / H),
//! E_{m,n}         = (m pi)^2 + (n pi / H)^2,
//! ```
//!
//! with `a_0 = 1` and `a_k = 2` for `k >= 1`, normalized in `L^2` of the cell.
//! The window centres `A_0 = (0, 0)` and `A_1 = (1, 0)` are where the tracked
//! eigenfunction is sampled for the leading-order band shift.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance under which two closed-form eigenvalues are considered equal.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Longitudinal (`m`) and transverse (`n`) index of a rectangle mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModeIndex {
    pub m: u32,
    pub n: u32,
}

impl ModeIndex {
    pub const fn new(m: u32, n: u32) -> Self {
        Self { m, n }
    }
}

impl fmt::Display for ModeIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.m, self.n)
    }
}

/// One periodic cell: unit period in `x`, height `H`, and crack half-aperture `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellSpec {
    height: f64,
    epsilon: f64,
    mode: ModeIndex,
}

impl CellSpec {
    /// Requires `H > 0` and `0 < epsilon < H/2`, so that the window centres are
    /// interior points of the cell boundary line.
    pub fn new(height: f64, epsilon: f64, mode: ModeIndex) -> Result<Self> {
        if !(height.is_finite() && height > 0.0) {
            return Err(Error::InvalidCell(format!("height must be positive, got {height}")));
        }
        if !(epsilon.is_finite() && epsilon > 0.0 && epsilon < 0.5 * height) {
            return Err(Error::InvalidCell(format!(
                "half-aperture must satisfy 0 < epsilon < H/2 = {}, got {epsilon}",
                0.5 * height
            )));
        }
        Ok(Self { height, epsilon, mode })
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn mode(&self) -> ModeIndex {
        self.mode
    }

    /// Same geometry with a different half-aperture.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.height, epsilon, self.mode)
    }

    pub fn with_mode(&self, mode: ModeIndex) -> Self {
        Self { mode, ..*self }
    }

    /// Closed-form eigenvalue of `mode` for this cell height.
    pub fn eigenvalue(&self, mode: ModeIndex) -> f64 {
        mode_energy(self.height, mode)
    }

    /// Eigenpair (energy and junction values) of the tracked mode.
    pub fn eigenpair(&self) -> EigenPair {
        eigenpair(self.height, self.mode)
    }
}

/// Neumann eigenvalue with the eigenfunction values at the two window centres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenPair {
    pub energy: f64,
    /// `u(A_0) = u(0, 0)`.
    pub u_a0: f64,
    /// `u(A_1) = u(1, 0)`.
    pub u_a1: f64,
}

/// Normalization weight `a_k` of the cosine basis.
#[inline]
pub fn cosine_weight(k: u32) -> f64 {
    if k == 0 {
        1.0
    } else {
        2.0
    }
}

/// `(m pi)^2 + (n pi / H)^2`.
pub fn mode_energy(height: f64, mode: ModeIndex) -> f64 {
    let kx = mode.m as f64 * PI;
    let ky = mode.n as f64 * PI / height;
    kx * kx + ky * ky
}

/// `(n pi / H)^2`, the transverse eigenvalue.
#[inline]
pub fn transverse_energy(height: f64, n: u32) -> f64 {
    let q = n as f64 * PI / height;
    q * q
}

/// Normalized transverse cosine `sqrt(a_n / H) cos(n pi (y + H/2) / H)`.
#[inline]
pub fn transverse_mode(height: f64, n: u32, y: f64) -> f64 {
    (cosine_weight(n) / height).sqrt() * (n as f64 * PI * (y + 0.5 * height) / height).cos()
}

fn eigenpair(height: f64, mode: ModeIndex) -> EigenPair {
    let (u_a0, u_a1) = junction_values_raw(height, mode);
    EigenPair {
        energy: mode_energy(height, mode),
        u_a0,
        u_a1,
    }
}

fn junction_values_raw(height: f64, mode: ModeIndex) -> (f64, f64) {
    let u0 = if mode.n % 2 == 1 {
        // cos of an odd multiple of pi/2 vanishes; avoid the round-off residue
        0.0
    } else {
        cosine_weight(mode.m).sqrt() * transverse_mode(height, mode.n, 0.0)
    };
    let sign = if mode.m % 2 == 0 { 1.0 } else { -1.0 };
    (u0, sign * u0)
}

/// The `count` lowest Neumann eigenpairs, ascending in energy, ties broken by
/// `(m, n)` order.
pub fn neumann_eigenpairs(cell: &CellSpec, count: usize) -> Result<Vec<(ModeIndex, EigenPair)>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let height = cell.height;
    let scale = height.max(1.0) / PI;
    let mut bound = (count as f64).sqrt().ceil() as u32 + 2;
    loop {
        let mut modes = enumerate_modes(height, bound);
        modes.truncate(count.min(modes.len()));
        let e_max = modes.last().map(|(_, e)| *e).unwrap_or(0.0);
        // every mode with E <= e_max has m, n <= sqrt(e_max) * max(1, H) / pi
        let needed = (e_max.sqrt() * scale).ceil() as u32 + 2;
        if modes.len() == count && needed <= bound {
            return Ok(modes
                .into_iter()
                .map(|(mode, _)| (mode, eigenpair(height, mode)))
                .collect());
        }
        bound = needed.max(bound + 1);
    }
}

fn enumerate_modes(height: f64, bound: u32) -> Vec<(ModeIndex, f64)> {
    let mut modes: Vec<(ModeIndex, f64)> = (0..=bound)
        .flat_map(|m| (0..=bound).map(move |n| ModeIndex::new(m, n)))
        .map(|mode| (mode, mode_energy(height, mode)))
        .collect();
    modes.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    modes
}

/// All modes with energy strictly below `e_max`, ascending.
pub fn modes_below(height: f64, e_max: f64) -> Vec<(ModeIndex, f64)> {
    let bound = (e_max.max(0.0).sqrt() * height.max(1.0) / PI).ceil() as u32 + 2;
    let mut modes = enumerate_modes(height, bound);
    modes.retain(|(_, e)| *e < e_max);
    modes
}

/// `sqrt(a_m a_n / H) cos(m pi x) cos(n pi (y + H/2) / H)`.
pub fn eigenfunction_value(cell: &CellSpec, mode: ModeIndex, x: f64, y: f64) -> Result<f64> {
    let half = 0.5 * cell.height;
    let slack = 1e-12 * half.max(1.0);
    if !(-slack..=1.0 + slack).contains(&x) || !(-half - slack..=half + slack).contains(&y) {
        return Err(Error::OutsideCell { x, y, half });
    }
    Ok(cosine_weight(mode.m).sqrt()
        * (mode.m as f64 * PI * x).cos()
        * transverse_mode(cell.height, mode.n, y))
}

/// `(u(A_0), u(A_1))` for `mode`; satisfies `u(A_1) = (-1)^m u(A_0)` exactly.
pub fn junction_values(cell: &CellSpec, mode: ModeIndex) -> (f64, f64) {
    junction_values_raw(cell.height, mode)
}

/// Distance from `E(mode)` to the nearest other eigenvalue below
/// `E(mode) + neighborhood`, or `neighborhood` if there is none.
///
/// Fails with [`Error::DegenerateMode`] if another mode shares the eigenvalue.
pub fn assert_simple(cell: &CellSpec, mode: ModeIndex, neighborhood: f64) -> Result<f64> {
    let energy = mode_energy(cell.height, mode);
    let tol = DEGENERACY_TOL * energy.max(1.0);
    let mut colliding = Vec::new();
    let mut gap = neighborhood;
    for (other, e) in modes_below(cell.height, energy + neighborhood) {
        if other == mode {
            continue;
        }
        let d = (e - energy).abs();
        if d <= tol {
            colliding.push(other);
        } else {
            gap = gap.min(d);
        }
    }
    if !colliding.is_empty() {
        return Err(Error::DegenerateMode { mode, colliding, energy });
    }
    Ok(gap)
}

/// Nearest distinct eigenvalue strictly above `E(mode)`.
pub fn next_eigenvalue_above(height: f64, mode: ModeIndex) -> f64 {
    let energy = mode_energy(height, mode);
    let tol = DEGENERACY_TOL * energy.max(1.0);
    let mut span = energy.max(1.0);
    loop {
        if let Some((_, e)) = modes_below(height, energy + span)
            .into_iter()
            .find(|(_, e)| *e > energy + tol)
        {
            return e;
        }
        span *= 2.0;
    }
}
