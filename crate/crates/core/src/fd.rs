//! Finite-difference Bloch eigensolver for the cracked cell, used as an
//! independent check of the pencil.
//!
//! The cell is discretized by the lumped (trapezoid) five-point scheme, which
//! is the standard Neumann finite-difference Laplacian. The Bloch problem is
//! the same energy form restricted to grid functions with
//! `u(1, y_j) = e^{i theta} u(0, y_j)` on the window nodes. Restricting a
//! pencil to a subspace of codimension `|W|` shifts its eigenvalue count by
//! the inertia of a `|W| x |W|` capacitance matrix, so eigenvalues can be
//! bisected using only the separable spectrum of the decoupled cell.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::asymptotics::theorem_shift;
use crate::cell::{CellSpec, ModeIndex};
use crate::error::{Error, Result};
use crate::pencil::{BandEntry, BandTable, DispersionPoint, Method};

/// Fewest window nodes the oracle accepts (an empty window is also allowed).
pub const MIN_WINDOW_NODES: usize = 4;

const BISECTION_RTOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq)]
pub struct FdGrid {
    h: f64,
    height: f64,
    /// Intervals in x (`1/h`).
    nx: usize,
    /// Intervals in y (`H/h`).
    ny: usize,
    window: Vec<usize>,
}

fn integer_ratio(length: f64, h: f64) -> Option<usize> {
    let r = length / h;
    let n = r.round();
    ((r - n).abs() < 1e-9 * r.max(1.0) && n >= 1.0).then_some(n as usize)
}

impl FdGrid {
    /// Grid of spacing `h` on `[0,1] x [-H/2, H/2]`; the window is
    /// `{j : |y_j| < epsilon}`, or every row once `epsilon >= H/2`.
    pub fn new(height: f64, epsilon: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !(height > 0.0) || !(epsilon >= 0.0) {
            return Err(Error::InvalidArgument(format!("grid h={h}, H={height}, eps={epsilon}")));
        }
        let nx = integer_ratio(1.0, h)
            .ok_or_else(|| Error::InvalidArgument(format!("h = {h} does not divide the period")))?;
        let ny = integer_ratio(height, h)
            .ok_or_else(|| Error::InvalidArgument(format!("h = {h} does not divide H = {height}")))?;
        let window = if epsilon >= 0.5 * height {
            (0..=ny).collect()
        } else {
            (0..=ny).filter(|&j| (j as f64 * h - 0.5 * height).abs() < epsilon).collect()
        };
        Ok(Self { h, height, nx, ny, window })
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn window(&self) -> &[usize] {
        &self.window
    }

    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.h - 0.5 * self.height
    }

    fn check_window(&self) -> Result<()> {
        let n = self.window.len();
        if n > 0 && n < MIN_WINDOW_NODES {
            return Err(Error::WindowUnderResolved { nodes: n });
        }
        Ok(())
    }

    /// `(4/h^2) sin^2(k pi h / 2)` for `k = 0..=intervals`.
    fn spectrum_1d(&self, intervals: usize) -> Vec<f64> {
        let h = self.h;
        (0..=intervals)
            .map(|k| {
                let s = (0.5 * k as f64 * PI / intervals as f64).sin();
                4.0 * s * s / (h * h)
            })
            .collect()
    }

    fn endpoint_weight(k: usize, intervals: usize) -> f64 {
        if k == 0 || k == intervals {
            1.0
        } else {
            2.0
        }
    }
}

/// Explicit Bloch matrix pair `(K, M)` on the identified grid: `K` Hermitian
/// stiffness from edge energies, `M` lumped masses (diagonal).
#[derive(Debug, Clone)]
pub struct BlochMatrix {
    size: usize,
    /// `(row, col, value)` with both triangles stored.
    entries: Vec<(usize, usize, Complex64)>,
    mass: Vec<f64>,
}

impl BlochMatrix {
    pub fn assemble(grid: &FdGrid, theta: f64) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let phase = Complex64::from_polar(1.0, theta.rem_euclid(2.0 * PI));
        let mut in_window = vec![false; ny + 1];
        for &j in &grid.window {
            in_window[j] = true;
        }
        // reduced index and phase of every grid node
        let mut index = vec![usize::MAX; (nx + 1) * (ny + 1)];
        let node = |i: usize, j: usize| i * (ny + 1) + j;
        let mut size = 0;
        for i in 0..=nx {
            for j in 0..=ny {
                if i == nx && in_window[j] {
                    continue;
                }
                index[node(i, j)] = size;
                size += 1;
            }
        }
        let locate = |i: usize, j: usize| -> (usize, Complex64) {
            if i == nx && in_window[j] {
                (index[node(0, j)], phase)
            } else {
                (index[node(i, j)], Complex64::from(1.0))
            }
        };
        let half = |k: usize, n: usize| if k == 0 || k == n { 0.5 } else { 1.0 };

        let mut diag = vec![0.0; size];
        let mut entries = Vec::new();
        let mut mass = vec![0.0; size];
        let mut edge = |a: (usize, usize), b: (usize, usize), c: f64| {
            let (ra, pa) = locate(a.0, a.1);
            let (rb, pb) = locate(b.0, b.1);
            diag[ra] += c * pa.norm_sqr();
            diag[rb] += c * pb.norm_sqr();
            let v = -c * pa.conj() * pb;
            entries.push((ra, rb, v));
            entries.push((rb, ra, v.conj()));
        };
        for i in 0..=nx {
            for j in 0..=ny {
                if i < nx {
                    edge((i, j), (i + 1, j), half(j, ny));
                }
                if j < ny {
                    edge((i, j), (i, j + 1), half(i, nx));
                }
            }
        }
        let h2 = grid.h * grid.h;
        for i in 0..=nx {
            for j in 0..=ny {
                let (r, p) = locate(i, j);
                mass[r] += h2 * half(i, nx) * half(j, ny) * p.norm_sqr();
            }
        }
        entries.extend(diag.into_iter().enumerate().map(|(r, d)| (r, r, Complex64::from(d))));
        Self { size, entries, mass }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn stiffness_dense(&self) -> DMatrix<Complex64> {
        let mut k = DMatrix::zeros(self.size, self.size);
        for &(r, c, v) in &self.entries {
            k[(r, c)] += v;
        }
        k
    }

    /// Eigenvalues of `M^-1/2 K M^-1/2`, ascending. Dense, for small grids.
    pub fn eigenvalues_dense(&self) -> Vec<f64> {
        let mut k = self.stiffness_dense();
        let s: Vec<f64> = self.mass.iter().map(|m| 1.0 / m.sqrt()).collect();
        for r in 0..self.size {
            for c in 0..self.size {
                k[(r, c)] *= s[r] * s[c];
            }
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(k).eigenvalues.iter().cloned().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }
}

/// Spectral data of the decoupled grid cell, reused across `lambda`.
struct CellSpectrum {
    mu_x: Vec<f64>,
    mu_y: Vec<f64>,
    /// `sqrt(a_l / H) cos(l pi j / J)` for window rows `j` (rows) and all `l` (columns).
    window_modes: DMatrix<f64>,
    nx: usize,
}

impl CellSpectrum {
    fn new(grid: &FdGrid) -> Self {
        let (nx, ny) = (grid.nx, grid.ny);
        let window_modes = DMatrix::from_fn(grid.window.len(), ny + 1, |w, l| {
            let j = grid.window[w];
            (FdGrid::endpoint_weight(l, ny) / grid.height).sqrt() * ((l * j) as f64 * PI / ny as f64).cos()
        });
        Self { mu_x: grid.spectrum_1d(nx), mu_y: grid.spectrum_1d(ny), window_modes, nx }
    }

    /// Number of cell eigenvalues strictly below `lambda`.
    fn count_below(&self, lambda: f64) -> usize {
        self.mu_x
            .iter()
            .map(|&mx| self.mu_y.partition_point(|&my| mx + my < lambda))
            .sum()
    }

    /// The `k`-th smallest cell eigenvalue (0-based).
    fn kth(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = (0.0, self.mu_x[self.nx] + self.mu_y[self.mu_y.len() - 1] + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        // smallest exact sum at or above the bracket
        self.mu_x
            .iter()
            .filter_map(|&mx| {
                let l = self.mu_y.partition_point(|&my| mx + my < lo);
                self.mu_y.get(l).map(|&my| mx + my)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Positive eigenvalue count of the capacitance matrix at `lambda`.
    fn capacitance_positive(&self, lambda: f64, theta: f64) -> usize {
        let cos_t = theta.cos();
        let nx = self.nx;
        let weights: Vec<f64> = self
            .mu_y
            .iter()
            .map(|&my| {
                let (mut same, mut cross) = (0.0, 0.0);
                for (k, &mx) in self.mu_x.iter().enumerate() {
                    let t = FdGrid::endpoint_weight(k, nx) / (mx + my - lambda);
                    same += t;
                    cross += if k % 2 == 0 { t } else { -t };
                }
                2.0 * same - 2.0 * cos_t * cross
            })
            .collect();
        let mut scaled = self.window_modes.clone();
        for (l, w) in weights.iter().enumerate() {
            scaled.column_mut(l).scale_mut(*w);
        }
        let s = &scaled * self.window_modes.transpose();
        let s = 0.5 * (&s + s.transpose());
        s.symmetric_eigenvalues().iter().filter(|&&v| v > 0.0).count()
    }

    /// Bloch eigenvalues strictly below `lambda`.
    fn bloch_count(&self, lambda: f64, theta: f64, window: usize) -> usize {
        let cell = self.count_below(lambda);
        let pos = if window == 0 { 0 } else { self.capacitance_positive(lambda, theta) };
        (cell + pos).saturating_sub(window)
    }

    /// The `index`-th Bloch eigenvalue by bisection between the interlacing bounds.
    fn bloch_eigenvalue(&self, index: usize, theta: f64, window: usize) -> f64 {
        let mut lo = self.kth(index);
        let mut hi = self.kth(index + window);
        if window == 0 || lo == hi {
            return lo;
        }
        while hi - lo > BISECTION_RTOL * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if self.bloch_count(mid, theta, window) > index {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// The `k` smallest Bloch eigenvalues of the grid cell with window half-width
/// `epsilon` (which may reach `H/2`, closing the crack).
pub fn fd_bloch_eigen(cell: &CellSpec, theta: f64, epsilon: f64, h: f64, k: usize) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(Error::InvalidArgument("eigenvalue count must be positive".into()));
    }
    let grid = FdGrid::new(cell.height(), epsilon, h)?;
    grid.check_window()?;
    let spectrum = CellSpectrum::new(&grid);
    let theta = theta.rem_euclid(2.0 * PI);
    Ok((0..k).map(|i| spectrum.bloch_eigenvalue(i, theta, grid.window.len())).collect())
}

/// Index of the discrete counterpart of `mode` in the sorted grid cell spectrum.
fn tracked_index(grid: &FdGrid, spectrum: &CellSpectrum, mode: ModeIndex) -> Result<(usize, f64)> {
    let (m, n) = (mode.m as usize, mode.n as usize);
    if m > grid.nx || n > grid.ny {
        return Err(Error::InvalidArgument(format!("mode {mode} not resolved by h = {}", grid.h)));
    }
    let e = spectrum.mu_x[m] + spectrum.mu_y[n];
    let below = spectrum.count_below(e);
    let at_or_below = spectrum.count_below(e * (1.0 + 1e-12) + 1e-300);
    if at_or_below != below + 1 {
        return Err(Error::DegenerateMode { mode, colliding: Vec::new(), energy: e });
    }
    Ok((below, e))
}

/// Bloch eigenvalue of the branch that starts at the grid eigenvalue of the
/// tracked mode when the window closes.
pub fn fd_tracked_eigenvalue(cell: &CellSpec, theta: f64, h: f64) -> Result<f64> {
    let grid = FdGrid::new(cell.height(), cell.epsilon(), h)?;
    grid.check_window()?;
    let spectrum = CellSpectrum::new(&grid);
    let (index, _) = tracked_index(&grid, &spectrum, cell.mode())?;
    Ok(spectrum.bloch_eigenvalue(index, theta.rem_euclid(2.0 * PI), grid.window.len()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extrapolation {
    pub value: f64,
    /// Observed convergence order (2 when it could not be estimated).
    pub order: f64,
    /// `|value - finest|`, a conservative error indicator.
    pub correction: f64,
}

/// Richardson extrapolation of `values[i]` computed at spacings `hs[i]`
/// (coarse to fine). With three levels the order is estimated; otherwise, or if
/// the estimate falls outside `[0.5, 4]`, order 2 is assumed.
pub fn richardson(hs: &[f64], values: &[f64]) -> Result<Extrapolation> {
    if hs.len() != values.len() || hs.len() < 2 {
        return Err(Error::InsufficientData("Richardson needs at least two levels".into()));
    }
    let n = hs.len();
    let order = if n >= 3 {
        estimate_order(&hs[n - 3..], &values[n - 3..]).filter(|p| (0.5..=4.0).contains(p))
    } else {
        None
    }
    .unwrap_or(2.0);
    let (h1, h2) = (hs[n - 2], hs[n - 1]);
    let (e1, e2) = (values[n - 2], values[n - 1]);
    let r = (h2 / h1).powf(order);
    let value = (e2 - r * e1) / (1.0 - r);
    Ok(Extrapolation { value, order, correction: (value - e2).abs() })
}

/// Solves `(e1 - e2)/(e2 - e3) = (h1^p - h2^p)/(h2^p - h3^p)` for `p`.
fn estimate_order(hs: &[f64], e: &[f64]) -> Option<f64> {
    let target = (e[0] - e[1]) / (e[1] - e[2]);
    if !target.is_finite() || target <= 1.0 {
        return None;
    }
    let ratio = |p: f64| (hs[0].powf(p) - hs[1].powf(p)) / (hs[1].powf(p) - hs[2].powf(p));
    let (mut lo, mut hi) = (0.05, 8.0);
    if (ratio(lo) - target).signum() == (ratio(hi) - target).signum() {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (ratio(mid) - target).signum() == (ratio(lo) - target).signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Tracked-branch eigenvalue at each `h`, then Richardson extrapolated.
pub fn fd_extrapolated(cell: &CellSpec, theta: f64, hs: &[f64]) -> Result<(Vec<f64>, Extrapolation)> {
    let values = hs
        .par_iter()
        .map(|&h| fd_tracked_eigenvalue(cell, theta, h))
        .collect::<Result<Vec<f64>>>()?;
    let ex = richardson(hs, &values)?;
    Ok((values, ex))
}

/// Tracked-branch eigenvalue for every `theta` at spacing `h`.
pub fn oracle_band(cell: &CellSpec, epsilon: f64, thetas: &[f64], h: f64) -> BandTable {
    let mode = cell.mode();
    let entries = thetas
        .par_iter()
        .map(|&theta| {
            let outcome = cell.with_epsilon(epsilon).and_then(|c| {
                fd_tracked_eigenvalue(&c, theta, h).map(|e| DispersionPoint {
                    theta,
                    epsilon,
                    e_numeric: e,
                    method: Method::FdOracle,
                    residual: BISECTION_RTOL * e.max(1.0),
                    iterations: 0,
                })
            });
            BandEntry {
                theta,
                epsilon,
                method: Method::FdOracle,
                e_asymptotic: theorem_shift(cell, mode, theta, epsilon),
                outcome,
            }
        })
        .collect();
    BandTable { height: cell.height(), mode, entries }
}
