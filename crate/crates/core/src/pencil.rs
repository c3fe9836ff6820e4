//! Discretized operator pencil on the window and its nonlinear eigenvalue near
//! the tracked cell eigenvalue.
//!
//! Densities are expanded in the weighted basis `w_k`, traces in `T_k`. The
//! pencil matrix is `c_log diag(lambda) + v v^H D / (E - z) + R`, where `D` is
//! the Chebyshev mass `pi / a_k`, `v` the plain coefficients of the conjugate
//! pole trace and `R` the smooth remainder integrated with Gauss-Chebyshev
//! nodes.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use roots::{find_root_brent, Convergency};
use serde::{Deserialize, Serialize};

use crate::asymptotics::{consistent_shift, theorem_shift};
use crate::cell::{next_eigenvalue_above, CellSpec, ModeIndex};
use crate::cheb::{cheb_fit, cheb_t, chebyshev_mass, gauss_nodes, log_eigenvalue};
use crate::error::{Error, Result};
use crate::green::{bloch_trace, decompose, junction_factor, SpectralParam, LOG_COEFFICIENT};

pub const DEFAULT_ORDER: usize = 32;
pub const DEFAULT_THETA_POINTS: usize = 33;

/// `sigma_min` above `100 x` this means no singularity was found.
const SINGULAR_TOL: f64 = 1e-8;
const SCAN_POINTS: usize = 32;
const MAX_FIXED_POINT_ITERATIONS: usize = 100;
const FIXED_POINT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Root,
    Reduced,
    FdOracle,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Root => "root",
            Method::Reduced => "reduced",
            Method::FdOracle => "fd_oracle",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "root" => Ok(Method::Root),
            "reduced" => Ok(Method::Reduced),
            "fd_oracle" => Ok(Method::FdOracle),
            other => Err(Error::InvalidArgument(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionPoint {
    pub theta: f64,
    pub epsilon: f64,
    pub e_numeric: f64,
    pub method: Method,
    /// `sigma_min` for the root route, last fixed-point step for the reduced route.
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone)]
pub struct PencilMatrix {
    theta: f64,
    z: f64,
    energy: f64,
    epsilon: f64,
    /// `c_log * lambda_k`.
    log_diag: DVector<f64>,
    /// Plain coefficients of `conj(u_theta)`.
    pole: DVector<Complex64>,
    smooth: DMatrix<Complex64>,
}

/// Builds the `n x n` pencil for `cell.mode()` at quasimomentum `theta`.
pub fn assemble(cell: &CellSpec, theta: f64, z: SpectralParam, n: usize) -> Result<PencilMatrix> {
    if n < 8 {
        return Err(Error::InvalidArgument(format!("pencil order {n} below 8")));
    }
    let mode = cell.mode();
    let decomposition = decompose(cell, theta, mode)?;
    let eps = cell.epsilon();
    let height = cell.height();
    let zv = z.value();

    let log_diag = DVector::from_fn(n, |k, _| LOG_COEFFICIENT * log_eigenvalue(eps, k));
    let pole = if decoupled(mode, theta) {
        DVector::zeros(n)
    } else {
        let trace = cheb_fit(|y| bloch_trace(height, mode, theta, y).conj(), eps, n);
        DVector::from_column_slice(trace.coeffs())
    };

    let nq = 2 * n;
    let nodes = gauss_nodes(nq);
    let ys: Vec<f64> = nodes.iter().map(|s| eps * s).collect();
    let r_nodes = decomposition.series(zv)?.smooth_matrix(theta, &ys);
    // values at nodes -> T coefficients, and T coefficients -> quadrature weights
    let to_coeffs = DMatrix::from_fn(n, nq, |m, p| cosine_weight_usize(m) / nq as f64 * cheb_t(m, nodes[p]));
    let from_coeffs = DMatrix::from_fn(nq, n, |q, k| PI / nq as f64 * cheb_t(k, nodes[q]));
    let smooth = (&to_coeffs * r_nodes * &from_coeffs).map(Complex64::from);

    Ok(PencilMatrix { theta, z: zv, energy: decomposition.energy(), epsilon: eps, log_diag, pole, smooth })
}

/// The jump factor `1 - e^{i theta} (-1)^m` vanishes up to round-off.
pub fn decoupled(mode: ModeIndex, theta: f64) -> bool {
    junction_factor(mode, theta) == Complex64::from(0.0)
}

fn cosine_weight_usize(k: usize) -> f64 {
    if k == 0 {
        1.0
    } else {
        2.0
    }
}

fn mass(n: usize) -> DVector<f64> {
    DVector::from_fn(n, |k, _| chebyshev_mass(k))
}

impl PencilMatrix {
    pub fn order(&self) -> usize {
        self.log_diag.len()
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn log_part(&self) -> DMatrix<Complex64> {
        DMatrix::from_diagonal(&self.log_diag.map(Complex64::from))
    }

    /// Residue matrix of the pole (rank one), without the `1/(E - z)` factor.
    pub fn pole_part(&self) -> DMatrix<Complex64> {
        let weighted = DVector::from_fn(self.order(), |k, _| self.pole[k] * chebyshev_mass(k));
        &self.pole * weighted.adjoint()
    }

    pub fn pole_column(&self) -> &DVector<Complex64> {
        &self.pole
    }

    pub fn smooth_part(&self) -> &DMatrix<Complex64> {
        &self.smooth
    }

    /// Full matrix, mapping weighted coefficients to plain coefficients.
    pub fn entries(&self) -> DMatrix<Complex64> {
        let mut k = self.log_part() + &self.smooth;
        if self.pole.norm() > 0.0 {
            k += self.pole_part() / Complex64::from(self.energy - self.z);
        }
        k
    }

    /// `D K`, the Galerkin matrix `<w_j, K w_k>`; Hermitian for real `z`.
    pub fn galerkin(&self) -> DMatrix<Complex64> {
        let d = mass(self.order());
        let mut g = self.entries();
        for (j, mut row) in g.row_iter_mut().enumerate() {
            row *= Complex64::from(d[j]);
        }
        g
    }

    /// `I + (c Lambda)^-1 R`, the preconditioned pencil without its pole.
    fn pole_free(&self) -> DMatrix<Complex64> {
        let n = self.order();
        let mut b = self.smooth.clone();
        for (j, mut row) in b.row_iter_mut().enumerate() {
            row /= Complex64::from(self.log_diag[j]);
        }
        b + DMatrix::identity(n, n)
    }

    fn scaled_pole(&self) -> DVector<Complex64> {
        self.pole.component_div(&self.log_diag.map(Complex64::from))
    }

    /// `(c Lambda)^-1 K`.
    pub fn preconditioned(&self) -> DMatrix<Complex64> {
        let mut a = self.pole_free();
        if self.pole.norm() > 0.0 {
            let weighted = DVector::from_fn(self.order(), |k, _| self.pole[k] * chebyshev_mass(k));
            a += self.scaled_pole() * weighted.adjoint() / Complex64::from(self.energy - self.z);
        }
        a
    }

    /// `rho^H (I + (c Lambda)^-1 R)^-1 (c Lambda)^-1 v`, real for real `z`.
    pub fn reduced_shift(&self) -> Result<f64> {
        let lu = self.pole_free().lu();
        let x = lu.solve(&self.scaled_pole()).ok_or(Error::Resonance { nu: f64::NAN, z: self.z })?;
        let d = mass(self.order());
        let s: Complex64 = (0..self.order()).map(|k| self.pole[k].conj() * d[k] * x[k]).sum();
        Ok(s.re)
    }

    /// `det(I + (c Lambda)^-1 R) * ((E - z) + reduced_shift)`: real, analytic
    /// through `z = E`, and zero exactly where the pencil is singular.
    pub fn signed_determinant(&self) -> Result<f64> {
        let lu = self.pole_free().lu();
        let det = lu.determinant().re;
        if det == 0.0 {
            return Ok(0.0);
        }
        Ok(det * ((self.energy - self.z) + self.reduced_shift()?))
    }

    /// Preconditioned operator in the orthonormal scaling of the weighted norm.
    fn normalized_operator(&self) -> DMatrix<Complex64> {
        let d = mass(self.order()).map(f64::sqrt);
        let mut a = self.preconditioned();
        for j in 0..self.order() {
            for k in 0..self.order() {
                a[(j, k)] *= d[j] / d[k];
            }
        }
        a
    }
}

/// Smallest singular value of the preconditioned pencil in the weighted norm.
pub fn min_singular(p: &PencilMatrix) -> f64 {
    min_singular_pair(p).0
}

/// Smallest singular value and its right singular vector in weighted coefficients.
/// `NaN` when the operator is not finite (at `z = E` with a live pole).
pub fn min_singular_pair(p: &PencilMatrix) -> (f64, DVector<Complex64>) {
    let op = p.normalized_operator();
    let failed = || (f64::NAN, DVector::from_element(p.order(), Complex64::from(f64::NAN)));
    if op.iter().any(|v| !v.is_finite()) {
        return failed();
    }
    let Some(svd) = op.try_svd(false, true, f64::EPSILON, 10_000) else {
        return failed();
    };
    let (idx, sigma) = svd
        .singular_values
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let v_t = svd.v_t.expect("right singular vectors requested");
    let d = mass(p.order()).map(f64::sqrt);
    let f = DVector::from_fn(p.order(), |k, _| v_t[(idx, k)].conj() / d[k]);
    (sigma, f)
}

/// `<u_theta, f> = int conj(u_theta) f` for weighted coefficients `f`.
pub fn trace_overlap(p: &PencilMatrix, f: &DVector<Complex64>) -> Complex64 {
    (0..p.order()).map(|k| p.pole[k] * chebyshev_mass(k) * f[k]).sum()
}

struct BracketTolerance;

impl Convergency<f64> for BracketTolerance {
    fn is_root_found(&mut self, y: f64) -> bool {
        y == 0.0
    }

    fn is_converged(&mut self, x1: f64, x2: f64) -> bool {
        (x1 - x2).abs() <= 2e-16 * x1.abs().max(1.0)
    }

    fn is_iteration_limit_reached(&mut self, iter: usize) -> bool {
        iter > 200
    }
}

fn pencil_at(cell: &CellSpec, theta: f64, z: f64, n: usize) -> Result<PencilMatrix> {
    let param = SpectralParam::checked(cell.height(), z, Some(cell.mode()))?;
    assemble(cell, theta, param, n)
}

/// Default search interval: from `E` to 90% of the way to the next eigenvalue.
pub fn default_bracket(cell: &CellSpec, mode: ModeIndex) -> (f64, f64) {
    let e = cell.eigenvalue(mode);
    let above = next_eigenvalue_above(cell.height(), mode);
    (e, e + 0.9 * (above - e))
}

/// Locates the singular point of the pencil closest to `E` inside `bracket`
/// (default [`default_bracket`]) by a sign scan of [`PencilMatrix::signed_determinant`]
/// and Brent refinement; falls back to minimizing `sigma_min`.
pub fn dispersion_root(
    cell: &CellSpec,
    theta: f64,
    mode: ModeIndex,
    n: usize,
    bracket: Option<(f64, f64)>,
) -> Result<DispersionPoint> {
    let cell = cell.with_mode(mode);
    let (lo, hi) = bracket.unwrap_or_else(|| default_bracket(&cell, mode));
    if !(lo < hi) {
        return Err(Error::InvalidArgument(format!("empty bracket [{lo}, {hi}]")));
    }
    let point = |z: f64, residual: f64, iterations: usize| DispersionPoint {
        theta,
        epsilon: cell.epsilon(),
        e_numeric: z,
        method: Method::Root,
        residual,
        iterations,
    };

    let probe = pencil_at(&cell, theta, lo, n)?;
    if probe.pole.norm() == 0.0 && lo <= probe.energy && probe.energy <= hi {
        // no coupling: the cell eigenfunction has zero flux through the window
        return Ok(point(probe.energy, 0.0, 0));
    }

    let f = |z: f64| -> Result<f64> { pencil_at(&cell, theta, z, n)?.signed_determinant() };
    let grid: Vec<f64> = (0..=SCAN_POINTS).map(|i| lo + (hi - lo) * i as f64 / SCAN_POINTS as f64).collect();
    let mut prev = (grid[0], f(grid[0])?);
    let mut evaluations = 1;
    for &z in &grid[1..] {
        let val = f(z)?;
        evaluations += 1;
        if prev.1 == 0.0 {
            let p = pencil_at(&cell, theta, prev.0, n)?;
            return Ok(point(prev.0, min_singular(&p), evaluations));
        }
        if prev.1.signum() != val.signum() {
            let mut failure = None;
            let mut count = 0usize;
            let root = find_root_brent(
                prev.0,
                z,
                |x| {
                    count += 1;
                    f(x).unwrap_or_else(|e| {
                        failure.get_or_insert(e);
                        0.0
                    })
                },
                &mut BracketTolerance,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            let root = root.map_err(|e| Error::InvalidArgument(format!("root refinement failed: {e:?}")))?;
            let p = pencil_at(&cell, theta, root, n)?;
            return Ok(point(root, min_singular(&p), evaluations + count));
        }
        prev = (z, val);
    }

    // no sign change: golden-section search on sigma_min around its grid minimum
    let sigma = |z: f64| -> Result<f64> { Ok(min_singular(&pencil_at(&cell, theta, z, n)?)) };
    let mut best = (grid[1], f64::INFINITY);
    for &z in &grid[1..] {
        let s = sigma(z)?;
        if s < best.1 {
            best = (z, s);
        }
    }
    let step = (hi - lo) / SCAN_POINTS as f64;
    let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let ratio = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (sigma(c)?, sigma(d)?);
    while (b - a).abs() > 1e-13 * b.abs().max(1.0) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = sigma(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = sigma(d)?;
        }
    }
    let z = 0.5 * (a + b);
    let s = sigma(z)?;
    if s > 100.0 * SINGULAR_TOL {
        return Err(Error::NoRootInBracket { lo, hi, sigma_min: s });
    }
    Ok(point(z, s, evaluations))
}

/// Solves the scalar reduction `z = E + rho^H (I + (c Lambda)^-1 R(z))^-1 (c Lambda)^-1 v`
/// by fixed-point iteration from the leading-order prediction.
pub fn dispersion_reduced(cell: &CellSpec, theta: f64, mode: ModeIndex, n: usize) -> Result<DispersionPoint> {
    let cell = cell.with_mode(mode);
    let e = cell.eigenvalue(mode);
    let mut z = consistent_shift(&cell, mode, theta, cell.epsilon());
    let mut last_step = f64::INFINITY;
    for k in 1..=MAX_FIXED_POINT_ITERATIONS {
        let next = e + pencil_at(&cell, theta, z, n)?.reduced_shift()?;
        last_step = (next - z).abs();
        z = next;
        if last_step < FIXED_POINT_TOL {
            return Ok(DispersionPoint {
                theta,
                epsilon: cell.epsilon(),
                e_numeric: z,
                method: Method::Reduced,
                residual: last_step,
                iterations: k,
            });
        }
    }
    Err(Error::NonConvergence { iterations: MAX_FIXED_POINT_ITERATIONS, last_step })
}

/// `count` uniform points on `[0, 2 pi]`, both ends included.
pub fn theta_grid(count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..count).map(|i| 2.0 * PI * i as f64 / (count - 1) as f64).collect(),
    }
}

#[derive(Debug, Clone)]
pub struct BandEntry {
    pub theta: f64,
    pub epsilon: f64,
    pub method: Method,
    pub e_asymptotic: f64,
    pub outcome: std::result::Result<DispersionPoint, Error>,
}

impl BandEntry {
    pub fn e_numeric(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|p| p.e_numeric)
    }
}

#[derive(Debug, Clone)]
pub struct BandTable {
    pub height: f64,
    pub mode: ModeIndex,
    /// Ordered by theta, then epsilon, then method.
    pub entries: Vec<BandEntry>,
}

impl BandTable {
    pub fn energy(&self) -> f64 {
        crate::cell::mode_energy(self.height, self.mode)
    }

    pub fn failures(&self) -> usize {
        self.entries.iter().filter(|e| e.outcome.is_err()).count()
    }
}

/// Every `(theta, epsilon, method)` combination, evaluated in parallel on the
/// current rayon pool. Per-point failures are kept in the table.
pub fn band_sweep(
    cell: &CellSpec,
    epsilons: &[f64],
    mode: ModeIndex,
    thetas: &[f64],
    n: usize,
    methods: &[Method],
) -> BandTable {
    let jobs: Vec<(f64, f64, Method)> = thetas
        .iter()
        .flat_map(|&t| epsilons.iter().flat_map(move |&e| methods.iter().map(move |&m| (t, e, m))))
        .collect();
    let entries = jobs
        .par_iter()
        .map(|&(theta, eps, method)| {
            let outcome = cell.with_epsilon(eps).and_then(|c| match method {
                Method::Root => dispersion_root(&c, theta, mode, n, None),
                Method::Reduced => dispersion_reduced(&c, theta, mode, n),
                Method::FdOracle => Err(Error::InvalidArgument(
                    "fd_oracle points come from fd::oracle_band".into(),
                )),
            });
            BandEntry {
                theta,
                epsilon: eps,
                method,
                e_asymptotic: theorem_shift(&cell.with_mode(mode), mode, theta, eps),
                outcome,
            }
        })
        .collect();
    BandTable { height: cell.height(), mode, entries }
}
