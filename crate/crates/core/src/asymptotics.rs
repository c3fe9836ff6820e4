//! Small-window asymptotics: the leading dispersion law, the inner product
//! `<L^-1 u_theta, u_theta>`, and least-squares fits of band data in powers of
//! `1 / |log eps|`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cell::{cosine_weight, junction_values, CellSpec, ModeIndex};
use crate::cheb::{cheb_fit, chebyshev_mass, log_invert, soehngen_invert, x_inner, ChebSeries};
use crate::error::{Error, Result};
use crate::green::{bloch_trace, junction_factor, DECOUPLING_TOL};
use crate::pencil::BandTable;

/// Prefactor of `|u(A0) - e^{i theta} u(A1)|^2 / |log eps|` in the stated shift law.
pub const STATED_CONSTANT: f64 = 2.0 * PI;

/// Prefactor implied by the `-2/pi` log coefficient of the kernel.
pub const CONSISTENT_CONSTANT: f64 = 0.5 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticPrediction {
    pub energy: f64,
    pub u_a0: f64,
    pub u_a1: f64,
}

impl AsymptoticPrediction {
    pub fn new(cell: &CellSpec, mode: ModeIndex) -> Self {
        let (u_a0, u_a1) = junction_values(cell, mode);
        Self { energy: cell.eigenvalue(mode), u_a0, u_a1 }
    }

    /// `|u(A0) - e^{i theta} u(A1)|^2`.
    /// Exactly zero at decoupled quasimomenta.
    pub fn junction_jump(&self, theta: f64) -> f64 {
        let parity = if self.u_a1 == self.u_a0 { 1.0 } else { -1.0 };
        let factor = Complex64::from(1.0) - Complex64::from_polar(parity, theta);
        if factor.norm() < DECOUPLING_TOL {
            0.0
        } else {
            self.u_a0 * self.u_a0 * factor.norm_sqr()
        }
    }

    /// `2 pi |u(A0) - e^{i theta} u(A1)|^2`.
    pub fn shift_coefficient(&self, theta: f64) -> f64 {
        STATED_CONSTANT * self.junction_jump(theta)
    }

    pub fn predicted(&self, theta: f64, epsilon: f64) -> f64 {
        self.energy + self.shift_coefficient(theta) / epsilon.ln().abs()
    }
}

/// `E + (2 pi / |log eps|) |u(A0) - e^{i theta} u(A1)|^2`.
pub fn theorem_shift(cell: &CellSpec, mode: ModeIndex, theta: f64, epsilon: f64) -> f64 {
    AsymptoticPrediction::new(cell, mode).predicted(theta, epsilon)
}

/// Same law with the prefactor [`CONSISTENT_CONSTANT`].
pub fn consistent_shift(cell: &CellSpec, mode: ModeIndex, theta: f64, epsilon: f64) -> f64 {
    let p = AsymptoticPrediction::new(cell, mode);
    p.energy + CONSISTENT_CONSTANT * p.junction_jump(theta) / epsilon.ln().abs()
}

fn trace_series(cell: &CellSpec, theta: f64, epsilon: f64, mode: ModeIndex, n: usize) -> ChebSeries {
    cheb_fit(|y| bloch_trace(cell.height(), mode, theta, y), epsilon, n)
}

/// `<L^-1 u_theta, u_theta>` through the diagonal inverse.
pub fn prop2_inner(cell: &CellSpec, theta: f64, epsilon: f64, mode: ModeIndex, n: usize) -> Result<Complex64> {
    let u = trace_series(cell, theta, epsilon, mode, n);
    x_inner(&log_invert(&u)?, &u)
}

/// `<L^-1 u_theta, u_theta>` through the explicit principal-value inverse.
pub fn prop2_inner_soehngen(
    cell: &CellSpec,
    theta: f64,
    epsilon: f64,
    mode: ModeIndex,
    n: usize,
) -> Result<Complex64> {
    let h = cell.height();
    let factor = junction_factor(mode, theta) * cosine_weight(mode.m).sqrt();
    let q = mode.n as f64 * PI / h;
    let amp = (cosine_weight(mode.n) / h).sqrt();
    let du = |y: f64| factor * (-amp * q * (q * (y + 0.5 * h)).sin());
    let inverse = soehngen_invert(|y| bloch_trace(h, mode, theta, y), du, epsilon, n);
    x_inner(&inverse, &trace_series(cell, theta, epsilon, mode, n))
}

/// `|<B L^-1 u_theta, u_theta>| |log eps| / ||B||`, with `B` acting on weighted
/// coefficients and its norm taken in the weighted space.
pub fn prop2_bound_probe(
    cell: &CellSpec,
    theta: f64,
    epsilon: f64,
    mode: ModeIndex,
    n: usize,
    b: &DMatrix<Complex64>,
) -> Result<f64> {
    if b.nrows() != n || b.ncols() != n {
        return Err(Error::InvalidArgument(format!("test operator must be {n}x{n}")));
    }
    let norm = weighted_operator_norm(b);
    if norm == 0.0 {
        return Ok(0.0);
    }
    let u = trace_series(cell, theta, epsilon, mode, n);
    let f = log_invert(&u)?;
    let bf = b * DVector::from_column_slice(f.coeffs());
    let bf = ChebSeries::x_weighted(epsilon, bf.iter().cloned().collect());
    Ok(x_inner(&bf, &u)?.norm() * epsilon.ln().abs() / norm)
}

/// Operator norm on weighted coefficients, `|| D^1/2 B D^-1/2 ||_2`.
pub fn weighted_operator_norm(b: &DMatrix<Complex64>) -> f64 {
    let scaled = DMatrix::from_fn(b.nrows(), b.ncols(), |j, k| {
        b[(j, k)] * (chebyshev_mass(j) / chebyshev_mass(k)).sqrt()
    });
    scaled.singular_values().max()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadingFit {
    pub c1: f64,
    pub c2: f64,
    pub rms: f64,
    pub samples: usize,
}

/// Fits `E_numeric - E = c1 / |log eps| + c2 / log^2 eps` over the successful
/// entries of `band` at `theta`.
pub fn fit_leading_coefficient(band: &BandTable, theta: f64) -> Result<LeadingFit> {
    let (x, y) = band_samples(band, theta)?;
    fit_two_term(&x, &y)
}

/// One-term model `c1 / |log eps|` on the same data (c2 reported as 0).
pub fn fit_one_term_coefficient(band: &BandTable, theta: f64) -> Result<LeadingFit> {
    let (x, y) = band_samples(band, theta)?;
    let c1 = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() / x.iter().map(|a| a * a).sum::<f64>();
    let rms = rms(x.iter().zip(&y).map(|(a, b)| b - c1 * a));
    Ok(LeadingFit { c1, c2: 0.0, rms, samples: x.len() })
}

fn band_samples(band: &BandTable, theta: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let e = band.energy();
    let mut eps = Vec::new();
    let mut x = Vec::new();
    let mut y = Vec::new();
    for entry in &band.entries {
        if (entry.theta - theta).abs() > 1e-12 {
            continue;
        }
        if let Some(v) = entry.e_numeric() {
            x.push(1.0 / entry.epsilon.ln().abs());
            y.push(v - e);
            if !eps.iter().any(|&p: &f64| p == entry.epsilon) {
                eps.push(entry.epsilon);
            }
        }
    }
    if eps.len() < 4 {
        return Err(Error::InsufficientData(format!(
            "{} distinct epsilon values at theta = {theta}; need 4",
            eps.len()
        )));
    }
    Ok((x, y))
}

/// Least squares for `y = c1 x + c2 x^2`.
pub fn fit_two_term(x: &[f64], y: &[f64]) -> Result<LeadingFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientData(format!("{} samples", x.len())));
    }
    let a = DMatrix::from_fn(x.len(), 2, |i, j| x[i].powi(j as i32 + 1));
    let b = DVector::from_column_slice(y);
    let sol = a
        .clone()
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|e| Error::InsufficientData(e.to_string()))?;
    let residual = &a * &sol - &b;
    Ok(LeadingFit { c1: sol[0], c2: sol[1], rms: rms(residual.iter().cloned()), samples: x.len() })
}

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v * v, c + 1));
    if count == 0 {
        0.0
    } else {
        (sum / count as f64).sqrt()
    }
}
