//! Chebyshev coefficient realizations of the window function spaces.
//!
//! Everything lives in the scaled coordinate `s = y / epsilon`. The weighted
//! space (densities) uses `w_k(y) = T_k(s) / sqrt(eps^2 - y^2)`, the plain space
//! (traces) uses `T_k(s)`. In these bases the logarithmic single-layer operator
//! `L f(x) = int log|x - y| f(y) dy` is diagonal.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which family of functions a coefficient vector refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Basis {
    /// `sum c_k T_k(y/eps) / sqrt(eps^2 - y^2)`.
    XWeighted,
    /// `sum c_k T_k(y/eps)`.
    YPlain,
    /// `sum c_k sqrt(eps^2 - y^2) U_k(y/eps)`.
    UWeighted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChebSeries {
    epsilon: f64,
    basis: Basis,
    coeffs: Vec<Complex64>,
}

impl ChebSeries {
    pub fn new(epsilon: f64, basis: Basis, coeffs: Vec<Complex64>) -> Self {
        assert!(epsilon > 0.0, "half-aperture must be positive");
        Self { epsilon, basis, coeffs }
    }

    pub fn x_weighted(epsilon: f64, coeffs: Vec<Complex64>) -> Self {
        Self::new(epsilon, Basis::XWeighted, coeffs)
    }

    pub fn y_plain(epsilon: f64, coeffs: Vec<Complex64>) -> Self {
        Self::new(epsilon, Basis::YPlain, coeffs)
    }

    /// The single basis function `k` of `basis`.
    pub fn unit(epsilon: f64, basis: Basis, k: usize) -> Self {
        let mut c = vec![Complex64::from(0.0); k + 1];
        c[k] = Complex64::from(1.0);
        Self::new(epsilon, basis, c)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn basis(&self) -> Basis {
        self.basis
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Value at `y`; weighted bases are singular or zero at `|y| = eps`.
    pub fn eval(&self, y: f64) -> Complex64 {
        let s = y / self.epsilon;
        match self.basis {
            Basis::XWeighted => {
                clenshaw_t(&self.coeffs, s) / (self.epsilon * self.epsilon - y * y).sqrt()
            }
            Basis::YPlain => clenshaw_t(&self.coeffs, s),
            Basis::UWeighted => {
                let u: Complex64 = self.coeffs.iter().enumerate().map(|(k, c)| c * cheb_u(k, s)).sum();
                u * (self.epsilon * self.epsilon - y * y).max(0.0).sqrt()
            }
        }
    }

    /// `||f||^2 = int sqrt(eps^2 - y^2) |f|^2 dy = sum |c_k|^2 pi / a_k`.
    pub fn x_norm(&self) -> Result<f64> {
        self.require(Basis::XWeighted)?;
        Ok(self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c.norm_sqr() * chebyshev_mass(k))
            .sum::<f64>()
            .sqrt())
    }

    fn require(&self, basis: Basis) -> Result<()> {
        if self.basis != basis {
            return Err(Error::InvalidArgument(format!("expected {basis:?} series, got {:?}", self.basis)));
        }
        Ok(())
    }
}

/// `int T_k^2 / sqrt(1 - s^2) ds`, i.e. `pi / a_k`.
pub fn chebyshev_mass(k: usize) -> f64 {
    if k == 0 {
        PI
    } else {
        0.5 * PI
    }
}

/// `T_k(s)`, valid for any real `s`.
pub fn cheb_t(k: usize, s: f64) -> f64 {
    if s.abs() <= 1.0 {
        return (k as f64 * s.acos()).cos();
    }
    let (mut a, mut b) = (1.0, s);
    if k == 0 {
        return a;
    }
    for _ in 1..k {
        let c = 2.0 * s * b - a;
        a = b;
        b = c;
    }
    b
}

/// `U_k(s)` by the three-term recurrence.
pub fn cheb_u(k: usize, s: f64) -> f64 {
    let (mut a, mut b) = (1.0, 2.0 * s);
    if k == 0 {
        return a;
    }
    for _ in 1..k {
        let c = 2.0 * s * b - a;
        a = b;
        b = c;
    }
    b
}

fn clenshaw_t(c: &[Complex64], s: f64) -> Complex64 {
    let mut b1 = Complex64::from(0.0);
    let mut b2 = Complex64::from(0.0);
    for ck in c.iter().skip(1).rev() {
        let b0 = ck + 2.0 * s * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    match c.first() {
        Some(c0) => c0 + s * b1 - b2,
        None => Complex64::from(0.0),
    }
}

/// Gauss-Chebyshev (first kind) nodes `cos((2p + 1) pi / (2n))`, `p = 0..n`.
pub fn gauss_nodes(n: usize) -> Vec<f64> {
    (0..n).map(|p| ((2 * p + 1) as f64 * PI / (2 * n) as f64).cos()).collect()
}

/// Diagonal entry `k` of the log operator: `pi log(eps/2)` for `k = 0`, else `-pi/k`.
pub fn log_eigenvalue(epsilon: f64, k: usize) -> f64 {
    if k == 0 {
        PI * (0.5 * epsilon).ln()
    } else {
        -PI / k as f64
    }
}

pub fn log_apply(f: &ChebSeries) -> Result<ChebSeries> {
    f.require(Basis::XWeighted)?;
    let c = f.coeffs.iter().enumerate().map(|(k, c)| c * log_eigenvalue(f.epsilon, k)).collect();
    Ok(ChebSeries::y_plain(f.epsilon, c))
}

pub fn log_invert(g: &ChebSeries) -> Result<ChebSeries> {
    g.require(Basis::YPlain)?;
    if (g.epsilon - 2.0).abs() < f64::EPSILON {
        return Err(Error::InvalidArgument("log operator is singular at eps = 2".into()));
    }
    let c = g.coeffs.iter().enumerate().map(|(k, c)| c / log_eigenvalue(g.epsilon, k)).collect();
    Ok(ChebSeries::x_weighted(g.epsilon, c))
}

/// Chebyshev-Lobatto interpolant of `f` on `[-eps, eps]` with `n` coefficients.
pub fn cheb_fit(f: impl Fn(f64) -> Complex64, epsilon: f64, n: usize) -> ChebSeries {
    assert!(n >= 2, "cheb_fit needs at least two points");
    let m = n - 1;
    let values: Vec<Complex64> = (0..=m).map(|j| f(epsilon * (j as f64 * PI / m as f64).cos())).collect();
    let coeffs = (0..=m)
        .map(|k| {
            let mut acc = Complex64::from(0.0);
            for (j, v) in values.iter().enumerate() {
                let w = if j == 0 || j == m { 0.5 } else { 1.0 };
                acc += v * (w * ((j * k) as f64 * PI / m as f64).cos());
            }
            let edge = if k == 0 || k == m { 0.5 } else { 1.0 };
            acc * (2.0 * edge / m as f64)
        })
        .collect();
    ChebSeries::y_plain(epsilon, coeffs)
}

/// Inverts the log operator through the explicit principal-value formula:
/// `I1(x) = -(1/(pi^2 sqrt(eps^2 - x^2))) PV int sqrt(eps^2 - y^2) u'(y)/(x - y) dy`
/// plus the constant-mode correction `I2 = a(u) / (pi log(eps/2) sqrt(eps^2 - x^2))`
/// with `a(u) = u(0) - (L I1)(0)`.
///
/// `u'` is expanded in `U_k` with `n` second-kind Gauss points.
pub fn soehngen_invert(
    u: impl Fn(f64) -> Complex64,
    du: impl Fn(f64) -> Complex64,
    epsilon: f64,
    n: usize,
) -> ChebSeries {
    let angles: Vec<f64> = (1..=n).map(|j| j as f64 * PI / (n + 1) as f64).collect();
    let samples: Vec<Complex64> = angles.iter().map(|a| du(epsilon * a.cos())).collect();
    let mut coeffs = vec![Complex64::from(0.0); n + 1];
    for k in 0..n {
        let mut e = Complex64::from(0.0);
        for (a, v) in angles.iter().zip(&samples) {
            e += v * (a.sin() * ((k + 1) as f64 * a).sin());
        }
        e *= 2.0 / (n + 1) as f64;
        coeffs[k + 1] = -epsilon / PI * e;
    }
    // (L I1)(0) = sum_j lambda_j c_j T_j(0)
    let l_at_zero: Complex64 = coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(j, c)| c * (log_eigenvalue(epsilon, j) * cheb_t(j, 0.0)))
        .sum();
    let a = u(0.0) - l_at_zero;
    coeffs[0] = a / log_eigenvalue(epsilon, 0);
    ChebSeries::x_weighted(epsilon, coeffs)
}

/// `PV int f(y) / (x - y) dy` over the window, for weighted inputs.
pub fn finite_hilbert(f: &ChebSeries) -> Result<ChebSeries> {
    let eps = f.epsilon;
    match f.basis {
        Basis::XWeighted => {
            // T_k / sqrt(1 - t^2) -> -pi U_{k-1}, with Jacobian 1/eps
            let u: Vec<Complex64> = f.coeffs.iter().skip(1).map(|c| c * (-PI / eps)).collect();
            Ok(ChebSeries::y_plain(eps, u_to_t(&u)))
        }
        Basis::UWeighted => {
            // sqrt(1 - t^2) U_k -> pi T_{k+1}, with Jacobian eps
            let mut c = vec![Complex64::from(0.0); f.len() + 1];
            for (k, v) in f.coeffs.iter().enumerate() {
                c[k + 1] = v * (PI * eps);
            }
            Ok(ChebSeries::y_plain(eps, c))
        }
        Basis::YPlain => Err(Error::InvalidArgument(
            "finite Hilbert transform needs a weighted series".into(),
        )),
    }
}

/// Rewrites `sum d_k U_k` as `sum c_k T_k`.
fn u_to_t(d: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![Complex64::from(0.0); d.len().max(1)];
    for (n, v) in d.iter().enumerate() {
        let mut j = n as isize;
        while j >= 0 {
            c[j as usize] += 2.0 * v;
            j -= 2;
        }
        if n % 2 == 0 {
            c[0] -= v;
        }
    }
    c
}

/// `<f, g> = int conj(f) g dy` for a weighted `f` and a plain series `g`.
pub fn x_inner(f: &ChebSeries, g: &ChebSeries) -> Result<Complex64> {
    f.require(Basis::XWeighted)?;
    g.require(Basis::YPlain)?;
    Ok(f.coeffs
        .iter()
        .zip(&g.coeffs)
        .enumerate()
        .map(|(k, (a, b))| a.conj() * b * chebyshev_mass(k))
        .sum())
}

/// `<f, g>` for a weighted `f` and a function `g`, by Gauss-Chebyshev quadrature
/// exact when `g` is a polynomial of degree below `nodes + 1 - len(f)`.
pub fn x_inner_fn(f: &ChebSeries, g: impl Fn(f64) -> Complex64, nodes: usize) -> Result<Complex64> {
    f.require(Basis::XWeighted)?;
    let w = PI / nodes as f64;
    Ok(gauss_nodes(nodes)
        .into_iter()
        .map(|s| clenshaw_t(&f.coeffs, s).conj() * g(f.epsilon * s) * w)
        .sum())
}
