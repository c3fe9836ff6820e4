//! Neumann Green function of the cell on the crack lines `x = 0` and `x = 1`,
//! the pencil kernel built from it, and its splitting into a logarithmic part,
//! a rank-one pole at the tracked eigenvalue and a smooth remainder.
//!
//! The Green function is expanded in transverse cosines,
//! `G(x, y; x', y') = sum_n phi_n(y) phi_n(y') g_n(x, x')`, where `g_n` is the
//! Neumann Green function of `-d^2/dx^2 - (z - nu_n)` on `[0, 1]`. On the
//! crack lines only two 1D values are needed per `n`: the same-line value
//! `g_n(0,0) = g_n(1,1)` and the cross-line value `g_n(0,1) = g_n(1,0)`.
//!
//! The same-line series converges only like `1/n`. Its large-`n` behaviour
//! `1/q + z/(2q^3) + 3z^2/(8q^5)` with `q = n pi / H` is summed in closed form
//! (a log-sine plus two Clausen-type sums), which isolates the
//! `-(1/pi) log|y - y'|` singularity exactly and leaves a remainder decaying
//! like `n^-7`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::cell::{
    assert_simple, cosine_weight, modes_below, transverse_energy, transverse_mode, CellSpec,
    EigenPair, ModeIndex, DEGENERACY_TOL,
};
use crate::error::{Error, Result};
use crate::series::cosine_sum;

/// Coefficient of `log|y - y'|` in the pencil kernel. Each of the two same-line
/// Green functions contributes `-1/pi` (boundary image doubling).
pub const LOG_COEFFICIENT: f64 = -2.0 / PI;

/// `|sin k|` or `|sinh kappa|` below this is treated as a resonance.
pub const RESONANCE_TOL: f64 = 1e-12;

/// Below this the junction factor `|1 - e^{i theta} (-1)^m|` counts as zero.
pub const DECOUPLING_TOL: f64 = 1e-12;

/// Below this distance from a pole the pole-free 1D values switch to series.
const POLE_SERIES_RADIUS: f64 = 0.1;

/// Real spectral parameter `z`, away from the Neumann spectrum of the cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralParam(f64);

impl SpectralParam {
    /// Rejects `z` within `1e-12 max(1, |z|)` of a cell eigenvalue, except
    /// for the eigenvalue of `allowed` (the tracked mode, whose pole is
    /// handled analytically).
    pub fn checked(height: f64, z: f64, allowed: Option<ModeIndex>) -> Result<Self> {
        if !z.is_finite() {
            return Err(Error::InvalidArgument(format!("spectral parameter {z}")));
        }
        let tol = DEGENERACY_TOL * z.abs().max(1.0);
        for (mode, e) in modes_below(height, z + 2.0 * tol) {
            if Some(mode) != allowed && (e - z).abs() <= tol {
                return Err(Error::Resonance { nu: transverse_energy(height, mode.n), z });
            }
        }
        Ok(Self(z))
    }

    /// Unchecked constructor; resonances surface later as [`Error::Resonance`].
    pub fn new(z: f64) -> Self {
        Self(z)
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Green function of `-d^2/dx^2 - (z - nu)` on `[0, 1]` with Neumann ends.
///
/// For `nu > z`, with `kappa = sqrt(nu - z)`:
/// `cosh(kappa x<) cosh(kappa (1 - x>)) / (kappa sinh kappa)`.
/// For `z > nu` the analytic continuation `kappa = i k` gives
/// `-cos(k x<) cos(k (1 - x>)) / (k sin k)`.
pub fn green1d(nu: f64, z: f64, x: f64, xp: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&xp) {
        return Err(Error::InvalidArgument(format!("green1d points ({x}, {xp}) outside [0, 1]")));
    }
    let (lo, hi) = if x <= xp { (x, xp) } else { (xp, x) };
    let w = z - nu;
    if w < 0.0 {
        let kappa = (-w).sqrt();
        if kappa.sinh().abs() < RESONANCE_TOL {
            return Err(Error::Resonance { nu, z });
        }
        // cosh(a) cosh(b) / sinh(a + b + d) without overflow
        let a = kappa * lo;
        let b = kappa * (1.0 - hi);
        let num = (1.0 + (-2.0 * a).exp()) * (1.0 + (-2.0 * b).exp());
        let den = 2.0 * kappa * (-(-2.0 * kappa).exp_m1());
        Ok((a + b - kappa).exp() * num / den)
    } else {
        let k = w.sqrt();
        if k.sin().abs() < RESONANCE_TOL {
            return Err(Error::Resonance { nu, z });
        }
        Ok(-(k * lo).cos() * (k * (1.0 - hi)).cos() / (k * k.sin()))
    }
}

/// Values of the 1D Green function on the cell edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeGreen {
    /// `g(0, 0) = g(1, 1)`.
    pub same: f64,
    /// `g(0, 1) = g(1, 0)`.
    pub cross: f64,
}

/// [`green1d`] at `x, x'` in {0, 1}.
pub fn edge_green(nu: f64, z: f64) -> Result<EdgeGreen> {
    Ok(EdgeGreen {
        same: green1d(nu, z, 0.0, 0.0)?,
        cross: green1d(nu, z, 0.0, 1.0)?,
    })
}

/// Edge values with the simple pole at `z = nu + (m pi)^2` removed, i.e.
/// `g - a_m (+-1) / ((m pi)^2 + nu - z)`; analytic at that pole.
pub fn edge_green_regular(nu: f64, z: f64, m: u32) -> Result<EdgeGreen> {
    let w = z - nu;
    let w0 = (m as f64 * PI).powi(2);
    let a = cosine_weight(m);
    let parity = if m % 2 == 0 { 1.0 } else { -1.0 };
    if m == 0 {
        if w.abs() >= POLE_SERIES_RADIUS {
            let g = edge_green(nu, z)?;
            return Ok(EdgeGreen { same: g.same + 1.0 / w, cross: g.cross + 1.0 / w });
        }
        return Ok(EdgeGreen {
            same: cot_defect(w),
            cross: -sine_defect(w) * sinc_inverse(w),
        });
    }
    let t = w.max(0.0).sqrt() - m as f64 * PI;
    if w <= 0.0 || t.abs() >= POLE_SERIES_RADIUS {
        let g = edge_green(nu, z)?;
        return Ok(EdgeGreen {
            same: g.same - a / (w0 - w),
            cross: g.cross - a * parity / (w0 - w),
        });
    }
    let mp = m as f64 * PI;
    let denom = (mp + t) * (2.0 * mp + t);
    let same = (1.0 + t * cot_defect(t * t) * (2.0 * mp + t)) / denom;
    let cross = parity * (1.0 - 2.0 * t * (mp + t) * sine_defect(t * t)) * sinc_inverse(t * t) / denom;
    Ok(EdgeGreen { same, cross })
}

/// `(1 - t cot t) / t^2` as an analytic function of `w = t^2` (any sign).
fn cot_defect(w: f64) -> f64 {
    if w.abs() < 1e-2 {
        // 1/3 + w/45 + 2w^2/945 + w^3/4725 + 2w^4/93555
        return 1.0 / 3.0 + w * (1.0 / 45.0 + w * (2.0 / 945.0 + w * (1.0 / 4725.0 + w * 2.0 / 93555.0)));
    }
    if w > 0.0 {
        let t = w.sqrt();
        (1.0 - t / t.tan()) / w
    } else {
        let k = (-w).sqrt();
        (k / k.tanh() - 1.0) / (-w)
    }
}

/// `(t - sin t) / t^3` as an analytic function of `w = t^2`.
fn sine_defect(w: f64) -> f64 {
    if w.abs() < 1e-2 {
        return 1.0 / 6.0 - w * (1.0 / 120.0 - w * (1.0 / 5040.0 - w * (1.0 / 362880.0 - w / 39916800.0)));
    }
    if w > 0.0 {
        let t = w.sqrt();
        (t - t.sin()) / (t * w)
    } else {
        let k = (-w).sqrt();
        (k.sinh() - k) / (k * (-w))
    }
}

/// `t / sin t` as an analytic function of `w = t^2`.
fn sinc_inverse(w: f64) -> f64 {
    if w.abs() < 1e-8 {
        return 1.0 + w / 6.0;
    }
    if w > 0.0 {
        let t = w.sqrt();
        t / t.sin()
    } else {
        let k = (-w).sqrt();
        k / k.sinh()
    }
}

/// `(1 - w)^(-1/2) - 1 - w/2 - 3w^2/8`, by its binomial series when `w` is small.
fn inverse_sqrt_defect(w: f64) -> f64 {
    if w.abs() >= 0.25 {
        return (1.0 - w).powf(-0.5) - 1.0 - w * (0.5 + 0.375 * w);
    }
    let mut coeff = 5.0 / 16.0;
    let mut power = w * w * w;
    let mut acc = 0.0;
    for k in 3..200 {
        let term = coeff * power;
        acc += term;
        if term.abs() <= 1e-18 * acc.abs() {
            break;
        }
        coeff *= (2 * k + 1) as f64 / (2 * k + 2) as f64;
        power *= w;
    }
    acc
}

/// Transverse-mode data of the kernel at one spectral parameter.
///
/// Holds the n = 0 same-line value, the same-line remainders after the three
/// resummed asymptotic terms, and the (exponentially decaying) cross-line
/// values. If a mode is regularized, its pole is removed from both 1D factors.
#[derive(Debug, Clone)]
pub struct KernelSeries {
    height: f64,
    z: f64,
    same_zero: f64,
    /// `rem[n - 1]` for `n >= 1`.
    rem: Vec<f64>,
    /// `cross[n]` for `n >= 0`.
    cross: Vec<f64>,
}

impl KernelSeries {
    pub fn new(height: f64, z: f64, regularized: Option<ModeIndex>) -> Result<Self> {
        Self::with_min_terms(height, z, regularized, 64)
    }

    /// As [`KernelSeries::new`] with at least `min_terms` same-line remainder terms.
    pub fn with_min_terms(height: f64, z: f64, regularized: Option<ModeIndex>, min_terms: u32) -> Result<Self> {
        let one_d = |n: u32| -> Result<EdgeGreen> {
            let nu = transverse_energy(height, n);
            match regularized {
                Some(mode) if mode.n == n => edge_green_regular(nu, z, mode.m),
                _ => edge_green(nu, z),
            }
        };
        let same_zero = one_d(0)?.same;

        // remainder terms decay like (2/H) 5|z|^3 / (16 q^7); tail ~ that / (6 N^6) * N
        let amp = (2.0 / height) * 5.0 * z.abs().powi(3) * (height / PI).powi(7) / 16.0;
        let tail_cut = (amp / 6.0 / 1e-17).powf(1.0 / 6.0).ceil() as u32;
        let resonant_cut = (2.0 * z.abs().sqrt() * height / PI).ceil() as u32 + 1;
        let n_same = min_terms.max(tail_cut).max(resonant_cut).max(regularized.map_or(0, |m| m.n + 1));

        let mut rem = Vec::with_capacity(n_same as usize);
        for n in 1..=n_same {
            let q = n as f64 * PI / height;
            let w = z / (q * q);
            let asymptotic = (1.0 + w * (0.5 + w * 0.375)) / q;
            let is_reg = regularized.is_some_and(|m| m.n == n);
            let r = if !is_reg && w.abs() < 0.25 {
                // g = coth(kappa)/kappa; split off the exponentially small part
                let kappa = (q * q - z).sqrt();
                inverse_sqrt_defect(w) / q + 2.0 / (2.0 * kappa).exp_m1() / kappa
            } else {
                one_d(n)?.same - asymptotic
            };
            rem.push(r);
        }

        let mut cross = Vec::new();
        let mut n = 0u32;
        loop {
            let nu = transverse_energy(height, n);
            let g = one_d(n)?.cross;
            cross.push(g);
            let past_pole = regularized.map_or(true, |m| n >= m.n);
            if nu > z && past_pole && (nu - z).sqrt() > 40.0 {
                break;
            }
            n += 1;
        }
        Ok(Self { height, z, same_zero, rem, cross })
    }

    fn angle(&self, y: f64) -> f64 {
        PI * (y + 0.5 * self.height) / self.height
    }

    /// Same-line Green function plus `(1/pi) log|y - y'|`; finite on the diagonal.
    pub fn same_line_smooth(&self, y: f64, yp: f64) -> f64 {
        let h = self.height;
        let s1 = self.angle(y);
        let s2 = self.angle(yp);
        let diff = s1 - s2;
        let sum = s1 + s2;
        let mut acc = self.same_zero / h;
        // remainder series
        let (c1, c2) = (s1.cos(), s2.cos());
        let (mut a_prev, mut a_cur) = (1.0, c1);
        let (mut b_prev, mut b_cur) = (1.0, c2);
        let mut series = 0.0;
        for r in &self.rem {
            series += r * a_cur * b_cur;
            let a_next = 2.0 * c1 * a_cur - a_prev;
            let b_next = 2.0 * c2 * b_cur - b_prev;
            a_prev = a_cur;
            a_cur = a_next;
            b_prev = b_cur;
            b_cur = b_next;
        }
        acc += 2.0 / h * series;
        acc += self.closed_form_part(diff, sum);
        acc
    }

    /// Resummed asymptotic terms, with the `log|y - y'|` singularity removed.
    fn closed_form_part(&self, diff: f64, sum: f64) -> f64 {
        let h = self.height;
        let z = self.z;
        let half = 0.5 * diff;
        let log_sinc = if half.abs() < 1e-8 { 0.0 } else { (half.sin() / half).abs().ln() };
        let log_part = -((PI / h).ln() + log_sinc + (2.0 * (0.5 * sum).sin()).abs().ln()) / PI;
        let c3 = z * h * h / (2.0 * PI.powi(3));
        let c5 = 3.0 * z * z * h.powi(4) / (8.0 * PI.powi(5));
        log_part
            + c3 * (cosine_sum(3, diff) + cosine_sum(3, sum))
            + c5 * (cosine_sum(5, diff) + cosine_sum(5, sum))
    }

    /// Cross-line Green function `G(0, y; 1, y')`.
    pub fn cross_line(&self, y: f64, yp: f64) -> f64 {
        self.cross
            .iter()
            .enumerate()
            .map(|(n, g)| transverse_mode(self.height, n as u32, y) * transverse_mode(self.height, n as u32, yp) * g)
            .sum()
    }

    pub fn same_line_terms(&self) -> usize {
        self.rem.len()
    }

    /// Smooth part of the pencil kernel, `2 S_smooth - 2 cos(theta) C`, on a node set.
    pub fn smooth_matrix(&self, theta: f64, ys: &[f64]) -> DMatrix<f64> {
        let h = self.height;
        let np = ys.len();
        let angles: Vec<f64> = ys.iter().map(|&y| self.angle(y)).collect();

        // cosine tables by recurrence
        let nt = self.rem.len();
        let mut cosines = DMatrix::<f64>::zeros(np, nt);
        for (p, &s) in angles.iter().enumerate() {
            let c = s.cos();
            let (mut prev, mut cur) = (1.0, c);
            for n in 0..nt {
                cosines[(p, n)] = cur;
                let next = 2.0 * c * cur - prev;
                prev = cur;
                cur = next;
            }
        }
        let mut weighted = cosines.clone();
        for n in 0..nt {
            let r = 2.0 / h * self.rem[n];
            weighted.column_mut(n).scale_mut(r);
        }
        let same_series = &weighted * cosines.transpose();

        let nc = self.cross.len();
        let mut modes = DMatrix::<f64>::zeros(np, nc);
        for (p, &y) in ys.iter().enumerate() {
            for n in 0..nc {
                modes[(p, n)] = transverse_mode(h, n as u32, y);
            }
        }
        let mut mw = modes.clone();
        for n in 0..nc {
            mw.column_mut(n).scale_mut(self.cross[n]);
        }
        let cross = &mw * modes.transpose();

        let cos_t = theta.cos();
        DMatrix::from_fn(np, np, |p, q| {
            let same = self.same_zero / h
                + same_series[(p, q)]
                + self.closed_form_part(angles[p] - angles[q], angles[p] + angles[q]);
            2.0 * same - 2.0 * cos_t * cross[(p, q)]
        })
    }
}

fn bloch_kernel(same: f64, cross: f64, theta: f64) -> Complex64 {
    let phase = Complex64::from_polar(1.0, theta);
    // G(0,0) + G(1,1) - e^{i theta} G(0,1) - e^{-i theta} G(1,0)
    Complex64::from(2.0 * same) - phase * cross - phase.conj() * cross
}

/// The pencil kernel `K(y, y'; z)` for quasimomentum `theta`, `y != y'`.
pub fn kernel_k(cell: &CellSpec, theta: f64, z: SpectralParam, y: f64, yp: f64) -> Result<Complex64> {
    if y == yp {
        return Err(Error::SingularPoint(y));
    }
    let eps = cell.epsilon();
    if y.abs() > eps || yp.abs() > eps {
        return Err(Error::InvalidArgument(format!("kernel points ({y}, {yp}) outside the window")));
    }
    let series = KernelSeries::new(cell.height(), z.value(), None)?;
    let same = series.same_line_smooth(y, yp) - (y - yp).abs().ln() / PI;
    Ok(bloch_kernel(same, series.cross_line(y, yp), theta))
}

/// `K = c_log log|y - y'| + conj(u_theta(y)) u_theta(y') / (E - z) + R(y, y'; z)`.
#[derive(Debug, Clone)]
pub struct KernelDecomposition {
    pub log_coefficient: f64,
    pub mode: ModeIndex,
    pub pole_mode: EigenPair,
    theta: f64,
    height: f64,
}

/// Splits the kernel of `cell` at quasimomentum `theta` about the simple
/// eigenvalue of `mode`.
pub fn decompose(cell: &CellSpec, theta: f64, mode: ModeIndex) -> Result<KernelDecomposition> {
    let gap_window = 4.0 * cell.eigenvalue(mode).max(1.0);
    assert_simple(cell, mode, gap_window)?;
    Ok(KernelDecomposition {
        log_coefficient: LOG_COEFFICIENT,
        mode,
        pole_mode: cell.with_mode(mode).eigenpair(),
        theta,
        height: cell.height(),
    })
}

/// `1 - e^{i theta} (-1)^m`, snapped to exactly zero when it vanishes up to round-off.
pub fn junction_factor(mode: ModeIndex, theta: f64) -> Complex64 {
    let parity = if mode.m % 2 == 0 { 1.0 } else { -1.0 };
    let factor = Complex64::from(1.0) - Complex64::from_polar(parity, theta);
    if factor.norm() < DECOUPLING_TOL {
        Complex64::from(0.0)
    } else {
        factor
    }
}

/// `u(0, y) - e^{i theta} u(1, y)` for `mode`.
pub fn bloch_trace(height: f64, mode: ModeIndex, theta: f64, y: f64) -> Complex64 {
    junction_factor(mode, theta) * (cosine_weight(mode.m).sqrt() * transverse_mode(height, mode.n, y))
}

impl KernelDecomposition {
    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn energy(&self) -> f64 {
        self.pole_mode.energy
    }

    /// `u_theta(y) = u(0, y) - e^{i theta} u(1, y)`.
    pub fn pole_trace(&self, y: f64) -> Complex64 {
        bloch_trace(self.height, self.mode, self.theta, y)
    }

    /// Residue kernel `conj(u_theta(y)) u_theta(y')`.
    pub fn residue(&self, y: f64, yp: f64) -> Complex64 {
        self.pole_trace(y).conj() * self.pole_trace(yp)
    }

    pub fn series(&self, z: f64) -> Result<KernelSeries> {
        KernelSeries::new(self.height, z, Some(self.mode))
    }

    /// Smooth remainder `R(y, y'; z)`, defined on the diagonal as well.
    pub fn smooth(&self, y: f64, yp: f64, z: f64) -> Result<Complex64> {
        let series = self.series(z)?;
        Ok(bloch_kernel(series.same_line_smooth(y, yp), series.cross_line(y, yp), self.theta))
    }

    /// Full kernel reassembled from the three parts.
    pub fn kernel(&self, y: f64, yp: f64, z: f64) -> Result<Complex64> {
        if y == yp {
            return Err(Error::SingularPoint(y));
        }
        let pole = self.residue(y, yp) / (self.energy() - z);
        Ok(self.smooth(y, yp, z)? + self.log_coefficient * (y - yp).abs().ln() + pole)
    }
}
