#![allow(dead_code)]

use std::f64::consts::PI;

/// Tanh-sinh quadrature on `[a, b]`. The integrand receives the node and its
/// distances to both ends, computed without cancellation, so endpoint
/// singularities can be evaluated accurately.
pub fn tanh_sinh(f: impl Fn(f64, f64, f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let half = 0.5 * (b - a);
    let tmax = 3.5;
    let sample = |t: f64| -> f64 {
        let u = 0.5 * PI * t.sinh();
        let w = 0.5 * PI * t.cosh() / u.cosh().powi(2);
        // 1 - tanh(u) and 1 + tanh(u) without cancellation
        let e = (-2.0 * u.abs()).exp();
        let small = 2.0 * e / (1.0 + e);
        let (dl, dr) = if u >= 0.0 { (2.0 - small, small) } else { (small, 2.0 - small) };
        let (dl, dr) = (half * dl, half * dr);
        if dl <= 0.0 || dr <= 0.0 {
            return 0.0;
        }
        let x = if u >= 0.0 { b - dr } else { a + dl };
        let v = f(x, dl, dr) * w * half;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    let mut step = 0.5;
    let mut sum: f64 = {
        let n = (tmax / step) as i64;
        (-n..=n).map(|k| sample(k as f64 * step)).sum()
    };
    let mut estimate = sum * step;
    for _ in 0..12 {
        step *= 0.5;
        let n = (tmax / step) as i64;
        let added: f64 = (-n..=n).filter(|k| k % 2 != 0).map(|k| sample(k as f64 * step)).sum();
        sum += added;
        let next = sum * step;
        if (next - estimate).abs() <= tol * next.abs().max(1.0) {
            return next;
        }
        estimate = next;
    }
    estimate
}

/// `int_0^pi log|s - cos phi| g(phi) dphi`, split at the singular angle.
pub fn log_cosine_integral(s: f64, g: impl Fn(f64) -> f64) -> f64 {
    let phi0 = s.clamp(-1.0, 1.0).acos();
    // s - cos(phi) = 2 sin((phi + phi0)/2) sin((phi - phi0)/2)
    let integrand = |phi: f64, signed_gap: f64| {
        let prod = 2.0 * (0.5 * (phi + phi0)).sin() * (0.5 * signed_gap).sin();
        prod.abs().ln() * g(phi)
    };
    let left = tanh_sinh(|phi, _dl, dr| integrand(phi, -dr), 0.0, phi0, 1e-14);
    let right = tanh_sinh(|phi, dl, _dr| integrand(phi, dl), phi0, PI, 1e-14);
    left + right
}
