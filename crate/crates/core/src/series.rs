//! Closed forms for the cosine lattice sums that appear when the transverse-mode
//! expansion of the same-line Green function is resummed.

use std::f64::consts::PI;
use std::sync::OnceLock;

const ZETA3: f64 = 1.202_056_903_159_594_3;
const ZETA5: f64 = 1.036_927_755_143_369_9;

const ZETA_TERMS: usize = 64;

/// `zeta(2j)` for `j = 0..ZETA_TERMS` (index 0 unused).
fn even_zeta() -> &'static [f64; ZETA_TERMS] {
    static TABLE: OnceLock<[f64; ZETA_TERMS]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0; ZETA_TERMS];
        t[1] = PI * PI / 6.0;
        t[2] = PI.powi(4) / 90.0;
        for (j, slot) in t.iter_mut().enumerate().skip(3) {
            let s = 2 * j as i32;
            let cutoff = 200usize;
            let mut acc = 0.0;
            for n in (1..=cutoff).rev() {
                acc += (n as f64).powi(-s);
            }
            let nn = cutoff as f64;
            // Euler-Maclaurin tail
            acc += nn.powi(1 - s) / (s as f64 - 1.0) - 0.5 * nn.powi(-s)
                + s as f64 / 12.0 * nn.powi(-s - 1);
            *slot = acc;
        }
        t
    })
}

/// `sum_{n>=1} cos(n x) / n^order` for `order` in {1, 3, 5}.
///
/// Order 1 is `-log(2 |sin(x/2)|)` and is singular at multiples of `2 pi`.
pub fn cosine_sum(order: u32, x: f64) -> f64 {
    // reduce to [0, pi] by periodicity and evenness
    let mut x = x.rem_euclid(2.0 * PI);
    if x > PI {
        x = 2.0 * PI - x;
    }
    match order {
        1 => -(2.0 * (0.5 * x).sin()).ln(),
        3 => odd_order_sum(1, x),
        5 => odd_order_sum(2, x),
        _ => panic!("cosine_sum: unsupported order {order}"),
    }
}

/// Power series of `Re Li_{2p+1}(e^{ix})` about `x = 0`, valid for `|x| < 2 pi`.
fn odd_order_sum(p: u32, x: f64) -> f64 {
    let ax = x.abs();
    let x2 = ax * ax;
    let (head, harmonic) = match p {
        1 => (ZETA3, 1.5),
        2 => (ZETA5 - 0.5 * ZETA3 * x2, 25.0 / 12.0),
        _ => unreachable!(),
    };
    if ax == 0.0 {
        return head;
    }
    let two_p = 2 * p as usize;
    let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
    let x2p = ax.powi(two_p as i32);
    let fact2p: f64 = (1..=two_p).map(|k| k as f64).product();
    let log_term = sign * x2p / fact2p * (harmonic - ax.ln());

    let zeta = even_zeta();
    let ratio = (ax / (2.0 * PI)).powi(2);
    let mut power = 1.0;
    let mut tail = 0.0;
    for (j, z2j) in zeta.iter().enumerate().skip(1) {
        power *= ratio;
        // (2j - 1)! / (2p + 2j)! = 1 / prod_{k = 2j}^{2p + 2j} k
        let denom: f64 = (2 * j..=two_p + 2 * j).map(|k| k as f64).product();
        let term = 2.0 * sign * z2j * power * x2p / denom;
        tail += term;
        if term.abs() < 1e-18 * (head.abs() + tail.abs()) {
            break;
        }
    }
    head + log_term + tail
}
