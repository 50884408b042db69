//! Small numeric helpers shared across modules (all `libm` based).

use libm::{fabs, log, log2, sqrt};

pub const LN2: f64 = core::f64::consts::LN_2;

/// Binary entropy in bits, with 0 log 0 = 0.
pub fn h2(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * log2(p) - (1.0 - p) * log2(1.0 - p)
}

/// `-x ln x` with the convention 0 ln 0 = 0.
pub fn neg_xlnx(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * log(x)
    }
}

/// Shannon entropy of an unnormalized-safe probability vector in nats.
pub fn entropy_nats(p: &[f64]) -> f64 {
    p.iter().map(|&x| neg_xlnx(x)).sum()
}

/// Shannon entropy in the given logarithm base.
pub fn entropy_base(p: &[f64], base: f64) -> f64 {
    entropy_nats(p) / log(base)
}

pub fn sqrt_clamped(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        sqrt(x)
    }
}

/// Maximizes a unimodal function on `[a, b]` by golden-section search.
/// Returns `(argmax, max)`.
pub fn golden_max(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> (f64, f64) {
    let r = (sqrt(5.0) - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut iter = 0;
    while fabs(b - a) > tol && iter < 400 {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
        iter += 1;
    }
    // the endpoints are candidates too: the maximum may sit on the boundary
    let mut best = (0.5 * (a + b), f(0.5 * (a + b)));
    for x in [a, b] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}

/// Bisection for a sign change of `f` on `[a, b]`.
pub fn bisect(mut a: f64, mut b: f64, tol: f64, f: impl Fn(f64) -> f64) -> Option<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Some(a);
    }
    if fb == 0.0 {
        return Some(b);
    }
    if (fa > 0.0) == (fb > 0.0) {
        return None;
    }
    for _ in 0..300 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 || (b - a) < tol {
            return Some(m);
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Some(0.5 * (a + b))
}

/// Compensated sum; exact-mode averages run over millions of terms.
pub fn kahan_sum(it: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for v in it {
        let y = v - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    s
}

/// Wilson score interval for `k` successes in `n` trials at z.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n)) / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn h2_values() {
        assert_eq!(h2(0.0), 0.0);
        assert!((h2(0.5) - 1.0).abs() < 1e-15);
        // 0.11 -> 0.49991596...
        assert!((h2(0.11) - 0.499_915_958_164_528_8).abs() < 1e-12);
    }

    #[test]
    fn golden_finds_interior_and_boundary() {
        let (x, _) = golden_max(0.0, 3.0, 1e-10, |x| -(x - 1.2) * (x - 1.2));
        assert!((x - 1.2).abs() < 1e-6);
        let (x, _) = golden_max(-5.0, 0.0, 1e-10, |x| x);
        assert!(x.abs() < 1e-6);
    }

    #[test]
    fn wilson_contains_estimate() {
        let (lo, hi) = wilson(10, 1000, 1.96);
        assert!(lo < 0.01 && 0.01 < hi);
        assert_eq!(wilson(0, 0, 1.96), (0.0, 1.0));
    }
}
