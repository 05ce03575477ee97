#![allow(dead_code)]

/// Composite Simpson rule on `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut total = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        total += w * f(a + h * i as f64);
    }
    total * h / 3.0
}

/// Limit of `d(eps)` as `eps -> 0` from one-sided quotients at `eps, eps/2, eps/4`
/// (two Richardson passes, error `O(eps^3)`).
pub fn one_sided_limit(d: impl Fn(f64) -> f64, eps: f64) -> f64 {
    let (a, b, c) = (d(eps), d(eps / 2.0), d(eps / 4.0));
    let ab = 2.0 * b - a;
    let bc = 2.0 * c - b;
    (4.0 * bc - ab) / 3.0
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
