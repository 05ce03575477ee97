//! Safeguarded Newton iteration on a sign-change bracket, plus real roots
//! of low-degree polynomials.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct RootOptions {
    /// Relative tolerance on the root location.
    pub rel_tol: f64,
    /// Absolute residual accepted as an exact hit.
    pub residual_tol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            residual_tol: 0.0,
            max_iter: 200,
        }
    }
}

/// Newton's method kept inside `[lo, hi]`; falls back to bisection whenever
/// the Newton step leaves the bracket or fails to halve the bracket width.
/// `f` returns the value and derivative.
pub fn safeguarded_newton<F>(mut f: F, lo: f64, hi: f64, opts: RootOptions) -> Result<f64>
where
    F: FnMut(f64) -> Result<(f64, f64)>,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let (fa, _) = f(a)?;
    let (fb, _) = f(b)?;
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Root(format!(
            "no sign change on [{a}, {b}]: f(a)={fa:e}, f(b)={fb:e}"
        )));
    }
    let increasing = fb > 0.0;
    let mut x = 0.5 * (a + b);
    let mut prev_width = b - a;

    for _ in 0..opts.max_iter {
        let (fx, dfx) = f(x)?;
        if fx.abs() <= opts.residual_tol || fx == 0.0 {
            return Ok(x);
        }
        if (fx > 0.0) == increasing {
            b = x;
        } else {
            a = x;
        }
        let width = b - a;
        if width <= opts.rel_tol * x.abs().max(1.0) {
            return Ok(0.5 * (a + b));
        }
        let newton = if dfx != 0.0 && dfx.is_finite() {
            x - fx / dfx
        } else {
            f64::NAN
        };
        let newton_ok = newton > a && newton < b && width < 0.75 * prev_width;
        let next = if newton_ok { newton } else { 0.5 * (a + b) };
        if (next - x).abs() <= opts.rel_tol * x.abs().max(1e-300) {
            return Ok(next);
        }
        prev_width = width;
        x = next;
    }
    Err(Error::Root(format!(
        "no convergence after {} iterations on [{a}, {b}]",
        opts.max_iter
    )))
}

/// A real polynomial root with its multiplicity (1 or 2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyRoot {
    pub value: f64,
    pub multiplicity: u8,
}

fn horner(coeffs: &[f64], x: f64) -> (f64, f64) {
    // coeffs are in increasing degree order
    let mut p = 0.0;
    let mut dp = 0.0;
    for &c in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

/// Real roots of a polynomial of degree <= 3 whose roots are all real
/// (the case for every Laplace-exponent equation handled in this crate).
/// Coefficients are in increasing degree order. Roots closer than
/// `merge_tol` (relative) are reported once with multiplicity 2.
pub fn real_roots(coeffs: &[f64], merge_tol: f64) -> Result<Vec<PolyRoot>> {
    let mut c: Vec<f64> = coeffs.to_vec();
    while c.len() > 1 && *c.last().unwrap() == 0.0 {
        c.pop();
    }
    let roots = match c.len() {
        0 | 1 => return Err(Error::Root("constant polynomial".into())),
        2 => vec![PolyRoot {
            value: -c[0] / c[1],
            multiplicity: 1,
        }],
        3 => quadratic(c[0], c[1], c[2], merge_tol)?,
        4 => cubic(&c, merge_tol)?,
        _ => return Err(Error::Root("degree above 3".into())),
    };
    Ok(roots)
}

fn quadratic(c0: f64, c1: f64, c2: f64, merge_tol: f64) -> Result<Vec<PolyRoot>> {
    let disc = c1 * c1 - 4.0 * c2 * c0;
    let scale = (c1 * c1).max((4.0 * c2 * c0).abs()).max(f64::MIN_POSITIVE);
    if disc < 0.0 && -disc > 1e-12 * scale {
        return Err(Error::Root(format!("complex roots (discriminant {disc:e})")));
    }
    let disc = disc.max(0.0);
    if disc <= (merge_tol * merge_tol) * scale {
        return Ok(vec![PolyRoot {
            value: -c1 / (2.0 * c2),
            multiplicity: 2,
        }]);
    }
    let sq = disc.sqrt();
    let t = -0.5 * (c1 + c1.signum_or_one() * sq);
    let r1 = t / c2;
    let r2 = if t != 0.0 { c0 / t } else { -r1 };
    let mut v = vec![r1, r2];
    v.sort_by(f64::total_cmp);
    Ok(v.into_iter()
        .map(|value| PolyRoot {
            value,
            multiplicity: 1,
        })
        .collect())
}

trait SignumOrOne {
    fn signum_or_one(self) -> f64;
}
impl SignumOrOne for f64 {
    fn signum_or_one(self) -> f64 {
        if self < 0.0 {
            -1.0
        } else {
            1.0
        }
    }
}

fn cubic(c: &[f64], merge_tol: f64) -> Result<Vec<PolyRoot>> {
    // Normalize to a monic cubic so the sign at -inf is negative.
    let lead = c[3];
    let m: Vec<f64> = c.iter().map(|v| v / lead).collect();
    let bound = 1.0 + m[..3].iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let crit = quadratic(m[1], 2.0 * m[2], 3.0, merge_tol);
    let opts = RootOptions {
        rel_tol: 1e-15,
        residual_tol: 0.0,
        max_iter: 300,
    };
    let eval = |x: f64| Ok(horner(&m, x));
    let scale = m.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));

    let crit = match crit {
        Ok(v) if v.len() == 2 => (v[0].value, v[1].value),
        _ => {
            // Monotone cubic: a single real root.
            let r = safeguarded_newton(eval, -bound, bound, opts)?;
            return Ok(vec![PolyRoot {
                value: r,
                multiplicity: 1,
            }]);
        }
    };
    let (c1, c2) = crit;
    let p1 = horner(&m, c1).0;
    let p2 = horner(&m, c2).0;
    let near_zero = |p: f64, x: f64| p.abs() <= merge_tol * scale * (1.0 + x.abs()).powi(3);

    let mut out = Vec::new();
    if near_zero(p1, c1) {
        out.push(PolyRoot {
            value: c1,
            multiplicity: 2,
        });
        out.push(PolyRoot {
            value: safeguarded_newton(eval, c2, bound, opts)?,
            multiplicity: 1,
        });
    } else if near_zero(p2, c2) {
        out.push(PolyRoot {
            value: safeguarded_newton(eval, -bound, c1, opts)?,
            multiplicity: 1,
        });
        out.push(PolyRoot {
            value: c2,
            multiplicity: 2,
        });
    } else if p1 > 0.0 && p2 < 0.0 {
        out.push(PolyRoot {
            value: safeguarded_newton(eval, -bound, c1, opts)?,
            multiplicity: 1,
        });
        out.push(PolyRoot {
            value: safeguarded_newton(eval, c1, c2, opts)?,
            multiplicity: 1,
        });
        out.push(PolyRoot {
            value: safeguarded_newton(eval, c2, bound, opts)?,
            multiplicity: 1,
        });
    } else {
        return Err(Error::Root("cubic has complex roots".into()));
    }
    Ok(out)
}
