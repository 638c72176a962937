//! Bracketed root finding for increasing scalar functions.

use crate::error::{Error, Result};

/// Solves `f(x) = 0` for `f` increasing on `[lo, hi]`.
///
/// Uses secant steps inside the current bracket and falls back to bisection
/// whenever a secant step leaves the bracket or fails to halve it. Iteration
/// stops once the bracket is narrower than `tol`; the returned point is then
/// polished by further secant steps until the bracket stops shrinking, so the
/// result is usually accurate to a few ulps.
pub fn solve_increasing<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if !(fa.is_finite() && fb.is_finite()) {
        return Err(Error::RootFinding("non-finite value at bracket end".into()));
    }
    if fa > 0.0 || fb < 0.0 {
        return Err(Error::RootFinding(format!("no bracket on [{lo:e}, {hi:e}]: f = ({fa:e}, {fb:e})")));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    let mut reached = false;
    let mut extra = 0;
    for _ in 0..400 {
        let width = b - a;
        if width <= tol {
            reached = true;
        }
        if reached {
            extra += 1;
            if extra > 8 {
                break;
            }
        }
        let mut x = a - fa * (b - a) / (fb - fa);
        if !(x > a && x < b) {
            x = 0.5 * (a + b);
        }
        if x <= a || x >= b {
            break;
        }
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::RootFinding("non-finite value inside bracket".into()));
        }
        if fx == 0.0 {
            return Ok(x);
        }
        if fx < 0.0 {
            a = x;
            fa = fx;
        } else {
            b = x;
            fb = fx;
        }
        // a secant step that keeps one end pinned converges slowly; bisect then
        if b - a > 0.5 * width && !reached {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let fm = f(m);
            if fm == 0.0 {
                return Ok(m);
            }
            if fm < 0.0 {
                a = m;
                fa = fm;
            } else {
                b = m;
                fb = fm;
            }
        }
    }
    if b - a > tol {
        return Err(Error::RootFinding(format!("bracket width {:e} above tolerance", b - a)));
    }
    Ok(if -fa < fb { a } else { b })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_root_exact() {
        let x = solve_increasing(|x| 2.5 * x - 1.0, -1.0, 1.0, 1e-12).unwrap();
        assert!((x - 0.4).abs() < 1e-15);
    }

    #[test]
    fn cubic_root() {
        let x = solve_increasing(|x| x * x * x + x - 3.0, 0.0, 3.0, 1e-12).unwrap();
        assert!((x * x * x + x - 3.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_missing_bracket() {
        assert!(solve_increasing(|x| x + 5.0, 0.0, 1.0, 1e-12).is_err());
    }
}
