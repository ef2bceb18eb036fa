//! Bounded scalar minimization by Brent's golden-section / parabolic hybrid.

use crate::error::Result;

/// Golden section ratio (3 - sqrt(5)) / 2.
const GOLDEN: f64 = 0.381_966_011_250_105_15;

#[derive(Debug, Clone, Copy)]
pub struct Minimum {
    pub x: f64,
    pub fx: f64,
    /// Half-width of the final bracket.
    pub bracket: f64,
    pub evaluations: usize,
}

/// Minimize `f` on `[lo, hi]`, stopping when the bracket half-width falls
/// below `xtol` (or the floating-point resolution at the current point).
/// Unimodality is assumed; for a convex `f` the global minimum is returned.
pub fn brent<F>(mut f: F, lo: f64, hi: f64, xtol: f64, max_iter: usize) -> Result<Minimum>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo.min(hi), lo.max(hi));
    let mut x = a + GOLDEN * (b - a);
    let (mut w, mut v) = (x, x);
    let mut fx = f(x)?;
    let (mut fw, mut fv) = (fx, fx);
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut evaluations = 1;

    for _ in 0..max_iter {
        let m = 0.5 * (a + b);
        let tol1 = 1e-11 * x.abs() + xtol / 3.0;
        let tol2 = 2.0 * tol1;
        if (x - m).abs() <= tol2 - 0.5 * (b - a) {
            break;
        }
        let mut golden = true;
        if e.abs() > tol1 {
            // parabola through x, w, v
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            if p.abs() < (0.5 * q * e).abs() && p > q * (a - x) && p < q * (b - x) {
                e = d;
                d = p / q;
                let u = x + d;
                if u - a < tol2 || b - u < tol2 {
                    d = if x < m { tol1 } else { -tol1 };
                }
                golden = false;
            }
        }
        if golden {
            e = if x < m { b - x } else { a - x };
            d = GOLDEN * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u)?;
        evaluations += 1;
        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Ok(Minimum {
        x,
        fx,
        bracket: 0.5 * (b - a),
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_parabola_vertex() {
        let m = brent(|x| Ok((x - 0.3).powi(2) + 1.0), 0.0, 1.0, 1e-10, 200).unwrap();
        assert!((m.x - 0.3).abs() < 1e-7);
        assert!((m.fx - 1.0).abs() < 1e-14);
    }

    #[test]
    fn boundary_minimum_is_approached() {
        let m = brent(Ok, 0.0, 1.0, 1e-10, 500).unwrap();
        assert!(m.x < 1e-8);
    }

    #[test]
    fn non_quadratic_convex() {
        let m = brent(
            |x: f64| Ok((x - 0.8).abs().powf(1.5) + x.exp()),
            0.0,
            1.0,
            1e-10,
            500,
        )
        .unwrap();
        // derivative: 1.5*sqrt(0.8-x) = exp(x) => x ~ 0.0...
        let g = |x: f64| (x - 0.8).abs().powf(1.5) + x.exp();
        for probe in [m.x - 1e-4, m.x + 1e-4] {
            assert!(g(probe) >= m.fx);
        }
    }
}
