//! Adaptive Gauss-Kronrod quadrature over the real line for integrands given in
//! log-weighted form `exp(log_w(x)) * m(x)`.
//!
//! The line is compactified with `x = tan(theta)`. Every panel factors out the
//! largest log-weight among its nodes before exponentiating, so integrands whose
//! magnitude is far below `f64::MIN_POSITIVE` are still resolved.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::FRAC_PI_2;

use crate::error::{ReadoutError, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    /// Target error relative to the integral of `|integrand|`.
    pub rel_tol: f64,
    /// Accept a non-converged result only if its error is below this.
    pub fail_tol: f64,
    pub max_panels: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            fail_tol: 1e-9,
            max_panels: 6000,
        }
    }
}

/// An integral of `K` components sharing one log-weight, stored as
/// `exp(shift) * value`.
#[derive(Debug, Clone, Copy)]
pub struct Scaled<const K: usize> {
    pub shift: f64,
    pub value: [f64; K],
    pub error: [f64; K],
    pub l1: [f64; K],
}

impl<const K: usize> Scaled<K> {
    pub fn zero() -> Self {
        Self {
            shift: f64::NEG_INFINITY,
            value: [0.0; K],
            error: [0.0; K],
            l1: [0.0; K],
        }
    }

    pub fn component(&self, k: usize) -> f64 {
        if self.shift == f64::NEG_INFINITY {
            0.0
        } else {
            self.value[k] * self.shift.exp()
        }
    }

    /// Natural log of component `k`, assumed positive.
    pub fn ln_component(&self, k: usize) -> f64 {
        self.shift + self.value[k].ln()
    }

    /// Largest error relative to the absolute integral, over all components.
    pub fn relative_error(&self) -> f64 {
        (0..K)
            .map(|k| {
                if self.l1[k] > 0.0 {
                    self.error[k] / self.l1[k]
                } else {
                    0.0
                }
            })
            .fold(0.0, f64::max)
    }

    /// Ratio `component(k) / component(0)` without leaving the scaled frame.
    pub fn ratio(&self, k: usize) -> f64 {
        self.value[k] / self.value[0]
    }

    fn rebase(&mut self, new_shift: f64) {
        if self.shift == f64::NEG_INFINITY {
            self.shift = new_shift;
            return;
        }
        let f = (self.shift - new_shift).exp();
        for k in 0..K {
            self.value[k] *= f;
            self.error[k] *= f;
            self.l1[k] *= f;
        }
        self.shift = new_shift;
    }

    pub(crate) fn accumulate(&mut self, other: &Scaled<K>, sign: f64) {
        if other.shift == f64::NEG_INFINITY {
            return;
        }
        if other.shift > self.shift {
            self.rebase(other.shift);
        }
        let f = (other.shift - self.shift).exp();
        for k in 0..K {
            self.value[k] += sign * f * other.value[k];
            self.error[k] = (self.error[k] + sign * f * other.error[k]).max(0.0);
            self.l1[k] += sign * f * other.l1[k];
        }
    }
}

/// Sum a finite collection of weighted points, `sum_i exp(log_w_i) * m_i`.
pub fn sum_points<const K: usize>(points: impl IntoIterator<Item = (f64, [f64; K])>) -> Scaled<K> {
    let points: Vec<(f64, [f64; K])> = points
        .into_iter()
        .filter(|(lw, _)| *lw > f64::NEG_INFINITY)
        .collect();
    let shift = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let mut out = Scaled::zero();
    if shift == f64::NEG_INFINITY {
        return out;
    }
    out.shift = shift;
    for (lw, m) in points {
        let w = (lw - shift).exp();
        for ((v, l1), mk) in out.value.iter_mut().zip(out.l1.iter_mut()).zip(m) {
            *v += w * mk;
            *l1 += (w * mk).abs();
        }
    }
    for k in 0..K {
        out.error[k] = out.l1[k] * 1e-16 * 4.0;
    }
    out
}

struct Panel<const K: usize> {
    a: f64,
    b: f64,
    result: Scaled<K>,
    key: f64,
}

impl<const K: usize> PartialEq for Panel<K> {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}
impl<const K: usize> Eq for Panel<K> {}
impl<const K: usize> PartialOrd for Panel<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const K: usize> Ord for Panel<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key.total_cmp(&other.key)
    }
}

fn gauss_kronrod<const K: usize, F>(f: &F, a: f64, b: f64) -> Scaled<K>
where
    F: Fn(f64) -> (f64, [f64; K]),
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut nodes = [(f64::NEG_INFINITY, [0.0; K]); 15];
    for j in 0..7 {
        let dx = h * XGK[j];
        nodes[2 * j] = f(c - dx);
        nodes[2 * j + 1] = f(c + dx);
    }
    nodes[14] = f(c);
    let shift = nodes
        .iter()
        .map(|n| n.0)
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return Scaled::zero();
    }
    let weight = |n: &(f64, [f64; K]), k: usize| -> f64 {
        if n.0 == f64::NEG_INFINITY {
            0.0
        } else {
            (n.0 - shift).exp() * n.1[k]
        }
    };
    let mut out = Scaled {
        shift,
        value: [0.0; K],
        error: [0.0; K],
        l1: [0.0; K],
    };
    for k in 0..K {
        let centre = weight(&nodes[14], k);
        let mut kronrod = WGK[7] * centre;
        let mut gauss = WG[3] * centre;
        let mut abs = WGK[7] * centre.abs();
        for j in 0..7 {
            let lo = weight(&nodes[2 * j], k);
            let hi = weight(&nodes[2 * j + 1], k);
            kronrod += WGK[j] * (lo + hi);
            abs += WGK[j] * (lo.abs() + hi.abs());
            if j % 2 == 1 {
                gauss += WG[j / 2] * (lo + hi);
            }
        }
        out.value[k] = kronrod * h;
        out.error[k] = ((kronrod - gauss) * h).abs();
        out.l1[k] = abs * h;
    }
    out
}

/// Integrate over the whole real line. `breakpoints` are locations where the
/// integrand has structure (peaks, scales); they seed the initial panels.
pub fn integrate_real_line<const K: usize, F>(
    f: F,
    breakpoints: &[f64],
    opts: &QuadOptions,
) -> Result<Scaled<K>>
where
    F: Fn(f64) -> (f64, [f64; K]),
{
    let mapped = |theta: f64| -> (f64, [f64; K]) {
        let x = theta.tan();
        let (lw, m) = f(x);
        let cos = theta.cos();
        (lw - 2.0 * cos.ln(), m)
    };
    let mut cuts: Vec<f64> = (0..=32)
        .map(|i| -FRAC_PI_2 + std::f64::consts::PI * i as f64 / 32.0)
        .collect();
    cuts.extend(
        breakpoints
            .iter()
            .filter(|b| b.is_finite())
            .map(|b| b.atan()),
    );
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    adaptive(&mapped, &cuts, opts)
}

/// Integrate over the finite interval `[a, b]` of the compactified variable
/// `theta`, i.e. over `x in [tan a, tan b]`.
pub fn integrate_theta_interval<const K: usize, F>(
    f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: &QuadOptions,
) -> Result<Scaled<K>>
where
    F: Fn(f64) -> (f64, [f64; K]),
{
    let mapped = |theta: f64| -> (f64, [f64; K]) {
        let (lw, m) = f(theta.tan());
        (lw - 2.0 * theta.cos().ln(), m)
    };
    let mut cuts = vec![a, b];
    for i in 1..8 {
        cuts.push(a + (b - a) * i as f64 / 8.0);
    }
    cuts.extend(
        breakpoints
            .iter()
            .map(|x| x.atan())
            .filter(|t| *t > a && *t < b),
    );
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
    adaptive(&mapped, &cuts, opts)
}

fn adaptive<const K: usize, F>(f: &F, cuts: &[f64], opts: &QuadOptions) -> Result<Scaled<K>>
where
    F: Fn(f64) -> (f64, [f64; K]),
{
    let mut initial: Vec<(f64, f64, Scaled<K>)> = cuts
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| (w[0], w[1], gauss_kronrod(f, w[0], w[1])))
        .collect();

    let mut total = Scaled::<K>::zero();
    for (_, _, r) in &initial {
        total.accumulate(r, 1.0);
    }
    if total.shift == f64::NEG_INFINITY {
        return Ok(total);
    }
    // Fixed per-component scale so the heap ranks panels by relative error.
    let norm: [f64; K] = std::array::from_fn(|k| {
        let l = total.l1[k];
        if l > 0.0 {
            1.0 / l
        } else {
            0.0
        }
    });
    let norm_shift = total.shift;
    let key_of = |r: &Scaled<K>| -> f64 {
        if r.shift == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let worst = (0..K).map(|k| r.error[k] * norm[k]).fold(0.0, f64::max);
        if worst == 0.0 {
            f64::NEG_INFINITY
        } else {
            worst.ln() + r.shift - norm_shift
        }
    };
    let mut heap: BinaryHeap<Panel<K>> = initial
        .drain(..)
        .map(|(a, b, result)| Panel {
            a,
            b,
            key: key_of(&result),
            result,
        })
        .collect();

    let converged = |t: &Scaled<K>, tol: f64| -> bool {
        (0..K).all(|k| t.error[k] <= tol * t.l1[k].abs() || t.l1[k] == 0.0)
    };

    while !converged(&total, opts.rel_tol) && heap.len() < opts.max_panels {
        let Some(worst) = heap.pop() else { break };
        if worst.key == f64::NEG_INFINITY || worst.b - worst.a < 1e-15 {
            heap.push(Panel {
                key: f64::NEG_INFINITY,
                ..worst
            });
            if heap.peek().map(|p| p.key) == Some(f64::NEG_INFINITY) {
                break;
            }
            continue;
        }
        let mid = 0.5 * (worst.a + worst.b);
        let left = gauss_kronrod(f, worst.a, mid);
        let right = gauss_kronrod(f, mid, worst.b);
        total.accumulate(&worst.result, -1.0);
        total.accumulate(&left, 1.0);
        total.accumulate(&right, 1.0);
        heap.push(Panel {
            a: worst.a,
            b: mid,
            key: key_of(&left),
            result: left,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            key: key_of(&right),
            result: right,
        });
    }

    // Recompute from the panels to shed cancellation in the running sums.
    let mut fresh = Scaled::<K>::zero();
    for p in heap.iter() {
        fresh.accumulate(&p.result, 1.0);
    }
    if converged(&fresh, opts.rel_tol) || converged(&fresh, opts.fail_tol) {
        Ok(fresh)
    } else {
        Err(ReadoutError::IntegrationFailure {
            achieved: fresh.relative_error(),
            requested: opts.fail_tol,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::ln_normal_pdf;

    #[test]
    fn standard_normal_integrates_to_one() {
        let r = integrate_real_line(
            |x| (ln_normal_pdf(x, 0.0, 1.0), [1.0]),
            &[0.0],
            &QuadOptions::default(),
        )
        .unwrap();
        assert!((r.component(0) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn narrow_offset_peak_is_found_with_breakpoints() {
        let f = |x: f64| (ln_normal_pdf(x, 3.7, 1e-3), [1.0, x]);
        let r = integrate_real_line(f, &[3.7], &QuadOptions::default()).unwrap();
        assert!((r.component(0) - 1.0).abs() < 1e-12);
        assert!((r.component(1) - 3.7).abs() < 1e-11);
    }

    #[test]
    fn cauchy_tails_are_not_truncated() {
        let f = |x: f64| (-(std::f64::consts::PI * (1.0 + x * x)).ln(), [1.0]);
        let r = integrate_real_line(f, &[0.0], &QuadOptions::default()).unwrap();
        assert!((r.component(0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_integrands_survive_in_log_space() {
        // exp(-2000) * N(0,1) integrates to exp(-2000)
        let f = |x: f64| (ln_normal_pdf(x, 0.0, 1.0) - 2000.0, [1.0]);
        let r = integrate_real_line(f, &[0.0], &QuadOptions::default()).unwrap();
        assert!((r.ln_component(0) + 2000.0).abs() < 1e-12);
    }

    #[test]
    fn theta_interval_matches_cdf() {
        let f = |x: f64| (ln_normal_pdf(x, 0.0, 1.0), [1.0]);
        let r =
            integrate_theta_interval(f, 0.0, FRAC_PI_2, &[0.0], &QuadOptions::default()).unwrap();
        assert!((r.component(0) - 0.5).abs() < 1e-13);
    }
}
