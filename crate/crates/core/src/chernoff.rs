//! Chernoff information of an outcome pair and the quantities derived from
//! the cumulant generating function of the log-likelihood ratio.
//!
//! Everything is expressed through `K(s) = ln ∫ P+^s P-^(1-s)`. The Chernoff
//! information is `C = -min K`, and the derivatives of `K` at the minimizer are
//! the cumulants of `λ` under the tilted distribution `P+^s P-^(1-s) / e^K`.

use serde::{Deserialize, Serialize};

use crate::distributions::{Density, OutcomePair, Tilted};
use crate::error::{invalid, ReadoutError, Result};
use crate::minimize::brent;
use crate::quadrature::{QuadOptions, Scaled};
use crate::special::{interpolate_log, log_add_exp};

/// Below this the pair is reported as indistinguishable.
pub const DEGENERATE_C: f64 = 1e-12;
/// Small-C expansion is flagged as unreliable above this value of C̃.
pub const SMALL_C_LIMIT: f64 = 0.1;

#[derive(Debug, Clone, Copy)]
pub struct ChernoffOptions {
    /// Target accuracy of the optimizer `s*`.
    pub s_tol: f64,
    pub quad: QuadOptions,
}

impl Default for ChernoffOptions {
    fn default() -> Self {
        Self {
            s_tol: 1e-10,
            quad: QuadOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgfEvaluation {
    pub s: f64,
    pub k_minus: f64,
    /// Relative quadrature error of the underlying integral.
    pub error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChernoffSummary {
    #[serde(rename = "C")]
    pub c: f64,
    pub s_star: f64,
    /// Undefined (NaN, serialized as null) when the optimum sits on the boundary.
    #[serde(with = "nan_as_null")]
    pub alpha: f64,
    pub k2: f64,
    pub bhattacharyya: f64,
    /// Achieved accuracy of `s_star`.
    pub tolerance: f64,
    /// Largest relative quadrature error encountered.
    pub integration_error: f64,
    #[serde(default)]
    pub degenerate: bool,
    #[serde(default)]
    pub boundary: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallCExpansion {
    #[serde(rename = "C")]
    pub c: f64,
    pub alpha: f64,
    pub s_star: f64,
    /// `<y^2>, <y^3>, <y^4>` under the average distribution.
    pub moments: [f64; 3],
    /// Set when C̃ exceeds [`SMALL_C_LIMIT`].
    pub unreliable: bool,
}

mod nan_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_nan() {
            s.serialize_none()
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

fn check_quad<const K: usize>(q: &Scaled<K>, opts: &QuadOptions) -> Result<()> {
    let achieved = q.relative_error();
    if achieved > opts.fail_tol {
        return Err(ReadoutError::IntegrationFailure {
            achieved,
            requested: opts.fail_tol,
        });
    }
    Ok(())
}

/// `K(s) = ln ∫ P+^s P-^(1-s)` with default quadrature settings.
pub fn cgf(pair: &OutcomePair, s: f64) -> Result<CgfEvaluation> {
    cgf_with(pair, s, &QuadOptions::default())
}

pub fn cgf_with(pair: &OutcomePair, s: f64, opts: &QuadOptions) -> Result<CgfEvaluation> {
    if !(0.0..=1.0).contains(&s) {
        return Err(invalid(format!("s must lie in [0, 1], got {s}")));
    }
    let q = pair.integrate(|lp, lm| (interpolate_log(s, lp, lm), [1.0]), opts)?;
    check_quad(&q, opts)?;
    Ok(CgfEvaluation {
        s,
        k_minus: q.ln_component(0),
        error: q.relative_error(),
    })
}

/// One-sided limit of `K` at a boundary: `ln P-(supp P+)` as `s -> 0+`,
/// `ln P+(supp P-)` as `s -> 1-`.
fn boundary_limit(pair: &OutcomePair, at_one: bool, opts: &QuadOptions) -> Result<f64> {
    let q = pair.integrate(
        |lp, lm| {
            let (keep, w) = if at_one { (lm, lp) } else { (lp, lm) };
            (
                if keep == f64::NEG_INFINITY {
                    f64::NEG_INFINITY
                } else {
                    w
                },
                [1.0],
            )
        },
        opts,
    )?;
    check_quad(&q, opts)?;
    Ok(q.ln_component(0))
}

/// Raw moments `E[λ^k]`, k = 0..K-1, of the unnormalized tilted measure, with
/// `λ` shifted by `center`. Points outside either support carry no tilted
/// weight for `0 < s < 1`.
fn tilted_moments<const K: usize>(
    pair: &OutcomePair,
    s: f64,
    center: f64,
    opts: &QuadOptions,
) -> Result<Scaled<K>> {
    let q = pair.integrate(
        |lp, lm| {
            let w = interpolate_log(s, lp, lm);
            let mut m = [0.0; K];
            if w > f64::NEG_INFINITY {
                let d = lp - lm - center;
                let mut p = 1.0;
                for slot in m.iter_mut() {
                    *slot = p;
                    p *= d;
                }
            }
            (w, m)
        },
        opts,
    )?;
    check_quad(&q, opts)?;
    Ok(q)
}

/// Central cumulants `κ2..=κmax_order` of `λ` under the tilted distribution at
/// `s_star`; equal to the derivatives `K^(n)(s_star)`.
pub fn cumulants_under_eff(pair: &OutcomePair, s_star: f64, max_order: usize) -> Result<Vec<f64>> {
    cumulants_with(pair, s_star, max_order, &QuadOptions::default())
}

pub fn cumulants_with(
    pair: &OutcomePair,
    s_star: f64,
    max_order: usize,
    opts: &QuadOptions,
) -> Result<Vec<f64>> {
    if !(2..=4).contains(&max_order) {
        return Err(invalid(format!(
            "max_order must be 2, 3 or 4, got {max_order}"
        )));
    }
    if !(s_star > 0.0 && s_star < 1.0) {
        return Err(invalid(format!("s* must lie in (0, 1), got {s_star}")));
    }
    let first = tilted_moments::<2>(pair, s_star, 0.0, opts)?;
    let mean = first.ratio(1);
    let q = tilted_moments::<5>(pair, s_star, mean, opts)?;
    // residual first central moment corrects the shifted sums
    let d = q.ratio(1);
    let m2 = q.ratio(2) - d * d;
    let m3 = q.ratio(3) - 3.0 * d * q.ratio(2) + 2.0 * d * d * d;
    let m4 = q.ratio(4) - 4.0 * d * q.ratio(3) + 6.0 * d * d * q.ratio(2) - 3.0 * d.powi(4);
    let all = [m2, m3, m4 - 3.0 * m2 * m2];
    Ok(all[..max_order - 1].to_vec())
}

/// Normalized tilted density `P+^s P-^(1-s) / e^{K(s)}`.
pub fn effective_distribution(pair: &OutcomePair, s_star: f64) -> Result<Density> {
    if !(s_star > 0.0 && s_star < 1.0) {
        return Err(invalid(format!("s* must lie in (0, 1), got {s_star}")));
    }
    let k = cgf(pair, s_star)?;
    Ok(Density::Tilted(Box::new(Tilted {
        plus: pair.plus().clone(),
        minus: pair.minus().clone(),
        s: s_star,
        log_norm: k.k_minus,
    })))
}

pub fn chernoff_information(pair: &OutcomePair, tol: f64) -> Result<ChernoffSummary> {
    chernoff_with(
        pair,
        &ChernoffOptions {
            s_tol: tol,
            ..ChernoffOptions::default()
        },
    )
}

pub fn chernoff_with(pair: &OutcomePair, opts: &ChernoffOptions) -> Result<ChernoffSummary> {
    if !(opts.s_tol > 0.0) {
        return Err(invalid(format!(
            "tolerance must be positive, got {}",
            opts.s_tol
        )));
    }
    let quad = &opts.quad;
    let half = cgf_with(pair, 0.5, quad)?;
    if half.k_minus == f64::NEG_INFINITY {
        return Err(ReadoutError::Unbounded);
    }
    let mut worst_error = half.error;
    let min = brent(
        |s| {
            let k = cgf_with(pair, s, quad)?;
            worst_error = worst_error.max(k.error);
            Ok(k.k_minus)
        },
        0.0,
        1.0,
        opts.s_tol,
        200,
    )?;
    let (mut s, mut k_min, mut tolerance) = (min.x, min.fx, min.bracket);

    // Brent only resolves s* to about sqrt(machine epsilon) relative to the
    // curvature; polish with Newton steps on K'(s) = E_eff[λ], K'' = Var_eff[λ].
    let mut boundary = None;
    let mut k2 = f64::NAN;
    let mut polished = false;
    for _ in 0..8 {
        let q = tilted_moments::<3>(pair, s, 0.0, quad)?;
        worst_error = worst_error.max(q.relative_error());
        let mean = q.ratio(1);
        k2 = q.ratio(2) - mean * mean;
        let step = mean / k2;
        let next = s - step;
        if !next.is_finite() || next <= 0.0 || next >= 1.0 {
            if !(1e-6..=1.0 - 1e-6).contains(&s) {
                boundary = Some(if mean > 0.0 { 0.0 } else { 1.0 });
            }
            break;
        }
        if step.abs() > 1e-3 {
            break;
        }
        s = next;
        tolerance = step.abs();
        polished = true;
        if step.abs() < 1e-14 {
            break;
        }
    }
    if polished {
        let k = cgf_with(pair, s, quad)?;
        worst_error = worst_error.max(k.error);
        k_min = k.k_minus;
    }

    let b = (-half.k_minus).max(0.0);
    if -k_min < DEGENERATE_C {
        // below resolution: report exact indistinguishability
        return Ok(ChernoffSummary {
            c: 0.0,
            s_star: 0.5,
            alpha: 1.0,
            k2: k2.max(0.0),
            bhattacharyya: 0.0,
            tolerance,
            integration_error: worst_error,
            degenerate: true,
            boundary: false,
        });
    }
    if let Some(edge) = boundary {
        let limit = boundary_limit(pair, edge == 1.0, quad)?;
        let c = (-limit.min(k_min)).max(0.0);
        return Ok(ChernoffSummary {
            c,
            s_star: edge,
            alpha: f64::NAN,
            k2,
            bhattacharyya: b,
            tolerance: 0.0,
            integration_error: worst_error,
            degenerate: c < DEGENERATE_C,
            boundary: true,
        });
    }

    let c = (-k_min).max(0.0);
    let k2 = cumulants_with(pair, s, 2, quad)?[0];
    let alpha = 2.0 * (s * (1.0 - s)).powi(2) * k2 / c;
    Ok(ChernoffSummary {
        c,
        s_star: s,
        alpha,
        k2,
        bhattacharyya: b,
        tolerance,
        integration_error: worst_error,
        degenerate: false,
        boundary: false,
    })
}

/// Expansion in powers of `y = (P+ - P-) / P̄ = 2 tanh(λ/2)` with moments
/// under `P̄ = (P+ + P-)/2`.
pub fn small_c_expansion(pair: &OutcomePair) -> Result<SmallCExpansion> {
    let opts = QuadOptions::default();
    let q = pair.integrate(
        |lp, lm| {
            let w = log_add_exp(lp, lm) - std::f64::consts::LN_2;
            if w == f64::NEG_INFINITY {
                return (w, [0.0; 3]);
            }
            let y = 2.0 * (0.5 * (lp - lm)).tanh();
            let y2 = y * y;
            (w, [y2, y2 * y, y2 * y2])
        },
        &opts,
    )?;
    check_quad(&q, &opts)?;
    let [y2, y3, y4] = [q.component(0), q.component(1), q.component(2)];
    if y2 <= 1e-14 {
        return Ok(SmallCExpansion {
            c: 0.0,
            alpha: 1.0,
            s_star: 0.5,
            moments: [y2, y3, y4],
            unreliable: false,
        });
    }
    let c = y2 / 8.0;
    Ok(SmallCExpansion {
        c,
        alpha: 1.0 + y2 / 16.0 + y3 * y3 / (48.0 * y2 * y2) - y4 / (48.0 * y2),
        s_star: 0.5 + y3 / (24.0 * y2),
        moments: [y2, y3, y4],
        unreliable: c > SMALL_C_LIMIT,
    })
}

#[cfg(test)]
mod tests;
