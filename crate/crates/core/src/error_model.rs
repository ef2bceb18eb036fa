//! Analytic error-rate predictors and the soft-decoding advantage.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chernoff::{chernoff_information, ChernoffSummary};
use crate::distributions::OutcomePair;
use crate::error::{invalid, ReadoutError, Result};
use crate::quadrature::{integrate_real_line, QuadOptions};
use crate::special::{erfc, ln_normal_pdf, ln_sinh_sq, log_add_exp};

/// Below `alpha * C * N` of this the saddle-point expansion is not trusted.
pub const SADDLE_FALLBACK: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    GaussianAnsatz,
    SaddlePoint,
    ChernoffUpperBound,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Uncertainties {
    pub e_avg: Vec<f64>,
    pub e_plus: Vec<f64>,
    pub e_minus: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub n_values: Vec<f64>,
    pub e_avg: Vec<f64>,
    pub e_plus: Vec<f64>,
    pub e_minus: Vec<f64>,
    pub method: Method,
    pub uncertainties: Option<Uncertainties>,
    /// Points where the saddle-point value was replaced by the Chernoff upper bound.
    pub fallback: Vec<bool>,
}

impl ErrorCurve {
    fn symmetric(n_values: &[f64], e: Vec<f64>, method: Method) -> Self {
        Self {
            n_values: n_values.to_vec(),
            e_plus: e.clone(),
            e_minus: e.clone(),
            e_avg: e,
            method,
            uncertainties: None,
            fallback: vec![false; n_values.len()],
        }
    }

    pub fn len(&self) -> usize {
        self.n_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n_values.is_empty()
    }
}

fn check_n(n_values: &[f64]) -> Result<()> {
    match n_values.iter().find(|n| !(n.is_finite() && **n >= 0.0)) {
        Some(n) => Err(invalid(format!(
            "repetition counts must be finite and >= 0, got {n}"
        ))),
        None => Ok(()),
    }
}

fn check_c(c: f64) -> Result<()> {
    if c.is_finite() && c >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!(
            "Chernoff information must be finite and >= 0, got {c}"
        )))
    }
}

/// `e_N = erfc(sqrt(C N)) / 2` for both preparations.
pub fn gaussian_ansatz(c: f64, n_values: &[f64]) -> Result<ErrorCurve> {
    check_c(c)?;
    check_n(n_values)?;
    let e = n_values
        .iter()
        .map(|n| 0.5 * erfc((c * n).sqrt()))
        .collect();
    Ok(ErrorCurve::symmetric(n_values, e, Method::GaussianAnsatz))
}

/// `e_N = exp(-C N) / 2`.
pub fn chernoff_upper_bound(c: f64, n_values: &[f64]) -> Result<ErrorCurve> {
    check_c(c)?;
    check_n(n_values)?;
    let e = n_values.iter().map(|n| 0.5 * (-c * n).exp()).collect();
    Ok(ErrorCurve::symmetric(
        n_values,
        e,
        Method::ChernoffUpperBound,
    ))
}

/// Inputs of the saddle-point formulas.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleParams {
    #[serde(rename = "C")]
    pub c: f64,
    pub alpha: f64,
    pub s_star: f64,
}

impl From<&ChernoffSummary> for SaddleParams {
    fn from(s: &ChernoffSummary) -> Self {
        Self {
            c: s.c,
            alpha: s.alpha,
            s_star: s.s_star,
        }
    }
}

impl SaddleParams {
    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(invalid(format!("saddle point needs C > 0, got {}", self.c)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(invalid(format!(
                "saddle point needs alpha > 0, got {}",
                self.alpha
            )));
        }
        if !(self.s_star > 0.0 && self.s_star < 1.0) {
            return Err(invalid(format!(
                "saddle point needs 0 < s* < 1, got {}",
                self.s_star
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleValue {
    pub e_avg: f64,
    pub e_plus: f64,
    pub e_minus: f64,
}

/// The saddle-point expressions at a single `N`, without any fallback.
pub fn saddle_point_value(p: &SaddleParams, n: f64) -> Result<SaddleValue> {
    p.validate()?;
    if n == 0.0 {
        return Err(ReadoutError::Singular("N = 0".into()));
    }
    if !(n > 0.0 && n.is_finite()) {
        return Err(invalid(format!("N must be positive, got {n}")));
    }
    let x = p.c * n;
    let decay = (-x).exp();
    // w_N and u_N: the average and asymmetric corrections to the ansatz
    let w = (p.alpha.powf(-0.5) - 1.0) / (4.0 * PI * x).sqrt() * decay;
    let u = (2.0 * p.s_star - 1.0) / (4.0 * PI * p.alpha * x).sqrt() * decay;
    let e_avg = 0.5 * erfc(x.sqrt()) + w;
    Ok(SaddleValue {
        e_avg,
        e_plus: e_avg + u,
        e_minus: e_avg - u,
    })
}

pub fn saddle_point(summary: &ChernoffSummary, n_values: &[f64]) -> Result<ErrorCurve> {
    saddle_point_from(&SaddleParams::from(summary), n_values)
}

/// Saddle-point curve. Points with `alpha C N` below [`SADDLE_FALLBACK`], or
/// where the expansion leaves `[0, 1/2]`, use the Chernoff upper bound and are
/// flagged in `fallback`.
pub fn saddle_point_from(p: &SaddleParams, n_values: &[f64]) -> Result<ErrorCurve> {
    p.validate()?;
    check_n(n_values)?;
    let mut curve = ErrorCurve::symmetric(n_values, vec![0.0; n_values.len()], Method::SaddlePoint);
    for (i, &n) in n_values.iter().enumerate() {
        let v = saddle_point_value(p, n)?;
        let in_range = [v.e_avg, v.e_plus, v.e_minus]
            .iter()
            .all(|e| (0.0..=0.5).contains(e));
        if p.alpha * p.c * n < SADDLE_FALLBACK || !in_range {
            let bound = 0.5 * (-p.c * n).exp();
            curve.e_avg[i] = bound;
            curve.e_plus[i] = bound;
            curve.e_minus[i] = bound;
            curve.fallback[i] = true;
        } else {
            curve.e_avg[i] = v.e_avg;
            curve.e_plus[i] = v.e_plus;
            curve.e_minus[i] = v.e_minus;
        }
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BinaryChernoff {
    Finite {
        c_b: f64,
        s_star: f64,
        /// Outcome labels were exchanged because `eps+ + eps- > 1`.
        reflected: bool,
    },
    /// Both error probabilities vanish: the binarized outcomes are perfect.
    Infinite,
}

impl BinaryChernoff {
    pub fn value(&self) -> f64 {
        match self {
            BinaryChernoff::Finite { c_b, .. } => *c_b,
            BinaryChernoff::Infinite => f64::INFINITY,
        }
    }

    pub fn s_star(&self) -> f64 {
        match self {
            BinaryChernoff::Finite { s_star, .. } => *s_star,
            BinaryChernoff::Infinite => f64::NAN,
        }
    }
}

/// Chernoff information between the two-outcome distributions
/// `P+ = (1-eps+, eps+)` and `P- = (eps-, 1-eps-)`, optimized in closed form.
pub fn binary_chernoff(eps_plus: f64, eps_minus: f64) -> Result<BinaryChernoff> {
    for e in [eps_plus, eps_minus] {
        if !(0.0..=1.0).contains(&e) {
            return Err(invalid(format!(
                "error probabilities must lie in [0, 1], got {e}"
            )));
        }
    }
    let reflected = eps_plus + eps_minus > 1.0;
    let (ep, em) = if reflected {
        (1.0 - eps_plus, 1.0 - eps_minus)
    } else {
        (eps_plus, eps_minus)
    };
    let finite = |c_b: f64, s_star: f64| {
        Ok(BinaryChernoff::Finite {
            c_b: c_b.max(0.0),
            s_star,
            reflected,
        })
    };
    if ep + em == 1.0 {
        return finite(0.0, 0.5);
    }
    match (ep == 0.0, em == 0.0) {
        (true, true) => return Ok(BinaryChernoff::Infinite),
        (true, false) => return finite(-em.ln(), 0.0),
        (false, true) => return finite(-ep.ln(), 1.0),
        _ => {}
    }
    let (lp, lm) = (ep.ln(), em.ln());
    let (lqp, lqm) = ((-ep).ln_1p(), (-em).ln_1p());
    if ep == em {
        return finite(-0.5 * (std::f64::consts::LN_2 * 2.0 + lp + lqp), 0.5);
    }
    let a = lqm - lp; // ln((1-eps-)/eps+)
    let b = lqp - lm; // ln((1-eps+)/eps-)
    let s = ((lqm - lm) + (a / b).ln()) / (lqp + lqm - lp - lm);
    let k = log_add_exp(s * lqp + (1.0 - s) * lm, s * lp + (1.0 - s) * lqm);
    finite(-k, s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdvantageReport {
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "C_b")]
    pub c_b: f64,
    pub advantage: f64,
    pub eps_plus: f64,
    pub eps_minus: f64,
    pub s_star_b: f64,
    /// Hard decoding needs this many times more repetitions for the same
    /// asymptotic error.
    pub repetition_multiplier: f64,
}

/// Soft-decoding advantage `C / C_b` of a pair.
pub fn advantage(pair: &OutcomePair) -> Result<AdvantageReport> {
    let summary = chernoff_information(pair, 1e-10)?;
    if summary.degenerate {
        return Err(ReadoutError::Degenerate { c: summary.c });
    }
    let eps = pair.single_repetition_errors()?;
    let binary = binary_chernoff(eps.eps_plus, eps.eps_minus)?;
    let c_b = binary.value();
    let advantage = summary.c / c_b;
    Ok(AdvantageReport {
        c: summary.c,
        c_b,
        advantage,
        eps_plus: eps.eps_plus,
        eps_minus: eps.eps_minus,
        s_star_b: binary.s_star(),
        repetition_multiplier: advantage,
    })
}

/// Chernoff information of Gaussian noise with symmetric conversion errors:
/// `C = r/2 - ln ∫ φ(x) sqrt(1 + 4η(1-η) sinh²(sqrt(r) x)) dx`.
pub fn conversion_chernoff(r: f64, eta: f64) -> Result<f64> {
    if !(r > 0.0 && r.is_finite()) {
        return Err(invalid(format!("r must be positive, got {r}")));
    }
    if !(0.0..=0.5).contains(&eta) {
        return Err(invalid(format!("eta must lie in [0, 1/2], got {eta}")));
    }
    if eta == 0.0 {
        return Ok(r / 2.0);
    }
    let root = r.sqrt();
    let ln_mix = (4.0 * eta * (1.0 - eta)).ln();
    let integrand = |x: f64| {
        let inner = log_add_exp(0.0, ln_mix + ln_sinh_sq(root * x));
        (ln_normal_pdf(x, 0.0, 1.0) + 0.5 * inner, [1.0])
    };
    let marks = [
        0.0,
        4.0,
        -4.0,
        root,
        -root,
        root + 4.0,
        root - 4.0,
        -root + 4.0,
        -root - 4.0,
    ];
    let opts = QuadOptions::default();
    let q = integrate_real_line(integrand, &marks, &opts)?;
    if q.relative_error() > opts.fail_tol {
        return Err(ReadoutError::IntegrationFailure {
            achieved: q.relative_error(),
            requested: opts.fail_tol,
        });
    }
    Ok((r / 2.0 - q.ln_component(0)).max(0.0))
}

/// Inverts `eps_G = erfc(sqrt(r/2)) / 2` for `r` by bisection.
pub fn snr_from_gaussian_error(eps_g: f64) -> Result<f64> {
    if !(eps_g > 0.0 && eps_g < 0.5) {
        return Err(invalid(format!("eps_G must lie in (0, 1/2), got {eps_g}")));
    }
    let eps = |r: f64| 0.5 * erfc((r / 2.0).sqrt());
    let (mut lo, mut hi) = (0.0, 1.0);
    while eps(hi) > eps_g {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-12 * hi {
        let mid = 0.5 * (lo + hi);
        if eps(mid) > eps_g {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub eps_g: f64,
    pub eta: f64,
    pub r: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "C_b")]
    pub c_b: f64,
    pub advantage: f64,
}

pub fn advantage_cell(eps_g: f64, eta: f64) -> Result<GridCell> {
    let r = snr_from_gaussian_error(eps_g)?;
    let c = conversion_chernoff(r, eta)?;
    let eps_eta = (1.0 - eta) * eps_g + eta * (1.0 - eps_g);
    let c_b = binary_chernoff(eps_eta, eps_eta)?.value();
    Ok(GridCell {
        eps_g,
        eta,
        r,
        c,
        c_b,
        advantage: c / c_b,
    })
}

/// Advantage over the product grid, `eps_g` outer and `eta` inner, in grid order.
pub fn advantage_grid(eps_g: &[f64], eta: &[f64]) -> Result<Vec<GridCell>> {
    for &e in eps_g {
        if !(e > 0.0 && e < 0.5) {
            return Err(invalid(format!(
                "eps_G values must lie in (0, 1/2), got {e}"
            )));
        }
    }
    for &e in eta {
        if !(e > 0.0 && e < 0.5) {
            return Err(invalid(format!("eta values must lie in (0, 1/2), got {e}")));
        }
    }
    let cells: Vec<(f64, f64)> = eps_g
        .iter()
        .flat_map(|&g| eta.iter().map(move |&h| (g, h)))
        .collect();
    cells
        .par_iter()
        .map(|&(g, h)| advantage_cell(g, h))
        .collect()
}
