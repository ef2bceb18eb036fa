//! Conditional outcome distributions `P+(O)`, `P-(O)` and the per-repetition
//! log-likelihood ratio.

mod density;

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use density::{Density, Histogram, NormalComponent, Tilted};

use crate::error::{invalid, ReadoutError, Result};
use crate::quadrature::{
    integrate_real_line, integrate_theta_interval, sum_points, QuadOptions, Scaled,
};

/// Default pseudocount fraction for empty histogram bins.
pub const DEFAULT_HISTOGRAM_FLOOR: f64 = 1e-8;
/// Default clamp on `|lambda|` for empirical pairs.
pub const DEFAULT_LAMBDA_MAX: f64 = 30.0;

/// An eigenvalue `a = +1 / -1`, also used for the two binary outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+1")]
    Plus,
    #[serde(rename = "-1")]
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Sign {
        match self {
            Sign::Plus => Sign::Minus,
            Sign::Minus => Sign::Plus,
        }
    }

    /// 0 for `+1`, 1 for `-1`; the basis order of occupation vectors.
    pub fn index(self) -> usize {
        match self {
            Sign::Plus => 0,
            Sign::Minus => 1,
        }
    }

    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+1",
            Sign::Minus => "-1",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Outcome {
    Real(f64),
    Count(u64),
    Binary(Sign),
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Real(x) => write!(f, "{x}"),
            Outcome::Count(k) => write!(f, "{k}"),
            Outcome::Binary(Sign::Plus) => f.write_str("+"),
            Outcome::Binary(Sign::Minus) => f.write_str("-"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Support {
    ContinuousScalar,
    DiscreteInteger,
    Binary,
}

/// Single-repetition assignment errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleRepetitionErrors {
    pub eps_plus: f64,
    pub eps_minus: f64,
    pub eps: f64,
}

/// The pair `P+`, `P-` of outcome distributions conditioned on the eigenvalue.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomePair {
    plus: Density,
    minus: Density,
    lambda_max: Option<f64>,
}

impl OutcomePair {
    pub fn new(plus: Density, minus: Density) -> Result<Self> {
        if plus.support() != minus.support() {
            return Err(invalid(format!(
                "densities have different supports: {:?} vs {:?}",
                plus.support(),
                minus.support()
            )));
        }
        match (&plus, &minus) {
            (Density::Histogram(a), Density::Histogram(b)) => {
                let same = a.edges().len() == b.edges().len()
                    && a.edges()
                        .iter()
                        .zip(b.edges())
                        .all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + x.abs()));
                if !same {
                    return Err(invalid("empirical histograms must share the same bins"));
                }
            }
            (Density::Histogram(_), _) | (_, Density::Histogram(_)) => {
                return Err(invalid(
                    "a histogram can only be paired with another histogram",
                ));
            }
            _ => {}
        }
        for d in [&plus, &minus] {
            match d {
                Density::Poisson { mean } if !(*mean >= 0.0 && mean.is_finite()) => {
                    return Err(invalid(format!(
                        "poisson mean must be finite and >= 0, got {mean}"
                    )));
                }
                Density::Bernoulli { p_plus } if !(0.0..=1.0).contains(p_plus) => {
                    return Err(invalid(format!(
                        "bernoulli probability must lie in [0, 1], got {p_plus}"
                    )));
                }
                Density::Cauchy { location, scale }
                    if !(*scale > 0.0 && scale.is_finite() && location.is_finite()) =>
                {
                    return Err(invalid(format!("cauchy scale must be > 0, got {scale}")));
                }
                _ => {}
            }
        }
        Ok(Self {
            plus,
            minus,
            lambda_max: None,
        })
    }

    /// Means `+1 / -1`, variance `1/r`.
    pub fn gaussian(r: f64) -> Result<Self> {
        check_snr(r)?;
        let sd = 1.0 / r.sqrt();
        Self::new(Density::normal(1.0, sd)?, Density::normal(-1.0, sd)?)
    }

    pub fn poissonian(mu_plus: f64, mu_minus: f64) -> Result<Self> {
        Self::new(
            Density::Poisson { mean: mu_plus },
            Density::Poisson { mean: mu_minus },
        )
    }

    /// Locations `+1 / -1`, common scale `gamma`.
    pub fn cauchy(gamma: f64) -> Result<Self> {
        Self::new(
            Density::Cauchy {
                location: 1.0,
                scale: gamma,
            },
            Density::Cauchy {
                location: -1.0,
                scale: gamma,
            },
        )
    }

    /// Gaussian noise where a fraction `eta` of repetitions is converted to the
    /// opposite mean.
    pub fn gaussian_with_conversion(r: f64, eta: f64) -> Result<Self> {
        check_snr(r)?;
        if !(0.0..=0.5).contains(&eta) {
            return Err(invalid(format!(
                "conversion rate must lie in [0, 1/2], got {eta}"
            )));
        }
        let sd = 1.0 / r.sqrt();
        let comp = |weight, mean| NormalComponent { weight, mean, sd };
        Self::new(
            Density::mixture(vec![comp(1.0 - eta, 1.0), comp(eta, -1.0)])?,
            Density::mixture(vec![comp(1.0 - eta, -1.0), comp(eta, 1.0)])?,
        )
    }

    /// Binary outcomes with `P+(-) = eps_plus` and `P-(+) = eps_minus`.
    pub fn binary(eps_plus: f64, eps_minus: f64) -> Result<Self> {
        for e in [eps_plus, eps_minus] {
            if !(0.0..=1.0).contains(&e) {
                return Err(invalid(format!(
                    "binary error probabilities must lie in [0, 1], got {e}"
                )));
            }
        }
        Self::new(
            Density::Bernoulli {
                p_plus: 1.0 - eps_plus,
            },
            Density::Bernoulli { p_plus: eps_minus },
        )
    }

    /// Empirical pair from binned counts sharing the same bin centres.
    pub fn empirical(
        centers: &[f64],
        counts_plus: &[f64],
        counts_minus: &[f64],
        floor: f64,
        lambda_max: f64,
    ) -> Result<Self> {
        if !(lambda_max > 0.0) {
            return Err(invalid(format!(
                "lambda_max must be positive, got {lambda_max}"
            )));
        }
        let plus = Histogram::from_counts(centers, counts_plus, floor)?;
        let minus = Histogram::from_counts(centers, counts_minus, floor)?;
        let mut pair = Self::new(Density::Histogram(plus), Density::Histogram(minus))?;
        pair.lambda_max = Some(lambda_max);
        Ok(pair)
    }

    pub fn plus(&self) -> &Density {
        &self.plus
    }

    pub fn minus(&self) -> &Density {
        &self.minus
    }

    pub fn density(&self, a: Sign) -> &Density {
        match a {
            Sign::Plus => &self.plus,
            Sign::Minus => &self.minus,
        }
    }

    pub fn support(&self) -> Support {
        self.plus.support()
    }

    pub fn lambda_max(&self) -> Option<f64> {
        self.lambda_max
    }

    /// Exchange the roles of `P+` and `P-`.
    pub fn swapped(&self) -> Self {
        Self {
            plus: self.minus.clone(),
            minus: self.plus.clone(),
            lambda_max: self.lambda_max,
        }
    }

    /// `(ln P+(o), ln P-(o))`.
    pub fn log_densities(&self, o: &Outcome) -> Result<(f64, f64)> {
        if !self.plus.contains(o) || !self.minus.contains(o) {
            return Err(ReadoutError::OutsideSupport {
                outcome: o.to_string(),
            });
        }
        let lp = self.plus.log_density(o);
        let lm = self.minus.log_density(o);
        if lp == f64::NEG_INFINITY && lm == f64::NEG_INFINITY {
            return Err(ReadoutError::OutsideSupport {
                outcome: o.to_string(),
            });
        }
        Ok((lp, lm))
    }

    /// `lambda(o) = ln P+(o) - ln P-(o)`, clamped to `[-lambda_max, lambda_max]`
    /// for empirical pairs.
    pub fn log_likelihood_ratio(&self, o: &Outcome) -> Result<f64> {
        let (lp, lm) = self.log_densities(o)?;
        Ok(self.clamp(lp - lm))
    }

    pub(crate) fn clamp(&self, lambda: f64) -> f64 {
        match self.lambda_max {
            Some(l) => lambda.clamp(-l, l),
            None => lambda,
        }
    }

    /// Draw an outcome conditioned on eigenvalue `a`.
    pub fn sample<R: Rng + ?Sized>(&self, a: Sign, rng: &mut R) -> Outcome {
        self.density(a).sample(rng)
    }

    /// Integrate `f(ln P+, ln P-)` over the outcome space. `f` returns a
    /// log-weight and `K` multipliers; the result holds
    /// `int exp(log_w) * m_k dO` for every `k`.
    pub fn integrate<const K: usize, F>(&self, f: F, opts: &QuadOptions) -> Result<Scaled<K>>
    where
        F: Fn(f64, f64) -> (f64, [f64; K]),
    {
        match (&self.plus, &self.minus) {
            (Density::Histogram(hp), Density::Histogram(hm)) => {
                let points = hp
                    .ln_density
                    .iter()
                    .zip(&hm.ln_density)
                    .zip(hp.edges.windows(2))
                    .map(|((&lp, &lm), e)| {
                        let (lw, m) = f(lp, lm);
                        (lw + (e[1] - e[0]).ln(), m)
                    });
                Ok(sum_points(points))
            }
            _ => match self.support() {
                Support::Binary => Ok(sum_points(Sign::BOTH.iter().map(|s| {
                    let o = Outcome::Binary(*s);
                    f(self.plus.log_density(&o), self.minus.log_density(&o))
                }))),
                Support::DiscreteInteger => {
                    let mut points = Vec::new();
                    self.enumerate_counts(|_, lp, lm| points.push(f(lp, lm)));
                    Ok(sum_points(points))
                }
                Support::ContinuousScalar => {
                    let mut marks = self.plus.landmarks();
                    marks.extend(self.minus.landmarks());
                    integrate_real_line(
                        |x| f(self.plus.ln_pdf(x), self.minus.ln_pdf(x)),
                        &marks,
                        opts,
                    )
                }
            },
        }
    }

    /// Visit `(k, ln P+(k), ln P-(k))` until the remaining tail of both
    /// distributions is below 1e-17.
    fn enumerate_counts(&self, mut visit: impl FnMut(u64, f64, f64)) {
        let top_mean = self
            .plus
            .poisson_mean()
            .unwrap_or(0.0)
            .max(self.minus.poisson_mean().unwrap_or(0.0));
        let tail_cut = (1e-17f64).ln();
        let mut k: u64 = 0;
        loop {
            let o = Outcome::Count(k);
            let lp = self.plus.log_density(&o);
            let lm = self.minus.log_density(&o);
            visit(k, lp, lm);
            let next = (k + 1) as f64;
            if next > top_mean + 1.0 {
                // Terms beyond the modes shrink by at least top_mean/(k+1) per step.
                let ratio = top_mean / next;
                let bound = lp.max(lm) - (1.0 - ratio).ln();
                if bound < tail_cut || k > 50_000_000 {
                    break;
                }
            }
            k += 1;
        }
    }

    /// Single-repetition errors `eps+ = P+(lambda<0) + P+(lambda=0)/2`,
    /// `eps- = P-(lambda>0) + P-(lambda=0)/2`.
    pub fn single_repetition_errors(&self) -> Result<SingleRepetitionErrors> {
        let mut eps_plus = 0.0;
        let mut eps_minus = 0.0;
        let mut tally = |lp: f64, lm: f64, lw: f64| {
            let lambda = lp - lm;
            let (mp, mm) = ((lp + lw).exp(), (lm + lw).exp());
            if lambda < 0.0 {
                eps_plus += mp;
            } else if lambda > 0.0 {
                eps_minus += mm;
            } else if lambda == 0.0 {
                eps_plus += 0.5 * mp;
                eps_minus += 0.5 * mm;
            }
        };
        match (&self.plus, &self.minus, self.support()) {
            (Density::Histogram(hp), Density::Histogram(hm), _) => {
                for (i, e) in hp.edges.windows(2).enumerate() {
                    tally(hp.ln_density[i], hm.ln_density[i], (e[1] - e[0]).ln());
                }
            }
            (_, _, Support::Binary) => {
                for s in Sign::BOTH {
                    let o = Outcome::Binary(s);
                    tally(self.plus.log_density(&o), self.minus.log_density(&o), 0.0);
                }
            }
            (_, _, Support::DiscreteInteger) => {
                self.enumerate_counts(|_, lp, lm| tally(lp, lm, 0.0))
            }
            (_, _, Support::ContinuousScalar) => return self.continuous_errors(),
        }
        Ok(SingleRepetitionErrors {
            eps_plus,
            eps_minus,
            eps: 0.5 * (eps_plus + eps_minus),
        })
    }

    /// Locate the sign changes of lambda on a compactified grid, then sum the
    /// masses of the regions where each assignment is wrong.
    fn continuous_errors(&self) -> Result<SingleRepetitionErrors> {
        const GRID: usize = 4096;
        let lambda_at = |theta: f64| {
            let x = theta.tan();
            self.plus.ln_pdf(x) - self.minus.ln_pdf(x)
        };
        let sign_of = |v: f64| -> i8 {
            if v > 0.0 {
                1
            } else if v < 0.0 {
                -1
            } else {
                0
            }
        };
        let mut marks = self.plus.landmarks();
        marks.extend(self.minus.landmarks());
        let mut grid: Vec<f64> = (1..GRID)
            .map(|i| -FRAC_PI_2 + std::f64::consts::PI * i as f64 / GRID as f64)
            .collect();
        grid.extend(marks.iter().map(|x| x.atan()));
        grid.sort_by(f64::total_cmp);
        grid.dedup();

        let mut cuts = vec![-FRAC_PI_2];
        let mut prev = (grid[0], sign_of(lambda_at(grid[0])));
        for &t in &grid[1..] {
            let s = sign_of(lambda_at(t));
            if s != 0 && prev.1 != 0 && s != prev.1 {
                let (mut lo, mut hi) = (prev.0, t);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if sign_of(lambda_at(mid)) == prev.1 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                cuts.push(0.5 * (lo + hi));
            }
            if s != 0 {
                prev = (t, s);
            } else {
                prev.0 = t;
            }
        }
        cuts.push(FRAC_PI_2);

        let opts = QuadOptions::default();
        let mass = |d: &Density, a: f64, b: f64| -> Result<f64> {
            let (xa, xb) = (a.tan(), b.tan());
            if let Some(m) = d.mass_between(
                if a <= -FRAC_PI_2 {
                    f64::NEG_INFINITY
                } else {
                    xa
                },
                if b >= FRAC_PI_2 { f64::INFINITY } else { xb },
            ) {
                return Ok(m);
            }
            let r = integrate_theta_interval(|x| (d.ln_pdf(x), [1.0]), a, b, &marks, &opts)?;
            Ok(r.component(0))
        };

        let mut eps_plus = 0.0;
        let mut eps_minus = 0.0;
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            // majority vote of interior probes guards against landing on an isolated zero
            let votes: i32 = [0.25, 0.5, 0.75]
                .iter()
                .map(|f| sign_of(lambda_at(a + f * (b - a))) as i32)
                .sum();
            match votes.signum() {
                -1 => eps_plus += mass(&self.plus, a, b)?,
                1 => eps_minus += mass(&self.minus, a, b)?,
                _ => {
                    eps_plus += 0.5 * mass(&self.plus, a, b)?;
                    eps_minus += 0.5 * mass(&self.minus, a, b)?;
                }
            }
        }
        Ok(SingleRepetitionErrors {
            eps_plus,
            eps_minus,
            eps: 0.5 * (eps_plus + eps_minus),
        })
    }
}

fn check_snr(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(invalid(format!(
            "signal-to-noise ratio must be positive and finite, got {r}"
        )))
    }
}
