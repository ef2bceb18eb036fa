use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Cauchy, Distribution, Normal, Poisson};

use crate::error::{invalid, Result};
use crate::special::{ln_factorial, ln_normal_pdf, log_add_exp, log_sum_exp, normal_mass};

use super::{Outcome, Sign, Support};

/// One Gaussian component of a mixture.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalComponent {
    pub weight: f64,
    pub mean: f64,
    pub sd: f64,
}

/// A single conditional outcome distribution.
#[derive(Debug, Clone, PartialEq)]
pub enum Density {
    Normal {
        mean: f64,
        sd: f64,
    },
    Mixture(Vec<NormalComponent>),
    Cauchy {
        location: f64,
        scale: f64,
    },
    Poisson {
        mean: f64,
    },
    /// Two-outcome distribution; `p_plus` is the probability of the "+" outcome.
    Bernoulli {
        p_plus: f64,
    },
    Histogram(Histogram),
    /// Normalized `plus^s * minus^(1-s)`, the tilted (effective) distribution.
    Tilted(Box<Tilted>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tilted {
    pub plus: Density,
    pub minus: Density,
    pub s: f64,
    /// `ln` of the normalizing integral, i.e. the cumulant generating function at `s`.
    pub log_norm: f64,
}

impl Density {
    pub fn normal(mean: f64, sd: f64) -> Result<Self> {
        if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
            return Err(invalid(format!(
                "normal requires finite mean and sd > 0, got ({mean}, {sd})"
            )));
        }
        Ok(Density::Normal { mean, sd })
    }

    pub fn mixture(components: Vec<NormalComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(invalid("mixture needs at least one component"));
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        for c in &components {
            if !(c.weight >= 0.0 && c.sd > 0.0 && c.mean.is_finite() && c.sd.is_finite()) {
                return Err(invalid(format!("bad mixture component {c:?}")));
            }
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("mixture weights sum to {total}, not 1")));
        }
        Ok(Density::Mixture(components))
    }

    pub fn support(&self) -> Support {
        match self {
            Density::Normal { .. }
            | Density::Mixture(_)
            | Density::Cauchy { .. }
            | Density::Histogram(_) => Support::ContinuousScalar,
            Density::Poisson { .. } => Support::DiscreteInteger,
            Density::Bernoulli { .. } => Support::Binary,
            Density::Tilted(t) => t.plus.support(),
        }
    }

    pub fn contains(&self, o: &Outcome) -> bool {
        match (self, o) {
            (Density::Histogram(h), Outcome::Real(x)) => h.contains(*x),
            (Density::Tilted(t), o) => t.plus.contains(o),
            (_, Outcome::Real(x)) => self.support() == Support::ContinuousScalar && x.is_finite(),
            (_, Outcome::Count(_)) => self.support() == Support::DiscreteInteger,
            (_, Outcome::Binary(_)) => self.support() == Support::Binary,
        }
    }

    /// Log-density (or log-mass) at `o`; `-inf` outside the support.
    pub fn log_density(&self, o: &Outcome) -> f64 {
        if !self.contains(o) {
            return f64::NEG_INFINITY;
        }
        match (self, o) {
            (Density::Tilted(t), o) => {
                let lp = t.plus.log_density(o);
                let lm = t.minus.log_density(o);
                crate::special::interpolate_log(t.s, lp, lm) - t.log_norm
            }
            (_, Outcome::Real(x)) => self.ln_pdf(*x),
            (Density::Poisson { mean }, Outcome::Count(k)) => ln_poisson(*mean, *k),
            (Density::Bernoulli { p_plus }, Outcome::Binary(b)) => match b {
                Sign::Plus => p_plus.ln(),
                Sign::Minus => (1.0 - p_plus).ln(),
            },
            _ => f64::NEG_INFINITY,
        }
    }

    /// Log-density of a continuous density at a real point.
    pub(crate) fn ln_pdf(&self, x: f64) -> f64 {
        match self {
            Density::Normal { mean, sd } => ln_normal_pdf(x, *mean, *sd),
            Density::Mixture(cs) => log_sum_exp(
                cs.iter()
                    .filter(|c| c.weight > 0.0)
                    .map(|c| c.weight.ln() + ln_normal_pdf(x, c.mean, c.sd)),
            ),
            Density::Cauchy { location, scale } => {
                let z = (x - location) / scale;
                -(PI * scale).ln() - z.mul_add(z, 1.0).ln()
            }
            Density::Histogram(h) => h.ln_pdf(x),
            Density::Tilted(t) => {
                crate::special::interpolate_log(t.s, t.plus.ln_pdf(x), t.minus.ln_pdf(x))
                    - t.log_norm
            }
            Density::Poisson { .. } | Density::Bernoulli { .. } => f64::NEG_INFINITY,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Outcome {
        match self {
            Density::Normal { mean, sd } => {
                Outcome::Real(Normal::new(*mean, *sd).expect("validated").sample(rng))
            }
            Density::Mixture(cs) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut pick = cs.last().expect("non-empty");
                for c in cs {
                    acc += c.weight;
                    if u < acc {
                        pick = c;
                        break;
                    }
                }
                Outcome::Real(
                    Normal::new(pick.mean, pick.sd)
                        .expect("validated")
                        .sample(rng),
                )
            }
            Density::Cauchy { location, scale } => Outcome::Real(
                Cauchy::new(*location, *scale)
                    .expect("validated")
                    .sample(rng),
            ),
            Density::Poisson { mean } => {
                if *mean == 0.0 {
                    Outcome::Count(0)
                } else {
                    Outcome::Count(Poisson::new(*mean).expect("validated").sample(rng) as u64)
                }
            }
            Density::Bernoulli { p_plus } => {
                let u: f64 = rng.random();
                Outcome::Binary(if u < *p_plus { Sign::Plus } else { Sign::Minus })
            }
            Density::Histogram(h) => Outcome::Real(h.sample(rng)),
            Density::Tilted(t) => t.sample(rng),
        }
    }

    /// Probability mass of `[a, b]` for continuous densities with a closed-form CDF.
    pub fn mass_between(&self, a: f64, b: f64) -> Option<f64> {
        if a >= b {
            return Some(0.0);
        }
        match self {
            Density::Normal { mean, sd } => Some(normal_mass((a - mean) / sd, (b - mean) / sd)),
            Density::Mixture(cs) => Some(
                cs.iter()
                    .map(|c| c.weight * normal_mass((a - c.mean) / c.sd, (b - c.mean) / c.sd))
                    .sum(),
            ),
            Density::Cauchy { location, scale } => {
                let za = ((a - location) / scale).atan();
                let zb = ((b - location) / scale).atan();
                Some((zb - za) / PI)
            }
            Density::Histogram(h) => Some(h.mass_between(a, b)),
            _ => None,
        }
    }

    /// Points where a continuous density has structure, used to seed quadrature panels.
    pub fn landmarks(&self) -> Vec<f64> {
        const NORMAL_OFFSETS: [f64; 11] =
            [-12.0, -8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0, 12.0];
        match self {
            Density::Normal { mean, sd } => NORMAL_OFFSETS.iter().map(|k| mean + k * sd).collect(),
            Density::Mixture(cs) => cs
                .iter()
                .flat_map(|c| NORMAL_OFFSETS.iter().map(move |k| c.mean + k * c.sd))
                .collect(),
            Density::Cauchy { location, scale } => {
                [-100.0, -20.0, -5.0, -1.0, 0.0, 1.0, 5.0, 20.0, 100.0]
                    .iter()
                    .map(|k| location + k * scale)
                    .collect()
            }
            Density::Histogram(h) => h.edges.clone(),
            Density::Tilted(t) => {
                let mut v = t.plus.landmarks();
                v.extend(t.minus.landmarks());
                v
            }
            Density::Poisson { .. } | Density::Bernoulli { .. } => Vec::new(),
        }
    }

    pub(crate) fn poisson_mean(&self) -> Option<f64> {
        match self {
            Density::Poisson { mean } => Some(*mean),
            Density::Tilted(t) => match (t.plus.poisson_mean(), t.minus.poisson_mean()) {
                (Some(a), Some(b)) => Some(a.max(b)),
                _ => None,
            },
            _ => None,
        }
    }
}

fn ln_poisson(mean: f64, k: u64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * mean.ln() - mean - ln_factorial(k)
}

impl Tilted {
    /// Rejection sampling from the proposal `s*plus + (1-s)*minus`, which
    /// dominates `plus^s minus^(1-s)` by the weighted AM-GM inequality.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Outcome {
        loop {
            let u: f64 = rng.random();
            let o = if u < self.s {
                self.plus.sample(rng)
            } else {
                self.minus.sample(rng)
            };
            let lp = self.plus.log_density(&o);
            let lm = self.minus.log_density(&o);
            let target = crate::special::interpolate_log(self.s, lp, lm);
            let proposal = log_add_exp(self.s.ln() + lp, (1.0 - self.s).ln() + lm);
            let accept: f64 = rng.random();
            if accept.ln() < target - proposal {
                return o;
            }
        }
    }
}

/// Piecewise-constant density built from a binned histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub(crate) edges: Vec<f64>,
    pub(crate) mass: Vec<f64>,
    pub(crate) ln_density: Vec<f64>,
    cumulative: Vec<f64>,
}

impl Histogram {
    /// Build from bin centres and counts. Zero-count bins receive
    /// `floor * total` pseudocounts so every bin has positive density.
    /// Edges sit halfway between neighbouring centres; the outer bins are
    /// symmetric about their centres.
    pub fn from_counts(centers: &[f64], counts: &[f64], floor: f64) -> Result<Self> {
        if centers.len() != counts.len() {
            return Err(invalid("histogram centres and counts differ in length"));
        }
        if centers.len() < 2 {
            return Err(invalid("histogram needs at least two bins"));
        }
        if !(floor > 0.0) {
            return Err(invalid(format!(
                "histogram floor must be positive, got {floor}"
            )));
        }
        if centers.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(invalid("histogram bin centres must be strictly increasing"));
        }
        if counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
            return Err(invalid("histogram counts must be finite and non-negative"));
        }
        let total: f64 = counts.iter().sum();
        if !(total > 0.0) {
            return Err(invalid("histogram is empty"));
        }
        let n = centers.len();
        let mut edges = Vec::with_capacity(n + 1);
        edges.push(centers[0] - 0.5 * (centers[1] - centers[0]));
        for w in centers.windows(2) {
            edges.push(0.5 * (w[0] + w[1]));
        }
        edges.push(centers[n - 1] + 0.5 * (centers[n - 1] - centers[n - 2]));

        let floored: Vec<f64> = counts
            .iter()
            .map(|&c| if c == 0.0 { floor * total } else { c })
            .collect();
        let norm: f64 = floored.iter().sum();
        let mass: Vec<f64> = floored.iter().map(|c| c / norm).collect();
        let ln_density = mass
            .iter()
            .zip(edges.windows(2))
            .map(|(m, e)| (m / (e[1] - e[0])).ln())
            .collect();
        let mut cumulative = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        cumulative.push(0.0);
        for m in &mass {
            acc += m;
            cumulative.push(acc);
        }
        Ok(Histogram {
            edges,
            mass,
            ln_density,
            cumulative,
        })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn bin_count(&self) -> usize {
        self.mass.len()
    }

    fn contains(&self, x: f64) -> bool {
        x >= self.edges[0] && x <= self.edges[self.edges.len() - 1]
    }

    fn bin_of(&self, x: f64) -> Option<usize> {
        if !self.contains(x) {
            return None;
        }
        let i = self.edges.partition_point(|e| *e <= x);
        Some(i.saturating_sub(1).min(self.mass.len() - 1))
    }

    fn ln_pdf(&self, x: f64) -> f64 {
        self.bin_of(x)
            .map_or(f64::NEG_INFINITY, |i| self.ln_density[i])
    }

    fn cdf(&self, x: f64) -> f64 {
        match self.bin_of(x) {
            None if x < self.edges[0] => 0.0,
            None => 1.0,
            Some(i) => {
                let frac = (x - self.edges[i]) / (self.edges[i + 1] - self.edges[i]);
                self.cumulative[i] + frac * self.mass[i]
            }
        }
    }

    fn mass_between(&self, a: f64, b: f64) -> f64 {
        (self.cdf(b) - self.cdf(a)).max(0.0)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let i = self
            .cumulative
            .partition_point(|c| *c <= u)
            .saturating_sub(1)
            .min(self.mass.len() - 1);
        let v: f64 = rng.random();
        self.edges[i] + v * (self.edges[i + 1] - self.edges[i])
    }
}
