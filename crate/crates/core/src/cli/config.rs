//! TOML run configuration. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::distributions::{NormalComponent, DEFAULT_HISTOGRAM_FLOOR, DEFAULT_LAMBDA_MAX};
use crate::{Density, OutcomePair};

use super::ConfigError;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub pair: Option<PairConfig>,
    pub chernoff: Option<ChernoffSection>,
    pub errors: Option<ErrorsSection>,
    pub advantage: Option<AdvantageSection>,
    pub simulate: Option<SimulateSection>,
    pub collapse: Option<CollapseSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentConfig {
    pub weight: f64,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PairConfig {
    Gaussian {
        r: f64,
    },
    Poissonian {
        mu_plus: f64,
        mu_minus: f64,
    },
    Cauchy {
        gamma: f64,
    },
    Binary {
        eps_plus: f64,
        eps_minus: f64,
    },
    Conversion {
        r: f64,
        eta: f64,
    },
    Mixture {
        plus: Vec<ComponentConfig>,
        minus: Vec<ComponentConfig>,
    },
    /// Two histogram files, each `bin_center,count` with the same bins.
    Empirical {
        plus: PathBuf,
        minus: PathBuf,
        #[serde(default = "default_floor")]
        floor: f64,
        #[serde(default = "default_lambda_max")]
        lambda_max: f64,
    },
}

fn default_floor() -> f64 {
    DEFAULT_HISTOGRAM_FLOOR
}

fn default_lambda_max() -> f64 {
    DEFAULT_LAMBDA_MAX
}

impl PairConfig {
    /// Relative histogram paths are resolved against `base`.
    pub fn build(&self, base: &Path) -> anyhow::Result<OutcomePair> {
        let mixture = |c: &[ComponentConfig]| {
            Density::mixture(
                c.iter()
                    .map(|c| NormalComponent {
                        weight: c.weight,
                        mean: c.mean,
                        sd: c.sd,
                    })
                    .collect(),
            )
        };
        let pair = match self {
            PairConfig::Gaussian { r } => OutcomePair::gaussian(*r)?,
            PairConfig::Poissonian { mu_plus, mu_minus } => {
                OutcomePair::poissonian(*mu_plus, *mu_minus)?
            }
            PairConfig::Cauchy { gamma } => OutcomePair::cauchy(*gamma)?,
            PairConfig::Binary {
                eps_plus,
                eps_minus,
            } => OutcomePair::binary(*eps_plus, *eps_minus)?,
            PairConfig::Conversion { r, eta } => OutcomePair::gaussian_with_conversion(*r, *eta)?,
            PairConfig::Mixture { plus, minus } => {
                OutcomePair::new(mixture(plus)?, mixture(minus)?)?
            }
            PairConfig::Empirical {
                plus,
                minus,
                floor,
                lambda_max,
            } => {
                let (cp, np) = read_histogram(&base.join(plus))?;
                let (cm, nm) = read_histogram(&base.join(minus))?;
                if cp.len() != cm.len()
                    || cp
                        .iter()
                        .zip(&cm)
                        .any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + a.abs()))
                {
                    return Err(ConfigError(format!(
                        "histograms {} and {} do not share the same bin centres",
                        plus.display(),
                        minus.display()
                    ))
                    .into());
                }
                OutcomePair::empirical(&cp, &np, &nm, *floor, *lambda_max)?
            }
        };
        Ok(pair)
    }
}

/// Two-column `bin_center,count` CSV; a non-numeric first row is a header.
pub fn read_histogram(path: &Path) -> anyhow::Result<(Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read histogram {}: {e}", path.display())))?;
    parse_histogram(&text).map_err(|e| ConfigError(format!("{}: {e}", path.display())).into())
}

pub fn parse_histogram(text: &str) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let (mut centers, mut counts) = (Vec::new(), Vec::new());
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| e.to_string())?;
        if record.len() != 2 {
            return Err(format!(
                "line {}: expected 2 columns, found {}",
                i + 1,
                record.len()
            ));
        }
        let parsed = (record[0].parse::<f64>(), record[1].parse::<f64>());
        match parsed {
            (Ok(c), Ok(n)) => {
                centers.push(c);
                counts.push(n);
            }
            _ if i == 0 => continue,
            _ => return Err(format!("line {}: not a number", i + 1)),
        }
    }
    if centers.is_empty() {
        return Err("no histogram rows".into());
    }
    Ok((centers, counts))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChernoffSection {
    pub tol: Option<f64>,
    /// Also report the small-C expansion.
    #[serde(default)]
    pub small_c: bool,
}

/// Repetition counts: an explicit list `n` or the range `n_min..=n_max`.
pub fn repetitions(
    n: &Option<Vec<u64>>,
    n_min: Option<u64>,
    n_max: Option<u64>,
) -> Result<Vec<usize>, ConfigError> {
    let values: Vec<u64> = match (n, n_min, n_max) {
        (Some(list), None, None) => list.clone(),
        (None, lo, Some(hi)) => (lo.unwrap_or(1)..=hi).collect(),
        (None, _, None) => return Err(ConfigError("repetitions need `n` or `n_max`".into())),
        (Some(_), _, _) => {
            return Err(ConfigError(
                "give either `n` or `n_min`/`n_max`, not both".into(),
            ))
        }
    };
    if values.is_empty() || values.contains(&0) {
        return Err(ConfigError(
            "repetition counts must be non-empty and >= 1".into(),
        ));
    }
    if values.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ConfigError(
            "repetition counts must be strictly increasing".into(),
        ));
    }
    Ok(values.into_iter().map(|n| n as usize).collect())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorsSection {
    pub n: Option<Vec<u64>>,
    pub n_min: Option<u64>,
    pub n_max: Option<u64>,
    #[serde(default)]
    pub upper_bound: bool,
    pub tol: Option<f64>,
    /// Explicit `(C, alpha, s_star)`; replaces the pair.
    #[serde(rename = "C")]
    pub c: Option<f64>,
    pub alpha: Option<f64>,
    pub s_star: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Spacing {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub points: usize,
    #[serde(default)]
    pub spacing: Spacing,
}

impl Axis {
    pub fn values(&self) -> Result<Vec<f64>, ConfigError> {
        let positive = self.min > 0.0 || self.spacing == Spacing::Linear;
        if !(self.min.is_finite()
            && self.max.is_finite()
            && self.min <= self.max
            && positive
            && self.points >= 1)
        {
            return Err(ConfigError(format!(
                "invalid axis: min = {}, max = {}, points = {}",
                self.min, self.max, self.points
            )));
        }
        if self.points == 1 {
            return Ok(vec![self.min]);
        }
        let k = (self.points - 1) as f64;
        Ok((0..self.points)
            .map(|i| {
                let f = i as f64 / k;
                match self.spacing {
                    Spacing::Log => (self.min.ln() + f * (self.max / self.min).ln()).exp(),
                    Spacing::Linear => self.min + f * (self.max - self.min),
                }
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub eps_g: Axis,
    pub eta: Axis,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdvantageSection {
    pub grid: Option<GridSection>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub n: Option<Vec<u64>>,
    pub n_min: Option<u64>,
    pub n_max: Option<u64>,
    #[serde(default)]
    pub p_relax: f64,
    #[serde(default)]
    pub p_excite: f64,
    pub m: Option<u64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub label: String,
    pub pair: PairConfig,
    #[serde(default)]
    pub p_relax: f64,
    #[serde(default)]
    pub p_excite: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CollapseSection {
    pub n: Option<Vec<u64>>,
    pub n_min: Option<u64>,
    pub n_max: Option<u64>,
    pub m: Option<u64>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub tol: Option<f64>,
    #[serde(rename = "CN_range")]
    pub cn_range: Option<[f64; 2]>,
    #[serde(rename = "model", default)]
    pub models: Vec<ModelConfig>,
}

macro_rules! impl_repetitions {
    ($($t:ty),*) => {$(
        impl $t {
            pub fn repetitions(&self) -> Result<Vec<usize>, ConfigError> {
                repetitions(&self.n, self.n_min, self.n_max)
            }
        }
    )*};
}

impl_repetitions!(ErrorsSection, SimulateSection, CollapseSection);

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError(format!("invalid config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| ConfigError(format!("invalid config {}: {e}", path.display())))
    }

    pub fn pair(&self) -> Result<&PairConfig, ConfigError> {
        self.pair
            .as_ref()
            .ok_or_else(|| ConfigError("config has no [pair] section".into()))
    }
}
