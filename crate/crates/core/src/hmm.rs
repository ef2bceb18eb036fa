//! Repeated readout with eigenvalue transitions between repetitions, modeled
//! as a two-state hidden Markov chain, and Monte Carlo estimation of the
//! cumulative error rates of the likelihood-ratio decision.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chernoff::ChernoffSummary;
use crate::distributions::{Outcome, OutcomePair, Sign};
use crate::error::{invalid, ReadoutError, Result};
use crate::error_model::{ErrorCurve, Method, Uncertainties};
use crate::rng::{child_seed, substream, tie_coin, Purpose};

/// Default number of trajectories per eigenvalue.
pub const DEFAULT_TRAJECTORIES: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct HmmSpec {
    pub pair: OutcomePair,
    /// Probability of a `+1 -> -1` transition per repetition.
    pub p_relax: f64,
    /// Probability of a `-1 -> +1` transition per repetition.
    pub p_excite: f64,
    pub n_max: usize,
}

impl HmmSpec {
    pub fn new(pair: OutcomePair, p_relax: f64, p_excite: f64, n_max: usize) -> Result<Self> {
        for (name, p) in [("p_relax", p_relax), ("p_excite", p_excite)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(invalid(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        Ok(Self {
            pair,
            p_relax,
            p_excite,
            n_max,
        })
    }

    /// No transitions: the ideal QND limit.
    pub fn qnd(pair: OutcomePair, n_max: usize) -> Self {
        Self {
            pair,
            p_relax: 0.0,
            p_excite: 0.0,
            n_max,
        }
    }

    /// `t[a][b]` is the probability of `a -> b`, indexed by [`Sign::index`].
    pub fn transition(&self) -> [[f64; 2]; 2] {
        [
            [1.0 - self.p_relax, self.p_relax],
            [self.p_excite, 1.0 - self.p_excite],
        ]
    }

    /// Largest transition probability, the `p` of `C/p`.
    pub fn p(&self) -> f64 {
        self.p_relax.max(self.p_excite)
    }

    /// Warning text when the transition rate is not small compared to `min(C, 1)`.
    pub fn single_shot_warning(&self, c: f64) -> Option<String> {
        let limit = c.min(1.0);
        (self.p() >= limit).then(|| {
            format!(
                "transition probability {} >= min(C, 1) = {limit}: outside the single-shot regime",
                self.p()
            )
        })
    }

    fn next_state<R: Rng + ?Sized>(&self, a: Sign, rng: &mut R) -> Sign {
        let u: f64 = rng.random();
        let flip = match a {
            Sign::Plus => self.p_relax,
            Sign::Minus => self.p_excite,
        };
        if u < flip {
            a.flip()
        } else {
            a
        }
    }
}

/// Normalized occupation `p_k` of the hidden eigenvalue and the accumulated
/// log-likelihood of the outcomes seen so far.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForwardState {
    pub occupation: [f64; 2],
    pub log_likelihood: f64,
    pub steps: usize,
}

impl ForwardState {
    pub fn new(a0: Sign) -> Self {
        let mut occupation = [0.0; 2];
        occupation[a0.index()] = 1.0;
        Self {
            occupation,
            log_likelihood: 0.0,
            steps: 0,
        }
    }

    /// Absorb one outcome with emission log-probabilities `(ln P+, ln P-)`.
    pub fn step(&mut self, t: &[[f64; 2]; 2], lp: f64, lm: f64) -> Result<()> {
        self.steps += 1;
        let shift = lp.max(lm);
        if shift == f64::NEG_INFINITY {
            return Err(ReadoutError::ZeroLikelihood { step: self.steps });
        }
        let emit = [(lp - shift).exp(), (lm - shift).exp()];
        let mut next = [0.0; 2];
        for a in 0..2 {
            let w = emit[a] * self.occupation[a];
            next[0] += w * t[a][0];
            next[1] += w * t[a][1];
        }
        let norm = next[0] + next[1];
        if !(norm > 0.0) {
            return Err(ReadoutError::ZeroLikelihood { step: self.steps });
        }
        self.occupation = [next[0] / norm, next[1] / norm];
        self.log_likelihood += shift + norm.ln();
        Ok(())
    }
}

/// Draw `n` outcomes starting from eigenvalue `a0`: emit from the current
/// eigenvalue, then apply a transition.
pub fn sample_trajectory<R: Rng + ?Sized>(
    spec: &HmmSpec,
    a0: Sign,
    n: usize,
    rng: &mut R,
) -> Vec<Outcome> {
    sample_path(spec, a0, n, rng).0
}

/// As [`sample_trajectory`], also returning the hidden eigenvalue at each repetition.
pub fn sample_path<R: Rng + ?Sized>(
    spec: &HmmSpec,
    a0: Sign,
    n: usize,
    rng: &mut R,
) -> (Vec<Outcome>, Vec<Sign>) {
    let mut a = a0;
    let mut outcomes = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    for _ in 0..n {
        states.push(a);
        outcomes.push(spec.pair.sample(a, rng));
        a = spec.next_state(a, rng);
    }
    (outcomes, states)
}

/// `ln P(O_1..O_N | a0)` by the normalized forward recurrence.
pub fn forward_loglik(spec: &HmmSpec, outcomes: &[Outcome], a0: Sign) -> Result<f64> {
    let t = spec.transition();
    let mut state = ForwardState::new(a0);
    for o in outcomes {
        let (lp, lm) = spec.pair.log_densities(o)?;
        state.step(&t, lp, lm)?;
    }
    Ok(state.log_likelihood)
}

/// Both hypotheses advanced together. A hypothesis whose likelihood vanishes
/// is retired with log-likelihood `-inf`.
#[derive(Debug, Clone)]
struct Decoder {
    t: [[f64; 2]; 2],
    states: [ForwardState; 2],
    alive: [bool; 2],
}

impl Decoder {
    fn new(spec: &HmmSpec) -> Self {
        Self {
            t: spec.transition(),
            states: [
                ForwardState::new(Sign::Plus),
                ForwardState::new(Sign::Minus),
            ],
            alive: [true; 2],
        }
    }

    fn push(&mut self, lp: f64, lm: f64) -> Result<()> {
        for h in 0..2 {
            if self.alive[h] {
                match self.states[h].step(&self.t, lp, lm) {
                    Ok(()) => {}
                    Err(ReadoutError::ZeroLikelihood { .. }) => self.alive[h] = false,
                    Err(e) => return Err(e),
                }
            }
        }
        if !self.alive[0] && !self.alive[1] {
            return Err(ReadoutError::ZeroLikelihood {
                step: self.states[0].steps.max(self.states[1].steps),
            });
        }
        Ok(())
    }

    fn llr(&self) -> f64 {
        match self.alive {
            [true, true] => self.states[0].log_likelihood - self.states[1].log_likelihood,
            [true, false] => f64::INFINITY,
            _ => f64::NEG_INFINITY,
        }
    }
}

/// Assignment from the cumulative log-likelihood ratio; `coin` settles ties.
pub fn assign(l: f64, coin: impl FnOnce() -> Sign) -> Sign {
    if l > 0.0 {
        Sign::Plus
    } else if l < 0.0 {
        Sign::Minus
    } else {
        coin()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub assignment: Sign,
    /// `ln P+(O) - ln P-(O)`; infinite when one hypothesis is excluded.
    pub llr: f64,
}

/// Decide the initial eigenvalue from a full outcome string. Ties use a fair
/// coin from `rng`.
pub fn decode<R: Rng + ?Sized>(
    spec: &HmmSpec,
    outcomes: &[Outcome],
    rng: &mut R,
) -> Result<Decision> {
    let mut d = Decoder::new(spec);
    for o in outcomes {
        let (lp, lm) = spec.pair.log_densities(o)?;
        d.push(lp, lm)?;
    }
    let llr = d.llr();
    let assignment = assign(llr, || {
        if rng.random::<bool>() {
            Sign::Plus
        } else {
            Sign::Minus
        }
    });
    Ok(Decision { assignment, llr })
}

/// Cumulative log-likelihood ratio after each prefix length in `n_values`
/// (sorted ascending), from a single forward pass.
pub fn prefix_llrs(spec: &HmmSpec, outcomes: &[Outcome], n_values: &[usize]) -> Result<Vec<f64>> {
    let mut d = Decoder::new(spec);
    let mut out = Vec::with_capacity(n_values.len());
    let mut next = n_values.iter().peekable();
    while next.peek() == Some(&&0) {
        out.push(0.0);
        next.next();
    }
    for (k, o) in outcomes.iter().enumerate() {
        if next.peek().is_none() {
            break;
        }
        let (lp, lm) = spec.pair.log_densities(o)?;
        d.push(lp, lm)?;
        while next.peek() == Some(&&(k + 1)) {
            out.push(d.llr());
            next.next();
        }
    }
    if out.len() != n_values.len() {
        return Err(invalid(
            "prefix lengths exceed the trajectory or are not sorted",
        ));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub n_values: Vec<usize>,
    pub m: u64,
    pub seed: u64,
    pub errors_plus: Vec<u64>,
    pub errors_minus: Vec<u64>,
    pub e_plus: Vec<f64>,
    pub e_minus: Vec<f64>,
    pub e_avg: Vec<f64>,
    pub delta_plus: Vec<f64>,
    pub delta_minus: Vec<f64>,
    pub delta_avg: Vec<f64>,
    /// One-sided 95% upper bound `3/m`, reported where no error was seen.
    pub bound_plus: Vec<Option<f64>>,
    pub bound_minus: Vec<Option<f64>>,
}

impl McEstimate {
    fn from_counts(
        n_values: Vec<usize>,
        m: u64,
        seed: u64,
        errors_plus: Vec<u64>,
        errors_minus: Vec<u64>,
    ) -> Self {
        let mf = m as f64;
        let rate = |c: &u64| *c as f64 / mf;
        let delta = |e: &f64| (e * (1.0 - e) / mf).sqrt();
        let bound = |c: &u64| (*c == 0).then_some(3.0 / mf);
        let e_plus: Vec<f64> = errors_plus.iter().map(rate).collect();
        let e_minus: Vec<f64> = errors_minus.iter().map(rate).collect();
        let delta_plus: Vec<f64> = e_plus.iter().map(delta).collect();
        let delta_minus: Vec<f64> = e_minus.iter().map(delta).collect();
        Self {
            e_avg: e_plus
                .iter()
                .zip(&e_minus)
                .map(|(a, b)| 0.5 * (a + b))
                .collect(),
            delta_avg: delta_plus
                .iter()
                .zip(&delta_minus)
                .map(|(a, b)| 0.5 * (a * a + b * b).sqrt())
                .collect(),
            bound_plus: errors_plus.iter().map(bound).collect(),
            bound_minus: errors_minus.iter().map(bound).collect(),
            n_values,
            m,
            seed,
            errors_plus,
            errors_minus,
            e_plus,
            e_minus,
            delta_plus,
            delta_minus,
        }
    }

    pub fn to_error_curve(&self) -> ErrorCurve {
        ErrorCurve {
            n_values: self.n_values.iter().map(|&n| n as f64).collect(),
            e_avg: self.e_avg.clone(),
            e_plus: self.e_plus.clone(),
            e_minus: self.e_minus.clone(),
            method: Method::MonteCarlo,
            uncertainties: Some(Uncertainties {
                e_avg: self.delta_avg.clone(),
                e_plus: self.delta_plus.clone(),
                e_minus: self.delta_minus.clone(),
            }),
            fallback: vec![false; self.n_values.len()],
        }
    }
}

/// Decision errors of one trajectory at every requested prefix length.
fn trajectory_errors(
    spec: &HmmSpec,
    a0: Sign,
    index: u64,
    n_values: &[usize],
    seed: u64,
) -> Result<Vec<bool>> {
    let mut rng = substream(seed, Purpose::Trajectory, a0, index);
    let mut d = Decoder::new(spec);
    let mut a = a0;
    let mut wrong = Vec::with_capacity(n_values.len());
    let mut next = 0;
    let top = *n_values.last().expect("non-empty");
    for k in 1..=top {
        let o = spec.pair.sample(a, &mut rng);
        let (lp, lm) = spec.pair.log_densities(&o)?;
        d.push(lp, lm)?;
        a = spec.next_state(a, &mut rng);
        while next < n_values.len() && n_values[next] == k {
            let guess = assign(d.llr(), || tie_coin(seed, a0, index, k));
            wrong.push(guess != a0);
            next += 1;
        }
    }
    Ok(wrong)
}

fn add(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

/// Estimate `e+_N`, `e-_N` from `m` trajectories per eigenvalue. Results depend
/// only on `(seed, spec, m, n_values)`, not on `threads` (0 selects the rayon default).
pub fn monte_carlo(
    spec: &HmmSpec,
    m: u64,
    n_values: &[usize],
    seed: u64,
    threads: usize,
) -> Result<McEstimate> {
    if m == 0 {
        return Err(invalid("m must be at least 1"));
    }
    let mut ns = n_values.to_vec();
    ns.sort_unstable();
    ns.dedup();
    if ns.is_empty() || ns[0] == 0 {
        return Err(invalid("repetition counts must be non-empty and >= 1"));
    }
    if *ns.last().expect("non-empty") > spec.n_max {
        return Err(invalid(format!(
            "requested N = {} exceeds n_max = {}",
            ns.last().expect("non-empty"),
            spec.n_max
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| invalid(format!("thread pool: {e}")))?;
    let count = |a0: Sign| -> Result<Vec<u64>> {
        (0..m)
            .into_par_iter()
            .try_fold(
                || vec![0u64; ns.len()],
                |mut acc, i| {
                    for (slot, wrong) in acc
                        .iter_mut()
                        .zip(trajectory_errors(spec, a0, i, &ns, seed)?)
                    {
                        *slot += wrong as u64;
                    }
                    Ok(acc)
                },
            )
            .try_reduce(|| vec![0u64; ns.len()], |a, b| Ok(add(a, b)))
    };
    let (plus, minus) =
        pool.install(|| -> Result<_> { Ok((count(Sign::Plus)?, count(Sign::Minus)?)) })?;
    Ok(McEstimate::from_counts(ns, m, seed, plus, minus))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseModel {
    pub label: String,
    pub spec: HmmSpec,
    pub summary: ChernoffSummary,
}

impl CollapseModel {
    /// `C/p`, `None` for the QND case `p = 0`.
    pub fn c_over_p(&self) -> Option<f64> {
        let p = self.spec.p();
        (p > 0.0).then(|| self.summary.c / p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseRow {
    pub model: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "CN")]
    pub cn: f64,
    /// `None` means `C/p` is infinite.
    #[serde(rename = "C_over_p")]
    pub c_over_p: Option<f64>,
    #[serde(with = "crate::serde_float")]
    pub ln_e: f64,
    #[serde(with = "crate::serde_float")]
    pub delta_ln_e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDeviation {
    pub a: String,
    pub b: String,
    pub max_abs_deviation: f64,
    /// Largest deviation divided by the allowed deviation at that point.
    pub worst_ratio: f64,
    #[serde(rename = "worst_CN")]
    pub worst_cn: Option<f64>,
    pub points: usize,
    pub within_threshold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseGroup {
    #[serde(rename = "C_over_p")]
    pub c_over_p: Option<f64>,
    pub models: Vec<String>,
    pub pairs: Vec<PairDeviation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseTable {
    pub rows: Vec<CollapseRow>,
    pub groups: Vec<CollapseGroup>,
    #[serde(rename = "CN_range")]
    pub cn_range: (f64, f64),
    pub relative_tolerance: f64,
    pub sigma_multiplier: f64,
    pub m: u64,
    pub seed: u64,
    pub within_threshold: bool,
}

/// Relative spread of `C/p` treated as the same group.
pub const C_OVER_P_MATCH: f64 = 0.02;
/// Deviation allowed relative to `|ln e_N|`.
pub const COLLAPSE_REL_TOL: f64 = 0.15;
/// Deviation allowed in combined standard errors.
pub const COLLAPSE_SIGMAS: f64 = 3.0;

fn same_group(a: Option<f64>, b: Option<f64>) -> bool {
    match (a, b) {
        (None, None) => true,
        (Some(x), Some(y)) => (x - y).abs() <= C_OVER_P_MATCH * x.abs().max(y.abs()),
        _ => false,
    }
}

/// Linear interpolation of `(ln e, delta)` in `CN`.
fn interpolate(rows: &[&CollapseRow], cn: f64) -> Option<(f64, f64)> {
    let tol = 1e-9 * cn.abs().max(1.0);
    for w in rows.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        if (lo.cn - cn).abs() <= tol {
            return Some((lo.ln_e, lo.delta_ln_e));
        }
        if lo.cn < cn && cn < hi.cn {
            let f = (cn - lo.cn) / (hi.cn - lo.cn);
            return Some((
                lo.ln_e + f * (hi.ln_e - lo.ln_e),
                lo.delta_ln_e + f * (hi.delta_ln_e - lo.delta_ln_e),
            ));
        }
    }
    rows.last()
        .filter(|r| (r.cn - cn).abs() <= tol)
        .map(|r| (r.ln_e, r.delta_ln_e))
}

fn compare(
    a: &[&CollapseRow],
    b: &[&CollapseRow],
    range: (f64, f64),
) -> Option<(f64, f64, Option<f64>, usize)> {
    let mut worst = (0.0f64, 0.0f64, None, 0usize);
    for r in a
        .iter()
        .filter(|r| r.cn >= range.0 - 1e-12 && r.cn <= range.1 + 1e-12)
    {
        let Some((ln_b, d_b)) = interpolate(b, r.cn) else {
            continue;
        };
        if !(r.ln_e.is_finite() && ln_b.is_finite()) {
            continue;
        }
        let dev = (r.ln_e - ln_b).abs();
        let allowed = (COLLAPSE_REL_TOL * r.ln_e.abs())
            .max(COLLAPSE_SIGMAS * (r.delta_ln_e.powi(2) + d_b.powi(2)).sqrt());
        let ratio = dev / allowed;
        worst.0 = worst.0.max(dev);
        if ratio >= worst.1 {
            worst.1 = ratio;
            worst.2 = Some(r.cn);
        }
        worst.3 += 1;
    }
    (worst.3 > 0).then_some(worst)
}

/// Simulate every model and compare `ln e_N` at matched `CN` within groups of
/// equal `C/p`. Model `i` uses the stream family `child_seed(seed, i)`.
pub fn universality_collapse(
    models: &[CollapseModel],
    m: u64,
    n_values: &[usize],
    seed: u64,
    threads: usize,
    cn_range: (f64, f64),
) -> Result<CollapseTable> {
    if models.is_empty() {
        return Err(invalid("collapse needs at least one model"));
    }
    let mut rows = Vec::new();
    for (i, model) in models.iter().enumerate() {
        if model.summary.c <= 0.0 {
            return Err(ReadoutError::Degenerate { c: model.summary.c });
        }
        let est = monte_carlo(
            &model.spec,
            m,
            n_values,
            child_seed(seed, i as u64),
            threads,
        )?;
        for (k, &n) in est.n_values.iter().enumerate() {
            let e = est.e_avg[k];
            rows.push(CollapseRow {
                model: model.label.clone(),
                n,
                cn: model.summary.c * n as f64,
                c_over_p: model.c_over_p(),
                ln_e: e.ln(),
                delta_ln_e: if e > 0.0 {
                    est.delta_avg[k] / e
                } else {
                    f64::INFINITY
                },
            });
        }
    }

    let mut groups: Vec<CollapseGroup> = Vec::new();
    for model in models {
        let key = model.c_over_p();
        match groups.iter_mut().find(|g| same_group(g.c_over_p, key)) {
            Some(g) => g.models.push(model.label.clone()),
            None => groups.push(CollapseGroup {
                c_over_p: key,
                models: vec![model.label.clone()],
                pairs: Vec::new(),
            }),
        }
    }
    let rows_of =
        |label: &str| -> Vec<&CollapseRow> { rows.iter().filter(|r| r.model == label).collect() };
    for g in &mut groups {
        for i in 0..g.models.len() {
            for j in i + 1..g.models.len() {
                let (ra, rb) = (rows_of(&g.models[i]), rows_of(&g.models[j]));
                let forward = compare(&ra, &rb, cn_range);
                let backward = compare(&rb, &ra, cn_range);
                let merged = match (forward, backward) {
                    (Some(f), Some(b)) => Some(if b.1 > f.1 {
                        (f.0.max(b.0), b.1, b.2, f.3 + b.3)
                    } else {
                        (f.0.max(b.0), f.1, f.2, f.3 + b.3)
                    }),
                    (x, None) | (None, x) => x,
                };
                let (dev, ratio, cn, points) = merged.unwrap_or((0.0, 0.0, None, 0));
                g.pairs.push(PairDeviation {
                    a: g.models[i].clone(),
                    b: g.models[j].clone(),
                    max_abs_deviation: dev,
                    worst_ratio: ratio,
                    worst_cn: cn,
                    points,
                    within_threshold: points > 0 && ratio <= 1.0,
                });
            }
        }
    }
    let within_threshold = groups
        .iter()
        .flat_map(|g| &g.pairs)
        .all(|p| p.within_threshold);
    Ok(CollapseTable {
        rows,
        groups,
        cn_range,
        relative_tolerance: COLLAPSE_REL_TOL,
        sigma_multiplier: COLLAPSE_SIGMAS,
        m,
        seed,
        within_threshold,
    })
}
