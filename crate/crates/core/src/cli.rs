//! Command-line front end: reads a TOML run configuration, runs one analysis
//! and writes plot-ready CSV or JSON.

pub mod config;
pub mod table;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context as _;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chernoff::{chernoff_information, small_c_expansion, ChernoffSummary, SmallCExpansion};
use crate::error_model::{
    advantage, advantage_grid, chernoff_upper_bound, gaussian_ansatz, saddle_point_from,
    AdvantageReport, GridCell, SaddleParams,
};
use crate::hmm::{
    monte_carlo, universality_collapse, CollapseGroup, CollapseModel, CollapseRow, HmmSpec,
    McEstimate, DEFAULT_TRAJECTORIES,
};

use crate::ReadoutError;
use config::{PairConfig, RunConfig};
use table::{fmt12, fmt_opt, Table};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_CN_RANGE: [f64; 2] = [0.5, 3.0];

pub const CHERNOFF_HEADER: &[&str] = &[
    "C",
    "s_star",
    "alpha",
    "bhattacharyya",
    "k2",
    "tolerance",
    "integration_error",
    "degenerate",
    "boundary",
];
pub const ERRORS_HEADER: &[&str] = &[
    "N",
    "CN",
    "gaussian_ansatz",
    "saddle_e_avg",
    "saddle_e_plus",
    "saddle_e_minus",
    "fallback",
];
pub const UPPER_BOUND_COLUMN: &str = "chernoff_upper_bound";
pub const ADVANTAGE_HEADER: &[&str] =
    &["C", "C_b", "advantage", "eps_plus", "eps_minus", "s_star_b"];
pub const GRID_HEADER: &[&str] = &["eps_g", "eta", "r", "C", "C_b", "advantage"];
pub const SIMULATE_HEADER: &[&str] = &["a0", "N", "errors", "e", "delta_e", "upper_bound"];
pub const COLLAPSE_HEADER: &[&str] = &["model", "N", "CN", "C_over_p", "ln_e", "delta_ln_e"];

/// Bad input: unreadable or invalid configuration.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct ConfigError(pub String);

#[derive(Debug, Parser)]
#[command(
    name = "qnd-readout",
    version,
    about = "Chernoff-information analysis of repetitive QND readout"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Chernoff information, s*, alpha and Bhattacharyya distance of a pair
    Chernoff(AnalysisArgs),
    /// Analytic error-rate curves
    Errors(AnalysisArgs),
    /// Soft-decoding advantage of a pair, or the conversion-error grid
    Advantage(OutputArgs),
    /// Monte Carlo error rates of the hidden-Markov readout model
    Simulate(SimulationArgs),
    /// Overlay several models against CN and compare within equal C/p
    Collapse(CollapseArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct AnalysisArgs {
    #[command(flatten)]
    pub io: OutputArgs,
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulationArgs {
    #[command(flatten)]
    pub io: OutputArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Trajectories per eigenvalue.
    #[arg(long)]
    pub m: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Run manifest path; defaults to `<out>.manifest.json` next to `--out`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CollapseArgs {
    #[command(flatten)]
    pub io: OutputArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub m: Option<u64>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Summary path; defaults to `<out>.summary.json` next to `--out`.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub m: Option<u64>,
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChernoffReport {
    pub pair: PairConfig,
    pub summary: ChernoffSummary,
    pub small_c_expansion: Option<SmallCExpansion>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorsRow {
    #[serde(rename = "N")]
    pub n: f64,
    #[serde(rename = "CN")]
    pub cn: f64,
    pub gaussian_ansatz: f64,
    pub saddle_e_avg: f64,
    pub saddle_e_plus: f64,
    pub saddle_e_minus: f64,
    pub fallback: bool,
    pub chernoff_upper_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorsReport {
    pub params: SaddleParams,
    pub rows: Vec<ErrorsRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdvantageOutput {
    Report(AdvantageReport),
    Grid(Vec<GridCell>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub pair: PairConfig,
    pub p_relax: f64,
    pub p_excite: f64,
    pub estimate: McEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub m: u64,
    pub threads: usize,
    pub n_values: Vec<usize>,
    pub spec_sha256: String,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSummary {
    pub label: String,
    #[serde(rename = "C")]
    pub c: f64,
    pub p: f64,
    #[serde(rename = "C_over_p")]
    pub c_over_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseSummary {
    pub models: Vec<ModelSummary>,
    pub groups: Vec<CollapseGroup>,
    #[serde(rename = "CN_range")]
    pub cn_range: (f64, f64),
    pub relative_tolerance: f64,
    pub sigma_multiplier: f64,
    pub m: u64,
    pub seed: u64,
    pub within_threshold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    pub summary: CollapseSummary,
    pub rows: Vec<CollapseRow>,
}

fn section<T: Default + Clone>(s: &Option<T>) -> T {
    s.clone().unwrap_or_default()
}

pub fn run_chernoff(
    cfg: &RunConfig,
    base: &Path,
    ov: &Overrides,
    warnings: &mut Vec<String>,
) -> anyhow::Result<ChernoffReport> {
    let sec = section(&cfg.chernoff);
    let pair_cfg = cfg.pair()?;
    let pair = pair_cfg.build(base)?;
    let tol = ov.tol.or(sec.tol).unwrap_or(DEFAULT_TOL);
    let summary = chernoff_information(&pair, tol)?;
    if summary.degenerate {
        warnings.push(format!(
            "the two distributions are indistinguishable (C = {:e})",
            summary.c
        ));
    }
    if summary.boundary {
        warnings.push(format!(
            "optimum on the boundary s* = {}; alpha is undefined",
            summary.s_star
        ));
    }
    let small_c_expansion = if sec.small_c {
        let e = small_c_expansion(&pair)?;
        if e.unreliable {
            warnings.push(format!(
                "small-C expansion used outside its range (C = {})",
                e.c
            ));
        }
        Some(e)
    } else {
        None
    };
    Ok(ChernoffReport {
        pair: pair_cfg.clone(),
        summary,
        small_c_expansion,
    })
}

pub fn run_errors(
    cfg: &RunConfig,
    base: &Path,
    ov: &Overrides,
    warnings: &mut Vec<String>,
) -> anyhow::Result<ErrorsReport> {
    let sec = cfg
        .errors
        .clone()
        .ok_or_else(|| ConfigError("config has no [errors] section".into()))?;
    let ns: Vec<f64> = sec.repetitions()?.into_iter().map(|n| n as f64).collect();
    let params = match (sec.c, sec.alpha, sec.s_star) {
        (Some(c), Some(alpha), Some(s_star)) => {
            if cfg.pair.is_some() {
                warnings
                    .push("explicit C, alpha, s_star given; the [pair] section is ignored".into());
            }
            SaddleParams { c, alpha, s_star }
        }
        (None, None, None) => {
            let pair = cfg.pair()?.build(base)?;
            let tol = ov.tol.or(sec.tol).unwrap_or(DEFAULT_TOL);
            let summary = chernoff_information(&pair, tol)?;
            if summary.degenerate {
                warnings.push(format!(
                    "the two distributions are indistinguishable (C = {:e})",
                    summary.c
                ));
            }
            SaddleParams::from(&summary)
        }
        _ => {
            return Err(ConfigError(
                "[errors] needs all of C, alpha, s_star or none of them".into(),
            )
            .into())
        }
    };
    let gauss = gaussian_ansatz(params.c, &ns)?;
    let saddle = saddle_point_from(&params, &ns)?;
    let bound = if sec.upper_bound {
        Some(chernoff_upper_bound(params.c, &ns)?)
    } else {
        None
    };
    let rows = ns
        .iter()
        .enumerate()
        .map(|(i, &n)| ErrorsRow {
            n,
            cn: params.c * n,
            gaussian_ansatz: gauss.e_avg[i],
            saddle_e_avg: saddle.e_avg[i],
            saddle_e_plus: saddle.e_plus[i],
            saddle_e_minus: saddle.e_minus[i],
            fallback: saddle.fallback[i],
            chernoff_upper_bound: bound.as_ref().map(|b| b.e_avg[i]),
        })
        .collect();
    Ok(ErrorsReport { params, rows })
}

pub fn run_advantage(cfg: &RunConfig, base: &Path) -> anyhow::Result<AdvantageOutput> {
    match section(&cfg.advantage).grid {
        Some(grid) => Ok(AdvantageOutput::Grid(advantage_grid(
            &grid.eps_g.values()?,
            &grid.eta.values()?,
        )?)),
        None => Ok(AdvantageOutput::Report(advantage(
            &cfg.pair()?.build(base)?,
        )?)),
    }
}

/// SHA-256 over the canonical JSON of the pair and transition probabilities,
/// plus the raw bytes of any histogram files.
pub fn spec_hash(
    pair: &PairConfig,
    p_relax: f64,
    p_excite: f64,
    base: &Path,
) -> anyhow::Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&(pair, p_relax, p_excite))?);
    if let PairConfig::Empirical { plus, minus, .. } = pair {
        for p in [plus, minus] {
            let path = base.join(p);
            h.update(
                std::fs::read(&path).with_context(|| format!("cannot read {}", path.display()))?,
            );
        }
    }
    Ok(hex::encode(h.finalize()))
}

pub fn run_simulate(
    cfg: &RunConfig,
    base: &Path,
    ov: &Overrides,
    warnings: &mut Vec<String>,
) -> anyhow::Result<(SimulateReport, Manifest)> {
    let sec = cfg
        .simulate
        .clone()
        .ok_or_else(|| ConfigError("config has no [simulate] section".into()))?;
    let pair_cfg = cfg.pair()?;
    let ns = sec.repetitions()?;
    let seed = ov.seed.or(sec.seed).unwrap_or(0);
    let m = ov.m.or(sec.m).unwrap_or(DEFAULT_TRAJECTORIES);
    let threads = ov.threads.or(sec.threads).unwrap_or(0);
    let pair = pair_cfg.build(base)?;
    let spec = HmmSpec::new(
        pair,
        sec.p_relax,
        sec.p_excite,
        *ns.last().expect("non-empty"),
    )?;
    if spec.p() > 0.0 {
        let summary = chernoff_information(&spec.pair, ov.tol.unwrap_or(DEFAULT_TOL))?;
        warnings.extend(spec.single_shot_warning(summary.c));
    }
    let start = Instant::now();
    let estimate = monte_carlo(&spec, m, &ns, seed, threads)?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").into(),
        seed,
        m,
        threads,
        n_values: ns,
        spec_sha256: spec_hash(pair_cfg, sec.p_relax, sec.p_excite, base)?,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    let report = SimulateReport {
        pair: pair_cfg.clone(),
        p_relax: sec.p_relax,
        p_excite: sec.p_excite,
        estimate,
    };
    Ok((report, manifest))
}

pub fn run_collapse(
    cfg: &RunConfig,
    base: &Path,
    ov: &Overrides,
    warnings: &mut Vec<String>,
) -> anyhow::Result<CollapseReport> {
    let sec = cfg
        .collapse
        .clone()
        .ok_or_else(|| ConfigError("config has no [collapse] section".into()))?;
    if sec.models.is_empty() {
        return Err(ConfigError("[collapse] needs at least one [[collapse.model]]".into()).into());
    }
    let [lo, hi] = sec.cn_range.unwrap_or(DEFAULT_CN_RANGE);
    if !(lo.is_finite() && hi.is_finite() && 0.0 <= lo && lo < hi) {
        return Err(ConfigError(format!("invalid CN_range [{lo}, {hi}]")).into());
    }
    let tol = ov.tol.or(sec.tol).unwrap_or(DEFAULT_TOL);
    let mut summaries = Vec::new();
    for mc in &sec.models {
        let pair = mc.pair.build(base)?;
        let summary =
            chernoff_information(&pair, tol).with_context(|| format!("model {}", mc.label))?;
        summaries.push((pair, summary));
    }
    let ns = if sec.n.is_some() || sec.n_max.is_some() {
        sec.repetitions()?
    } else {
        let c_min = summaries
            .iter()
            .map(|(_, s)| s.c)
            .fold(f64::INFINITY, f64::min);
        if !(c_min > 0.0) {
            return Err(ConfigError("a collapse model has C = 0".into()).into());
        }
        (1..=(hi / c_min).ceil() as usize + 1).collect()
    };
    let n_max = *ns.last().expect("non-empty");
    let mut models = Vec::new();
    for (mc, (pair, summary)) in sec.models.iter().zip(summaries) {
        let spec = HmmSpec::new(pair, mc.p_relax, mc.p_excite, n_max)?;
        if spec.p() > 0.0 {
            warnings.extend(
                spec.single_shot_warning(summary.c)
                    .map(|w| format!("{}: {w}", mc.label)),
            );
        }
        models.push(CollapseModel {
            label: mc.label.clone(),
            spec,
            summary,
        });
    }
    let seed = ov.seed.or(sec.seed).unwrap_or(0);
    let m = ov.m.or(sec.m).unwrap_or(DEFAULT_TRAJECTORIES);
    let threads = ov.threads.or(sec.threads).unwrap_or(0);
    let table = universality_collapse(&models, m, &ns, seed, threads, (lo, hi))?;
    if !table.within_threshold {
        warnings.push("models of equal C/p do not collapse within the threshold".into());
    }
    let summary = CollapseSummary {
        models: models
            .iter()
            .map(|m| ModelSummary {
                label: m.label.clone(),
                c: m.summary.c,
                p: m.spec.p(),
                c_over_p: m.c_over_p(),
            })
            .collect(),
        groups: table.groups,
        cn_range: table.cn_range,
        relative_tolerance: table.relative_tolerance,
        sigma_multiplier: table.sigma_multiplier,
        m: table.m,
        seed: table.seed,
        within_threshold: table.within_threshold,
    };
    Ok(CollapseReport {
        summary,
        rows: table.rows,
    })
}

fn bool_str(b: bool) -> String {
    b.to_string()
}

pub fn chernoff_csv(r: &ChernoffReport) -> String {
    let s = &r.summary;
    let mut t = Table::new(CHERNOFF_HEADER);
    t.row([
        fmt12(s.c),
        fmt12(s.s_star),
        fmt12(s.alpha),
        fmt12(s.bhattacharyya),
        fmt12(s.k2),
        fmt12(s.tolerance),
        fmt12(s.integration_error),
        bool_str(s.degenerate),
        bool_str(s.boundary),
    ]);
    t.finish()
}

pub fn errors_header(upper_bound: bool) -> Vec<&'static str> {
    let mut h = ERRORS_HEADER.to_vec();
    if upper_bound {
        h.push(UPPER_BOUND_COLUMN);
    }
    h
}

pub fn errors_csv(r: &ErrorsReport) -> String {
    let with_bound = r.rows.iter().any(|row| row.chernoff_upper_bound.is_some());
    let mut t = Table::new(&errors_header(with_bound));
    for row in &r.rows {
        let mut f = vec![
            fmt12(row.n),
            fmt12(row.cn),
            fmt12(row.gaussian_ansatz),
            fmt12(row.saddle_e_avg),
            fmt12(row.saddle_e_plus),
            fmt12(row.saddle_e_minus),
            bool_str(row.fallback),
        ];
        if with_bound {
            f.push(fmt_opt(row.chernoff_upper_bound));
        }
        t.row(f);
    }
    t.finish()
}

pub fn advantage_csv(out: &AdvantageOutput) -> String {
    match out {
        AdvantageOutput::Report(a) => {
            let mut t = Table::new(ADVANTAGE_HEADER);
            t.row([a.c, a.c_b, a.advantage, a.eps_plus, a.eps_minus, a.s_star_b].map(fmt12));
            t.finish()
        }
        AdvantageOutput::Grid(cells) => {
            let mut t = Table::new(GRID_HEADER);
            for g in cells {
                t.row([g.eps_g, g.eta, g.r, g.c, g.c_b, g.advantage].map(fmt12));
            }
            t.finish()
        }
    }
}

struct Series<'a> {
    a0: &'static str,
    counts: Vec<u64>,
    rate: &'a [f64],
    delta: &'a [f64],
    bound: Vec<Option<f64>>,
}

pub fn simulate_csv(r: &SimulateReport) -> String {
    let e = &r.estimate;
    let series = [
        Series {
            a0: "+",
            counts: e.errors_plus.clone(),
            rate: &e.e_plus,
            delta: &e.delta_plus,
            bound: e.bound_plus.clone(),
        },
        Series {
            a0: "-",
            counts: e.errors_minus.clone(),
            rate: &e.e_minus,
            delta: &e.delta_minus,
            bound: e.bound_minus.clone(),
        },
        Series {
            a0: "avg",
            counts: e
                .errors_plus
                .iter()
                .zip(&e.errors_minus)
                .map(|(a, b)| a + b)
                .collect(),
            rate: &e.e_avg,
            delta: &e.delta_avg,
            bound: e
                .bound_plus
                .iter()
                .zip(&e.bound_minus)
                .map(|(a, b)| a.zip(*b).map(|(a, b)| 0.5 * (a + b)))
                .collect(),
        },
    ];
    let mut t = Table::new(SIMULATE_HEADER);
    for s in &series {
        for (i, n) in e.n_values.iter().enumerate() {
            t.row([
                s.a0.to_string(),
                n.to_string(),
                s.counts[i].to_string(),
                fmt12(s.rate[i]),
                fmt12(s.delta[i]),
                fmt_opt(s.bound[i]),
            ]);
        }
    }
    t.finish()
}

pub fn collapse_csv(rows: &[CollapseRow]) -> String {
    let mut t = Table::new(COLLAPSE_HEADER);
    for r in rows {
        t.row([
            r.model.clone(),
            r.n.to_string(),
            fmt12(r.cn),
            fmt12(r.c_over_p.unwrap_or(f64::INFINITY)),
            fmt12(r.ln_e),
            fmt12(r.delta_ln_e),
        ]);
    }
    t.finish()
}

fn json<T: Serialize>(v: &T) -> anyhow::Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn write_to(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => stdout
            .write_all(text.as_bytes())
            .context("cannot write to standard output"),
    }
}

/// `sim.csv` -> `sim.<suffix>`.
fn sibling(out: &Path, suffix: &str) -> PathBuf {
    out.with_extension(suffix)
}

fn load(io: &OutputArgs) -> anyhow::Result<(RunConfig, PathBuf)> {
    let cfg = RunConfig::load(&io.config)?;
    let base = io
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    Ok((cfg, base))
}

/// Runs one subcommand; warnings go to `stderr`.
pub fn execute(cli: &Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> anyhow::Result<()> {
    let mut warnings = Vec::new();
    let result = dispatch(cli, stdout, stderr, &mut warnings);
    for w in &warnings {
        writeln!(stderr, "warning: {w}")?;
    }
    result
}

fn dispatch(
    cli: &Cli,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
    warnings: &mut Vec<String>,
) -> anyhow::Result<()> {
    match &cli.command {
        Command::Chernoff(a) => {
            let (cfg, base) = load(&a.io)?;
            let ov = Overrides {
                tol: a.tol,
                ..Default::default()
            };
            let r = run_chernoff(&cfg, &base, &ov, warnings)?;
            let text = match a.io.format.unwrap_or(Format::Json) {
                Format::Json => json(&r)?,
                Format::Csv => chernoff_csv(&r),
            };
            write_to(a.io.out.as_deref(), &text, stdout)
        }
        Command::Errors(a) => {
            let (cfg, base) = load(&a.io)?;
            let ov = Overrides {
                tol: a.tol,
                ..Default::default()
            };
            let r = run_errors(&cfg, &base, &ov, warnings)?;
            let text = match a.io.format.unwrap_or(Format::Csv) {
                Format::Json => json(&r)?,
                Format::Csv => errors_csv(&r),
            };
            write_to(a.io.out.as_deref(), &text, stdout)
        }
        Command::Advantage(io) => {
            let (cfg, base) = load(io)?;
            let r = run_advantage(&cfg, &base)?;
            let default = match r {
                AdvantageOutput::Report(_) => Format::Json,
                AdvantageOutput::Grid(_) => Format::Csv,
            };
            let text = match io.format.unwrap_or(default) {
                Format::Json => json(&r)?,
                Format::Csv => advantage_csv(&r),
            };
            write_to(io.out.as_deref(), &text, stdout)
        }
        Command::Simulate(a) => {
            let (cfg, base) = load(&a.io)?;
            let ov = Overrides {
                tol: a.tol,
                seed: a.seed,
                m: a.m,
                threads: a.threads,
            };
            let (r, manifest) = run_simulate(&cfg, &base, &ov, warnings)?;
            let text = match a.io.format.unwrap_or(Format::Csv) {
                Format::Json => json(&r)?,
                Format::Csv => simulate_csv(&r),
            };
            write_to(a.io.out.as_deref(), &text, stdout)?;
            let path = a
                .manifest
                .clone()
                .or_else(|| a.io.out.as_deref().map(|o| sibling(o, "manifest.json")));
            match path {
                Some(p) => write_to(Some(&p), &json(&manifest)?, stdout),
                None => Ok(()),
            }
        }
        Command::Collapse(a) => {
            let (cfg, base) = load(&a.io)?;
            let ov = Overrides {
                tol: a.tol,
                seed: a.seed,
                m: a.m,
                threads: a.threads,
            };
            let r = run_collapse(&cfg, &base, &ov, warnings)?;
            let text = match a.io.format.unwrap_or(Format::Csv) {
                Format::Json => json(&r)?,
                Format::Csv => collapse_csv(&r.rows),
            };
            write_to(a.io.out.as_deref(), &text, stdout)?;
            for g in &r.summary.groups {
                for p in &g.pairs {
                    writeln!(
                        stderr,
                        "{} vs {}: max |d ln e| = {} at {} points, worst ratio {} ({})",
                        p.a,
                        p.b,
                        fmt12(p.max_abs_deviation),
                        p.points,
                        fmt12(p.worst_ratio),
                        if p.within_threshold {
                            "within threshold"
                        } else {
                            "above threshold"
                        }
                    )?;
                }
            }
            let path = a
                .summary
                .clone()
                .or_else(|| a.io.out.as_deref().map(|o| sibling(o, "summary.json")));
            match path {
                Some(p) => write_to(Some(&p), &json(&r.summary)?, stdout),
                None => Ok(()),
            }
        }
    }
}

/// Unreadable or invalid input, as opposed to a numerical failure.
pub fn is_config_error(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<ConfigError>()
            || matches!(
                c.downcast_ref::<ReadoutError>(),
                Some(ReadoutError::InvalidParameter(_))
            )
    })
}

/// Exit status: 0 on success (warnings included), 2 for configuration
/// errors, 1 for numerical failures.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mut out, mut err) = (std::io::stdout().lock(), std::io::stderr().lock());
    match execute(&cli, &mut out, &mut err) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            if is_config_error(&e) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
