//! Batch experiment driver behind the `halfspace-lab` binary.
//!
//! Each subcommand resolves its settings (flags over an optional TOML file
//! over defaults), validates them before doing any work, runs one experiment
//! from a single top-level seed, and writes a self-describing report that
//! embeds the resolved settings. The exit status is 0 iff every check the
//! command performs passed.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::concepts::{Label, LabeledSample, MarginDistribution};
use crate::dims::{littlestone_dim, min_disambiguation_ldim, vc_dim, MistakeTreeCertificate, PartialClassMatrix};
use crate::dims::{build_ghd, DISAMBIGUATION_MAX_STARS, VC_MAX_COLUMNS};
use crate::error::{invalid, Error, Result};
use crate::geometry::{dot, sample_uniform_sphere, SeededRng, UnitVector};
use crate::learner::{random_direction, select_k, select_n0, default_t_target, LearnerConfig, MAX_N0};
use crate::replicability::{
    boost_stable_learner, cover_multiplicity_probe, estimate_list, great_circle_grid, random_hypothesis,
    BoostConfig, FiniteDistribution, FiniteHypothesis, ReplicabilityReport, DEFAULT_ALPHA_SLACK,
    DEFAULT_EPS_PRIME,
};
use crate::rounding::{build_net, check_general_position, circle_net, verify_covering, SphereNet};
use crate::svm::{hard_svm, svm_oracle_small, DEFAULT_TOL};

#[derive(Parser, Debug)]
#[command(
    name = "halfspace-lab",
    version,
    about = "Experiments with list-replicable learning of large-margin halfspaces"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a sphere net, check covering and general position, and save it.
    NetBuild(NetBuildArgs),
    /// Measure output lists of the averaged-SVM learner on random margin distributions.
    Replicability(ReplicabilityArgs),
    /// VC and Littlestone dimensions of a partial class given as CSV.
    Dims(DimsArgs),
    /// Emit a Gap Hamming Distance matrix.
    Ghd(GhdArgs),
    /// Compare the hard-SVM solver with the exact small-instance oracle.
    SvmCheck(SvmCheckArgs),
    /// Count empirical cover sets containing directions on a great circle.
    CoverProbe(CoverProbeArgs),
    /// Boost a simulated globally stable learner on a finite domain.
    BoostDemo(BoostDemoArgs),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetBuildArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Probes for the covering and general-position checks.
    #[arg(long)]
    pub probes: Option<usize>,
    /// Net file; the report goes next to it with a `.report.json`/`.report.csv` suffix.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// TOML file supplying any of these settings; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReplicabilityArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// SVM batches per run (default: the concentration-based choice).
    #[arg(long)]
    pub k: Option<usize>,
    /// Batch size (default: the heuristic formula, capped at 10^7).
    #[arg(long)]
    pub n0: Option<usize>,
    /// Learner runs per distribution.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Number of random target directions.
    #[arg(long)]
    pub distributions: Option<usize>,
    /// Monte-Carlo draws per loss estimate.
    #[arg(long)]
    pub loss_mc: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Net file with alpha = gamma/2; built from the seed when absent.
    #[arg(long)]
    pub net: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DimsArgs {
    /// Matrix CSV: labels in the first row and column, cells `+1`, `-1` or `*`.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GhdArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvmCheckArgs {
    /// Random separable instances compared against the oracle.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub max_d: Option<usize>,
    #[arg(long)]
    pub max_n: Option<usize>,
    /// Margin-distribution samples checked for feasibility.
    #[arg(long)]
    pub margin_samples: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Size of each margin-distribution sample.
    #[arg(long)]
    pub n0: Option<usize>,
    /// Allowed margin discrepancy.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverProbeArgs {
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub n0: Option<usize>,
    /// Learner runs per grid direction.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Number of great-circle directions.
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub eps_prime: Option<f64>,
    #[arg(long)]
    pub alpha_slack: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, conflicts_with = "circle_net")]
    pub net: Option<PathBuf>,
    /// Use a regular polygon with this (odd) number of vertices as the net (d = 2 only).
    #[arg(long)]
    pub circle_net: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoostDemoArgs {
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Base-learner runs per boost.
    #[arg(long)]
    pub t: Option<usize>,
    /// Validation sample size.
    #[arg(long)]
    pub n1: Option<usize>,
    /// Base sample size.
    #[arg(long)]
    pub n0: Option<usize>,
    /// Independent boosting runs.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Size of the finite domain.
    #[arg(long)]
    pub domain: Option<usize>,
    /// Probability that the simulated base learner returns the target.
    #[arg(long)]
    pub p_star: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

/// Overlays the non-empty flags onto the TOML file at `config`, if any.
fn merge_config<T: Serialize + DeserializeOwned + Clone>(flags: &T, config: Option<&Path>) -> Result<T> {
    let Some(path) = config else {
        return Ok(flags.clone());
    };
    let text = std::fs::read_to_string(path)?;
    let table: toml::Table =
        toml::from_str(&text).map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    let mut merged = serde_json::to_value(table)?;
    if let (Some(base), serde_json::Value::Object(over)) = (merged.as_object_mut(), serde_json::to_value(flags)?) {
        for (key, value) in over {
            if !value.is_null() {
                base.insert(key, value);
            }
        }
    }
    serde_json::from_value(merged).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
}

fn require<T>(value: Option<T>, name: &'static str) -> Result<T> {
    value.ok_or_else(|| invalid(name, "is required"))
}

fn check_unit_open(value: f64, name: &'static str) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(invalid(name, format!("{value} is not in (0, 1)")))
    }
}

fn check_positive(value: usize, name: &'static str) -> Result<()> {
    if value > 0 {
        Ok(())
    } else {
        Err(invalid(name, "must be positive"))
    }
}

fn check_not_input(out: Option<&Path>, inputs: &[Option<&Path>]) -> Result<()> {
    let Some(out) = out else {
        return Ok(());
    };
    for input in inputs.iter().flatten() {
        let same = match (out.canonicalize(), input.canonicalize()) {
            (Ok(a), Ok(b)) => a == b,
            _ => out == *input,
        };
        if same {
            return Err(invalid("out", format!("{} is also an input file", out.display())));
        }
    }
    Ok(())
}

fn read_net(path: &Path) -> Result<SphereNet> {
    SphereNet::read_from(BufReader::new(File::open(path)?))
}

/// Loads the net at `path`, or builds one for `(d, alpha, seed)`.
pub fn load_or_build_net(path: Option<&Path>, d: usize, alpha: f64, seed: u64) -> Result<SphereNet> {
    match path {
        Some(p) => read_net(p),
        None => build_net(d, alpha, seed),
    }
}

/// Learner parameters, with `k` and `n0` falling back to the formula defaults.
fn learner_params(
    d: usize,
    gamma: f64,
    epsilon: f64,
    delta: f64,
    k: Option<usize>,
    n0: Option<usize>,
) -> Result<(usize, usize)> {
    let k = match k {
        Some(k) => k,
        None => select_k(d, delta, default_t_target(gamma))?,
    };
    let n0 = match n0 {
        Some(n) => n,
        None => select_n0(gamma, epsilon, delta, k)?.min(MAX_N0),
    };
    check_positive(k, "k")?;
    check_positive(n0, "n0")?;
    Ok((k, n0))
}

/// A command's result: report bytes, a one-line summary, and the verdict.
pub struct Emitted {
    pub body: Vec<u8>,
    pub summary: String,
    pub passed: bool,
}

#[derive(Serialize)]
struct Envelope<'a, C: Serialize, R: Serialize> {
    command: &'a str,
    version: &'a str,
    config: &'a C,
    result: &'a R,
}

fn json_body<C: Serialize, R: Serialize>(command: &str, config: &C, result: &R) -> Result<Vec<u8>> {
    let mut body = serde_json::to_vec_pretty(&Envelope {
        command,
        version: env!("CARGO_PKG_VERSION"),
        config,
        result,
    })?;
    body.push(b'\n');
    Ok(body)
}

/// CSV with a leading `# config: {...}` comment line.
fn csv_body<C: Serialize>(command: &str, config: &C, header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut body = format!("# {command} config: {}\n", serde_json::to_string(config)?).into_bytes();
    {
        let mut wtr = csv::Writer::from_writer(&mut body);
        wtr.write_record(header)?;
        for row in rows {
            wtr.write_record(row)?;
        }
        wtr.flush()?;
    }
    Ok(body)
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(bytes)?;
    f.flush()?;
    Ok(())
}

// ---------------------------------------------------------------- net-build

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetBuildConfig {
    pub d: usize,
    pub alpha: f64,
    pub seed: u64,
    pub probes: usize,
    #[serde(skip)]
    pub out: PathBuf,
    pub format: Format,
}

impl NetBuildArgs {
    pub fn resolve(&self) -> Result<NetBuildConfig> {
        let a = merge_config(self, self.config.as_deref())?;
        let cfg = NetBuildConfig {
            d: require(a.d, "d")?,
            alpha: require(a.alpha, "alpha")?,
            seed: a.seed.unwrap_or(0),
            probes: a.probes.unwrap_or(10_000),
            out: require(a.out, "out")?,
            format: a.format.unwrap_or_default(),
        };
        if cfg.d == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if !(cfg.alpha > 0.0 && cfg.alpha <= 1.0) {
            return Err(invalid("alpha", format!("{} is not in (0, 1]", cfg.alpha)));
        }
        check_positive(cfg.probes, "probes")?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NetBuildResult {
    pub size: usize,
    pub covering_ok: bool,
    pub worst_probe_distance: f64,
    pub general_position_ok: bool,
}

pub fn net_build(cfg: &NetBuildConfig) -> Result<(SphereNet, NetBuildResult)> {
    let net = build_net(cfg.d, cfg.alpha, cfg.seed)?;
    let root = SeededRng::new(cfg.seed, 0);
    let (covering_ok, worst) = verify_covering(&net, cfg.probes, &mut root.fork("cli/covering", 0));
    let general_position_ok = check_general_position(&net, cfg.probes, &mut root.fork("cli/general-position", 0));
    let result = NetBuildResult {
        size: net.len(),
        covering_ok,
        worst_probe_distance: worst,
        general_position_ok,
    };
    Ok((net, result))
}

fn cmd_net_build(args: &NetBuildArgs) -> Result<i32> {
    let cfg = args.resolve()?;
    let (net, res) = net_build(&cfg)?;
    write_file(&cfg.out, &net.to_bytes())?;
    let body = match cfg.format {
        Format::Json => json_body("net-build", &cfg, &res)?,
        Format::Csv => csv_body(
            "net-build",
            &cfg,
            &["size", "covering_ok", "worst_probe_distance", "general_position_ok"],
            &[vec![
                res.size.to_string(),
                res.covering_ok.to_string(),
                num(res.worst_probe_distance),
                res.general_position_ok.to_string(),
            ]],
        )?,
    };
    let suffix = match cfg.format {
        Format::Json => "report.json",
        Format::Csv => "report.csv",
    };
    let mut report_path = cfg.out.clone().into_os_string();
    report_path.push(format!(".{suffix}"));
    let passed = res.covering_ok && res.general_position_ok;
    let emitted = Emitted {
        body,
        summary: format!(
            "net-build: |T| = {}, covering {} (worst {:.6} vs alpha/2 = {:.6}), general position {}",
            res.size,
            if res.covering_ok { "ok" } else { "FAILED" },
            res.worst_probe_distance,
            cfg.alpha / 2.0,
            if res.general_position_ok { "ok" } else { "FAILED" },
        ),
        passed,
    };
    finish(emitted, Some(Path::new(&report_path)))
}

// ------------------------------------------------------------ replicability

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicabilityConfig {
    pub d: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub k: usize,
    pub n0: usize,
    pub trials: usize,
    pub distributions: usize,
    pub loss_mc: usize,
    pub seed: u64,
    pub net: Option<PathBuf>,
    pub svm_tol: f64,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl ReplicabilityArgs {
    pub fn resolve(&self) -> Result<ReplicabilityConfig> {
        let a = merge_config(self, self.config.as_deref())?;
        let d = require(a.d, "d")?;
        if d == 0 {
            return Err(Error::InvalidDimension(0));
        }
        let gamma = a.gamma.unwrap_or(0.25);
        let epsilon = a.epsilon.unwrap_or(0.1);
        let delta = a.delta.unwrap_or(0.1);
        check_unit_open(gamma, "gamma")?;
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(invalid("epsilon", format!("{epsilon} is not in (0, 1/2)")));
        }
        check_unit_open(delta, "delta")?;
        let (k, n0) = learner_params(d, gamma, epsilon, delta, a.k, a.n0)?;
        let cfg = ReplicabilityConfig {
            d,
            gamma,
            epsilon,
            delta,
            k,
            n0,
            trials: a.trials.unwrap_or(400),
            distributions: a.distributions.unwrap_or(20),
            loss_mc: a.loss_mc.unwrap_or(2000),
            seed: a.seed.unwrap_or(0),
            net: a.net,
            svm_tol: DEFAULT_TOL,
            out: a.out,
            format: a.format.unwrap_or_default(),
        };
        check_positive(cfg.trials, "trials")?;
        check_positive(cfg.distributions, "distributions")?;
        check_positive(cfg.loss_mc, "loss_mc")?;
        if let Some(net) = &cfg.net {
            if !net.is_file() {
                return Err(invalid("net", format!("{} does not exist", net.display())));
            }
        }
        check_not_input(cfg.out.as_deref(), &[cfg.net.as_deref()])?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicabilityRow {
    pub index: usize,
    pub w: UnitVector,
    pub report: ReplicabilityReport,
    pub list_within_d: bool,
    /// Every output with frequency >= 5% has loss <= epsilon + half-width.
    pub losses_ok: bool,
    pub pigeonhole_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicabilitySummary {
    pub distributions: usize,
    pub fraction_list_within_d: f64,
    pub max_observed_loss: Option<f64>,
    pub losses_ok: bool,
    pub pigeonhole_ok: bool,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicabilityResult {
    pub net_size: usize,
    pub rows: Vec<ReplicabilityRow>,
    pub summary: ReplicabilitySummary,
}

/// Fraction of distributions whose list must stay within `d` outputs.
pub const LIST_PASS_FRACTION: f64 = 0.9;

pub fn replicability_experiment(cfg: &ReplicabilityConfig, net: Arc<SphereNet>) -> Result<ReplicabilityResult> {
    let net_size = net.len();
    let learner = LearnerConfig::new(cfg.d, cfg.gamma, cfg.epsilon, cfg.delta, cfg.k, cfg.n0, net)?
        .with_svm_tol(cfg.svm_tol)?;
    let root = SeededRng::new(cfg.seed, 0);
    let mut rows = Vec::with_capacity(cfg.distributions);
    for j in 0..cfg.distributions {
        let w = random_direction(cfg.d, &mut root.fork("cli/w", j as u64))?;
        let dist = MarginDistribution::new(w.clone(), cfg.gamma)?;
        let report = estimate_list(&learner, &dist, cfg.trials, cfg.loss_mc, &root.fork("cli/distribution", j as u64))?;
        let losses_ok = report.outputs.values().all(|o| {
            o.count * 20 < report.trials
                || matches!((o.loss_estimate, o.loss_half_width), (Some(l), Some(hw)) if l <= cfg.epsilon + hw)
        });
        rows.push(ReplicabilityRow {
            index: j,
            w,
            list_within_d: report.distinct_outputs <= cfg.d,
            losses_ok,
            pigeonhole_ok: report.pigeonhole_holds(),
            report,
        });
    }
    let within = rows.iter().filter(|r| r.list_within_d).count();
    let fraction = within as f64 / rows.len() as f64;
    let max_observed_loss = rows
        .iter()
        .flat_map(|r| r.report.outputs.values().filter_map(|o| o.loss_estimate))
        .fold(None, |acc: Option<f64>, l| Some(acc.map_or(l, |a| a.max(l))));
    let losses_ok = rows.iter().all(|r| r.losses_ok);
    let pigeonhole_ok = rows.iter().all(|r| r.pigeonhole_ok);
    let summary = ReplicabilitySummary {
        distributions: rows.len(),
        fraction_list_within_d: fraction,
        max_observed_loss,
        losses_ok,
        pigeonhole_ok,
        passed: fraction >= LIST_PASS_FRACTION && losses_ok && pigeonhole_ok,
    };
    Ok(ReplicabilityResult {
        net_size,
        rows,
        summary,
    })
}

fn cmd_replicability(args: &ReplicabilityArgs) -> Result<i32> {
    let cfg = args.resolve()?;
    let net = load_or_build_net(cfg.net.as_deref(), cfg.d, cfg.gamma / 2.0, cfg.seed)?;
    let res = replicability_experiment(&cfg, Arc::new(net))?;
    let body = match cfg.format {
        Format::Json => json_body("replicability", &cfg, &res)?,
        Format::Csv => {
            let mut rows = Vec::new();
            for r in &res.rows {
                let rep = &r.report;
                for (index, o) in &rep.outputs {
                    rows.push(vec![
                        r.index.to_string(),
                        rep.distribution_id.clone(),
                        rep.trials.to_string(),
                        rep.failure_count.to_string(),
                        rep.distinct_outputs.to_string(),
                        index.to_string(),
                        o.count.to_string(),
                        opt_num(o.loss_estimate),
                        opt_num(o.loss_half_width),
                    ]);
                }
            }
            csv_body(
                "replicability",
                &cfg,
                &[
                    "distribution",
                    "distribution_id",
                    "trials",
                    "failure_count",
                    "distinct_outputs",
                    "net_index",
                    "count",
                    "loss_estimate",
                    "loss_half_width",
                ],
                &rows,
            )?
        }
    };
    let s = &res.summary;
    let emitted = Emitted {
        body,
        summary: format!(
            "replicability: list <= d on {:.1}% of {} distributions ({}), losses {}, pigeonhole {}, max loss {}",
            100.0 * s.fraction_list_within_d,
            s.distributions,
            if s.fraction_list_within_d >= LIST_PASS_FRACTION { "pass: list <= d on >= 90%" } else { "FAIL" },
            if s.losses_ok { "ok" } else { "FAILED" },
            if s.pigeonhole_ok { "ok" } else { "FAILED" },
            s.max_observed_loss.map_or("n/a".into(), |l| format!("{l:.4}")),
        ),
        passed: s.passed,
    };
    finish(emitted, cfg.out.as_deref())
}

// --------------------------------------------------------------------- dims

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimsConfig {
    pub csv: PathBuf,
    pub seed: u64,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl DimsArgs {
    pub fn resolve(&self) -> Result<DimsConfig> {
        let a = merge_config(self, self.config.as_deref())?;
        let cfg = DimsConfig {
            csv: require(a.csv, "csv")?,
            seed: a.seed.unwrap_or(0),
            out: a.out,
            format: a.format.unwrap_or_default(),
        };
        if !cfg.csv.is_file() {
            return Err(invalid("csv", format!("{} does not exist", cfg.csv.display())));
        }
        check_not_input(cfg.out.as_deref(), &[Some(cfg.csv.as_path())])?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FilledCell {
    pub row: String,
    pub col: String,
    pub label: Label,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Disambiguation {
    pub ldim: usize,
    pub filling: Vec<FilledCell>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DimsResult {
    pub rows: usize,
    pub cols: usize,
    pub star_cells: usize,
    /// `None` when the column count exceeds the enumeration limit.
    pub vc_dim: Option<usize>,
    pub vc_witness: Option<Vec<String>>,
    pub ldim: usize,
    pub certificate: MistakeTreeCertificate,
    pub certificate_valid: bool,
    /// For total matrices, `ldim <= ceil(log2 rows)`.
    pub log_bound_ok: Option<bool>,
    /// Present when the `*` count is within the exhaustive limit.
    pub min_disambiguation: Option<Disambiguation>,
    pub passed: bool,
}

pub fn dims_report(m: &PartialClassMatrix) -> Result<DimsResult> {
    let vc = if m.cols() <= VC_MAX_COLUMNS { Some(vc_dim(m)?) } else { None };
    let (ldim, certificate) = littlestone_dim(m)?;
    let certificate_valid = certificate.validate(m);
    let log_bound_ok = m
        .is_total()
        .then(|| ldim <= (m.rows() as f64).log2().ceil() as usize);
    let stars = m.star_cells().len();
    let min_disambiguation = if stars > 0 && stars <= DISAMBIGUATION_MAX_STARS {
        let (dim, filling) = min_disambiguation_ldim(m)?;
        Some(Disambiguation {
            ldim: dim,
            filling: filling
                .into_iter()
                .map(|((r, c), label)| FilledCell {
                    row: m.row_labels()[r].clone(),
                    col: m.col_labels()[c].clone(),
                    label,
                })
                .collect(),
        })
    } else {
        None
    };
    let vc_value = vc.as_ref().map(|v| v.0);
    let passed = certificate_valid
        && vc_value.is_none_or(|v| v <= ldim)
        && log_bound_ok.unwrap_or(true)
        && match (&min_disambiguation, vc_value) {
            (Some(dis), Some(v)) => dis.ldim >= v,
            _ => true,
        };
    Ok(DimsResult {
        rows: m.rows(),
        cols: m.cols(),
        star_cells: stars,
        vc_dim: vc_value,
        vc_witness: vc.map(|(_, cols)| cols.iter().map(|&c| m.col_labels()[c].clone()).collect()),
        ldim,
        certificate,
        certificate_valid,
        log_bound_ok,
        min_disambiguation,
        passed,
    })
}

fn cmd_dims(args: &DimsArgs) -> Result<i32> {
    let cfg = args.resolve()?;
    let m = PartialClassMatrix::read_csv(BufReader::new(File::open(&cfg.csv)?))?;
    let res = dims_report(&m)?;
    let body = match cfg.format {
        Format::Json => json_body("dims", &cfg, &res)?,
        Format::Csv => {
            let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
            let rows = vec![
                vec!["rows".into(), res.rows.to_string()],
                vec!["cols".into(), res.cols.to_string()],
                vec!["star_cells".into(), res.star_cells.to_string()],
                vec!["vc_dim".into(), opt(res.vc_dim)],
                vec!["ldim".into(), res.ldim.to_string()],
                vec!["certificate_valid".into(), res.certificate_valid.to_string()],
                vec!["min_disambiguation_ldim".into(), opt(res.min_disambiguation.as_ref().map(|d| d.ldim))],
                vec!["passed".into(), res.passed.to_string()],
            ];
            csv_body("dims", &cfg, &["quantity", "value"], &rows)?
        }
    };
    let emitted = Emitted {
        body,
        summary: format!(
            "dims: {}x{} matrix, vc {}, ldim {} (certificate {}){}",
            res.rows,
            res.cols,
            res.vc_dim.map_or("n/a".into(), |v| v.to_string()),
            res.ldim,
            if res.certificate_valid { "valid" } else { "INVALID" },
            res.min_disambiguation
                .as_ref()
                .map_or(String::new(), |d| format!(", min disambiguation ldim {}", d.ldim)),
        ),
        passed: res.passed,
    };
    finish(emitted, cfg.out.as_deref())
}

// ---------------------------------------------------------------------- ghd

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GhdConfig {
    pub n: usize,
    pub gamma: f64,
    pub seed: u64,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl GhdArgs {
    pub fn resolve(&self) -> Result<GhdConfig> {
        let a = merge_config(self, self.config.as_deref())?;
        let cfg = GhdConfig {
            n: require(a.n, "n")?,
            gamma: require(a.gamma, "gamma")?,
            seed: a.seed.unwrap_or(0),
            out: a.out,
            format: a.format.unwrap_or(Format::Csv),
        };
        check_positive(cfg.n, "n")?;
        if cfg.n > crate::dims::GHD_MAX_N {
            return Err(Error::SizeGuard(format!(
                "n = {} exceeds the limit of {}",
                cfg.n,
                crate::dims::GHD_MAX_N
            )));
        }
        if !(cfg.gamma > 0.0 && cfg.gamma <= 1.0) {
            return Err(invalid("gamma", format!("{} is not in (0, 1]", cfg.gamma)));
        }
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GhdResult {
    pub size: usize,
    pub defined_entries: usize,
    pub star_entries: usize,
    pub diagonal_positive: bool,
    pub antidiagonal_negative: bool,
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    pub entries: Vec<Vec<String>>,
}

fn ghd_result(m: &PartialClassMatrix) -> GhdResult {
    use crate::concepts::PartialLabel;
    let size = m.rows();
    let stars = m.star_cells().len();
    GhdResult {
        size,
        defined_entries: size * size - stars,
        star_entries: stars,
        diagonal_positive: (0..size).all(|i| m.entry(i, i) == PartialLabel::Pos),
        antidiagonal_negative: (0..size).all(|i| m.entry(i, size - 1 - i) == PartialLabel::Neg),
        row_labels: m.row_labels().to_vec(),
        col_labels: m.col_labels().to_vec(),
        entries: m
            .entries()
            .iter()
            .map(|row| {
                row.iter()
                    .map(|e| match e {
                        PartialLabel::Pos => "+1".to_owned(),
                        PartialLabel::Neg => "-1".to_owned(),
                        PartialLabel::Star => "*".to_owned(),
                    })
                    .collect()
            })
            .collect(),
    }
}

fn cmd_ghd(args: &GhdArgs) -> Result<i32> {
    let cfg = args.resolve()?;
    let m = build_ghd(cfg.n, cfg.gamma)?;
    let res = ghd_result(&m);
    let body = match cfg.format {
        Format::Json => json_body("ghd", &cfg, &res)?,
        Format::Csv => {
            let mut body = format!("# ghd config: {}\n", serde_json::to_string(&cfg)?).into_bytes();
            m.write_csv(&mut body)?;
            body
        }
    };
    let emitted = Emitted {
        body,
        summary: format!(
            "ghd: {0}x{0} matrix, {1} defined and {2} undefined entries, diagonal {3}, anti-diagonal {4}",
            res.size,
            res.defined_entries,
            res.star_entries,
            if res.diagonal_positive { "+1" } else { "BROKEN" },
            if res.antidiagonal_negative { "-1" } else { "BROKEN" },
        ),
        passed: res.diagonal_positive && res.antidiagonal_negative,
    };
    finish(emitted, cfg.out.as_deref())
}

// ---------------------------------------------------------------- svm-check

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmCheckConfig {
    pub trials: usize,
    pub max_d: usize,
    pub max_n: usize,
    pub margin_samples: usize,
    pub gamma: f64,
    pub n0: usize,
    pub tol: f64,
    pub seed: u64,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl SvmCheckArgs {
    pub fn resolve(&self) -> Result<SvmCheckConfig> {
        let a = merge_config(self, self.config.as_deref())?;
        let cfg = SvmCheckConfig {
            trials: a.trials.unwrap_or(200),
            max_d: a.max_d.unwrap_or(6),
            max_n: a.max_n.unwrap_or(8),
            margin_samples: a.margin_samples.unwrap_or(100),
            gamma: a.gamma.unwrap_or(0.3),
            n0: a.n0.unwrap_or(200),
            tol: a.tol.unwrap_or(1e-6),
            seed: a.seed.unwrap_or(0),
            out: a.out,
            format: a.format.unwrap_or_default(),
        };
        if !(2..=crate::svm::ORACLE_MAX_DIM).contains(&cfg.max_d) {
            return Err(invalid("max_d", format!("must be in 2..={}", crate::svm::ORACLE_MAX_DIM)));
        }
        if !(1..=crate::svm::ORACLE_MAX_POINTS).contains(&cfg.max_n) {
            return Err(invalid("max_n", format!("must be in 1..={}", crate::svm::ORACLE_MAX_POINTS)));
        }
        check_unit_open(cfg.gamma, "gamma")?;
        check_positive(cfg.n0, "n0")?;
        if !(cfg.tol > 0.0) {
            return Err(invalid("tol", "must be positive"));
        }
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleRow {
    pub index: usize,
    pub d: usize,
    pub n: usize,
    pub svm_margin: f64,
    pub oracle_margin: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FeasibilityRow {
    pub index: usize,
    pub d: usize,
    pub margin: Option<f64>,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SvmCheckResult {
    pub oracle_rows: Vec<OracleRow>,
    pub feasibility_rows: Vec<FeasibilityRow>,
    pub max_margin_gap: f64,
    pub min_feasible_margin: Option<f64>,
    pub passed: bool,
}

/// Random labeled instance separable through the origin: points closer than
/// `0.05` to the hidden hyperplane are redrawn.
pub fn random_separable_instance(d: usize, n: usize, rng: &mut SeededRng) -> Result<LabeledSample> {
    let w = sample_uniform_sphere(d, rng)?;
    let mut pairs = Vec::with_capacity(n);
    while pairs.len() < n {
        let x = sample_uniform_sphere(d, rng)?;
        let s = dot(w.coords(), x.coords());
        if s.abs() >= 0.05 {
            pairs.push((x, Label::of(s)));
        }
    }
    LabeledSample::new(pairs)
}

pub fn svm_check(cfg: &SvmCheckConfig) -> Result<SvmCheckResult> {
    let root = SeededRng::new(cfg.seed, 0);
    let mut oracle_rows = Vec::with_capacity(cfg.trials);
    for i in 0..cfg.trials {
        let mut rng = root.fork("cli/svm-instance", i as u64);
        let d = rng.random_range(2..=cfg.max_d);
        let n = rng.random_range(1..=cfg.max_n);
        let sample = random_separable_instance(d, n, &mut rng)?;
        let fast = hard_svm(&sample, DEFAULT_TOL)?;
        let exact = svm_oracle_small(&sample)?;
        oracle_rows.push(OracleRow {
            index: i,
            d,
            n,
            svm_margin: fast.margin,
            oracle_margin: exact.margin,
            ok: (fast.margin - exact.margin).abs() <= cfg.tol,
        });
    }
    let mut feasibility_rows = Vec::with_capacity(cfg.margin_samples);
    for i in 0..cfg.margin_samples {
        let mut rng = root.fork("cli/svm-margin", i as u64);
        let d = 2 + i % (cfg.max_d - 1);
        let w = sample_uniform_sphere(d, &mut rng)?;
        let sample = MarginDistribution::new(w, cfg.gamma)?.sample(cfg.n0, &mut rng)?;
        let margin = hard_svm(&sample, DEFAULT_TOL).ok().map(|s| s.margin);
        feasibility_rows.push(FeasibilityRow {
            index: i,
            d,
            margin,
            ok: margin.is_some_and(|m| m >= cfg.gamma - cfg.tol),
        });
    }
    let max_margin_gap = oracle_rows
        .iter()
        .map(|r| (r.svm_margin - r.oracle_margin).abs())
        .fold(0.0, f64::max);
    let min_feasible_margin = feasibility_rows
        .iter()
        .filter_map(|r| r.margin)
        .fold(None, |acc: Option<f64>, m| Some(acc.map_or(m, |a| a.min(m))));
    let passed = oracle_rows.iter().all(|r| r.ok) && feasibility_rows.iter().all(|r| r.ok);
    Ok(SvmCheckResult {
        oracle_rows,
        feasibility_rows,
        max_margin_gap,
        min_feasible_margin,
        passed,
    })
}

fn cmd_svm_check(args: &SvmCheckArgs) -> Result<i32> {
    let cfg = args.resolve()?;
    let res = svm_check(&cfg)?;
    let body = match cfg.format {
        Format::Json => json_body("svm-check", &cfg, &res)?,
        Format::Csv => {
            let mut rows: Vec<Vec<String>> = res
                .oracle_rows
                .iter()
                .map(|r| {
                    vec![
                        "oracle".into(),
                        r.index.to_string(),
                        r.d.to_string(),
                        r.n.to_string(),
                        num(r.svm_margin),
                        num(r.oracle_margin),
                        r.ok.to_string(),
                    ]
                })
                .collect();
            rows.extend(res.feasibility_rows.iter().map(|r| {
                vec![
                    "feasibility".into(),
                    r.index.to_string(),
                    r.d.to_string(),
                    cfg.n0.to_string(),
                    opt_num(r.margin),
                    String::new(),
                    r.ok.to_string(),
                ]
            }));
            csv_body(
                "svm-check",
                &cfg,
                &["kind", "index", "d", "n", "svm_margin", "oracle_margin", "ok"],
                &rows,
            )?
        }
    };
    let emitted = Emitted {
        body,
        summary: format!(
            "svm-check: {} oracle comparisons (max gap {:.3e}), {} margin samples (min margin {}), {}",
            res.oracle_rows.len(),
            res.max_margin_gap,
            res.feasibility_rows.len(),
            res.min_feasible_margin.map_or("n/a".into(), |m| format!("{m:.6}")),
            if res.passed { "pass" } else { "FAIL" },
        ),
        passed: res.passed,
    };
    finish(emitted, cfg.out.as_deref())
}

// -------------------------------------------------------------- cover-probe

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverProbeConfig {
    pub d: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub delta: f64,
    pub k: usize,
    pub n0: usize,
    pub trials: usize,
    pub grid: usize,
    pub eps_prime: f64,
    pub alpha_slack: f64,
    pub seed: u64,
    pub net: Option<PathBuf>,
    pub circle_net: Option<usize>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl CoverProbeArgs {
    pub fn resolve(&self) -> Result<CoverProbeConfig> {
        let a = merge_config(self, self.config.as_deref())?;
        let d = a.d.unwrap_or(2);
        if d < 2 {
            return Err(Error::UnsupportedDimension { required: 2, got: d });
        }
        let gamma = a.gamma.unwrap_or(0.25);
        let epsilon = a.epsilon.unwrap_or(0.1);
        let delta = a.delta.unwrap_or(0.1);
        check_unit_open(gamma, "gamma")?;
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return Err(invalid("epsilon", format!("{epsilon} is not in (0, 1/2)")));
        }
        check_unit_open(delta, "delta")?;
        let (k, n0) = learner_params(d, gamma, epsilon, delta, a.k, a.n0)?;
        let cfg = CoverProbeConfig {
            d,
            gamma,
            epsilon,
            delta,
            k,
            n0,
            trials: a.trials.unwrap_or(100),
            grid: a.grid.unwrap_or(360),
            eps_prime: a.eps_prime.unwrap_or(DEFAULT_EPS_PRIME),
            alpha_slack: a.alpha_slack.unwrap_or(DEFAULT_ALPHA_SLACK),
            seed: a.seed.unwrap_or(0),
            net: a.net,
            circle_net: a.circle_net,
            out: a.out,
            format: a.format.unwrap_or_default(),
        };
        check_positive(cfg.grid, "grid")?;
        if cfg.circle_net.is_some() && (cfg.d != 2 || cfg.net.is_some()) {
            return Err(invalid("circle_net", "needs d = 2 and no --net"));
        }
        if !(cfg.eps_prime > 0.0 && cfg.eps_prime < 0.5) {
            return Err(invalid("eps_prime", format!("{} is not in (0, 1/2)", cfg.eps_prime)));
        }
        if !(cfg.alpha_slack > 0.0) {
            return Err(invalid("alpha_slack", "must be positive"));
        }
        if let Some(net) = &cfg.net {
            if !net.is_file() {
                return Err(invalid("net", format!("{} does not exist", net.display())));
            }
        }
        check_not_input(cfg.out.as_deref(), &[cfg.net.as_deref()])?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverProbeSummary {
    pub max_multiplicity: usize,
    pub required: usize,
    pub witness_w: UnitVector,
    pub rows: Vec<(usize, Vec<usize>)>,
    pub passed: bool,
}

/// `ceil(d/2 + 1)`.
pub fn required_multiplicity(d: usize) -> usize {
    d.div_ceil(2) + 1
}

pub fn cover_probe(cfg: &CoverProbeConfig, net: Arc<SphereNet>) -> Result<CoverProbeSummary> {
    let learner = LearnerConfig::new(cfg.d, cfg.gamma, cfg.epsilon, cfg.delta, cfg.k, cfg.n0, net)?;
    let grid = great_circle_grid(cfg.d, cfg.grid)?;
    let res = cover_multiplicity_probe(
        &learner,
        &grid,
        cfg.trials,
        cfg.eps_prime,
        cfg.alpha_slack,
        &SeededRng::new(cfg.seed, 0),
    )?;
    let required = required_multiplicity(cfg.d);
    Ok(CoverProbeSummary {
        max_multiplicity: res.max_multiplicity,
        required,
        witness_w: res.witness_w,
        rows: res
            .rows
            .into_iter()
            .enumerate()
            .filter(|(_, r)| !r.members.is_empty())
            .map(|(i, r)| (i, r.members))
            .collect(),
        passed: res.max_multiplicity >= required,
    })
}

fn cmd_cover_probe(args: &CoverProbeArgs) -> Result<i32> {
    let cfg = args.resolve()?;
    let net = match cfg.circle_net {
        Some(count) => circle_net(cfg.gamma / 2.0, count)?,
        None => load_or_build_net(cfg.net.as_deref(), cfg.d, cfg.gamma / 2.0, cfg.seed)?,
    };
    let res = cover_probe(&cfg, Arc::new(net))?;
    let body = match cfg.format {
        Format::Json => json_body("cover-probe", &cfg, &res)?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = res
                .rows
                .iter()
                .map(|(i, members)| {
                    vec![
                        i.to_string(),
                        members.len().to_string(),
                        members.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(";"),
                    ]
                })
                .collect();
            csv_body("cover-probe", &cfg, &["grid_index", "multiplicity", "net_indices"], &rows)?
        }
    };
    let emitted = Emitted {
        body,
        summary: format!(
            "cover-probe: max multiplicity {} (required {}) at w = {:?}",
            res.max_multiplicity,
            res.required,
            res.witness_w.coords()
        ),
        passed: res.passed,
    };
    finish(emitted, cfg.out.as_deref())
}

// --------------------------------------------------------------- boost-demo

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostDemoConfig {
    pub boost: BoostConfig,
    pub trials: usize,
    pub domain: usize,
    pub p_star: f64,
    pub seed: u64,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    pub format: Format,
}

impl BoostDemoArgs {
    pub fn resolve(&self) -> Result<BoostDemoConfig> {
        let a = merge_config(self, self.config.as_deref())?;
        let cfg = BoostDemoConfig {
            boost: BoostConfig {
                rho: a.rho.unwrap_or(0.55),
                epsilon: a.epsilon.unwrap_or(0.1),
                delta: a.delta.unwrap_or(0.1),
                t: a.t.unwrap_or(400),
                n1: a.n1.unwrap_or(200),
                n0: a.n0.unwrap_or(10),
            },
            trials: a.trials.unwrap_or(200),
            domain: a.domain.unwrap_or(32),
            p_star: a.p_star.unwrap_or(0.6),
            seed: a.seed.unwrap_or(0),
            out: a.out,
            format: a.format.unwrap_or_default(),
        };
        cfg.boost.validate()?;
        check_positive(cfg.trials, "trials")?;
        check_positive(cfg.domain, "domain")?;
        if !(0.0..=1.0).contains(&cfg.p_star) {
            return Err(invalid("p_star", format!("{} is not in [0, 1]", cfg.p_star)));
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BoostVerdict {
    Target,
    Other,
    Failure,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoostRow {
    pub index: usize,
    pub verdict: BoostVerdict,
    pub count: usize,
    pub validation_loss: Option<f64>,
    /// The output met both the frequency and validation-loss conditions (vacuous on failure).
    pub conditions_ok: bool,
    /// The target's empirical frequency is within `alpha/2` of `p_star`.
    pub event_a: bool,
    /// The output's validation loss is within `epsilon/3` of its true loss.
    pub event_b: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoostDemoResult {
    pub rows: Vec<BoostRow>,
    pub target_fraction: f64,
    pub condition_violations: usize,
    pub event_a_failure_rate: f64,
    pub event_b_failure_rate: f64,
    pub passed: bool,
}

/// Required fraction of boosting runs that return the target.
pub const BOOST_PASS_FRACTION: f64 = 0.9;

/// Base learner returning the target with probability `p_star` and a fresh
/// uniformly random hypothesis otherwise.
pub fn noisy_base_learner(
    target: FiniteHypothesis,
    p_star: f64,
) -> impl Fn(&[(usize, Label)], &mut SeededRng) -> FiniteHypothesis + Sync {
    move |_sample, rng| {
        if rng.random::<f64>() < p_star {
            target.clone()
        } else {
            random_hypothesis(target.domain_size(), rng)
        }
    }
}

pub fn boost_demo(cfg: &BoostDemoConfig) -> Result<BoostDemoResult> {
    let root = SeededRng::new(cfg.seed, 0);
    let target = random_hypothesis(cfg.domain, &mut root.fork("cli/boost-target", 0));
    let dist = FiniteDistribution::uniform(&target)?;
    let base = noisy_base_learner(target.clone(), cfg.p_star);
    let b = &cfg.boost;
    let mut rows = Vec::with_capacity(cfg.trials);
    for i in 0..cfg.trials {
        let out = boost_stable_learner(&base, b, &dist, &root.fork("cli/boost-run", i as u64))?;
        let verdict = match &out.hypothesis {
            None => BoostVerdict::Failure,
            Some(h) if *h == target => BoostVerdict::Target,
            Some(_) => BoostVerdict::Other,
        };
        let conditions_ok = out.hypothesis.is_none()
            || (out.count as f64 >= b.frequency_threshold() * b.t as f64
                && out.validation_loss.is_some_and(|l| l <= b.loss_threshold()));
        let target_count = if verdict == BoostVerdict::Target {
            Some(out.count)
        } else {
            None
        };
        let event_a = target_count.is_none_or(|c| (c as f64 / b.t as f64 - cfg.p_star).abs() <= b.alpha() / 2.0);
        let event_b = match (&out.hypothesis, out.validation_loss) {
            (Some(h), Some(l)) => (l - dist.loss(h)).abs() <= b.epsilon / 3.0,
            _ => true,
        };
        rows.push(BoostRow {
            index: i,
            verdict,
            count: out.count,
            validation_loss: out.validation_loss,
            conditions_ok,
            event_a,
            event_b,
        });
    }
    let n = rows.len() as f64;
    let target_fraction = rows.iter().filter(|r| r.verdict == BoostVerdict::Target).count() as f64 / n;
    let condition_violations = rows.iter().filter(|r| !r.conditions_ok).count();
    Ok(BoostDemoResult {
        target_fraction,
        condition_violations,
        event_a_failure_rate: rows.iter().filter(|r| !r.event_a).count() as f64 / n,
        event_b_failure_rate: rows.iter().filter(|r| !r.event_b).count() as f64 / n,
        passed: target_fraction >= BOOST_PASS_FRACTION && condition_violations == 0,
        rows,
    })
}

fn cmd_boost_demo(args: &BoostDemoArgs) -> Result<i32> {
    let cfg = args.resolve()?;
    let res = boost_demo(&cfg)?;
    let body = match cfg.format {
        Format::Json => json_body("boost-demo", &cfg, &res)?,
        Format::Csv => {
            let rows: Vec<Vec<String>> = res
                .rows
                .iter()
                .map(|r| {
                    vec![
                        r.index.to_string(),
                        format!("{:?}", r.verdict).to_lowercase(),
                        r.count.to_string(),
                        opt_num(r.validation_loss),
                        r.conditions_ok.to_string(),
                        r.event_a.to_string(),
                        r.event_b.to_string(),
                    ]
                })
                .collect();
            csv_body(
                "boost-demo",
                &cfg,
                &["run", "verdict", "count", "validation_loss", "conditions_ok", "event_a", "event_b"],
                &rows,
            )?
        }
    };
    let emitted = Emitted {
        body,
        summary: format!(
            "boost-demo: target returned in {:.1}% of {} runs, {} condition violations, event A/B failure rates {:.3}/{:.3}",
            100.0 * res.target_fraction,
            res.rows.len(),
            res.condition_violations,
            res.event_a_failure_rate,
            res.event_b_failure_rate,
        ),
        passed: res.passed,
    };
    finish(emitted, cfg.out.as_deref())
}

// ------------------------------------------------------------------ driver

/// Writes the report to `out` (summary on stdout) or, without `out`, the
/// report to stdout and the summary to stderr.
fn finish(e: Emitted, out: Option<&Path>) -> Result<i32> {
    match out {
        Some(path) => {
            write_file(path, &e.body)?;
            println!("{}", e.summary);
        }
        None => {
            std::io::stdout().write_all(&e.body)?;
            eprintln!("{}", e.summary);
        }
    }
    Ok(if e.passed { 0 } else { 1 })
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let outcome = match &cli.command {
        Command::NetBuild(a) => cmd_net_build(a),
        Command::Replicability(a) => cmd_replicability(a),
        Command::Dims(a) => cmd_dims(a),
        Command::Ghd(a) => cmd_ghd(a),
        Command::SvmCheck(a) => cmd_svm_check(a),
        Command::CoverProbe(a) => cmd_cover_probe(a),
        Command::BoostDemo(a) => cmd_boost_demo(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Command {
        Cli::try_parse_from(std::iter::once("halfspace-lab").chain(args.iter().copied()))
            .unwrap()
            .command
    }

    #[test]
    fn required_multiplicity_values() {
        assert_eq!(required_multiplicity(2), 2);
        assert_eq!(required_multiplicity(3), 3);
        assert_eq!(required_multiplicity(4), 3);
        assert_eq!(required_multiplicity(5), 4);
    }

    #[test]
    fn validation_rejects_bad_values() {
        let Command::NetBuild(a) = parse(&["net-build", "--d", "2", "--alpha", "0", "--out", "x"]) else {
            panic!()
        };
        assert!(a.resolve().is_err());
        let Command::Replicability(a) = parse(&["replicability", "--d", "2", "--trials", "0", "--k", "1", "--n0", "5"])
        else {
            panic!()
        };
        assert!(a.resolve().is_err());
        let Command::Ghd(a) = parse(&["ghd", "--n", "13", "--gamma", "0.5"]) else {
            panic!()
        };
        assert!(matches!(a.resolve(), Err(Error::SizeGuard(_))));
    }

    #[test]
    fn config_file_fills_missing_flags_and_flags_win() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "n = 3\ngamma = 0.5\nformat = \"json\"\n").unwrap();
        let p = path.to_str().unwrap();
        let Command::Ghd(a) = parse(&["ghd", "--config", p, "--gamma", "0.25"]) else {
            panic!()
        };
        let cfg = a.resolve().unwrap();
        assert_eq!(cfg.n, 3);
        assert_eq!(cfg.gamma, 0.25);
        assert_eq!(cfg.format, Format::Json);

        std::fs::write(&path, "bogus = 1\n").unwrap();
        let Command::Ghd(a) = parse(&["ghd", "--config", p, "--n", "2", "--gamma", "0.5"]) else {
            panic!()
        };
        assert!(a.resolve().is_err());
    }

    #[test]
    fn unknown_subcommand_is_a_usage_error() {
        assert_eq!(run(["halfspace-lab", "frobnicate"]), 2);
    }

    #[test]
    fn learner_defaults_follow_the_formulas() {
        let (k, n0) = learner_params(2, 0.5, 0.1, 0.1, None, None).unwrap();
        assert_eq!(k, select_k(2, 0.1, default_t_target(0.5)).unwrap());
        assert_eq!(n0, select_n0(0.5, 0.1, 0.1, k).unwrap().min(MAX_N0));
        assert_eq!(learner_params(2, 0.5, 0.1, 0.1, Some(3), Some(7)).unwrap(), (3, 7));
    }
}
