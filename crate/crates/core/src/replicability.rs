//! Empirical list replicability, global stability, the cover-multiplicity
//! probe, and boosting a globally stable learner on a finite domain.
//!
//! Hypothesis identity is always discrete: a net index for the halfspace
//! learner and the full label vector for finite-domain learners. All
//! frequencies are integer counts.

use std::collections::{BTreeMap, HashMap};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concepts::{loss_exact_2d, loss_montecarlo, Label, MarginDistribution, TotalHalfspace};
use crate::error::{invalid, Error, Result};
use crate::geometry::{SeededRng, UnitVector};
use crate::learner::{run_learner, LearnerConfig, LearnerOutput};

/// Monte-Carlo sample size for losses in the cover probe outside the plane.
pub const COVER_LOSS_MC: usize = 4000;

/// Default loss threshold for empirical cover membership.
pub const DEFAULT_EPS_PRIME: f64 = 0.45;

/// Default slack added to the list bound in the frequency threshold `1/(L + slack)`.
pub const DEFAULT_ALPHA_SLACK: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputStats {
    pub count: usize,
    pub loss_estimate: Option<f64>,
    pub loss_half_width: Option<f64>,
}

/// Output histogram of repeated learner runs on one distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicabilityReport {
    pub distribution_id: String,
    pub trials: usize,
    /// Keyed by net index, ascending.
    pub outputs: BTreeMap<usize, OutputStats>,
    pub failure_count: usize,
    pub distinct_outputs: usize,
}

impl ReplicabilityReport {
    /// Builds a report from raw outputs (no losses attached).
    pub fn from_outputs(distribution_id: impl Into<String>, outputs: &[LearnerOutput]) -> Self {
        let mut map: BTreeMap<usize, OutputStats> = BTreeMap::new();
        let mut failure_count = 0;
        for out in outputs {
            match out.net_index() {
                Some(i) if !out.failed => {
                    map.entry(i)
                        .or_insert(OutputStats {
                            count: 0,
                            loss_estimate: None,
                            loss_half_width: None,
                        })
                        .count += 1
                }
                _ => failure_count += 1,
            }
        }
        Self {
            distribution_id: distribution_id.into(),
            trials: outputs.len(),
            distinct_outputs: map.len(),
            outputs: map,
            failure_count,
        }
    }

    pub fn max_count(&self) -> usize {
        self.outputs.values().map(|o| o.count).max().unwrap_or(0)
    }

    pub fn failure_rate(&self) -> f64 {
        self.failure_count as f64 / self.trials as f64
    }

    /// `max_count · distinct_outputs >= trials − failure_count`, in integers.
    pub fn pigeonhole_holds(&self) -> bool {
        self.max_count() * self.distinct_outputs >= self.trials - self.failure_count
    }

    pub fn is_consistent(&self) -> bool {
        self.outputs.values().map(|o| o.count).sum::<usize>() + self.failure_count == self.trials
            && self.distinct_outputs == self.outputs.len()
    }
}

/// Human-readable identifier of `D_w`.
pub fn margin_distribution_id(dist: &MarginDistribution) -> String {
    let coords: Vec<String> = dist.w().coords().iter().map(|c| format!("{c:?}")).collect();
    format!("D_w(w=[{}],gamma={:?})", coords.join(","), dist.gamma())
}

/// Runs the learner `trials` times on independent streams and tabulates the
/// outputs. Every output seen in at least 1% of trials gets a Monte-Carlo
/// loss estimate from `loss_mc` fresh draws.
pub fn estimate_list(
    cfg: &LearnerConfig,
    dist: &MarginDistribution,
    trials: usize,
    loss_mc: usize,
    rng: &SeededRng,
) -> Result<ReplicabilityReport> {
    if trials == 0 {
        return Err(invalid("trials", "must be positive"));
    }
    if loss_mc == 0 {
        return Err(invalid("loss_mc", "must be positive"));
    }
    let outputs = run_trials(cfg, dist, trials, rng)?;
    let mut report = ReplicabilityReport::from_outputs(margin_distribution_id(dist), &outputs);
    for (&index, stats) in report.outputs.iter_mut() {
        if stats.count * 100 >= trials {
            let h = TotalHalfspace {
                z: cfg.net.points()[index].clone(),
                net_index: Some(index),
            };
            let mut loss_rng = rng.fork("loss", index as u64);
            let (est, hw) = loss_montecarlo(&h, dist, loss_mc, &mut loss_rng)?;
            stats.loss_estimate = Some(est);
            stats.loss_half_width = Some(hw);
        }
    }
    Ok(report)
}

fn run_trials(
    cfg: &LearnerConfig,
    dist: &MarginDistribution,
    trials: usize,
    rng: &SeededRng,
) -> Result<Vec<LearnerOutput>> {
    (0..trials)
        .into_par_iter()
        .map(|i| run_learner(cfg, dist, &mut rng.fork("trial", i as u64)))
        .collect()
}

/// Largest output frequency in the report (0 if every run failed).
pub fn estimate_global_stability(report: &ReplicabilityReport) -> f64 {
    if report.trials == 0 {
        return 0.0;
    }
    report.max_count() as f64 / report.trials as f64
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverProbeRow {
    pub w: UnitVector,
    /// Net indices whose empirical cover set contains `w`.
    pub members: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverProbeResult {
    pub max_multiplicity: usize,
    pub witness_w: UnitVector,
    pub rows: Vec<CoverProbeRow>,
}

/// For each grid direction `w`, counts the hypotheses `h` that are output on
/// `D_w` with frequency above `1/(d + alpha_slack)` and have loss below
/// `eps_prime`, i.e. the empirical cover sets `C_h` containing `w`. Returns
/// the largest such count with its first witness.
pub fn cover_multiplicity_probe(
    cfg: &LearnerConfig,
    w_grid: &[UnitVector],
    trials_per_w: usize,
    eps_prime: f64,
    alpha_slack: f64,
    rng: &SeededRng,
) -> Result<CoverProbeResult> {
    if w_grid.is_empty() {
        return Err(invalid("w_grid", "must be nonempty"));
    }
    if !(eps_prime > 0.0 && eps_prime < 0.5) {
        return Err(invalid("eps_prime", format!("{eps_prime} is not in (0, 1/2)")));
    }
    if !(alpha_slack > 0.0) {
        return Err(invalid("alpha_slack", "must be positive"));
    }
    let list_bound = cfg.d as f64;
    let mut rows = Vec::with_capacity(w_grid.len());
    for (g, w) in w_grid.iter().enumerate() {
        let dist = MarginDistribution::new(w.clone(), cfg.gamma)?;
        let grid_rng = rng.fork("cover/w", g as u64);
        let mut members = Vec::new();
        if trials_per_w > 0 {
            let outputs = run_trials(cfg, &dist, trials_per_w, &grid_rng)?;
            let report = ReplicabilityReport::from_outputs("", &outputs);
            for (&index, stats) in &report.outputs {
                // count / trials > 1 / (L + slack)
                if stats.count as f64 * (list_bound + alpha_slack) <= trials_per_w as f64 {
                    continue;
                }
                let h = TotalHalfspace {
                    z: cfg.net.points()[index].clone(),
                    net_index: Some(index),
                };
                let loss = if cfg.d == 2 {
                    loss_exact_2d(&h, &dist)?
                } else {
                    let mut loss_rng = grid_rng.fork("loss", index as u64);
                    loss_montecarlo(&h, &dist, COVER_LOSS_MC, &mut loss_rng)?.0
                };
                if loss < eps_prime {
                    members.push(index);
                }
            }
        }
        rows.push(CoverProbeRow { w: w.clone(), members });
    }
    let (best, _) = rows
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.members.len().cmp(&b.1.members.len()).then(b.0.cmp(&a.0)))
        .expect("grid is nonempty");
    Ok(CoverProbeResult {
        max_multiplicity: rows[best].members.len(),
        witness_w: rows[best].w.clone(),
        rows,
    })
}

/// `n` equally spaced directions on the great circle through `e_1` and `e_2`.
pub fn great_circle_grid(d: usize, n: usize) -> Result<Vec<UnitVector>> {
    if d < 2 {
        return Err(Error::UnsupportedDimension { required: 2, got: d });
    }
    Ok((0..n)
        .map(|i| {
            let theta = std::f64::consts::TAU * i as f64 / n as f64;
            let mut v = vec![0.0; d];
            v[0] = theta.cos();
            v[1] = theta.sin();
            UnitVector::from_raw_unchecked(v)
        })
        .collect())
}

/// A total hypothesis on the finite domain `{0, …, m−1}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FiniteHypothesis {
    pub labels: Vec<Label>,
}

impl FiniteHypothesis {
    pub fn new(labels: Vec<Label>) -> Self {
        Self { labels }
    }

    pub fn domain_size(&self) -> usize {
        self.labels.len()
    }

    pub fn eval(&self, x: usize) -> Label {
        self.labels[x]
    }

    /// Fraction of `sample` this hypothesis mislabels.
    pub fn empirical_loss(&self, sample: &[(usize, Label)]) -> f64 {
        if sample.is_empty() {
            return 0.0;
        }
        let wrong = sample.iter().filter(|(x, y)| self.labels[*x] != *y).count();
        wrong as f64 / sample.len() as f64
    }
}

/// A labeled distribution with finite support on `{0, …, m−1}`.
#[derive(Clone, Debug)]
pub struct FiniteDistribution {
    support: Vec<(usize, Label)>,
    weights: Vec<f64>,
    index: WeightedIndex<f64>,
    domain_size: usize,
}

impl FiniteDistribution {
    pub fn new(domain_size: usize, support: Vec<(usize, Label)>, weights: Vec<f64>) -> Result<Self> {
        if support.is_empty() || support.len() != weights.len() {
            return Err(invalid("support", "must be nonempty with one weight per atom"));
        }
        if let Some((x, _)) = support.iter().find(|(x, _)| *x >= domain_size) {
            return Err(invalid("support", format!("point {x} outside domain of size {domain_size}")));
        }
        let index = WeightedIndex::new(&weights).map_err(|e| invalid("weights", e.to_string()))?;
        Ok(Self {
            support,
            weights,
            index,
            domain_size,
        })
    }

    /// Uniform over the whole domain, labeled by `target`.
    pub fn uniform(target: &FiniteHypothesis) -> Result<Self> {
        let m = target.domain_size();
        Self::new(m, (0..m).map(|x| (x, target.eval(x))).collect(), vec![1.0; m])
    }

    pub fn domain_size(&self) -> usize {
        self.domain_size
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<(usize, Label)> {
        (0..n).map(|_| self.support[self.index.sample(rng)]).collect()
    }

    /// Exact population loss of `h`.
    pub fn loss(&self, h: &FiniteHypothesis) -> f64 {
        let total: f64 = self.weights.iter().sum();
        self.support
            .iter()
            .zip(&self.weights)
            .filter(|((x, y), _)| h.eval(*x) != *y)
            .map(|(_, w)| w)
            .sum::<f64>()
            / total
    }
}

/// A randomized learner from finite samples to finite hypotheses.
pub trait StableLearner: Sync {
    fn learn(&self, sample: &[(usize, Label)], rng: &mut SeededRng) -> FiniteHypothesis;
}

impl<F> StableLearner for F
where
    F: Fn(&[(usize, Label)], &mut SeededRng) -> FiniteHypothesis + Sync,
{
    fn learn(&self, sample: &[(usize, Label)], rng: &mut SeededRng) -> FiniteHypothesis {
        self(sample, rng)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoostConfig {
    pub rho: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Number of base-learner runs.
    pub t: usize,
    /// Validation sample size.
    pub n1: usize,
    /// Base sample size.
    pub n0: usize,
}

impl BoostConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(invalid("rho", format!("{} is not in (0, 1]", self.rho)));
        }
        if !(self.alpha() > 0.0) {
            return Err(invalid(
                "rho",
                format!("{} leaves no slack above 1/(L+1) with L = {}", self.rho, self.list_bound()),
            ));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid("epsilon", format!("{} is not in (0, 1)", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta", format!("{} is not in (0, 1)", self.delta)));
        }
        if self.t == 0 || self.n1 == 0 || self.n0 == 0 {
            return Err(invalid("t/n1/n0", "must be positive"));
        }
        Ok(())
    }

    /// `L = ⌊1/ρ⌋`.
    pub fn list_bound(&self) -> usize {
        (1.0 / self.rho).floor() as usize
    }

    /// `α = ρ − 1/(L+1)`.
    pub fn alpha(&self) -> f64 {
        self.rho - 1.0 / (self.list_bound() as f64 + 1.0)
    }

    /// Frequency threshold `ρ − α/2`.
    pub fn frequency_threshold(&self) -> f64 {
        self.rho - self.alpha() / 2.0
    }

    /// Validation-loss threshold `2ε/3`.
    pub fn loss_threshold(&self) -> f64 {
        2.0 * self.epsilon / 3.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoostOutcome {
    /// `None` is the explicit failure value.
    pub hypothesis: Option<FiniteHypothesis>,
    /// Base runs that returned the output hypothesis.
    pub count: usize,
    pub validation_loss: Option<f64>,
    pub distinct_base_outputs: usize,
}

impl BoostOutcome {
    pub fn failed(&self) -> bool {
        self.hypothesis.is_none()
    }
}

/// Runs `base` on `t` independent batches, then returns the first hypothesis
/// (in order of first appearance) whose frequency is at least `ρ − α/2` and
/// whose loss on a fresh validation sample is at most `2ε/3`.
pub fn boost_stable_learner(
    base: &dyn StableLearner,
    cfg: &BoostConfig,
    dist: &FiniteDistribution,
    rng: &SeededRng,
) -> Result<BoostOutcome> {
    cfg.validate()?;
    let outputs: Vec<FiniteHypothesis> = (0..cfg.t)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.fork("boost/base", i as u64);
            let batch = dist.sample(cfg.n0, &mut r);
            base.learn(&batch, &mut r)
        })
        .collect();
    let mut counts: HashMap<&FiniteHypothesis, usize> = HashMap::new();
    let mut order: Vec<&FiniteHypothesis> = Vec::new();
    for h in &outputs {
        let c = counts.entry(h).or_insert(0);
        if *c == 0 {
            order.push(h);
        }
        *c += 1;
    }
    let validation = dist.sample(cfg.n1, &mut rng.fork("boost/validation", 0));
    let threshold = cfg.frequency_threshold();
    for h in &order {
        let count = counts[h];
        if (count as f64) < threshold * cfg.t as f64 {
            continue;
        }
        let loss = h.empirical_loss(&validation);
        if loss <= cfg.loss_threshold() {
            return Ok(BoostOutcome {
                hypothesis: Some((*h).clone()),
                count,
                validation_loss: Some(loss),
                distinct_base_outputs: order.len(),
            });
        }
    }
    Ok(BoostOutcome {
        hypothesis: None,
        count: 0,
        validation_loss: None,
        distinct_base_outputs: order.len(),
    })
}

/// Uniformly random hypothesis on a domain of size `m`.
pub fn random_hypothesis<R: Rng + ?Sized>(m: usize, rng: &mut R) -> FiniteHypothesis {
    FiniteHypothesis::new(
        (0..m)
            .map(|_| if rng.random::<bool>() { Label::Pos } else { Label::Neg })
            .collect(),
    )
}
