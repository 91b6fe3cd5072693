//! The averaged-SVM learning rule with net rounding, and parameter selection.
//!
//! One run draws `k` fresh batches of `n0` examples, solves the hard-SVM on
//! each, averages the `k` unit separators, normalizes the average and rounds it
//! to the nearest point of a `gamma/2` sphere net. The output hypothesis is the
//! closed halfspace of that net point; its net index is its identity.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::concepts::{SampleSource, TotalHalfspace};
use crate::error::{invalid, Error, Result};
use crate::geometry::{norm2, normalize, sample_uniform_sphere, SeededRng, UnitVector};
use crate::rounding::{round_to_net, SphereNet};
use crate::svm::{hard_svm, DEFAULT_TOL};

/// Coordinate bound used with the concentration inequality for unit vectors
/// (`|x_j - μ_j| <= 2`).
pub const CONCENTRATION_C: f64 = 2.0;

/// Sample-size cap applied to [`select_n0`] results by callers.
pub const MAX_N0: usize = 10_000_000;

/// Norm below which the averaged separator counts as a failure.
const MIN_AVERAGE_NORM: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct LearnerConfig {
    pub d: usize,
    pub gamma: f64,
    pub epsilon: f64,
    pub delta: f64,
    /// Number of SVM batches.
    pub k: usize,
    /// Batch size.
    pub n0: usize,
    /// Rounding net with `alpha = gamma/2`.
    pub net: Arc<SphereNet>,
    pub svm_tol: f64,
}

impl LearnerConfig {
    pub fn new(
        d: usize,
        gamma: f64,
        epsilon: f64,
        delta: f64,
        k: usize,
        n0: usize,
        net: Arc<SphereNet>,
    ) -> Result<Self> {
        let cfg = Self {
            d,
            gamma,
            epsilon,
            delta,
            k,
            n0,
            net,
            svm_tol: DEFAULT_TOL,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Configuration with `k` and `n0` from [`select_k`] (at the default
    /// target [`default_t_target`]) and [`select_n0`].
    pub fn with_defaults(d: usize, gamma: f64, epsilon: f64, delta: f64, net: Arc<SphereNet>) -> Result<Self> {
        let k = select_k(d, delta, default_t_target(gamma))?;
        let n0 = select_n0(gamma, epsilon, delta, k)?.min(MAX_N0);
        Self::new(d, gamma, epsilon, delta, k, n0, net)
    }

    pub fn with_svm_tol(mut self, tol: f64) -> Result<Self> {
        self.svm_tol = tol;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(invalid("gamma", format!("{} is not in (0, 1)", self.gamma)));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 0.5) {
            return Err(invalid("epsilon", format!("{} is not in (0, 1/2)", self.epsilon)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta", format!("{} is not in (0, 1)", self.delta)));
        }
        if self.k == 0 {
            return Err(invalid("k", "must be positive"));
        }
        if self.n0 == 0 {
            return Err(invalid("n0", "must be positive"));
        }
        if !(self.svm_tol > 0.0) {
            return Err(invalid("svm_tol", "must be positive"));
        }
        if self.net.dimension() != self.d {
            return Err(invalid(
                "net",
                format!("net dimension {} differs from d = {}", self.net.dimension(), self.d),
            ));
        }
        if (self.net.alpha() - self.gamma / 2.0).abs() > 1e-12 {
            return Err(invalid(
                "net",
                format!(
                    "net alpha {} differs from gamma/2 = {}",
                    self.net.alpha(),
                    self.gamma / 2.0
                ),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LearnerOutput {
    /// Net-indexed output halfspace; `None` iff the run failed.
    pub hypothesis: Option<TotalHalfspace>,
    /// `‖(1/k) Σ w_i‖`.
    pub raw_average_norm: f64,
    pub batches_used: usize,
    pub failed: bool,
}

impl LearnerOutput {
    pub fn net_index(&self) -> Option<usize> {
        self.hypothesis.as_ref().and_then(|h| h.net_index)
    }

    fn failure(raw_average_norm: f64, batches_used: usize) -> Self {
        Self {
            hypothesis: None,
            raw_average_norm,
            batches_used,
            failed: true,
        }
    }
}

/// Intermediate vectors of one run, for checking the rule's invariants.
#[derive(Clone, Debug, Default)]
pub struct LearnerTrace {
    pub batch_separators: Vec<UnitVector>,
    pub average: Vec<f64>,
    pub normalized: Option<UnitVector>,
}

/// One run of the learning rule.
pub fn run_learner(cfg: &LearnerConfig, source: &dyn SampleSource, rng: &mut SeededRng) -> Result<LearnerOutput> {
    run_learner_traced(cfg, source, rng).map(|(out, _)| out)
}

pub fn run_learner_traced(
    cfg: &LearnerConfig,
    source: &dyn SampleSource,
    rng: &mut SeededRng,
) -> Result<(LearnerOutput, LearnerTrace)> {
    cfg.validate()?;
    if source.dim() != cfg.d {
        return Err(Error::DimensionMismatch {
            expected: cfg.d,
            got: source.dim(),
        });
    }
    let mut trace = LearnerTrace {
        average: vec![0.0; cfg.d],
        ..LearnerTrace::default()
    };
    for batch in 0..cfg.k {
        let sample = source.draw(cfg.n0, rng)?;
        let sol = match hard_svm(&sample, cfg.svm_tol) {
            Ok(sol) => sol,
            Err(Error::InfeasibleSample { .. } | Error::NotConverged { .. }) => {
                return Ok((LearnerOutput::failure(0.0, batch + 1), trace));
            }
            Err(e) => return Err(e),
        };
        for (a, c) in trace.average.iter_mut().zip(sol.w.coords()) {
            *a += c;
        }
        trace.batch_separators.push(sol.w);
    }
    trace.average.iter_mut().for_each(|a| *a /= cfg.k as f64);
    let norm = norm2(&trace.average);
    if norm < MIN_AVERAGE_NORM {
        return Ok((LearnerOutput::failure(norm, cfg.k), trace));
    }
    let z = normalize(&trace.average)?;
    let (point, index) = round_to_net(&cfg.net, &z)?;
    trace.normalized = Some(z);
    Ok((
        LearnerOutput {
            hypothesis: Some(TotalHalfspace {
                z: point,
                net_index: Some(index),
            }),
            raw_average_norm: norm,
            batches_used: cfg.k,
            failed: false,
        },
        trace,
    ))
}

/// Default deviation target for [`select_k`]: `(gamma/2) * (alpha/10)` with `alpha = gamma/2`.
pub fn default_t_target(gamma: f64) -> f64 {
    (gamma / 2.0) * (gamma / 2.0 / 10.0)
}

/// `2d·exp(-k t² / (2 d² C²))`.
pub fn concentration_bound(d: usize, k: usize, t: f64, c: f64) -> f64 {
    let d = d as f64;
    2.0 * d * (-(k as f64) * t * t / (2.0 * d * d * c * c)).exp()
}

/// Smallest `k` making the `l1` concentration bound at `t_target` at most `delta/4`.
pub fn select_k(d: usize, delta: f64, t_target: f64) -> Result<usize> {
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    if !(t_target > 0.0) {
        return Err(invalid("t_target", "must be positive"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("{delta} is not in (0, 1)")));
    }
    let df = d as f64;
    let k = 2.0 * df * df * CONCENTRATION_C * CONCENTRATION_C * (8.0 * df / delta).ln()
        / (t_target * t_target);
    Ok((k.ceil() as usize).max(1))
}

/// Heuristic batch size `ceil((8/ε)((4/γ²) ln(8/γ) + ln(8k/δ)))`.
pub fn select_n0(gamma: f64, epsilon: f64, delta: f64, k: usize) -> Result<usize> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid("gamma", format!("{gamma} is not in (0, 1)")));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid("epsilon", format!("{epsilon} is not in (0, 1)")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("{delta} is not in (0, 1)")));
    }
    if k == 0 {
        return Err(invalid("k", "must be positive"));
    }
    let n = (8.0 / epsilon)
        * ((4.0 / (gamma * gamma)) * (8.0 / gamma).ln() + (8.0 * k as f64 / delta).ln());
    Ok(if n.is_finite() { n.ceil() as usize } else { usize::MAX })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationRow {
    pub t: f64,
    pub empirical_tail: f64,
    /// Bound clipped to 1.
    pub lemma_bound: f64,
}

/// Empirical `Pr[‖Z − μ‖₁ >= t]` for the mean `Z` of `k` uniform unit vectors
/// in dimension `d` (so `μ = 0` and `‖x − μ‖_∞ <= 1`), next to the bound with `C = 1`.
pub fn concentration_probe(
    d: usize,
    k: usize,
    n_trials: usize,
    t_grid: &[f64],
    rng: &mut SeededRng,
) -> Result<Vec<ConcentrationRow>> {
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    if k == 0 || n_trials == 0 {
        return Err(invalid("k/n_trials", "must be positive"));
    }
    let mut deviations = Vec::with_capacity(n_trials);
    for _ in 0..n_trials {
        let mut z = vec![0.0; d];
        for _ in 0..k {
            let x = sample_uniform_sphere(d, rng)?;
            for (zj, xj) in z.iter_mut().zip(x.coords()) {
                *zj += xj;
            }
        }
        deviations.push(z.iter().map(|c| (c / k as f64).abs()).sum::<f64>());
    }
    Ok(t_grid
        .iter()
        .map(|&t| ConcentrationRow {
            t,
            empirical_tail: deviations.iter().filter(|&&dv| dv >= t).count() as f64 / n_trials as f64,
            lemma_bound: concentration_bound(d, k, t, 1.0).min(1.0),
        })
        .collect())
}

/// Stream for a learner run; exposed so callers can fork per-trial streams.
pub fn trial_rng(root: &SeededRng, trial: u64) -> SeededRng {
    root.fork("learner/trial", trial)
}

/// Draws a uniformly random target direction.
pub fn random_direction<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<UnitVector> {
    sample_uniform_sphere(d, rng)
}
