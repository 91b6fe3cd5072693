//! Partial and total homogeneous halfspaces, the margin distributions `D_w`,
//! and population-loss evaluation.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{check_dims, dot, inner, sample_uniform_sphere, UnitVector};

/// Default number of sphere proposals allowed per accepted margin point.
pub const DEFAULT_REJECTION_BUDGET: usize = 1000;

/// A binary label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "+1")]
    Pos,
    #[serde(rename = "-1")]
    Neg,
}

impl Label {
    pub fn sign(self) -> f64 {
        match self {
            Label::Pos => 1.0,
            Label::Neg => -1.0,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Label::Pos => Label::Neg,
            Label::Neg => Label::Pos,
        }
    }

    /// `+1` for nonnegative values.
    pub fn of(value: f64) -> Self {
        if value >= 0.0 {
            Label::Pos
        } else {
            Label::Neg
        }
    }
}

/// Output of a partial concept: a label or "undefined".
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PartialLabel {
    Pos,
    Neg,
    Star,
}

impl PartialLabel {
    pub fn defined(self) -> Option<Label> {
        match self {
            PartialLabel::Pos => Some(Label::Pos),
            PartialLabel::Neg => Some(Label::Neg),
            PartialLabel::Star => None,
        }
    }
}

impl From<Label> for PartialLabel {
    fn from(l: Label) -> Self {
        match l {
            Label::Pos => PartialLabel::Pos,
            Label::Neg => PartialLabel::Neg,
        }
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(invalid("gamma", format!("{gamma} is not in (0, 1)")))
    }
}

/// `h_w`: `+1` above the band `|<w,x>| < gamma`, `-1` below it, undefined inside.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialHalfspace {
    w: UnitVector,
    gamma: f64,
}

impl PartialHalfspace {
    pub fn new(w: UnitVector, gamma: f64) -> Result<Self> {
        check_gamma(gamma)?;
        Ok(Self { w, gamma })
    }

    pub fn w(&self) -> &UnitVector {
        &self.w
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn eval(&self, x: &UnitVector) -> Result<PartialLabel> {
        let t = inner(&self.w, x)?;
        Ok(if t >= self.gamma {
            PartialLabel::Pos
        } else if t <= -self.gamma {
            PartialLabel::Neg
        } else {
            PartialLabel::Star
        })
    }
}

/// Closed halfspace `h̄_z(x) = +1` iff `<z,x> >= 0`.
///
/// When `z` is a net point, `net_index` carries its identity so that two
/// hypotheses can be compared exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TotalHalfspace {
    pub z: UnitVector,
    pub net_index: Option<usize>,
}

impl TotalHalfspace {
    pub fn new(z: UnitVector) -> Self {
        Self { z, net_index: None }
    }

    pub fn eval(&self, x: &UnitVector) -> Result<Label> {
        check_dims(self.z.dim(), x.dim())?;
        Ok(Label::of(dot(self.z.coords(), x.coords())))
    }
}

/// A finite labeled sample.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pairs: Vec<(UnitVector, Label)>,
}

impl LabeledSample {
    pub fn new(pairs: Vec<(UnitVector, Label)>) -> Result<Self> {
        if let Some((first, _)) = pairs.first() {
            let d = first.dim();
            for (x, _) in &pairs {
                check_dims(d, x.dim())?;
            }
        }
        Ok(Self { pairs })
    }

    pub fn pairs(&self) -> &[(UnitVector, Label)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.pairs.first().map(|(x, _)| x.dim())
    }

    pub fn iter(&self) -> impl Iterator<Item = &(UnitVector, Label)> {
        self.pairs.iter()
    }
}

/// Anything the learner can draw labeled batches from.
pub trait SampleSource: Sync {
    fn dim(&self) -> usize;

    fn draw(&self, n: usize, rng: &mut dyn rand::RngCore) -> Result<LabeledSample>;
}

/// `D_w`: uniform on `{x : |<w,x>| >= gamma}` labeled by `h_w`.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginDistribution {
    concept: PartialHalfspace,
    budget: usize,
}

impl MarginDistribution {
    pub fn new(w: UnitVector, gamma: f64) -> Result<Self> {
        Ok(Self {
            concept: PartialHalfspace::new(w, gamma)?,
            budget: DEFAULT_REJECTION_BUDGET,
        })
    }

    /// Overrides the per-point rejection budget.
    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget.max(1);
        self
    }

    pub fn w(&self) -> &UnitVector {
        self.concept.w()
    }

    pub fn gamma(&self) -> f64 {
        self.concept.gamma()
    }

    pub fn concept(&self) -> &PartialHalfspace {
        &self.concept
    }

    /// `n` i.i.d. draws by rejection from the uniform sphere.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<LabeledSample> {
        if n == 0 {
            return Err(invalid("n", "must be positive"));
        }
        let d = self.w().dim();
        let mut pairs = Vec::with_capacity(n);
        let mut proposals = 0usize;
        let limit = self.budget.saturating_mul(n);
        while pairs.len() < n {
            if proposals >= limit {
                return Err(Error::SamplerStall {
                    accepted: pairs.len(),
                    proposals,
                    rate: pairs.len() as f64 / proposals as f64,
                });
            }
            proposals += 1;
            let x = sample_uniform_sphere(d, rng)?;
            if let Some(y) = self.concept.eval(&x)?.defined() {
                pairs.push((x, y));
            }
        }
        Ok(LabeledSample { pairs })
    }
}

impl SampleSource for MarginDistribution {
    fn dim(&self) -> usize {
        self.w().dim()
    }

    fn draw(&self, n: usize, rng: &mut dyn rand::RngCore) -> Result<LabeledSample> {
        self.sample(n, rng)
    }
}

/// Draws with replacement from a fixed pool; lets callers inject arbitrary
/// (possibly non-realizable) data.
#[derive(Clone, Debug)]
pub struct PoolSource {
    pool: LabeledSample,
}

impl PoolSource {
    pub fn new(pool: LabeledSample) -> Result<Self> {
        if pool.is_empty() {
            return Err(invalid("pool", "must be nonempty"));
        }
        Ok(Self { pool })
    }
}

impl SampleSource for PoolSource {
    fn dim(&self) -> usize {
        self.pool.dim().unwrap_or(0)
    }

    fn draw(&self, n: usize, rng: &mut dyn rand::RngCore) -> Result<LabeledSample> {
        let m = self.pool.len();
        let pairs = (0..n)
            .map(|_| self.pool.pairs[rng.random_range(0..m)].clone())
            .collect();
        Ok(LabeledSample { pairs })
    }
}

/// Two-sided 95% Hoeffding half-width for a mean of `n` Bernoulli draws.
pub fn hoeffding_half_width(n: usize) -> f64 {
    ((2.0f64 / 0.05).ln() / (2.0 * n as f64)).sqrt()
}

/// Monte-Carlo estimate of `L_D(h)` with its 95% Hoeffding half-width.
pub fn loss_montecarlo<R: Rng + ?Sized>(
    h: &TotalHalfspace,
    dist: &MarginDistribution,
    n_mc: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    if n_mc == 0 {
        return Err(invalid("n_mc", "must be positive"));
    }
    let sample = dist.sample(n_mc, rng)?;
    let mut wrong = 0usize;
    for (x, y) in sample.iter() {
        if h.eval(x)? != *y {
            wrong += 1;
        }
    }
    Ok((wrong as f64 / n_mc as f64, hoeffding_half_width(n_mc)))
}

/// Length of the intersection of two arcs `[a0, a1]` and `[b0, b1]` on the
/// circle (each given with `a0 <= a1`, length at most `2π`).
fn arc_overlap(a: (f64, f64), b: (f64, f64)) -> f64 {
    let tau = 2.0 * PI;
    (-2..=2)
        .map(|k| {
            let shift = k as f64 * tau;
            let lo = a.0.max(b.0 + shift);
            let hi = a.1.min(b.1 + shift);
            (hi - lo).max(0.0)
        })
        .sum()
}

/// Exact `L_{D_w}(h̄_z)` in the plane.
///
/// With `a = arccos(gamma)` the support of `D_w` is the two arcs of half-width
/// `a` around `w` and `-w`; the loss is the normalized length of the parts of
/// those arcs on the wrong side of `z`.
pub fn loss_exact_2d(h: &TotalHalfspace, dist: &MarginDistribution) -> Result<f64> {
    let d = dist.w().dim();
    if d != 2 {
        return Err(Error::UnsupportedDimension { required: 2, got: d });
    }
    check_dims(2, h.z.dim())?;
    let a = dist.gamma().acos();
    let theta = inner(dist.w(), &h.z)?.acos();
    let half = PI / 2.0;
    // Angles are measured from w; the loss depends only on |theta|.
    let z_side = (theta - half, theta + half);
    let pos_arc = (-a, a);
    let neg_arc = (PI - a, PI + a);
    let wrong_pos = 2.0 * a - arc_overlap(pos_arc, z_side);
    let wrong_neg = arc_overlap(neg_arc, z_side);
    Ok(((wrong_pos + wrong_neg) / (4.0 * a)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SeededRng;

    fn e(d: usize, i: usize) -> UnitVector {
        UnitVector::basis(d, i).unwrap()
    }

    #[test]
    fn eval_partial_examples() {
        let h = PartialHalfspace::new(e(2, 0), 0.5).unwrap();
        assert_eq!(h.eval(&e(2, 0)).unwrap(), PartialLabel::Pos);
        assert_eq!(h.eval(&e(2, 1)).unwrap(), PartialLabel::Star);
        let x = UnitVector::new(vec![-0.6, 0.8]).unwrap();
        assert_eq!(h.eval(&x).unwrap(), PartialLabel::Neg);
        assert!(h.eval(&e(3, 0)).is_err());
        assert!(PartialHalfspace::new(e(2, 0), 1.0).is_err());
        assert!(PartialHalfspace::new(e(2, 0), 0.0).is_err());
    }

    #[test]
    fn eval_total_examples() {
        let h = TotalHalfspace::new(e(2, 0));
        assert_eq!(h.eval(&e(2, 1)).unwrap(), Label::Pos);
        assert_eq!(h.eval(&e(2, 0)).unwrap(), Label::Pos);
        assert_eq!(h.eval(&e(2, 0).neg()).unwrap(), Label::Neg);
        assert!(h.eval(&e(3, 0)).is_err());
    }

    #[test]
    fn margin_sampler_acceptance_rate_2d() {
        // |cos φ| >= 1/2 covers 2/3 of the circle.
        let dist = MarginDistribution::new(e(2, 0), 0.5).unwrap();
        let mut rng = SeededRng::new(11, 0);
        let mut accepted = 0;
        let proposals = 100_000;
        for _ in 0..proposals {
            let x = sample_uniform_sphere(2, &mut rng).unwrap();
            if dist.concept().eval(&x).unwrap() != PartialLabel::Star {
                accepted += 1;
            }
        }
        let rate = accepted as f64 / proposals as f64;
        assert!((rate - 2.0 / 3.0).abs() < 0.01, "rate = {rate}");
    }

    #[test]
    fn margin_sampler_respects_support() {
        let w = UnitVector::new(vec![0.6, 0.0, 0.8]).unwrap();
        let dist = MarginDistribution::new(w.clone(), 0.3).unwrap();
        let s = dist.sample(2000, &mut SeededRng::new(2, 0)).unwrap();
        for (x, y) in s.iter() {
            assert!(y.sign() * inner(&w, x).unwrap() >= 0.3);
        }
    }

    #[test]
    fn margin_sampler_stalls_on_thin_support() {
        let dist = MarginDistribution::new(e(3, 0), 0.9).unwrap().with_budget(10);
        // Acceptance ≈ 0.1 in d=3, so 10 proposals per point cannot keep up.
        let err = dist.sample(1000, &mut SeededRng::new(0, 0)).unwrap_err();
        match err {
            Error::SamplerStall { rate, .. } => assert!(rate < 0.2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn montecarlo_loss_exact_cases() {
        let w = UnitVector::new(vec![0.0, 0.6, 0.8]).unwrap();
        let dist = MarginDistribution::new(w.clone(), 0.2).unwrap();
        let mut rng = SeededRng::new(4, 0);
        let (same, hw) = loss_montecarlo(&TotalHalfspace::new(w.clone()), &dist, 5000, &mut rng).unwrap();
        assert_eq!(same, 0.0);
        assert!((hw - hoeffding_half_width(5000)).abs() < 1e-15);
        let (anti, _) = loss_montecarlo(&TotalHalfspace::new(w.neg()), &dist, 5000, &mut rng).unwrap();
        assert_eq!(anti, 1.0);
    }

    #[test]
    fn montecarlo_loss_small_rotation_2d() {
        let dist = MarginDistribution::new(e(2, 0), 0.5).unwrap();
        let h = TotalHalfspace::new(UnitVector::from_angle(0.3));
        let (est, hw) = loss_montecarlo(&h, &dist, 20_000, &mut SeededRng::new(8, 0)).unwrap();
        assert!(est <= hw);
    }

    #[test]
    fn exact_loss_examples() {
        let dist = MarginDistribution::new(e(2, 0), 0.5).unwrap();
        let at = |t: f64| loss_exact_2d(&TotalHalfspace::new(UnitVector::from_angle(t)), &dist).unwrap();
        assert_eq!(at(0.0), 0.0);
        assert!((at(PI) - 1.0).abs() < 1e-12);
        assert_eq!(at(0.3), 0.0);
        let d3 = MarginDistribution::new(e(3, 0), 0.5).unwrap();
        assert!(matches!(
            loss_exact_2d(&TotalHalfspace::new(e(3, 0)), &d3),
            Err(Error::UnsupportedDimension { .. })
        ));
    }

    /// Midpoint-rule integral of the disagreement indicator over the support.
    fn quadrature_loss(gamma: f64, theta: f64) -> f64 {
        let n = 400_000;
        let (mut support, mut wrong) = (0.0, 0.0);
        for i in 0..n {
            let phi = (i as f64 + 0.5) / n as f64 * 2.0 * PI;
            let c = phi.cos();
            if c.abs() < gamma {
                continue;
            }
            support += 1.0;
            let y = if c > 0.0 { 1.0 } else { -1.0 };
            let pred = if (phi - theta).cos() >= 0.0 { 1.0 } else { -1.0 };
            if y != pred {
                wrong += 1.0;
            }
        }
        wrong / support
    }

    #[test]
    fn exact_loss_matches_quadrature() {
        for &(gamma, theta) in &[(0.5, 0.3), (0.5, 0.9), (0.25, 1.4), (0.8, 2.5), (0.1, -0.7), (0.3, 3.0)] {
            let w = UnitVector::from_angle(0.4);
            let dist = MarginDistribution::new(w, gamma).unwrap();
            let h = TotalHalfspace::new(UnitVector::from_angle(0.4 + theta));
            let exact = loss_exact_2d(&h, &dist).unwrap();
            let quad = quadrature_loss(gamma, theta);
            assert!((exact - quad).abs() < 1e-4, "gamma={gamma} theta={theta}: {exact} vs {quad}");
        }
    }
}
