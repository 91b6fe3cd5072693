//! Homogeneous hard-margin SVM.
//!
//! The max-margin program over unit `w` is solved through the equivalent
//! min-norm problem
//!
//! ```text
//! minimize ½‖v‖²  subject to  y_i <x_i, v> >= 1
//! ```
//!
//! whose solution gives `w = v/‖v‖` and `margin = 1/‖v‖`. The dual
//! `max Σα_i − ½‖Σ α_i y_i x_i‖²` over `α >= 0` is solved by cyclic coordinate
//! ascent. For any dual point, `‖v‖/Σα` upper-bounds the optimal margin and
//! `min_i y_i <x_i, v/‖v‖>` is achieved by the current iterate, so their
//! difference certifies accuracy and a vanishing upper bound certifies
//! infeasibility. Coordinate ascent can crawl near the optimum, so every few
//! sweeps an exact solve on the smallest-margin points is attempted and kept
//! when it passes the same certificate.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::concepts::LabeledSample;
use crate::error::{invalid, Error, Result};
use crate::geometry::{dot, norm2, UnitVector};

/// Default additive accuracy on the margin.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Sweep limit used by [`hard_svm`].
pub const DEFAULT_MAX_SWEEPS: usize = 200_000;

/// Sweeps between active-set finishing attempts.
const POLISH_EVERY: usize = 32;

/// Smallest-margin points tried as support vectors by the finishing step.
const POLISH_CANDIDATES: usize = 8;
const POLISH_MAX_SET: usize = 12;

/// Size limits of [`svm_oracle_small`].
pub const ORACLE_MAX_POINTS: usize = 10;
pub const ORACLE_MAX_DIM: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmSolution {
    pub w: UnitVector,
    pub margin: f64,
    /// Nonnegative dual multipliers, one per sample point.
    pub dual_certificate: Vec<f64>,
    pub iterations: usize,
}

impl SvmSolution {
    /// `‖w − Σα_i y_i x_i / ‖Σα_i y_i x_i‖‖`.
    pub fn kkt_residual(&self, sample: &LabeledSample) -> f64 {
        let d = self.w.dim();
        let mut v = vec![0.0; d];
        for ((x, y), a) in sample.iter().zip(&self.dual_certificate) {
            for (vj, xj) in v.iter_mut().zip(x.coords()) {
                *vj += a * y.sign() * xj;
            }
        }
        let nv = norm2(&v);
        if nv == 0.0 {
            return f64::INFINITY;
        }
        self.w
            .coords()
            .iter()
            .zip(&v)
            .map(|(w, v)| (w - v / nv).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// `y_i x_i` for every pair, row-major.
fn signed_points(sample: &LabeledSample) -> (usize, Vec<f64>) {
    let d = sample.dim().unwrap_or(0);
    let mut z = Vec::with_capacity(sample.len() * d);
    for (x, y) in sample.iter() {
        z.extend(x.coords().iter().map(|c| y.sign() * c));
    }
    (d, z)
}

/// Solver knobs for [`hard_svm_with`].
#[derive(Clone, Copy, Debug)]
pub struct SvmOptions {
    pub tol: f64,
    pub max_sweeps: usize,
}

impl Default for SvmOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_sweeps: DEFAULT_MAX_SWEEPS,
        }
    }
}

/// Maximum-margin homogeneous separator of `sample`, accurate to `tol` in the margin.
pub fn hard_svm(sample: &LabeledSample, tol: f64) -> Result<SvmSolution> {
    hard_svm_with(
        sample,
        SvmOptions {
            tol,
            ..SvmOptions::default()
        },
    )
}

pub fn hard_svm_with(sample: &LabeledSample, opts: SvmOptions) -> Result<SvmSolution> {
    if sample.is_empty() {
        return Err(invalid("sample", "must be nonempty"));
    }
    if !(opts.tol > 0.0) {
        return Err(invalid("tol", format!("{} is not positive", opts.tol)));
    }
    let tol = opts.tol;
    let n = sample.len();
    let (d, z) = signed_points(sample);
    let row = |i: usize| &z[i * d..(i + 1) * d];
    let sq: Vec<f64> = (0..n).map(|i| dot(row(i), row(i))).collect();
    // Dual objective at optimum is 1/(2γ*²).
    let objective_cap = 1.0 / (2.0 * tol * tol);

    let mut alpha = vec![0.0; n];
    let mut v = vec![0.0; d];
    let mut active: Vec<usize> = (0..n).collect();
    let mut pg_max_old = f64::INFINITY;
    let mut gap = f64::INFINITY;

    for sweep in 1..=opts.max_sweeps {
        let mut pg_max_new = 0.0f64;
        let mut s = 0;
        while s < active.len() {
            let i = active[s];
            let zi = row(i);
            let g = dot(&v, zi) - 1.0;
            let mut pg = g;
            if alpha[i] == 0.0 {
                if g > pg_max_old {
                    active.swap_remove(s);
                    continue;
                }
                if g > 0.0 {
                    pg = 0.0;
                }
            }
            pg_max_new = pg_max_new.max(pg.abs());
            if pg != 0.0 {
                let old = alpha[i];
                alpha[i] = (old - g / sq[i]).max(0.0);
                let step = alpha[i] - old;
                for (vj, zj) in v.iter_mut().zip(zi) {
                    *vj += step * zj;
                }
            }
            s += 1;
        }

        let sum_alpha: f64 = alpha.iter().sum();
        let nv = norm2(&v);
        if sum_alpha > 0.0 && nv > 0.0 {
            let upper = nv / sum_alpha;
            let dual_objective = sum_alpha - 0.5 * nv * nv;
            if upper < tol || dual_objective > objective_cap {
                return Err(Error::InfeasibleSample { upper_bound: upper });
            }
            let achieved = (0..n)
                .map(|i| dot(&v, row(i)))
                .fold(f64::INFINITY, f64::min)
                / nv;
            gap = upper - achieved;
            if achieved > 0.0 && gap <= tol {
                let w = UnitVector::from_raw_unchecked(v.iter().map(|c| c / nv).collect());
                return Ok(SvmSolution {
                    w,
                    margin: achieved,
                    dual_certificate: alpha,
                    iterations: sweep,
                });
            }
            if sweep % POLISH_EVERY == 0 {
                if let Some((a, pv)) = polish(&z, d, n, &alpha, &v) {
                    let np = norm2(&pv);
                    let achieved = (0..n)
                        .map(|i| dot(&pv, row(i)))
                        .fold(f64::INFINITY, f64::min)
                        / np;
                    let upper = np / a.iter().sum::<f64>();
                    if achieved > 0.0 && upper - achieved <= tol {
                        return Ok(SvmSolution {
                            w: UnitVector::from_raw_unchecked(pv.iter().map(|c| c / np).collect()),
                            margin: achieved,
                            dual_certificate: a,
                            iterations: sweep,
                        });
                    }
                }
            }
            // Exact line search along the ray through α.
            let scale = sum_alpha / (nv * nv);
            alpha.iter_mut().for_each(|a| *a *= scale);
            v.iter_mut().for_each(|c| *c *= scale);
        } else if nv == 0.0 && sum_alpha > 0.0 {
            return Err(Error::InfeasibleSample { upper_bound: 0.0 });
        }

        if active.len() < n && pg_max_new <= tol {
            active = (0..n).collect();
            pg_max_old = f64::INFINITY;
        } else {
            pg_max_old = if pg_max_new > 0.0 { pg_max_new } else { f64::INFINITY };
        }
    }
    Err(Error::NotConverged {
        iterations: opts.max_sweeps,
        gap,
    })
}

/// Active-set finish: the points with the smallest current margins are the
/// likely support vectors, so solve the equality system on every small subset
/// of them and keep a solution that satisfies all KKT conditions.
fn polish(z: &[f64], d: usize, n: usize, alpha: &[f64], v: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
    let row = |i: usize| &z[i * d..(i + 1) * d];
    let mut order: Vec<(f64, usize)> = (0..n).map(|i| (dot(v, row(i)), i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut cands: Vec<usize> = order.iter().take(POLISH_CANDIDATES).map(|o| o.1).collect();
    for (i, a) in alpha.iter().enumerate() {
        if *a > 0.0 && !cands.contains(&i) && cands.len() < POLISH_MAX_SET {
            cands.push(i);
        }
    }
    let (_, support, coef) = solve_support_sets(z, d, n, &cands, 1e-12)?;
    let mut a = vec![0.0; n];
    let mut pv = vec![0.0; d];
    for (c, &i) in coef.iter().zip(&support) {
        a[i] = c.max(0.0);
        for (vj, zj) in pv.iter_mut().zip(row(i)) {
            *vj += a[i] * zj;
        }
    }
    Some((a, pv))
}

/// Minimum-norm KKT point among subsets of `cands` with at most `d` members:
/// returns `(‖v‖, support, coefficients)`.
fn solve_support_sets(
    z: &[f64],
    d: usize,
    n: usize,
    cands: &[usize],
    feas: f64,
) -> Option<(f64, Vec<usize>, Vec<f64>)> {
    let row = |i: usize| &z[i * d..(i + 1) * d];
    let m_all = cands.len();
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    for mask in 1u64..(1u64 << m_all) {
        if mask.count_ones() as usize > d {
            continue;
        }
        let support: Vec<usize> = (0..m_all).filter(|b| mask & (1 << b) != 0).map(|b| cands[b]).collect();
        let m = support.len();
        let gram = DMatrix::from_fn(m, m, |a, b| dot(row(support[a]), row(support[b])));
        let Some(coef) = gram.lu().solve(&DVector::from_element(m, 1.0)) else {
            continue;
        };
        if coef.iter().any(|a| !a.is_finite() || *a < -feas) {
            continue;
        }
        let mut v = vec![0.0; d];
        for (a, &i) in coef.iter().zip(&support) {
            for (vj, zj) in v.iter_mut().zip(row(i)) {
                *vj += a * zj;
            }
        }
        let nv = norm2(&v);
        if nv == 0.0 || !nv.is_finite() {
            continue;
        }
        if (0..n).any(|j| dot(&v, row(j)) < 1.0 - feas) {
            continue;
        }
        if best.as_ref().is_none_or(|(b, _, _)| nv < *b) {
            best = Some((nv, support, coef.iter().copied().collect()));
        }
    }
    best
}

/// Exact hard-SVM optimum by enumerating candidate support sets.
///
/// For each subset `S` of at most `d` points the equality system
/// `y_i <x_i, v> = 1 (i ∈ S)` with `v = Σ_S α_i y_i x_i` is solved; a subset
/// whose solution has `α >= 0` and satisfies every constraint is a KKT point
/// and therefore optimal.
pub fn svm_oracle_small(sample: &LabeledSample) -> Result<SvmSolution> {
    let n = sample.len();
    if n == 0 {
        return Err(invalid("sample", "must be nonempty"));
    }
    let (d, z) = signed_points(sample);
    if n > ORACLE_MAX_POINTS || d > ORACLE_MAX_DIM {
        return Err(Error::SizeGuard(format!(
            "oracle supports at most {ORACLE_MAX_POINTS} points in dimension {ORACLE_MAX_DIM}, got {n} in {d}"
        )));
    }
    let all: Vec<usize> = (0..n).collect();
    let best = solve_support_sets(&z, d, n, &all, 1e-9).map(|(nv, support, coef)| {
        let mut v = vec![0.0; d];
        let mut alpha = vec![0.0; n];
        for (a, &i) in coef.iter().zip(&support) {
            alpha[i] = a.max(0.0);
            for (vj, zj) in v.iter_mut().zip(&z[i * d..(i + 1) * d]) {
                *vj += a * zj;
            }
        }
        (nv, v, alpha)
    });
    let (nv, v, alpha) = best.ok_or(Error::InfeasibleSample { upper_bound: 0.0 })?;
    Ok(SvmSolution {
        w: UnitVector::from_raw_unchecked(v.iter().map(|c| c / nv).collect()),
        margin: 1.0 / nv,
        dual_certificate: alpha,
        iterations: 0,
    })
}

/// Whether `y<x, w> >= gamma` for every pair of `sample`.
pub fn is_gamma_separator(w: &UnitVector, sample: &LabeledSample, gamma: f64) -> bool {
    sample
        .iter()
        .all(|(x, y)| y.sign() * dot(w.coords(), x.coords()) >= gamma)
}
