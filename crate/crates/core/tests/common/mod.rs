//! Independent oracles and fixtures shared by the integration tests.

#![allow(dead_code)]

use std::collections::BTreeSet;

use halfspace_lab::concepts::PartialLabel;
use halfspace_lab::dims::PartialClassMatrix;
use halfspace_lab::geometry::{sample_uniform_sphere, SeededRng, UnitVector};
use rand::Rng;

/// Littlestone dimension by the plain recursion over consistent row sets,
/// with no memoization or pruning. `-1` for the empty class.
pub fn naive_ldim(m: &PartialClassMatrix) -> i64 {
    fn go(m: &PartialClassMatrix, rows: &[usize]) -> i64 {
        if rows.is_empty() {
            return -1;
        }
        let mut best = 0;
        for c in 0..m.cols() {
            let pos: Vec<usize> = rows.iter().copied().filter(|&r| m.entry(r, c) == PartialLabel::Pos).collect();
            let neg: Vec<usize> = rows.iter().copied().filter(|&r| m.entry(r, c) == PartialLabel::Neg).collect();
            if !pos.is_empty() && !neg.is_empty() {
                best = best.max(1 + go(m, &pos).min(go(m, &neg)));
            }
        }
        best
    }
    go(m, &(0..m.rows()).collect::<Vec<_>>())
}

/// Largest shattered column set by brute force over all subsets.
pub fn naive_vc(m: &PartialClassMatrix) -> usize {
    let cols = m.cols();
    let mut best = 0;
    for mask in 0u32..(1 << cols) {
        let set: Vec<usize> = (0..cols).filter(|c| mask >> c & 1 == 1).collect();
        if set.len() <= best {
            continue;
        }
        let patterns: BTreeSet<Vec<bool>> = (0..m.rows())
            .filter_map(|r| {
                set.iter()
                    .map(|&c| match m.entry(r, c) {
                        PartialLabel::Pos => Some(true),
                        PartialLabel::Neg => Some(false),
                        PartialLabel::Star => None,
                    })
                    .collect::<Option<Vec<bool>>>()
            })
            .collect();
        if patterns.len() == 1 << set.len() {
            best = set.len();
        }
    }
    best
}

/// Random partial matrix with each cell `*` with probability `star_p`.
pub fn random_partial_matrix(rows: usize, cols: usize, star_p: f64, rng: &mut SeededRng) -> PartialClassMatrix {
    let entries = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|_| {
                    if rng.random::<f64>() < star_p {
                        PartialLabel::Star
                    } else if rng.random::<bool>() {
                        PartialLabel::Pos
                    } else {
                        PartialLabel::Neg
                    }
                })
                .collect()
        })
        .collect();
    PartialClassMatrix::from_entries(entries).unwrap()
}

/// Sign patterns of homogeneous halfspaces on `m` random unit points in
/// dimension `d`, collected from `draws` random normals.
pub fn halfspace_restriction(d: usize, m: usize, draws: usize, rng: &mut SeededRng) -> PartialClassMatrix {
    let points: Vec<UnitVector> = (0..m).map(|_| sample_uniform_sphere(d, rng).unwrap()).collect();
    let mut patterns = BTreeSet::new();
    for _ in 0..draws {
        let w = sample_uniform_sphere(d, rng).unwrap();
        let row: Vec<bool> = points
            .iter()
            .map(|x| x.coords().iter().zip(w.coords()).map(|(a, b)| a * b).sum::<f64>() > 0.0)
            .collect();
        patterns.insert(row);
    }
    let entries = patterns
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|b| if b { PartialLabel::Pos } else { PartialLabel::Neg })
                .collect()
        })
        .collect();
    PartialClassMatrix::from_entries(entries).unwrap()
}

/// Thresholds on `n` ordered points: row `i` labels points `< i` negative.
pub fn thresholds_csv(n: usize) -> String {
    let mut s = String::new();
    for c in 0..n {
        s.push_str(&format!(",x{c}"));
    }
    s.push('\n');
    for r in 0..=n {
        s.push_str(&format!("t{r}"));
        for c in 0..n {
            s.push_str(if c < r { ",-1" } else { ",+1" });
        }
        s.push('\n');
    }
    s
}
