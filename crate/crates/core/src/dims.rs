//! Brute-force VC and Littlestone dimensions of finite partial concept
//! classes, the Perceptron mistake count, and Gap Hamming Distance matrices.
//!
//! A class is a matrix over `{+1, −1, *}` with one row per concept and one
//! column per domain point; `*` is undefined and never counts as either label.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::concepts::{Label, LabeledSample, PartialLabel};
use crate::error::{invalid, Error, Result};
use crate::geometry::dot;

/// Column limit of [`vc_dim`].
pub const VC_MAX_COLUMNS: usize = 24;

/// Work limit (memo misses times columns) of [`littlestone_dim`].
pub const LDIM_BUDGET: usize = 10_000_000;

/// Limit on `n` in [`build_ghd`].
pub const GHD_MAX_N: usize = 12;

/// Limit on undefined cells in [`min_disambiguation_ldim`].
pub const DISAMBIGUATION_MAX_STARS: usize = 20;

#[derive(Clone, Debug, PartialEq)]
pub struct PartialClassMatrix {
    entries: Vec<Vec<PartialLabel>>,
    row_labels: Vec<String>,
    col_labels: Vec<String>,
}

impl PartialClassMatrix {
    pub fn new(entries: Vec<Vec<PartialLabel>>, row_labels: Vec<String>, col_labels: Vec<String>) -> Result<Self> {
        let cols = entries.first().map_or(0, Vec::len);
        if entries.is_empty() || cols == 0 {
            return Err(invalid("entries", "need at least one row and one column"));
        }
        if let Some(r) = entries.iter().position(|row| row.len() != cols) {
            return Err(invalid("entries", format!("row {r} has {} cells, expected {cols}", entries[r].len())));
        }
        if row_labels.len() != entries.len() || col_labels.len() != cols {
            return Err(invalid("labels", "label counts must match the matrix shape"));
        }
        Ok(Self {
            entries,
            row_labels,
            col_labels,
        })
    }

    /// Matrix with labels `r0, r1, …` and `c0, c1, …`.
    pub fn from_entries(entries: Vec<Vec<PartialLabel>>) -> Result<Self> {
        let rows = entries.len();
        let cols = entries.first().map_or(0, Vec::len);
        Self::new(
            entries,
            (0..rows).map(|i| format!("r{i}")).collect(),
            (0..cols).map(|j| format!("c{j}")).collect(),
        )
    }

    pub fn rows(&self) -> usize {
        self.entries.len()
    }

    pub fn cols(&self) -> usize {
        self.entries[0].len()
    }

    pub fn entry(&self, r: usize, c: usize) -> PartialLabel {
        self.entries[r][c]
    }

    pub fn entries(&self) -> &[Vec<PartialLabel>] {
        &self.entries
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    /// Positions of `*` cells in row-major order.
    pub fn star_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (r, row) in self.entries.iter().enumerate() {
            for (c, e) in row.iter().enumerate() {
                if *e == PartialLabel::Star {
                    out.push((r, c));
                }
            }
        }
        out
    }

    pub fn is_total(&self) -> bool {
        self.entries.iter().flatten().all(|e| *e != PartialLabel::Star)
    }

    /// Reads CSV whose first row and column hold labels and whose cells are `+1`, `-1` or `*`.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).from_reader(reader);
        let mut records = rdr.records();
        let header = records
            .next()
            .ok_or_else(|| Error::Format("empty matrix file".into()))??;
        let col_labels: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
        let mut row_labels = Vec::new();
        let mut entries = Vec::new();
        for (line, rec) in records.enumerate() {
            let rec = rec?;
            let mut cells = rec.iter();
            row_labels.push(cells.next().unwrap_or_default().to_owned());
            let row = cells
                .map(|cell| match cell.trim() {
                    "+1" | "1" => Ok(PartialLabel::Pos),
                    "-1" => Ok(PartialLabel::Neg),
                    "*" => Ok(PartialLabel::Star),
                    other => Err(Error::Format(format!("row {}: bad cell {other:?}", line + 1))),
                })
                .collect::<Result<Vec<_>>>()?;
            entries.push(row);
        }
        Self::new(entries, row_labels, col_labels)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().from_writer(writer);
        let mut header = vec![String::new()];
        header.extend(self.col_labels.iter().cloned());
        wtr.write_record(&header)?;
        for (label, row) in self.row_labels.iter().zip(&self.entries) {
            let mut rec = vec![label.clone()];
            rec.extend(row.iter().map(|e| cell_text(*e).to_owned()));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Copy with the given `*` cells replaced.
    pub fn filled(&self, filling: &BTreeMap<(usize, usize), Label>) -> Self {
        let mut out = self.clone();
        for (&(r, c), &y) in filling {
            out.entries[r][c] = y.into();
        }
        out
    }
}

fn cell_text(e: PartialLabel) -> &'static str {
    match e {
        PartialLabel::Pos => "+1",
        PartialLabel::Neg => "-1",
        PartialLabel::Star => "*",
    }
}

/// VC dimension and a maximum shattered column set (lexicographically first).
///
/// Shattered sets are closed under taking subsets, so candidates of size
/// `s + 1` are grown from shattered sets of size `s`.
pub fn vc_dim(m: &PartialClassMatrix) -> Result<(usize, Vec<usize>)> {
    let cols = m.cols();
    if cols > VC_MAX_COLUMNS {
        return Err(Error::SizeGuard(format!(
            "vc_dim enumerates subsets of at most {VC_MAX_COLUMNS} columns, got {cols}"
        )));
    }
    let mut level: Vec<Vec<usize>> = vec![Vec::new()];
    let mut best = Vec::new();
    loop {
        let mut next = Vec::new();
        for set in &level {
            let start = set.last().map_or(0, |&c| c + 1);
            for c in start..cols {
                let mut cand = set.clone();
                cand.push(c);
                if is_shattered(m, &cand) {
                    next.push(cand);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        best = next[0].clone();
        level = next;
    }
    Ok((best.len(), best))
}

/// Whether every `±1` pattern on `cols` is realized by a row defined on all of them.
pub fn is_shattered(m: &PartialClassMatrix, cols: &[usize]) -> bool {
    let k = cols.len();
    if k >= usize::BITS as usize || m.rows() < (1usize << k) {
        return false;
    }
    let mut seen = vec![false; 1 << k];
    let mut distinct = 0usize;
    'rows: for row in m.entries() {
        let mut pattern = 0usize;
        for (b, &c) in cols.iter().enumerate() {
            match row[c] {
                PartialLabel::Pos => pattern |= 1 << b,
                PartialLabel::Neg => {}
                PartialLabel::Star => continue 'rows,
            }
        }
        if !seen[pattern] {
            seen[pattern] = true;
            distinct += 1;
        }
    }
    distinct == 1 << k
}

/// A shattered mistake tree. Positions are strings over `{+, -}` giving the
/// labels taken from the root; the empty string is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MistakeTreeCertificate {
    pub depth: usize,
    pub node_points: BTreeMap<String, usize>,
    pub witness_rows: BTreeMap<String, usize>,
}

impl MistakeTreeCertificate {
    /// Checks the tree against `m` directly: every leaf's witness row must
    /// carry the labels of its path at the path's points.
    pub fn validate(&self, m: &PartialClassMatrix) -> bool {
        if self.depth >= usize::BITS as usize {
            return false;
        }
        for leaf in 0usize..(1 << self.depth) {
            let path: String = (0..self.depth)
                .map(|i| if leaf >> (self.depth - 1 - i) & 1 == 1 { '+' } else { '-' })
                .collect();
            let Some(&r) = self.witness_rows.get(&path) else {
                return false;
            };
            if r >= m.rows() {
                return false;
            }
            for i in 0..self.depth {
                let Some(&x) = self.node_points.get(&path[..i]) else {
                    return false;
                };
                if x >= m.cols() {
                    return false;
                }
                let want = if path.as_bytes()[i] == b'+' {
                    PartialLabel::Pos
                } else {
                    PartialLabel::Neg
                };
                if m.entry(r, x) != want {
                    return false;
                }
            }
        }
        true
    }
}

type RowSet = Vec<u64>;

struct LdimEngine<'a> {
    m: &'a PartialClassMatrix,
    plus: Vec<RowSet>,
    minus: Vec<RowSet>,
    memo: HashMap<RowSet, i64>,
    work: usize,
}

fn count(set: &RowSet) -> usize {
    set.iter().map(|w| w.count_ones() as usize).sum()
}

fn and(a: &RowSet, b: &RowSet) -> RowSet {
    a.iter().zip(b).map(|(x, y)| x & y).collect()
}

/// `floor(log2 n)` for `n >= 1`.
fn log2_floor(n: usize) -> i64 {
    (usize::BITS - 1 - n.leading_zeros()) as i64
}

impl<'a> LdimEngine<'a> {
    fn new(m: &'a PartialClassMatrix) -> Self {
        let words = m.rows().div_ceil(64);
        let mut plus = vec![vec![0u64; words]; m.cols()];
        let mut minus = vec![vec![0u64; words]; m.cols()];
        for (r, row) in m.entries().iter().enumerate() {
            for (c, e) in row.iter().enumerate() {
                match e {
                    PartialLabel::Pos => plus[c][r / 64] |= 1 << (r % 64),
                    PartialLabel::Neg => minus[c][r / 64] |= 1 << (r % 64),
                    PartialLabel::Star => {}
                }
            }
        }
        Self {
            m,
            plus,
            minus,
            memo: HashMap::new(),
            work: 0,
        }
    }

    fn all_rows(&self) -> RowSet {
        let n = self.m.rows();
        let mut set = vec![0u64; n.div_ceil(64)];
        for r in 0..n {
            set[r / 64] |= 1 << (r % 64);
        }
        set
    }

    fn ldim(&mut self, set: &RowSet) -> Result<i64> {
        let size = count(set);
        if size == 0 {
            return Ok(-1);
        }
        if size == 1 {
            return Ok(0);
        }
        if let Some(&v) = self.memo.get(set) {
            return Ok(v);
        }
        self.work += self.m.cols();
        if self.work > LDIM_BUDGET {
            return Err(Error::SizeGuard(format!(
                "Littlestone recursion exceeded its budget of {LDIM_BUDGET} steps"
            )));
        }
        // A depth-d shattered tree needs 2^d distinct rows.
        let ceiling = log2_floor(size);
        let mut best = 0i64;
        for x in 0..self.m.cols() {
            if best >= ceiling {
                break;
            }
            let pos = and(set, &self.plus[x]);
            let neg = and(set, &self.minus[x]);
            let (np, nn) = (count(&pos), count(&neg));
            if np == 0 || nn == 0 || log2_floor(np.min(nn)) < best {
                continue;
            }
            let a = self.ldim(&pos)?;
            if a < best {
                continue;
            }
            let b = self.ldim(&neg)?;
            best = best.max(1 + a.min(b));
        }
        self.memo.insert(set.clone(), best);
        Ok(best)
    }

    /// Builds a shattered tree of exactly `depth` levels inside `set`.
    fn build(&mut self, set: &RowSet, depth: i64, path: &mut String, cert: &mut MistakeTreeCertificate) -> Result<()> {
        if depth == 0 {
            let r = first_row(set).expect("nonempty subclass");
            cert.witness_rows.insert(path.clone(), r);
            return Ok(());
        }
        for x in 0..self.m.cols() {
            let pos = and(set, &self.plus[x]);
            let neg = and(set, &self.minus[x]);
            if count(&pos) == 0 || count(&neg) == 0 {
                continue;
            }
            if self.ldim(&pos)? >= depth - 1 && self.ldim(&neg)? >= depth - 1 {
                cert.node_points.insert(path.clone(), x);
                path.push('+');
                self.build(&pos, depth - 1, path, cert)?;
                path.pop();
                path.push('-');
                self.build(&neg, depth - 1, path, cert)?;
                path.pop();
                return Ok(());
            }
        }
        unreachable!("ldim value guarantees a splitting column")
    }
}

fn first_row(set: &RowSet) -> Option<usize> {
    set.iter()
        .enumerate()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}

/// Exact Littlestone dimension with a shattered tree of that depth.
pub fn littlestone_dim(m: &PartialClassMatrix) -> Result<(usize, MistakeTreeCertificate)> {
    let mut engine = LdimEngine::new(m);
    let all = engine.all_rows();
    let dim = engine.ldim(&all)?;
    let mut cert = MistakeTreeCertificate {
        depth: dim as usize,
        node_points: BTreeMap::new(),
        witness_rows: BTreeMap::new(),
    };
    engine.build(&all, dim, &mut String::new(), &mut cert)?;
    Ok((dim as usize, cert))
}

/// Perceptron over `stream` in order: predict `sign(<v, x>)` (zero counts as
/// a mistake) and add `y·x` on each mistake. Returns the number of mistakes.
pub fn perceptron_mistakes(stream: &LabeledSample, _gamma_promise: f64) -> usize {
    let Some(d) = stream.dim() else {
        return 0;
    };
    let mut v = vec![0.0; d];
    let mut mistakes = 0;
    for (x, y) in stream.iter() {
        let s = y.sign();
        if s * dot(&v, x.coords()) <= 0.0 {
            mistakes += 1;
            for (vj, xj) in v.iter_mut().zip(x.coords()) {
                *vj += s * xj;
            }
        }
    }
    mistakes
}

/// `ceil(1/gamma²)`, the mistake bound for margin `gamma`.
pub fn perceptron_bound(gamma: f64) -> usize {
    (1.0 / (gamma * gamma) - 1e-9).ceil() as usize
}

/// `{±1}^n` in lexicographic order with `−1` before `+1`.
pub fn hypercube(n: usize) -> Vec<Vec<i8>> {
    (0..1usize << n)
        .map(|i| {
            (0..n)
                .map(|j| if i >> (n - 1 - j) & 1 == 1 { 1 } else { -1 })
                .collect()
        })
        .collect()
}

fn cube_label(x: &[i8]) -> String {
    x.iter().map(|&b| if b > 0 { '+' } else { '-' }).collect()
}

/// Gap Hamming Distance matrix: entry `sign(<x, y>)` when `|<x, y>| >= gamma·n`, else `*`.
pub fn build_ghd(n: usize, gamma: f64) -> Result<PartialClassMatrix> {
    if n == 0 {
        return Err(invalid("n", "must be positive"));
    }
    if n > GHD_MAX_N {
        return Err(Error::SizeGuard(format!(
            "GHD matrices are 2^n x 2^n; n is limited to {GHD_MAX_N}, got {n}"
        )));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(invalid("gamma", format!("{gamma} is not in (0, 1]")));
    }
    let cube = hypercube(n);
    let threshold = gamma * n as f64;
    let entries = cube
        .iter()
        .map(|x| {
            cube.iter()
                .map(|y| {
                    let ip: i32 = x.iter().zip(y).map(|(a, b)| i32::from(a * b)).sum();
                    if f64::from(ip.abs()) >= threshold {
                        if ip > 0 {
                            PartialLabel::Pos
                        } else {
                            PartialLabel::Neg
                        }
                    } else {
                        PartialLabel::Star
                    }
                })
                .collect()
        })
        .collect();
    let labels: Vec<String> = cube.iter().map(|x| cube_label(x)).collect();
    PartialClassMatrix::new(entries, labels.clone(), labels)
}

/// Smallest Littlestone dimension over all `±1` fillings of the `*` cells,
/// with the first optimal filling in enumeration order.
pub fn min_disambiguation_ldim(m: &PartialClassMatrix) -> Result<(usize, BTreeMap<(usize, usize), Label>)> {
    let stars = m.star_cells();
    if stars.len() > DISAMBIGUATION_MAX_STARS {
        return Err(Error::SizeGuard(format!(
            "{} undefined cells exceed the exhaustive limit of {DISAMBIGUATION_MAX_STARS}; \
             evaluate a fixed filling with littlestone_dim instead",
            stars.len()
        )));
    }
    // Any filling keeps every shattered set shattered.
    let floor = if m.cols() <= VC_MAX_COLUMNS { vc_dim(m)?.0 } else { 0 };
    let mut best: Option<(usize, BTreeMap<(usize, usize), Label>)> = None;
    for mask in 0u32..(1u32 << stars.len()) {
        let filling: BTreeMap<(usize, usize), Label> = stars
            .iter()
            .enumerate()
            .map(|(b, &cell)| (cell, if mask >> b & 1 == 1 { Label::Pos } else { Label::Neg }))
            .collect();
        let (dim, _) = littlestone_dim(&m.filled(&filling))?;
        if best.as_ref().is_none_or(|(b, _)| dim < *b) {
            best = Some((dim, filling));
            if dim <= floor {
                break;
            }
        }
    }
    Ok(best.expect("at least one filling"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concepts::MarginDistribution;
    use crate::geometry::{SeededRng, UnitVector};
    use PartialLabel::{Neg as N, Pos as P, Star as S};

    fn mat(rows: &[&[PartialLabel]]) -> PartialClassMatrix {
        PartialClassMatrix::from_entries(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    fn thresholds(points: usize) -> PartialClassMatrix {
        // Concept i labels points j < i negative and the rest positive.
        let rows = (0..=points)
            .map(|i| (0..points).map(|j| if j < i { N } else { P }).collect())
            .collect();
        PartialClassMatrix::from_entries(rows).unwrap()
    }

    #[test]
    fn vc_examples() {
        assert_eq!(vc_dim(&mat(&[&[P, P, P]])).unwrap().0, 0);
        let full = mat(&[&[P, P], &[P, N], &[N, P], &[N, N]]);
        assert_eq!(vc_dim(&full).unwrap(), (2, vec![0, 1]));
        // Stars never realize a pattern.
        let starred = mat(&[&[P, S], &[P, N], &[N, P], &[N, N]]);
        assert_eq!(vc_dim(&starred).unwrap().0, 1);
        let wide = PartialClassMatrix::from_entries(vec![vec![P; 25]]).unwrap();
        assert!(matches!(vc_dim(&wide), Err(Error::SizeGuard(_))));
    }

    #[test]
    fn ldim_examples() {
        let (d, cert) = littlestone_dim(&mat(&[&[P, N, S]])).unwrap();
        assert_eq!(d, 0);
        assert!(cert.validate(&mat(&[&[P, N, S]])));
        for m in 1..=4 {
            let rows: Vec<Vec<PartialLabel>> = (0..1usize << m)
                .map(|p| (0..m).map(|j| if p >> j & 1 == 1 { P } else { N }).collect())
                .collect();
            let full = PartialClassMatrix::from_entries(rows).unwrap();
            let (d, cert) = littlestone_dim(&full).unwrap();
            assert_eq!(d, m);
            assert!(cert.validate(&full));
        }
        let th = thresholds(7);
        let (d, cert) = littlestone_dim(&th).unwrap();
        assert_eq!(d, 3);
        assert!(cert.validate(&th));
        assert_eq!(vc_dim(&th).unwrap().0, 1);
    }

    #[test]
    fn certificate_validator_rejects_wrong_trees() {
        let th = thresholds(3);
        let (_, mut cert) = littlestone_dim(&th).unwrap();
        cert.depth += 1;
        assert!(!cert.validate(&th));
        let (_, mut cert) = littlestone_dim(&th).unwrap();
        let leaf = cert.witness_rows.keys().next().unwrap().clone();
        let r = cert.witness_rows[&leaf];
        cert.witness_rows.insert(leaf, (r + 1) % th.rows());
        assert!(!cert.validate(&th));
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let m = build_ghd(2, 0.5).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(",--,-+,+-,++\n--,+1,*,*,-1\n"), "{text}");
        assert_eq!(PartialClassMatrix::read_csv(&buf[..]).unwrap(), m);
        assert!(PartialClassMatrix::read_csv(&b",a\nr,x\n"[..]).is_err());
        assert!(PartialClassMatrix::read_csv(&b",a,b\nr,+1\n"[..]).is_err());
    }

    #[test]
    fn ghd_examples() {
        let m = build_ghd(2, 0.5).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                let want = if r == c {
                    P
                } else if r + c == 3 {
                    N
                } else {
                    S
                };
                assert_eq!(m.entry(r, c), want, "({r}, {c})");
            }
        }
        for gamma in [0.1, 0.5, 1.0] {
            let m = build_ghd(4, gamma).unwrap();
            for r in 0..16 {
                assert_eq!(m.entry(r, r), P);
                assert_eq!(m.entry(r, 15 - r), N);
            }
        }
        assert!(matches!(build_ghd(13, 0.5), Err(Error::SizeGuard(_))));
        assert!(build_ghd(3, 0.0).is_err());
    }

    #[test]
    fn disambiguation_examples() {
        let total = thresholds(4);
        let (d, filling) = min_disambiguation_ldim(&total).unwrap();
        assert_eq!(d, littlestone_dim(&total).unwrap().0);
        assert!(filling.is_empty());
        let (d, filling) = min_disambiguation_ldim(&mat(&[&[S]])).unwrap();
        assert_eq!(d, 0);
        assert_eq!(filling.len(), 1);
        let many = PartialClassMatrix::from_entries(vec![vec![S; 21]]).unwrap();
        assert!(matches!(min_disambiguation_ldim(&many), Err(Error::SizeGuard(_))));
    }

    #[test]
    fn ghd_disambiguation_is_at_least_vc() {
        let m = build_ghd(2, 0.5).unwrap();
        let (d, filling) = min_disambiguation_ldim(&m).unwrap();
        let vc = vc_dim(&m).unwrap().0;
        assert!(d >= vc);
        assert_eq!(littlestone_dim(&m.filled(&filling)).unwrap().0, d);
    }

    #[test]
    fn perceptron_bound_holds_on_margin_streams() {
        assert_eq!(perceptron_bound(0.5), 4);
        assert_eq!(perceptron_bound(0.25), 16);
        let mut rng = SeededRng::new(6, 0);
        for i in 0..20 {
            let w = UnitVector::from_angle(i as f64);
            let stream = MarginDistribution::new(w, 0.5).unwrap().sample(200, &mut rng).unwrap();
            assert!(perceptron_mistakes(&stream, 0.5) <= 4);
        }
        let one = MarginDistribution::new(UnitVector::basis(3, 0).unwrap(), 0.5)
            .unwrap()
            .sample(1, &mut rng)
            .unwrap();
        assert_eq!(perceptron_mistakes(&one, 0.5), 1);
    }
}
