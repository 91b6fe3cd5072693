//! Sphere nets in general position and the nearest-point rounding map.
//!
//! A net is built as a randomized greedy packing: uniform proposals are
//! accepted when they are at least `alpha/2` away from every accepted point.
//! A maximal packing at that spacing is also a covering at radius `alpha/2`,
//! so rounding to the nearest net point moves any point by less than `alpha`.
//! Greedy packing approaches maximality very slowly in higher dimensions, so
//! after the first round any Voronoi vertex still farther than `alpha/2` from
//! the net is inserted directly.
//! Random points are in general position with probability one, which keeps
//! the number of net points reachable from a small neighbourhood at most `d`.

use std::io::{Read, Write};

use rustc_hash::FxHashMap;

use crate::error::{invalid, Error, Result};
use crate::geometry::{
    check_dims, distance, sample_in_cap, sample_uniform_sphere, stream_id, SeededRng, UnitVector,
};

/// Distances within this of the minimum count as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Equidistance tolerance of [`check_general_position`].
pub const GENERAL_POSITION_TOLERANCE: f64 = 1e-9;

/// Upper bound on the number of net points.
pub const MAX_NET_POINTS: usize = 10_000_000;

/// Consecutive rejections (per accepted point) that end a packing round.
pub const REJECTIONS_PER_POINT: usize = 50;

/// Cap on the consecutive-rejection run of a round.
pub const MAX_REJECTION_RUN: usize = 20_000;

/// Probes used by [`build_net`] to verify the covering.
pub const BUILD_VERIFY_PROBES: usize = 10_000;

/// Largest hole radius searched by the hole-filling pass, in units of `alpha`.
pub const HOLE_SEARCH_RADIUS: f64 = 0.6;

/// Passes of the hole-filling step.
const HOLE_FILL_PASSES: usize = 8;

/// Densification rounds attempted after a failed covering check.
pub const DENSIFY_ROUNDS: usize = 3;

/// Grid acceleration is used up to this dimension; above it queries scan linearly.
const MAX_GRID_DIM: usize = 6;

type CellKey = [i32; MAX_GRID_DIM];

/// Uniform grid over the ambient cube with side `cell`, mapping cells to point indices.
#[derive(Clone, Debug)]
struct GridIndex {
    cell: f64,
    dim: usize,
    offsets: Vec<CellKey>,
    cells: FxHashMap<CellKey, Vec<u32>>,
}

impl GridIndex {
    fn new(dim: usize, cell: f64) -> Self {
        // All of {-1, 0, 1}^dim, padded with zeros.
        let mut offsets = vec![[0i32; MAX_GRID_DIM]];
        for j in 0..dim {
            offsets = offsets
                .into_iter()
                .flat_map(|o| {
                    (-1..=1).map(move |step| {
                        let mut o = o;
                        o[j] = step;
                        o
                    })
                })
                .collect();
        }
        // Visit the home cell first.
        offsets.sort_by_key(|o| o.iter().map(|c| c.abs()).sum::<i32>());
        Self {
            cell,
            dim,
            offsets,
            cells: FxHashMap::default(),
        }
    }

    fn key(&self, x: &[f64]) -> CellKey {
        let mut key = [0i32; MAX_GRID_DIM];
        for (k, c) in key.iter_mut().zip(x) {
            *k = (c / self.cell).floor() as i32;
        }
        key
    }

    fn insert(&mut self, x: &[f64], idx: u32) {
        let key = self.key(x);
        self.cells.entry(key).or_default().push(idx);
    }

    /// Visits every index stored in the 3^d block of cells around `x` until
    /// `f` returns `true`. Every point within distance `cell` of `x` is visited.
    fn any_near(&self, x: &[f64], mut f: impl FnMut(u32) -> bool) -> bool {
        let base = self.key(x);
        for off in &self.offsets {
            let mut key = base;
            for j in 0..self.dim {
                key[j] += off[j];
            }
            if let Some(ids) = self.cells.get(&key) {
                if ids.iter().any(|&i| f(i)) {
                    return true;
                }
            }
        }
        false
    }

    fn for_each_near(&self, x: &[f64], mut f: impl FnMut(u32)) {
        self.any_near(x, |i| {
            f(i);
            false
        });
    }
}

/// A finite point set on `S^{d-1}` used as a rounding codebook.
#[derive(Clone, Debug)]
pub struct SphereNet {
    points: Vec<UnitVector>,
    alpha: f64,
    seed: u64,
    dimension: usize,
    index: Option<GridIndex>,
}

impl PartialEq for SphereNet {
    fn eq(&self, other: &Self) -> bool {
        self.dimension == other.dimension
            && self.alpha.to_bits() == other.alpha.to_bits()
            && self.seed == other.seed
            && self.points == other.points
    }
}

impl SphereNet {
    /// Wraps an explicit point set without any covering or spacing checks.
    pub fn from_points(dimension: usize, alpha: f64, seed: u64, points: Vec<UnitVector>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid("alpha", format!("{alpha} is not in (0, 1]")));
        }
        for p in &points {
            check_dims(dimension, p.dim())?;
        }
        let mut net = Self {
            points,
            alpha,
            seed,
            dimension,
            index: None,
        };
        net.reindex();
        Ok(net)
    }

    fn reindex(&mut self) {
        if self.dimension > MAX_GRID_DIM {
            self.index = None;
            return;
        }
        let mut grid = GridIndex::new(self.dimension, self.alpha / 2.0);
        for (i, p) in self.points.iter().enumerate() {
            grid.insert(p.coords(), i as u32);
        }
        self.index = Some(grid);
    }

    fn push(&mut self, p: UnitVector) {
        let i = self.points.len() as u32;
        if let Some(grid) = self.index.as_mut() {
            grid.insert(p.coords(), i);
        }
        self.points.push(p);
    }

    pub fn points(&self) -> &[UnitVector] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Minimum pairwise spacing of a built net.
    pub fn spacing(&self) -> f64 {
        packing_spacing(self.alpha)
    }

    /// Whether some net point lies strictly closer than `r` to `x`.
    fn has_point_within(&self, x: &[f64], r: f64) -> bool {
        match &self.index {
            Some(grid) if r <= grid.cell => {
                grid.any_near(x, |i| distance(self.points[i as usize].coords(), x) < r)
            }
            _ => self.points.iter().any(|p| distance(p.coords(), x) < r),
        }
    }

    /// Nearest point by linear scan, ties within [`TIE_TOLERANCE`] to the lowest index.
    pub fn nearest_linear(&self, x: &[f64]) -> Option<(usize, f64)> {
        let dists: Vec<f64> = self.points.iter().map(|p| distance(p.coords(), x)).collect();
        let best = dists.iter().copied().fold(f64::INFINITY, f64::min);
        dists
            .iter()
            .position(|&dd| dd <= best + TIE_TOLERANCE)
            .map(|i| (i, dists[i]))
    }

    /// Nearest point using the grid when it provably contains every tie
    /// candidate, otherwise a linear scan. Same result as [`Self::nearest_linear`].
    pub fn nearest(&self, x: &[f64]) -> Option<(usize, f64)> {
        let grid = match &self.index {
            Some(g) => g,
            None => return self.nearest_linear(x),
        };
        let dist = |i: u32| distance(self.points[i as usize].coords(), x);
        let mut best = f64::INFINITY;
        grid.for_each_near(x, |i| best = best.min(dist(i)));
        if best + TIE_TOLERANCE > grid.cell {
            return self.nearest_linear(x);
        }
        let mut pick: Option<(usize, f64)> = None;
        grid.for_each_near(x, |i| {
            let dd = dist(i);
            if dd <= best + TIE_TOLERANCE && pick.is_none_or(|(j, _)| (i as usize) < j) {
                pick = Some((i as usize, dd));
            }
        });
        pick
    }

    /// Distances from `x` to every net point within `r` (`r` may exceed the grid cell).
    fn distances_within(&self, x: &[f64], r: f64) -> Vec<f64> {
        match &self.index {
            Some(grid) if r <= grid.cell => {
                let mut out = Vec::new();
                grid.for_each_near(x, |i| {
                    let dd = distance(self.points[i as usize].coords(), x);
                    if dd <= r {
                        out.push(dd);
                    }
                });
                out
            }
            _ => self
                .points
                .iter()
                .map(|p| distance(p.coords(), x))
                .filter(|dd| *dd <= r)
                .collect(),
        }
    }

    /// Writes the persistence format: little-endian header
    /// `(dimension: u64, alpha: f64, seed: u64, count: u64)` followed by the
    /// coordinates as `f64`, row-major.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(&(self.dimension as u64).to_le_bytes())?;
        out.write_all(&self.alpha.to_le_bytes())?;
        out.write_all(&self.seed.to_le_bytes())?;
        out.write_all(&(self.points.len() as u64).to_le_bytes())?;
        for p in &self.points {
            for c in p.coords() {
                out.write_all(&c.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(32 + 8 * self.dimension * self.points.len());
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self> {
        let mut word = [0u8; 8];
        let mut next = |input: &mut R| -> Result<[u8; 8]> {
            input
                .read_exact(&mut word)
                .map_err(|e| Error::Format(format!("truncated net file: {e}")))?;
            Ok(word)
        };
        let dimension = u64::from_le_bytes(next(&mut input)?) as usize;
        let alpha = f64::from_le_bytes(next(&mut input)?);
        let seed = u64::from_le_bytes(next(&mut input)?);
        let count = u64::from_le_bytes(next(&mut input)?) as usize;
        if dimension == 0 || count > MAX_NET_POINTS {
            return Err(Error::Format(format!(
                "bad net header (dimension {dimension}, count {count})"
            )));
        }
        let mut points = Vec::with_capacity(count);
        for _ in 0..count {
            let mut c = Vec::with_capacity(dimension);
            for _ in 0..dimension {
                c.push(f64::from_le_bytes(next(&mut input)?));
            }
            points.push(UnitVector::new(c)?);
        }
        let mut rest = Vec::new();
        input.read_to_end(&mut rest)?;
        if !rest.is_empty() {
            return Err(Error::Format(format!("{} trailing bytes in net file", rest.len())));
        }
        Self::from_points(dimension, alpha, seed, points)
    }
}

fn packing_spacing(alpha: f64) -> f64 {
    alpha / 2.0 * (1.0 - 1e-6)
}

/// Greedy random packing at spacing `alpha/2`, verified as an `alpha/2`-covering.
///
/// Each round accepts proposals until `REJECTIONS_PER_POINT * |T|` proposals
/// in a row are rejected. If the covering probe then finds uncovered points,
/// those points are added (they are farther than `alpha/2` from the net, so the
/// spacing is kept) and another round runs with twice the rejection budget.
pub fn build_net(d: usize, alpha: f64, seed: u64) -> Result<SphereNet> {
    build_net_with(d, alpha, seed, NetBuildOptions::default())
}

/// Budget knobs for [`build_net_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NetBuildOptions {
    pub rejections_per_point: usize,
    /// Upper bound on the consecutive-rejection run that ends a round.
    pub max_run: usize,
    /// Insert uncovered Voronoi vertices after the first packing round.
    pub fill_holes: bool,
    pub verify_probes: usize,
}

impl Default for NetBuildOptions {
    fn default() -> Self {
        Self {
            rejections_per_point: REJECTIONS_PER_POINT,
            max_run: MAX_REJECTION_RUN,
            fill_holes: true,
            verify_probes: BUILD_VERIFY_PROBES,
        }
    }
}

pub fn build_net_with(d: usize, alpha: f64, seed: u64, opts: NetBuildOptions) -> Result<SphereNet> {
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    let mut net = SphereNet::from_points(d, alpha, seed, Vec::new())?;
    let spacing = net.spacing();
    let mut proposals = SeededRng::new(seed, stream_id(0, "net/proposals", d as u64));
    let mut per_point = opts.rejections_per_point;
    let mut max_run = opts.max_run;

    for round in 0..=DENSIFY_ROUNDS {
        let mut rejected = 0usize;
        while rejected < (per_point * net.len().max(1)).min(max_run) {
            let x = sample_uniform_sphere(d, &mut proposals)?;
            if net.has_point_within(x.coords(), spacing) {
                rejected += 1;
            } else {
                if net.len() >= MAX_NET_POINTS {
                    return Err(Error::NetConstruction(format!(
                        "net exceeds {MAX_NET_POINTS} points"
                    )));
                }
                net.push(x);
                rejected = 0;
            }
        }
        if round == 0 && opts.fill_holes {
            fill_holes(&mut net, HOLE_SEARCH_RADIUS * alpha);
        }

        let mut probe_rng = SeededRng::new(seed, stream_id(0, "net/verify", round as u64));
        let mut uncovered = Vec::new();
        for _ in 0..opts.verify_probes {
            let x = sample_uniform_sphere(d, &mut probe_rng)?;
            if let Some((_, dist)) = net.nearest(x.coords()) {
                if dist > alpha / 2.0 {
                    uncovered.push(x);
                }
            }
        }
        if uncovered.is_empty() {
            return Ok(net);
        }
        for x in uncovered {
            if !net.has_point_within(x.coords(), spacing) {
                net.push(x);
            }
        }
        per_point *= 2;
        max_run *= 2;
    }
    Err(Error::NetConstruction(format!(
        "covering check still failing after {DENSIFY_ROUNDS} densification rounds"
    )))
}

/// Points of the sphere equidistant from `d` net points (Voronoi vertices) are
/// the local maxima of the distance to the net. Every such vertex with radius
/// in `(alpha/2, r_max]` that is still uncovered is added as a net point, and
/// the search repeats until no uncovered vertex remains.
fn fill_holes(net: &mut SphereNet, r_max: f64) {
    let d = net.dimension();
    if d < 2 || d > MAX_GRID_DIM {
        return;
    }
    // First pass looks at every vertex; later passes only at vertices
    // touching points added by the previous pass.
    let mut dirty: Option<Vec<u32>> = None;
    for _ in 0..HOLE_FILL_PASSES {
        let holes = uncovered_vertices(net, r_max, dirty.as_deref());
        if holes.is_empty() {
            return;
        }
        let spacing = net.spacing();
        let first_new = net.len() as u32;
        for c in holes {
            if !net.has_point_within(&c, spacing) {
                net.push(UnitVector::from_raw_unchecked(c));
            }
        }
        dirty = Some((first_new..net.len() as u32).collect());
    }
}

fn uncovered_vertices(net: &SphereNet, r_max: f64, dirty: Option<&[u32]>) -> Vec<Vec<f64>> {
    let d = net.dimension();
    let reach = 2.0 * r_max;
    let mut coarse = GridIndex::new(d, reach);
    for (i, p) in net.points.iter().enumerate() {
        coarse.insert(p.coords(), i as u32);
    }
    let covered = net.alpha() / 2.0;
    let mut out = Vec::new();
    let mut nbrs: Vec<u32> = Vec::new();
    let mut tuple: Vec<u32> = Vec::with_capacity(d);
    let mut visit = |i: u32, all_nbrs: bool| {
        let p = net.points[i as usize].coords();
        nbrs.clear();
        coarse.for_each_near(p, |j| {
            if (j > i || (all_nbrs && j != i))
                && distance(net.points[j as usize].coords(), p) < reach
            {
                nbrs.push(j);
            }
        });
        nbrs.sort_unstable();
        tuple.clear();
        tuple.push(i);
        extend_tuples(net, &nbrs, 0, &mut tuple, reach, &mut |t| {
            if let Some((c, r)) = circumcenter(net, t) {
                if r > covered && r <= r_max && !net.has_point_within(&c[..d], covered * (1.0 - 1e-9)) {
                    out.push(c[..d].to_vec());
                }
            }
        });
    };
    match dirty {
        None => (0..net.len() as u32).for_each(|i| visit(i, false)),
        Some(ids) => ids.iter().for_each(|&i| visit(i, true)),
    }
    out
}

fn extend_tuples(
    net: &SphereNet,
    nbrs: &[u32],
    from: usize,
    tuple: &mut Vec<u32>,
    reach: f64,
    f: &mut impl FnMut(&[u32]),
) {
    if tuple.len() == net.dimension() {
        f(tuple);
        return;
    }
    for k in from..nbrs.len() {
        let q = net.points[nbrs[k] as usize].coords();
        if tuple[1..]
            .iter()
            .all(|&t| distance(net.points[t as usize].coords(), q) < reach)
        {
            tuple.push(nbrs[k]);
            extend_tuples(net, nbrs, k + 1, tuple, reach, f);
            tuple.pop();
        }
    }
}

/// Centre (on the near side) and chordal radius of the cap whose boundary
/// passes through the given `d` points, or `None` if they are affinely degenerate.
fn circumcenter(net: &SphereNet, tuple: &[u32]) -> Option<([f64; MAX_GRID_DIM], f64)> {
    let d = tuple.len();
    let p0 = net.points[tuple[0] as usize].coords();
    let mut basis = [[0.0f64; MAX_GRID_DIM]; MAX_GRID_DIM];
    for (m, &t) in tuple[1..].iter().enumerate() {
        let q = net.points[t as usize].coords();
        let mut v = [0.0f64; MAX_GRID_DIM];
        for j in 0..d {
            v[j] = q[j] - p0[j];
        }
        for b in &basis[..m] {
            let pr: f64 = (0..d).map(|j| v[j] * b[j]).sum();
            (0..d).for_each(|j| v[j] -= pr * b[j]);
        }
        let n = (0..d).map(|j| v[j] * v[j]).sum::<f64>().sqrt();
        if n < 1e-9 {
            return None;
        }
        (0..d).for_each(|j| v[j] /= n);
        basis[m] = v;
    }
    // The component of p0 orthogonal to the differences is the cap axis.
    let mut c = [0.0f64; MAX_GRID_DIM];
    c[..d].copy_from_slice(p0);
    for b in &basis[..d - 1] {
        let pr: f64 = (0..d).map(|j| c[j] * b[j]).sum();
        (0..d).for_each(|j| c[j] -= pr * b[j]);
    }
    let n = (0..d).map(|j| c[j] * c[j]).sum::<f64>().sqrt();
    if n < 1e-9 {
        return None;
    }
    // Radius is cheap to get before normalizing: |c/n - p0|^2 = 2 - 2 <c, p0>/n.
    let cos = (0..d).map(|j| c[j] * p0[j]).sum::<f64>() / n;
    let r = (2.0 - 2.0 * cos).max(0.0).sqrt();
    (0..d).for_each(|j| c[j] /= n);
    Some((c, r))
}

/// Regular `count`-gon on the circle with edge midpoints at angles
/// `2πj/count`. `count` must be odd (an even polygon contains antipodal pairs,
/// which breaks general position in d = 2) and dense enough to be an
/// `alpha/2`-covering with `alpha/2` spacing.
///
/// Every midpoint direction is a reflection axis of the polygon, so a
/// reflection-equivariant learner splits exactly evenly between the two
/// nearest vertices there.
pub fn circle_net(alpha: f64, count: usize) -> Result<SphereNet> {
    if count < 3 || count % 2 == 0 {
        return Err(invalid("count", format!("{count} is not an odd number >= 3")));
    }
    let step = std::f64::consts::TAU / count as f64;
    let cover = 2.0 * (step / 4.0).sin();
    let spacing = 2.0 * (step / 2.0).sin();
    if cover > alpha / 2.0 || spacing < packing_spacing(alpha) {
        return Err(invalid(
            "count",
            format!("a regular {count}-gon is not an alpha/2-net for alpha = {alpha}"),
        ));
    }
    let points = (0..count)
        .map(|j| {
            let theta = (j as f64 + 0.5) * step;
            UnitVector::from_raw_unchecked(vec![theta.cos(), theta.sin()])
        })
        .collect();
    SphereNet::from_points(2, alpha, 0, points)
}

/// Nearest net point to `x` and its index.
pub fn round_to_net(net: &SphereNet, x: &UnitVector) -> Result<(UnitVector, usize)> {
    check_dims(net.dimension(), x.dim())?;
    let (i, _) = net.nearest(x.coords()).ok_or(Error::EmptyNet)?;
    Ok((net.points[i].clone(), i))
}

/// Worst nearest-net distance over explicit probes, and whether it is within `alpha/2`.
pub fn verify_covering_at(net: &SphereNet, probes: &[UnitVector]) -> (bool, f64) {
    let mut worst = 0.0f64;
    for x in probes {
        let dist = net.nearest(x.coords()).map_or(f64::INFINITY, |(_, dd)| dd);
        worst = worst.max(dist);
    }
    (worst <= net.alpha() / 2.0, worst)
}

/// Covering check on `n_probe` uniform probes.
pub fn verify_covering(net: &SphereNet, n_probe: usize, rng: &mut SeededRng) -> (bool, f64) {
    let d = net.dimension();
    let probes: Vec<UnitVector> = (0..n_probe)
        .map(|_| sample_uniform_sphere(d, rng).expect("net dimension is positive"))
        .collect();
    verify_covering_at(net, &probes)
}

/// False when some probe has `d+1` net points within [`GENERAL_POSITION_TOLERANCE`]
/// of its nearest distance.
pub fn check_general_position_at(net: &SphereNet, probes: &[UnitVector]) -> bool {
    let d = net.dimension();
    if net.len() <= d {
        return true;
    }
    probes.iter().all(|x| {
        let Some((_, nearest)) = net.nearest(x.coords()) else {
            return true;
        };
        net.distances_within(x.coords(), nearest + GENERAL_POSITION_TOLERANCE)
            .len()
            <= d
    })
}

pub fn check_general_position(net: &SphereNet, n_probe: usize, rng: &mut SeededRng) -> bool {
    let d = net.dimension();
    let probes: Vec<UnitVector> = (0..n_probe)
        .map(|_| sample_uniform_sphere(d, rng).expect("net dimension is positive"))
        .collect();
    check_general_position_at(net, &probes)
}

/// Number of distinct rounding targets over `n_points` draws in the cap of
/// chordal radius `radius` around `center`.
pub fn cap_rounding_multiplicity(
    net: &SphereNet,
    center: &UnitVector,
    radius: f64,
    n_points: usize,
    rng: &mut SeededRng,
) -> Result<usize> {
    let mut seen = std::collections::BTreeSet::new();
    for _ in 0..n_points {
        let x = sample_in_cap(center, radius, rng)?;
        seen.insert(round_to_net(net, &x)?.1);
    }
    Ok(seen.len())
}
