//! Unit-sphere vectors, seeded random streams and sphere samplers.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Norms below this are treated as zero by [`normalize`].
pub const DEGENERATE_NORM: f64 = 1e-12;

/// Tolerance on the Euclidean norm of a [`UnitVector`].
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// A point on the unit sphere `S^{d-1}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Wraps coordinates that are already unit norm (within [`UNIT_TOLERANCE`]).
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidDimension(0));
        }
        let norm = norm2(&coords);
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::InvalidParameter {
                name: "coords",
                reason: format!("norm {norm} is not 1"),
            });
        }
        Ok(Self(coords))
    }

    /// Standard basis vector `e_{axis}` in dimension `d`.
    pub fn basis(d: usize, axis: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension(0));
        }
        if axis >= d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: axis + 1,
            });
        }
        let mut v = vec![0.0; d];
        v[axis] = 1.0;
        Ok(Self(v))
    }

    /// Unit vector at angle `theta` in the plane.
    pub fn from_angle(theta: f64) -> Self {
        Self(vec![theta.cos(), theta.sin()])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.0
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|c| -c).collect())
    }

    /// Euclidean distance to `other`; dimensions must match.
    pub fn distance(&self, other: &UnitVector) -> Result<f64> {
        check_dims(self.dim(), other.dim())?;
        Ok(distance(&self.0, &other.0))
    }

    pub(crate) fn from_raw_unchecked(coords: Vec<f64>) -> Self {
        Self(coords)
    }
}

pub(crate) fn check_dims(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        Err(Error::DimensionMismatch { expected, got })
    } else {
        Ok(())
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Inner product clamped to `[-1, 1]`.
pub fn inner(a: &UnitVector, b: &UnitVector) -> Result<f64> {
    check_dims(a.dim(), b.dim())?;
    Ok(dot(&a.0, &b.0).clamp(-1.0, 1.0))
}

/// Scales `v` to unit norm.
pub fn normalize(v: &[f64]) -> Result<UnitVector> {
    if v.is_empty() {
        return Err(Error::InvalidDimension(0));
    }
    let norm = norm2(v);
    if !(norm >= DEGENERATE_NORM) || !norm.is_finite() {
        return Err(Error::DegenerateVector { norm });
    }
    Ok(UnitVector(v.iter().map(|c| c / norm).collect()))
}

/// Deterministic random stream identified by `(seed, stream_id)`.
///
/// Child streams created with [`SeededRng::fork`] depend only on the parent's
/// identity, never on how many values the parent has already produced, so
/// parallel trials stay reproducible regardless of scheduling.
#[derive(Clone, Debug)]
pub struct SeededRng {
    seed: u64,
    stream_id: u64,
    inner: ChaCha12Rng,
}

impl SeededRng {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Fresh stream named by `(label, index)` below this one.
    pub fn fork(&self, label: &str, index: u64) -> SeededRng {
        SeededRng::new(self.seed, stream_id(self.stream_id, label, index))
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable stream identifier for `(parent, label, index)`.
pub fn stream_id(parent: u64, label: &str, index: u64) -> u64 {
    // FNV-1a over the label, then mixed with parent and index.
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(splitmix64(parent ^ h).wrapping_add(index))
}

/// Uniform draw from `S^{d-1}` by normalizing `d` standard normals.
pub fn sample_uniform_sphere<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<UnitVector> {
    if d == 0 {
        return Err(Error::InvalidDimension(0));
    }
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if let Ok(u) = normalize(&v) {
            return Ok(u);
        }
    }
}

/// Point at geodesic angle `angle` from `center` along tangent direction `dir`.
///
/// `dir` need not be orthogonal to `center`; its tangential component is used.
pub(crate) fn geodesic_step(center: &[f64], dir: &[f64], angle: f64) -> Option<Vec<f64>> {
    let proj = dot(center, dir);
    let tangent: Vec<f64> = dir.iter().zip(center).map(|(u, c)| u - proj * c).collect();
    let tn = norm2(&tangent);
    if tn < DEGENERATE_NORM {
        return None;
    }
    let (s, c) = angle.sin_cos();
    Some(
        center
            .iter()
            .zip(&tangent)
            .map(|(x, t)| c * x + s * t / tn)
            .collect(),
    )
}

/// Uniform-direction draw inside the spherical cap of chordal radius `radius`
/// around `center`. Geodesic distance is drawn with density proportional to
/// `t^{d-2}`, which is the small-cap limit of the uniform measure.
pub fn sample_in_cap<R: Rng + ?Sized>(
    center: &UnitVector,
    radius: f64,
    rng: &mut R,
) -> Result<UnitVector> {
    let d = center.dim();
    if d < 2 {
        return Ok(center.clone());
    }
    let max_angle = 2.0 * (radius.min(2.0) / 2.0).asin();
    loop {
        let dir = sample_uniform_sphere(d, rng)?;
        let u: f64 = rng.random();
        let t = max_angle * u.powf(1.0 / (d as f64 - 1.0));
        if let Some(p) = geodesic_step(center.coords(), dir.coords(), t) {
            return normalize(&p);
        }
    }
}
