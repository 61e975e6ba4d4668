//! Seeded dictionaries and piecewise sparse signals.
//!
//! Every generator is a pure function of its parameters and a 64-bit seed.
//! Randomness comes from ChaCha8 with one stream per block, so block `i` of a
//! union does not depend on how many blocks come after it.

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::dictionary::{BlockPartition, Dictionary};
use crate::error::{Error, Result};
use crate::support::{SparsityPattern, SupportPartition};

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `(master, path[0], path[1], ...)`, e.g. `(master, grid point, trial)`.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(splitmix64(master), |acc, &k| {
        splitmix64(acc ^ splitmix64(k))
    })
}

fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn orthonormalize(g: DMatrix<f64>) -> DMatrix<f64> {
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..q.ncols() {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Orthonormal `m×m` matrix from the QR factorization of a Gaussian matrix.
pub fn random_orthonormal_basis(m: usize, seed: u64) -> Result<DMatrix<f64>> {
    if m == 0 {
        return Err(Error::OutOfRange(
            "basis dimension must be at least 1".into(),
        ));
    }
    Ok(orthonormalize(gaussian_matrix(&mut rng_for(seed, 0), m, m)))
}

fn check_union_shape(m: usize, n_blocks: usize) -> Result<()> {
    if m < 2 || n_blocks < 2 {
        return Err(Error::OutOfRange(format!(
            "need m ≥ 2 and at least 2 blocks, got m = {m}, N = {n_blocks}"
        )));
    }
    Ok(())
}

/// `N` independent random orthonormal bases of `R^m`, side by side.
pub fn union_orthogonal(m: usize, n_blocks: usize, seed: u64) -> Result<Dictionary> {
    check_union_shape(m, n_blocks)?;
    let mut a = DMatrix::zeros(m, m * n_blocks);
    for i in 0..n_blocks {
        let q = orthonormalize(gaussian_matrix(&mut rng_for(seed, i as u64), m, m));
        a.columns_mut(i * m, m).copy_from(&q);
    }
    Dictionary::normalized(a, BlockPartition::uniform(m, n_blocks)?).map(|(d, _)| d)
}

/// `[I | H/√m]` with `H` the Sylvester Hadamard matrix of order `m`.
pub fn identity_hadamard(m: usize) -> Result<Dictionary> {
    if m < 2 || !m.is_power_of_two() {
        return Err(Error::OutOfRange(format!(
            "Hadamard order {m} is not a power of two ≥ 2"
        )));
    }
    let scale = 1.0 / (m as f64).sqrt();
    let mut a = DMatrix::zeros(m, 2 * m);
    for i in 0..m {
        a[(i, i)] = 1.0;
        for j in 0..m {
            // Sylvester construction: H[i][j] = (-1)^popcount(i & j)
            let sign = if (i & j).count_ones() % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            a[(i, m + j)] = sign * scale;
        }
    }
    Dictionary::new(a, BlockPartition::uniform(m, 2)?)
}

/// Blocks with tunable internal coherence.
///
/// Block `i` is `(1 − mixing)·Q_i + mixing·G_i` with unit-normalized columns,
/// `Q_i` a random orthonormal basis and `G_i` standard normal. `mixing = 0`
/// gives orthonormal blocks and `mixing = 1` fully Gaussian ones. Coherence
/// is whatever results; measure it afterwards.
pub fn union_general(m: usize, n_blocks: usize, mixing: f64, seed: u64) -> Result<Dictionary> {
    check_union_shape(m, n_blocks)?;
    if !(0.0..=1.0).contains(&mixing) {
        return Err(Error::OutOfRange(format!("mixing {mixing} outside [0, 1]")));
    }
    let mut a = DMatrix::zeros(m, m * n_blocks);
    for i in 0..n_blocks {
        let mut rng = rng_for(seed, i as u64);
        let q = orthonormalize(gaussian_matrix(&mut rng, m, m));
        let g = gaussian_matrix(&mut rng, m, m);
        a.columns_mut(i * m, m)
            .copy_from(&(q * (1.0 - mixing) + g * mixing));
    }
    Dictionary::normalized(a, BlockPartition::uniform(m, n_blocks)?).map(|(d, _)| d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Amplitude {
    /// Magnitude uniform on `[lo, hi]`, random sign.
    Uniform { lo: f64, hi: f64 },
    /// Fixed magnitude, random sign.
    Fixed { value: f64 },
}

impl Default for Amplitude {
    fn default() -> Self {
        Amplitude::Uniform { lo: 0.5, hi: 1.5 }
    }
}

impl Amplitude {
    fn validate(&self) -> Result<()> {
        match *self {
            Amplitude::Uniform { lo, hi } if lo > 0.0 && hi >= lo && hi.is_finite() => Ok(()),
            Amplitude::Fixed { value } if value > 0.0 && value.is_finite() => Ok(()),
            other => Err(Error::OutOfRange(format!("invalid amplitude {other:?}"))),
        }
    }

    fn draw(&self, rng: &mut impl Rng) -> f64 {
        let mag = match *self {
            Amplitude::Uniform { lo, hi } if lo == hi => lo,
            Amplitude::Uniform { lo, hi } => rng.random_range(lo..=hi),
            Amplitude::Fixed { value } => value,
        };
        if rng.random::<bool>() {
            mag
        } else {
            -mag
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub partition: BlockPartition,
    pub sparsities: SparsityPattern,
    #[serde(default)]
    pub amplitude: Amplitude,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseSignal {
    pub x: DVector<f64>,
    pub support: SupportPartition,
}

/// Draws `s_i` positions uniformly without replacement inside each block `i`.
pub fn piecewise_sparse_signal(spec: &SignalSpec) -> Result<PiecewiseSignal> {
    spec.sparsities.check_against(&spec.partition)?;
    spec.amplitude.validate()?;
    let p = &spec.partition;
    let mut x = DVector::zeros(p.n());
    let mut local = Vec::with_capacity(p.n_blocks());
    for (i, &s) in spec.sparsities.per_block().iter().enumerate() {
        let mut rng = rng_for(spec.seed, i as u64);
        let mut idx = sample(&mut rng, p.width(i), s).into_vec();
        idx.sort_unstable();
        for &k in &idx {
            x[p.offset(i) + k] = spec.amplitude.draw(&mut rng);
        }
        local.push(idx);
    }
    let support = SupportPartition::from_local(p, &local)?;
    Ok(PiecewiseSignal { x, support })
}
