//! Coherence quantities of a union of bases.
//!
//! All cumulative (Babel-type) coherences are computed per reference column:
//! the absolute inner products against the candidate pool are sorted in
//! descending order and prefix-summed, so the maximum over index sets of a
//! given size is the maximum over reference columns of one prefix sum.

use std::collections::BTreeMap;
use std::ops::Range;

use itertools::Itertools;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::bound::Bound;
use crate::dictionary::{BlockPartition, Dictionary};
use crate::error::{Error, Result};
use crate::linalg::columns_dependent;

/// Relative singular-value threshold used for numerical rank in the spark search.
pub const DEFAULT_SPARK_RANK_TOL: f64 = 1e-10;
/// Default cap on subsets examined by the spark search.
pub const DEFAULT_SPARK_BUDGET: u64 = 5_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossBabelEntry {
    pub i: usize,
    pub j: usize,
    pub m: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WithinBabelEntry {
    pub i: usize,
    pub m: usize,
    pub value: f64,
}

/// Every coherence quantity of a dictionary, with optional cumulative tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoherenceProfile {
    pub mu: f64,
    pub block_mu: Vec<f64>,
    pub alpha: Vec<f64>,
    pub alpha_max: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub babel: Option<BTreeMap<usize, f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cross_babel: Option<Vec<CrossBabelEntry>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub within_babel: Option<Vec<WithinBabelEntry>>,
}

impl CoherenceProfile {
    pub fn n_blocks(&self) -> usize {
        self.block_mu.len()
    }

    /// True when every sub-basis is orthogonal up to `tol`.
    pub fn is_orthogonal_union(&self, tol: f64) -> bool {
        self.block_mu.iter().all(|&b| b <= tol)
    }
}

/// Maximum over `refs` of the prefix sums of the sorted `|G[k, r]|`, `k ∈ pool`.
/// Entry `t` of the result is the best sum of `t` terms, for `t = 0..=depth`.
fn max_prefix_sums(
    gram: &DMatrix<f64>,
    refs: Range<usize>,
    pool: Range<usize>,
    exclude_self: bool,
    depth: usize,
) -> Vec<f64> {
    let mut best = vec![0.0; depth + 1];
    let mut vals = Vec::with_capacity(pool.len());
    for r in refs {
        vals.clear();
        vals.extend(
            pool.clone()
                .filter(|&k| !(exclude_self && k == r))
                .map(|k| gram[(k, r)].abs()),
        );
        vals.sort_unstable_by(|a, b| b.total_cmp(a));
        let mut acc = 0.0;
        for (t, v) in vals.iter().take(depth).enumerate() {
            acc += v;
            if acc > best[t + 1] {
                best[t + 1] = acc;
            }
        }
    }
    best
}

fn check_block(p: &BlockPartition, i: usize) -> Result<()> {
    if i >= p.n_blocks() {
        return Err(Error::OutOfRange(format!(
            "block {i} (dictionary has {} blocks)",
            p.n_blocks()
        )));
    }
    Ok(())
}

fn mu_from_gram(gram: &DMatrix<f64>) -> f64 {
    let n = gram.ncols();
    let mut mu = 0.0f64;
    for j in 0..n {
        for i in 0..j {
            mu = mu.max(gram[(i, j)].abs());
        }
    }
    mu
}

fn block_mu_from_gram(gram: &DMatrix<f64>, p: &BlockPartition, i: usize) -> f64 {
    let r = p.range(i);
    let mut mu = 0.0f64;
    for j in r.clone() {
        for k in r.start..j {
            mu = mu.max(gram[(k, j)].abs());
        }
    }
    mu
}

/// `μ = max_{i≠j} |⟨a_i, a_j⟩|`.
pub fn mutual_coherence(d: &Dictionary) -> Result<f64> {
    if d.n() < 2 {
        return Err(Error::OutOfRange(
            "mutual coherence needs at least 2 columns".into(),
        ));
    }
    Ok(mu_from_gram(&d.gram()))
}

/// `μ^{i,i}`: coherence within sub-basis `i`; 0 for a single-column block.
pub fn block_coherence(d: &Dictionary, i: usize) -> Result<f64> {
    check_block(d.partition(), i)?;
    Ok(block_mu_from_gram(&d.gram(), d.partition(), i))
}

/// Babel function `μ₁(s)` for `1 ≤ s ≤ n − 1`.
pub fn babel(d: &Dictionary, s: usize) -> Result<f64> {
    let n = d.n();
    if s == 0 || s >= n {
        return Err(Error::OutOfRange(format!(
            "babel depth {s} not in [1, {}]",
            n.saturating_sub(1)
        )));
    }
    Ok(max_prefix_sums(&d.gram(), 0..n, 0..n, true, s)[s])
}

/// Cumulative coherence `μ₁^{i,j}(m)` between distinct blocks, `1 ≤ m ≤ n_i`.
pub fn cross_block_babel(d: &Dictionary, i: usize, j: usize, m: usize) -> Result<f64> {
    let p = d.partition();
    check_block(p, i)?;
    check_block(p, j)?;
    if i == j {
        return Err(Error::OutOfRange(
            "cross-block coherence needs distinct blocks; use within_block_babel".into(),
        ));
    }
    if m == 0 || m > p.width(i) {
        return Err(Error::OutOfRange(format!(
            "m = {m} not in [1, {}]",
            p.width(i)
        )));
    }
    Ok(max_prefix_sums(&d.gram(), p.range(j), p.range(i), false, m)[m])
}

/// Cumulative coherence `μ₁^{i,i}(m)` inside block `i`, `0 ≤ m ≤ n_i − 1`.
pub fn within_block_babel(d: &Dictionary, i: usize, m: usize) -> Result<f64> {
    let p = d.partition();
    check_block(p, i)?;
    if m == 0 {
        return Ok(0.0);
    }
    if m >= p.width(i) {
        return Err(Error::OutOfRange(format!(
            "m = {m} not in [1, {}]",
            p.width(i) - 1
        )));
    }
    Ok(max_prefix_sums(&d.gram(), p.range(i), p.range(i), true, m)[m])
}

/// Outcome of the exhaustive spark search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SparkValue {
    /// Smallest number of linearly dependent columns.
    Spark(usize),
    /// Every subset of size at most `max_card` is independent.
    ExceedsMaxCard(usize),
}

#[derive(Debug, Clone, Copy)]
pub struct SparkOptions {
    pub max_card: usize,
    pub rank_tol: f64,
    pub budget: u64,
}

impl SparkOptions {
    pub fn new(max_card: usize) -> Self {
        SparkOptions {
            max_card,
            rank_tol: DEFAULT_SPARK_RANK_TOL,
            budget: DEFAULT_SPARK_BUDGET,
        }
    }
}

/// Exact spark by increasing cardinality with early exit.
///
/// Any `m + 1` columns are dependent, so cardinalities above `m` are never enumerated.
pub fn spark_bruteforce(d: &Dictionary, opts: SparkOptions) -> Result<SparkValue> {
    let n = d.n();
    if opts.max_card > n {
        return Err(Error::OutOfRange(format!(
            "max_card {} exceeds n = {n}",
            opts.max_card
        )));
    }
    let mut examined = 0u64;
    for k in 1..=opts.max_card {
        if k > d.m() {
            return Ok(SparkValue::Spark(k));
        }
        for subset in (0..n).combinations(k) {
            examined += 1;
            if examined > opts.budget {
                return Err(Error::BudgetExceeded {
                    budget: opts.budget,
                });
            }
            let sub = d.matrix().select_columns(subset.iter());
            if columns_dependent(&sub, opts.rank_tol) {
                return Ok(SparkValue::Spark(k));
            }
        }
    }
    Ok(SparkValue::ExceedsMaxCard(opts.max_card))
}

/// Lower bound `N(1 + α_max μ) / ((N − 1 + α_max) μ)` on the spark of a union of `N` bases.
pub fn spark_lower_bound_piecewise(mu: f64, alpha_max: f64, n_blocks: usize) -> Result<Bound> {
    check_coherence_inputs(mu, alpha_max, n_blocks)?;
    if mu == 0.0 {
        return Ok(Bound::Unbounded);
    }
    let n = n_blocks as f64;
    Ok(Bound::Finite(
        n * (1.0 + alpha_max * mu) / ((n - 1.0 + alpha_max) * mu),
    ))
}

pub(crate) fn check_coherence_inputs(mu: f64, alpha_max: f64, n_blocks: usize) -> Result<()> {
    if !(0.0..=1.0 + 1e-9).contains(&mu) {
        return Err(Error::OutOfRange(format!("mu = {mu} not in [0, 1]")));
    }
    if !(0.0..=1.0).contains(&alpha_max) {
        return Err(Error::OutOfRange(format!(
            "alpha = {alpha_max} not in [0, 1]"
        )));
    }
    if n_blocks < 2 {
        return Err(Error::OutOfRange(format!(
            "need N >= 2 blocks, got {n_blocks}"
        )));
    }
    Ok(())
}

/// `α_i = μ^{i,i} / μ`, with `α_i = 0` when `μ = 0`. Clamped to `[0, 1]`.
pub fn alpha_from(block_mu: f64, mu: f64) -> f64 {
    if mu > 0.0 {
        (block_mu / mu).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Computes the whole profile; tables up to `babel_depth` when requested.
pub fn coherence_profile(d: &Dictionary, babel_depth: Option<usize>) -> Result<CoherenceProfile> {
    if d.n() < 2 {
        return Err(Error::OutOfRange(
            "coherence profile needs at least 2 columns".into(),
        ));
    }
    let gram = d.gram();
    let p = d.partition();
    let n = d.n();
    let mu = mu_from_gram(&gram);
    let block_mu: Vec<f64> = (0..p.n_blocks())
        .map(|i| block_mu_from_gram(&gram, p, i))
        .collect();
    let alpha: Vec<f64> = block_mu.iter().map(|&b| alpha_from(b, mu)).collect();
    let alpha_max = alpha.iter().copied().fold(0.0, f64::max);

    let (mut babel_tbl, mut cross_tbl, mut within_tbl) = (None, None, None);
    if let Some(depth) = babel_depth {
        let s_max = depth.min(n - 1);
        let sums = max_prefix_sums(&gram, 0..n, 0..n, true, s_max);
        babel_tbl = Some((1..=s_max).map(|s| (s, sums[s])).collect());

        let mut cross = Vec::new();
        let mut within = Vec::new();
        for i in 0..p.n_blocks() {
            for j in 0..p.n_blocks() {
                if i == j {
                    let m_max = depth.min(p.width(i) - 1);
                    let sums = max_prefix_sums(&gram, p.range(i), p.range(i), true, m_max);
                    within.extend((1..=m_max).map(|m| WithinBabelEntry {
                        i,
                        m,
                        value: sums[m],
                    }));
                } else {
                    let m_max = depth.min(p.width(i));
                    let sums = max_prefix_sums(&gram, p.range(j), p.range(i), false, m_max);
                    cross.extend((1..=m_max).map(|m| CrossBabelEntry {
                        i,
                        j,
                        m,
                        value: sums[m],
                    }));
                }
            }
        }
        cross_tbl = Some(cross);
        within_tbl = Some(within);
    }

    Ok(CoherenceProfile {
        mu,
        block_mu,
        alpha,
        alpha_max,
        babel: babel_tbl,
        cross_babel: cross_tbl,
        within_babel: within_tbl,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::BlockPartition;
    use approx::assert_abs_diff_eq;

    fn dict(rows: usize, cols: usize, data: &[f64], widths: Vec<usize>) -> Dictionary {
        Dictionary::normalized(
            DMatrix::from_row_slice(rows, cols, data),
            BlockPartition::new(widths).unwrap(),
        )
        .unwrap()
        .0
    }

    #[test]
    fn orthonormal_basis_has_zero_coherence() {
        let d =
            Dictionary::new(DMatrix::identity(4, 4), BlockPartition::single(4).unwrap()).unwrap();
        assert_eq!(mutual_coherence(&d).unwrap(), 0.0);
        for s in 1..4 {
            assert_eq!(babel(&d, s).unwrap(), 0.0);
        }
        assert_eq!(block_coherence(&d, 0).unwrap(), 0.0);
    }

    #[test]
    fn repeated_column_has_unit_coherence() {
        let d = dict(2, 3, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0], vec![3]);
        assert_abs_diff_eq!(mutual_coherence(&d).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn sixty_degree_pair() {
        let (c, s) = (0.5f64, 3f64.sqrt() / 2.0);
        let d = dict(2, 3, &[1.0, c, 0.0, 0.0, s, 1.0], vec![2, 1]);
        assert_abs_diff_eq!(block_coherence(&d, 0).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(block_coherence(&d, 1).unwrap(), 0.0);
        assert_abs_diff_eq!(within_block_babel(&d, 0, 1).unwrap(), 0.5, epsilon = 1e-15);
        assert_eq!(within_block_babel(&d, 1, 0).unwrap(), 0.0);
        assert!(within_block_babel(&d, 1, 1).is_err());
    }

    #[test]
    fn single_block_coherence_equals_mu() {
        let d = dict(2, 3, &[1.0, 0.6, 0.0, 0.0, 0.8, 1.0], vec![3]);
        assert_eq!(
            block_coherence(&d, 0).unwrap(),
            mutual_coherence(&d).unwrap()
        );
    }

    #[test]
    fn range_errors() {
        let d = dict(2, 4, &[1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 1.0, -1.0], vec![2, 2]);
        assert!(babel(&d, 0).is_err());
        assert!(babel(&d, 4).is_err());
        assert!(cross_block_babel(&d, 0, 0, 1).is_err());
        assert!(cross_block_babel(&d, 0, 1, 3).is_err());
        assert!(cross_block_babel(&d, 0, 2, 1).is_err());
        assert!(block_coherence(&d, 2).is_err());
        let one =
            Dictionary::new(DMatrix::identity(2, 1), BlockPartition::single(1).unwrap()).unwrap();
        assert!(mutual_coherence(&one).is_err());
    }

    #[test]
    fn orthogonal_subspaces_have_zero_cross_coherence() {
        let d = Dictionary::new(
            DMatrix::identity(4, 4),
            BlockPartition::new(vec![2, 2]).unwrap(),
        )
        .unwrap();
        assert_eq!(cross_block_babel(&d, 0, 1, 2).unwrap(), 0.0);
        assert_eq!(cross_block_babel(&d, 1, 0, 1).unwrap(), 0.0);
    }

    #[test]
    fn spark_of_duplicate_and_identity() {
        let d = dict(2, 3, &[1.0, 1.0, 0.0, 0.0, 0.0, 1.0], vec![3]);
        assert_eq!(
            spark_bruteforce(&d, SparkOptions::new(3)).unwrap(),
            SparkValue::Spark(2)
        );
        let id =
            Dictionary::new(DMatrix::identity(4, 4), BlockPartition::single(4).unwrap()).unwrap();
        for k in 0..=4 {
            assert_eq!(
                spark_bruteforce(&id, SparkOptions::new(k)).unwrap(),
                SparkValue::ExceedsMaxCard(k)
            );
        }
        assert!(spark_bruteforce(&id, SparkOptions::new(5)).is_err());
    }

    #[test]
    fn spark_budget_is_enforced() {
        let id =
            Dictionary::new(DMatrix::identity(4, 4), BlockPartition::single(4).unwrap()).unwrap();
        let opts = SparkOptions {
            budget: 5,
            ..SparkOptions::new(4)
        };
        assert!(matches!(
            spark_bruteforce(&id, opts),
            Err(Error::BudgetExceeded { budget: 5 })
        ));
    }

    #[test]
    fn spark_lower_bound_values() {
        // 2·1.05 / (1.5·0.1)
        let b = spark_lower_bound_piecewise(0.1, 0.5, 2)
            .unwrap()
            .value()
            .unwrap();
        assert_abs_diff_eq!(b, 14.0, epsilon = 1e-12);
        let b0 = spark_lower_bound_piecewise(0.2, 0.0, 3)
            .unwrap()
            .value()
            .unwrap();
        assert_abs_diff_eq!(b0, 3.0 / (2.0 * 0.2), epsilon = 1e-12);
        let b1 = spark_lower_bound_piecewise(0.2, 1.0, 5)
            .unwrap()
            .value()
            .unwrap();
        assert_abs_diff_eq!(b1, 1.2 / 0.2, epsilon = 1e-12);
        assert!(spark_lower_bound_piecewise(0.0, 0.5, 2)
            .unwrap()
            .is_unbounded());
        assert!(spark_lower_bound_piecewise(0.1, 1.5, 2).is_err());
        assert!(spark_lower_bound_piecewise(0.1, 0.5, 1).is_err());
    }

    #[test]
    fn alpha_is_zero_when_mu_is_zero() {
        assert_eq!(alpha_from(0.0, 0.0), 0.0);
        assert_eq!(alpha_from(0.2, 0.4), 0.5);
    }

    #[test]
    fn profile_tables_are_consistent() {
        let d = dict(
            3,
            5,
            &[
                1.0, 0.2, 0.3, 0.0, 0.7, 0.1, 1.0, 0.4, 0.5, 0.1, 0.2, 0.3, 1.0, 0.9, 0.3,
            ],
            vec![3, 2],
        );
        let p = coherence_profile(&d, Some(10)).unwrap();
        let babel_tbl = p.babel.as_ref().unwrap();
        assert_eq!(babel_tbl.len(), 4);
        assert_eq!(babel_tbl[&1], p.mu);
        for s in 1..=4 {
            assert_eq!(babel_tbl[&s], babel(&d, s).unwrap());
        }
        for e in p.cross_babel.as_ref().unwrap() {
            assert_eq!(e.value, cross_block_babel(&d, e.i, e.j, e.m).unwrap());
        }
        let within = p.within_babel.as_ref().unwrap();
        assert_eq!(within.len(), 2 + 1);
        for e in within {
            assert_eq!(e.value, within_block_babel(&d, e.i, e.m).unwrap());
        }
        let json = serde_json::to_value(&p).unwrap();
        assert!(json["babel"]["1"].is_number());
        assert!(json["block_mu"].is_array());
    }
}
