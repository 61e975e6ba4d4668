//! Sufficient conditions for uniqueness and exact recovery of (piecewise) sparse signals.
//!
//! Condition ids:
//!
//! | id      | statement                                                      | structure of `A`          |
//! |---------|----------------------------------------------------------------|---------------------------|
//! | `cond1` | `‖x‖₀ < (1 + 1/μ)/2`                                           | general                   |
//! | `cond2` | `‖x‖₀ < 1/μ`                                                   | pair of orthogonal bases  |
//! | `cond3` | `‖x‖₀ < (√2 − 1/2)/μ`                                          | pair of orthogonal bases  |
//! | `cond4` | `Σ_{j≥2} μs_j/(1+μs_j) < 1/(2(1+μs_1))`, `s` sorted ascending  | union of orthogonal bases |
//! | `cond5` | `‖x‖₀ < N(1+α_max μ) / (2(N−1+α_max)μ)`                        | union of general bases    |
//! | `cond6` | piecewise ERC with the `Z`-block selection                     | union of general bases    |
//! | `cond7` | `‖x‖₀ < (1/2 + 1/(2(N−1)))/μ` (OMP)                            | union of orthogonal bases |
//! | `cond8` | `‖x‖₀ < (√2 − 1 + 1/(2(N−1)))/μ` (BP)                          | union of orthogonal bases |
//!
//! Bound values are reported as doubles. Whether a given sparsity satisfies a
//! strict inequality is decided exactly: every double input is an exact
//! rational, and each inequality is rearranged into a rational comparison
//! (squared where `√2` appears), so algebraically equivalent forms of a
//! condition always return the same boolean. Slacks are the exact
//! `RHS − LHS` rounded to a double.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::bound::Bound;
use crate::coherence::CoherenceProfile;
use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::linalg::{ThinQr, DEFAULT_RANK_TOL};
pub use crate::support::{SparsityPattern, SupportPartition};

/// Largest per-block coherence for which a dictionary counts as an orthogonal union.
pub const ORTHOGONAL_UNION_TOL: f64 = 1e-10;

type Q = BigRational;

pub(crate) fn q(x: f64) -> Q {
    Q::from_float(x).expect("finite input")
}

fn qn(n: usize) -> Q {
    Q::from_integer(BigInt::from(n))
}

fn to_f64(x: &Q) -> f64 {
    x.to_f64().unwrap_or(if x.is_negative() {
        f64::NEG_INFINITY
    } else {
        f64::INFINITY
    })
}

/// Slack above 1 for coherences computed from rounded unit-norm columns.
const MU_ROUNDING_SLACK: f64 = 1e-12;

fn check_mu(mu: f64) -> Result<()> {
    if !(0.0..=1.0 + MU_ROUNDING_SLACK).contains(&mu) {
        return Err(Error::OutOfRange(format!("mu = {mu} not in [0, 1]")));
    }
    Ok(())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::OutOfRange(format!("alpha = {alpha} not in [0, 1]")));
    }
    Ok(())
}

fn check_blocks(n_blocks: usize) -> Result<()> {
    if n_blocks < 2 {
        return Err(Error::OutOfRange(format!(
            "need N >= 2 blocks, got {n_blocks}"
        )));
    }
    Ok(())
}

/// Bound-type conditions of the form `‖x‖₀ < f(μ, ...)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundFormula {
    General,
    PairUniqueness,
    PairEquivalence,
    OrthogonalUnionOmp { n_blocks: usize },
    OrthogonalUnionBp { n_blocks: usize },
    Piecewise { alpha_max: f64, n_blocks: usize },
}

impl BoundFormula {
    fn validate(&self) -> Result<()> {
        match *self {
            BoundFormula::OrthogonalUnionOmp { n_blocks }
            | BoundFormula::OrthogonalUnionBp { n_blocks } => check_blocks(n_blocks),
            BoundFormula::Piecewise {
                alpha_max,
                n_blocks,
            } => {
                check_alpha(alpha_max)?;
                check_blocks(n_blocks)
            }
            _ => Ok(()),
        }
    }

    /// The bound; `Unbounded` when `μ = 0`.
    pub fn value(&self, mu: f64) -> Result<Bound> {
        check_mu(mu)?;
        self.validate()?;
        if mu == 0.0 {
            return Ok(Bound::Unbounded);
        }
        let m = q(mu);
        let one = Q::one();
        // Rational bounds are evaluated exactly and rounded once.
        let v = match *self {
            BoundFormula::General => to_f64(&((&one + one.clone() / &m) / qn(2))),
            BoundFormula::PairUniqueness => to_f64(&(one / m)),
            BoundFormula::PairEquivalence => (std::f64::consts::SQRT_2 - 0.5) / mu,
            BoundFormula::OrthogonalUnionOmp { n_blocks } => {
                to_f64(&(qn(n_blocks) / (qn(2) * qn(n_blocks - 1) * m)))
            }
            BoundFormula::OrthogonalUnionBp { n_blocks } => {
                let n = n_blocks as f64;
                (std::f64::consts::SQRT_2 - 1.0 + 1.0 / (2.0 * (n - 1.0))) / mu
            }
            BoundFormula::Piecewise {
                alpha_max,
                n_blocks,
            } => {
                let a = q(alpha_max);
                to_f64(&(qn(n_blocks) * (&one + &a * &m) / (qn(2) * (qn(n_blocks - 1) + a) * m)))
            }
        };
        Ok(Bound::Finite(v))
    }

    /// Exact test of `total < bound(μ)`.
    pub fn admits(&self, mu: f64, total: usize) -> Result<bool> {
        check_mu(mu)?;
        self.validate()?;
        if mu == 0.0 {
            return Ok(true);
        }
        let m = q(mu);
        let s = qn(total);
        let one = Q::one();
        let two = qn(2);
        let half = Q::new(BigInt::from(1), BigInt::from(2));
        Ok(match *self {
            // 2sμ < 1 + μ
            BoundFormula::General => &two * &s * &m < &one + &m,
            // sμ < 1
            BoundFormula::PairUniqueness => &s * &m < one,
            // sμ + 1/2 < √2
            BoundFormula::PairEquivalence => {
                let lhs = &s * &m + half;
                &lhs * &lhs < two
            }
            // 2(N−1)sμ < N
            BoundFormula::OrthogonalUnionOmp { n_blocks } => {
                two * qn(n_blocks - 1) * s * m < qn(n_blocks)
            }
            // sμ + 1 − 1/(2(N−1)) < √2
            BoundFormula::OrthogonalUnionBp { n_blocks } => {
                let lhs = &s * &m + one - Q::new(BigInt::from(1), BigInt::from(2 * (n_blocks - 1)));
                lhs.is_negative() || &lhs * &lhs < two
            }
            // 2(N−1+α)μs < N(1+αμ)
            BoundFormula::Piecewise {
                alpha_max,
                n_blocks,
            } => {
                let a = q(alpha_max);
                two * (qn(n_blocks - 1) + &a) * &m * s < qn(n_blocks) * (one + a * &m)
            }
        })
    }
}

/// Condition 1: `(1 + 1/μ)/2`.
pub fn cond1_general(mu: f64) -> Result<Bound> {
    BoundFormula::General.value(mu)
}

/// Condition 2: `1/μ`.
pub fn cond2_pair_orthogonal_uniqueness(mu: f64) -> Result<Bound> {
    BoundFormula::PairUniqueness.value(mu)
}

/// Condition 3: `(√2 − 0.5)/μ`.
pub fn cond3_pair_orthogonal_equivalence(mu: f64) -> Result<Bound> {
    BoundFormula::PairEquivalence.value(mu)
}

/// OMP bound for a union of `N` orthogonal bases: `(1/2 + 1/(2(N−1)))/μ`.
pub fn cond_orthogonal_union_omp(mu: f64, n_blocks: usize) -> Result<Bound> {
    BoundFormula::OrthogonalUnionOmp { n_blocks }.value(mu)
}

/// BP bound for a union of `N` orthogonal bases: `(√2 − 1 + 1/(2(N−1)))/μ`.
pub fn cond_orthogonal_union_bp(mu: f64, n_blocks: usize) -> Result<Bound> {
    BoundFormula::OrthogonalUnionBp { n_blocks }.value(mu)
}

/// Condition 5: `N(1+α_max μ) / (2(N−1+α_max)μ)`.
pub fn cond5_piecewise_uniqueness(mu: f64, alpha_max: f64, n_blocks: usize) -> Result<Bound> {
    BoundFormula::Piecewise {
        alpha_max,
        n_blocks,
    }
    .value(mu)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cond4Outcome {
    pub holds: bool,
    /// `RHS − LHS`.
    pub slack: f64,
    /// Sparsities sorted ascending.
    pub sorted: Vec<usize>,
    /// `sorted[k] = s[permutation[k]]`.
    pub permutation: Vec<usize>,
}

/// Condition 4: ERC guarantee for a union of orthogonal bases.
pub fn cond4_orthogonal_erc(mu: f64, pattern: &SparsityPattern) -> Result<Cond4Outcome> {
    check_mu(mu)?;
    let s = pattern.per_block();
    if s.is_empty() {
        return Err(Error::OutOfRange("empty sparsity pattern".into()));
    }
    let mut permutation: Vec<usize> = (0..s.len()).collect();
    permutation.sort_by_key(|&i| (s[i], i));
    let sorted: Vec<usize> = permutation.iter().map(|&i| s[i]).collect();

    let m = q(mu);
    let one = Q::one();
    let lhs = sorted[1..].iter().fold(Q::zero(), |acc, &sj| {
        let t = &m * qn(sj);
        acc + &t / (&one + &t)
    });
    let rhs = Q::one() / (qn(2) * (&one + &m * qn(sorted[0])));
    let slack = rhs - lhs;
    Ok(Cond4Outcome {
        holds: slack.is_positive(),
        slack: to_f64(&slack),
        sorted,
        permutation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cond6Outcome {
    pub holds: bool,
    /// `RHS − LHS`.
    pub slack: f64,
    /// Selected block `Z`; `None` when every `s_i = 0`.
    pub z: Option<usize>,
}

/// Condition 6: ERC guarantee for a union of general bases.
///
/// `Z` maximizes `(1 + α_i μ) / ((1 − α_i) s_i)`, which is `+∞` when
/// `α_i = 1` or `s_i = 0`; ties go to the lowest block index.
pub fn cond6_piecewise_erc(
    mu: f64,
    alpha: &[f64],
    pattern: &SparsityPattern,
) -> Result<Cond6Outcome> {
    check_mu(mu)?;
    for &a in alpha {
        check_alpha(a)?;
    }
    let s = pattern.per_block();
    if s.len() != alpha.len() || s.is_empty() {
        return Err(Error::Dimension(format!(
            "{} alpha values for {} sparsities",
            alpha.len(),
            s.len()
        )));
    }
    if pattern.is_zero() {
        return Ok(Cond6Outcome {
            holds: true,
            slack: 1.0,
            z: None,
        });
    }

    let m = q(mu);
    let one = Q::one();
    let alpha_q: Vec<Q> = alpha.iter().map(|&a| q(a)).collect();
    // D_i = 1 + α_i μ + (1 − α_i) μ s_i
    let denom: Vec<Q> = alpha_q
        .iter()
        .zip(s)
        .map(|(a, &si)| &one + a * &m + (&one - a) * &m * qn(si))
        .collect();

    // None encodes +∞.
    let ratio = |i: usize| -> Option<Q> {
        let w = (&one - &alpha_q[i]) * qn(s[i]);
        if w.is_zero() {
            None
        } else {
            Some((&one + &alpha_q[i] * &m) / w)
        }
    };
    let mut z = 0;
    let mut best = ratio(0);
    for i in 1..s.len() {
        let r = ratio(i);
        let better = match (&best, &r) {
            (None, _) => false,
            (Some(_), None) => true,
            (Some(b), Some(r)) => r > b,
        };
        if better {
            z = i;
            best = r;
        }
    }

    let lhs = (0..s.len()).fold(Q::zero(), |acc, i| acc + &m * qn(s[i]) / &denom[i]) * qn(2);
    let rhs = (&one + &alpha_q[z] * &m + qn(2) * (&one - &alpha_q[z]) * &m * qn(s[z])) / &denom[z];
    let slack = rhs - lhs;
    Ok(Cond6Outcome {
        holds: slack.is_positive(),
        slack: to_f64(&slack),
        z: Some(z),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErcValue {
    /// `max_{j ∈ T} ‖(A_SᵀA_S)⁻¹ A_Sᵀ a_j‖₁`.
    pub value: f64,
    /// `value < 1`.
    pub holds: bool,
    /// Off-support column attaining the maximum.
    pub argmax: Option<usize>,
}

/// Exact recovery coefficient of a support, through a QR factorization of `A_S`.
pub fn erc_exact(d: &Dictionary, support: &SupportPartition) -> Result<ErcValue> {
    if support.global.iter().any(|&j| j >= d.n()) {
        return Err(Error::Dimension(
            "support does not fit the dictionary".into(),
        ));
    }
    if support.is_empty() {
        return Ok(ErcValue {
            value: 0.0,
            holds: true,
            argmax: None,
        });
    }
    let a_s = d.columns(&support.global)?;
    let qr = ThinQr::new(&a_s, DEFAULT_RANK_TOL)?;
    let mut value = 0.0f64;
    let mut argmax = None;
    for &j in &support.complement {
        let coef = qr.solve(&DVector::from_column_slice(d.column(j).as_slice()));
        let l1 = coef.lp_norm(1);
        if argmax.is_none() || l1 > value {
            value = l1;
            argmax = Some(j);
        }
    }
    Ok(ErcValue {
        value,
        holds: value < 1.0,
        argmax,
    })
}

/// Condition identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConditionId {
    Cond1,
    Cond2,
    Cond3,
    Cond4,
    Cond5,
    Cond6,
    Cond7,
    Cond8,
}

impl ConditionId {
    pub const ALL: [ConditionId; 8] = [
        ConditionId::Cond1,
        ConditionId::Cond2,
        ConditionId::Cond3,
        ConditionId::Cond4,
        ConditionId::Cond5,
        ConditionId::Cond6,
        ConditionId::Cond7,
        ConditionId::Cond8,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConditionId::Cond1 => "cond1",
            ConditionId::Cond2 => "cond2",
            ConditionId::Cond3 => "cond3",
            ConditionId::Cond4 => "cond4",
            ConditionId::Cond5 => "cond5",
            ConditionId::Cond6 => "cond6",
            ConditionId::Cond7 => "cond7",
            ConditionId::Cond8 => "cond8",
        }
    }

    pub fn kind(self) -> ConditionKind {
        match self {
            ConditionId::Cond4 | ConditionId::Cond6 => ConditionKind::Boolean,
            _ => ConditionKind::Bound,
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            ConditionId::Cond1 => "uniqueness and OMP/BP recovery, general dictionary",
            ConditionId::Cond2 => "uniqueness, pair of orthogonal bases",
            ConditionId::Cond3 => "l0/l1 equivalence, pair of orthogonal bases",
            ConditionId::Cond4 => "ERC, union of orthogonal bases",
            ConditionId::Cond5 => "piecewise uniqueness, union of general bases",
            ConditionId::Cond6 => "piecewise ERC, union of general bases",
            ConditionId::Cond7 => "OMP recovery, union of N orthogonal bases",
            ConditionId::Cond8 => "BP recovery, union of N orthogonal bases",
        }
    }

    fn needs_orthogonal_union(self) -> bool {
        matches!(
            self,
            ConditionId::Cond2
                | ConditionId::Cond3
                | ConditionId::Cond4
                | ConditionId::Cond7
                | ConditionId::Cond8
        )
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConditionId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ConditionId::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| Error::Parse(format!("unknown condition id {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionKind {
    /// Upper bound on `‖x‖₀`.
    Bound,
    /// Predicate on `(s_1, ..., s_N)`.
    Boolean,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Applicability {
    #[serde(rename = "applicable")]
    Applicable,
    /// Evaluated, but the dictionary is not verified to be an orthogonal union.
    #[serde(rename = "assumption: orthogonal union")]
    AssumesOrthogonalUnion,
    #[serde(rename = "not applicable (N<2)")]
    SingleBlock,
    #[serde(rename = "not applicable (requires N=2)")]
    RequiresPair,
    #[serde(rename = "not applicable (mu=0)")]
    ZeroCoherence,
}

impl Applicability {
    pub fn evaluated(&self) -> bool {
        matches!(
            self,
            Applicability::Applicable | Applicability::AssumesOrthogonalUnion
        )
    }
}

/// Coherence inputs shared by every condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionInputs {
    pub mu: f64,
    pub alpha: Vec<f64>,
    pub alpha_max: f64,
    pub n_blocks: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pattern: Option<Vec<usize>>,
}

impl ConditionInputs {
    pub fn new(mu: f64, alpha: Vec<f64>) -> Result<Self> {
        check_mu(mu)?;
        for &a in &alpha {
            check_alpha(a)?;
        }
        if alpha.is_empty() {
            return Err(Error::OutOfRange("at least one block is required".into()));
        }
        let alpha_max = alpha.iter().copied().fold(0.0, f64::max);
        Ok(ConditionInputs {
            mu,
            n_blocks: alpha.len(),
            alpha,
            alpha_max,
            pattern: None,
        })
    }

    pub fn from_profile(p: &CoherenceProfile) -> Result<Self> {
        Self::new(p.mu, p.alpha.clone())
    }

    fn orthogonal_union(&self) -> bool {
        self.alpha
            .iter()
            .all(|&a| a * self.mu <= ORTHOGONAL_UNION_TOL)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub id: ConditionId,
    pub description: String,
    pub kind: ConditionKind,
    pub applicability: Applicability,
    /// The bound for bound-type conditions; the slack for boolean ones.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub value: Option<Bound>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub satisfied: Option<bool>,
    /// Selected block for `cond6`.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub z: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub inputs: ConditionInputs,
    pub conditions: Vec<ConditionEntry>,
}

impl ConditionReport {
    pub fn get(&self, id: ConditionId) -> Option<&ConditionEntry> {
        self.conditions.iter().find(|e| e.id == id)
    }
}

fn bound_formula(id: ConditionId, inputs: &ConditionInputs) -> Option<BoundFormula> {
    let n_blocks = inputs.n_blocks;
    Some(match id {
        ConditionId::Cond1 => BoundFormula::General,
        ConditionId::Cond2 => BoundFormula::PairUniqueness,
        ConditionId::Cond3 => BoundFormula::PairEquivalence,
        ConditionId::Cond5 => BoundFormula::Piecewise {
            alpha_max: inputs.alpha_max,
            n_blocks,
        },
        ConditionId::Cond7 => BoundFormula::OrthogonalUnionOmp { n_blocks },
        ConditionId::Cond8 => BoundFormula::OrthogonalUnionBp { n_blocks },
        ConditionId::Cond4 | ConditionId::Cond6 => return None,
    })
}

fn applicability(id: ConditionId, inputs: &ConditionInputs) -> Applicability {
    let n = inputs.n_blocks;
    if matches!(id, ConditionId::Cond2 | ConditionId::Cond3) && n != 2 {
        return Applicability::RequiresPair;
    }
    if !matches!(
        id,
        ConditionId::Cond1 | ConditionId::Cond2 | ConditionId::Cond3
    ) && n < 2
    {
        return Applicability::SingleBlock;
    }
    if id == ConditionId::Cond6 && inputs.mu == 0.0 {
        return Applicability::ZeroCoherence;
    }
    if id.needs_orthogonal_union() && !inputs.orthogonal_union() {
        return Applicability::AssumesOrthogonalUnion;
    }
    Applicability::Applicable
}

/// Evaluates a single condition.
pub fn evaluate(
    id: ConditionId,
    inputs: &ConditionInputs,
    pattern: Option<&SparsityPattern>,
) -> Result<ConditionEntry> {
    let applicability = applicability(id, inputs);
    let mut entry = ConditionEntry {
        id,
        description: id.description().to_string(),
        kind: id.kind(),
        applicability,
        value: None,
        satisfied: None,
        z: None,
    };
    if !entry.applicability.evaluated() {
        return Ok(entry);
    }
    if let Some(p) = pattern {
        if p.n_blocks() != inputs.n_blocks {
            return Err(Error::Dimension(format!(
                "pattern has {} entries, dictionary has {} blocks",
                p.n_blocks(),
                inputs.n_blocks
            )));
        }
    }
    match id {
        ConditionId::Cond4 => {
            if let Some(p) = pattern {
                let out = cond4_orthogonal_erc(inputs.mu, p)?;
                entry.value = Some(Bound::Finite(out.slack));
                entry.satisfied = Some(out.holds);
            }
        }
        ConditionId::Cond6 => {
            if let Some(p) = pattern {
                let out = cond6_piecewise_erc(inputs.mu, &inputs.alpha, p)?;
                entry.value = Some(Bound::Finite(out.slack));
                entry.satisfied = Some(out.holds);
                entry.z = out.z;
            }
        }
        _ => {
            let f = bound_formula(id, inputs).expect("bound-type condition");
            entry.value = Some(f.value(inputs.mu)?);
            if let Some(p) = pattern {
                entry.satisfied = Some(f.admits(inputs.mu, p.total())?);
            }
        }
    }
    Ok(entry)
}

/// Evaluates every condition. Boolean conditions carry a value only when a pattern is given.
pub fn evaluate_all(
    inputs: &ConditionInputs,
    pattern: Option<&SparsityPattern>,
) -> Result<ConditionReport> {
    let mut inputs = inputs.clone();
    inputs.pattern = pattern.map(|p| p.per_block().to_vec());
    let conditions = ConditionId::ALL
        .into_iter()
        .map(|id| evaluate(id, &inputs, pattern))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionReport { inputs, conditions })
}

/// Grid for [`bound_table`].
#[derive(Debug, Clone, PartialEq)]
pub enum TableGrid {
    /// Bound values against μ.
    Mu(Vec<f64>),
    /// Feasibility over `0..=s1_max × 0..=s2_max` (two blocks).
    Sparsity { s1_max: usize, s2_max: usize },
}

/// One CSV row `condition,param1,param2,value,satisfied`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub condition: String,
    pub param1: f64,
    pub param2: Option<f64>,
    pub value: Option<Bound>,
    pub satisfied: Option<bool>,
}

/// Rows reproducing bound plots and feasibility regions.
///
/// On a μ grid, `param1` is μ and only bound-type conditions are allowed. On a
/// sparsity grid, `(param1, param2) = (s1, s2)`; bound-type rows carry the bound
/// and boolean rows the slack. `label`, when given, is appended to the id as `id:label`.
pub fn bound_table(
    ids: &[ConditionId],
    grid: &TableGrid,
    inputs: &ConditionInputs,
    label: Option<&str>,
) -> Result<Vec<TableRow>> {
    if ids.is_empty() {
        return Err(Error::OutOfRange("no conditions requested".into()));
    }
    let name = |id: ConditionId| match label {
        Some(l) => format!("{id}:{l}"),
        None => id.to_string(),
    };
    let mut rows = Vec::new();
    match grid {
        TableGrid::Mu(mus) => {
            if mus.is_empty() {
                return Err(Error::OutOfRange("empty mu grid".into()));
            }
            for &id in ids {
                if id.kind() == ConditionKind::Boolean {
                    return Err(Error::OutOfRange(format!("{id} needs a sparsity grid")));
                }
                for &mu in mus {
                    let mut at = inputs.clone();
                    at.mu = mu;
                    let f = bound_formula(id, &at).expect("bound-type condition");
                    rows.push(TableRow {
                        condition: name(id),
                        param1: mu,
                        param2: None,
                        value: Some(f.value(mu)?),
                        satisfied: None,
                    });
                }
            }
        }
        TableGrid::Sparsity { s1_max, s2_max } => {
            if inputs.n_blocks != 2 {
                return Err(Error::OutOfRange(
                    "sparsity grids need exactly 2 blocks".into(),
                ));
            }
            for &id in ids {
                for s1 in 0..=*s1_max {
                    for s2 in 0..=*s2_max {
                        let pattern = SparsityPattern::new(vec![s1, s2]);
                        let entry = match id {
                            ConditionId::Cond4 => {
                                let out = cond4_orthogonal_erc(inputs.mu, &pattern)?;
                                (Some(Bound::Finite(out.slack)), out.holds)
                            }
                            ConditionId::Cond6 => {
                                let out = cond6_piecewise_erc(inputs.mu, &inputs.alpha, &pattern)?;
                                (Some(Bound::Finite(out.slack)), out.holds)
                            }
                            _ => {
                                let f = bound_formula(id, inputs).expect("bound-type condition");
                                (Some(f.value(inputs.mu)?), f.admits(inputs.mu, s1 + s2)?)
                            }
                        };
                        rows.push(TableRow {
                            condition: name(id),
                            param1: s1 as f64,
                            param2: Some(s2 as f64),
                            value: entry.0,
                            satisfied: Some(entry.1),
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}

pub const TABLE_HEADER: &str = "condition,param1,param2,value,satisfied";

/// Renders rows as CSV with header.
pub fn format_table_csv(rows: &[TableRow]) -> String {
    let mut out = String::from(TABLE_HEADER);
    out.push('\n');
    for r in rows {
        let p2 = r.param2.map(|v| v.to_string()).unwrap_or_default();
        let v = r.value.map(|v| v.to_string()).unwrap_or_default();
        let sat = r.satisfied.map(|b| b.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.condition, r.param1, p2, v, sat
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pat(s: &[usize]) -> SparsityPattern {
        SparsityPattern::new(s.to_vec())
    }

    #[test]
    fn table1_bounds_at_fig1_coherence() {
        assert_abs_diff_eq!(cond1_general(0.05).unwrap().as_f64(), 10.5, epsilon = 1e-12);
        assert_abs_diff_eq!(
            cond2_pair_orthogonal_uniqueness(0.05).unwrap().as_f64(),
            20.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            cond3_pair_orthogonal_equivalence(0.05).unwrap().as_f64(),
            18.284271247461902,
            epsilon = 1e-9
        );
    }

    #[test]
    fn bounds_at_mu_one_tenth() {
        assert_abs_diff_eq!(cond1_general(0.1).unwrap().as_f64(), 5.5, epsilon = 1e-12);
        assert_abs_diff_eq!(
            cond2_pair_orthogonal_uniqueness(0.1).unwrap().as_f64(),
            10.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            cond3_pair_orthogonal_equivalence(0.1).unwrap().as_f64(),
            9.142135623730951,
            epsilon = 1e-9
        );
        assert_eq!(cond1_general(1.0).unwrap().as_f64(), 1.0);
    }

    #[test]
    fn zero_and_negative_coherence() {
        assert!(cond1_general(0.0).unwrap().is_unbounded());
        assert!(cond1_general(1.5).is_err());
        assert!(cond1_general(-0.1).is_err());
        assert!(cond1_general(-0.1).is_err());
        assert!(BoundFormula::General.admits(0.0, 1000).unwrap());
    }

    #[test]
    fn orthogonal_union_bounds_reduce_to_pair_at_two_blocks() {
        for mu in [0.05, 0.1, 0.3] {
            let omp = cond_orthogonal_union_omp(mu, 2).unwrap().as_f64();
            assert_abs_diff_eq!(
                omp,
                cond2_pair_orthogonal_uniqueness(mu).unwrap().as_f64(),
                epsilon = 1e-12
            );
            let bp = cond_orthogonal_union_bp(mu, 2).unwrap().as_f64();
            assert_abs_diff_eq!(
                bp,
                cond3_pair_orthogonal_equivalence(mu).unwrap().as_f64(),
                epsilon = 1e-12
            );
        }
        assert!(cond_orthogonal_union_omp(0.1, 1).is_err());
        let large = cond_orthogonal_union_omp(0.1, 10_000).unwrap().as_f64();
        assert!(large > 5.0 && large < 5.001);
    }

    #[test]
    fn cond5_example_and_reductions() {
        assert_abs_diff_eq!(
            cond5_piecewise_uniqueness(0.1, 0.5, 2).unwrap().as_f64(),
            7.0,
            epsilon = 1e-12
        );
        let mu = 0.2;
        assert_abs_diff_eq!(
            cond5_piecewise_uniqueness(mu, 0.0, 4).unwrap().as_f64(),
            4.0 / (2.0 * 3.0 * mu),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            cond5_piecewise_uniqueness(mu, 1.0, 4).unwrap().as_f64(),
            (1.0 + mu) / (2.0 * mu),
            epsilon = 1e-12
        );
        assert!(cond5_piecewise_uniqueness(0.1, 1.2, 2).is_err());
    }

    #[test]
    fn strict_inequality_at_boundary() {
        // 1/μ with μ = 1/4 is exactly 4.
        assert!(BoundFormula::PairUniqueness.admits(0.25, 3).unwrap());
        assert!(!BoundFormula::PairUniqueness.admits(0.25, 4).unwrap());
        // (1 + 1/μ)/2 with μ = 1/4 is 2.5.
        assert!(BoundFormula::General.admits(0.25, 2).unwrap());
        assert!(!BoundFormula::General.admits(0.25, 3).unwrap());
        // √2 − 1/2 ≈ 0.914 < 1: s = 1 at μ = 0.9 is fine, at μ = 0.92 is not.
        assert!(BoundFormula::PairEquivalence.admits(0.9, 1).unwrap());
        assert!(!BoundFormula::PairEquivalence.admits(0.92, 1).unwrap());
    }

    #[test]
    fn cond4_examples() {
        let z = cond4_orthogonal_erc(0.1, &pat(&[0, 0])).unwrap();
        assert!(z.holds);
        assert_abs_diff_eq!(z.slack, 0.5, epsilon = 1e-15);
        assert!(cond4_orthogonal_erc(0.1, &pat(&[2, 3])).unwrap().holds);
        assert!(!cond4_orthogonal_erc(0.1, &pat(&[9, 9])).unwrap().holds);
        let out = cond4_orthogonal_erc(0.1, &pat(&[5, 1, 3])).unwrap();
        assert_eq!(out.sorted, vec![1, 3, 5]);
        assert_eq!(out.permutation, vec![1, 2, 0]);
    }

    #[test]
    fn cond6_examples() {
        let out = cond6_piecewise_erc(0.1, &[0.2, 0.5], &pat(&[1, 1])).unwrap();
        assert!(out.holds);
        // ratios: 1.02/0.8 > 1.05/0.5? no: 1.275 < 2.1, so Z = 1
        assert_eq!(out.z, Some(1));
        assert!(
            !cond6_piecewise_erc(0.1, &[0.2, 0.5], &pat(&[8, 8]))
                .unwrap()
                .holds
        );
        let empty = cond6_piecewise_erc(0.1, &[0.2, 0.5], &pat(&[0, 0])).unwrap();
        assert!(empty.holds && empty.z.is_none());
    }

    #[test]
    fn cond6_alpha_one_block_wins_selection() {
        let out = cond6_piecewise_erc(0.1, &[0.3, 1.0], &pat(&[1, 4])).unwrap();
        assert_eq!(out.z, Some(1));
        let out = cond6_piecewise_erc(0.1, &[1.0, 1.0], &pat(&[1, 4])).unwrap();
        assert_eq!(out.z, Some(0));
    }

    #[test]
    fn cond6_empty_block_wins_selection() {
        let out = cond6_piecewise_erc(0.1, &[0.0, 0.0], &pat(&[0, 10])).unwrap();
        assert_eq!(out.z, Some(0));
        // μ s₂ = 1: the orthogonal-union ERC bound is attained, not beaten.
        assert_eq!(
            out.holds,
            cond4_orthogonal_erc(0.1, &pat(&[0, 10])).unwrap().holds
        );
    }

    #[test]
    fn cond6_ties_go_to_lowest_index() {
        let out = cond6_piecewise_erc(0.1, &[0.3, 0.3], &pat(&[2, 2])).unwrap();
        assert_eq!(out.z, Some(0));
    }

    #[test]
    fn evaluate_all_flags_assumptions() {
        let inputs = ConditionInputs::new(0.1, vec![0.2, 0.5]).unwrap();
        let report = evaluate_all(&inputs, Some(&pat(&[2, 2]))).unwrap();
        assert_eq!(report.conditions.len(), 8);
        let c2 = report.get(ConditionId::Cond2).unwrap();
        assert_eq!(c2.applicability, Applicability::AssumesOrthogonalUnion);
        assert_eq!(c2.satisfied, Some(true));
        let c5 = report.get(ConditionId::Cond5).unwrap();
        assert_eq!(c5.applicability, Applicability::Applicable);
        assert_eq!(c5.satisfied, Some(true));
        let json = serde_json::to_value(&report).unwrap();
        assert_eq!(
            json["conditions"][1]["applicability"],
            "assumption: orthogonal union"
        );

        let orth = ConditionInputs::new(0.1, vec![0.0, 0.0]).unwrap();
        let report = evaluate_all(&orth, None).unwrap();
        assert_eq!(
            report.get(ConditionId::Cond2).unwrap().applicability,
            Applicability::Applicable
        );
        assert!(report.get(ConditionId::Cond4).unwrap().satisfied.is_none());
        assert!(report.get(ConditionId::Cond1).unwrap().satisfied.is_none());
    }

    #[test]
    fn evaluate_all_single_block() {
        let inputs = ConditionInputs::new(0.3, vec![1.0]).unwrap();
        let report = evaluate_all(&inputs, Some(&pat(&[2]))).unwrap();
        for id in [
            ConditionId::Cond4,
            ConditionId::Cond5,
            ConditionId::Cond6,
            ConditionId::Cond7,
        ] {
            let e = report.get(id).unwrap();
            assert_eq!(e.applicability, Applicability::SingleBlock);
            assert!(e.value.is_none() && e.satisfied.is_none());
        }
        assert_eq!(
            report.get(ConditionId::Cond2).unwrap().applicability,
            Applicability::RequiresPair
        );
        assert!(report.get(ConditionId::Cond1).unwrap().satisfied.is_some());
    }

    #[test]
    fn table_rows_and_csv() {
        let inputs = ConditionInputs::new(0.05, vec![0.0, 0.0]).unwrap();
        let rows = bound_table(
            &[ConditionId::Cond1, ConditionId::Cond2],
            &TableGrid::Mu(vec![0.05]),
            &inputs,
            None,
        )
        .unwrap();
        let csv = format_table_csv(&rows);
        assert_eq!(
            csv,
            "condition,param1,param2,value,satisfied\ncond1,0.05,,10.5,\ncond2,0.05,,20,\n"
        );
        assert!(bound_table(
            &[ConditionId::Cond4],
            &TableGrid::Mu(vec![0.1]),
            &inputs,
            None
        )
        .is_err());
        assert!(bound_table(&[ConditionId::Cond1], &TableGrid::Mu(vec![]), &inputs, None).is_err());
        assert!(bound_table(&[], &TableGrid::Mu(vec![0.1]), &inputs, None).is_err());

        let grid = bound_table(
            &[ConditionId::Cond6],
            &TableGrid::Sparsity {
                s1_max: 2,
                s2_max: 3,
            },
            &inputs,
            Some("case"),
        )
        .unwrap();
        assert_eq!(grid.len(), 12);
        assert_eq!(grid[0].condition, "cond6:case");
    }

    #[test]
    fn condition_ids_parse() {
        assert_eq!("cond5".parse::<ConditionId>().unwrap(), ConditionId::Cond5);
        assert!("cond9".parse::<ConditionId>().is_err());
    }
}
