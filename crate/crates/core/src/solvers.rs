//! Recovery of `x` from `A x = b`: orthogonal matching pursuit, basis pursuit,
//! and an exhaustive `ℓ⁰` oracle.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dictionary::Dictionary;
use crate::error::{Error, Result};
use crate::linalg::{least_squares, DEFAULT_RANK_TOL};
use crate::support::SupportPartition;

pub const DEFAULT_FEASIBILITY_TOL: f64 = 1e-8;
pub const DEFAULT_OPTIMALITY_TOL: f64 = 1e-7;
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-8;
pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 1e-6;
pub const DEFAULT_FIT_TOL: f64 = 1e-8;
pub const DEFAULT_L0_BUDGET: u64 = 5_000_000;

/// Measurement `b` against a dictionary.
#[derive(Debug, Clone)]
pub struct RecoveryProblem<'a> {
    pub dictionary: &'a Dictionary,
    pub b: DVector<f64>,
}

impl<'a> RecoveryProblem<'a> {
    pub fn new(dictionary: &'a Dictionary, b: DVector<f64>) -> Result<Self> {
        if b.len() != dictionary.m() {
            return Err(Error::Dimension(format!(
                "measurement has length {}, dictionary has {} rows",
                b.len(),
                dictionary.m()
            )));
        }
        if let Some(i) = b.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row: i, col: 0 });
        }
        Ok(RecoveryProblem { dictionary, b })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Omp,
    Bp,
    L0,
}

/// Dual feasible point `y` for `min ‖x‖₁ s.t. Ax = b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualCertificate {
    pub y: Vec<f64>,
    /// `‖Aᵀy‖_∞`.
    pub dual_inf_norm: f64,
    /// `bᵀy`.
    pub dual_objective: f64,
    /// `‖x‖₁ − bᵀy`.
    pub duality_gap: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub residual_history: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub certificate: Option<DualCertificate>,
    /// Every minimizing support found by the `ℓ⁰` oracle.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub minimizers: Option<Vec<Vec<usize>>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub message: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub x: Vec<f64>,
    pub support: SupportPartition,
    pub residual_norm: f64,
    pub iterations: usize,
    pub solver: SolverKind,
    /// `‖x‖₀` for OMP and the oracle, `‖x‖₁` for BP.
    pub objective: f64,
    pub converged: bool,
    pub diagnostics: Diagnostics,
}

impl RecoveryResult {
    pub fn x_vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x)
    }
}

fn residual_norm(d: &Dictionary, x: &DVector<f64>, b: &DVector<f64>) -> f64 {
    (d.matrix() * x - b).norm()
}

fn thresholded_support(d: &Dictionary, x: &DVector<f64>, threshold: f64) -> SupportPartition {
    let idx: Vec<usize> = (0..x.len()).filter(|&j| x[j].abs() > threshold).collect();
    SupportPartition::from_global(d.partition(), &idx).expect("indices in range")
}

/// Least-squares fit restricted to a support.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportFit {
    /// Support in ascending order.
    pub support: Vec<usize>,
    /// Coefficients aligned with `support`.
    pub coefficients: DVector<f64>,
    pub residual: DVector<f64>,
    pub residual_norm: f64,
}

impl SupportFit {
    /// Embeds the coefficients into a length-`n` vector.
    pub fn full_vector(&self, n: usize) -> DVector<f64> {
        let mut x = DVector::zeros(n);
        for (&j, &c) in self.support.iter().zip(self.coefficients.iter()) {
            x[j] = c;
        }
        x
    }
}

/// `argmin_c ‖A_S c − b‖₂` through a Householder QR of `A_S`.
pub fn least_squares_on_support(
    d: &Dictionary,
    support: &[usize],
    b: &DVector<f64>,
) -> Result<SupportFit> {
    let a_s = d.columns(support)?;
    let mut sorted = support.to_vec();
    sorted.sort_unstable();
    let (coefficients, residual) = least_squares(&a_s, b, DEFAULT_RANK_TOL)?;
    Ok(SupportFit {
        support: sorted,
        residual_norm: residual.norm(),
        coefficients,
        residual,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct OmpOptions {
    pub max_sparsity: usize,
    pub residual_tol: f64,
}

impl OmpOptions {
    pub fn new(max_sparsity: usize) -> Self {
        OmpOptions {
            max_sparsity,
            residual_tol: DEFAULT_RESIDUAL_TOL,
        }
    }
}

/// Orthogonal matching pursuit.
///
/// Each step picks the unselected atom with the largest `|⟨a_j, r⟩|` (lowest
/// index on ties), refits by least squares on all selected atoms, and updates
/// the residual. Stops once `‖r‖₂ ≤ residual_tol` or `max_sparsity` atoms are selected.
pub fn omp(p: &RecoveryProblem<'_>, opts: OmpOptions) -> RecoveryResult {
    let d = p.dictionary;
    let a = d.matrix();
    let n = d.n();
    let mut selected: Vec<usize> = Vec::new();
    let mut coef = DVector::zeros(0);
    let mut r = p.b.clone();
    let mut history = vec![r.norm()];
    let mut message = None;

    while r.norm() > opts.residual_tol && selected.len() < opts.max_sparsity.min(n) {
        let corr = a.tr_mul(&r);
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if selected.contains(&j) {
                continue;
            }
            let c = corr[j].abs();
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((j, c));
            }
        }
        let Some((j, c)) = best else { break };
        if c == 0.0 {
            message = Some("residual is orthogonal to every remaining atom".to_string());
            break;
        }
        selected.push(j);
        let a_s = a.select_columns(selected.iter());
        match least_squares(&a_s, &p.b, DEFAULT_RANK_TOL) {
            Ok((c, res)) => {
                coef = c;
                r = res;
                history.push(r.norm());
            }
            Err(e) => {
                selected.pop();
                message = Some(format!(
                    "stopped: selected atom {j} makes the support dependent ({e})"
                ));
                break;
            }
        }
    }

    let mut x = DVector::zeros(n);
    for (&j, &c) in selected.iter().zip(coef.iter()) {
        x[j] = c;
    }
    let res = residual_norm(d, &x, &p.b);
    RecoveryResult {
        support: SupportPartition::from_global(d.partition(), &selected).expect("distinct indices"),
        residual_norm: res,
        iterations: selected.len(),
        solver: SolverKind::Omp,
        objective: selected.len() as f64,
        converged: *history.last().expect("non-empty") <= opts.residual_tol,
        x: x.as_slice().to_vec(),
        diagnostics: Diagnostics {
            residual_history: Some(history),
            message,
            ..Diagnostics::default()
        },
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BpOptions {
    pub feasibility: f64,
    pub optimality: f64,
    pub support_threshold: f64,
    /// Pivot budget across both simplex phases; `None` picks one from the problem size.
    pub max_iter: Option<usize>,
}

impl Default for BpOptions {
    fn default() -> Self {
        BpOptions {
            feasibility: DEFAULT_FEASIBILITY_TOL,
            optimality: DEFAULT_OPTIMALITY_TOL,
            support_threshold: DEFAULT_SUPPORT_THRESHOLD,
            max_iter: None,
        }
    }
}

/// Reduced costs above `-REDUCED_COST_TOL` count as optimal.
const REDUCED_COST_TOL: f64 = 1e-11;
const PIVOT_TOL: f64 = 1e-9;
/// Basic values this small (relative to `‖rhs‖_∞`) are treated as exactly zero.
const DEGENERATE_TOL: f64 = 1e-12;
/// Consecutive degenerate pivots before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SimplexStatus {
    Optimal,
    IterationLimit,
    Unbounded,
    Singular,
}

/// Revised simplex on `min cᵀz s.t. M z = rhs, z ≥ 0` from a feasible basis.
/// The basis matrix is refactorized at every pivot.
struct Simplex<'a> {
    mat: &'a DMatrix<f64>,
    rhs: &'a DVector<f64>,
    n_real: usize,
    iterations: usize,
    max_iter: usize,
}

impl Simplex<'_> {
    fn run(&mut self, cost: &[f64], basis: &mut [usize], phase_two: bool) -> SimplexStatus {
        let n_cols = self.mat.ncols();
        let mut bland = false;
        let mut streak = 0;
        loop {
            let b_mat = self.mat.select_columns(basis.iter());
            let lu = b_mat.clone().lu();
            let Some(mut x_b) = lu.solve(self.rhs) else {
                return SimplexStatus::Singular;
            };
            // Rounding noise on degenerate basics would break the exact ratio ties Bland's rule relies on.
            let zero_tol = DEGENERATE_TOL * self.rhs.amax().max(1.0);
            x_b.apply(|v| {
                if v.abs() <= zero_tol {
                    *v = 0.0
                }
            });
            let c_b = DVector::from_iterator(basis.len(), basis.iter().map(|&j| cost[j]));
            let Some(y) = b_mat.transpose().lu().solve(&c_b) else {
                return SimplexStatus::Singular;
            };

            let mut in_basis = vec![false; n_cols];
            for &j in basis.iter() {
                in_basis[j] = true;
            }
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..n_cols {
                if in_basis[j] || (phase_two && j >= self.n_real) {
                    continue;
                }
                let d = cost[j] - self.mat.column(j).dot(&y);
                if d < -REDUCED_COST_TOL {
                    if bland {
                        entering = Some((j, d));
                        break;
                    }
                    if entering.is_none_or(|(_, best)| d < best) {
                        entering = Some((j, d));
                    }
                }
            }
            let Some((q, _)) = entering else {
                return SimplexStatus::Optimal;
            };
            if self.iterations >= self.max_iter {
                return SimplexStatus::IterationLimit;
            }
            self.iterations += 1;

            let w = lu
                .solve(&self.mat.column(q).into_owned())
                .expect("factorization succeeded above");
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..basis.len() {
                let artificial = basis[i] >= self.n_real;
                let ratio = if w[i] > PIVOT_TOL {
                    x_b[i].max(0.0) / w[i]
                } else if phase_two && artificial && w[i] < -PIVOT_TOL {
                    // artificial variables are pinned at zero after phase one
                    0.0
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((l, best)) => {
                        ratio < best
                            || (ratio == best && {
                                let (cur_art, new_art) = (basis[l] >= self.n_real, artificial);
                                (new_art && !cur_art) || (new_art == cur_art && basis[i] < basis[l])
                            })
                    }
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
            let Some((l, step)) = leave else {
                return SimplexStatus::Unbounded;
            };
            if step == 0.0 {
                streak += 1;
                if streak >= DEGENERATE_STREAK {
                    bland = true;
                }
            } else {
                streak = 0;
            }
            basis[l] = q;
        }
    }
}

/// Smallest `‖Ax − b‖₂` over all `x`.
fn residual_floor(a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    let svd = a.clone().svd(true, false);
    let u = svd.u.as_ref().expect("u requested");
    let smax = svd.singular_values.max();
    let mut proj = DVector::zeros(b.len());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > 1e-12 * smax.max(f64::MIN_POSITIVE) {
            let uk = u.column(k);
            proj += uk * uk.dot(b);
        }
    }
    (b - proj).norm()
}

/// Basis pursuit `min ‖x‖₁ s.t. Ax = b`.
///
/// Solved as the linear program over `x = u − v`, `u, v ≥ 0`, with a two-phase
/// revised simplex. The final basis yields a dual point `y`; the result is
/// converged only when `‖Ax − b‖₂ ≤ feasibility`, `‖Aᵀy‖_∞ ≤ 1 + optimality`
/// and `‖x‖₁ − bᵀy ≤ optimality · max(1, ‖x‖₁)`.
pub fn basis_pursuit(p: &RecoveryProblem<'_>, opts: BpOptions) -> Result<RecoveryResult> {
    let d = p.dictionary;
    let a = d.matrix();
    let (m, n) = (d.m(), d.n());

    let floor = residual_floor(a, &p.b);
    if floor > opts.feasibility {
        return Err(Error::Infeasible {
            residual: floor,
            tol: opts.feasibility,
        });
    }

    // Rows are sign-flipped so that the right-hand side is nonnegative.
    let signs: Vec<f64> =
        p.b.iter()
            .map(|&v| if v < 0.0 { -1.0 } else { 1.0 })
            .collect();
    let rhs = DVector::from_iterator(m, p.b.iter().zip(&signs).map(|(v, s)| v * s));
    let n_real = 2 * n;
    let mut mat = DMatrix::zeros(m, n_real + m);
    for i in 0..m {
        for j in 0..n {
            mat[(i, j)] = signs[i] * a[(i, j)];
            mat[(i, n + j)] = -signs[i] * a[(i, j)];
        }
        mat[(i, n_real + i)] = 1.0;
    }

    let max_iter = opts.max_iter.unwrap_or(50 * (n_real + m) + 1000);
    let mut simplex = Simplex {
        mat: &mat,
        rhs: &rhs,
        n_real,
        iterations: 0,
        max_iter,
    };
    let mut basis: Vec<usize> = (n_real..n_real + m).collect();

    let phase_one_cost: Vec<f64> = (0..n_real + m)
        .map(|j| if j >= n_real { 1.0 } else { 0.0 })
        .collect();
    let mut status = simplex.run(&phase_one_cost, &mut basis, false);
    let mut message = None;
    if status == SimplexStatus::Optimal {
        let cost: Vec<f64> = (0..n_real + m)
            .map(|j| if j < n_real { 1.0 } else { 0.0 })
            .collect();
        status = simplex.run(&cost, &mut basis, true);
    } else {
        message = Some(format!("phase one ended with {status:?}"));
    }
    if status != SimplexStatus::Optimal && message.is_none() {
        message = Some(format!("phase two ended with {status:?}"));
    }

    let b_mat = mat.select_columns(basis.iter());
    let lu = b_mat.clone().lu();
    let z_b = lu
        .solve(&rhs)
        .ok_or_else(|| Error::RankDeficient("final simplex basis is singular".into()))?;
    let mut x = DVector::zeros(n);
    for (&j, &v) in basis.iter().zip(z_b.iter()) {
        let v = v.max(0.0);
        if j < n {
            x[j] += v;
        } else if j < n_real {
            x[j - n] -= v;
        }
    }

    let c_b = DVector::from_iterator(m, basis.iter().map(|&j| if j < n_real { 1.0 } else { 0.0 }));
    let certificate = b_mat.transpose().lu().solve(&c_b).map(|y_flipped| {
        let y = DVector::from_iterator(m, y_flipped.iter().zip(&signs).map(|(v, s)| v * s));
        let dual_inf_norm = a.tr_mul(&y).amax();
        let dual_objective = p.b.dot(&y);
        DualCertificate {
            dual_inf_norm,
            dual_objective,
            duality_gap: x.lp_norm(1) - dual_objective,
            y: y.as_slice().to_vec(),
        }
    });

    let l1 = x.lp_norm(1);
    let res = residual_norm(d, &x, &p.b);
    let certified = certificate.as_ref().is_some_and(|c| {
        c.dual_inf_norm <= 1.0 + opts.optimality && c.duality_gap <= opts.optimality * l1.max(1.0)
    });
    let converged = status == SimplexStatus::Optimal && res <= opts.feasibility && certified;
    if status == SimplexStatus::Optimal && !converged {
        message = Some(format!(
            "optimal basis failed verification: residual {res:e}, certificate {:?}",
            certificate
                .as_ref()
                .map(|c| (c.dual_inf_norm, c.duality_gap))
        ));
    }

    Ok(RecoveryResult {
        support: thresholded_support(d, &x, opts.support_threshold),
        residual_norm: res,
        iterations: simplex.iterations,
        solver: SolverKind::Bp,
        objective: l1,
        converged,
        x: x.as_slice().to_vec(),
        diagnostics: Diagnostics {
            certificate,
            message,
            ..Diagnostics::default()
        },
    })
}

#[derive(Debug, Clone, Copy)]
pub struct L0Options {
    pub s_max: usize,
    pub fit_tol: f64,
    /// Cap on subsets examined.
    pub budget: u64,
}

impl L0Options {
    pub fn new(s_max: usize) -> Self {
        L0Options {
            s_max,
            fit_tol: DEFAULT_FIT_TOL,
            budget: DEFAULT_L0_BUDGET,
        }
    }
}

/// Sparsest representation(s) found by exhaustive search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L0Solution {
    /// Fit on the lexicographically first minimizing support.
    pub result: RecoveryResult,
    /// All minimizing supports (global indices, ascending), in lexicographic order.
    pub minimizers: Vec<Vec<usize>>,
}

impl L0Solution {
    pub fn is_unique(&self) -> bool {
        self.minimizers.len() == 1
    }
}

/// Exhaustive `ℓ⁰` minimization by increasing support size.
///
/// Returns every support of the smallest cardinality `k ≤ s_max` whose
/// least-squares residual is at most `fit_tol`, or `None` if there is none.
/// Supports with dependent columns are skipped: a smaller support reproduces their fit.
pub fn l0_bruteforce(p: &RecoveryProblem<'_>, opts: L0Options) -> Result<Option<L0Solution>> {
    let d = p.dictionary;
    let n = d.n();
    if p.b.norm() <= opts.fit_tol {
        let x = DVector::zeros(n);
        return Ok(Some(L0Solution {
            result: RecoveryResult {
                support: SupportPartition::from_global(d.partition(), &[])?,
                residual_norm: p.b.norm(),
                iterations: 1,
                solver: SolverKind::L0,
                objective: 0.0,
                converged: true,
                x: x.as_slice().to_vec(),
                diagnostics: Diagnostics {
                    minimizers: Some(vec![vec![]]),
                    ..Diagnostics::default()
                },
            },
            minimizers: vec![vec![]],
        }));
    }

    let mut examined = 0u64;
    for k in 1..=opts.s_max.min(n) {
        let mut found: Vec<SupportFit> = Vec::new();
        for subset in (0..n).combinations(k) {
            examined += 1;
            if examined > opts.budget {
                return Err(Error::BudgetExceeded {
                    budget: opts.budget,
                });
            }
            match least_squares_on_support(d, &subset, &p.b) {
                Ok(fit) if fit.residual_norm <= opts.fit_tol => found.push(fit),
                Ok(_) | Err(Error::RankDeficient(_)) => {}
                Err(e) => return Err(e),
            }
        }
        if let Some(first) = found.first() {
            let x = first.full_vector(n);
            let minimizers: Vec<Vec<usize>> = found.iter().map(|f| f.support.clone()).collect();
            let result = RecoveryResult {
                support: SupportPartition::from_global(d.partition(), &first.support)?,
                residual_norm: residual_norm(d, &x, &p.b),
                iterations: examined as usize,
                solver: SolverKind::L0,
                objective: k as f64,
                converged: true,
                x: x.as_slice().to_vec(),
                diagnostics: Diagnostics {
                    minimizers: Some(minimizers.clone()),
                    ..Diagnostics::default()
                },
            };
            return Ok(Some(L0Solution { result, minimizers }));
        }
    }
    Ok(None)
}
