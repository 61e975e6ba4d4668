//! Monte-Carlo recovery experiments over a grid of piecewise sparsity patterns.
//!
//! Trial `t` at grid point `g` draws everything from the seed
//! `derive_seed(master_seed, [g, t])`: the dictionary (when regenerated) from
//! `derive_seed(trial_seed, [0])` and the signal from `derive_seed(trial_seed, [1])`.
//! A fixed generated dictionary uses `derive_seed(master_seed, [])`. Trials run in
//! parallel and are aggregated in trial order, so output does not depend on scheduling.

use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use piecewise_core::coherence::coherence_profile;
use piecewise_core::conditions::{
    cond4_orthogonal_erc, cond6_piecewise_erc, erc_exact, BoundFormula, ORTHOGONAL_UNION_TOL,
};
use piecewise_core::dictionary::load_dictionary;
use piecewise_core::generators::{derive_seed, piecewise_sparse_signal, Amplitude, SignalSpec};
use piecewise_core::solvers::{
    basis_pursuit, l0_bruteforce, omp, BpOptions, L0Options, OmpOptions, RecoveryProblem,
    RecoveryResult, DEFAULT_FEASIBILITY_TOL, DEFAULT_FIT_TOL, DEFAULT_L0_BUDGET,
    DEFAULT_OPTIMALITY_TOL, DEFAULT_RESIDUAL_TOL, DEFAULT_SUPPORT_THRESHOLD,
};
use piecewise_core::{BlockPartition, Dictionary, SparsityPattern};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::generate::GeneratorParams;
use crate::{to_json, write_file, CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const RESULTS_FILE: &str = "results.csv";
pub const PROVENANCE_FILE: &str = "provenance.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DictionarySource {
    Generated(GeneratorParams),
    File {
        /// Relative paths resolve against the config file's directory.
        matrix: PathBuf,
        widths: Vec<usize>,
        #[serde(default)]
        normalize: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum SparsityGrid {
    /// Explicit list of patterns.
    Patterns(Vec<Vec<usize>>),
    /// Inclusive `[lo, hi]` per block; the cartesian product, first block slowest.
    Ranges(Vec<[usize; 2]>),
}

impl SparsityGrid {
    pub fn points(&self) -> Vec<SparsityPattern> {
        match self {
            SparsityGrid::Patterns(p) => p.iter().cloned().map(SparsityPattern::new).collect(),
            SparsityGrid::Ranges(r) => {
                let mut out: Vec<Vec<usize>> = vec![vec![]];
                for &[lo, hi] in r {
                    out = out
                        .into_iter()
                        .flat_map(|prefix| {
                            (lo..=hi).map(move |s| {
                                let mut p = prefix.clone();
                                p.push(s);
                                p
                            })
                        })
                        .collect();
                }
                out.into_iter().map(SparsityPattern::new).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverName {
    Omp,
    Bp,
    L0,
}

impl SolverName {
    fn as_str(self) -> &'static str {
        match self {
            SolverName::Omp => "omp",
            SolverName::Bp => "bp",
            SolverName::L0 => "l0",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub residual: f64,
    pub feasibility: f64,
    pub optimality: f64,
    pub support: f64,
    pub fit: f64,
    /// Success needs `‖x̂ − x‖₂ ≤ success_relative_error · ‖x‖₂`.
    pub success_relative_error: f64,
    pub l0_budget: u64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            residual: DEFAULT_RESIDUAL_TOL,
            feasibility: DEFAULT_FEASIBILITY_TOL,
            optimality: DEFAULT_OPTIMALITY_TOL,
            support: DEFAULT_SUPPORT_THRESHOLD,
            fit: DEFAULT_FIT_TOL,
            success_relative_error: 1e-6,
            l0_budget: DEFAULT_L0_BUDGET,
        }
    }
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub dictionary: DictionarySource,
    /// Draw a fresh generated dictionary for every trial.
    #[serde(default = "default_true")]
    pub regenerate_per_trial: bool,
    pub trials: usize,
    pub grid: SparsityGrid,
    pub solvers: Vec<SolverName>,
    pub master_seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub amplitude: Amplitude,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Compute the exact recovery coefficient of every planted support.
    #[serde(default)]
    pub check_erc: bool,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> CliResult<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.solvers.is_empty() {
            return bad("no solvers selected".into());
        }
        if self.grid.points().is_empty() {
            return bad("sparsity grid is empty".into());
        }
        if let SparsityGrid::Ranges(r) = &self.grid {
            if let Some([lo, hi]) = r.iter().find(|[lo, hi]| lo > hi) {
                return bad(format!("range [{lo}, {hi}] is empty"));
            }
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("residual", t.residual),
            ("feasibility", t.feasibility),
            ("optimality", t.optimality),
            ("support", t.support),
            ("fit", t.fit),
            ("success_relative_error", t.success_relative_error),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("tolerance {name} must be positive, got {v}"));
            }
        }
        if t.l0_budget == 0 {
            return bad("l0_budget must be positive".into());
        }
        Ok(())
    }
}

/// Aggregated outcome at one grid point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub grid_index: usize,
    pub sparsity: Vec<usize>,
    pub trials: usize,
    /// Successes per solver, in config order.
    pub successes: Vec<usize>,
    pub mu_mean: f64,
    pub mu_min: f64,
    pub mu_max: f64,
    pub alpha_max_mean: f64,
    pub alpha_max_max: f64,
    /// Trials whose measured coherences satisfy each condition.
    pub cond4_holds: usize,
    /// Trials whose dictionary is an orthogonal union, the only ones cond4 is counted on.
    pub cond4_trials: usize,
    pub cond5_holds: usize,
    pub cond6_holds: usize,
    /// Trials whose planted support has exact recovery coefficient below 1.
    pub erc_holds: Option<usize>,
}

impl ExperimentRow {
    pub fn success_rate(&self, solver: usize) -> f64 {
        self.successes[solver] as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub success: Vec<bool>,
    pub mu: f64,
    pub alpha_max: f64,
    /// `None` when the dictionary is not an orthogonal union.
    pub cond4: Option<bool>,
    pub cond5: bool,
    pub cond6: bool,
    pub erc: Option<bool>,
}

fn matches_planted(r: &RecoveryResult, x: &[f64], support: &[usize], rel_tol: f64) -> bool {
    let norm_x = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    let err =
        r.x.iter()
            .zip(x)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
    r.support.global == support && err <= rel_tol * norm_x
}

/// Runs one solver; numerical failures count as unsuccessful.
fn solve(
    name: SolverName,
    p: &RecoveryProblem<'_>,
    k: usize,
    t: &Tolerances,
) -> Option<RecoveryResult> {
    match name {
        SolverName::Omp => Some(omp(
            p,
            OmpOptions {
                max_sparsity: k,
                residual_tol: t.residual,
            },
        )),
        SolverName::Bp => basis_pursuit(
            p,
            BpOptions {
                feasibility: t.feasibility,
                optimality: t.optimality,
                support_threshold: t.support,
                max_iter: None,
            },
        )
        .ok()
        .filter(|r| r.converged),
        SolverName::L0 => {
            let opts = L0Options {
                s_max: k,
                fit_tol: t.fit,
                budget: t.l0_budget,
            };
            l0_bruteforce(p, opts)
                .ok()
                .flatten()
                .filter(|s| s.is_unique())
                .map(|s| s.result)
        }
    }
}

pub fn run_trial(
    cfg: &ExperimentConfig,
    d: &Dictionary,
    pattern: &SparsityPattern,
    seed: u64,
) -> CliResult<TrialOutcome> {
    let profile = coherence_profile(d, None)?;
    let sig = piecewise_sparse_signal(&SignalSpec {
        partition: d.partition().clone(),
        sparsities: pattern.clone(),
        amplitude: cfg.amplitude,
        seed: derive_seed(seed, &[1]),
    })?;
    let b = d.matrix() * &sig.x;
    let p = RecoveryProblem::new(d, b)?;
    let k = pattern.total();
    let t = &cfg.tolerances;
    let x = sig.x.as_slice();
    let success = cfg
        .solvers
        .iter()
        .map(|&s| {
            solve(s, &p, k, t).is_some_and(|r| {
                matches_planted(&r, x, &sig.support.global, t.success_relative_error)
            })
        })
        .collect();

    let (mu, alpha_max) = (profile.mu, profile.alpha_max);
    let n_blocks = d.n_blocks();
    let erc = if cfg.check_erc {
        Some(erc_exact(d, &sig.support).map(|e| e.holds).unwrap_or(false))
    } else {
        None
    };
    Ok(TrialOutcome {
        success,
        mu,
        alpha_max,
        cond4: if profile.block_mu.iter().all(|&b| b <= ORTHOGONAL_UNION_TOL) {
            Some(cond4_orthogonal_erc(mu, pattern)?.holds)
        } else {
            None
        },
        cond5: BoundFormula::Piecewise {
            alpha_max,
            n_blocks,
        }
        .admits(mu, k)?,
        cond6: cond6_piecewise_erc(mu, &profile.alpha, pattern)?.holds,
        erc,
    })
}

fn aggregate(
    grid_index: usize,
    pattern: &SparsityPattern,
    n_solvers: usize,
    outcomes: &[TrialOutcome],
) -> ExperimentRow {
    let trials = outcomes.len();
    let count = |f: &dyn Fn(&TrialOutcome) -> bool| outcomes.iter().filter(|o| f(o)).count();
    let mus: Vec<f64> = outcomes.iter().map(|o| o.mu).collect();
    let alphas: Vec<f64> = outcomes.iter().map(|o| o.alpha_max).collect();
    ExperimentRow {
        grid_index,
        sparsity: pattern.per_block().to_vec(),
        trials,
        successes: (0..n_solvers).map(|s| count(&|o| o.success[s])).collect(),
        mu_mean: mus.iter().sum::<f64>() / trials as f64,
        mu_min: mus.iter().copied().fold(f64::INFINITY, f64::min),
        mu_max: mus.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        alpha_max_mean: alphas.iter().sum::<f64>() / trials as f64,
        alpha_max_max: alphas.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        cond4_holds: count(&|o| o.cond4 == Some(true)),
        cond4_trials: count(&|o| o.cond4.is_some()),
        cond5_holds: count(&|o| o.cond5),
        cond6_holds: count(&|o| o.cond6),
        erc_holds: outcomes
            .first()
            .and_then(|o| o.erc)
            .map(|_| count(&|o| o.erc == Some(true))),
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Runs every grid point; `base_dir` resolves relative dictionary paths.
pub fn run_experiment(cfg: &ExperimentConfig, base_dir: &Path) -> CliResult<Vec<ExperimentRow>> {
    cfg.validate()?;
    let fixed = match &cfg.dictionary {
        DictionarySource::File {
            matrix,
            widths,
            normalize,
        } => {
            let partition = BlockPartition::new(widths.clone())?;
            Some(load_dictionary(resolve(base_dir, matrix), partition, *normalize)?.0)
        }
        DictionarySource::Generated(g) if !cfg.regenerate_per_trial => {
            Some(g.build(derive_seed(cfg.master_seed, &[]))?)
        }
        DictionarySource::Generated(_) => None,
    };
    let partition = match (&fixed, &cfg.dictionary) {
        (Some(d), _) => d.partition().clone(),
        (None, DictionarySource::Generated(g)) => g.build(0)?.partition().clone(),
        (None, DictionarySource::File { .. }) => unreachable!("file dictionaries are always fixed"),
    };
    if partition.n_blocks() < 2 {
        return Err(CliError::Config(
            "experiments need at least 2 blocks".into(),
        ));
    }
    let points = cfg.grid.points();
    for p in &points {
        p.check_against(&partition)
            .map_err(|e| CliError::Config(e.to_string()))?;
    }

    let mut rows = Vec::with_capacity(points.len());
    for (g, pattern) in points.iter().enumerate() {
        let outcomes = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let seed = derive_seed(cfg.master_seed, &[g as u64, t as u64]);
                match (&fixed, &cfg.dictionary) {
                    (Some(d), _) => run_trial(cfg, d, pattern, seed),
                    (None, DictionarySource::Generated(params)) => {
                        let d = params.build(derive_seed(seed, &[0]))?;
                        run_trial(cfg, &d, pattern, seed)
                    }
                    (None, DictionarySource::File { .. }) => unreachable!(),
                }
            })
            .collect::<CliResult<Vec<_>>>()?;
        rows.push(aggregate(g, pattern, cfg.solvers.len(), &outcomes));
    }
    Ok(rows)
}

pub fn format_rows_csv(cfg: &ExperimentConfig, rows: &[ExperimentRow]) -> String {
    let n_blocks = rows.first().map_or(0, |r| r.sparsity.len());
    let mut header: Vec<String> = vec!["grid_index".into()];
    header.extend((1..=n_blocks).map(|i| format!("s{i}")));
    header.push("trials".into());
    for s in &cfg.solvers {
        header.push(format!("{}_successes", s.as_str()));
        header.push(format!("{}_success_rate", s.as_str()));
    }
    header.extend(
        [
            "mu_mean",
            "mu_min",
            "mu_max",
            "alpha_max_mean",
            "alpha_max_max",
            "cond4_rate",
            "cond5_rate",
            "cond6_rate",
            "erc_rate",
        ]
        .map(String::from),
    );
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        let rate = |c: usize| (c as f64 / r.trials as f64).to_string();
        let mut cells: Vec<String> = vec![r.grid_index.to_string()];
        cells.extend(r.sparsity.iter().map(usize::to_string));
        cells.push(r.trials.to_string());
        for (i, &c) in r.successes.iter().enumerate() {
            cells.push(c.to_string());
            cells.push(r.success_rate(i).to_string());
        }
        cells.extend([
            r.mu_mean.to_string(),
            r.mu_min.to_string(),
            r.mu_max.to_string(),
            r.alpha_max_mean.to_string(),
            r.alpha_max_max.to_string(),
            match r.cond4_trials {
                0 => String::new(),
                n => (r.cond4_holds as f64 / n as f64).to_string(),
            },
            rate(r.cond5_holds),
            rate(r.cond6_holds),
            r.erc_holds.map(rate).unwrap_or_default(),
        ]);
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize)]
struct ExperimentProvenance<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a ExperimentConfig,
    seed_derivation: &'static str,
    success_criterion: &'static str,
    grid_points: usize,
    files: [&'static str; 2],
}

#[derive(Debug, Clone, Args)]
pub struct ExperimentArgs {
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &ExperimentArgs) -> CliResult<()> {
    let text = fs::read_to_string(&args.config).map_err(|e| piecewise_core::Error::Io {
        path: args.config.display().to_string(),
        source: e,
    })?;
    let cfg = ExperimentConfig::from_json_str(&text)?;
    let base = args.config.parent().unwrap_or(Path::new("."));
    let out_dir = match (&args.out, &cfg.output_dir) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => resolve(base, o),
        (None, None) => {
            return Err(CliError::Usage(
                "no output directory: pass --out or set output_dir".into(),
            ))
        }
    };
    let rows = run_experiment(&cfg, base)?;
    write_file(&out_dir.join(RESULTS_FILE), &format_rows_csv(&cfg, &rows))?;
    let prov = ExperimentProvenance {
        tool: "piecewise",
        version: env!("CARGO_PKG_VERSION"),
        command: "experiment",
        config: &cfg,
        seed_derivation: "trial seed = derive_seed(master_seed, [grid_index, trial]); \
                          dictionary seed = derive_seed(trial seed, [0]); signal seed = derive_seed(trial seed, [1]); \
                          fixed generated dictionary seed = derive_seed(master_seed, [])",
        success_criterion: "exact support match and ||x_hat - x||_2 <= success_relative_error * ||x||_2",
        grid_points: rows.len(),
        files: [RESULTS_FILE, PROVENANCE_FILE],
    };
    write_file(&out_dir.join(PROVENANCE_FILE), &to_json(&prov))
}
