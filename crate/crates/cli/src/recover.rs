use std::path::PathBuf;

use clap::Args;
use piecewise_core::dictionary::read_vector_csv;
use piecewise_core::solvers::{
    basis_pursuit, l0_bruteforce, omp, BpOptions, L0Options, OmpOptions, RecoveryProblem,
    RecoveryResult, DEFAULT_FEASIBILITY_TOL, DEFAULT_FIT_TOL, DEFAULT_L0_BUDGET,
    DEFAULT_OPTIMALITY_TOL, DEFAULT_RESIDUAL_TOL, DEFAULT_SUPPORT_THRESHOLD,
};

use crate::{emit, to_json, CliError, CliResult, DictArgs, SolverChoice};

#[derive(Debug, Clone, Args)]
pub struct RecoverArgs {
    #[command(flatten)]
    pub dict: DictArgs,
    /// Measurement vector CSV (one row or one column).
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long, value_enum, default_value_t = SolverChoice::Bp)]
    pub solver: SolverChoice,
    /// OMP iteration cap and exhaustive-search size limit; defaults to m.
    #[arg(long)]
    pub max_sparsity: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_RESIDUAL_TOL)]
    pub tol_residual: f64,
    #[arg(long, default_value_t = DEFAULT_FEASIBILITY_TOL)]
    pub tol_feasibility: f64,
    #[arg(long, default_value_t = DEFAULT_OPTIMALITY_TOL)]
    pub tol_optimality: f64,
    #[arg(long, default_value_t = DEFAULT_SUPPORT_THRESHOLD)]
    pub tol_support: f64,
    #[arg(long, default_value_t = DEFAULT_FIT_TOL)]
    pub tol_fit: f64,
    /// Cap on subsets examined by the exhaustive search.
    #[arg(long, default_value_t = DEFAULT_L0_BUDGET)]
    pub budget: u64,
    #[arg(long)]
    pub max_iter: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn check_tolerances(tols: &[(&str, f64)]) -> CliResult<()> {
    for (name, v) in tols {
        if !(v.is_finite() && *v > 0.0) {
            return Err(CliError::Usage(format!(
                "--tol-{name} must be positive, got {v}"
            )));
        }
    }
    Ok(())
}

pub fn recover(args: &RecoverArgs) -> CliResult<RecoveryResult> {
    check_tolerances(&[
        ("residual", args.tol_residual),
        ("feasibility", args.tol_feasibility),
        ("optimality", args.tol_optimality),
        ("support", args.tol_support),
        ("fit", args.tol_fit),
    ])?;
    let (d, _) = args.dict.load()?;
    let b = read_vector_csv(&args.b)?;
    let p = RecoveryProblem::new(&d, b)?;
    let k = args.max_sparsity.unwrap_or(d.m());
    match args.solver {
        SolverChoice::Omp => Ok(omp(
            &p,
            OmpOptions {
                max_sparsity: k,
                residual_tol: args.tol_residual,
            },
        )),
        SolverChoice::Bp => Ok(basis_pursuit(
            &p,
            BpOptions {
                feasibility: args.tol_feasibility,
                optimality: args.tol_optimality,
                support_threshold: args.tol_support,
                max_iter: args.max_iter,
            },
        )?),
        SolverChoice::L0 => {
            let opts = L0Options {
                s_max: k,
                fit_tol: args.tol_fit,
                budget: args.budget,
            };
            l0_bruteforce(&p, opts)?
                .map(|sol| sol.result)
                .ok_or_else(|| {
                    CliError::Numerical(format!("no representation with at most {k} atoms"))
                })
        }
    }
}

pub fn run(args: &RecoverArgs) -> CliResult<()> {
    let result = recover(args)?;
    emit(args.out.as_deref(), &to_json(&result))
}
