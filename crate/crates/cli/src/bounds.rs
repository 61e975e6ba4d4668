use std::path::PathBuf;

use clap::{Args, ValueEnum};
use piecewise_core::conditions::{bound_table, format_table_csv, ConditionId, TableGrid, TableRow};
use piecewise_core::ConditionInputs;

use crate::{emit, parse_list, CliError, CliResult};

/// `(α1, α2)` pairs of the three internal-coherence regimes compared on the feasibility grid.
pub const FIG3_CASES: [(f64, f64); 3] = [(0.95, 0.1), (0.2, 0.15), (0.05, 0.02)];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BoundsMode {
    /// Bounds of the selected conditions at each μ (default cond1..cond3 at μ = 0.05).
    Fig1,
    /// cond1, cond2, cond5 over an (s1, s2) grid (default μ = 0.1, α_max = 0.5).
    Fig2,
    /// cond6 feasibility over an (s1, s2) grid for three (α1, α2) cases (default μ = 0.1).
    Fig3,
    /// Any conditions over a μ list, or over an (s1, s2) grid when `--s-max` is given.
    Custom,
}

#[derive(Debug, Clone, Args)]
pub struct BoundsArgs {
    #[arg(long, value_enum, default_value_t = BoundsMode::Fig1)]
    pub mode: BoundsMode,
    /// Comma separated coherence values.
    #[arg(long)]
    pub mu: Option<String>,
    /// Comma separated condition ids, e.g. `cond1,cond5`.
    #[arg(long)]
    pub conditions: Option<String>,
    #[arg(long)]
    pub alpha_max: Option<f64>,
    /// Per-block `α_i` for sparsity grids in custom mode.
    #[arg(long)]
    pub alpha: Option<String>,
    /// Number of blocks for bound-type conditions.
    #[arg(long, default_value_t = 2)]
    pub blocks: usize,
    /// Largest s1 and s2 on sparsity grids.
    #[arg(long)]
    pub s_max: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn condition_ids(text: Option<&str>, default: &[ConditionId]) -> CliResult<Vec<ConditionId>> {
    match text {
        Some(t) => t
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<ConditionId>()
                    .map_err(|e| CliError::Usage(e.to_string()))
            })
            .collect(),
        None => Ok(default.to_vec()),
    }
}

fn single_mu(args: &BoundsArgs, default: f64) -> CliResult<f64> {
    match args.mu.as_deref() {
        None => Ok(default),
        Some(t) => match parse_list::<f64>(t, "mu")?.as_slice() {
            [mu] => Ok(*mu),
            _ => Err(CliError::Usage("this mode takes a single --mu".into())),
        },
    }
}

fn mu_table(args: &BoundsArgs, default_ids: &[ConditionId]) -> CliResult<Vec<TableRow>> {
    let ids = condition_ids(args.conditions.as_deref(), default_ids)?;
    let mus = parse_list::<f64>(args.mu.as_deref().unwrap_or("0.05"), "mu")?;
    let alpha = args.alpha_max.unwrap_or(0.0);
    let inputs = ConditionInputs::new(mus[0], vec![alpha; args.blocks.max(1)])?;
    Ok(bound_table(&ids, &TableGrid::Mu(mus), &inputs, None)?)
}

pub fn bounds_rows(args: &BoundsArgs) -> CliResult<Vec<TableRow>> {
    use ConditionId::*;
    match args.mode {
        BoundsMode::Fig1 => mu_table(args, &[Cond1, Cond2, Cond3]),
        BoundsMode::Fig2 => {
            let ids = condition_ids(args.conditions.as_deref(), &[Cond1, Cond2, Cond5])?;
            let mu = single_mu(args, 0.1)?;
            let alpha = args.alpha_max.unwrap_or(0.5);
            let inputs = ConditionInputs::new(mu, vec![alpha, alpha])?;
            let s = args.s_max.unwrap_or(10);
            let grid = TableGrid::Sparsity {
                s1_max: s,
                s2_max: s,
            };
            Ok(bound_table(&ids, &grid, &inputs, None)?)
        }
        BoundsMode::Fig3 => {
            let mu = single_mu(args, 0.1)?;
            let s = args.s_max.unwrap_or(20);
            let grid = TableGrid::Sparsity {
                s1_max: s,
                s2_max: s,
            };
            let mut rows = Vec::new();
            for (a1, a2) in FIG3_CASES {
                let inputs = ConditionInputs::new(mu, vec![a1, a2])?;
                let label = format!("{a1}/{a2}");
                rows.extend(bound_table(&[Cond6], &grid, &inputs, Some(&label))?);
            }
            Ok(rows)
        }
        BoundsMode::Custom => {
            let Some(s) = args.s_max else {
                if args.conditions.is_none() {
                    return Err(CliError::Usage("custom mode needs --conditions".into()));
                }
                return mu_table(args, &[]);
            };
            let ids = condition_ids(args.conditions.as_deref(), &[Cond4, Cond6])?;
            let mu = single_mu(args, 0.1)?;
            let alpha = match args.alpha.as_deref() {
                Some(t) => parse_list::<f64>(t, "alpha")?,
                None => vec![args.alpha_max.unwrap_or(0.0); 2],
            };
            let inputs = ConditionInputs::new(mu, alpha)?;
            Ok(bound_table(
                &ids,
                &TableGrid::Sparsity {
                    s1_max: s,
                    s2_max: s,
                },
                &inputs,
                None,
            )?)
        }
    }
}

pub fn run(args: &BoundsArgs) -> CliResult<()> {
    let rows = bounds_rows(args)?;
    emit(args.out.as_deref(), &format_table_csv(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(mode: BoundsMode) -> BoundsArgs {
        BoundsArgs {
            mode,
            mu: None,
            conditions: None,
            alpha_max: None,
            alpha: None,
            blocks: 2,
            s_max: None,
            out: None,
        }
    }

    #[test]
    fn fig1_defaults() {
        let rows = bounds_rows(&args(BoundsMode::Fig1)).unwrap();
        let vals: Vec<f64> = rows.iter().map(|r| r.value.unwrap().as_f64()).collect();
        assert_eq!(rows.len(), 3);
        assert!((vals[0] - 10.5).abs() < 1e-12);
        assert!((vals[1] - 20.0).abs() < 1e-12);
        assert!((vals[2] - 18.284271247461902).abs() < 1e-9);
    }

    #[test]
    fn fig2_grid_shape() {
        let mut a = args(BoundsMode::Fig2);
        a.s_max = Some(3);
        let rows = bounds_rows(&a).unwrap();
        assert_eq!(rows.len(), 3 * 16);
        let c5 = rows.iter().find(|r| r.condition == "cond5").unwrap();
        assert!((c5.value.unwrap().as_f64() - 7.0).abs() < 1e-12);
    }

    #[test]
    fn fig3_labels_and_feasible_corner() {
        let mut a = args(BoundsMode::Fig3);
        a.s_max = Some(2);
        let rows = bounds_rows(&a).unwrap();
        assert_eq!(rows.len(), 3 * 9);
        let r = rows
            .iter()
            .find(|r| r.condition == "cond6:0.05/0.02" && r.param1 == 1.0 && r.param2 == Some(1.0))
            .unwrap();
        assert_eq!(r.satisfied, Some(true));
    }

    #[test]
    fn custom_modes() {
        let mut a = args(BoundsMode::Custom);
        a.conditions = Some("cond5,cond7".into());
        a.mu = Some("0.1,0.2".into());
        a.alpha_max = Some(0.5);
        a.blocks = 3;
        assert_eq!(bounds_rows(&a).unwrap().len(), 4);

        a.conditions = Some("cond6".into());
        a.alpha = Some("0.3,0.1".into());
        a.mu = Some("0.1".into());
        a.blocks = 2;
        a.s_max = Some(1);
        assert_eq!(bounds_rows(&a).unwrap().len(), 4);

        a.conditions = Some("cond9".into());
        assert!(matches!(bounds_rows(&a), Err(CliError::Usage(_))));
    }
}
