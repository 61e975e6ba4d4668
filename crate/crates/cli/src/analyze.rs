use std::path::PathBuf;

use clap::Args;
use piecewise_core::coherence::{
    coherence_profile, spark_bruteforce, spark_lower_bound_piecewise, SparkOptions, SparkValue,
    DEFAULT_SPARK_RANK_TOL,
};
use piecewise_core::conditions::{erc_exact, evaluate_all, ConditionInputs, ErcValue};
use piecewise_core::{Bound, CoherenceProfile, ConditionReport, SparsityPattern, SupportPartition};
use serde::Serialize;

use crate::{emit, parse_list, to_json, CliResult, DictArgs};

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub dict: DictArgs,
    /// Per-block sparsities `s1,s2,...` to test against every condition.
    #[arg(long)]
    pub sparsity: Option<String>,
    /// Also tabulate cumulative coherences up to this depth.
    #[arg(long)]
    pub babel_depth: Option<usize>,
    /// Exhaustive spark search over subsets of at most this many columns.
    #[arg(long)]
    pub spark: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_SPARK_RANK_TOL)]
    pub tol_rank: f64,
    /// Global column indices of a support whose exact recovery coefficient is reported.
    #[arg(long)]
    pub support: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
pub struct DictionarySummary {
    pub m: usize,
    pub n: usize,
    pub widths: Vec<usize>,
    pub normalized: bool,
}

#[derive(Debug, Serialize)]
pub struct SparkReport {
    pub value: SparkValue,
    /// Piecewise lower bound; absent for a single block.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lower_bound: Option<Bound>,
}

#[derive(Debug, Serialize)]
pub struct AnalyzeReport {
    pub dictionary: DictionarySummary,
    pub profile: CoherenceProfile,
    pub conditions: ConditionReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spark: Option<SparkReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub erc: Option<ErcValue>,
}

pub fn analyze(args: &AnalyzeArgs) -> CliResult<AnalyzeReport> {
    let (d, normalized) = args.dict.load()?;
    let profile = coherence_profile(&d, args.babel_depth)?;
    let pattern = args
        .sparsity
        .as_deref()
        .map(SparsityPattern::parse)
        .transpose()?;
    if let Some(p) = &pattern {
        p.check_against(d.partition())?;
    }
    let inputs = ConditionInputs::from_profile(&profile)?;
    let conditions = evaluate_all(&inputs, pattern.as_ref())?;

    let spark = match args.spark {
        Some(max_card) => {
            let value = spark_bruteforce(
                &d,
                SparkOptions {
                    rank_tol: args.tol_rank,
                    ..SparkOptions::new(max_card)
                },
            )?;
            let lower_bound = (d.n_blocks() >= 2)
                .then(|| spark_lower_bound_piecewise(profile.mu, profile.alpha_max, d.n_blocks()))
                .transpose()?;
            Some(SparkReport { value, lower_bound })
        }
        None => None,
    };

    let erc = match &args.support {
        Some(text) => {
            let idx = parse_list::<usize>(text, "support index")?;
            Some(erc_exact(
                &d,
                &SupportPartition::from_global(d.partition(), &idx)?,
            )?)
        }
        None => None,
    };

    Ok(AnalyzeReport {
        dictionary: DictionarySummary {
            m: d.m(),
            n: d.n(),
            widths: d.partition().widths().to_vec(),
            normalized,
        },
        profile,
        conditions,
        spark,
        erc,
    })
}

pub fn run(args: &AnalyzeArgs) -> CliResult<()> {
    let report = analyze(args)?;
    emit(args.out.as_deref(), &to_json(&report))
}
