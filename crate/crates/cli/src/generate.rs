use std::path::PathBuf;

use clap::{Args, ValueEnum};
use piecewise_core::dictionary::{format_matrix_csv, write_vector_csv};
use piecewise_core::generators::{
    derive_seed, identity_hadamard, piecewise_sparse_signal, union_general, union_orthogonal,
    Amplitude, SignalSpec,
};
use piecewise_core::{Dictionary, SparsityPattern};
use serde::{Deserialize, Serialize};

use crate::{to_json, write_file, CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeneratorKind {
    /// Union of random orthonormal bases.
    Orthogonal,
    /// Identity next to a normalized Sylvester Hadamard matrix (m a power of two).
    Hadamard,
    /// Blend of orthonormal and Gaussian blocks controlled by `mixing`.
    General,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorParams {
    pub kind: GeneratorKind,
    pub m: usize,
    #[serde(default = "two")]
    pub blocks: usize,
    #[serde(default)]
    pub mixing: f64,
}

fn two() -> usize {
    2
}

impl GeneratorParams {
    pub fn build(&self, seed: u64) -> CliResult<Dictionary> {
        Ok(match self.kind {
            GeneratorKind::Orthogonal => union_orthogonal(self.m, self.blocks, seed)?,
            GeneratorKind::Hadamard => {
                if self.blocks != 2 {
                    return Err(CliError::Usage(
                        "the Hadamard dictionary has exactly 2 blocks".into(),
                    ));
                }
                identity_hadamard(self.m)?
            }
            GeneratorKind::General => union_general(self.m, self.blocks, self.mixing, seed)?,
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum, default_value_t = GeneratorKind::Orthogonal)]
    pub kind: GeneratorKind,
    /// Signal dimension (rows).
    #[arg(long)]
    pub m: usize,
    #[arg(long, default_value_t = 2)]
    pub blocks: usize,
    #[arg(long, default_value_t = 0.0)]
    pub mixing: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also draw a piecewise sparse signal with these per-block sparsities.
    #[arg(long)]
    pub sparsity: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    pub amplitude_lo: f64,
    #[arg(long, default_value_t = 1.5)]
    pub amplitude_hi: f64,
    /// Fixed magnitude instead of the uniform range.
    #[arg(long)]
    pub amplitude_fixed: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct GenerateProvenance<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    dictionary: &'a GeneratorParams,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    signal: Option<&'a SignalSpec>,
    files: Vec<&'static str>,
}

pub fn run(args: &GenerateArgs) -> CliResult<()> {
    let params = GeneratorParams {
        kind: args.kind,
        m: args.m,
        blocks: args.blocks,
        mixing: args.mixing,
    };
    let d = params.build(args.seed)?;
    write_file(
        &args.out.join("dictionary.csv"),
        &format_matrix_csv(d.matrix()),
    )?;
    write_file(
        &args.out.join("partition.json"),
        &(d.partition().to_json_string() + "\n"),
    )?;
    let mut files = vec!["dictionary.csv", "partition.json"];

    let spec = match &args.sparsity {
        Some(text) => {
            let amplitude = match args.amplitude_fixed {
                Some(value) => Amplitude::Fixed { value },
                None => Amplitude::Uniform {
                    lo: args.amplitude_lo,
                    hi: args.amplitude_hi,
                },
            };
            Some(SignalSpec {
                partition: d.partition().clone(),
                sparsities: SparsityPattern::parse(text)?,
                amplitude,
                seed: derive_seed(args.seed, &[1]),
            })
        }
        None => None,
    };
    if let Some(spec) = &spec {
        let sig = piecewise_sparse_signal(spec)?;
        let b = d.matrix() * &sig.x;
        write_vector_csv(args.out.join("signal.csv"), &sig.x)?;
        write_vector_csv(args.out.join("measurement.csv"), &b)?;
        files.extend(["signal.csv", "measurement.csv"]);
    }
    files.push("provenance.json");
    let prov = GenerateProvenance {
        tool: "piecewise",
        version: env!("CARGO_PKG_VERSION"),
        command: "generate",
        dictionary: &params,
        seed: args.seed,
        signal: spec.as_ref(),
        files,
    };
    write_file(&args.out.join("provenance.json"), &to_json(&prov))
}
