//! Independent recomputations of core quantities.

use approx::assert_abs_diff_eq;
use itertools::Itertools;
use nalgebra::DMatrix;
use piecewise_core::coherence::{
    babel, block_coherence, coherence_profile, cross_block_babel, mutual_coherence,
    spark_bruteforce, within_block_babel, SparkOptions, SparkValue,
};
use piecewise_core::conditions::erc_exact;
use piecewise_core::dictionary::{
    format_matrix_csv, parse_matrix_csv, read_matrix_csv, write_matrix_csv,
};
use piecewise_core::generators::{identity_hadamard, union_general};
use piecewise_core::{BlockPartition, Dictionary, SupportPartition};

/// `max` over `(r, Λ)` with `r ∈ refs`, `Λ ⊂ pool \ {r}`, `|Λ| = size` of `Σ_{k∈Λ} |⟨a_k, a_r⟩|`.
fn exhaustive(d: &Dictionary, refs: &[usize], pool: &[usize], size: usize) -> f64 {
    let a = d.matrix();
    let mut best = 0.0f64;
    for &r in refs {
        let others: Vec<usize> = pool.iter().copied().filter(|&k| k != r).collect();
        for set in others.iter().combinations(size) {
            let sum: f64 = set
                .iter()
                .map(|&&k| a.column(k).dot(&a.column(r)).abs())
                .sum();
            best = best.max(sum);
        }
    }
    best
}

#[test]
fn babel_matches_set_enumeration() {
    for seed in 0..5 {
        let d = union_general(4, 2, 0.6, seed).unwrap();
        let all: Vec<usize> = (0..8).collect();
        for s in 1..8 {
            assert_abs_diff_eq!(
                babel(&d, s).unwrap(),
                exhaustive(&d, &all, &all, s),
                epsilon = 1e-12
            );
        }
        let b0: Vec<usize> = (0..4).collect();
        let b1: Vec<usize> = (4..8).collect();
        for m in 1..=4 {
            let cross = cross_block_babel(&d, 0, 1, m).unwrap();
            assert_abs_diff_eq!(cross, exhaustive(&d, &b1, &b0, m), epsilon = 1e-12);
        }
        for m in 1..4 {
            let within = within_block_babel(&d, 1, m).unwrap();
            assert_abs_diff_eq!(within, exhaustive(&d, &b1, &b1, m), epsilon = 1e-12);
        }
    }
}

#[test]
fn within_block_six_by_six_depth_three() {
    let d = union_general(6, 2, 0.8, 42).unwrap();
    let b0: Vec<usize> = (0..6).collect();
    assert_abs_diff_eq!(
        within_block_babel(&d, 0, 3).unwrap(),
        exhaustive(&d, &b0, &b0, 3),
        epsilon = 1e-12
    );
    assert_eq!(
        within_block_babel(&d, 0, 1).unwrap(),
        block_coherence(&d, 0).unwrap()
    );
}

#[test]
fn identity_hadamard_equal_cross_products() {
    let d = identity_hadamard(8).unwrap();
    let g = d.gram();
    let c = 8f64.powf(-0.5);
    for i in 0..8 {
        for j in 8..16 {
            assert_abs_diff_eq!(g[(i, j)].abs(), c, epsilon = 1e-15);
        }
    }
    assert_abs_diff_eq!(mutual_coherence(&d).unwrap(), c, epsilon = 1e-15);
    let prof = coherence_profile(&d, None).unwrap();
    assert_eq!(prof.alpha, vec![0.0, 0.0]);
    let all: Vec<usize> = (0..16).collect();
    assert_abs_diff_eq!(babel(&d, 4).unwrap(), 4.0 * c, epsilon = 1e-14);
    assert_abs_diff_eq!(exhaustive(&d, &all, &all, 4), 4.0 * c, epsilon = 1e-14);
    for m in 1..=8 {
        assert_abs_diff_eq!(
            cross_block_babel(&d, 1, 0, m).unwrap(),
            m as f64 * c,
            epsilon = 1e-14
        );
    }
}

#[test]
fn spark_matches_subset_rank_enumeration() {
    // 4×8 identity∥Hadamard: the first dependent subsets have 4 columns.
    let d = identity_hadamard(4).unwrap();
    let a = d.matrix();
    let mut oracle = None;
    'outer: for k in 1..=5 {
        for set in (0..8).combinations(k) {
            let sub = a.select_columns(set.iter());
            let det = (sub.transpose() * &sub).determinant();
            if det.abs() < 1e-10 {
                oracle = Some(k);
                break 'outer;
            }
        }
    }
    assert_eq!(oracle, Some(4));
    assert_eq!(
        spark_bruteforce(&d, SparkOptions::new(8)).unwrap(),
        SparkValue::Spark(4)
    );
    assert_eq!(
        spark_bruteforce(&d, SparkOptions::new(3)).unwrap(),
        SparkValue::ExceedsMaxCard(3)
    );
}

/// ERC through the normal equations with a dense LU solve.
fn erc_normal_equations(d: &Dictionary, support: &[usize]) -> f64 {
    let a = d.matrix();
    let a_s = a.select_columns(support.iter());
    let gram = a_s.transpose() * &a_s;
    let lu = gram.lu();
    (0..d.n())
        .filter(|j| !support.contains(j))
        .map(|j| {
            lu.solve(&(a_s.transpose() * a.column(j)))
                .unwrap()
                .lp_norm(1)
        })
        .fold(0.0, f64::max)
}

#[test]
fn erc_matches_normal_equations() {
    for seed in 0..10 {
        let d = union_general(8, 2, 0.3, seed).unwrap();
        let support = [1, 4, 9, 14];
        let sp = SupportPartition::from_global(d.partition(), &support).unwrap();
        let e = erc_exact(&d, &sp).unwrap();
        let oracle = erc_normal_equations(&d, &support);
        assert_abs_diff_eq!(e.value, oracle, epsilon = 1e-10 * oracle.max(1.0));
        assert_eq!(e.holds, e.value < 1.0);
    }
}

#[test]
fn erc_orthonormal_basis_is_zero() {
    let d = Dictionary::new(DMatrix::identity(5, 5), BlockPartition::single(5).unwrap()).unwrap();
    let sp = SupportPartition::from_global(d.partition(), &[0, 3]).unwrap();
    let e = erc_exact(&d, &sp).unwrap();
    assert!(e.value < 1e-15);
    assert!(e.holds);
}

#[test]
fn csv_round_trip_is_bit_identical() {
    let d = union_general(7, 3, 0.5, 9).unwrap();
    let text = format_matrix_csv(d.matrix());
    let back = parse_matrix_csv(&text).unwrap();
    assert_eq!(&back, d.matrix());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.csv");
    write_matrix_csv(&path, d.matrix()).unwrap();
    let back = read_matrix_csv(&path).unwrap();
    for (x, y) in back.iter().zip(d.matrix().iter()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
    // awkward values survive too
    let odd = DMatrix::from_row_slice(1, 4, &[f64::MIN_POSITIVE, -0.0, 1.0 / 3.0, 5e-324]);
    let back = parse_matrix_csv(&format_matrix_csv(&odd)).unwrap();
    for (x, y) in back.iter().zip(odd.iter()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}
