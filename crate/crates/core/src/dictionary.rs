//! Column-normalized dictionaries partitioned into sub-bases.
//!
//! A [`Dictionary`] is an `m × n` real matrix whose columns (atoms) all have
//! unit Euclidean norm, together with a [`BlockPartition`] that splits the
//! columns into `N` contiguous sub-bases `A = [A_1, ..., A_N]`. Sub-bases need
//! not be square or full rank.
//!
//! Matrices are exchanged as dense row-major CSV, one matrix row per line.

use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::Path;

use nalgebra::{DMatrix, DVector, DVectorView};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Columns whose norm lies outside `[1 - UNIT_NORM_TOL, 1 + UNIT_NORM_TOL]` are not unit.
pub const UNIT_NORM_TOL: f64 = 1e-12;

/// Widths `n_1, ..., n_N` of the sub-bases, left to right.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "PartitionRepr", into = "PartitionRepr")]
pub struct BlockPartition {
    widths: Vec<usize>,
    offsets: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct PartitionRepr {
    widths: Vec<usize>,
}

impl TryFrom<PartitionRepr> for BlockPartition {
    type Error = Error;

    fn try_from(r: PartitionRepr) -> Result<Self> {
        BlockPartition::new(r.widths)
    }
}

impl From<BlockPartition> for PartitionRepr {
    fn from(p: BlockPartition) -> Self {
        PartitionRepr { widths: p.widths }
    }
}

impl BlockPartition {
    pub fn new(widths: Vec<usize>) -> Result<Self> {
        if widths.is_empty() {
            return Err(Error::Partition("at least one block is required".into()));
        }
        if let Some(i) = widths.iter().position(|&w| w == 0) {
            return Err(Error::Partition(format!("block {i} has width 0")));
        }
        let mut offsets = Vec::with_capacity(widths.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &w in &widths {
            acc += w;
            offsets.push(acc);
        }
        Ok(BlockPartition { widths, offsets })
    }

    /// A single block spanning all `n` columns.
    pub fn single(n: usize) -> Result<Self> {
        Self::new(vec![n])
    }

    /// `N` equal blocks of width `w`.
    pub fn uniform(w: usize, n_blocks: usize) -> Result<Self> {
        Self::new(vec![w; n_blocks])
    }

    /// Parses a comma separated width list such as `8,8,4`.
    pub fn parse_widths(s: &str) -> Result<Self> {
        let widths = s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("bad width {t:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(widths)
    }

    /// Parses `{"widths":[...]}`.
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(format!("partition json: {e}")))
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&read_to_string(path.as_ref())?)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string(self).expect("partition serializes")
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn n_blocks(&self) -> usize {
        self.widths.len()
    }

    /// Total column count.
    pub fn n(&self) -> usize {
        *self.offsets.last().expect("non-empty offsets")
    }

    pub fn width(&self, block: usize) -> usize {
        self.widths[block]
    }

    pub fn offset(&self, block: usize) -> usize {
        self.offsets[block]
    }

    /// Global column range of `block`.
    pub fn range(&self, block: usize) -> Range<usize> {
        self.offsets[block]..self.offsets[block + 1]
    }

    /// Block index and local index of global column `j`.
    pub fn locate(&self, j: usize) -> Option<(usize, usize)> {
        if j >= self.n() {
            return None;
        }
        let block = self.offsets.partition_point(|&o| o <= j) - 1;
        Some((block, j - self.offsets[block]))
    }

    /// Block index of every column, in column order.
    pub fn block_of_columns(&self) -> Vec<usize> {
        self.widths
            .iter()
            .enumerate()
            .flat_map(|(b, &w)| std::iter::repeat_n(b, w))
            .collect()
    }
}

/// Scale applied to every original column during normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRecord {
    pub scales: Vec<f64>,
}

/// Unit-norm measurement matrix with a block partition. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    matrix: DMatrix<f64>,
    partition: BlockPartition,
}

impl Dictionary {
    /// Wraps a matrix whose columns are already unit-norm.
    pub fn new(matrix: DMatrix<f64>, partition: BlockPartition) -> Result<Self> {
        check_shape(&matrix, &partition)?;
        for (j, col) in matrix.column_iter().enumerate() {
            let norm = col.norm();
            if (norm - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::NotUnitNorm { column: j, norm });
            }
        }
        Ok(Dictionary { matrix, partition })
    }

    /// Scales every column to unit norm and records the scales.
    pub fn normalized(
        mut matrix: DMatrix<f64>,
        partition: BlockPartition,
    ) -> Result<(Self, NormalizationRecord)> {
        check_shape(&matrix, &partition)?;
        let mut scales = Vec::with_capacity(matrix.ncols());
        for (j, mut col) in matrix.column_iter_mut().enumerate() {
            let norm = col.norm();
            if norm == 0.0 {
                return Err(Error::ZeroColumn { column: j });
            }
            col /= norm;
            scales.push(norm);
        }
        let d = Dictionary::new(matrix, partition)?;
        Ok((d, NormalizationRecord { scales }))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    /// Measurement dimension.
    pub fn m(&self) -> usize {
        self.matrix.nrows()
    }

    /// Number of atoms.
    pub fn n(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn n_blocks(&self) -> usize {
        self.partition.n_blocks()
    }

    pub fn column(&self, j: usize) -> DVectorView<'_, f64> {
        self.matrix.column(j)
    }

    /// Sub-basis `A_i` as an owned matrix.
    pub fn block(&self, i: usize) -> DMatrix<f64> {
        let r = self.partition.range(i);
        self.matrix.columns(r.start, r.len()).into_owned()
    }

    /// Gram matrix `AᵀA`, exactly symmetric as stored.
    pub fn gram(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut g = DMatrix::zeros(n, n);
        for i in 0..n {
            let ci = self.matrix.column(i);
            for j in i..n {
                let v = ci.dot(&self.matrix.column(j));
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
        }
        g
    }

    /// Submatrix `A_S`; columns are taken in ascending index order.
    pub fn columns(&self, indices: &[usize]) -> Result<DMatrix<f64>> {
        let sorted = validate_indices(indices, self.n())?;
        Ok(self.matrix.select_columns(sorted.iter()))
    }

    /// `A x`.
    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.n() {
            return Err(Error::Dimension(format!(
                "vector has length {}, dictionary has {} columns",
                x.len(),
                self.n()
            )));
        }
        Ok(&self.matrix * x)
    }
}

/// Sorted copy of `indices`; errors on out-of-range or repeated entries.
pub(crate) fn validate_indices(indices: &[usize], n: usize) -> Result<Vec<usize>> {
    let mut sorted = indices.to_vec();
    sorted.sort_unstable();
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            return Err(Error::DuplicateIndex(w[0]));
        }
    }
    if let Some(&last) = sorted.last() {
        if last >= n {
            return Err(Error::IndexOutOfRange { index: last, n });
        }
    }
    Ok(sorted)
}

fn check_shape(matrix: &DMatrix<f64>, partition: &BlockPartition) -> Result<()> {
    if matrix.nrows() == 0 || matrix.ncols() == 0 {
        return Err(Error::Dimension("matrix must be at least 1×1".into()));
    }
    if partition.n() != matrix.ncols() {
        return Err(Error::Dimension(format!(
            "partition widths sum to {}, matrix has {} columns",
            partition.n(),
            matrix.ncols()
        )));
    }
    for c in 0..matrix.ncols() {
        for r in 0..matrix.nrows() {
            if !matrix[(r, c)].is_finite() {
                return Err(Error::NonFinite { row: r, col: c });
            }
        }
    }
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses a dense row-major CSV matrix (no header).
pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(format!("csv: {e}")))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(c, f)| {
                f.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {r}, column {c}: {f:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let nrows = rows.len();
    if nrows == 0 {
        return Err(Error::Parse("empty matrix".into()));
    }
    let ncols = rows[0].len();
    if let Some(r) = rows.iter().position(|row| row.len() != ncols) {
        return Err(Error::Parse(format!(
            "row {r} has {} fields, expected {ncols}",
            rows[r].len()
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

/// Formats a matrix as row-major CSV with 17 significant digits.
pub fn format_matrix_csv(matrix: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..matrix.nrows() {
        for c in 0..matrix.ncols() {
            if c > 0 {
                out.push(',');
            }
            write!(out, "{:.16e}", matrix[(r, c)]).expect("write to string");
        }
        out.push('\n');
    }
    out
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    parse_matrix_csv(&read_to_string(path.as_ref())?)
}

pub fn write_matrix_csv(path: impl AsRef<Path>, matrix: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_matrix_csv(matrix)).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Reads a vector stored either as a single column or a single row.
pub fn read_vector_csv(path: impl AsRef<Path>) -> Result<DVector<f64>> {
    let m = read_matrix_csv(path)?;
    if m.ncols() == 1 {
        Ok(m.column(0).into_owned())
    } else if m.nrows() == 1 {
        Ok(m.row(0).transpose())
    } else {
        Err(Error::Dimension(format!(
            "expected a vector, got a {}×{} matrix",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Writes a vector as a single CSV column.
pub fn write_vector_csv(path: impl AsRef<Path>, v: &DVector<f64>) -> Result<()> {
    write_matrix_csv(path, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}

/// Loads a dictionary from CSV. The record is present iff `normalize` is set.
pub fn load_dictionary(
    matrix_path: impl AsRef<Path>,
    partition: BlockPartition,
    normalize: bool,
) -> Result<(Dictionary, Option<NormalizationRecord>)> {
    let matrix = read_matrix_csv(matrix_path)?;
    if normalize {
        let (d, rec) = Dictionary::normalized(matrix, partition)?;
        Ok((d, Some(rec)))
    } else {
        Ok((Dictionary::new(matrix, partition)?, None))
    }
}

pub fn save_dictionary(path: impl AsRef<Path>, d: &Dictionary) -> Result<()> {
    write_matrix_csv(path, d.matrix())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn partition_ranges_are_contiguous() {
        let p = BlockPartition::new(vec![3, 1, 2]).unwrap();
        assert_eq!(p.n(), 6);
        assert_eq!(p.range(0), 0..3);
        assert_eq!(p.range(1), 3..4);
        assert_eq!(p.range(2), 4..6);
        assert_eq!(p.locate(3), Some((1, 0)));
        assert_eq!(p.locate(5), Some((2, 1)));
        assert_eq!(p.locate(6), None);
        assert_eq!(p.block_of_columns(), vec![0, 0, 0, 1, 2, 2]);
    }

    #[test]
    fn partition_rejects_bad_widths() {
        assert!(BlockPartition::new(vec![]).is_err());
        assert!(BlockPartition::new(vec![2, 0]).is_err());
        assert!(BlockPartition::parse_widths("2,x").is_err());
        assert_eq!(
            BlockPartition::parse_widths(" 4, 4 ").unwrap().widths(),
            &[4, 4]
        );
        let p = BlockPartition::from_json_str(r#"{"widths":[2,5]}"#).unwrap();
        assert_eq!(p.n(), 7);
        assert!(BlockPartition::from_json_str(r#"{"widths":[0]}"#).is_err());
        assert_eq!(p.to_json_string(), r#"{"widths":[2,5]}"#);
    }

    #[test]
    fn identity_loads_as_single_block() {
        let d =
            Dictionary::new(DMatrix::identity(3, 3), BlockPartition::single(3).unwrap()).unwrap();
        assert_eq!((d.m(), d.n(), d.n_blocks()), (3, 3, 1));
        assert_eq!(d.gram(), DMatrix::identity(3, 3));
    }

    #[test]
    fn normalization_records_scales() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            Dictionary::new(m.clone(), BlockPartition::single(2).unwrap()),
            Err(Error::NotUnitNorm { column: 0, .. })
        ));
        let (d, rec) = Dictionary::normalized(m, BlockPartition::single(2).unwrap()).unwrap();
        assert_eq!(rec.scales, vec![2.0, 1.0]);
        assert_eq!(d.matrix()[(0, 0)], 1.0);
    }

    #[test]
    fn zero_column_cannot_be_normalized() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            Dictionary::normalized(m, BlockPartition::single(2).unwrap()),
            Err(Error::ZeroColumn { column: 1 })
        ));
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let err = Dictionary::new(
            DMatrix::identity(3, 3),
            BlockPartition::new(vec![2, 2]).unwrap(),
        );
        assert!(matches!(err, Err(Error::Dimension(_))));
    }

    #[test]
    fn non_finite_is_rejected() {
        let mut m = DMatrix::identity(2, 2);
        m[(1, 0)] = f64::NAN;
        assert!(matches!(
            Dictionary::normalized(m, BlockPartition::single(2).unwrap()),
            Err(Error::NonFinite { row: 1, col: 0 })
        ));
    }

    #[test]
    fn duplicate_columns_have_unit_gram_entry() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let m = DMatrix::from_row_slice(2, 2, &[s, s, s, s]);
        let d = Dictionary::new(m, BlockPartition::single(2).unwrap()).unwrap();
        assert_abs_diff_eq!(d.gram()[(0, 1)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn columns_sorted_and_validated() {
        let d =
            Dictionary::new(DMatrix::identity(3, 3), BlockPartition::single(3).unwrap()).unwrap();
        let sub = d.columns(&[2, 0]).unwrap();
        assert_eq!(sub.column(0), d.column(0));
        assert_eq!(sub.column(1), d.column(2));
        assert!(matches!(
            d.columns(&[3]),
            Err(Error::IndexOutOfRange { index: 3, n: 3 })
        ));
        assert!(matches!(d.columns(&[1, 1]), Err(Error::DuplicateIndex(1))));
    }

    #[test]
    fn csv_parsing_accepts_scientific_and_reports_errors() {
        let m = parse_matrix_csv("1, 2.5e-1\n-3E2,4\n").unwrap();
        assert_eq!(m, DMatrix::from_row_slice(2, 2, &[1.0, 0.25, -300.0, 4.0]));
        assert!(matches!(parse_matrix_csv("1,2\n3\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_matrix_csv("1,abc\n"), Err(Error::Parse(_))));
        assert!(matches!(parse_matrix_csv(""), Err(Error::Parse(_))));
    }
}
