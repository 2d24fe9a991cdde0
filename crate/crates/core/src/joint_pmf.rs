//! Joint probability-mass matrices of two finite σ-fields.
//!
//! A [`JointPmf`] stores `p[i][j] = P(row atom i ∩ column atom j)`. Any
//! event of the row field is a union of row atoms, so every probability the
//! dependence measures need is a sum of entries over a rectangle.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of an input matrix.
pub const MASS_TOLERANCE: f64 = 1e-9;
/// Entries in `[-NEGATIVE_CLAMP, 0)` are treated as rounding noise and clamped.
pub const NEGATIVE_CLAMP: f64 = 1e-12;
/// Default cap on the number of entries of a Kronecker product.
pub const DEFAULT_KRON_CAP: usize = 100_000_000;

/// On-disk layout: `{"matrix": [[...]], "row_labels": [...], "col_labels": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointPmfFile {
    pub matrix: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_labels: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub col_labels: Option<Vec<String>>,
}

/// Joint law of the atoms of a pair of finite σ-fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JointPmfFile", into = "JointPmfFile")]
pub struct JointPmf {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
    row_labels: Option<Vec<String>>,
    col_labels: Option<Vec<String>>,
}

/// Row and column sums of a [`JointPmf`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Marginals {
    pub row: Vec<f64>,
    pub col: Vec<f64>,
}

/// Event pair `(A, B)`: `A` is the union of the listed row atoms, `B` the
/// union of the listed column atoms. Index lists are kept sorted and unique.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventPair {
    pub row_set: Vec<usize>,
    pub col_set: Vec<usize>,
}

impl EventPair {
    pub fn new(mut row_set: Vec<usize>, mut col_set: Vec<usize>) -> Self {
        row_set.sort_unstable();
        row_set.dedup();
        col_set.sort_unstable();
        col_set.dedup();
        EventPair { row_set, col_set }
    }

    /// Ordering key for ties between maximizers: smaller sets first, then
    /// lexicographic on the index lists.
    pub fn tie_key(&self) -> (usize, usize, &[usize], &[usize]) {
        (
            self.row_set.len(),
            self.col_set.len(),
            &self.row_set,
            &self.col_set,
        )
    }

    pub fn validate(&self, m: &JointPmf) -> Result<()> {
        if let Some(&i) = self.row_set.iter().find(|&&i| i >= m.rows()) {
            return Err(Error::IndexOutOfRange {
                axis: "row",
                index: i,
                len: m.rows(),
            });
        }
        if let Some(&j) = self.col_set.iter().find(|&&j| j >= m.cols()) {
            return Err(Error::IndexOutOfRange {
                axis: "column",
                index: j,
                len: m.cols(),
            });
        }
        Ok(())
    }
}

/// Generator styles for [`JointPmf::random`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomStyle {
    /// I.i.d. uniform entries, normalized.
    Dense,
    /// Like `Dense`, but each entry is zeroed with probability one half.
    Sparse,
    /// Outer product of random marginals with each entry scaled by
    /// `1 + perturbation * u`, `u` uniform on `[-1, 1]`, then renormalized.
    NearIndependent { perturbation: f64 },
}

impl RandomStyle {
    pub fn name(&self) -> &'static str {
        match self {
            RandomStyle::Dense => "dense",
            RandomStyle::Sparse => "sparse",
            RandomStyle::NearIndependent { .. } => "near_independent",
        }
    }
}

impl std::str::FromStr for RandomStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dense" => Ok(RandomStyle::Dense),
            "sparse" => Ok(RandomStyle::Sparse),
            "near_independent" | "near-independent" => {
                Ok(RandomStyle::NearIndependent { perturbation: 0.05 })
            }
            other => Err(Error::Config(format!("unknown style {other:?}"))),
        }
    }
}

impl JointPmf {
    /// Validates a row-major matrix. With `normalize`, entries are divided by
    /// their total; otherwise the total must already be 1 within
    /// [`MASS_TOLERANCE`].
    pub fn from_matrix(rows: &[Vec<f64>], normalize: bool) -> Result<Self> {
        let n_rows = rows.len();
        if n_rows == 0 || rows[0].is_empty() {
            return Err(Error::Empty);
        }
        let n_cols = rows[0].len();
        let mut entries = Vec::with_capacity(n_rows * n_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_cols {
                return Err(Error::NonRectangular {
                    row: i,
                    expected: n_cols,
                    found: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(Error::NonFinite { row: i, col: j });
                }
                if v < -NEGATIVE_CLAMP {
                    return Err(Error::NegativeEntry {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
                entries.push(v.max(0.0));
            }
        }
        Self::from_entries(n_rows, n_cols, entries, normalize)
    }

    fn from_entries(rows: usize, cols: usize, mut entries: Vec<f64>, normalize: bool) -> Result<Self> {
        let total: f64 = entries.iter().sum();
        if normalize {
            if total <= 0.0 {
                return Err(Error::ZeroTotal);
            }
            entries.iter_mut().for_each(|v| *v /= total);
        } else if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::NotNormalized { total });
        }
        Ok(JointPmf {
            rows,
            cols,
            entries,
            row_labels: None,
            col_labels: None,
        })
    }

    /// Builds from the file layout, attaching labels when present.
    pub fn from_file(file: JointPmfFile, normalize: bool) -> Result<Self> {
        let m = Self::from_matrix(&file.matrix, normalize)?;
        m.with_labels(file.row_labels, file.col_labels)
    }

    pub fn from_json_str(s: &str, normalize: bool) -> Result<Self> {
        let file: JointPmfFile = serde_json::from_str(s)
            .map_err(|e| Error::Config(format!("invalid matrix JSON: {e}")))?;
        Self::from_file(file, normalize)
    }

    pub fn to_file(&self) -> JointPmfFile {
        JointPmfFile {
            matrix: self.to_rows(),
            row_labels: self.row_labels.clone(),
            col_labels: self.col_labels.clone(),
        }
    }

    pub fn with_labels(
        mut self,
        row_labels: Option<Vec<String>>,
        col_labels: Option<Vec<String>>,
    ) -> Result<Self> {
        if let Some(l) = &row_labels {
            if l.len() != self.rows {
                return Err(Error::LabelMismatch {
                    axis: "row",
                    expected: self.rows,
                    found: l.len(),
                });
            }
        }
        if let Some(l) = &col_labels {
            if l.len() != self.cols {
                return Err(Error::LabelMismatch {
                    axis: "column",
                    expected: self.cols,
                    found: l.len(),
                });
            }
        }
        self.row_labels = row_labels;
        self.col_labels = col_labels;
        Ok(self)
    }

    /// Product measure of two marginal vectors (each normalized).
    pub fn outer(row: &[f64], col: &[f64]) -> Result<Self> {
        let rows: Vec<Vec<f64>> = row
            .iter()
            .map(|&r| col.iter().map(|&c| r * c).collect())
            .collect();
        Self::from_matrix(&rows, true)
    }

    /// Uniform `rows x cols` matrix.
    pub fn uniform(rows: usize, cols: usize) -> Result<Self> {
        Self::from_matrix(&vec![vec![1.0; cols]; rows], true)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn row_labels(&self) -> Option<&[String]> {
        self.row_labels.as_deref()
    }

    pub fn col_labels(&self) -> Option<&[String]> {
        self.col_labels.as_deref()
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }

    /// Smallest strictly positive entry.
    pub fn min_positive_entry(&self) -> Option<f64> {
        self.entries
            .iter()
            .copied()
            .filter(|&v| v > 0.0)
            .min_by(f64::total_cmp)
    }

    pub fn marginals(&self) -> Marginals {
        let row = (0..self.rows).map(|i| self.row(i).iter().sum()).collect();
        let mut col = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (c, &v) in col.iter_mut().zip(self.row(i)) {
                *c += v;
            }
        }
        Marginals { row, col }
    }

    /// `(P(A), P(B), P(A ∩ B))` for an event pair.
    pub fn event_probabilities(&self, e: &EventPair) -> (f64, f64, f64) {
        let marg = self.marginals();
        let pa = e.row_set.iter().map(|&i| marg.row[i]).sum();
        let pb = e.col_set.iter().map(|&j| marg.col[j]).sum();
        let pab = e
            .row_set
            .iter()
            .map(|&i| e.col_set.iter().map(|&j| self.get(i, j)).sum::<f64>())
            .sum();
        (pa, pb, pab)
    }

    pub fn transpose(&self) -> JointPmf {
        let mut entries = Vec::with_capacity(self.entries.len());
        for j in 0..self.cols {
            for i in 0..self.rows {
                entries.push(self.get(i, j));
            }
        }
        JointPmf {
            rows: self.cols,
            cols: self.rows,
            entries,
            row_labels: self.col_labels.clone(),
            col_labels: self.row_labels.clone(),
        }
    }

    /// Entry `(i, j)` of the result is entry `(perm[i], j)` of `self`.
    pub fn permute_rows(&self, perm: &[usize]) -> Result<JointPmf> {
        check_permutation(perm, self.rows, "row")?;
        let mut entries = Vec::with_capacity(self.entries.len());
        for &src in perm {
            entries.extend_from_slice(self.row(src));
        }
        Ok(JointPmf {
            rows: self.rows,
            cols: self.cols,
            entries,
            row_labels: self
                .row_labels
                .as_ref()
                .map(|l| perm.iter().map(|&p| l[p].clone()).collect()),
            col_labels: self.col_labels.clone(),
        })
    }

    /// Entry `(i, j)` of the result is entry `(i, perm[j])` of `self`.
    pub fn permute_cols(&self, perm: &[usize]) -> Result<JointPmf> {
        Ok(self.transpose().permute_rows(perm)?.transpose())
    }

    /// Joint matrix of `(A1 ∨ A2, B1 ∨ B2)` when `A1 ∨ B1` and `A2 ∨ B2` are
    /// independent. Row atom `(i1, i2)` sits at index `i1 * I2 + i2`, and
    /// likewise for columns.
    pub fn kron(&self, other: &JointPmf) -> Result<JointPmf> {
        self.kron_with_cap(other, DEFAULT_KRON_CAP)
    }

    pub fn kron_with_cap(&self, other: &JointPmf, cap: usize) -> Result<JointPmf> {
        let count = self.entries.len() as u128 * other.entries.len() as u128;
        if count > cap as u128 {
            return Err(Error::SizeOverflow {
                entries: count,
                cap,
            });
        }
        let rows = self.rows * other.rows;
        let cols = self.cols * other.cols;
        let mut entries = vec![0.0; rows * cols];
        for i1 in 0..self.rows {
            for i2 in 0..other.rows {
                let i = i1 * other.rows + i2;
                for j1 in 0..self.cols {
                    let a = self.get(i1, j1);
                    for j2 in 0..other.cols {
                        entries[i * cols + j1 * other.cols + j2] = a * other.get(i2, j2);
                    }
                }
            }
        }
        let row_labels = product_labels(self.row_labels(), other.row_labels(), self.rows, other.rows);
        let col_labels = product_labels(self.col_labels(), other.col_labels(), self.cols, other.cols);
        Ok(JointPmf {
            rows,
            cols,
            entries,
            row_labels,
            col_labels,
        })
    }

    /// Kronecker product of a nonempty list, folded left to right.
    pub fn kron_all(ms: &[JointPmf]) -> Result<JointPmf> {
        let (first, rest) = ms
            .split_first()
            .ok_or_else(|| Error::Config("empty list of factors".into()))?;
        rest.iter().try_fold(first.clone(), |acc, m| acc.kron(m))
    }

    /// Replaces rows `i1` and `i2` by their sum, stored at `min(i1, i2)`.
    pub fn merge_rows(&self, i1: usize, i2: usize) -> Result<JointPmf> {
        for i in [i1, i2] {
            if i >= self.rows {
                return Err(Error::IndexOutOfRange {
                    axis: "row",
                    index: i,
                    len: self.rows,
                });
            }
        }
        if i1 == i2 {
            return Err(Error::Shape(format!("cannot merge row {i1} with itself")));
        }
        let (keep, drop) = (i1.min(i2), i1.max(i2));
        let mut out: Vec<Vec<f64>> = Vec::with_capacity(self.rows - 1);
        for i in 0..self.rows {
            if i == drop {
                continue;
            }
            if i == keep {
                out.push(
                    self.row(keep)
                        .iter()
                        .zip(self.row(drop))
                        .map(|(a, b)| a + b)
                        .collect(),
                );
            } else {
                out.push(self.row(i).to_vec());
            }
        }
        let entries = out.into_iter().flatten().collect();
        let row_labels = self.row_labels.as_ref().map(|l| {
            let mut l = l.clone();
            l[keep] = format!("{}+{}", l[keep], l[drop]);
            l.remove(drop);
            l
        });
        Ok(JointPmf {
            rows: self.rows - 1,
            cols: self.cols,
            entries,
            row_labels,
            col_labels: self.col_labels.clone(),
        })
    }

    pub fn merge_cols(&self, j1: usize, j2: usize) -> Result<JointPmf> {
        self.transpose()
            .merge_rows(j1, j2)
            .map_err(|e| match e {
                Error::IndexOutOfRange { index, len, .. } => Error::IndexOutOfRange {
                    axis: "column",
                    index,
                    len,
                },
                other => other,
            })
            .map(|m| m.transpose())
    }

    /// Deterministic random instance for fuzzing.
    pub fn random(rows: usize, cols: usize, seed: u64, style: RandomStyle) -> Result<JointPmf> {
        if rows == 0 || cols == 0 {
            return Err(Error::Empty);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rows * cols;
        let entries: Vec<f64> = match style {
            RandomStyle::Dense => (0..n).map(|_| rng.random::<f64>()).collect(),
            RandomStyle::Sparse => {
                let mut e: Vec<f64> = (0..n)
                    .map(|_| {
                        let keep = rng.random_bool(0.5);
                        let v = rng.random::<f64>();
                        if keep {
                            v
                        } else {
                            0.0
                        }
                    })
                    .collect();
                if e.iter().all(|&v| v == 0.0) {
                    let k = rng.random_range(0..n);
                    e[k] = 1.0;
                }
                e
            }
            RandomStyle::NearIndependent { perturbation } => {
                let r = random_simplex(&mut rng, rows);
                let c = random_simplex(&mut rng, cols);
                let mut e = Vec::with_capacity(n);
                for &ri in &r {
                    for &cj in &c {
                        let u: f64 = rng.random_range(-1.0..=1.0);
                        e.push((ri * cj * (1.0 + perturbation * u)).max(0.0));
                    }
                }
                e
            }
        };
        Self::from_entries(rows, cols, entries, true)
    }
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    // Shifted away from zero so every atom carries mass.
    let v: Vec<f64> = (0..n).map(|_| 0.05 + rng.random::<f64>()).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn product_labels(
    a: Option<&[String]>,
    b: Option<&[String]>,
    na: usize,
    nb: usize,
) -> Option<Vec<String>> {
    if a.is_none() && b.is_none() {
        return None;
    }
    let name = |l: Option<&[String]>, k: usize| l.map_or_else(|| k.to_string(), |l| l[k].clone());
    Some(
        (0..na)
            .flat_map(|x| (0..nb).map(move |y| (x, y)))
            .map(|(x, y)| format!("({},{})", name(a, x), name(b, y)))
            .collect(),
    )
}

fn check_permutation(perm: &[usize], n: usize, axis: &'static str) -> Result<()> {
    if perm.len() != n {
        return Err(Error::Shape(format!(
            "{axis} permutation has length {}, expected {n}",
            perm.len()
        )));
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n {
            return Err(Error::IndexOutOfRange {
                axis,
                index: p,
                len: n,
            });
        }
        if std::mem::replace(&mut seen[p], true) {
            return Err(Error::Shape(format!("{axis} permutation repeats {p}")));
        }
    }
    Ok(())
}

impl TryFrom<JointPmfFile> for JointPmf {
    type Error = Error;

    fn try_from(file: JointPmfFile) -> Result<Self> {
        JointPmf::from_file(file, false)
    }
}

impl From<JointPmf> for JointPmfFile {
    fn from(m: JointPmf) -> Self {
        m.to_file()
    }
}
