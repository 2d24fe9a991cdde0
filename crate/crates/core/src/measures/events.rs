//! Event statistics and exact enumeration of event pairs.
//!
//! Every quantity is computed from the four cells of the 2x2 table of
//! `(A, B)`: `n11 = P(A ∩ B)`, `n10 = P(A ∩ Bᶜ)`, `n01 = P(Aᶜ ∩ B)` and
//! `n00 = P(Aᶜ ∩ Bᶜ)`. The covariance is taken as the table determinant
//! `n11·n00 − n10·n01`, which equals `P(A ∩ B) − P(A)P(B)` for a unit-mass
//! table and flips sign exactly when either event is complemented.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint_pmf::{EventPair, JointPmf};

/// Which event-pair supremum to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Psi,
    Lambda,
    Tau,
}

impl EventKind {
    pub const ALL: [EventKind; 3] = [EventKind::Psi, EventKind::Lambda, EventKind::Tau];

    fn index(self) -> usize {
        match self {
            EventKind::Psi => 0,
            EventKind::Lambda => 1,
            EventKind::Tau => 2,
        }
    }
}

/// Default per-axis cap (on atoms of positive mass) for exact enumeration.
pub const DEFAULT_EXACT_CAP: usize = 14;

/// Relative width within which two candidate values count as tied.
const TIE_RTOL: f64 = 1e-13;
/// Row representatives handled per parallel work item.
const ROW_CHUNK: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactCaps {
    pub rows: usize,
    pub cols: usize,
}

impl Default for ExactCaps {
    fn default() -> Self {
        ExactCaps {
            rows: DEFAULT_EXACT_CAP,
            cols: DEFAULT_EXACT_CAP,
        }
    }
}

/// The four cells of the 2x2 table of an event pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table2x2 {
    pub n11: f64,
    pub n10: f64,
    pub n01: f64,
    pub n00: f64,
}

impl Table2x2 {
    pub fn of(m: &JointPmf, e: &EventPair) -> Table2x2 {
        let mut in_row = vec![false; m.rows()];
        e.row_set.iter().for_each(|&i| in_row[i] = true);
        let mut in_col = vec![false; m.cols()];
        e.col_set.iter().for_each(|&j| in_col[j] = true);
        let mut t = Table2x2 {
            n11: 0.0,
            n10: 0.0,
            n01: 0.0,
            n00: 0.0,
        };
        for i in 0..m.rows() {
            for (j, &p) in m.row(i).iter().enumerate() {
                match (in_row[i], in_col[j]) {
                    (true, true) => t.n11 += p,
                    (true, false) => t.n10 += p,
                    (false, true) => t.n01 += p,
                    (false, false) => t.n00 += p,
                }
            }
        }
        t
    }

    /// `|P(A ∩ B) − P(A)P(B)|`.
    #[inline]
    pub fn numerator(&self) -> f64 {
        (self.n11 * self.n00 - self.n10 * self.n01).abs()
    }

    #[inline]
    pub fn p_a(&self) -> f64 {
        self.n11 + self.n10
    }

    #[inline]
    pub fn p_not_a(&self) -> f64 {
        self.n01 + self.n00
    }

    #[inline]
    pub fn p_b(&self) -> f64 {
        self.n11 + self.n01
    }

    #[inline]
    pub fn p_not_b(&self) -> f64 {
        self.n10 + self.n00
    }

    /// The statistic of `kind` for exactly this pair (no complement choice).
    pub fn statistic(&self, kind: EventKind) -> f64 {
        let num = self.numerator();
        let denom = match kind {
            EventKind::Psi => self.p_a() * self.p_b(),
            EventKind::Lambda => (self.p_a() * self.p_b()).sqrt(),
            EventKind::Tau => ((self.p_a() * self.p_not_a()) * (self.p_b() * self.p_not_b())).sqrt(),
        };
        ratio(num, denom)
    }

    /// The best statistic over the four pairs `(A or Aᶜ, B or Bᶜ)`.
    fn best_over_complements(&self, kind: EventKind) -> f64 {
        let num = self.numerator();
        let denom = match kind {
            EventKind::Psi => self.p_a().min(self.p_not_a()) * self.p_b().min(self.p_not_b()),
            EventKind::Lambda => (self.p_a().min(self.p_not_a()) * self.p_b().min(self.p_not_b())).sqrt(),
            EventKind::Tau => ((self.p_a() * self.p_not_a()) * (self.p_b() * self.p_not_b())).sqrt(),
        };
        ratio(num, denom)
    }

    fn swap_rows(self) -> Table2x2 {
        Table2x2 {
            n11: self.n01,
            n10: self.n00,
            n01: self.n11,
            n00: self.n10,
        }
    }

    fn swap_cols(self) -> Table2x2 {
        Table2x2 {
            n11: self.n10,
            n10: self.n11,
            n01: self.n00,
            n00: self.n01,
        }
    }
}

/// `num / denom` with `0/0 := 0`.
#[inline]
fn ratio(num: f64, denom: f64) -> f64 {
    if denom > 0.0 {
        num / denom
    } else {
        0.0
    }
}

/// `|P(A ∩ B) − P(A)P(B)|` divided by the denominator of `kind`; zero when
/// that denominator vanishes.
pub fn event_statistic(m: &JointPmf, e: &EventPair, kind: EventKind) -> f64 {
    Table2x2::of(m, e).statistic(kind)
}

/// `|P(A ∩ B) − P(A)P(B)|` for an event pair.
pub fn event_numerator(m: &JointPmf, e: &EventPair) -> f64 {
    Table2x2::of(m, e).numerator()
}

/// A supremum over event pairs with the pair that attains it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventOptimum {
    pub value: f64,
    pub witness: EventPair,
}

impl EventOptimum {
    pub(crate) fn zero() -> Self {
        EventOptimum {
            value: 0.0,
            witness: EventPair::default(),
        }
    }

    /// Offers a candidate: strictly larger values win, near-ties go to the
    /// smaller tie key.
    pub(crate) fn offer(&mut self, value: f64, witness: impl FnOnce() -> EventPair) {
        if !(value > 0.0) {
            return;
        }
        let tol = TIE_RTOL * self.value.max(value);
        if value > self.value + tol {
            self.value = value;
            self.witness = witness();
        } else if value >= self.value - tol {
            let w = witness();
            if w.tie_key() < self.witness.tie_key() {
                self.witness = w;
            }
            self.value = self.value.max(value);
        }
    }

    fn merge(&mut self, other: EventOptimum) {
        let EventOptimum { value, witness } = other;
        self.offer(value, || witness);
    }
}

/// Indices of atoms with positive mass.
pub(crate) fn support(mass: &[f64]) -> Vec<usize> {
    mass.iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, _)| i)
        .collect()
}

fn decode(mask: u64, atoms: &[usize]) -> Vec<usize> {
    atoms
        .iter()
        .enumerate()
        .filter(|(b, _)| mask >> b & 1 == 1)
        .map(|(_, &a)| a)
        .collect()
}

/// Subset sums by lowest set bit: `out[S] = Σ_{b ∈ S} v[b]` for every `S`.
/// Each entry is a sum of at most `v.len()` nonnegative terms.
fn subset_sums(v: &[f64], out: &mut [f64]) {
    out[0] = 0.0;
    for s in 1..out.len() {
        let low = s.trailing_zeros() as usize;
        out[s] = out[s & (s - 1)] + v[low];
    }
}

/// Exact suprema of all three event measures in one pass.
///
/// Zero-mass atoms are dropped first (they never change an event
/// probability); the caps apply to the remaining atoms. Complementing either
/// event leaves the numerator unchanged, so only row sets omitting the last
/// support row and column sets omitting the last support column are visited,
/// each standing for its four complement variants.
pub fn exact_event_measures(m: &JointPmf, caps: ExactCaps) -> Result<[EventOptimum; 3]> {
    let marg = m.marginals();
    let rs = support(&marg.row);
    let cs = support(&marg.col);
    if rs.len() > caps.rows || cs.len() > caps.cols || rs.len() > 30 || cs.len() > 30 {
        return Err(Error::TooLargeForExact {
            rows: rs.len(),
            cols: cs.len(),
            cap_rows: caps.rows,
            cap_cols: caps.cols,
        });
    }
    if rs.len() < 2 || cs.len() < 2 {
        return Ok([EventOptimum::zero(), EventOptimum::zero(), EventOptimum::zero()]);
    }
    let (k, l) = (rs.len(), cs.len());
    let n_row_sets = 1usize << k;
    let n_col_sets = 1usize << l;

    // Column profile of every row subset: colsum[S * l + c] = P(S ∩ column cs[c]).
    let mut colsum = vec![0.0; n_row_sets * l];
    for s in 1..n_row_sets {
        let low = s.trailing_zeros() as usize;
        let parent = s & (s - 1);
        for c in 0..l {
            colsum[s * l + c] = colsum[parent * l + c] + m.get(rs[low], cs[c]);
        }
    }

    let full_rows = n_row_sets as u64 - 1;
    let full_cols = n_col_sets as u64 - 1;
    let reps: Vec<u64> = (0..(n_row_sets / 2) as u64).collect();

    let partials: Vec<[EventOptimum; 3]> = reps
        .par_chunks(ROW_CHUNK)
        .map(|chunk| {
            let mut best = [EventOptimum::zero(), EventOptimum::zero(), EventOptimum::zero()];
            let mut in_s = vec![0.0; n_col_sets];
            let mut out_s = vec![0.0; n_col_sets];
            for &s in chunk {
                let sc = full_rows ^ s;
                subset_sums(&colsum[s as usize * l..(s as usize + 1) * l], &mut in_s);
                subset_sums(&colsum[sc as usize * l..(sc as usize + 1) * l], &mut out_s);
                for t in 0..(n_col_sets / 2) as u64 {
                    let tc = full_cols ^ t;
                    let table = Table2x2 {
                        n11: in_s[t as usize],
                        n10: in_s[tc as usize],
                        n01: out_s[t as usize],
                        n00: out_s[tc as usize],
                    };
                    for kind in EventKind::ALL {
                        let v = table.best_over_complements(kind);
                        best[kind.index()].offer(v, || {
                            best_variant(&table, kind, (s, t), (full_rows, full_cols), &rs, &cs)
                        });
                    }
                }
            }
            best
        })
        .collect();

    let mut best = [EventOptimum::zero(), EventOptimum::zero(), EventOptimum::zero()];
    for part in partials {
        for (b, p) in best.iter_mut().zip(part) {
            b.merge(p);
        }
    }
    // Report the value re-evaluated on the witness itself.
    for (kind, b) in EventKind::ALL.into_iter().zip(best.iter_mut()) {
        b.value = event_statistic(m, &b.witness, kind);
    }
    Ok(best)
}

/// Among `(S or Sᶜ, T or Tᶜ)`, the variant with the largest statistic and
/// then the smallest tie key.
fn best_variant(
    table: &Table2x2,
    kind: EventKind,
    (s, t): (u64, u64),
    (full_rows, full_cols): (u64, u64),
    rs: &[usize],
    cs: &[usize],
) -> EventPair {
    let mut out: Option<(f64, EventPair)> = None;
    for flip_row in [false, true] {
        for flip_col in [false, true] {
            let mut tb = *table;
            if flip_row {
                tb = tb.swap_rows();
            }
            if flip_col {
                tb = tb.swap_cols();
            }
            let v = tb.statistic(kind);
            let rm = if flip_row { full_rows ^ s } else { s };
            let cm = if flip_col { full_cols ^ t } else { t };
            let e = EventPair::new(decode(rm, rs), decode(cm, cs));
            let better = match &out {
                None => true,
                Some((bv, be)) => {
                    let tol = TIE_RTOL * bv.max(v);
                    v > bv + tol || (v >= bv - tol && e.tie_key() < be.tie_key())
                }
            };
            if better {
                out = Some((v, e));
            }
        }
    }
    out.map(|(_, e)| e).unwrap_or_default()
}
