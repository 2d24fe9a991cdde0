//! Explicit constructions: the two-atom `(Y1, Y2)` family, the embellished
//! join, indicator correlations of normalized sums of i.i.d. scores, the
//! Gaussian orthant formulas they converge to, and the calculus facts behind
//! `t (1 − log t) > sin(πt/2)`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint_pmf::{JointPmf, JointPmfFile};
use crate::measures::{exact_tau, rho, DEFAULT_RHO_TOL};
use crate::theorem_suite::{derive_seed, CheckResult, InstanceDigest, EXACT_TOL};

/// Joint law of `(Y1, Y2)` on `{−1, 1}²` with `P(y1, y2) = (1 + t y1 y2) / 4`.
/// Index 0 is `−1`, index 1 is `+1` on both axes.
pub fn yy_pair(t: f64) -> Result<JointPmf> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::OutOfRange {
            name: "t",
            value: t,
            range: "[0, 1]",
        });
    }
    let d = (1.0 + t) / 4.0;
    let o = (1.0 - t) / 4.0;
    let labels = || Some(vec!["-1".to_string(), "+1".to_string()]);
    JointPmf::from_matrix(&[vec![d, o], vec![o, d]], false)?.with_labels(labels(), labels())
}

/// Output of [`embellish`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embellished {
    pub joined: JointPmf,
    pub tau_base: f64,
    pub tau_joined: f64,
    pub rho_base: f64,
    pub rho_joined: f64,
    /// `|τ(joined) − t| ≤ 1e-9`, stated as `|τ(joined) − t| ≤ 0`.
    pub tau_check: CheckResult,
    /// `ρ(base) ≤ ρ(joined)`.
    pub rho_check: CheckResult,
}

impl Embellished {
    pub fn passed(&self) -> bool {
        self.tau_check.pass && self.rho_check.pass
    }
}

/// Joins `base` with an independent `yy_pair(t)`. When `τ(base) ≤ t` the
/// join has `τ = t` exactly, attained by the `(Y1 = 1, Y2 = 1)` events, while
/// ρ can only grow.
pub fn embellish(base: &JointPmf, t: f64) -> Result<Embellished> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::OutOfRange {
            name: "t",
            value: t,
            range: "(0, 1)",
        });
    }
    let tau_base = exact_tau(base)?;
    if tau_base > t + 1e-12 {
        return Err(Error::PreconditionFailed(format!(
            "tau(base) = {tau_base} exceeds t = {t}"
        )));
    }
    let joined = base.kron(&yy_pair(t)?)?;
    let tau_joined = exact_tau(&joined)?;
    let rho_base = rho(base, DEFAULT_RHO_TOL)?.value;
    let rho_joined = rho(&joined, DEFAULT_RHO_TOL)?.value;
    let digest = InstanceDigest::of(&[base]);
    Ok(Embellished {
        tau_check: CheckResult::new("embellish_tau_equals_t", (tau_joined - t).abs(), 0.0, EXACT_TOL, digest.clone(), None),
        rho_check: CheckResult::new("embellish_rho_monotone", rho_base, rho_joined, EXACT_TOL, digest, None),
        joined,
        tau_base,
        tau_joined,
        rho_base,
        rho_joined,
    })
}

fn check_unit_interval(name: &'static str, r: f64) -> Result<()> {
    if (-1.0..=1.0).contains(&r) {
        Ok(())
    } else {
        Err(Error::OutOfRange {
            name,
            value: r,
            range: "[-1, 1]",
        })
    }
}

/// `P(Y > 0, Z > 0) = 1/4 + arcsin(r) / (2π)` for a standard bivariate
/// normal pair with correlation `r`.
pub fn orthant_prob(r: f64) -> Result<f64> {
    check_unit_interval("r", r)?;
    // Same value as the arcsine form, via arccos of |r|, which lands on
    // 1/3 exactly at r = 1/2.
    let q = r.abs().acos() / (2.0 * PI);
    Ok(if r >= 0.0 { 0.5 - q } else { q })
}

/// `(2/π) arcsin r`, the correlation of `I(Y > 0)` and `I(Z > 0)` for the
/// same Gaussian pair.
pub fn clt_limit_corr(r: f64) -> Result<f64> {
    check_unit_interval("r", r)?;
    Ok(r.asin() / FRAC_PI_2)
}

/// A base pair `(V, W)` with centered, unit-variance scores `g(V)`, `h(W)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScoredBaseFile", into = "ScoredBaseFile")]
pub struct ScoredBase {
    pub base: JointPmf,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    /// `Corr(g(V), h(W))`.
    pub r: f64,
}

/// `{"matrix": ..., "g": [...], "h": [...]}`; `r` is written but ignored on input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredBaseFile {
    #[serde(flatten)]
    pub base: JointPmfFile,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

impl TryFrom<ScoredBaseFile> for ScoredBase {
    type Error = Error;

    fn try_from(f: ScoredBaseFile) -> Result<Self> {
        make_scored_base(&JointPmf::from_file(f.base, false)?, &f.g, &f.h)
    }
}

impl From<ScoredBase> for ScoredBaseFile {
    fn from(sb: ScoredBase) -> Self {
        ScoredBaseFile {
            base: sb.base.to_file(),
            g: sb.g,
            h: sb.h,
            r: Some(sb.r),
        }
    }
}

fn standardize(raw: &[f64], weights: &[f64], axis: &'static str) -> Result<Vec<f64>> {
    if raw.len() != weights.len() {
        return Err(Error::Shape(format!(
            "{axis} scores have length {}, expected {}",
            raw.len(),
            weights.len()
        )));
    }
    if raw.iter().any(|x| !x.is_finite()) {
        return Err(Error::Shape(format!("{axis} scores must be finite")));
    }
    let mean: f64 = raw.iter().zip(weights).map(|(x, w)| x * w).sum();
    let var: f64 = raw.iter().zip(weights).map(|(x, w)| w * (x - mean).powi(2)).sum();
    if !(var > 1e-300) {
        return Err(Error::ZeroVariance(axis));
    }
    let sd = var.sqrt();
    Ok(raw.iter().map(|x| (x - mean) / sd).collect())
}

/// Affinely normalizes `g_raw`, `h_raw` to mean 0 and variance 1 under the
/// marginals of `base`.
pub fn make_scored_base(base: &JointPmf, g_raw: &[f64], h_raw: &[f64]) -> Result<ScoredBase> {
    let marg = base.marginals();
    let g = standardize(g_raw, &marg.row, "row")?;
    let h = standardize(h_raw, &marg.col, "column")?;
    let mut r = 0.0;
    for (i, gi) in g.iter().enumerate() {
        for (j, hj) in h.iter().enumerate() {
            r += base.get(i, j) * gi * hj;
        }
    }
    Ok(ScoredBase {
        base: base.clone(),
        g,
        h,
        r: r.clamp(-1.0, 1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CltMethod {
    Exact,
    MonteCarlo,
}

impl std::str::FromStr for CltMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(CltMethod::Exact),
            "mc" | "monte_carlo" | "monte-carlo" => Ok(CltMethod::MonteCarlo),
            other => Err(Error::Config(format!("unknown method {other:?}"))),
        }
    }
}

/// `Corr(I(Y_n > 0), I(Z_n > 0))` for `Y_n = n^{-1/2} Σ g(V_k)`,
/// `Z_n = n^{-1/2} Σ h(W_k)` over i.i.d. copies of the base pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CltEstimate {
    pub n: usize,
    pub value: f64,
    pub stderr: f64,
    pub method: CltMethod,
    pub samples: usize,
    pub p_y: f64,
    pub p_z: f64,
    pub p_yz: f64,
}

/// Cap on `(I·J)^n` for direct enumeration.
pub const ENUMERATION_CAP: f64 = 1e7;
/// Largest common denominator tried when snapping scores to a lattice.
pub const LATTICE_MAX_DENOMINATOR: i64 = 10_000;
/// Cap on `n · cells · pairs` for the lattice convolution.
pub const LATTICE_WORK_CAP: f64 = 2e10;
pub const MIN_MC_SAMPLES: usize = 1000;
/// Monte Carlo sub-streams; fixed so the estimate does not depend on threads.
pub const MC_STREAMS: usize = 64;

fn indicator_corr(p_y: f64, p_z: f64, p_yz: f64) -> f64 {
    let d = (p_y * (1.0 - p_y) * p_z * (1.0 - p_z)).sqrt();
    if d > 0.0 {
        (p_yz - p_y * p_z) / d
    } else {
        0.0
    }
}

/// Integer scores `round(x · D)` for the smallest `D ≤ 10^4` that makes all
/// of them integral to within 1e-9.
fn lattice(xs: &[f64]) -> Option<Vec<i64>> {
    (1..=LATTICE_MAX_DENOMINATOR).find_map(|d| {
        let scaled: Vec<f64> = xs.iter().map(|x| x * d as f64).collect();
        scaled
            .iter()
            .all(|s| (s - s.round()).abs() <= 1e-9 * s.abs().max(1.0))
            .then(|| scaled.iter().map(|s| s.round() as i64).collect())
    })
}

/// Joint cells with positive mass: `(probability, row score, column score)`.
fn cells(sb: &ScoredBase) -> Vec<(f64, usize, usize)> {
    let mut out = Vec::new();
    for i in 0..sb.base.rows() {
        for j in 0..sb.base.cols() {
            let p = sb.base.get(i, j);
            if p > 0.0 {
                out.push((p, i, j));
            }
        }
    }
    out
}

fn exact_lattice(sb: &ScoredBase, n: usize, gi: &[i64], hi: &[i64]) -> Result<(f64, f64, f64)> {
    let cs = cells(sb);
    let (gmin, gmax) = (*gi.iter().min().unwrap(), *gi.iter().max().unwrap());
    let (hmin, hmax) = (*hi.iter().min().unwrap(), *hi.iter().max().unwrap());
    let width_g = (gmax - gmin) as usize * n + 1;
    let width_h = (hmax - hmin) as usize * n + 1;
    let work = n as f64 * width_g as f64 * width_h as f64 * cs.len() as f64;
    if work > LATTICE_WORK_CAP {
        return Err(Error::StateSpaceTooLarge {
            states: work,
            cap: LATTICE_WORK_CAP,
        });
    }
    // Offsets index the shifted sums Σ (g − gmin) and Σ (h − hmin).
    let steps: Vec<(f64, usize, usize)> = cs
        .iter()
        .map(|&(p, i, j)| (p, (gi[i] - gmin) as usize, (hi[j] - hmin) as usize))
        .collect();
    let mut dist = vec![0.0; width_g * width_h];
    dist[0] = 1.0;
    for k in 0..n {
        let (wg, wh) = ((gmax - gmin) as usize * k + 1, (hmax - hmin) as usize * k + 1);
        let mut next = vec![0.0; width_g * width_h];
        for a in 0..wg {
            for b in 0..wh {
                let q = dist[a * width_h + b];
                if q == 0.0 {
                    continue;
                }
                for &(p, da, db) in &steps {
                    next[(a + da) * width_h + b + db] += q * p;
                }
            }
        }
        dist = next;
    }
    let (mut p_y, mut p_z, mut p_yz) = (0.0, 0.0, 0.0);
    for a in 0..width_g {
        let y_pos = a as i64 + gmin * n as i64 > 0;
        for b in 0..width_h {
            let q = dist[a * width_h + b];
            let z_pos = b as i64 + hmin * n as i64 > 0;
            if y_pos {
                p_y += q;
            }
            if z_pos {
                p_z += q;
            }
            if y_pos && z_pos {
                p_yz += q;
            }
        }
    }
    Ok((p_y, p_z, p_yz))
}

fn exact_enumeration(sb: &ScoredBase, n: usize) -> Result<(f64, f64, f64)> {
    let cs = cells(sb);
    let states = (cs.len() as f64).powi(n as i32);
    if states > ENUMERATION_CAP {
        return Err(Error::StateSpaceTooLarge {
            states,
            cap: ENUMERATION_CAP,
        });
    }
    // Depth-first over the n copies.
    fn walk(
        cs: &[(f64, usize, usize)],
        sb: &ScoredBase,
        left: usize,
        p: f64,
        sy: f64,
        sz: f64,
        acc: &mut (f64, f64, f64),
    ) {
        if left == 0 {
            let (y, z) = (sy > 0.0, sz > 0.0);
            if y {
                acc.0 += p;
            }
            if z {
                acc.1 += p;
            }
            if y && z {
                acc.2 += p;
            }
            return;
        }
        for &(q, i, j) in cs {
            walk(cs, sb, left - 1, p * q, sy + sb.g[i], sz + sb.h[j], acc);
        }
    }
    let mut acc = (0.0, 0.0, 0.0);
    walk(&cs, sb, n, 1.0, 0.0, 0.0, &mut acc);
    Ok(acc)
}

/// Delta-method standard error of the plug-in indicator correlation from
/// `samples` multinomial draws of the 2x2 indicator table.
fn delta_stderr(p_y: f64, p_z: f64, p_yz: f64, samples: usize) -> f64 {
    let d = (p_y * (1.0 - p_y) * p_z * (1.0 - p_z)).sqrt();
    if !(d > 0.0) {
        return 0.0;
    }
    let phi = (p_yz - p_y * p_z) / d;
    // Partials with respect to p_y and p_z, then the cell probabilities.
    let d_py = -p_z / d - phi * (1.0 - 2.0 * p_y) / (2.0 * p_y * (1.0 - p_y));
    let d_pz = -p_y / d - phi * (1.0 - 2.0 * p_z) / (2.0 * p_z * (1.0 - p_z));
    let g11 = 1.0 / d + d_py + d_pz;
    let g10 = d_py;
    let g01 = d_pz;
    let p11 = p_yz;
    let p10 = p_y - p_yz;
    let p01 = p_z - p_yz;
    let mean = p11 * g11 + p10 * g10 + p01 * g01;
    let second = p11 * g11 * g11 + p10 * g10 * g10 + p01 * g01 * g01;
    ((second - mean * mean).max(0.0) / samples as f64).sqrt()
}

fn monte_carlo(sb: &ScoredBase, n: usize, samples: usize, seed: u64) -> (f64, f64, f64) {
    let cs = cells(sb);
    let mut cdf = Vec::with_capacity(cs.len());
    let mut acc = 0.0;
    for &(p, _, _) in &cs {
        acc += p;
        cdf.push(acc);
    }
    let total = acc;
    let scores: Vec<(f64, f64)> = cs.iter().map(|&(_, i, j)| (sb.g[i], sb.h[j])).collect();
    let per = samples / MC_STREAMS;
    let extra = samples % MC_STREAMS;
    let counts: Vec<(u64, u64, u64)> = (0..MC_STREAMS)
        .into_par_iter()
        .map(|s| {
            let quota = per + usize::from(s < extra);
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, s as u64));
            let (mut cy, mut cz, mut cyz) = (0u64, 0u64, 0u64);
            for _ in 0..quota {
                let (mut sy, mut sz) = (0.0, 0.0);
                for _ in 0..n {
                    let u = rng.random::<f64>() * total;
                    let k = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
                    sy += scores[k].0;
                    sz += scores[k].1;
                }
                let (y, z) = (sy > 0.0, sz > 0.0);
                cy += u64::from(y);
                cz += u64::from(z);
                cyz += u64::from(y && z);
            }
            (cy, cz, cyz)
        })
        .collect();
    let (cy, cz, cyz) = counts
        .into_iter()
        .fold((0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2));
    let ns = samples as f64;
    (cy as f64 / ns, cz as f64 / ns, cyz as f64 / ns)
}

/// Indicator correlation of the thresholded normalized sums over `n` i.i.d.
/// copies. Exact mode uses a lattice convolution when the scores are
/// lattice-valued and direct enumeration otherwise.
pub fn theorem6_corr(
    sb: &ScoredBase,
    n: usize,
    method: CltMethod,
    samples: usize,
    seed: u64,
) -> Result<CltEstimate> {
    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    match method {
        CltMethod::Exact => {
            let (p_y, p_z, p_yz) = match (lattice(&sb.g), lattice(&sb.h)) {
                (Some(gi), Some(hi)) => exact_lattice(sb, n, &gi, &hi)?,
                _ => exact_enumeration(sb, n)?,
            };
            Ok(CltEstimate {
                n,
                value: indicator_corr(p_y, p_z, p_yz).clamp(-1.0, 1.0),
                stderr: 0.0,
                method,
                samples: 0,
                p_y,
                p_z,
                p_yz,
            })
        }
        CltMethod::MonteCarlo => {
            if samples < MIN_MC_SAMPLES {
                return Err(Error::TooFewSamples {
                    min: MIN_MC_SAMPLES,
                    got: samples,
                });
            }
            let (p_y, p_z, p_yz) = monte_carlo(sb, n, samples, seed);
            Ok(CltEstimate {
                n,
                value: indicator_corr(p_y, p_z, p_yz).clamp(-1.0, 1.0),
                stderr: delta_stderr(p_y, p_z, p_yz, samples),
                method,
                samples,
                p_y,
                p_z,
                p_yz,
            })
        }
    }
}

/// Sampling settings used when exact evaluation is infeasible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub samples: usize,
    pub seed: u64,
}

/// A finite `n` at which the thresholded sums witness `τ > t` for the
/// `n`-fold independent join of the base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem6Witness {
    pub n: usize,
    pub estimate: CltEstimate,
    /// `t ≤ value` (exact) or `t ≤ value − 3·stderr` (Monte Carlo), with
    /// strict excess required before a witness is reported.
    pub check: CheckResult,
}

/// Scans `n = 1..=n_max` for an indicator correlation exceeding `t`.
/// Returns `None` when `r ≤ sin(πt/2)`, where the Gaussian limit
/// `(2/π) arcsin r` cannot exceed `t`.
pub fn theorem6_witness_search(
    t: f64,
    sb: &ScoredBase,
    n_max: usize,
    mc: McSettings,
) -> Result<Option<Theorem6Witness>> {
    if !(t > 0.0 && t < 1.0) {
        return Err(Error::OutOfRange {
            name: "t",
            value: t,
            range: "(0, 1)",
        });
    }
    let tau = exact_tau(&sb.base)?;
    if (tau - t).abs() > EXACT_TOL {
        return Err(Error::PreconditionFailed(format!(
            "tau(base) = {tau} differs from t = {t}"
        )));
    }
    if sb.r <= (FRAC_PI_2 * t).sin() {
        return Ok(None);
    }
    for n in 1..=n_max {
        let est = match theorem6_corr(sb, n, CltMethod::Exact, 0, 0) {
            Ok(e) => e,
            Err(Error::StateSpaceTooLarge { .. }) => {
                theorem6_corr(sb, n, CltMethod::MonteCarlo, mc.samples, derive_seed(mc.seed, n as u64))?
            }
            Err(e) => return Err(e),
        };
        let lower = est.value - 3.0 * est.stderr;
        if lower > t {
            let mut digest = InstanceDigest::of(&[&sb.base]);
            digest.seed = (est.method == CltMethod::MonteCarlo).then(|| derive_seed(mc.seed, n as u64));
            let check = CheckResult::new("theorem6_join_exceeds_t", t, lower, 0.0, digest, None);
            return Ok(Some(Theorem6Witness {
                n,
                estimate: est,
                check,
            }));
        }
    }
    Ok(None)
}

/// Shape of `f(t) = t(1 − log t) − sin(πt/2)` on `(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma7Profile {
    pub grid_points: usize,
    pub grid_min: f64,
    pub grid_argmin: f64,
    /// The root of `f''` in `(0, 1)`.
    pub c_root: f64,
    pub f_at_0: f64,
    pub f_at_1: f64,
    pub fprime_at_1: f64,
    pub fsecond_at_1: f64,
    /// `f'' < 0` at every grid point below `c_root`.
    pub fsecond_negative_below_c: bool,
    /// `f'' > 0` at every grid point above `c_root`.
    pub fsecond_positive_above_c: bool,
}

pub fn lemma7_f(t: f64) -> f64 {
    let entropy = if t > 0.0 { t * (1.0 - t.ln()) } else { 0.0 };
    entropy - (FRAC_PI_2 * t).sin()
}

pub fn lemma7_fprime(t: f64) -> f64 {
    -t.ln() - FRAC_PI_2 * (FRAC_PI_2 * t).cos()
}

pub fn lemma7_fsecond(t: f64) -> f64 {
    -1.0 / t + FRAC_PI_2 * FRAC_PI_2 * (FRAC_PI_2 * t).sin()
}

/// Interior grid `t_k = k / (N + 1)`, `k = 1..=N`, with `(t, f, f'')`.
pub fn lemma7_grid(grid_points: usize) -> Vec<(f64, f64, f64)> {
    let step = 1.0 / (grid_points as f64 + 1.0);
    (1..=grid_points)
        .map(|k| {
            let t = k as f64 * step;
            (t, lemma7_f(t), lemma7_fsecond(t))
        })
        .collect()
}

pub fn lemma7_profile(grid_points: usize) -> Result<Lemma7Profile> {
    if grid_points < 1000 {
        return Err(Error::OutOfRange {
            name: "grid_points",
            value: grid_points as f64,
            range: "[1000, inf)",
        });
    }
    // f'' increases on (0, 1], is negative near 0 and positive at 1.
    let (mut lo, mut hi) = (1e-9, 1.0);
    debug_assert!(lemma7_fsecond(lo) < 0.0 && lemma7_fsecond(hi) > 0.0);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if lemma7_fsecond(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c_root = 0.5 * (lo + hi);
    let grid = lemma7_grid(grid_points);
    let (grid_argmin, grid_min) = grid
        .iter()
        .map(|&(t, f, _)| (t, f))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("grid is nonempty");
    let fsecond_negative_below_c = grid.iter().filter(|g| g.0 < c_root).all(|g| g.2 < 0.0);
    let fsecond_positive_above_c = grid.iter().filter(|g| g.0 > c_root).all(|g| g.2 > 0.0);
    Ok(Lemma7Profile {
        grid_points,
        grid_min,
        grid_argmin,
        c_root,
        f_at_0: lemma7_f(0.0),
        f_at_1: lemma7_f(1.0),
        fprime_at_1: lemma7_fprime(1.0),
        fsecond_at_1: lemma7_fsecond(1.0),
        fsecond_negative_below_c,
        fsecond_positive_above_c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::joint_pmf::RandomStyle;
    use crate::measures::{full_report, MeasureOptions};

    #[test]
    fn yy_pair_endpoints() {
        assert_eq!(yy_pair(0.0).unwrap().entries(), JointPmf::uniform(2, 2).unwrap().entries());
        let one = yy_pair(1.0).unwrap();
        assert_eq!(one.entries(), &[0.5, 0.0, 0.0, 0.5]);
        let r = full_report(&one, &MeasureOptions::exact()).unwrap();
        assert!((r.tau - 1.0).abs() < 1e-15 && (r.rho - 1.0).abs() < 1e-12);
        assert!(matches!(yy_pair(1.5), Err(Error::OutOfRange { .. })));
    }

    #[test]
    fn yy_pair_report_at_point_four() {
        let r = full_report(&yy_pair(0.4).unwrap(), &MeasureOptions::exact()).unwrap();
        assert!((r.psi - 0.4).abs() < 1e-12);
        assert!((r.tau - 0.4).abs() < 1e-12);
        assert!((r.rho - 0.4).abs() < 1e-9);
    }

    #[test]
    fn embellish_outer_product() {
        let base = JointPmf::outer(&[0.3, 0.7], &[0.6, 0.4]).unwrap();
        let e = embellish(&base, 0.3).unwrap();
        assert!(e.passed());
        assert!((e.tau_joined - 0.3).abs() < 1e-9);
        assert!((e.rho_joined - 0.3).abs() < 1e-9);
    }

    #[test]
    fn embellish_yy_base() {
        let e = embellish(&yy_pair(0.2).unwrap(), 0.5).unwrap();
        assert!(e.passed() && (e.tau_joined - 0.5).abs() < 1e-9);
        let e = embellish(&yy_pair(0.5).unwrap(), 0.5).unwrap();
        assert!(e.passed() && (e.tau_joined - 0.5).abs() < 1e-9);
        assert!(matches!(
            embellish(&yy_pair(0.6).unwrap(), 0.5),
            Err(Error::PreconditionFailed(_))
        ));
    }

    #[test]
    fn orthant_values() {
        assert_eq!(orthant_prob(0.0).unwrap(), 0.25);
        assert_eq!(orthant_prob(1.0).unwrap(), 0.5);
        assert_eq!(orthant_prob(0.5).unwrap(), 1.0 / 3.0);
        for k in -1000..=1000 {
            let r = k as f64 / 1000.0;
            let arcsine = 0.25 + r.asin() / (2.0 * PI);
            assert!((orthant_prob(r).unwrap() - arcsine).abs() <= 1e-15);
            assert!((orthant_prob(r).unwrap() + orthant_prob(-r).unwrap() - 0.5).abs() <= 1e-15);
        }
        assert!(orthant_prob(1.01).is_err());
    }

    #[test]
    fn limit_corr_inverts_sine() {
        assert_eq!(clt_limit_corr(0.0).unwrap(), 0.0);
        assert_eq!(clt_limit_corr(1.0).unwrap(), 1.0);
        for k in 1..100 {
            let t = k as f64 / 100.0;
            let r = (FRAC_PI_2 * t).sin();
            assert!((clt_limit_corr(r).unwrap() - t).abs() < 1e-12);
        }
    }

    #[test]
    fn scored_base_from_labels() {
        let sb = make_scored_base(&yy_pair(0.3).unwrap(), &[-1.0, 1.0], &[-1.0, 1.0]).unwrap();
        assert_eq!(sb.g, vec![-1.0, 1.0]);
        assert!((sb.r - 0.3).abs() < 1e-15);
        assert!(matches!(
            make_scored_base(&yy_pair(0.3).unwrap(), &[2.0, 2.0], &[-1.0, 1.0]),
            Err(Error::ZeroVariance("row"))
        ));
    }

    #[test]
    fn scored_base_from_rho_witness() {
        let m = JointPmf::random(3, 4, 5, RandomStyle::Dense).unwrap();
        let r = rho(&m, DEFAULT_RHO_TOL).unwrap();
        let sb = make_scored_base(&m, &r.witness.f, &r.witness.g).unwrap();
        assert!((sb.r - r.value).abs() < 1e-8);
    }

    #[test]
    fn scored_base_json_layout() {
        let sb = make_scored_base(&yy_pair(0.3).unwrap(), &[-1.0, 1.0], &[-1.0, 1.0]).unwrap();
        let s = serde_json::to_string(&sb).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert!(v.get("matrix").is_some() && v.get("g").is_some() && v.get("h").is_some());
        let back: ScoredBase = serde_json::from_str(&s).unwrap();
        assert_eq!(back.g, sb.g);
    }

    #[test]
    fn theorem6_single_copy_is_t() {
        let sb = make_scored_base(&yy_pair(0.5).unwrap(), &[-1.0, 1.0], &[-1.0, 1.0]).unwrap();
        let e = theorem6_corr(&sb, 1, CltMethod::Exact, 0, 0).unwrap();
        assert_eq!(e.value, 0.5);
        assert_eq!(e.stderr, 0.0);
    }

    #[test]
    fn lattice_and_enumeration_agree() {
        let sb = make_scored_base(&yy_pair(0.5).unwrap(), &[-1.0, 1.0], &[-1.0, 1.0]).unwrap();
        for n in 1..=6 {
            let gi = lattice(&sb.g).unwrap();
            let hi = lattice(&sb.h).unwrap();
            let a = exact_lattice(&sb, n, &gi, &hi).unwrap();
            let b = exact_enumeration(&sb, n).unwrap();
            assert!((a.0 - b.0).abs() < 1e-14 && (a.2 - b.2).abs() < 1e-14, "n = {n}");
        }
        // Hand value at n = 2: Y_2 > 0 iff both copies are +1.
        let e = theorem6_corr(&sb, 2, CltMethod::Exact, 0, 0).unwrap();
        assert!((e.value - 5.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let sb = make_scored_base(&yy_pair(0.5).unwrap(), &[-1.0, 1.0], &[-1.0, 1.0]).unwrap();
        let a = theorem6_corr(&sb, 4, CltMethod::MonteCarlo, 5000, 3).unwrap();
        let b = theorem6_corr(&sb, 4, CltMethod::MonteCarlo, 5000, 3).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            theorem6_corr(&sb, 4, CltMethod::MonteCarlo, 999, 3),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn witness_search_gate() {
        let sb = make_scored_base(&yy_pair(0.4).unwrap(), &[-1.0, 1.0], &[-1.0, 1.0]).unwrap();
        let mc = McSettings {
            samples: 10_000,
            seed: 1,
        };
        assert!(theorem6_witness_search(0.4, &sb, 10, mc).unwrap().is_none());
        assert!(matches!(
            theorem6_witness_search(0.3, &sb, 10, mc),
            Err(Error::PreconditionFailed(_))
        ));
    }

    #[test]
    fn lemma7_endpoints() {
        let p = lemma7_profile(1000).unwrap();
        assert_eq!(p.f_at_0, 0.0);
        assert!(p.f_at_1.abs() <= 1e-12);
        assert!(p.fprime_at_1.abs() <= 1e-12);
        assert!(p.c_root > 0.0 && p.c_root < 1.0);
        assert!(lemma7_fsecond(p.c_root).abs() < 1e-6);
        assert!(p.grid_min > 0.0);
        assert!(lemma7_profile(999).is_err());
    }
}
