//! Maximal correlation as the second singular value of the normalized
//! joint matrix `Q[i][j] = p[i][j] / sqrt(r[i] c[j])`.
//!
//! `Q` always has the singular triple `(1, sqrt(r), sqrt(c))`. Subtracting
//! it leaves a matrix whose top singular triple is `(ρ, u, v)`, and
//! `f = u / sqrt(r)`, `g = v / sqrt(c)` are centered, unit-variance functions
//! with `Corr(f, g) = ρ`. Singular values come from a one-sided Jacobi SVD.

use serde::{Deserialize, Serialize};

use super::events::support;
use crate::error::{Error, Result};
use crate::joint_pmf::JointPmf;

pub const DEFAULT_RHO_TOL: f64 = 1e-10;
pub const MAX_SWEEPS: usize = 10_000;

/// Diagnostics of the spectral computation of ρ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoSpectral {
    pub sigma1: f64,
    pub sigma2: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Score functions on the row and column atoms attaining ρ.
/// Zero-mass atoms get score 0. Both vectors are empty for a degenerate space.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FunctionPair {
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl FunctionPair {
    pub fn is_empty(&self) -> bool {
        self.f.is_empty() && self.g.is_empty()
    }

    /// `Corr(f(row), g(col))` under `m`; 0 when either variance vanishes.
    pub fn correlation(&self, m: &JointPmf) -> f64 {
        if self.f.len() != m.rows() || self.g.len() != m.cols() {
            return 0.0;
        }
        correlation(m, &self.f, &self.g)
    }
}

/// `Corr(f(row), g(col))` under `m`, with `0/0 := 0`.
pub fn correlation(m: &JointPmf, f: &[f64], g: &[f64]) -> f64 {
    let marg = m.marginals();
    let mf: f64 = marg.row.iter().zip(f).map(|(r, x)| r * x).sum();
    let mg: f64 = marg.col.iter().zip(g).map(|(c, y)| c * y).sum();
    let vf: f64 = marg.row.iter().zip(f).map(|(r, x)| r * (x - mf).powi(2)).sum();
    let vg: f64 = marg.col.iter().zip(g).map(|(c, y)| c * (y - mg).powi(2)).sum();
    let mut cov = 0.0;
    for (i, fi) in f.iter().enumerate() {
        for (j, gj) in g.iter().enumerate() {
            cov += m.get(i, j) * (fi - mf) * (gj - mg);
        }
    }
    let d = (vf * vg).sqrt();
    if d > 0.0 {
        cov / d
    } else {
        0.0
    }
}

/// Result of [`rho`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoResult {
    pub value: f64,
    pub spectral: RhoSpectral,
    pub witness: FunctionPair,
    /// Fewer than two atoms of positive mass on some side.
    pub degenerate: bool,
}

/// Thin SVD `A = U diag(s) Vᵀ` of a row-major `rows x cols` matrix with
/// `rows >= cols`, by one-sided Jacobi rotations on the columns.
/// Returns `(U as columns, s, V as columns, sweeps)`, sorted by `s` descending.
#[allow(clippy::type_complexity)]
pub(crate) fn jacobi_svd(
    a: &[f64],
    rows: usize,
    cols: usize,
) -> Result<(Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>, usize)> {
    debug_assert!(rows >= cols);
    let mut w: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..rows).map(|i| a[i * cols + j]).collect())
        .collect();
    let mut v: Vec<Vec<f64>> = (0..cols)
        .map(|j| (0..cols).map(|k| if k == j { 1.0 } else { 0.0 }).collect())
        .collect();
    // Columns count as orthogonal below this cosine; a bare epsilon lets
    // rounding noise keep equal singular values rotating forever.
    let threshold = 4.0 * rows as f64 * f64::EPSILON;
    // Columns at rounding-noise size carry no singular value worth resolving.
    let negligible = 1e-30 * a.iter().map(|x| x * x).sum::<f64>();
    let mut sweeps = 0;
    let mut off = 0.0;
    loop {
        if sweeps >= MAX_SWEEPS {
            return Err(Error::ConvergenceFailure {
                iterations: sweeps,
                residual: off,
            });
        }
        sweeps += 1;
        let mut rotated = false;
        off = 0.0;
        for p in 0..cols {
            for q in p + 1..cols {
                let alpha: f64 = w[p].iter().map(|x| x * x).sum();
                let beta: f64 = w[q].iter().map(|x| x * x).sum();
                let gamma: f64 = w[p].iter().zip(&w[q]).map(|(x, y)| x * y).sum();
                let scale = alpha.sqrt() * beta.sqrt();
                if gamma == 0.0 || alpha.min(beta) <= negligible || gamma.abs() <= threshold * scale {
                    continue;
                }
                off = f64::max(off, gamma.abs() / scale);
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (wp, wq) = pair_mut(&mut w, p, q);
                for (x, y) in wp.iter_mut().zip(wq.iter_mut()) {
                    let (xp, xq) = (*x, *y);
                    *x = c * xp - s * xq;
                    *y = s * xp + c * xq;
                }
                let (vp, vq) = pair_mut(&mut v, p, q);
                for (x, y) in vp.iter_mut().zip(vq.iter_mut()) {
                    let (xp, xq) = (*x, *y);
                    *x = c * xp - s * xq;
                    *y = s * xp + c * xq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut triples: Vec<(f64, Vec<f64>, Vec<f64>)> = w
        .into_iter()
        .zip(v)
        .map(|(col, vcol)| {
            let s = col.iter().map(|x| x * x).sum::<f64>().sqrt();
            let u = if s > 0.0 {
                col.iter().map(|x| x / s).collect()
            } else {
                vec![0.0; rows]
            };
            (s, u, vcol)
        })
        .collect();
    triples.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut us = Vec::with_capacity(cols);
    let mut ss = Vec::with_capacity(cols);
    let mut vs = Vec::with_capacity(cols);
    for (s, u, vc) in triples {
        us.push(u);
        ss.push(s);
        vs.push(vc);
    }
    Ok((us, ss, vs, sweeps))
}

fn pair_mut<T>(xs: &mut [T], p: usize, q: usize) -> (&mut T, &mut T) {
    debug_assert!(p < q);
    let (lo, hi) = xs.split_at_mut(q);
    (&mut lo[p], &mut hi[0])
}

/// Top singular triple, handling either orientation.
fn top_triple(a: &[f64], rows: usize, cols: usize) -> Result<(f64, Vec<f64>, Vec<f64>, usize)> {
    if rows >= cols {
        let (u, s, v, it) = jacobi_svd(a, rows, cols)?;
        Ok((s[0], u[0].clone(), v[0].clone(), it))
    } else {
        let mut at = vec![0.0; a.len()];
        for i in 0..rows {
            for j in 0..cols {
                at[j * rows + i] = a[i * cols + j];
            }
        }
        let (u, s, v, it) = jacobi_svd(&at, cols, rows)?;
        Ok((s[0], v[0].clone(), u[0].clone(), it))
    }
}

fn mat_vec(a: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|i| a[i * cols..(i + 1) * cols].iter().zip(x).map(|(p, q)| p * q).sum())
        .collect()
}

fn mat_t_vec(a: &[f64], rows: usize, cols: usize, y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for i in 0..rows {
        for j in 0..cols {
            out[j] += a[i * cols + j] * y[i];
        }
    }
    out
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Removes the component along unit vector `dir` and renormalizes. Falls
/// back to a basis vector when `x` is (numerically) parallel to `dir`.
fn orthonormalize(mut x: Vec<f64>, dir: &[f64]) -> Vec<f64> {
    for _ in 0..2 {
        let d: f64 = x.iter().zip(dir).map(|(a, b)| a * b).sum();
        x.iter_mut().zip(dir).for_each(|(a, b)| *a -= d * b);
    }
    let n = norm(&x);
    if n > 1e-8 {
        return x.into_iter().map(|a| a / n).collect();
    }
    // Basis vector least aligned with dir, projected.
    let k = (0..dir.len())
        .min_by(|&a, &b| dir[a].abs().total_cmp(&dir[b].abs()))
        .unwrap_or(0);
    let mut e = vec![0.0; dir.len()];
    e[k] = 1.0;
    for _ in 0..2 {
        let d: f64 = e.iter().zip(dir).map(|(a, b)| a * b).sum();
        e.iter_mut().zip(dir).for_each(|(a, b)| *a -= d * b);
    }
    let n = norm(&e);
    e.into_iter().map(|a| a / n).collect()
}

/// Maximal correlation of the two σ-fields with a witness function pair.
///
/// Fails with [`Error::ConvergenceFailure`] when the singular-vector residual
/// exceeds `tol`.
pub fn rho(m: &JointPmf, tol: f64) -> Result<RhoResult> {
    if !(tol > 0.0) {
        return Err(Error::OutOfRange {
            name: "tol",
            value: tol,
            range: "(0, inf)",
        });
    }
    let marg = m.marginals();
    let rs = support(&marg.row);
    let cs = support(&marg.col);
    if rs.len() < 2 || cs.len() < 2 {
        return Ok(RhoResult {
            value: 0.0,
            spectral: RhoSpectral {
                sigma1: 1.0,
                sigma2: 0.0,
                iterations: 0,
                residual: 0.0,
            },
            witness: FunctionPair::default(),
            degenerate: true,
        });
    }
    let (k, l) = (rs.len(), cs.len());
    let sr: Vec<f64> = rs.iter().map(|&i| marg.row[i].sqrt()).collect();
    let sc: Vec<f64> = cs.iter().map(|&j| marg.col[j].sqrt()).collect();
    let mut q = vec![0.0; k * l];
    let mut deflated = vec![0.0; k * l];
    for (a, &i) in rs.iter().enumerate() {
        for (b, &j) in cs.iter().enumerate() {
            let p = m.get(i, j);
            q[a * l + b] = p / (sr[a] * sc[b]);
            // (p − r c) / sqrt(r c), formed before dividing to limit cancellation.
            deflated[a * l + b] = (p - marg.row[i] * marg.col[j]) / (sr[a] * sc[b]);
        }
    }
    let (sigma1, _, _, it1) = top_triple(&q, k, l)?;
    let (sigma2, u, v, it2) = top_triple(&deflated, k, l)?;

    let sr_unit = unit(&sr);
    let sc_unit = unit(&sc);
    let v = orthonormalize(v, &sc_unit);
    let u = if sigma2 > 1e-12 {
        orthonormalize(mat_vec(&deflated, k, l, &v), &sr_unit)
    } else {
        orthonormalize(u, &sr_unit)
    };
    let qv = mat_vec(&deflated, k, l, &v);
    let qtu = mat_t_vec(&deflated, k, l, &u);
    let r1: f64 = norm(&qv.iter().zip(&u).map(|(a, b)| a - sigma2 * b).collect::<Vec<_>>());
    let r2: f64 = norm(&qtu.iter().zip(&v).map(|(a, b)| a - sigma2 * b).collect::<Vec<_>>());
    let residual = r1.max(r2);
    let iterations = it1 + it2;
    if !(residual <= tol) {
        return Err(Error::ConvergenceFailure {
            iterations,
            residual,
        });
    }
    let mut f = vec![0.0; m.rows()];
    for (a, &i) in rs.iter().enumerate() {
        f[i] = u[a] / sr[a];
    }
    let mut g = vec![0.0; m.cols()];
    for (b, &j) in cs.iter().enumerate() {
        g[j] = v[b] / sc[b];
    }
    Ok(RhoResult {
        value: sigma2.clamp(0.0, 1.0),
        spectral: RhoSpectral {
            sigma1,
            sigma2,
            iterations,
            residual,
        },
        witness: FunctionPair { f, g },
        degenerate: false,
    })
}

fn unit(x: &[f64]) -> Vec<f64> {
    let n = norm(x);
    x.iter().map(|a| a / n).collect()
}
