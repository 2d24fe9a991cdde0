//! Checkers that evaluate the inequalities and equalities between the
//! dependence measures on concrete instances, and a fuzzing harness that
//! runs them over generated instances.
//!
//! A check never aborts on a violated inequality: the outcome is data
//! ([`CheckResult::pass`]), so the fuzzer can collect and replay failures.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::joint_pmf::{EventPair, JointPmf, RandomStyle};
use crate::measures::{
    exact_event_measures, rho, EventOptimum, ExactCaps, FunctionPair, DEFAULT_RHO_TOL,
};

/// Tolerance for inequalities between exactly enumerated quantities.
pub const EXACT_TOL: f64 = 1e-9;
/// Tolerance for the spectral equality of maximal correlations on joins.
pub const SPECTRAL_TOL: f64 = 1e-8;

/// `t (1 − log t)`, with value 0 at `t = 0`.
pub fn peyre_bound(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        t * (1.0 - t.ln())
    }
}

/// `t (1 − log t)^{1/2}`, with value 0 at `t = 0`.
pub fn two_atom_bound(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        t * (1.0 - t.ln()).sqrt()
    }
}

/// Where an instance came from, enough to regenerate it.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InstanceDigest {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub style: Option<String>,
    pub shapes: Vec<[usize; 2]>,
}

impl InstanceDigest {
    pub fn of(ms: &[&JointPmf]) -> Self {
        InstanceDigest {
            shapes: ms.iter().map(|m| [m.rows(), m.cols()]).collect(),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Witness {
    Events(EventPair),
    Functions(FunctionPair),
}

/// Outcome of one checked instance of `lhs ≤ rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check_name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub pass: bool,
    pub tolerance: f64,
    pub instance_digest: InstanceDigest,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
    /// Matrices of a failing fuzz instance, for replay.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub matrices: Vec<JointPmf>,
}

impl CheckResult {
    pub fn new(
        name: &str,
        lhs: f64,
        rhs: f64,
        tolerance: f64,
        instance_digest: InstanceDigest,
        witness: Option<Witness>,
    ) -> Self {
        let slack = rhs - lhs;
        CheckResult {
            check_name: name.to_string(),
            lhs,
            rhs,
            slack,
            pass: lhs.is_finite() && rhs.is_finite() && slack >= -tolerance,
            tolerance,
            instance_digest,
            witness,
            matrices: Vec::new(),
        }
    }
}

fn exact(m: &JointPmf) -> Result<[EventOptimum; 3]> {
    exact_event_measures(m, ExactCaps::default())
}

/// `λ ≤ τ`, `τ ≤ ρ`, `ρ ≤ ψ` and `τ ≤ 2λ` on one instance.
pub fn check_chain(m: &JointPmf) -> Result<Vec<CheckResult>> {
    let [psi, lambda, tau] = exact(m)?;
    let r = rho(m, DEFAULT_RHO_TOL)?;
    let d = || InstanceDigest::of(&[m]);
    let ev = |e: &EventOptimum| Some(Witness::Events(e.witness.clone()));
    Ok(vec![
        CheckResult::new("lambda<=tau", lambda.value, tau.value, EXACT_TOL, d(), ev(&tau)),
        CheckResult::new(
            "tau<=rho",
            tau.value,
            r.value,
            EXACT_TOL,
            d(),
            Some(Witness::Functions(r.witness.clone())),
        ),
        CheckResult::new("rho<=psi", r.value, psi.value, EXACT_TOL, d(), ev(&psi)),
        CheckResult::new("tau<=2lambda", tau.value, 2.0 * lambda.value, EXACT_TOL, d(), ev(&lambda)),
    ])
}

/// `ρ ≤ τ (1 − log τ)^{1/2}` when the row field has exactly two atoms.
pub fn check_two_atom_bound(m: &JointPmf) -> Result<CheckResult> {
    if m.rows() != 2 {
        return Err(Error::Shape(format!(
            "two-atom bound needs exactly 2 rows, got {}",
            m.rows()
        )));
    }
    let tau = exact(m)?[2].value;
    let r = rho(m, DEFAULT_RHO_TOL)?;
    Ok(CheckResult::new(
        "two_atom_bound",
        r.value,
        two_atom_bound(tau),
        EXACT_TOL,
        InstanceDigest::of(&[m]),
        Some(Witness::Functions(r.witness)),
    ))
}

/// `ρ ≤ τ (1 − log τ)`.
pub fn check_peyre_bound(m: &JointPmf) -> Result<CheckResult> {
    let tau = exact(m)?[2].value;
    let r = rho(m, DEFAULT_RHO_TOL)?;
    Ok(CheckResult::new(
        "peyre_bound",
        r.value,
        peyre_bound(tau),
        EXACT_TOL,
        InstanceDigest::of(&[m]),
        Some(Witness::Functions(r.witness)),
    ))
}

/// `ρ(M1 ⊗ M2) = max(ρ(M1), ρ(M2))`, as two one-sided results.
pub fn check_csaki_fischer(m1: &JointPmf, m2: &JointPmf) -> Result<[CheckResult; 2]> {
    check_csaki_fischer_with_tol(m1, m2, DEFAULT_RHO_TOL)
}

pub fn check_csaki_fischer_with_tol(
    m1: &JointPmf,
    m2: &JointPmf,
    rho_tol: f64,
) -> Result<[CheckResult; 2]> {
    let k = m1.kron(m2)?;
    let joined = rho(&k, rho_tol)?;
    let factors = rho(m1, rho_tol)?.value.max(rho(m2, rho_tol)?.value);
    let d = || InstanceDigest::of(&[m1, m2]);
    Ok([
        CheckResult::new(
            "csaki_fischer_upper",
            joined.value,
            factors,
            SPECTRAL_TOL,
            d(),
            Some(Witness::Functions(joined.witness.clone())),
        ),
        CheckResult::new("csaki_fischer_lower", factors, joined.value, SPECTRAL_TOL, d(), None),
    ])
}

/// Both sides of the bracket on `τ(M1 ⊗ M2)`, plus the unasserted
/// comparison against `ρ(M2)` in place of `ψ(M2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CousinCheck {
    /// `τ(M1 ⊗ M2) ≤ max(τ(M1), ψ(M2))`.
    pub upper: CheckResult,
    /// `max(τ(M1), τ(M2)) ≤ τ(M1 ⊗ M2)`.
    pub lower: CheckResult,
    /// `τ(M1 ⊗ M2) − max(τ(M1), ρ(M2))`. Recorded only.
    pub rho_replacement_excess: f64,
}

impl CousinCheck {
    pub fn results(&self) -> [&CheckResult; 2] {
        [&self.upper, &self.lower]
    }
}

pub fn check_cousin(m1: &JointPmf, m2: &JointPmf) -> Result<CousinCheck> {
    let k = m1.kron(m2)?;
    let joined = exact(&k)?;
    let tau_join = &joined[2];
    let [_, _, tau1] = exact(m1)?;
    let [psi2, _, tau2] = exact(m2)?;
    let rho2 = rho(m2, DEFAULT_RHO_TOL)?.value;
    let d = || InstanceDigest::of(&[m1, m2]);
    Ok(CousinCheck {
        upper: CheckResult::new(
            "cousin_upper",
            tau_join.value,
            tau1.value.max(psi2.value),
            EXACT_TOL,
            d(),
            Some(Witness::Events(tau_join.witness.clone())),
        ),
        lower: CheckResult::new(
            "cousin_lower",
            tau1.value.max(tau2.value),
            tau_join.value,
            EXACT_TOL,
            d(),
            None,
        ),
        rho_replacement_excess: tau_join.value - tau1.value.max(rho2),
    })
}

/// `τ(M1 ⊗ … ⊗ Mn) ≤ max(τ(M1), max_{k≥2} ψ(Mk))`.
pub fn check_cousin_multi(ms: &[JointPmf]) -> Result<CheckResult> {
    let joined = JointPmf::kron_all(ms)?;
    let tau_join = exact(&joined)?[2].clone();
    let mut rhs = exact(&ms[0])?[2].value;
    for m in &ms[1..] {
        rhs = rhs.max(exact(m)?[0].value);
    }
    Ok(CheckResult::new(
        "cousin_multi",
        tau_join.value,
        rhs,
        EXACT_TOL,
        InstanceDigest::of(&ms.iter().collect::<Vec<_>>()),
        Some(Witness::Events(tau_join.witness)),
    ))
}

/// What [`fuzz`] generates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzConfig {
    pub shapes: Vec<(usize, usize)>,
    pub styles: Vec<RandomStyle>,
    pub count: usize,
    pub seed: u64,
}

/// Aggregate of a fuzz run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzReport {
    /// Number of instances generated.
    pub instances: usize,
    /// Number of individual checks evaluated.
    pub total: usize,
    pub checks_run: BTreeMap<String, usize>,
    /// Failing checks in instance order, each with its matrices embedded.
    pub failures: Vec<CheckResult>,
    /// Up to ten smallest-slack results per check, ascending by slack.
    pub near_sharp: Vec<CheckResult>,
    /// Largest `τ(M1 ⊗ M2) − max(τ(M1), ρ(M2))` seen; positive values
    /// would show ψ cannot be replaced by ρ in the cousin bound.
    pub max_rho_replacement_excess: Option<f64>,
    pub rng_seed: u64,
}

const NEAR_SHARP_PER_CHECK: usize = 10;

/// SplitMix64 finalizer, used to derive per-instance seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct InstanceOutcome {
    results: Vec<CheckResult>,
    excess: Option<f64>,
    matrices: Vec<JointPmf>,
}

fn run_instance(cfg: &FuzzConfig, index: usize) -> Result<InstanceOutcome> {
    let (rows, cols) = cfg.shapes[index % cfg.shapes.len()];
    let style = cfg.styles[(index / cfg.shapes.len()) % cfg.styles.len()];
    let s1 = derive_seed(cfg.seed, 2 * index as u64);
    let s2 = derive_seed(cfg.seed, 2 * index as u64 + 1);
    let m1 = JointPmf::random(rows, cols, s1, style)?;
    let m2 = JointPmf::random(rows, cols, s2, style)?;

    let mut results = check_chain(&m1)?;
    results.push(check_peyre_bound(&m1)?);
    if rows == 2 {
        results.push(check_two_atom_bound(&m1)?);
    }
    results.extend(check_csaki_fischer(&m1, &m2)?);
    let caps = ExactCaps::default();
    let mut excess = None;
    if rows * rows <= caps.rows && cols * cols <= caps.cols {
        let c = check_cousin(&m1, &m2)?;
        excess = Some(c.rho_replacement_excess);
        results.push(c.upper);
        results.push(c.lower);
    }
    for r in &mut results {
        r.instance_digest.index = Some(index);
        r.instance_digest.seed = Some(s1);
        r.instance_digest.style = Some(style.name().to_string());
    }
    Ok(InstanceOutcome {
        results,
        excess,
        matrices: vec![m1, m2],
    })
}

/// Runs every applicable checker on `count` generated instances. The
/// outcome depends only on the configuration, not on the thread count.
pub fn fuzz(cfg: &FuzzConfig) -> Result<FuzzReport> {
    if cfg.count > 0 && (cfg.shapes.is_empty() || cfg.styles.is_empty()) {
        return Err(Error::Config("fuzzing needs at least one shape and one style".into()));
    }
    let caps = ExactCaps::default();
    if let Some(&(r, c)) = cfg
        .shapes
        .iter()
        .find(|&&(r, c)| r == 0 || c == 0 || r > caps.rows || c > caps.cols)
    {
        return Err(Error::Config(format!("shape {r}x{c} is outside the exact caps")));
    }
    let outcomes: Vec<InstanceOutcome> = (0..cfg.count)
        .into_par_iter()
        .map(|i| run_instance(cfg, i))
        .collect::<Result<_>>()?;

    let mut report = FuzzReport {
        instances: cfg.count,
        total: 0,
        checks_run: BTreeMap::new(),
        failures: Vec::new(),
        near_sharp: Vec::new(),
        max_rho_replacement_excess: None,
        rng_seed: cfg.seed,
    };
    let mut by_check: BTreeMap<String, Vec<CheckResult>> = BTreeMap::new();
    for outcome in outcomes {
        if let Some(x) = outcome.excess {
            report.max_rho_replacement_excess =
                Some(report.max_rho_replacement_excess.map_or(x, |m| m.max(x)));
        }
        for r in outcome.results {
            report.total += 1;
            *report.checks_run.entry(r.check_name.clone()).or_default() += 1;
            if !r.pass {
                let mut failed = r.clone();
                failed.matrices = outcome.matrices.clone();
                report.failures.push(failed);
            }
            let bucket = by_check.entry(r.check_name.clone()).or_default();
            bucket.push(r);
            if bucket.len() > 4 * NEAR_SHARP_PER_CHECK {
                sort_by_slack(bucket);
                bucket.truncate(NEAR_SHARP_PER_CHECK);
            }
        }
    }
    for (_, mut bucket) in by_check {
        sort_by_slack(&mut bucket);
        bucket.truncate(NEAR_SHARP_PER_CHECK);
        report.near_sharp.extend(bucket);
    }
    sort_by_slack(&mut report.near_sharp);
    Ok(report)
}

fn sort_by_slack(v: &mut [CheckResult]) {
    v.sort_by(|a, b| {
        a.slack
            .total_cmp(&b.slack)
            .then_with(|| a.check_name.cmp(&b.check_name))
            .then_with(|| a.instance_digest.index.cmp(&b.instance_digest.index))
    });
}
